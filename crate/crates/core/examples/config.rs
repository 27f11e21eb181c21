//! Load a run configuration, apply overrides the way the CLI does, and print
//! the resolved TOML.
//!
//!     TEXTGRID__PPO__LR=1e-4 cargo run --example config

use textgrid::config::RunConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = RunConfig::from_toml("seed = 3\n[env]\nnum_distractors = 4\n")?;
    let cfg = base
        .with_overrides([("TEXTGRID__EVAL__EPISODES", "200"), ("TEXTGRID__POLICY__MODE", "token_scoring")])?
        .with_env_overrides()?;
    cfg.validate()?;
    print!("{}", cfg.to_toml());
    let backend = cfg.build_backend(&cfg.language.lexicon()?)?;
    println!("# backend {} with {} parameters", backend.kind(), backend.params().len());
    Ok(())
}

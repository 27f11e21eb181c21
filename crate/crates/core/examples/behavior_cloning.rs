//! Clone the oracle bot from its own transitions.
//!
//!     cargo run --release --example behavior_cloning -- 20000

use textgrid::env::{EpisodeConfig, TaskFamily};
use textgrid::eval::{run_eval, Agent};
use textgrid::policy::{BuiltinModel, ModelDims, Vocab};
use textgrid::text::Lexicon;
use textgrid::train::{collect_bc_dataset, train_bc, BcConfig, BcSource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20_000);
    let lex = Lexicon::english();
    let env = EpisodeConfig {
        task_families: vec![TaskFamily::GoTo],
        ..EpisodeConfig::default()
    };
    let data = collect_bc_dataset(BcSource::OracleBot, &env, &lex, n, 7)?;
    println!("{} transitions, first prompt:\n{}\n-> {}\n", data.len(), data[0].prompt, data[0].candidates[data[0].action]);

    let mut model = BuiltinModel::action_heads(Vocab::from_lexicon(&lex), 6, ModelDims::default(), 7);
    let cfg = BcConfig::default();
    train_bc(&data, &mut model, &cfg, 7, &mut |s| {
        if s.step % 50 == 0 {
            println!("step {:>4} epoch {} loss {:.4}", s.step, s.epoch, s.loss);
        }
    })?;
    let agent = Agent::Policy {
        backend: &model,
        normalization: cfg.normalization,
        greedy: false,
    };
    let cloned = run_eval(&agent, &env, &lex, 200, &[1, 2])?;
    let random = run_eval(&Agent::Random, &env, &lex, 200, &[1, 2])?;
    println!("cloned {:.3} vs random {:.3}", cloned.success_rate, random.success_rate);
    Ok(())
}

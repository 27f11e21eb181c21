//! How the prompt window slides, and what a lexicon substitution does to it.

use textgrid::env::{EpisodeConfig, TaskFamily};
use textgrid::episode::TextEnv;
use textgrid::text::{Lexicon, SubstitutionTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = EpisodeConfig {
        task_families: vec![TaskFamily::GoTo],
        ..EpisodeConfig::default()
    };
    let mut env = TextEnv::new(cfg.clone(), Lexicon::english(), 7)?;
    for a in [0, 2, 1, 2] {
        println!("{}\n", env.prompt());
        if env.step(a).done {
            break;
        }
    }

    println!("substitution tables: {}", SubstitutionTable::builtin_names().collect::<Vec<_>>().join(", "));
    for lex in [Lexicon::english().with_table("invented_nouns")?, Lexicon::french()] {
        println!("\n{}", TextEnv::new(cfg.clone(), lex, 7)?.prompt());
    }
    Ok(())
}

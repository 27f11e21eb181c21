//! A short PPO run on GoTo with the three navigation actions.
//!
//!     cargo run --release --example ppo -- 60000

use textgrid::env::{derive_seed, seed::streams, ActionSpaceKind, EpisodeConfig, TaskFamily};
use textgrid::eval::{run_eval, Agent};
use textgrid::policy::{BuiltinModel, ModelDims, Normalization, Vocab};
use textgrid::text::Lexicon;
use textgrid::train::{PpoConfig, PpoTrainer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let total: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(60_000);
    let seed = 1;
    let lex = Lexicon::english();
    let env = EpisodeConfig {
        task_families: vec![TaskFamily::GoTo],
        action_space: ActionSpaceKind::Restricted,
        num_distractors: 4,
        ..EpisodeConfig::default()
    };
    let model = BuiltinModel::action_heads(
        Vocab::from_lexicon(&lex),
        3,
        ModelDims::default(),
        derive_seed(seed, streams::INIT, 0),
    );
    let mut trainer = PpoTrainer::new(env.clone(), lex.clone(), Box::new(model), PpoConfig::default(), seed, 1)?;
    trainer.train(total, &mut |m, _| {
        println!(
            "update {:>3} steps {:>6} sr {} kl {:.4} entropy {:.3}",
            m.update,
            m.env_steps,
            m.success_rate.map_or("-".into(), |s| format!("{s:.3}")),
            m.approx_kl,
            m.entropy
        );
        true
    })?;
    let agent = Agent::Policy {
        backend: trainer.backend(),
        normalization: Normalization::default(),
        greedy: false,
    };
    let trained = run_eval(&agent, &env, &lex, 200, &[1, 2])?;
    let random = run_eval(&Agent::Random, &env, &lex, 200, &[1, 2])?;
    println!("trained {:.3} vs random {:.3}", trained.success_rate, random.success_rate);
    Ok(())
}

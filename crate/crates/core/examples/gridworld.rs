//! Generate an episode, show the grid and its text observation, then let the
//! oracle bot solve it.
//!
//!     cargo run --example gridworld -- 42

use textgrid::env::{render_ascii, EpisodeConfig, TaskFamily};
use textgrid::episode::TextEnv;
use textgrid::text::Lexicon;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(42);
    let cfg = EpisodeConfig {
        task_families: vec![TaskFamily::PickUpThenGoTo],
        ..EpisodeConfig::default()
    };
    let mut env = TextEnv::new(cfg, Lexicon::english(), seed)?;
    println!("goal: {}\n{}", env.goal(), render_ascii(env.state()));
    println!("observation: {}\n", env.observe());
    loop {
        let a = env.bot_action()?;
        let name = env.actions()[a].display.clone();
        let o = env.step(a);
        println!("{name:<12} -> {}", env.observe());
        if o.done {
            println!("\nsuccess {} after {} steps, reward {:.3}", o.success, o.steps_used, o.reward);
            return Ok(());
        }
    }
}

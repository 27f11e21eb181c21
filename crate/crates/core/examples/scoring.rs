//! Score the actions of one prompt with both policy modes and both
//! normalizations.

use textgrid::env::{EpisodeConfig, TaskFamily};
use textgrid::episode::TextEnv;
use textgrid::policy::{action_distribution, BuiltinModel, ModelDims, Normalization, PolicyConfig, ScorerBackend, Vocab};
use textgrid::text::Lexicon;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lex = Lexicon::english();
    let cfg = EpisodeConfig {
        task_families: vec![TaskFamily::GoTo],
        ..EpisodeConfig::default()
    };
    let env = TextEnv::new(cfg, lex.clone(), 3)?;
    let prompt = env.prompt();
    let candidates = env.action_displays();
    println!("{prompt}\n");

    let tokens = BuiltinModel::token_scorer(Vocab::from_lexicon(&lex), ModelDims::default(), 1);
    let heads = BuiltinModel::action_heads(Vocab::from_lexicon(&lex), candidates.len(), ModelDims::default(), 1);

    for c in &candidates {
        let lp = tokens.token_logprobs(&prompt, c)?;
        println!("{c:<12} token log-probs {lp:.3?}");
    }
    let raw = tokens.evaluate(&prompt, &candidates, 0..candidates.len(), true)?;
    for n in [Normalization::Renormalize, Normalization::MaxTemperature] {
        let d = action_distribution(&raw.raw, PolicyConfig::tokens(n))?;
        println!("tokens/{n:?}: {:.3?} entropy {:.3}", d.probs, d.entropy);
    }
    let h = heads.evaluate(&prompt, &candidates, 0..candidates.len(), true)?;
    let d = action_distribution(&h.raw, PolicyConfig::heads())?;
    println!("heads: {:.3?} value {:.3}", d.probs, h.value.unwrap_or_default());
    println!("parameters: tokens {}, heads {}", tokens.params().len(), heads.params().len());
    Ok(())
}

//! Baselines, per-task success rates, confidence bounds and the
//! generalization variants, all for the random agent.

use textgrid::env::{EpisodeConfig, TaskFamily};
use textgrid::eval::{hoeffding_epsilon, probe_distributions, run_eval, run_generalization_suite, Agent, GeneralizationVariant, ProbeSet};
use textgrid::policy::{Normalization, UniformScorer};
use textgrid::text::Lexicon;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lex = Lexicon::english();
    let mix = EpisodeConfig {
        task_families: TaskFamily::ALL.to_vec(),
        ..EpisodeConfig::default()
    };
    for agent in [Agent::Random, Agent::Bot] {
        let r = run_eval(&agent, &mix, &lex, 200, &[1, 2])?;
        println!("{}: {:.3} (99% half width {:.3?})", r.agent, r.success_rate, r.ci_half_width);
        for (task, s) in &r.per_task {
            println!("  {:<24} {:.3}", task.name(), s.success_rate);
        }
    }
    println!("hoeffding epsilon at n=1000, delta=0.01: {:.4}\n", hoeffding_epsilon(1000, 0.01)?);

    let goto = EpisodeConfig {
        task_families: vec![TaskFamily::GoTo],
        ..EpisodeConfig::default()
    };
    let variants = [
        GeneralizationVariant::Invented,
        GeneralizationVariant::SynonymActions,
        GeneralizationVariant::FrenchFull,
    ];
    for v in run_generalization_suite(&Agent::Random, &goto, &lex, &variants, 100, &[1, 2])? {
        println!("{:<20} {:.3} ({:+.3})", v.variant.name(), v.report.success_rate, v.delta_vs_no_change);
    }

    let uniform = UniformScorer::heads(1);
    for row in probe_distributions(&uniform, &ProbeSet::default_set(), Normalization::default(), 0)?.iter().take(3) {
        println!("probe {}: {:.3?}", row.name, row.probs);
    }
    Ok(())
}

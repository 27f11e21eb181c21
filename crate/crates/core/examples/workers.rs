//! Two scorer workers over TCP: shard a scoring batch, then run one
//! gradient update and check the replicas still agree.

use std::net::TcpListener;
use std::sync::Arc;
use std::time::Duration;

use textgrid::env::{EpisodeConfig, TaskFamily};
use textgrid::episode::TextEnv;
use textgrid::optim::AdamConfig;
use textgrid::policy::{BuiltinModel, ModelDims, ScorerBackend, Vocab};
use textgrid::service::{serve_listener, Dispatcher, InProcessWorker, ScoreItem, TcpWorker, Worker};
use textgrid::text::Lexicon;
use textgrid::train::{LossConfig, Sample};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lex = Lexicon::english();
    let model = BuiltinModel::token_scorer(Vocab::from_lexicon(&lex), ModelDims::tiny(), 9);
    let mut handles = Vec::new();
    let mut workers: Vec<Box<dyn Worker>> = Vec::new();
    for i in 0..2 {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let w = Arc::new(InProcessWorker::new(format!("w{i}"), model.clone_box(), AdamConfig::default()));
        handles.push(std::thread::spawn(move || serve_listener(w, listener)));
        workers.push(Box::new(TcpWorker::new(addr, Duration::from_secs(10))?));
    }
    let d = Dispatcher::new(workers)?;
    for h in d.hello()? {
        println!("worker ready: {} params, mode {:?}", h.manifest.count, h.mode);
    }

    let cfg = EpisodeConfig {
        task_families: vec![TaskFamily::GoTo],
        ..EpisodeConfig::default()
    };
    let items: Vec<ScoreItem> = (0..4)
        .map(|s| TextEnv::new(cfg.clone(), lex.clone(), s).map(|e| ScoreItem::new(e.prompt(), e.action_displays())))
        .collect::<Result<_, _>>()?;
    for (i, e) in d.score(&items, true)?.iter().enumerate() {
        println!("prompt {i}: scores {:.2?} value {:.3}", e.raw, e.value.unwrap_or_default());
    }

    let samples: Vec<Sample> = items
        .iter()
        .map(|it| Sample {
            prompt: it.prompt.clone(),
            candidates: it.candidates.clone(),
            action: 2,
            old_logprob: -1.8,
            advantage: 1.0,
            ret: 5.0,
        })
        .collect();
    let u = d.update(&samples, &LossConfig::default(), 1e-3, 0.5, &model.manifest().hash)?;
    println!("update over {} shards, grad norm {:.4}, digest {}", u.shards, u.grad_norm, &u.digest[..16]);
    println!("worker digests: {:?}", d.digests()?.iter().map(|s| &s[..16]).collect::<Vec<_>>());
    d.shutdown();
    for h in handles {
        h.join().expect("worker thread")?;
    }
    Ok(())
}

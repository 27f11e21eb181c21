//! Command-line front end. `main.rs` only forwards to [`run`].

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::env::seed::streams;
use crate::env::{derive_seed, read_trace, render_ascii, TaskFamily, TraceHeader, TraceRecord, TraceWriter};
use crate::episode::TextEnv;
use crate::eval::{
    evaluate_episodes, probe_distributions, run_generalization_suite, Agent, EpisodeResult, EvalReport,
    GeneralizationVariant, ProbeSet,
};
use crate::optim::Adam;
use crate::policy::{Checkpoint, ScorerBackend};
use crate::service::{serve_worker, Dispatcher, InProcessWorker, TcpWorker, Worker};
use crate::text::Lexicon;
use crate::train::{collect_bc_dataset, read_dataset, train_bc, write_dataset, BcSource, PpoTrainer};

pub type AppResult<T = ()> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

const CHECKPOINT_FILE: &str = "checkpoint.bin";

#[derive(Debug, Parser)]
#[command(name = "textgrid", version, about = "Text gridworld agents: training, evaluation and scoring workers")]
pub struct Cli {
    /// TOML run configuration. `TEXTGRID__SECTION__KEY` variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory, overriding the config.
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy with PPO.
    TrainPpo(TrainPpoArgs),
    /// Behavioral cloning from a recorded or freshly collected dataset.
    TrainBc(TrainBcArgs),
    /// Record (prompt, action) pairs to JSONL.
    Collect(CollectArgs),
    /// Success rates over fixed evaluation seeds.
    Eval(EvalArgs),
    /// Evaluate under the vocabulary and task generalization variants.
    Generalize(GeneralizeArgs),
    /// Action distributions on the probe prompts.
    Probe(ProbeArgs),
    /// Serve a scorer replica over TCP.
    ServeWorker(ServeArgs),
    /// Play an episode from the keyboard: one digit per action, `q` quits.
    Play(PlayArgs),
    /// Re-execute a trace and check that it reproduces.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyChoice {
    Random,
    Bot,
    Checkpoint,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[arg(long, value_enum, default_value_t = PolicyChoice::Checkpoint)]
    pub policy: PolicyChoice,
    /// Checkpoint to load; defaults to the config's, then the run directory's.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Take the most likely action instead of sampling.
    #[arg(long)]
    pub greedy: bool,
}

#[derive(Debug, Args)]
pub struct TrainPpoArgs {
    #[arg(long)]
    pub total_steps: Option<u64>,
    /// Continue from the run directory's checkpoint (or `--checkpoint`).
    #[arg(long)]
    pub resume: bool,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// In-process scorer workers.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainBcArgs {
    /// JSONL dataset from `collect`; collected from the oracle bot when absent.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long)]
    pub n: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Restrict evaluation to one task family.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Write a step-by-step trace of every episode.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GeneralizeArgs {
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<GeneralizationVariant>>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// JSON probe file; the built-in set when absent.
    #[arg(long)]
    pub probes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7070")]
    pub listen: String,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    /// Episode seed; derived from the master seed when absent.
    #[arg(long)]
    pub env_seed: Option<u64>,
    #[arg(long)]
    pub no_render: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Print the grid after every step.
    #[arg(long)]
    pub render: bool,
}

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

fn resolve_config(cli: &Cli) -> AppResult<RunConfig> {
    let base = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut cfg = base.with_env_overrides()?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.run_dir {
        cfg.run_dir = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn checkpoint_path(cfg: &RunConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.policy.checkpoint.clone())
        .unwrap_or_else(|| cfg.run_dir.join(CHECKPOINT_FILE))
}

fn load_backend(path: &Path) -> AppResult<Box<dyn ScorerBackend>> {
    Ok(Checkpoint::load(path)
        .and_then(Checkpoint::into_backend)
        .map_err(|e| format!("{}: {e}", path.display()))?)
}

fn make_agent<'a>(
    args: &PolicyArgs,
    backend: Option<&'a dyn ScorerBackend>,
    cfg: &RunConfig,
) -> Agent<'a> {
    match (args.policy, backend) {
        (PolicyChoice::Random, _) => Agent::Random,
        (PolicyChoice::Bot, _) => Agent::Bot,
        (PolicyChoice::Checkpoint, Some(b)) => Agent::Policy {
            backend: b,
            normalization: cfg.policy.normalization,
            greedy: args.greedy || cfg.eval.greedy,
        },
        (PolicyChoice::Checkpoint, None) => unreachable!("checkpoint policy without a backend"),
    }
}

fn policy_backend(args: &PolicyArgs, cfg: &RunConfig) -> AppResult<Option<Box<dyn ScorerBackend>>> {
    match args.policy {
        PolicyChoice::Checkpoint => Ok(Some(load_backend(&checkpoint_path(cfg, args.checkpoint.as_deref()))?)),
        _ => Ok(None),
    }
}

fn append_jsonl<T: serde::Serialize>(path: &Path, value: &T) -> AppResult {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    serde_json::to_writer(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn remote_dispatcher(cfg: &RunConfig) -> AppResult<Dispatcher> {
    let timeout = Duration::from_secs(cfg.service.timeout_secs);
    let workers = cfg
        .service
        .addresses
        .iter()
        .map(|a| Ok(Box::new(TcpWorker::new(a.as_str(), timeout)?) as Box<dyn Worker>))
        .collect::<AppResult<Vec<_>>>()?;
    Ok(Dispatcher::new(workers)?)
}

/// Parse arguments and run; the return value is the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    match run(cli, &mut stdin.lock(), &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> AppResult {
    let cfg = resolve_config(&cli)?;
    match &cli.command {
        Command::TrainPpo(a) => train_ppo(&cfg, a, out),
        Command::TrainBc(a) => train_bc_cmd(&cfg, a, out),
        Command::Collect(a) => collect(&cfg, a, out),
        Command::Eval(a) => eval(&cfg, a, out),
        Command::Generalize(a) => generalize(&cfg, a, out),
        Command::Probe(a) => probe(&cfg, a, out),
        Command::ServeWorker(a) => serve(&cfg, a, out),
        Command::Play(a) => play(&cfg, a, input, out),
        Command::Replay(a) => replay(&cfg, a, out),
    }
}

fn train_ppo(cfg: &RunConfig, args: &TrainPpoArgs, out: &mut dyn Write) -> AppResult {
    let mut cfg = cfg.clone();
    if let Some(w) = args.workers {
        cfg.service.workers = w;
    }
    if let Some(s) = args.total_steps {
        cfg.total_steps = s;
    }
    cfg.validate()?;
    cfg.snapshot()?;
    let lexicon = cfg.language.lexicon()?;
    let ckpt_path = checkpoint_path(&cfg, args.checkpoint.as_deref());
    let remote = !cfg.service.addresses.is_empty();
    let mut trainer = if args.resume {
        let ckpt = Checkpoint::load(&ckpt_path)?;
        if remote {
            PpoTrainer::resume_with_dispatcher(ckpt, remote_dispatcher(&cfg)?)?
        } else {
            PpoTrainer::resume(ckpt, cfg.service.workers)?
        }
    } else {
        let backend = cfg.build_backend(&lexicon)?;
        if remote {
            let adam = Adam::new(cfg.ppo.adam, backend.params().len());
            PpoTrainer::with_dispatcher(
                cfg.env.clone(),
                lexicon,
                backend,
                adam,
                cfg.ppo,
                cfg.seed,
                remote_dispatcher(&cfg)?,
            )?
        } else {
            PpoTrainer::new(cfg.env.clone(), lexicon, backend, cfg.ppo, cfg.seed, cfg.service.workers)?
        }
    };
    trainer.set_probes(ProbeSet::default_set().usable_by(trainer.backend())?.score_items());
    let _ = ctrlc::set_handler(|| INTERRUPTED.store(true, Ordering::SeqCst));
    INTERRUPTED.store(false, Ordering::SeqCst);

    let metrics_path = cfg.run_dir.join("metrics.jsonl");
    let mut last_good = trainer.checkpoint();
    let mut io_error: Option<String> = None;
    writeln!(
        out,
        "training from update {} ({} env steps) to {} steps, {} worker(s)",
        trainer.update_count(),
        trainer.env_steps(),
        cfg.total_steps,
        trainer.dispatcher().len()
    )?;
    let result = trainer.train(cfg.total_steps, &mut |m, t| {
        last_good = t.checkpoint();
        let mut io = || -> AppResult {
            append_jsonl(&metrics_path, m)?;
            if m.update % cfg.checkpoint_every == 0 {
                last_good.save(&ckpt_path)?;
            }
            writeln!(
                out,
                "update {:>5}  steps {:>9}  sr {}  return {}  loss {:>8.4}  kl {:>7.4}",
                m.update,
                m.env_steps,
                m.success_rate.map_or("  -  ".into(), |s| format!("{s:.3}")),
                m.mean_return.map_or("   -  ".into(), |r| format!("{r:>6.2}")),
                m.total_loss,
                m.approx_kl
            )?;
            Ok(())
        };
        if let Err(e) = io() {
            io_error = Some(e.to_string());
            return false;
        }
        !INTERRUPTED.load(Ordering::SeqCst)
    });
    last_good.save(&ckpt_path)?;
    trainer.dispatcher().shutdown();
    if let Some(e) = io_error {
        return Err(e.into());
    }
    result?;
    if INTERRUPTED.load(Ordering::SeqCst) {
        writeln!(out, "interrupted; checkpoint written to {}", ckpt_path.display())?;
    } else {
        writeln!(out, "done; checkpoint written to {}", ckpt_path.display())?;
    }
    Ok(())
}

fn train_bc_cmd(cfg: &RunConfig, args: &TrainBcArgs, out: &mut dyn Write) -> AppResult {
    cfg.snapshot()?;
    let lexicon = cfg.language.lexicon()?;
    let dataset = match &args.dataset {
        Some(p) => read_dataset(BufReader::new(std::fs::File::open(p)?))?,
        None => {
            let n = args.size.unwrap_or(cfg.bc.dataset_size);
            writeln!(out, "collecting {n} oracle transitions")?;
            collect_bc_dataset(BcSource::OracleBot, &cfg.env, &lexicon, n, cfg.seed)?
        }
    };
    let mut backend = cfg.build_backend(&lexicon)?;
    let log = cfg.run_dir.join("bc_metrics.jsonl");
    let mut io_error = None;
    let steps = train_bc(&dataset, backend.as_mut(), &cfg.bc, cfg.seed, &mut |s| {
        if io_error.is_none() {
            if let Err(e) = append_jsonl(&log, s) {
                io_error = Some(e.to_string());
            }
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    let path = args.out.clone().unwrap_or_else(|| cfg.run_dir.join("bc.bin"));
    Checkpoint::capture(backend.as_ref(), None, serde_json::Value::Null).save(&path)?;
    let last = steps.last().map_or(f64::NAN, |s| s.loss);
    writeln!(
        out,
        "{} records, {} steps, final loss {last:.4}; model written to {}",
        dataset.len(),
        steps.len(),
        path.display()
    )?;
    Ok(())
}

fn collect(cfg: &RunConfig, args: &CollectArgs, out: &mut dyn Write) -> AppResult {
    let lexicon = cfg.language.lexicon()?;
    let backend = policy_backend(&args.policy, cfg)?;
    let source = match (args.policy.policy, backend.as_deref()) {
        (PolicyChoice::Bot, _) => BcSource::OracleBot,
        (PolicyChoice::Checkpoint, Some(b)) => BcSource::Policy {
            backend: b,
            normalization: cfg.policy.normalization,
            greedy: args.policy.greedy,
        },
        _ => return Err("collect supports --policy bot or checkpoint".into()),
    };
    let n = args.n.unwrap_or(cfg.bc.dataset_size);
    let records = collect_bc_dataset(source, &cfg.env, &lexicon, n, cfg.seed)?;
    match &args.out {
        Some(p) => {
            let mut w = BufWriter::new(std::fs::File::create(p)?);
            write_dataset(&mut w, &records)?;
            let episodes = records.last().map_or(0, |r| r.episode + 1);
            writeln!(out, "{} records from {episodes} episodes written to {}", records.len(), p.display())?;
        }
        None => write_dataset(out, &records)?,
    }
    Ok(())
}

/// Sequential evaluation that also writes a trace. Seeds and sampling
/// streams match [`evaluate_episodes`], so the results are identical.
fn traced_eval(
    agent: &Agent<'_>,
    env_config: &crate::env::EpisodeConfig,
    lexicon: &Lexicon,
    episodes: usize,
    seeds: &[u64],
    path: &Path,
) -> AppResult<Vec<EpisodeResult>> {
    let mut w = TraceWriter::new(BufWriter::new(std::fs::File::create(path)?));
    let mut results = Vec::new();
    for &seed in seeds {
        for i in 0..episodes {
            let env_seed = derive_seed(seed, streams::EVAL, i as u64);
            let mut env = TextEnv::new(env_config.clone(), lexicon.clone(), env_seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::EVAL + 1, i as u64));
            w.header(TraceHeader {
                seed: env_seed,
                config: env_config.clone(),
                task: env.task().clone(),
                goal: env.goal().to_string(),
            })?;
            let mut total = 0.0;
            loop {
                let a = agent.act(&env, &mut rng)?;
                let action = env.actions()[a].display.clone();
                let o = env.step(a);
                total += o.reward;
                w.record(TraceRecord {
                    seed: env_seed,
                    step: o.steps_used,
                    action,
                    reward: o.reward,
                    done: o.done,
                    success: o.success,
                })?;
                if o.done {
                    results.push(EpisodeResult {
                        seed,
                        episode: i,
                        env_seed,
                        family: env.task().family,
                        success: o.success,
                        reward: total,
                        steps: o.steps_used,
                    });
                    break;
                }
            }
        }
    }
    Ok(results)
}

fn eval(cfg: &RunConfig, args: &EvalArgs, out: &mut dyn Write) -> AppResult {
    let lexicon = cfg.language.lexicon()?;
    let mut env_config = cfg.env.clone();
    if let Some(t) = &args.task {
        let family = TaskFamily::from_name(t).ok_or_else(|| format!("unknown task {t:?}"))?;
        env_config.task_families = vec![family];
    }
    let episodes = args.episodes.unwrap_or(cfg.eval.episodes);
    let seeds = args.seeds.clone().unwrap_or_else(|| cfg.eval.seeds.clone());
    let backend = policy_backend(&args.policy, cfg)?;
    let agent = make_agent(&args.policy, backend.as_deref(), cfg);
    let results = match &args.trace {
        Some(p) => traced_eval(&agent, &env_config, &lexicon, episodes, &seeds, p)?,
        None => evaluate_episodes(&agent, &env_config, &lexicon, episodes, &seeds)?,
    };
    let report = EvalReport::from_episodes(agent.name(), &seeds, &results);
    write_report(&report, out)?;
    if let Some(p) = &args.out {
        std::fs::write(p, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

fn write_report(r: &EvalReport, out: &mut dyn Write) -> AppResult {
    let ci = r.ci_half_width.map_or(String::new(), |h| format!(" ± {h:.3}"));
    writeln!(
        out,
        "{}: success rate {:.3}{ci} over {} episodes, mean return {:.2}, mean steps {:.1}",
        r.agent, r.success_rate, r.episodes, r.mean_return, r.mean_steps
    )?;
    for (family, t) in &r.per_task {
        writeln!(out, "  {:<22} {:.3} ({}/{})", family.name(), t.success_rate, t.successes, t.episodes)?;
    }
    Ok(())
}

fn generalize(cfg: &RunConfig, args: &GeneralizeArgs, out: &mut dyn Write) -> AppResult {
    let lexicon = cfg.language.lexicon()?;
    let variants = args.variants.clone().unwrap_or_else(|| GeneralizationVariant::ALL.to_vec());
    let episodes = args.episodes.unwrap_or(cfg.eval.episodes);
    let seeds = args.seeds.clone().unwrap_or_else(|| cfg.eval.seeds.clone());
    let backend = policy_backend(&args.policy, cfg)?;
    let agent = make_agent(&args.policy, backend.as_deref(), cfg);
    let reports = run_generalization_suite(&agent, &cfg.env, &lexicon, &variants, episodes, &seeds)?;
    for v in &reports {
        writeln!(
            out,
            "{:<22} {:.3}  ({:+.3})",
            v.variant.name(),
            v.report.success_rate,
            v.delta_vs_no_change
        )?;
    }
    if let Some(p) = &args.out {
        std::fs::write(p, serde_json::to_string_pretty(&reports)?)?;
    }
    Ok(())
}

fn probe(cfg: &RunConfig, args: &ProbeArgs, out: &mut dyn Write) -> AppResult {
    let backend = load_backend(&checkpoint_path(cfg, args.checkpoint.as_deref()))?;
    let probes = match &args.probes {
        Some(p) => ProbeSet::load(p)?,
        None => ProbeSet::default_set(),
    }
    .usable_by(backend.as_ref())?;
    if probes.is_empty() {
        return Err("no probe matches the model's action count".into());
    }
    for row in probe_distributions(backend.as_ref(), &probes, cfg.policy.normalization, 0)? {
        serde_json::to_writer(&mut *out, &row)?;
        writeln!(out)?;
    }
    Ok(())
}

fn serve(cfg: &RunConfig, args: &ServeArgs, out: &mut dyn Write) -> AppResult {
    let lexicon = cfg.language.lexicon()?;
    let (backend, adam) = match args.checkpoint.as_ref().or(cfg.policy.checkpoint.as_ref()) {
        Some(p) => {
            let ckpt = Checkpoint::load(p)?;
            let n = ckpt.params.len();
            let adam = ckpt.optimizer.clone().unwrap_or_else(|| Adam::new(cfg.ppo.adam, n));
            (ckpt.into_backend()?, adam)
        }
        None => {
            let b = cfg.build_backend(&lexicon)?;
            let adam = Adam::new(cfg.ppo.adam, b.params().len());
            (b, adam)
        }
    };
    let worker = Arc::new(InProcessWorker::with_optimizer(args.listen.clone(), backend, adam));
    writeln!(out, "serving {} on {}", worker.describe(), args.listen)?;
    out.flush()?;
    serve_worker(worker, args.listen.as_str())?;
    Ok(())
}

fn play(cfg: &RunConfig, args: &PlayArgs, input: &mut dyn BufRead, out: &mut dyn Write) -> AppResult {
    let lexicon = cfg.language.lexicon()?;
    let seed = args.env_seed.unwrap_or_else(|| derive_seed(cfg.seed, streams::EVAL, 0));
    let mut env = TextEnv::new(cfg.env.clone(), lexicon, seed)?;
    let menu: Vec<String> = env
        .action_displays()
        .iter()
        .enumerate()
        .map(|(i, a)| format!("{i}: {a}"))
        .collect();
    writeln!(out, "episode seed {seed}\n{}", menu.join("  "))?;
    let show = |env: &TextEnv, out: &mut dyn Write| -> AppResult {
        if !args.no_render {
            writeln!(out, "{}", render_ascii(env.state()))?;
        }
        writeln!(out, "{}", env.prompt())?;
        Ok(())
    };
    show(&env, out)?;
    let mut total = 0.0;
    let mut byte = [0u8; 1];
    loop {
        if input.read(&mut byte)? == 0 {
            writeln!(out, "input closed")?;
            return Ok(());
        }
        let c = byte[0];
        if c.is_ascii_whitespace() {
            continue;
        }
        if c == b'q' {
            writeln!(out, "quit")?;
            return Ok(());
        }
        let idx = match (c as char).to_digit(10) {
            Some(d) if (d as usize) < env.actions().len() => d as usize,
            _ => {
                writeln!(out, "unknown key {:?}", c as char)?;
                continue;
            }
        };
        let o = env.step(idx);
        total += o.reward;
        if o.done {
            writeln!(
                out,
                "{} after {} steps, return {total:.2}",
                if o.success { "success" } else { "failure" },
                o.steps_used
            )?;
            return Ok(());
        }
        show(&env, out)?;
    }
}

fn replay(cfg: &RunConfig, args: &ReplayArgs, out: &mut dyn Write) -> AppResult {
    let lexicon = cfg.language.lexicon()?;
    let episodes = read_trace(BufReader::new(std::fs::File::open(&args.trace)?))?;
    if episodes.is_empty() {
        return Err("trace holds no episodes".into());
    }
    for (k, (header, steps)) in episodes.iter().enumerate() {
        let mut env = TextEnv::new(header.config.clone(), lexicon.clone(), header.seed)?;
        if env.task() != &header.task || env.goal() != header.goal {
            return Err(format!(
                "episode {k}: regenerated task {:?} does not match the trace ({:?}); wrong language config?",
                env.goal(),
                header.goal
            )
            .into());
        }
        for (j, r) in steps.iter().enumerate() {
            let a = env
                .actions()
                .iter()
                .position(|t| t.display == r.action)
                .ok_or_else(|| format!("episode {k} step {j}: unknown action {:?}", r.action))?;
            let o = env.step(a);
            if o.reward != r.reward || o.done != r.done || o.success != r.success || o.steps_used != r.step {
                return Err(format!("episode {k} step {j}: outcome {o:?} differs from the trace").into());
            }
            if args.render {
                writeln!(out, "{}\n{}", r.action, render_ascii(env.state()))?;
            }
        }
        let last = steps.last();
        writeln!(
            out,
            "episode {k}: reproduced {} steps, {}",
            steps.len(),
            match last {
                Some(r) if r.success => "success",
                Some(r) if r.done => "failure",
                _ => "unfinished",
            }
        )?;
    }
    Ok(())
}

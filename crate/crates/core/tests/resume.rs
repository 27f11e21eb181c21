use textgrid::env::{ActionSpaceKind, EpisodeConfig, TaskFamily};
use textgrid::policy::{BuiltinModel, Checkpoint, ModelDims, Vocab};
use textgrid::text::Lexicon;
use textgrid::train::{PpoConfig, PpoTrainer};

fn trainer(workers: usize) -> PpoTrainer {
    let lex = Lexicon::english();
    let env = EpisodeConfig {
        action_space: ActionSpaceKind::Restricted,
        num_distractors: 3,
        task_families: vec![TaskFamily::GoTo],
        max_steps: 20,
        ..EpisodeConfig::default()
    };
    let cfg = PpoConfig {
        num_envs: 3,
        steps_per_env: 12,
        batch_size: 9,
        epochs: 2,
        ..PpoConfig::default()
    };
    let backend = Box::new(BuiltinModel::action_heads(Vocab::from_lexicon(&lex), 3, ModelDims::tiny(), 8));
    PpoTrainer::new(env, lex, backend, cfg, 21, workers).unwrap()
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let mut straight = trainer(1);
    let expected: Vec<_> = (0..4).map(|_| straight.step_update().unwrap()).collect();

    let mut first = trainer(1);
    let mut got = vec![first.step_update().unwrap(), first.step_update().unwrap()];
    let bytes = first.checkpoint().to_bytes();
    drop(first);
    let mut resumed = PpoTrainer::resume(Checkpoint::from_bytes(&bytes).unwrap(), 1).unwrap();
    assert_eq!(resumed.update_count(), 2);
    got.push(resumed.step_update().unwrap());
    got.push(resumed.step_update().unwrap());

    assert_eq!(got, expected);
    assert_eq!(resumed.backend().params(), straight.backend().params());
    assert_eq!(resumed.optimizer(), straight.optimizer());
}

#[test]
fn checkpoint_file_round_trip() {
    let mut t = trainer(1);
    t.step_update().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.bin");
    t.checkpoint().save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded, t.checkpoint());
    std::fs::write(&path, &loaded.to_bytes()[..40]).unwrap();
    assert!(Checkpoint::load(&path).is_err());
}

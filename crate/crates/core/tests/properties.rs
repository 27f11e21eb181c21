use proptest::prelude::*;

use textgrid::env::{derive_seed, english_actions, ActionSpaceKind, EpisodeConfig, TaskFamily};
use textgrid::episode::TextEnv;
use textgrid::policy::{action_distribution, Normalization, PolicyConfig};
use textgrid::prompt::{build_prompt, HistoryBuffer};
use textgrid::service::protocol::{read_frame, write_frame, Frame};
use textgrid::text::{contains_phrase, Lexicon, ObservationText};
use textgrid::train::compute_gae;

fn obs(s: &str) -> ObservationText {
    ObservationText { lines: vec![s.to_string()] }
}

proptest! {
    #[test]
    fn prompt_window_never_exceeds_three_observations(steps in 0usize..12) {
        let mut h = HistoryBuffer::new();
        h.reset(obs("o0"));
        for i in 1..=steps {
            h.record_action(format!("a{}", i - 1));
            h.push_observation(obs(&format!("o{i}")));
        }
        let p = build_prompt(&english_actions(ActionSpaceKind::Canonical), "goal", &h).unwrap();
        let n_obs = p.lines().filter(|l| l.starts_with("Obs. ")).count();
        let filled = p.lines().filter(|l| l.starts_with("Action ") && !l.ends_with(':')).count();
        prop_assert_eq!(n_obs, (steps + 1).min(3));
        prop_assert_eq!(filled, steps.min(2));
        let open = format!("Action {}:", n_obs - 1);
        prop_assert!(p.ends_with(&open));
        let expected_last = format!("Obs. {}: o{}", n_obs - 1, steps);
        prop_assert!(p.lines().any(|l| l == expected_last));
    }

    #[test]
    fn prompts_differing_in_goal_differ_only_in_goal_line(seed in any::<u64>(), moves in prop::collection::vec(0usize..6, 0..5)) {
        let cfg = EpisodeConfig { task_families: vec![TaskFamily::GoTo], ..EpisodeConfig::default() };
        let mut env = TextEnv::new(cfg, Lexicon::english(), seed).unwrap();
        for m in moves {
            if env.is_done() { break; }
            env.step(m);
        }
        if !env.is_done() {
            let a = env.prompt();
            let b = a.replacen(env.goal(), "go to the purple box", 1);
            let diff: Vec<_> = a.lines().zip(b.lines()).filter(|(x, y)| x != y).collect();
            prop_assert!(diff.len() <= 1);
            prop_assert!(diff.iter().all(|(x, _)| x.starts_with("Goal of the agent:")));
        }
    }

    #[test]
    fn distributions_are_normalized(raw in prop::collection::vec(-60.0f64..0.0, 1..12), renorm in any::<bool>()) {
        let n = if renorm { Normalization::Renormalize } else { Normalization::MaxTemperature };
        for cfg in [PolicyConfig::tokens(n), PolicyConfig::heads()] {
            let d = action_distribution(&raw, cfg).unwrap();
            prop_assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(d.probs.iter().all(|p| *p >= 0.0));
            prop_assert!(d.entropy >= 0.0 && d.entropy <= (raw.len() as f64).ln() + 1e-9);
        }
    }

    #[test]
    fn frames_round_trip(id in any::<u64>(), kind in "[A-Z_]{1,12}", text in ".*", x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let f = Frame { id, kind, payload: serde_json::json!({"text": text, "x": x}) };
        let mut buf = Vec::new();
        write_frame(&mut buf, &f).unwrap();
        let back = read_frame(&mut buf.as_slice()).unwrap().unwrap();
        prop_assert_eq!(back.payload["x"].as_f64().unwrap().to_bits(), x.to_bits());
        prop_assert_eq!(back, f);
    }

    #[test]
    fn gae_without_discounting_sums_rewards(rewards in prop::collection::vec(-5.0f64..5.0, 1..30)) {
        let n = rewards.len();
        let values = vec![0.0; n];
        let mut dones = vec![false; n];
        dones[n - 1] = true;
        let (adv, _) = compute_gae(&rewards, &values, &dones, 123.0, 1.0, 1.0).unwrap();
        for t in 0..n {
            let tail: f64 = rewards[t..].iter().sum();
            prop_assert!((adv[t] - tail).abs() < 1e-9);
        }
    }

    #[test]
    fn seeds_are_deterministic_and_stream_separated(master in any::<u64>(), counter in any::<u64>()) {
        prop_assert_eq!(derive_seed(master, 1, counter), derive_seed(master, 1, counter));
        prop_assert_ne!(derive_seed(master, 1, counter), derive_seed(master, 2, counter));
    }

    #[test]
    fn phrase_match_is_whole_word(word in "[a-z]{2,8}") {
        let prefixed = format!("x{word}");
        let sentence = format!("you see {prefixed} here");
        prop_assert!(!contains_phrase(&sentence, &word));
        let sentence = format!("you see {word}, here");
        prop_assert!(contains_phrase(&sentence, &word));
    }
}

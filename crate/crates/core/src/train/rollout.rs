use serde::{Deserialize, Serialize};

use super::{compute_gae, Sample, TrainError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub prompt: String,
    pub action: usize,
    pub old_logprob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
}

/// Transitions from `num_envs` environments, kept in per-environment order.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutBuffer {
    steps_per_env: usize,
    per_env: Vec<Vec<Transition>>,
    candidates: Vec<Vec<String>>,
}

impl RolloutBuffer {
    pub fn new(num_envs: usize, steps_per_env: usize) -> Self {
        Self {
            steps_per_env,
            per_env: vec![Vec::with_capacity(steps_per_env); num_envs],
            candidates: vec![Vec::new(); num_envs],
        }
    }

    pub fn capacity(&self) -> usize {
        self.per_env.len() * self.steps_per_env
    }

    pub fn len(&self) -> usize {
        self.per_env.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.per_env.iter().all(|e| e.len() == self.steps_per_env)
    }

    pub fn env(&self, i: usize) -> &[Transition] {
        &self.per_env[i]
    }

    /// Candidate list used by environment `i`.
    pub fn set_candidates(&mut self, i: usize, candidates: Vec<String>) {
        self.candidates[i] = candidates;
    }

    pub fn push(&mut self, env: usize, t: Transition) -> Result<(), TrainError> {
        let slot = self
            .per_env
            .get_mut(env)
            .ok_or_else(|| TrainError::Shape(format!("no environment {env} in buffer")))?;
        if slot.len() == self.steps_per_env {
            return Err(TrainError::Shape(format!("buffer for environment {env} is full")));
        }
        slot.push(t);
        Ok(())
    }

    pub fn clear(&mut self) {
        for e in &mut self.per_env {
            e.clear();
        }
    }

    /// Training samples with GAE computed per environment segment.
    /// `bootstrap[i]` is V of environment `i`'s observation after its last step.
    pub fn samples(&self, bootstrap: &[f64], gamma: f64, lambda: f64) -> Result<Vec<Sample>, TrainError> {
        if bootstrap.len() != self.per_env.len() {
            return Err(TrainError::Shape(format!(
                "{} bootstrap values for {} environments",
                bootstrap.len(),
                self.per_env.len()
            )));
        }
        let mut out = Vec::with_capacity(self.len());
        for (i, seg) in self.per_env.iter().enumerate() {
            let rewards: Vec<f64> = seg.iter().map(|t| t.reward).collect();
            let values: Vec<f64> = seg.iter().map(|t| t.value).collect();
            let dones: Vec<bool> = seg.iter().map(|t| t.done).collect();
            let (adv, ret) = compute_gae(&rewards, &values, &dones, bootstrap[i], gamma, lambda)?;
            for (k, t) in seg.iter().enumerate() {
                out.push(Sample {
                    prompt: t.prompt.clone(),
                    candidates: self.candidates[i].clone(),
                    action: t.action,
                    old_logprob: t.old_logprob,
                    advantage: adv[k],
                    ret: ret[k],
                });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(reward: f64, done: bool) -> Transition {
        Transition {
            prompt: "p".into(),
            action: 0,
            old_logprob: 0.0,
            value: 0.0,
            reward,
            done,
            success: done,
        }
    }

    #[test]
    fn segments_do_not_leak_between_envs() {
        let mut b = RolloutBuffer::new(2, 2);
        b.push(0, t(0.0, false)).unwrap();
        b.push(0, t(0.0, false)).unwrap();
        b.push(1, t(10.0, true)).unwrap();
        b.push(1, t(0.0, false)).unwrap();
        assert!(b.push(1, t(0.0, false)).is_err());
        let s = b.samples(&[0.0, 0.0], 0.9, 0.9).unwrap();
        // env 0 gets nothing from env 1's reward
        assert_eq!(s[0].advantage, 0.0);
        assert_eq!(s[2].advantage, 10.0);
        b.clear();
        assert!(b.is_empty());
    }
}

use super::TrainError;

/// Generalized advantage estimation over one environment's contiguous
/// segment. `bootstrap_value` is V of the observation after the last step,
/// ignored when that step is terminal.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), TrainError> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(TrainError::Shape(format!(
            "gae inputs differ in length: rewards {n}, values {}, dones {}",
            values.len(),
            dones.len()
        )));
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap_value;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_terminal_step() {
        let (a, r) = compute_gae(&[20.0], &[0.0], &[true], 5.0, 0.99, 0.99).unwrap();
        assert_eq!(a, vec![20.0]);
        assert_eq!(r, vec![20.0]);
    }

    #[test]
    fn two_step_example() {
        let (a, _) = compute_gae(&[0.0, 20.0], &[1.0, 2.0], &[false, true], 0.0, 0.99, 0.99).unwrap();
        // delta0 = 0.99 * 2 - 1 = 0.98, delta1 = 18, A0 = 0.98 + 0.9801 * 18
        assert!((a[1] - 18.0).abs() < 1e-12);
        assert!((a[0] - (0.98 + 0.9801 * 18.0)).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(compute_gae(&[0.0], &[0.0, 1.0], &[false], 0.0, 0.9, 0.9).is_err());
    }
}

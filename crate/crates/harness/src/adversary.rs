//! Cost sequences for the single-agent adversary mode.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Script {
    /// The same vector every round.
    Constant { costs: Vec<f64> },
    /// Round `t` uses `costs[(t - 1) % costs.len()]`.
    Periodic { costs: Vec<Vec<f64>> },
    /// Independent uniform entries in `[0, c_max]`.
    UniformRandom,
    /// Charges the resources the learner currently favours: cost 0 on
    /// the least likely resource, `c_max` on the most likely, linear in
    /// between.
    Adaptive,
}

impl Script {
    pub fn validate(&self, m: usize, c_max: f64) -> Result<(), String> {
        let check = |v: &[f64], at: &str| -> Result<(), String> {
            if v.len() != m {
                return Err(format!("{at}: {} entries, expected {m}", v.len()));
            }
            match v.iter().position(|c| !(0.0..=c_max).contains(c)) {
                Some(e) => Err(format!("{at}[{e}] = {} outside [0, {c_max}]", v[e])),
                None => Ok(()),
            }
        };
        match self {
            Script::Constant { costs } => check(costs, "costs"),
            Script::Periodic { costs } => {
                if costs.is_empty() {
                    return Err("costs: period must be at least 1".into());
                }
                costs
                    .iter()
                    .enumerate()
                    .try_for_each(|(k, v)| check(v, &format!("costs[{k}]")))
            }
            Script::UniformRandom | Script::Adaptive => Ok(()),
        }
    }
}

/// The adversary's cost vector for round `t`, given the learner's
/// marginal at the start of the round.
pub fn adversary_costs(
    script: &Script,
    t: u64,
    marginal: &[f64],
    c_max: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    match script {
        Script::Constant { costs } => costs.clone(),
        Script::Periodic { costs } => costs[((t - 1) % costs.len() as u64) as usize].clone(),
        Script::UniformRandom => (0..marginal.len())
            .map(|_| rng.random_range(0.0..=c_max))
            .collect(),
        Script::Adaptive => {
            let lo = marginal.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = marginal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo <= f64::EPSILON {
                return vec![c_max / 2.0; marginal.len()];
            }
            marginal
                .iter()
                .map(|x| (c_max * (x - lo) / (hi - lo)).clamp(0.0, c_max))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn constant() {
        let s = Script::Constant { costs: vec![1.0, 2.0] };
        for t in 1..5 {
            assert_eq!(adversary_costs(&s, t, &[0.5, 0.5], 2.0, &mut rng()), vec![1.0, 2.0]);
        }
    }

    #[test]
    fn periodic_alternates() {
        let s = Script::Periodic {
            costs: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
        };
        let got: Vec<_> = (1..=4)
            .map(|t| adversary_costs(&s, t, &[0.5, 0.5], 2.0, &mut rng()))
            .collect();
        assert_eq!(got[0], vec![1.0, 2.0]);
        assert_eq!(got[1], vec![2.0, 1.0]);
        assert_eq!(got[2], got[0]);
        assert_eq!(got[3], got[1]);
    }

    #[test]
    fn adaptive_targets_the_marginal() {
        let c = adversary_costs(&Script::Adaptive, 1, &[0.2, 0.7, 0.45], 4.0, &mut rng());
        assert_eq!(c[0], 0.0);
        assert_eq!(c[1], 4.0);
        assert!((c[2] - 2.0).abs() < 1e-12);
        let flat = adversary_costs(&Script::Adaptive, 1, &[0.5, 0.5], 4.0, &mut rng());
        assert_eq!(flat, vec![2.0, 2.0]);
    }

    #[test]
    fn random_stays_in_range() {
        let mut r = rng();
        for t in 1..100 {
            let c = adversary_costs(&Script::UniformRandom, t, &[0.0; 3], 1.5, &mut r);
            assert!(c.iter().all(|v| (0.0..=1.5).contains(v)));
        }
    }

    #[test]
    fn validation() {
        let s = Script::Constant { costs: vec![1.0, 3.0] };
        assert!(s.validate(2, 3.0).is_ok());
        assert!(s.validate(2, 2.0).unwrap_err().contains("costs[1]"));
        assert!(s.validate(3, 3.0).is_err());
        assert!(Script::Periodic { costs: vec![] }.validate(2, 1.0).is_err());
    }
}

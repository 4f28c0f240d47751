//! Per-agent bandit gradient descent with Caratheodory exploration.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_cost, norm_bound, second_moment};
use crate::graph::Strategy;
use crate::polytope::{
    barycenter, bounded_away_violation, caratheodory_distribution, project_bounded_away,
    MixedSupport,
};
use crate::space::AgentSpace;

/// Feasibility tolerance checked after every update.
pub const FEASIBILITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Equilibrium-seeking schedule for self-play.
    Nash,
    /// Regret-minimising schedule against an adversary.
    Regret,
}

/// Optional changes to the schedule constants.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Exponent of `m` under the square root of the nash step size
    /// (default 6).
    #[serde(default)]
    pub gamma_m_exponent: Option<f64>,
    /// Multiplies every step size.
    #[serde(default)]
    pub gamma_scale: Option<f64>,
    /// Multiplies the exploration level before capping at 0.5.
    #[serde(default)]
    pub mu_scale: Option<f64>,
    /// Power of `t` in the regret step size (default 1).
    #[serde(default)]
    pub gamma_t_exponent: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub variant: Variant,
    pub n: usize,
    pub m: usize,
    pub c_max: f64,
    pub theta: f64,
    #[serde(default)]
    pub overrides: Overrides,
}

impl Schedule {
    pub fn new(variant: Variant, n: usize, m: usize, c_max: f64, theta: f64) -> Self {
        Schedule {
            variant,
            n,
            m,
            c_max,
            theta,
            overrides: Overrides::default(),
        }
    }

    pub fn with_overrides(mut self, overrides: Overrides) -> Self {
        self.overrides = overrides;
        self
    }

    /// `(gamma_t, mu_t)` for round `t >= 1`.
    pub fn values(&self, t: u64) -> (f64, f64) {
        assert!(t >= 1, "schedules start at t = 1");
        let t = t as f64;
        let (n, m) = (self.n as f64, self.m as f64);
        let mu_scale = self.overrides.mu_scale.unwrap_or(1.0);
        let gamma_scale = self.overrides.gamma_scale.unwrap_or(1.0);
        match self.variant {
            Variant::Nash => {
                let raw = n.powf(0.2) / (m.powf(1.4) * t.powf(0.2) * self.c_max.powf(0.2));
                let mu = (mu_scale * raw).min(0.5);
                let k = self.overrides.gamma_m_exponent.unwrap_or(6.0);
                let gamma = (self.c_max * mu / (self.theta * n.powi(3) * m.powf(k) * t)).sqrt();
                (gamma_scale * gamma, mu)
            }
            Variant::Regret => {
                let mu = (mu_scale * 0.5 / t.powf(0.25)).min(0.5);
                let k = self.overrides.gamma_t_exponent.unwrap_or(1.0);
                let gamma = mu / (m * m * self.c_max * self.theta * t.powf(k));
                (gamma_scale * gamma, mu)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.n == 0 || self.m == 0 || !positive(self.c_max) || !positive(self.theta) {
            return Err(Error::InvalidInput(
                "schedule constants must be positive".into(),
            ));
        }
        let o = &self.overrides;
        for v in [o.gamma_scale, o.mu_scale].into_iter().flatten() {
            if !positive(v) {
                return Err(Error::InvalidInput(format!("scale override {v} must be positive")));
            }
        }
        if o.gamma_m_exponent.is_some_and(|k| !k.is_finite()) {
            return Err(Error::InvalidInput("m exponent must be finite".into()));
        }
        if o.gamma_t_exponent.is_some_and(|k| !(k.is_finite() && k >= 0.0)) {
            return Err(Error::InvalidInput("t exponent must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// One projected gradient step in basis coordinates:
/// `P_{D^mu}(alpha - gamma g)`.
pub fn projected_update(
    space: &AgentSpace,
    alpha: &[f64],
    g: &[f64],
    gamma: f64,
    mu: f64,
) -> Result<Vec<f64>> {
    let z: Vec<f64> = alpha.iter().zip(g).map(|(a, gi)| a - gamma * gi).collect();
    project_bounded_away(space.constraints(), &z, mu)
}

#[derive(Debug, Clone)]
struct Pending {
    support: MixedSupport,
    index: usize,
}

/// What a completed round did to the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub gamma: f64,
    pub mu: f64,
    pub estimate_norm: f64,
}

/// Learner state. Sees only its scalar loss.
#[derive(Debug, Clone)]
pub struct Learner {
    space: Arc<AgentSpace>,
    schedule: Schedule,
    alpha: Vec<f64>,
    t: u64,
    cumulative_cost: f64,
    pending: Option<Pending>,
}

impl Learner {
    /// Starts at the barycenter `(1/s) 1`, a point of every `D^mu`.
    pub fn new(space: Arc<AgentSpace>, schedule: Schedule) -> Self {
        let alpha = barycenter(space.size());
        Learner {
            space,
            schedule,
            alpha,
            t: 1,
            cumulative_cost: 0.0,
            pending: None,
        }
    }

    pub fn space(&self) -> &AgentSpace {
        &self.space
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Current round.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn cumulative_cost(&self) -> f64 {
        self.cumulative_cost
    }

    /// `(gamma_t, mu_t)` of the current round.
    pub fn rates(&self) -> (f64, f64) {
        self.schedule.values(self.t)
    }

    /// Marginal `B alpha` of the current mixed strategy.
    pub fn marginal(&self) -> Vec<f64> {
        self.space.spanner().combine(&self.alpha)
    }

    /// Exploration distribution of the current round.
    pub fn distribution(&self) -> Result<MixedSupport> {
        caratheodory_distribution(&self.space, &self.alpha, self.rates().1)
    }

    /// Draws this round's strategy with one uniform variate from `rng`.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Strategy> {
        let support = self.distribution()?;
        let index = support.pick(rng.random::<f64>());
        let chosen = support.atoms()[index].strategy.clone();
        self.pending = Some(Pending { support, index });
        Ok(chosen)
    }

    /// Feeds back the loss of the sampled strategy and advances one round.
    pub fn observe(&mut self, loss: f64) -> Result<StepReport> {
        let max = self.schedule.m as f64 * self.schedule.c_max;
        if !(0.0..=max).contains(&loss) {
            return Err(Error::LossOutOfRange { loss, max });
        }
        let pending = self.pending.take().ok_or(Error::NoPendingSample)?;
        let (gamma, mu) = self.rates();
        let moment = second_moment(&pending.support)?;
        let g = estimate_cost(loss, &pending.support.atoms()[pending.index].coords, &moment);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if mu > 0.0 {
            let bound = norm_bound(self.schedule.theta, self.schedule.m, self.schedule.c_max, mu);
            if norm > bound * (1.0 + 1e-9) {
                return Err(Error::Invariant(format!(
                    "estimate norm {norm} exceeds its bound {bound} at round {}",
                    self.t
                )));
            }
        }
        let mu_next = self.schedule.values(self.t + 1).1;
        let next = projected_update(&self.space, &self.alpha, &g, gamma, mu_next)?;
        let violation = bounded_away_violation(&self.space, &next, mu_next);
        if violation > FEASIBILITY_TOL {
            return Err(Error::Invariant(format!(
                "update left the feasible set by {violation:e} at round {}",
                self.t
            )));
        }
        self.alpha = next;
        self.cumulative_cost += loss;
        self.t += 1;
        Ok(StepReport {
            gamma,
            mu,
            estimate_norm: norm,
        })
    }
}

/// Simulator-side regret bookkeeping against the best fixed strategy in
/// hindsight. Tracks the realized cost of the played strategies and the
/// expected cost of the learner's marginals (pseudo-regret).
#[derive(Debug, Clone)]
pub struct RegretTracker {
    space: Arc<AgentSpace>,
    summed_costs: Vec<f64>,
    realized: f64,
    expected: f64,
}

impl RegretTracker {
    pub fn new(space: Arc<AgentSpace>) -> Self {
        let dim = space.dim();
        RegretTracker {
            space,
            summed_costs: vec![0.0; dim],
            realized: 0.0,
            expected: 0.0,
        }
    }

    /// Records one round: the played strategy, the marginal it was drawn
    /// from and the full cost vector.
    pub fn record(&mut self, played: &Strategy, marginal: &[f64], costs: &[f64]) {
        self.realized += played.weight(costs);
        self.expected += marginal.iter().zip(costs).map(|(x, c)| x * c).sum::<f64>();
        self.summed_costs
            .iter_mut()
            .zip(costs)
            .for_each(|(a, c)| *a += c);
    }

    pub fn realized(&self) -> f64 {
        self.realized
    }

    /// Cost of the best fixed strategy so far.
    pub fn best_fixed(&self) -> Result<f64> {
        Ok(self.space.best_response(&self.summed_costs)?.1)
    }

    pub fn regret(&self) -> Result<f64> {
        Ok(self.realized - self.best_fixed()?)
    }

    pub fn pseudo_regret(&self) -> Result<f64> {
        Ok(self.expected - self.best_fixed()?)
    }
}

/// Cumulative realized regret after every round of `history`.
pub fn realized_regret(space: Arc<AgentSpace>, history: &[(Strategy, Vec<f64>)]) -> Result<Vec<f64>> {
    let mut tracker = RegretTracker::new(space);
    history
        .iter()
        .map(|(p, c)| {
            tracker.record(p, &p.incidence(), c);
            tracker.regret()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;
    use crate::polytope::caratheodory_distribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space(spec: &crate::graph::GraphSpec) -> Arc<AgentSpace> {
        Arc::new(AgentSpace::network(single_sub(spec)).unwrap())
    }

    #[test]
    fn nash_values() {
        let s = Schedule::new(Variant::Nash, 2, 2, 2.0, 1.0);
        let (gamma, mu) = s.values(1);
        assert!((mu - 2f64.powf(-1.4)).abs() < 1e-15);
        assert!((mu - 0.378929).abs() < 1e-6);
        assert!((gamma - (2.0 * mu / 512.0).sqrt()).abs() < 1e-15);
        assert!((gamma - 0.038474).abs() < 1e-6);
        let unit = Schedule::new(Variant::Nash, 1, 1, 1.0, 1.0);
        assert_eq!(unit.values(1).1, 0.5);
        let t = 1_000_000u64;
        assert!((unit.values(t).1 - (t as f64).powf(-0.2)).abs() < 1e-15);
    }

    #[test]
    fn regret_values() {
        let s = Schedule::new(Variant::Regret, 1, 3, 2.0, 1.0);
        let (gamma, mu) = s.values(16);
        assert_eq!(mu, 0.25);
        assert!((gamma - 0.25 / (9.0 * 2.0 * 16.0)).abs() < 1e-15);
    }

    #[test]
    fn overrides() {
        let s = Schedule::new(Variant::Nash, 2, 2, 2.0, 1.0).with_overrides(Overrides {
            gamma_m_exponent: Some(3.0),
            gamma_scale: Some(2.0),
            ..Overrides::default()
        });
        let (gamma, mu) = s.values(1);
        assert!((gamma - 2.0 * (2.0 * mu / 64.0).sqrt()).abs() < 1e-15);
        let r = Schedule::new(Variant::Regret, 1, 2, 1.0, 1.0).with_overrides(Overrides {
            gamma_t_exponent: Some(0.5),
            ..Overrides::default()
        });
        let (gamma, mu) = r.values(16);
        assert_eq!(mu, 0.25);
        assert!((gamma - 0.25 / (4.0 * 4.0)).abs() < 1e-15);
    }

    #[test]
    fn exploration_is_monotone() {
        for variant in [Variant::Nash, Variant::Regret] {
            let s = Schedule::new(variant, 3, 9, 2.0, 1.0);
            let mut prev = s.values(1);
            for t in 2..5000 {
                let cur = s.values(t);
                assert!(cur.1 <= prev.1 && cur.0 > 0.0);
                prev = cur;
            }
        }
    }

    #[test]
    fn init_at_barycenter() {
        let l = Learner::new(space(&double_diamond()), Schedule::new(Variant::Nash, 1, 9, 1.0, 1.0));
        assert_eq!(l.alpha(), &[1.0 / 3.0; 3]);
        assert_eq!(l.t(), 1);
        assert!(bounded_away_violation(l.space(), l.alpha(), 0.5) < 1e-15);
        let l2 = Learner::new(space(&parallel(2)), Schedule::new(Variant::Nash, 1, 2, 1.0, 1.0));
        assert_eq!(l2.alpha(), &[0.5, 0.5]);
    }

    #[test]
    fn update_example() {
        let sp = space(&parallel(2));
        let d = caratheodory_distribution(&sp, &[0.5, 0.5], 0.0).unwrap();
        let n = second_moment(&d).unwrap();
        let g = estimate_cost(1.0, &[1.0, 0.0], &n);
        let next = projected_update(&sp, &[0.5, 0.5], &g, 0.1, 0.0).unwrap();
        assert!((next[0] - 0.4).abs() < 1e-9 && (next[1] - 0.6).abs() < 1e-9);
        let floor = projected_update(&sp, &[0.5, 0.5], &[2.0, 0.0], 0.1, 0.2).unwrap();
        assert!(floor.iter().all(|&v| v >= 0.1 - 1e-12));
        let fixed = projected_update(&sp, &[0.3, 0.7], &[0.0, 0.0], 0.1, 0.2).unwrap();
        assert!((fixed[0] - 0.3).abs() < 1e-15 && (fixed[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn observe_protocol() {
        let mut l = Learner::new(space(&parallel(2)), Schedule::new(Variant::Regret, 1, 2, 2.0, 1.0));
        assert_eq!(l.observe(1.0), Err(Error::NoPendingSample));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        l.sample(&mut rng).unwrap();
        assert!(matches!(l.observe(5.0), Err(Error::LossOutOfRange { .. })));
        l.sample(&mut rng).unwrap();
        l.observe(1.0).unwrap();
        assert_eq!(l.t(), 2);
        assert_eq!(l.cumulative_cost(), 1.0);
    }

    #[test]
    fn sampling_frequencies() {
        let sp = space(&parallel(2));
        let d = caratheodory_distribution(&sp, &[0.9, 0.1], 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 100_000;
        let mut hits = 0;
        for _ in 0..draws {
            let i = d.pick(rng.random::<f64>());
            if d.atoms()[i].strategy.resources() == [0] {
                hits += 1;
            }
        }
        let p = 0.9;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((hits as f64 / draws as f64 - p).abs() < 3.0 * sigma);
    }

    #[test]
    fn replay_is_bitwise() {
        let run = || {
            let mut l = Learner::new(space(&double_diamond()), Schedule::new(Variant::Nash, 1, 9, 1.0, 1.0));
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let costs: Vec<f64> = (0..9).map(|e| (e % 3) as f64 / 2.0).collect();
            let mut trace = Vec::new();
            for _ in 0..200 {
                let p = l.sample(&mut rng).unwrap();
                l.observe(p.weight(&costs)).unwrap();
                trace.extend(l.alpha().iter().map(|v| v.to_bits()));
            }
            trace
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn regret_examples() {
        let sp = space(&parallel(2));
        let e1 = Strategy::new(vec![0], 2).unwrap();
        let e2 = Strategy::new(vec![1], 2).unwrap();
        let r = realized_regret(sp.clone(), &[(e2.clone(), vec![1.0, 2.0])]).unwrap();
        assert_eq!(r, vec![1.0]);
        let hist: Vec<_> = (0..10).map(|_| (e1.clone(), vec![1.0, 2.0])).collect();
        assert!(realized_regret(sp, &hist).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn regret_sublinear_against_alternation() {
        let sp = space(&parallel(2));
        let mut l = Learner::new(sp.clone(), Schedule::new(Variant::Regret, 1, 2, 2.0, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut tracker = RegretTracker::new(sp);
        let mut at = Vec::new();
        for t in 1..=1000u64 {
            let c = if t % 2 == 1 { vec![1.0, 2.0] } else { vec![2.0, 1.0] };
            let x = l.marginal();
            let p = l.sample(&mut rng).unwrap();
            l.observe(p.weight(&c)).unwrap();
            tracker.record(&p, &x, &c);
            if t == 100 || t == 1000 {
                at.push(tracker.pseudo_regret().unwrap() / t as f64);
            }
        }
        assert!(at[1] < at[0], "{at:?}");
    }
}

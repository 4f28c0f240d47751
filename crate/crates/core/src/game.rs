//! Congestion games: costs, potentials, gradients, Nash gaps and the
//! synchronized self-play loop.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphSpec, Strategy};
use crate::learner::{Learner, RegretTracker, Schedule};
use crate::space::{AgentSpace, Hull};

/// Serializable game description: a network (or explicit strategy lists)
/// plus one cost table `c_e(0..=n)` per resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<ExplicitSpec>,
    /// Unused against an adversary, which supplies its own costs.
    #[serde(default)]
    pub costs: Vec<Vec<f64>>,
    /// Defaults to the largest table entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSpec {
    pub resources: usize,
    pub agents: Vec<ExplicitAgent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitAgent {
    pub strategies: Vec<Vec<usize>>,
    pub hull: Hull,
}

impl GameSpec {
    pub fn agent_count(&self) -> usize {
        match (&self.graph, &self.explicit) {
            (Some(g), _) => g.agents.len(),
            (None, Some(x)) => x.agents.len(),
            (None, None) => 0,
        }
    }

    pub fn build(&self) -> Result<Game> {
        Game::new(self.spaces()?, self.costs.clone(), self.c_max)
    }

    /// One strategy space per agent.
    pub fn spaces(&self) -> Result<Vec<Arc<AgentSpace>>> {
        Ok(match (&self.graph, &self.explicit) {
            (Some(graph), None) => {
                let (_, subs) = graph.agent_subgraphs()?;
                subs.into_iter()
                    .map(|s| AgentSpace::network(s).map(Arc::new))
                    .collect::<Result<Vec<_>>>()?
            }
            (None, Some(x)) => x
                .agents
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let list = a
                        .strategies
                        .iter()
                        .map(|r| Strategy::new(r.clone(), x.resources))
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| Error::InvalidInput(format!("agents[{i}]: {e}")))?;
                    AgentSpace::explicit(list, &a.hull).map(Arc::new)
                })
                .collect::<Result<Vec<_>>>()?,
            _ => {
                return Err(Error::InvalidInput(
                    "exactly one of `graph` and `explicit` must be given".into(),
                ))
            }
        })
    }
}

/// `c(l) = l` for loads `0..=n` on each of `m` resources.
pub fn linear_costs(m: usize, n: usize) -> Vec<Vec<f64>> {
    vec![(0..=n).map(|l| l as f64).collect(); m]
}

#[derive(Debug, Clone)]
pub struct Game {
    spaces: Vec<Arc<AgentSpace>>,
    costs: Vec<Vec<f64>>,
    c_max: f64,
    dim: usize,
}

impl Game {
    pub fn new(spaces: Vec<Arc<AgentSpace>>, costs: Vec<Vec<f64>>, c_max: Option<f64>) -> Result<Self> {
        let n = spaces.len();
        let dim = match spaces.first() {
            Some(s) => s.dim(),
            None => costs.len(),
        };
        if spaces.iter().any(|s| s.dim() != dim) {
            return Err(Error::InvalidInput("agents disagree on the resource count".into()));
        }
        if costs.len() != dim {
            return Err(Error::InvalidInput(format!(
                "costs: {} tables for {dim} resources",
                costs.len()
            )));
        }
        let largest = costs.iter().flatten().copied().fold(0.0, f64::max);
        let c_max = c_max.unwrap_or(largest);
        for (e, table) in costs.iter().enumerate() {
            if table.len() != n + 1 {
                return Err(Error::InvalidInput(format!(
                    "costs[{e}]: table has {} entries, expected {} (loads 0..={n})",
                    table.len(),
                    n + 1
                )));
            }
            if table[0] != 0.0 {
                return Err(Error::InvalidInput(format!("costs[{e}]: c(0) must be 0")));
            }
            if table.iter().any(|&c| !(0.0..=c_max).contains(&c)) {
                return Err(Error::InvalidInput(format!(
                    "costs[{e}]: entries must lie in [0, {c_max}]"
                )));
            }
            if table.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::InvalidInput(format!("costs[{e}]: table decreases")));
            }
        }
        Ok(Game {
            spaces,
            costs,
            c_max,
            dim,
        })
    }

    pub fn agents(&self) -> usize {
        self.spaces.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn space(&self, i: usize) -> &Arc<AgentSpace> {
        &self.spaces[i]
    }

    pub fn costs(&self) -> &[Vec<f64>] {
        &self.costs
    }

    /// `c_e(l)`.
    pub fn cost(&self, e: usize, load: usize) -> f64 {
        self.costs[e][load]
    }

    pub fn loads(&self, profile: &[Strategy]) -> Vec<usize> {
        let mut loads = vec![0; self.dim];
        for p in profile {
            p.resources().iter().for_each(|&e| loads[e] += 1);
        }
        loads
    }

    pub fn agent_cost(&self, profile: &[Strategy], i: usize) -> f64 {
        let loads = self.loads(profile);
        profile[i]
            .resources()
            .iter()
            .map(|&e| self.cost(e, loads[e]))
            .sum()
    }

    /// Cost vector agent `i` faces: `c_e(l_e^{-i} + 1)` for every resource.
    pub fn facing_costs(&self, profile: &[Strategy], i: usize) -> Vec<f64> {
        let mut loads = self.loads(profile);
        for &e in profile[i].resources() {
            loads[e] -= 1;
        }
        loads
            .iter()
            .enumerate()
            .map(|(e, &l)| self.cost(e, l + 1))
            .collect()
    }

    pub fn rosenthal_potential(&self, profile: &[Strategy]) -> f64 {
        self.loads(profile)
            .iter()
            .enumerate()
            .map(|(e, &l)| self.costs[e][1..=l].iter().sum::<f64>())
            .sum()
    }

    /// Distribution of the load on `e` when every agent but `skip` uses it
    /// independently with its marginal probability.
    pub fn load_distribution(&self, x: &[Vec<f64>], e: usize, skip: Option<usize>) -> Vec<f64> {
        let mut dist = Vec::with_capacity(x.len() + 1);
        dist.push(1.0);
        for (j, xj) in x.iter().enumerate() {
            if Some(j) == skip {
                continue;
            }
            let p = xj[e];
            dist.push(0.0);
            for k in (1..dist.len()).rev() {
                dist[k] = dist[k] * (1.0 - p) + dist[k - 1] * p;
            }
            dist[0] *= 1.0 - p;
        }
        dist
    }

    /// `sum_e E[sum_{l <= L_e} c_e(l)]` for independent agents with
    /// marginals `x`.
    pub fn expected_potential(&self, x: &[Vec<f64>]) -> f64 {
        (0..self.dim)
            .map(|e| {
                let dist = self.load_distribution(x, e, None);
                let mut prefix = 0.0;
                let mut total = 0.0;
                for (k, &p) in dist.iter().enumerate() {
                    if k > 0 {
                        prefix += self.costs[e][k];
                    }
                    total += p * prefix;
                }
                total
            })
            .sum()
    }

    /// Gradient of the expected potential in agent `i`'s block:
    /// `E[c_e(L_e^{-i} + 1)]`.
    pub fn potential_gradient(&self, x: &[Vec<f64>], i: usize) -> Vec<f64> {
        (0..self.dim)
            .map(|e| {
                self.load_distribution(x, e, Some(i))
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| p * self.costs[e][k + 1])
                    .sum()
            })
            .collect()
    }

    pub fn best_response(&self, x: &[Vec<f64>], i: usize) -> Result<(Strategy, f64)> {
        self.spaces[i].best_response(&self.potential_gradient(x, i))
    }

    /// Expected cost minus best-response value, per agent.
    pub fn agent_gaps(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        (0..self.agents())
            .map(|i| {
                let grad = self.potential_gradient(x, i);
                let cost: f64 = grad.iter().zip(&x[i]).map(|(g, v)| g * v).sum();
                Ok(cost - self.spaces[i].best_response(&grad)?.1)
            })
            .collect()
    }

    pub fn nash_gap(&self, x: &[Vec<f64>]) -> Result<f64> {
        Ok(self.agent_gaps(x)?.into_iter().fold(0.0, f64::max))
    }
}

/// Options of [`run_dynamics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsOptions {
    pub horizon: u64,
    pub seed: u64,
    /// Nash gap and expected potential every `stride` rounds.
    pub stride: u64,
    /// Regret after every round instead of at checkpoints.
    pub exact_regret: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRound {
    pub realized_cost: f64,
    pub cum_regret: Option<f64>,
    pub pseudo_regret: Option<f64>,
    pub mu: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    pub agents: Vec<AgentRound>,
    /// Of the joint marginal at the start of the round.
    pub nash_gap: Option<f64>,
    pub expected_potential: Option<f64>,
}

/// Regret checkpoints: every round up to 10, then ten per decade, plus
/// the horizon.
pub fn checkpoints(horizon: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (1..=horizon.min(10)).collect();
    let mut k = 11u32;
    loop {
        let t = 10f64.powf(k as f64 / 10.0).round() as u64;
        if t > horizon {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
        k += 1;
    }
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

/// Per-agent rng: the seed's ChaCha8 stream number `agent`.
pub fn agent_rng(seed: u64, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(agent as u64);
    rng
}

/// Runs every agent's learner in lock step: all sample, loads are formed,
/// each agent observes only its own cost, all step. Calls `sink` once per
/// round.
pub fn run_dynamics(
    game: &Game,
    schedules: &[Schedule],
    opts: DynamicsOptions,
    mut sink: impl FnMut(&RoundRecord) -> Result<()>,
) -> Result<()> {
    if opts.horizon == 0 || opts.stride == 0 {
        return Err(Error::InvalidInput("horizon and stride must be at least 1".into()));
    }
    let n = game.agents();
    if schedules.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} schedules for {n} agents",
            schedules.len()
        )));
    }
    let mut learners: Vec<Learner> = (0..n)
        .map(|i| Learner::new(game.space(i).clone(), schedules[i]))
        .collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|i| agent_rng(opts.seed, i)).collect();
    let mut trackers: Vec<RegretTracker> = (0..n)
        .map(|i| RegretTracker::new(game.space(i).clone()))
        .collect();
    let marks = checkpoints(opts.horizon);
    let mut next_mark = 0;
    for t in 1..=opts.horizon {
        let x: Vec<Vec<f64>> = learners.iter().map(Learner::marginal).collect();
        let on_stride = t == 1 || t == opts.horizon || (t - 1) % opts.stride == 0;
        let (nash_gap, expected_potential) = if on_stride {
            (Some(game.nash_gap(&x)?), Some(game.expected_potential(&x)))
        } else {
            (None, None)
        };
        let rates: Vec<(f64, f64)> = learners.iter().map(Learner::rates).collect();
        let profile = learners
            .iter_mut()
            .zip(&mut rngs)
            .map(|(l, r)| l.sample(r))
            .collect::<Result<Vec<_>>>()?;
        let regret_due = opts.exact_regret || marks.get(next_mark) == Some(&t);
        if marks.get(next_mark) == Some(&t) {
            next_mark += 1;
        }
        let mut agents = Vec::with_capacity(n);
        for i in 0..n {
            let loss = game.agent_cost(&profile, i);
            trackers[i].record(&profile[i], &x[i], &game.facing_costs(&profile, i));
            learners[i].observe(loss)?;
            let (cum_regret, pseudo_regret) = if regret_due {
                (Some(trackers[i].regret()?), Some(trackers[i].pseudo_regret()?))
            } else {
                (None, None)
            };
            agents.push(AgentRound {
                realized_cost: loss,
                cum_regret,
                pseudo_regret,
                mu: rates[i].1,
                gamma: rates[i].0,
            });
        }
        sink(&RoundRecord {
            t,
            agents,
            nash_gap,
            expected_potential,
        })?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::graph::fixtures::parallel;

    /// Two agents on two parallel edges with `c(l) = l`.
    pub fn parallel_game(agents: usize) -> Game {
        let mut spec = parallel(2);
        spec.agents = vec![spec.agents[0]; agents];
        GameSpec {
            graph: Some(spec),
            explicit: None,
            costs: linear_costs(2, agents),
            c_max: None,
        }
        .build()
        .unwrap()
    }
}

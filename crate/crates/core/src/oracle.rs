//! Brute-force references for tiny instances, and the cross-check battery
//! behind `validate`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{estimate_cost, second_moment};
use crate::game::Game;
use crate::graph::{enumerate_paths, Strategy};
use crate::polytope::MixedSupport;
use crate::space::StrategySet;

pub const MAX_AGENTS: usize = 4;
pub const MAX_STRATEGIES: usize = 8;
pub const MAX_RESOURCES: usize = 12;

/// A congestion game given by explicit strategy lists.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitGame {
    strategies: Vec<Vec<Strategy>>,
    costs: Vec<Vec<f64>>,
}

impl ExplicitGame {
    pub fn new(strategies: Vec<Vec<Strategy>>, costs: Vec<Vec<f64>>) -> Result<Self> {
        let n = strategies.len();
        if n > MAX_AGENTS {
            return Err(Error::TooLarge(format!("{n} agents (limit {MAX_AGENTS})")));
        }
        let m = costs.len();
        if m > MAX_RESOURCES {
            return Err(Error::TooLarge(format!("{m} resources (limit {MAX_RESOURCES})")));
        }
        for (i, list) in strategies.iter().enumerate() {
            if list.is_empty() || list.len() > MAX_STRATEGIES {
                return Err(Error::TooLarge(format!(
                    "agent {i} has {} strategies (allowed 1..={MAX_STRATEGIES})",
                    list.len()
                )));
            }
            if list.iter().any(|p| p.dim() != m) {
                return Err(Error::InvalidInput(format!(
                    "agent {i}: strategy dimension differs from {m} resources"
                )));
            }
        }
        if costs.iter().any(|t| t.len() != n + 1) {
            return Err(Error::InvalidInput("cost tables must cover loads 0..=n".into()));
        }
        Ok(ExplicitGame { strategies, costs })
    }

    /// Enumerates every agent's strategies of `game`.
    pub fn from_game(game: &Game) -> Result<Self> {
        let strategies = (0..game.agents())
            .map(|i| match game.space(i).set() {
                StrategySet::Network(sub) => enumerate_paths(sub, MAX_STRATEGIES).map_err(|_| {
                    Error::TooLarge(format!("agent {i} has more than {MAX_STRATEGIES} paths"))
                }),
                StrategySet::Explicit(list) => Ok(list.clone()),
            })
            .collect::<Result<Vec<_>>>()?;
        ExplicitGame::new(strategies, game.costs().to_vec())
    }

    pub fn strategies(&self, i: usize) -> &[Strategy] {
        &self.strategies[i]
    }

    pub fn agents(&self) -> usize {
        self.strategies.len()
    }

    fn cost_of(&self, profile: &[&Strategy], i: usize) -> f64 {
        let mut loads = vec![0usize; self.costs.len()];
        for p in profile {
            p.resources().iter().for_each(|&e| loads[e] += 1);
        }
        profile[i]
            .resources()
            .iter()
            .map(|&e| self.costs[e][loads[e]])
            .sum()
    }

    /// Max over agents and pure deviations of the expected-cost improvement
    /// under the product distribution `probs[i][k]` over agent `i`'s list.
    pub fn exact_nash_gap(&self, probs: &[Vec<f64>]) -> Result<f64> {
        let n = self.agents();
        if probs.len() != n || probs.iter().zip(&self.strategies).any(|(p, s)| p.len() != s.len()) {
            return Err(Error::InvalidInput("distribution shape does not match the game".into()));
        }
        let mut gap: f64 = 0.0;
        for i in 0..n {
            let mut current = 0.0;
            let mut deviation = vec![0.0; self.strategies[i].len()];
            // enumerate joint profiles of everybody, weight by the others'
            // probabilities, and attribute agent i's own choice separately
            let mut idx = vec![0usize; n];
            loop {
                let w_others: f64 = (0..n).filter(|&j| j != i).map(|j| probs[j][idx[j]]).product();
                if w_others > 0.0 {
                    let mut profile: Vec<&Strategy> =
                        (0..n).map(|j| &self.strategies[j][idx[j]]).collect();
                    if idx[i] == 0 {
                        for (q, dev) in self.strategies[i].iter().zip(deviation.iter_mut()) {
                            profile[i] = q;
                            *dev += w_others * self.cost_of(&profile, i);
                        }
                        profile[i] = &self.strategies[i][idx[i]];
                    }
                    current += w_others * probs[i][idx[i]] * self.cost_of(&profile, i);
                }
                if !advance(&mut idx, &self.strategies) {
                    break;
                }
            }
            let best = deviation.iter().copied().fold(f64::INFINITY, f64::min);
            gap = gap.max(current - best);
        }
        Ok(gap)
    }
}

fn advance(idx: &mut [usize], lists: &[Vec<Strategy>]) -> bool {
    for j in 0..idx.len() {
        idx[j] += 1;
        if idx[j] < lists[j].len() {
            return true;
        }
        idx[j] = 0;
    }
    false
}

/// Expected potential by literal enumeration of the agent subsets using
/// each resource.
pub fn exact_expected_potential(costs: &[Vec<f64>], x: &[Vec<f64>]) -> Result<f64> {
    let n = x.len();
    if n > MAX_AGENTS {
        return Err(Error::TooLarge(format!("{n} agents (limit {MAX_AGENTS})")));
    }
    let mut total = 0.0;
    for (e, table) in costs.iter().enumerate() {
        for subset in 0u32..(1 << n) {
            let mut weight = 1.0;
            for (j, xj) in x.iter().enumerate() {
                weight *= if subset & (1 << j) != 0 { xj[e] } else { 1.0 - xj[e] };
            }
            let size = subset.count_ones() as usize;
            total += weight * table[..=size].iter().sum::<f64>();
        }
    }
    Ok(total)
}

/// Exact `E[g]` and `E[|g|^2]` over a support when the resource costs are
/// `costs`.
pub fn estimator_expectation(support: &MixedSupport, costs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let moment = second_moment(support)?;
    let s = moment.matrix().nrows();
    let mut mean = vec![0.0; s];
    let mut sq = 0.0;
    for atom in support.atoms() {
        let g = estimate_cost(atom.strategy.weight(costs), &atom.coords, &moment);
        mean.iter_mut().zip(&g).for_each(|(a, b)| *a += atom.prob * b);
        sq += atom.prob * g.iter().map(|v| v * v).sum::<f64>();
    }
    Ok((mean, sq))
}

pub mod battery {
    //! Fast-path versus oracle checks on fixed small instances.

    use std::sync::Arc;
    use std::time::Instant;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::game::{linear_costs, GameSpec};
    use crate::graph::{enumerate_paths, random_layered_dag, GraphSpec, LayeredDagParams};
    use crate::polytope::{
        caratheodory_distribution, project_bounded_away, project_bounded_away_direct,
        recombination_error,
    };
    use crate::space::AgentSpace;

    #[derive(Debug, Clone, Serialize)]
    pub struct Check {
        pub name: &'static str,
        pub passed: bool,
        pub detail: String,
        pub seconds: f64,
    }

    #[derive(Debug, Clone, Serialize)]
    pub struct Report {
        pub passed: bool,
        pub checks: Vec<Check>,
    }

    type Outcome = Result<(bool, String)>;

    fn parallel_spec(agents: usize) -> GraphSpec {
        GraphSpec::from_json(&format!(
            r#"{{"nodes": 2, "edges": [[0, 1], [0, 1]], "agents": [{}]}}"#,
            vec![r#"{"s": 0, "t": 1}"#; agents].join(", ")
        ))
        .expect("static graph")
    }

    fn double_diamond_spec() -> GraphSpec {
        GraphSpec::from_json(
            r#"{"nodes": 8,
                "edges": [[0,1],[0,2],[1,3],[2,3],[3,4],[4,6],[4,5],[5,7],[6,7]],
                "agents": [{"s": 0, "t": 7}]}"#,
        )
        .expect("static graph")
    }

    fn network_space(spec: &GraphSpec) -> Result<Arc<AgentSpace>> {
        let (_, subs) = spec.agent_subgraphs()?;
        Ok(Arc::new(AgentSpace::network(subs[0].clone())?))
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn spanner_vertices() -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst: f64 = 0.0;
        for k in 0..40 {
            let spec = if k == 0 {
                double_diamond_spec()
            } else {
                random_layered_dag(&mut rng, LayeredDagParams::default())
            };
            let space = network_space(&spec)?;
            let StrategySet::Network(sub) = space.set() else { unreachable!() };
            for p in enumerate_paths(sub, 300)? {
                let alpha = space.spanner().decompose(&p.incidence())?;
                for a in alpha {
                    worst = worst.max((a - a.round()).abs());
                    if a.abs() > 1.0 + 1e-9 {
                        return Ok((false, format!("coefficient {a}")));
                    }
                }
            }
        }
        Ok((worst <= 1e-9, format!("max distance to an integer {worst:e}")))
    }

    fn caratheodory() -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let spec = random_layered_dag(&mut rng, LayeredDagParams::default());
            let space = network_space(&spec)?;
            let s = space.size();
            for _ in 0..20 {
                let w: Vec<f64> = (0..s).map(|_| rng.random::<f64>()).collect();
                let total: f64 = w.iter().sum();
                let mut x = vec![0.0; space.dim()];
                for (h, wh) in w.iter().enumerate() {
                    space.anchor(h).resources().iter().for_each(|&e| x[e] += wh / total);
                }
                let atoms = space.caratheodory(&x)?;
                let inc: Vec<Vec<f64>> = atoms.iter().map(|a| a.0.incidence()).collect();
                let err = recombination_error(
                    inc.iter().map(Vec::as_slice).zip(atoms.iter().map(|a| a.1)),
                    &x,
                );
                if atoms.len() > space.dim() {
                    return Ok((false, format!("{} atoms", atoms.len())));
                }
                worst = worst.max(err);
            }
        }
        Ok((worst <= 1e-8, format!("max recombination error {worst:e}")))
    }

    fn projection_affine_reduction() -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst: f64 = 0.0;
        for spec in [parallel_spec(1), double_diamond_spec()] {
            let space = network_space(&spec)?;
            for _ in 0..100 {
                let mu = rng.random_range(0.0..=0.5);
                let z: Vec<f64> = (0..space.size()).map(|_| rng.random_range(-2.0..2.0)).collect();
                let a = project_bounded_away(space.constraints(), &z, mu)?;
                let b = project_bounded_away_direct(space.constraints(), &z, mu)?;
                worst = worst.max(max_diff(&a, &b));
            }
        }
        Ok((worst <= 1e-7, format!("max disagreement {worst:e}")))
    }

    fn estimator() -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let space = network_space(&double_diamond_spec())?;
        let s = space.size();
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let mu = rng.random_range(0.05..=0.5);
            let z: Vec<f64> = (0..s).map(|_| rng.random_range(-1.0..2.0)).collect();
            let alpha = project_bounded_away(space.constraints(), &z, mu)?;
            let support = caratheodory_distribution(&space, &alpha, mu)?;
            let c: Vec<f64> = (0..space.dim()).map(|_| rng.random_range(0.0..1.0)).collect();
            let (mean, _) = estimator_expectation(&support, &c)?;
            for h in 0..s {
                let truth = space.anchor(h).weight(&c);
                worst = worst.max((mean[h] - truth).abs());
            }
        }
        Ok((worst <= 1e-7, format!("max orthogonal-bias error {worst:e}")))
    }

    fn potential() -> Outcome {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst: f64 = 0.0;
        for n in 1..=4 {
            let mut spec = double_diamond_spec();
            spec.agents = vec![spec.agents[0]; n];
            let game = GameSpec {
                graph: Some(spec),
                explicit: None,
                costs: linear_costs(9, n),
                c_max: None,
            }
            .build()?;
            for _ in 0..10 {
                let x: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..9).map(|_| rng.random::<f64>()).collect())
                    .collect();
                let fast = game.expected_potential(&x);
                let slow = exact_expected_potential(game.costs(), &x)?;
                worst = worst.max((fast - slow).abs());
            }
        }
        Ok((worst <= 1e-12, format!("max DP versus subset-sum difference {worst:e}")))
    }

    fn nash_gap() -> Outcome {
        let mut spec = parallel_spec(2);
        spec.agents.truncate(2);
        let game = GameSpec {
            graph: Some(spec),
            explicit: None,
            costs: linear_costs(2, 2),
            c_max: None,
        }
        .build()?;
        let oracle = ExplicitGame::from_game(&game)?;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let p: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
            let x: Vec<Vec<f64>> = p.iter().map(|&q| vec![q, 1.0 - q]).collect();
            let fast = game.nash_gap(&x)?;
            let slow = oracle.exact_nash_gap(&x)?;
            worst = worst.max((fast - slow).abs());
        }
        let split = game.nash_gap(&[vec![1.0, 0.0], vec![0.0, 1.0]])?;
        let uniform = game.nash_gap(&[vec![0.5, 0.5], vec![0.5, 0.5]])?;
        Ok((
            worst <= 1e-12 && split.abs() <= 1e-9 && uniform.abs() <= 1e-9,
            format!("max fast versus oracle gap difference {worst:e}; equilibrium gaps {split:e}, {uniform:e}"),
        ))
    }

    /// Runs every check; failures and errors are reported, never raised.
    pub fn run() -> Report {
        let suite: [(&'static str, fn() -> Outcome); 6] = [
            ("spanner_vertex_coefficients", spanner_vertices),
            ("caratheodory_recombination", caratheodory),
            ("projection_affine_reduction", projection_affine_reduction),
            ("estimator_orthogonal_bias", estimator),
            ("expected_potential_subset_sum", potential),
            ("nash_gap_enumeration", nash_gap),
        ];
        let checks: Vec<Check> = suite
            .iter()
            .map(|&(name, f)| {
                let start = Instant::now();
                let (passed, detail) = match f() {
                    Ok(r) => r,
                    Err(e) => (false, format!("error: {e}")),
                };
                Check {
                    name,
                    passed,
                    detail,
                    seconds: start.elapsed().as_secs_f64(),
                }
            })
            .collect();
        Report {
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures::parallel_game;
    use crate::polytope::caratheodory_distribution;
    use crate::space::AgentSpace;
    use crate::graph::fixtures::*;

    fn s(edges: &[usize]) -> Strategy {
        Strategy::new(edges.to_vec(), 2).unwrap()
    }

    #[test]
    fn potentials_match_examples() {
        let costs = vec![vec![0.0, 1.0, 2.0]; 2];
        let x = vec![vec![0.5, 0.5]; 2];
        assert!((exact_expected_potential(&costs, &x).unwrap() - 2.5).abs() < 1e-15);
        let pure = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(exact_expected_potential(&costs, &pure).unwrap(), 3.0);
        assert!(exact_expected_potential(&vec![vec![0.0; 6]; 2], &vec![vec![0.5; 2]; 5]).is_err());
    }

    #[test]
    fn gap_examples() {
        let game = ExplicitGame::from_game(&parallel_game(2)).unwrap();
        assert_eq!(game.exact_nash_gap(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(), 0.0);
        assert!((game.exact_nash_gap(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap() - 1.0).abs() < 1e-15);
        assert!(game.exact_nash_gap(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn dominated_strategy_margin() {
        // resource 1 costs 3 more than resource 0 at every load
        let costs = vec![vec![0.0, 1.0, 1.0], vec![0.0, 4.0, 4.0]];
        let lists = vec![vec![s(&[0]), s(&[1])], vec![s(&[0]), s(&[1])]];
        let game = ExplicitGame::new(lists, costs).unwrap();
        let gap = game.exact_nash_gap(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((gap - 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_agent_gap() {
        let costs = vec![vec![0.0, 1.0], vec![0.0, 2.0]];
        let game = ExplicitGame::new(vec![vec![s(&[0]), s(&[1])]], costs).unwrap();
        let gap = game.exact_nash_gap(&[vec![0.25, 0.75]]).unwrap();
        assert!((gap - (0.25 + 1.5 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn size_refusals() {
        let lists = vec![vec![s(&[0])]; 5];
        assert!(matches!(
            ExplicitGame::new(lists, vec![vec![0.0; 6]; 2]),
            Err(Error::TooLarge(_))
        ));
        let many = vec![(0..9).map(|_| s(&[0])).collect::<Vec<_>>()];
        assert!(ExplicitGame::new(many, vec![vec![0.0; 2]; 2]).is_err());
    }

    #[test]
    fn estimator_expectation_examples() {
        let space = AgentSpace::network(single_sub(&parallel(2))).unwrap();
        let d = caratheodory_distribution(&space, &[0.5, 0.5], 0.0).unwrap();
        let (mean, _) = estimator_expectation(&d, &[1.0, 2.0]).unwrap();
        assert!((mean[0] - 1.0).abs() < 1e-12 && (mean[1] - 2.0).abs() < 1e-12);
        let (mean, sq) = estimator_expectation(&d, &[0.0, 0.0]).unwrap();
        assert_eq!((mean, sq), (vec![0.0, 0.0], 0.0));
    }

    #[test]
    fn battery_passes() {
        let report = battery::run();
        for c in &report.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}

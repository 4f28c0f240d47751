//! An agent's strategy space together with its spanner and the constraint
//! description of its basis polytope.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{shortest_path, Strategy, Subgraph};
use crate::polytope::caratheodory::{caratheodory_dag, caratheodory_explicit};
use crate::polytope::projection::Constraints;
use crate::spanner::{brute_force_spanner, build_dag_spanner, Spanner};

/// Halfspace description `normals[k] . x <= bounds[k]` of the convex hull of
/// an explicit strategy list. Equalities are written as two inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hull {
    pub normals: Vec<Vec<f64>>,
    pub bounds: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum StrategySet {
    Network(Subgraph),
    Explicit(Vec<Strategy>),
}

#[derive(Debug, Clone)]
pub struct AgentSpace {
    set: StrategySet,
    spanner: Spanner,
    constraints: Constraints,
    anchors: Vec<Strategy>,
}

impl AgentSpace {
    /// Paths of a reachable subgraph, spanned by the edge-covering basis.
    pub fn network(sub: Subgraph) -> Result<Self> {
        let dag_spanner = build_dag_spanner(&sub)?;
        let anchors = dag_spanner.paths().to_vec();
        let s = anchors.len();
        let mut constraints = Constraints::new(vec![-1.0; s], vec![1.0; s]);
        constraints.push_slab(vec![1.0; s], 1.0, 1.0);
        for e in sub.active_edges() {
            let normal = anchors
                .iter()
                .map(|p| if p.contains(e) { 1.0 } else { 0.0 })
                .collect();
            constraints.push_slab(normal, 0.0, 1.0);
        }
        Ok(AgentSpace {
            set: StrategySet::Network(sub),
            spanner: dag_spanner.into(),
            constraints,
            anchors,
        })
    }

    /// An explicit strategy list with a halfspace description of its hull.
    /// Every strategy must satisfy the hull inequalities.
    pub fn explicit(strategies: Vec<Strategy>, hull: &Hull) -> Result<Self> {
        let dim = strategies
            .first()
            .ok_or_else(|| Error::InvalidInput("empty strategy list".into()))?
            .dim();
        if strategies.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidInput("strategies differ in dimension".into()));
        }
        if hull.normals.len() != hull.bounds.len() || hull.normals.iter().any(|a| a.len() != dim) {
            return Err(Error::InvalidInput("hull shape does not match the strategies".into()));
        }
        for (i, p) in strategies.iter().enumerate() {
            for (k, (a, &d)) in hull.normals.iter().zip(&hull.bounds).enumerate() {
                if p.weight(a) > d + 1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "strategy {i} violates hull inequality {k}"
                    )));
                }
            }
        }
        let vertices: Vec<Vec<f64>> = strategies.iter().map(Strategy::incidence).collect();
        let dense = brute_force_spanner(&vertices)?;
        let anchors: Vec<Strategy> = dense.members().iter().map(|&i| strategies[i].clone()).collect();
        let spanner: Spanner = dense.into();
        let s = spanner.size();
        let theta = spanner.theta();
        let mut constraints = Constraints::new(vec![-theta; s], vec![theta; s]);
        for (a, &d) in hull.normals.iter().zip(&hull.bounds) {
            constraints.push_slab(spanner.transpose_mul(a), f64::NEG_INFINITY, d);
        }
        Ok(AgentSpace {
            set: StrategySet::Explicit(strategies),
            spanner,
            constraints,
            anchors,
        })
    }

    pub fn set(&self) -> &StrategySet {
        &self.set
    }

    pub fn spanner(&self) -> &Spanner {
        &self.spanner
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    /// Number of resources.
    pub fn dim(&self) -> usize {
        self.spanner.dim()
    }

    /// Spanner size.
    pub fn size(&self) -> usize {
        self.spanner.size()
    }

    pub fn theta(&self) -> f64 {
        self.spanner.theta()
    }

    /// The pure strategy behind basis coordinate `h`.
    pub fn anchor(&self, h: usize) -> &Strategy {
        &self.anchors[h]
    }

    pub fn anchors(&self) -> &[Strategy] {
        &self.anchors
    }

    /// Whether `p` is a pure strategy of this space.
    pub fn contains(&self, p: &Strategy) -> bool {
        match &self.set {
            StrategySet::Network(sub) => sub.path(p.resources().to_vec()).is_ok(),
            StrategySet::Explicit(list) => list.iter().any(|q| q.mask() == p.mask()),
        }
    }

    /// Caratheodory decomposition of a point of the strategy polytope.
    pub fn caratheodory(&self, x: &[f64]) -> Result<Vec<(Strategy, f64)>> {
        match &self.set {
            StrategySet::Network(sub) => caratheodory_dag(sub, x),
            StrategySet::Explicit(list) => {
                let vertices: Vec<Vec<f64>> = list.iter().map(Strategy::incidence).collect();
                Ok(caratheodory_explicit(&vertices, x)?
                    .into_iter()
                    .map(|(j, w)| (list[j].clone(), w))
                    .collect())
            }
        }
    }

    /// The pure strategy minimising `<w, p>`; ties go to the first strategy
    /// in the space's own order.
    pub fn best_response(&self, w: &[f64]) -> Result<(Strategy, f64)> {
        match &self.set {
            StrategySet::Network(sub) => shortest_path(sub, w),
            StrategySet::Explicit(list) => {
                let mut best: Option<(&Strategy, f64)> = None;
                for p in list {
                    let v = p.weight(w);
                    if best.is_none_or(|(_, b)| v < b) {
                        best = Some((p, v));
                    }
                }
                let (p, v) = best.expect("nonempty strategy list");
                Ok((p.clone(), v))
            }
        }
    }

    /// Number of pure strategies, saturating.
    pub fn strategy_count(&self) -> u64 {
        match &self.set {
            StrategySet::Network(sub) => sub.path_count(),
            StrategySet::Explicit(list) => list.len() as u64,
        }
    }
}

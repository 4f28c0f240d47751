//! Directed acyclic multigraphs, the per-agent reachable subgraph, path
//! machinery and the blue/red edge partition used by the spanner.
//!
//! Edges are identified by their index in the edge list; parallel edges are
//! allowed. Vectors indexed by edges (flows, costs, path incidences) always
//! use the full edge set of the parent graph, so coordinates of edges that do
//! not belong to an agent's subgraph are simply zero.

use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating flow points.
pub const FLOW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Edge {
    pub source: usize,
    pub target: usize,
}

impl From<[usize; 2]> for Edge {
    fn from([source, target]: [usize; 2]) -> Self {
        Edge { source, target }
    }
}

impl From<Edge> for [usize; 2] {
    fn from(e: Edge) -> Self {
        [e.source, e.target]
    }
}

/// An immutable directed acyclic multigraph with a cached topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    node_count: usize,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    topo: Vec<usize>,
    topo_pos: Vec<usize>,
}

impl Dag {
    pub fn new(node_count: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut out_edges = vec![Vec::new(); node_count];
        let mut in_edges = vec![Vec::new(); node_count];
        for (idx, e) in edges.iter().enumerate() {
            for node in [e.source, e.target] {
                if node >= node_count {
                    return Err(Error::NodeOutOfRange {
                        node,
                        count: node_count,
                    });
                }
            }
            out_edges[e.source].push(idx);
            in_edges[e.target].push(idx);
        }
        let topo = kahn(node_count, &edges, &out_edges, &in_edges)?;
        let mut topo_pos = vec![0; node_count];
        for (pos, &v) in topo.iter().enumerate() {
            topo_pos[v] = pos;
        }
        Ok(Dag {
            node_count,
            edges,
            out_edges,
            in_edges,
            topo,
            topo_pos,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    /// Outgoing edge indices of `v`, in increasing index order.
    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    pub fn in_edges(&self, v: usize) -> &[usize] {
        &self.in_edges[v]
    }

    /// Topological order with ties broken by the smaller node id.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn topo_position(&self, v: usize) -> usize {
        self.topo_pos[v]
    }

    fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.node_count {
            Err(Error::NodeOutOfRange {
                node: v,
                count: self.node_count,
            })
        } else {
            Ok(())
        }
    }
}

fn kahn(
    node_count: usize,
    edges: &[Edge],
    out_edges: &[Vec<usize>],
    in_edges: &[Vec<usize>],
) -> Result<Vec<usize>> {
    let mut indegree: Vec<usize> = in_edges.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = indegree
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0)
        .map(|(v, _)| Reverse(v))
        .collect();
    let mut order = Vec::with_capacity(node_count);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &e in &out_edges[v] {
            let w = edges[e].target;
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.push(Reverse(w));
            }
        }
    }
    if order.len() == node_count {
        Ok(order)
    } else {
        Err(Error::Cycle)
    }
}

/// Topological sort of `dag`; ties are broken by node id.
pub fn topological_sort(dag: &Dag) -> Vec<usize> {
    dag.topo.clone()
}

/// A pure strategy: a set of resources. For network games the resources are
/// the edges of a path, listed in traversal order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Strategy {
    resources: Vec<usize>,
    mask: Vec<bool>,
}

impl Strategy {
    pub fn new(resources: Vec<usize>, dim: usize) -> Result<Self> {
        let mut mask = vec![false; dim];
        for &r in &resources {
            if r >= dim {
                return Err(Error::InvalidInput(format!(
                    "resource {r} out of range (dimension {dim})"
                )));
            }
            if mask[r] {
                return Err(Error::InvalidInput(format!("resource {r} listed twice")));
            }
            mask[r] = true;
        }
        Ok(Strategy { resources, mask })
    }

    /// Builds a strategy from a 0/1 vector.
    pub fn from_indicator(v: &[f64]) -> Result<Self> {
        let mut resources = Vec::new();
        for (i, &x) in v.iter().enumerate() {
            if x == 1.0 {
                resources.push(i);
            } else if x != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "coordinate {i} = {x} is not 0 or 1"
                )));
            }
        }
        Strategy::new(resources, v.len())
    }

    pub fn resources(&self) -> &[usize] {
        &self.resources
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    pub fn len(&self) -> usize {
        self.resources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    pub fn contains(&self, r: usize) -> bool {
        self.mask.get(r).copied().unwrap_or(false)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn incidence(&self) -> Vec<f64> {
        self.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// `<w, incidence>`.
    pub fn weight(&self, w: &[f64]) -> f64 {
        self.resources.iter().map(|&r| w[r]).sum()
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.resources.serialize(serializer)
    }
}

/// The nodes and edges lying on at least one source-to-sink path.
#[derive(Debug, Clone)]
pub struct Subgraph {
    dag: Arc<Dag>,
    source: usize,
    sink: usize,
    node_active: Vec<bool>,
    edge_active: Vec<bool>,
    topo: Vec<usize>,
}

/// Restricts `dag` to the nodes and edges that lie on some `source -> sink`
/// path. Edge indices are those of `dag`.
pub fn reachable_subgraph(dag: Arc<Dag>, source: usize, sink: usize) -> Result<Subgraph> {
    dag.check_node(source)?;
    dag.check_node(sink)?;
    if source == sink {
        return Err(Error::DegenerateTerminals(source));
    }
    let n = dag.node_count();
    let mut fwd = vec![false; n];
    fwd[source] = true;
    for &v in dag.topological_order() {
        if fwd[v] {
            for &e in dag.out_edges(v) {
                fwd[dag.edge(e).target] = true;
            }
        }
    }
    let mut bwd = vec![false; n];
    bwd[sink] = true;
    for &v in dag.topological_order().iter().rev() {
        if bwd[v] {
            for &e in dag.in_edges(v) {
                bwd[dag.edge(e).source] = true;
            }
        }
    }
    if !fwd[sink] {
        return Err(Error::EmptyStrategySpace { from: source, to: sink });
    }
    let node_active: Vec<bool> = (0..n).map(|v| fwd[v] && bwd[v]).collect();
    let edge_active: Vec<bool> = dag
        .edges()
        .iter()
        .map(|e| fwd[e.source] && bwd[e.target])
        .collect();
    let topo = dag
        .topological_order()
        .iter()
        .copied()
        .filter(|&v| node_active[v])
        .collect();
    Ok(Subgraph {
        dag,
        source,
        sink,
        node_active,
        edge_active,
        topo,
    })
}

impl Subgraph {
    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Dimension of edge-indexed vectors (edge count of the parent graph).
    pub fn dim(&self) -> usize {
        self.dag.edge_count()
    }

    pub fn is_node_active(&self, v: usize) -> bool {
        self.node_active[v]
    }

    pub fn is_edge_active(&self, e: usize) -> bool {
        self.edge_active[e]
    }

    /// Active nodes in topological order; the first is the source and the
    /// last the sink.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn node_count(&self) -> usize {
        self.topo.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_active.iter().filter(|&&a| a).count()
    }

    pub fn active_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edge_active
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(e, _)| e)
    }

    pub fn out_edges(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.dag
            .out_edges(v)
            .iter()
            .copied()
            .filter(|&e| self.edge_active[e])
    }

    pub fn in_edges(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.dag
            .in_edges(v)
            .iter()
            .copied()
            .filter(|&e| self.edge_active[e])
    }

    /// Depth-first search from `from` to `to` over active edges accepted by
    /// `allow`, visiting out-edges in increasing index order. Returns the DFS
    /// tree path as an edge list (empty when `from == to`).
    pub fn find_path(
        &self,
        from: usize,
        to: usize,
        allow: impl Fn(usize) -> bool,
    ) -> Option<Vec<usize>> {
        if from == to {
            return Some(Vec::new());
        }
        let n = self.dag.node_count();
        let mut visited = vec![false; n];
        let mut via = vec![usize::MAX; n];
        // stack of (node, next out-edge cursor)
        let mut stack = vec![(from, 0usize)];
        visited[from] = true;
        while let Some(&mut (v, ref mut cursor)) = stack.last_mut() {
            let outs = self.dag.out_edges(v);
            let mut advanced = false;
            while *cursor < outs.len() {
                let e = outs[*cursor];
                *cursor += 1;
                if !self.edge_active[e] || !allow(e) {
                    continue;
                }
                let w = self.dag.edge(e).target;
                if visited[w] {
                    continue;
                }
                visited[w] = true;
                via[w] = e;
                if w == to {
                    let mut path = Vec::new();
                    let mut cur = w;
                    while cur != from {
                        let e = via[cur];
                        path.push(e);
                        cur = self.dag.edge(e).source;
                    }
                    path.reverse();
                    return Some(path);
                }
                stack.push((w, 0));
                advanced = true;
                break;
            }
            if !advanced {
                stack.pop();
            }
        }
        None
    }

    /// `reach[u][v]` is true when `v` is reachable from `u` inside the
    /// subgraph (reflexive).
    pub fn reachability(&self) -> Vec<Vec<bool>> {
        let n = self.dag.node_count();
        let mut reach = vec![vec![false; n]; n];
        for &v in self.topo.iter().rev() {
            reach[v][v] = true;
            for e in self.out_edges(v) {
                let w = self.dag.edge(e).target;
                for u in 0..n {
                    if reach[w][u] {
                        reach[v][u] = true;
                    }
                }
            }
        }
        reach
    }

    /// Number of source-to-sink paths, saturating at `u64::MAX`.
    pub fn path_count(&self) -> u64 {
        let n = self.dag.node_count();
        let mut count = vec![0u64; n];
        count[self.source] = 1;
        for &v in &self.topo {
            for e in self.out_edges(v) {
                let w = self.dag.edge(e).target;
                count[w] = count[w].saturating_add(count[v]);
            }
        }
        count[self.sink]
    }

    /// Checks that `x` lies in the agent's flow polytope to `tol`.
    pub fn check_flow(&self, x: &[f64], tol: f64) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::NotInPolytope(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                x.len()
            )));
        }
        for (e, &v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NotInPolytope(format!("edge {e} is not finite")));
            }
            if !self.edge_active[e] {
                if v.abs() > tol {
                    return Err(Error::NotInPolytope(format!(
                        "edge {e} is not on any path but carries {v}"
                    )));
                }
            } else if v < -tol || v > 1.0 + tol {
                return Err(Error::NotInPolytope(format!("edge {e} = {v} outside [0, 1]")));
            }
        }
        for &v in &self.topo {
            let inflow: f64 = self.in_edges(v).map(|e| x[e]).sum();
            let outflow: f64 = self.out_edges(v).map(|e| x[e]).sum();
            let (lhs, rhs, what) = if v == self.source {
                (outflow, 1.0, "source outflow")
            } else if v == self.sink {
                (inflow, 1.0, "sink inflow")
            } else {
                (inflow, outflow, "conservation")
            };
            if (lhs - rhs).abs() > tol {
                return Err(Error::NotInPolytope(format!(
                    "{what} violated at node {v}: {lhs} vs {rhs}"
                )));
            }
        }
        Ok(())
    }

    /// Builds the strategy for an edge list, checking it is a source-to-sink
    /// path of the subgraph.
    pub fn path(&self, edges: Vec<usize>) -> Result<Strategy> {
        let mut at = self.source;
        for &e in &edges {
            if e >= self.dim() || !self.edge_active[e] || self.dag.edge(e).source != at {
                return Err(Error::InvalidInput(format!(
                    "edge {e} does not continue a path from node {at}"
                )));
            }
            at = self.dag.edge(e).target;
        }
        if at != self.sink {
            return Err(Error::InvalidInput(format!(
                "path ends at node {at}, not at sink {}",
                self.sink
            )));
        }
        Strategy::new(edges, self.dim())
    }
}

/// All source-to-sink paths in lexicographic order of their edge-index
/// sequences. Refuses when there are more than `cap`.
pub fn enumerate_paths(sub: &Subgraph, cap: usize) -> Result<Vec<Strategy>> {
    if cap == 0 {
        return Err(Error::InvalidInput("path cap must be at least 1".into()));
    }
    if sub.path_count() > cap as u64 {
        return Err(Error::PathCapExceeded { cap });
    }
    let mut out = Vec::new();
    let mut current = Vec::new();
    enumerate_from(sub, sub.source, &mut current, &mut out)?;
    Ok(out)
}

fn enumerate_from(
    sub: &Subgraph,
    v: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Strategy>,
) -> Result<()> {
    if v == sub.sink {
        out.push(Strategy::new(current.clone(), sub.dim())?);
        return Ok(());
    }
    for e in sub.out_edges(v) {
        current.push(e);
        enumerate_from(sub, sub.dag.edge(e).target, current, out)?;
        current.pop();
    }
    Ok(())
}

/// Minimum-weight source-to-sink path by one dynamic-programming pass in
/// topological order. Negative weights are fine. On ties the incoming edge
/// with the smaller index wins.
pub fn shortest_path(sub: &Subgraph, weights: &[f64]) -> Result<(Strategy, f64)> {
    if weights.len() != sub.dim() {
        return Err(Error::InvalidInput(format!(
            "expected {} edge weights, got {}",
            sub.dim(),
            weights.len()
        )));
    }
    let n = sub.dag.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    dist[sub.source] = 0.0;
    for &v in &sub.topo {
        if v == sub.source {
            continue;
        }
        for e in sub.in_edges(v) {
            let u = sub.dag.edge(e).source;
            let cand = dist[u] + weights[e];
            if cand < dist[v] {
                dist[v] = cand;
                pred[v] = e;
            }
        }
    }
    if !dist[sub.sink].is_finite() {
        return Err(Error::EmptyStrategySpace {
            from: sub.source,
            to: sub.sink,
        });
    }
    let mut edges = Vec::new();
    let mut cur = sub.sink;
    while cur != sub.source {
        let e = pred[cur];
        edges.push(e);
        cur = sub.dag.edge(e).source;
    }
    edges.reverse();
    let path = Strategy::new(edges, sub.dim())?;
    let total = path.weight(weights);
    Ok((path, total))
}

/// Blue/red split of the subgraph's edges: every interior node designates its
/// lowest-index outgoing edge as blue; all remaining edges are red.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    blue: Vec<Option<usize>>,
    red: Vec<usize>,
    red_slot: Vec<Option<usize>>,
}

impl Partition {
    /// Blue outgoing edge of `v`, if `v` is an interior node.
    pub fn blue_edge(&self, v: usize) -> Option<usize> {
        self.blue[v]
    }

    /// Red edges sorted by the topological position of their source, then
    /// by edge index.
    pub fn red_edges(&self) -> &[usize] {
        &self.red
    }

    /// Position of `e` in [`Partition::red_edges`].
    pub fn red_slot(&self, e: usize) -> Option<usize> {
        self.red_slot[e]
    }

    pub fn is_blue(&self, e: usize, dag: &Dag) -> bool {
        self.blue[dag.edge(e).source] == Some(e)
    }

    pub fn red_count(&self) -> usize {
        self.red.len()
    }
}

pub fn blue_red_partition(sub: &Subgraph) -> Partition {
    let dag = sub.dag();
    let mut blue = vec![None; dag.node_count()];
    for &v in sub.topological_order() {
        if v != sub.source && v != sub.sink {
            blue[v] = sub.out_edges(v).next();
        }
    }
    let mut red: Vec<usize> = sub
        .active_edges()
        .filter(|&e| blue[dag.edge(e).source] != Some(e))
        .collect();
    red.sort_by_key(|&e| (dag.topo_position(dag.edge(e).source), e));
    let mut red_slot = vec![None; dag.edge_count()];
    for (h, &e) in red.iter().enumerate() {
        red_slot[e] = Some(h);
    }
    Partition {
        blue,
        red,
        red_slot,
    }
}

/// Follows blue edges from `v` to the sink. Empty when `v` is the sink.
pub fn blue_path(sub: &Subgraph, partition: &Partition, v: usize) -> Result<Vec<usize>> {
    let mut path = Vec::new();
    let mut cur = v;
    while cur != sub.sink {
        let e = partition.blue_edge(cur).ok_or(Error::NoBluePath(cur))?;
        path.push(e);
        cur = sub.dag.edge(e).target;
    }
    Ok(path)
}

/// On-disk description of a network and its agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub nodes: usize,
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub agents: Vec<Terminals>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Terminals {
    pub s: usize,
    pub t: usize,
}

impl GraphSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("graph JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph spec serializes")
    }

    pub fn build(&self) -> Result<Arc<Dag>> {
        Dag::new(self.nodes, self.edges.clone()).map(Arc::new)
    }

    /// Builds the graph and the reachable subgraph of every agent.
    pub fn agent_subgraphs(&self) -> Result<(Arc<Dag>, Vec<Subgraph>)> {
        let dag = self.build()?;
        let subs = self
            .agents
            .iter()
            .map(|a| reachable_subgraph(dag.clone(), a.s, a.t))
            .collect::<Result<Vec<_>>>()?;
        Ok((dag, subs))
    }
}

/// Shape limits for [`random_layered_dag`].
#[derive(Debug, Clone, Copy)]
pub struct LayeredDagParams {
    pub max_nodes: usize,
    pub max_edges: usize,
    pub max_paths: u64,
}

impl Default for LayeredDagParams {
    fn default() -> Self {
        LayeredDagParams {
            max_nodes: 14,
            max_edges: 25,
            max_paths: 300,
        }
    }
}

/// Random single-source single-sink DAG for tests and benchmarks.
///
/// Nodes are arranged in layers between a source layer and a sink layer.
/// Every node gets an edge into the next layer and every non-source node an
/// edge from the previous one, then extra forward edges (parallel and
/// layer-skipping edges included) are added. Node ids and edge order are
/// shuffled so that neither coincides with the topological order. Returns
/// the graph with the single agent `(s, t)`.
pub fn random_layered_dag<R: Rng>(rng: &mut R, params: LayeredDagParams) -> GraphSpec {
    assert!(params.max_nodes >= 2 && params.max_edges >= 1 && params.max_paths >= 1);
    loop {
        let budget = params.max_nodes - 2;
        let mut layers: Vec<usize> = vec![1];
        let mut used = 0;
        let interior = rng.random_range(0..=budget.min(5));
        for _ in 0..interior {
            let w = rng.random_range(1..=3usize);
            if used + w > budget {
                break;
            }
            layers.push(w);
            used += w;
        }
        layers.push(1);
        let mut layer_nodes: Vec<Vec<usize>> = Vec::new();
        let mut next = 0;
        for &w in &layers {
            layer_nodes.push((next..next + w).collect());
            next += w;
        }
        let n = next;
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let last = layers.len() - 1;
        for k in 0..last {
            for &u in &layer_nodes[k] {
                let v = *layer_nodes[k + 1].choose(rng).unwrap();
                edges.push((u, v));
            }
        }
        for k in 1..=last {
            for &v in &layer_nodes[k] {
                if !edges.iter().any(|&(_, t)| t == v) {
                    let u = *layer_nodes[k - 1].choose(rng).unwrap();
                    edges.push((u, v));
                }
            }
        }
        if edges.len() > params.max_edges {
            continue;
        }
        let extra = rng.random_range(0..=params.max_edges - edges.len());
        for _ in 0..extra {
            let a = rng.random_range(0..last);
            let b = rng.random_range(a + 1..=last);
            let u = *layer_nodes[a].choose(rng).unwrap();
            let v = *layer_nodes[b].choose(rng).unwrap();
            edges.push((u, v));
        }
        let mut relabel: Vec<usize> = (0..n).collect();
        relabel.shuffle(rng);
        edges.shuffle(rng);
        let spec = GraphSpec {
            nodes: n,
            edges: edges
                .iter()
                .map(|&(u, v)| Edge {
                    source: relabel[u],
                    target: relabel[v],
                })
                .collect(),
            agents: vec![Terminals {
                s: relabel[0],
                t: relabel[n - 1],
            }],
        };
        let dag = spec.build().expect("layered construction is acyclic");
        let sub = reachable_subgraph(dag, spec.agents[0].s, spec.agents[0].t)
            .expect("every layer node reaches the sink");
        if sub.path_count() <= params.max_paths {
            return spec;
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub const S: usize = 0;
    pub const B: usize = 1;
    pub const C: usize = 2;
    pub const D: usize = 3;
    pub const E: usize = 4;
    pub const F: usize = 5;
    pub const G: usize = 6;
    pub const T: usize = 7;

    /// The eight-node example network. `e->g` is listed before `e->f` so that
    /// the lowest-index blue rule colours `s->b`, `s->c`, `e->f` red.
    pub fn double_diamond() -> GraphSpec {
        let edges = [
            (S, B),
            (S, C),
            (B, D),
            (C, D),
            (D, E),
            (E, G),
            (E, F),
            (F, T),
            (G, T),
        ];
        GraphSpec {
            nodes: 8,
            edges: edges.iter().map(|&(u, v)| Edge { source: u, target: v }).collect(),
            agents: vec![Terminals { s: S, t: T }],
        }
    }

    pub fn diamond() -> GraphSpec {
        GraphSpec {
            nodes: 4,
            edges: [(0, 1), (0, 2), (1, 3), (2, 3)]
                .iter()
                .map(|&(u, v)| Edge { source: u, target: v })
                .collect(),
            agents: vec![Terminals { s: 0, t: 3 }],
        }
    }

    pub fn parallel(k: usize) -> GraphSpec {
        GraphSpec {
            nodes: 2,
            edges: vec![Edge { source: 0, target: 1 }; k],
            agents: vec![Terminals { s: 0, t: 1 }],
        }
    }

    pub fn single_sub(spec: &GraphSpec) -> Subgraph {
        let dag = spec.build().unwrap();
        reachable_subgraph(dag, spec.agents[0].s, spec.agents[0].t).unwrap()
    }

    /// Edge index in the double-diamond graph.
    pub fn fe(u: usize, v: usize) -> usize {
        double_diamond()
            .edges
            .iter()
            .position(|e| e.source == u && e.target == v)
            .unwrap()
    }

    pub fn fig_path(nodes: &[usize]) -> Vec<usize> {
        nodes.windows(2).map(|w| fe(w[0], w[1])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn topo_single_edge() {
        let dag = Dag::new(2, vec![Edge { source: 0, target: 1 }]).unwrap();
        assert_eq!(topological_sort(&dag), vec![0, 1]);
    }

    #[test]
    fn topo_double_diamond() {
        let dag = double_diamond().build().unwrap();
        assert_eq!(topological_sort(&dag), vec![S, B, C, D, E, F, G, T]);
    }

    #[test]
    fn topo_diamond_tie_break() {
        let dag = diamond().build().unwrap();
        assert_eq!(topological_sort(&dag), vec![0, 1, 2, 3]);
    }

    #[test]
    fn cycle_rejected() {
        let edges = vec![
            Edge { source: 0, target: 1 },
            Edge { source: 1, target: 2 },
            Edge { source: 2, target: 0 },
        ];
        assert_eq!(Dag::new(3, edges), Err(Error::Cycle));
        assert_eq!(
            Dag::new(1, vec![Edge { source: 0, target: 0 }]),
            Err(Error::Cycle)
        );
    }

    #[test]
    fn out_of_range_node() {
        let err = Dag::new(2, vec![Edge { source: 0, target: 5 }]).unwrap_err();
        assert_eq!(err, Error::NodeOutOfRange { node: 5, count: 2 });
    }

    #[test]
    fn reachable_double_diamond_is_whole_graph() {
        let sub = single_sub(&double_diamond());
        assert_eq!(sub.edge_count(), 9);
        assert_eq!(sub.node_count(), 8);
    }

    #[test]
    fn reachable_drops_dangling_edge() {
        let mut spec = double_diamond();
        spec.nodes = 9;
        spec.edges.push(Edge { source: D, target: 8 });
        let sub = single_sub(&spec);
        assert!(!sub.is_edge_active(9));
        assert!(!sub.is_node_active(8));
        assert_eq!(sub.edge_count(), 9);
    }

    #[test]
    fn reachable_disconnected_errors() {
        let dag = Arc::new(Dag::new(3, vec![Edge { source: 0, target: 1 }]).unwrap());
        assert_eq!(
            reachable_subgraph(dag.clone(), 0, 2).unwrap_err(),
            Error::EmptyStrategySpace { from: 0, to: 2 }
        );
        assert_eq!(
            reachable_subgraph(dag, 1, 1).unwrap_err(),
            Error::DegenerateTerminals(1)
        );
    }

    #[test]
    fn enumerate_diamond() {
        let sub = single_sub(&diamond());
        let paths = enumerate_paths(&sub, 10).unwrap();
        let lists: Vec<_> = paths.iter().map(|p| p.resources().to_vec()).collect();
        assert_eq!(lists, vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn enumerate_double_diamond() {
        let sub = single_sub(&double_diamond());
        let paths = enumerate_paths(&sub, 10).unwrap();
        assert_eq!(paths.len(), 4);
        let expected = [
            fig_path(&[S, B, D, E, G, T]),
            fig_path(&[S, B, D, E, F, T]),
            fig_path(&[S, C, D, E, G, T]),
            fig_path(&[S, C, D, E, F, T]),
        ];
        for (p, want) in paths.iter().zip(expected.iter()) {
            assert_eq!(p.resources(), want.as_slice());
        }
    }

    #[test]
    fn enumerate_single_edge_and_cap() {
        let sub = single_sub(&parallel(1));
        assert_eq!(enumerate_paths(&sub, 1).unwrap().len(), 1);
        let sub = single_sub(&double_diamond());
        assert_eq!(
            enumerate_paths(&sub, 3).unwrap_err(),
            Error::PathCapExceeded { cap: 3 }
        );
    }

    #[test]
    fn shortest_diamond() {
        let sub = single_sub(&diamond());
        let (p, w) = shortest_path(&sub, &[1.0, 2.0, 1.0, 2.0]).unwrap();
        assert_eq!(p.resources(), &[0, 2]);
        assert_eq!(w, 2.0);
        let (p, w) = shortest_path(&sub, &[1.0; 4]).unwrap();
        assert_eq!(p.resources(), &[0, 2]);
        assert_eq!(w, 2.0);
    }

    #[test]
    fn shortest_double_diamond_unit() {
        let sub = single_sub(&double_diamond());
        let (p, w) = shortest_path(&sub, &[1.0; 9]).unwrap();
        assert_eq!(p.resources(), fig_path(&[S, B, D, E, F, T]).as_slice());
        assert_eq!(w, 5.0);
    }

    #[test]
    fn shortest_handles_negative_weights() {
        let sub = single_sub(&diamond());
        let (p, w) = shortest_path(&sub, &[1.0, 2.0, 1.0, -5.0]).unwrap();
        assert_eq!(p.resources(), &[1, 3]);
        assert_eq!(w, -3.0);
    }

    #[test]
    fn partition_double_diamond() {
        let sub = single_sub(&double_diamond());
        let part = blue_red_partition(&sub);
        assert_eq!(part.red_edges(), &[fe(S, B), fe(S, C), fe(E, F)]);
        let dag = sub.dag();
        for (u, v) in [(B, D), (C, D), (D, E), (E, G), (F, T), (G, T)] {
            assert!(part.is_blue(fe(u, v), dag));
        }
        assert_eq!(part.red_count(), sub.edge_count() + 2 - sub.node_count());
    }

    #[test]
    fn partition_degenerate_graphs() {
        let sub = single_sub(&parallel(1));
        assert_eq!(blue_red_partition(&sub).red_edges(), &[0]);
        let sub = single_sub(&parallel(2));
        assert_eq!(blue_red_partition(&sub).red_edges(), &[0, 1]);
    }

    #[test]
    fn blue_paths_double_diamond() {
        let sub = single_sub(&double_diamond());
        let part = blue_red_partition(&sub);
        assert_eq!(blue_path(&sub, &part, B).unwrap(), fig_path(&[B, D, E, G, T]));
        assert_eq!(blue_path(&sub, &part, F).unwrap(), fig_path(&[F, T]));
        assert!(blue_path(&sub, &part, T).unwrap().is_empty());
        assert_eq!(blue_path(&sub, &part, S).unwrap_err(), Error::NoBluePath(S));
    }

    #[test]
    fn flow_check() {
        let sub = single_sub(&diamond());
        assert!(sub.check_flow(&[0.5, 0.5, 0.5, 0.5], FLOW_TOL).is_ok());
        assert!(sub.check_flow(&[0.5, 0.5, 0.4, 0.5], FLOW_TOL).is_err());
        assert!(sub.check_flow(&[1.0, 0.0, 1.0], FLOW_TOL).is_err());
        assert!(sub.check_flow(&[1.2, -0.2, 1.2, -0.2], FLOW_TOL).is_err());
    }

    #[test]
    fn path_validation() {
        let sub = single_sub(&diamond());
        assert!(sub.path(vec![0, 2]).is_ok());
        assert!(sub.path(vec![0, 3]).is_err());
        assert!(sub.path(vec![0]).is_err());
    }

    #[test]
    fn graph_json_schema() {
        let spec = GraphSpec::from_json(
            r#"{"nodes": 2, "edges": [[0,1],[0,1]], "agents": [{"s": 0, "t": 1}]}"#,
        )
        .unwrap();
        assert_eq!(spec, parallel(2));
        assert_eq!(GraphSpec::from_json(&spec.to_json()).unwrap(), spec);
        assert!(GraphSpec::from_json(r#"{"nodes": 2, "edges": [[0]]}"#).is_err());
    }

    #[test]
    fn random_dags_respect_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let spec = random_layered_dag(&mut rng, LayeredDagParams::default());
            assert!(spec.nodes <= 14);
            assert!(spec.edges.len() <= 25);
            let sub = single_sub(&spec);
            assert!(sub.path_count() <= 300);
        }
    }

    /// Every node other than the source has a blue path to the sink, on many
    /// random DAGs.
    #[test]
    fn clean_suffix_paths_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = LayeredDagParams {
            max_nodes: 20,
            max_edges: 40,
            max_paths: 100_000,
        };
        for _ in 0..200 {
            let spec = random_layered_dag(&mut rng, params);
            let sub = single_sub(&spec);
            let part = blue_red_partition(&sub);
            assert_eq!(part.red_count(), sub.edge_count() + 2 - sub.node_count());
            for &v in sub.topological_order() {
                if v == sub.source() {
                    continue;
                }
                let p = blue_path(&sub, &part, v).unwrap();
                let end = p.last().map_or(v, |&e| sub.dag().edge(e).target);
                assert_eq!(end, sub.sink());
            }
        }
    }

    #[test]
    fn shortest_matches_enumeration_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let spec = random_layered_dag(
                &mut rng,
                LayeredDagParams {
                    max_paths: 200,
                    ..Default::default()
                },
            );
            let sub = single_sub(&spec);
            let w: Vec<f64> = (0..sub.dim()).map(|_| rng.random_range(-1.0..2.0)).collect();
            let (_, best) = shortest_path(&sub, &w).unwrap();
            let brute = enumerate_paths(&sub, 200)
                .unwrap()
                .iter()
                .map(|p| p.weight(&w))
                .fold(f64::INFINITY, f64::min);
            assert!((best - brute).abs() < 1e-12);
        }
    }
}

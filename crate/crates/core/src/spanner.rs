//! Barycentric spanners.
//!
//! [`build_dag_spanner`] is the edge-covering construction for DAG flow
//! polytopes: one basis path per red edge, each built either by extending the
//! most recent connected basis path (its *prefix*) or by leaving the source
//! through the red edge, and always finishing along blue edges. The red
//! coordinates of basis path `h` are then `r_h = r_prefix(h) + u_h`, which
//! gives a closed-form inverse and coefficients in `{-1, 0, 1}` for every
//! path.
//!
//! [`brute_force_spanner`] searches all bases of a small explicit vertex set
//! for the one with the smallest spanning constant.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{blue_path, blue_red_partition, Partition, Strategy, Subgraph, FLOW_TOL};

/// Largest vertex list accepted by [`brute_force_spanner`].
pub const BRUTE_FORCE_MAX_VERTICES: usize = 12;
/// Largest ambient dimension accepted by [`brute_force_spanner`].
pub const BRUTE_FORCE_MAX_DIM: usize = 10;

const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct DagSpanner {
    sub: Subgraph,
    partition: Partition,
    paths: Vec<Strategy>,
    prefix: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct DenseSpanner {
    columns: Vec<Vec<f64>>,
    members: Vec<usize>,
    theta: f64,
    basis: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
}

/// A set of linearly independent points of a strategy polytope such that
/// every point decomposes with coefficients bounded by `theta`.
#[derive(Debug, Clone)]
pub enum Spanner {
    Dag(DagSpanner),
    Dense(DenseSpanner),
}

/// Builds the exact 1-spanner of the agent's flow polytope.
pub fn build_dag_spanner(sub: &Subgraph) -> Result<DagSpanner> {
    let partition = blue_red_partition(sub);
    let reach = sub.reachability();
    let dag = sub.dag();
    let red = partition.red_edges();
    let mut paths: Vec<Strategy> = Vec::with_capacity(red.len());
    let mut prefix = Vec::with_capacity(red.len());

    for (h, &eh) in red.iter().enumerate() {
        let head = dag.edge(eh);
        let tail = blue_path(sub, &partition, head.target)?;
        let mut covering = None;
        for k in (0..h).rev() {
            let ek = red[k];
            let from = dag.edge(ek).target;
            if reach[from][head.source] {
                let link = sub.find_path(from, head.source, |_| true).ok_or_else(|| {
                    Error::Invariant(format!("reachability claims {from} reaches {}", head.source))
                })?;
                let mut edges = truncate(&paths[k], ek)?;
                edges.extend(link);
                covering = Some((k, edges));
                break;
            }
        }
        let (pre, mut edges) = match covering {
            Some((k, edges)) => (Some(k), edges),
            None => {
                // With no connected earlier red edge, every path to the tail of
                // e_h would have to start with a red edge out of the source,
                // which precedes e_h. So e_h itself leaves the source.
                if head.source != sub.source() {
                    return Err(Error::Invariant(format!(
                        "red edge {eh} is not reachable from any earlier red edge"
                    )));
                }
                (None, Vec::new())
            }
        };
        edges.push(eh);
        edges.extend(tail);
        paths.push(sub.path(edges)?);
        prefix.push(pre);
    }

    let mut children = vec![Vec::new(); red.len()];
    for (h, p) in prefix.iter().enumerate() {
        if let Some(k) = *p {
            children[k].push(h);
        }
    }
    Ok(DagSpanner {
        sub: sub.clone(),
        partition,
        paths,
        prefix,
        children,
    })
}

/// The prefix of `path` up to and including `edge`.
fn truncate(path: &Strategy, edge: usize) -> Result<Vec<usize>> {
    let pos = path
        .resources()
        .iter()
        .position(|&e| e == edge)
        .ok_or_else(|| Error::Invariant(format!("basis path does not cover its red edge {edge}")))?;
    Ok(path.resources()[..=pos].to_vec())
}

/// Reconstructs blue coordinates from red ones by flow conservation in
/// topological order. Linear in `red_coords`; `fill(red(x)) == x` on the flow
/// polytope.
pub fn fill(sub: &Subgraph, partition: &Partition, red_coords: &[f64]) -> Result<Vec<f64>> {
    if red_coords.len() != partition.red_count() {
        return Err(Error::InvalidInput(format!(
            "expected {} red coordinates, got {}",
            partition.red_count(),
            red_coords.len()
        )));
    }
    let mut x = vec![0.0; sub.dim()];
    for (&e, &v) in partition.red_edges().iter().zip(red_coords) {
        x[e] = v;
    }
    for &v in sub.topological_order() {
        if let Some(blue) = partition.blue_edge(v) {
            let inflow: f64 = sub.in_edges(v).map(|e| x[e]).sum();
            let red_out: f64 = sub.out_edges(v).filter(|&e| e != blue).map(|e| x[e]).sum();
            x[blue] = inflow - red_out;
        }
    }
    Ok(x)
}

impl DagSpanner {
    pub fn subgraph(&self) -> &Subgraph {
        &self.sub
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn paths(&self) -> &[Strategy] {
        &self.paths
    }

    /// `prefix()[h]` is the index of the basis path that path `h` extends.
    pub fn prefix(&self) -> &[Option<usize>] {
        &self.prefix
    }

    /// Red coordinates of `x`.
    pub fn red(&self, x: &[f64]) -> Vec<f64> {
        self.partition.red_edges().iter().map(|&e| x[e]).collect()
    }

    /// Solves `r = sum_h alpha_h r_h` using `r_h - r_prefix(h) = u_h`:
    /// `alpha_h = r_h - sum of r_j over children j of h`.
    pub fn coefficients_from_red(&self, red: &[f64]) -> Vec<f64> {
        (0..red.len())
            .map(|h| red[h] - self.children[h].iter().map(|&j| red[j]).sum::<f64>())
            .collect()
    }

    /// Checks that no two connected red edges share a prefix.
    pub fn check_prefix_property(&self) -> Result<()> {
        let reach = self.sub.reachability();
        let dag = self.sub.dag();
        let red = self.partition.red_edges();
        for k in 0..red.len() {
            for l in k + 1..red.len() {
                let connected = reach[dag.edge(red[k]).target][dag.edge(red[l]).source];
                if connected && self.prefix[k] == self.prefix[l] {
                    return Err(Error::Invariant(format!(
                        "connected red edges {} and {} share prefix {:?}",
                        red[k], red[l], self.prefix[k]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks the telescoping identity on red coordinates.
    pub fn check_telescoping(&self) -> Result<()> {
        let s = self.paths.len();
        for h in 0..s {
            let mut v: Vec<f64> = self.red(&self.paths[h].incidence());
            if let Some(k) = self.prefix[h] {
                let rk = self.red(&self.paths[k].incidence());
                v.iter_mut().zip(rk).for_each(|(a, b)| *a -= b);
            }
            for (j, &x) in v.iter().enumerate() {
                let want = if j == h { 1.0 } else { 0.0 };
                if x != want {
                    return Err(Error::Invariant(format!(
                        "basis path {h} breaks the telescoping identity at slot {j}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Searches all rank-sized subsets of `vertices` for the basis minimising the
/// largest absolute coefficient needed to express every vertex.
pub fn brute_force_spanner(vertices: &[Vec<f64>]) -> Result<DenseSpanner> {
    if vertices.is_empty() {
        return Err(Error::InvalidInput("empty vertex list".into()));
    }
    let dim = vertices[0].len();
    if vertices.iter().any(|v| v.len() != dim) {
        return Err(Error::InvalidInput("vertices have different dimensions".into()));
    }
    if vertices.len() > BRUTE_FORCE_MAX_VERTICES || dim > BRUTE_FORCE_MAX_DIM {
        return Err(Error::TooLarge(format!(
            "{} vertices in dimension {dim} (limits {BRUTE_FORCE_MAX_VERTICES} and \
             {BRUTE_FORCE_MAX_DIM}); use build_dag_spanner for network games",
            vertices.len()
        )));
    }
    let all = DMatrix::from_fn(dim, vertices.len(), |r, c| vertices[c][r]);
    let rank = all.clone().svd(false, false).rank(RANK_TOL);
    if rank == 0 {
        return Err(Error::InvalidInput("vertex set spans only the origin".into()));
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    for subset in Combinations::new(vertices.len(), rank) {
        let basis = all.select_columns(subset.iter());
        let Some(gram_inv) = (basis.transpose() * &basis).try_inverse() else {
            continue;
        };
        if basis.clone().svd(false, false).rank(RANK_TOL) < rank {
            continue;
        }
        let coeffs = &gram_inv * basis.transpose() * &all;
        let residual = (&basis * &coeffs - &all).amax();
        if residual > 1e-8 {
            continue;
        }
        let theta = coeffs.amax();
        if best.as_ref().is_none_or(|(b, _)| theta < b - 1e-12) {
            best = Some((theta, subset));
        }
    }
    let (theta, members) =
        best.ok_or_else(|| Error::Invariant("no independent subset of full rank".into()))?;
    Ok(DenseSpanner::new(vertices, members, theta))
}

impl DenseSpanner {
    fn new(vertices: &[Vec<f64>], members: Vec<usize>, theta: f64) -> Self {
        let columns: Vec<Vec<f64>> = members.iter().map(|&i| vertices[i].clone()).collect();
        let dim = columns[0].len();
        let basis = DMatrix::from_fn(dim, columns.len(), |r, c| columns[c][r]);
        let gram_inv = (basis.transpose() * &basis)
            .try_inverse()
            .expect("selected columns are independent");
        DenseSpanner {
            columns,
            members,
            theta,
            basis,
            gram_inv,
        }
    }

    /// Indices of the chosen vertices in the input list.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }
}

impl Spanner {
    pub fn size(&self) -> usize {
        match self {
            Spanner::Dag(d) => d.paths.len(),
            Spanner::Dense(d) => d.columns.len(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Spanner::Dag(d) => d.sub.dim(),
            Spanner::Dense(d) => d.basis.nrows(),
        }
    }

    pub fn theta(&self) -> f64 {
        match self {
            Spanner::Dag(_) => 1.0,
            Spanner::Dense(d) => d.theta,
        }
    }

    pub fn column(&self, h: usize) -> Vec<f64> {
        match self {
            Spanner::Dag(d) => d.paths[h].incidence(),
            Spanner::Dense(d) => d.columns[h].clone(),
        }
    }

    /// The m-by-s matrix whose columns are the basis points.
    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            Spanner::Dag(d) => DMatrix::from_fn(d.sub.dim(), d.paths.len(), |r, c| {
                if d.paths[c].contains(r) {
                    1.0
                } else {
                    0.0
                }
            }),
            Spanner::Dense(d) => d.basis.clone(),
        }
    }

    /// `B alpha`.
    pub fn combine(&self, alpha: &[f64]) -> Vec<f64> {
        assert_eq!(alpha.len(), self.size(), "coefficient length");
        match self {
            Spanner::Dag(d) => {
                let mut x = vec![0.0; d.sub.dim()];
                for (p, &a) in d.paths.iter().zip(alpha) {
                    for &e in p.resources() {
                        x[e] += a;
                    }
                }
                x
            }
            Spanner::Dense(d) => {
                let x = &d.basis * DVector::from_column_slice(alpha);
                x.iter().copied().collect()
            }
        }
    }

    /// `B^T c`.
    pub fn transpose_mul(&self, c: &[f64]) -> Vec<f64> {
        match self {
            Spanner::Dag(d) => d.paths.iter().map(|p| p.weight(c)).collect(),
            Spanner::Dense(d) => {
                let v = d.basis.transpose() * DVector::from_column_slice(c);
                v.iter().copied().collect()
            }
        }
    }

    /// Coefficients `alpha` with `B alpha = x`.
    ///
    /// For DAG spanners `x` must lie in the flow polytope and the solve uses
    /// the prefix structure; dense spanners use the normal equations and
    /// reject points outside the span.
    pub fn decompose(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Spanner::Dag(d) => {
                d.sub.check_flow(x, FLOW_TOL)?;
                Ok(d.coefficients_from_red(&d.red(x)))
            }
            Spanner::Dense(d) => {
                if x.len() != d.basis.nrows() {
                    return Err(Error::InvalidInput(format!(
                        "expected {} coordinates, got {}",
                        d.basis.nrows(),
                        x.len()
                    )));
                }
                let xv = DVector::from_column_slice(x);
                let alpha = &d.gram_inv * d.basis.transpose() * &xv;
                let residual = (&d.basis * &alpha - xv).amax();
                if residual > 1e-8 {
                    return Err(Error::NotInPolytope(format!(
                        "point is {residual:e} away from the span of the spanner"
                    )));
                }
                Ok(alpha.iter().copied().collect())
            }
        }
    }

    /// Basis coordinates of a pure strategy that is a basis member, by index.
    pub fn basis_strategy(&self, h: usize) -> Option<&Strategy> {
        match self {
            Spanner::Dag(d) => d.paths.get(h),
            Spanner::Dense(_) => None,
        }
    }

    pub fn report(&self) -> SpannerReport {
        match self {
            Spanner::Dag(d) => SpannerReport {
                basis: d.paths.iter().map(|p| p.resources().to_vec()).collect(),
                prefix: Some(d.prefix.clone()),
                red_edges: Some(d.partition.red_edges().to_vec()),
                theta: 1.0,
            },
            Spanner::Dense(d) => SpannerReport {
                basis: d
                    .columns
                    .iter()
                    .map(|c| {
                        c.iter()
                            .enumerate()
                            .filter(|(_, &v)| v != 0.0)
                            .map(|(i, _)| i)
                            .collect()
                    })
                    .collect(),
                prefix: None,
                red_edges: None,
                theta: d.theta,
            },
        }
    }
}

impl From<DagSpanner> for Spanner {
    fn from(d: DagSpanner) -> Self {
        Spanner::Dag(d)
    }
}

impl From<DenseSpanner> for Spanner {
    fn from(d: DenseSpanner) -> Self {
        Spanner::Dense(d)
    }
}

/// JSON view of a spanner: basis members as resource lists, the prefix map
/// (DAG construction only) and the spanning constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpannerReport {
    pub basis: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix: Option<Vec<Option<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub red_edges: Option<Vec<usize>>,
    pub theta: f64,
}

/// Lexicographic k-subsets of `0..n`.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

//! Caratheodory decompositions: edge elimination on flow polytopes and a
//! phase-1 simplex for explicit vertex lists.

use crate::error::{Error, Result};
use crate::graph::{Strategy, Subgraph, FLOW_TOL};

/// Atoms lighter than this are dropped.
pub const PRUNE_TOL: f64 = 1e-12;
/// Largest vertex list accepted by [`caratheodory_explicit`].
pub const EXPLICIT_MAX_VERTICES: usize = 50;

const RECOMBINE_TOL: f64 = 1e-8;
// edge masses at or below this are rounding residue
const SNAP: f64 = 1e-12;
// an unroutable edge lighter than this is tolerance-level slack of the input
const DUST: f64 = 1e-8;

/// Writes `x` as a convex combination of source-to-sink paths by repeatedly
/// routing the lightest supported edge along a path inside the support.
pub fn caratheodory_dag(sub: &Subgraph, x: &[f64]) -> Result<Vec<(Strategy, f64)>> {
    sub.check_flow(x, FLOW_TOL)?;
    let mut work: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(e, &v)| if sub.is_edge_active(e) { v.max(0.0) } else { 0.0 })
        .collect();
    let dag = sub.dag();
    let mut atoms: Vec<(Strategy, f64)> = Vec::new();
    loop {
        let outflow: f64 = sub.out_edges(sub.source()).map(|e| work[e]).sum();
        if outflow <= SNAP {
            break;
        }
        let mut e_min = None;
        for e in sub.active_edges() {
            if work[e] > 0.0 && e_min.is_none_or(|m: usize| work[e] < work[m]) {
                e_min = Some(e);
            }
        }
        let Some(e_min) = e_min else { break };
        let edge = dag.edge(e_min);
        let support = |e: usize| work[e] > 0.0;
        let head = sub.find_path(sub.source(), edge.source, support);
        let tail = sub.find_path(edge.target, sub.sink(), support);
        let (Some(mut path), Some(tail)) = (head, tail) else {
            if work[e_min] <= DUST {
                work[e_min] = 0.0;
                continue;
            }
            return Err(Error::Invariant(format!(
                "no path inside the support through edge {e_min} (mass {})",
                work[e_min]
            )));
        };
        path.push(e_min);
        path.extend(tail);
        let w = work[e_min];
        for &e in &path {
            work[e] -= w;
            if work[e] <= SNAP {
                work[e] = 0.0;
            }
        }
        work[e_min] = 0.0;
        atoms.push((sub.path(path)?, w));
    }
    finish(atoms)
}

fn finish<T>(mut atoms: Vec<(T, f64)>) -> Result<Vec<(T, f64)>> {
    let before: f64 = atoms.iter().map(|a| a.1).sum();
    atoms.retain(|a| a.1 >= PRUNE_TOL);
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    if atoms.is_empty() || (before - total) > 1e-9 * before {
        return Err(Error::Invariant(format!(
            "pruning removed {} of {before} mass",
            before - total
        )));
    }
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::Invariant(format!("atom weights sum to {total}")));
    }
    for a in &mut atoms {
        a.1 /= total;
    }
    Ok(atoms)
}

/// Writes `point` as a convex combination of at most `dim + 1` of the given
/// vertices. Returns `(vertex index, weight)` pairs.
///
/// Phase-1 simplex on `{ sum_k l_k v_k = x, sum_k l_k = 1, l >= 0 }` with
/// Bland's rule, so it cannot cycle.
pub fn caratheodory_explicit(vertices: &[Vec<f64>], point: &[f64]) -> Result<Vec<(usize, f64)>> {
    if vertices.is_empty() {
        return Err(Error::InvalidInput("empty vertex list".into()));
    }
    if vertices.len() > EXPLICIT_MAX_VERTICES {
        return Err(Error::TooLarge(format!(
            "{} vertices (limit {EXPLICIT_MAX_VERTICES})",
            vertices.len()
        )));
    }
    let dim = point.len();
    if vertices.iter().any(|v| v.len() != dim) {
        return Err(Error::InvalidInput("vertex dimension mismatch".into()));
    }
    let k = vertices.len();
    let rows = dim + 1;
    // columns: k structural, rows artificial, then the right-hand side
    let cols = k + rows + 1;
    let rhs = cols - 1;
    let mut tab = vec![vec![0.0; cols]; rows];
    for r in 0..rows {
        let b = if r < dim { point[r] } else { 1.0 };
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in vertices.iter().enumerate() {
            tab[r][j] = sign * if r < dim { v[r] } else { 1.0 };
        }
        tab[r][k + r] = 1.0;
        tab[r][rhs] = sign * b;
    }
    let mut basis: Vec<usize> = (k..k + rows).collect();
    // reduced costs of the phase-1 objective (sum of artificials)
    let mut cost = vec![0.0; cols];
    for j in 0..cols {
        if (k..k + rows).contains(&j) {
            continue;
        }
        cost[j] = -tab.iter().map(|row| row[j]).sum::<f64>();
    }
    const PIVOT_TOL: f64 = 1e-12;
    loop {
        let Some(enter) = (0..rhs).find(|&j| cost[j] < -PIVOT_TOL) else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..rows {
            let a = tab[r][enter];
            if a > PIVOT_TOL {
                let ratio = tab[r][rhs] / a;
                let better = match leave {
                    None => true,
                    Some((lr, best)) => {
                        ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[r] < basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((pr, _)) = leave else {
            // unbounded direction cannot occur in phase 1
            return Err(Error::Invariant("phase-1 simplex is unbounded".into()));
        };
        let pivot = tab[pr][enter];
        for v in tab[pr].iter_mut() {
            *v /= pivot;
        }
        let prow = tab[pr].clone();
        for (r, row) in tab.iter_mut().enumerate() {
            if r != pr && row[enter] != 0.0 {
                let f = row[enter];
                row.iter_mut().zip(&prow).for_each(|(v, p)| *v -= f * p);
            }
        }
        let f = cost[enter];
        cost.iter_mut().zip(&prow).for_each(|(v, p)| *v -= f * p);
        basis[pr] = enter;
    }
    let infeasibility = -cost[rhs];
    if infeasibility > 1e-9 {
        return Err(Error::NotInHull);
    }
    let mut atoms: Vec<(usize, f64)> = basis
        .iter()
        .zip(&tab)
        .filter(|(&j, _)| j < k)
        .map(|(&j, row)| (j, row[rhs].max(0.0)))
        .collect();
    atoms.sort_by_key(|a| a.0);
    let atoms = finish(atoms)?;
    let err = recombination_error(
        atoms.iter().map(|&(j, w)| (vertices[j].as_slice(), w)),
        point,
    );
    if err > RECOMBINE_TOL {
        return Err(Error::NotInHull);
    }
    Ok(atoms)
}

/// `max_i |sum_k w_k v_k[i] - x[i]|`.
pub fn recombination_error<'a>(
    atoms: impl IntoIterator<Item = (&'a [f64], f64)>,
    x: &[f64],
) -> f64 {
    let mut acc = vec![0.0; x.len()];
    for (v, w) in atoms {
        acc.iter_mut().zip(v).for_each(|(a, b)| *a += w * b);
    }
    acc.iter()
        .zip(x)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

//! Euclidean projection onto basis polytopes with Dykstra's cyclic
//! algorithm. Every constraint set is a coordinate box plus a list of slabs
//! `lo <= a . x <= hi` (equalities have `lo == hi`, halfspaces an infinite
//! side), so each elementary projection is closed form.

use crate::error::{Error, Result};

/// Cycle displacement (max norm) below which Dykstra stops.
pub const DISPLACEMENT_TOL: f64 = 1e-10;
/// Cycle cap.
pub const MAX_CYCLES: usize = 20_000;
/// Largest constraint violation a projection may return.
pub const VIOLATION_TOL: f64 = 1e-8;
/// Slack below which the polish step treats the anchor as on a boundary.
const ROOM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Slab {
    normal: Vec<f64>,
    lo: f64,
    hi: f64,
    norm_sq: f64,
}

impl Slab {
    pub fn new(normal: Vec<f64>, lo: f64, hi: f64) -> Self {
        let norm_sq = normal.iter().map(|a| a * a).sum();
        Slab {
            normal,
            lo,
            hi,
            norm_sq,
        }
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn dot(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    fn violation(&self, x: &[f64]) -> f64 {
        let v = self.dot(x);
        (self.lo - v).max(v - self.hi).max(0.0)
    }

    fn project(&self, x: &mut [f64]) {
        let v = self.dot(x);
        let shift = if v < self.lo {
            self.lo - v
        } else if v > self.hi {
            self.hi - v
        } else {
            return;
        };
        let step = shift / self.norm_sq;
        x.iter_mut()
            .zip(&self.normal)
            .for_each(|(xi, a)| *xi += step * a);
    }
}

/// `{ x : lower <= x <= upper, lo_k <= a_k . x <= hi_k }`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    lower: Vec<f64>,
    upper: Vec<f64>,
    slabs: Vec<Slab>,
}

impl Constraints {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Constraints {
            lower,
            upper,
            slabs: Vec::new(),
        }
    }

    /// Adds a slab, merging it with an existing slab of identical normal.
    /// Zero normals are dropped.
    pub fn push_slab(&mut self, normal: Vec<f64>, lo: f64, hi: f64) {
        assert_eq!(normal.len(), self.dim());
        if normal.iter().all(|&a| a == 0.0) {
            return;
        }
        if let Some(s) = self.slabs.iter_mut().find(|s| s.normal == normal) {
            s.lo = s.lo.max(lo);
            s.hi = s.hi.min(hi);
            return;
        }
        self.slabs.push(Slab::new(normal, lo, hi));
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn slabs(&self) -> &[Slab] {
        &self.slabs
    }

    pub fn box_bounds(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    /// Largest absolute violation over all constraints.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let boxed = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max);
        self.slabs
            .iter()
            .map(|s| s.violation(x))
            .fold(boxed, f64::max)
    }

    /// The image of the set under `y -> (1 - mu) y + (mu / s) 1`.
    pub fn bounded_away(&self, mu: f64) -> Constraints {
        let s = self.dim() as f64;
        let shift = mu / s;
        let map = |v: f64| (1.0 - mu) * v + shift;
        Constraints {
            lower: self.lower.iter().map(|&v| map(v)).collect(),
            upper: self.upper.iter().map(|&v| map(v)).collect(),
            slabs: self
                .slabs
                .iter()
                .map(|sl| {
                    let offset = shift * sl.normal.iter().sum::<f64>();
                    Slab {
                        normal: sl.normal.clone(),
                        lo: (1.0 - mu) * sl.lo + offset,
                        hi: (1.0 - mu) * sl.hi + offset,
                        norm_sq: sl.norm_sq,
                    }
                })
                .collect(),
        }
    }

    fn project_box(&self, x: &mut [f64]) {
        for ((xi, &lo), &hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(lo, hi);
        }
    }

    /// Euclidean projection of `z` by Dykstra's algorithm, cycling over the
    /// box, the inequality slabs and finally the equalities.
    ///
    /// The Dykstra limit is polished by mixing towards `anchor`, a point of
    /// the set, just enough to remove the residual violation of the
    /// inequality constraints. The mixing weight is of the order of the
    /// residual, so the result moves by the same order.
    pub fn project(&self, z: &[f64], anchor: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(z.len(), self.dim());
        let mut x = z.to_vec();
        // equalities go last so the cycle ends on them; the polish below
        // cannot repair an equality but preserves every one the anchor meets
        let mut order: Vec<usize> = (0..self.slabs.len()).collect();
        order.sort_by_key(|&k| self.slabs[k].lo == self.slabs[k].hi);
        let parts = 1 + self.slabs.len();
        let mut incr = vec![vec![0.0; x.len()]; parts];
        let mut y = vec![0.0; x.len()];
        let mut converged = false;
        for _ in 0..MAX_CYCLES {
            let before = x.clone();
            let mut drift: f64 = 0.0;
            for (k, inc) in incr.iter_mut().enumerate() {
                for i in 0..x.len() {
                    y[i] = x[i] + inc[i];
                }
                x.copy_from_slice(&y);
                if k == 0 {
                    self.project_box(&mut x);
                } else {
                    self.slabs[order[k - 1]].project(&mut x);
                }
                for i in 0..x.len() {
                    let next = y[i] - x[i];
                    drift = drift.max((next - inc[i]).abs());
                    inc[i] = next;
                }
            }
            let moved = x
                .iter()
                .zip(&before)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            // x can stall while the increments are still changing, so both
            // have to settle
            if moved < DISPLACEMENT_TOL && drift < DISPLACEMENT_TOL {
                converged = true;
                break;
            }
        }
        let raw = self.violation(&x);
        if !converged && raw > VIOLATION_TOL {
            return Err(Error::ProjectionDiverged {
                cycles: MAX_CYCLES,
                violation: raw,
            });
        }
        if raw > 0.0 {
            self.polish(&mut x, anchor);
        }
        let violation = self.violation(&x);
        if violation > VIOLATION_TOL {
            return Err(Error::ProjectionDiverged {
                cycles: MAX_CYCLES,
                violation,
            });
        }
        Ok(x)
    }

    fn polish(&self, x: &mut [f64], anchor: &[f64]) {
        let mut tau: f64 = 0.0;
        let mut need = |value: f64, anchor_value: f64, bound: f64, upper: bool| {
            let (excess, room) = if upper {
                (value - bound, bound - anchor_value)
            } else {
                (bound - value, anchor_value - bound)
            };
            // a constraint the anchor meets only up to rounding gives no
            // usable direction
            if excess > 0.0 && room > ROOM_TOL {
                tau = tau.max(excess / (excess + room));
            }
        };
        for i in 0..x.len() {
            need(x[i], anchor[i], self.lower[i], false);
            need(x[i], anchor[i], self.upper[i], true);
        }
        for s in self.slabs.iter().filter(|s| s.lo < s.hi) {
            let (v, a) = (s.dot(x), s.dot(anchor));
            need(v, a, s.lo, false);
            need(v, a, s.hi, true);
        }
        if tau > 0.0 {
            let tau = tau.min(1.0);
            x.iter_mut()
                .zip(anchor)
                .for_each(|(xi, ai)| *xi = (1.0 - tau) * *xi + tau * ai);
        }
    }
}

/// Projection onto the basis polytope `D`.
pub fn project_base(constraints: &Constraints, z: &[f64]) -> Result<Vec<f64>> {
    let anchor = barycenter(constraints.dim());
    constraints.project(z, &anchor)
}

/// Projection onto `D^mu = (1 - mu) D + (mu / s) 1` through the affine
/// reduction `(1 - mu) P_D((z - (mu / s) 1) / (1 - mu)) + (mu / s) 1`.
pub fn project_bounded_away(constraints: &Constraints, z: &[f64], mu: f64) -> Result<Vec<f64>> {
    check_mu(mu)?;
    let s = constraints.dim() as f64;
    let shift = mu / s;
    let inner: Vec<f64> = z.iter().map(|&v| (v - shift) / (1.0 - mu)).collect();
    let p = project_base(constraints, &inner)?;
    Ok(p.iter().map(|&v| (1.0 - mu) * v + shift).collect())
}

/// Direct Dykstra projection onto the shrunken constraint set of `D^mu`.
pub fn project_bounded_away_direct(
    constraints: &Constraints,
    z: &[f64],
    mu: f64,
) -> Result<Vec<f64>> {
    check_mu(mu)?;
    let shrunk = constraints.bounded_away(mu);
    shrunk.project(z, &barycenter(constraints.dim()))
}

/// `(1/s) 1`, a member of every `D^mu`.
pub fn barycenter(s: usize) -> Vec<f64> {
    vec![1.0 / s as f64; s]
}

pub(crate) fn check_mu(mu: f64) -> Result<()> {
    if (0.0..=0.5).contains(&mu) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "exploration level {mu} outside [0, 0.5]"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The segment `{(t, 1 - t) : t in [0, 1]}` written as box, hyperplane
    /// and two edge slabs.
    fn segment() -> Constraints {
        let mut c = Constraints::new(vec![-1.0; 2], vec![1.0; 2]);
        c.push_slab(vec![1.0, 1.0], 1.0, 1.0);
        c.push_slab(vec![1.0, 0.0], 0.0, 1.0);
        c.push_slab(vec![0.0, 1.0], 0.0, 1.0);
        c
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn segment_projection_clips() {
        let p = project_base(&segment(), &[2.0, 0.0]).unwrap();
        assert!(close(&p, &[1.0, 0.0], 1e-9), "{p:?}");
    }

    #[test]
    fn members_are_fixed() {
        let c = segment();
        assert_eq!(project_base(&c, &[0.5, 0.5]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(project_base(&c, &[0.2, 0.8]).unwrap(), vec![0.2, 0.8]);
    }

    #[test]
    fn bounded_away_examples() {
        let c = segment();
        let p = project_bounded_away(&c, &[2.0, 0.0], 0.2).unwrap();
        assert!(close(&p, &[0.9, 0.1], 1e-9), "{p:?}");
        let direct = project_bounded_away_direct(&c, &[2.0, 0.0], 0.2).unwrap();
        assert!(close(&p, &direct, 1e-9));
        let z = [0.3, -4.0];
        assert_eq!(
            project_bounded_away(&c, &z, 0.0).unwrap(),
            project_base(&c, &z).unwrap()
        );
        for mu in [0.0, 0.1, 0.5] {
            let p = project_bounded_away(&c, &[0.5, 0.5], mu).unwrap();
            assert!(close(&p, &[0.5, 0.5], 1e-15));
        }
    }

    #[test]
    fn rejects_bad_mu() {
        assert!(project_bounded_away(&segment(), &[0.5, 0.5], 0.6).is_err());
        assert!(project_bounded_away(&segment(), &[0.5, 0.5], -0.1).is_err());
    }

    #[test]
    fn slab_merge() {
        let mut c = Constraints::new(vec![-1.0; 2], vec![1.0; 2]);
        c.push_slab(vec![1.0, 1.0], 1.0, 1.0);
        c.push_slab(vec![1.0, 1.0], 0.0, 1.0);
        c.push_slab(vec![0.0, 0.0], 0.0, 1.0);
        assert_eq!(c.slabs().len(), 1);
        assert_eq!(c.slabs()[0].bounds(), (1.0, 1.0));
    }

    #[test]
    fn bounded_away_constraints_shrink() {
        let c = segment().bounded_away(0.2);
        assert!(c.violation(&[0.9, 0.1]) < 1e-15);
        assert!(c.violation(&[0.95, 0.05]) > 0.04);
    }

    #[test]
    fn triangle_corner() {
        // simplex in R^3 (box [-1, 1], sum = 1, x_i >= 0 via slabs)
        let mut c = Constraints::new(vec![-1.0; 3], vec![1.0; 3]);
        c.push_slab(vec![1.0; 3], 1.0, 1.0);
        for i in 0..3 {
            let mut a = vec![0.0; 3];
            a[i] = 1.0;
            c.push_slab(a, 0.0, 1.0);
        }
        // projection of (1, 1, -1) onto the simplex is (0.5, 0.5, 0)
        let p = project_base(&c, &[1.0, 1.0, -1.0]).unwrap();
        assert!(close(&p, &[0.5, 0.5, 0.0], 1e-8), "{p:?}");
        assert!(c.violation(&p) <= 1e-12);
    }
}

//! The bandit cost estimator, computed in spanner coordinates.
//!
//! With `N = E[a_p a_p^T]` over the exploration distribution (`a_p` the
//! spanner coordinates of strategy `p`), the estimate of `B^T c` from a
//! single observed loss `l = <c, p>` is `g = l N^{-1} a_p`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::Strategy;
use crate::polytope::MixedSupport;
use crate::spanner::Spanner;

/// Relative singular-value cutoff of the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Second-moment matrix of an exploration distribution in spanner
/// coordinates, with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct SecondMoment {
    matrix: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    mu: f64,
}

impl SecondMoment {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .min()
    }

    /// `N^{-1} v`.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        self.factor
            .solve(&DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    }
}

pub fn second_moment(support: &MixedSupport) -> Result<SecondMoment> {
    let s = support
        .atoms()
        .first()
        .ok_or_else(|| Error::InvalidInput("empty support".into()))?
        .coords
        .len();
    let mut n = DMatrix::zeros(s, s);
    for atom in support.atoms() {
        let a = DVector::from_column_slice(&atom.coords);
        n.ger(atom.prob, &a, &a, 1.0);
    }
    // symmetrise against rounding in the rank-one updates
    let n = (&n + n.transpose()) * 0.5;
    let factor = Cholesky::new(n.clone()).ok_or(Error::NotPositiveDefinite)?;
    Ok(SecondMoment {
        matrix: n,
        factor,
        mu: support.mu(),
    })
}

/// `g = loss * N^{-1} coords`, the estimate of `B^T c`.
pub fn estimate_cost(loss: f64, coords: &[f64], moment: &SecondMoment) -> Vec<f64> {
    if loss == 0.0 {
        return vec![0.0; coords.len()];
    }
    moment.solve(coords).into_iter().map(|v| loss * v).collect()
}

/// The resource-space estimate `loss * M^+ p` with `M = B N B^T`. The
/// pseudo-inverse drops singular values below `PINV_CUTOFF * sigma_max`.
pub fn full_space_estimate(
    loss: f64,
    path: &Strategy,
    moment: &SecondMoment,
    spanner: &Spanner,
) -> Result<Vec<f64>> {
    let b = spanner.matrix();
    let m = &b * moment.matrix() * b.transpose();
    let svd = m.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let cutoff = PINV_CUTOFF * sigma_max;
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Invariant("singular value decomposition failed".into())),
    };
    let p = DVector::from_vec(path.incidence());
    let mut coeffs = u.transpose() * p;
    for (c, &sv) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
        *c = if sv > cutoff { *c / sv } else { 0.0 };
    }
    let c_hat = vt.transpose() * coeffs * loss;
    Ok(c_hat.iter().copied().collect())
}

/// Almost-sure bound on `|g|_2`: `theta m^{5/2} c_max / mu`.
pub fn norm_bound(theta: f64, m: usize, c_max: f64, mu: f64) -> f64 {
    theta * (m as f64).powf(2.5) * c_max / mu
}

/// Bound on `E|g|_2^2`: `m^4 c_max^2 / mu`.
pub fn second_moment_bound(m: usize, c_max: f64, mu: f64) -> f64 {
    (m as f64).powi(4) * c_max * c_max / mu
}

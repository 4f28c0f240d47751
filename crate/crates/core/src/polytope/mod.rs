//! Basis-polytope geometry: projections, Caratheodory decompositions and the
//! exploration distribution built on top of them.

pub mod caratheodory;
pub mod projection;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Strategy;
use crate::space::AgentSpace;

pub use caratheodory::{caratheodory_dag, caratheodory_explicit, recombination_error};
pub use projection::{
    barycenter, project_base, project_bounded_away, project_bounded_away_direct, Constraints,
};

/// Tolerance for membership of a basis point in `D^mu`.
pub const MEMBERSHIP_TOL: f64 = 1e-7;

/// Where an atom of a [`MixedSupport`] comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Caratheodory,
    Spanner(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Atom {
    pub strategy: Strategy,
    /// Spanner coordinates of the strategy.
    #[serde(skip)]
    pub coords: Vec<f64>,
    pub prob: f64,
    pub origin: Origin,
}

/// A finitely supported distribution over pure strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedSupport {
    atoms: Vec<Atom>,
    mu: f64,
}

impl MixedSupport {
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Expected incidence vector.
    pub fn marginal(&self) -> Vec<f64> {
        let dim = self.atoms.first().map_or(0, |a| a.strategy.dim());
        let mut x = vec![0.0; dim];
        for a in &self.atoms {
            a.strategy.resources().iter().for_each(|&e| x[e] += a.prob);
        }
        x
    }

    /// Index of the atom selected by a uniform draw `u` in `[0, 1)`.
    pub fn pick(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, a) in self.atoms.iter().enumerate() {
            acc += a.prob;
            if u < acc {
                return i;
            }
        }
        // u landed in the rounding gap above the last cumulative sum
        self.atoms
            .iter()
            .rposition(|a| a.prob > 0.0)
            .unwrap_or(self.atoms.len() - 1)
    }
}

/// Distance of `alpha` from `D^mu`, measured as constraint violation.
pub fn bounded_away_violation(space: &AgentSpace, alpha: &[f64], mu: f64) -> f64 {
    space.constraints().bounded_away(mu).violation(alpha)
}

/// The exploration distribution of a point `alpha` of `D^mu`: a
/// Caratheodory decomposition of `B z` with `z = (alpha - (mu/s) 1)/(1 - mu)`
/// carrying mass `1 - mu`, plus every spanner strategy with mass `mu / s`.
/// Its marginal is `B alpha`.
pub fn caratheodory_distribution(space: &AgentSpace, alpha: &[f64], mu: f64) -> Result<MixedSupport> {
    projection::check_mu(mu)?;
    let s = space.size();
    if alpha.len() != s {
        return Err(Error::InvalidInput(format!(
            "basis point has {} coordinates, spanner has {s}",
            alpha.len()
        )));
    }
    let violation = bounded_away_violation(space, alpha, mu);
    if violation > MEMBERSHIP_TOL {
        return Err(Error::NotInPolytope(format!(
            "constraint violation {violation:e} at exploration level {mu}"
        )));
    }
    let shift = mu / s as f64;
    let z: Vec<f64> = alpha.iter().map(|&a| (a - shift) / (1.0 - mu)).collect();
    let x = space.spanner().combine(&z);
    let mut atoms = Vec::with_capacity(space.dim() + 1 + s);
    if mu < 1.0 {
        for (strategy, w) in space.caratheodory(&x)? {
            let coords = space.spanner().decompose(&strategy.incidence())?;
            atoms.push(Atom {
                strategy,
                coords,
                prob: (1.0 - mu) * w,
                origin: Origin::Caratheodory,
            });
        }
    }
    if mu > 0.0 {
        for h in 0..s {
            let mut coords = vec![0.0; s];
            coords[h] = 1.0;
            atoms.push(Atom {
                strategy: space.anchor(h).clone(),
                coords,
                prob: shift,
                origin: Origin::Spanner(h),
            });
        }
    }
    let total: f64 = atoms.iter().map(|a| a.prob).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Invariant(format!("distribution mass {total}")));
    }
    Ok(MixedSupport { atoms, mu })
}

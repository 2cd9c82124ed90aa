//! The electrical quantities attached to a positive point and the Physarum
//! vector field `ẋ = q − x`.
//!
//! At a point `x > 0` the conductances are `x_j / c_j`, the Laplacian is
//! `L = A C Aᵀ`, the potentials solve `L p = b` and the flow is
//! `q = C Aᵀ p`. The energy `E = qᵀ R q = bᵀ p = pᵀ L p`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::instance::LpInstance;
use crate::linalg::{self, SpdFactorization};

/// Feasibility tolerance for candidate flows in the Thomson and Tellegen checks.
pub const CANDIDATE_TOLERANCE: f64 = 1e-8;

/// A point on the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysarumState {
    pub x: DVector<f64>,
    pub t: f64,
}

impl PhysarumState {
    /// Fails unless every coordinate is strictly positive and finite.
    pub fn new(x: DVector<f64>, t: f64) -> Result<Self> {
        check_positive(&x)?;
        Ok(PhysarumState { x, t })
    }

    pub fn at_zero(x: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(x), 0.0)
    }
}

pub(crate) fn check_positive(x: &DVector<f64>) -> Result<()> {
    match x.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        Some((index, &value)) => Err(Error::NonPositiveState { index, value }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone)]
pub struct DerivedQuantities {
    /// `x_j / c_j`, the diagonal of `C`.
    pub conductances: DVector<f64>,
    /// `c_j / x_j`, the diagonal of `R`.
    pub resistances: DVector<f64>,
    pub laplacian: DMatrix<f64>,
    pub laplacian_factorization: SpdFactorization,
    pub potentials: DVector<f64>,
    pub flow: DVector<f64>,
    /// `bᵀ p`.
    pub energy: f64,
}

impl DerivedQuantities {
    /// `qᵀ R q`.
    pub fn flow_energy(&self) -> f64 {
        self.flow.iter().zip(self.resistances.iter()).map(|(q, r)| r * q * q).sum()
    }

    /// `pᵀ L p`.
    pub fn potential_energy(&self) -> f64 {
        self.potentials.dot(&(&self.laplacian * &self.potentials))
    }

    /// `‖R q − Aᵀ p‖∞`, which vanishes up to rounding.
    pub fn duality_residual(&self, instance: &LpInstance) -> f64 {
        let rq = self.resistances.component_mul(&self.flow);
        let atp = instance.constraint_matrix.tr_mul(&self.potentials);
        linalg::max_abs(&(rq - atp))
    }
}

/// Evaluates conductances, Laplacian, potentials, flow and energy at `x`.
pub fn derive(instance: &LpInstance, x: &DVector<f64>) -> Result<DerivedQuantities> {
    let n = instance.num_variables();
    if x.len() != n {
        return Err(Error::DimensionMismatch { context: "state length", expected: n, found: x.len() });
    }
    check_positive(x)?;
    let conductances = x.component_div(&instance.costs);
    let resistances = instance.costs.component_div(x);
    let laplacian = linalg::weighted_gram(&instance.constraint_matrix, &conductances);
    let factorization = linalg::spd_factorize(&laplacian).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot } => Error::SingularLaplacian { pivot },
        other => other,
    })?;
    let potentials = linalg::spd_solve(&factorization, &instance.rhs)?;
    let flow = conductances.component_mul(&instance.constraint_matrix.tr_mul(&potentials));
    let energy = instance.rhs.dot(&potentials);
    Ok(DerivedQuantities {
        conductances,
        resistances,
        laplacian,
        laplacian_factorization: factorization,
        potentials,
        flow,
        energy,
    })
}

/// The Physarum vector field `q − x`.
pub fn rhs(instance: &LpInstance, x: &DVector<f64>) -> Result<DVector<f64>> {
    let d = derive(instance, x)?;
    Ok(d.flow - x)
}

/// The energy `bᵀ L⁻¹ b` at `x`.
pub fn energy(instance: &LpInstance, x: &DVector<f64>) -> Result<f64> {
    Ok(derive(instance, x)?.energy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThomsonComparison {
    /// `fᵀ R f` for the candidate.
    pub candidate_energy: f64,
    /// `E`, the energy of the electrical flow.
    pub electrical_energy: f64,
    /// `fᵀ R f − E`, nonnegative up to rounding.
    pub gap: f64,
}

fn check_candidate(instance: &LpInstance, f: &DVector<f64>) -> Result<()> {
    let n = instance.num_variables();
    if f.len() != n {
        return Err(Error::DimensionMismatch { context: "candidate flow length", expected: n, found: f.len() });
    }
    let residual = linalg::max_abs(&(&instance.constraint_matrix * f - &instance.rhs));
    let scale = linalg::max_abs(&instance.rhs).max(1.0);
    if residual > CANDIDATE_TOLERANCE * scale {
        return Err(Error::InfeasibleCandidate { residual });
    }
    Ok(())
}

/// Compares the energy of a feasible candidate flow with that of `q`.
pub fn verify_thomson(instance: &LpInstance, x: &DVector<f64>, candidate: &DVector<f64>) -> Result<ThomsonComparison> {
    check_candidate(instance, candidate)?;
    let d = derive(instance, x)?;
    let candidate_energy: f64 = candidate.iter().zip(d.resistances.iter()).map(|(f, r)| r * f * f).sum();
    Ok(ThomsonComparison { candidate_energy, electrical_energy: d.energy, gap: candidate_energy - d.energy })
}

/// `fᵀ Aᵀ p − E` for a feasible `f`; zero up to rounding.
pub fn tellegen_check(instance: &LpInstance, x: &DVector<f64>, f: &DVector<f64>) -> Result<f64> {
    check_candidate(instance, f)?;
    let d = derive(instance, x)?;
    let atp = instance.constraint_matrix.tr_mul(&d.potentials);
    Ok(f.dot(&atp) - d.energy)
}

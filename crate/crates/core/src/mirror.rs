//! Mirror-descent view of the dynamics on the unit simplex.
//!
//! With the negative entropy `ψ(x) = Σ x_j ln x_j` as mirror map, the dual
//! point is `y_j = 1 + ln x_j` and `∇ψ*(y) = exp(y − 1)`. On `1ᵀx = 1` the
//! dual velocity `ẏ = −∇F(x)`, `F(x) = 1ᵀx + ln E(x)`, reproduces the
//! Physarum trajectory exactly, feasible start or not.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::instance::LpInstance;
use crate::integrator::{self, IntegrationConfig, OdeSystem, PhysarumSystem};
use crate::linalg::max_abs;
use crate::oracle;

#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub y: DVector<f64>,
    pub t: f64,
}

impl DualState {
    pub fn primal(&self) -> DVector<f64> {
        to_primal(&self.y)
    }
}

/// `y_j = 1 + ln x_j`.
pub fn to_dual(x: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::NonPositivePrimal { index, value });
    }
    Ok(x.map(|v| 1.0 + v.ln()))
}

/// `x_j = exp(y_j − 1)`, which is also `∇ψ*(y)`.
pub fn to_primal(y: &DVector<f64>) -> DVector<f64> {
    y.map(|v| (v - 1.0).exp())
}

/// `ψ*(y) = Σ exp(y_j − 1)`.
pub fn legendre_dual_value(y: &DVector<f64>) -> f64 {
    y.iter().map(|v| (v - 1.0).exp()).sum()
}

pub fn legendre_dual_gradient(y: &DVector<f64>) -> DVector<f64> {
    to_primal(y)
}

/// `ψ(x) = Σ x_j ln x_j` with `0 ln 0 = 0`.
pub fn negative_entropy(x: &DVector<f64>) -> f64 {
    x.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum()
}

/// Bregman divergence of the negative entropy,
/// `Σ x'_j ln(x'_j/x_j) + Σ x_j − Σ x'_j`.
pub fn bregman_negentropy(x_prime: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
    if x_prime.len() != x.len() {
        return Err(Error::DimensionMismatch { context: "bregman arguments", expected: x.len(), found: x_prime.len() });
    }
    let mut total = x.sum() - x_prime.sum();
    for (index, (&a, &b)) in x_prime.iter().zip(x.iter()).enumerate() {
        if a < 0.0 {
            return Err(Error::NonPositivePrimal { index, value: a });
        }
        if a == 0.0 {
            continue;
        }
        if !(b > 0.0) {
            return Err(Error::AbsoluteContinuityViolation { index });
        }
        total += a * (a / b).ln();
    }
    Ok(total.max(0.0))
}

fn require_simplex(instance: &LpInstance) -> Result<()> {
    if instance.is_unit_simplex() {
        Ok(())
    } else {
        Err(Error::NotSimplexInstance)
    }
}

/// `E(x) = (Σ x_k / c_k)⁻¹` on the simplex.
pub fn simplex_energy(instance: &LpInstance, x: &DVector<f64>) -> Result<f64> {
    require_simplex(instance)?;
    if x.len() != instance.num_variables() {
        return Err(Error::DimensionMismatch {
            context: "point length",
            expected: instance.num_variables(),
            found: x.len(),
        });
    }
    Ok(1.0 / x.component_div(&instance.costs).sum())
}

/// `F(x) = 1ᵀx + ln E(x)`.
pub fn objective(instance: &LpInstance, x: &DVector<f64>) -> Result<f64> {
    Ok(x.sum() + simplex_energy(instance, x)?.ln())
}

/// `(∇F)_j = 1 − E(x)/c_j`.
pub fn grad_f(instance: &LpInstance, x: &DVector<f64>) -> Result<DVector<f64>> {
    let e = simplex_energy(instance, x)?;
    Ok(instance.costs.map(|c| 1.0 - e / c))
}

/// Dual velocity `ẏ = −∇F(∇ψ*(y))`.
pub fn md_rhs(instance: &LpInstance, y: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(-grad_f(instance, &to_primal(y))?)
}

/// The mirror-descent flow in dual coordinates.
pub struct DualSystem<'a> {
    pub instance: &'a LpInstance,
}

impl OdeSystem for DualSystem<'_> {
    fn rhs(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        md_rhs(self.instance, y)
    }

    fn inadmissible(&self, y: &DVector<f64>) -> Option<usize> {
        y.iter().position(|v| !v.is_finite())
    }

    // absolute error in y is relative error in x
    fn error_norm(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        max_abs(&(a - b))
    }

    fn stationarity(&self, y: &DVector<f64>, dy: &DVector<f64>) -> f64 {
        let x = to_primal(y);
        max_abs(&x.component_mul(dy)) / max_abs(&x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryComparison {
    /// `max_t ‖x_physarum(t) − x_md(t)‖∞` over the common sample grid.
    pub max_deviation: f64,
    pub time_of_max: f64,
    pub samples: usize,
    /// `(t, V)` with `V = D_ψ(x*, x_md(t))`; traced, not asserted.
    pub lyapunov: Vec<(f64, f64)>,
}

/// Integrates the Physarum flow in primal space and the mirror-descent flow
/// in dual space with the same settings up to `horizon`, and compares them
/// on the shared sample grid.
pub fn compare_trajectories(
    instance: &LpInstance,
    x0: &DVector<f64>,
    horizon: f64,
    step_config: &IntegrationConfig,
) -> Result<TrajectoryComparison> {
    require_simplex(instance)?;
    let y0 = to_dual(x0)?;
    let config = IntegrationConfig { max_time: horizon, stop_when_stationary: false, ..step_config.clone() };
    let x_star = oracle::solve_exact(instance)?.x_star;

    let mut primal = Vec::new();
    integrator::integrate_system(&PhysarumSystem::new(instance), x0, &config, |t, x| {
        primal.push((t, x.clone()));
        Ok(())
    })?;
    let mut dual = Vec::new();
    integrator::integrate_system(&DualSystem { instance }, &y0, &config, |t, y| {
        dual.push((t, to_primal(y)));
        Ok(())
    })?;
    if primal.len() != dual.len() {
        return Err(Error::DimensionMismatch { context: "sample grids", expected: primal.len(), found: dual.len() });
    }

    let mut max_deviation = 0.0f64;
    let mut time_of_max = 0.0;
    let mut lyapunov = Vec::with_capacity(dual.len());
    for ((tp, xp), (td, xd)) in primal.iter().zip(&dual) {
        debug_assert_eq!(tp, td);
        let dev = max_abs(&(xp - xd));
        if dev > max_deviation {
            max_deviation = dev;
            time_of_max = *tp;
        }
        lyapunov.push((*td, bregman_negentropy(&x_star, xd)?));
    }
    Ok(TrajectoryComparison { max_deviation, time_of_max, samples: primal.len(), lyapunov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn dual_map_examples() {
        assert_eq!(to_dual(&v(&[1.0, 1.0])).unwrap().as_slice(), &[1.0, 1.0]);
        let e = std::f64::consts::E;
        let y = to_dual(&v(&[e, e * e])).unwrap();
        assert_relative_eq!(y[0], 2.0, epsilon = 1e-15);
        assert_relative_eq!(y[1], 3.0, epsilon = 1e-15);
        assert_eq!(to_dual(&v(&[1.0, 0.0])).unwrap_err(), Error::NonPositivePrimal { index: 1, value: 0.0 });
    }

    #[test]
    fn legendre_value_examples() {
        assert_relative_eq!(legendre_dual_value(&v(&[1.0, 1.0])), 2.0);
        assert_relative_eq!(legendre_dual_value(&v(&[1.0 + 2f64.ln()])), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn bregman_examples() {
        let x = v(&[0.3, 0.7]);
        assert_eq!(bregman_negentropy(&x, &x).unwrap(), 0.0);
        assert_relative_eq!(bregman_negentropy(&v(&[1.0, 0.0]), &v(&[0.5, 0.5])).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(
            bregman_negentropy(&v(&[0.5, 0.5]), &v(&[1.0, 0.0])).unwrap_err(),
            Error::AbsoluteContinuityViolation { index: 1 }
        );
    }

    #[test]
    fn bregman_on_distributions_is_kl() {
        let p = v(&[0.2, 0.5, 0.3]);
        let q = v(&[0.4, 0.4, 0.2]);
        let k = crate::diagnostics::kl(&p, &q).unwrap();
        assert_relative_eq!(bregman_negentropy(&p, &q).unwrap(), k, epsilon = 1e-15);
    }

    #[test]
    fn grad_examples() {
        let lp = LpInstance::simplex(&[1.0, 2.0]);
        let g = grad_f(&lp, &v(&[0.5, 0.5])).unwrap();
        assert_relative_eq!(g[0], -1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(g[1], 1.0 / 3.0, epsilon = 1e-15);
        let ydot = md_rhs(&lp, &to_dual(&v(&[0.5, 0.5])).unwrap()).unwrap();
        assert_relative_eq!(ydot[0], 1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(ydot[1], -1.0 / 3.0, epsilon = 1e-14);

        let uniform = LpInstance::simplex(&[1.0, 1.0]);
        for x in [[0.5, 0.5], [0.1, 0.9]] {
            assert!(grad_f(&uniform, &v(&x)).unwrap().amax() < 1e-15);
        }
    }

    #[test]
    fn non_simplex_rejected() {
        let lp = LpInstance::from_rows(&[vec![1.0, 0.0, 1.0], vec![-1.0, 1.0, 0.0]], &[1.0, 0.0], &[1.0; 3]).unwrap();
        assert_eq!(grad_f(&lp, &v(&[0.3, 0.3, 0.3])).unwrap_err(), Error::NotSimplexInstance);
        let scaled = LpInstance::from_rows(&[vec![1.0, 1.0]], &[2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(
            compare_trajectories(&scaled, &v(&[1.0, 1.0]), 1.0, &IntegrationConfig::default()).unwrap_err(),
            Error::NotSimplexInstance
        );
    }

    #[test]
    fn uniform_costs_do_not_move() {
        let lp = LpInstance::simplex(&[2.0, 2.0, 2.0]);
        let cmp = compare_trajectories(&lp, &v(&[0.2, 0.3, 0.5]), 5.0, &IntegrationConfig::default()).unwrap();
        assert!(cmp.max_deviation < 1e-14, "{}", cmp.max_deviation);
    }
}

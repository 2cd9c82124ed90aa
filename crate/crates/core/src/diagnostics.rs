//! Scalar functionals along a trajectory: cost, the cost-weighted
//! distribution `ξ`, relative entropy to `ξ*`, the potential
//! `Φ = ln(cost/opt) + KL(ξ*, ξ)` and the convergence-time bounds derived
//! from it.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::LpInstance;
use crate::integrator::TrajectoryTrace;
use crate::oracle::OracleSolution;

/// Residual `‖A x − b‖₂` above which a start is considered infeasible.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;
/// Normalization slack accepted by [`kl`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
/// Slack for the numerically differentiated rate checks.
pub const RATE_TOLERANCE: f64 = 1e-3;
/// Slack for the (reported, not asserted) monotonicity of `Φ`.
pub const POTENTIAL_MONOTONE_SLACK: f64 = 1e-6;

pub fn cost(instance: &LpInstance, x: &DVector<f64>) -> Result<f64> {
    if x.len() != instance.costs.len() {
        return Err(Error::DimensionMismatch {
            context: "cost vector vs point",
            expected: instance.costs.len(),
            found: x.len(),
        });
    }
    Ok(instance.costs.dot(x))
}

/// `ξ_j = c_j x_j / cᵀx`.
pub fn xi(instance: &LpInstance, x: &DVector<f64>) -> Result<DVector<f64>> {
    let total = cost(instance, x)?;
    if !(total > 0.0) {
        return Err(Error::ZeroCost);
    }
    Ok(instance.costs.component_mul(x) / total)
}

/// Relative entropy `Σ p*_j ln(p*_j / p_j)` with `0 ln 0 = 0`.
pub fn kl(p_star: &DVector<f64>, p: &DVector<f64>) -> Result<f64> {
    if p_star.len() != p.len() {
        return Err(Error::DimensionMismatch { context: "kl arguments", expected: p_star.len(), found: p.len() });
    }
    for v in [p_star, p] {
        let sum = v.sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE || v.iter().any(|x| *x < 0.0) {
            return Err(Error::NotNormalized { sum });
        }
    }
    let mut total = 0.0;
    for (index, (&a, &b)) in p_star.iter().zip(p.iter()).enumerate() {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Err(Error::AbsoluteContinuityViolation { index });
        }
        total += a * (a / b).ln();
    }
    // KL is nonnegative; rounding can leave a -1e-17 residue
    Ok(total.max(0.0))
}

/// `KL(ξ*, ξ(x))`.
pub fn kl_to_optimum(instance: &LpInstance, x: &DVector<f64>, oracle: &OracleSolution) -> Result<f64> {
    kl(&oracle.xi_star(instance)?, &xi(instance, x)?)
}

/// `Φ(x) = ln(cost(x)/opt) + KL(ξ*, ξ(x))`. Negative first terms (possible
/// for infeasible `x`) are returned as is.
pub fn potential(instance: &LpInstance, x: &DVector<f64>, oracle: &OracleSolution) -> Result<f64> {
    Ok((cost(instance, x)? / oracle.opt).ln() + kl_to_optimum(instance, x, oracle)?)
}

fn check_feasible_start(instance: &LpInstance, x0: &DVector<f64>, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!("eps must be positive, got {eps}")));
    }
    crate::dynamics::check_positive(x0)?;
    let residual = instance.infeasibility(x0);
    let scale = instance.rhs.norm().max(1.0);
    if residual > FEASIBILITY_TOLERANCE * scale {
        return Err(Error::InfeasibleStart { residual });
    }
    Ok(())
}

/// Time after which the cost is guaranteed within `(1+ε) opt`:
/// `(6/ε) Φ(x0)`.
pub fn bound_time_kl(instance: &LpInstance, x0: &DVector<f64>, oracle: &OracleSolution, eps: f64) -> Result<f64> {
    check_feasible_start(instance, x0, eps)?;
    Ok(6.0 / eps * potential(instance, x0, oracle)?)
}

/// The coarser bound `(6/ε)(2 ln(cost/opt) + ln μ)` with
/// `μ = max_j x*_j / x0_j`.
pub fn bound_time_mu(instance: &LpInstance, x0: &DVector<f64>, oracle: &OracleSolution, eps: f64) -> Result<f64> {
    check_feasible_start(instance, x0, eps)?;
    let mu = oracle.x_star.iter().zip(x0.iter()).map(|(s, x)| s / x).fold(f64::NEG_INFINITY, f64::max);
    let ratio = cost(instance, x0)? / oracle.opt;
    Ok(6.0 / eps * (2.0 * ratio.ln() + mu.ln()))
}

/// Every functional evaluated at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub cost: f64,
    pub energy: f64,
    pub infeasibility: f64,
    pub xi: Vec<f64>,
    pub kl: Option<f64>,
    pub potential: Option<f64>,
    pub energy_cost_ratio: f64,
}

pub fn diagnose(
    instance: &LpInstance,
    x: &DVector<f64>,
    t: f64,
    oracle: Option<&OracleSolution>,
) -> Result<DiagnosticRecord> {
    let energy = crate::dynamics::energy(instance, x)?;
    let c = cost(instance, x)?;
    let xi_vec = xi(instance, x)?;
    let (kl_value, potential_value) = match oracle {
        Some(o) => {
            let k = kl(&o.xi_star(instance)?, &xi_vec)?;
            (Some(k), Some((c / o.opt).ln() + k))
        }
        None => (None, None),
    };
    Ok(DiagnosticRecord {
        t,
        cost: c,
        energy,
        infeasibility: instance.infeasibility(x),
        xi: xi_vec.iter().copied().collect(),
        kl: kl_value,
        potential: potential_value,
        energy_cost_ratio: energy / c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateCheck {
    /// `d ln cost / dt ≤ √(E/cost) − 1`
    LogCost,
    /// `d KL / dt ≤ √(E/cost) − E/opt`
    Entropy,
    /// `dΦ/dt ≤ −ε/2` while `cost ≥ (1+ε)² opt`
    Improvement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateViolation {
    pub check: RateCheck,
    pub sample: usize,
    pub t: f64,
    pub derivative: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub violations: Vec<RateViolation>,
    pub samples_checked: usize,
    /// Samples where the improvement gate `cost ≥ (1+ε)² opt` held.
    pub improvement_samples_tested: usize,
    /// Sample indices where `Φ` increased by more than the monotone slack.
    /// Informational only.
    pub potential_increases: Vec<usize>,
    pub max_improvement_rate: Option<f64>,
}

impl RateReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn derivative(t: &[f64], f: &[f64], i: usize) -> f64 {
    let n = t.len();
    let (lo, hi) = if i == 0 {
        (0, 1)
    } else if i == n - 1 {
        (n - 2, n - 1)
    } else {
        (i - 1, i + 1)
    };
    (f[hi] - f[lo]) / (t[hi] - t[lo])
}

/// Differentiates a feasible-start trace numerically and checks the three
/// rate inequalities at every sample. `eps` gates the improvement check and
/// must lie in `(0, 1/2)`.
pub fn lemma_rate_checks(
    instance: &LpInstance,
    trace: &TrajectoryTrace,
    oracle: &OracleSolution,
    eps: f64,
) -> Result<RateReport> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidConfig(format!("improvement gate needs eps in (0, 1/2), got {eps}")));
    }
    let records = &trace.records;
    let mut report = RateReport::default();
    if records.len() < 2 {
        return Ok(report);
    }
    let xi_star = oracle.xi_star(instance)?;
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let log_cost: Vec<f64> = records.iter().map(|r| r.cost.ln()).collect();
    let kls: Vec<f64> = records.iter().map(|r| kl(&xi_star, &xi(instance, &r.x)?)).collect::<Result<_>>()?;
    let phi: Vec<f64> = log_cost.iter().zip(&kls).map(|(lc, k)| lc - oracle.opt.ln() + k).collect();
    let gate = (1.0 + eps).powi(2) * oracle.opt;

    for (i, r) in records.iter().enumerate() {
        let root = (r.energy / r.cost).sqrt();
        let mut check = |kind: RateCheck, derivative: f64, bound: f64| {
            if derivative > bound + RATE_TOLERANCE {
                report.violations.push(RateViolation { check: kind, sample: i, t: r.t, derivative, bound });
            }
        };
        check(RateCheck::LogCost, derivative(&t, &log_cost, i), root - 1.0);
        check(RateCheck::Entropy, derivative(&t, &kls, i), root - r.energy / oracle.opt);
        if r.cost >= gate {
            let d = derivative(&t, &phi, i);
            check(RateCheck::Improvement, d, -eps / 2.0);
            report.improvement_samples_tested += 1;
            report.max_improvement_rate = Some(report.max_improvement_rate.map_or(d, |m: f64| m.max(d)));
        }
        report.samples_checked += 1;
    }
    report.potential_increases = phi
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0] + POTENTIAL_MONOTONE_SLACK)
        .map(|(i, _)| i + 1)
        .collect();
    Ok(report)
}

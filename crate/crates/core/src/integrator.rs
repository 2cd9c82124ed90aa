//! Time stepping for `ẋ = q − x`.
//!
//! Explicit Euler and classical RK4, optionally with step-doubling error
//! control. Steps that would leave the positive orthant, or shrink any
//! coordinate below `positivity_floor_ratio` of its current value, are
//! halved and retried; values are never clamped. Steps are clipped so that
//! every multiple of `trace_interval` is hit exactly.

use std::cell::Cell;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics;
use crate::dynamics::{self, PhysarumState};
use crate::error::{Error, Result};
use crate::instance::LpInstance;
use crate::linalg::max_abs;
use crate::oracle::OracleSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExplicitEuler,
    Rk4,
}

impl Method {
    pub fn order(self) -> i32 {
        match self {
            Method::ExplicitEuler => 1,
            Method::Rk4 => 4,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" | "explicit-euler" => Ok(Method::ExplicitEuler),
            "rk4" => Ok(Method::Rk4),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub method: Method,
    pub initial_step: f64,
    pub max_time: f64,
    /// A step may not shrink any coordinate below this fraction of its value.
    pub positivity_floor_ratio: f64,
    /// Step-doubling error control.
    pub adaptive: bool,
    /// Relative local error tolerance for adaptive stepping.
    pub tolerance: f64,
    pub trace_interval: f64,
    /// Stop once `‖q − x‖∞ / ‖x‖∞` falls to this value.
    pub stationarity_tolerance: f64,
    pub stop_when_stationary: bool,
    pub max_halvings: u32,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            method: Method::Rk4,
            initial_step: 1e-2,
            max_time: 100.0,
            positivity_floor_ratio: 0.5,
            adaptive: true,
            tolerance: 1e-6,
            trace_interval: 0.1,
            stationarity_tolerance: 1e-9,
            stop_when_stationary: true,
            max_halvings: 40,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("initial_step", self.initial_step)?;
        positive("max_time", self.max_time)?;
        positive("tolerance", self.tolerance)?;
        positive("trace_interval", self.trace_interval)?;
        if !(self.positivity_floor_ratio > 0.0 && self.positivity_floor_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "positivity_floor_ratio must lie in (0, 1), got {}",
                self.positivity_floor_ratio
            )));
        }
        if !(self.stationarity_tolerance >= 0.0) {
            return Err(Error::InvalidConfig("stationarity_tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One sample of a Physarum trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub x: DVector<f64>,
    pub cost: f64,
    pub energy: f64,
    /// `‖A x − b‖₂`
    pub infeasibility: f64,
    pub kl_to_optimum: Option<f64>,
    pub potential: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub steps: usize,
    pub rejections: usize,
    /// Rejections caused by positivity or a failed evaluation.
    pub halvings: usize,
    /// Vector-field evaluations whose Laplacian needed a diagonal shift.
    pub regularizations: usize,
}

#[derive(Debug, Clone)]
pub struct TrajectoryTrace {
    pub records: Vec<TraceRecord>,
    pub stats: IntegrationStats,
    /// The stationarity criterion fired before `max_time`.
    pub converged: bool,
    pub final_state: PhysarumState,
}

impl TrajectoryTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("a trace always holds the initial sample")
    }

    /// First recorded time at which `cost ≤ target`.
    pub fn first_time_cost_below(&self, target: f64) -> Option<f64> {
        self.records.iter().find(|r| r.cost <= target).map(|r| r.t)
    }
}

/// An autonomous ODE `ż = f(z)` as seen by the stepper.
pub trait OdeSystem {
    fn rhs(&self, z: &DVector<f64>) -> Result<DVector<f64>>;

    /// Index of a coordinate that makes `z` inadmissible as a stage point.
    fn inadmissible(&self, _z: &DVector<f64>) -> Option<usize> {
        None
    }

    /// Whether the step `from → to` violates the positivity floor.
    fn below_floor(&self, _from: &DVector<f64>, _to: &DVector<f64>, _ratio: f64) -> bool {
        false
    }

    /// Scaled distance between two candidate endpoints of the same step.
    fn error_norm(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64;

    /// Scaled speed used by the stationarity stop.
    fn stationarity(&self, z: &DVector<f64>, dz: &DVector<f64>) -> f64;
}

/// The Physarum field on the positive orthant.
pub struct PhysarumSystem<'a> {
    pub instance: &'a LpInstance,
    regularizations: Cell<usize>,
}

impl<'a> PhysarumSystem<'a> {
    pub fn new(instance: &'a LpInstance) -> Self {
        PhysarumSystem { instance, regularizations: Cell::new(0) }
    }
}

impl OdeSystem for PhysarumSystem<'_> {
    fn rhs(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let d = dynamics::derive(self.instance, z)?;
        if d.laplacian_factorization.regularization_applied > 0.0 {
            self.regularizations.set(self.regularizations.get() + 1);
        }
        Ok(d.flow - z)
    }

    fn inadmissible(&self, z: &DVector<f64>) -> Option<usize> {
        z.iter().position(|v| !(v.is_finite() && *v > 0.0))
    }

    fn below_floor(&self, from: &DVector<f64>, to: &DVector<f64>, ratio: f64) -> bool {
        from.iter().zip(to.iter()).any(|(a, b)| *b < ratio * a)
    }

    fn error_norm(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
    }

    fn stationarity(&self, z: &DVector<f64>, dz: &DVector<f64>) -> f64 {
        max_abs(dz) / max_abs(z)
    }
}

enum StepFailure {
    Stage { index: usize, stage: usize },
    Evaluation(Error),
}

// Stage `k` is the point where the k-th evaluation happens; the endpoint is
// stage `stages + 1`.
fn raw_step<S: OdeSystem>(
    system: &S,
    z: &DVector<f64>,
    dz: &DVector<f64>,
    h: f64,
    method: Method,
) -> std::result::Result<DVector<f64>, StepFailure> {
    let check = |p: &DVector<f64>, stage: usize| match system.inadmissible(p) {
        Some(index) => Err(StepFailure::Stage { index, stage }),
        None => Ok(()),
    };
    let eval = |p: &DVector<f64>| system.rhs(p).map_err(StepFailure::Evaluation);
    match method {
        Method::ExplicitEuler => {
            let out = z + dz * h;
            check(&out, 2)?;
            Ok(out)
        }
        Method::Rk4 => {
            let k1 = dz;
            let p2 = z + k1 * (h / 2.0);
            check(&p2, 2)?;
            let k2 = eval(&p2)?;
            let p3 = z + &k2 * (h / 2.0);
            check(&p3, 3)?;
            let k3 = eval(&p3)?;
            let p4 = z + &k3 * h;
            check(&p4, 4)?;
            let k4 = eval(&p4)?;
            let out = z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            check(&out, 5)?;
            Ok(out)
        }
    }
}

/// One Euler or RK4 step of the Physarum field, without floor or error control.
pub fn step(instance: &LpInstance, state: &PhysarumState, h: f64, method: Method) -> Result<PhysarumState> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!("step size must be positive, got {h}")));
    }
    let system = PhysarumSystem::new(instance);
    let dz = system.rhs(&state.x)?;
    match raw_step(&system, &state.x, &dz, h, method) {
        Ok(x) => Ok(PhysarumState { x, t: state.t + h }),
        Err(StepFailure::Stage { index, stage }) => Err(Error::PositivityViolation { index, stage }),
        Err(StepFailure::Evaluation(e)) => Err(e),
    }
}

/// Result of driving an [`OdeSystem`] forward.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub z: DVector<f64>,
    pub t: f64,
    pub stats: IntegrationStats,
    pub converged: bool,
}

struct Accepted {
    z: DVector<f64>,
    dz: DVector<f64>,
    h: f64,
    error: f64,
}

/// Drives `system` from `z0` at `t = 0`, calling `observe` at `t = 0`, at
/// every multiple of `trace_interval` and at the final time.
pub fn integrate_system<S, F>(
    system: &S,
    z0: &DVector<f64>,
    config: &IntegrationConfig,
    mut observe: F,
) -> Result<RunOutcome>
where
    S: OdeSystem,
    F: FnMut(f64, &DVector<f64>) -> Result<()>,
{
    config.validate()?;
    if let Some(index) = system.inadmissible(z0) {
        return Err(Error::NonPositiveState { index, value: z0[index] });
    }
    let mut stats = IntegrationStats::default();
    let mut z = z0.clone();
    let mut t = 0.0f64;
    let mut dz = system.rhs(&z).map_err(|e| Error::AtTime { t, source: Box::new(e) })?;
    observe(t, &z)?;
    let mut last_observed = t;
    let mut sample_index = 1u64;
    let mut h = config.initial_step;
    let mut converged = false;
    let end_slack = 1e-12 * config.max_time.max(1.0);

    loop {
        if config.stop_when_stationary && system.stationarity(&z, &dz) <= config.stationarity_tolerance {
            converged = true;
            break;
        }
        if t >= config.max_time - end_slack {
            break;
        }
        let next_sample = (sample_index as f64 * config.trace_interval).min(config.max_time);
        let remaining = next_sample - t;
        let mut h_try = h.min(remaining);
        let mut attempts = 0u32;

        let accepted = loop {
            if attempts >= config.max_halvings {
                return Err(Error::StepCollapse { t, x: z.iter().copied().collect(), halvings: attempts });
            }
            attempts += 1;
            match attempt(system, &z, &dz, h_try, config) {
                Ok(a) => break a,
                Err(Rejection::Error(err)) => {
                    stats.rejections += 1;
                    let factor =
                        (0.9 * (config.tolerance / err).powf(1.0 / (config.method.order() + 1) as f64)).clamp(0.2, 0.5);
                    h_try *= factor;
                }
                Err(Rejection::Halve) => {
                    stats.rejections += 1;
                    stats.halvings += 1;
                    h_try /= 2.0;
                }
            }
        };
        stats.steps += 1;

        let landed = accepted.h >= remaining * (1.0 - 1e-12);
        t = if landed { next_sample } else { t + accepted.h };
        z = accepted.z;
        dz = accepted.dz;

        if config.adaptive {
            let grow = if accepted.error > 0.0 {
                (0.9 * (config.tolerance / accepted.error).powf(1.0 / (config.method.order() + 1) as f64))
                    .clamp(0.2, 5.0)
            } else {
                5.0
            };
            let proposal = accepted.h * grow;
            // a step clipped to hit a sample says little about the natural size
            let clipped = h > remaining && attempts == 1;
            h = if clipped { proposal.max(h) } else { proposal };
        } else {
            h = config.initial_step;
        }

        if landed {
            observe(t, &z)?;
            last_observed = t;
            if next_sample < config.max_time {
                sample_index += 1;
            }
        }
    }
    if t > last_observed {
        observe(t, &z)?;
    }
    Ok(RunOutcome { z, t, stats, converged })
}

enum Rejection {
    Error(f64),
    Halve,
}

fn attempt<S: OdeSystem>(
    system: &S,
    z: &DVector<f64>,
    dz: &DVector<f64>,
    h: f64,
    config: &IntegrationConfig,
) -> std::result::Result<Accepted, Rejection> {
    let step = |from: &DVector<f64>, d: &DVector<f64>, h: f64| {
        raw_step(system, from, d, h, config.method).map_err(|_| Rejection::Halve)
    };
    let (fine, error) = if config.adaptive {
        let coarse = step(z, dz, h)?;
        let mid = step(z, dz, h / 2.0)?;
        let dmid = system.rhs(&mid).map_err(|_| Rejection::Halve)?;
        let fine = step(&mid, &dmid, h / 2.0)?;
        let error = system.error_norm(&coarse, &fine) / ((1u32 << config.method.order()) - 1) as f64;
        if error > config.tolerance {
            return Err(Rejection::Error(error));
        }
        (fine, error)
    } else {
        (step(z, dz, h)?, 0.0)
    };
    if system.below_floor(z, &fine, config.positivity_floor_ratio) {
        return Err(Rejection::Halve);
    }
    let dfine = system.rhs(&fine).map_err(|_| Rejection::Halve)?;
    Ok(Accepted { z: fine, dz: dfine, h, error })
}

/// Integrates the Physarum dynamics from `initial`, recording cost, energy
/// and infeasibility (plus KL and potential when an oracle is supplied).
pub fn integrate(
    instance: &LpInstance,
    initial: &PhysarumState,
    config: &IntegrationConfig,
    oracle: Option<&OracleSolution>,
) -> Result<TrajectoryTrace> {
    let system = PhysarumSystem::new(instance);
    let xi_star = oracle.map(|o| o.xi_star(instance)).transpose()?;
    let t0 = initial.t;
    let mut records = Vec::new();
    let outcome = integrate_system(&system, &initial.x, config, |t, x| {
        let d = dynamics::derive(instance, x).map_err(|e| Error::AtTime { t: t0 + t, source: Box::new(e) })?;
        let cost = diagnostics::cost(instance, x)?;
        let (kl, potential) = match (oracle, &xi_star) {
            (Some(o), Some(xs)) => {
                let k = diagnostics::kl(xs, &diagnostics::xi(instance, x)?)?;
                (Some(k), Some((cost / o.opt).ln() + k))
            }
            _ => (None, None),
        };
        records.push(TraceRecord {
            t: t0 + t,
            x: x.clone(),
            cost,
            energy: d.energy,
            infeasibility: instance.infeasibility(x),
            kl_to_optimum: kl,
            potential,
        });
        Ok(())
    })?;
    let mut stats = outcome.stats;
    stats.regularizations = system.regularizations.get();
    Ok(TrajectoryTrace {
        records,
        stats,
        converged: outcome.converged,
        final_state: PhysarumState { x: outcome.z, t: t0 + outcome.t },
    })
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DVector;
use physarum::diagnostics::{bound_time_kl, bound_time_mu, cost};
use physarum::generate::{random_lp, random_network, random_simplex, random_simplex_point, seeded_rng};
use physarum::instance::{load_any, save, validate};
use physarum::mirror::compare_trajectories;
use physarum::{integrate, solve_exact, Error, IntegrationConfig, LpInstance, OracleSolution, PhysarumState};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{comma_list, oracle_json, write_json, write_trace, RunSummary};
use crate::{Kind, RunArgs, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_STEP_COLLAPSE};

/// Trajectory deviation above which `md-compare` fails.
pub const MD_DEVIATION_LIMIT: f64 = 1e-5;
/// Relative slack on `cost ≤ (1+eps) opt` in `verify-bounds`.
pub const BOUND_SLACK: f64 = 1e-6;

/// `Kind: message` for library errors, so scripts can match on the kind.
fn describe(err: &anyhow::Error) -> String {
    match err.downcast_ref::<Error>().map(Error::root) {
        Some(root) => {
            let debug = format!("{root:?}");
            let kind = debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string();
            format!("{kind}: {err:#}")
        }
        None => format!("{err:#}"),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>().map(Error::root) {
        Some(Error::StepCollapse { .. }) => EXIT_STEP_COLLAPSE,
        _ => EXIT_INVALID,
    }
}

/// Runs `job` on every instance with up to `jobs` threads, prints the
/// outputs in input order and returns the most severe exit code.
fn fan_out<F>(instances: &[PathBuf], jobs: usize, job: F) -> u8
where
    F: Fn(&Path) -> Result<(String, u8)> + Sync,
{
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let results: Vec<_> = pool.install(|| instances.par_iter().map(|p| job(p)).collect());
    let mut code = 0;
    for (path, result) in instances.iter().zip(results) {
        match result {
            Ok((text, c)) => {
                println!("{text}");
                code = code.max(c);
            }
            Err(e) => {
                eprintln!("error: {}: {}", path.display(), describe(&e));
                code = code.max(exit_code(&e));
            }
        }
    }
    code
}

fn load_instance(path: &Path) -> Result<LpInstance> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let lp = load_any(&bytes)?;
    Ok(validate(lp)?.into_inner())
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "instance".into())
}

fn display_name(lp: &LpInstance, path: &Path) -> String {
    lp.name.clone().unwrap_or_else(|| file_stem(path))
}

/// `uniform` is `α·1` with `α` the least-squares fit of `A (α·1) = b`,
/// falling back to `α = 1` when that fit is not positive.
pub fn parse_x0(spec: &str, lp: &LpInstance) -> Result<DVector<f64>> {
    let n = lp.num_variables();
    if spec.trim() == "uniform" {
        let ones = DVector::from_element(n, 1.0);
        let s = &lp.constraint_matrix * &ones;
        let alpha = s.dot(&lp.rhs) / s.dot(&s);
        let alpha = if alpha.is_finite() && alpha > 0.0 { alpha } else { 1.0 };
        return Ok(ones * alpha);
    }
    let values = spec
        .split(',')
        .enumerate()
        .map(|(i, s)| {
            s.trim().parse::<f64>().map_err(|e| Error::Parse { location: format!("x0[{i}]"), message: e.to_string() })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != n {
        return Err(Error::DimensionMismatch { context: "x0 length", expected: n, found: values.len() }.into());
    }
    Ok(DVector::from_vec(values))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("eps must be positive, got {eps}")).into())
    }
}

impl RunArgs {
    fn config(&self, max_time: f64) -> IntegrationConfig {
        IntegrationConfig {
            method: self.method,
            initial_step: self.step,
            max_time,
            tolerance: self.tolerance,
            trace_interval: self.trace_interval,
            ..Default::default()
        }
    }
}

/// The oracle, or `None` when the instance is too large to enumerate.
fn optional_oracle(lp: &LpInstance) -> Result<Option<OracleSolution>> {
    match solve_exact(lp) {
        Ok(o) => Ok(Some(o)),
        Err(Error::TooLarge { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn solve(run: &RunArgs, eps: f64, max_time: f64, out_dir: &Path) -> u8 {
    fan_out(&run.instance, run.jobs, |path| {
        check_eps(eps)?;
        let lp = load_instance(path)?;
        let x0 = parse_x0(&run.x0, &lp)?;
        let state = PhysarumState::new(x0.clone(), 0.0)?;
        let oracle = optional_oracle(&lp)?;
        let trace = integrate(&lp, &state, &run.config(max_time), oracle.as_ref())?;

        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        let stem = file_stem(path);
        write_trace(&out_dir.join(format!("{stem}.trace.csv")), &trace)?;

        let last = trace.last();
        let opt = oracle.as_ref().map(|o| o.opt);
        let summary = RunSummary {
            instance_name: display_name(&lp, path),
            final_t: last.t,
            final_cost: last.cost,
            oracle_opt: opt,
            relative_gap: opt.map(|o| last.cost / o - 1.0),
            eps,
            bound_time_kl: oracle.as_ref().and_then(|o| bound_time_kl(&lp, &x0, o, eps).ok()),
            bound_time_mu: oracle.as_ref().and_then(|o| bound_time_mu(&lp, &x0, o, eps).ok()),
            achieved_time: opt.and_then(|o| trace.first_time_cost_below((1.0 + eps) * o)),
            steps: trace.stats.steps,
            rejections: trace.stats.rejections,
            regularizations: trace.stats.regularizations,
            converged: trace.converged,
        };
        write_json(&out_dir.join(format!("{stem}.summary.json")), &summary)?;
        Ok((serde_json::to_string(&summary)?, 0))
    })
}

#[derive(Debug, Serialize)]
struct BoundCheck {
    eps: f64,
    bound_time_kl: f64,
    bound_time_mu: f64,
    achieved_time: Option<f64>,
    /// `achieved_time / bound_time_kl`.
    achieved_ratio: Option<f64>,
    final_cost: f64,
    target: f64,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct BoundReport {
    instance_name: String,
    opt: f64,
    checks: Vec<BoundCheck>,
    passed: bool,
}

pub fn verify_bounds(run: &RunArgs, eps_list: &[f64]) -> u8 {
    fan_out(&run.instance, run.jobs, |path| {
        for &eps in eps_list {
            check_eps(eps)?;
        }
        let lp = load_instance(path)?;
        let x0 = parse_x0(&run.x0, &lp)?;
        let state = PhysarumState::new(x0.clone(), 0.0)?;
        let oracle = solve_exact(&lp)?;
        let mut checks = Vec::with_capacity(eps_list.len());
        for &eps in eps_list {
            let bound = bound_time_kl(&lp, &x0, &oracle, eps)?;
            let target = (1.0 + eps) * oracle.opt;
            // a zero bound means x0 is already optimal
            let (final_cost, achieved_time) = if bound > 0.0 {
                let trace = integrate(&lp, &state, &run.config(bound), None)?;
                (trace.last().cost, trace.first_time_cost_below(target))
            } else {
                let c = cost(&lp, &x0)?;
                (c, (c <= target).then_some(0.0))
            };
            checks.push(BoundCheck {
                eps,
                bound_time_kl: bound,
                bound_time_mu: bound_time_mu(&lp, &x0, &oracle, eps)?,
                achieved_time,
                achieved_ratio: achieved_time.filter(|_| bound > 0.0).map(|t| t / bound),
                final_cost,
                target,
                passed: final_cost <= target + BOUND_SLACK * oracle.opt,
            });
        }
        let passed = checks.iter().all(|c| c.passed);
        let report = BoundReport { instance_name: display_name(&lp, path), opt: oracle.opt, checks, passed };
        Ok((serde_json::to_string(&report)?, if passed { 0 } else { EXIT_CHECK_FAILED }))
    })
}

#[derive(Debug, Serialize)]
struct CompareReport {
    instance_name: String,
    horizon: f64,
    max_deviation: f64,
    time_of_max: f64,
    samples: usize,
    final_bregman: Option<f64>,
    passed: bool,
}

pub fn md_compare(run: &RunArgs, horizon: f64, out_dir: Option<&Path>) -> u8 {
    fan_out(&run.instance, run.jobs, |path| {
        let lp = load_instance(path)?;
        let x0 = parse_x0(&run.x0, &lp)?;
        let cmp = compare_trajectories(&lp, &x0, horizon, &run.config(horizon))?;
        if let Some(dir) = out_dir {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let file = dir.join(format!("{}.lyapunov.csv", file_stem(path)));
            let mut w = csv::Writer::from_path(&file).with_context(|| format!("creating {}", file.display()))?;
            w.write_record(["t", "bregman_to_optimum"])?;
            for (t, v) in &cmp.lyapunov {
                w.write_record([t.to_string(), v.to_string()])?;
            }
            w.flush()?;
        }
        let passed = cmp.max_deviation <= MD_DEVIATION_LIMIT;
        let report = CompareReport {
            instance_name: display_name(&lp, path),
            horizon,
            max_deviation: cmp.max_deviation,
            time_of_max: cmp.time_of_max,
            samples: cmp.samples,
            final_bregman: cmp.lyapunov.last().map(|(_, v)| *v),
            passed,
        };
        Ok((serde_json::to_string(&report)?, if passed { 0 } else { EXIT_CHECK_FAILED }))
    })
}

pub fn oracle(instances: &[PathBuf]) -> u8 {
    fan_out(instances, 1, |path| {
        let lp = load_instance(path)?;
        Ok((serde_json::to_string(&oracle_json(&solve_exact(&lp)?))?, 0))
    })
}

fn generate_files(seed: u64, kind: Kind, nodes: usize, edges: usize, rows: usize, out_dir: &Path) -> Result<String> {
    let mut rng = seeded_rng(seed);
    let (instance, x0) = match kind {
        Kind::Network => {
            if nodes < 2 || edges + 1 < nodes {
                bail!(Error::InvalidConfig(format!(
                    "a network needs 2 <= nodes <= edges + 1, got {nodes} and {edges}"
                )));
            }
            let (_, lp) = random_network(&mut rng, nodes, edges);
            (lp.instance, lp.feasible_point)
        }
        Kind::Dense => {
            if rows == 0 || rows > edges {
                bail!(Error::InvalidConfig(format!("need 1 <= rows <= edges, got {rows} and {edges}")));
            }
            let lp = random_lp(&mut rng, rows, edges);
            (lp.instance, lp.feasible_point)
        }
        Kind::Simplex => {
            if edges == 0 {
                bail!(Error::InvalidConfig("a simplex needs at least one variable".into()));
            }
            let lp = random_simplex(&mut rng, edges);
            let x0 = random_simplex_point(&mut rng, edges);
            (lp, x0)
        }
    };
    let kind_name = format!("{kind:?}").to_lowercase();
    let instance = instance.with_name(format!("{kind_name}-seed-{seed}"));
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let instance_path = out_dir.join("instance.json");
    let x0_path = out_dir.join("x0.txt");
    fs::write(&instance_path, save(&instance)).with_context(|| format!("writing {}", instance_path.display()))?;
    fs::write(&x0_path, comma_list(&x0) + "\n").with_context(|| format!("writing {}", x0_path.display()))?;
    Ok(format!("{}\n{}", instance_path.display(), x0_path.display()))
}

pub fn generate(seed: u64, kind: Kind, nodes: usize, edges: usize, rows: usize, out_dir: &Path) -> u8 {
    match generate_files(seed, kind, nodes, edges, rows, out_dir) {
        Ok(text) => {
            println!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_root_error() {
        let collapse = Error::StepCollapse { t: 1.0, x: vec![1.0], halvings: 40 };
        let wrapped = Error::AtTime { t: 1.0, source: Box::new(collapse) };
        assert_eq!(exit_code(&wrapped.into()), EXIT_STEP_COLLAPSE);
        assert_eq!(exit_code(&Error::RankDeficient { rank: 1, rows: 2 }.into()), EXIT_INVALID);
        assert_eq!(exit_code(&anyhow::anyhow!("io")), EXIT_INVALID);
        assert!(describe(&Error::NotSimplexInstance.into()).starts_with("NotSimplexInstance: "));
    }

    #[test]
    fn uniform_start() {
        let simplex = LpInstance::simplex(&[1.0, 2.0, 3.0, 4.0]);
        let x = parse_x0("uniform", &simplex).unwrap();
        assert!(x.iter().all(|v| (v - 0.25).abs() < 1e-15));
        // A·1 = 0 falls back to the all-ones vector
        let cycle = LpInstance::from_rows(&[vec![1.0, -1.0]], &[1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(parse_x0("uniform", &cycle).unwrap().as_slice(), &[1.0, 1.0]);
        assert_eq!(parse_x0(" 0.5, 2 ", &cycle).unwrap().as_slice(), &[0.5, 2.0]);
        assert!(parse_x0("1,x", &cycle).is_err());
        assert!(parse_x0("1", &cycle).is_err());
    }
}

//! Discounted-profit evaluation and Monte Carlo experiments.
//!
//! The realized objective of a path discretizes
//! `integral e^(-alpha t) (pi dt - C_L dL)` with left-endpoint controls and
//! the local-time penalty booked at the step where the projection occurred.
//! Monte Carlo runs are paired by construction: path `i` always draws from
//! stream `(base_seed, i)` regardless of the policy under evaluation, so
//! competing policies see identical noise (common random numbers), and
//! reductions run in path order, which makes every estimate independent of
//! the worker count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hjb::{integrate_w, shoot_kstar, HjbSolution, ShootConfig};
use crate::model::ModelParams;
use crate::policy::Policy;
use crate::sde::{RegulatedPath, SimConfig, Stepper};

/// Monte Carlo estimate of the discounted profit functional for one policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy_label: String,
    pub j_mean: f64,
    pub j_se: f64,
    pub n_paths: usize,
    /// Solver value `Q(r0)` for side-by-side display, when available.
    pub q_of_r0: Option<f64>,
    /// Truncation bound `e^(-alpha T) * max |pi| / alpha`, with the profit
    /// rate tracked empirically along the simulated paths.
    pub tail_bound: f64,
}

/// Mean and standard error of a pairwise difference.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairedStats {
    pub mean: f64,
    pub se: f64,
}

/// One row of a parameter sweep; solver failures are recorded in-row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub k_star: Option<f64>,
    pub q_r0: Option<f64>,
    pub j_mean: Option<f64>,
    pub j_se: Option<f64>,
    pub mean_terminal_r: Option<f64>,
    pub error: Option<String>,
}

/// Outcome of the value-function upper-bound check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationOutcome {
    /// Whether `j_mean <= Q(r0) + 3 se + allowance`.
    pub holds: bool,
    /// Slack of that inequality (nonnegative when it holds).
    pub margin: f64,
    pub report: EvalReport,
}

/// Realized discounted profit of a stored path:
/// `sum_i e^(-alpha t_i) [pi(p_i, u_i, r_i) dt_i - C_L dL_i]`, with `dL_i`
/// recovered exactly from the stored pre-projection proposals.
pub fn discounted_profit(path: &RegulatedPath, params: &ModelParams) -> Result<f64> {
    let n = path.proposals.len();
    let len = path.ts.len();
    if len < 2
        || path.rs.len() != len
        || path.l_cum.len() != len
        || path.u_cum.len() != len
        || path.u_ctrl.len() != len
        || path.p_ctrl.len() != len
        || n + 1 != len
    {
        return Err(Error::Eval("path series lengths are inconsistent".into()));
    }
    let dt = path.ts[1] - path.ts[0];
    let factor = (-params.alpha * dt).exp();
    let mut disc = (-params.alpha * path.ts[0]).exp();
    let mut j = 0.0;
    for i in 0..n {
        let r_eval = if path.regulated {
            path.rs[i]
        } else {
            path.rs[i].clamp(0.0, 1.0)
        };
        let dl = if path.regulated {
            (-path.proposals[i]).max(0.0)
        } else {
            0.0
        };
        let dt_i = path.ts[i + 1] - path.ts[i];
        j += disc * (params.profit_raw(path.p_ctrl[i], path.u_ctrl[i], r_eval) * dt_i
            - params.c_l * dl);
        disc *= factor;
    }
    Ok(j)
}

struct PathStats {
    j: f64,
    max_abs_rate: f64,
    terminal_r: f64,
}

/// Fused simulate-and-discount kernel. Arithmetic mirrors
/// [`discounted_profit`] over [`crate::sde::simulate_path_stream`] exactly
/// (asserted bitwise in tests); it just skips materializing the path.
fn simulate_stats(
    policy: &Policy,
    params: &ModelParams,
    cfg: &SimConfig,
    seed: u64,
    stream: u64,
) -> PathStats {
    let n = cfg.steps();
    let mut stepper = Stepper::new(policy, params, cfg, seed, stream);
    let dt = cfg.dt;
    let factor = (-params.alpha * dt).exp();
    let mut disc = 1.0f64; // e^(-alpha * 0)
    let mut j = 0.0;
    let mut max_abs_rate = 0.0f64;
    for i in 0..n {
        let out = stepper.step();
        let dt_i = (i + 1) as f64 * dt - i as f64 * dt;
        let rate = params.profit_raw(out.p, out.u, out.r_eval);
        max_abs_rate = max_abs_rate.max(rate.abs());
        j += disc * (rate * dt_i - params.c_l * out.dl);
        disc *= factor;
    }
    PathStats {
        j,
        max_abs_rate,
        terminal_r: stepper.state(),
    }
}

#[cfg(feature = "parallel")]
fn map_paths<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_paths<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}

fn mc_stats(
    policy: &Policy,
    params: &ModelParams,
    cfg: &SimConfig,
    n_paths: usize,
    base_seed: u64,
) -> Result<Vec<PathStats>> {
    params.validate()?;
    cfg.validate()?;
    Ok(map_paths(n_paths, |i| {
        simulate_stats(policy, params, cfg, base_seed, i as u64)
    }))
}

/// Per-path realized profits under streams `(base_seed, 0..n_paths)`.
pub fn monte_carlo_profits(
    policy: &Policy,
    params: &ModelParams,
    cfg: &SimConfig,
    n_paths: usize,
    base_seed: u64,
) -> Result<Vec<f64>> {
    Ok(mc_stats(policy, params, cfg, n_paths, base_seed)?
        .into_iter()
        .map(|s| s.j)
        .collect())
}

/// Sample mean and standard error, summed in input order so results are
/// reproducible bit for bit.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    assert!(xs.len() >= 2, "need at least 2 samples for a standard error");
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo estimate of the discounted profit functional.
pub fn monte_carlo_j(
    policy: &Policy,
    params: &ModelParams,
    cfg: &SimConfig,
    n_paths: usize,
    base_seed: u64,
) -> Result<EvalReport> {
    if n_paths < 2 {
        return Err(Error::Eval("need at least 2 paths for a standard error".into()));
    }
    let stats = mc_stats(policy, params, cfg, n_paths, base_seed)?;
    let js: Vec<f64> = stats.iter().map(|s| s.j).collect();
    let (mean, se) = mean_se(&js);
    let max_rate = stats.iter().fold(0.0f64, |m, s| m.max(s.max_abs_rate));
    let t_end = cfg.steps() as f64 * cfg.dt;
    let tail_bound = (-params.alpha * t_end).exp() * max_rate / params.alpha;
    Ok(EvalReport {
        policy_label: policy.label(),
        j_mean: mean,
        j_se: se,
        n_paths,
        q_of_r0: None,
        tail_bound,
    })
}

/// Mean and standard error of `a[i] - b[i]` over common-random-number pairs.
pub fn paired_diff(a: &[f64], b: &[f64]) -> Result<PairedStats> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Eval(
            "paired comparison needs two equally sized samples of length >= 2".into(),
        ));
    }
    let n = a.len() as f64;
    let mean = a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / n;
    let var = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y - mean;
            d * d
        })
        .sum::<f64>()
        / (n - 1.0);
    Ok(PairedStats {
        mean,
        se: (var / n).sqrt(),
    })
}

/// Evaluates the policies induced by a list of shot slopes under common
/// random numbers. Reports come back in input order, labeled `k=<value>`.
pub fn compare_policies(
    k_values: &[f64],
    params: &ModelParams,
    scfg: &ShootConfig,
    cfg: &SimConfig,
    n_paths: usize,
    base_seed: u64,
) -> Result<Vec<EvalReport>> {
    let mut out = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let traj = integrate_w(k, params, scfg)?;
        let policy = Policy::from_qprime_series(&traj.xs, &traj.ws, params);
        let mut report = monte_carlo_j(&policy, params, cfg, n_paths, base_seed)?;
        report.policy_label = format!("k={k}");
        out.push(report);
    }
    Ok(out)
}

/// Statistical check of the value-function upper bound
/// `J(r0; policy) <= Q(r0)` for an admissible policy, with a 3-sigma band
/// plus a discretization allowance (`allowance_frac` of `|Q(r0)|`) budgeted
/// for the Euler boundary bias.
pub fn verification_inequality(
    policy: &Policy,
    params: &ModelParams,
    cfg: &SimConfig,
    n_paths: usize,
    base_seed: u64,
    sol: &HjbSolution,
    allowance_frac: f64,
) -> Result<VerificationOutcome> {
    let q = sol.value_at(cfg.r0);
    let mut report = monte_carlo_j(policy, params, cfg, n_paths, base_seed)?;
    report.q_of_r0 = Some(q);
    let margin = q + 3.0 * report.j_se + allowance_frac * q.abs() - report.j_mean;
    Ok(VerificationOutcome {
        holds: margin >= 0.0,
        margin,
        report,
    })
}

fn set_param(base: &ModelParams, name: &str, v: f64) -> Result<ModelParams> {
    let mut p = *base;
    match name {
        "gamma" => p.gamma = v,
        "delta" => p.delta = v,
        "sigma2" => {
            if v < 0.0 {
                return Err(Error::Validation("sigma2 must be nonnegative".into()));
            }
            p.sigma = v.sqrt();
        }
        "alpha" => p.alpha = v,
        "a0" => p.a0 = v,
        "a1" => p.a1 = v,
        "a2" => p.a2 = v,
        "c_v" => p.c_v = v,
        "p0" => p.p0 = v,
        "c_l" => p.c_l = v,
        other => {
            return Err(Error::Domain(format!(
                "unknown sweep parameter '{other}' (expected one of gamma, delta, sigma2, alpha, a0, a1, a2, c_v, p0, c_l)"
            )))
        }
    }
    Ok(p)
}

/// Re-solves and re-evaluates the optimal policy for each parameter value.
/// Rows for values whose solve or evaluation fails carry the error message
/// instead of aborting the sweep.
pub fn sensitivity_sweep(
    param_name: &str,
    values: &[f64],
    base: &ModelParams,
    scfg: &ShootConfig,
    cfg: &SimConfig,
    n_paths: usize,
    base_seed: u64,
) -> Result<Vec<SweepRow>> {
    // reject unknown parameter names up front
    set_param(base, param_name, values.first().copied().unwrap_or(1.0))?;
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let mut row = SweepRow {
            param: param_name.to_string(),
            value: v,
            k_star: None,
            q_r0: None,
            j_mean: None,
            j_se: None,
            mean_terminal_r: None,
            error: None,
        };
        let outcome = (|| -> Result<()> {
            let params = set_param(base, param_name, v)?.validated()?;
            let sol = shoot_kstar(&params, scfg)?;
            row.k_star = Some(sol.k_star);
            row.q_r0 = Some(sol.value_at(cfg.r0));
            let policy = Policy::from_solution(&sol, &params);
            if n_paths < 2 {
                return Err(Error::Eval("need at least 2 paths".into()));
            }
            let stats = mc_stats(&policy, &params, cfg, n_paths, base_seed)?;
            let js: Vec<f64> = stats.iter().map(|s| s.j).collect();
            let (mean, se) = mean_se(&js);
            row.j_mean = Some(mean);
            row.j_se = Some(se);
            row.mean_terminal_r =
                Some(stats.iter().map(|s| s.terminal_r).sum::<f64>() / stats.len() as f64);
            Ok(())
        })();
        if let Err(e) = outcome {
            row.error = Some(e.to_string());
        }
        rows.push(row);
    }
    Ok(rows)
}

//! Subcommand implementations and artifact writers.
//!
//! Numeric CSV fields use Rust's shortest-roundtrip float formatting, so
//! identical results serialize to identical bytes and a run can be verified
//! by byte comparison against a rerun from its manifest.

use std::fs;
use std::io::Write;
use std::path::Path;

use recycle_control::{
    discounted_profit, integrate_w, mean_se, monte_carlo_profits, paired_diff, sde,
    sensitivity_sweep, shoot_kstar, verification_inequality, HjbSolution, ModelParams, Policy,
};
use serde::Serialize;

use crate::config::{Manifest, RunConfig};
use crate::CliError;

pub fn dispatch(name: &str, cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.output_dir)?;
    match name {
        "solve" => cmd_solve(cfg),
        "simulate" => cmd_simulate(cfg),
        "evaluate" => cmd_evaluate(cfg),
        "compare" => cmd_compare(cfg),
        "sweep" => cmd_sweep(cfg),
        other => Err(CliError::Config(format!("unknown subcommand {other}"))),
    }
}

fn write_text(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let mut f = fs::File::create(dir.join(name))?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("cannot serialize {name}: {e}")))?;
    write_text(dir, name, &(text + "\n"))
}

fn manifest_skeleton(subcommand: &str, cfg: &RunConfig) -> Manifest {
    Manifest {
        subcommand: subcommand.to_string(),
        config: cfg.clone(),
        k_star: None,
        k_const: None,
        residual_sup: None,
        path_profits: None,
        outputs: Vec::new(),
    }
}

fn parse_policy(
    cfg: &RunConfig,
    params: &ModelParams,
    sol: Option<&HjbSolution>,
) -> Result<Policy, CliError> {
    let spec = cfg.policy.as_str();
    if spec == "optimal" {
        let sol = sol.ok_or_else(|| {
            CliError::Solver("optimal policy requested but no solve available".into())
        })?;
        return Ok(Policy::from_solution(sol, params));
    }
    if spec == "zero" {
        return Ok(Policy::zero(params));
    }
    if let Some(rest) = spec.strip_prefix("fixed:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() == 2 {
            if let (Ok(u), Ok(p)) = (parts[0].parse::<f64>(), parts[1].parse::<f64>()) {
                return Ok(Policy::fixed(params, u, p)?);
            }
        }
    }
    Err(CliError::Config(format!(
        "policy must be \"optimal\", \"zero\" or \"fixed:<u>:<p>\", got \"{spec}\""
    )))
}

fn cmd_solve(cfg: &RunConfig) -> Result<(), CliError> {
    let params = cfg.model_params()?.validated()?;
    let sol = shoot_kstar(&params, &cfg.shoot_config())?;

    let t = &sol.trajectory;
    let mut csv = String::with_capacity(t.xs.len() * 32);
    csv.push_str("x,W,Y\n");
    for i in 0..t.xs.len() {
        csv.push_str(&format!("{},{},{}\n", t.xs[i], t.ws[i], t.ys[i]));
    }
    write_text(&cfg.output_dir, "hjb_solution.csv", &csv)?;

    let mut manifest = manifest_skeleton("solve", cfg);
    manifest.k_star = Some(sol.k_star);
    manifest.k_const = Some(t.k_const);
    manifest.residual_sup = Some(sol.residual_sup);
    manifest.outputs = vec!["hjb_solution.csv".into()];
    write_json(&cfg.output_dir, "manifest.json", &manifest)?;
    println!(
        "solve: k_star = {}, residual_sup = {:.3e}, wrote {}",
        sol.k_star,
        sol.residual_sup,
        cfg.output_dir.join("hjb_solution.csv").display()
    );
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let params = cfg.model_params()?.validated()?;
    let sim = cfg.sim_config();
    sim.validate()?;
    let sol = if cfg.policy == "optimal" {
        Some(shoot_kstar(&params, &cfg.shoot_config())?)
    } else {
        None
    };
    let policy = parse_policy(cfg, &params, sol.as_ref())?;

    let mut manifest = manifest_skeleton("simulate", cfg);
    manifest.k_star = sol.as_ref().map(|s| s.k_star);
    let mut profits = Vec::with_capacity(cfg.sim_paths);
    for i in 0..cfg.sim_paths {
        let mut path = sde::simulate_path_stream(&policy, &params, &sim, sim.seed, i as u64)?;
        path.j_realized = Some(discounted_profit(&path, &params)?);
        profits.push(path.j_realized.unwrap());
        let name = format!("path_{i:04}.csv");
        let n = path.ts.len();
        let mut csv = String::with_capacity(n * 48);
        csv.push_str("t,r,L,U,u,p\n");
        for j in 0..n {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                path.ts[j], path.rs[j], path.l_cum[j], path.u_cum[j], path.u_ctrl[j], path.p_ctrl[j]
            ));
        }
        write_text(&cfg.output_dir, &name, &csv)?;
        manifest.outputs.push(name);
    }
    manifest.path_profits = Some(profits);
    write_json(&cfg.output_dir, "manifest.json", &manifest)?;
    println!(
        "simulate: wrote {} path file(s) under {}",
        cfg.sim_paths,
        cfg.output_dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvaluateArtifact {
    holds: bool,
    margin: f64,
    report: recycle_control::EvalReport,
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let params = cfg.model_params()?.validated()?;
    let sim = cfg.eval_sim_config();
    sim.validate()?;
    let sol = shoot_kstar(&params, &cfg.shoot_config())?;
    let policy = parse_policy(cfg, &params, Some(&sol))?;

    let outcome = verification_inequality(
        &policy,
        &params,
        &sim,
        cfg.n_paths,
        cfg.base_seed,
        &sol,
        cfg.disc_allowance,
    )?;
    let report = &outcome.report;
    let mut csv = String::new();
    csv.push_str("policy,j_mean,j_se,n_paths,q_of_r0,tail_bound,margin,holds\n");
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{}\n",
        report.policy_label,
        report.j_mean,
        report.j_se,
        report.n_paths,
        report.q_of_r0.unwrap_or(f64::NAN),
        report.tail_bound,
        outcome.margin,
        outcome.holds
    ));
    write_text(&cfg.output_dir, "report.csv", &csv)?;
    write_json(
        &cfg.output_dir,
        "report.json",
        &EvaluateArtifact {
            holds: outcome.holds,
            margin: outcome.margin,
            report: report.clone(),
        },
    )?;

    let mut manifest = manifest_skeleton("evaluate", cfg);
    manifest.k_star = Some(sol.k_star);
    manifest.residual_sup = Some(sol.residual_sup);
    manifest.outputs = vec!["report.csv".into(), "report.json".into()];
    write_json(&cfg.output_dir, "manifest.json", &manifest)?;
    println!(
        "evaluate[{}]: j = {} +- {} (Q(r0) = {}, margin = {})",
        report.policy_label,
        report.j_mean,
        report.j_se,
        report.q_of_r0.unwrap_or(f64::NAN),
        outcome.margin
    );
    Ok(())
}

#[derive(Serialize)]
struct CompareRow {
    k: f64,
    j_mean: f64,
    j_se: f64,
    n_paths: usize,
    /// j(k*) - j(k) over paired paths; 0 for the k* row itself.
    margin_vs_kstar: f64,
    paired_se: f64,
}

fn cmd_compare(cfg: &RunConfig) -> Result<(), CliError> {
    let params = cfg.model_params()?.validated()?;
    let sim = cfg.eval_sim_config();
    sim.validate()?;
    let scfg = cfg.shoot_config();
    let sol = shoot_kstar(&params, &scfg)?;

    // solved slope first, then the requested slopes in input order
    let mut ks = vec![sol.k_star];
    ks.extend_from_slice(&cfg.k_values);

    let mut profits = Vec::with_capacity(ks.len());
    for &k in &ks {
        let traj = integrate_w(k, &params, &scfg)?;
        let policy = Policy::from_qprime_series(&traj.xs, &traj.ws, &params);
        profits.push(monte_carlo_profits(
            &policy,
            &params,
            &sim,
            cfg.n_paths,
            cfg.base_seed,
        )?);
    }

    let mut rows = Vec::with_capacity(ks.len());
    for (i, &k) in ks.iter().enumerate() {
        let (mean, se) = mean_se(&profits[i]);
        let (margin, paired_se) = if i == 0 {
            (0.0, 0.0)
        } else {
            let d = paired_diff(&profits[0], &profits[i])?;
            (d.mean, d.se)
        };
        rows.push(CompareRow {
            k,
            j_mean: mean,
            j_se: se,
            n_paths: cfg.n_paths,
            margin_vs_kstar: margin,
            paired_se,
        });
    }

    let mut csv = String::new();
    csv.push_str("k,j_mean,j_se,n_paths,margin_vs_kstar,paired_se\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.k, r.j_mean, r.j_se, r.n_paths, r.margin_vs_kstar, r.paired_se
        ));
    }
    write_text(&cfg.output_dir, "compare.csv", &csv)?;
    write_json(&cfg.output_dir, "compare.json", &rows)?;

    let mut manifest = manifest_skeleton("compare", cfg);
    manifest.k_star = Some(sol.k_star);
    manifest.residual_sup = Some(sol.residual_sup);
    manifest.outputs = vec!["compare.csv".into(), "compare.json".into()];
    write_json(&cfg.output_dir, "manifest.json", &manifest)?;
    for r in &rows {
        println!(
            "compare: k = {}, j = {} +- {}, margin vs k* = {} (paired se {})",
            r.k, r.j_mean, r.j_se, r.margin_vs_kstar, r.paired_se
        );
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let params = cfg.model_params()?.validated()?;
    let sim = cfg.eval_sim_config();
    sim.validate()?;
    let name = cfg
        .param_name
        .as_deref()
        .ok_or_else(|| CliError::Config("sweep requires param_name".into()))?;
    if cfg.param_values.is_empty() {
        return Err(CliError::Config("sweep requires a nonempty param_values".into()));
    }
    let rows = sensitivity_sweep(
        name,
        &cfg.param_values,
        &params,
        &cfg.shoot_config(),
        &sim,
        cfg.n_paths,
        cfg.base_seed,
    )?;

    fn opt(v: Option<f64>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    let mut csv = String::new();
    csv.push_str("param,value,k_star,q_r0,j_mean,j_se,mean_terminal_r,error\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.param,
            r.value,
            opt(r.k_star),
            opt(r.q_r0),
            opt(r.j_mean),
            opt(r.j_se),
            opt(r.mean_terminal_r),
            r.error.clone().unwrap_or_default()
        ));
    }
    write_text(&cfg.output_dir, "sweep.csv", &csv)?;
    write_json(&cfg.output_dir, "sweep.json", &rows)?;

    let mut manifest = manifest_skeleton("sweep", cfg);
    manifest.outputs = vec!["sweep.csv".into(), "sweep.json".into()];
    write_json(&cfg.output_dir, "manifest.json", &manifest)?;
    println!(
        "sweep[{name}]: {} row(s) written to {}",
        rows.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

//! Layered run configuration: defaults, then an optional config file (flat
//! TOML, or a previously emitted JSON manifest), then command-line overrides.
//! Every run writes the fully resolved configuration back into its manifest,
//! so any artifact can be reproduced from the manifest alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use recycle_control::{ModelParams, ShootConfig, SimConfig};

use crate::CliError;

/// Fully resolved configuration for one run. Model constants use the
/// variance convention (`sigma2`) common in the experiment descriptions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    // model
    pub gamma: f64,
    pub delta: f64,
    pub sigma2: f64,
    pub alpha: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub c_v: f64,
    pub p0: f64,
    pub c_l: f64,
    // simulation
    pub r0: f64,
    /// Horizon for `simulate`.
    pub t: f64,
    pub dt: f64,
    /// Seed for single-path simulation streams.
    pub seed: u64,
    pub regulated: bool,
    /// Number of paths written by `simulate`.
    pub sim_paths: usize,
    // shooting
    pub grid_n: usize,
    pub eps_boundary: f64,
    pub k_lo: f64,
    pub k_hi: f64,
    pub tol_k: f64,
    pub tol_terminal: f64,
    // evaluation
    pub n_paths: usize,
    pub base_seed: u64,
    /// Horizon for Monte Carlo evaluation; defaults to 40/alpha.
    pub eval_t: Option<f64>,
    /// Policy under `simulate`/`evaluate`: "optimal", "zero" or "fixed:<u>:<p>".
    pub policy: String,
    /// Euler-bias budget for the value upper-bound check, as a fraction of |Q(r0)|.
    pub disc_allowance: f64,
    // compare / sweep
    pub k_values: Vec<f64>,
    pub param_name: Option<String>,
    pub param_values: Vec<f64>,
    // execution
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            gamma: 5.0,
            delta: 0.5,
            sigma2: 2.0,
            alpha: 0.25,
            a0: 1.0,
            a1: 1.1,
            a2: 5.0,
            c_v: 0.2,
            p0: 1.0,
            c_l: 0.5,
            r0: 0.5,
            t: 2.0,
            dt: 0.002,
            seed: 1,
            regulated: true,
            sim_paths: 1,
            grid_n: 4000,
            eps_boundary: 1e-3,
            k_lo: -2.0,
            k_hi: 2.0,
            tol_k: 1e-8,
            tol_terminal: 1e-6,
            n_paths: 10_000,
            base_seed: 42,
            eval_t: None,
            policy: "optimal".to_string(),
            disc_allowance: 0.02,
            k_values: vec![-0.5, 0.5],
            param_name: None,
            param_values: Vec::new(),
            output_dir: PathBuf::from("out"),
            threads: None,
        }
    }
}

/// Partial configuration as read from a TOML file; unset keys keep their
/// previous (default) values. Unknown keys are config errors.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub sigma2: Option<f64>,
    pub alpha: Option<f64>,
    pub a0: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub c_v: Option<f64>,
    pub p0: Option<f64>,
    pub c_l: Option<f64>,
    pub r0: Option<f64>,
    pub t: Option<f64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub regulated: Option<bool>,
    pub sim_paths: Option<usize>,
    pub grid_n: Option<usize>,
    pub eps_boundary: Option<f64>,
    pub k_lo: Option<f64>,
    pub k_hi: Option<f64>,
    pub tol_k: Option<f64>,
    pub tol_terminal: Option<f64>,
    pub n_paths: Option<usize>,
    pub base_seed: Option<u64>,
    pub eval_t: Option<f64>,
    pub policy: Option<String>,
    pub disc_allowance: Option<f64>,
    pub k_values: Option<Vec<f64>>,
    pub param_name: Option<String>,
    pub param_values: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

macro_rules! apply_fields {
    ($cfg:expr, $patch:expr, plain: [$($f:ident),* $(,)?], optional: [$($o:ident),* $(,)?]) => {
        $(if let Some(v) = $patch.$f { $cfg.$f = v; })*
        $(if $patch.$o.is_some() { $cfg.$o = $patch.$o; })*
    };
}

impl RunConfig {
    pub fn apply(&mut self, patch: ConfigPatch) {
        apply_fields!(
            self,
            patch,
            plain: [
                gamma, delta, sigma2, alpha, a0, a1, a2, c_v, p0, c_l,
                r0, t, dt, seed, regulated, sim_paths,
                grid_n, eps_boundary, k_lo, k_hi, tol_k, tol_terminal,
                n_paths, base_seed, policy, disc_allowance, k_values,
                param_values, output_dir,
            ],
            optional: [eval_t, param_name, threads]
        );
    }

    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        if self.sigma2 < 0.0 {
            return Err(CliError::Validation("sigma2 must be nonnegative".into()));
        }
        Ok(ModelParams {
            gamma: self.gamma,
            delta: self.delta,
            sigma: self.sigma2.sqrt(),
            alpha: self.alpha,
            a0: self.a0,
            a1: self.a1,
            a2: self.a2,
            c_v: self.c_v,
            p0: self.p0,
            c_l: self.c_l,
        })
    }

    pub fn shoot_config(&self) -> ShootConfig {
        ShootConfig {
            grid_n: self.grid_n,
            eps_boundary: self.eps_boundary,
            k_lo: self.k_lo,
            k_hi: self.k_hi,
            tol_k: self.tol_k,
            tol_terminal: self.tol_terminal,
            ..ShootConfig::default()
        }
    }

    /// Simulation config for `simulate` (horizon `t`).
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            r0: self.r0,
            horizon: self.t,
            dt: self.dt,
            seed: self.seed,
            regulated: self.regulated,
        }
    }

    /// Simulation config for Monte Carlo evaluation (horizon `eval_t`,
    /// defaulting to 40/alpha so the discounted tail is negligible).
    pub fn eval_sim_config(&self) -> SimConfig {
        SimConfig {
            r0: self.r0,
            horizon: self.eval_t.unwrap_or(40.0 / self.alpha),
            dt: self.dt,
            seed: self.seed,
            regulated: self.regulated,
        }
    }
}

/// A run's provenance record; `--config manifest.json` reproduces the run.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_const: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_sup: Option<f64>,
    /// Realized discounted profit of each written path (simulate only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_profits: Option<Vec<f64>>,
    pub outputs: Vec<String>,
}

/// Loads a config file: flat TOML (partial, over defaults) or JSON — either a
/// bare `RunConfig` or a manifest, whose embedded config is taken verbatim.
pub fn load_file(path: &Path, base: &mut RunConfig) -> Result<(), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let looks_json = path.extension().is_some_and(|e| e == "json")
        || text.trim_start().starts_with('{');
    if looks_json {
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid JSON in {}: {e}", path.display())))?;
        let cfg_value = value.get("config").cloned().unwrap_or(value);
        *base = serde_json::from_value(cfg_value)
            .map_err(|e| CliError::Config(format!("invalid config in {}: {e}", path.display())))?;
    } else {
        let patch: ConfigPatch = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid TOML in {}: {e}", path.display())))?;
        base.apply(patch);
    }
    Ok(())
}

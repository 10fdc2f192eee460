//! Projected Euler simulation of the doubly reflected state.
//!
//! Each step proposes `r + R(u, r) dt + sigma sqrt(dt) xi` and projects the
//! proposal back into `[0, 1]`, recording the clamp magnitude as the local
//! time increment on the side that was hit. The projection is exact in f64,
//! so the per-step reflection identity and the discrete complementarity
//! conditions hold exactly, not approximately. Controls are frozen over each
//! step at its left endpoint.
//!
//! Randomness: one standard-normal draw per step from a ChaCha8 generator,
//! seeded with `seed` and advanced to stream `path_index`
//! ([`path_rng`]). Draws go through `rand_distr::StandardNormal` (ziggurat);
//! the generator and sampler are fixed so that a given `(seed, path_index)`
//! reproduces the same path on any machine and worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::policy::Policy;

/// Time discretization and initial state for one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Initial recycling rate, in [0, 1].
    pub r0: f64,
    /// Horizon T; the effective horizon is `round(T / dt)` steps.
    pub horizon: f64,
    /// Euler step, 0 < dt <= horizon.
    pub dt: f64,
    /// Base RNG seed for the path stream.
    pub seed: u64,
    /// Whether the two-sided projection at {0, 1} is applied.
    pub regulated: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            r0: 0.5,
            horizon: 2.0,
            dt: 0.002,
            seed: 1,
            regulated: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r0) {
            return Err(Error::Validation(format!("r0 must lie in [0, 1], got {}", self.r0)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Validation("horizon must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(Error::Validation("dt must satisfy 0 < dt <= horizon".into()));
        }
        Ok(())
    }

    /// Number of Euler steps.
    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt).round() as usize).max(1)
    }
}

/// One simulated trajectory with its exact local-time bookkeeping. All series
/// share the time grid `ts` (length `steps + 1`) except `proposals`, which
/// holds the pre-projection Euler state of each step (length `steps`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegulatedPath {
    pub ts: Vec<f64>,
    pub rs: Vec<f64>,
    /// Cumulative lower local time L, nondecreasing from 0.
    pub l_cum: Vec<f64>,
    /// Cumulative upper local time U, nondecreasing from 0.
    pub u_cum: Vec<f64>,
    /// Applied investment series (left-endpoint evaluation; the final entry
    /// is the control at the terminal state, for plotting).
    pub u_ctrl: Vec<f64>,
    /// Applied price series.
    pub p_ctrl: Vec<f64>,
    /// Pre-projection proposals, one per step.
    pub proposals: Vec<f64>,
    /// Whether the projection was active for this run.
    pub regulated: bool,
    /// Realized discounted profit, filled by the evaluation layer.
    pub j_realized: Option<f64>,
}

impl RegulatedPath {
    pub fn steps(&self) -> usize {
        self.proposals.len()
    }

    /// Terminal state r(T).
    pub fn terminal_r(&self) -> f64 {
        *self.rs.last().expect("non-empty path")
    }
}

/// ChaCha8 generator for path `stream` of base seed `seed`. Streams are
/// independent, so Monte Carlo results do not depend on worker scheduling.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[inline]
pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Everything one Euler step produces. `r_eval` is the state the controls
/// and drift were evaluated at (clamped into [0, 1] in unregulated mode so
/// the fractional powers stay defined; the stored state itself roams free).
pub(crate) struct StepOutcome {
    pub r_next: f64,
    pub proposal: f64,
    pub dl: f64,
    pub du: f64,
    pub u: f64,
    pub p: f64,
    pub r_eval: f64,
}

pub(crate) struct Stepper<'a> {
    policy: &'a Policy,
    params: &'a ModelParams,
    regulated: bool,
    dt: f64,
    sigma_sqrt_dt: f64,
    rng: ChaCha8Rng,
    r: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(
        policy: &'a Policy,
        params: &'a ModelParams,
        cfg: &SimConfig,
        seed: u64,
        stream: u64,
    ) -> Self {
        Stepper {
            policy,
            params,
            regulated: cfg.regulated,
            dt: cfg.dt,
            sigma_sqrt_dt: params.sigma * cfg.dt.sqrt(),
            rng: path_rng(seed, stream),
            r: cfg.r0,
        }
    }

    pub fn state(&self) -> f64 {
        self.r
    }

    pub fn eval_state(&self) -> f64 {
        if self.regulated {
            self.r
        } else {
            self.r.clamp(0.0, 1.0)
        }
    }

    #[inline]
    pub fn step(&mut self) -> StepOutcome {
        let r_eval = self.eval_state();
        let (u, p) = self.policy.controls(r_eval);
        let xi: f64 = standard_normal(&mut self.rng);
        let proposal =
            self.r + (self.params.drift_raw(u, r_eval) * self.dt + self.sigma_sqrt_dt * xi);
        let (r_next, dl, du) = if self.regulated {
            if proposal < 0.0 {
                (0.0, -proposal, 0.0)
            } else if proposal > 1.0 {
                (1.0, 0.0, proposal - 1.0)
            } else {
                (proposal, 0.0, 0.0)
            }
        } else {
            (proposal, 0.0, 0.0)
        };
        self.r = r_next;
        StepOutcome {
            r_next,
            proposal,
            dl,
            du,
            u,
            p,
            r_eval,
        }
    }
}

/// Simulates one path under `policy`, using `(cfg.seed, stream 0)`.
/// Deterministic given `(seed, cfg, params, policy)`.
pub fn simulate_path(policy: &Policy, params: &ModelParams, cfg: &SimConfig) -> Result<RegulatedPath> {
    simulate_path_stream(policy, params, cfg, cfg.seed, 0)
}

/// Simulates one path on an explicit `(seed, stream)` pair; Monte Carlo
/// derives path i from `(base_seed, i)`.
pub fn simulate_path_stream(
    policy: &Policy,
    params: &ModelParams,
    cfg: &SimConfig,
    seed: u64,
    stream: u64,
) -> Result<RegulatedPath> {
    params.validate()?;
    cfg.validate()?;
    let n = cfg.steps();
    let mut stepper = Stepper::new(policy, params, cfg, seed, stream);

    let mut ts = Vec::with_capacity(n + 1);
    let mut rs = Vec::with_capacity(n + 1);
    let mut l_cum = Vec::with_capacity(n + 1);
    let mut u_cum = Vec::with_capacity(n + 1);
    let mut u_ctrl = Vec::with_capacity(n + 1);
    let mut p_ctrl = Vec::with_capacity(n + 1);
    let mut proposals = Vec::with_capacity(n);

    ts.push(0.0);
    rs.push(cfg.r0);
    l_cum.push(0.0);
    u_cum.push(0.0);
    let (mut l, mut u_acc) = (0.0f64, 0.0f64);
    for i in 0..n {
        let out = stepper.step();
        u_ctrl.push(out.u);
        p_ctrl.push(out.p);
        proposals.push(out.proposal);
        l += out.dl;
        u_acc += out.du;
        ts.push((i + 1) as f64 * cfg.dt);
        rs.push(out.r_next);
        l_cum.push(l);
        u_cum.push(u_acc);
    }
    // terminal controls, evaluated at the final state
    let (u_t, p_t) = policy.controls(stepper.eval_state());
    u_ctrl.push(u_t);
    p_ctrl.push(p_t);

    Ok(RegulatedPath {
        ts,
        rs,
        l_cum,
        u_cum,
        u_ctrl,
        p_ctrl,
        proposals,
        regulated: cfg.regulated,
        j_realized: None,
    })
}

/// Unregulated variant with constant controls, for demonstrating that the
/// plain diffusion leaves `[0, 1]`. The state is never projected, so both
/// local times stay identically zero; drift and demand are evaluated at the
/// clamped state to keep the fractional powers defined.
pub fn simulate_unregulated(
    params: &ModelParams,
    cfg: &SimConfig,
    u: f64,
    p: f64,
) -> Result<RegulatedPath> {
    if cfg.regulated {
        return Err(Error::Validation(
            "simulate_unregulated requires cfg.regulated = false".into(),
        ));
    }
    let policy = Policy::fixed(params, u, p)?;
    simulate_path(&policy, params, cfg)
}

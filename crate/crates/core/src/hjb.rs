//! Shooting solver for the stationary HJB equation of the regulated control
//! problem.
//!
//! After maximizing out the controls, the value function `Q` on `[0, 1]`
//! satisfies the nonlinear second-order ODE
//!
//! ```text
//! sigma^2/2 * Q'' + (gamma-1) * (1-x)^(gamma/(gamma-1)) * F(Q')
//!     - delta * x * Q' + G(x) - alpha * Q = 0,
//! Q'(0) = C_L,  Q'(1) = 0,
//! ```
//!
//! where `F` is the investment response and `G` the price-maximized sales
//! profit. Writing `W = Q'` and imposing `W'(0) = k` turns this into an
//! initial-value system in `(Y, W) = (Q, Q')` with `Y(0) = K_k` fixed by the
//! equation itself; the terminal condition `W(1) = 0` is then met by a
//! bisection on `k`. A comparison argument makes the terminal value
//! monotone in `k`, so bisection on the sign of `W_k(1-eps)` is sound:
//! slopes below the root produce trajectories that cross zero and dive,
//! slopes above produce positive trajectories with an interior maximum.
//!
//! For a1 > 1 the forcing `G` blows up like `(1-x)^(1-a1)` at `x = 1`, so
//! integration stops at `1 - eps_boundary` and the boundary condition is
//! imposed there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Discretization and bisection controls for the shooting solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootConfig {
    /// Number of uniform RK4 steps on `[0, 1 - eps_boundary]`, >= 100.
    pub grid_n: usize,
    /// Right-endpoint inset avoiding the sales-profit singularity, in (0, 1e-3].
    pub eps_boundary: f64,
    /// Initial lower bisection bracket for the shot slope k.
    pub k_lo: f64,
    /// Initial upper bisection bracket for k.
    pub k_hi: f64,
    /// Bisection termination width on k.
    pub tol_k: f64,
    /// Acceptance tolerance on |W_k(1 - eps_boundary)|.
    pub tol_terminal: f64,
    /// Bracket doublings allowed before giving up.
    pub max_expansions: u32,
    /// Bisection iterations allowed before giving up.
    pub max_bisections: u32,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig {
            grid_n: 4000,
            eps_boundary: 1e-3,
            k_lo: -2.0,
            k_hi: 2.0,
            tol_k: 1e-8,
            tol_terminal: 1e-6,
            max_expansions: 20,
            max_bisections: 200,
        }
    }
}

impl ShootConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_n < 100 {
            return Err(Error::Validation("grid_n must be at least 100".into()));
        }
        if !(self.eps_boundary > 0.0 && self.eps_boundary <= 1e-3) {
            return Err(Error::Validation(
                "eps_boundary must lie in (0, 1e-3]".into(),
            ));
        }
        if self.k_lo.is_nan() || self.k_hi.is_nan() || self.k_lo >= self.k_hi {
            return Err(Error::Validation("k_lo must be below k_hi".into()));
        }
        if !(self.tol_k > 0.0 && self.tol_terminal > 0.0) {
            return Err(Error::Validation("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Shape of a shot trajectory, decided from the recorded grid values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrajectoryClass {
    /// W changes sign strictly inside the grid; carries the linearly
    /// interpolated crossing abscissa.
    CrossesEarly { crossing: f64 },
    /// W stays nonnegative and attains a strict interior local maximum.
    PositiveWithLocalMax,
    /// W stays nonnegative with no strict interior local maximum.
    PositiveNoMax,
    /// Integration truncated (overflow or non-finite state) before any
    /// recorded sign change.
    TerminalNegative,
}

/// One integrated trajectory of the shot system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WTrajectory {
    /// Imposed initial slope `W'(0)`.
    pub k: f64,
    /// Integration constant `K_k = (sigma^2/2 * k + (gamma-1) F(C_L)) / alpha`,
    /// the value `Y(0)`.
    pub k_const: f64,
    /// Grid abscissae, `xs[i] = i * h`, strictly increasing from 0.
    pub xs: Vec<f64>,
    /// `W_k` on the grid (the candidate `Q'`). `ws[0] = C_L` exactly.
    pub ws: Vec<f64>,
    /// `Y_k` on the grid (the candidate `Q`). `ys[0] = K_k` exactly.
    pub ys: Vec<f64>,
    /// True when integration stopped before reaching `1 - eps_boundary`.
    pub truncated: bool,
    pub class: TrajectoryClass,
}

impl WTrajectory {
    /// Terminal value `W_k(1 - eps)`, or negative infinity for trajectories
    /// that blew down before reaching the right endpoint. This is the scalar
    /// the bisection roots on.
    pub fn terminal_value(&self) -> f64 {
        if self.truncated {
            f64::NEG_INFINITY
        } else {
            *self.ws.last().expect("non-empty trajectory")
        }
    }
}

/// Solved boundary-value problem: located slope, its trajectory, and the
/// a-posteriori residual of the Q-equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HjbSolution {
    pub k_star: f64,
    pub trajectory: WTrajectory,
    /// Normalized sup-residual over the interior grid, central-difference route.
    pub residual_sup: f64,
}

impl HjbSolution {
    /// `Q(r)` by piecewise-linear interpolation of the trajectory, extended
    /// by its endpoint values outside the grid.
    pub fn value_at(&self, r: f64) -> f64 {
        interp_grid(&self.trajectory.xs, &self.trajectory.ys, r)
    }

    /// `Q'(r)` interpolated the same way.
    pub fn qprime_at(&self, r: f64) -> f64 {
        interp_grid(&self.trajectory.xs, &self.trajectory.ws, r)
    }
}

/// Piecewise-linear interpolation on a sorted grid with constant extension.
/// Grid nodes are hit exactly.
pub(crate) fn interp_grid(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    debug_assert_eq!(n, ys.len());
    if n == 1 || x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    // uniform-grid initial guess, then exact fixup
    let h = xs[1] - xs[0];
    let mut i = (((x - xs[0]) / h) as usize).min(n - 2);
    while i + 1 < n - 1 && xs[i + 1] <= x {
        i += 1;
    }
    while i > 0 && xs[i] > x {
        i -= 1;
    }
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

// States with coordinates beyond this are treated as blow-downs.
const BLOWUP_GUARD: f64 = 1e12;

struct OdeRhs<'a> {
    p: &'a ModelParams,
    two_over_sigma2: f64,
    /// `gamma / (gamma - 1)`, the exponent on `(1 - x)`.
    gg: f64,
    /// Elastic-regime margin constant, unused when a1 <= 1.
    margin_c: f64,
}

impl OdeRhs<'_> {
    #[inline]
    fn eval(&self, x: f64, y: f64, w: f64) -> (f64, f64) {
        let f = self.p.investment_response(w);
        let g = self.p.sales_profit_with_margin(x, self.margin_c);
        let dw = self.two_over_sigma2
            * ((1.0 - self.p.gamma) * (1.0 - x).powf(self.gg) * f + self.p.delta * x * w - g
                + self.p.alpha * y);
        (w, dw)
    }
}

/// Integrates the shot system for a fixed slope `k` with classical RK4 on the
/// uniform grid. Blow-downs are truncated and classified, not errored, so a
/// bisection can keep going through them.
pub fn integrate_w(k: f64, params: &ModelParams, cfg: &ShootConfig) -> Result<WTrajectory> {
    params.validate()?;
    cfg.validate()?;
    if params.sigma <= 0.0 {
        return Err(Error::Solver(
            "shooting solver requires sigma > 0 (the equation degenerates to first order)".into(),
        ));
    }
    let margin_c = if params.a1 > 1.0 {
        params.margin_constant()?
    } else {
        0.0
    };
    let rhs = OdeRhs {
        p: params,
        two_over_sigma2: 2.0 / (params.sigma * params.sigma),
        gg: params.gamma / (params.gamma - 1.0),
        margin_c,
    };

    let n = cfg.grid_n;
    let h = (1.0 - cfg.eps_boundary) / n as f64;
    let k_const =
        (0.5 * params.sigma * params.sigma * k + (params.gamma - 1.0) * params.investment_response(params.c_l))
            / params.alpha;

    let mut xs = Vec::with_capacity(n + 1);
    let mut ws = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    let mut w = params.c_l;
    let mut y = k_const;
    xs.push(0.0);
    ws.push(w);
    ys.push(y);

    let mut truncated = false;
    for i in 0..n {
        let x = i as f64 * h;
        let (k1y, k1w) = rhs.eval(x, y, w);
        let (k2y, k2w) = rhs.eval(x + 0.5 * h, y + 0.5 * h * k1y, w + 0.5 * h * k1w);
        let (k3y, k3w) = rhs.eval(x + 0.5 * h, y + 0.5 * h * k2y, w + 0.5 * h * k2w);
        let (k4y, k4w) = rhs.eval(x + h, y + h * k3y, w + h * k3w);
        let y_next = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        let w_next = w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        if !y_next.is_finite()
            || !w_next.is_finite()
            || y_next.abs() > BLOWUP_GUARD
            || w_next.abs() > BLOWUP_GUARD
        {
            truncated = true;
            break;
        }
        y = y_next;
        w = w_next;
        xs.push((i + 1) as f64 * h);
        ws.push(w);
        ys.push(y);
    }

    let class = classify_series(&xs, &ws, truncated);
    Ok(WTrajectory {
        k,
        k_const,
        xs,
        ws,
        ys,
        truncated,
        class,
    })
}

/// Classifies a recorded `W` series.
///
/// A sign change anywhere yields `CrossesEarly` with the crossing abscissa by
/// linear interpolation (the crossing then lies strictly before the last grid
/// point). Otherwise the series is nonnegative and the presence of a strict
/// interior local maximum separates the two positive classes. A truncated
/// series without a sign change is a `TerminalNegative` blow-down.
pub fn classify_series(xs: &[f64], ws: &[f64], truncated: bool) -> TrajectoryClass {
    debug_assert_eq!(xs.len(), ws.len());
    for i in 1..ws.len() {
        if ws[i] < 0.0 {
            let (w0, w1) = (ws[i - 1], ws[i]);
            let t = w0 / (w0 - w1);
            let crossing = xs[i - 1] + t * (xs[i] - xs[i - 1]);
            return TrajectoryClass::CrossesEarly { crossing };
        }
    }
    if truncated {
        return TrajectoryClass::TerminalNegative;
    }
    for i in 1..ws.len().saturating_sub(1) {
        if ws[i] > ws[i - 1] && ws[i] > ws[i + 1] {
            return TrajectoryClass::PositiveWithLocalMax;
        }
    }
    TrajectoryClass::PositiveNoMax
}

fn is_low_side(class: &TrajectoryClass) -> bool {
    matches!(
        class,
        TrajectoryClass::CrossesEarly { .. } | TrajectoryClass::TerminalNegative
    )
}

/// Locates the optimal slope `k*` by bracket expansion plus bisection on the
/// terminal value, ties broken toward the larger slope.
pub fn shoot_kstar(params: &ModelParams, cfg: &ShootConfig) -> Result<HjbSolution> {
    params.validate()?;
    cfg.validate()?;

    let mut lo = cfg.k_lo;
    let mut hi = cfg.k_hi;

    // Expand downward until the low end crosses (or blows down), upward until
    // the high end is positive with an interior maximum.
    let mut t_lo = integrate_w(lo, params, cfg)?;
    let mut expansions = 0;
    while !is_low_side(&t_lo.class) {
        lo = if lo < 0.0 { 2.0 * lo } else if lo > 0.0 { -lo } else { -1.0 };
        expansions += 1;
        if expansions > cfg.max_expansions {
            return Err(Error::Solver(format!(
                "no crossing trajectory found down to k = {lo}"
            )));
        }
        t_lo = integrate_w(lo, params, cfg)?;
    }
    // The upper end only needs a nonnegative terminal value for the monotone
    // bisection to apply. (In strong-market regimes such trajectories also
    // carry the interior local maximum; in weak ones no slope produces a
    // local maximum at all, so that cannot be the acceptance condition.)
    let mut t_hi = integrate_w(hi, params, cfg)?;
    expansions = 0;
    while is_low_side(&t_hi.class) {
        hi = if hi > 0.0 { 2.0 * hi } else if hi < 0.0 { -hi } else { 1.0 };
        expansions += 1;
        if expansions > cfg.max_expansions {
            return Err(Error::Solver(format!(
                "no trajectory with nonnegative terminal value found up to k = {hi}"
            )));
        }
        t_hi = integrate_w(hi, params, cfg)?;
    }
    if lo >= hi {
        return Err(Error::Solver(
            "bracket expansion produced an inverted bracket".into(),
        ));
    }

    let mut g_lo = t_lo.terminal_value();
    let mut iters = 0;
    while hi - lo > cfg.tol_k || t_hi.terminal_value().abs() > cfg.tol_terminal {
        iters += 1;
        if iters > cfg.max_bisections {
            return Err(Error::Solver(format!(
                "bisection did not reach tolerances after {} iterations (bracket width {:.3e}, terminal {:.3e})",
                cfg.max_bisections,
                hi - lo,
                t_hi.terminal_value()
            )));
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // bracket exhausted at f64 resolution
            break;
        }
        let t_mid = integrate_w(mid, params, cfg)?;
        let g_mid = t_mid.terminal_value();
        let g_hi = t_hi.terminal_value();
        // Monotonicity of the terminal map justifies the bisection; a gross
        // violation signals a step size too coarse for these parameters.
        let slack = 1e-9 * (1.0 + g_hi.abs());
        if g_mid.is_finite()
            && ((g_lo.is_finite() && g_mid < g_lo - slack) || g_mid > g_hi + slack)
        {
            return Err(Error::Solver(format!(
                "terminal values not monotone in k near k = {mid} (refine grid_n)"
            )));
        }
        if g_mid < 0.0 {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            t_hi = t_mid;
        }
    }

    let terminal = t_hi.terminal_value();
    if terminal.abs() > cfg.tol_terminal {
        return Err(Error::Solver(format!(
            "terminal residual |W(1-eps)| = {:.3e} exceeds tol_terminal = {:.1e}",
            terminal.abs(),
            cfg.tol_terminal
        )));
    }
    let min_w = t_hi.ws.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_w < -cfg.tol_terminal {
        return Err(Error::Solver(format!(
            "selected trajectory dips to {min_w:.3e}, below -tol_terminal"
        )));
    }

    let residual_sup = residual_sup_on_grid(params, &t_hi.xs, &t_hi.ws, &t_hi.ys);
    Ok(HjbSolution {
        k_star: hi,
        trajectory: t_hi,
        residual_sup,
    })
}

/// Normalized sup-residual of the Q-equation over the interior grid (two grid
/// spacings in from each end), with `Q''` estimated by central differences of
/// the stored `W`. This route is independent of the integrator's own
/// right-hand-side evaluations, so it measures whether the trajectory
/// actually satisfies the ODE.
pub fn hjb_residual(sol: &HjbSolution, params: &ModelParams) -> f64 {
    residual_sup_on_grid(params, &sol.trajectory.xs, &sol.trajectory.ws, &sol.trajectory.ys)
}

/// Residual with `Q''` taken from the first-order system right-hand side
/// instead. The substitution cancels the equation algebraically, so this is
/// machine zero in exact arithmetic; it is kept as a consistency check
/// against the central-difference route.
pub fn hjb_residual_analytic(sol: &HjbSolution, params: &ModelParams) -> f64 {
    let margin_c = if params.a1 > 1.0 {
        params.margin_constant().expect("a1 > 1")
    } else {
        0.0
    };
    let rhs = OdeRhs {
        p: params,
        two_over_sigma2: 2.0 / (params.sigma * params.sigma),
        gg: params.gamma / (params.gamma - 1.0),
        margin_c,
    };
    let t = &sol.trajectory;
    let n = t.xs.len();
    if n < 5 {
        return f64::NAN;
    }
    let mut sup: f64 = 0.0;
    for i in 2..=n - 3 {
        let (_, qpp) = rhs.eval(t.xs[i], t.ys[i], t.ws[i]);
        sup = sup.max(residual_at(params, margin_c, t.xs[i], t.ys[i], t.ws[i], qpp));
    }
    sup
}

/// Shared residual kernel so manufactured series can be checked directly.
pub fn residual_sup_on_grid(params: &ModelParams, xs: &[f64], ws: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    if n < 5 {
        return f64::NAN;
    }
    let margin_c = if params.a1 > 1.0 {
        params.margin_constant().expect("a1 > 1")
    } else {
        0.0
    };
    let mut sup: f64 = 0.0;
    for i in 2..=n - 3 {
        let h_left = xs[i] - xs[i - 1];
        let h_right = xs[i + 1] - xs[i];
        let qpp = (ws[i + 1] - ws[i - 1]) / (h_left + h_right);
        sup = sup.max(residual_at(params, margin_c, xs[i], ys[i], ws[i], qpp));
    }
    sup
}

#[inline]
fn residual_at(params: &ModelParams, margin_c: f64, x: f64, q: f64, qp: f64, qpp: f64) -> f64 {
    let res = 0.5 * params.sigma * params.sigma * qpp
        + (params.gamma - 1.0)
            * (1.0 - x).powf(params.gamma / (params.gamma - 1.0))
            * params.investment_response(qp)
        - params.delta * x * qp
        + params.sales_profit_with_margin(x, margin_c)
        - params.alpha * q;
    res.abs() / (1.0 + (params.alpha * q).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ModelParams {
        ModelParams::default()
    }

    fn quick_cfg() -> ShootConfig {
        ShootConfig {
            grid_n: 2000,
            ..ShootConfig::default()
        }
    }

    #[test]
    fn initial_conditions_are_exact() {
        let p = reference();
        let t = integrate_w(0.0, &p, &quick_cfg()).unwrap();
        assert_eq!(t.ws[0], p.c_l);
        assert_eq!(t.ys[0], t.k_const);
        // K_0 = (gamma-1) F(C_L) / alpha = 16 * 0.5^1.25
        assert!((t.k_const - 6.727171322029716).abs() < 1e-12);
        assert!(t.xs.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(t.xs[0], 0.0);
    }

    #[test]
    fn k_const_is_affine_in_k() {
        let p = reference();
        let t0 = integrate_w(0.0, &p, &quick_cfg()).unwrap();
        let t1 = integrate_w(1.0, &p, &quick_cfg()).unwrap();
        // slope sigma^2 / (2 alpha) = 4 for the reference set
        assert!((t1.k_const - t0.k_const - 4.0).abs() < 1e-12);
    }

    #[test]
    fn classify_synthetic_series() {
        let xs: Vec<f64> = (0..5).map(|i| i as f64 * 0.1).collect();
        let constant = vec![0.5; 5];
        assert_eq!(
            classify_series(&xs, &constant, false),
            TrajectoryClass::PositiveNoMax
        );

        let humped = vec![0.5, 0.6, 0.4, 0.2, 0.1];
        assert_eq!(
            classify_series(&xs, &humped, false),
            TrajectoryClass::PositiveWithLocalMax
        );

        let crossing = vec![0.5, 0.2, -0.1, -0.3, -0.4];
        match classify_series(&xs, &crossing, false) {
            TrajectoryClass::CrossesEarly { crossing } => {
                // root of the segment from (0.1, 0.2) to (0.2, -0.1)
                let expected = 0.1 + 0.1 * (0.2 / 0.3);
                assert!((crossing - expected).abs() < 1e-12);
            }
            other => panic!("expected CrossesEarly, got {other:?}"),
        }
    }

    /// Reference set but with a market potential large enough that the
    /// crossing/local-max profile split around the root actually occurs.
    fn strong_market() -> ModelParams {
        ModelParams {
            a0: 8.0,
            ..ModelParams::default()
        }
    }

    #[test]
    fn profile_split_around_the_root_in_a_strong_market() {
        let p = strong_market();
        let lo = integrate_w(-0.5, &p, &quick_cfg()).unwrap();
        assert!(matches!(lo.class, TrajectoryClass::CrossesEarly { .. }));
        let hi = integrate_w(0.5, &p, &quick_cfg()).unwrap();
        assert_eq!(hi.class, TrajectoryClass::PositiveWithLocalMax);
        let sol = shoot_kstar(&p, &ShootConfig::default()).unwrap();
        assert!(
            sol.k_star > -0.5 && sol.k_star < 0.5,
            "strong-market k* = {}",
            sol.k_star
        );
        assert_eq!(sol.trajectory.class, TrajectoryClass::PositiveWithLocalMax);
    }

    #[test]
    fn crossing_is_not_tangential() {
        let p = strong_market();
        let cfg = quick_cfg();
        for k in [-0.5, -0.8, -1.5, -3.0] {
            let t = integrate_w(k, &p, &cfg).unwrap();
            if let TrajectoryClass::CrossesEarly { crossing } = t.class {
                let i = t.ws.iter().position(|&w| w < 0.0).unwrap();
                let slope = (t.ws[i] - t.ws[i - 1]) / (t.xs[i] - t.xs[i - 1]);
                assert!(slope < -1e-6, "k={k}: slope {slope} at crossing {crossing}");
            } else {
                panic!("k={k} should cross, got {:?}", t.class);
            }
        }
    }

    #[test]
    fn sigma_zero_is_rejected() {
        let p = ModelParams {
            sigma: 0.0,
            ..reference()
        };
        assert!(matches!(
            integrate_w(0.0, &p, &quick_cfg()),
            Err(Error::Solver(_))
        ));
    }

    #[test]
    fn shoot_reference_problem() {
        let p = reference();
        let sol = shoot_kstar(&p, &ShootConfig::default()).unwrap();
        // root located independently with scipy RK45 at rtol 1e-9: -1.7135
        assert!(
            sol.k_star > -1.72 && sol.k_star < -1.705,
            "k* = {}",
            sol.k_star
        );
        assert!(sol.trajectory.terminal_value().abs() <= 1e-6);
        let min_w = sol.trajectory.ws.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min_w >= -1e-6);
    }

    #[test]
    fn shoot_agrees_across_brackets() {
        let p = reference();
        let narrow = shoot_kstar(
            &p,
            &ShootConfig {
                k_lo: -0.5,
                k_hi: 0.5,
                ..ShootConfig::default()
            },
        )
        .unwrap();
        let wide = shoot_kstar(
            &p,
            &ShootConfig {
                k_lo: -8.0,
                k_hi: 8.0,
                ..ShootConfig::default()
            },
        )
        .unwrap();
        assert!(
            (narrow.k_star - wide.k_star).abs() <= 2.0 * ShootConfig::default().tol_k,
            "narrow {} vs wide {}",
            narrow.k_star,
            wide.k_star
        );
    }

    #[test]
    fn comparison_property_on_random_slope_pairs() {
        use rand::{Rng, SeedableRng};
        let p = reference();
        let cfg = quick_cfg();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..12 {
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            if (a - b).abs() < 1e-9 {
                continue;
            }
            let (k2, k1) = if a < b { (a, b) } else { (b, a) };
            let t1 = integrate_w(k1, &p, &cfg).unwrap();
            let t2 = integrate_w(k2, &p, &cfg).unwrap();
            let m = t1.ws.len().min(t2.ws.len());
            for i in 0..m {
                assert!(
                    t1.ws[i] >= t2.ws[i] - 1e-9,
                    "comparison violated at x={} for k1={k1}, k2={k2}",
                    t1.xs[i]
                );
            }
        }
    }

    #[test]
    fn terminal_value_is_monotone_in_k() {
        let p = reference();
        let cfg = quick_cfg();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=16 {
            let k = -2.0 + 4.0 * i as f64 / 16.0;
            let g = integrate_w(k, &p, &cfg).unwrap().terminal_value();
            assert!(
                g >= prev - 1e-9,
                "terminal map decreased at k={k}: {prev} -> {g}"
            );
            prev = g;
        }
    }

    #[test]
    fn y_is_the_running_integral_of_w() {
        let p = reference();
        let sol = shoot_kstar(&p, &ShootConfig::default()).unwrap();
        let t = &sol.trajectory;
        // trapezoid reconstruction carries its own O(h^2) error, which
        // dominates the RK4 solution error by orders of magnitude
        let mut acc = t.k_const;
        let mut worst: f64 = 0.0;
        for i in 1..t.xs.len() {
            let h = t.xs[i] - t.xs[i - 1];
            acc += 0.5 * h * (t.ws[i] + t.ws[i - 1]);
            worst = worst.max((acc - t.ys[i]).abs());
        }
        assert!(worst <= 1e-6, "trapezoid reconstruction off by {worst}");
    }

    #[test]
    fn manufactured_constant_solution_residual() {
        // Q = kappa constant, Q' = Q'' = 0: residual reduces to |G - alpha kappa| / (1 + |alpha kappa|)
        let p = reference();
        let kappa = 2.0;
        let n = 500usize;
        let h = (1.0 - 1e-3) / n as f64;
        let xs: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let ws = vec![0.0; n + 1];
        let ys = vec![kappa; n + 1];
        let got = residual_sup_on_grid(&p, &xs, &ws, &ys);
        let mut expected: f64 = 0.0;
        for x in &xs[2..=xs.len() - 3] {
            let g = p.max_sales_profit(*x).unwrap();
            expected = expected.max((g - p.alpha * kappa).abs() / (1.0 + (p.alpha * kappa).abs()));
        }
        assert!((got - expected).abs() <= 1e-12, "got {got}, expected {expected}");
    }

    #[test]
    fn analytic_route_is_machine_zero_and_tracks_central_difference() {
        let p = reference();
        let sol = shoot_kstar(&p, &ShootConfig::default()).unwrap();
        let analytic = hjb_residual_analytic(&sol, &p);
        assert!(analytic <= 1e-11, "analytic residual {analytic}");
        let central = hjb_residual(&sol, &p);
        assert!(central.is_finite() && central >= 0.0);
        // the two routes differ only by the O(h^2) derivative estimate
        let sol2 = shoot_kstar(
            &p,
            &ShootConfig {
                grid_n: 8000,
                ..ShootConfig::default()
            },
        )
        .unwrap();
        let central2 = hjb_residual(&sol2, &p);
        let d1 = (central - analytic).abs();
        let d2 = (hjb_residual_analytic(&sol2, &p) - central2).abs();
        assert!(
            d2 <= d1 / 1.9 + 1e-12,
            "difference did not shrink near O(h^2): {d1} -> {d2}"
        );
    }

    #[test]
    fn kstar_stable_under_grid_refinement() {
        let p = reference();
        let base = ShootConfig::default();
        let coarse = shoot_kstar(&p, &base).unwrap();
        let fine = shoot_kstar(
            &p,
            &ShootConfig {
                grid_n: base.grid_n * 2,
                ..base
            },
        )
        .unwrap();
        assert!(
            (coarse.k_star - fine.k_star).abs() < 4.0 * base.tol_k,
            "k* moved from {} to {}",
            coarse.k_star,
            fine.k_star
        );
    }

    #[test]
    fn interp_hits_nodes_exactly_and_averages_midpoints() {
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x + 1.0).collect();
        for (i, &x) in xs.iter().enumerate() {
            assert_eq!(interp_grid(&xs, &ys, x), ys[i]);
        }
        for i in 0..xs.len() - 1 {
            let mid = 0.5 * (xs[i] + xs[i + 1]);
            let avg = 0.5 * (ys[i] + ys[i + 1]);
            assert!((interp_grid(&xs, &ys, mid) - avg).abs() < 1e-12);
        }
        // constant extension outside the grid
        assert_eq!(interp_grid(&xs, &ys, -1.0), ys[0]);
        assert_eq!(interp_grid(&xs, &ys, 2.0), ys[10]);
    }
}

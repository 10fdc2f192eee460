//! Feedback controls.
//!
//! From a solved value function the optimal controls are closed-form:
//! investment `u*(r) = F((1-r) Q'(r))` and price
//! `p*(r) = a1 c_v (1-r) / (a1 - 1)` in the elastic regime, or the cap `p0`
//! when `a1 <= 1`. Reference policies (zero investment, fixed controls) and a
//! brute-force Hamiltonian maximizer are provided as test surfaces for the
//! optimality properties.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hjb::{interp_grid, HjbSolution};
use crate::model::ModelParams;

/// Floor applied to the elastic-regime price formula, which tends to zero as
/// r -> 1 while demand `p^(-a1)` is singular at p = 0. The profit limit is
/// zero either way, so the floor is economically inert.
pub const PRICE_FLOOR: f64 = 1e-9;

/// Discriminates policy flavors without exposing their payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyKind {
    Optimal,
    Zero,
    Fixed,
}

#[derive(Debug, Clone)]
enum Kind {
    /// Feedback controls through an interpolated, clamped `Q'`.
    Optimal { xs: Vec<f64>, qprime: Vec<f64> },
    /// No investment; price pinned at cost recovery (`p = c_v`).
    Zero,
    /// Constant controls.
    Fixed { u: f64, p: f64 },
}

/// An executable control rule mapping the recycling rate to `(u, p)`.
/// Immutable after construction and cheap to evaluate concurrently.
#[derive(Debug, Clone)]
pub struct Policy {
    params: ModelParams,
    kind: Kind,
}

impl Policy {
    /// Optimal feedback policy from a solved value function: `Q'` is kept as
    /// a piecewise-linear interpolant on the solver grid, clamped to be
    /// nonnegative and extended by its last value beyond `1 - eps`.
    pub fn from_solution(sol: &HjbSolution, params: &ModelParams) -> Policy {
        Self::from_qprime_series(&sol.trajectory.xs, &sol.trajectory.ws, params)
    }

    /// Same construction from a raw trajectory, also used for deliberately
    /// sub- or super-optimal slopes in comparison experiments. Negative
    /// values are clamped to zero, which keeps the investment response well
    /// defined (piecewise-linear interpolation preserves nonnegativity).
    pub fn from_qprime_series(xs: &[f64], ws: &[f64], params: &ModelParams) -> Policy {
        assert_eq!(xs.len(), ws.len());
        assert!(!xs.is_empty());
        Policy {
            params: *params,
            kind: Kind::Optimal {
                xs: xs.to_vec(),
                qprime: ws.iter().map(|w| w.max(0.0)).collect(),
            },
        }
    }

    /// Zero investment with cost-recovery pricing (`p = c_v`, so the margin
    /// is `r c_v >= 0` and profit vanishes when the state sits at zero).
    pub fn zero(params: &ModelParams) -> Policy {
        Policy {
            params: *params,
            kind: Kind::Zero,
        }
    }

    /// Constant controls, validated once here so evaluation stays total.
    pub fn fixed(params: &ModelParams, u: f64, p: f64) -> Result<Policy> {
        if !(u >= 0.0 && u.is_finite()) {
            return Err(Error::Domain(format!("fixed investment must be >= 0, got {u}")));
        }
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Domain(format!("fixed price must be positive, got {p}")));
        }
        Ok(Policy {
            params: *params,
            kind: Kind::Fixed { u, p },
        })
    }

    pub fn kind(&self) -> PolicyKind {
        match self.kind {
            Kind::Optimal { .. } => PolicyKind::Optimal,
            Kind::Zero => PolicyKind::Zero,
            Kind::Fixed { .. } => PolicyKind::Fixed,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            Kind::Optimal { .. } => "optimal".to_string(),
            Kind::Zero => "zero".to_string(),
            Kind::Fixed { u, p } => format!("fixed(u={u},p={p})"),
        }
    }

    /// Interpolated `Q'` at `r`, present only for optimal-flavor policies.
    pub fn qprime_at(&self, r: f64) -> Option<f64> {
        match &self.kind {
            Kind::Optimal { xs, qprime } => Some(interp_grid(xs, qprime, r)),
            _ => None,
        }
    }

    /// Controls `(u, p)` applied at recycling rate `r`. Outputs always
    /// satisfy `u >= 0` and `p > 0`.
    #[inline]
    pub fn controls(&self, r: f64) -> (f64, f64) {
        match &self.kind {
            Kind::Optimal { xs, qprime } => {
                let qp = interp_grid(xs, qprime, r);
                (
                    optimal_investment(&self.params, r, qp),
                    optimal_price(&self.params, r),
                )
            }
            Kind::Zero => (0.0, self.params.c_v),
            Kind::Fixed { u, p } => (*u, *p),
        }
    }
}

/// Price rule extracted from the first-order condition:
/// `a1 c_v (1-r) / (a1-1)` floored at [`PRICE_FLOOR`] for a1 > 1, the cap
/// `p0` otherwise (the profit term is increasing in p in that regime).
#[inline]
pub fn optimal_price(params: &ModelParams, r: f64) -> f64 {
    if params.a1 > 1.0 {
        (params.a1 * params.c_v * (1.0 - r) / (params.a1 - 1.0)).max(PRICE_FLOOR)
    } else {
        params.p0
    }
}

/// Investment rule `u* = F((1-r) * qprime)`; zero at `r = 1` or `Q' = 0`.
#[inline]
pub fn optimal_investment(params: &ModelParams, r: f64, qprime_at_r: f64) -> f64 {
    params.investment_response((1.0 - r) * qprime_at_r)
}

/// The supremand of the HJB equation at state `r` with value data
/// `(q, qp, qpp)`:
/// `sigma^2/2 qpp + qp R(u, r) + pi(p, u, r) - alpha q`.
pub fn hamiltonian(
    params: &ModelParams,
    u: f64,
    p: f64,
    r: f64,
    q: f64,
    qp: f64,
    qpp: f64,
) -> Result<f64> {
    let drift = params.drift(u, r)?;
    let profit = params.profit(p, u, r)?;
    Ok(0.5 * params.sigma * params.sigma * qpp + qp * drift + profit - params.alpha * q)
}

/// Grid argmax of the Hamiltonian over `[0, u_max] x [PRICE_FLOOR, p_max]`
/// on a `(grid+1) x (grid+1)` lattice, deterministic tie-break toward the
/// lexicographically smaller `(u, p)`. An oracle for the closed-form rules,
/// deliberately independent of them.
#[allow(clippy::too_many_arguments)]
pub fn argmax_hamiltonian_bruteforce(
    params: &ModelParams,
    r: f64,
    q: f64,
    qp: f64,
    qpp: f64,
    u_max: f64,
    p_max: f64,
    grid: usize,
) -> (f64, f64) {
    assert!(u_max > 0.0 && p_max > PRICE_FLOOR, "positive control bounds");
    assert!(grid >= 100, "lattice must have at least 100 cells per axis");
    let mut best = (0.0, PRICE_FLOOR);
    let mut best_h = f64::NEG_INFINITY;
    for i in 0..=grid {
        let u = i as f64 * u_max / grid as f64;
        for j in 0..=grid {
            let p = if j == grid {
                p_max
            } else {
                PRICE_FLOOR + j as f64 * (p_max - PRICE_FLOOR) / grid as f64
            };
            let h = hamiltonian(params, u, p, r, q, qp, qpp).expect("lattice stays in domain");
            if h > best_h {
                best_h = h;
                best = (u, p);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::{shoot_kstar, ShootConfig};

    fn reference() -> ModelParams {
        ModelParams::default()
    }

    fn inelastic() -> ModelParams {
        ModelParams {
            a1: 0.3,
            ..ModelParams::default()
        }
    }

    #[test]
    fn price_rule_examples() {
        let p = reference();
        assert!((optimal_price(&p, 0.5) - 1.1).abs() < 1e-12);
        assert_eq!(optimal_price(&p, 1.0), PRICE_FLOOR);
        let q = inelastic();
        assert_eq!(optimal_price(&q, 0.0), 1.0);
        assert_eq!(optimal_price(&q, 0.73), 1.0);
    }

    #[test]
    fn price_rule_is_affine_with_the_closed_form_slope() {
        let p = reference();
        let slope = -p.a1 * p.c_v / (p.a1 - 1.0);
        let mut prev = optimal_price(&p, 0.0);
        for i in 1..=20 {
            let r = 0.04 * i as f64; // stay away from the floor region
            let v = optimal_price(&p, r);
            assert!(v < prev, "p* must strictly decrease");
            let expected = optimal_price(&p, 0.0) + slope * r;
            assert!((v - expected).abs() < 1e-12);
            prev = v;
        }
    }

    #[test]
    fn investment_rule_examples() {
        let p = reference();
        assert_eq!(optimal_investment(&p, 0.3, 0.0), 0.0);
        assert_eq!(optimal_investment(&p, 1.0, 0.7), 0.0);
        assert!((optimal_investment(&p, 0.0, 0.5) - 0.42044820762685727).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_trivial_values() {
        let p = reference();
        assert_eq!(hamiltonian(&p, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        // only the profit term survives: D(1, 1) = 1, margin 1
        assert_eq!(hamiltonian(&p, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0).unwrap(), 1.0);
        assert!(hamiltonian(&p, -1.0, 1.0, 0.5, 0.0, 0.0, 0.0).is_err());
        assert!(hamiltonian(&p, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn closed_form_controls_are_stationary_points() {
        let p = reference();
        let (r, q, qp, qpp) = (0.5, 1.0, 0.3, -0.2);
        let u_star = optimal_investment(&p, r, qp);
        let p_star = optimal_price(&p, r);
        let h = 1e-5;
        let du = (hamiltonian(&p, u_star + h, p_star, r, q, qp, qpp).unwrap()
            - hamiltonian(&p, u_star - h, p_star, r, q, qp, qpp).unwrap())
            / (2.0 * h);
        assert!(du.abs() < 1e-8, "dH/du = {du}");
        let dp = (hamiltonian(&p, u_star, p_star + h, r, q, qp, qpp).unwrap()
            - hamiltonian(&p, u_star, p_star - h, r, q, qp, qpp).unwrap())
            / (2.0 * h);
        assert!(dp.abs() < 1e-8, "dH/dp = {dp}");
    }

    #[test]
    fn stationarity_holds_across_interior_states() {
        let p = reference();
        for i in 1..=8 {
            let r = 0.1 * i as f64;
            for qp in [0.1, 0.3, 0.6] {
                let u_star = optimal_investment(&p, r, qp);
                let p_star = optimal_price(&p, r);
                let h = 1e-5;
                let h_at = |u: f64, pr: f64| hamiltonian(&p, u, pr, r, 0.5, qp, 0.0).unwrap();
                let scale = 1.0 + h_at(u_star, p_star).abs();
                let du = (h_at(u_star + h, p_star) - h_at(u_star - h, p_star)) / (2.0 * h);
                let dp = (h_at(u_star, p_star + h) - h_at(u_star, p_star - h)) / (2.0 * h);
                assert!(du.abs() <= 1e-6 * scale, "r={r} qp={qp}: dH/du={du}");
                assert!(dp.abs() <= 1e-6 * scale, "r={r} qp={qp}: dH/dp={dp}");
            }
        }
    }

    #[test]
    fn bruteforce_oracle_boundary_behaviors() {
        let p = reference();
        // no marginal value of the state: investing only costs
        let (u, _) = argmax_hamiltonian_bruteforce(&p, 0.5, 0.0, 0.0, 0.0, 1.0, 3.0, 100);
        assert_eq!(u, 0.0);
        // inelastic demand: the price boundary is optimal for any r > 0
        let q = inelastic();
        let (_, pr) = argmax_hamiltonian_bruteforce(&q, 0.5, 0.0, 0.3, 0.0, 1.0, q.p0, 100);
        assert_eq!(pr, q.p0);
    }

    #[test]
    fn bruteforce_oracle_matches_closed_form_at_solved_qprime() {
        let p = reference();
        let sol = shoot_kstar(&p, &ShootConfig::default()).unwrap();
        let r = 0.5;
        let qp = sol.qprime_at(r);
        let q = sol.value_at(r);
        let (u_max, p_max, grid) = (1.0, 3.0, 400);
        let (u_bf, p_bf) = argmax_hamiltonian_bruteforce(&p, r, q, qp, 0.0, u_max, p_max, grid);
        let u_star = optimal_investment(&p, r, qp);
        let p_star = optimal_price(&p, r);
        assert!((u_bf - u_star).abs() <= u_max / grid as f64);
        assert!((p_bf - p_star).abs() <= p_max / grid as f64);
    }

    #[test]
    fn policy_interpolant_basics() {
        let p = reference();
        let xs = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let ws = vec![0.5, 0.4, -0.1, 0.2, 0.0];
        let pol = Policy::from_qprime_series(&xs, &ws, &p);
        // clamped at zero, nodes exact, midpoints average
        assert_eq!(pol.qprime_at(0.5).unwrap(), 0.0);
        assert_eq!(pol.qprime_at(0.25).unwrap(), 0.4);
        assert!((pol.qprime_at(0.125).unwrap() - 0.45).abs() < 1e-12);
        for i in 0..=100 {
            let r = i as f64 / 100.0;
            assert!(pol.qprime_at(r).unwrap() >= 0.0);
            let (u, price) = pol.controls(r);
            assert!(u >= 0.0 && price > 0.0);
        }
    }

    #[test]
    fn reference_policies() {
        let p = reference();
        let zero = Policy::zero(&p);
        assert_eq!(zero.controls(0.4), (0.0, p.c_v));
        assert_eq!(zero.kind(), PolicyKind::Zero);
        let fixed = Policy::fixed(&p, 1.0, 2.0).unwrap();
        assert_eq!(fixed.controls(0.9), (1.0, 2.0));
        assert!(Policy::fixed(&p, -0.1, 2.0).is_err());
        assert!(Policy::fixed(&p, 0.1, 0.0).is_err());
    }

    #[test]
    fn optimal_policy_vanishing_investment_at_upper_boundary() {
        let p = reference();
        let sol = shoot_kstar(&p, &ShootConfig::default()).unwrap();
        let pol = Policy::from_solution(&sol, &p);
        let (u, _) = pol.controls(1.0);
        assert_eq!(u, 0.0);
    }
}

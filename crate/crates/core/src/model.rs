//! Economic primitives: parameter set, recycling drift, Cobb-Douglas demand,
//! instantaneous profit, and the auxiliary functions that close the HJB
//! equation in both price-elasticity regimes.
//!
//! Conventions:
//! - the state `r` is the recycling rate in `[0, 1]`,
//! - `u >= 0` is the recycling investment rate, `p > 0` the product price,
//! - drift `R(u, r) = gamma * u^(1/gamma) * (1 - r) - delta * r`,
//! - demand `D(p, r) = a0 * p^(-a1) * r^(a2)`,
//! - profit `pi(p, u, r) = [p - (1 - r) * c_v] * D(p, r) - u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All model constants. `sigma` is the volatility itself; configs that quote
/// a variance should take the square root before constructing this.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Recycling-investment efficiency exponent, > 1.
    pub gamma: f64,
    /// Proportional decay rate of the recycling rate, > 0.
    pub delta: f64,
    /// Diffusion volatility, >= 0.
    pub sigma: f64,
    /// Discount rate, > 0.
    pub alpha: f64,
    /// Market potential, > 0.
    pub a0: f64,
    /// Demand price-sensitivity exponent, > 0.
    pub a1: f64,
    /// Demand greenness-sensitivity exponent, > 0.
    pub a2: f64,
    /// Unit cost of virgin resources, > 0.
    pub c_v: f64,
    /// Price cap, binding only in the inelastic regime a1 <= 1.
    pub p0: f64,
    /// Per-unit local-time penalty at the lower boundary, > 0.
    pub c_l: f64,
}

impl Default for ModelParams {
    /// Reference elastic-demand parameter set (sigma^2 = 2).
    fn default() -> Self {
        ModelParams {
            gamma: 5.0,
            delta: 0.5,
            sigma: std::f64::consts::SQRT_2,
            alpha: 0.25,
            a0: 1.0,
            a1: 1.1,
            a2: 5.0,
            c_v: 0.2,
            p0: 1.0,
            c_l: 0.5,
        }
    }
}

/// `base^e` with a cheap path for small integer exponents (a2 = 5 in the
/// reference setup). Both demand and the sales-profit term route through
/// this so the two stay bitwise consistent.
#[inline]
fn pow_e(base: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && (0.0..=16.0).contains(&e) {
        base.powi(e as i32)
    } else {
        base.powf(e)
    }
}

impl ModelParams {
    /// Checks every parameter invariant, naming the violated one on failure.
    pub fn validate(&self) -> Result<()> {
        fn finite(name: &str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} must be finite")))
            }
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("sigma", self.sigma),
            ("alpha", self.alpha),
            ("a0", self.a0),
            ("a1", self.a1),
            ("a2", self.a2),
            ("c_v", self.c_v),
            ("p0", self.p0),
            ("c_l", self.c_l),
        ] {
            finite(name, v)?;
        }
        if self.gamma <= 1.0 {
            return Err(Error::Validation("gamma must exceed 1".into()));
        }
        if self.delta <= 0.0 {
            return Err(Error::Validation("delta must be positive".into()));
        }
        if self.sigma < 0.0 {
            return Err(Error::Validation("sigma must be nonnegative".into()));
        }
        if self.alpha <= 0.0 {
            return Err(Error::Validation("alpha must be positive".into()));
        }
        for (name, v) in [
            ("a0", self.a0),
            ("a1", self.a1),
            ("a2", self.a2),
            ("c_v", self.c_v),
            ("p0", self.p0),
            ("c_l", self.c_l),
        ] {
            if v <= 0.0 {
                return Err(Error::Validation(format!("{name} must be positive")));
            }
        }
        if self.a1 <= 1.0 && self.p0 < self.c_v {
            return Err(Error::Validation(
                "p0 must be >= c_v when a1 <= 1".into(),
            ));
        }
        Ok(())
    }

    /// `validate`, but returns the parameter set by value for chaining.
    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// Recycling drift `R(u, r) = gamma * u^(1/gamma) * (1 - r) - delta * r`.
    pub fn drift(&self, u: f64, r: f64) -> Result<f64> {
        if u.is_nan() || u < 0.0 {
            return Err(Error::Domain(format!("investment u must be >= 0, got {u}")));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Domain(format!("recycling rate r must lie in [0, 1], got {r}")));
        }
        Ok(self.drift_raw(u, r))
    }

    #[inline]
    pub(crate) fn drift_raw(&self, u: f64, r: f64) -> f64 {
        self.gamma * u.powf(1.0 / self.gamma) * (1.0 - r) - self.delta * r
    }

    /// Cobb-Douglas demand `D(p, r) = a0 * p^(-a1) * r^(a2)`.
    pub fn demand(&self, p: f64, r: f64) -> Result<f64> {
        if p.is_nan() || p <= 0.0 {
            return Err(Error::Domain(format!("price p must be positive, got {p}")));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Domain(format!("recycling rate r must lie in [0, 1], got {r}")));
        }
        Ok(self.demand_raw(p, r))
    }

    #[inline]
    pub(crate) fn demand_raw(&self, p: f64, r: f64) -> f64 {
        self.a0 * p.powf(-self.a1) * pow_e(r, self.a2)
    }

    /// Instantaneous profit `[p - (1 - r) * c_v] * D(p, r) - u`.
    pub fn profit(&self, p: f64, u: f64, r: f64) -> Result<f64> {
        if u.is_nan() || u < 0.0 {
            return Err(Error::Domain(format!("investment u must be >= 0, got {u}")));
        }
        self.demand(p, r)?;
        Ok(self.profit_raw(p, u, r))
    }

    #[inline]
    pub(crate) fn profit_raw(&self, p: f64, u: f64, r: f64) -> f64 {
        (p - (1.0 - r) * self.c_v) * self.demand_raw(p, r) - u
    }

    /// Optimal-investment response `F(x) = x^(gamma/(gamma-1))` for `x >= 0`,
    /// zero on the negative axis. The optimal investment is `F((1-r) * Q'(r))`.
    #[inline]
    pub fn investment_response(&self, x: f64) -> f64 {
        if x >= 0.0 {
            x.powf(self.gamma / (self.gamma - 1.0))
        } else {
            0.0
        }
    }

    /// Derivative of [`Self::investment_response`]:
    /// `gamma/(gamma-1) * x^(1/(gamma-1))` for `x >= 0`, zero below.
    #[inline]
    pub fn investment_response_deriv(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.gamma / (self.gamma - 1.0) * x.powf(1.0 / (self.gamma - 1.0))
        } else {
            0.0
        }
    }

    /// Coefficient of the price-optimized sales profit in the elastic regime:
    /// `c = a0 * c_v^(1-a1) * [(a1/(a1-1))^(1-a1) - (a1/(a1-1))^(-a1)]`.
    ///
    /// Defined (and strictly positive) only for a1 > 1.
    pub fn margin_constant(&self) -> Result<f64> {
        if self.a1 <= 1.0 {
            return Err(Error::Domain(
                "margin constant requires a1 > 1 (undefined at a1 <= 1)".into(),
            ));
        }
        let ratio = self.a1 / (self.a1 - 1.0);
        Ok(self.a0
            * self.c_v.powf(1.0 - self.a1)
            * (ratio.powf(1.0 - self.a1) - ratio.powf(-self.a1)))
    }

    /// Sales profit maximized over the price:
    /// `sup_p [p - (1-r) c_v] D(p, r)`, which is
    /// `c * (1-r)^(1-a1) * r^(a2)` for a1 > 1 (singular at r = 1) and
    /// `[p0 - c_v (1-r)] * a0 * p0^(-a1) * r^(a2)` for a1 <= 1 (cap binds).
    pub fn max_sales_profit(&self, r: f64) -> Result<f64> {
        if self.a1 > 1.0 {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Domain(format!(
                    "max sales profit requires r in [0, 1) when a1 > 1, got {r}"
                )));
            }
            let c = self.margin_constant()?;
            Ok(self.sales_profit_with_margin(r, c))
        } else {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Domain(format!("r must lie in [0, 1], got {r}")));
            }
            Ok(self.sales_profit_with_margin(r, 0.0))
        }
    }

    /// Same formula with the elastic-regime margin constant hoisted out, so the
    /// ODE right-hand side can avoid recomputing it every evaluation. The
    /// `margin_c` argument is ignored in the capped regime.
    #[inline]
    pub(crate) fn sales_profit_with_margin(&self, r: f64, margin_c: f64) -> f64 {
        if self.a1 > 1.0 {
            margin_c * (1.0 - r).powf(1.0 - self.a1) * pow_e(r, self.a2)
        } else {
            (self.p0 - self.c_v * (1.0 - r)) * self.a0 * self.p0.powf(-self.a1) * pow_e(r, self.a2)
        }
    }

    /// Derivative in `r` of [`Self::max_sales_profit`], valid on (0, 1).
    pub fn max_sales_profit_deriv(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain(format!(
                "max sales profit derivative requires r in (0, 1), got {r}"
            )));
        }
        if self.a1 > 1.0 {
            let c = self.margin_constant()?;
            Ok(c * (1.0 - r).powf(-self.a1)
                * pow_e(r, self.a2)
                * ((self.a1 - 1.0) + (1.0 - r) * self.a2 / r))
        } else {
            Ok(self.a0
                * self.p0.powf(-self.a1)
                * pow_e(r, self.a2)
                * (self.c_v + self.a2 / r * (self.p0 - self.c_v * (1.0 - r))))
        }
    }
}

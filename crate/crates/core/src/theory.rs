//! Closed-form high-dimensional limits of the vector-level statistics.
//!
//! Under weak dependence across coordinates, `rho_hat` between two points of
//! classes `I` and `J` converges as `d → ∞` to a constant determined by the
//! squared mean difference per coordinate `Δμ²`, the per-coordinate variances
//! and the sample sizes. These constants serve as an analytic oracle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    /// `lim (1/d) |μ_F - μ_G|²`
    pub dmu2: f64,
    pub sigma_f2: f64,
    pub sigma_g2: f64,
    pub m: usize,
    pub n: usize,
}

impl TheoryParams {
    pub fn new(dmu2: f64, sigma_f2: f64, sigma_g2: f64, m: usize, n: usize) -> Result<Self> {
        let p = Self {
            dmu2,
            sigma_f2,
            sigma_g2,
            m,
            n,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dmu2.is_finite() && self.dmu2 >= 0.0) {
            return Err(Error::invalid(format!("dmu2 must be finite and >= 0, got {}", self.dmu2)));
        }
        for (name, v) in [("sigma_f2", self.sigma_f2), ("sigma_g2", self.sigma_g2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.m == 0 || self.n == 0 {
            return Err(Error::invalid("m and n must be positive"));
        }
        Ok(())
    }

    /// Moment limits for a registry example. Only families with finite
    /// fourth moments qualify; the heavy-tailed ones are refused.
    pub fn for_example(id: u8, m: usize, n: usize) -> Result<Self> {
        match id {
            1 => Self::new(0.0, 1.0, 2.0, m, n),
            2..=5 => Err(Error::invalid(format!(
                "example {id} has a heavy-tailed marginal; its moment limits do not exist"
            ))),
            _ => Err(Error::invalid(format!("example id {id} not in 1..=5"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaConstants {
    pub theta_ff: f64,
    pub theta_gg: f64,
    pub theta_fg: f64,
    pub theta_star: f64,
}

pub fn theta_constants(p: &TheoryParams) -> Result<ThetaConstants> {
    p.validate()?;
    let total = p.dmu2 + p.sigma_f2 + p.sigma_g2;
    let q_g = (p.dmu2 + p.sigma_g2) / total;
    let q_f = (p.dmu2 + p.sigma_f2) / total;
    let (acos_g, acos_f) = (q_g.acos(), q_f.acos());
    let (m, n) = (p.m as f64, p.n as f64);
    let scale = PI * (m + n);
    let theta_ff = (m * PI / 3.0 + n * acos_g) / scale;
    let theta_gg = (m * acos_f + n * PI / 3.0) / scale;
    let theta_fg = 0.5 - (m * acos_g + n * acos_f) / (2.0 * scale);
    // m and n cancel in 2θ_FG - θ_FF - θ_GG
    let theta_star = 2.0 / 3.0 - (acos_g + acos_f) / PI;
    Ok(ThetaConstants {
        theta_ff,
        theta_gg,
        theta_fg,
        theta_star,
    })
}

/// `true` iff the limiting energy distance vanishes, i.e. no mean shift and
/// equal variances.
pub fn separation_is_zero(p: &TheoryParams) -> bool {
    p.dmu2 == 0.0 && p.sigma_f2 == p.sigma_g2
}

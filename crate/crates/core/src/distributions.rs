//! Marginal distributions of the simulation families.
//!
//! Each example draws every coordinate i.i.d. from one [`MarginalSpec`] per
//! class. `Cauchy { loc, scale }` takes the scale itself (not its square).

use ndarray::Array2;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatrsNormal, StudentsT};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalSpec {
    Normal {
        mean: f64,
        var: f64,
    },
    Cauchy {
        loc: f64,
        scale: f64,
    },
    StudentT {
        dof: f64,
    },
    Mixture {
        w1: f64,
        c1: Box<MarginalSpec>,
        w2: f64,
        c2: Box<MarginalSpec>,
    },
}

impl MarginalSpec {
    pub fn normal(mean: f64, var: f64) -> Self {
        MarginalSpec::Normal { mean, var }
    }

    pub fn cauchy(loc: f64, scale: f64) -> Self {
        MarginalSpec::Cauchy { loc, scale }
    }

    pub fn student_t(dof: f64) -> Self {
        MarginalSpec::StudentT { dof }
    }

    pub fn mixture(w1: f64, c1: MarginalSpec, w2: f64, c2: MarginalSpec) -> Self {
        MarginalSpec::Mixture {
            w1,
            c1: Box::new(c1),
            w2,
            c2: Box::new(c2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |cond: bool, msg: &str| if cond { Ok(()) } else { Err(Error::invalid(msg)) };
        match self {
            MarginalSpec::Normal { mean, var } => {
                ok(mean.is_finite() && var.is_finite() && *var > 0.0, "normal needs finite mean and var > 0")
            }
            MarginalSpec::Cauchy { loc, scale } => {
                ok(loc.is_finite() && scale.is_finite() && *scale > 0.0, "cauchy needs finite loc and scale > 0")
            }
            MarginalSpec::StudentT { dof } => ok(dof.is_finite() && *dof > 0.0, "student_t needs dof > 0"),
            MarginalSpec::Mixture { w1, c1, w2, c2 } => {
                ok(
                    *w1 >= 0.0 && *w2 >= 0.0 && (w1 + w2 - 1.0).abs() <= 1e-12,
                    "mixture weights must be nonnegative and sum to 1",
                )?;
                c1.validate()?;
                c2.validate()
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            MarginalSpec::Normal { mean, var } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + var.sqrt() * z
            }
            MarginalSpec::Cauchy { loc, scale } => {
                let u: f64 = Open01.sample(rng);
                loc + scale * (PI * (u - 0.5)).tan()
            }
            MarginalSpec::StudentT { dof } => {
                let z: f64 = StandardNormal.sample(rng);
                let chi2 = ChiSquared::new(*dof).expect("validated dof").sample(rng);
                z / (chi2 / dof).sqrt()
            }
            MarginalSpec::Mixture { w1, c1, c2, .. } => {
                let pick: f64 = rng.random();
                if pick < *w1 {
                    c1.draw(rng)
                } else {
                    c2.draw(rng)
                }
            }
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            MarginalSpec::Normal { mean, var } => {
                let r = x - mean;
                -0.5 * (2.0 * PI * var).ln() - r * r / (2.0 * var)
            }
            MarginalSpec::Cauchy { loc, scale } => {
                let r = (x - loc) / scale;
                -(PI * scale).ln() - (r * r).ln_1p()
            }
            MarginalSpec::StudentT { dof } => {
                ln_gamma((dof + 1.0) / 2.0)
                    - ln_gamma(dof / 2.0)
                    - 0.5 * (dof * PI).ln()
                    - (dof + 1.0) / 2.0 * (x * x / dof).ln_1p()
            }
            MarginalSpec::Mixture { w1, c1, w2, c2 } => {
                let a = w1.ln() + c1.log_density(x);
                let b = w2.ln() + c2.log_density(x);
                let hi = a.max(b);
                if hi == f64::NEG_INFINITY {
                    return hi;
                }
                hi + ((a - hi).exp() + (b - hi).exp()).ln()
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            MarginalSpec::Normal { mean, var } => {
                StatrsNormal::new(*mean, var.sqrt()).expect("validated normal").cdf(x)
            }
            MarginalSpec::Cauchy { loc, scale } => 0.5 + ((x - loc) / scale).atan() / PI,
            MarginalSpec::StudentT { dof } => StudentsT::new(0.0, 1.0, *dof).expect("validated dof").cdf(x),
            MarginalSpec::Mixture { w1, c1, w2, c2 } => w1 * c1.cdf(x) + w2 * c2.cdf(x),
        }
    }
}

/// `count × d` matrix of i.i.d. draws, filled row by row.
pub fn sample<R: Rng + ?Sized>(spec: &MarginalSpec, d: usize, count: usize, rng: &mut R) -> Result<Array2<f64>> {
    spec.validate()?;
    if d == 0 || count == 0 {
        return Err(Error::invalid("sample needs d >= 1 and count >= 1"));
    }
    let data: Vec<f64> = (0..d * count).map(|_| spec.draw(rng)).collect();
    Ok(Array2::from_shape_vec((count, d), data).expect("shape matches length"))
}

pub fn log_density(spec: &MarginalSpec, x: f64) -> f64 {
    spec.log_density(x)
}

/// A two-class simulation family with i.i.d. coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleSpec {
    /// `1..=5` for the registry entries, `0` for a custom pair.
    pub id: u8,
    pub f: MarginalSpec,
    pub g: MarginalSpec,
}

impl ExampleSpec {
    pub fn custom(f: MarginalSpec, g: MarginalSpec) -> Result<Self> {
        f.validate()?;
        g.validate()?;
        Ok(Self { id: 0, f, g })
    }

    /// Sum over coordinates of the class log-densities, `(log f(z), log g(z))`.
    pub fn log_densities(&self, z: &[f64]) -> (f64, f64) {
        let lf = z.iter().map(|&x| self.f.log_density(x)).sum();
        let lg = z.iter().map(|&x| self.g.log_density(x)).sum();
        (lf, lg)
    }
}

pub fn example_spec(id: u8) -> Result<ExampleSpec> {
    use MarginalSpec as M;
    let (f, g) = match id {
        1 => (M::normal(1.0, 1.0), M::normal(1.0, 2.0)),
        2 => (M::normal(0.0, 3.0), M::student_t(3.0)),
        3 => (M::cauchy(0.0, 1.0), M::cauchy(1.0, 1.0)),
        4 => (M::cauchy(1.0, 1.0), M::cauchy(1.0, 2.0)),
        5 => (
            M::mixture(0.9, M::normal(1.0, 1.0), 0.1, M::cauchy(4.0, 1.0)),
            M::mixture(0.9, M::normal(1.0, 2.0), 0.1, M::cauchy(4.0, 1.0)),
        ),
        _ => return Err(Error::invalid(format!("example id {id} not in 1..=5"))),
    };
    Ok(ExampleSpec { id, f, g })
}

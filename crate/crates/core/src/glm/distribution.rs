//! Conditional response distributions of the supported families.
//!
//! Both families are scale (Gaussian: location-scale) transforms of a
//! standard member that depends only on the dispersion: `y = loc + scale·t`.
//! Every row of a fitted model shares the same standard member, so the
//! conditional CDF is `G(standardize(y))` with a common increasing `G`.

use super::spec::Family;
use crate::error::{Error, Result};
use crate::roots::newton_bisect;
use crate::special::{ln_gamma, normal_cdf, normal_ln_pdf, regularized_lower_gamma};

const MAX_ROOT_ITER: usize = 2_000;

/// Standardized distribution shared by all rows of a fitted model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Standard {
    /// N(0, 1).
    Normal,
    /// Gamma with the given shape and unit rate.
    Gamma { shape: f64, ln_gamma_shape: f64 },
}

/// Shortest interval holding a given probability, with the CDF at its ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_prob: f64,
    pub upper_prob: f64,
}

impl Standard {
    pub fn gamma(shape: f64) -> Self {
        Standard::Gamma {
            shape,
            ln_gamma_shape: ln_gamma(shape),
        }
    }

    pub fn ln_pdf(&self, t: f64) -> f64 {
        match *self {
            Standard::Normal => normal_ln_pdf(t),
            Standard::Gamma {
                shape,
                ln_gamma_shape,
            } => {
                if t < 0.0 {
                    f64::NEG_INFINITY
                } else if t == 0.0 {
                    match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => 0.0,
                        _ => f64::NEG_INFINITY,
                    }
                } else {
                    (shape - 1.0) * t.ln() - t - ln_gamma_shape
                }
            }
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            Standard::Normal => normal_cdf(t),
            Standard::Gamma { shape, .. } => regularized_lower_gamma(shape, t),
        }
    }

    pub fn support_lower(&self) -> f64 {
        match self {
            Standard::Normal => f64::NEG_INFINITY,
            Standard::Gamma { .. } => 0.0,
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidInput(format!(
                "quantile probability {p} outside (0, 1)"
            )));
        }
        let ftol = 1e-15 * p.min(1.0 - p);
        match *self {
            Standard::Normal => {
                let (lo, hi) = if p < 0.5 { (-40.0, 0.0) } else { (0.0, 40.0) };
                newton_bisect(
                    |t| (normal_cdf(t) - p, normal_ln_pdf(t).exp()),
                    lo,
                    hi,
                    normal_quantile_guess(p),
                    ftol,
                    MAX_ROOT_ITER,
                )
            }
            Standard::Gamma { shape, .. } => {
                // search on s = ln t so tiny lower quantiles stay well resolved
                let mut hi = shape + 10.0 * shape.sqrt() + 10.0;
                while self.cdf(hi) < p {
                    hi *= 2.0;
                    if !hi.is_finite() {
                        return Err(Error::Numeric("gamma quantile bracket overflow".into()));
                    }
                }
                let guess = (shape.max(1e-3)
                    * (1.0 + 0.5 * normal_quantile_guess(p) / shape.sqrt()))
                .max(1e-12)
                .ln();
                let s = newton_bisect(
                    |s| {
                        let t = s.exp();
                        (self.cdf(t) - p, (self.ln_pdf(t) + s).exp())
                    },
                    -745.0,
                    hi.ln(),
                    guess,
                    ftol,
                    MAX_ROOT_ITER,
                )?;
                Ok(s.exp())
            }
        }
    }

    /// Shortest interval with probability `1 - alpha` under a unimodal
    /// standard density. When the density is non-increasing on its support
    /// (gamma shape ≤ 1) the lower end is pinned at the support infimum.
    pub fn min_length_interval(&self, alpha: f64) -> Result<HdInterval> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1)")));
        }
        match *self {
            Standard::Normal => {
                let z = self.quantile(1.0 - alpha / 2.0)?;
                Ok(HdInterval {
                    lower: -z,
                    upper: z,
                    lower_prob: alpha / 2.0,
                    upper_prob: 1.0 - alpha / 2.0,
                })
            }
            Standard::Gamma { shape, .. } if shape <= 1.0 => {
                let b = self.quantile(1.0 - alpha)?;
                Ok(HdInterval {
                    lower: 0.0,
                    upper: b,
                    lower_prob: 0.0,
                    upper_prob: 1.0 - alpha,
                })
            }
            Standard::Gamma { shape, .. } => self.gamma_interior_interval(shape, alpha),
        }
    }

    fn gamma_interior_interval(&self, shape: f64, alpha: f64) -> Result<HdInterval> {
        let mode = shape - 1.0;
        // log-density kernel without constants
        let kernel = |t: f64| (shape - 1.0) * t.ln() - t;
        let slope = |t: f64| (shape - 1.0) / t - 1.0;
        let target = 1.0 - alpha;

        // right-hand point with the same density as a
        let partner = |a: f64| -> Result<f64> {
            let level = kernel(a);
            let mut hi = mode.max(1.0) * 2.0 + 10.0;
            while kernel(hi) > level {
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::Numeric("density level bracket overflow".into()));
                }
            }
            newton_bisect(
                |b| (level - kernel(b), -slope(b)),
                mode,
                hi,
                0.5 * (mode + hi),
                1e-15 * level.abs().max(1.0),
                MAX_ROOT_ITER,
            )
        };

        let mut last: Option<(f64, f64)> = None;
        let start = self.quantile(alpha / 2.0)?.min(mode * (1.0 - 1e-9));
        let a = newton_bisect(
            |a| {
                if a <= 0.0 {
                    return (-target, 0.0);
                }
                match partner(a) {
                    Ok(b) => {
                        last = Some((a, b));
                        let mass = self.cdf(b) - self.cdf(a);
                        let dens = self.ln_pdf(a).exp();
                        let deriv = dens * (1.0 - slope(a) / slope(b));
                        (target - mass, deriv)
                    }
                    Err(_) => (f64::NAN, 0.0),
                }
            },
            0.0,
            mode,
            start,
            1e-14,
            MAX_ROOT_ITER,
        )?;
        let b = match last {
            Some((la, lb)) if la == a => lb,
            _ => partner(a)?,
        };
        Ok(HdInterval {
            lower: a,
            upper: b,
            lower_prob: self.cdf(a),
            upper_prob: self.cdf(b),
        })
    }
}

/// Rough normal quantile (Abramowitz & Stegun 26.2.23), used as a starting
/// point for Newton refinement.
fn normal_quantile_guess(p: f64) -> f64 {
    let q = p.min(1.0 - p);
    let t = (-2.0 * q.ln()).sqrt();
    let x = t
        - (2.515_517 + 0.802_853 * t + 0.010_328 * t * t)
            / (1.0 + 1.432_788 * t + 0.189_269 * t * t + 0.001_308 * t * t * t);
    if p < 0.5 {
        -x
    } else {
        x
    }
}

/// Response distribution at one predictor value: `y = loc + scale·t` with
/// `t` drawn from [`Standard`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditional {
    standard: Standard,
    loc: f64,
    scale: f64,
    ln_scale: f64,
}

impl Conditional {
    pub fn normal(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite() && mean.is_finite()) {
            return Err(Error::Infeasible(format!(
                "normal with mean {mean} and variance {variance}"
            )));
        }
        let scale = variance.sqrt();
        Ok(Self {
            standard: Standard::Normal,
            loc: mean,
            scale,
            ln_scale: scale.ln(),
        })
    }

    /// Gamma with the given shape and mean (rate = shape / mean).
    pub fn gamma(shape: f64, mean: f64) -> Result<Self> {
        Self::gamma_with(Standard::gamma(shape), mean)
    }

    /// Gamma sharing a precomputed standard member.
    pub(crate) fn gamma_with(standard: Standard, mean: f64) -> Result<Self> {
        let Standard::Gamma { shape, .. } = standard else {
            return Err(Error::InvalidInput("expected a gamma standard".into()));
        };
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::Infeasible(format!("gamma shape {shape}")));
        }
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::Infeasible(format!(
                "gamma mean {mean} is not strictly positive"
            )));
        }
        let scale = mean / shape;
        Ok(Self {
            standard,
            loc: 0.0,
            scale,
            ln_scale: scale.ln(),
        })
    }

    /// Same distribution moved to a new location.
    #[inline]
    pub(crate) fn shifted(&self, loc: f64) -> Self {
        Self { loc, ..*self }
    }

    pub fn family(&self) -> Family {
        match self.standard {
            Standard::Normal => Family::Gaussian,
            Standard::Gamma { .. } => Family::Gamma,
        }
    }

    pub fn standard(&self) -> &Standard {
        &self.standard
    }

    pub fn mean(&self) -> f64 {
        match self.standard {
            Standard::Normal => self.loc,
            Standard::Gamma { shape, .. } => shape * self.scale,
        }
    }

    /// Maps `y` to the standard scale; increasing in `y`.
    #[inline]
    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.loc) / self.scale
    }

    pub fn unstandardize(&self, t: f64) -> f64 {
        self.loc + self.scale * t
    }

    #[inline]
    pub fn ln_pdf(&self, y: f64) -> f64 {
        self.standard.ln_pdf(self.standardize(y)) - self.ln_scale
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.ln_pdf(y).exp()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.standard.cdf(self.standardize(y))
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        Ok(self.unstandardize(self.standard.quantile(p)?))
    }

    pub fn support_lower(&self) -> f64 {
        self.unstandardize(self.standard.support_lower())
    }

    pub fn min_length_interval(&self, alpha: f64) -> Result<HdInterval> {
        let std = self.standard.min_length_interval(alpha)?;
        Ok(self.map_interval(&std))
    }

    /// Maps an interval computed on the standard scale back to `y`.
    pub fn map_interval(&self, std: &HdInterval) -> HdInterval {
        HdInterval {
            lower: self.unstandardize(std.lower),
            upper: self.unstandardize(std.upper),
            ..*std
        }
    }
}

//! Special functions used by the Gaussian and Gamma families.
//!
//! `ln Γ` comes from statrs. The incomplete gamma functions are computed
//! here so that far lower tails stay accurate instead of flushing to zero,
//! which the gamma quantile search on the log scale relies on.

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Digamma ψ(x) = d/dx ln Γ(x) for `x > 0`.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + x.ln() - 0.5 * inv - series
}

/// Trigamma ψ'(x) for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        + 0.5 * inv2
        + inv
            * inv2
            * (1.0 / 6.0
                - inv2
                    * (1.0 / 30.0
                        - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0)))));
    acc + series
}

const GAMMA_EPS: f64 = 1e-17;
const GAMMA_MAX_ITER: usize = 100_000;
const FPMIN: f64 = 1e-300;

/// Regularized lower incomplete gamma P(s, x).
///
/// Series expansion for `x < s + 1`, Lentz continued fraction for the
/// upper tail otherwise.
pub fn regularized_lower_gamma(s: f64, x: f64) -> f64 {
    debug_assert!(s > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < s + 1.0 {
        lower_series(s, x)
    } else {
        1.0 - upper_fraction(s, x)
    }
}

/// Regularized upper incomplete gamma Q(s, x) = 1 − P(s, x), computed without
/// cancellation in the upper tail.
pub fn regularized_upper_gamma(s: f64, x: f64) -> f64 {
    debug_assert!(s > 0.0);
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < s + 1.0 {
        1.0 - lower_series(s, x)
    } else {
        upper_fraction(s, x)
    }
}

fn prefactor(s: f64, x: f64) -> f64 {
    (-x + s * x.ln() - ln_gamma(s)).exp()
}

fn lower_series(s: f64, x: f64) -> f64 {
    let mut denom = s;
    let mut term = 1.0 / s;
    let mut sum = term;
    for _ in 0..GAMMA_MAX_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    (sum * prefactor(s, x)).min(1.0)
}

fn upper_fraction(s: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (h * prefactor(s, x)).clamp(0.0, 1.0)
}

/// Error function, via erf(z) = P(1/2, z²).
pub fn erf(z: f64) -> f64 {
    let p = regularized_lower_gamma(0.5, z * z);
    if z < 0.0 {
        -p
    } else {
        p
    }
}

/// Complementary error function, accurate in both tails.
pub fn erfc(z: f64) -> f64 {
    if z < 0.0 {
        1.0 + regularized_lower_gamma(0.5, z * z)
    } else {
        regularized_upper_gamma(0.5, z * z)
    }
}

/// Standard normal distribution function Φ(z).
pub fn normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Log density of the standard normal.
pub fn normal_ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

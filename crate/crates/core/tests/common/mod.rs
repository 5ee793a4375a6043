//! Brute-force oracles shared by the integration tests and the acceptance
//! report.
#![allow(dead_code)]

use parconf::baseline::{kernel_conformal_region, KernelConfig};
use parconf::conformal::{ConformalConfig, IntervalUnion, SearchWindow};
use parconf::glm::{
    fit_mle, log_likelihood, score, Conditional, Dataset, Link, ModelParams, ModelSpec,
};
use parconf::parametric::{binned_region, transform_region};
use parconf::partition::BinPartition;
use statrs::distribution::{Continuous, ContinuousCDF, Gamma, Normal};
use statrs::statistics::Distribution;

pub const ORACLE_STEP: f64 = 0.0005;

/// Runs of accepted grid points as `(first, last)` pairs.
pub fn grid_runs(lo: f64, hi: f64, mut accept: impl FnMut(f64) -> bool) -> Vec<(f64, f64)> {
    let steps = ((hi - lo) / ORACLE_STEP).round() as usize;
    let mut runs = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for k in 0..=steps {
        let y = lo + k as f64 * ORACLE_STEP;
        if accept(y) {
            open = Some(match open {
                Some((a, _)) => (a, y),
                None => (y, y),
            });
        } else if let Some(run) = open.take() {
            runs.push(run);
        }
    }
    runs.extend(open);
    runs
}

/// A region next to its dense-grid oracle.
#[derive(Debug)]
pub struct OracleCase {
    pub name: &'static str,
    pub region: IntervalUnion,
    pub runs: Vec<(f64, f64)>,
    pub tolerance: f64,
}

impl OracleCase {
    /// Largest boundary difference, or `None` if the piece counts differ.
    pub fn gap(&self) -> Option<f64> {
        let pieces = self.region.pieces();
        if pieces.len() != self.runs.len() {
            return None;
        }
        Some(
            pieces
                .iter()
                .zip(&self.runs)
                .map(|(&(a, b), &(c, d))| (a - c).abs().max((b - d).abs()))
                .fold(0.0, f64::max),
        )
    }

    pub fn matches(&self) -> bool {
        self.gap().is_some_and(|g| g <= self.tolerance)
    }
}

fn explicit(alpha: f64, lo: f64, hi: f64) -> ConformalConfig {
    ConformalConfig {
        alpha,
        window: SearchWindow::Explicit { lo, hi },
        ..ConformalConfig::default()
    }
}

pub fn twelve_responses() -> Vec<f64> {
    vec![
        1.82, 0.47, 2.95, 1.13, -0.36, 2.21, 1.64, 0.88, 3.41, 1.97, 0.12, 2.58,
    ]
}

/// Closed-form gaussian MLE of an intercept-only model.
fn gaussian_mle(ys: &[f64]) -> Normal {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    Normal::new(mean, var.sqrt()).unwrap()
}

/// Order-statistic acceptance on probability-integral values.
fn snapped_accept(mut u: Vec<f64>, u_star: f64, u_lwr: f64, u_upr: f64) -> bool {
    let n = u.len();
    u.sort_by(f64::total_cmp);
    let lower_idx = ((n + 1) as f64 * u_lwr).floor() as usize;
    let upper_idx = (((n + 1) as f64 * u_upr).ceil() as usize).min(n);
    let lower = if lower_idx >= 1 {
        u[lower_idx - 1]
    } else {
        0.0
    };
    lower <= u_star && u_star <= u[upper_idx - 1]
}

/// Twelve intercept-only gaussian rows, one bin, alpha 0.3.
pub fn gaussian_binned_case() -> OracleCase {
    let ys = twelve_responses();
    let data = Dataset::response_only(ys.clone()).unwrap();
    let (alpha, lo, hi) = (0.3, -4.0, 7.0);
    let cfg = explicit(alpha, lo, hi);
    let part = BinPartition::uniform(0, 1).unwrap();
    let region = binned_region(&data, ModelSpec::gaussian(1).unwrap(), &part, &[], cfg)
        .unwrap()
        .region;
    let needed = (13.0 * alpha).floor() / 13.0;
    let runs = grid_runs(lo, hi, |y| {
        let mut aug = ys.clone();
        aug.push(y);
        let dist = gaussian_mle(&aug);
        let star = dist.pdf(y);
        let below = ys.iter().filter(|&&v| dist.pdf(v) <= star).count();
        (1 + below) as f64 / 13.0 >= needed
    });
    OracleCase {
        name: "binned gaussian",
        region,
        runs,
        tolerance: 2.0 * cfg.precision,
    }
}

/// Twelve intercept-only gaussian rows, alpha 0.3.
pub fn gaussian_transform_case() -> OracleCase {
    let ys = twelve_responses();
    let data = Dataset::response_only(ys.clone()).unwrap();
    let (alpha, lo, hi) = (0.3, -4.0, 7.0);
    let cfg = explicit(alpha, lo, hi);
    let region = transform_region(&data, ModelSpec::gaussian(1).unwrap(), &[], cfg)
        .unwrap()
        .region;
    let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
    let runs = grid_runs(lo, hi, |y| {
        let mut aug = ys.clone();
        aug.push(y);
        let dist = gaussian_mle(&aug);
        // symmetric density: the shortest interval is central
        let (m, s) = (dist.mean().unwrap(), dist.std_dev().unwrap());
        snapped_accept(
            ys.iter().map(|&v| dist.cdf(v)).collect(),
            dist.cdf(y),
            dist.cdf(m - z * s),
            dist.cdf(m + z * s),
        )
    });
    OracleCase {
        name: "transform gaussian",
        region,
        runs,
        tolerance: 2.0 * cfg.precision,
    }
}

const GAMMA_X: [f64; 10] = [0.05, 0.14, 0.23, 0.31, 0.42, 0.55, 0.61, 0.73, 0.86, 0.97];
const GAMMA_Y: [f64; 10] = [0.62, 1.91, 0.84, 1.35, 2.72, 1.18, 3.05, 1.74, 2.41, 4.12];

/// Cold (no warm start) gamma log-link fit of the data plus `(x0, y)`.
fn cold_gamma_fit(x0: f64, y: f64) -> (f64, f64, f64) {
    let data = Dataset::new(1, GAMMA_X.to_vec(), GAMMA_Y.to_vec()).unwrap();
    let spec = ModelSpec::gamma(Link::Log, 1).unwrap();
    let aug = data.augmented(&[x0], y).unwrap();
    let model = fit_mle(&spec, &aug.design(&spec).unwrap(), aug.response(), None).unwrap();
    (model.beta()[0], model.beta()[1], model.dispersion())
}

fn gamma_at(b0: f64, b1: f64, shape: f64, x: f64) -> Gamma {
    Gamma::new(shape, shape / (b0 + b1 * x).exp()).unwrap()
}

/// Ten gamma log-link rows at x = 0.5, alpha 0.3.
pub fn gamma_transform_case() -> OracleCase {
    let data = Dataset::new(1, GAMMA_X.to_vec(), GAMMA_Y.to_vec()).unwrap();
    let spec = ModelSpec::gamma(Link::Log, 1).unwrap();
    let (alpha, lo, hi, x0) = (0.3, 0.05, 6.0, 0.5);
    let cfg = explicit(alpha, lo, hi);
    let region = transform_region(&data, spec, &[x0], cfg).unwrap().region;
    let runs = grid_runs(lo, hi, |y| {
        let (b0, b1, shape) = cold_gamma_fit(x0, y);
        let here = gamma_at(b0, b1, shape, x0);
        let hd = Conditional::gamma(shape, (b0 + b1 * x0).exp())
            .unwrap()
            .min_length_interval(alpha)
            .unwrap();
        snapped_accept(
            GAMMA_X
                .iter()
                .zip(&GAMMA_Y)
                .map(|(&x, &v)| gamma_at(b0, b1, shape, x).cdf(v))
                .collect(),
            here.cdf(y),
            here.cdf(hd.lower),
            here.cdf(hd.upper),
        )
    });
    OracleCase {
        name: "transform gamma",
        region,
        runs,
        tolerance: 2.0 * cfg.precision,
    }
}

/// Ten gamma log-link rows at x = 0.5, one bin, alpha 0.3.
pub fn gamma_binned_case() -> OracleCase {
    let data = Dataset::new(1, GAMMA_X.to_vec(), GAMMA_Y.to_vec()).unwrap();
    let spec = ModelSpec::gamma(Link::Log, 1).unwrap();
    let (alpha, lo, hi, x0) = (0.3, 0.05, 6.0, 0.5);
    let cfg = explicit(alpha, lo, hi);
    let part = BinPartition::uniform(1, 1).unwrap();
    let region = binned_region(&data, spec, &part, &[x0], cfg)
        .unwrap()
        .region;
    let needed = (11.0 * alpha).floor();
    let runs = grid_runs(lo, hi, |y| {
        let (b0, b1, shape) = cold_gamma_fit(x0, y);
        let star = gamma_at(b0, b1, shape, x0).pdf(y);
        let below = GAMMA_X
            .iter()
            .zip(&GAMMA_Y)
            .filter(|(&x, &v)| gamma_at(b0, b1, shape, x).pdf(v) <= star)
            .count();
        (1 + below) as f64 >= needed
    });
    OracleCase {
        name: "binned gamma",
        region,
        runs,
        tolerance: 2.0 * cfg.precision,
    }
}

/// Eight points in the lower of two bins, fixed bandwidth 0.5, alpha 0.25.
pub fn kernel_case() -> OracleCase {
    let xs = [
        0.05, 0.12, 0.18, 0.24, 0.29, 0.33, 0.41, 0.47, 0.58, 0.66, 0.79, 0.93,
    ];
    let ys = [1.4, 2.9, 0.7, 2.2, 3.6, 1.9, 7.4, 2.5, 8.0, 9.5, 7.2, 8.8];
    let data = Dataset::new(1, xs.to_vec(), ys.to_vec()).unwrap();
    let part = BinPartition::uniform(1, 2).unwrap();
    let (alpha, h, lo, hi) = (0.25, 0.5, -2.0, 10.0);
    let cfg = explicit(alpha, lo, hi);
    let region = kernel_conformal_region(&data, &part, &[0.2], cfg, KernelConfig::fixed(h))
        .unwrap()
        .region;
    let bin = ys[..8].to_vec();
    let kernel = Normal::standard();
    let density = |pool: &[f64], v: f64| {
        pool.iter().map(|&p| kernel.pdf((v - p) / h)).sum::<f64>() / (pool.len() as f64 * h)
    };
    let runs = grid_runs(lo, hi, |y| {
        let mut pool = bin.clone();
        pool.push(y);
        let star = density(&pool, y);
        let below = bin.iter().filter(|&&v| density(&pool, v) <= star).count();
        (1 + below) as f64 / (bin.len() + 1) as f64 >= alpha
    });
    OracleCase {
        name: "kernel",
        region,
        runs,
        tolerance: 2.0 * cfg.precision,
    }
}

/// Shortest interval holding `1 - alpha` of a unimodal density: scan density
/// levels on a 1e-5 grid, cut the density at each level and integrate. Mass
/// decreases with the level, so the scan index is bisected.
pub fn level_scan_hdi(
    pdf: impl Fn(f64) -> f64,
    mode: f64,
    lo: f64,
    hi: f64,
    alpha: f64,
) -> (f64, f64) {
    let cut = |t: f64, mut a: f64, mut b: f64, rising: bool| {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (pdf(m) < t) == rising {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let simpson = |a: f64, b: f64| {
        let k = 4000;
        let h = (b - a) / k as f64;
        let mut s = pdf(a) + pdf(b);
        for i in 1..k {
            s += pdf(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let step = 1e-5;
    let levels = (pdf(mode) / step).floor() as usize;
    let interval = |i: usize| {
        let t = i as f64 * step;
        (cut(t, lo, mode, true), cut(t, mode, hi, false))
    };
    let (mut good, mut bad) = (1usize, levels);
    while bad - good > 1 {
        let mid = (good + bad) / 2;
        let (a, b) = interval(mid);
        if simpson(a, b) >= 1.0 - alpha {
            good = mid;
        } else {
            bad = mid;
        }
    }
    interval(good)
}

/// Gamma(shape 2, rate 2) density.
pub fn gamma22_pdf(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        4.0 * y * (-2.0 * y).exp()
    }
}

/// Adaptive Simpson quadrature.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (flm, frm) = (f(0.5 * (a + m)), f(0.5 * (m + b)));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Mass of a conditional density between the points where it falls under 1e-9.
pub fn total_mass(cond: &Conditional) -> f64 {
    let center = cond.quantile(0.5).unwrap();
    let mut lo = center;
    while lo > cond.support_lower() && cond.pdf(lo) > 1e-9 {
        lo = cond.support_lower().max(lo - (1.0 + lo.abs()));
    }
    let mut hi = center;
    while cond.pdf(hi) > 1e-9 {
        hi += 1.0 + hi.abs();
    }
    integrate(&|y| cond.pdf(y), lo, hi, 1e-11)
}

/// Largest relative difference between the analytic score and central
/// differences (step 1e-6) of the log likelihood.
pub fn score_fd_error(spec: ModelSpec, data: &Dataset, params: &ModelParams) -> f64 {
    let design = data.design(&spec).unwrap();
    let y = data.response();
    let theta = params.to_log_scale();
    let analytic = score(params, &spec, &design, y).unwrap();
    let ll =
        |t: &[f64]| log_likelihood(&ModelParams::from_log_scale(t), &spec, &design, y).unwrap();
    let h = 1e-6;
    (0..theta.len())
        .map(|j| {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[j] += h;
            down[j] -= h;
            let numeric = (ll(&up) - ll(&down)) / (2.0 * h);
            (numeric - analytic[j]).abs() / analytic[j].abs().max(1.0)
        })
        .fold(0.0, f64::max)
}

pub fn gamma_data() -> Dataset {
    let xs = vec![
        0.03, 0.11, 0.2, 0.28, 0.37, 0.45, 0.52, 0.6, 0.69, 0.77, 0.85, 0.94,
    ];
    let ys = vec![
        0.81, 1.02, 0.66, 1.9, 1.21, 2.4, 1.55, 3.3, 1.72, 4.1, 2.6, 5.2,
    ];
    Dataset::new(1, xs, ys).unwrap()
}

pub fn gaussian_data() -> Dataset {
    let xs = vec![0.0, 0.1, 0.25, 0.3, 0.45, 0.5, 0.62, 0.7, 0.81, 0.9, 1.0];
    let ys = vec![2.3, 2.1, 3.4, 3.2, 4.6, 4.1, 5.3, 5.9, 6.0, 6.8, 7.4];
    Dataset::new(1, xs, ys).unwrap()
}

/// Specs, data and off-optimum parameters for the finite-difference check.
pub fn score_points() -> Vec<(ModelSpec, Dataset, ModelParams)> {
    vec![
        (
            ModelSpec::gaussian(1).unwrap(),
            gaussian_data(),
            ModelParams::new(vec![1.5, 4.0], 0.7),
        ),
        (
            ModelSpec::gaussian(2).unwrap(),
            gaussian_data(),
            ModelParams::new(vec![2.0, 3.0, 1.5], 2.5),
        ),
        (
            ModelSpec::gamma(Link::Inverse, 1).unwrap(),
            gamma_data(),
            ModelParams::new(vec![1.1, -0.6], 3.0),
        ),
        (
            ModelSpec::gamma(Link::Log, 2).unwrap(),
            gamma_data(),
            ModelParams::new(vec![-0.2, 1.1, 0.4], 1.7),
        ),
    ]
}

/// MLE fits to the shared small datasets.
pub fn fitted_models() -> Vec<(parconf::glm::FittedModel, Dataset)> {
    [
        (ModelSpec::gaussian(1).unwrap(), gaussian_data()),
        (ModelSpec::gaussian(3).unwrap(), gaussian_data()),
        (ModelSpec::gamma(Link::Inverse, 1).unwrap(), gamma_data()),
        (ModelSpec::gamma(Link::Log, 2).unwrap(), gamma_data()),
    ]
    .into_iter()
    .map(|(spec, data)| {
        let model = fit_mle(&spec, &data.design(&spec).unwrap(), data.response(), None).unwrap();
        (model, data)
    })
    .collect()
}

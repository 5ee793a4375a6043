//! Maximum likelihood fitting, log likelihood and score.
//!
//! Gaussian fits are closed form (least squares, variance with divisor `n`).
//! Gamma fits run Newton ascent jointly on `(β, log ν)` with step halving for
//! feasibility and ascent, falling back to Fisher scoring when the observed
//! information is not positive definite.

use nalgebra::{DMatrix, DVector};

use super::design::{expand_point, Design};
use super::distribution::{Conditional, HdInterval, Standard};
use super::lsq::{dot, LeastSquares};
use super::spec::{Family, Link, ModelSpec};
use crate::error::{Error, Result};
use crate::special::{digamma, ln_gamma, trigamma};

const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Converged when the score max-norm is below `tol * n`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// Regression coefficients and dispersion (σ² for gaussian, shape ν for gamma).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub beta: Vec<f64>,
    pub dispersion: f64,
}

impl ModelParams {
    pub fn new(beta: Vec<f64>, dispersion: f64) -> Self {
        Self { beta, dispersion }
    }

    pub fn linear_predictor(&self, features: &[f64]) -> f64 {
        dot(features, &self.beta)
    }

    /// Evaluator for conditional distributions under these parameters.
    pub fn evaluator(&self, spec: &ModelSpec) -> Result<Evaluator<'_>> {
        Evaluator::new(*spec, self)
    }

    /// Vector `(β, log dispersion)`.
    pub fn to_log_scale(&self) -> Vec<f64> {
        let mut v = self.beta.clone();
        v.push(self.dispersion.ln());
        v
    }

    pub fn from_log_scale(v: &[f64]) -> Self {
        let (beta, last) = v.split_at(v.len() - 1);
        Self {
            beta: beta.to_vec(),
            dispersion: last[0].exp(),
        }
    }
}

/// Builds per-row conditional distributions for fixed parameters, sharing
/// the dispersion-dependent pieces across rows.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    spec: ModelSpec,
    params: &'a ModelParams,
    standard: Standard,
    normal_template: Option<Conditional>,
}

impl<'a> Evaluator<'a> {
    pub fn new(spec: ModelSpec, params: &'a ModelParams) -> Result<Self> {
        let disp = params.dispersion;
        if !(disp > 0.0 && disp.is_finite()) {
            return Err(Error::Infeasible(format!(
                "dispersion {disp} must be positive"
            )));
        }
        let (standard, normal_template) = match spec.family() {
            Family::Gaussian => (Standard::Normal, Some(Conditional::normal(0.0, disp)?)),
            Family::Gamma => (Standard::gamma(disp), None),
        };
        Ok(Self {
            spec,
            params,
            standard,
            normal_template,
        })
    }

    pub fn standard(&self) -> &Standard {
        &self.standard
    }

    /// Conditional distribution at an expanded feature row.
    #[inline]
    pub fn at(&self, features: &[f64]) -> Result<Conditional> {
        let eta = self.params.linear_predictor(features);
        match self.normal_template {
            Some(t) => {
                if !eta.is_finite() {
                    return Err(Error::Infeasible("non-finite mean".into()));
                }
                Ok(t.shifted(eta))
            }
            None => {
                let mu = self.spec.link().mean(eta);
                if self.spec.link() == Link::Inverse && eta <= 0.0 {
                    return Err(Error::Infeasible(format!(
                        "linear predictor {eta} is not positive under the inverse link"
                    )));
                }
                Conditional::gamma_with(self.standard, mu)
            }
        }
    }

    /// Conditional distribution at raw main effects `x`.
    pub fn at_point(&self, x: &[f64]) -> Result<Conditional> {
        self.at(&expand_point(x, self.spec.degree()))
    }
}

/// A fitted model: parameters plus fit metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    spec: ModelSpec,
    params: ModelParams,
    log_likelihood: f64,
    iterations: usize,
    converged: bool,
}

impl FittedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn beta(&self) -> &[f64] {
        &self.params.beta
    }

    pub fn dispersion(&self) -> f64 {
        self.params.dispersion
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn evaluator(&self) -> Result<Evaluator<'_>> {
        self.params.evaluator(&self.spec)
    }

    /// Conditional distribution of the response at main effects `x`.
    pub fn conditional(&self, x: &[f64]) -> Result<Conditional> {
        self.evaluator()?.at_point(x)
    }

    pub fn log_density(&self, y: f64, x: &[f64]) -> Result<f64> {
        Ok(self.conditional(x)?.ln_pdf(y))
    }

    pub fn cdf(&self, y: f64, x: &[f64]) -> Result<f64> {
        Ok(self.conditional(x)?.cdf(y))
    }

    pub fn quantile(&self, p: f64, x: &[f64]) -> Result<f64> {
        self.conditional(x)?.quantile(p)
    }

    /// Shortest `1 - alpha` interval of the conditional density at `x`.
    pub fn min_length_interval(&self, x: &[f64], alpha: f64) -> Result<HdInterval> {
        self.conditional(x)?.min_length_interval(alpha)
    }
}

fn check_inputs(spec: &ModelSpec, design: &Design, response: &[f64]) -> Result<()> {
    if design.n() != response.len() {
        return Err(Error::LengthMismatch(format!(
            "design has {} rows, response has {}",
            design.n(),
            response.len()
        )));
    }
    if design.m() != spec.n_features(design.d()) || design.degree() != spec.degree() {
        return Err(Error::InvalidInput(format!(
            "design was expanded with degree {} but the model uses degree {}",
            design.degree(),
            spec.degree()
        )));
    }
    let needed = design.m() + 2;
    if design.n() < needed {
        return Err(Error::TooFewRows {
            needed,
            features: design.m(),
            have: design.n(),
        });
    }
    if response.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidInput("non-finite response".into()));
    }
    if spec.positive_support() && response.iter().any(|&y| y <= 0.0) {
        return Err(Error::InvalidInput(
            "gamma family requires strictly positive responses".into(),
        ));
    }
    Ok(())
}

/// Maximum likelihood fit with default options.
pub fn fit_mle(
    spec: &ModelSpec,
    design: &Design,
    response: &[f64],
    warm_start: Option<&FittedModel>,
) -> Result<FittedModel> {
    fit_mle_with(
        spec,
        design,
        response,
        warm_start.map(FittedModel::params),
        FitOptions::default(),
    )
}

pub fn fit_mle_with(
    spec: &ModelSpec,
    design: &Design,
    response: &[f64],
    warm_start: Option<&ModelParams>,
    options: FitOptions,
) -> Result<FittedModel> {
    check_inputs(spec, design, response)?;
    match spec.family() {
        Family::Gaussian => fit_gaussian(spec, design, response),
        Family::Gamma => fit_gamma(spec, design, response, warm_start, options),
    }
}

fn fit_gaussian(spec: &ModelSpec, design: &Design, response: &[f64]) -> Result<FittedModel> {
    let ls = LeastSquares::fit(design, response)?;
    let n = design.n() as f64;
    let sigma2 = ls.rss() / n;
    let scale = response.iter().map(|y| y * y).sum::<f64>() / n;
    if !(sigma2 > 1e-28 * (1.0 + scale)) {
        return Err(Error::Degenerate(
            "residual variance is zero (perfect fit)".into(),
        ));
    }
    let params = ModelParams::new(ls.beta().to_vec(), sigma2);
    let log_likelihood = -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    Ok(FittedModel {
        spec: *spec,
        params,
        log_likelihood,
        iterations: 1,
        converged: true,
    })
}

/// Total log likelihood of `params`.
pub fn log_likelihood(
    params: &ModelParams,
    spec: &ModelSpec,
    design: &Design,
    response: &[f64],
) -> Result<f64> {
    let eval = params.evaluator(spec)?;
    let mut total = 0.0;
    for (i, &y) in response.iter().enumerate() {
        total += eval.at(design.row(i))?.ln_pdf(y);
    }
    Ok(total)
}

/// Gradient of the total log likelihood in `(β, log dispersion)` coordinates.
pub fn score(
    params: &ModelParams,
    spec: &ModelSpec,
    design: &Design,
    response: &[f64],
) -> Result<DVector<f64>> {
    if design.n() != response.len() {
        return Err(Error::LengthMismatch("design and response".into()));
    }
    match spec.family() {
        Family::Gaussian => gaussian_score(params, design, response),
        Family::Gamma => Ok(gamma_derivatives(params, spec, design, response)?.score),
    }
}

fn gaussian_score(params: &ModelParams, design: &Design, response: &[f64]) -> Result<DVector<f64>> {
    let sigma2 = params.dispersion;
    if !(sigma2 > 0.0) {
        return Err(Error::Infeasible(format!("variance {sigma2}")));
    }
    let m = design.m();
    let mut s = DVector::zeros(m + 1);
    for (i, &y) in response.iter().enumerate() {
        let row = design.row(i);
        let r = y - dot(row, &params.beta);
        for j in 0..m {
            s[j] += r * row[j] / sigma2;
        }
        s[m] += 0.5 * (r * r / sigma2 - 1.0);
    }
    Ok(s)
}

struct GammaDerivatives {
    log_likelihood: f64,
    score: DVector<f64>,
    /// Negative Hessian (observed information).
    observed: DMatrix<f64>,
    /// Expected (Fisher) information.
    expected: DMatrix<f64>,
}

fn gamma_derivatives(
    params: &ModelParams,
    spec: &ModelSpec,
    design: &Design,
    response: &[f64],
) -> Result<GammaDerivatives> {
    let shape = params.dispersion;
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::Infeasible(format!("gamma shape {shape}")));
    }
    let m = design.m();
    let n = response.len() as f64;
    let link = spec.link();
    let lg = ln_gamma(shape);
    let dg = digamma(shape);
    let tg = trigamma(shape);
    let ln_shape = shape.ln();

    let mut ll = 0.0;
    let mut shape_score = 0.0;
    let mut score = DVector::zeros(m + 1);
    let mut observed = DMatrix::zeros(m + 1, m + 1);
    let mut expected = DMatrix::zeros(m + 1, m + 1);
    for (i, &y) in response.iter().enumerate() {
        let row = design.row(i);
        let eta = dot(row, &params.beta);
        let (mu, d_eta, w_obs, w_exp) = match link {
            Link::Inverse => {
                if !(eta > 0.0) {
                    return Err(Error::Infeasible(format!(
                        "linear predictor {eta} at row {i} is not positive under the inverse link"
                    )));
                }
                let mu = 1.0 / eta;
                (mu, shape * (mu - y), shape * mu * mu, shape * mu * mu)
            }
            Link::Log => {
                let mu = eta.exp();
                if !(mu > 0.0 && mu.is_finite()) {
                    return Err(Error::Infeasible(format!("mean {mu} at row {i}")));
                }
                (mu, shape * (y / mu - 1.0), shape * y / mu, shape)
            }
            Link::Identity => unreachable!("gamma specs never carry the identity link"),
        };
        let ln_mu = mu.ln();
        let ln_y = y.ln();
        ll += shape * ln_shape - shape * ln_mu - lg + (shape - 1.0) * ln_y - shape * y / mu;
        shape_score += ln_shape + 1.0 - dg - ln_mu + ln_y - y / mu;
        for j in 0..m {
            score[j] += d_eta * row[j];
            for k in 0..=j {
                let xx = row[j] * row[k];
                observed[(j, k)] += w_obs * xx;
                expected[(j, k)] += w_exp * xx;
            }
        }
    }
    for j in 0..m {
        for k in 0..j {
            observed[(k, j)] = observed[(j, k)];
            expected[(k, j)] = expected[(j, k)];
        }
    }
    let theta_score = shape * shape_score;
    score[m] = theta_score;
    let info_theta = n * (shape * shape * tg - shape);
    for j in 0..m {
        observed[(j, m)] = -score[j];
        observed[(m, j)] = -score[j];
    }
    observed[(m, m)] = info_theta - theta_score;
    expected[(m, m)] = info_theta;
    Ok(GammaDerivatives {
        log_likelihood: ll,
        score,
        observed,
        expected,
    })
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

fn gamma_start(spec: &ModelSpec, design: &Design, response: &[f64]) -> ModelParams {
    let transformed: Vec<f64> = response.iter().map(|&y| spec.link().link(y)).collect();
    let mean_y = response.iter().sum::<f64>() / response.len() as f64;
    let mut beta = vec![0.0; design.m()];
    beta[0] = spec.link().link(mean_y);
    if let Ok(ls) = LeastSquares::fit(design, &transformed) {
        let feasible = spec.link() != Link::Inverse
            || (0..design.n()).all(|i| dot(design.row(i), ls.beta()) > 0.0);
        if feasible && ls.beta().iter().all(|b| b.is_finite()) {
            beta = ls.beta().to_vec();
        }
    }
    let spread = (0..design.n())
        .map(|i| {
            let mu = spec.link().mean(dot(design.row(i), &beta));
            let r = response[i] / mu - 1.0;
            r * r
        })
        .sum::<f64>()
        / response.len() as f64;
    let shape = if spread.is_finite() && spread > 0.0 {
        (1.0 / spread).clamp(1e-2, 1e4)
    } else {
        1.0
    };
    ModelParams::new(beta, shape)
}

fn newton_direction(d: &GammaDerivatives) -> Option<DVector<f64>> {
    let dir = d
        .observed
        .clone()
        .cholesky()
        .map(|c| c.solve(&d.score))
        .filter(|dir| dir.iter().all(|v| v.is_finite()));
    dir.or_else(|| {
        d.expected
            .clone()
            .cholesky()
            .map(|c| c.solve(&d.score))
            .filter(|dir| dir.iter().all(|v| v.is_finite()))
    })
}

fn fit_gamma(
    spec: &ModelSpec,
    design: &Design,
    response: &[f64],
    warm_start: Option<&ModelParams>,
    options: FitOptions,
) -> Result<FittedModel> {
    let n = response.len() as f64;
    let threshold = options.tol * n;

    let usable_warm = warm_start
        .filter(|p| p.beta.len() == design.m())
        .and_then(|p| {
            gamma_derivatives(p, spec, design, response)
                .ok()
                .map(|d| (p.clone(), d))
        });
    let (mut params, mut derivs) = match usable_warm {
        Some(pair) => pair,
        None => {
            let start = gamma_start(spec, design, response);
            let d = gamma_derivatives(&start, spec, design, response)?;
            (start, d)
        }
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut polished = false;
    loop {
        let small = max_abs(&derivs.score) < threshold;
        if small {
            converged = true;
        }
        // one extra Newton step after meeting the tolerance drives the
        // parameters to working precision
        if (converged && polished) || iterations >= options.max_iter {
            break;
        }
        let Some(direction) = newton_direction(&derivs) else {
            break;
        };
        let theta = params.to_log_scale();
        let mut step = 1.0;
        let mut accepted = None;
        let mut any_feasible = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = theta
                .iter()
                .zip(direction.iter())
                .map(|(t, d)| t + step * d)
                .collect();
            let cand = ModelParams::from_log_scale(&trial);
            if let Ok(d) = gamma_derivatives(&cand, spec, design, response) {
                any_feasible = true;
                let slack = 1e-12 * (1.0 + derivs.log_likelihood.abs());
                if d.log_likelihood.is_finite() && d.log_likelihood >= derivs.log_likelihood - slack
                {
                    accepted = Some((cand, d));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((p, d)) => {
                params = p;
                derivs = d;
                iterations += 1;
                if converged {
                    polished = true;
                }
            }
            None if !any_feasible => {
                return Err(Error::Infeasible(format!(
                    "no feasible step after {MAX_HALVINGS} halvings"
                )))
            }
            None => break,
        }
    }
    converged = max_abs(&derivs.score) < threshold;
    Ok(FittedModel {
        spec: *spec,
        params,
        log_likelihood: derivs.log_likelihood,
        iterations,
        converged,
    })
}

//! Parametric conformal regions (binned and transformation), the
//! minimal-length interval of a fitted density and the plug-in
//! highest-density region.
//!
//! Every acceptance test refits the model on the data augmented with the
//! candidate `(x, y)`. Gaussian refits are closed form through a rank-one
//! update of the least-squares solution; other families run Newton warm
//! started at the previous candidate's estimate.
//!
//! All rows of one fitted model share a standard distribution `G` with
//! `F(y | x) = G(t(y, x))` for an increasing standardization `t`. Comparisons
//! of transformed values `F(Y_i | X_i)` are therefore carried out on the
//! standardized keys `t`, which avoids CDF saturation in the tails.

use crate::conformal::{
    adjusted_count, region_from_acceptance, ConformalConfig, IntervalUnion, RegionOutcome,
};
use crate::error::{Error, Result};
use crate::glm::{
    dot, expand_point, fit_mle, fit_mle_with, AugmentedLeastSquares, Dataset, Design, Family,
    FitOptions, FittedModel, HdInterval, LeastSquares, ModelParams, ModelSpec, Standard,
};
use crate::partition::BinPartition;

/// Full-data fit plus the precomputations shared by all query points.
#[derive(Debug, Clone)]
pub struct ParametricConformal<'a> {
    data: &'a Dataset,
    spec: ModelSpec,
    design: Design,
    base: FittedModel,
    least_squares: Option<LeastSquares>,
    base_residuals: Vec<f64>,
    config: ConformalConfig,
    window: (f64, f64),
}

impl<'a> ParametricConformal<'a> {
    pub fn new(data: &'a Dataset, spec: ModelSpec, config: ConformalConfig) -> Result<Self> {
        config.validate()?;
        let design = data.design(&spec)?;
        let base = fit_mle(&spec, &design, data.response(), None)?;
        if !base.converged() {
            return Err(Error::NotConverged(base.iterations()));
        }
        let (least_squares, base_residuals) = match spec.family() {
            Family::Gaussian => {
                let ls = LeastSquares::fit(&design, data.response())?;
                let resid = (0..data.n())
                    .map(|i| data.y(i) - dot(design.row(i), ls.beta()))
                    .collect();
                (Some(ls), resid)
            }
            Family::Gamma => (None, Vec::new()),
        };
        let window = config.resolve_window(data.response_range(), spec.positive_support())?;
        Ok(Self {
            data,
            spec,
            design,
            base,
            least_squares,
            base_residuals,
            config,
            window,
        })
    }

    pub fn base_model(&self) -> &FittedModel {
        &self.base
    }

    pub fn config(&self) -> &ConformalConfig {
        &self.config
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// Augmented-fit evaluator for query point `x`.
    pub fn augmented(&self, x: &[f64]) -> Result<AugmentedFitCache<'_>> {
        if x.len() != self.data.d() {
            return Err(Error::LengthMismatch(format!(
                "query of dimension {} for data of dimension {}",
                x.len(),
                self.data.d()
            )));
        }
        let features = expand_point(x, self.spec.degree());
        let n = self.data.n();
        let kind = match &self.least_squares {
            Some(ls) => {
                let aug = ls.augment(&features);
                let shift = (0..n)
                    .map(|i| dot(self.design.row(i), aug.direction()))
                    .collect();
                CacheKind::Gaussian { aug, shift }
            }
            None => {
                let mut response = self.data.response().to_vec();
                response.push(self.data.response()[0]);
                CacheKind::General {
                    design: self.design.with_row(x)?,
                    response,
                    last: None,
                }
            }
        };
        Ok(AugmentedFitCache {
            owner: self,
            features,
            kind,
            keys: vec![0.0; n],
            scores: vec![0.0; n],
            candidate_key: 0.0,
            candidate_score: 0.0,
            standard: Standard::Normal,
            hd_memo: None,
        })
    }

    /// Binned parametric conformal region at `x`.
    pub fn binned_region(&self, partition: &BinPartition, x: &[f64]) -> Result<RegionOutcome> {
        let bin = partition.assign_bin(x)?;
        let members: Vec<usize> = partition
            .assign_all(self.data)?
            .into_iter()
            .enumerate()
            .filter_map(|(i, b)| (b == bin).then_some(i))
            .collect();
        if members.is_empty() {
            return Err(Error::EmptyBin(bin));
        }
        let needed = adjusted_count(members.len(), self.config.alpha);
        if needed == 0 {
            return Ok(RegionOutcome {
                region: IntervalUnion::single(self.window.0, self.window.1)?,
                warnings: 0,
                evaluations: 0,
            });
        }
        let mut cache = self.augmented(x)?;
        region_from_acceptance(
            |y| {
                cache.evaluate(y)?;
                let star = cache.candidate_score;
                let below = members.iter().filter(|&&i| cache.scores[i] <= star).count();
                Ok(1 + below >= needed)
            },
            self.window,
            self.config.precision,
        )
    }

    /// Transformation conformal region at `x`.
    pub fn transform_region(&self, x: &[f64]) -> Result<RegionOutcome> {
        let n = self.data.n();
        let alpha = self.config.alpha;
        let mut cache = self.augmented(x)?;
        region_from_acceptance(
            |y| {
                cache.evaluate(y)?;
                let hd = cache.standard_interval(alpha)?;
                let (lower_idx, upper_idx) = snap_indices(n, hd.lower_prob, hd.upper_prob);
                let star = cache.candidate_key;
                let at_most = cache.keys.iter().filter(|&&t| t <= star).count();
                let below = cache.keys.iter().filter(|&&t| t < star).count();
                Ok((lower_idx == 0 || at_most >= lower_idx) && below < upper_idx)
            },
            self.window,
            self.config.precision,
        )
    }

    /// Plug-in highest-density interval of the full-data fit at `x`.
    pub fn hd_region(&self, x: &[f64]) -> Result<IntervalUnion> {
        hd_region(&self.base, x, self.config.alpha)
    }
}

/// Order-statistic indices `(⌊(n+1)u_lwr⌋, min(⌈(n+1)u_upr⌉, n))`. A lower
/// index of zero means the lower snap point is 0.
pub fn snap_indices(n: usize, lower_prob: f64, upper_prob: f64) -> (usize, usize) {
    let scale = (n + 1) as f64;
    let lower = (scale * lower_prob).floor().max(0.0) as usize;
    let upper = ((scale * upper_prob).ceil().max(0.0) as usize).min(n);
    (lower, upper)
}

#[derive(Debug, Clone)]
enum CacheKind {
    Gaussian {
        aug: AugmentedLeastSquares,
        /// `x_i' A⁻¹ x` for every training row.
        shift: Vec<f64>,
    },
    General {
        design: Design,
        response: Vec<f64>,
        last: Option<(f64, ModelParams)>,
    },
}

/// Augmented MLE at one query point, refit per candidate response. Holds the
/// most recent augmented fit to warm start the next one.
///
/// After [`evaluate`](Self::evaluate) the cache exposes, for the augmented
/// fit, the standardized key and a density score of every training row and
/// of the candidate. Scores are log densities up to an additive constant
/// shared by all rows of the same fit.
#[derive(Debug, Clone)]
pub struct AugmentedFitCache<'p> {
    owner: &'p ParametricConformal<'p>,
    features: Vec<f64>,
    kind: CacheKind,
    keys: Vec<f64>,
    scores: Vec<f64>,
    candidate_key: f64,
    candidate_score: f64,
    standard: Standard,
    hd_memo: Option<(f64, HdInterval)>,
}

impl AugmentedFitCache<'_> {
    /// Augmented MLE for candidate response `y`.
    pub fn fit(&mut self, y: f64) -> Result<ModelParams> {
        match &mut self.kind {
            CacheKind::Gaussian { aug, .. } => {
                let sigma2 = aug.rss(y) / aug.n() as f64;
                if !(sigma2 > 0.0) {
                    return Err(Error::Degenerate("zero augmented variance".into()));
                }
                Ok(ModelParams::new(aug.coefficients(y), sigma2))
            }
            CacheKind::General {
                design,
                response,
                last,
            } => {
                let owner = self.owner;
                if owner.spec.positive_support() && y <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "candidate {y} outside the positive support"
                    )));
                }
                if let Some((prev_y, params)) = last {
                    if *prev_y == y {
                        return Ok(params.clone());
                    }
                }
                *response.last_mut().expect("augmented response is nonempty") = y;
                let warm = last
                    .as_ref()
                    .map_or_else(|| owner.base.params(), |(_, p)| p);
                let options = FitOptions {
                    tol: owner.config.refit_tol,
                    max_iter: owner.config.refit_max_iter,
                };
                let fit = fit_mle_with(&owner.spec, design, response, Some(warm), options)?;
                if !fit.converged() {
                    return Err(Error::NotConverged(fit.iterations()));
                }
                let params = fit.params().clone();
                *last = Some((y, params.clone()));
                Ok(params)
            }
        }
    }

    /// Refits at `y` and fills keys and density scores.
    pub fn evaluate(&mut self, y: f64) -> Result<()> {
        let owner = self.owner;
        if let CacheKind::Gaussian { aug, shift } = &self.kind {
            let rss = aug.rss(y);
            let sigma = (rss / aug.n() as f64).sqrt();
            if !(sigma > 0.0) {
                return Err(Error::Degenerate("zero augmented variance".into()));
            }
            let k = (y - aug.base_fitted()) / (1.0 + aug.leverage());
            for ((key, score), (r0, s)) in self
                .keys
                .iter_mut()
                .zip(self.scores.iter_mut())
                .zip(owner.base_residuals.iter().zip(shift))
            {
                let t = (r0 - s * k) / sigma;
                *key = t;
                *score = -0.5 * t * t;
            }
            self.candidate_key = k / sigma;
            self.candidate_score = -0.5 * self.candidate_key * self.candidate_key;
            self.standard = Standard::Normal;
            return Ok(());
        }
        let params = self.fit(y)?;
        let eval = params.evaluator(&owner.spec)?;
        for i in 0..owner.data.n() {
            let cond = eval.at(owner.design.row(i))?;
            let yi = owner.data.y(i);
            self.keys[i] = cond.standardize(yi);
            self.scores[i] = cond.ln_pdf(yi);
        }
        let cond = eval.at(&self.features)?;
        self.candidate_key = cond.standardize(y);
        self.candidate_score = cond.ln_pdf(y);
        self.standard = *eval.standard();
        Ok(())
    }

    /// Standardized keys of the training rows from the last evaluation.
    pub fn keys(&self) -> &[f64] {
        &self.keys
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn candidate_key(&self) -> f64 {
        self.candidate_key
    }

    pub fn candidate_score(&self) -> f64 {
        self.candidate_score
    }

    /// Minimal-length interval of the last evaluated fit on the standard scale.
    fn standard_interval(&mut self, alpha: f64) -> Result<HdInterval> {
        let tag = match self.standard {
            Standard::Normal => f64::NAN,
            Standard::Gamma { shape, .. } => shape,
        };
        if let Some((memo_tag, iv)) = self.hd_memo {
            if memo_tag.to_bits() == tag.to_bits() {
                return Ok(iv);
            }
        }
        let iv = self.standard.min_length_interval(alpha)?;
        self.hd_memo = Some((tag, iv));
        Ok(iv)
    }
}

/// Binned parametric conformal region at `x`, fitting the model from scratch.
pub fn binned_region(
    data: &Dataset,
    spec: ModelSpec,
    partition: &BinPartition,
    x: &[f64],
    config: ConformalConfig,
) -> Result<RegionOutcome> {
    ParametricConformal::new(data, spec, config)?.binned_region(partition, x)
}

/// Transformation conformal region at `x`, fitting the model from scratch.
pub fn transform_region(
    data: &Dataset,
    spec: ModelSpec,
    x: &[f64],
    config: ConformalConfig,
) -> Result<RegionOutcome> {
    ParametricConformal::new(data, spec, config)?.transform_region(x)
}

/// Shortest interval with probability `1 - alpha` under the fitted density at `x`.
pub fn min_length_interval(model: &FittedModel, x: &[f64], alpha: f64) -> Result<(f64, f64)> {
    let iv = model.min_length_interval(x, alpha)?;
    Ok((iv.lower, iv.upper))
}

/// Highest-density region of the fitted model at `x`: one interval, no
/// conformal adjustment.
pub fn hd_region(model: &FittedModel, x: &[f64], alpha: f64) -> Result<IntervalUnion> {
    let (a, b) = min_length_interval(model, x, alpha)?;
    IntervalUnion::single(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::Link;

    fn linear_data() -> Dataset {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let ys = xs
            .iter()
            .enumerate()
            .map(|(i, x)| 1.0 + 2.0 * x + 0.3 * (((i * 7) % 5) as f64 - 2.0))
            .collect();
        Dataset::new(1, xs, ys).unwrap()
    }

    #[test]
    fn snapping_indices() {
        assert_eq!(snap_indices(150, 0.05, 0.95), (7, 144));
        assert_eq!(snap_indices(10, 0.05, 0.95), (0, 10));
        assert_eq!(snap_indices(10, 0.0, 0.999), (0, 10));
    }

    #[test]
    fn small_bin_accepts_whole_window() {
        let data = linear_data();
        let spec = ModelSpec::gaussian(1).unwrap();
        let pc = ParametricConformal::new(&data, spec, ConformalConfig::with_alpha(0.1)).unwrap();
        // 4 bins of 5 rows: ⌊6 · 0.1⌋ = 0
        let part = BinPartition::uniform(1, 4).unwrap();
        let out = pc.binned_region(&part, &[0.1]).unwrap();
        let (lo, hi) = pc.window();
        assert_eq!(out.region.pieces(), &[(lo, hi)]);
    }

    #[test]
    fn gaussian_closed_form_matches_general_refit() {
        let data = linear_data();
        let spec = ModelSpec::gaussian(2).unwrap();
        let pc = ParametricConformal::new(&data, spec, ConformalConfig::default()).unwrap();
        let mut cache = pc.augmented(&[0.4]).unwrap();
        for &y in &[-1.0, 2.0, 2.7, 6.0] {
            cache.evaluate(y).unwrap();
            let big = data.augmented(&[0.4], y).unwrap();
            let fit = fit_mle(&spec, &big.design(&spec).unwrap(), big.response(), None).unwrap();
            let eval = fit.evaluator().unwrap();
            let design = data.design(&spec).unwrap();
            for i in 0..data.n() {
                let c = eval.at(design.row(i)).unwrap();
                assert!((c.standardize(data.y(i)) - cache.keys()[i]).abs() < 1e-9);
            }
            let c = eval.at_point(&[0.4]).unwrap();
            assert!((c.standardize(y) - cache.candidate_key()).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_bin_is_an_error() {
        let data = Dataset::new(
            1,
            vec![0.1, 0.2, 0.3, 0.4, 0.45],
            vec![1.0, 2.0, 1.5, 2.5, 2.2],
        )
        .unwrap();
        let spec = ModelSpec::gaussian(1).unwrap();
        let pc = ParametricConformal::new(&data, spec, ConformalConfig::default()).unwrap();
        let part = BinPartition::uniform(1, 2).unwrap();
        assert!(matches!(
            pc.binned_region(&part, &[0.9]),
            Err(Error::EmptyBin(1))
        ));
    }

    #[test]
    fn hd_region_is_min_length_interval() {
        let data = linear_data();
        let spec = ModelSpec::gaussian(1).unwrap();
        let pc = ParametricConformal::new(&data, spec, ConformalConfig::default()).unwrap();
        let hd = pc.hd_region(&[0.5]).unwrap();
        let (a, b) = min_length_interval(pc.base_model(), &[0.5], 0.1).unwrap();
        assert_eq!(hd.pieces(), &[(a, b)]);
    }

    #[test]
    fn gamma_transform_region_is_nonempty_and_positive() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
        let ys = xs
            .iter()
            .enumerate()
            .map(|(i, x)| (0.5 + x) * (0.4 + 1.2 * ((i * 11 % 13) as f64 / 12.0)))
            .collect();
        let data = Dataset::new(1, xs, ys).unwrap();
        let spec = ModelSpec::gamma(Link::Inverse, 1).unwrap();
        let mut config = ConformalConfig::with_alpha(0.2);
        config.precision = 0.02;
        let pc = ParametricConformal::new(&data, spec, config).unwrap();
        let out = pc.transform_region(&[0.5]).unwrap();
        assert!(!out.region.is_empty());
        assert!(out.region.lower().unwrap() > 0.0);
        assert!(out
            .region
            .contains(pc.base_model().conditional(&[0.5]).unwrap().mean()));
    }
}

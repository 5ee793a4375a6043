//! Baseline conformal regions: the binned kernel-density region and the
//! least-squares residual regions, unweighted (LS) and locally weighted
//! by a fitted mean absolute deviation (LSLW).

use std::sync::OnceLock;

use crate::conformal::{region_from_acceptance, ConformalConfig, IntervalUnion, RegionOutcome};
use crate::error::{Error, Result};
use crate::glm::{dot, expand_point, Dataset, Design, Family, LeastSquares, ModelSpec};
use crate::partition::BinPartition;

/// Bandwidth rule for the gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Bandwidth {
    /// `1.06 · sd · n^(-1/5)` from the in-bin responses.
    #[default]
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelConfig {
    pub bandwidth: Bandwidth,
}

impl KernelConfig {
    pub fn fixed(h: f64) -> Self {
        Self {
            bandwidth: Bandwidth::Fixed(h),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.bandwidth {
            Bandwidth::Fixed(h) if !(h > 0.0 && h.is_finite()) => {
                Err(Error::Config(format!("bandwidth {h} must be positive")))
            }
            _ => Ok(()),
        }
    }

    /// Bandwidth for a bin holding `values`.
    pub fn bandwidth_for(&self, values: &[f64]) -> Result<f64> {
        match self.bandwidth {
            Bandwidth::Fixed(h) => Ok(h),
            Bandwidth::Silverman => {
                let n = values.len();
                if n < 2 {
                    return Err(Error::Degenerate(format!(
                        "bandwidth rule needs two responses in the bin, have {n}"
                    )));
                }
                let mean = values.iter().sum::<f64>() / n as f64;
                let var =
                    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
                let h = 1.06 * var.sqrt() * (n as f64).powf(-0.2);
                if h > 0.0 && h.is_finite() {
                    Ok(h)
                } else {
                    Err(Error::Degenerate(
                        "in-bin responses have zero spread; supply a fixed bandwidth".into(),
                    ))
                }
            }
        }
    }
}

/// Unnormalized gaussian kernel; the normalizing constant cancels in ranks.
#[inline]
fn kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp()
}

/// Binned kernel-density conformal regions. The region depends on the query
/// only through its bin, so each bin's region is computed once.
#[derive(Debug)]
pub struct KernelConformal<'a> {
    data: &'a Dataset,
    partition: BinPartition,
    config: ConformalConfig,
    kernel: KernelConfig,
    window: (f64, f64),
    members: Vec<Vec<usize>>,
    memo: Vec<OnceLock<RegionOutcome>>,
}

impl<'a> KernelConformal<'a> {
    pub fn new(
        data: &'a Dataset,
        partition: BinPartition,
        config: ConformalConfig,
        kernel: KernelConfig,
    ) -> Result<Self> {
        config.validate()?;
        kernel.validate()?;
        let window = config.resolve_window(data.response_range(), false)?;
        let mut members = vec![Vec::new(); partition.n_bins()];
        for (i, b) in partition.assign_all(data)?.into_iter().enumerate() {
            members[b].push(i);
        }
        let memo = (0..partition.n_bins()).map(|_| OnceLock::new()).collect();
        Ok(Self {
            data,
            partition,
            config,
            kernel,
            window,
            members,
            memo,
        })
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn region(&self, x: &[f64]) -> Result<RegionOutcome> {
        self.bin_region(self.partition.assign_bin(x)?)
    }

    pub fn bin_region(&self, bin: usize) -> Result<RegionOutcome> {
        if let Some(done) = self.memo.get(bin).and_then(OnceLock::get) {
            return Ok(done.clone());
        }
        let members = self.members.get(bin).ok_or(Error::EmptyBin(bin))?;
        if members.is_empty() {
            return Err(Error::EmptyBin(bin));
        }
        let values: Vec<f64> = members.iter().map(|&i| self.data.y(i)).collect();
        let out = kernel_region_for_values(&values, self.window, &self.config, &self.kernel)?;
        let _ = self.memo[bin].set(out.clone());
        Ok(out)
    }
}

/// Kernel conformal region for the responses of one bin.
fn kernel_region_for_values(
    values: &[f64],
    window: (f64, f64),
    config: &ConformalConfig,
    kcfg: &KernelConfig,
) -> Result<RegionOutcome> {
    let n_k = values.len();
    let alpha = config.alpha;
    // the candidate's own rank is at least 1 / (n_k + 1)
    if 1.0 / (n_k + 1) as f64 >= alpha {
        return Ok(RegionOutcome {
            region: IntervalUnion::single(window.0, window.1)?,
            warnings: 0,
            evaluations: 0,
        });
    }
    let h = kcfg.bandwidth_for(values)?;
    let base: Vec<f64> = values
        .iter()
        .map(|&yi| values.iter().map(|&yj| kernel((yi - yj) / h)).sum())
        .collect();
    let self_weight = kernel(0.0);
    region_from_acceptance(
        |y| {
            let star = values.iter().map(|&yj| kernel((y - yj) / h)).sum::<f64>() + self_weight;
            let below = values
                .iter()
                .zip(&base)
                .filter(|&(&yi, &s)| s + kernel((yi - y) / h) <= star)
                .count();
            Ok((1 + below) as f64 / (n_k + 1) as f64 >= alpha)
        },
        window,
        config.precision,
    )
}

/// Kernel conformal region at `x`.
pub fn kernel_conformal_region(
    data: &Dataset,
    partition: &BinPartition,
    x: &[f64],
    config: ConformalConfig,
    kcfg: KernelConfig,
) -> Result<RegionOutcome> {
    KernelConformal::new(data, partition.clone(), config, kcfg)?.region(x)
}

/// Residual weighting of the least-squares conformal regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// Plain absolute residuals.
    None,
    /// Absolute residuals divided by a least-squares fit of themselves.
    LocalDeviation,
}

/// Floor on the fitted absolute-deviation scale.
pub const DEVIATION_FLOOR: f64 = 1e-6;

/// Least-squares residual conformal regions evaluated on a fixed grid of
/// candidate responses, without boundary refinement.
#[derive(Debug, Clone)]
pub struct ResidualConformal<'a> {
    data: &'a Dataset,
    degree: usize,
    design: Design,
    ls: LeastSquares,
    residuals: Vec<f64>,
    alpha: f64,
    grid: Vec<f64>,
}

impl<'a> ResidualConformal<'a> {
    pub fn new(
        data: &'a Dataset,
        mean_spec: ModelSpec,
        alpha: f64,
        grid_points: usize,
        window: (f64, f64),
    ) -> Result<Self> {
        if mean_spec.family() != Family::Gaussian {
            return Err(Error::InvalidSpec(
                "residual conformal regions need a least-squares (gaussian) mean model".into(),
            ));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("alpha {alpha} outside (0, 1)")));
        }
        if grid_points < 2 {
            return Err(Error::Config("grid needs at least two points".into()));
        }
        let (lo, hi) = window;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Config(format!(
                "search window [{lo}, {hi}] is empty"
            )));
        }
        let design = data.design(&mean_spec)?;
        let ls = LeastSquares::fit(&design, data.response())?;
        let residuals = (0..data.n())
            .map(|i| data.y(i) - dot(design.row(i), ls.beta()))
            .collect();
        let step = (hi - lo) / (grid_points - 1) as f64;
        let grid = (0..grid_points)
            .map(|k| {
                if k + 1 == grid_points {
                    hi
                } else {
                    lo + k as f64 * step
                }
            })
            .collect();
        Ok(Self {
            data,
            degree: mean_spec.degree(),
            design,
            ls,
            residuals,
            alpha,
            grid,
        })
    }

    /// Uses the automatic search window of `config` (response range ± 50%).
    pub fn with_config(
        data: &'a Dataset,
        mean_spec: ModelSpec,
        config: &ConformalConfig,
        grid_points: usize,
    ) -> Result<Self> {
        let window = config.resolve_window(data.response_range(), false)?;
        Self::new(data, mean_spec, config.alpha, grid_points, window)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Largest accepted rank, `⌈(1-α)(n+1)⌉`.
    pub fn rank_threshold(&self) -> usize {
        ((1.0 - self.alpha) * (self.data.n() + 1) as f64).ceil() as usize
    }

    /// Rank of the candidate's (weighted) absolute residual among all `n + 1`.
    pub fn candidate_rank(&self, x: &[f64], y: f64, weighting: Weighting) -> Result<usize> {
        let query = self.query(x)?;
        Ok(query.rank(self, y, weighting))
    }

    pub fn region(&self, x: &[f64], weighting: Weighting) -> Result<IntervalUnion> {
        let query = self.query(x)?;
        let threshold = self.rank_threshold();
        let accepted: Vec<bool> = self
            .grid
            .iter()
            .map(|&y| query.rank(self, y, weighting) <= threshold)
            .collect();
        let half_step = 0.5 * (self.grid[1] - self.grid[0]);
        let mut pieces = Vec::new();
        let mut k = 0;
        while k < accepted.len() {
            if accepted[k] {
                let start = k;
                while k + 1 < accepted.len() && accepted[k + 1] {
                    k += 1;
                }
                let (mut a, mut b) = (self.grid[start], self.grid[k]);
                if start == k {
                    a -= half_step;
                    b += half_step;
                }
                pieces.push((a, b));
            }
            k += 1;
        }
        IntervalUnion::new(pieces)
    }

    fn query(&self, x: &[f64]) -> Result<ResidualQuery> {
        if x.len() != self.data.d() {
            return Err(Error::LengthMismatch(format!(
                "query of dimension {} for data of dimension {}",
                x.len(),
                self.data.d()
            )));
        }
        let features = expand_point(x, self.degree);
        let aug = self.ls.augment(&features);
        let shift = (0..self.data.n())
            .map(|i| dot(self.design.row(i), aug.direction()))
            .collect();
        let gram_inv = aug.gram_inv(self.ls.gram_inv());
        Ok(ResidualQuery {
            base_fitted: aug.base_fitted(),
            inflation: 1.0 + aug.leverage(),
            shift,
            features,
            gram_inv,
        })
    }
}

struct ResidualQuery {
    base_fitted: f64,
    inflation: f64,
    shift: Vec<f64>,
    features: Vec<f64>,
    gram_inv: nalgebra::DMatrix<f64>,
}

impl ResidualQuery {
    fn rank(&self, owner: &ResidualConformal<'_>, y: f64, weighting: Weighting) -> usize {
        let k = (y - self.base_fitted) / self.inflation;
        let abs: Vec<f64> = owner
            .residuals
            .iter()
            .zip(&self.shift)
            .map(|(r, s)| (r - s * k).abs())
            .collect();
        let star = k.abs();
        match weighting {
            Weighting::None => 1 + abs.iter().filter(|&&r| r <= star).count(),
            Weighting::LocalDeviation => {
                let m = self.features.len();
                let mut xtr = vec![0.0; m];
                for (i, r) in abs.iter().enumerate() {
                    for (acc, xv) in xtr.iter_mut().zip(owner.design.row(i)) {
                        *acc += xv * r;
                    }
                }
                for (acc, xv) in xtr.iter_mut().zip(&self.features) {
                    *acc += xv * star;
                }
                let gamma: Vec<f64> = (0..m)
                    .map(|j| (0..m).map(|l| self.gram_inv[(j, l)] * xtr[l]).sum())
                    .collect();
                let scale = |row: &[f64]| dot(row, &gamma).max(DEVIATION_FLOOR);
                let star_w = star / scale(&self.features);
                let below = abs
                    .iter()
                    .enumerate()
                    .filter(|&(i, r)| r / scale(owner.design.row(i)) <= star_w)
                    .count();
                1 + below
            }
        }
    }
}

/// LS conformal region at `x` on `grid_points` candidates over the automatic window.
pub fn ls_region(
    data: &Dataset,
    mean_spec: ModelSpec,
    x: &[f64],
    alpha: f64,
    grid_points: usize,
) -> Result<IntervalUnion> {
    let config = ConformalConfig::with_alpha(alpha);
    ResidualConformal::with_config(data, mean_spec, &config, grid_points)?
        .region(x, Weighting::None)
}

/// LSLW conformal region at `x`.
pub fn lslw_region(
    data: &Dataset,
    mean_spec: ModelSpec,
    x: &[f64],
    alpha: f64,
    grid_points: usize,
) -> Result<IntervalUnion> {
    let config = ConformalConfig::with_alpha(alpha);
    ResidualConformal::with_config(data, mean_spec, &config, grid_points)?
        .region(x, Weighting::LocalDeviation)
}

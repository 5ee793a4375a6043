//! Simulation settings A, B and C and the Monte Carlo driver that runs
//! every region method over seeded replications.
//!
//! Replication `r` draws its data from a ChaCha stream selected by
//! `(master seed, r)`, so results do not depend on scheduling and
//! replications run in parallel.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::baseline::KernelConfig;
use crate::conformal::ConformalConfig;
use crate::diagnostics::{self, Coverage, DiagnosticsReport, Warnings};
use crate::error::{Error, Result};
use crate::glm::{Dataset, Link, ModelSpec};
pub use crate::methods::Method;
use crate::methods::{compute_regions, RegionSettings};
use crate::partition::{default_bins_per_dim, BinPartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SettingId {
    A,
    B,
    C,
}

impl fmt::Display for SettingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SettingId::A => "A",
            SettingId::B => "B",
            SettingId::C => "C",
        })
    }
}

impl FromStr for SettingId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(SettingId::A),
            "B" => Ok(SettingId::B),
            "C" => Ok(SettingId::C),
            other => Err(Error::Config(format!(
                "unknown setting '{other}' (expected A, B or C)"
            ))),
        }
    }
}

/// Default gamma shape for settings A and B.
pub const DEFAULT_SHAPE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSetting {
    pub id: SettingId,
    pub n: usize,
    pub true_beta: [f64; 2],
    /// Gamma shape (A and B).
    pub shape: f64,
    /// Error variance (C).
    pub sigma2: f64,
}

impl SimSetting {
    pub fn new(id: SettingId, n: usize, shape: Option<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("sample size must be positive".into()));
        }
        let shape = shape.unwrap_or(DEFAULT_SHAPE);
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::Config(format!("shape {shape} must be positive")));
        }
        let true_beta = match id {
            SettingId::A => [1.25, -1.0],
            SettingId::B => [0.5, 1.0],
            SettingId::C => [2.0, 5.0],
        };
        Ok(Self {
            id,
            n,
            true_beta,
            shape,
            sigma2: 1.0,
        })
    }

    pub fn a(n: usize, shape: f64) -> Result<Self> {
        Self::new(SettingId::A, n, Some(shape))
    }

    pub fn b(n: usize, shape: f64) -> Result<Self> {
        Self::new(SettingId::B, n, Some(shape))
    }

    pub fn c(n: usize) -> Result<Self> {
        Self::new(SettingId::C, n, None)
    }

    /// Model fitted by `method`, or `None` for the model-free kernel region.
    pub fn fit_spec(&self, method: Method) -> Option<ModelSpec> {
        let spec = match (self.id, method) {
            (_, Method::Kernel) => return None,
            (SettingId::A, Method::Trans | Method::Bin | Method::Hd) => {
                ModelSpec::gamma(Link::Inverse, 1)
            }
            (SettingId::A | SettingId::B, _) => ModelSpec::gaussian(3),
            (SettingId::C, _) => ModelSpec::gaussian(1),
        };
        Some(spec.expect("preset model specs are valid"))
    }

    /// Mean response at `x`.
    pub fn mean(&self, x: f64) -> f64 {
        let eta = self.true_beta[0] + self.true_beta[1] * x;
        match self.id {
            SettingId::A | SettingId::B => 1.0 / eta,
            SettingId::C => eta,
        }
    }

    /// Draws `n` observations from `rng`.
    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Dataset {
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.random();
            let y = match self.id {
                SettingId::A | SettingId::B => {
                    let rate = self.shape * (self.true_beta[0] + self.true_beta[1] * x);
                    Gamma::new(self.shape, 1.0 / rate)
                        .expect("rates are positive on [0, 1]")
                        .sample(rng)
                }
                SettingId::C => {
                    let e: f64 = StandardNormal.sample(rng);
                    self.mean(x) + self.sigma2.sqrt() * e
                }
            };
            xs.push(x);
            ys.push(y);
        }
        Dataset::new(1, xs, ys).expect("simulated values are finite")
    }
}

/// Master seed and replication index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master: u64,
    pub replication: u64,
}

const HELD_OUT_STREAM: u64 = 1 << 63;

impl SeedSpec {
    pub fn new(master: u64, replication: u64) -> Self {
        Self {
            master,
            replication,
        }
    }

    /// Stream for the training sample.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.replication);
        rng
    }

    /// Stream for held-out test points, disjoint from every training stream.
    pub fn held_out_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.replication | HELD_OUT_STREAM);
        rng
    }
}

/// Training sample of one replication.
pub fn generate(setting: &SimSetting, seed: SeedSpec) -> Dataset {
    setting.sample(&mut seed.rng(), setting.n)
}

/// Points the regions are evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Evaluation {
    /// The training sample itself.
    #[default]
    Training,
    /// A fresh draw of this many points per replication.
    HeldOut(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    pub conformal: ConformalConfig,
    /// Candidate grid size of the LS and LSLW regions.
    pub grid_points: usize,
    /// Bins per dimension; `None` applies the sample-size rule.
    pub bins: Option<usize>,
    pub fine_slices: usize,
    pub kernel: KernelConfig,
    pub evaluation: Evaluation,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            conformal: ConformalConfig::default(),
            grid_points: 100,
            bins: None,
            fine_slices: 10,
            kernel: KernelConfig::default(),
            evaluation: Evaluation::Training,
        }
    }
}

impl StudyConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            conformal: ConformalConfig::with_alpha(alpha),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.conformal.validate()?;
        self.kernel.validate()?;
        if self.grid_points < 2 {
            return Err(Error::Config("grid needs at least two points".into()));
        }
        if self.bins == Some(0) {
            return Err(Error::Config("bins must be positive".into()));
        }
        if self.fine_slices == 0 {
            return Err(Error::Config("fine slice count must be positive".into()));
        }
        if self.evaluation == Evaluation::HeldOut(0) {
            return Err(Error::Config(
                "held-out sample size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Replication-averaged metrics for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub reps_used: usize,
    pub skipped: usize,
    pub mean_marginal_coverage: f64,
    /// Mean over replications of each bin's coverage.
    pub mean_local_coverage: BTreeMap<usize, f64>,
    pub mean_area: f64,
    /// Mean over replications with at least one nonempty region.
    pub mean_prediction_error: f64,
    /// Coverage counts pooled over all replications.
    pub pooled: Coverage,
    pub warnings: Warnings,
    /// First error message among skipped replications.
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub setting: SimSetting,
    pub reps: usize,
    pub master_seed: u64,
    pub methods: BTreeMap<Method, MethodSummary>,
}

/// One replication: data, regions and diagnostics for every method.
pub fn run_replication(
    setting: &SimSetting,
    methods: &[Method],
    config: &StudyConfig,
    seed: SeedSpec,
) -> Vec<(Method, Result<DiagnosticsReport>)> {
    let train = generate(setting, seed);
    let bins = config
        .bins
        .unwrap_or_else(|| default_bins_per_dim(setting.n));
    let targets = match config.evaluation {
        Evaluation::Training => train.clone(),
        Evaluation::HeldOut(m) => setting.sample(&mut seed.held_out_rng(), m),
    };
    let points: Vec<Vec<f64>> = (0..targets.n()).map(|i| targets.x(i).to_vec()).collect();
    let settings = RegionSettings {
        conformal: config.conformal,
        grid_points: config.grid_points,
        kernel: config.kernel,
    };
    let partition = match BinPartition::uniform(1, bins) {
        Ok(p) => p,
        Err(e) => {
            return methods
                .iter()
                .map(|&m| (m, Err(Error::Config(e.to_string()))))
                .collect()
        }
    };
    methods
        .iter()
        .map(|&method| {
            let report = compute_regions(
                method,
                setting.fit_spec(method),
                &train,
                &points,
                &partition,
                &settings,
            )
            .and_then(|(regions, rejected)| {
                diagnostics::evaluate(
                    method.as_str(),
                    &regions,
                    &targets,
                    Some(&partition),
                    config.fine_slices,
                    rejected,
                )
            });
            (method, report)
        })
        .collect()
}

/// Runs `reps` replications in parallel and averages the diagnostics.
pub fn run_study(
    setting: &SimSetting,
    methods: &[Method],
    reps: usize,
    config: &StudyConfig,
    master_seed: u64,
) -> Result<StudyReport> {
    if reps == 0 {
        return Err(Error::Config("replication count must be positive".into()));
    }
    if methods.is_empty() {
        return Err(Error::Config("no methods selected".into()));
    }
    config.validate()?;
    let mut unique: Vec<Method> = methods.to_vec();
    unique.sort();
    unique.dedup();

    let per_rep: Vec<Vec<(Method, Result<DiagnosticsReport>)>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| run_replication(setting, &unique, config, SeedSpec::new(master_seed, r)))
        .collect();

    let mut methods_out = BTreeMap::new();
    for &method in &unique {
        let mut acc = Accumulator::default();
        for rep in &per_rep {
            for (m, report) in rep {
                if *m == method {
                    acc.add(report);
                }
            }
        }
        methods_out.insert(method, acc.finish(method));
    }
    Ok(StudyReport {
        setting: *setting,
        reps,
        master_seed,
        methods: methods_out,
    })
}

#[derive(Default)]
struct Accumulator {
    used: usize,
    skipped: usize,
    coverage_sum: f64,
    area_sum: f64,
    error_sum: f64,
    error_count: usize,
    local: BTreeMap<usize, (f64, usize)>,
    pooled: Coverage,
    warnings: Warnings,
    first_error: Option<String>,
}

impl Accumulator {
    fn add(&mut self, report: &Result<DiagnosticsReport>) {
        match report {
            Ok(r) => {
                self.used += 1;
                self.coverage_sum += r.marginal_coverage;
                self.area_sum += r.mean_area;
                if r.prediction_error.is_finite() {
                    self.error_sum += r.prediction_error;
                    self.error_count += 1;
                }
                for (bin, rate) in &r.local_coverage {
                    if rate.is_finite() {
                        let e = self.local.entry(*bin).or_insert((0.0, 0));
                        e.0 += rate;
                        e.1 += 1;
                    }
                }
                self.pooled.merge(&r.coverage);
                self.warnings.merge(r.warnings);
            }
            Err(e) => {
                self.skipped += 1;
                self.first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }

    fn finish(self, method: Method) -> MethodSummary {
        let mean = |sum: f64, count: usize| {
            if count == 0 {
                f64::NAN
            } else {
                sum / count as f64
            }
        };
        MethodSummary {
            method,
            reps_used: self.used,
            skipped: self.skipped,
            mean_marginal_coverage: mean(self.coverage_sum, self.used),
            mean_local_coverage: self
                .local
                .into_iter()
                .map(|(bin, (sum, count))| (bin, mean(sum, count)))
                .collect(),
            mean_area: mean(self.area_sum, self.used),
            mean_prediction_error: mean(self.error_sum, self.error_count),
            pooled: self.pooled,
            warnings: self.warnings,
            first_error: self.first_error,
        }
    }
}

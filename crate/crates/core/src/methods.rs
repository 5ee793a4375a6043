//! The six region methods behind one dispatch function.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::baseline::{KernelConfig, KernelConformal, ResidualConformal, Weighting};
use crate::conformal::{ConformalConfig, IntervalUnion};
use crate::error::{Error, Result};
use crate::glm::{Dataset, ModelSpec};
use crate::parametric::ParametricConformal;
use crate::partition::BinPartition;

/// Region construction methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Trans,
    Bin,
    Kernel,
    Ls,
    Lslw,
    Hd,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Trans,
        Method::Bin,
        Method::Kernel,
        Method::Ls,
        Method::Lslw,
        Method::Hd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Trans => "trans",
            Method::Bin => "bin",
            Method::Kernel => "kernel",
            Method::Ls => "ls",
            Method::Lslw => "lslw",
            Method::Hd => "hd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == key)
            .ok_or_else(|| {
                let valid: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
                Error::Config(format!(
                    "unknown method '{s}' (valid methods: {})",
                    valid.join(", ")
                ))
            })
    }
}

/// Settings shared by all methods when computing regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSettings {
    pub conformal: ConformalConfig,
    /// Candidate grid size of the LS and LSLW regions.
    pub grid_points: usize,
    pub kernel: KernelConfig,
}

impl Default for RegionSettings {
    fn default() -> Self {
        Self {
            conformal: ConformalConfig::default(),
            grid_points: 100,
            kernel: KernelConfig::default(),
        }
    }
}

/// Regions of `method` at each query point, trained on `train`, with the
/// number of candidate tests that failed and were treated as rejections.
///
/// `spec` is the fitted model for the parametric methods and the mean model
/// for LS/LSLW; it is ignored by the kernel method. Query points are
/// processed in parallel and returned in input order.
pub fn compute_regions(
    method: Method,
    spec: Option<ModelSpec>,
    train: &Dataset,
    points: &[Vec<f64>],
    partition: &BinPartition,
    settings: &RegionSettings,
) -> Result<(Vec<IntervalUnion>, usize)> {
    let need_spec = || {
        spec.ok_or_else(|| Error::Config(format!("method '{method}' needs a model specification")))
    };
    match method {
        Method::Kernel => {
            let kc = KernelConformal::new(
                train,
                partition.clone(),
                settings.conformal,
                settings.kernel,
            )?;
            let regions = points
                .iter()
                .map(|x| kc.region(x).map(|o| o.region))
                .collect::<Result<Vec<_>>>()?;
            Ok((regions, 0))
        }
        Method::Ls | Method::Lslw => {
            let rc = ResidualConformal::with_config(
                train,
                need_spec()?,
                &settings.conformal,
                settings.grid_points,
            )?;
            let weighting = if method == Method::Ls {
                Weighting::None
            } else {
                Weighting::LocalDeviation
            };
            let regions = points
                .par_iter()
                .map(|x| rc.region(x, weighting))
                .collect::<Result<Vec<_>>>()?;
            Ok((regions, 0))
        }
        Method::Hd => {
            let pc = ParametricConformal::new(train, need_spec()?, settings.conformal)?;
            let regions = points
                .iter()
                .map(|x| pc.hd_region(x))
                .collect::<Result<Vec<_>>>()?;
            Ok((regions, 0))
        }
        Method::Trans | Method::Bin => {
            let pc = ParametricConformal::new(train, need_spec()?, settings.conformal)?;
            let outcomes = points
                .par_iter()
                .map(|x| {
                    if method == Method::Trans {
                        pc.transform_region(x)
                    } else {
                        pc.binned_region(partition, x)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let rejected = outcomes.iter().map(|o| o.warnings).sum();
            Ok((outcomes.into_iter().map(|o| o.region).collect(), rejected))
        }
    }
}

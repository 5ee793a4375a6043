//! Equal-width axis-aligned partitions of the predictor rectangle.

use crate::error::{Error, Result};
use crate::glm::Dataset;

/// Grid of equal-width cells over `[lo, hi]`. Each axis has its own bin
/// count; cells are left-closed and right-open except the last one on each
/// axis, which is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct BinPartition {
    bins: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Default bins per dimension: 2 below 250 observations, 3 from there on.
pub fn default_bins_per_dim(n: usize) -> usize {
    if n < 250 {
        2
    } else {
        3
    }
}

impl BinPartition {
    /// `bins_per_dim` bins along every axis of `[0, 1]^d`.
    pub fn uniform(d: usize, bins_per_dim: usize) -> Result<Self> {
        Self::new(vec![bins_per_dim; d], vec![0.0; d], vec![1.0; d])
    }

    /// Bins along a single axis of `[0, 1]^d`, no splits elsewhere. With two
    /// bins on a 0/1-coded column this separates the two levels.
    pub fn along(d: usize, axis: usize, bins: usize) -> Result<Self> {
        if axis >= d {
            return Err(Error::Config(format!(
                "axis {axis} out of range for dimension {d}"
            )));
        }
        let mut counts = vec![1; d];
        counts[axis] = bins;
        Self::new(counts, vec![0.0; d], vec![1.0; d])
    }

    pub fn new(bins: Vec<usize>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if bins.len() != lo.len() || lo.len() != hi.len() {
            return Err(Error::LengthMismatch(
                "partition bounds and bin counts".into(),
            ));
        }
        if bins.contains(&0) {
            return Err(Error::Config("bins per dimension must be positive".into()));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
        {
            return Err(Error::Config(
                "partition bounds must satisfy lo < hi".into(),
            ));
        }
        Ok(Self { bins, lo, hi })
    }

    pub fn d(&self) -> usize {
        self.bins.len()
    }

    pub fn bins_per_dim(&self) -> &[usize] {
        &self.bins
    }

    pub fn n_bins(&self) -> usize {
        self.bins.iter().product()
    }

    /// Cell index of `x`; the first axis varies slowest.
    pub fn assign_bin(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.d() {
            return Err(Error::LengthMismatch(format!(
                "point of dimension {} for a partition of dimension {}",
                x.len(),
                self.d()
            )));
        }
        let mut index = 0;
        for (j, &v) in x.iter().enumerate() {
            let (lo, hi, b) = (self.lo[j], self.hi[j], self.bins[j]);
            if !(v >= lo && v <= hi) {
                return Err(Error::OutsidePartition(x.to_vec()));
            }
            let cell = (((v - lo) / (hi - lo)) * b as f64).floor() as usize;
            index = index * b + cell.min(b - 1);
        }
        Ok(index)
    }

    /// Bin of every row of `data`.
    pub fn assign_all(&self, data: &Dataset) -> Result<Vec<usize>> {
        (0..data.n()).map(|i| self.assign_bin(data.x(i))).collect()
    }

    /// Training rows per bin.
    pub fn counts(&self, data: &Dataset) -> Result<Vec<usize>> {
        let mut counts = vec![0; self.n_bins()];
        for b in self.assign_all(data)? {
            counts[b] += 1;
        }
        Ok(counts)
    }
}

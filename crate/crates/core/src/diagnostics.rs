//! Evaluation metrics for prediction regions: coverage (marginal, per bin
//! and per fine slice of each predictor), mean area and prediction error.

use std::collections::BTreeMap;

use crate::conformal::IntervalUnion;
use crate::error::{Error, Result};
use crate::glm::Dataset;
use crate::partition::BinPartition;

/// Covered and total counts for one group of points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub covered: usize,
    pub total: usize,
}

impl Tally {
    pub fn add(&mut self, covered: bool) {
        self.total += 1;
        self.covered += usize::from(covered);
    }

    pub fn merge(&mut self, other: Tally) {
        self.covered += other.covered;
        self.total += other.total;
    }

    /// Covered fraction; `NaN` for an empty group.
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            f64::NAN
        } else {
            self.covered as f64 / self.total as f64
        }
    }
}

/// Coverage counts at all three granularities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Coverage {
    pub overall: Tally,
    /// Keyed by partition bin.
    pub local: BTreeMap<usize, Tally>,
    /// Keyed by (main effect, slice).
    pub conditional: BTreeMap<(usize, usize), Tally>,
}

impl Coverage {
    pub fn marginal(&self) -> f64 {
        self.overall.rate()
    }

    pub fn merge(&mut self, other: &Coverage) {
        self.overall.merge(other.overall);
        for (k, t) in &other.local {
            self.local.entry(*k).or_default().merge(*t);
        }
        for (k, t) in &other.conditional {
            self.conditional.entry(*k).or_default().merge(*t);
        }
    }
}

fn check_lengths(regions: usize, responses: usize) -> Result<()> {
    if regions != responses {
        return Err(Error::LengthMismatch(format!(
            "{regions} regions for {responses} responses"
        )));
    }
    Ok(())
}

/// Mean squared distance from uncovered responses to the nearest region
/// boundary, averaged over all points with a nonempty region. Empty regions
/// are skipped (see [`count_empty`]); `NaN` when every region is empty.
pub fn prediction_error(regions: &[IntervalUnion], responses: &[f64]) -> Result<f64> {
    check_lengths(regions.len(), responses.len())?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (region, &y) in regions.iter().zip(responses) {
        if let Some(dist) = region.distance(y) {
            total += dist * dist;
            count += 1;
        }
    }
    Ok(if count == 0 {
        f64::NAN
    } else {
        total / count as f64
    })
}

/// Average total length of the regions; an empty region counts as zero.
pub fn mean_area(regions: &[IntervalUnion]) -> Result<f64> {
    if regions.is_empty() {
        return Err(Error::InvalidInput("no regions to average".into()));
    }
    Ok(regions.iter().map(IntervalUnion::area).sum::<f64>() / regions.len() as f64)
}

pub fn count_empty(regions: &[IntervalUnion]) -> usize {
    regions.iter().filter(|r| r.is_empty()).count()
}

/// Slice of `[0, 1]` holding `v` among `slices` equal-width slices.
fn fine_slice(v: f64, slices: usize) -> Option<usize> {
    if !(0.0..=1.0).contains(&v) {
        return None;
    }
    Some(((v * slices as f64).floor() as usize).min(slices - 1))
}

/// Closed-interval coverage of `points` by `regions`, overall, per bin of
/// `partition` and per fine slice of each main effect.
pub fn coverage(
    regions: &[IntervalUnion],
    points: &Dataset,
    partition: Option<&BinPartition>,
    fine_slices: usize,
) -> Result<Coverage> {
    check_lengths(regions.len(), points.n())?;
    if fine_slices == 0 {
        return Err(Error::Config("fine slice count must be positive".into()));
    }
    let mut out = Coverage::default();
    for (i, region) in regions.iter().enumerate() {
        let x = points.x(i);
        let covered = region.contains(points.y(i));
        out.overall.add(covered);
        if let Some(p) = partition {
            out.local.entry(p.assign_bin(x)?).or_default().add(covered);
        }
        for (j, &v) in x.iter().enumerate() {
            let slice =
                fine_slice(v, fine_slices).ok_or_else(|| Error::OutsidePartition(x.to_vec()))?;
            out.conditional.entry((j, slice)).or_default().add(covered);
        }
    }
    Ok(out)
}

/// Counters of recoverable problems met while building regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Warnings {
    /// Points whose region was empty.
    pub empty_regions: usize,
    /// Candidate acceptance tests that failed and were treated as rejections.
    pub rejected_candidates: usize,
}

impl Warnings {
    pub fn merge(&mut self, other: Warnings) {
        self.empty_regions += other.empty_regions;
        self.rejected_candidates += other.rejected_candidates;
    }
}

/// All metrics for one method on one set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub method: String,
    pub marginal_coverage: f64,
    pub local_coverage: BTreeMap<usize, f64>,
    pub conditional_coverage: BTreeMap<(usize, usize), f64>,
    pub mean_area: f64,
    pub prediction_error: f64,
    pub n_points: usize,
    pub coverage: Coverage,
    pub warnings: Warnings,
}

/// Computes every metric of `regions` against `points`.
pub fn evaluate(
    method: &str,
    regions: &[IntervalUnion],
    points: &Dataset,
    partition: Option<&BinPartition>,
    fine_slices: usize,
    rejected_candidates: usize,
) -> Result<DiagnosticsReport> {
    let cov = coverage(regions, points, partition, fine_slices)?;
    Ok(DiagnosticsReport {
        method: method.to_string(),
        marginal_coverage: cov.marginal(),
        local_coverage: cov.local.iter().map(|(k, t)| (*k, t.rate())).collect(),
        conditional_coverage: cov
            .conditional
            .iter()
            .map(|(k, t)| (*k, t.rate()))
            .collect(),
        mean_area: mean_area(regions)?,
        prediction_error: prediction_error(regions, points.response())?,
        n_points: regions.len(),
        coverage: cov,
        warnings: Warnings {
            empty_regions: count_empty(regions),
            rejected_candidates,
        },
    })
}

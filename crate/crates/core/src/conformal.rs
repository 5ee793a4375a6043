//! Full-conformal machinery shared by every region type: conformity ranks,
//! adjusted levels, prediction-region containers and the grid-then-bisect
//! search that turns an acceptance test into a union of intervals.

use crate::error::{Error, Result};

/// Search window for candidate responses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchWindow {
    /// Observed response range widened by half its length on each side.
    Auto,
    Explicit {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalConfig {
    pub alpha: f64,
    /// Response-scale resolution of region boundaries.
    pub precision: f64,
    pub window: SearchWindow,
    pub refit_tol: f64,
    pub refit_max_iter: usize,
}

impl Default for ConformalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            precision: 0.005,
            window: SearchWindow::Auto,
            refit_tol: 1e-8,
            refit_max_iter: 25,
        }
    }
}

/// Lower bound of the auto window for positive-support families.
pub const POSITIVE_FLOOR: f64 = 1e-9;

impl ConformalConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if !(self.precision > 0.0 && self.precision.is_finite()) {
            return Err(Error::Config(format!(
                "precision {} must be positive",
                self.precision
            )));
        }
        if let SearchWindow::Explicit { lo, hi } = self.window {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::Config(format!(
                    "search window [{lo}, {hi}] is empty"
                )));
            }
        }
        if !(self.refit_tol > 0.0) || self.refit_max_iter == 0 {
            return Err(Error::Config(
                "refit tolerance and iteration cap must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Resolves the search window for responses spanning `range`.
    pub fn resolve_window(&self, range: (f64, f64), positive_support: bool) -> Result<(f64, f64)> {
        let (lo, hi) = match self.window {
            SearchWindow::Explicit { lo, hi } => (lo, hi),
            SearchWindow::Auto => auto_window(range, positive_support),
        };
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Config(format!(
                "search window [{lo}, {hi}] is empty"
            )));
        }
        Ok((lo, hi))
    }
}

/// Response range widened by 50% on each side, floored for positive families.
/// A zero-width range is widened by one unit so the window is never empty.
pub fn auto_window((min, max): (f64, f64), positive_support: bool) -> (f64, f64) {
    let span = if max > min { max - min } else { 1.0 };
    let mut lo = min - 0.5 * span;
    let hi = max + 0.5 * span;
    if positive_support {
        lo = lo.max(POSITIVE_FLOOR);
    }
    (lo, hi)
}

/// `⌊(n+1)α⌋ / (n+1)`.
pub fn adjusted_level(n_local: usize, alpha: f64) -> f64 {
    adjusted_count(n_local, alpha) as f64 / (n_local + 1) as f64
}

/// `⌊(n+1)α⌋`, the integer form of [`adjusted_level`].
pub fn adjusted_count(n_local: usize, alpha: f64) -> usize {
    ((n_local + 1) as f64 * alpha).floor() as usize
}

/// `(1 + #{s ≤ candidate}) / (len + 1)`.
pub fn conformity_rank(others: &[f64], candidate: f64) -> Result<f64> {
    if others.is_empty() {
        return Err(Error::InvalidInput(
            "conformity rank needs at least one score".into(),
        ));
    }
    if !candidate.is_finite() || others.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite conformity score".into()));
    }
    let below = others.iter().filter(|&&s| s <= candidate).count();
    Ok((1 + below) as f64 / (others.len() + 1) as f64)
}

/// Ordered, pairwise disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalUnion {
    pieces: Vec<(f64, f64)>,
}

impl IntervalUnion {
    /// Validates ordering and disjointness.
    pub fn new(pieces: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &pieces {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidInput(format!("invalid interval ({a}, {b})")));
            }
        }
        if pieces.windows(2).any(|w| w[0].1 >= w[1].0) {
            return Err(Error::InvalidInput(
                "interval pieces overlap or are unsorted".into(),
            ));
        }
        Ok(Self { pieces })
    }

    pub fn single(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![(lower, upper)])
    }

    pub fn empty() -> Self {
        Self { pieces: Vec::new() }
    }

    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    /// Closed-interval membership.
    pub fn contains(&self, y: f64) -> bool {
        self.pieces.iter().any(|&(a, b)| a <= y && y <= b)
    }

    /// Total length of all pieces.
    pub fn area(&self) -> f64 {
        self.pieces.iter().map(|(a, b)| b - a).sum()
    }

    /// Distance from `y` to the nearest boundary, zero when covered and
    /// `None` for an empty region.
    pub fn distance(&self, y: f64) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        if self.contains(y) {
            return Some(0.0);
        }
        self.pieces
            .iter()
            .map(|&(a, b)| (y - a).abs().min((y - b).abs()))
            .min_by(f64::total_cmp)
    }

    pub fn lower(&self) -> Option<f64> {
        self.pieces.first().map(|p| p.0)
    }

    pub fn upper(&self) -> Option<f64> {
        self.pieces.last().map(|p| p.1)
    }
}

/// Region plus bookkeeping from an acceptance search.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionOutcome {
    pub region: IntervalUnion,
    /// Candidates whose acceptance test failed with an error (treated as rejected).
    pub warnings: usize,
    pub evaluations: usize,
}

/// Evaluates `accept` on `{lo, lo + precision, …, hi}`, turns maximal runs of
/// accepted grid points into pieces and refines each interior boundary by
/// bisection to a bracket of width `precision / 2`, reporting its midpoint.
/// Pieces separated by at most `precision` are merged.
pub fn region_from_acceptance<F>(
    mut accept: F,
    (lo, hi): (f64, f64),
    precision: f64,
) -> Result<RegionOutcome>
where
    F: FnMut(f64) -> Result<bool>,
{
    if !(lo < hi) || !(precision > 0.0) {
        return Err(Error::Config(format!(
            "search window [{lo}, {hi}] with precision {precision}"
        )));
    }
    let steps = ((hi - lo) / precision).floor() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|k| lo + k as f64 * precision).collect();
    if hi - grid[steps] > 1e-9 * precision {
        grid.push(hi);
    } else {
        grid[steps] = hi;
    }

    let mut warnings = 0;
    let mut evaluations = 0;
    let mut test = |y: f64| -> bool {
        evaluations += 1;
        match accept(y) {
            Ok(ok) => ok,
            Err(_) => {
                warnings += 1;
                false
            }
        }
    };

    let flags: Vec<bool> = grid.iter().map(|&y| test(y)).collect();
    let mut runs = Vec::new();
    let mut k = 0;
    while k < flags.len() {
        if flags[k] {
            let start = k;
            while k + 1 < flags.len() && flags[k + 1] {
                k += 1;
            }
            runs.push((start, k));
        }
        k += 1;
    }

    let target = 0.5 * precision;
    let mut pieces: Vec<(f64, f64)> = Vec::with_capacity(runs.len());
    for (first, last) in runs {
        let lower = if first == 0 {
            grid[0]
        } else {
            refine(&mut test, grid[first - 1], grid[first], target)
        };
        let upper = if last + 1 == grid.len() {
            grid[last]
        } else {
            refine(&mut test, grid[last + 1], grid[last], target)
        };
        match pieces.last_mut() {
            Some(prev) if lower - prev.1 <= precision => prev.1 = upper,
            _ => pieces.push((lower, upper)),
        }
    }
    Ok(RegionOutcome {
        region: IntervalUnion { pieces },
        warnings,
        evaluations,
    })
}

/// Bisects between a rejected and an accepted point until the bracket is no
/// wider than `target`; returns the bracket midpoint.
fn refine<T: FnMut(f64) -> bool>(test: &mut T, mut out: f64, mut inside: f64, target: f64) -> f64 {
    while (inside - out).abs() > target {
        let mid = 0.5 * (inside + out);
        if test(mid) {
            inside = mid;
        } else {
            out = mid;
        }
    }
    0.5 * (inside + out)
}

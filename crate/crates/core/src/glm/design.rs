use nalgebra::DMatrix;

use super::spec::ModelSpec;
use crate::error::{Error, Result};

/// Observed predictors (main effects, row-major) and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from row-major main effects with `d` columns.
    pub fn new(d: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != d * ys.len() {
            return Err(Error::LengthMismatch(format!(
                "{} predictor values for {} rows of dimension {d}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in dataset".into()));
        }
        Ok(Self { d, xs, ys })
    }

    pub fn from_rows(rows: &[Vec<f64>], ys: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.len() != ys.len() {
            return Err(Error::LengthMismatch(format!(
                "{} predictor rows for {} responses",
                rows.len(),
                ys.len()
            )));
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("ragged predictor rows".into()));
        }
        Self::new(d, rows.concat(), ys)
    }

    /// Intercept-only data: no main effects.
    pub fn response_only(ys: Vec<f64>) -> Result<Self> {
        Self::new(0, Vec::new(), ys)
    }

    pub fn n(&self) -> usize {
        self.ys.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.d..(i + 1) * self.d]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn response(&self) -> &[f64] {
        &self.ys
    }

    pub fn main_effects(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n(), self.d, &self.xs)
    }

    /// Observed response range `(min, max)`.
    pub fn response_range(&self) -> (f64, f64) {
        self.ys
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
                (lo.min(y), hi.max(y))
            })
    }

    /// Rows reordered so that row `i` of the result is row `order[i]` here.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut xs = Vec::with_capacity(self.xs.len());
        let mut ys = Vec::with_capacity(self.ys.len());
        for &i in order {
            xs.extend_from_slice(self.x(i));
            ys.push(self.ys[i]);
        }
        Self { d: self.d, xs, ys }
    }

    /// Copy of the data with one extra observation appended.
    pub fn augmented(&self, x: &[f64], y: f64) -> Result<Self> {
        if x.len() != self.d {
            return Err(Error::LengthMismatch(format!(
                "point of dimension {} for data of dimension {}",
                x.len(),
                self.d
            )));
        }
        let mut out = self.clone();
        out.xs.extend_from_slice(x);
        out.ys.push(y);
        Ok(out)
    }

    /// Builds the expanded design for `spec`.
    pub fn design(&self, spec: &ModelSpec) -> Result<Design> {
        expand_design(&self.main_effects(), spec)
    }
}

/// Expanded feature matrix: intercept, then per main effect the powers
/// `x, x², …, x^degree`. No interaction terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    main_effects: DMatrix<f64>,
    features: DMatrix<f64>,
    rows: Vec<f64>,
    degree: usize,
}

impl Design {
    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.main_effects.ncols()
    }

    pub fn m(&self) -> usize {
        self.features.ncols()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn main_effects(&self) -> &DMatrix<f64> {
        &self.main_effects
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    /// Expanded features of row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.m();
        &self.rows[i * m..(i + 1) * m]
    }

    /// Design with one extra expanded row appended.
    pub fn with_row(&self, x: &[f64]) -> Result<Design> {
        let mut me = self
            .main_effects
            .clone()
            .resize_vertically(self.n() + 1, 0.0);
        if x.len() != self.d() {
            return Err(Error::LengthMismatch(format!(
                "point of dimension {} for a design of dimension {}",
                x.len(),
                self.d()
            )));
        }
        for (j, v) in x.iter().enumerate() {
            me[(self.n(), j)] = *v;
        }
        build(me, self.degree)
    }
}

/// Expanded features for a single point.
pub fn expand_point(x: &[f64], degree: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(1 + x.len() * degree);
    out.push(1.0);
    for &v in x {
        let mut p = 1.0;
        for _ in 0..degree {
            p *= v;
            out.push(p);
        }
    }
    out
}

/// Expands an `n × d` main-effect matrix into the polynomial design of `spec`.
pub fn expand_design(main_effects: &DMatrix<f64>, spec: &ModelSpec) -> Result<Design> {
    if main_effects.nrows() == 0 {
        return Err(Error::InvalidInput("design needs at least one row".into()));
    }
    if main_effects.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite main effect".into()));
    }
    build(main_effects.clone(), spec.degree())
}

fn build(main_effects: DMatrix<f64>, degree: usize) -> Result<Design> {
    let n = main_effects.nrows();
    let d = main_effects.ncols();
    let m = 1 + d * degree;
    let mut rows = Vec::with_capacity(n * m);
    let mut point = vec![0.0; d];
    for i in 0..n {
        for (j, v) in point.iter_mut().enumerate() {
            *v = main_effects[(i, j)];
        }
        rows.extend(expand_point(&point, degree));
    }
    let features = DMatrix::from_row_slice(n, m, &rows);
    Ok(Design {
        main_effects,
        features,
        rows,
        degree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::Link;

    fn features_of(x: &[f64], degree: usize) -> Vec<f64> {
        let spec = if degree == 1 {
            ModelSpec::gaussian(1).unwrap()
        } else {
            ModelSpec::gamma(Link::Log, degree).unwrap()
        };
        let me = DMatrix::from_row_slice(1, x.len(), x);
        expand_design(&me, &spec).unwrap().row(0).to_vec()
    }

    #[test]
    fn expansion_examples() {
        assert_eq!(features_of(&[0.5], 1), vec![1.0, 0.5]);
        assert_eq!(features_of(&[2.0], 3), vec![1.0, 2.0, 4.0, 8.0]);
        assert_eq!(features_of(&[0.0], 3), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn expansion_orders_powers_per_effect() {
        assert_eq!(features_of(&[2.0, 3.0], 2), vec![1.0, 2.0, 4.0, 3.0, 9.0]);
        assert_eq!(features_of(&[], 3), vec![1.0]);
    }

    #[test]
    fn rejects_non_finite() {
        let me = DMatrix::from_row_slice(2, 1, &[0.1, f64::NAN]);
        assert!(expand_design(&me, &ModelSpec::gaussian(1).unwrap()).is_err());
        assert!(Dataset::new(1, vec![0.1, 0.2], vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn with_row_appends() {
        let ds = Dataset::new(1, vec![0.1, 0.2, 0.3], vec![1.0, 2.0, 3.0]).unwrap();
        let design = ds.design(&ModelSpec::gaussian(2).unwrap()).unwrap();
        let aug = design.with_row(&[0.5]).unwrap();
        assert_eq!(aug.n(), 4);
        assert_eq!(aug.row(3), &[1.0, 0.5, 0.25]);
        assert_eq!(aug.row(1), design.row(1));
    }
}

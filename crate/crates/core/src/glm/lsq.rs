use nalgebra::{DMatrix, DVector};

use super::design::Design;
use crate::error::{Error, Result};

/// Ordinary least squares through the normal equations, keeping the inverse
/// Gram matrix so that one-row augmentations can be solved by a rank-one
/// update.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    gram_inv: DMatrix<f64>,
    beta: Vec<f64>,
    rss: f64,
    n: usize,
}

impl LeastSquares {
    pub fn fit(design: &Design, response: &[f64]) -> Result<Self> {
        if design.n() != response.len() {
            return Err(Error::LengthMismatch(format!(
                "design has {} rows, response has {}",
                design.n(),
                response.len()
            )));
        }
        let x = design.features();
        let gram = x.tr_mul(x);
        let chol = gram.cholesky().ok_or(Error::Singular)?;
        let pivots = chol.l_dirty().diagonal().map(|v| v * v);
        if pivots.min() <= 1e-13 * pivots.max() {
            return Err(Error::Singular);
        }
        let gram_inv = chol.inverse();
        if gram_inv.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular);
        }
        let y = DVector::from_column_slice(response);
        let xty = x.tr_mul(&y);
        let beta = chol.solve(&xty);
        let rss = (0..design.n())
            .map(|i| {
                let r = response[i] - dot(design.row(i), beta.as_slice());
                r * r
            })
            .sum();
        Ok(Self {
            gram_inv,
            beta: beta.as_slice().to_vec(),
            rss,
            n: design.n(),
        })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn rss(&self) -> f64 {
        self.rss
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    /// Precomputes the rank-one update for adding a row with features `x`.
    pub fn augment(&self, x: &[f64]) -> AugmentedLeastSquares {
        let xv = DVector::from_column_slice(x);
        let v = &self.gram_inv * &xv;
        let leverage = xv.dot(&v);
        AugmentedLeastSquares {
            beta: self.beta.clone(),
            v: v.as_slice().to_vec(),
            leverage,
            x: x.to_vec(),
            rss: self.rss,
            n: self.n,
        }
    }
}

/// Least squares on the data plus one extra row `(x, y)`, as a closed-form
/// function of the candidate response `y`.
#[derive(Debug, Clone)]
pub struct AugmentedLeastSquares {
    beta: Vec<f64>,
    v: Vec<f64>,
    leverage: f64,
    x: Vec<f64>,
    rss: f64,
    n: usize,
}

impl AugmentedLeastSquares {
    /// Coefficients of the augmented fit, written into `out`.
    pub fn coefficients_into(&self, y: f64, out: &mut [f64]) {
        let e = y - dot(&self.x, &self.beta);
        let k = e / (1.0 + self.leverage);
        for ((o, b), v) in out.iter_mut().zip(&self.beta).zip(&self.v) {
            *o = b + k * v;
        }
    }

    pub fn coefficients(&self, y: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.beta.len()];
        self.coefficients_into(y, &mut out);
        out
    }

    /// Residual sum of squares of the augmented fit over all `n + 1` rows.
    pub fn rss(&self, y: f64) -> f64 {
        let e = y - dot(&self.x, &self.beta);
        self.rss + e * e / (1.0 + self.leverage)
    }

    /// Rows in the augmented fit.
    pub fn n(&self) -> usize {
        self.n + 1
    }

    pub fn leverage(&self) -> f64 {
        self.leverage
    }

    /// `A⁻¹x`, the direction in which the coefficients move with `y`.
    pub fn direction(&self) -> &[f64] {
        &self.v
    }

    /// Fitted value of the base fit at the added row.
    pub fn base_fitted(&self) -> f64 {
        dot(&self.x, &self.beta)
    }

    /// Inverse Gram matrix of the augmented design.
    pub fn gram_inv(&self, base: &DMatrix<f64>) -> DMatrix<f64> {
        let v = DVector::from_column_slice(&self.v);
        base - (&v * v.transpose()) / (1.0 + self.leverage)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

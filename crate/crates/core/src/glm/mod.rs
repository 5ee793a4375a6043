//! Generalized linear models with polynomial main-effect designs: model
//! specification, design expansion, conditional distributions and maximum
//! likelihood fitting.

mod design;
mod distribution;
mod fit;
mod lsq;
mod spec;

pub use design::{expand_design, expand_point, Dataset, Design};
pub use distribution::{Conditional, HdInterval, Standard};
pub use fit::{
    fit_mle, fit_mle_with, log_likelihood, score, Evaluator, FitOptions, FittedModel, ModelParams,
};
pub use lsq::{AugmentedLeastSquares, LeastSquares};
pub use spec::{Family, Link, ModelSpec};

pub(crate) use lsq::dot;

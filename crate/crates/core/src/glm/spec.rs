use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Gaussian,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Link {
    Identity,
    Inverse,
    Log,
}

impl Link {
    /// Mean as a function of the linear predictor.
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Inverse => 1.0 / eta,
            Link::Log => eta.exp(),
        }
    }

    /// Link function g(μ).
    pub fn link(self, mu: f64) -> f64 {
        match self {
            Link::Identity => mu,
            Link::Inverse => 1.0 / mu,
            Link::Log => mu.ln(),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Gaussian => "gaussian",
            Family::Gamma => "gamma",
        })
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Link::Identity => "identity",
            Link::Inverse => "inverse",
            Link::Log => "log",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "gamma" => Ok(Family::Gamma),
            other => Err(Error::InvalidSpec(format!(
                "unknown family '{other}' (expected gaussian or gamma)"
            ))),
        }
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(Link::Identity),
            "inverse" => Ok(Link::Inverse),
            "log" => Ok(Link::Log),
            other => Err(Error::InvalidSpec(format!(
                "unknown link '{other}' (expected identity, inverse or log)"
            ))),
        }
    }
}

/// Family, link and polynomial degree of the main-effect expansion.
/// An intercept is always included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    family: Family,
    link: Link,
    degree: usize,
}

impl ModelSpec {
    pub fn new(family: Family, link: Link, degree: usize) -> Result<Self> {
        let ok = matches!(
            (family, link),
            (Family::Gaussian, Link::Identity) | (Family::Gamma, Link::Inverse | Link::Log)
        );
        if !ok {
            return Err(Error::InvalidSpec(format!(
                "link '{link}' is not supported for the {family} family"
            )));
        }
        if degree == 0 {
            return Err(Error::InvalidSpec(
                "formula degree must be at least 1".into(),
            ));
        }
        Ok(Self {
            family,
            link,
            degree,
        })
    }

    /// Gaussian family with identity link.
    pub fn gaussian(degree: usize) -> Result<Self> {
        Self::new(Family::Gaussian, Link::Identity, degree)
    }

    pub fn gamma(link: Link, degree: usize) -> Result<Self> {
        Self::new(Family::Gamma, link, degree)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn intercept(&self) -> bool {
        true
    }

    /// Number of expanded features for `d` main effects, intercept included.
    pub fn n_features(&self, d: usize) -> usize {
        1 + d * self.degree
    }

    /// Whether the response must be strictly positive.
    pub fn positive_support(&self) -> bool {
        self.family == Family::Gamma
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, degree {})", self.family, self.link, self.degree)
    }
}

use std::fmt;

use crate::quadrature::QuadratureError;

/// Which side of an integration or summation domain misbehaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Lower,
    Upper,
}

impl fmt::Display for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tail::Lower => f.write_str("lower"),
            Tail::Upper => f.write_str("upper"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point {x} lies outside the closure of the convex core [{lower}, {upper}]")]
    UnsupportedPoint { x: f64, lower: f64, upper: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty observation window")]
    EmptyWindow,

    #[error("normalizer diverges in the {tail} tail: {detail}")]
    DivergentNormalizer { tail: Tail, detail: String },

    #[error("Jeffreys posterior is improper ({tail} tail diverges): {detail}")]
    ImproperPosterior { tail: Tail, detail: String },

    #[error("integral diverges in the {tail} tail: {detail}")]
    DivergentIntegral { tail: Tail, detail: String },

    #[error("horizon too large: {requested} continuation steps requested, at most {max} supported")]
    HorizonTooLarge { requested: usize, max: usize },

    #[error("map is not strictly monotone on the support: {0}")]
    NonMonotone(String),

    #[error("differentiation failed: {0}")]
    Differentiation(String),

    #[error("invalid family specification: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

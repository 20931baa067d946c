//! JSON form of [`FamilySpec`].
//!
//! ```json
//! {"kind": "gamma_shape", "shape": 2.0, "mean_domain": [0, "inf"]}
//! ```
//!
//! `kind` is one of `gaussian_location` (key `variance`), `gamma_shape`
//! (key `shape`), `tweedie32`, `bernoulli`, `poisson`, or `transformed`
//! (keys `base`, a nested spec, and `map`, a [`MonotoneMap`]). The optional
//! `mean_domain` pair accepts numbers or the strings `"inf"`/`"-inf"`; the
//! optional `mean_domain_closed` pair marks finite endpoints as included.
//! Without it, finite endpoints are included unless they are convex-core
//! endpoints without an atom.

use serde::{Deserialize, Serialize};

use super::{FamilyKind, FamilySpec, Interval, MonotoneMap};
use crate::error::Error;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum KindRepr {
    GaussianLocation { variance: f64 },
    GammaShape { shape: f64 },
    Tweedie32,
    Bernoulli,
    Poisson,
    Transformed { base: Box<FamilySpec>, map: MonotoneMap },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Endpoint {
    Number(f64),
    Text(String),
}

impl Endpoint {
    fn value(&self) -> Result<f64, Error> {
        match self {
            Endpoint::Number(x) => Ok(*x),
            Endpoint::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => other
                    .parse()
                    .map_err(|_| Error::InvalidSpec(format!("bad mean_domain endpoint {s:?}"))),
            },
        }
    }

    fn from_value(x: f64) -> Self {
        if x == f64::INFINITY {
            Endpoint::Text("inf".into())
        } else if x == f64::NEG_INFINITY {
            Endpoint::Text("-inf".into())
        } else {
            Endpoint::Number(x)
        }
    }
}

#[derive(Serialize, Deserialize)]
pub(super) struct FamilySpecRepr {
    #[serde(flatten)]
    kind: KindRepr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean_domain: Option<[Endpoint; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean_domain_closed: Option<[bool; 2]>,
}

impl TryFrom<FamilySpecRepr> for FamilySpec {
    type Error = Error;

    fn try_from(repr: FamilySpecRepr) -> Result<Self, Error> {
        let spec = match repr.kind {
            KindRepr::GaussianLocation { variance } => FamilySpec::gaussian_location(variance)?,
            KindRepr::GammaShape { shape } => FamilySpec::gamma_shape(shape)?,
            KindRepr::Tweedie32 => FamilySpec::tweedie32(),
            KindRepr::Bernoulli => FamilySpec::bernoulli(),
            KindRepr::Poisson => FamilySpec::poisson(),
            KindRepr::Transformed { base, map } => FamilySpec::transformed(*base, map)?,
        };
        let Some([lo, hi]) = repr.mean_domain else {
            return Ok(spec);
        };
        let (lower, upper) = (lo.value()?, hi.value()?);
        let core = spec.full_mean_space();
        let [lower_included, upper_included] = repr.mean_domain_closed.unwrap_or([
            lower != core.lower || core.lower_included,
            upper != core.upper || core.upper_included,
        ]);
        spec.with_mean_domain(Interval::new(lower, upper, lower_included, upper_included))
    }
}

impl From<FamilySpec> for FamilySpecRepr {
    fn from(spec: FamilySpec) -> Self {
        let d = spec.mean_domain;
        let kind = match spec.kind {
            FamilyKind::GaussianLocation { variance } => KindRepr::GaussianLocation { variance },
            FamilyKind::GammaShape { shape } => KindRepr::GammaShape { shape },
            FamilyKind::Tweedie32 => KindRepr::Tweedie32,
            FamilyKind::Bernoulli => KindRepr::Bernoulli,
            FamilyKind::Poisson => KindRepr::Poisson,
            FamilyKind::Transformed { base, map } => KindRepr::Transformed { base, map },
        };
        FamilySpecRepr {
            kind,
            mean_domain: Some([Endpoint::from_value(d.lower), Endpoint::from_value(d.upper)]),
            mean_domain_closed: Some([d.lower_included, d.upper_included]),
        }
    }
}

impl Serialize for FamilySpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        FamilySpecRepr::from(self.clone()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FamilySpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = FamilySpecRepr::deserialize(deserializer)?;
        FamilySpec::try_from(repr).map_err(serde::de::Error::custom)
    }
}

impl FamilySpec {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("family specs always serialize")
    }
}

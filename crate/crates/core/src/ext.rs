//! Extended reals and provenance tags used in every report.
//!
//! Reports never carry a floating-point infinity: unbounded or unknown
//! quantities are explicit variants, serialized as the strings `"+inf"` and
//! `"undetermined"` so the JSON stays portable.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
    Undetermined,
}

impl Extended {
    /// Maps `f64::INFINITY` to [`Extended::Infinite`]; NaN becomes undetermined.
    pub fn from_f64(x: f64) -> Self {
        if x.is_nan() {
            Extended::Undetermined
        } else if x == f64::INFINITY {
            Extended::Infinite
        } else {
            Extended::Finite(x)
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }

    /// `+inf` for `Infinite`, NaN for `Undetermined`.
    pub fn to_f64(self) -> f64 {
        match self {
            Extended::Finite(x) => x,
            Extended::Infinite => f64::INFINITY,
            Extended::Undetermined => f64::NAN,
        }
    }

    /// Minimum over known values; undetermined entries are ignored.
    pub fn min_known(values: &[Extended]) -> Extended {
        let mut best = Extended::Undetermined;
        for &v in values {
            best = match (best, v) {
                (_, Extended::Undetermined) => best,
                (Extended::Undetermined, v) => v,
                (Extended::Infinite, v) => v,
                (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a.min(b)),
                (b @ Extended::Finite(_), Extended::Infinite) => b,
            };
        }
        best
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(x) => write!(f, "{x}"),
            Extended::Infinite => f.write_str("+inf"),
            Extended::Undetermined => f.write_str("undetermined"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(x) => s.serialize_f64(*x),
            Extended::Infinite => s.serialize_str("+inf"),
            Extended::Undetermined => s.serialize_str("undetermined"),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Extended;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number, \"+inf\" or \"undetermined\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Extended, E> {
                Ok(Extended::Finite(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Extended, E> {
                Ok(Extended::Finite(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Extended, E> {
                Ok(Extended::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Extended, E> {
                match v {
                    "+inf" => Ok(Extended::Infinite),
                    "undetermined" => Ok(Extended::Undetermined),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Where a reported number came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Closed-form evaluation.
    Formula,
    /// Taken from a user declaration in the configuration.
    Declared,
    /// Sampled over a finite grid.
    Scanned,
    /// Finite-horizon numerical value plus an analytic tail bound.
    #[serde(rename = "truncated+tail")]
    TruncatedPlusTail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: Extended,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Quantity {
    pub fn formula(x: f64) -> Self {
        Quantity { value: Extended::from_f64(x), provenance: Provenance::Formula, note: None }
    }

    pub fn new(value: Extended, provenance: Provenance) -> Self {
        Quantity { value, provenance, note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

//! Cardinalities that are either a natural number or countably infinite.
//!
//! Infinity is an explicit variant, never a sentinel value; JSON spells it
//! as the string `"omega"`.

use serde::de::{self, Deserializer, Unexpected};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Count {
    Finite(u64),
    Omega,
}

impl Count {
    pub fn is_omega(self) -> bool {
        matches!(self, Count::Omega)
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            Count::Finite(n) => Some(n),
            Count::Omega => None,
        }
    }

    /// True when `k` indexes into a collection of this size.
    pub fn admits(self, k: u64) -> bool {
        match self {
            Count::Finite(n) => k < n,
            Count::Omega => true,
        }
    }

    /// Minimum of the cardinality and a finite cap.
    pub fn min_with(self, cap: u64) -> u64 {
        match self {
            Count::Finite(n) => n.min(cap),
            Count::Omega => cap,
        }
    }
}

impl PartialOrd for Count {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Count {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use Count::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.cmp(b),
            (Finite(_), Omega) => std::cmp::Ordering::Less,
            (Omega, Finite(_)) => std::cmp::Ordering::Greater,
            (Omega, Omega) => std::cmp::Ordering::Equal,
        }
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Count::Finite(n) => write!(f, "{n}"),
            Count::Omega => write!(f, "omega"),
        }
    }
}

impl From<u64> for Count {
    fn from(n: u64) -> Self {
        Count::Finite(n)
    }
}

impl Serialize for Count {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Count::Finite(n) => s.serialize_u64(*n),
            Count::Omega => s.serialize_str("omega"),
        }
    }
}

impl<'de> Deserialize<'de> for Count {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> de::Visitor<'de> for V {
            type Value = Count;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a natural number or the string \"omega\"")
            }
            fn visit_u64<E: de::Error>(self, n: u64) -> Result<Count, E> {
                Ok(Count::Finite(n))
            }
            fn visit_i64<E: de::Error>(self, n: i64) -> Result<Count, E> {
                u64::try_from(n)
                    .map(Count::Finite)
                    .map_err(|_| E::invalid_value(Unexpected::Signed(n), &self))
            }
            fn visit_str<E: de::Error>(self, s: &str) -> Result<Count, E> {
                if s == "omega" {
                    Ok(Count::Omega)
                } else {
                    Err(E::invalid_value(Unexpected::Str(s), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

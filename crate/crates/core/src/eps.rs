//! Exact distances in `[0, 1]` and the finite rational grid they live on.
//!
//! Every distance and every `ε` annotation is an exact rational. A workspace
//! fixes one [`EpsGrid`] with denominator `q`; the saturation engine works on
//! integer grid steps `k` standing for `k/q`, so infima and clause arithmetic
//! never touch floating point.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An exact rational distance in `[0, 1]`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Eps(Ratio<u64>);

impl Eps {
    pub const ZERO: Eps = Eps(Ratio::new_raw(0, 1));
    pub const ONE: Eps = Eps(Ratio::new_raw(1, 1));

    pub fn new(num: u64, den: u64) -> Result<Eps> {
        if den == 0 || num > den {
            return Err(Error::Parse(format!("{num}/{den} is not a value in [0,1]")));
        }
        Ok(Eps(Ratio::new(num, den)))
    }

    pub fn numer(self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(self) -> u64 {
        *self.0.denom()
    }

    /// `min(1, self + other)`.
    pub fn saturating_add(self, other: Eps) -> Eps {
        let sum = self.0 + other.0;
        if sum > Ratio::from_integer(1) {
            Eps::ONE
        } else {
            Eps(sum)
        }
    }

    fn parse_decimal(s: &str) -> Result<Eps> {
        let bad = || Error::Parse(format!("invalid distance `{s}`"));
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
            || frac_part.len() > 18
        {
            return Err(bad());
        }
        let int: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        let den = 10u64.pow(frac_part.len() as u32);
        let frac: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| bad())?
        };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(bad)?;
        Eps::new(num, den)
    }
}

impl FromStr for Eps {
    type Err = Error;

    /// Accepts `"1/2"`, `"0.25"`, `"0"` and `"1"`.
    fn from_str(s: &str) -> Result<Eps> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("invalid fraction `{s}`")))?;
            let d: u64 = d
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("invalid fraction `{s}`")))?;
            Eps::new(n, d)
        } else {
            Eps::parse_decimal(s)
        }
    }
}

impl fmt::Display for Eps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Eps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Eps {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Eps {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Eps, D::Error> {
        struct Visitor;
        impl de::Visitor<'_> for Visitor {
            type Value = Eps;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a distance in [0,1] as a fraction string or a decimal")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Eps, E> {
                v.parse().map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Eps, E> {
                Eps::new(v, 1).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Eps, E> {
                let v = u64::try_from(v).map_err(E::custom)?;
                Eps::new(v, 1).map_err(E::custom)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Eps, E> {
                // Shortest round-trip representation, then parsed exactly.
                format!("{v}").parse().map_err(E::custom)
            }
        }
        d.deserialize_any(Visitor)
    }
}

/// The finite grid `{0, 1/q, …, 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EpsGrid {
    q: u32,
}

impl Default for EpsGrid {
    fn default() -> Self {
        EpsGrid { q: 24 }
    }
}

impl EpsGrid {
    pub fn new(q: u32) -> Result<EpsGrid> {
        if q == 0 {
            return Err(Error::Invalid("grid denominator must be positive".into()));
        }
        Ok(EpsGrid { q })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Number of grid points, `q + 1`.
    pub fn len(&self) -> usize {
        self.q as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The grid step `k` with `k/q == eps`, if `eps` is on the grid.
    pub fn steps(&self, eps: Eps) -> Option<u32> {
        let q = u64::from(self.q);
        let scaled = eps.numer() * q;
        if scaled.is_multiple_of(eps.denom()) {
            u32::try_from(scaled / eps.denom()).ok()
        } else {
            None
        }
    }

    pub fn steps_checked(&self, eps: Eps) -> Result<u32> {
        self.steps(eps).ok_or_else(|| Error::GridMismatch {
            value: eps.to_string(),
            q: self.q,
        })
    }

    pub fn contains(&self, eps: Eps) -> bool {
        self.steps(eps).is_some()
    }

    /// The value `k/q`. Steps above `q` clamp to 1.
    pub fn value(&self, k: u32) -> Eps {
        let k = k.min(self.q);
        Eps(Ratio::new(u64::from(k), u64::from(self.q)))
    }

    pub fn values(&self) -> impl Iterator<Item = Eps> + '_ {
        (0..=self.q).map(move |k| self.value(k))
    }
}

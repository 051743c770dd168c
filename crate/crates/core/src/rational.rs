//! Exact rational DoF values.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Sub};

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A degrees-of-freedom value, kept exact and in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dof(Ratio<i64>);

impl Dof {
    pub fn new(num: i64, den: i64) -> Self {
        Dof(Ratio::new(num, den))
    }

    pub fn integer(n: i64) -> Self {
        Dof(Ratio::from_integer(n))
    }

    pub fn zero() -> Self {
        Self::integer(0)
    }

    /// `n / 2`, the half-cake value for `n` total antennas.
    pub fn half(n: usize) -> Self {
        Self::new(n as i64, 2)
    }

    pub fn num(&self) -> i64 {
        *self.0.numer()
    }

    pub fn den(&self) -> i64 {
        *self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.num() as f64 / self.den() as f64
    }
}

impl fmt::Display for Dof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den() == 1 {
            write!(f, "{}", self.num())
        } else {
            write!(f, "{}/{}", self.num(), self.den())
        }
    }
}

impl Add for Dof {
    type Output = Dof;
    fn add(self, rhs: Dof) -> Dof {
        Dof(self.0 + rhs.0)
    }
}

impl Sub for Dof {
    type Output = Dof;
    fn sub(self, rhs: Dof) -> Dof {
        Dof(self.0 - rhs.0)
    }
}

impl Mul<i64> for Dof {
    type Output = Dof;
    fn mul(self, rhs: i64) -> Dof {
        Dof(self.0 * rhs)
    }
}

impl Div<i64> for Dof {
    type Output = Dof;
    fn div(self, rhs: i64) -> Dof {
        Dof(self.0 / rhs)
    }
}

impl Sum for Dof {
    fn sum<I: Iterator<Item = Dof>>(iter: I) -> Dof {
        iter.fold(Dof::zero(), |a, b| a + b)
    }
}

#[derive(Serialize, Deserialize)]
struct Wire {
    num: i64,
    den: i64,
}

impl Serialize for Dof {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Wire {
            num: self.num(),
            den: self.den(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Dof {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = Wire::deserialize(d)?;
        if w.den == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Dof::new(w.num, w.den))
    }
}

//! Angular-momentum algebra: half-integer quantum numbers, Wigner 3j/6j
//! symbols and rotational line strengths for 2Pi <- 2Sigma bands.

mod honl_london;
mod wigner;

pub use honl_london::{honl_london, pi_mixing, upper_component_exists, Branch, BranchKind, PiCoupling, SpinComponent};
pub use wigner::{wigner_3j, wigner_6j};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A quantum number stored as twice its value, so that 7/2 is `HalfInt(7)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(value: i32) -> Self {
        HalfInt(2 * value)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub const fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    /// 2j + 1
    pub const fn multiplicity(self) -> i32 {
        self.0 + 1
    }

    /// Validates this value as an angular momentum (j >= 0).
    pub fn check_momentum(self) -> Result<Self> {
        if self.0 < 0 {
            Err(Error::invalid(format!("angular momentum {self} is negative")))
        } else {
            Ok(self)
        }
    }

    /// All projections -j, -j+1, ..., j.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        let j = self.0;
        (-j..=j).step_by(2).map(HalfInt)
    }

    /// True if `m` is a valid projection of this angular momentum.
    pub fn admits_projection(self, m: HalfInt) -> bool {
        self.0 >= 0 && m.0.abs() <= self.0 && (self.0 - m.0) % 2 == 0
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl std::ops::Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl std::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl std::str::FromStr for HalfInt {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("cannot parse '{s}' as a half-integer"));
        if let Some((num, den)) = s.split_once('/') {
            if den.trim() != "2" {
                return Err(bad());
            }
            let n: i32 = num.trim().parse().map_err(|_| bad())?;
            if n % 2 == 0 {
                return Err(bad());
            }
            Ok(HalfInt(n))
        } else {
            let n: i32 = s.parse().map_err(|_| bad())?;
            Ok(HalfInt(2 * n))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_and_parse() {
        assert_eq!(HalfInt::from_twice(7).to_string(), "7/2");
        assert_eq!(HalfInt::from_int(3).to_string(), "3");
        assert_eq!("11/2".parse::<HalfInt>().unwrap(), HalfInt::from_twice(11));
        assert_eq!("-3/2".parse::<HalfInt>().unwrap(), HalfInt::from_twice(-3));
        assert_eq!("4".parse::<HalfInt>().unwrap(), HalfInt::from_int(4));
        assert!("4/2".parse::<HalfInt>().is_err());
        assert!("1/3".parse::<HalfInt>().is_err());
    }

    #[test]
    fn projections() {
        let j = HalfInt::from_twice(3);
        let ms: Vec<i32> = j.projections().map(HalfInt::twice).collect();
        assert_eq!(ms, vec![-3, -1, 1, 3]);
        assert!(j.admits_projection(HalfInt::from_twice(-1)));
        assert!(!j.admits_projection(HalfInt::from_twice(2)));
        assert!(!j.admits_projection(HalfInt::from_twice(5)));
    }
}

use crate::angmom::{HalfInt, SpinComponent};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A hyperfine-Zeeman level of the electronic and vibrational ground state.
///
/// `m` projects J when `nuclear_spin == 0` and F otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MolecularState {
    pub n: u32,
    pub j: HalfInt,
    pub nuclear_spin: u8,
    pub f: Option<HalfInt>,
    pub m: HalfInt,
    pub v: u32,
}

impl MolecularState {
    pub fn new(n: u32, j: HalfInt, nuclear_spin: u8, f: Option<HalfInt>, m: HalfInt) -> Result<Self> {
        let s = MolecularState { n, j, nuclear_spin, f, m, v: 0 };
        s.validate()?;
        Ok(s)
    }

    /// Level without nuclear spin: (N, J, m_J).
    pub fn spinless(n: u32, j: HalfInt, m: HalfInt) -> Result<Self> {
        Self::new(n, j, 0, None, m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n.is_multiple_of(2) {
            return Err(Error::invalid(format!("N = {} is odd", self.n)));
        }
        SpinComponent::of_sigma_level(self.n, self.j)?;
        if self.j.twice() < 1 {
            return Err(Error::invalid(format!("J = {} < 1/2", self.j)));
        }
        match (self.nuclear_spin, self.f) {
            (0, None) => {
                if !self.j.admits_projection(self.m) {
                    return Err(Error::invalid(format!("m = {} is not a projection of J = {}", self.m, self.j)));
                }
            }
            (2, Some(f)) => {
                let i = HalfInt::from_int(2);
                if f < (self.j - i).abs() || f > self.j + i || !(f - self.j).is_integer() {
                    return Err(Error::invalid(format!(
                        "F = {f} violates the triangle rule with J = {}, I = 2",
                        self.j
                    )));
                }
                if !f.admits_projection(self.m) {
                    return Err(Error::invalid(format!("m = {} is not a projection of F = {f}", self.m)));
                }
            }
            (i, f) => {
                return Err(Error::invalid(format!(
                    "nuclear spin {i} with F = {f:?}: expected I = 0 without F or I = 2 with F"
                )))
            }
        }
        Ok(())
    }

    pub fn spin_component(&self) -> SpinComponent {
        SpinComponent::of_sigma_level(self.n, self.j).expect("validated state")
    }

    /// Same rotational level (N, J), ignoring nuclear spin and projections.
    pub fn same_level(&self, other: &MolecularState) -> bool {
        self.v == other.v && self.n == other.n && self.j == other.j
    }
}

impl fmt::Display for MolecularState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={} J={} I={}", self.n, self.j, self.nuclear_spin)?;
        if let Some(ff) = self.f {
            write!(f, " F={ff}")?;
        }
        write!(f, " m={}", self.m)
    }
}

/// All levels with even N <= `n_max`, I in {0, 2}, every allowed F and m,
/// sorted by (N, J, I, F, m).
pub fn enumerate_states(n_max: u32) -> Result<Vec<MolecularState>> {
    if !n_max.is_multiple_of(2) {
        return Err(Error::invalid(format!("N_max must be even, got {n_max}")));
    }
    let i2 = HalfInt::from_int(2);
    let mut out = Vec::new();
    for n in (0..=n_max).step_by(2) {
        let tn = 2 * n as i32;
        for tj in [tn - 1, tn + 1] {
            if tj < 1 {
                continue;
            }
            let j = HalfInt::from_twice(tj);
            for m in j.projections() {
                out.push(MolecularState { n, j, nuclear_spin: 0, f: None, m, v: 0 });
            }
            let mut f = (j - i2).abs();
            while f <= j + i2 {
                for m in f.projections() {
                    out.push(MolecularState { n, j, nuclear_spin: 2, f: Some(f), m, v: 0 });
                }
                f = f + HalfInt::ONE;
            }
        }
    }
    out.sort();
    Ok(out)
}

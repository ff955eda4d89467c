//! Rotational line strengths for a 2Pi <- 2Sigma+ transition with the upper
//! state in intermediate coupling between Hund's cases (a) and (b).

use super::{wigner_3j, HalfInt};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BranchKind {
    P,
    Q,
    R,
}

impl BranchKind {
    /// J' - J''.
    pub fn delta_j(self) -> i32 {
        match self {
            BranchKind::P => -1,
            BranchKind::Q => 0,
            BranchKind::R => 1,
        }
    }
}

/// Spin-rotation component. For the 2Sigma lower state F1 has J = N + 1/2;
/// for the 2Pi upper state F1 is the lower-energy component at a given J.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpinComponent {
    F1,
    F2,
}

impl SpinComponent {
    fn index(self) -> u8 {
        match self {
            SpinComponent::F1 => 1,
            SpinComponent::F2 => 2,
        }
    }

    /// Component of a 2Sigma level with rotational quantum number N and total J.
    pub fn of_sigma_level(n: u32, j: HalfInt) -> Result<Self> {
        let tn = 2 * n as i32;
        match j.twice() - tn {
            1 => Ok(SpinComponent::F1),
            -1 => Ok(SpinComponent::F2),
            _ => Err(Error::invalid(format!("J = {j} is not N +/- 1/2 for N = {n}"))),
        }
    }

    /// N of the 2Sigma level with this component and total J.
    pub fn sigma_n(self, j: HalfInt) -> i32 {
        match self {
            SpinComponent::F1 => (j.twice() - 1) / 2,
            SpinComponent::F2 => (j.twice() + 1) / 2,
        }
    }
}

/// A rotational branch such as `Q12`: kind, upper component, lower component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Branch {
    pub kind: BranchKind,
    pub upper: SpinComponent,
    pub lower: SpinComponent,
}

impl Branch {
    pub fn new(kind: BranchKind, upper: SpinComponent, lower: SpinComponent) -> Self {
        Branch { kind, upper, lower }
    }

    pub fn is_satellite(&self) -> bool {
        self.upper != self.lower
    }

    /// Upper-state J reached from lower-state `j_lower`, if non-negative.
    pub fn upper_j(&self, j_lower: HalfInt) -> Option<HalfInt> {
        let j = j_lower + HalfInt::from_int(self.kind.delta_j());
        (j.twice() > 0).then_some(j)
    }

    /// All twelve branches of a doublet-doublet band.
    pub fn all() -> impl Iterator<Item = Branch> {
        use SpinComponent::*;
        [BranchKind::P, BranchKind::Q, BranchKind::R]
            .into_iter()
            .flat_map(|k| [(F1, F1), (F2, F2), (F2, F1), (F1, F2)].into_iter().map(move |(u, l)| Branch::new(k, u, l)))
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            BranchKind::P => 'P',
            BranchKind::Q => 'Q',
            BranchKind::R => 'R',
        };
        if self.is_satellite() {
            write!(f, "{k}{}{}", self.upper.index(), self.lower.index())
        } else {
            write!(f, "{k}{}", self.upper.index())
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("unknown branch label '{s}'"));
        let mut chars = s.trim().chars();
        let kind = match chars.next() {
            Some('P') => BranchKind::P,
            Some('Q') => BranchKind::Q,
            Some('R') => BranchKind::R,
            _ => return Err(bad()),
        };
        let comp = |c: char| match c {
            '1' => Ok(SpinComponent::F1),
            '2' => Ok(SpinComponent::F2),
            _ => Err(bad()),
        };
        let digits: Vec<char> = chars.collect();
        match digits.as_slice() {
            [a] => Ok(Branch::new(kind, comp(*a)?, comp(*a)?)),
            [a, b] if a != b => Ok(Branch::new(kind, comp(*a)?, comp(*b)?)),
            _ => Err(bad()),
        }
    }
}

/// Spin-orbit and rotational constants (cm^-1) of the 2Pi state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiCoupling {
    pub spin_orbit: f64,
    pub rotational: f64,
}

impl PiCoupling {
    pub fn new(spin_orbit: f64, rotational: f64) -> Result<Self> {
        if !(rotational.is_finite() && rotational > 0.0 && spin_orbit.is_finite()) {
            return Err(Error::invalid(format!("need finite A and B > 0, got A = {spin_orbit}, B = {rotational}")));
        }
        Ok(PiCoupling { spin_orbit, rotational })
    }

    /// Y = A / B.
    pub fn y(&self) -> f64 {
        self.spin_orbit / self.rotational
    }
}

/// Whether the 2Pi component exists at total angular momentum `j`.
///
/// Both components exist for J >= 3/2. At J = 1/2 only the Omega = 1/2 state
/// is present; it is labelled F2 when Y < 2 and F1 otherwise.
pub fn upper_component_exists(j: HalfInt, comp: SpinComponent, coupling: &PiCoupling) -> bool {
    match j.twice() {
        t if t >= 3 && t % 2 == 1 => true,
        1 => {
            let lone = if coupling.y() < 2.0 { SpinComponent::F2 } else { SpinComponent::F1 };
            comp == lone
        }
        _ => false,
    }
}

/// Case-(a) amplitudes (Omega = 3/2, Omega = 1/2) of a 2Pi component at `j`.
pub fn pi_mixing(j: HalfInt, comp: SpinComponent, coupling: &PiCoupling) -> Result<(f64, f64)> {
    if !upper_component_exists(j, comp, coupling) {
        return Err(Error::invalid(format!("2Pi component {comp:?} does not exist at J = {j}")));
    }
    if j.twice() == 1 {
        return Ok((0.0, 1.0));
    }
    let x = (j.value() + 0.5).powi(2);
    let (a, b) = (coupling.spin_orbit, coupling.rotational);
    let h11 = a / 2.0 + b * (x - 2.0);
    let h22 = -a / 2.0 + b * x;
    let h12 = -b * (x - 1.0).sqrt();
    let mean = 0.5 * (h11 + h22);
    let half_gap = (0.25 * (h11 - h22).powi(2) + h12 * h12).sqrt();
    let e = match comp {
        SpinComponent::F1 => mean - half_gap,
        SpinComponent::F2 => mean + half_gap,
    };
    // (H - e) v = 0; pick the better-conditioned row
    let (v1, v2) = if (h11 - e).abs() > (h22 - e).abs() { (-h12, h11 - e) } else { (h22 - e, -h12) };
    let norm = v1.hypot(v2);
    Ok((v1 / norm, v2 / norm))
}

/// Hönl-London factor of `branch` from the lower level with total `j_lower`.
///
/// Normalised so that the factors of all branches from one lower level sum
/// to 2J'' + 1. Fails if the branch does not start from a level with this J
/// (wrong component for J = 1/2) or if the upper level does not exist.
pub fn honl_london(branch: Branch, j_lower: HalfInt, coupling: &PiCoupling) -> Result<f64> {
    if j_lower.twice() < 1 || j_lower.is_integer() {
        return Err(Error::invalid(format!("lower J must be a positive half-integer, got {j_lower}")));
    }
    if branch.lower.sigma_n(j_lower) < 0 {
        return Err(Error::invalid(format!("{branch} has no lower level with J = {j_lower}")));
    }
    let j_upper =
        branch.upper_j(j_lower).ok_or_else(|| Error::invalid(format!("{branch}({j_lower}) has no upper level")))?;
    if !upper_component_exists(j_upper, branch.upper, coupling) {
        return Err(Error::invalid(format!(
            "{branch}({j_lower}): upper component {:?} does not exist at J' = {j_upper}",
            branch.upper
        )));
    }
    let (a, b) = pi_mixing(j_upper, branch.upper, coupling)?;
    let one = HalfInt::ONE;
    let x = wigner_3j(j_upper, one, j_lower, HalfInt::from_twice(-3), one, HalfInt::HALF)?;
    let z = wigner_3j(j_upper, one, j_lower, -HalfInt::HALF, one, -HalfInt::HALF)?;
    let parity = match branch.lower {
        SpinComponent::F1 => 1.0,
        SpinComponent::F2 => -1.0,
    };
    let amp = parity * b * z - a * x;
    let dims = f64::from(j_lower.multiplicity()) * f64::from(j_upper.multiplicity());
    Ok(0.5 * dims * amp * amp)
}

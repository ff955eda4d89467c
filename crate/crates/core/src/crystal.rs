//! Two-ion crystal mechanics and the same-phase / opposite-phase lattice algebra.
//!
//! Ion 1 is the molecular ion (mass m1), ion 2 the atomic ion (mass m2).
//! Normal coordinates are beta+ = (cos t / sqrt mu) q1 - sin t q2 and
//! beta- = (sin t / sqrt mu) q1 + cos t q2 with mu = m2 / m1; both carry
//! mass m2. beta- is the in-phase mode.

use crate::error::{Error, Result};
use crate::units::{amu_to_kg, wave_vector, COULOMB_E2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Tolerance on the lattice phase for the SP / OP classification (rad).
pub const PHASE_TOLERANCE: f64 = TAU * 1e-3;

/// Default sigma multiplier for the detuning-sign decision.
pub const DEFAULT_SIGN_K: f64 = 2.0;

/// Ion-ion distance for spring constant `u0` (N/m): d^3 u0 = 2 e^2 / (4 pi eps0).
pub fn equilibrium_distance(u0: f64) -> Result<f64> {
    if !(u0.is_finite() && u0 > 0.0) {
        return Err(Error::invalid(format!("spring constant must be > 0, got {u0}")));
    }
    Ok((2.0 * COULOMB_E2 / u0).cbrt())
}

/// Spring constant (N/m) that gives ion-ion distance `d` (m).
pub fn spring_from_distance(d: f64) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::invalid(format!("distance must be > 0, got {d}")));
    }
    Ok(2.0 * COULOMB_E2 / (d * d * d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoIonCrystal {
    /// Molecular ion mass (u).
    pub m1_u: f64,
    /// Atomic ion mass (u).
    pub m2_u: f64,
    /// Harmonic trap constant (N/m), equal for both ions.
    pub u0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalModes {
    pub mu: f64,
    pub theta: f64,
    /// In-phase mode angular frequency (rad/s).
    pub omega_minus: f64,
    /// Out-of-phase mode angular frequency (rad/s).
    pub omega_plus: f64,
}

impl NormalModes {
    /// Weight of the molecular shift in the in-phase combination, sqrt(mu) sin t.
    pub fn molecule_weight(&self) -> f64 {
        self.mu.sqrt() * self.theta.sin()
    }

    /// Weight of the atomic shift in the in-phase combination, cos t.
    pub fn atom_weight(&self) -> f64 {
        self.theta.cos()
    }

    /// (beta+, beta-) from ion displacements.
    pub fn to_modes(&self, q1: f64, q2: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let r = self.mu.sqrt();
        (c / r * q1 - s * q2, s / r * q1 + c * q2)
    }

    /// Ion displacements (q1, q2) from (beta+, beta-).
    pub fn from_modes(&self, beta_plus: f64, beta_minus: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let r = self.mu.sqrt();
        (r * (c * beta_plus + s * beta_minus), -s * beta_plus + c * beta_minus)
    }

    /// Generalized forces (F+, F-) on the mode coordinates from ion forces.
    pub fn project_forces(&self, f1: f64, f2: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let r = self.mu.sqrt();
        (r * c * f1 - s * f2, r * s * f1 + c * f2)
    }
}

/// Mixing angle t(mu) with tan t = 1/sqrt(mu) - sqrt(mu) + sqrt(1/mu + mu - 1).
pub fn mixing_angle(mu: f64) -> f64 {
    let r = mu.sqrt();
    (1.0 / r - r + (1.0 / mu + mu - 1.0).sqrt()).atan()
}

/// Axial normal modes of the crystal.
pub fn normal_modes(m1_u: f64, m2_u: f64, u0: f64) -> Result<NormalModes> {
    if !(m1_u > 0.0 && m2_u > 0.0 && u0 > 0.0) || !(m1_u.is_finite() && m2_u.is_finite() && u0.is_finite()) {
        return Err(Error::invalid(format!("masses and u0 must be positive: m1={m1_u}, m2={m2_u}, u0={u0}")));
    }
    let mu = m2_u / m1_u;
    let w2 = (u0 / amu_to_kg(m2_u)).sqrt();
    let root = (1.0 + mu * mu - mu).sqrt();
    Ok(NormalModes {
        mu,
        theta: mixing_angle(mu),
        omega_minus: w2 * (1.0 + mu - root).sqrt(),
        omega_plus: w2 * (1.0 + mu + root).sqrt(),
    })
}

impl TwoIonCrystal {
    pub fn new(m1_u: f64, m2_u: f64, u0: f64) -> Result<Self> {
        normal_modes(m1_u, m2_u, u0)?;
        Ok(TwoIonCrystal { m1_u, m2_u, u0 })
    }

    pub fn from_distance(m1_u: f64, m2_u: f64, d: f64) -> Result<Self> {
        Self::new(m1_u, m2_u, spring_from_distance(d)?)
    }

    /// Crystal whose atomic ion alone would oscillate at `f2_hz`.
    pub fn from_atomic_frequency(m1_u: f64, m2_u: f64, f2_hz: f64) -> Result<Self> {
        if !(f2_hz.is_finite() && f2_hz > 0.0) {
            return Err(Error::invalid(format!("trap frequency must be > 0, got {f2_hz}")));
        }
        let w = TAU * f2_hz;
        Self::new(m1_u, m2_u, amu_to_kg(m2_u) * w * w)
    }

    /// Same trap with a different molecular mass.
    pub fn with_molecular_mass(&self, m1_u: f64) -> Result<Self> {
        Self::new(m1_u, self.m2_u, self.u0)
    }

    pub fn mu(&self) -> f64 {
        self.m2_u / self.m1_u
    }

    pub fn distance(&self) -> f64 {
        equilibrium_distance(self.u0).expect("validated crystal")
    }

    /// Single atomic-ion angular frequency sqrt(u0 / m2).
    pub fn atomic_angular_frequency(&self) -> f64 {
        (self.u0 / amu_to_kg(self.m2_u)).sqrt()
    }

    pub fn modes(&self) -> NormalModes {
        normal_modes(self.m1_u, self.m2_u, self.u0).expect("validated crystal")
    }

    /// Equilibrium positions (x1, x2) = (-d/2, d/2).
    pub fn equilibrium_positions(&self) -> [f64; 2] {
        let d = self.distance();
        [-0.5 * d, 0.5 * d]
    }

    pub fn m1_kg(&self) -> f64 {
        amu_to_kg(self.m1_u)
    }

    pub fn m2_kg(&self) -> f64 {
        amu_to_kg(self.m2_u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeConfig {
    SamePhase,
    OppositePhase,
    Intermediate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticePhase {
    /// phi21 in [0, 2 pi).
    pub phi21: f64,
    pub config: LatticeConfig,
}

/// Reduces an angle to [0, 2 pi).
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

pub fn classify_phase(phi21: f64) -> LatticePhase {
    let phi21 = wrap_phase(phi21);
    let from_zero = phi21.min(TAU - phi21);
    let config = if from_zero <= PHASE_TOLERANCE {
        LatticeConfig::SamePhase
    } else if (phi21 - PI).abs() <= PHASE_TOLERANCE {
        LatticeConfig::OppositePhase
    } else {
        LatticeConfig::Intermediate
    };
    LatticePhase { phi21, config }
}

/// Relative lattice phase 4 pi d / lambda of two ions a distance `d` (m) apart.
pub fn lattice_phase(d: f64, wavelength_nm: f64) -> Result<LatticePhase> {
    if !(d > 0.0 && wavelength_nm > 0.0) {
        return Err(Error::invalid("distance and wavelength must be positive"));
    }
    Ok(classify_phase(2.0 * wave_vector(wavelength_nm) * d))
}

/// Moving standing-wave drive acting on both ions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeDrive {
    pub wavelength_nm: f64,
    /// Frequency difference of the two lattice beams (Hz).
    pub beat_frequency_hz: f64,
    /// Single-beam shift of the molecular ion (Hz, signed).
    pub shift_molecule_hz: f64,
    /// Single-beam shift of the atomic ion (Hz, signed).
    pub shift_atom_hz: f64,
    /// Spatial phases 2 k x_i of the two ions (rad).
    pub phase_molecule: f64,
    pub phase_atom: f64,
}

impl LatticeDrive {
    /// Drive with spatial phases set by the crystal geometry.
    pub fn for_crystal(
        crystal: &TwoIonCrystal,
        wavelength_nm: f64,
        beat_frequency_hz: f64,
        shift_molecule_hz: f64,
        shift_atom_hz: f64,
    ) -> Result<Self> {
        let k = wave_vector(wavelength_nm);
        let [x1, x2] = crystal.equilibrium_positions();
        let drive = LatticeDrive {
            wavelength_nm,
            beat_frequency_hz,
            shift_molecule_hz,
            shift_atom_hz,
            phase_molecule: wrap_phase(2.0 * k * x1),
            phase_atom: wrap_phase(2.0 * k * x2),
        };
        drive.validate()?;
        Ok(drive)
    }

    /// Drive with an explicit relative phase phi21 (molecule at phase 0).
    pub fn with_relative_phase(
        wavelength_nm: f64,
        beat_frequency_hz: f64,
        shift_molecule_hz: f64,
        shift_atom_hz: f64,
        phi21: f64,
    ) -> Result<Self> {
        let drive = LatticeDrive {
            wavelength_nm,
            beat_frequency_hz,
            shift_molecule_hz,
            shift_atom_hz,
            phase_molecule: 0.0,
            phase_atom: wrap_phase(phi21),
        };
        drive.validate()?;
        Ok(drive)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.wavelength_nm,
            self.beat_frequency_hz,
            self.shift_molecule_hz,
            self.shift_atom_hz,
            self.phase_molecule,
            self.phase_atom,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite || self.wavelength_nm <= 0.0 || self.beat_frequency_hz < 0.0 {
            return Err(Error::invalid(format!("invalid lattice drive {self:?}")));
        }
        Ok(())
    }

    pub fn phi21(&self) -> f64 {
        wrap_phase(self.phase_atom - self.phase_molecule)
    }

    pub fn phase(&self) -> LatticePhase {
        classify_phase(self.phi21())
    }

    pub fn wave_vector(&self) -> f64 {
        wave_vector(self.wavelength_nm)
    }

    pub fn angular_frequency(&self) -> f64 {
        TAU * self.beat_frequency_hz
    }
}

/// Complex in-phase-mode shift sqrt(mu) sin t dE1 + cos t dE2 e^{i phi21}.
pub fn combined_mode_shift(shift_molecule_hz: f64, shift_atom_hz: f64, phi21: f64, mu: f64, theta: f64) -> Complex64 {
    let a = mu.sqrt() * theta.sin() * shift_molecule_hz;
    let b = theta.cos() * shift_atom_hz;
    Complex64::new(a, 0.0) + Complex64::from_polar(b, phi21)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftWarning {
    /// (SP + OP)/2 does not exceed the atomic contribution, so the molecular
    /// term may be the smaller one.
    AtomicMayDominate,
    /// |SP - OP|/2 is larger than the atomic contribution allows.
    AsymmetryExceedsAtomic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolecularShiftEstimate {
    /// |dE1| (Hz).
    pub molecular_shift_hz: f64,
    /// |dE2| implied by the SP/OP difference (Hz).
    pub inferred_atomic_shift_hz: f64,
    pub warnings: Vec<ShiftWarning>,
}

/// Relative slack on the dominance checks.
const DOMINANCE_SLACK: f64 = 0.05;

/// |dE1| = (SP + OP) / (2 sqrt(mu) sin t), assuming the molecular term dominates.
///
/// With `atomic_shift_hz` given, the measured pair is checked against it.
pub fn extract_molecular_shift(
    mag_sp: f64,
    mag_op: f64,
    mu: f64,
    theta: f64,
    atomic_shift_hz: Option<f64>,
) -> Result<MolecularShiftEstimate> {
    if !(mag_sp >= 0.0 && mag_op >= 0.0 && mag_sp.is_finite() && mag_op.is_finite()) {
        return Err(Error::invalid(format!("SP/OP magnitudes must be finite and >= 0: {mag_sp}, {mag_op}")));
    }
    if !(mu > 0.0 && theta > 0.0 && theta < PI / 2.0) {
        return Err(Error::invalid("mu must be > 0 and theta in (0, pi/2)"));
    }
    let half_sum = 0.5 * (mag_sp + mag_op);
    let half_diff = 0.5 * (mag_sp - mag_op).abs();
    let mut warnings = Vec::new();
    if let Some(ea) = atomic_shift_hz {
        let b = theta.cos() * ea.abs();
        if half_sum <= b * (1.0 + DOMINANCE_SLACK) {
            warnings.push(ShiftWarning::AtomicMayDominate);
        }
        if half_diff > b * (1.0 + DOMINANCE_SLACK) + 1e-12 {
            warnings.push(ShiftWarning::AsymmetryExceedsAtomic);
        }
    }
    Ok(MolecularShiftEstimate {
        molecular_shift_hz: half_sum / (mu.sqrt() * theta.sin()),
        inferred_atomic_shift_hz: half_diff / theta.cos(),
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetuningSign {
    Red,
    Blue,
    Indeterminate,
}

impl DetuningSign {
    /// Sign implied by a signed shift: negative shifts are red.
    pub fn of_shift(shift_hz: f64) -> Self {
        if shift_hz < 0.0 {
            DetuningSign::Red
        } else if shift_hz > 0.0 {
            DetuningSign::Blue
        } else {
            DetuningSign::Indeterminate
        }
    }
}

impl std::str::FromStr for DetuningSign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "red" | "r" => Ok(DetuningSign::Red),
            "blue" | "b" => Ok(DetuningSign::Blue),
            "indeterminate" | "unknown" | "?" | "" => Ok(DetuningSign::Indeterminate),
            other => Err(Error::invalid(format!("unknown detuning sign '{other}'"))),
        }
    }
}

impl std::fmt::Display for DetuningSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DetuningSign::Red => "red",
            DetuningSign::Blue => "blue",
            DetuningSign::Indeterminate => "indeterminate",
        })
    }
}

/// Molecular detuning sign from the SP/OP asymmetry, for a red-detuned atom.
pub fn infer_detuning_sign(mag_sp: f64, mag_op: f64, sigma: f64, k: f64) -> DetuningSign {
    let margin = k * sigma.abs();
    if mag_sp - mag_op > margin {
        DetuningSign::Red
    } else if mag_op - mag_sp > margin {
        DetuningSign::Blue
    } else {
        DetuningSign::Indeterminate
    }
}

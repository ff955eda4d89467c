//! Physical constants, unit conversions and the polarizability-to-shift map.
//!
//! Constants are CODATA 2018. Energy shifts are reported in Hz (shift divided
//! by the Planck constant) and are always *single-beam* shifts: the factor of
//! two of a standing lattice lives in the lattice model, not here.
//!
//! Sign convention used everywhere: a positive polarizability (red detuning)
//! gives a negative shift.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Atomic mass constant (kg).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Bohr radius (m).
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
/// Hartree energy (J).
pub const HARTREE: f64 = 4.359_744_722_207_1e-18;

/// Atomic unit of polarizability, e^2 a0^2 / E_h (C^2 m^2 / J).
pub const AU_POLARIZABILITY: f64 = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE * BOHR_RADIUS * BOHR_RADIUS / HARTREE;
/// Atomic unit of electric dipole moment, e a0 (C m).
pub const AU_DIPOLE: f64 = ELEMENTARY_CHARGE * BOHR_RADIUS;

/// Coulomb constant times e^2, e^2 / (4 pi eps0) (J m).
pub const COULOMB_E2: f64 = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (4.0 * PI * VACUUM_PERMITTIVITY);

pub fn au_to_si_polarizability(alpha_au: f64) -> f64 {
    alpha_au * AU_POLARIZABILITY
}

pub fn si_to_au_polarizability(alpha_si: f64) -> f64 {
    alpha_si / AU_POLARIZABILITY
}

/// Squared dipole moment: (e a0)^2 -> C^2 m^2.
pub fn au_to_si_dipole_squared(mu2_au: f64) -> f64 {
    mu2_au * AU_DIPOLE * AU_DIPOLE
}

pub fn si_to_au_dipole_squared(mu2_si: f64) -> f64 {
    mu2_si / (AU_DIPOLE * AU_DIPOLE)
}

pub fn amu_to_kg(mass_u: f64) -> f64 {
    mass_u * ATOMIC_MASS_UNIT
}

/// Vacuum wavelength (nm) to wavenumber (cm^-1).
pub fn nm_to_wavenumber(wavelength_nm: f64) -> f64 {
    1.0e7 / wavelength_nm
}

/// Wavenumber (cm^-1) to vacuum wavelength (nm).
pub fn wavenumber_to_nm(wavenumber: f64) -> f64 {
    1.0e7 / wavenumber
}

/// Vacuum wavelength (nm) to optical angular frequency (rad/s).
pub fn nm_to_angular_frequency(wavelength_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
}

/// Wavenumber (cm^-1) to angular frequency (rad/s).
pub fn wavenumber_to_angular_frequency(wavenumber: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * wavenumber * 100.0
}

/// Lattice wave vector k = 2 pi / lambda (1/m).
pub fn wave_vector(wavelength_nm: f64) -> f64 {
    2.0 * PI / (wavelength_nm * 1e-9)
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {x}")))
    }
}

/// Single-beam ac-Stark shift in Hz: -alpha I / (2 eps0 c h).
pub fn polarizability_to_shift(alpha_au: f64, intensity: f64) -> Result<f64> {
    check_finite("polarizability", alpha_au)?;
    check_finite("intensity", intensity)?;
    if intensity < 0.0 {
        return Err(Error::invalid(format!("intensity must be >= 0, got {intensity}")));
    }
    Ok(-au_to_si_polarizability(alpha_au) * intensity / (2.0 * VACUUM_PERMITTIVITY * SPEED_OF_LIGHT * PLANCK))
}

/// Intensity (W/m^2) at which a level of polarizability `alpha_au` is shifted by `shift_hz`.
pub fn shift_to_intensity(alpha_au: f64, shift_hz: f64) -> Result<f64> {
    check_finite("polarizability", alpha_au)?;
    check_finite("shift", shift_hz)?;
    if alpha_au == 0.0 {
        return Err(Error::SingularInput("zero polarizability cannot produce a shift".into()));
    }
    if shift_hz == 0.0 {
        return Ok(0.0);
    }
    if shift_hz.signum() == alpha_au.signum() {
        return Err(Error::invalid(format!(
            "shift ({shift_hz} Hz) must have the opposite sign of the polarizability ({alpha_au} au)"
        )));
    }
    Ok(-shift_hz * 2.0 * VACUUM_PERMITTIVITY * SPEED_OF_LIGHT * PLANCK / au_to_si_polarizability(alpha_au))
}

/// How the lattice intensity is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntensitySpec {
    /// Explicit single-beam intensity in W/m^2.
    Explicit(f64),
    /// Intensity implied by a reference level with known polarizability and shift.
    Anchor { alpha_au: f64, shift_hz: f64 },
}

impl IntensitySpec {
    /// Core polarizability of the molecular ion shifted by -390 Hz.
    pub const CORE_ANCHOR: IntensitySpec = IntensitySpec::Anchor { alpha_au: 7.23, shift_hz: -390.0 };

    pub fn resolve(&self) -> Result<f64> {
        match *self {
            IntensitySpec::Explicit(i) => {
                if !(i.is_finite() && i >= 0.0) {
                    return Err(Error::invalid(format!("intensity must be finite and >= 0, got {i}")));
                }
                Ok(i)
            }
            IntensitySpec::Anchor { alpha_au, shift_hz } => shift_to_intensity(alpha_au, shift_hz),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn au_polarizability_factor() {
        assert!((AU_POLARIZABILITY / 1.648777e-41 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_polarizability_gives_zero_shift() {
        assert_eq!(polarizability_to_shift(0.0, 1.0e7).unwrap(), 0.0);
    }

    #[test]
    fn core_anchor_intensity() {
        let i0 = IntensitySpec::CORE_ANCHOR.resolve().unwrap();
        assert!((i0 / 1.15e7 - 1.0).abs() < 0.01, "I0 = {i0}");
        let shift = polarizability_to_shift(7.23, i0).unwrap();
        assert!((shift + 390.0).abs() < 1e-9);
        // independent closed-form evaluation
        let direct = -97.5 * 1.648_777_274_36e-41 * i0 / (2.0 * 8.854_187_812_8e-12 * 299_792_458.0 * 6.626_070_15e-34);
        let s = polarizability_to_shift(97.5, i0).unwrap();
        assert!((s / direct - 1.0).abs() < 1e-9);
        assert!((s / -390.0 - 97.5 / 7.23).abs() < 1e-9);
        assert!((s + 5259.3).abs() < 0.5, "{s}");
    }

    #[test]
    fn inverse_errors() {
        assert!(matches!(shift_to_intensity(0.0, -1.0), Err(Error::SingularInput(_))));
        assert!(matches!(shift_to_intensity(1.0, 1.0), Err(Error::InvalidArgument(_))));
        assert_eq!(shift_to_intensity(1.0, 0.0).unwrap(), 0.0);
        assert!(polarizability_to_shift(f64::NAN, 1.0).is_err());
        assert!(polarizability_to_shift(1.0, f64::INFINITY).is_err());
        assert!(polarizability_to_shift(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn shift_is_linear(a1 in -500.0f64..500.0, a2 in -500.0f64..500.0,
                           i1 in 0.0f64..1e8, i2 in 0.0f64..1e8) {
            let s = |a: f64, i: f64| polarizability_to_shift(a, i).unwrap();
            let lhs = s(a1 + a2, i1);
            let rhs = s(a1, i1) + s(a2, i1);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (s(a1, i1).abs() + s(a2, i1).abs()) + 1e-300);
            let lhs = s(a1, i1 + i2);
            let rhs = s(a1, i1) + s(a1, i2);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()) + 1e-300);
        }

        #[test]
        fn round_trips(alpha in prop_oneof![-300.0f64..-0.01, 0.01f64..300.0], i in 1.0f64..1e9) {
            let shift = polarizability_to_shift(alpha, i).unwrap();
            prop_assert!(shift.signum() == -alpha.signum());
            let back = shift_to_intensity(alpha, shift).unwrap();
            prop_assert!((back / i - 1.0).abs() < 1e-12);
            let si = au_to_si_polarizability(alpha);
            prop_assert!((si_to_au_polarizability(si) / alpha - 1.0).abs() < 1e-12);
            let w = 780.0 + alpha.abs() / 30.0;
            prop_assert!((wavenumber_to_nm(nm_to_wavenumber(w)) / w - 1.0).abs() < 1e-12);
        }
    }
}

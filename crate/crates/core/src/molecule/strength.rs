use super::catalog::{StrengthSource, TransitionLine};
use super::state::MolecularState;
use crate::angmom::{wigner_3j, wigner_6j, HalfInt};
use crate::error::{Error, Result};
use crate::units::{nm_to_angular_frequency, si_to_au_dipole_squared, HBAR, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};
use std::f64::consts::PI;

/// Lattice polarization relative to the quantization axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    Pi,
    SigmaPlus,
    SigmaMinus,
}

/// Ratio of upper to lower orbital degeneracy for a band tag.
///
/// A-state bands are 2Pi <- 2Sigma and count both Lambda components; all
/// other bands are treated as Sigma <- Sigma.
pub fn band_degeneracy(band: &str) -> f64 {
    if band.trim_start().starts_with('A') {
        2.0
    } else {
        1.0
    }
}

/// Band strength (C^2 m^2) summed over upper states, from the vibronic Einstein A.
pub fn band_strength_si(einstein_a_per_s: f64, wavelength_nm: f64, degeneracy: f64) -> f64 {
    let w = nm_to_angular_frequency(wavelength_nm);
    degeneracy * 3.0 * PI * VACUUM_PERMITTIVITY * HBAR * SPEED_OF_LIGHT.powi(3) * einstein_a_per_s / w.powi(3)
}

/// Line strength |<J'||mu||J''>|^2 in atomic units.
pub fn line_strength_au(line: &TransitionLine) -> f64 {
    match line.strength {
        StrengthSource::Band { einstein_a_per_s, honl_london } => {
            let s = band_strength_si(einstein_a_per_s, line.wavelength_nm, band_degeneracy(&line.band));
            si_to_au_dipole_squared(s) * honl_london
        }
        StrengthSource::Explicit { mu_squared_au } => mu_squared_au,
    }
}

/// Squared q = 0 dipole matrix element (au) between `state` and the upper
/// level of `line`, summed over upper hyperfine and Zeeman sublevels.
pub fn transition_strength(state: &MolecularState, line: &TransitionLine, polarization: Polarization) -> Result<f64> {
    if polarization != Polarization::Pi {
        return Err(Error::Unsupported(format!("{polarization:?} polarization; only pi (q = 0) is modelled")));
    }
    if line.n_lower != state.n || line.j_lower != state.j {
        return Err(Error::invalid(format!(
            "line {} starts from N''={}, J''={}, not from {state}",
            line.label(),
            line.n_lower,
            line.j_lower
        )));
    }
    Ok(line_strength_au(line) * angular_factor(state, line.j_upper)?)
}

/// Zeeman (and hyperfine recoupling) weight of the reduced line strength.
pub fn angular_factor(state: &MolecularState, j_upper: HalfInt) -> Result<f64> {
    let one = HalfInt::ONE;
    let m = state.m;
    match state.f {
        None => Ok(wigner_3j(j_upper, one, state.j, -m, HalfInt::ZERO, m)?.powi(2)),
        Some(f) => {
            let i = HalfInt::from_int(i32::from(state.nuclear_spin));
            let mut total = 0.0;
            let mut fu = (j_upper - i).abs();
            while fu <= j_upper + i {
                if fu.admits_projection(m) {
                    let six = wigner_6j(j_upper, fu, i, f, state.j, one)?;
                    let three = wigner_3j(fu, one, f, -m, HalfInt::ZERO, m)?;
                    total += f64::from(fu.multiplicity() * f.multiplicity()) * (six * three).powi(2);
                }
                fu = fu + one;
            }
            Ok(total)
        }
    }
}

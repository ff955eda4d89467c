use super::catalog::LineCatalog;
use super::state::MolecularState;
use super::strength::{band_degeneracy, band_strength_si, transition_strength, Polarization};
use crate::error::{Error, Result};
use crate::units::{
    au_to_si_dipole_squared, nm_to_angular_frequency, polarizability_to_shift, si_to_au_dipole_squared,
    si_to_au_polarizability, HBAR,
};
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizabilityOptions {
    /// Minimum allowed |detuning| from any line of the state's level, in Hz.
    pub guard_hz: f64,
}

impl Default for PolarizabilityOptions {
    fn default() -> Self {
        PolarizabilityOptions { guard_hz: 1.0e9 }
    }
}

/// One term of the sum over intermediate states.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonantTerm {
    pub label: String,
    pub wavelength_nm: f64,
    pub omega: f64,
    /// Squared q = 0 matrix element in au.
    pub mu_squared_au: f64,
}

impl ResonantTerm {
    /// Contribution to the polarizability (au) at optical angular frequency `w`.
    pub fn polarizability_au(&self, w: f64) -> f64 {
        let mu2 = au_to_si_dipole_squared(self.mu_squared_au);
        si_to_au_polarizability(2.0 * self.omega * mu2 / (HBAR * (self.omega * self.omega - w * w)))
    }
}

/// Pre-computed transition strengths of one state, so that wavelength
/// sweeps only re-evaluate energy denominators.
#[derive(Debug, Clone)]
pub struct StateResponse {
    pub state: MolecularState,
    pub lines: Vec<ResonantTerm>,
    pub far_bands: Vec<ResonantTerm>,
    pub core_au: f64,
}

impl StateResponse {
    pub fn new(state: &MolecularState, catalog: &LineCatalog) -> Result<Self> {
        state.validate()?;
        let lines = catalog
            .lines_from(state.n, state.j)
            .map(|line| {
                Ok(ResonantTerm {
                    label: line.label(),
                    wavelength_nm: line.wavelength_nm,
                    omega: line.angular_frequency(),
                    mu_squared_au: transition_strength(state, line, Polarization::Pi)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let far_bands = catalog
            .far_bands()
            .iter()
            .map(|b| {
                let s = band_strength_si(b.einstein_a_per_s, b.wavelength_nm, band_degeneracy(&b.band));
                ResonantTerm {
                    label: b.band.clone(),
                    wavelength_nm: b.wavelength_nm,
                    omega: nm_to_angular_frequency(b.wavelength_nm),
                    mu_squared_au: si_to_au_dipole_squared(s) / 3.0,
                }
            })
            .collect();
        Ok(StateResponse { state: *state, lines, far_bands, core_au: catalog.core_polarizability_au() })
    }

    /// Responses for many states, computed in parallel.
    pub fn batch(states: &[MolecularState], catalog: &LineCatalog) -> Result<Vec<Self>> {
        states.par_iter().map(|s| Self::new(s, catalog)).collect()
    }

    fn check_guard(&self, w: f64, opts: &PolarizabilityOptions) -> Result<()> {
        for t in self.lines.iter().chain(&self.far_bands) {
            let detuning_hz = (w - t.omega) / (2.0 * PI);
            if detuning_hz.abs() < opts.guard_hz {
                return Err(Error::NearResonance { line_nm: t.wavelength_nm, detuning_hz, guard_hz: opts.guard_hz });
            }
        }
        Ok(())
    }

    fn omega(wavelength_nm: f64) -> Result<f64> {
        if wavelength_nm.is_nan() || wavelength_nm <= 0.0 {
            return Err(Error::invalid(format!("wavelength must be > 0, got {wavelength_nm}")));
        }
        Ok(nm_to_angular_frequency(wavelength_nm))
    }

    /// Contribution of the rotationally resolved lines only (au).
    pub fn resonant_polarizability(&self, wavelength_nm: f64, opts: &PolarizabilityOptions) -> Result<f64> {
        let w = Self::omega(wavelength_nm)?;
        self.check_guard(w, opts)?;
        Ok(self.lines.iter().map(|t| t.polarizability_au(w)).sum())
    }

    /// Total polarizability (au): resolved lines, far bands and core.
    pub fn polarizability(&self, wavelength_nm: f64, opts: &PolarizabilityOptions) -> Result<f64> {
        let w = Self::omega(wavelength_nm)?;
        self.check_guard(w, opts)?;
        let lines: f64 = self.lines.iter().map(|t| t.polarizability_au(w)).sum();
        let far: f64 = self.far_bands.iter().map(|t| t.polarizability_au(w)).sum();
        Ok(lines + far + self.core_au)
    }
}

/// Dynamic polarizability (au) of `state` at `wavelength_nm` with the default guard.
pub fn dynamic_polarizability(state: &MolecularState, wavelength_nm: f64, catalog: &LineCatalog) -> Result<f64> {
    StateResponse::new(state, catalog)?.polarizability(wavelength_nm, &PolarizabilityOptions::default())
}

/// Single-beam ac-Stark shift (Hz) of `state`.
pub fn molecular_stark_shift(
    state: &MolecularState,
    wavelength_nm: f64,
    intensity: f64,
    catalog: &LineCatalog,
) -> Result<f64> {
    polarizability_to_shift(dynamic_polarizability(state, wavelength_nm, catalog)?, intensity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angmom::HalfInt;
    use crate::molecule::enumerate_states;
    use crate::units::IntensitySpec;

    fn state(n: u32, tj: i32, tm: i32) -> MolecularState {
        MolecularState::spinless(n, HalfInt::from_twice(tj), HalfInt::from_twice(tm)).unwrap()
    }

    #[test]
    fn guard_rejects_line_centre() {
        let cat = LineCatalog::shipped();
        let s = state(6, 11, 11);
        match dynamic_polarizability(&s, 789.1872, &cat) {
            Err(Error::NearResonance { line_nm, .. }) => assert_eq!(line_nm, 789.1872),
            other => panic!("{other:?}"),
        }
        // 1 GHz at 789 nm is about 2 pm
        assert!(dynamic_polarizability(&s, 789.1872 + 0.003, &cat).is_ok());
        assert!(dynamic_polarizability(&s, -1.0, &cat).is_err());
    }

    #[test]
    fn sign_structure() {
        let cat = LineCatalog::shipped();
        for s in enumerate_states(8).unwrap() {
            let r = StateResponse::new(&s, &cat).unwrap();
            let opts = PolarizabilityOptions::default();
            // static limit and far red of the band: positive
            assert!(r.polarizability(f64::INFINITY, &opts).unwrap() > 0.0);
            assert!(r.resonant_polarizability(900.0, &opts).unwrap() > 0.0);
            // between the A(2) band and the A(3) band: resonant part negative
            assert!(r.resonant_polarizability(740.0, &opts).unwrap() < 0.0);
        }
    }

    #[test]
    fn core_only_far_from_lines() {
        let cat = LineCatalog::shipped();
        let i0 = IntensitySpec::CORE_ANCHOR.resolve().unwrap();
        let core_only = cat.with_core_polarizability(7.23);
        let s = state(0, 1, 1);
        let mut r = StateResponse::new(&s, &core_only).unwrap();
        r.lines.clear();
        r.far_bands.clear();
        let a = r.polarizability(789.0, &PolarizabilityOptions::default()).unwrap();
        assert!((polarizability_to_shift(a, i0).unwrap() + 390.0).abs() < 1e-9);
    }

    #[test]
    fn q12_state_sign_flip() {
        let cat = LineCatalog::shipped();
        let s = state(6, 11, 11);
        let r = StateResponse::new(&s, &cat).unwrap();
        let opts = PolarizabilityOptions::default();
        let blue = r.resonant_polarizability(789.0, &opts).unwrap();
        let red = r.resonant_polarizability(789.3, &opts).unwrap();
        assert!(blue < 0.0 && red > 0.0, "{blue} {red}");
    }
}

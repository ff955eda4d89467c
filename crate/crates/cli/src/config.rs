use crate::error::{CliError, CliResult};
use odf_core::angmom::HalfInt;
use odf_core::crystal::TwoIonCrystal;
use odf_core::identify::EventTolerances;
use odf_core::molecule::{
    atomic_polarizability, build_line_catalog, AtomicLevel, AtomicLevelModel, CatalogSource, LineCatalog,
    MolecularState, PolarizabilityOptions, PolarizabilityUse,
};
use odf_core::readout::{CouplingModel, ExcitationModel, PipelineConfig, ReadoutConfig};
use odf_core::units::{polarizability_to_shift, IntensitySpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub trap: Trap,
    pub masses: Masses,
    pub lattice: Lattice,
    pub catalog: Catalog,
    pub readout: Readout,
    pub thresholds: Thresholds,
    pub simulate: Simulate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trap {
    pub atomic_frequency_hz: Option<f64>,
    pub half_wavelengths: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Masses {
    pub molecule_u: f64,
    pub atom_u: f64,
    pub partner_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub wavelength_nm: f64,
    pub beat_hz: Option<f64>,
    pub intensity_w_m2: Option<f64>,
    pub anchor_shift_hz: Option<f64>,
    pub anchor_polarizability_au: Option<f64>,
    pub polarization_angle_rad: f64,
    pub pulse_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    pub lines: Option<PathBuf>,
    pub far_bands: Option<PathBuf>,
    pub n_max: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Readout {
    pub eta: f64,
    pub rabi_frequency_hz: f64,
    pub t_max_us: f64,
    pub points: usize,
    pub shots: u32,
    pub seed: u64,
    pub excitation: ExcitationModel,
    pub calibration_shifts_hz: Vec<f64>,
    pub partner_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub k: Vec<f64>,
    pub sign_k: f64,
    pub guard_hz: f64,
    pub power_uncertainty: f64,
    pub reaction_relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulate {
    pub molecule_state: [i32; 3],
    pub molecule_shift_hz: Option<f64>,
    pub sweep_half_width_hz: f64,
    pub sweep_points: usize,
}

/// Loaded configuration with relative paths resolved.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub hash: String,
}

impl RunConfig {
    /// `default` selects the shipped file; anything else is a path.
    pub fn load(spec: &str) -> CliResult<Loaded> {
        let (text, base) = if spec == "default" {
            (DEFAULT_CONFIG.to_string(), None)
        } else {
            let path = Path::new(spec);
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            (text, path.parent().map(Path::to_path_buf))
        };
        let mut config = Self::parse(&text)?;
        if let Some(base) = base {
            for p in [&mut config.catalog.lines, &mut config.catalog.far_bands].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        let hash = odf_core::digest::config_hash(&config)?;
        Ok(Loaded { config, hash })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        match (self.trap.atomic_frequency_hz, self.trap.half_wavelengths) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return bad("[trap] needs exactly one of atomic_frequency_hz or half_wavelengths".into()),
        }
        let l = &self.lattice;
        match (l.intensity_w_m2, l.anchor_shift_hz) {
            (Some(_), None) => {
                if l.anchor_polarizability_au.is_some() {
                    return bad("[lattice] anchor_polarizability_au is only used with anchor_shift_hz".into());
                }
            }
            (None, Some(_)) => {}
            _ => return bad("[lattice] needs exactly one of intensity_w_m2 or anchor_shift_hz".into()),
        }
        if !(l.pulse_ms > 0.0 && l.pulse_ms.is_finite()) {
            return bad(format!("[lattice] pulse_ms must be > 0, got {}", l.pulse_ms));
        }
        if self.thresholds.k.is_empty() || self.thresholds.k.iter().any(|k| !(*k > 0.0)) {
            return bad("[thresholds] k must be a non-empty list of positive values".into());
        }
        if !(self.simulate.sweep_half_width_hz >= 0.0) {
            return bad("[simulate] sweep_half_width_hz must be >= 0".into());
        }
        Ok(())
    }

    pub fn crystal(&self) -> CliResult<TwoIonCrystal> {
        let (m1, m2) = (self.masses.molecule_u, self.masses.atom_u);
        let crystal = match (self.trap.atomic_frequency_hz, self.trap.half_wavelengths) {
            (Some(f), None) => TwoIonCrystal::from_atomic_frequency(m1, m2, f)?,
            (None, Some(n)) => TwoIonCrystal::from_distance(m1, m2, self.ion_distance(n))?,
            _ => unreachable!("validated"),
        };
        Ok(crystal)
    }

    fn ion_distance(&self, n: u32) -> f64 {
        f64::from(n) * self.lattice.wavelength_nm * 1e-9 / 2.0
    }

    /// The crystal with the ions a further quarter wavelength apart.
    pub fn opposite_phase_crystal(&self) -> CliResult<TwoIonCrystal> {
        let c = self.crystal()?;
        let d = c.distance() + self.lattice.wavelength_nm * 1e-9 / 4.0;
        Ok(TwoIonCrystal::from_distance(c.m1_u, c.m2_u, d)?)
    }

    pub fn intensity(&self) -> CliResult<f64> {
        let l = &self.lattice;
        let spec = match (l.intensity_w_m2, l.anchor_shift_hz) {
            (Some(i), None) => IntensitySpec::Explicit(i),
            (None, Some(shift_hz)) => {
                let IntensitySpec::Anchor { alpha_au: core, .. } = IntensitySpec::CORE_ANCHOR else {
                    unreachable!("the core anchor is an anchor")
                };
                IntensitySpec::Anchor { alpha_au: l.anchor_polarizability_au.unwrap_or(core), shift_hz }
            }
            _ => unreachable!("validated"),
        };
        Ok(spec.resolve()?)
    }

    pub fn line_catalog(&self) -> CliResult<LineCatalog> {
        Ok(match &self.catalog.lines {
            Some(lines) => build_line_catalog(&CatalogSource::Files {
                lines: lines.clone(),
                far_bands: self.catalog.far_bands.clone(),
            })?,
            None => match &self.catalog.far_bands {
                Some(_) => return Err(CliError::Config("[catalog] far_bands requires lines".into())),
                None => LineCatalog::shipped(),
            },
        })
    }

    pub fn polarizability_options(&self) -> PolarizabilityOptions {
        PolarizabilityOptions { guard_hz: self.thresholds.guard_hz }
    }

    /// Single-beam lattice shift (Hz) of Ca+ shelved in D5/2(m = -5/2).
    pub fn atom_shift(&self, wavelength_nm: f64) -> CliResult<f64> {
        let model =
            AtomicLevelModel::new(AtomicLevel::D5_2, HalfInt::from_twice(-5), self.lattice.polarization_angle_rad)?;
        let alpha = atomic_polarizability(&model, wavelength_nm, PolarizabilityUse::Lattice)?;
        Ok(polarizability_to_shift(alpha.alpha_au, self.intensity()?)?)
    }

    /// Single-beam molecular shift (Hz) used by `simulate`.
    pub fn molecule_shift(&self, catalog: &LineCatalog) -> CliResult<f64> {
        if let Some(s) = self.simulate.molecule_shift_hz {
            return Ok(s);
        }
        let [n, tj, tm] = self.simulate.molecule_state;
        let n = u32::try_from(n).map_err(|_| CliError::Config(format!("[simulate] N must be >= 0, got {n}")))?;
        let state = MolecularState::spinless(n, HalfInt::from_twice(tj), HalfInt::from_twice(tm))?;
        let alpha = odf_core::molecule::StateResponse::new(&state, catalog)?
            .polarizability(self.lattice.wavelength_nm, &self.polarizability_options())?;
        Ok(polarizability_to_shift(alpha, self.intensity()?)?)
    }

    pub fn pipeline(&self) -> CliResult<PipelineConfig> {
        let r = &self.readout;
        let mut p = PipelineConfig::new(self.crystal()?, self.lattice.wavelength_nm);
        p.pulse_s = self.lattice.pulse_ms * 1e-3;
        p.readout = ReadoutConfig {
            eta: r.eta,
            rabi_frequency_hz: r.rabi_frequency_hz,
            t_max_s: r.t_max_us * 1e-6,
            points: r.points,
            shots: (r.shots > 0).then_some(r.shots),
            decoherence_s: None,
            coupling: CouplingModel::LambDicke,
            seed: r.seed,
        };
        p.excitation = r.excitation;
        p.partner_mass_u = self.masses.partner_u;
        p.partner_fraction = r.partner_fraction;
        p.validate()?;
        Ok(p)
    }

    pub fn event_tolerances(&self) -> EventTolerances {
        EventTolerances { reaction_relative: self.thresholds.reaction_relative, k: self.thresholds.sign_k }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_resolves() {
        let c = RunConfig::parse(DEFAULT_CONFIG).unwrap();
        let i = c.intensity().unwrap();
        assert_eq!(i, IntensitySpec::CORE_ANCHOR.resolve().unwrap());
        assert!((c.atom_shift(789.0).unwrap() + 403.0).abs() < 1.0);
        let p = c.pipeline().unwrap();
        assert_eq!(p.readout.shots, Some(20));
        assert!((p.crystal.distance() - 19.0 * 789e-9 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn exactly_one_trap_and_intensity() {
        let neither_trap = DEFAULT_CONFIG.replace("half_wavelengths = 19", "");
        assert!(RunConfig::parse(&neither_trap).is_err());
        let explicit = DEFAULT_CONFIG
            .replace("anchor_shift_hz = -390.0", "intensity_w_m2 = 1e7")
            .replace("anchor_polarizability_au = 7.23", "");
        assert_eq!(RunConfig::parse(&explicit).unwrap().intensity().unwrap(), 1e7);
        let both = DEFAULT_CONFIG.replace("anchor_shift_hz = -390.0", "anchor_shift_hz = -390.0\nintensity_w_m2 = 1e7");
        assert!(RunConfig::parse(&both).is_err());
        assert!(RunConfig::parse(&DEFAULT_CONFIG.replace("[simulate]", "[simulate]\nextra = 1")).is_err());
    }

    #[test]
    fn frequency_trap_matches_distance_trap() {
        let c = RunConfig::parse(DEFAULT_CONFIG).unwrap();
        let f2 = c.crystal().unwrap().atomic_angular_frequency() / std::f64::consts::TAU;
        let text = DEFAULT_CONFIG.replace("half_wavelengths = 19", &format!("atomic_frequency_hz = {f2:e}"));
        let d = RunConfig::parse(&text).unwrap().crystal().unwrap().distance();
        assert!((d / c.crystal().unwrap().distance() - 1.0).abs() < 1e-12);
    }
}

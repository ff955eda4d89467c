use crate::angmom::{upper_component_exists, HalfInt, PiCoupling, SpinComponent};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

const SHIPPED_CONSTANTS: &str = include_str!("../../data/n2plus_constants.toml");

/// 2Sigma rotational constants (cm^-1), Hund's case (b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaConstants {
    pub b: f64,
    pub d: f64,
    pub gamma: f64,
}

/// 2Pi constants (cm^-1): band origin, rotational, spin-orbit, centrifugal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiConstants {
    pub origin: f64,
    pub b: f64,
    pub a: f64,
    pub d: f64,
}

impl PiConstants {
    pub fn coupling(&self) -> Result<PiCoupling> {
        PiCoupling::new(self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopicConstants {
    pub band: String,
    pub einstein_a_per_s: f64,
    pub core_polarizability_au: f64,
    pub lower: SigmaConstants,
    pub upper: PiConstants,
}

impl SpectroscopicConstants {
    pub fn shipped() -> Self {
        Self::from_toml_str(SHIPPED_CONSTANTS).expect("shipped constants parse")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Validation(format!("constants: {e}")))?;
        c.upper.coupling()?;
        if !(c.lower.b > 0.0 && c.einstein_a_per_s > 0.0) {
            return Err(Error::Validation("constants: B'' and Einstein A must be positive".into()));
        }
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// Term energy (cm^-1) of the 2Sigma level (N, J).
pub fn sigma_term_energy(n: u32, j: HalfInt, c: &SigmaConstants) -> Result<f64> {
    let comp = SpinComponent::of_sigma_level(n, j)?;
    let nf = f64::from(n);
    let nn = nf * (nf + 1.0);
    let spin_rotation = match comp {
        SpinComponent::F1 => c.gamma * nf / 2.0,
        SpinComponent::F2 => -c.gamma * (nf + 1.0) / 2.0,
    };
    Ok(c.b * nn - c.d * nn * nn + spin_rotation)
}

/// Term energy (cm^-1, band origin included) of a 2Pi level.
///
/// Hill-Van Vleck form; F1 takes the lower root.
pub fn pi_term_energy(j: HalfInt, comp: SpinComponent, c: &PiConstants) -> Result<f64> {
    let coupling = c.coupling()?;
    if j.is_integer() || j.twice() < 1 {
        return Err(Error::invalid(format!("J' must be a positive half-integer, got {j}")));
    }
    if !upper_component_exists(j, comp, &coupling) {
        return Err(Error::invalid(format!("2Pi component {comp:?} does not exist at J' = {j}")));
    }
    let x = (j.value() + 0.5).powi(2);
    let y = coupling.y();
    let root = 0.5 * (4.0 * x + y * (y - 4.0)).sqrt();
    let sign = if j.twice() == 1 {
        // the lone J = 1/2 level: the one root that survives
        if y < 2.0 {
            1.0
        } else {
            -1.0
        }
    } else {
        match comp {
            SpinComponent::F1 => -1.0,
            SpinComponent::F2 => 1.0,
        }
    };
    Ok(c.origin + c.b * (x - 1.0 + sign * root) - c.d * (x - 1.0).powi(2))
}

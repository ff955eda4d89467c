use crate::angmom::HalfInt;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const SHIPPED_TABLE: &str = include_str!("../../data/ca_plus_polarizability.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AtomicLevel {
    S1_2,
    D5_2,
}

impl AtomicLevel {
    pub fn j(self) -> HalfInt {
        match self {
            AtomicLevel::S1_2 => HalfInt::from_twice(1),
            AtomicLevel::D5_2 => HalfInt::from_twice(5),
        }
    }
}

/// Scalar and tensor valence polarizabilities tabulated against wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicPolarizabilityTable {
    rows: Vec<[f64; 4]>,
    core_s_au: f64,
    core_d_au: f64,
}

impl AtomicPolarizabilityTable {
    /// 40Ca+ S1/2 and D5/2 between 785 and 790 nm.
    pub fn shipped() -> Self {
        Self::from_csv_str(SHIPPED_TABLE).expect("shipped Ca+ table parses")
    }

    /// Columns wavelength_nm, s_scalar_au, d_scalar_au, d_tensor_au; metadata
    /// comments `core_s_au` and `core_d_au`.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut core_s = None;
        let mut core_d = None;
        for line in text.lines() {
            if let Some((k, v)) = line.trim_start().strip_prefix('#').and_then(|b| b.split_once('=')) {
                let v: Option<f64> = v.trim().parse().ok();
                match k.trim() {
                    "core_s_au" => core_s = v,
                    "core_d_au" => core_d = v,
                    _ => {}
                }
            }
        }
        let mut reader =
            csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec =
                rec.map_err(|e| Error::Parse { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != 4 {
                return Err(Error::Parse { line, message: format!("expected 4 columns, got {}", rec.len()) });
            }
            let mut row = [0.0; 4];
            for (k, f) in rec.iter().enumerate() {
                row[k] = f.parse().map_err(|_| Error::Parse { line, message: format!("cannot parse '{f}'") })?;
            }
            rows.push(row);
        }
        if rows.len() < 2 {
            return Err(Error::Validation("polarizability table needs at least two rows".into()));
        }
        if !rows.windows(2).all(|w| w[1][0] > w[0][0]) {
            return Err(Error::Validation("polarizability table wavelengths must increase".into()));
        }
        Ok(AtomicPolarizabilityTable {
            rows,
            core_s_au: core_s.ok_or_else(|| Error::Validation("missing metadata core_s_au".into()))?,
            core_d_au: core_d.ok_or_else(|| Error::Validation("missing metadata core_d_au".into()))?,
        })
    }

    pub fn range_nm(&self) -> (f64, f64) {
        (self.rows[0][0], self.rows[self.rows.len() - 1][0])
    }

    /// Linearly interpolated (scalar, tensor) valence polarizability.
    pub fn valence(&self, level: AtomicLevel, wavelength_nm: f64) -> Result<(f64, f64)> {
        let (lo, hi) = self.range_nm();
        if !(lo..=hi).contains(&wavelength_nm) {
            return Err(Error::invalid(format!(
                "no atomic polarizability data at {wavelength_nm} nm (table covers {lo}-{hi} nm)"
            )));
        }
        let k = self.rows.partition_point(|r| r[0] <= wavelength_nm).clamp(1, self.rows.len() - 1);
        let (a, b) = (&self.rows[k - 1], &self.rows[k]);
        let t = (wavelength_nm - a[0]) / (b[0] - a[0]);
        let lerp = |i: usize| a[i] + t * (b[i] - a[i]);
        Ok(match level {
            AtomicLevel::S1_2 => (lerp(1), 0.0),
            AtomicLevel::D5_2 => (lerp(2), lerp(3)),
        })
    }

    pub fn core(&self, level: AtomicLevel) -> f64 {
        match level {
            AtomicLevel::S1_2 => self.core_s_au,
            AtomicLevel::D5_2 => self.core_d_au,
        }
    }
}

/// What the polarizability is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolarizabilityUse {
    /// Force on the ion in the lattice: valence plus core.
    Lattice,
    /// Light shift of an optical transition: valence only (the core cancels).
    Spectroscopy,
}

#[derive(Debug, Clone)]
pub struct AtomicLevelModel {
    pub level: AtomicLevel,
    pub m: HalfInt,
    /// Angle between the lattice polarization and the quantization axis (rad).
    pub theta: f64,
    pub table: Arc<AtomicPolarizabilityTable>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicPolarizability {
    pub alpha_au: f64,
    /// False when the tensor term is undefined (J = 1/2) and was omitted.
    pub tensor_included: bool,
}

impl AtomicLevelModel {
    pub fn new(level: AtomicLevel, m: HalfInt, theta: f64) -> Result<Self> {
        Self::with_table(level, m, theta, Arc::new(AtomicPolarizabilityTable::shipped()))
    }

    pub fn with_table(
        level: AtomicLevel,
        m: HalfInt,
        theta: f64,
        table: Arc<AtomicPolarizabilityTable>,
    ) -> Result<Self> {
        if !level.j().admits_projection(m) {
            return Err(Error::invalid(format!("m = {m} is not a projection of J = {}", level.j())));
        }
        if !theta.is_finite() {
            return Err(Error::invalid("polarization angle must be finite"));
        }
        Ok(AtomicLevelModel { level, m, theta, table })
    }

    /// Tensor weight ((3cos^2 t - 1)/2)(3m^2 - J(J+1))/(J(2J-1)); None for J = 1/2.
    pub fn tensor_prefactor(&self) -> Option<f64> {
        let j = self.level.j().value();
        let denom = j * (2.0 * j - 1.0);
        if denom == 0.0 {
            return None;
        }
        let m = self.m.value();
        let angular = 0.5 * (3.0 * self.theta.cos().powi(2) - 1.0);
        Some(angular * (3.0 * m * m - j * (j + 1.0)) / denom)
    }
}

pub fn atomic_polarizability(
    model: &AtomicLevelModel,
    wavelength_nm: f64,
    usage: PolarizabilityUse,
) -> Result<AtomicPolarizability> {
    let (scalar, tensor) = model.table.valence(model.level, wavelength_nm)?;
    let (tensor_term, tensor_included) = match model.tensor_prefactor() {
        Some(p) => (p * tensor, true),
        None => (0.0, false),
    };
    let core = match usage {
        PolarizabilityUse::Lattice => model.table.core(model.level),
        PolarizabilityUse::Spectroscopy => 0.0,
    };
    Ok(AtomicPolarizability { alpha_au: scalar + tensor_term + core, tensor_included })
}

/// Valence polarizability difference upper - lower, which sets the light
/// shift of the optical transition between them.
pub fn differential_polarizability(
    upper: &AtomicLevelModel,
    lower: &AtomicLevelModel,
    wavelength_nm: f64,
) -> Result<f64> {
    let u = atomic_polarizability(upper, wavelength_nm, PolarizabilityUse::Spectroscopy)?;
    let l = atomic_polarizability(lower, wavelength_nm, PolarizabilityUse::Spectroscopy)?;
    Ok(u.alpha_au - l.alpha_au)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d52(tm: i32, theta: f64) -> AtomicLevelModel {
        AtomicLevelModel::new(AtomicLevel::D5_2, HalfInt::from_twice(tm), theta).unwrap()
    }

    #[test]
    fn reference_values_at_789() {
        let d = d52(-5, 0.0);
        assert_eq!(d.tensor_prefactor(), Some(1.0));
        let a = atomic_polarizability(&d, 789.0, PolarizabilityUse::Spectroscopy).unwrap();
        assert!((a.alpha_au - 4.44).abs() < 1e-9);
        let a = atomic_polarizability(&d, 789.0, PolarizabilityUse::Lattice).unwrap();
        assert!((a.alpha_au - 7.47).abs() < 1e-9);

        let s = AtomicLevelModel::new(AtomicLevel::S1_2, HalfInt::HALF, 0.0).unwrap();
        for theta in [0.0, 0.4, 1.2] {
            let s = AtomicLevelModel { theta, ..s.clone() };
            let a = atomic_polarizability(&s, 789.0, PolarizabilityUse::Spectroscopy).unwrap();
            assert!((a.alpha_au - 97.5).abs() < 1e-9);
            assert!(!a.tensor_included);
        }
        assert_eq!(s.table.core(AtomicLevel::S1_2), 3.134);
        assert_eq!(s.table.core(AtomicLevel::D5_2), 3.03);
    }

    #[test]
    fn magic_angle_removes_tensor() {
        let magic = (1.0f64 / 3.0).sqrt().acos();
        let d = d52(-5, magic);
        assert!(d.tensor_prefactor().unwrap().abs() < 1e-15);
        let a = atomic_polarizability(&d, 789.0, PolarizabilityUse::Spectroscopy).unwrap();
        let (scalar, _) = d.table.valence(AtomicLevel::D5_2, 789.0).unwrap();
        assert!((a.alpha_au - scalar).abs() < 1e-9);
    }

    #[test]
    fn tensor_weights_average_to_zero() {
        let total: f64 = (-5..=5).step_by(2).map(|tm| d52(tm, 0.3).tensor_prefactor().unwrap()).sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn range_and_validation() {
        let d = d52(5, 0.0);
        assert!(atomic_polarizability(&d, 780.0, PolarizabilityUse::Lattice).is_err());
        assert!(atomic_polarizability(&d, 785.25, PolarizabilityUse::Lattice).is_ok());
        assert!(AtomicLevelModel::new(AtomicLevel::D5_2, HalfInt::from_twice(7), 0.0).is_err());
        assert!(AtomicPolarizabilityTable::from_csv_str("").is_err());
    }

    #[test]
    fn differential_polarizability_at_789() {
        let d = d52(-5, 0.0);
        let s = AtomicLevelModel::new(AtomicLevel::S1_2, HalfInt::HALF, 0.0).unwrap();
        let diff = differential_polarizability(&d, &s, 789.0).unwrap();
        assert!((diff - (4.44 - 97.5)).abs() < 1e-9);
    }
}

//! State identification from measured shifts, partial readout by detuning
//! sign, and classification of state-change events.

use crate::crystal::DetuningSign;
use crate::error::{Error, Result};
use crate::molecule::{LineCatalog, MolecularState, PolarizabilityOptions, StateResponse};
use crate::units::polarizability_to_shift;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Read;

/// Relative lattice power uncertainty folded into every measurement.
pub const DEFAULT_POWER_UNCERTAINTY: f64 = 0.1;
/// Relative in-phase frequency change that signals a mass change.
pub const REACTION_THRESHOLD: f64 = 3e-3;
/// Sigma multipliers of the reported candidate tiers.
pub const DEFAULT_TIERS: [f64; 2] = [1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub wavelength_nm: f64,
    /// Single-beam lattice intensity (W/m^2).
    pub intensity_w_m2: f64,
    /// |molecular shift| (Hz).
    pub shift_hz: f64,
    /// Fit uncertainty of `shift_hz` (Hz).
    pub fit_sigma_hz: f64,
    /// Relative lattice power uncertainty.
    pub power_uncertainty: f64,
    pub sign: DetuningSign,
    /// In-phase mode frequency (Hz).
    pub f_ip_hz: f64,
}

impl Measurement {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.wavelength_nm, self.intensity_w_m2, self.shift_hz, self.fit_sigma_hz, self.f_ip_hz]
            .iter()
            .all(|x| x.is_finite());
        if !finite || self.wavelength_nm <= 0.0 || self.intensity_w_m2 < 0.0 || self.f_ip_hz <= 0.0 {
            return Err(Error::Validation(format!("measurement has non-physical fields: {self:?}")));
        }
        if self.shift_hz < 0.0 || self.fit_sigma_hz < 0.0 || !(self.power_uncertainty >= 0.0) {
            return Err(Error::Validation("shift and uncertainties must be >= 0".into()));
        }
        if !(self.sigma_hz() > 0.0) {
            return Err(Error::Validation("combined uncertainty must be > 0".into()));
        }
        Ok(())
    }

    /// Fit and power uncertainties in quadrature.
    pub fn sigma_hz(&self) -> f64 {
        self.fit_sigma_hz.hypot(self.power_uncertainty * self.shift_hz)
    }
}

/// Reads columns wavelength_nm, intensity_W_m2, shift_Hz, sigma_Hz, sign,
/// f_ip_Hz. `sigma_Hz` is the fit uncertainty; `power_uncertainty` is added.
pub fn read_measurements_csv<R: Read>(input: R, power_uncertainty: f64) -> Result<Vec<Measurement>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing column '{name}'") })
    };
    let cols = [col("wavelength_nm")?, col("intensity_W_m2")?, col("shift_Hz")?, col("sigma_Hz")?, col("f_ip_Hz")?];
    let c_sign = col("sign")?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut v = [0.0; 5];
        for (x, &c) in v.iter_mut().zip(&cols) {
            let s = rec.get(c).unwrap_or("");
            *x = s.parse().map_err(|_| Error::Parse { line, message: format!("cannot parse '{s}'") })?;
        }
        let sign =
            rec.get(c_sign).unwrap_or("").parse().map_err(|e: Error| Error::Parse { line, message: e.to_string() })?;
        let m = Measurement {
            wavelength_nm: v[0],
            intensity_w_m2: v[1],
            shift_hz: v[2].abs(),
            fit_sigma_hz: v[3],
            power_uncertainty,
            sign,
            f_ip_hz: v[4],
        };
        m.validate().map_err(|e| Error::Parse { line, message: e.to_string() })?;
        out.push(m);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub state: MolecularState,
    /// Signed single-beam shift (Hz); None inside the near-resonance guard.
    pub shift_hz: Option<f64>,
    /// Line that triggered the guard.
    pub near_line_nm: Option<f64>,
}

impl Prediction {
    pub fn sign(&self) -> Option<DetuningSign> {
        self.shift_hz.map(DetuningSign::of_shift)
    }
}

/// Cached state responses for repeated predictions at different lattice settings.
#[derive(Debug, Clone)]
pub struct Predictor {
    responses: Vec<StateResponse>,
    pub options: PolarizabilityOptions,
}

impl Predictor {
    pub fn new(states: &[MolecularState], catalog: &LineCatalog) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid("no states to predict"));
        }
        let mut sorted = states.to_vec();
        sorted.sort();
        Ok(Predictor { responses: StateResponse::batch(&sorted, catalog)?, options: PolarizabilityOptions::default() })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// One prediction per state, ordered by (N, J, I, F, m).
    pub fn predict(&self, wavelength_nm: f64, intensity_w_m2: f64) -> Result<Vec<Prediction>> {
        self.responses
            .par_iter()
            .map(|r| match r.polarizability(wavelength_nm, &self.options) {
                Ok(alpha) => Ok(Prediction {
                    state: r.state,
                    shift_hz: Some(polarizability_to_shift(alpha, intensity_w_m2)?),
                    near_line_nm: None,
                }),
                Err(Error::NearResonance { line_nm, .. }) => {
                    Ok(Prediction { state: r.state, shift_hz: None, near_line_nm: Some(line_nm) })
                }
                Err(e) => Err(e),
            })
            .collect()
    }
}

pub fn predict_catalog_shifts(
    wavelength_nm: f64,
    intensity_w_m2: f64,
    states: &[MolecularState],
    catalog: &LineCatalog,
) -> Result<Vec<Prediction>> {
    Predictor::new(states, catalog)?.predict(wavelength_nm, intensity_w_m2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub state: MolecularState,
    /// None for states inside the near-resonance guard, which cannot be excluded.
    pub predicted_shift_hz: Option<f64>,
    /// (|prediction| - |measurement|) / sigma.
    pub pull: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tier {
    pub k: f64,
    pub candidates: Vec<Candidate>,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub total: usize,
    /// Ordered by increasing k.
    pub tiers: Vec<Tier>,
}

impl CandidateSet {
    pub fn tier(&self, k: f64) -> Option<&Tier> {
        self.tiers.iter().find(|t| t.k == k)
    }
}

/// States whose prediction agrees with `meas` in sign and within k sigma in
/// magnitude, for each k in `ks`.
pub fn match_candidates(meas: &Measurement, predictions: &[Prediction], ks: &[f64]) -> Result<CandidateSet> {
    meas.validate()?;
    if predictions.is_empty() {
        return Err(Error::invalid("empty prediction table"));
    }
    if ks.is_empty() || ks.iter().any(|k| !(*k >= 0.0)) {
        return Err(Error::invalid("sigma multipliers must be non-empty and >= 0"));
    }
    let mut ks = ks.to_vec();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    let sigma = meas.sigma_hz();
    let scored: Vec<Candidate> = predictions
        .iter()
        .filter(|p| match (p.sign(), meas.sign) {
            (_, DetuningSign::Indeterminate) | (None, _) => true,
            (Some(s), m) => s == m,
        })
        .map(|p| Candidate {
            state: p.state,
            predicted_shift_hz: p.shift_hz,
            pull: p.shift_hz.map(|s| (s.abs() - meas.shift_hz) / sigma),
        })
        .collect();
    let tiers = ks
        .iter()
        .map(|&k| {
            let candidates: Vec<Candidate> =
                scored.iter().filter(|c| c.pull.is_none_or(|z| z.abs() <= k)).copied().collect();
            Tier { k, excluded: predictions.len() - candidates.len(), candidates }
        })
        .collect();
    Ok(CandidateSet { total: predictions.len(), tiers })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub measurement: Measurement,
    pub candidates: CandidateSet,
    /// States whose prediction fell inside the near-resonance guard.
    pub unresolved: usize,
}

impl Identification {
    /// Table-style listing of both tiers.
    pub fn render_text(&self) -> String {
        let m = &self.measurement;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "measurement: {:.4} nm, |shift| = {:.1} +/- {:.1} Hz, sign {}, f_IP = {:.1} Hz",
            m.wavelength_nm,
            m.shift_hz,
            m.sigma_hz(),
            m.sign,
            m.f_ip_hz
        );
        for tier in &self.candidates.tiers {
            let _ = writeln!(
                s,
                "k = {}: {} candidates, {} of {} excluded",
                tier.k,
                tier.candidates.len(),
                tier.excluded,
                self.candidates.total
            );
            for c in &tier.candidates {
                match (c.predicted_shift_hz, c.pull) {
                    (Some(p), Some(z)) => {
                        let _ = writeln!(s, "  {}  predicted {p:.1} Hz  pull {z:+.2}", c.state);
                    }
                    _ => {
                        let _ = writeln!(s, "  {}  near resonance", c.state);
                    }
                }
            }
        }
        if self.unresolved > 0 {
            let _ = writeln!(s, "{} states inside the near-resonance guard were kept as candidates", self.unresolved);
        }
        s
    }
}

/// Identifies each measurement against `predictor`, in parallel.
pub fn identify_batch(measurements: &[Measurement], predictor: &Predictor, ks: &[f64]) -> Result<Vec<Identification>> {
    measurements
        .par_iter()
        .map(|m| {
            m.validate()?;
            let preds = predictor.predict(m.wavelength_nm, m.intensity_w_m2)?;
            let unresolved = preds.iter().filter(|p| p.shift_hz.is_none()).count();
            Ok(Identification { measurement: *m, candidates: match_candidates(m, &preds, ks)?, unresolved })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExclusionWindow {
    /// Any wavelength above this is red of every line of the manifold (nm).
    pub red_min_nm: f64,
    /// Any wavelength below this is blue of every line of the manifold (nm).
    pub blue_max_nm: f64,
}

/// Extreme line wavelengths of all levels with N'' <= `n_max`.
pub fn exclusion_window(n_max: u32, catalog: &LineCatalog) -> Result<ExclusionWindow> {
    if !n_max.is_multiple_of(2) {
        return Err(Error::invalid(format!("N_max must be even, got {n_max}")));
    }
    for n in (0..=n_max).step_by(2) {
        for j in level_js(n) {
            if catalog.lines_from(n, j).next().is_none() {
                return Err(Error::invalid(format!("catalog has no lines from N'' = {n}, J'' = {j}")));
            }
        }
    }
    let lines = catalog.lines().iter().filter(|l| l.n_lower <= n_max);
    let (red, blue) =
        lines.fold((f64::NEG_INFINITY, f64::INFINITY), |(r, b), l| (r.max(l.wavelength_nm), b.min(l.wavelength_nm)));
    Ok(ExclusionWindow { red_min_nm: red, blue_max_nm: blue })
}

fn level_js(n: u32) -> impl Iterator<Item = crate::angmom::HalfInt> {
    let tn = 2 * n as i32;
    [tn - 1, tn + 1].into_iter().filter(|t| *t >= 1).map(crate::angmom::HalfInt::from_twice)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartialReadout {
    /// Every level with N'' <= N_max is ruled out.
    Excluded,
    NotExcluded,
    /// Inside the band or sign undetermined.
    Inapplicable,
}

/// Rules out the whole manifold N'' <= `n_max` when the lattice lies outside
/// its line span and the measured sign contradicts the one all its levels share.
pub fn apply_partial_readout(meas: &Measurement, n_max: u32, catalog: &LineCatalog) -> Result<PartialReadout> {
    let w = exclusion_window(n_max, catalog)?;
    let shared = if meas.wavelength_nm > w.red_min_nm {
        DetuningSign::Red
    } else if meas.wavelength_nm < w.blue_max_nm {
        DetuningSign::Blue
    } else {
        return Ok(PartialReadout::Inapplicable);
    };
    Ok(match meas.sign {
        DetuningSign::Indeterminate => PartialReadout::Inapplicable,
        s if s == shared => PartialReadout::NotExcluded,
        _ => PartialReadout::Excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    Reaction,
    QuantumJump,
    NoChange,
}

impl std::fmt::Display for Event {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Event::Reaction => "reaction",
            Event::QuantumJump => "quantum_jump",
            Event::NoChange => "no_change",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventTolerances {
    /// Relative in-phase frequency change above which the mass changed.
    pub reaction_relative: f64,
    /// Sigma multiplier for a change in |shift|.
    pub k: f64,
}

impl Default for EventTolerances {
    fn default() -> Self {
        EventTolerances { reaction_relative: REACTION_THRESHOLD, k: 2.0 }
    }
}

pub fn classify_event(before: &Measurement, after: &Measurement, tol: &EventTolerances) -> Result<Event> {
    before.validate()?;
    after.validate()?;
    if (after.f_ip_hz - before.f_ip_hz).abs() / before.f_ip_hz > tol.reaction_relative {
        return Ok(Event::Reaction);
    }
    let determined = |s: DetuningSign| s != DetuningSign::Indeterminate;
    let flipped = determined(before.sign) && determined(after.sign) && before.sign != after.sign;
    let moved = (after.shift_hz - before.shift_hz).abs() > tol.k * before.sigma_hz().hypot(after.sigma_hz());
    Ok(if flipped || moved { Event::QuantumJump } else { Event::NoChange })
}

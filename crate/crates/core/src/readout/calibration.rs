use super::distribution::MotionalDistribution;
use super::optimize::{grid_minimize, Pchip};
use super::signal::{probe_times, synthesize_bsb_signal, BsbParams, CouplingModel, RabiSignal, DEFAULT_SHOTS};
use crate::crystal::{LatticeDrive, TwoIonCrystal};
use crate::digest::config_hash;
use crate::dynamics::{linearized_prediction, simulate_excitation, SimulationConfig, DEFAULT_PULSE_S};
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;

/// Atomic ac-Stark shifts (Hz) of the shipped calibration.
pub const DEFAULT_CALIBRATION_SHIFTS_HZ: [f64; 6] = [800.0, 1560.0, 2320.0, 3080.0, 3840.0, 4600.0];

/// Reduced chi-square above which a fit is flagged and its sigma inflated.
const POOR_FIT_CHI2: f64 = 4.0;
/// Sigma, as a fraction of the calibrated range, above which an extraction
/// carries no information.
const UNINFORMATIVE_FRACTION: f64 = 0.25;
const GRID_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutConfig {
    pub eta: f64,
    /// Carrier Rabi frequency Omega0 / 2 pi (Hz).
    pub rabi_frequency_hz: f64,
    /// Longest probe time (s).
    pub t_max_s: f64,
    pub points: usize,
    /// Shots per point; None for exact curves.
    pub shots: Option<u32>,
    pub decoherence_s: Option<f64>,
    pub coupling: CouplingModel,
    pub seed: u64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        ReadoutConfig {
            eta: 0.1,
            rabi_frequency_hz: 50e3,
            t_max_s: 200e-6,
            points: 101,
            shots: Some(DEFAULT_SHOTS),
            decoherence_s: None,
            coupling: CouplingModel::LambDicke,
            seed: 1,
        }
    }
}

impl ReadoutConfig {
    pub fn bsb_params(&self) -> BsbParams {
        BsbParams {
            eta: self.eta,
            omega0: TAU * self.rabi_frequency_hz,
            decoherence_s: self.decoherence_s,
            coupling: self.coupling,
        }
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        probe_times(self.t_max_s, self.points)
    }

    pub fn validate(&self) -> Result<()> {
        self.bsb_params().validate()?;
        if self.points < 10 {
            return Err(Error::invalid(format!("readout needs at least 10 probe times, got {}", self.points)));
        }
        if self.shots == Some(0) {
            return Err(Error::invalid("shots must be > 0"));
        }
        self.times().map(|_| ())
    }
}

/// How the lattice pulse is turned into a coherent amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationModel {
    #[default]
    Linearized,
    Simulated,
}

/// Everything between a lattice shift and a sideband signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub crystal: TwoIonCrystal,
    pub wavelength_nm: f64,
    pub pulse_s: f64,
    pub readout: ReadoutConfig,
    pub excitation: ExcitationModel,
    /// Mass (u) of the molecule co-trapped during calibration.
    pub partner_mass_u: f64,
    /// True partner shift as a fraction of the atomic shift, present in
    /// synthesized templates.
    pub partner_fraction: f64,
}

impl PipelineConfig {
    pub fn new(crystal: TwoIonCrystal, wavelength_nm: f64) -> Self {
        PipelineConfig {
            crystal,
            wavelength_nm,
            pulse_s: DEFAULT_PULSE_S,
            readout: ReadoutConfig::default(),
            excitation: ExcitationModel::Linearized,
            partner_mass_u: 29.0,
            partner_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.readout.validate()?;
        self.crystal.with_molecular_mass(self.partner_mass_u)?;
        if !(self.wavelength_nm > 0.0 && self.pulse_s > 0.0) {
            return Err(Error::invalid("wavelength and pulse length must be > 0"));
        }
        if !(self.partner_fraction > -1.0 && self.partner_fraction < 1.0) {
            return Err(Error::invalid(format!("partner fraction must be in (-1, 1), got {}", self.partner_fraction)));
        }
        Ok(())
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }

    /// In-phase mode frequency (Hz), used as the lattice beat frequency.
    pub fn ip_frequency(&self) -> f64 {
        self.crystal.modes().omega_minus / TAU
    }

    pub fn atom_weight(&self) -> f64 {
        self.crystal.modes().atom_weight()
    }

    pub fn molecule_weight(&self) -> f64 {
        self.crystal.modes().molecule_weight()
    }

    pub fn partner_weight(&self) -> Result<f64> {
        Ok(self.crystal.with_molecular_mass(self.partner_mass_u)?.modes().molecule_weight())
    }

    /// Resonant drive with single-beam shifts `e1` (molecule) and `e2` (atom).
    pub fn drive(&self, e1: f64, e2: f64, phi21: f64) -> Result<LatticeDrive> {
        LatticeDrive::with_relative_phase(self.wavelength_nm, self.ip_frequency(), e1, e2, phi21)
    }

    /// Coherent amplitude |alpha| of the in-phase mode after the pulse.
    pub fn coherent_amplitude(&self, e1: f64, e2: f64, phi21: f64) -> Result<f64> {
        let sim = SimulationConfig::new(self.crystal, self.drive(e1, e2, phi21)?, self.pulse_s)?;
        let exc = match self.excitation {
            ExcitationModel::Linearized => linearized_prediction(&sim)?,
            ExcitationModel::Simulated => simulate_excitation(&sim)?,
        };
        Ok(exc.nbar_minus.sqrt())
    }

    /// Amplitude for a calibration pulse: the atom at `atomic_shift_hz` plus the
    /// partner at `partner_fraction` of it, in phase.
    pub fn template_amplitude(&self, atomic_shift_hz: f64) -> Result<f64> {
        // the partner force is carried on the molecule slot with matching mode weight
        let e1 = self.partner_fraction * atomic_shift_hz * self.partner_weight()? / self.molecule_weight();
        self.coherent_amplitude(e1, atomic_shift_hz, 0.0)
    }

    pub fn signal_for_amplitude(&self, alpha: f64, seed: u64) -> Result<RabiSignal> {
        let dist = MotionalDistribution::coherent(alpha)?;
        synthesize_bsb_signal(&dist, &self.readout.bsb_params(), &self.readout.times()?, self.readout.shots, seed)
    }

    /// Signal after a pulse with molecular and atomic shifts `e1`, `e2`.
    pub fn synthesize(&self, e1: f64, e2: f64, phi21: f64, seed: u64) -> Result<RabiSignal> {
        self.signal_for_amplitude(self.coherent_amplitude(e1, e2, phi21)?, seed)
    }

    /// Same-phase and opposite-phase signals. The opposite-phase setting is a
    /// pi shift of the atom's lattice phase at unchanged trap frequency.
    pub fn sp_op_signals(&self, e1: f64, e2: f64, seed: u64) -> Result<(RabiSignal, RabiSignal)> {
        Ok((self.synthesize(e1, e2, 0.0, seed)?, self.synthesize(e1, e2, PI, seed.wrapping_add(1))?))
    }
}

/// Exact sideband curves of coherent states on a fixed time grid.
struct CoherentModel {
    times: Vec<f64>,
    decay: Vec<f64>,
    /// sin^2(Omega_n t / 2), row n.
    table: Vec<Vec<f64>>,
    params: BsbParams,
}

impl CoherentModel {
    fn new(params: &BsbParams, times: &[f64], alpha_max: f64) -> Self {
        let rows = Self::rows_for(alpha_max);
        let rabi = params.sideband_frequencies(rows);
        let table = rabi.iter().map(|w| times.iter().map(|t| (0.5 * w * t).sin().powi(2)).collect()).collect();
        let decay = times.iter().map(|&t| params.decoherence_s.map_or(1.0, |tau| (-t / tau).exp())).collect();
        CoherentModel { times: times.to_vec(), decay, table, params: *params }
    }

    fn rows_for(alpha: f64) -> usize {
        (alpha * alpha + 8.0 * alpha + 30.0).ceil() as usize
    }

    fn curve(&self, alpha: f64) -> Vec<f64> {
        let dist = MotionalDistribution::coherent(alpha).unwrap_or_else(|_| MotionalDistribution::ground());
        if dist.populations.len() > self.table.len() {
            return super::signal::bsb_curve(&dist, &self.params, &self.times);
        }
        let mut out = vec![0.0; self.times.len()];
        for (p, row) in dist.populations.iter().zip(&self.table) {
            for (o, s) in out.iter_mut().zip(row) {
                *o += p * s;
            }
        }
        for (o, d) in out.iter_mut().zip(&self.decay) {
            *o = (*o * d + 0.5 * (1.0 - d)).clamp(0.0, 1.0);
        }
        out
    }
}

fn chi2(model: &[f64], data: &[f64], variance: &[f64]) -> f64 {
    model.iter().zip(data).zip(variance).map(|((m, y), v)| (m - y) * (m - y) / v).sum()
}

/// Largest coherent amplitude whose fastest sideband component is still
/// sampled above the Nyquist rate.
fn resolvable_amplitude(params: &BsbParams, times: &[f64]) -> f64 {
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let dt = sorted.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
    let n = (PI / (dt * params.omega0 * params.eta)).powi(2) - 1.0;
    n.max(1.0).sqrt().min(60.0)
}

/// Best coherent amplitude for one template signal.
fn fit_amplitude(signal: &RabiSignal, params: &BsbParams) -> Result<f64> {
    let alpha_max = resolvable_amplitude(params, &signal.times_s);
    let model = CoherentModel::new(params, &signal.times_s, alpha_max);
    let var = signal.weighting_variance(DEFAULT_SHOTS);
    let (alpha, _) =
        grid_minimize(|a| chi2(&model.curve(a), &signal.probabilities, &var), 0.0, alpha_max, 481, 1e-10 * alpha_max);
    Ok(alpha)
}

/// Reference signals at known atomic shifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    /// Atomic ac-Stark shift magnitudes at the nodes (Hz), strictly increasing.
    pub shifts_hz: Vec<f64>,
    pub templates: Vec<RabiSignal>,
    /// Coherent amplitude fitted to each template.
    pub amplitudes: Vec<f64>,
    /// Assumed partner shift as a fraction of the atomic shift.
    pub partner_fraction: f64,
    /// In-phase mode weights of the atom and of the partner molecule.
    pub atom_weight: f64,
    pub partner_weight: f64,
    pub bsb: BsbParams,
    pub config_hash: Option<String>,
}

impl CalibrationSet {
    pub fn from_templates(
        shifts_hz: Vec<f64>,
        templates: Vec<RabiSignal>,
        bsb: BsbParams,
        atom_weight: f64,
        partner_weight: f64,
    ) -> Result<Self> {
        bsb.validate()?;
        if shifts_hz.len() != templates.len() {
            return Err(Error::invalid("one template per shift is required"));
        }
        if shifts_hz.len() < 3 {
            return Err(Error::invalid(format!(
                "calibration needs at least 3 distinct shifts, got {}",
                shifts_hz.len()
            )));
        }
        if shifts_hz[0] <= 0.0 || shifts_hz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("calibration shifts must be positive and strictly increasing"));
        }
        if !(atom_weight > 0.0 && partner_weight > 0.0) {
            return Err(Error::invalid("mode weights must be > 0"));
        }
        for t in &templates {
            t.validate()?;
        }
        let amplitudes = templates.par_iter().map(|t| fit_amplitude(t, &bsb)).collect::<Result<Vec<_>>>()?;
        if amplitudes.windows(2).any(|w| !(w[1] > w[0])) || !(amplitudes[0] > 0.0) {
            return Err(Error::Validation(format!("template amplitudes {amplitudes:?} are not increasing with shift")));
        }
        Ok(CalibrationSet {
            shifts_hz,
            templates,
            amplitudes,
            partner_fraction: 0.0,
            atom_weight,
            partner_weight,
            bsb,
            config_hash: None,
        })
    }

    pub fn with_partner_fraction(&self, fraction: f64) -> Result<Self> {
        if !(fraction > -1.0 && fraction < 1.0) {
            return Err(Error::invalid(format!("partner fraction must be in (-1, 1), got {fraction}")));
        }
        Ok(CalibrationSet { partner_fraction: fraction, ..self.clone() })
    }

    /// In-phase mode shifts (Hz) assigned to the nodes under the assumed partner fraction.
    pub fn labels(&self) -> Vec<f64> {
        let w = self.atom_weight + self.partner_weight * self.partner_fraction;
        self.shifts_hz.iter().map(|s| w * s).collect()
    }

    /// Largest calibrated mode shift (Hz).
    pub fn max_label(&self) -> f64 {
        *self.labels().last().unwrap_or(&0.0)
    }

    /// Coherent amplitude interpolated in mode shift through the origin.
    fn interpolant(&self) -> Result<Pchip> {
        let labels = self.labels();
        if !(labels[0] > 0.0) {
            return Err(Error::invalid("calibration labels must be positive"));
        }
        let x = std::iter::once(0.0).chain(labels).collect();
        let y = std::iter::once(0.0).chain(self.amplitudes.iter().copied()).collect();
        Ok(Pchip::new(x, y))
    }

    /// Coherent amplitude expected for an in-phase mode shift.
    pub fn amplitude_at(&self, mode_shift_hz: f64) -> Result<f64> {
        Ok(self.interpolant()?.eval(mode_shift_hz.abs()).max(0.0))
    }
}

/// Calibration at `shifts_hz` built from synthesized templates.
pub fn build_calibration(shifts_hz: &[f64], pipeline: &PipelineConfig) -> Result<CalibrationSet> {
    pipeline.validate()?;
    let mut shifts: Vec<f64> = shifts_hz.iter().map(|s| s.abs()).collect();
    if shifts.iter().any(|s| !s.is_finite() || *s == 0.0) {
        return Err(Error::invalid("calibration shifts must be finite and non-zero"));
    }
    shifts.sort_by(f64::total_cmp);
    shifts.dedup();
    if shifts.len() < 3 {
        return Err(Error::invalid(format!("calibration needs at least 3 distinct shifts, got {}", shifts.len())));
    }
    let templates = shifts
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            pipeline.signal_for_amplitude(pipeline.template_amplitude(s)?, pipeline.readout.seed.wrapping_add(i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cal = CalibrationSet::from_templates(
        shifts,
        templates,
        pipeline.readout.bsb_params(),
        pipeline.atom_weight(),
        pipeline.partner_weight()?,
    )?;
    cal.config_hash = Some(pipeline.hash()?);
    Ok(cal)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftEstimate {
    /// |in-phase mode shift| (Hz).
    pub shift_hz: f64,
    pub sigma_hz: f64,
    pub chi2: f64,
    pub dof: usize,
    /// Beyond the last calibration node.
    pub extrapolated: bool,
    /// Reduced chi-square above 4; sigma already inflated.
    pub poor_fit: bool,
    /// Sigma comparable to the calibrated range, or templates fit no better
    /// than a constant.
    pub uninformative: bool,
}

/// Mode shift whose interpolated template best matches `signal`.
pub fn extract_shift(signal: &RabiSignal, cal: &CalibrationSet) -> Result<ShiftEstimate> {
    signal.validate()?;
    let n = signal.len();
    if n < 3 {
        return Err(Error::Fit {
            message: format!("need at least 3 points, got {n}"),
            rms_residual: f64::NAN,
            iterations: 0,
        });
    }
    let pchip = cal.interpolant()?;
    let range = pchip.last_node();
    let hi = 2.0 * range;
    let model = CoherentModel::new(&cal.bsb, &signal.times_s, pchip.eval(hi));
    let var = signal.weighting_variance(DEFAULT_SHOTS);
    let objective = |l: f64| chi2(&model.curve(pchip.eval(l).max(0.0)), &signal.probabilities, &var);
    let (shift, best) = grid_minimize(objective, 0.0, hi, GRID_POINTS, 1e-10 * hi);
    if !best.is_finite() {
        return Err(Error::Fit { message: "non-finite chi-square".into(), rms_residual: f64::NAN, iterations: 0 });
    }

    let h = 1e-3 * range;
    let curvature = if shift > h && shift < hi - h {
        (objective(shift + h) - 2.0 * best + objective(shift - h)) / (h * h)
    } else {
        0.0
    };
    let mut sigma = if curvature > 0.0 { (2.0 / curvature).sqrt() } else { profile_width(&objective, shift, best, hi) };
    // a template family that fits no better than a constant leaves the shift unconstrained
    let wsum: f64 = var.iter().map(|v| 1.0 / v).sum();
    let mean = signal.probabilities.iter().zip(&var).map(|(p, v)| p / v).sum::<f64>() / wsum;
    let flat = chi2(&vec![mean; n], &signal.probabilities, &var);
    let featureless = best >= flat - 1.0;
    if featureless {
        sigma = hi;
    }
    let dof = n - 1;
    let reduced = best / dof.max(1) as f64;
    let poor_fit = reduced > POOR_FIT_CHI2;
    if poor_fit && !featureless {
        sigma *= reduced.sqrt();
    }
    Ok(ShiftEstimate {
        shift_hz: shift,
        sigma_hz: sigma,
        chi2: best,
        dof,
        extrapolated: shift > range * (1.0 + 1e-9),
        poor_fit,
        uninformative: featureless || sigma > UNINFORMATIVE_FRACTION * range,
    })
}

/// Half-width of the delta-chi2 = 1 interval around `x0` on [0, hi]; a side
/// without a crossing extends to the boundary.
fn profile_width<F: Fn(f64) -> f64>(f: &F, x0: f64, f0: f64, hi: f64) -> f64 {
    let crossing = |end: f64| -> Option<f64> {
        if (end - x0).abs() < f64::EPSILON * hi || f(end) < f0 + 1.0 {
            return None;
        }
        let (mut a, mut b) = (x0, end);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if f(m) < f0 + 1.0 {
                a = m;
            } else {
                b = m;
            }
        }
        Some((0.5 * (a + b) - x0).abs())
    };
    match (crossing(0.0), crossing(hi)) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(w), None) | (None, Some(w)) => w,
        (None, None) => hi,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartnerIterate {
    pub fraction: f64,
    /// Partner shift (Hz), signed like the atomic shift.
    pub partner_shift_hz: f64,
    pub sigma_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartnerCorrection {
    pub partner_shift_hz: f64,
    pub fraction: f64,
    pub trace: Vec<PartnerIterate>,
    /// Calibration with the converged fraction applied.
    pub calibration: CalibrationSet,
}

pub const PARTNER_MAX_ITERATIONS: usize = 10;

/// Fixed-point iteration for the partner shift: extract it from the
/// partner-only `signal` with the current calibration, fold it into the node
/// labels and repeat.
pub fn iterate_partner_correction(
    cal: &CalibrationSet,
    signal: &RabiSignal,
    atomic_shift_hz: f64,
) -> Result<PartnerCorrection> {
    if !(atomic_shift_hz.is_finite() && atomic_shift_hz != 0.0) {
        return Err(Error::invalid("atomic shift must be finite and non-zero"));
    }
    let scale = cal.partner_weight * atomic_shift_hz.abs();
    let mut current = cal.clone();
    let mut fraction = cal.partner_fraction;
    let mut trace = Vec::new();
    let mut last_change = f64::INFINITY;
    for _ in 0..PARTNER_MAX_ITERATIONS {
        let est = extract_shift(signal, &current)?;
        let next = est.shift_hz / scale;
        trace.push(PartnerIterate {
            fraction: next,
            partner_shift_hz: next * atomic_shift_hz,
            sigma_hz: est.sigma_hz / cal.partner_weight,
        });
        if next >= 1.0 {
            return Err(Error::Convergence(format!(
                "partner shift reached {:.1}% of the atomic shift; the small-correction regime does not hold",
                100.0 * next
            )));
        }
        let change = (next - fraction).abs();
        // changes well inside the statistical error also end the iteration
        let noise = 0.1 * est.sigma_hz / scale;
        if change <= 1e-3 * next.abs() + 1e-6 || (est.uninformative && change <= noise) {
            return Ok(PartnerCorrection {
                partner_shift_hz: next * atomic_shift_hz,
                fraction: next,
                trace,
                calibration: current.with_partner_fraction(next)?,
            });
        }
        if change >= last_change {
            return Err(Error::Convergence(format!("partner iteration is not contracting: trace {trace:?}")));
        }
        last_change = change;
        fraction = next;
        current = current.with_partner_fraction(fraction)?;
    }
    Err(Error::Convergence(format!("no convergence in {PARTNER_MAX_ITERATIONS} iterations: trace {trace:?}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BundleManifest {
    shifts_hz: Vec<f64>,
    templates: Vec<String>,
    amplitudes: Vec<f64>,
    partner_fraction: f64,
    atom_weight: f64,
    partner_weight: f64,
    bsb: BsbParams,
    config_hash: Option<String>,
}

const MANIFEST: &str = "manifest.toml";

/// Writes one CSV per template plus `manifest.toml` into `dir`.
pub fn write_bundle(cal: &CalibrationSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for (i, t) in cal.templates.iter().enumerate() {
        let name = format!("template_{i:02}.csv");
        t.write_csv(fs::File::create(dir.join(&name))?)?;
        names.push(name);
    }
    let manifest = BundleManifest {
        shifts_hz: cal.shifts_hz.clone(),
        templates: names,
        amplitudes: cal.amplitudes.clone(),
        partner_fraction: cal.partner_fraction,
        atom_weight: cal.atom_weight,
        partner_weight: cal.partner_weight,
        bsb: cal.bsb,
        config_hash: cal.config_hash.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::invalid(format!("cannot serialize manifest: {e}")))?;
    fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

/// Reads a bundle written by [`write_bundle`]; amplitudes are refitted from
/// the template files.
pub fn read_bundle(dir: &Path) -> Result<CalibrationSet> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let m: BundleManifest =
        toml::from_str(&text).map_err(|e| Error::Parse { line: 0, message: format!("{MANIFEST}: {e}") })?;
    let templates = m
        .templates
        .iter()
        .map(|name| RabiSignal::read_csv(fs::File::open(dir.join(name))?))
        .collect::<Result<Vec<_>>>()?;
    let mut cal = CalibrationSet::from_templates(m.shifts_hz, templates, m.bsb, m.atom_weight, m.partner_weight)?
        .with_partner_fraction(m.partner_fraction)?;
    cal.config_hash = m.config_hash;
    Ok(cal)
}

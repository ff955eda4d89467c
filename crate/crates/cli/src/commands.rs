use crate::config::{Loaded, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::Output;
use crate::Common;
use odf_core::crystal::{
    extract_molecular_shift, infer_detuning_sign, lattice_phase, LatticeConfig, LatticeDrive, TwoIonCrystal,
};
use odf_core::dynamics::{
    frequency_sweep, linearized_prediction, simulate_excitation, simulate_odf, write_sweep_csv, SimulationConfig,
};
use odf_core::identify::{
    apply_partial_readout, classify_event, exclusion_window, identify_batch, read_measurements_csv, Measurement,
    Predictor,
};
use odf_core::molecule::{enumerate_states, AtomicPolarizabilityTable};
use odf_core::readout::{
    build_calibration, extract_shift, iterate_partner_correction, read_bundle, write_bundle, RabiSignal,
};
use serde::Serialize;
use std::f64::consts::TAU;
use std::io::Write;
use std::path::{Path, PathBuf};

struct Run {
    loaded: Loaded,
    out: Output,
}

impl Run {
    fn start(common: &Common, command: &str) -> CliResult<Self> {
        if common.threads == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(common.threads).build_global();
        let loaded = RunConfig::load(&common.config)?;
        let out = Output::create(&common.out, command, &loaded.hash, loaded.config.readout.seed, common.threads)?;
        Ok(Run { loaded, out })
    }

    fn config(&self) -> &RunConfig {
        &self.loaded.config
    }
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

fn open(path: &Path) -> CliResult<std::fs::File> {
    std::fs::File::open(path).map_err(write_err(path))
}

#[derive(Serialize)]
struct StateRow {
    n: u32,
    j: String,
    nuclear_spin: u8,
    f: String,
    m: String,
}

pub fn enumerate(common: &Common, nmax: Option<u32>) -> CliResult<()> {
    let mut run = Run::start(common, "enumerate")?;
    let n_max = nmax.unwrap_or(run.config().catalog.n_max);
    let states = enumerate_states(n_max)?;
    run.out.write_csv(
        "states.csv",
        states.iter().map(|s| StateRow {
            n: s.n,
            j: s.j.to_string(),
            nuclear_spin: s.nuclear_spin,
            f: s.f.map_or_else(String::new, |f| f.to_string()),
            m: s.m.to_string(),
        }),
    )?;
    println!("{} states with N'' <= {n_max}", states.len());
    run.out.finish()
}

#[derive(Serialize)]
struct SpectrumRow {
    wavelength_nm: f64,
    state: String,
    n: u32,
    nuclear_spin: u8,
    shift_hz: Option<f64>,
}

pub fn spectrum(common: &Common, from_nm: f64, to_nm: f64, points: usize, spinless: bool) -> CliResult<()> {
    if !(from_nm > 0.0 && to_nm > from_nm && points >= 2) {
        return Err(CliError::Config(format!(
            "need 0 < from-nm < to-nm and at least 2 points, got {from_nm}..{to_nm} with {points}"
        )));
    }
    let mut run = Run::start(common, "spectrum")?;
    let cfg = run.config().clone();
    let catalog = cfg.line_catalog()?;
    let intensity = cfg.intensity()?;
    let mut states = enumerate_states(cfg.catalog.n_max)?;
    if spinless {
        states.retain(|s| s.nuclear_spin == 0);
    }
    let mut predictor = Predictor::new(&states, &catalog)?;
    predictor.options = cfg.polarizability_options();
    let grid: Vec<f64> = (0..points).map(|i| from_nm + (to_nm - from_nm) * i as f64 / (points - 1) as f64).collect();
    let mut rows = Vec::with_capacity(points * states.len());
    for &nm in &grid {
        for p in predictor.predict(nm, intensity)? {
            rows.push(SpectrumRow {
                wavelength_nm: nm,
                state: p.state.to_string(),
                n: p.state.n,
                nuclear_spin: p.state.nuclear_spin,
                shift_hz: p.shift_hz,
            });
        }
    }
    run.out.write_csv("spectrum.csv", rows)?;
    let (lo, hi) = AtomicPolarizabilityTable::shipped().range_nm();
    if from_nm >= lo && to_nm <= hi {
        #[derive(Serialize)]
        struct AtomRow {
            wavelength_nm: f64,
            d52_shift_hz: f64,
        }
        let rows = grid
            .iter()
            .map(|&nm| Ok(AtomRow { wavelength_nm: nm, d52_shift_hz: cfg.atom_shift(nm)? }))
            .collect::<CliResult<Vec<_>>>()?;
        run.out.write_csv("spectrum_atom.csv", rows)?;
    } else {
        println!("atomic table covers {lo}..{hi} nm; spectrum_atom.csv not written");
    }
    println!("{} states x {points} wavelengths, intensity {intensity:.4e} W/m^2", states.len());
    run.out.finish()
}

#[derive(Serialize)]
struct ModeRow {
    configuration: &'static str,
    distance_m: f64,
    phi21_rad: f64,
    f_ip_hz: f64,
    f_oop_hz: f64,
}

#[derive(Serialize)]
struct ExcitationRow {
    configuration: &'static str,
    beat_hz: f64,
    shift_molecule_hz: f64,
    shift_atom_hz: f64,
    nbar_ip: f64,
    nbar_ip_linear: f64,
    nbar_oop: f64,
}

fn label(c: LatticeConfig) -> &'static str {
    match c {
        LatticeConfig::SamePhase => "same_phase",
        LatticeConfig::OppositePhase => "opposite_phase",
        LatticeConfig::Intermediate => "intermediate",
    }
}

pub fn simulate(common: &Common, trajectory: bool) -> CliResult<()> {
    let mut run = Run::start(common, "simulate")?;
    let cfg = run.config().clone();
    let wl = cfg.lattice.wavelength_nm;
    let catalog = cfg.line_catalog()?;
    let (e1, e2) = (cfg.molecule_shift(&catalog)?, cfg.atom_shift(wl)?);
    let pulse_s = cfg.lattice.pulse_ms * 1e-3;
    let crystals: [(&str, TwoIonCrystal); 2] = [("sp", cfg.crystal()?), ("op", cfg.opposite_phase_crystal()?)];

    let mut modes = Vec::new();
    let mut excitations = Vec::new();
    println!("molecule shift {e1:.1} Hz, atom shift {e2:.1} Hz");
    for (tag, crystal) in crystals {
        let m = crystal.modes();
        let phase = lattice_phase(crystal.distance(), wl)?;
        let (f_ip, f_oop) = (m.omega_minus / TAU, m.omega_plus / TAU);
        let conf = label(phase.config);
        println!(
            "{tag}: d = {:.4e} m, phi21 = {:.4} rad ({conf}), f_IP = {:.2} kHz, f_OOP = {:.2} kHz",
            crystal.distance(),
            phase.phi21,
            f_ip / 1e3,
            f_oop / 1e3
        );
        modes.push(ModeRow {
            configuration: conf,
            distance_m: crystal.distance(),
            phi21_rad: phase.phi21,
            f_ip_hz: f_ip,
            f_oop_hz: f_oop,
        });

        let beat = cfg.lattice.beat_hz.unwrap_or(f_ip);
        let sim = SimulationConfig::new(crystal, LatticeDrive::for_crystal(&crystal, wl, beat, e1, e2)?, pulse_s)?;
        let exc = simulate_excitation(&sim)?;
        let lin = linearized_prediction(&sim)?;
        println!(
            "{tag}: nbar_IP = {:.3} (linear {:.3}) after {} ms",
            exc.nbar_minus, lin.nbar_minus, cfg.lattice.pulse_ms
        );
        excitations.push(ExcitationRow {
            configuration: conf,
            beat_hz: beat,
            shift_molecule_hz: e1,
            shift_atom_hz: e2,
            nbar_ip: exc.nbar_minus,
            nbar_ip_linear: lin.nbar_minus,
            nbar_oop: exc.nbar_plus,
        });

        if cfg.simulate.sweep_points > 0 {
            let n = cfg.simulate.sweep_points;
            let w = cfg.simulate.sweep_half_width_hz;
            let beats: Vec<f64> = if n == 1 {
                vec![f_ip]
            } else {
                (0..n).map(|i| f_ip - w + 2.0 * w * i as f64 / (n - 1) as f64).collect()
            };
            let points = frequency_sweep(&sim, &beats, common.threads)?;
            let name = format!("sweep_{tag}.csv");
            write_sweep_csv(&points, "beat_Hz", run.out.file(&name)?)?;
        }
        if trajectory && tag == "sp" {
            let t = simulate_odf(&sim)?;
            t.write_csv(run.out.file("trajectory_sp.csv")?)?;
        }
    }
    run.out.write_csv("modes.csv", modes)?;
    run.out.write_csv("excitation.csv", excitations)?;

    let pipeline = cfg.pipeline()?;
    let (sp, op) = pipeline.sp_op_signals(e1, e2, cfg.readout.seed)?;
    sp.write_csv(run.out.file("signal_sp.csv")?)?;
    op.write_csv(run.out.file("signal_op.csv")?)?;
    run.out.finish()
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    fraction: f64,
    partner_shift_hz: f64,
    sigma_hz: f64,
}

pub fn calibrate(common: &Common, shifts: Option<Vec<f64>>, partner: Option<(PathBuf, f64)>) -> CliResult<()> {
    let mut run = Run::start(common, "calibrate")?;
    let cfg = run.config().clone();
    let pipeline = cfg.pipeline()?;
    let shifts = shifts.unwrap_or_else(|| cfg.readout.calibration_shifts_hz.clone());
    let cal = build_calibration(&shifts, &pipeline)?;
    write_bundle(&cal, &run.out.path("calibration"))?;
    run.out.record("calibration/");
    for (s, a) in cal.shifts_hz.iter().zip(&cal.amplitudes) {
        println!("atomic shift {s:.1} Hz -> |alpha| = {a:.4}");
    }
    if let Some((path, atomic_shift_hz)) = partner {
        let signal = RabiSignal::read_csv(open(&path)?)?;
        let corr = iterate_partner_correction(&cal, &signal, atomic_shift_hz)?;
        run.out.write_csv(
            "partner_trace.csv",
            corr.trace.iter().enumerate().map(|(i, t)| TraceRow {
                iteration: i + 1,
                fraction: t.fraction,
                partner_shift_hz: t.partner_shift_hz,
                sigma_hz: t.sigma_hz,
            }),
        )?;
        write_bundle(&corr.calibration, &run.out.path("calibration_corrected"))?;
        run.out.record("calibration_corrected/");
        println!(
            "partner shift {:.1} Hz ({:.2}% of the atomic shift) after {} iterations",
            corr.partner_shift_hz,
            100.0 * corr.fraction,
            corr.trace.len()
        );
    }
    run.out.finish()
}

pub enum IdentifyInput {
    Measurements(PathBuf),
    Signals { sp: PathBuf, op: PathBuf, bundle: PathBuf },
}

/// One measurement from an SP/OP signal pair at the configured lattice.
fn measurement_from_signals(cfg: &RunConfig, sp: &Path, op: &Path, bundle: &Path) -> CliResult<Measurement> {
    let cal = read_bundle(bundle)?;
    let sp = extract_shift(&RabiSignal::read_csv(open(sp)?)?, &cal)?;
    let op = extract_shift(&RabiSignal::read_csv(open(op)?)?, &cal)?;
    for (tag, e) in [("SP", &sp), ("OP", &op)] {
        if e.poor_fit || e.uninformative || e.extrapolated {
            eprintln!("warning: {tag} extraction {e:?}");
        }
    }
    let crystal = cfg.crystal()?;
    let modes = crystal.modes();
    let w = modes.molecule_weight();
    let est = extract_molecular_shift(
        sp.shift_hz,
        op.shift_hz,
        modes.mu,
        modes.theta,
        Some(cfg.atom_shift(cfg.lattice.wavelength_nm)?),
    )?;
    if !est.warnings.is_empty() {
        eprintln!("warning: {:?}", est.warnings);
    }
    let sigma = sp.sigma_hz.hypot(op.sigma_hz);
    Ok(Measurement {
        wavelength_nm: cfg.lattice.wavelength_nm,
        intensity_w_m2: cfg.intensity()?,
        shift_hz: est.molecular_shift_hz,
        fit_sigma_hz: sigma / (2.0 * w),
        power_uncertainty: cfg.thresholds.power_uncertainty,
        sign: infer_detuning_sign(sp.shift_hz, op.shift_hz, sigma, cfg.thresholds.sign_k),
        f_ip_hz: modes.omega_minus / TAU,
    })
}

pub fn identify(common: &Common, input: IdentifyInput, exclude_up_to: Option<u32>) -> CliResult<()> {
    let mut run = Run::start(common, "identify")?;
    let cfg = run.config().clone();
    let measurements = match &input {
        IdentifyInput::Measurements(path) => read_measurements_csv(open(path)?, cfg.thresholds.power_uncertainty)?,
        IdentifyInput::Signals { sp, op, bundle } => vec![measurement_from_signals(&cfg, sp, op, bundle)?],
    };
    let catalog = cfg.line_catalog()?;
    let mut predictor = Predictor::new(&enumerate_states(cfg.catalog.n_max)?, &catalog)?;
    predictor.options = cfg.polarizability_options();
    let ids = identify_batch(&measurements, &predictor, &cfg.thresholds.k)?;

    let partial = match exclude_up_to {
        Some(n) => {
            Some(measurements.iter().map(|m| apply_partial_readout(m, n, &catalog)).collect::<Result<Vec<_>, _>>()?)
        }
        None => None,
    };
    let mut text = run.out.file("identification.txt")?;
    for (i, id) in ids.iter().enumerate() {
        let mut block = id.render_text();
        if let (Some(p), Some(n)) = (&partial, exclude_up_to) {
            block.push_str(&format!("sign-only readout for N'' <= {n}: {:?}\n", p[i]));
        }
        print!("{block}");
        writeln!(text, "{block}").map_err(write_err(&run.out.path("identification.txt")))?;
    }
    text.flush().map_err(write_err(&run.out.path("identification.txt")))?;
    let doc = serde_json::json!({
        "config_hash": run.loaded.hash,
        "identifications": ids,
        "exclude_up_to": exclude_up_to,
        "partial_readout": partial,
    });
    let path = run.out.path("identification.json");
    serde_json::to_writer_pretty(run.out.file("identification.json")?, &doc)
        .map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
    run.out.finish()
}

#[derive(Serialize)]
struct WindowRow {
    n_max: u32,
    red_min_nm: f64,
    blue_max_nm: f64,
}

pub fn windows(common: &Common, exclude_up_to: u32) -> CliResult<()> {
    if !exclude_up_to.is_multiple_of(2) {
        return Err(CliError::Config(format!("--exclude-up-to must be even, got {exclude_up_to}")));
    }
    let mut run = Run::start(common, "windows")?;
    let catalog = run.config().line_catalog()?;
    let mut rows = Vec::new();
    for n in (0..=exclude_up_to).step_by(2) {
        let w = exclusion_window(n, &catalog)?;
        println!("N'' <= {n}: red above {:.3} nm, blue below {:.3} nm", w.red_min_nm, w.blue_max_nm);
        rows.push(WindowRow { n_max: n, red_min_nm: w.red_min_nm, blue_max_nm: w.blue_max_nm });
    }
    run.out.write_csv("windows.csv", rows)?;
    run.out.finish()
}

#[derive(Serialize)]
struct EventRow {
    before: usize,
    after: usize,
    event: odf_core::identify::Event,
}

pub fn classify(common: &Common, measurements: &Path) -> CliResult<()> {
    let mut run = Run::start(common, "classify")?;
    let cfg = run.config().clone();
    let ms = read_measurements_csv(open(measurements)?, cfg.thresholds.power_uncertainty)?;
    if ms.len() < 2 {
        return Err(CliError::Config(format!("need at least two measurements, got {}", ms.len())));
    }
    let tol = cfg.event_tolerances();
    let mut rows = Vec::new();
    for (i, pair) in ms.windows(2).enumerate() {
        let event = classify_event(&pair[0], &pair[1], &tol)?;
        println!("{} -> {}: {event}", i + 1, i + 2);
        rows.push(EventRow { before: i + 1, after: i + 2, event });
    }
    run.out.write_csv("events.csv", rows)?;
    run.out.finish()
}

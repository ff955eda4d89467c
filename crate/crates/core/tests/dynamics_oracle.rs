use odf_core::crystal::{LatticeDrive, TwoIonCrystal};
use odf_core::dynamics::{
    frequency_sweep, linearized_prediction, resonance_peak, simulate_excitation, simulate_odf, SimulationConfig,
    DEFAULT_PULSE_S,
};
use odf_core::units::{amu_to_kg, PLANCK};
use std::f64::consts::{PI, TAU};

const LAMBDA: f64 = 789.0;

fn crystal() -> TwoIonCrystal {
    TwoIonCrystal::from_distance(28.0, 40.0, 19.0 * LAMBDA * 1e-9 / 2.0).unwrap()
}

fn f_ip() -> f64 {
    crystal().modes().omega_minus / TAU
}

fn config(beat: f64, e1: f64, e2: f64, phi21: f64) -> SimulationConfig {
    let drive = LatticeDrive::with_relative_phase(LAMBDA, beat, e1, e2, phi21).unwrap();
    SimulationConfig::new(crystal(), drive, DEFAULT_PULSE_S).unwrap()
}

/// Resonant amplitude of a driven oscillator, F T / (2 m W), written out by hand.
fn resonant_amplitude(e1: f64, e2: f64, phi21: f64) -> f64 {
    let mu: f64 = 40.0 / 28.0;
    let r = mu.sqrt();
    let tan_t = 1.0 / r - r + (1.0 / mu + mu - 1.0).sqrt();
    let t = tan_t.atan();
    let re = r * t.sin() * e1 + t.cos() * e2 * phi21.cos();
    let im = t.cos() * e2 * phi21.sin();
    let k = TAU / (LAMBDA * 1e-9);
    let force = 4.0 * k * PLANCK * re.hypot(im);
    force * DEFAULT_PULSE_S / (2.0 * amu_to_kg(40.0) * TAU * f_ip())
}

#[test]
fn small_excursion_matches_linear_response() {
    for (e1, e2, phi) in [(-40.0, 0.0, 0.0), (-40.0, -15.0, 0.0), (-40.0, -15.0, PI), (25.0, -30.0, 1.0)] {
        let cfg = config(f_ip(), e1, e2, phi);
        let traj = simulate_odf(&cfg).unwrap();
        let k = cfg.drive.wave_vector();
        assert!(2.0 * k * traj.max_excursion() < 0.1);
        let sim = simulate_excitation(&cfg).unwrap();
        let lin = linearized_prediction(&cfg).unwrap();
        let oracle = resonant_amplitude(e1, e2, phi);
        let a_sim = sim.amplitude_minus.norm();
        assert!((a_sim / lin.amplitude_minus.norm() - 1.0).abs() < 0.01, "{e1} {e2} {phi}");
        assert!((a_sim / oracle - 1.0).abs() < 0.01, "{a_sim} {oracle}");
        // the out-of-phase mode is far off resonance
        assert!(sim.amplitude_plus.norm() < 0.01 * a_sim);
    }
}

#[test]
fn resonance_peak_at_in_phase_frequency() {
    let base = config(f_ip(), -40.0, -15.0, 0.0);
    let beats: Vec<f64> = (-6..=6).map(|i| f_ip() + 100.0 * f64::from(i)).collect();
    let pts = frequency_sweep(&base, &beats, 4).unwrap();
    let peak = resonance_peak(&pts).unwrap();
    assert!((peak - f_ip()).abs() < 100.0, "peak {peak} vs {}", f_ip());
    // threads do not change results
    let serial = frequency_sweep(&base, &beats[..3], 1).unwrap();
    assert_eq!(serial, pts[..3].to_vec());
}

#[test]
fn deviation_from_linear_grows_with_drive() {
    let mut last = 0.0;
    for e in [100.0, 400.0, 1000.0, 2000.0] {
        let cfg = config(f_ip(), -e, 0.0, 0.0);
        let sim = simulate_excitation(&cfg).unwrap().amplitude_minus.norm();
        let lin = linearized_prediction(&cfg).unwrap().amplitude_minus.norm();
        let dev = (sim / lin - 1.0).abs();
        assert!(dev > last, "{e}: {dev} <= {last}");
        if 2.0 * cfg.drive.wave_vector() * sim >= 1.0 {
            assert!(dev > 0.02, "{e}: {dev}");
        }
        last = dev;
    }
}

#[test]
fn interference_truth_table() {
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            let sp = simulate_excitation(&config(f_ip(), 40.0 * s1, 15.0 * s2, 0.0)).unwrap();
            let op = simulate_excitation(&config(f_ip(), 40.0 * s1, 15.0 * s2, PI)).unwrap();
            let larger_sp = sp.amplitude_minus.norm() > op.amplitude_minus.norm();
            assert_eq!(larger_sp, s1 * s2 > 0.0, "{s1} {s2}");
        }
    }
}

#[test]
fn same_force_on_both_ions_follows_mode_weights() {
    // equal shifts and phases: the in-phase projection is sqrt(mu) sin t + cos t
    let cfg = config(f_ip(), -30.0, -30.0, 0.0);
    let sim = simulate_excitation(&cfg).unwrap().amplitude_minus.norm();
    assert!((sim / resonant_amplitude(-30.0, -30.0, 0.0) - 1.0).abs() < 0.01);
}

#[test]
fn visible_excitation_in_the_calibration_regime() {
    let modes = crystal().modes();
    let atom = -400.0;
    for molecule in [-1000.0, -5000.0] {
        let d = LatticeDrive::for_crystal(&crystal(), LAMBDA, f_ip(), molecule, atom).unwrap();
        let cfg = SimulationConfig::new(crystal(), d, DEFAULT_PULSE_S).unwrap();
        let ex = simulate_excitation(&cfg).unwrap();
        assert!(ex.nbar_minus > 1.0 && ex.nbar_minus < 300.0, "{molecule}: {}", ex.nbar_minus);
        assert!(modes.omega_minus == ex.omega_minus);
    }
}

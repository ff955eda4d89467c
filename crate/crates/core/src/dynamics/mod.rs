//! Classical motion of the two-ion crystal under trap, Coulomb and the full
//! sinusoidal lattice potential, plus the linear-response prediction.

mod ode;
mod sweep;

pub use ode::{velocity_verlet, Dopri5, StepStats, SymplecticScheme};
pub use sweep::{frequency_sweep, resonance_peak, shift_sweep, write_sweep_csv, SweepPoint};

use crate::crystal::{LatticeDrive, NormalModes, TwoIonCrystal};
use crate::error::{Error, Result};
use crate::units::{COULOMB_E2, HBAR, PLANCK};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Write;

/// Displacements from equilibrium (m) and velocities (m/s) of ions 1 and 2.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub q: [f64; 2],
    pub v: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Integrator {
    DormandPrince,
    /// Fixed-step symplectic integrator for energy audits.
    Symplectic {
        scheme: SymplecticScheme,
        step_s: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub crystal: TwoIonCrystal,
    pub drive: LatticeDrive,
    pub initial: InitialConditions,
    pub integrator: Integrator,
    pub rtol: f64,
    /// Output interval and largest step; None picks 1/50 of the shortest of
    /// the drive and out-of-phase periods.
    pub max_step_s: Option<f64>,
    pub duration_s: f64,
}

pub const DEFAULT_PULSE_S: f64 = 3.0e-3;
pub const DEFAULT_RTOL: f64 = 1e-10;

impl SimulationConfig {
    pub fn new(crystal: TwoIonCrystal, drive: LatticeDrive, duration_s: f64) -> Result<Self> {
        let cfg = SimulationConfig {
            crystal,
            drive,
            initial: InitialConditions::default(),
            integrator: Integrator::DormandPrince,
            rtol: DEFAULT_RTOL,
            max_step_s: None,
            duration_s,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.drive.validate()?;
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::invalid(format!("duration must be > 0, got {}", self.duration_s)));
        }
        if !(self.rtol > 0.0 && self.rtol <= 1e-6) {
            return Err(Error::invalid(format!("relative tolerance must be in (0, 1e-6], got {}", self.rtol)));
        }
        if let Some(h) = self.max_step_s {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid(format!("max step must be > 0, got {h}")));
            }
        }
        if let Integrator::Symplectic { step_s, .. } = self.integrator {
            if !(step_s > 0.0 && step_s.is_finite()) {
                return Err(Error::invalid(format!("symplectic step must be > 0, got {step_s}")));
            }
        }
        if self.initial.q.iter().chain(&self.initial.v).any(|x| !x.is_finite()) {
            return Err(Error::invalid("initial conditions must be finite"));
        }
        Ok(())
    }

    pub fn sample_interval(&self) -> f64 {
        if let Some(h) = self.max_step_s {
            return h;
        }
        let f_plus = self.crystal.modes().omega_plus / TAU;
        let f = self.drive.beat_frequency_hz.max(f_plus);
        1.0 / (50.0 * f)
    }
}

/// Sampled trajectory, one column per quantity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
}

#[derive(Serialize)]
struct TrajectoryRow {
    t_s: f64,
    q1_m: f64,
    q2_m: f64,
    v1_m_per_s: f64,
    v2_m_per_s: f64,
}

impl Trajectory {
    fn push(&mut self, t: f64, y: &[f64; 4]) {
        self.t.push(t);
        self.q1.push(y[0]);
        self.q2.push(y[1]);
        self.v1.push(y[2]);
        self.v2.push(y[3]);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// (q1, q2, v1, v2) at sample `i`.
    pub fn state(&self, i: usize) -> [f64; 4] {
        [self.q1[i], self.q2[i], self.v1[i], self.v2[i]]
    }

    pub fn max_excursion(&self) -> f64 {
        self.q1.iter().chain(&self.q2).fold(0.0, |m, q| m.max(q.abs()))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for i in 0..self.len() {
            w.serialize(TrajectoryRow {
                t_s: self.t[i],
                q1_m: self.q1[i],
                q2_m: self.q2[i],
                v1_m_per_s: self.v1[i],
                v2_m_per_s: self.v2[i],
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Equations of motion in displacement coordinates.
#[derive(Debug, Clone, Copy)]
struct Forces {
    m1: f64,
    m2: f64,
    u0: f64,
    d: f64,
    ke2: f64,
    two_k: f64,
    omega: f64,
    amp: [f64; 2],
    phase: [f64; 2],
}

impl Forces {
    fn new(crystal: &TwoIonCrystal, drive: &LatticeDrive) -> Self {
        let k = drive.wave_vector();
        Forces {
            m1: crystal.m1_kg(),
            m2: crystal.m2_kg(),
            u0: crystal.u0,
            d: crystal.distance(),
            ke2: COULOMB_E2,
            two_k: 2.0 * k,
            omega: drive.angular_frequency(),
            amp: [4.0 * k * PLANCK * drive.shift_molecule_hz, 4.0 * k * PLANCK * drive.shift_atom_hz],
            phase: [drive.phase_molecule, drive.phase_atom],
        }
    }

    fn accel(&self, t: f64, q: &[f64; 2]) -> [f64; 2] {
        let delta = q[1] - q[0];
        let r = self.d + delta;
        // change of the Coulomb push relative to equilibrium, written without cancellation
        let coulomb = self.ke2 * delta * (2.0 * self.d + delta) / (self.d * self.d * r * r);
        let mut f = [-self.u0 * q[0] + coulomb, -self.u0 * q[1] - coulomb];
        for i in 0..2 {
            if self.amp[i] != 0.0 {
                f[i] += self.amp[i] * (self.two_k * q[i] - self.omega * t + self.phase[i]).sin();
            }
        }
        [f[0] / self.m1, f[1] / self.m2]
    }
}

/// Trap plus Coulomb energy (J) relative to the equilibrium configuration.
pub fn mechanical_energy(crystal: &TwoIonCrystal, state: &[f64; 4]) -> f64 {
    let [q1, q2, v1, v2] = *state;
    let d = crystal.distance();
    let delta = q2 - q1;
    let kinetic = 0.5 * crystal.m1_kg() * v1 * v1 + 0.5 * crystal.m2_kg() * v2 * v2;
    let trap = 0.5 * crystal.u0 * (q1 * q1 + q2 * q2);
    // ke2 (1/(d+D) - 1/d + D/d^2) = ke2 D^2 / (d^2 (d+D))
    let coulomb = COULOMB_E2 * delta * delta / (d * d * (d + delta));
    kinetic + trap + coulomb
}

fn run<O: FnMut(f64, &[f64; 4])>(config: &SimulationConfig, mut observe: O) -> Result<[f64; 4]> {
    config.validate()?;
    let forces = Forces::new(&config.crystal, &config.drive);
    let init = config.initial;
    let y0 = [init.q[0], init.q[1], init.v[0], init.v[1]];
    match config.integrator {
        Integrator::DormandPrince => {
            let modes = config.crystal.modes();
            let q_scale = 1e-9;
            let v_scale = q_scale * modes.omega_plus;
            let atol = [q_scale * config.rtol, q_scale * config.rtol, v_scale * config.rtol, v_scale * config.rtol];
            let ode = Dopri5::new(config.rtol, atol, config.sample_interval())?;
            let rhs = |t: f64, y: &[f64; 4]| {
                let a = forces.accel(t, &[y[0], y[1]]);
                [y[2], y[3], a[0], a[1]]
            };
            let (y, _) = ode.integrate(rhs, 0.0, y0, config.duration_s, &mut observe)?;
            Ok(y)
        }
        Integrator::Symplectic { scheme, step_s } => {
            let n = (config.duration_s / step_s).round().max(1.0) as u64;
            let h = config.duration_s / n as f64;
            let every = (config.sample_interval() / h).floor().max(1.0) as u64;
            let mut count = 0u64;
            let (q, v) = velocity_verlet(
                scheme,
                |t, q: &[f64; 2]| forces.accel(t, q),
                0.0,
                init.q,
                init.v,
                h,
                n,
                |t, q, v| {
                    if count.is_multiple_of(every) || count == n {
                        observe(t, &[q[0], q[1], v[0], v[1]]);
                    }
                    count += 1;
                },
            )?;
            Ok([q[0], q[1], v[0], v[1]])
        }
    }
}

/// Integrates the full equations of motion and returns the sampled trajectory.
pub fn simulate_odf(config: &SimulationConfig) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    run(config, |t, y| traj.push(t, y))?;
    Ok(traj)
}

/// End-of-pulse mode excitation without storing the trajectory.
pub fn simulate_excitation(config: &SimulationConfig) -> Result<ModeExcitation> {
    let y = run(config, |_, _| {})?;
    Ok(ModeExcitation::from_state(&config.crystal, &y))
}

/// Complex amplitudes a = beta - i beta'/W of both modes at the end of a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeExcitation {
    pub amplitude_minus: Complex64,
    pub amplitude_plus: Complex64,
    pub omega_minus: f64,
    pub omega_plus: f64,
    pub nbar_minus: f64,
    pub nbar_plus: f64,
    /// Mode energies (J).
    pub energy_minus: f64,
    pub energy_plus: f64,
}

impl ModeExcitation {
    pub fn from_amplitudes(crystal: &TwoIonCrystal, minus: Complex64, plus: Complex64) -> Self {
        let modes = crystal.modes();
        let m = crystal.m2_kg();
        let nbar = |w: f64, a: Complex64| m * w * a.norm_sqr() / (2.0 * HBAR);
        let energy = |w: f64, a: Complex64| 0.5 * m * w * w * a.norm_sqr();
        ModeExcitation {
            amplitude_minus: minus,
            amplitude_plus: plus,
            omega_minus: modes.omega_minus,
            omega_plus: modes.omega_plus,
            nbar_minus: nbar(modes.omega_minus, minus),
            nbar_plus: nbar(modes.omega_plus, plus),
            energy_minus: energy(modes.omega_minus, minus),
            energy_plus: energy(modes.omega_plus, plus),
        }
    }

    /// From (q1, q2, v1, v2).
    pub fn from_state(crystal: &TwoIonCrystal, state: &[f64; 4]) -> Self {
        let modes = crystal.modes();
        let (bp, bm) = modes.to_modes(state[0], state[1]);
        let (vp, vm) = modes.to_modes(state[2], state[3]);
        let a = |b: f64, v: f64, w: f64| Complex64::new(b, -v / w);
        Self::from_amplitudes(crystal, a(bm, vm, modes.omega_minus), a(bp, vp, modes.omega_plus))
    }
}

/// Mode excitation at the last sample of `trajectory`.
pub fn mode_amplitude(trajectory: &Trajectory, crystal: &TwoIonCrystal) -> Result<ModeExcitation> {
    if trajectory.len() < 2 {
        return Err(Error::Sampling("trajectory needs at least two samples".into()));
    }
    let period = TAU / crystal.modes().omega_plus;
    let worst = trajectory.t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if worst > period / 20.0 * (1.0 + 1e-9) {
        return Err(Error::Sampling(format!(
            "sample interval {worst:e} s exceeds 1/20 of the shortest mode period {period:e} s"
        )));
    }
    Ok(ModeExcitation::from_state(crystal, &trajectory.state(trajectory.len() - 1)))
}

/// Integral of exp(-i delta s) over [0, T].
fn phase_integral(delta: f64, duration: f64) -> Complex64 {
    let x = delta * duration;
    if x.abs() < 1e-4 {
        return duration * Complex64::new(1.0 - x * x / 6.0, -x / 2.0);
    }
    (Complex64::new(1.0, 0.0) - Complex64::new(0.0, -x).exp()) / Complex64::new(0.0, delta)
}

/// Linear response of both modes to the lattice force at zero excursion.
pub fn linearized_prediction(config: &SimulationConfig) -> Result<ModeExcitation> {
    config.validate()?;
    let crystal = &config.crystal;
    let drive = &config.drive;
    let modes: NormalModes = crystal.modes();
    let m = crystal.m2_kg();
    let k = drive.wave_vector();
    let w = drive.angular_frequency();
    let t_end = config.duration_s;
    let c1 = Complex64::from_polar(4.0 * k * PLANCK * drive.shift_molecule_hz, drive.phase_molecule);
    let c2 = Complex64::from_polar(4.0 * k * PLANCK * drive.shift_atom_hz, drive.phase_atom);
    let (s, c) = modes.theta.sin_cos();
    let r = modes.mu.sqrt();
    let c_minus = r * s * c1 + c * c2;
    let c_plus = r * c * c1 - s * c2;

    let start = ModeExcitation::from_state(
        crystal,
        &[config.initial.q[0], config.initial.q[1], config.initial.v[0], config.initial.v[1]],
    );
    let evolve = |a0: Complex64, cf: Complex64, omega: f64| {
        let forced =
            (cf * phase_integral(omega + w, t_end) - cf.conj() * phase_integral(omega - w, t_end)) / (2.0 * m * omega);
        Complex64::from_polar(1.0, omega * t_end) * (a0 - forced)
    };
    Ok(ModeExcitation::from_amplitudes(
        crystal,
        evolve(start.amplitude_minus, c_minus, modes.omega_minus),
        evolve(start.amplitude_plus, c_plus, modes.omega_plus),
    ))
}

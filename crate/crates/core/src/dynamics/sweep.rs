use super::{simulate_excitation, SimulationConfig};
use crate::error::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    /// Swept value: beat frequency or molecular shift (Hz).
    pub value: f64,
    pub amplitude_minus_m: f64,
    pub amplitude_plus_m: f64,
    pub nbar_minus: f64,
    pub nbar_plus: f64,
}

fn run_all(configs: Vec<(f64, SimulationConfig)>, threads: usize) -> Result<Vec<SweepPoint>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
    pool.install(|| {
        configs
            .into_par_iter()
            .map(|(value, cfg)| {
                let ex = simulate_excitation(&cfg)?;
                Ok(SweepPoint {
                    value,
                    amplitude_minus_m: ex.amplitude_minus.norm(),
                    amplitude_plus_m: ex.amplitude_plus.norm(),
                    nbar_minus: ex.nbar_minus,
                    nbar_plus: ex.nbar_plus,
                })
            })
            .collect()
    })
}

/// Simulates `base` at each beat frequency. Results are independent of `threads`.
pub fn frequency_sweep(base: &SimulationConfig, beat_hz: &[f64], threads: usize) -> Result<Vec<SweepPoint>> {
    let configs = beat_hz
        .iter()
        .map(|&f| {
            let mut c = *base;
            c.drive.beat_frequency_hz = f;
            c.validate().map(|_| (f, c))
        })
        .collect::<Result<Vec<_>>>()?;
    run_all(configs, threads)
}

/// Simulates `base` at each molecular single-beam shift, atomic shift fixed.
pub fn shift_sweep(base: &SimulationConfig, molecule_shift_hz: &[f64], threads: usize) -> Result<Vec<SweepPoint>> {
    let configs = molecule_shift_hz
        .iter()
        .map(|&e| {
            let mut c = *base;
            c.drive.shift_molecule_hz = e;
            c.validate().map(|_| (e, c))
        })
        .collect::<Result<Vec<_>>>()?;
    run_all(configs, threads)
}

/// Location of the in-phase amplitude maximum, refined by a parabola through
/// the largest sample and its neighbours.
pub fn resonance_peak(points: &[SweepPoint]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::invalid("resonance peak needs at least three sweep points"));
    }
    let i = (0..points.len())
        .max_by(|&a, &b| points[a].amplitude_minus_m.total_cmp(&points[b].amplitude_minus_m))
        .unwrap_or(0)
        .clamp(1, points.len() - 2);
    let (x0, x1, x2) = (points[i - 1].value, points[i].value, points[i + 1].value);
    let (y0, y1, y2) = (points[i - 1].amplitude_minus_m, points[i].amplitude_minus_m, points[i + 1].amplitude_minus_m);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if !(a < 0.0) {
        return Ok(x1);
    }
    Ok(-b / (2.0 * a))
}

/// CSV with columns `<value_column>`, amplitudes (m) and phonon numbers.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], value_column: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([value_column, "amplitude_minus_m", "amplitude_plus_m", "nbar_minus", "nbar_plus"])?;
    for p in points {
        w.write_record(
            [p.value, p.amplitude_minus_m, p.amplitude_plus_m, p.nbar_minus, p.nbar_plus].map(|x| x.to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}

//! Dormand-Prince 5(4) with step clipping onto a fixed output grid, and a
//! fixed-step velocity-Verlet integrator for energy audits.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5<const N: usize> {
    pub rtol: f64,
    pub atol: [f64; N],
    /// Output interval; also the largest step taken.
    pub sample_dt: f64,
    pub max_steps: u64,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

impl<const N: usize> Dopri5<N> {
    pub fn new(rtol: f64, atol: [f64; N], sample_dt: f64) -> Result<Self> {
        if !(rtol > 0.0 && rtol <= 1e-3) || atol.iter().any(|a| !(*a > 0.0)) || !(sample_dt > 0.0) {
            return Err(Error::invalid(format!("bad integrator settings rtol={rtol}, sample_dt={sample_dt}")));
        }
        Ok(Dopri5 { rtol, atol, sample_dt, max_steps: 200_000_000 })
    }

    /// Integrates y' = f(t, y) from `t0` to `t_end`, calling `observe` at t0
    /// and at every multiple of `sample_dt` (and at t_end).
    pub fn integrate<F, O>(
        &self,
        mut f: F,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        mut observe: O,
    ) -> Result<([f64; N], StepStats)>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
        O: FnMut(f64, &[f64; N]),
    {
        let mut stats = StepStats::default();
        let mut t = t0;
        let mut y = y0;
        observe(t, &y);
        if t_end <= t0 {
            return Ok((y, stats));
        }
        let ratio = (t_end - t0) / self.sample_dt;
        let n_samples = if (ratio - ratio.round()).abs() < 1e-6 { ratio.round() } else { ratio.ceil() }.max(1.0) as u64;
        let sample_time = |k: u64| if k >= n_samples { t_end } else { t0 + k as f64 * self.sample_dt };
        let mut next_k = 1u64;
        let mut k1 = f(t, &y);
        stats.evaluations += 1;
        let mut h = 0.1 * self.sample_dt;
        let mut k = [[0.0; N]; 7];
        while next_k <= n_samples {
            let target = sample_time(next_k);
            let mut clipped = false;
            if t + h >= target - 1e-6 * self.sample_dt {
                h = target - t;
                clipped = true;
            }
            if h <= 1e-14 * t.abs().max(self.sample_dt) {
                return Err(Error::Integration { t, message: format!("step size underflow (h = {h:e})") });
            }
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(Error::Integration { t, message: format!("exceeded {} steps", self.max_steps) });
            }
            k[0] = k1;
            for s in 1..7 {
                let mut ys = y;
                for i in 0..N {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    ys[i] += h * acc;
                }
                k[s] = f(t + C[s] * h, &ys);
                stats.evaluations += 1;
                if s == 6 {
                    // stage 7 is evaluated at the new solution (FSAL)
                    let y_new = ys;
                    let mut err = 0.0;
                    for i in 0..N {
                        let mut e = 0.0;
                        for (j, kj) in k.iter().enumerate() {
                            e += E[j] * kj[i];
                        }
                        let scale = self.atol[i] + self.rtol * y[i].abs().max(y_new[i].abs());
                        err += (h * e / scale).powi(2);
                    }
                    let err = (err / N as f64).sqrt();
                    if !err.is_finite() {
                        return Err(Error::Integration { t, message: "non-finite error estimate".into() });
                    }
                    if err <= 1.0 {
                        stats.accepted += 1;
                        t = if clipped { target } else { t + h };
                        y = y_new;
                        k1 = k[6];
                        if clipped {
                            observe(t, &y);
                            next_k += 1;
                        }
                        let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                        h = (h * grow).min(self.sample_dt);
                    } else {
                        stats.rejected += 1;
                        h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                    }
                }
            }
        }
        Ok((y, stats))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SymplecticScheme {
    /// Second order.
    Verlet,
    /// Fourth-order triple-jump composition of Verlet steps.
    Yoshida4,
}

impl SymplecticScheme {
    fn weights(self) -> &'static [f64] {
        const CBRT2: f64 = 1.259_921_049_894_873_2;
        const W1: f64 = 1.0 / (2.0 - CBRT2);
        const W0: f64 = -CBRT2 / (2.0 - CBRT2);
        match self {
            SymplecticScheme::Verlet => &[1.0],
            SymplecticScheme::Yoshida4 => &[W1, W0, W1],
        }
    }
}

/// Fixed-step kick-drift-kick integration of q'' = accel(t, q). Calls
/// `observe(t, q, v)` at the start and after every step.
#[allow(clippy::too_many_arguments)]
pub fn velocity_verlet<const M: usize, F, O>(
    scheme: SymplecticScheme,
    mut accel: F,
    t0: f64,
    q0: [f64; M],
    v0: [f64; M],
    h: f64,
    n_steps: u64,
    mut observe: O,
) -> Result<([f64; M], [f64; M])>
where
    F: FnMut(f64, &[f64; M]) -> [f64; M],
    O: FnMut(f64, &[f64; M], &[f64; M]),
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("symplectic step must be > 0, got {h}")));
    }
    let (mut q, mut v) = (q0, v0);
    let mut a = accel(t0, &q);
    observe(t0, &q, &v);
    for step in 0..n_steps {
        let mut t = t0 + step as f64 * h;
        for &w in scheme.weights() {
            let hw = w * h;
            for i in 0..M {
                v[i] += 0.5 * hw * a[i];
                q[i] += hw * v[i];
            }
            t += hw;
            a = accel(t, &q);
            for i in 0..M {
                v[i] += 0.5 * hw * a[i];
            }
        }
        if q.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::Integration { t, message: "non-finite state".into() });
        }
        observe(t0 + (step + 1) as f64 * h, &q, &v);
    }
    Ok((q, v))
}

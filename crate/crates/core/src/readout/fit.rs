//! Least-squares fit of P(t) = y0 + (C/2)(1 - cos 2 pi f t) exp(-g t).

use super::signal::{RabiSignal, DEFAULT_SHOTS};
use crate::error::{Error, Result};
use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    pub offset: f64,
    pub contrast: f64,
    pub frequency_hz: f64,
    /// Decay rate g (1/s), >= 0.
    pub decay_per_s: f64,
    /// Covariance of (offset, contrast, frequency, decay).
    pub covariance: [[f64; 4]; 4],
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl RabiFit {
    pub fn sigma(&self, i: usize) -> f64 {
        self.covariance[i][i].max(0.0).sqrt()
    }

    pub fn frequency_sigma(&self) -> f64 {
        self.sigma(2)
    }

    pub fn contrast_sigma(&self) -> f64 {
        self.sigma(1)
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        model(&Vector4::new(self.offset, self.contrast, self.frequency_hz, self.decay_per_s), t)
    }
}

fn model(p: &Vector4<f64>, t: f64) -> f64 {
    p[0] + 0.5 * p[1] * (1.0 - (TAU * p[2] * t).cos()) * (-p[3] * t).exp()
}

fn gradient(p: &Vector4<f64>, t: f64) -> Vector4<f64> {
    let e = (-p[3] * t).exp();
    let phase = TAU * p[2] * t;
    let g = 0.5 * (1.0 - phase.cos());
    Vector4::new(1.0, g * e, 0.5 * p[1] * phase.sin() * TAU * t * e, -t * p[1] * g * e)
}

struct Problem<'a> {
    t: &'a [f64],
    y: &'a [f64],
    w: Vec<f64>,
}

impl Problem<'_> {
    fn chi2(&self, p: &Vector4<f64>) -> f64 {
        self.t.iter().zip(self.y).zip(&self.w).map(|((&t, &y), &w)| w * (y - model(p, t)).powi(2)).sum()
    }

    fn normal_equations(&self, p: &Vector4<f64>) -> (Matrix4<f64>, Vector4<f64>) {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for ((&t, &y), &w) in self.t.iter().zip(self.y).zip(&self.w) {
            let g = gradient(p, t);
            jtj += w * g * g.transpose();
            jtr += w * (y - model(p, t)) * g;
        }
        (jtj, jtr)
    }

    /// Best (offset, contrast) and chi^2 for fixed frequency and decay.
    fn linear_solve(&self, f: f64, decay: f64) -> (f64, f64, f64) {
        let (mut s1, mut sg, mut sgg, mut sy, mut sgy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((&t, &y), &w) in self.t.iter().zip(self.y).zip(&self.w) {
            let g = 0.5 * (1.0 - (TAU * f * t).cos()) * (-decay * t).exp();
            s1 += w;
            sg += w * g;
            sgg += w * g * g;
            sy += w * y;
            sgy += w * g * y;
        }
        let det = s1 * sgg - sg * sg;
        if det.abs() < 1e-300 {
            return (sy / s1, 0.0, f64::INFINITY);
        }
        let c = (s1 * sgy - sg * sy) / det;
        let y0 = (sy - c * sg) / s1;
        let p = Vector4::new(y0, c, f, decay);
        (y0, c, self.chi2(&p))
    }
}

/// Pseudo-inverse of a symmetric positive semi-definite matrix.
fn pseudo_inverse(m: &Matrix4<f64>) -> Matrix4<f64> {
    let svd = m.svd(true, true);
    let tol = svd.singular_values.max() * 1e-12;
    svd.pseudo_inverse(tol).unwrap_or_else(|_| Matrix4::from_element(f64::INFINITY))
}

/// Weighted Levenberg-Marquardt fit, started from a grid scan over frequency
/// and decay with offset and contrast solved linearly.
pub fn fit_rabi(signal: &RabiSignal) -> Result<RabiFit> {
    signal.validate()?;
    let n = signal.len();
    if n < 10 {
        return Err(Error::invalid(format!("fit needs at least 10 points, got {n}")));
    }
    let t = &signal.times_s;
    let span = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - t.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return Err(Error::invalid("probe times must span a non-zero interval"));
    }
    let w: Vec<f64> = signal.weighting_variance(DEFAULT_SHOTS).iter().map(|v| 1.0 / v).collect();
    let prob = Problem { t, y: &signal.probabilities, w };

    let mut dt = f64::INFINITY;
    let mut sorted = t.clone();
    sorted.sort_by(f64::total_cmp);
    for pair in sorted.windows(2) {
        if pair[1] > pair[0] {
            dt = dt.min(pair[1] - pair[0]);
        }
    }
    // at least four samples per period
    let f_max = 0.25 / dt;
    let f_min = 0.25 / span;
    let mut best = (f64::INFINITY, Vector4::zeros());
    let steps = 400;
    for i in 0..=steps {
        let f = f_min * (f_max / f_min).powf(i as f64 / steps as f64);
        for decay in [0.0, 0.3 / span, 1.0 / span, 3.0 / span] {
            let (y0, c, chi2) = prob.linear_solve(f, decay);
            if chi2 < best.0 {
                best = (chi2, Vector4::new(y0, c, f, decay));
            }
        }
    }
    // box constraints keep flat data from sliding along degenerate valleys
    let bounds = [(-1.0, 2.0), (-2.0, 2.0), (0.1 / span, 0.5 / dt), (0.0, 20.0 / span)];
    let mut p = best.1;
    for i in 0..4 {
        p[i] = p[i].clamp(bounds[i].0, bounds[i].1);
    }
    let mut chi2 = prob.chi2(&p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let mut checkpoint = chi2;
    while iterations < 500 {
        iterations += 1;
        if iterations % 25 == 0 {
            // slow creep along a constraint counts as converged
            if checkpoint - chi2 <= 1e-7 * checkpoint.max(1e-300) {
                converged = true;
                break;
            }
            checkpoint = chi2;
        }
        let (jtj, jtr) = prob.normal_equations(&p);
        let mut a = jtj;
        for i in 0..4 {
            a[(i, i)] += lambda * jtj[(i, i)].max(1e-30);
        }
        // parameters held at a bound and pushed outwards are frozen for this step
        let mut frozen = [false; 4];
        let step = loop {
            let mut m = a;
            let mut rhs = jtr;
            for i in (0..4).filter(|&i| frozen[i]) {
                for j in 0..4 {
                    m[(i, j)] = 0.0;
                    m[(j, i)] = 0.0;
                }
                m[(i, i)] = 1.0;
                rhs[i] = 0.0;
            }
            let Some(step) = m.lu().solve(&rhs) else { break None };
            let mut changed = false;
            for i in 0..4 {
                let (lo, hi) = bounds[i];
                if !frozen[i] && ((p[i] <= lo && step[i] < 0.0) || (p[i] >= hi && step[i] > 0.0)) {
                    frozen[i] = true;
                    changed = true;
                }
            }
            if !changed {
                break Some(step);
            }
        };
        let Some(step) = step else {
            lambda *= 10.0;
            continue;
        };
        let mut trial = p + step;
        for i in 0..4 {
            trial[i] = trial[i].clamp(bounds[i].0, bounds[i].1);
        }
        let c2 = prob.chi2(&trial);
        if c2.is_finite() && c2 <= chi2 {
            let moved = trial - p;
            let small = (chi2 - c2) <= 1e-10 * chi2.max(1e-300)
                || moved.iter().zip(p.iter()).all(|(s, x)| s.abs() <= 1e-10 * x.abs().max(1e-12));
            p = trial;
            chi2 = c2;
            lambda = (lambda / 10.0).max(1e-12);
            if small {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                // no downhill direction left: at a minimum to working precision
                converged = true;
                break;
            }
        }
    }
    let dof = n.saturating_sub(4).max(1);
    if !converged || !chi2.is_finite() {
        return Err(Error::Fit {
            message: "Levenberg-Marquardt did not converge".into(),
            rms_residual: (prob.chi2(&p) / n as f64).sqrt(),
            iterations,
        });
    }
    let (jtj, _) = prob.normal_equations(&p);
    let mut cov = pseudo_inverse(&jtj);
    if signal.shots.is_none() {
        // exact curve: nominal weights carry no scale, use the residual variance
        cov *= chi2 / dof as f64;
    }
    let mut covariance = [[0.0; 4]; 4];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = cov[(i, j)];
        }
    }
    if p[2] < 0.0 {
        p[2] = -p[2];
    }
    Ok(RabiFit {
        offset: p[0],
        contrast: p[1],
        frequency_hz: p[2],
        decay_per_s: p[3],
        covariance,
        chi2,
        dof,
        iterations,
    })
}

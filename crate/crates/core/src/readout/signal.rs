use super::distribution::MotionalDistribution;
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::{Read, Write};

/// Shots per point, also assumed when weighting an exact curve.
pub const DEFAULT_SHOTS: u32 = 20;

/// Blue-sideband coupling strength between |n> and |n+1>.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingModel {
    /// eta sqrt(n+1) Omega0.
    #[default]
    LambDicke,
    /// Full Debye-Waller and Laguerre dependence.
    Laguerre,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsbParams {
    pub eta: f64,
    /// Carrier Rabi frequency Omega0 (rad/s).
    pub omega0: f64,
    /// Decoherence time (s); None for no decay.
    pub decoherence_s: Option<f64>,
    pub coupling: CouplingModel,
}

impl BsbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 0.5) {
            return Err(Error::invalid(format!("Lamb-Dicke parameter must be in (0, 0.5], got {}", self.eta)));
        }
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::invalid(format!("Rabi frequency must be > 0, got {}", self.omega0)));
        }
        if let Some(tau) = self.decoherence_s {
            if !(tau > 0.0) {
                return Err(Error::invalid(format!("decoherence time must be > 0, got {tau}")));
            }
        }
        Ok(())
    }

    /// Omega_{n,n+1} for n = 0..count.
    pub fn sideband_frequencies(&self, count: usize) -> Vec<f64> {
        match self.coupling {
            CouplingModel::LambDicke => (0..count).map(|n| self.omega0 * self.eta * ((n + 1) as f64).sqrt()).collect(),
            CouplingModel::Laguerre => {
                let x = self.eta * self.eta;
                let pre = self.omega0 * (-x / 2.0).exp() * self.eta;
                // generalized Laguerre L_n^1(x) by upward recursion
                let (mut l_prev, mut l) = (0.0, 1.0);
                let mut out = Vec::with_capacity(count);
                for n in 0..count {
                    out.push((pre * l / ((n + 1) as f64).sqrt()).abs());
                    let k = n as f64;
                    let next =
                        if n == 0 { 2.0 - x } else { ((2.0 * k + 2.0 - x) * l - (k + 1.0) * l_prev) / (k + 1.0) };
                    l_prev = l;
                    l = next;
                }
                out
            }
        }
    }
}

/// Excitation probabilities versus probe time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiSignal {
    pub times_s: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// Shots per point; None for an exact (noiseless) curve.
    pub shots: Option<u32>,
}

impl RabiSignal {
    pub fn new(times_s: Vec<f64>, probabilities: Vec<f64>, shots: Option<u32>) -> Result<Self> {
        let s = RabiSignal { times_s, probabilities, shots };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times_s.len() != self.probabilities.len() || self.times_s.is_empty() {
            return Err(Error::Validation("signal needs equal, non-zero numbers of times and probabilities".into()));
        }
        if self.probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Validation("excitation probabilities must lie in [0, 1]".into()));
        }
        if self.times_s.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::Validation("probe times must be finite and >= 0".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::Validation("shots must be > 0".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    /// Binomial standard error sqrt(P(1-P)/shots); zero for exact curves.
    pub fn sigma(&self) -> Vec<f64> {
        match self.shots {
            Some(n) => self.probabilities.iter().map(|p| (p * (1.0 - p) / f64::from(n)).sqrt()).collect(),
            None => vec![0.0; self.len()],
        }
    }

    /// Per-point variance for weighting, with the Laplace estimate
    /// (k+1)/(n+2) so that P = 0 or 1 does not get infinite weight.
    pub fn weighting_variance(&self, nominal_shots: u32) -> Vec<f64> {
        let n = f64::from(self.shots.unwrap_or(nominal_shots));
        self.probabilities
            .iter()
            .map(|p| {
                let q = (p * n + 1.0) / (n + 2.0);
                q * (1.0 - q) / n
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_s", "P", "shots"])?;
        let shots = self.shots.map_or_else(String::new, |n| n.to_string());
        for (t, p) in self.times_s.iter().zip(&self.probabilities) {
            w.write_record([t.to_string(), p.to_string(), shots.clone()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads columns t_s, P, shots (empty shots means exact).
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
        let headers = r.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse { line: 1, message: format!("missing column '{name}'") })
        };
        let (ct, cp, cs) = (col("t_s")?, col("P")?, col("shots")?);
        let (mut times, mut probs) = (Vec::new(), Vec::new());
        let mut shots: Option<Option<u32>> = None;
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .unwrap_or("")
                    .parse()
                    .map_err(|_| Error::Parse { line, message: format!("cannot parse '{}'", rec.get(i).unwrap_or("")) })
            };
            times.push(num(ct)?);
            probs.push(num(cp)?);
            let s = rec.get(cs).unwrap_or("");
            let s = if s.is_empty() {
                None
            } else {
                Some(s.parse::<u32>().map_err(|_| Error::Parse { line, message: format!("bad shots '{s}'") })?)
            };
            match shots {
                None => shots = Some(s),
                Some(prev) if prev != s => {
                    return Err(Error::Parse { line, message: "shots must be the same on every row".into() })
                }
                _ => {}
            }
        }
        RabiSignal::new(times, probs, shots.flatten())
    }
}

/// Evenly spaced probe times from 0 to `t_max_s` inclusive.
pub fn probe_times(t_max_s: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(t_max_s > 0.0) {
        return Err(Error::invalid("need at least two probe times and t_max > 0"));
    }
    Ok((0..points).map(|i| t_max_s * i as f64 / (points - 1) as f64).collect())
}

/// Exact blue-sideband excitation probability at each time.
pub fn bsb_curve(dist: &MotionalDistribution, params: &BsbParams, times_s: &[f64]) -> Vec<f64> {
    let rabi = params.sideband_frequencies(dist.populations.len());
    times_s
        .iter()
        .map(|&t| {
            let coherent: f64 = dist.populations.iter().zip(&rabi).map(|(p, w)| p * (0.5 * w * t).sin().powi(2)).sum();
            let decay = params.decoherence_s.map_or(1.0, |tau| (-t / tau).exp());
            (coherent * decay + 0.5 * (1.0 - decay)).clamp(0.0, 1.0)
        })
        .collect()
}

/// Sideband flopping signal; with `shots` set, each point is a binomial
/// sample drawn from a generator seeded by `seed`.
pub fn synthesize_bsb_signal(
    dist: &MotionalDistribution,
    params: &BsbParams,
    times_s: &[f64],
    shots: Option<u32>,
    seed: u64,
) -> Result<RabiSignal> {
    params.validate()?;
    dist.validate()?;
    let exact = bsb_curve(dist, params, times_s);
    let probabilities = match shots {
        None => exact,
        Some(0) => return Err(Error::invalid("shots must be > 0")),
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            exact
                .iter()
                .map(|&p| {
                    let b = Binomial::new(u64::from(n), p).map_err(|e| Error::invalid(e.to_string()))?;
                    Ok(b.sample(&mut rng) as f64 / f64::from(n))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    RabiSignal::new(times_s.to_vec(), probabilities, shots)
}

/// Ground-state sideband frequency Omega0 eta / 2 pi (Hz).
pub fn ground_state_frequency(params: &BsbParams) -> f64 {
    params.sideband_frequencies(1)[0] / TAU
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> BsbParams {
        BsbParams { eta: 0.1, omega0: TAU * 50e3, decoherence_s: None, coupling: CouplingModel::LambDicke }
    }

    #[test]
    fn ground_state_full_contrast() {
        let times = probe_times(200e-6, 41).unwrap();
        let s = synthesize_bsb_signal(&MotionalDistribution::ground(), &params(), &times, None, 0).unwrap();
        let w = params().omega0 * params().eta;
        for (t, p) in s.times_s.iter().zip(&s.probabilities) {
            assert!((p - (0.5 * w * t).sin().powi(2)).abs() < 1e-14);
        }
        assert!(s.probabilities.iter().cloned().fold(0.0, f64::max) > 0.999);
    }

    #[test]
    fn decay_towards_one_half() {
        let mut p = params();
        p.decoherence_s = Some(10e-6);
        let s = bsb_curve(&MotionalDistribution::ground(), &p, &[1e-3]);
        assert!((s[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn larger_amplitude_flops_faster() {
        // time of the first maximum shrinks with the coherent amplitude
        let times = probe_times(200e-6, 2001).unwrap();
        let mut last = f64::INFINITY;
        for alpha in [0.0, 1.0, 2.0, 4.0] {
            let d = MotionalDistribution::coherent(alpha).unwrap();
            let c = bsb_curve(&d, &params(), &times);
            let i = (1..c.len() - 1).find(|&i| c[i] >= c[i - 1] && c[i] > c[i + 1]).unwrap();
            assert!(times[i] < last, "{alpha}");
            last = times[i];
        }
    }

    #[test]
    fn laguerre_reduces_to_lamb_dicke() {
        let mut p = params();
        p.eta = 1e-3;
        let ld = p.sideband_frequencies(5);
        p.coupling = CouplingModel::Laguerre;
        let lg = p.sideband_frequencies(5);
        for (a, b) in ld.iter().zip(&lg) {
            assert!((a / b - 1.0).abs() < 1e-5);
        }
        // L_1^1(x) = 2 - x
        p.eta = 0.3;
        let x: f64 = 0.09;
        let w = p.sideband_frequencies(2)[1];
        let expect = p.omega0 * (-x / 2.0).exp() * 0.3 * (2.0 - x) / 2f64.sqrt();
        assert!((w - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn noise_is_seeded_and_binomial() {
        let times = probe_times(200e-6, 51).unwrap();
        let d = MotionalDistribution::coherent(1.5).unwrap();
        let a = synthesize_bsb_signal(&d, &params(), &times, Some(20), 7).unwrap();
        let b = synthesize_bsb_signal(&d, &params(), &times, Some(20), 7).unwrap();
        let c = synthesize_bsb_signal(&d, &params(), &times, Some(20), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.probabilities.iter().all(|p| (p * 20.0 - (p * 20.0).round()).abs() < 1e-9));
        let sig = a.sigma();
        for (p, s) in a.probabilities.iter().zip(&sig) {
            assert!((s - (p * (1.0 - p) / 20.0).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn validation() {
        let mut p = params();
        p.eta = 0.6;
        assert!(synthesize_bsb_signal(&MotionalDistribution::ground(), &p, &[0.0], None, 0).is_err());
        assert!(RabiSignal::new(vec![0.0], vec![1.2], None).is_err());
        assert!(RabiSignal::new(vec![0.0, 1.0], vec![0.2], None).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let times = probe_times(100e-6, 11).unwrap();
        let d = MotionalDistribution::coherent(1.0).unwrap();
        for shots in [None, Some(20)] {
            let s = synthesize_bsb_signal(&d, &params(), &times, shots, 3).unwrap();
            let mut buf = Vec::new();
            s.write_csv(&mut buf).unwrap();
            assert_eq!(RabiSignal::read_csv(buf.as_slice()).unwrap(), s);
        }
        assert!(matches!(RabiSignal::read_csv("t_s,P\n0,0\n".as_bytes()), Err(Error::Parse { .. })));
    }
}

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Probability mass left out when truncating the Fock distribution.
const TAIL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DistributionKind {
    Coherent { alpha: f64 },
    Thermal { nbar: f64 },
    Explicit,
}

/// Fock-state populations p_n, n = 0..len.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionalDistribution {
    pub populations: Vec<f64>,
    pub kind: DistributionKind,
}

impl MotionalDistribution {
    pub fn ground() -> Self {
        MotionalDistribution { populations: vec![1.0], kind: DistributionKind::Coherent { alpha: 0.0 } }
    }

    /// Poissonian populations of a coherent state with amplitude |alpha|.
    pub fn coherent(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::invalid(format!("coherent amplitude must be finite, got {alpha}")));
        }
        let nbar = alpha * alpha;
        if nbar == 0.0 {
            return Ok(Self::ground());
        }
        // log-space recursion avoids underflow of exp(-nbar) for large nbar
        let ln_nbar = nbar.ln();
        let mut ln_p = -nbar;
        let mut populations = Vec::new();
        let mut total = 0.0;
        let mut n = 0u32;
        loop {
            let p = ln_p.exp();
            populations.push(p);
            total += p;
            n += 1;
            if f64::from(n) > nbar && (1.0 - total < TAIL || p < TAIL * 1e-3) {
                break;
            }
            ln_p += ln_nbar - f64::from(n).ln();
        }
        Ok(MotionalDistribution { populations, kind: DistributionKind::Coherent { alpha: alpha.abs() } })
    }

    pub fn thermal(nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0 && nbar.is_finite()) {
            return Err(Error::invalid(format!("thermal occupation must be >= 0, got {nbar}")));
        }
        if nbar == 0.0 {
            return Ok(MotionalDistribution { populations: vec![1.0], kind: DistributionKind::Thermal { nbar } });
        }
        let q = nbar / (1.0 + nbar);
        let mut populations = Vec::new();
        let mut p = 1.0 / (1.0 + nbar);
        // tail beyond n is q^(n+1)
        let mut tail = q;
        while tail > TAIL {
            populations.push(p);
            p *= q;
            tail *= q;
        }
        populations.push(p);
        Ok(MotionalDistribution { populations, kind: DistributionKind::Thermal { nbar } })
    }

    pub fn explicit(populations: Vec<f64>) -> Result<Self> {
        let d = MotionalDistribution { populations, kind: DistributionKind::Explicit };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.populations.is_empty() || self.populations.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Validation("populations must be non-empty and >= 0".into()));
        }
        let total = self.total();
        if !(1.0 - 1e-6..=1.0 + 1e-12).contains(&total) {
            return Err(Error::Validation(format!("populations sum to {total}, expected 1")));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.populations.iter().sum()
    }

    pub fn mean_n(&self) -> f64 {
        self.populations.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

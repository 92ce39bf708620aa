//! Hong-Ou-Mandel coincidence rate by midpoint quadrature.
//!
//! `R_C(τ) = ¼ΣΣ|f(ω_s,ω_i)e^{i(ω_s−ω_i)τ} − f(ω_i,ω_s)|²·Δω²·pair_rate`.
//!
//! Expanding the modulus leaves a τ-independent part `½Σ|f|²` and a cross
//! term that depends on the bins only through `ω_s − ω_i = mΔω`. The
//! kernel below collects that cross term by diagonal offset `m` once, so
//! each delay costs `O(n)` instead of `O(n²)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biphoton::BiphotonState;
use crate::error::{EtpaError, Result};

/// Delay samples and coincidence rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interferogram {
    /// seconds, strictly increasing
    pub tau_values: Vec<f64>,
    /// pairs/s
    pub rates: Vec<f64>,
    /// `R_C(∞)`, pairs/s
    pub baseline: f64,
}

/// Default delay half-range, s.
pub const DEFAULT_TAU_MAX: f64 = 2e-12;
/// Default number of delay samples.
pub const DEFAULT_N_TAU: usize = 401;

/// Diagonal-offset decomposition of the HOM cross term.
#[derive(Debug, Clone)]
pub struct HomKernel {
    /// `c_m = Σ_{r−c=m} f[r,c]·conj(f[c,r])`, indexed by `m + n − 1`.
    cross: Vec<Complex64>,
    norm: f64,
    dw: f64,
    /// `Δω²·pair_rate`
    scale: f64,
}

impl HomKernel {
    pub fn new(state: &BiphotonState) -> Self {
        let n = state.grid.n_points;
        let f = &state.amplitude;
        let mut cross = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
        let mut norm = 0.0;
        for r in 0..n {
            for c in 0..n {
                let a = f[[r, c]];
                norm += a.norm_sqr();
                cross[r + n - 1 - c] += a * f[[c, r]].conj();
            }
        }
        let dw = state.grid.spacing();
        HomKernel {
            cross,
            norm,
            dw,
            scale: dw * dw * state.pair_rate,
        }
    }

    /// `R_C(τ)`, pairs/s.
    pub fn rate(&self, tau: f64) -> f64 {
        let n = self.cross.len().div_ceil(2);
        let mut re = 0.0;
        for (k, c) in self.cross.iter().enumerate() {
            let m = k as f64 - (n as f64 - 1.0);
            let phase = m * self.dw * tau;
            re += c.re * phase.cos() - c.im * phase.sin();
        }
        (0.25 * (2.0 * self.norm - 2.0 * re) * self.scale).max(0.0)
    }

    /// `R_C(∞) = ½Σ|f|²·Δω²·pair_rate` (cross term dropped).
    pub fn baseline(&self) -> f64 {
        0.5 * self.norm * self.scale
    }

    /// `(R_C(∞) − R_C(0)) / (R_C(∞) + R_C(0))`.
    pub fn visibility(&self) -> Result<f64> {
        let base = self.baseline();
        if !(base > 0.0) {
            return Err(EtpaError::ZeroBaseline);
        }
        let r0 = self.rate(0.0);
        Ok((base - r0) / (base + r0))
    }
}

/// `R_C(τ)` for a single delay, pairs/s.
pub fn coincidence_rate(state: &BiphotonState, tau: f64) -> f64 {
    HomKernel::new(state).rate(tau)
}

/// `R_C(∞)`, pairs/s.
pub fn baseline(state: &BiphotonState) -> f64 {
    HomKernel::new(state).baseline()
}

/// Samples `R_C` at `n_tau` uniform delays on `[−tau_max, tau_max]`.
pub fn interferogram(state: &BiphotonState, tau_max: f64, n_tau: usize) -> Result<Interferogram> {
    if n_tau < 3 {
        return Err(EtpaError::invalid("hom.n_tau", "must be >= 3"));
    }
    if !(tau_max > 0.0 && tau_max.is_finite()) {
        return Err(EtpaError::invalid("hom.tau_max", "must be > 0"));
    }
    let kernel = HomKernel::new(state);
    let step = 2.0 * tau_max / (n_tau - 1) as f64;
    let tau_values: Vec<f64> = (0..n_tau).map(|k| -tau_max + k as f64 * step).collect();
    let rates: Vec<f64> = tau_values.par_iter().map(|&t| kernel.rate(t)).collect();
    Ok(Interferogram {
        tau_values,
        rates,
        baseline: kernel.baseline(),
    })
}

/// HOM visibility of `state`.
pub fn visibility(state: &BiphotonState) -> Result<f64> {
    HomKernel::new(state).visibility()
}

/// Full width at half depth of the dip, by linear interpolation, s.
pub fn dip_fwhm(ig: &Interferogram) -> Result<f64> {
    let (imin, &rmin) = ig
        .rates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(EtpaError::NoDip)?;
    if !(ig.baseline > 0.0) || rmin >= 0.999 * ig.baseline {
        return Err(EtpaError::NoDip);
    }
    let half = 0.5 * (ig.baseline + rmin);
    let t = &ig.tau_values;
    let r = &ig.rates;
    let cross = |a: usize, b: usize| t[a] + (half - r[a]) * (t[b] - t[a]) / (r[b] - r[a]);

    let left = (0..imin)
        .rev()
        .find(|&k| r[k] >= half)
        .map(|k| cross(k, k + 1));
    let right = (imin + 1..r.len())
        .find(|&k| r[k] >= half)
        .map(|k| cross(k - 1, k));
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(EtpaError::DipTruncated),
    }
}

//! The sample as a two-photon notch filter on the biphoton state.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biphoton::{jsi, BiphotonState};
use crate::constants::{bandwidth_nm_to_omega, omega_from_nm};
use crate::error::{EtpaError, Result};
use crate::hom;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NotchMode {
    /// `|f|²` is multiplied by `1 − ηG`.
    #[default]
    Intensity,
    /// `f` is multiplied by `1 − ηG`.
    Amplitude,
}

impl fmt::Display for NotchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NotchMode::Intensity => "intensity",
            NotchMode::Amplitude => "amplitude",
        })
    }
}

impl FromStr for NotchMode {
    type Err = EtpaError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "intensity" => Ok(NotchMode::Intensity),
            "amplitude" => Ok(NotchMode::Amplitude),
            _ => Err(EtpaError::invalid(
                "notch.mode",
                format!("unknown mode `{s}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchFilterSpec {
    /// single-photon nm; the notch sits at `ω_s + ω_i = 2Ω_N0`
    pub lambda_n0_nm: f64,
    /// nm
    pub sigma_n_nm: f64,
    pub eta: f64,
    pub mode: NotchMode,
}

impl NotchFilterSpec {
    pub fn new(lambda_n0_nm: f64, sigma_n_nm: f64, eta: f64, mode: NotchMode) -> Result<Self> {
        let spec = NotchFilterSpec {
            lambda_n0_nm,
            sigma_n_nm,
            eta,
            mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Rhodamine B: centred at 816 nm with a 20 nm bandwidth.
    pub fn rhodamine_b(eta: f64) -> Result<Self> {
        Self::new(816.0, 20.0, eta, NotchMode::Intensity)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_n0_nm > 0.0 && self.lambda_n0_nm.is_finite()) {
            return Err(EtpaError::invalid("notch.lambda_n0_nm", "must be > 0"));
        }
        if !(self.sigma_n_nm > 0.0 && self.sigma_n_nm.is_finite()) {
            return Err(EtpaError::invalid("notch.sigma_n_nm", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(EtpaError::invalid("notch.eta", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        self.eta = eta;
        self.validate()?;
        Ok(self)
    }

    /// `Ω_N0 = 2πc/λ_N0`, rad/s.
    pub fn omega_n0(&self) -> f64 {
        omega_from_nm(self.lambda_n0_nm)
    }

    /// Width of the Gaussian in sum frequency, rad/s. The bandwidth is
    /// converted at the two-photon wavelength `λ_N0/2`, as the pump width
    /// is converted at the pump wavelength.
    pub fn sigma_omega(&self) -> f64 {
        bandwidth_nm_to_omega(self.sigma_n_nm, 0.5 * self.lambda_n0_nm)
    }

    fn gaussian(&self, sum_omega: f64) -> f64 {
        let s = self.sigma_omega();
        let d = sum_omega - 2.0 * self.omega_n0();
        (-d * d / (2.0 * s * s)).exp()
    }

    /// Factor applied to `|f|²`.
    pub fn intensity_factor(&self, omega_s: f64, omega_i: f64) -> f64 {
        let t = 1.0 - self.eta * self.gaussian(omega_s + omega_i);
        match self.mode {
            NotchMode::Intensity => t,
            NotchMode::Amplitude => t * t,
        }
    }

    /// Factor applied to `f`.
    pub fn amplitude_factor(&self, omega_s: f64, omega_i: f64) -> f64 {
        let t = 1.0 - self.eta * self.gaussian(omega_s + omega_i);
        match self.mode {
            NotchMode::Intensity => t.max(0.0).sqrt(),
            NotchMode::Amplitude => t,
        }
    }
}

/// `1 − ηG`: the intensity factor in intensity mode, the amplitude factor
/// in amplitude mode.
pub fn notch_transmission(omega_s: f64, omega_i: f64, spec: &NotchFilterSpec) -> f64 {
    1.0 - spec.eta * spec.gaussian(omega_s + omega_i)
}

/// Transmitted state. `pair_rate` is kept, so the bin sum drops by the
/// absorbed fraction.
pub fn apply_notch(state: &BiphotonState, spec: &NotchFilterSpec) -> BiphotonState {
    let grid = state.grid;
    let n = grid.n_points;
    let factors: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| spec.amplitude_factor(grid.omega(k / n), grid.omega(k % n)))
        .collect();
    let mut out = state.clone();
    for (z, t) in out.amplitude.iter_mut().zip(&factors) {
        *z *= *t;
    }
    out
}

/// `jsi(input) − jsi(output)`, pairs/s per bin.
pub fn absorbed_jsi(input: &BiphotonState, output: &BiphotonState) -> Result<Array2<f64>> {
    if !input.same_support(output) {
        return Err(EtpaError::GridMismatch);
    }
    let mut abs = jsi(input) - jsi(output);
    abs.mapv_inplace(|v| if (-1e-12..0.0).contains(&v) { 0.0 } else { v });
    Ok(abs)
}

/// Absorbed pairs over input pairs.
pub fn realized_efficiency(input: &BiphotonState, output: &BiphotonState) -> Result<f64> {
    let abs = absorbed_jsi(input, output)?;
    let total = input.total_rate();
    if !(total > 0.0) {
        return Err(EtpaError::EmptyInput);
    }
    Ok(abs.sum() / total)
}

/// Notch `template` with η chosen so that the realized efficiency on
/// `state` equals `target`.
pub fn notch_for_efficiency(
    state: &BiphotonState,
    template: &NotchFilterSpec,
    target: f64,
) -> Result<NotchFilterSpec> {
    if !(0.0..=1.0).contains(&target) {
        return Err(EtpaError::invalid(
            "notch.target_efficiency",
            "must lie in [0, 1]",
        ));
    }
    let at = |eta: f64| -> Result<f64> {
        let spec = template.with_eta(eta)?;
        realized_efficiency(state, &apply_notch(state, &spec))
    };
    let full = at(1.0)?;
    if target > full {
        return Err(EtpaError::invalid(
            "notch.target_efficiency",
            format!("exceeds the {full:e} reachable with eta = 1"),
        ));
    }
    match template.mode {
        NotchMode::Intensity => template.with_eta(if full > 0.0 { target / full } else { 0.0 }),
        NotchMode::Amplitude => {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if at(mid)? < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            template.with_eta(0.5 * (lo + hi))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma_n_nm: f64,
    pub lambda_n0_nm: f64,
    pub visibility: f64,
    pub transmitted_fraction: f64,
}

/// Visibility and transmission after every `(σ_N, λ_N0)` combination,
/// σ_N-major in the order given.
pub fn sweep_notch(
    state: &BiphotonState,
    template: &NotchFilterSpec,
    sigma_n_values: &[f64],
    lambda_n0_values: &[f64],
) -> Result<Vec<SweepRow>> {
    if sigma_n_values.is_empty() || lambda_n0_values.is_empty() {
        return Err(EtpaError::invalid("sweep", "value lists must be nonempty"));
    }
    let input = state.total_rate();
    if !(input > 0.0) {
        return Err(EtpaError::EmptyInput);
    }
    let combos: Vec<(f64, f64)> = sigma_n_values
        .iter()
        .flat_map(|&s| lambda_n0_values.iter().map(move |&l| (s, l)))
        .collect();
    combos
        .par_iter()
        .map(|&(sigma_n_nm, lambda_n0_nm)| {
            let spec = NotchFilterSpec::new(lambda_n0_nm, sigma_n_nm, template.eta, template.mode)?;
            let out = apply_notch(state, &spec);
            Ok(SweepRow {
                sigma_n_nm,
                lambda_n0_nm,
                visibility: hom::visibility(&out)?,
                transmitted_fraction: out.total_rate() / input,
            })
        })
        .collect()
}

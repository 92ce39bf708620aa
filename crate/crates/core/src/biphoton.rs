//! Joint spectral amplitude on a square frequency grid.
//!
//! Row index `i` is the signal frequency, column index `j` the idler
//! frequency; both axes share the detuning values `Ω_k = ω_k − ω_p0/2`.
//! All reductions run sequentially in row-major order so results do not
//! depend on the rayon worker count.

use ndarray::{Array2, Axis as NdAxis};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{bandwidth_nm_to_omega, nm_from_omega, omega_from_nm};
use crate::dispersion::{phase_matching_function, CrystalSpec};
use crate::error::{EtpaError, Result};

/// Pump central wavelength and Gaussian amplitude width, both in nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub lambda_p0_nm: f64,
    pub sigma_p_nm: f64,
}

impl PumpSpec {
    pub fn new(lambda_p0_nm: f64, sigma_p_nm: f64) -> Result<Self> {
        if !(lambda_p0_nm > 0.0 && lambda_p0_nm.is_finite()) {
            return Err(EtpaError::invalid("pump.lambda_p0_nm", "must be > 0"));
        }
        if !(sigma_p_nm > 0.0 && sigma_p_nm.is_finite()) {
            return Err(EtpaError::invalid("pump.sigma_p_nm", "must be > 0"));
        }
        Ok(PumpSpec {
            lambda_p0_nm,
            sigma_p_nm,
        })
    }

    pub fn omega_p0(&self) -> f64 {
        omega_from_nm(self.lambda_p0_nm)
    }

    /// `σ_ω = 2πc·σ_λ/λ_p0²`.
    pub fn sigma_omega(&self) -> f64 {
        bandwidth_nm_to_omega(self.sigma_p_nm, self.lambda_p0_nm)
    }
}

/// `α = exp[−(ω_s+ω_i−ω_p0)²/(2σ_ω²)]`.
pub fn pump_envelope(omega_s: f64, omega_i: f64, pump: &PumpSpec) -> f64 {
    let d = omega_s + omega_i - pump.omega_p0();
    let s = pump.sigma_omega();
    (-d * d / (2.0 * s * s)).exp()
}

/// Uniform midpoint grid shared by both photon axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub n_points: usize,
    /// `ω_0 = ω_p0/2`, rad/s.
    pub center_omega0: f64,
    /// Grid covers `[−half_span, +half_span]` in detuning, rad/s.
    pub half_span: f64,
}

/// Full width of the SPDC band-pass used to size the default grid, nm.
pub const DEFAULT_FILTER_WIDTH_NM: f64 = 90.0;
/// Default samples per axis.
pub const DEFAULT_GRID_POINTS: usize = 512;

impl SpectralGrid {
    pub fn new(n_points: usize, center_omega0: f64, half_span: f64) -> Result<Self> {
        if n_points < 16 {
            return Err(EtpaError::invalid("grid.n_points", "must be >= 16"));
        }
        if !(center_omega0 > 0.0 && center_omega0.is_finite()) {
            return Err(EtpaError::invalid("grid.center_omega0", "must be > 0"));
        }
        if !(half_span > 0.0 && half_span < center_omega0) {
            return Err(EtpaError::invalid(
                "grid.half_span",
                "must be > 0 and below the center frequency",
            ));
        }
        Ok(SpectralGrid {
            n_points,
            center_omega0,
            half_span,
        })
    }

    /// Default sizing: the larger of three pump widths and half of a 90 nm
    /// band-pass around the degenerate wavelength.
    pub fn default_half_span(pump: &PumpSpec) -> f64 {
        let degenerate_nm = 2.0 * pump.lambda_p0_nm;
        let filter = bandwidth_nm_to_omega(0.5 * DEFAULT_FILTER_WIDTH_NM, degenerate_nm);
        (3.0 * pump.sigma_omega()).max(filter)
    }

    /// Grid centred on `ω_p0/2` with the default span.
    pub fn for_pump(pump: &PumpSpec, n_points: usize) -> Result<Self> {
        Self::new(
            n_points,
            0.5 * pump.omega_p0(),
            Self::default_half_span(pump),
        )
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_span / self.n_points as f64
    }

    /// Detuning of sample `k`, rad/s.
    pub fn detuning(&self, k: usize) -> f64 {
        -self.half_span + (k as f64 + 0.5) * self.spacing()
    }

    pub fn detunings(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.detuning(k)).collect()
    }

    pub fn omega(&self, k: usize) -> f64 {
        self.center_omega0 + self.detuning(k)
    }

    pub fn wavelength_nm(&self, k: usize) -> f64 {
        nm_from_omega(self.omega(k))
    }
}

/// Sampled JSA plus the pair rate carried by the unit-normalized state.
#[derive(Debug, Clone, PartialEq)]
pub struct BiphotonState {
    pub grid: SpectralGrid,
    pub amplitude: Array2<Complex64>,
    /// pairs/s represented by a state of unit L2 norm.
    pub pair_rate: f64,
}

impl BiphotonState {
    /// Samples `α·Φ` on `grid` and normalizes to unit L2 norm.
    pub fn build(pump: &PumpSpec, crystal: &CrystalSpec, grid: &SpectralGrid) -> Result<Self> {
        let n = grid.n_points;
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ws = grid.omega(i);
                (0..n)
                    .map(|j| {
                        let wi = grid.omega(j);
                        let phi = phase_matching_function(ws, wi, crystal)?;
                        Ok(Complex64::new(pump_envelope(ws, wi, pump) * phi, 0.0))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
        let amplitude = Array2::from_shape_vec((n, n), flat).expect("square grid");
        Self::from_amplitude(*grid, amplitude, 1.0)
    }

    /// Wraps an arbitrary amplitude, normalizing it to unit L2 norm.
    pub fn from_amplitude(
        grid: SpectralGrid,
        amplitude: Array2<Complex64>,
        pair_rate: f64,
    ) -> Result<Self> {
        if amplitude.dim() != (grid.n_points, grid.n_points) {
            return Err(EtpaError::invalid("amplitude", "shape does not match grid"));
        }
        let mut state = BiphotonState {
            grid,
            amplitude,
            pair_rate: 1.0,
        };
        let norm = state.norm_sq();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(EtpaError::EmptyInput);
        }
        let scale = norm.sqrt().recip();
        state.amplitude.mapv_inplace(|z| z * scale);
        state.with_pair_rate(pair_rate)
    }

    pub fn with_pair_rate(mut self, pair_rate: f64) -> Result<Self> {
        if !(pair_rate >= 0.0 && pair_rate.is_finite()) {
            return Err(EtpaError::invalid("pair_rate", "must be >= 0"));
        }
        self.pair_rate = pair_rate;
        Ok(self)
    }

    /// Rescales `pair_rate` so that the bin sum of the JSI equals `rate`.
    pub fn rescaled_to_total(self, rate: f64) -> Result<Self> {
        let norm = self.norm_sq();
        if norm <= 0.0 {
            return Err(EtpaError::EmptyInput);
        }
        self.with_pair_rate(rate / norm)
    }

    /// Multiplies the amplitude by a constant (a flat linear loss).
    pub fn scaled(&self, factor: f64) -> Self {
        BiphotonState {
            grid: self.grid,
            amplitude: self.amplitude.mapv(|z| z * factor),
            pair_rate: self.pair_rate,
        }
    }

    /// `Σ|f|²·Δω²`.
    pub fn norm_sq(&self) -> f64 {
        let dw = self.grid.spacing();
        self.amplitude.iter().map(|z| z.norm_sqr()).sum::<f64>() * dw * dw
    }

    /// Total pairs/s represented by the sampled JSI.
    pub fn total_rate(&self) -> f64 {
        self.norm_sq() * self.pair_rate
    }

    pub fn same_support(&self, other: &BiphotonState) -> bool {
        self.grid == other.grid && self.pair_rate == other.pair_rate
    }
}

/// `|f|²·Δω²·pair_rate`, pairs/s per bin.
pub fn jsi(state: &BiphotonState) -> Array2<f64> {
    let dw = state.grid.spacing();
    let scale = dw * dw * state.pair_rate;
    state.amplitude.mapv(|z| z.norm_sqr() * scale)
}

/// Signal (row sums) and idler (column sums) marginals, pairs/s per bin.
pub fn marginals(state: &BiphotonState) -> (Vec<f64>, Vec<f64>) {
    let j = jsi(state);
    let signal = j.sum_axis(NdAxis(1)).to_vec();
    let idler = j.sum_axis(NdAxis(0)).to_vec();
    (signal, idler)
}

struct Moments {
    total: f64,
    cxx: f64,
    cyy: f64,
    cxy: f64,
}

fn jsi_moments(state: &BiphotonState) -> Moments {
    let g = &state.grid;
    let w: Vec<f64> = g.detunings();
    let j = jsi(state);
    let (mut total, mut mx, mut my) = (0.0, 0.0, 0.0);
    for ((r, c), v) in j.indexed_iter() {
        total += v;
        mx += v * w[r];
        my += v * w[c];
    }
    if total <= 0.0 {
        return Moments {
            total: 0.0,
            cxx: 0.0,
            cyy: 0.0,
            cxy: 0.0,
        };
    }
    mx /= total;
    my /= total;
    let (mut cxx, mut cyy, mut cxy) = (0.0, 0.0, 0.0);
    for ((r, c), v) in j.indexed_iter() {
        let dx = w[r] - mx;
        let dy = w[c] - my;
        cxx += v * dx * dx;
        cyy += v * dy * dy;
        cxy += v * dx * dy;
    }
    Moments {
        total,
        cxx: cxx / total,
        cyy: cyy / total,
        cxy: cxy / total,
    }
}

/// FWHM-equivalent width (`2√(2 ln 2)·σ`) of the JSI projected on
/// `Ω = ω_s − ω_i`, rad/s.
pub fn antidiagonal_width(state: &BiphotonState) -> f64 {
    let m = jsi_moments(state);
    let var = m.cxx + m.cyy - 2.0 * m.cxy;
    2.0 * (2.0 * std::f64::consts::LN_2).sqrt() * var.max(0.0).sqrt()
}

/// Angle in degrees between the major principal axis of the JSI covariance
/// and the −45° anti-diagonal, with signal detuning on the horizontal axis.
///
/// Positive values mean the band is rotated clockwise from the
/// anti-diagonal, i.e. it leans towards the idler axis. Transposing the JSI
/// flips the sign. The result lies in (−90°, 90°].
pub fn tilt_angle(state: &BiphotonState) -> Result<f64> {
    let m = jsi_moments(state);
    let trace = m.cxx + m.cyy;
    if !(m.total > 0.0 && trace > 0.0) {
        return Err(EtpaError::Degenerate);
    }
    let aniso = (m.cxx - m.cyy).hypot(2.0 * m.cxy);
    if aniso < 1e-9 * trace {
        return Err(EtpaError::Degenerate);
    }
    let major = 0.5 * (2.0 * m.cxy).atan2(m.cxx - m.cyy).to_degrees();
    let mut tilt = -45.0 - major;
    while tilt <= -90.0 {
        tilt += 180.0;
    }
    while tilt > 90.0 {
        tilt -= 180.0;
    }
    Ok(tilt)
}

/// Separable top-hat band-pass of `full_width_nm` centred on `center_nm`,
/// applied to both photons. Losses are kept: no renormalization.
pub fn apply_bandpass(
    state: &BiphotonState,
    center_nm: f64,
    full_width_nm: f64,
) -> Result<BiphotonState> {
    if !(full_width_nm > 0.0) {
        return Err(EtpaError::invalid("bandpass.full_width_nm", "must be > 0"));
    }
    let half = 0.5 * full_width_nm;
    let pass: Vec<f64> = (0..state.grid.n_points)
        .map(|k| {
            if (state.grid.wavelength_nm(k) - center_nm).abs() <= half {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mut out = state.clone();
    for ((r, c), z) in out.amplitude.indexed_iter_mut() {
        *z *= pass[r] * pass[c];
    }
    Ok(out)
}

/// `A = ¼Σ|f − fᵀ|² / (½Σ|f|²)`, the ratio `R_C(0)/R_C(∞)` of the HOM
/// interferogram. Zero for exchange-symmetric states, two for antisymmetric
/// ones; the visibility is `(1 − A)/(1 + A)`.
pub fn exchange_asymmetry(state: &BiphotonState) -> Result<f64> {
    let f = &state.amplitude;
    let n = state.grid.n_points;
    let mut diff = 0.0;
    let mut norm = 0.0;
    for r in 0..n {
        for c in 0..n {
            let a = f[[r, c]];
            diff += (a - f[[c, r]]).norm_sqr();
            norm += a.norm_sqr();
        }
    }
    if norm <= 0.0 {
        return Err(EtpaError::EmptyInput);
    }
    Ok(0.25 * diff / (0.5 * norm))
}

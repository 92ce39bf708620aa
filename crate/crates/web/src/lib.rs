//! Browser bindings: JSI map with a notch, HOM interferogram, detection budget.

use wasm_bindgen::prelude::*;

use etpa_core::absorption::{apply_notch, realized_efficiency, NotchFilterSpec, NotchMode};
use etpa_core::biphoton::{jsi, BiphotonState};
use etpa_core::budget::{is_detectable, SampleSpec};
use etpa_core::dispersion::{DispersionTable, Process};
use etpa_core::hom::{dip_fwhm, interferogram, visibility};
use etpa_core::scenarios::StateSetup;
use etpa_core::EtpaError;

/// Largest grid the page may request.
pub const MAX_POINTS: usize = 512;

fn state(process: &str, sigma_p_nm: f64, n_points: usize) -> Result<BiphotonState, String> {
    if !(16..=MAX_POINTS).contains(&n_points) {
        return Err(format!("n_points must lie in [16, {MAX_POINTS}]"));
    }
    let process: Process = process.parse().map_err(|e: EtpaError| e.to_string())?;
    StateSetup::new(process, sigma_p_nm)
        .with_points(n_points)
        .build(&DispersionTable::ktp())
        .map_err(|e| e.to_string())
}

fn notch(
    lambda_n0_nm: f64,
    sigma_n_nm: f64,
    eta: f64,
    amplitude: bool,
) -> Result<NotchFilterSpec, String> {
    let mode = if amplitude {
        NotchMode::Amplitude
    } else {
        NotchMode::Intensity
    };
    NotchFilterSpec::new(lambda_n0_nm, sigma_n_nm, eta, mode).map_err(|e| e.to_string())
}

/// JSI before and after a two-photon notch, row-major with signal on rows.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct JsiMap {
    n: usize,
    wavelengths_nm: Vec<f64>,
    input: Vec<f64>,
    output: Vec<f64>,
    visibility_in: f64,
    visibility_out: f64,
    transmitted: f64,
}

#[wasm_bindgen]
impl JsiMap {
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }
    #[wasm_bindgen(getter)]
    pub fn wavelengths_nm(&self) -> Vec<f64> {
        self.wavelengths_nm.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn input(&self) -> Vec<f64> {
        self.input.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn output(&self) -> Vec<f64> {
        self.output.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn visibility_in(&self) -> f64 {
        self.visibility_in
    }
    #[wasm_bindgen(getter)]
    pub fn visibility_out(&self) -> f64 {
        self.visibility_out
    }
    /// fraction of pairs passing the notch
    #[wasm_bindgen(getter)]
    pub fn transmitted(&self) -> f64 {
        self.transmitted
    }
}

#[allow(clippy::too_many_arguments)]
pub fn compute_jsi_map(
    process: &str,
    sigma_p_nm: f64,
    n_points: usize,
    lambda_n0_nm: f64,
    sigma_n_nm: f64,
    eta: f64,
    amplitude_mode: bool,
) -> Result<JsiMap, String> {
    let st = state(process, sigma_p_nm, n_points)?;
    let out = apply_notch(&st, &notch(lambda_n0_nm, sigma_n_nm, eta, amplitude_mode)?);
    let err = |e: EtpaError| e.to_string();
    Ok(JsiMap {
        n: n_points,
        wavelengths_nm: (0..n_points).map(|k| st.grid.wavelength_nm(k)).collect(),
        input: jsi(&st).iter().copied().collect(),
        output: jsi(&out).iter().copied().collect(),
        visibility_in: visibility(&st).map_err(err)?,
        visibility_out: visibility(&out).map_err(err)?,
        transmitted: 1.0 - realized_efficiency(&st, &out).map_err(err)?,
    })
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn jsi_map(
    process: &str,
    sigma_p_nm: f64,
    n_points: usize,
    lambda_n0_nm: f64,
    sigma_n_nm: f64,
    eta: f64,
    amplitude_mode: bool,
) -> Result<JsiMap, JsError> {
    compute_jsi_map(
        process,
        sigma_p_nm,
        n_points,
        lambda_n0_nm,
        sigma_n_nm,
        eta,
        amplitude_mode,
    )
    .map_err(|e| JsError::new(&e))
}

/// Coincidence rate against delay for the state with and without the notch.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct HomCurve {
    tau_fs: Vec<f64>,
    input: Vec<f64>,
    output: Vec<f64>,
    baseline_in: f64,
    baseline_out: f64,
    visibility_in: f64,
    visibility_out: f64,
    fwhm_in_fs: f64,
}

#[wasm_bindgen]
impl HomCurve {
    #[wasm_bindgen(getter)]
    pub fn tau_fs(&self) -> Vec<f64> {
        self.tau_fs.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn input(&self) -> Vec<f64> {
        self.input.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn output(&self) -> Vec<f64> {
        self.output.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn baseline_in(&self) -> f64 {
        self.baseline_in
    }
    #[wasm_bindgen(getter)]
    pub fn baseline_out(&self) -> f64 {
        self.baseline_out
    }
    #[wasm_bindgen(getter)]
    pub fn visibility_in(&self) -> f64 {
        self.visibility_in
    }
    #[wasm_bindgen(getter)]
    pub fn visibility_out(&self) -> f64 {
        self.visibility_out
    }
    /// NaN when the dip is absent or wider than the delay window
    #[wasm_bindgen(getter)]
    pub fn fwhm_in_fs(&self) -> f64 {
        self.fwhm_in_fs
    }
}

#[allow(clippy::too_many_arguments)]
pub fn compute_hom_curve(
    process: &str,
    sigma_p_nm: f64,
    n_points: usize,
    lambda_n0_nm: f64,
    sigma_n_nm: f64,
    eta: f64,
    tau_max_fs: f64,
    n_tau: usize,
) -> Result<HomCurve, String> {
    let st = state(process, sigma_p_nm, n_points)?;
    let out = apply_notch(&st, &notch(lambda_n0_nm, sigma_n_nm, eta, false)?);
    let err = |e: EtpaError| e.to_string();
    let a = interferogram(&st, tau_max_fs * 1e-15, n_tau).map_err(err)?;
    let b = interferogram(&out, tau_max_fs * 1e-15, n_tau).map_err(err)?;
    let fwhm_in_fs = match dip_fwhm(&a) {
        Ok(w) => w * 1e15,
        Err(EtpaError::NoDip | EtpaError::DipTruncated) => f64::NAN,
        Err(e) => return Err(e.to_string()),
    };
    Ok(HomCurve {
        tau_fs: a.tau_values.iter().map(|t| t * 1e15).collect(),
        input: a.rates,
        output: b.rates,
        baseline_in: a.baseline,
        baseline_out: b.baseline,
        visibility_in: visibility(&st).map_err(err)?,
        visibility_out: visibility(&out).map_err(err)?,
        fwhm_in_fs,
    })
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn hom_curve(
    process: &str,
    sigma_p_nm: f64,
    n_points: usize,
    lambda_n0_nm: f64,
    sigma_n_nm: f64,
    eta: f64,
    tau_max_fs: f64,
    n_tau: usize,
) -> Result<HomCurve, JsError> {
    compute_hom_curve(
        process,
        sigma_p_nm,
        n_points,
        lambda_n0_nm,
        sigma_n_nm,
        eta,
        tau_max_fs,
        n_tau,
    )
    .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub eta_e: f64,
    pub r_abs: f64,
    pub noise_floor: f64,
    pub eta_min: f64,
    pub sigma_e_min: f64,
    pub detectable: bool,
}

pub fn compute_budget(
    sigma_e_cm2: f64,
    concentration_mm: f64,
    path_length_cm: f64,
    r_in: f64,
    fano: f64,
) -> Result<Budget, String> {
    let sample = SampleSpec::new(
        "sample",
        concentration_mm * 1e-3,
        path_length_cm,
        sigma_e_cm2,
    )
    .map_err(|e| e.to_string())?;
    let b = is_detectable(&sample, r_in, fano).map_err(|e| e.to_string())?;
    Ok(Budget {
        eta_e: b.eta_e,
        r_abs: b.r_abs,
        noise_floor: b.noise_floor,
        eta_min: b.eta_min,
        sigma_e_min: b.sigma_e_min,
        detectable: b.detectable,
    })
}

#[wasm_bindgen]
pub fn detection_budget(
    sigma_e_cm2: f64,
    concentration_mm: f64,
    path_length_cm: f64,
    r_in: f64,
    fano: f64,
) -> Result<Budget, JsError> {
    compute_budget(sigma_e_cm2, concentration_mm, path_length_cm, r_in, fano)
        .map_err(|e| JsError::new(&e))
}

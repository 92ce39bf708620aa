//! Scalar ETPA rate algebra: photon budget, absorption efficiency, noise
//! floor, detection limits, pair-rate correction and the cross-section table.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{molar_to_mol_per_cm3, photon_energy, N_A};
use crate::error::{EtpaError, Result};

/// Default Fano factor of the pair-count statistics.
pub const DEFAULT_FANO: f64 = 0.5;

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(EtpaError::invalid(field, "must be > 0"))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(EtpaError::invalid(field, "must be >= 0"))
    }
}

fn fraction(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(EtpaError::invalid(field, "must lie in (0, 1]"))
    }
}

/// Pulsed pump feeding the down-converter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceBudget {
    /// W
    pub avg_power_w: f64,
    /// Hz
    pub rep_rate_hz: f64,
    /// s
    pub pulse_duration_s: f64,
    pub pump_wavelength_nm: f64,
    pub spdc_efficiency: f64,
    /// cm
    pub beam_waist_radius_cm: f64,
}

impl Default for SourceBudget {
    /// 30 mW, 80 MHz, 110 fs at 405 nm, 1.3e-9 conversion, 15 μm radius.
    fn default() -> Self {
        SourceBudget {
            avg_power_w: 30e-3,
            rep_rate_hz: 80e6,
            pulse_duration_s: 110e-15,
            pump_wavelength_nm: 405.0,
            spdc_efficiency: 1.3e-9,
            beam_waist_radius_cm: 15e-4,
        }
    }
}

impl SourceBudget {
    pub fn validate(&self) -> Result<()> {
        positive("source.avg_power_w", self.avg_power_w)?;
        positive("source.rep_rate_hz", self.rep_rate_hz)?;
        positive("source.pulse_duration_s", self.pulse_duration_s)?;
        positive("source.pump_wavelength_nm", self.pump_wavelength_nm)?;
        fraction("source.spdc_efficiency", self.spdc_efficiency)?;
        positive("source.beam_waist_radius_cm", self.beam_waist_radius_cm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonBudget {
    /// J
    pub e_pulse: f64,
    /// J
    pub e_photon: f64,
    /// W
    pub p_peak: f64,
    /// photons/s
    pub r_peak: f64,
    /// pairs/s
    pub r2_peak: f64,
    pub pairs_per_pulse: f64,
    /// pairs/s
    pub r_in: f64,
    /// pairs/(cm²·s)
    pub phi_peak: f64,
}

pub fn photon_budget(source: &SourceBudget) -> PhotonBudget {
    let e_pulse = source.avg_power_w / source.rep_rate_hz;
    let e_photon = photon_energy(source.pump_wavelength_nm);
    let p_peak = e_pulse / source.pulse_duration_s;
    let r_peak = p_peak / e_photon;
    let r2_peak = r_peak * source.spdc_efficiency;
    let pairs_per_pulse = r2_peak * source.pulse_duration_s;
    PhotonBudget {
        e_pulse,
        e_photon,
        p_peak,
        r_peak,
        r2_peak,
        pairs_per_pulse,
        r_in: pairs_per_pulse * source.rep_rate_hz,
        phi_peak: peak_flux(r2_peak, source.beam_waist_radius_cm),
    }
}

/// `R2_peak/(πw²)` for a beam of radius `radius_cm`, pairs/(cm²·s).
pub fn peak_flux(r2_peak: f64, radius_cm: f64) -> f64 {
    r2_peak / (PI * radius_cm * radius_cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub name: String,
    /// mol/L
    pub concentration_molar: f64,
    /// cm
    pub path_length_cm: f64,
    /// cm²/molecule; `None` when no bound is known
    pub sigma_e_cm2: Option<f64>,
    /// GM
    pub sigma_c_gm: Option<f64>,
}

impl SampleSpec {
    pub fn new(
        name: &str,
        concentration_molar: f64,
        path_length_cm: f64,
        sigma_e_cm2: f64,
    ) -> Result<Self> {
        let s = SampleSpec {
            name: name.to_string(),
            concentration_molar,
            path_length_cm,
            sigma_e_cm2: Some(sigma_e_cm2),
            sigma_c_gm: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        non_negative("sample.concentration", self.concentration_molar)?;
        positive("sample.path_length_cm", self.path_length_cm)?;
        if let Some(s) = self.sigma_e_cm2 {
            non_negative("sample.sigma_e_cm2", s)?;
        }
        if let Some(s) = self.sigma_c_gm {
            non_negative("sample.sigma_c_gm", s)?;
        }
        Ok(())
    }

    /// `C·N_A·ℓ`, molecules/cm².
    pub fn column_density(&self) -> f64 {
        molar_to_mol_per_cm3(self.concentration_molar) * N_A * self.path_length_cm
    }

    fn require_sigma_e(&self) -> Result<f64> {
        self.sigma_e_cm2.ok_or_else(|| {
            EtpaError::invalid(
                "sample.sigma_e_cm2",
                format!("not known for `{}`", self.name),
            )
        })
    }
}

/// Threshold-detector channel model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub beta1: f64,
    pub beta2: f64,
    /// counts/s
    pub dark1: f64,
    /// counts/s
    pub dark2: f64,
    /// coincidences/s
    pub accidental: f64,
    pub fano: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            beta1: 0.21,
            beta2: 0.21,
            dark1: 0.0,
            dark2: 0.0,
            accidental: 0.0,
            fano: DEFAULT_FANO,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        fraction("detector.beta1", self.beta1)?;
        fraction("detector.beta2", self.beta2)?;
        non_negative("detector.dark1", self.dark1)?;
        non_negative("detector.dark2", self.dark2)?;
        non_negative("detector.accidental", self.accidental)?;
        fraction("detector.fano", self.fano)
    }
}

/// `η_E = σ_E·C·N_A·ℓ`; `None` when the sample has no σ_E.
pub fn etpa_efficiency(sample: &SampleSpec) -> Option<f64> {
    sample.sigma_e_cm2.map(|s| s * sample.column_density())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorbedRate {
    /// pairs/s
    pub r_abs: f64,
    /// pairs/s
    pub r_out: f64,
}

pub fn absorbed_rate(eta_e: f64, r_in: f64) -> AbsorbedRate {
    let r_abs = eta_e * r_in;
    AbsorbedRate {
        r_abs,
        r_out: r_in - r_abs,
    }
}

/// `δR_det = √(F·R_in)`, pairs/s.
pub fn noise_floor(r_in: f64, fano: f64) -> f64 {
    (fano * r_in).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionLimits {
    pub eta_min: f64,
    /// cm²/molecule; infinite for an empty column
    pub sigma_e_min: f64,
}

pub fn detection_limits(r_in: f64, fano: f64, sample: &SampleSpec) -> Result<DetectionLimits> {
    positive("r_in", r_in)?;
    fraction("fano", fano)?;
    let eta_min = noise_floor(r_in, fano) / r_in;
    let column = sample.column_density();
    Ok(DetectionLimits {
        eta_min,
        sigma_e_min: if column > 0.0 {
            eta_min / column
        } else {
            f64::INFINITY
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionBudget {
    pub r_in: f64,
    pub eta_e: f64,
    pub r_abs: f64,
    pub r_out: f64,
    pub noise_floor: f64,
    pub eta_min: f64,
    pub sigma_e_min: f64,
    pub detectable: bool,
}

/// Full budget for `sample`. The verdict is taken on the cross-section
/// scale, `σ_E > σ_E_min`, which the rate and efficiency comparisons
/// reproduce up to rounding.
pub fn is_detectable(sample: &SampleSpec, r_in: f64, fano: f64) -> Result<DetectionBudget> {
    sample.validate()?;
    let sigma_e = sample.require_sigma_e()?;
    let limits = detection_limits(r_in, fano, sample)?;
    let eta_e = sigma_e * sample.column_density();
    let rates = absorbed_rate(eta_e, r_in);
    Ok(DetectionBudget {
        r_in,
        eta_e,
        r_abs: rates.r_abs,
        r_out: rates.r_out,
        noise_floor: noise_floor(r_in, fano),
        eta_min: limits.eta_min,
        sigma_e_min: limits.sigma_e_min,
        detectable: sigma_e > limits.sigma_e_min,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedRates {
    pub r1_hat: f64,
    pub r2_hat: f64,
    pub r12_hat: f64,
    /// pairs/s
    pub r_in: f64,
    pub beta1: f64,
    pub beta2: f64,
}

/// Klyshko estimate of the source pair rate from dark- and
/// accidental-corrected singles and coincidences.
pub fn corrected_pair_rate(
    r1: f64,
    r2: f64,
    r12: f64,
    detector: &DetectorModel,
) -> Result<CorrectedRates> {
    let r1_hat = r1 - detector.dark1;
    let r2_hat = r2 - detector.dark2;
    let r12_hat = r12 - detector.accidental;
    for (name, v) in [("R1", r1_hat), ("R2", r2_hat), ("R12", r12_hat)] {
        if !(v > 0.0) {
            return Err(EtpaError::NegativeCorrected(name.into()));
        }
    }
    Ok(CorrectedRates {
        r1_hat,
        r2_hat,
        r12_hat,
        r_in: r1_hat * r2_hat / r12_hat,
        beta1: r12_hat / r2_hat,
        beta2: r12_hat / r1_hat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalChain {
    pub photons_per_pulse: f64,
    pub photons_per_second: f64,
}

pub fn classical_photon_chain(
    pulse_energy_j: f64,
    wavelength_nm: f64,
    rep_rate_hz: f64,
) -> Result<ClassicalChain> {
    positive("pulse_energy_j", pulse_energy_j)?;
    positive("wavelength_nm", wavelength_nm)?;
    positive("rep_rate_hz", rep_rate_hz)?;
    let photons_per_pulse = pulse_energy_j / photon_energy(wavelength_nm);
    Ok(ClassicalChain {
        photons_per_pulse,
        photons_per_second: photons_per_pulse * rep_rate_hz,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub name: String,
    /// mM, as used in the computation
    pub concentration_mm: f64,
    pub sigma_c_gm: Option<f64>,
    pub sigma_e_cm2: Option<f64>,
    /// `None` when σ_E is unknown
    pub r_abs: Option<f64>,
    pub eta_e: Option<f64>,
    pub detectable: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub r_in: f64,
    pub fano: f64,
    pub noise_floor: f64,
    pub rows: Vec<Table1Row>,
}

pub fn table1(samples: &[SampleSpec], r_in: f64, fano: f64) -> Result<Table1> {
    if samples.is_empty() {
        return Err(EtpaError::invalid("samples", "list is empty"));
    }
    positive("r_in", r_in)?;
    fraction("fano", fano)?;
    let rows = samples
        .iter()
        .map(|s| {
            let budget = match s.sigma_e_cm2 {
                Some(_) => Some(is_detectable(s, r_in, fano)?),
                None => None,
            };
            Ok(Table1Row {
                name: s.name.clone(),
                concentration_mm: s.concentration_molar * 1e3,
                sigma_c_gm: s.sigma_c_gm,
                sigma_e_cm2: s.sigma_e_cm2,
                r_abs: budget.map(|b| b.r_abs),
                eta_e: budget.map(|b| b.eta_e),
                detectable: budget.map(|b| b.detectable),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table1 {
        r_in,
        fano,
        noise_floor: noise_floor(r_in, fano),
        rows,
    })
}

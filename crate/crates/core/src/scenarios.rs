//! Reference configurations shared by the command line, the browser demo
//! and the acceptance suite.

use serde::{Deserialize, Serialize};

use crate::absorption::{apply_notch, notch_for_efficiency, NotchFilterSpec};
use crate::biphoton::{apply_bandpass, BiphotonState, PumpSpec, SpectralGrid, DEFAULT_GRID_POINTS};
use crate::budget::noise_floor;
use crate::dispersion::{solve_poling_period, Axis, CrystalSpec, DispersionTable, Process};
use crate::error::{EtpaError, Result};
use crate::noisesim::{calibrated_sigma, simulate_frames, MeasurementResult, NoiseRunConfig};

pub const PUMP_WAVELENGTH_NM: f64 = 405.0;
/// Narrow-band stand-in for a continuous-wave pump, nm.
pub const CW_PUMP_SIGMA_NM: f64 = 0.1;
pub const PULSED_PUMP_SIGMA_NM: f64 = 5.0;
pub const CRYSTAL_LENGTH_M: f64 = 10e-3;
/// Band-pass in front of the sample, nm.
pub const FILTER_CENTER_NM: f64 = 810.0;
pub const FILTER_WIDTH_NM: f64 = 90.0;

/// Everything needed to sample a down-converted state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSetup {
    pub process: Process,
    pub lambda_p0_nm: f64,
    pub sigma_p_nm: f64,
    pub length_m: f64,
    /// solved for degenerate phase matching when absent
    pub poling_period_m: Option<f64>,
    /// `[pump, signal, idler]`; the process default when absent
    pub axes: Option<[Axis; 3]>,
    pub n_points: usize,
}

impl StateSetup {
    pub fn new(process: Process, sigma_p_nm: f64) -> Self {
        StateSetup {
            process,
            lambda_p0_nm: PUMP_WAVELENGTH_NM,
            sigma_p_nm,
            length_m: CRYSTAL_LENGTH_M,
            poling_period_m: None,
            axes: None,
            n_points: DEFAULT_GRID_POINTS,
        }
    }

    pub fn cw(process: Process) -> Self {
        Self::new(process, CW_PUMP_SIGMA_NM)
    }

    pub fn pulsed(process: Process) -> Self {
        Self::new(process, PULSED_PUMP_SIGMA_NM)
    }

    pub fn with_points(mut self, n_points: usize) -> Self {
        self.n_points = n_points;
        self
    }

    pub fn pump(&self) -> Result<PumpSpec> {
        PumpSpec::new(self.lambda_p0_nm, self.sigma_p_nm)
    }

    /// Crystal with the configured or the solved grating period.
    pub fn crystal(&self, table: &DispersionTable) -> Result<CrystalSpec> {
        let axes = self
            .axes
            .unwrap_or_else(|| CrystalSpec::default_axes(self.process));
        let pump = self.pump()?;
        let guess = self.poling_period_m.unwrap_or(10e-6);
        let crystal = CrystalSpec::new(self.length_m, guess, self.process, axes, table)?;
        match self.poling_period_m {
            Some(_) => Ok(crystal),
            None => {
                let period = solve_poling_period(&crystal, pump.omega_p0())?;
                crystal.with_poling_period(period)
            }
        }
    }

    pub fn build(&self, table: &DispersionTable) -> Result<BiphotonState> {
        let pump = self.pump()?;
        let grid = SpectralGrid::for_pump(&pump, self.n_points)?;
        BiphotonState::build(&pump, &self.crystal(table)?, &grid)
    }
}

/// Inputs of the spectrally resolved absorption measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionSetup {
    /// pairs/s reaching the sample
    pub r_in: f64,
    /// target absorbed fraction `η_E`
    pub eta_e: f64,
    pub fano: f64,
    /// notch shape; η is rescaled to realize `eta_e`
    pub notch: NotchFilterSpec,
    pub filter_center_nm: f64,
    pub filter_width_nm: f64,
    pub noise: NoiseRunConfig,
    /// derive the per-channel noise from the noise floor
    pub calibrate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionRun {
    pub input: BiphotonState,
    pub output: BiphotonState,
    /// notch with the realized η
    pub notch: NotchFilterSpec,
    /// pairs/s
    pub r_abs: f64,
    /// pairs/s
    pub noise_floor: f64,
    /// `R_abs/δR_det`, before accumulation
    pub single_shot_snr: f64,
    pub noise: NoiseRunConfig,
    pub measurement: MeasurementResult,
}

/// Band-pass, scale to `r_in`, absorb `η_E` through the notch, and measure
/// the marginals with accumulated detector noise.
pub fn absorption_measurement(
    state: &BiphotonState,
    setup: &AbsorptionSetup,
) -> Result<AbsorptionRun> {
    if !(setup.r_in > 0.0) {
        return Err(EtpaError::invalid("absorption.r_in", "must be > 0"));
    }
    let input = apply_bandpass(state, setup.filter_center_nm, setup.filter_width_nm)?
        .rescaled_to_total(setup.r_in)?;
    let notch = notch_for_efficiency(&input, &setup.notch, setup.eta_e)?;
    let output = apply_notch(&input, &notch);
    let r_abs = input.total_rate() - output.total_rate();
    let mut noise = setup.noise.clone();
    if setup.calibrate {
        noise.per_bin_noise_sigma = calibrated_sigma(
            &input,
            setup.fano,
            noise.channel_width_nm,
            noise.integration_time_s,
        )?;
    }
    let measurement = simulate_frames(&input, &output, &noise)?;
    let floor = noise_floor(setup.r_in, setup.fano);
    Ok(AbsorptionRun {
        single_shot_snr: r_abs / floor,
        noise_floor: floor,
        r_abs,
        notch,
        input,
        output,
        noise,
        measurement,
    })
}

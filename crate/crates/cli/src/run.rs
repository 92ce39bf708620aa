//! Scenario drivers: compute and write every table for one run.

use serde::Serialize;

use etpa_core::absorption::{apply_notch, realized_efficiency, sweep_notch, NotchFilterSpec};
use etpa_core::biphoton::{exchange_asymmetry, jsi, marginals, tilt_angle, BiphotonState};
use etpa_core::budget::{
    detection_limits, etpa_efficiency, is_detectable, noise_floor, photon_budget, table1,
    DetectionBudget, DetectionLimits, PhotonBudget, SampleSpec,
};
use etpa_core::dispersion::CrystalSpec;
use etpa_core::hom::{dip_fwhm, interferogram, Interferogram};
use etpa_core::noisesim::MarginalPair;
use etpa_core::scenarios::{absorption_measurement, AbsorptionSetup};
use etpa_core::EtpaError;

use crate::config::{DataSet, Plan, Scenario};
use crate::error::CliError;
use crate::output::{num, OutputDir};

#[derive(Debug, Serialize)]
struct StateSummary {
    process: String,
    lambda_p0_nm: f64,
    sigma_p_nm: f64,
    length_mm: f64,
    poling_period_um: f64,
    n_points: usize,
    center_wavelength_nm: f64,
    half_span_rad_per_s: f64,
    pair_rate: f64,
    exchange_asymmetry: f64,
    /// `None` for an isotropic JSI
    tilt_deg: Option<f64>,
}

#[derive(Debug, Serialize)]
struct HomSummary {
    visibility: f64,
    baseline_pairs_per_s: f64,
    /// `None` when there is no resolvable dip
    dip_fwhm_fs: Option<f64>,
    tau_max_fs: f64,
    n_tau: usize,
}

#[derive(Debug, Serialize)]
struct NotchSummary {
    notch: NotchFilterSpec,
    transmitted_fraction: f64,
    realized_efficiency: f64,
    visibility_in: f64,
    visibility_out: f64,
}

fn state_summary(
    state: &BiphotonState,
    crystal: &CrystalSpec,
    plan: &Plan,
) -> Result<StateSummary, CliError> {
    Ok(StateSummary {
        process: plan
            .echo
            .crystal
            .as_ref()
            .and_then(|c| c.process.clone())
            .unwrap_or_default(),
        lambda_p0_nm: plan.state.lambda_p0_nm,
        sigma_p_nm: plan.state.sigma_p_nm,
        length_mm: crystal.length_m * 1e3,
        poling_period_um: crystal.poling_period_m * 1e6,
        n_points: state.grid.n_points,
        center_wavelength_nm: state.grid.wavelength_nm(state.grid.n_points / 2),
        half_span_rad_per_s: state.grid.half_span,
        pair_rate: state.pair_rate,
        exchange_asymmetry: exchange_asymmetry(state)?,
        tilt_deg: match tilt_angle(state) {
            Ok(t) => Some(t),
            Err(EtpaError::Degenerate) => None,
            Err(e) => return Err(e.into()),
        },
    })
}

fn write_state(out: &mut OutputDir, prefix: &str, state: &BiphotonState) -> Result<(), CliError> {
    let g = &state.grid;
    let n = g.n_points;
    let j = jsi(state);
    let wl: Vec<f64> = (0..n).map(|k| g.wavelength_nm(k)).collect();
    out.write_csv(
        &format!("{prefix}jsi.csv"),
        &[
            "signal_wavelength_nm",
            "idler_wavelength_nm",
            "jsi_pairs_per_s",
        ],
        (0..n).flat_map(|r| {
            let wl = &wl;
            let j = &j;
            (0..n).map(move |c| vec![num(wl[r]), num(wl[c]), num(j[[r, c]])])
        }),
    )?;
    let (sig, idl) = marginals(state);
    out.write_csv(
        &format!("{prefix}marginals.csv"),
        &[
            "wavelength_nm",
            "detuning_rad_per_s",
            "signal_pairs_per_s",
            "idler_pairs_per_s",
        ],
        (0..n).map(|k| vec![num(wl[k]), num(g.detuning(k)), num(sig[k]), num(idl[k])]),
    )
}

fn write_hom(
    out: &mut OutputDir,
    prefix: &str,
    state: &BiphotonState,
    plan: &Plan,
) -> Result<f64, CliError> {
    let ig: Interferogram = interferogram(state, plan.tau_max_s, plan.n_tau)?;
    let visibility = etpa_core::hom::visibility(state)?;
    let fwhm = match dip_fwhm(&ig) {
        Ok(w) => Some(w * 1e15),
        Err(EtpaError::NoDip | EtpaError::DipTruncated) => None,
        Err(e) => return Err(e.into()),
    };
    out.write_csv(
        &format!("{prefix}hom.csv"),
        &["delay_fs", "coincidence_rate_pairs_per_s"],
        ig.tau_values
            .iter()
            .zip(&ig.rates)
            .map(|(t, r)| vec![num(t * 1e15), num(*r)]),
    )?;
    out.write_json(
        &format!("{prefix}hom.json"),
        &HomSummary {
            visibility,
            baseline_pairs_per_s: ig.baseline,
            dip_fwhm_fs: fwhm,
            tau_max_fs: plan.tau_max_s * 1e15,
            n_tau: plan.n_tau,
        },
    )?;
    Ok(visibility)
}

fn write_notch(
    out: &mut OutputDir,
    state: &BiphotonState,
    notch: &NotchFilterSpec,
    plan: &Plan,
) -> Result<(), CliError> {
    let filtered = apply_notch(state, notch);
    write_state(out, "input_", state)?;
    write_state(out, "output_", &filtered)?;
    let v_in = write_hom(out, "input_", state, plan)?;
    let v_out = write_hom(out, "output_", &filtered, plan)?;
    let eff = realized_efficiency(state, &filtered)?;
    out.write_json(
        "notch.json",
        &NotchSummary {
            notch: *notch,
            transmitted_fraction: 1.0 - eff,
            realized_efficiency: eff,
            visibility_in: v_in,
            visibility_out: v_out,
        },
    )
}

#[derive(Debug, Serialize)]
struct SweepOptimum {
    lambda_n0_nm: f64,
    argmin_sigma_n_nm: f64,
    min_visibility: f64,
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    template: NotchFilterSpec,
    visibility_unfiltered: f64,
    optima: Vec<SweepOptimum>,
}

fn write_sweep(
    out: &mut OutputDir,
    state: &BiphotonState,
    template: &NotchFilterSpec,
    plan: &Plan,
) -> Result<(), CliError> {
    let rows = sweep_notch(
        state,
        template,
        &plan.sweep_sigma_n_nm,
        &plan.sweep_lambda_n0_nm,
    )?;
    out.write_csv(
        "sweep.csv",
        &[
            "sigma_n_nm",
            "lambda_n0_nm",
            "visibility",
            "transmitted_fraction",
        ],
        rows.iter().map(|r| {
            vec![
                num(r.sigma_n_nm),
                num(r.lambda_n0_nm),
                num(r.visibility),
                num(r.transmitted_fraction),
            ]
        }),
    )?;
    let optima = plan
        .sweep_lambda_n0_nm
        .iter()
        .map(|&l| {
            let best = rows
                .iter()
                .filter(|r| r.lambda_n0_nm == l)
                .min_by(|a, b| a.visibility.total_cmp(&b.visibility))
                .expect("nonempty sweep");
            SweepOptimum {
                lambda_n0_nm: l,
                argmin_sigma_n_nm: best.sigma_n_nm,
                min_visibility: best.visibility,
            }
        })
        .collect();
    out.write_json(
        "sweep.json",
        &SweepSummary {
            template: *template,
            visibility_unfiltered: etpa_core::hom::visibility(state)?,
            optima,
        },
    )
}

#[derive(Debug, Serialize)]
struct AbsorptionSummary {
    sample: SampleSpec,
    eta_e: f64,
    /// notch with η tuned so the absorbed fraction equals `eta_e`
    notch: NotchFilterSpec,
    r_in: f64,
    r_abs: f64,
    noise_floor: f64,
    /// `R_abs/δR_det` before accumulation
    single_shot_snr: f64,
    /// accumulated over `n_frames`
    snr: f64,
    snr_db: f64,
    n_frames: usize,
    integration_time_s: f64,
    per_bin_noise_sigma: f64,
    channel_width_nm: f64,
    n_signal_channels: usize,
    peak_channels: Vec<usize>,
    background_channels: Vec<usize>,
    seed: u64,
}

fn pair_columns(p: &MarginalPair, c: usize) -> [String; 2] {
    [num(p.signal[c]), num(p.idler[c])]
}

fn write_absorption(
    out: &mut OutputDir,
    state: &BiphotonState,
    sample: &SampleSpec,
    plan: &Plan,
) -> Result<(), CliError> {
    let eta_e = etpa_efficiency(sample).ok_or_else(|| {
        CliError::Config(
            "invalid parameter `sample.sigma_e_cm2`: required for the noise measurement".into(),
        )
    })?;
    let notch = plan.notch.ok_or_else(|| {
        CliError::Config("invalid parameter `notch`: required for the noise measurement".into())
    })?;
    let noise = plan.noise.clone().expect("resolved with the sample");
    let setup = AbsorptionSetup {
        r_in: plan.r_in,
        eta_e,
        fano: plan.detector.fano,
        notch,
        filter_center_nm: plan.filter_center_nm,
        filter_width_nm: plan.filter_width_nm,
        noise,
        calibrate: plan.calibrate_noise,
    };
    let run = absorption_measurement(state, &setup)?;
    let m = &run.measurement;
    out.write_csv(
        "absorption.csv",
        &[
            "wavelength_nm",
            "input_signal_counts",
            "input_idler_counts",
            "output_signal_counts",
            "output_idler_counts",
            "absorbed_signal_counts",
            "absorbed_idler_counts",
            "expected_absorbed_signal_counts",
            "expected_absorbed_idler_counts",
        ],
        (0..m.channel_nm.len()).map(|c| {
            let mut row = vec![num(m.channel_nm[c])];
            for p in [
                &m.accumulated_in,
                &m.accumulated_out,
                &m.absorbed,
                &m.expected_absorbed,
            ] {
                row.extend(pair_columns(p, c));
            }
            row
        }),
    )?;
    if let Some(j) = &m.accumulated_jsi {
        let g = &run.input.grid;
        let n = g.n_points;
        let wl: Vec<f64> = (0..n).map(|k| g.wavelength_nm(k)).collect();
        out.write_csv(
            "absorption_jsi.csv",
            &[
                "signal_wavelength_nm",
                "idler_wavelength_nm",
                "input_counts",
                "output_counts",
                "absorbed_counts",
            ],
            (0..n).flat_map(|r| {
                let wl = &wl;
                (0..n).map(move |c| {
                    vec![
                        num(wl[r]),
                        num(wl[c]),
                        num(j.input[[r, c]]),
                        num(j.output[[r, c]]),
                        num(j.absorbed[[r, c]]),
                    ]
                })
            }),
        )?;
    }
    out.write_json(
        "absorption.json",
        &AbsorptionSummary {
            sample: sample.clone(),
            eta_e,
            notch: run.notch,
            r_in: plan.r_in,
            r_abs: run.r_abs,
            noise_floor: run.noise_floor,
            single_shot_snr: run.single_shot_snr,
            snr: m.snr.snr,
            snr_db: m.snr.snr_db,
            n_frames: run.noise.n_frames,
            integration_time_s: run.noise.integration_time_s,
            per_bin_noise_sigma: run.noise.per_bin_noise_sigma,
            channel_width_nm: run.noise.channel_width_nm,
            n_signal_channels: m.n_signal_channels,
            peak_channels: m.peak_channels.clone(),
            background_channels: m.background_channels.clone(),
            seed: plan.seed,
        },
    )
}

#[derive(Debug, Serialize)]
struct BudgetSummary {
    source: etpa_core::budget::SourceBudget,
    photon_budget: PhotonBudget,
    r_in: f64,
    fano: f64,
    noise_floor: f64,
    /// for the library's effective concentration and path length
    limits: DetectionLimits,
}

fn write_table1(out: &mut OutputDir, plan: &Plan) -> Result<(), CliError> {
    let specs = plan.sample_library.table1_specs(plan.strict_concentration);
    let t = table1(&specs, plan.r_in, plan.detector.fano)?;
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    out.write_csv(
        "table1.csv",
        &[
            "sample",
            "concentration_mm",
            "sigma_c_gm",
            "sigma_e_cm2",
            "eta_e",
            "r_abs_pairs_per_s",
            "detectable",
        ],
        t.rows.iter().map(|r| {
            vec![
                r.name.clone(),
                num(r.concentration_mm),
                opt(r.sigma_c_gm),
                opt(r.sigma_e_cm2),
                opt(r.eta_e),
                opt(r.r_abs),
                r.detectable.map(|d| d.to_string()).unwrap_or_default(),
            ]
        }),
    )?;
    out.write_json("table1.json", &t)?;
    let reference = SampleSpec {
        name: "reference column".into(),
        concentration_molar: plan.sample_library.effective_concentration_mm * 1e-3,
        path_length_cm: plan.sample_library.path_length_cm,
        sigma_e_cm2: None,
        sigma_c_gm: None,
    };
    out.write_json(
        "budget.json",
        &BudgetSummary {
            source: plan.source,
            photon_budget: photon_budget(&plan.source),
            r_in: plan.r_in,
            fano: plan.detector.fano,
            noise_floor: noise_floor(plan.r_in, plan.detector.fano),
            limits: detection_limits(plan.r_in, plan.detector.fano, &reference)?,
        },
    )
}

#[derive(Debug, Serialize)]
struct DetectionSummary {
    sample: SampleSpec,
    budget: DetectionBudget,
}

/// Computes and writes every output of `plan.scenario`.
pub fn execute(plan: &Plan, data: &DataSet, out: &mut OutputDir) -> Result<(), CliError> {
    out.write_bytes("config.toml", plan.echo_toml().as_bytes())?;
    if plan.scenario == Scenario::Table1 {
        return write_table1(out, plan);
    }
    let crystal = plan.state.crystal(&data.dispersion)?;
    let state = plan.state.build(&data.dispersion)?;
    out.write_json("state.json", &state_summary(&state, &crystal, plan)?)?;
    match plan.scenario {
        Scenario::Fig1 | Scenario::Fig2 => {
            write_state(out, "", &state)?;
            write_hom(out, "", &state, plan)?;
        }
        Scenario::Fig3 | Scenario::Fig4 => {
            write_notch(out, &state, &plan.notch.expect("preset notch"), plan)?;
        }
        Scenario::Fig5 => write_sweep(out, &state, &plan.notch.expect("preset notch"), plan)?,
        Scenario::Fig7 => write_absorption(
            out,
            &state,
            plan.sample.as_ref().expect("preset sample"),
            plan,
        )?,
        Scenario::Custom => {
            match &plan.notch {
                Some(n) => write_notch(out, &state, n, plan)?,
                None => {
                    write_state(out, "", &state)?;
                    write_hom(out, "", &state, plan)?;
                }
            }
            if let Some(sample) = &plan.sample {
                if sample.sigma_e_cm2.is_some() {
                    out.write_json(
                        "detection.json",
                        &DetectionSummary {
                            sample: sample.clone(),
                            budget: is_detectable(sample, plan.r_in, plan.detector.fano)?,
                        },
                    )?;
                }
                if plan.noise.is_some() {
                    write_absorption(out, &state, sample, plan)?;
                }
            }
        }
        Scenario::Table1 => unreachable!(),
    }
    Ok(())
}

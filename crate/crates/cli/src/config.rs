//! Run configuration: TOML file, scenario presets and dotted overrides.
//!
//! Precedence, lowest first: scenario preset, config file, `--set`
//! overrides, dedicated flags (`--scenario`, `--seed`, `--output-dir`,
//! `--pump-sigma-nm`).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use etpa_core::absorption::{NotchFilterSpec, NotchMode};
use etpa_core::biphoton::DEFAULT_GRID_POINTS;
use etpa_core::budget::{DetectorModel, SampleSpec, SourceBudget};
use etpa_core::dispersion::{Axis, DispersionTable, Process};
use etpa_core::hom::{DEFAULT_N_TAU, DEFAULT_TAU_MAX};
use etpa_core::noisesim::{NoiseModel, NoiseRunConfig, DEFAULT_CHANNEL_WIDTH_NM, DEFAULT_FRAMES};
use etpa_core::samples::SampleLibrary;
use etpa_core::scenarios::{
    StateSetup, CRYSTAL_LENGTH_M, FILTER_CENTER_NM, FILTER_WIDTH_NM, PULSED_PUMP_SIGMA_NM,
    PUMP_WAVELENGTH_NM,
};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig7,
    Table1,
    Custom,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::Fig1,
        Scenario::Fig2,
        Scenario::Fig3,
        Scenario::Fig4,
        Scenario::Fig5,
        Scenario::Fig7,
        Scenario::Table1,
        Scenario::Custom,
    ];

    pub fn describe(&self) -> &'static str {
        match self {
            Scenario::Fig1 => "type-0 JSI, marginals and HOM interferogram",
            Scenario::Fig2 => "type-II JSI, marginals and HOM interferogram",
            Scenario::Fig3 => {
                "type-0 state through a two-photon notch: JSI, marginals, HOM before/after"
            }
            Scenario::Fig4 => {
                "type-II state through a two-photon notch: JSI, marginals, HOM before/after"
            }
            Scenario::Fig5 => "notch bandwidth/centre sweep of the downstream HOM visibility",
            Scenario::Fig7 => {
                "noisy accumulated measurement of the absorbed spectrum for one sample"
            }
            Scenario::Table1 => "photon budget, detection limits and the ETPA cross-section table",
            Scenario::Custom => "user-defined state with optional notch, sample and noise sections",
        }
    }

    fn process(&self) -> Process {
        match self {
            Scenario::Fig1 | Scenario::Fig3 => Process::Type0,
            _ => Process::TypeII,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    pub lambda_p0_nm: Option<f64>,
    pub sigma_p_nm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSection {
    /// `type0` or `type2`
    pub process: Option<String>,
    pub length_mm: Option<f64>,
    /// solved for degenerate phase matching when absent
    pub poling_period_um: Option<f64>,
    /// `[pump, signal, idler]`
    pub axes: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub center_nm: Option<f64>,
    pub width_nm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NotchSection {
    pub lambda_n0_nm: Option<f64>,
    pub sigma_n_nm: Option<f64>,
    pub eta: Option<f64>,
    /// `intensity` or `amplitude`
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    /// profile from the sample library; explicit fields override it
    pub name: Option<String>,
    pub concentration_mm: Option<f64>,
    pub path_length_cm: Option<f64>,
    pub sigma_e_cm2: Option<f64>,
    pub sigma_c_gm: Option<f64>,
    /// use the per-row concentration instead of the library's effective one
    pub strict_concentration: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub avg_power_mw: Option<f64>,
    pub rep_rate_mhz: Option<f64>,
    pub pulse_duration_fs: Option<f64>,
    pub pump_wavelength_nm: Option<f64>,
    pub spdc_efficiency: Option<f64>,
    pub beam_waist_radius_um: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub dark1: Option<f64>,
    pub dark2: Option<f64>,
    pub accidental: Option<f64>,
    pub fano: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    /// pairs/s reaching the sample
    pub r_in: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomSection {
    pub tau_max_fs: Option<f64>,
    pub n_tau: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub sigma_n_nm: Option<Vec<f64>>,
    pub lambda_n0_nm: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub n_frames: Option<usize>,
    pub integration_time_s: Option<f64>,
    /// calibrated from the noise floor when absent
    pub per_bin_noise_sigma: Option<f64>,
    pub channel_width_nm: Option<f64>,
    /// `gaussian` or `poisson`
    pub model: Option<String>,
    pub include_jsi: Option<bool>,
    pub background_region: Option<Vec<[usize; 2]>>,
}

/// The configuration file, every key optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub pump: Option<PumpSection>,
    pub crystal: Option<CrystalSection>,
    pub grid: Option<GridSection>,
    pub filter: Option<FilterSection>,
    pub notch: Option<NotchSection>,
    pub sample: Option<SampleSection>,
    pub source: Option<SourceSection>,
    pub detector: Option<DetectorSection>,
    pub budget: Option<BudgetSection>,
    pub hom: Option<HomSection>,
    pub sweep: Option<SweepSection>,
    pub noise: Option<NoiseSection>,
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub pump_sigma_nm: Option<f64>,
    /// `dotted.key=value`
    pub set: Vec<String>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let place = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                    format!(" (line {line})")
                })
                .unwrap_or_default();
            CliError::Config(format!("{origin}{place}: {}", e.message()))
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Applies `--set` pairs, then the dedicated flags.
    pub fn apply(self, ov: &Overrides) -> Result<Self, CliError> {
        let mut value =
            toml::Value::try_from(&self).map_err(|e| CliError::Config(e.to_string()))?;
        for pair in &ov.set {
            let (key, raw) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set `{pair}`: expected key=value")))?;
            set_dotted(&mut value, key.trim(), parse_scalar(raw.trim()))?;
        }
        let mut cfg: RunConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(format!("--set: {}", e.message())))?;
        if let Some(s) = ov.scenario {
            cfg.scenario = Some(s);
        }
        if let Some(s) = ov.seed {
            cfg.seed = Some(s);
        }
        if let Some(d) = &ov.output_dir {
            cfg.output_dir = Some(d.clone());
        }
        if let Some(s) = ov.pump_sigma_nm {
            cfg.pump.get_or_insert_with(Default::default).sigma_p_nm = Some(s);
        }
        Ok(cfg)
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_dotted(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("--set: malformed key `{key}`")));
    }
    let mut cur = root;
    for p in &parts[..parts.len() - 1] {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set: `{key}` crosses a non-table value")))?;
        cur = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    cur.as_table_mut()
        .ok_or_else(|| CliError::Config(format!("--set: `{key}` crosses a non-table value")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Validated, fully populated run description.
#[derive(Debug, Clone)]
pub struct Plan {
    pub scenario: Scenario,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub state: StateSetup,
    pub filter_center_nm: f64,
    pub filter_width_nm: f64,
    pub notch: Option<NotchFilterSpec>,
    pub sample: Option<SampleSpec>,
    pub sample_library: SampleLibrary,
    pub strict_concentration: bool,
    pub source: SourceBudget,
    pub detector: DetectorModel,
    pub r_in: f64,
    pub tau_max_s: f64,
    pub n_tau: usize,
    pub sweep_sigma_n_nm: Vec<f64>,
    pub sweep_lambda_n0_nm: Vec<f64>,
    pub noise: Option<NoiseRunConfig>,
    pub calibrate_noise: bool,
    /// the configuration with every default filled in
    pub echo: RunConfig,
}

/// Loaded data files.
pub struct DataSet {
    pub dispersion: DispersionTable,
    pub samples: SampleLibrary,
}

fn check(cond: bool, field: &str, reason: &str) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "invalid parameter `{field}`: {reason}"
        )))
    }
}

/// Drops the round-off of a unit conversion so the echo reads back exactly.
fn to_unit(x: f64) -> f64 {
    format!("{x:.12e}").parse().expect("formatted float")
}

fn domain<T>(r: etpa_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(e.to_string()))
}

fn parse<T: FromStr<Err = etpa_core::EtpaError>>(s: &str) -> Result<T, CliError> {
    domain(s.parse())
}

impl RunConfig {
    /// Fills defaults for the scenario and validates every section.
    pub fn resolve(&self, data: &DataSet) -> Result<Plan, CliError> {
        let scenario = self.scenario.ok_or_else(|| {
            CliError::Config(
                "missing field `scenario` (pass --scenario or set it in the config)".into(),
            )
        })?;
        let custom = scenario == Scenario::Custom;
        if custom {
            if self.crystal.is_none() {
                return Err(CliError::Config(
                    "scenario `custom` requires the `crystal` section".into(),
                ));
            }
            if self.pump.is_none() {
                return Err(CliError::Config(
                    "scenario `custom` requires the `pump` section".into(),
                ));
            }
        }

        let pump = self.pump.clone().unwrap_or_default();
        let pump = PumpSection {
            lambda_p0_nm: Some(pump.lambda_p0_nm.unwrap_or(PUMP_WAVELENGTH_NM)),
            sigma_p_nm: Some(pump.sigma_p_nm.unwrap_or(PULSED_PUMP_SIGMA_NM)),
        };

        let crystal = self.crystal.clone().unwrap_or_default();
        let process = match &crystal.process {
            Some(p) => parse::<Process>(p)?,
            None if custom => {
                return Err(CliError::Config("missing field `crystal.process`".into()));
            }
            None => scenario.process(),
        };
        let length_mm = match crystal.length_mm {
            Some(l) => l,
            None if custom => {
                return Err(CliError::Config("missing field `crystal.length_mm`".into()));
            }
            None => CRYSTAL_LENGTH_M * 1e3,
        };
        check(length_mm > 0.0, "crystal.length_mm", "must be > 0")?;
        if let Some(p) = crystal.poling_period_um {
            check(p > 0.0, "crystal.poling_period_um", "must be > 0")?;
        }
        let axes: [Axis; 3] = match &crystal.axes {
            Some(v) => {
                check(
                    v.len() == 3,
                    "crystal.axes",
                    "expected [pump, signal, idler]",
                )?;
                [parse(&v[0])?, parse(&v[1])?, parse(&v[2])?]
            }
            None => etpa_core::dispersion::CrystalSpec::default_axes(process),
        };
        let process_name = match process {
            Process::Type0 => "type0",
            Process::TypeII => "type2",
        };
        let crystal = CrystalSection {
            process: Some(process_name.into()),
            length_mm: Some(length_mm),
            poling_period_um: crystal.poling_period_um,
            axes: Some(axes.iter().map(|a| a.to_string()).collect()),
        };

        let grid = GridSection {
            n_points: Some(
                self.grid
                    .as_ref()
                    .and_then(|g| g.n_points)
                    .unwrap_or(DEFAULT_GRID_POINTS),
            ),
        };
        check(
            grid.n_points.unwrap() >= 16,
            "grid.n_points",
            "must be >= 16",
        )?;

        let mut state = StateSetup::new(process, pump.sigma_p_nm.unwrap());
        state.lambda_p0_nm = pump.lambda_p0_nm.unwrap();
        state.length_m = length_mm * 1e-3;
        state.poling_period_m = crystal.poling_period_um.map(|p| p * 1e-6);
        state.axes = Some(axes);
        state.n_points = grid.n_points.unwrap();
        domain(state.pump())?;
        domain(etpa_core::dispersion::CrystalSpec::new(
            state.length_m,
            state.poling_period_m.unwrap_or(10e-6),
            process,
            axes,
            &data.dispersion,
        ))?;

        let filter = self.filter.clone().unwrap_or_default();
        let filter = FilterSection {
            center_nm: Some(filter.center_nm.unwrap_or(FILTER_CENTER_NM)),
            width_nm: Some(filter.width_nm.unwrap_or(FILTER_WIDTH_NM)),
        };
        check(
            filter.width_nm.unwrap() > 0.0,
            "filter.width_nm",
            "must be > 0",
        )?;
        check(
            filter.center_nm.unwrap() > 0.0,
            "filter.center_nm",
            "must be > 0",
        )?;

        let sample_lib = &data.samples;
        let wants_sample = matches!(scenario, Scenario::Fig7) || self.sample.is_some();
        let (sample, sample_echo, strict, profile_notch) = if wants_sample {
            let raw = self.sample.clone().unwrap_or_default();
            let name = raw
                .name
                .clone()
                .or_else(|| (scenario == Scenario::Fig7).then(|| "Rh6G (He)".to_string()));
            let profile = match &name {
                Some(n) => Some(
                    sample_lib
                        .get(n)
                        .map_err(|e| CliError::Config(format!("sample.name: {e}")))?
                        .clone(),
                ),
                None => None,
            };
            let strict = raw.strict_concentration.unwrap_or(false);
            let conc_mm = raw.concentration_mm.or_else(|| {
                profile.as_ref().map(|p| {
                    if strict {
                        p.concentration_mm
                    } else {
                        sample_lib.effective_concentration_mm
                    }
                })
            });
            let conc_mm = conc_mm.ok_or_else(|| {
                CliError::Config("missing field `sample.concentration_mm`".into())
            })?;
            let spec = SampleSpec {
                name: name.clone().unwrap_or_else(|| "sample".into()),
                concentration_molar: conc_mm * 1e-3,
                path_length_cm: raw.path_length_cm.unwrap_or(sample_lib.path_length_cm),
                sigma_e_cm2: raw
                    .sigma_e_cm2
                    .or(profile.as_ref().and_then(|p| p.sigma_e_cm2)),
                sigma_c_gm: raw
                    .sigma_c_gm
                    .or(profile.as_ref().and_then(|p| p.sigma_c_gm)),
            };
            domain(spec.validate())?;
            let echo = SampleSection {
                name,
                concentration_mm: Some(conc_mm),
                path_length_cm: Some(spec.path_length_cm),
                sigma_e_cm2: spec.sigma_e_cm2,
                sigma_c_gm: spec.sigma_c_gm,
                strict_concentration: Some(strict),
            };
            (
                Some(spec),
                Some(echo),
                strict,
                profile.and_then(|p| p.notch),
            )
        } else {
            let strict = self
                .sample
                .as_ref()
                .and_then(|s| s.strict_concentration)
                .unwrap_or(false);
            (None, None, strict, None)
        };

        let wants_notch = matches!(
            scenario,
            Scenario::Fig3 | Scenario::Fig4 | Scenario::Fig5 | Scenario::Fig7
        ) || self.notch.is_some();
        let (notch, notch_echo) = if wants_notch {
            let raw = self.notch.clone().unwrap_or_default();
            let (dl, ds, de) = match (scenario, profile_notch) {
                (Scenario::Fig7, Some(b)) => (b.lambda_n0_nm, b.sigma_n_nm, 1.0),
                (_, Some(b)) if custom => (b.lambda_n0_nm, b.sigma_n_nm, 0.9),
                _ => (810.0, 1.0, 0.9),
            };
            let mode: NotchMode = match &raw.mode {
                Some(m) => parse(m)?,
                None => NotchMode::Intensity,
            };
            let spec = domain(NotchFilterSpec::new(
                raw.lambda_n0_nm.unwrap_or(dl),
                raw.sigma_n_nm.unwrap_or(ds),
                raw.eta.unwrap_or(de),
                mode,
            ))?;
            let echo = NotchSection {
                lambda_n0_nm: Some(spec.lambda_n0_nm),
                sigma_n_nm: Some(spec.sigma_n_nm),
                eta: Some(spec.eta),
                mode: Some(mode.to_string()),
            };
            (Some(spec), Some(echo))
        } else {
            (None, None)
        };

        let d = SourceBudget::default();
        let src = self.source.clone().unwrap_or_default();
        let source_echo = SourceSection {
            avg_power_mw: Some(src.avg_power_mw.unwrap_or(to_unit(d.avg_power_w * 1e3))),
            rep_rate_mhz: Some(src.rep_rate_mhz.unwrap_or(to_unit(d.rep_rate_hz * 1e-6))),
            pulse_duration_fs: Some(
                src.pulse_duration_fs
                    .unwrap_or(to_unit(d.pulse_duration_s * 1e15)),
            ),
            pump_wavelength_nm: Some(src.pump_wavelength_nm.unwrap_or(d.pump_wavelength_nm)),
            spdc_efficiency: Some(src.spdc_efficiency.unwrap_or(d.spdc_efficiency)),
            beam_waist_radius_um: Some(
                src.beam_waist_radius_um
                    .unwrap_or(to_unit(d.beam_waist_radius_cm * 1e4)),
            ),
        };
        let source = SourceBudget {
            avg_power_w: source_echo.avg_power_mw.unwrap() * 1e-3,
            rep_rate_hz: source_echo.rep_rate_mhz.unwrap() * 1e6,
            pulse_duration_s: source_echo.pulse_duration_fs.unwrap() * 1e-15,
            pump_wavelength_nm: source_echo.pump_wavelength_nm.unwrap(),
            spdc_efficiency: source_echo.spdc_efficiency.unwrap(),
            beam_waist_radius_cm: source_echo.beam_waist_radius_um.unwrap() * 1e-4,
        };
        domain(source.validate())?;

        let d = DetectorModel::default();
        let det = self.detector.clone().unwrap_or_default();
        let detector = DetectorModel {
            beta1: det.beta1.unwrap_or(d.beta1),
            beta2: det.beta2.unwrap_or(d.beta2),
            dark1: det.dark1.unwrap_or(d.dark1),
            dark2: det.dark2.unwrap_or(d.dark2),
            accidental: det.accidental.unwrap_or(d.accidental),
            fano: det.fano.unwrap_or(d.fano),
        };
        domain(detector.validate())?;
        let detector_echo = DetectorSection {
            beta1: Some(detector.beta1),
            beta2: Some(detector.beta2),
            dark1: Some(detector.dark1),
            dark2: Some(detector.dark2),
            accidental: Some(detector.accidental),
            fano: Some(detector.fano),
        };

        let r_in = self.budget.as_ref().and_then(|b| b.r_in).unwrap_or(7.99e7);
        check(r_in > 0.0 && r_in.is_finite(), "budget.r_in", "must be > 0")?;

        let hom = self.hom.clone().unwrap_or_default();
        let hom = HomSection {
            tau_max_fs: Some(hom.tau_max_fs.unwrap_or(to_unit(DEFAULT_TAU_MAX * 1e15))),
            n_tau: Some(hom.n_tau.unwrap_or(DEFAULT_N_TAU)),
        };
        check(
            hom.tau_max_fs.unwrap() > 0.0,
            "hom.tau_max_fs",
            "must be > 0",
        )?;
        check(hom.n_tau.unwrap() >= 3, "hom.n_tau", "must be >= 3")?;

        let sweep = self.sweep.clone().unwrap_or_default();
        let sweep = SweepSection {
            sigma_n_nm: Some(
                sweep
                    .sigma_n_nm
                    .unwrap_or_else(|| (1..=30).map(f64::from).collect()),
            ),
            lambda_n0_nm: Some(sweep.lambda_n0_nm.unwrap_or_else(|| vec![810.0, 816.0])),
        };
        let sweep_sigma = sweep.sigma_n_nm.clone().unwrap();
        let sweep_lambda = sweep.lambda_n0_nm.clone().unwrap();
        check(
            !sweep_sigma.is_empty(),
            "sweep.sigma_n_nm",
            "must be nonempty",
        )?;
        check(
            !sweep_lambda.is_empty(),
            "sweep.lambda_n0_nm",
            "must be nonempty",
        )?;
        check(
            sweep_sigma.iter().all(|&s| s > 0.0),
            "sweep.sigma_n_nm",
            "values must be > 0",
        )?;
        check(
            sweep_lambda.iter().all(|&s| s > 0.0),
            "sweep.lambda_n0_nm",
            "values must be > 0",
        )?;

        let seed = self.seed.unwrap_or(0);
        let wants_noise = scenario == Scenario::Fig7 || self.noise.is_some();
        let (noise, noise_echo, calibrate) = if wants_noise {
            let raw = self.noise.clone().unwrap_or_default();
            let model: NoiseModel = match raw.model.as_deref() {
                None | Some("gaussian") => NoiseModel::Gaussian,
                Some("poisson") => NoiseModel::Poisson,
                Some(other) => {
                    return Err(CliError::Config(format!(
                        "invalid parameter `noise.model`: unknown model `{other}` (expected gaussian or poisson)"
                    )))
                }
            };
            let cfg = NoiseRunConfig {
                n_frames: raw.n_frames.unwrap_or(DEFAULT_FRAMES),
                integration_time_s: raw.integration_time_s.unwrap_or(1.0),
                per_bin_noise_sigma: raw.per_bin_noise_sigma.unwrap_or(0.0),
                rng_seed: seed,
                channel_width_nm: raw.channel_width_nm.unwrap_or(DEFAULT_CHANNEL_WIDTH_NM),
                model,
                include_jsi: raw.include_jsi.unwrap_or(false),
                background_region: raw
                    .background_region
                    .clone()
                    .unwrap_or_default()
                    .into_iter()
                    .map(|[a, b]| (a, b))
                    .collect(),
            };
            domain(cfg.validate())?;
            let echo = NoiseSection {
                n_frames: Some(cfg.n_frames),
                integration_time_s: Some(cfg.integration_time_s),
                per_bin_noise_sigma: raw.per_bin_noise_sigma,
                channel_width_nm: Some(cfg.channel_width_nm),
                model: Some(match model {
                    NoiseModel::Gaussian => "gaussian".into(),
                    NoiseModel::Poisson => "poisson".into(),
                }),
                include_jsi: Some(cfg.include_jsi),
                background_region: raw.background_region.clone(),
            };
            (Some(cfg), Some(echo), raw.per_bin_noise_sigma.is_none())
        } else {
            (None, None, false)
        };
        if scenario == Scenario::Fig7 || (custom && noise.is_some()) {
            check(
                sample.is_some(),
                "sample",
                "a sample is required for the noise measurement",
            )?;
            check(
                sample.as_ref().is_some_and(|s| s.sigma_e_cm2.is_some()),
                "sample.sigma_e_cm2",
                "required for the noise measurement",
            )?;
        }

        let output_dir = self
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(scenario.to_string()));

        let echo = RunConfig {
            scenario: Some(scenario),
            seed: Some(seed),
            output_dir: Some(output_dir.clone()),
            pump: Some(pump),
            crystal: Some(crystal),
            grid: Some(grid),
            filter: Some(filter.clone()),
            notch: notch_echo,
            sample: sample_echo,
            source: Some(source_echo),
            detector: Some(detector_echo),
            budget: Some(BudgetSection { r_in: Some(r_in) }),
            hom: Some(hom.clone()),
            sweep: Some(sweep),
            noise: noise_echo,
        };

        Ok(Plan {
            scenario,
            seed,
            output_dir,
            state,
            filter_center_nm: filter.center_nm.unwrap(),
            filter_width_nm: filter.width_nm.unwrap(),
            notch,
            sample,
            sample_library: sample_lib.clone(),
            strict_concentration: strict,
            source,
            detector,
            r_in,
            tau_max_s: hom.tau_max_fs.unwrap() * 1e-15,
            n_tau: hom.n_tau.unwrap(),
            sweep_sigma_n_nm: sweep_sigma,
            sweep_lambda_n0_nm: sweep_lambda,
            noise,
            calibrate_noise: calibrate,
            echo,
        })
    }
}

impl Plan {
    /// Normalized TOML echo of the resolved configuration.
    pub fn echo_toml(&self) -> String {
        toml::to_string(&self.echo).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> DataSet {
        DataSet {
            dispersion: DispersionTable::ktp(),
            samples: SampleLibrary::builtin(),
        }
    }

    fn resolve(text: &str, set: &[&str]) -> Result<Plan, CliError> {
        let ov = Overrides {
            set: set.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        };
        RunConfig::from_toml_str(text, "test")?
            .apply(&ov)?
            .resolve(&data())
    }

    #[test]
    fn preset_defaults() {
        let p = resolve("scenario = \"fig2\"", &[]).unwrap();
        assert_eq!(p.state.process, Process::TypeII);
        assert_eq!(p.state.sigma_p_nm, 5.0);
        assert!(p.notch.is_none());
        let p = resolve("scenario = \"fig7\"", &[]).unwrap();
        let n = p.notch.unwrap();
        assert_eq!((n.lambda_n0_nm, n.sigma_n_nm), (816.0, 20.0));
        assert_eq!(p.sample.unwrap().name, "Rh6G (He)");
        assert!(p.calibrate_noise);
    }

    #[test]
    fn overrides_and_flags() {
        let p = resolve(
            "scenario = \"fig3\"\n[notch]\neta = 0.5",
            &["notch.eta=0.7", "pump.sigma_p_nm=0.1"],
        )
        .unwrap();
        assert_eq!(p.notch.unwrap().eta, 0.7);
        assert_eq!(p.state.sigma_p_nm, 0.1);
        let ov = Overrides {
            scenario: Some(Scenario::Fig1),
            pump_sigma_nm: Some(2.0),
            seed: Some(9),
            ..Default::default()
        };
        let p = RunConfig::default()
            .apply(&ov)
            .unwrap()
            .resolve(&data())
            .unwrap();
        assert_eq!(
            (p.scenario, p.state.sigma_p_nm, p.seed),
            (Scenario::Fig1, 2.0, 9)
        );
        let p = resolve("scenario = \"fig1\"", &["sample.name=AF455"]).unwrap();
        assert_eq!(p.sample.unwrap().name, "AF455");
    }

    #[test]
    fn field_level_errors() {
        let msg = |t: &str, s: &[&str]| resolve(t, s).unwrap_err().to_string();
        assert!(msg("scenario = \"fig3\"\n[notch]\neta = 1.3", &[]).contains("[0, 1]"));
        assert!(
            msg("scenario = \"fig1\"\n[pump]\nsigma_p_nm = 0.0", &[]).contains("pump.sigma_p_nm")
        );
        assert!(msg("scenario = \"custom\"\n[pump]\nsigma_p_nm = 1.0", &[]).contains("crystal"));
        assert!(msg("scenario = \"fig1\"\n[pump]\nsigma = 1.0", &[]).contains("line 3"));
        assert!(msg("scenario = \"fig1\"", &["pump.sigma_p_nm"]).contains("key=value"));
        assert!(msg("scenario = \"fig1\"", &["crystal.process=type9"]).contains("crystal.process"));
        assert!(msg("", &[]).contains("scenario"));
        assert!(msg("scenario = \"fig7\"", &["sample.name=RhB"]).contains("sample.sigma_e_cm2"));
    }

    #[test]
    fn echo_round_trips() {
        let p = resolve("scenario = \"fig7\"", &[]).unwrap();
        let again = RunConfig::from_toml_str(&p.echo_toml(), "echo")
            .unwrap()
            .resolve(&data())
            .unwrap();
        assert_eq!(again.echo_toml(), p.echo_toml());
    }
}

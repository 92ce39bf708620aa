//! Command-line driver: configuration, scenario runs and output files.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

use etpa_core::dispersion::{DispersionTable, KTP_SELLMEIER_TOML};
use etpa_core::samples::{SampleLibrary, SAMPLES_TOML};

use config::{DataSet, Overrides, Plan, RunConfig};
use error::CliError;
use output::{sha256_hex, InputEntry, OutputDir};

pub const SELLMEIER_FILE: &str = "ktp_sellmeier.toml";
pub const SAMPLES_FILE: &str = "samples.toml";

fn read_or_builtin(
    dir: Option<&Path>,
    file: &str,
    builtin: &str,
) -> Result<(String, String), CliError> {
    if let Some(path) = dir.map(|d| d.join(file)).filter(|p| p.exists()) {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        return Ok((text, path.display().to_string()));
    }
    Ok((builtin.to_string(), "builtin".to_string()))
}

/// Loads the dispersion and sample tables, from `dir` where present.
pub fn load_data(dir: Option<&Path>) -> Result<(DataSet, Vec<InputEntry>), CliError> {
    if let Some(d) = dir {
        if !d.is_dir() {
            return Err(CliError::Config(format!(
                "data directory {} does not exist",
                d.display()
            )));
        }
    }
    let (ktp, ktp_src) = read_or_builtin(dir, SELLMEIER_FILE, KTP_SELLMEIER_TOML)?;
    let (smp, smp_src) = read_or_builtin(dir, SAMPLES_FILE, SAMPLES_TOML)?;
    let data = DataSet {
        dispersion: DispersionTable::from_toml_str(&ktp)
            .map_err(|e| CliError::Config(format!("{ktp_src}: {e}")))?,
        samples: SampleLibrary::from_toml_str(&smp)
            .map_err(|e| CliError::Config(format!("{smp_src}: {e}")))?,
    };
    let inputs = vec![
        InputEntry {
            role: "sellmeier".into(),
            sha256: sha256_hex(ktp.as_bytes()),
            source: ktp_src,
        },
        InputEntry {
            role: "samples".into(),
            sha256: sha256_hex(smp.as_bytes()),
            source: smp_src,
        },
    ];
    Ok((data, inputs))
}

/// Reads the optional config file and applies the command-line overrides.
pub fn resolve(
    config: Option<&Path>,
    ov: &Overrides,
    data: &DataSet,
) -> Result<(Plan, Option<InputEntry>), CliError> {
    let (raw, entry) = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let cfg = RunConfig::from_toml_str(&text, &path.display().to_string())?;
            let entry = InputEntry {
                role: "config".into(),
                source: path.display().to_string(),
                sha256: sha256_hex(text.as_bytes()),
            };
            (cfg, Some(entry))
        }
        None => (RunConfig::default(), None),
    };
    Ok((raw.apply(ov)?.resolve(data)?, entry))
}

/// Runs one scenario and returns the output directory.
pub fn run(
    config: Option<&Path>,
    ov: &Overrides,
    data_dir: Option<&Path>,
) -> Result<PathBuf, CliError> {
    let (data, mut inputs) = load_data(data_dir)?;
    let (plan, cfg_entry) = resolve(config, ov, &data)?;
    inputs.extend(cfg_entry);
    inputs.push(InputEntry {
        role: "resolved_config".into(),
        source: "config.toml".into(),
        sha256: sha256_hex(plan.echo_toml().as_bytes()),
    });
    let mut out = OutputDir::create(&plan.output_dir)?;
    run::execute(&plan, &data, &mut out)?;
    let root = out.root().to_path_buf();
    out.finish(&plan.scenario.to_string(), plan.seed, &inputs)?;
    Ok(root)
}

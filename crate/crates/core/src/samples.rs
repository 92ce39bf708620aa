//! Sample profiles: concentration, cross-sections and two-photon band.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::absorption::{NotchFilterSpec, NotchMode};
use crate::budget::SampleSpec;
use crate::error::{EtpaError, Result};

pub const SAMPLES_TOML: &str = include_str!("../data/samples.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchBand {
    pub lambda_n0_nm: f64,
    pub sigma_n_nm: f64,
}

impl NotchBand {
    pub fn notch(&self, eta: f64, mode: NotchMode) -> Result<NotchFilterSpec> {
        NotchFilterSpec::new(self.lambda_n0_nm, self.sigma_n_nm, eta, mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleProfile {
    pub name: String,
    pub concentration_mm: f64,
    #[serde(default)]
    pub sigma_e_cm2: Option<f64>,
    #[serde(default)]
    pub sigma_c_gm: Option<f64>,
    #[serde(default)]
    pub reference: Option<String>,
    #[serde(default)]
    pub table1: bool,
    #[serde(default)]
    pub notch: Option<NotchBand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLibrary {
    pub version: u32,
    /// mM
    pub effective_concentration_mm: f64,
    pub path_length_cm: f64,
    #[serde(rename = "sample")]
    pub samples: Vec<SampleProfile>,
}

impl SampleLibrary {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let lib: SampleLibrary =
            toml::from_str(text).map_err(|e| EtpaError::Data(e.message().to_string()))?;
        if lib.samples.is_empty() {
            return Err(EtpaError::Data("no samples".into()));
        }
        for s in &lib.samples {
            if lib.samples.iter().filter(|o| o.name == s.name).count() > 1 {
                return Err(EtpaError::Data(format!("sample `{}` listed twice", s.name)));
            }
            if let Some(band) = s.notch {
                band.notch(0.0, NotchMode::Intensity)
                    .map_err(|e| EtpaError::Data(format!("sample `{}`: {e}", s.name)))?;
            }
            for strict in [false, true] {
                lib.spec(s, strict)
                    .validate()
                    .map_err(|e| EtpaError::Data(format!("sample `{}`: {e}", s.name)))?;
            }
        }
        Ok(lib)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EtpaError::Data(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// The shipped profile set.
    pub fn builtin() -> Self {
        Self::from_toml_str(SAMPLES_TOML).expect("embedded sample library is valid")
    }

    pub fn get(&self, name: &str) -> Result<&SampleProfile> {
        self.samples
            .iter()
            .find(|s| s.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| EtpaError::Data(format!("unknown sample `{name}`")))
    }

    /// Budget view of `profile`, at its own concentration when `strict`,
    /// else at the library's effective concentration.
    pub fn spec(&self, profile: &SampleProfile, strict: bool) -> SampleSpec {
        let mm = if strict {
            profile.concentration_mm
        } else {
            self.effective_concentration_mm
        };
        SampleSpec {
            name: profile.name.clone(),
            concentration_molar: mm * 1e-3,
            path_length_cm: self.path_length_cm,
            sigma_e_cm2: profile.sigma_e_cm2,
            sigma_c_gm: profile.sigma_c_gm,
        }
    }

    pub fn table1_specs(&self, strict: bool) -> Vec<SampleSpec> {
        self.samples
            .iter()
            .filter(|s| s.table1)
            .map(|s| self.spec(s, strict))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_library() {
        let lib = SampleLibrary::builtin();
        assert_eq!(lib.table1_specs(false).len(), 8);
        let rhb = lib.get("rhb").unwrap();
        assert!(rhb.sigma_e_cm2.is_none());
        let band = rhb.notch.unwrap();
        assert_eq!((band.lambda_n0_nm, band.sigma_n_nm), (816.0, 20.0));
        let s = lib.spec(lib.get("AF455").unwrap(), false);
        assert!((s.concentration_molar - 0.058).abs() < 1e-15);
        let s = lib.spec(lib.get("AF455").unwrap(), true);
        assert!((s.concentration_molar - 0.0015).abs() < 1e-15);
        assert!(lib.get("water").is_err());
    }

    #[test]
    fn rejects_bad_files() {
        assert!(SampleLibrary::from_toml_str("version = 1").is_err());
        let neg = r#"
version = 1
effective_concentration_mm = 58.0
path_length_cm = 1.0
[[sample]]
name = "x"
concentration_mm = -1.0
"#;
        assert!(SampleLibrary::from_toml_str(neg).is_err());
        let dup = r#"
version = 1
effective_concentration_mm = 58.0
path_length_cm = 1.0
[[sample]]
name = "x"
concentration_mm = 1.0
[[sample]]
name = "x"
concentration_mm = 2.0
"#;
        assert!(SampleLibrary::from_toml_str(dup).is_err());
        let bad_notch = r#"
version = 1
effective_concentration_mm = 58.0
path_length_cm = 1.0
[[sample]]
name = "x"
concentration_mm = 1.0
notch = { lambda_n0_nm = 816.0, sigma_n_nm = 0.0 }
"#;
        assert!(SampleLibrary::from_toml_str(bad_notch).is_err());
    }
}

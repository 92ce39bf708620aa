//! Refractive indices, wavevectors and quasi-phase-matching for
//! periodically poled KTP.
//!
//! Index data lives in a small TOML file (one table per polarization axis)
//! so the coefficient set can be audited or swapped without recompiling.
//! The shipped set is embedded and used when no path is given.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constants::{nm_from_omega, C};
use crate::error::{EtpaError, Result};

/// Coefficient file shipped with the crate.
pub const KTP_SELLMEIER_TOML: &str = include_str!("../data/ktp_sellmeier.toml");

/// Crystal polarization axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        };
        f.write_str(s)
    }
}

impl FromStr for Axis {
    type Err = EtpaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(EtpaError::invalid(
                "axis",
                format!("unknown axis `{other}`"),
            )),
        }
    }
}

/// Sellmeier model `n² = A + B·λ²/(λ² − C²) − D·λ²` with λ in µm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexModel {
    pub axis: Axis,
    /// `[A, B, C, D]`
    pub coefficients: [f64; 4],
    /// Inclusive validity window in nm.
    pub valid_range_nm: [f64; 2],
    pub citation: String,
}

impl IndexModel {
    fn check_range(&self, wavelength_nm: f64) -> Result<()> {
        let [lo, hi] = self.valid_range_nm;
        if wavelength_nm.is_finite() && wavelength_nm >= lo && wavelength_nm <= hi {
            Ok(())
        } else {
            Err(EtpaError::OutOfRange {
                axis: self.axis.to_string(),
                wavelength_nm,
                min_nm: lo,
                max_nm: hi,
            })
        }
    }

    fn n_squared(&self, um: f64) -> f64 {
        let [a, b, c, d] = self.coefficients;
        let l2 = um * um;
        a + b * l2 / (l2 - c * c) - d * l2
    }

    /// Phase index at `wavelength_nm`.
    pub fn index(&self, wavelength_nm: f64) -> Result<f64> {
        self.check_range(wavelength_nm)?;
        Ok(self.n_squared(wavelength_nm * 1e-3).sqrt())
    }

    /// Group index `n − λ·dn/dλ`, from the analytic derivative of the
    /// Sellmeier form.
    pub fn group_index(&self, wavelength_nm: f64) -> Result<f64> {
        self.check_range(wavelength_nm)?;
        let [_, b, c, d] = self.coefficients;
        let um = wavelength_nm * 1e-3;
        let l2 = um * um;
        let n = self.n_squared(um).sqrt();
        // d(n²)/dλ
        let dn2 = -2.0 * b * c * c * um / ((l2 - c * c) * (l2 - c * c)) - 2.0 * d * um;
        let dn = dn2 / (2.0 * n);
        Ok(n - um * dn)
    }

    fn validate(&self) -> Result<()> {
        let [lo, hi] = self.valid_range_nm;
        if !(lo > 0.0 && hi > lo) {
            return Err(EtpaError::Data(format!(
                "axis {}: valid_range_nm must be an increasing positive interval",
                self.axis
            )));
        }
        // Pole of the resonance term must sit below the window.
        let pole_nm = self.coefficients[2].abs() * 1e3;
        if pole_nm >= lo {
            return Err(EtpaError::Data(format!(
                "axis {}: resonance at {pole_nm} nm falls inside the validity window",
                self.axis
            )));
        }
        for wl in [lo, 0.5 * (lo + hi), hi] {
            let n2 = self.n_squared(wl * 1e-3);
            if !(n2 > 1.0) {
                return Err(EtpaError::Data(format!(
                    "axis {}: index at {wl} nm is not real and > 1",
                    self.axis
                )));
            }
        }
        Ok(())
    }
}

/// Evaluates `model` at `wavelength_nm`.
pub fn refractive_index(wavelength_nm: f64, model: &IndexModel) -> Result<f64> {
    model.index(wavelength_nm)
}

#[derive(Debug, Deserialize)]
struct IndexFile {
    crystal: String,
    #[serde(default)]
    version: Option<u32>,
    axis: Vec<IndexModel>,
}

/// The per-axis index models of one crystal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionTable {
    pub crystal: String,
    pub version: Option<u32>,
    pub models: BTreeMap<Axis, IndexModel>,
}

impl DispersionTable {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: IndexFile =
            toml::from_str(text).map_err(|e| EtpaError::Data(e.message().to_string()))?;
        let mut models = BTreeMap::new();
        for m in file.axis {
            m.validate()?;
            if models.insert(m.axis, m.clone()).is_some() {
                return Err(EtpaError::Data(format!("axis {} listed twice", m.axis)));
            }
        }
        if models.is_empty() {
            return Err(EtpaError::Data("no axis tables".into()));
        }
        Ok(DispersionTable {
            crystal: file.crystal,
            version: file.version,
            models,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EtpaError::Data(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// The embedded KTP coefficient set.
    pub fn ktp() -> Self {
        Self::from_toml_str(KTP_SELLMEIER_TOML).expect("embedded KTP table is valid")
    }

    pub fn model(&self, axis: Axis) -> Result<&IndexModel> {
        self.models
            .get(&axis)
            .ok_or_else(|| EtpaError::Data(format!("{} has no {axis}-axis model", self.crystal)))
    }
}

/// SPDC polarization configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Process {
    Type0,
    TypeII,
}

impl FromStr for Process {
    type Err = EtpaError;

    fn from_str(s: &str) -> Result<Self> {
        match s
            .trim()
            .to_ascii_lowercase()
            .replace(['-', '_'], "")
            .as_str()
        {
            "type0" | "0" => Ok(Process::Type0),
            "type2" | "typeii" | "ii" | "2" => Ok(Process::TypeII),
            other => Err(EtpaError::invalid(
                "crystal.process",
                format!("unknown process `{other}` (expected type0 or type2)"),
            )),
        }
    }
}

/// Geometry and axis assignment of a periodically poled crystal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalSpec {
    pub length_m: f64,
    pub poling_period_m: f64,
    pub process: Process,
    pub pump_axis: Axis,
    pub signal_axis: Axis,
    pub idler_axis: Axis,
    pub index_models: BTreeMap<Axis, IndexModel>,
}

impl CrystalSpec {
    pub fn new(
        length_m: f64,
        poling_period_m: f64,
        process: Process,
        axes: [Axis; 3],
        table: &DispersionTable,
    ) -> Result<Self> {
        if !(length_m > 0.0 && length_m.is_finite()) {
            return Err(EtpaError::invalid("crystal.length_m", "must be > 0"));
        }
        if !(poling_period_m > 0.0 && poling_period_m.is_finite()) {
            return Err(EtpaError::invalid("crystal.poling_period_m", "must be > 0"));
        }
        let [pump_axis, signal_axis, idler_axis] = axes;
        match process {
            Process::Type0 if !(pump_axis == signal_axis && signal_axis == idler_axis) => {
                return Err(EtpaError::invalid(
                    "crystal.axes",
                    "type-0 requires pump, signal and idler on the same axis",
                ));
            }
            Process::TypeII if signal_axis == idler_axis => {
                return Err(EtpaError::invalid(
                    "crystal.axes",
                    "type-II requires orthogonal signal and idler axes",
                ));
            }
            _ => {}
        }
        let mut index_models = BTreeMap::new();
        for axis in axes {
            index_models.insert(axis, table.model(axis)?.clone());
        }
        Ok(CrystalSpec {
            length_m,
            poling_period_m,
            process,
            pump_axis,
            signal_axis,
            idler_axis,
            index_models,
        })
    }

    /// Type-0 with everything on z (the d33 configuration).
    pub fn type0(table: &DispersionTable, length_m: f64, poling_period_m: f64) -> Result<Self> {
        Self::new(
            length_m,
            poling_period_m,
            Process::Type0,
            [Axis::Z; 3],
            table,
        )
    }

    /// Type-II with the default assignment: pump y, signal y, idler z.
    pub fn type_ii(table: &DispersionTable, length_m: f64, poling_period_m: f64) -> Result<Self> {
        Self::new(
            length_m,
            poling_period_m,
            Process::TypeII,
            [Axis::Y, Axis::Y, Axis::Z],
            table,
        )
    }

    /// Default axis triple for `process`.
    pub fn default_axes(process: Process) -> [Axis; 3] {
        match process {
            Process::Type0 => [Axis::Z; 3],
            Process::TypeII => [Axis::Y, Axis::Y, Axis::Z],
        }
    }

    pub fn with_poling_period(mut self, poling_period_m: f64) -> Result<Self> {
        if !(poling_period_m > 0.0 && poling_period_m.is_finite()) {
            return Err(EtpaError::invalid("crystal.poling_period_m", "must be > 0"));
        }
        self.poling_period_m = poling_period_m;
        Ok(self)
    }

    fn model(&self, axis: Axis) -> &IndexModel {
        // Construction guarantees every assigned axis is present.
        &self.index_models[&axis]
    }

    /// `k = n(ω)·ω/c` on `axis`, rad/m.
    pub fn wavenumber(&self, omega: f64, axis: Axis) -> Result<f64> {
        let n = self.model(axis).index(nm_from_omega(omega))?;
        Ok(n * omega / C)
    }

    /// `dk/dω = n_g/c` on `axis`, s/m.
    pub fn inverse_group_velocity(&self, omega: f64, axis: Axis) -> Result<f64> {
        Ok(self.model(axis).group_index(nm_from_omega(omega))? / C)
    }

    /// Pump, signal and idler mismatch without the grating term.
    fn material_mismatch(&self, omega_s: f64, omega_i: f64) -> Result<f64> {
        let kp = self.wavenumber(omega_s + omega_i, self.pump_axis)?;
        let ks = self.wavenumber(omega_s, self.signal_axis)?;
        let ki = self.wavenumber(omega_i, self.idler_axis)?;
        Ok(kp - ks - ki)
    }
}

/// Collinear mismatch `Δk = k_p(ω_s+ω_i) − k_s(ω_s) − k_i(ω_i) − 2π/Λ`, rad/m.
pub fn phase_mismatch(omega_s: f64, omega_i: f64, crystal: &CrystalSpec) -> Result<f64> {
    if !(omega_s > 0.0 && omega_i > 0.0) {
        return Err(EtpaError::invalid("omega", "frequencies must be positive"));
    }
    Ok(crystal.material_mismatch(omega_s, omega_i)? - 2.0 * PI / crystal.poling_period_m)
}

/// `∂Δk/∂ω_s` and `∂Δk/∂ω_i` from group indices, s/m.
pub fn phase_mismatch_gradient(
    omega_s: f64,
    omega_i: f64,
    crystal: &CrystalSpec,
) -> Result<(f64, f64)> {
    let kp1 = crystal.inverse_group_velocity(omega_s + omega_i, crystal.pump_axis)?;
    let ks1 = crystal.inverse_group_velocity(omega_s, crystal.signal_axis)?;
    let ki1 = crystal.inverse_group_velocity(omega_i, crystal.idler_axis)?;
    Ok((kp1 - ks1, kp1 - ki1))
}

/// `sin(x)/x`, with a series branch near zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `Φ = sinc(L·Δk/2)`.
pub fn phase_matching_function(omega_s: f64, omega_i: f64, crystal: &CrystalSpec) -> Result<f64> {
    let dk = phase_mismatch(omega_s, omega_i, crystal)?;
    Ok(sinc(0.5 * crystal.length_m * dk))
}

/// Lower and upper edges of the poling-period search bracket, m.
pub const POLING_BRACKET_M: (f64, f64) = (0.5e-6, 100e-6);

/// Finds the poling period that phase-matches degenerate down-conversion of
/// `omega_p0` by bisection over [`POLING_BRACKET_M`].
pub fn solve_poling_period(crystal: &CrystalSpec, omega_p0: f64) -> Result<f64> {
    let w = 0.5 * omega_p0;
    let material = crystal.material_mismatch(w, w)?;
    let residual = |period: f64| material - 2.0 * PI / period;

    let (mut lo, mut hi) = POLING_BRACKET_M;
    let (f_lo, f_hi) = (residual(lo), residual(hi));
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(EtpaError::NoRoot {
            min_m: lo,
            max_m: hi,
        });
    }
    let rising = f_hi > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = residual(mid);
        if f.abs() < 1e-6 || hi - lo < 1e-18 {
            return Ok(mid);
        }
        if (f > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::omega_from_nm;

    fn ktp() -> DispersionTable {
        DispersionTable::ktp()
    }

    // Hand evaluation of the Fan et al. formula at 30 digits.
    const NZ_810: f64 = 1.843_224_742_255_557;
    const NZ_405: f64 = 1.959_754_513_516_54;
    const NY_810: f64 = 1.757_934_074_012_755;
    const NY_405: f64 = 1.840_299_767_853_939;

    #[test]
    fn index_matches_hand_evaluation() {
        let t = ktp();
        let z = t.model(Axis::Z).unwrap();
        let y = t.model(Axis::Y).unwrap();
        assert!((refractive_index(810.0, z).unwrap() - NZ_810).abs() < 1e-12);
        assert!((refractive_index(405.0, z).unwrap() - NZ_405).abs() < 1e-12);
        assert!((refractive_index(810.0, y).unwrap() - NY_810).abs() < 1e-12);
        assert!((refractive_index(405.0, y).unwrap() - NY_405).abs() < 1e-12);
    }

    #[test]
    fn far_uv_is_out_of_range() {
        let t = ktp();
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let err = refractive_index(20.0, t.model(axis).unwrap()).unwrap_err();
            assert!(matches!(err, EtpaError::OutOfRange { .. }));
        }
        assert!(refractive_index(1500.0, t.model(Axis::Z).unwrap()).is_err());
    }

    #[test]
    fn normal_dispersion_400_to_1100() {
        let t = ktp();
        for m in t.models.values() {
            let mut prev = f64::INFINITY;
            for i in 0..=700 {
                let n = m.index(400.0 + i as f64).unwrap();
                assert!(n > 1.0 && n < prev, "axis {} at {}", m.axis, 400 + i);
                prev = n;
            }
        }
    }

    #[test]
    fn group_index_matches_finite_difference() {
        let m = ktp().model(Axis::Z).unwrap().clone();
        for nm in [405.0, 600.0, 810.0] {
            let h = 1e-3;
            let dn = (m.index(nm + h).unwrap() - m.index(nm - h).unwrap()) / (2.0 * h);
            let ng = m.index(nm).unwrap() - nm * dn;
            assert!((m.group_index(nm).unwrap() - ng).abs() < 1e-7);
        }
    }

    #[test]
    fn type0_axes_must_match() {
        let t = ktp();
        let err = CrystalSpec::new(0.01, 3e-6, Process::Type0, [Axis::Z, Axis::Y, Axis::Z], &t)
            .unwrap_err();
        assert!(matches!(err, EtpaError::InvalidParameter { .. }));
        let err = CrystalSpec::new(0.01, 3e-6, Process::TypeII, [Axis::Y, Axis::Z, Axis::Z], &t)
            .unwrap_err();
        assert!(matches!(err, EtpaError::InvalidParameter { .. }));
        assert!(CrystalSpec::type0(&t, 0.0, 3e-6).is_err());
        assert!(CrystalSpec::type0(&t, 0.01, -1.0).is_err());
    }

    #[test]
    fn solved_period_zeroes_degenerate_mismatch() {
        let t = ktp();
        let wp = omega_from_nm(405.0);
        for crystal in [
            CrystalSpec::type0(&t, 0.01, 1e-5).unwrap(),
            CrystalSpec::type_ii(&t, 0.01, 1e-5).unwrap(),
        ] {
            let period = solve_poling_period(&crystal, wp).unwrap();
            let solved = crystal.with_poling_period(period).unwrap();
            let dk = phase_mismatch(wp / 2.0, wp / 2.0, &solved).unwrap();
            assert!(dk.abs() < 1e-3, "residual {dk}");
            assert!(
                (phase_matching_function(wp / 2.0, wp / 2.0, &solved).unwrap() - 1.0).abs() < 1e-12
            );
        }
    }

    #[test]
    fn type_ii_period_near_ten_microns_type0_differs() {
        let t = ktp();
        let wp = omega_from_nm(405.0);
        let p2 = solve_poling_period(&CrystalSpec::type_ii(&t, 0.01, 1e-5).unwrap(), wp).unwrap();
        let p0 = solve_poling_period(&CrystalSpec::type0(&t, 0.01, 1e-5).unwrap(), wp).unwrap();
        assert!((p2 / 10e-6 - 1.0).abs() < 0.15, "type-II period {p2}");
        assert!(p0 > 0.0 && (p0 - p2).abs() > 1e-6);
    }

    #[test]
    fn no_root_outside_bracket() {
        // Dispersionless medium: no grating period can cancel a zero mismatch.
        let t = DispersionTable::from_toml_str(
            r#"
crystal = "flat"
[[axis]]
axis = "z"
coefficients = [2.0, 0.0, 0.1, 0.0]
valid_range_nm = [300.0, 5000.0]
citation = "dispersionless test medium"
"#,
        )
        .unwrap();
        let c = CrystalSpec::type0(&t, 0.01, 1e-5).unwrap();
        let err = solve_poling_period(&c, omega_from_nm(405.0)).unwrap_err();
        assert!(matches!(err, EtpaError::NoRoot { .. }));
    }

    #[test]
    fn solved_type_ii_grating_puts_degeneracy_in_main_lobe() {
        let t = ktp();
        let wp = omega_from_nm(405.0);
        let c = CrystalSpec::type_ii(&t, 0.01, 10e-6).unwrap();
        let solved = solve_poling_period(&c, wp).unwrap();
        let c = c.with_poling_period(solved).unwrap();
        assert!(
            phase_matching_function(wp / 2.0, wp / 2.0, &c)
                .unwrap()
                .powi(2)
                > 0.5
        );
    }

    #[test]
    fn exchange_symmetry_of_mismatch() {
        let t = ktp();
        let wp = omega_from_nm(405.0);
        let (a, b) = (0.5 * wp + 3e13, 0.5 * wp - 1e13);
        let c0 = CrystalSpec::type0(&t, 0.01, 3.4e-6).unwrap();
        assert_eq!(
            phase_mismatch(a, b, &c0).unwrap(),
            phase_mismatch(b, a, &c0).unwrap()
        );
        let c2 = CrystalSpec::type_ii(&t, 0.01, 10e-6).unwrap();
        let d1 = phase_mismatch(a, b, &c2).unwrap();
        let d2 = phase_mismatch(b, a, &c2).unwrap();
        assert!((d1 - d2).abs() > 1.0);
    }

    #[test]
    fn finite_difference_slope_matches_group_velocities() {
        let t = ktp();
        let c = CrystalSpec::type_ii(&t, 0.01, 10e-6).unwrap();
        let w = 0.5 * omega_from_nm(405.0) + 2e13;
        let h = 1e10;
        let (gs, gi) = phase_mismatch_gradient(w, w, &c).unwrap();
        let fs = (phase_mismatch(w + h, w, &c).unwrap() - phase_mismatch(w - h, w, &c).unwrap())
            / (2.0 * h);
        let fi = (phase_mismatch(w, w + h, &c).unwrap() - phase_mismatch(w, w - h, &c).unwrap())
            / (2.0 * h);
        assert!((fs / gs - 1.0).abs() < 0.01);
        assert!((fi / gi - 1.0).abs() < 0.01);
    }

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(PI).abs() < 1e-15);
        assert!((sinc(1e-7) - 1.0).abs() < 1e-14);
        // global minimum of sinc
        let min = (0..100_000)
            .map(|i| sinc(4.0 + i as f64 * 1e-5))
            .fold(f64::INFINITY, f64::min);
        assert!((min + 0.217_233_628).abs() < 1e-6);
    }

    #[test]
    fn first_sinc_zero_of_phase_matching() {
        let t = ktp();
        let wp = omega_from_nm(405.0);
        let c = CrystalSpec::type0(&t, 0.01, 1e-5).unwrap();
        let solved = solve_poling_period(&c, wp).unwrap();
        // choose L so that L·Δk/2 = π at the nominal 10 µm grating
        let dk = phase_mismatch(wp / 2.0, wp / 2.0, &c).unwrap();
        let mut c2 = c.clone();
        c2.length_m = 2.0 * PI / dk.abs();
        assert!(
            phase_matching_function(wp / 2.0, wp / 2.0, &c2)
                .unwrap()
                .abs()
                < 1e-12
        );
        assert!(solved > 0.0);
    }

    #[test]
    fn bad_data_rejected() {
        assert!(DispersionTable::from_toml_str("crystal = \"x\"\naxis = []").is_err());
        let dup = r#"
crystal = "d"
[[axis]]
axis = "z"
coefficients = [2.3136, 1.00012, 0.23831, 0.01679]
valid_range_nm = [350.0, 1100.0]
citation = "a"
[[axis]]
axis = "z"
coefficients = [2.3136, 1.00012, 0.23831, 0.01679]
valid_range_nm = [350.0, 1100.0]
citation = "b"
"#;
        assert!(DispersionTable::from_toml_str(dup).is_err());
    }
}

//! Physical constants (exact SI values) and the unit conversions shared by
//! every module.

use std::f64::consts::PI;

/// Speed of light in vacuum, m/s.
pub const C: f64 = 2.997_924_58e8;
/// Planck constant, J·s.
pub const H: f64 = 6.626_070_15e-34;
/// Avogadro constant, 1/mol.
pub const N_A: f64 = 6.022_140_76e23;

/// Angular frequency (rad/s) of light with vacuum wavelength `nm`.
pub fn omega_from_nm(nm: f64) -> f64 {
    2.0 * PI * C / (nm * 1e-9)
}

/// Vacuum wavelength (nm) for angular frequency `omega` (rad/s).
pub fn nm_from_omega(omega: f64) -> f64 {
    2.0 * PI * C / omega * 1e9
}

/// Converts a spectral width quoted in nm around `center_nm` to rad/s,
/// using `2πc·Δλ/λ²` evaluated at the band center.
pub fn bandwidth_nm_to_omega(width_nm: f64, center_nm: f64) -> f64 {
    let lambda = center_nm * 1e-9;
    2.0 * PI * C * (width_nm * 1e-9) / (lambda * lambda)
}

/// Photon energy (J) at vacuum wavelength `nm`.
pub fn photon_energy(nm: f64) -> f64 {
    H * C / (nm * 1e-9)
}

/// Concentration in mol/L converted to mol/cm³.
pub fn molar_to_mol_per_cm3(mol_per_l: f64) -> f64 {
    mol_per_l * 1e-3
}

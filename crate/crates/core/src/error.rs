use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EtpaError {
    #[error("wavelength {wavelength_nm} nm is outside the {axis} index model range [{min_nm}, {max_nm}] nm")]
    OutOfRange {
        axis: String,
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },
    #[error("no phase-matching root in the poling-period bracket [{min_m:e}, {max_m:e}] m")]
    NoRoot { min_m: f64, max_m: f64 },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("index data: {0}")]
    Data(String),
    #[error("states do not share the same grid and pair rate")]
    GridMismatch,
    #[error("input state carries no pairs")]
    EmptyInput,
    #[error("principal axes are undefined for an isotropic JSI")]
    Degenerate,
    #[error("interferogram baseline is zero")]
    ZeroBaseline,
    #[error("interferogram has no dip")]
    NoDip,
    #[error("half-depth crossing lies outside the sampled delay range")]
    DipTruncated,
    #[error("corrected rate `{0}` is not positive")]
    NegativeCorrected(String),
    #[error("background region is empty")]
    EmptyBackground,
}

impl EtpaError {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        EtpaError::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, EtpaError>;

//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: form factor has {factor} values but grid has {grid} nodes")]
    GridMismatch { factor: usize, grid: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("cutoff {cutoff} lies below the first grid node {min_node}")]
    CutoffBelowGrid { cutoff: f64, min_node: f64 },

    #[error(
        "divergence classification conflict: analytic tail gives {analytic:?}, \
         empirical ladder gives {empirical}"
    )]
    ClassificationConflict {
        analytic: crate::modes::CaseLabel,
        empirical: String,
    },

    #[error("grid ladder is not nested by extending k-range: {0}")]
    NonNestedGrids(String),

    #[error("ladder too short: {got} rungs, need at least {min}")]
    LadderTooShort { got: usize, min: usize },

    #[error("basis size {size} exceeds the configured cap {cap}")]
    BasisCap { size: usize, cap: usize },

    #[error("basis/grid mismatch: basis has {basis} modes, grid has {grid} nodes")]
    BasisMismatch { basis: usize, grid: usize },

    #[error("invalid spin system: {0}")]
    InvalidSpin(String),

    #[error("interaction matrices violate the normal-commuting-kernel assumption: {0}")]
    AssumptionViolated(String),

    #[error("simultaneous diagonalization failed: residual {residual:.3e} above {tol:.1e}")]
    DiagonalizationFailed { residual: f64, tol: f64 },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("preset parameter mismatch: {0}")]
    PresetParams(String),

    #[error("z = {z} too close to the spectrum (distance {dist:.3e})")]
    ZNearSpectrum { z: num_complex::Complex64, dist: f64 },

    #[error("resolvent residual {residual:.3e} exceeds {tol:.1e}; z too close to spectrum")]
    ResolventResidual { residual: f64, tol: f64 },

    #[error("block system is numerically singular: condition number {cond:.3e} exceeds {max:.1e}")]
    SingularBlock { cond: f64, max: f64 },

    #[error("operator is not Hermitian: defect {defect:.3e} above {tol:.1e}")]
    NotHermitian { defect: f64, tol: f64 },

    #[error("spectrum extends below -1; the shifted power (H+1)^s is undefined")]
    SpectrumBelowShift,

    #[error("dressing requires a single-level, single-coupling model (got D={d}, N={n})")]
    NotVanHove { d: usize, n: usize },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

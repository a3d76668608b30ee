//! Numerical laboratory for absolutely continuous invariant measures of
//! piecewise expanding interval maps under small convolution-type noise.
//!
//! The pipeline: discretize the transfer (Frobenius-Perron) operator of a
//! piecewise C^{1+eps} expanding map on a uniform grid (Ulam scheme), build
//! the circulant smoothing matrix of a periodized compactly supported noise
//! kernel, and study the fixed densities of the composite operator as the
//! noise intensity shrinks. Oscillation-based seminorms make the
//! Lasota-Yorke contraction structure empirically measurable, and a direct
//! Monte Carlo simulation of the noisy dynamics cross-checks the whole
//! matrix pipeline.

pub mod bvspace;
mod eigen;
pub mod error;
pub mod grid;
pub mod maps;
pub mod noise;
pub mod stability;
pub mod transfer;

pub use bvspace::{default_r_grid, osc1, osc_at, oscillation_profile, var_norm, Domain,
    OscillationProfile, VarNormResult};
pub use error::{Error, Result};
pub use grid::{l1_distance, GridDensity};
pub use maps::{builtin, Branch, PiecewiseMap, ValidationReport};
pub use noise::{check_assumption, noise_matrix, AssumptionReport, KernelProfile, NoiseKernel};
pub use stability::{invariant_density, ly_estimate, monte_carlo_density, perturbed_operator,
    solve, spectral_gap, stability_sweep, LYEstimate, SolveMethod, SolveOptions, SolveOutcome,
    SpectralReport, SweepReport, SweepRow};
pub use transfer::{apply_matrix, fp_apply_pointwise, ulam_matrix, MatrixKind, TransferMatrix};

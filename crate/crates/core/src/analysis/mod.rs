//! From ensembles of records to correlation functions, structure factors and
//! error diagnostics, together with the exact values they are checked against.

pub mod correlate;
pub mod cutoff;
pub mod dsf;
pub mod error_scan;
pub mod leggett_garg;
pub mod oracle;

pub use correlate::{
    cross_correlate, noise_cross_correlate, product_samples, van_hove, van_hove_samples, Centering,
    CorrelatorKind, ReadoutKind, VanHoveGrid, VanHoveOptions, VanHoveSamples,
};
pub use cutoff::{apply_cutoff, cutoff_matrix, fourier_cutoff, LowPass};
pub use dsf::{
    dsf, dsf_with_sem, omega_grid, q_grid, DsfGrid, DsfOptions, SpatialWindow, TimeWindow,
};
pub use error_scan::{
    error_scan, fit_quadratic_mean, ErrorScanConfig, ErrorScanPoint, ErrorScanResult, FitForm,
};
pub use leggett_garg::{leggett_garg, leggett_garg_combination, pairwise_correlation, LeggettGarg};
pub use oracle::{
    lindblad_term, oracle_correlations, oracle_two_time, predicted_variance, OracleCorrelations,
    VarianceTerms, SYSTEMATIC_VARIANCE_COEFF,
};

//! Numerical toolkit for one-dimensional aperiodic point sets: generators,
//! diffraction estimators, and almost-periodicity diagnostics.

mod error;
mod numeric;

pub mod apfunctions;
pub mod diffraction;
pub mod pointsets;
pub mod seminorms;

/// Default parameter values shared by the library examples and the command
/// line front end.
pub mod defaults {
    /// Tabulation step for sampled functions.
    pub const GRID_STEP: f64 = 0.01;
    /// Series length for the limit-periodic and limit-quasiperiodic zoo
    /// functions.
    pub const ZOO_TERMS: u32 = 30;
    /// Tent profile used when none is specified.
    pub const TENT_HALF_WIDTH: f64 = 0.4;
    pub const TENT_HEIGHT: f64 = 1.0;
    /// Difference span kept by autocorrelations.
    pub const ACF_SPAN: f64 = crate::diffraction::ACF_SPAN;
    /// Autocorrelation binning tolerance.
    pub const BIN_TOLERANCE: f64 = crate::diffraction::BIN_TOLERANCE;
    /// Peak-scan keep threshold as a fraction of the point density.
    pub const PEAK_THRESHOLD_DENSITY_FACTOR: f64 =
        crate::diffraction::PEAK_THRESHOLD_DENSITY_FACTOR;
    /// Translate grid step for the Weyl seminorm.
    pub const WEYL_TRANSLATE_STEP: f64 = 0.1;
    /// Width tolerance of golden-section refinement.
    pub const REFINE_TOLERANCE: f64 = 1e-6;
}

pub use apfunctions::{
    comb_convolve, fibonacci_triangle, fibonacci_triangle_value, fourier_bohr_coefficient,
    zoo_limit_periodic, zoo_limit_quasiperiodic, zoo_quasiperiodic, Grid, SampledFunction,
    TestFunction, TestFunctionKind, TrigPolynomial,
};
pub use diffraction::{
    amplitude, amplitude_in, amplitude_stability, autocorrelation, bragg_intensity,
    bragg_intensity_raw, cpp_check, fibonacci_peak_candidates, fourier_bohr_reconstruction,
    mean_ap_certificate, peak_scan, peak_scan_threaded, refine_peak, Autocorrelation, CppRecord, CppReport,
    Reconstruction, SpectralPeak, Spectrum, StabilityEstimate, StabilityReport,
};
pub use error::{Error, Result};
pub use seminorms::{
    approximation_error, max_gap, scan_almost_periods, scan_almost_periods_at,
    seminorm_estimate, seminorm_of_difference, AlmostPeriodReport, SeminormKind,
};
pub use pointsets::{
    fibonacci_model_set, fibonacci_substitution_points, digit_parity_points, integer_lattice,
    model_set, shifted_halves, squarefree_points, CutProjectScheme, PointSet, SubstitutionRule,
    HALF_SHIFT, PHI, PHI_CONJ, SQRT5,
};

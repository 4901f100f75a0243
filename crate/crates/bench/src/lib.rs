//! Fixtures shared by the criterion benches.

use nvcav_core::model::driving_rates_from_powers;
use nvcav_core::spectroscopy::emission_peaks;
use nvcav_core::{build_rate_matrix, synthesize_spectrum, CavityGeometry, NvParameters, RateMatrix, Spectrum, Variant};

/// Rate matrix at the default operating point for the given powers (W).
pub fn matrix_at(green: f64, red: f64) -> RateMatrix {
    let par = NvParameters::literature();
    let k = driving_rates_from_powers(&par, &CavityGeometry::default(), green, red);
    build_rate_matrix(&par, &k, Variant::Full).expect("table values are valid")
}

/// Eight-peak emission spectrum on 600-850 nm.
pub fn emission_spectrum(points: usize) -> Spectrum {
    synthesize_spectrum(&emission_peaks(), 600e-9, 850e-9, points, false).expect("valid grid")
}

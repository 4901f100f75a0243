//! Emission spectra as sums of Lorentzians, peak fitting, and the
//! Füchtbauer–Ladenburg stimulated-emission cross-section.

use crate::lm::{self, LeastSquaresProblem, LmOptions};
use crate::model::PhysicalConstants;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};
use thiserror::Error;

const NM: f64 = 1e-9;

/// Relative tolerance on grid uniformity.
pub const UNIFORM_SPACING_TOLERANCE: f64 = 1e-6;

/// Default refractive index of diamond near 700 nm.
pub const DIAMOND_REFRACTIVE_INDEX: f64 = 2.4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectroscopyError {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("invalid peak: {0}")]
    InvalidPeak(String),
    #[error("peaks {0} and {1} share a center within one grid step")]
    DegenerateJacobian(usize, usize),
    #[error("fit did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("spectrum has zero weighted area")]
    ZeroSpectrum,
    #[error("wavelength {0:e} m outside the grid")]
    OutOfRange(f64),
    #[error("spectrum file: {0}")]
    Format(String),
}

/// One Lorentzian line, peak height `amplitude` at `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianPeak {
    /// m
    pub center: f64,
    pub amplitude: f64,
    /// m
    pub fwhm: f64,
}

impl LorentzianPeak {
    pub fn new(center: f64, amplitude: f64, fwhm: f64) -> Result<Self, SpectroscopyError> {
        let p = LorentzianPeak {
            center,
            amplitude,
            fwhm,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<(), SpectroscopyError> {
        if !(self.center.is_finite() && self.amplitude.is_finite() && self.fwhm.is_finite()) {
            return Err(SpectroscopyError::InvalidPeak("non-finite parameter".into()));
        }
        if self.amplitude < 0.0 {
            return Err(SpectroscopyError::InvalidPeak("negative amplitude".into()));
        }
        if self.fwhm <= 0.0 {
            return Err(SpectroscopyError::InvalidPeak("non-positive fwhm".into()));
        }
        Ok(())
    }

    pub fn value(&self, lambda: f64) -> f64 {
        let hw = 0.5 * self.fwhm;
        let d = lambda - self.center;
        self.amplitude * hw * hw / (d * d + hw * hw)
    }
}

/// Eight-line decomposition of the NV emission band: zero-phonon line plus
/// seven phonon replicas (center nm, amplitude, FWHM nm).
pub const EMISSION_PEAKS_NM: [(f64, f64, f64); 8] = [
    (636.9, 0.1, 3.0),
    (658.3, 0.3, 21.0),
    (681.5, 0.6, 31.7),
    (703.4, 0.6, 31.7),
    (721.0, 0.3, 30.4),
    (739.0, 0.3, 31.7),
    (758.5, 0.2, 33.1),
    (782.3, 0.1, 30.4),
];

pub fn emission_peaks() -> Vec<LorentzianPeak> {
    EMISSION_PEAKS_NM
        .iter()
        .map(|&(c, a, w)| LorentzianPeak {
            center: c * NM,
            amplitude: a,
            fwhm: w * NM,
        })
        .collect()
}

pub fn lorentzian_sum(lambda: f64, peaks: &[LorentzianPeak]) -> f64 {
    peaks.iter().map(|p| p.value(lambda)).sum()
}

/// Sampled spectrum on a uniform, strictly increasing wavelength grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    wavelengths: Vec<f64>,
    intensities: Vec<f64>,
    normalized: bool,
}

impl Spectrum {
    pub fn new(wavelengths: Vec<f64>, intensities: Vec<f64>) -> Result<Self, SpectroscopyError> {
        use SpectroscopyError::InvalidSpectrum as Bad;
        if wavelengths.len() != intensities.len() {
            return Err(Bad("length mismatch".into()));
        }
        if wavelengths.is_empty() {
            return Err(Bad("empty".into()));
        }
        if wavelengths.iter().chain(&intensities).any(|x| !x.is_finite()) {
            return Err(Bad("non-finite value".into()));
        }
        if intensities.iter().any(|&i| i < 0.0) {
            return Err(Bad("negative intensity".into()));
        }
        if wavelengths.len() > 1 {
            let n = wavelengths.len();
            let step = (wavelengths[n - 1] - wavelengths[0]) / (n - 1) as f64;
            if step <= 0.0 {
                return Err(Bad("wavelengths not increasing".into()));
            }
            for w in wavelengths.windows(2) {
                let d = w[1] - w[0];
                if d <= 0.0 {
                    return Err(Bad("wavelengths not strictly increasing".into()));
                }
                if (d - step).abs() > UNIFORM_SPACING_TOLERANCE * step {
                    return Err(Bad("non-uniform spacing".into()));
                }
            }
        }
        Ok(Spectrum {
            wavelengths,
            intensities,
            normalized: false,
        })
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Grid step δλ; zero for a single-point spectrum.
    pub fn step(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            0.0
        } else {
            (self.wavelengths[n - 1] - self.wavelengths[0]) / (n - 1) as f64
        }
    }

    pub fn max_intensity(&self) -> f64 {
        self.intensities.iter().cloned().fold(0.0, f64::max)
    }

    /// Scales to unit peak. A zero spectrum is returned unchanged.
    pub fn normalize(mut self) -> Self {
        let m = self.max_intensity();
        if m > 0.0 {
            for i in &mut self.intensities {
                *i /= m;
            }
            self.normalized = true;
        }
        self
    }

    /// Two-column CSV: `wavelength_nm,intensity`, header required,
    /// `#` comment lines ignored.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SpectroscopyError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| SpectroscopyError::Format(e.to_string()))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| SpectroscopyError::Format(format!("missing column {name}")))
        };
        let (iw, ii) = (col("wavelength_nm")?, col("intensity")?);
        let mut wl = Vec::new();
        let mut inten = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| SpectroscopyError::Format(e.to_string()))?;
            let parse = |i: usize| -> Result<f64, SpectroscopyError> {
                rec.get(i)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| SpectroscopyError::Format(format!("row {}: {e}", n + 1)))
            };
            wl.push(parse(iw)? * NM);
            inten.push(parse(ii)?);
        }
        Spectrum::new(wl, inten)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["wavelength_nm", "intensity"])?;
        for (l, i) in self.wavelengths.iter().zip(&self.intensities) {
            w.write_record([(l / NM).to_string(), i.to_string()])?;
        }
        w.flush()
    }
}

/// Uniform grid on `[lambda_min, lambda_max]` evaluated from `peaks`.
pub fn synthesize_spectrum(
    peaks: &[LorentzianPeak],
    lambda_min: f64,
    lambda_max: f64,
    n_points: usize,
    normalize: bool,
) -> Result<Spectrum, SpectroscopyError> {
    if n_points < 2 {
        return Err(SpectroscopyError::InvalidSpectrum("need at least two points".into()));
    }
    if !(lambda_min < lambda_max) {
        return Err(SpectroscopyError::InvalidSpectrum("empty wavelength range".into()));
    }
    for p in peaks {
        p.check()?;
    }
    let step = (lambda_max - lambda_min) / (n_points - 1) as f64;
    let wl: Vec<f64> = (0..n_points)
        .map(|i| {
            if i == n_points - 1 {
                lambda_max
            } else {
                lambda_min + i as f64 * step
            }
        })
        .collect();
    let inten = wl.iter().map(|&l| lorentzian_sum(l, peaks)).collect();
    let s = Spectrum::new(wl, inten)?;
    Ok(if normalize { s.normalize() } else { s })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakFitResult {
    pub peaks: Vec<LorentzianPeak>,
    /// ‖model − data‖₂ at the solution.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// ‖r‖² after each accepted step.
    pub cost_history: Vec<f64>,
}

impl PeakFitResult {
    pub fn ensure_converged(self) -> Result<Self, SpectroscopyError> {
        if self.converged {
            Ok(self)
        } else {
            Err(SpectroscopyError::NotConverged {
                iterations: self.iterations,
            })
        }
    }

    /// Per-peak report in lab units.
    pub fn to_json(&self) -> serde_json::Value {
        let peaks: Vec<_> = self
            .peaks
            .iter()
            .map(|p| {
                serde_json::json!({
                    "center_nm": p.center / NM,
                    "amplitude": p.amplitude,
                    "fwhm_nm": p.fwhm / NM,
                })
            })
            .collect();
        serde_json::json!({
            "peaks": peaks,
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "iterations": self.iterations,
        })
    }
}

// Fitting runs in nm so that all parameters are O(1)-O(1000).
struct PeakProblem<'a> {
    x_nm: Vec<f64>,
    y: &'a [f64],
    min_fwhm_nm: f64,
}

impl LeastSquaresProblem for PeakProblem<'_> {
    fn residual_count(&self) -> usize {
        self.y.len()
    }

    fn residuals(&self, p: &DVector<f64>, out: &mut DVector<f64>) {
        for (i, (&x, &y)) in self.x_nm.iter().zip(self.y).enumerate() {
            let mut model = 0.0;
            for k in 0..p.len() / 3 {
                let (c, a, w) = (p[3 * k], p[3 * k + 1], p[3 * k + 2]);
                let hw = 0.5 * w;
                let d = x - c;
                model += a * hw * hw / (d * d + hw * hw);
            }
            out[i] = model - y;
        }
    }

    fn jacobian(&self, p: &DVector<f64>, out: &mut DMatrix<f64>) {
        for (i, &x) in self.x_nm.iter().enumerate() {
            for k in 0..p.len() / 3 {
                let (c, a, w) = (p[3 * k], p[3 * k + 1], p[3 * k + 2]);
                let hw = 0.5 * w;
                let d = x - c;
                let den = d * d + hw * hw;
                let shape = hw * hw / den;
                out[(i, 3 * k)] = 2.0 * a * shape * d / den;
                out[(i, 3 * k + 1)] = shape;
                out[(i, 3 * k + 2)] = a * hw * d * d / (den * den);
            }
        }
    }

    fn project(&self, p: &mut DVector<f64>) {
        for k in 0..p.len() / 3 {
            p[3 * k + 1] = p[3 * k + 1].max(0.0);
            p[3 * k + 2] = p[3 * k + 2].max(self.min_fwhm_nm);
        }
    }
}

fn check_separation(centers: &[f64], step: f64) -> Result<(), SpectroscopyError> {
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            if (centers[i] - centers[j]).abs() < step {
                return Err(SpectroscopyError::DegenerateJacobian(i, j));
            }
        }
    }
    Ok(())
}

/// Least-squares fit of a sum of Lorentzians with analytic derivatives.
///
/// Amplitudes are kept non-negative and widths positive by projection. A
/// fit that runs out of iterations is returned with `converged = false`.
pub fn fit_peaks(
    spectrum: &Spectrum,
    initial: &[LorentzianPeak],
    max_iter: usize,
    tol: f64,
) -> Result<PeakFitResult, SpectroscopyError> {
    if initial.is_empty() {
        return Err(SpectroscopyError::InvalidPeak("no initial peaks".into()));
    }
    if spectrum.is_empty() {
        return Err(SpectroscopyError::InvalidSpectrum("empty".into()));
    }
    for p in initial {
        p.check()?;
    }
    let step = spectrum.step();
    let centers: Vec<f64> = initial.iter().map(|p| p.center).collect();
    check_separation(&centers, step)?;

    let step_nm = step / NM;
    let problem = PeakProblem {
        x_nm: spectrum.wavelengths().iter().map(|l| l / NM).collect(),
        y: spectrum.intensities(),
        min_fwhm_nm: if step_nm > 0.0 { 1e-6 * step_nm } else { 1e-9 },
    };
    let x0 = DVector::from_iterator(
        3 * initial.len(),
        initial.iter().flat_map(|p| [p.center / NM, p.amplitude, p.fwhm / NM]),
    );
    let report = lm::minimize(
        &problem,
        x0,
        &LmOptions {
            max_iter,
            tol,
            ..LmOptions::default()
        },
    );

    let peaks: Vec<LorentzianPeak> = (0..initial.len())
        .map(|k| LorentzianPeak {
            center: report.x[3 * k] * NM,
            amplitude: report.x[3 * k + 1],
            fwhm: report.x[3 * k + 2] * NM,
        })
        .collect();
    let centers: Vec<f64> = peaks.iter().map(|p| p.center).collect();
    check_separation(&centers, step)?;

    Ok(PeakFitResult {
        peaks,
        residual_norm: report.cost().sqrt(),
        converged: report.converged,
        iterations: report.iterations,
        cost_history: report.cost_history,
    })
}

/// Wavelength-resolved stimulated-emission cross-section on the spectrum grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionCurve {
    /// m
    pub wavelengths: Vec<f64>,
    /// m²
    pub sigma: Vec<f64>,
}

impl CrossSectionCurve {
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["wavelength_nm", "sigma_m2"])?;
        for (l, s) in self.wavelengths.iter().zip(&self.sigma) {
            w.write_record([(l / NM).to_string(), s.to_string()])?;
        }
        w.flush()
    }
}

/// σ(λ) = γ λ⁵ I(λ) / (8π n² c Σ λ I(λ) δλ).
///
/// The sum is a left-point Riemann sum over the uniform grid. `gamma` is the
/// radiative decay rate (s⁻¹); σ scales linearly with it.
pub fn fl_cross_section(
    spectrum: &Spectrum,
    refractive_index: f64,
    gamma: f64,
) -> Result<CrossSectionCurve, SpectroscopyError> {
    if spectrum.len() < 2 {
        return Err(SpectroscopyError::InvalidSpectrum("need at least two points".into()));
    }
    let dl = spectrum.step();
    let wl = spectrum.wavelengths();
    let inten = spectrum.intensities();
    let weighted: f64 = wl[..wl.len() - 1]
        .iter()
        .zip(inten)
        .map(|(l, i)| l * i)
        .sum::<f64>()
        * dl;
    if !(weighted > 0.0) {
        return Err(SpectroscopyError::ZeroSpectrum);
    }
    let c = PhysicalConstants::CODATA.light_speed;
    let prefactor = gamma / (8.0 * PI * refractive_index * refractive_index * c * weighted);
    let sigma = wl.iter().zip(inten).map(|(l, i)| prefactor * l.powi(5) * i).collect();
    Ok(CrossSectionCurve {
        wavelengths: wl.to_vec(),
        sigma,
    })
}

/// Linear interpolation of σ at `lambda`.
pub fn cross_section_at(curve: &CrossSectionCurve, lambda: f64) -> Result<f64, SpectroscopyError> {
    let wl = &curve.wavelengths;
    if wl.is_empty() || !(lambda >= wl[0] && lambda <= wl[wl.len() - 1]) {
        return Err(SpectroscopyError::OutOfRange(lambda));
    }
    let hi = wl.partition_point(|&x| x < lambda);
    if wl[hi] == lambda {
        return Ok(curve.sigma[hi]);
    }
    let lo = hi - 1;
    let t = (lambda - wl[lo]) / (wl[hi] - wl[lo]);
    Ok(curve.sigma[lo] + t * (curve.sigma[hi] - curve.sigma[lo]))
}

//! Parameter sweeps over pump and seed power, line cuts, and the
//! suppression-law fit of the amplification factor.

use crate::kinetics::{build_rate_matrix, steady_state, Populations, Variant, DEFAULT_STEADY_TOLERANCE};
use crate::lm::{self, LeastSquaresProblem, LmOptions};
use crate::model::{driving_rates_from_powers, CavityGeometry, NvParameters};
use crate::observables::{
    amplification_factor, charge_fractions, spontaneous_factor, GainContext, ObservablePoint,
};
use crate::Error;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),
    #[error("green power {0:e} W not in grid")]
    NotInGrid(f64),
    #[error("invalid fit input: {0}")]
    InvalidFitInput(String),
    #[error("law fit did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
}

/// `n` log-spaced values from `min` to `max` inclusive.
pub fn log_spaced(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![min],
        _ => {
            let ratio = (max / min).ln();
            (0..n)
                .map(|i| {
                    if i == 0 {
                        min
                    } else if i == n - 1 {
                        max
                    } else {
                        min * (ratio * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// W, strictly increasing
    pub green_powers: Vec<f64>,
    /// W, strictly increasing
    pub red_powers: Vec<f64>,
    pub geometry: CavityGeometry,
    pub params: NvParameters,
    pub variant: Variant,
}

impl SweepConfig {
    /// Pump sweep 1–150 mW (150 log-spaced points) at a 67 µW seed.
    pub fn pump_sweep_default() -> Self {
        SweepConfig {
            green_powers: log_spaced(1e-3, 150e-3, 150),
            red_powers: vec![67e-6],
            geometry: CavityGeometry::default(),
            params: NvParameters::literature(),
            variant: Variant::Full,
        }
    }

    /// Seed powers {1, 5, 15, 47} mW against pump powers 1 mW and
    /// 2.5–150 mW in 2.5 mW steps (so that 25/50/75/100 mW are on the grid).
    pub fn seed_grid_default() -> Self {
        let mut green = vec![1e-3];
        green.extend((1..=60).map(|i| f64::from(i) * 2.5 / 1e3));
        SweepConfig {
            green_powers: green,
            red_powers: vec![1e-3, 5e-3, 15e-3, 47e-3],
            ..Self::pump_sweep_default()
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        for (name, list) in [("green_powers", &self.green_powers), ("red_powers", &self.red_powers)] {
            if list.is_empty() {
                return Err(ExperimentError::InvalidConfig(format!("{name} is empty")));
            }
            if list.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(ExperimentError::InvalidConfig(format!("{name} has a negative power")));
            }
            if list.windows(2).any(|w| w[1] <= w[0]) {
                return Err(ExperimentError::InvalidConfig(format!(
                    "{name} is not strictly increasing"
                )));
            }
        }
        if let Err(v) = self.params.validate() {
            return Err(ExperimentError::InvalidConfig(v[0].message.clone()));
        }
        if let Err(v) = self.geometry.validate() {
            return Err(ExperimentError::InvalidConfig(v[0].message.clone()));
        }
        Ok(())
    }
}

/// Steady state at one operating point.
pub fn solve_point(
    params: &NvParameters,
    geom: &CavityGeometry,
    variant: Variant,
    green_power: f64,
    red_power: f64,
) -> Result<Populations, Error> {
    let rates = driving_rates_from_powers(params, geom, green_power, red_power);
    let m = build_rate_matrix(params, &rates, variant)?;
    Ok(steady_state(&m, DEFAULT_STEADY_TOLERANCE)?)
}

/// Observables at one (green, red) pair. The f_sp reference is a separate
/// steady state with the red intensity set to zero.
pub fn evaluate_point(
    params: &NvParameters,
    geom: &CavityGeometry,
    variant: Variant,
    green_power: f64,
    red_power: f64,
) -> Result<ObservablePoint, Error> {
    let with_red = solve_point(params, geom, variant, green_power, red_power)?;
    let green_only = solve_point(params, geom, variant, green_power, 0.0)?;
    let ctx = GainContext::new(params, geom);
    let charge = charge_fractions(&with_red);
    Ok(ObservablePoint {
        green_power,
        red_power,
        f_amp: amplification_factor(&with_red, &ctx),
        f_sp: spontaneous_factor(&with_red, &green_only, params.beta)?,
        p_minus_excited: charge.p_minus_excited,
        p_zero_excited: charge.p_zero_excited,
        nv_minus_total: charge.nv_minus_total,
        nv_zero_total: charge.nv_zero_total,
    })
}

/// Pump-power sweep at the config's single seed power.
pub fn sweep_green(config: &SweepConfig) -> Result<Vec<ObservablePoint>, Error> {
    config.validate()?;
    if config.red_powers.len() != 1 {
        return Err(ExperimentError::InvalidConfig("sweep_green needs exactly one red power".into()).into());
    }
    let red = config.red_powers[0];
    config
        .green_powers
        .par_iter()
        .map(|&g| evaluate_point(&config.params, &config.geometry, config.variant, g, red))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub green_power: f64,
    pub red_power: f64,
    pub outcome: Result<ObservablePoint, Error>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMetadata {
    pub config: SweepConfig,
    pub steady_tolerance: f64,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// Green-major: all red powers for the first green power, then the next.
    pub rows: Vec<GridRow>,
    pub metadata: GridMetadata,
}

/// Full Cartesian product of pump and seed powers. Failures are kept per
/// row.
pub fn sweep_grid(config: &SweepConfig) -> Result<GridResult, Error> {
    config.validate()?;
    let pairs: Vec<(f64, f64)> = config
        .green_powers
        .iter()
        .flat_map(|&g| config.red_powers.iter().map(move |&r| (g, r)))
        .collect();
    let rows = pairs
        .par_iter()
        .map(|&(g, r)| GridRow {
            green_power: g,
            red_power: r,
            outcome: evaluate_point(&config.params, &config.geometry, config.variant, g, r),
        })
        .collect();
    Ok(GridResult {
        rows,
        metadata: GridMetadata {
            config: config.clone(),
            steady_tolerance: DEFAULT_STEADY_TOLERANCE,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

fn same_power(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// (red power, f_amp) at fixed pump power, ordered by red power.
pub fn line_cut(grid: &GridResult, green_power: f64) -> Result<Vec<(f64, f64)>, Error> {
    let mut out = Vec::new();
    for row in grid.rows.iter().filter(|r| same_power(r.green_power, green_power)) {
        match &row.outcome {
            Ok(p) => out.push((row.red_power, p.f_amp)),
            Err(e) => return Err(e.clone()),
        }
    }
    if out.is_empty() {
        return Err(ExperimentError::NotInGrid(green_power).into());
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Shape `s(x)` of the suppression law `f_amp = 1 + A · s(P / B)`.
pub trait SuppressionLaw: Sync {
    fn shape(&self, x: f64) -> f64;
    fn shape_derivative(&self, x: f64) -> f64;
}

/// `s(x) = 1 / (1 + x)²`
#[derive(Debug, Clone, Copy, Default)]
pub struct InverseSquare;

impl SuppressionLaw for InverseSquare {
    fn shape(&self, x: f64) -> f64 {
        1.0 / ((1.0 + x) * (1.0 + x))
    }

    fn shape_derivative(&self, x: f64) -> f64 {
        -2.0 / (1.0 + x).powi(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawFit {
    pub amplitude_a: f64,
    /// W; NaN when unconstrained.
    pub scale_b: f64,
    /// ‖residual‖₂
    pub residual_norm: f64,
    pub rms: f64,
    pub converged: bool,
    /// Set when every f_amp equals 1 and B carries no information.
    pub scale_unconstrained: bool,
}

impl LawFit {
    pub fn predict<L: SuppressionLaw + ?Sized>(&self, law: &L, red_power: f64) -> f64 {
        if self.scale_unconstrained {
            1.0
        } else {
            1.0 + self.amplitude_a * law.shape(red_power / self.scale_b)
        }
    }
}

// Parameters: (A, ln B).
struct LawProblem<'a, L: ?Sized> {
    law: &'a L,
    points: &'a [(f64, f64)],
}

impl<L: SuppressionLaw + ?Sized> LeastSquaresProblem for LawProblem<'_, L> {
    fn residual_count(&self) -> usize {
        self.points.len()
    }

    fn residuals(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        let b = x[1].exp();
        for (i, &(p, f)) in self.points.iter().enumerate() {
            out[i] = 1.0 + x[0] * self.law.shape(p / b) - f;
        }
    }

    fn jacobian(&self, x: &DVector<f64>, out: &mut DMatrix<f64>) {
        let b = x[1].exp();
        for (i, &(p, _)) in self.points.iter().enumerate() {
            let u = p / b;
            out[(i, 0)] = self.law.shape(u);
            // d/d(ln B) of s(P/B) = -u s'(u)
            out[(i, 1)] = -x[0] * u * self.law.shape_derivative(u);
        }
    }

    fn project(&self, x: &mut DVector<f64>) {
        x[0] = x[0].max(0.0);
    }
}

/// Least-squares fit of `f_amp = 1 + A · s(P / B)` to (red power, f_amp)
/// points.
///
/// B is seeded by a log scan with the optimal A for each trial B in closed
/// form, then refined jointly.
pub fn fit_law<L: SuppressionLaw + ?Sized>(law: &L, points: &[(f64, f64)]) -> Result<LawFit, Error> {
    if points.len() < 3 {
        return Err(ExperimentError::InvalidFitInput("need at least three points".into()).into());
    }
    if points.iter().any(|&(p, f)| !(p.is_finite() && f.is_finite() && p >= 0.0)) {
        return Err(ExperimentError::InvalidFitInput("non-finite point".into()).into());
    }
    if points.iter().any(|&(_, f)| f < 1.0) {
        return Err(ExperimentError::InvalidFitInput("f_amp below 1".into()).into());
    }
    if points.iter().all(|&(_, f)| f == 1.0) {
        return Ok(LawFit {
            amplitude_a: 0.0,
            scale_b: f64::NAN,
            residual_norm: 0.0,
            rms: 0.0,
            converged: true,
            scale_unconstrained: true,
        });
    }

    let best_a = |b: f64| {
        let (mut sy, mut ss) = (0.0, 0.0);
        for &(p, f) in points {
            let s = law.shape(p / b);
            sy += s * (f - 1.0);
            ss += s * s;
        }
        (sy / ss).max(0.0)
    };
    let sse = |a: f64, b: f64| -> f64 {
        points
            .iter()
            .map(|&(p, f)| (1.0 + a * law.shape(p / b) - f).powi(2))
            .sum()
    };
    let p_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    let p_pos_min = points
        .iter()
        .map(|p| p.0)
        .filter(|&p| p > 0.0)
        .fold(f64::INFINITY, f64::min);
    let (lo, hi) = if p_pos_min.is_finite() {
        (1e-3 * p_pos_min, 1e3 * p_max)
    } else {
        (1e-6, 1.0)
    };
    let (mut b0, mut best) = (lo, f64::INFINITY);
    for b in log_spaced(lo, hi, 400) {
        let e = sse(best_a(b), b);
        if e < best {
            best = e;
            b0 = b;
        }
    }

    let problem = LawProblem { law, points };
    let report = lm::minimize(
        &problem,
        DVector::from_vec(vec![best_a(b0), b0.ln()]),
        &LmOptions {
            max_iter: 500,
            tol: 1e-14,
            ..LmOptions::default()
        },
    );
    if !report.converged {
        return Err(ExperimentError::NotConverged {
            iterations: report.iterations,
        }
        .into());
    }
    let cost = report.cost();
    Ok(LawFit {
        amplitude_a: report.x[0],
        scale_b: report.x[1].exp(),
        residual_norm: cost.sqrt(),
        rms: (cost / points.len() as f64).sqrt(),
        converged: true,
        scale_unconstrained: false,
    })
}

pub fn fit_inverse_square(points: &[(f64, f64)]) -> Result<LawFit, Error> {
    fit_law(&InverseSquare, points)
}

pub const CSV_COLUMNS: [&str; 8] = [
    "green_power_mW",
    "red_power_mW",
    "f_amp",
    "f_sp",
    "p_minus_excited",
    "p_zero_excited",
    "nv_minus_total",
    "nv_zero_total",
];

/// Writes sweep rows as CSV. Each metadata line is emitted as `# line`
/// before the header. Failed points are written with NaN values.
pub fn write_sweep_csv<'a, W, I>(writer: W, metadata: &[String], rows: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (f64, f64, Option<&'a ObservablePoint>)>,
{
    let mut writer = writer;
    for line in metadata {
        writeln!(writer, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for (green, red, point) in rows {
        let vals = match point {
            Some(p) => [
                p.f_amp,
                p.f_sp,
                p.p_minus_excited,
                p.p_zero_excited,
                p.nv_minus_total,
                p.nv_zero_total,
            ],
            None => [f64::NAN; 6],
        };
        let mut rec = vec![(green * 1e3).to_string(), (red * 1e3).to_string()];
        rec.extend(vals.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()
}

impl GridResult {
    pub fn write_csv<W: Write>(&self, writer: W, metadata: &[String]) -> std::io::Result<()> {
        write_sweep_csv(
            writer,
            metadata,
            self.rows
                .iter()
                .map(|r| (r.green_power, r.red_power, r.outcome.as_ref().ok())),
        )
    }

    /// Rows grouped by red power (one curve per seed power).
    pub fn curves_by_red(&self) -> Vec<(f64, Vec<&GridRow>)> {
        let reds = &self.metadata.config.red_powers;
        reds.iter()
            .map(|&r| {
                (
                    r,
                    self.rows.iter().filter(|row| same_power(row.red_power, r)).collect(),
                )
            })
            .collect()
    }
}

//! Seven-level rate equations: matrix assembly, steady state, and a stiff
//! time integrator used as an independent check on the steady-state solve.

mod integrator;

pub use integrator::{evolve, Integrator};

use crate::model::{DrivingRates, NvParameters, Violation};
use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const LEVEL_COUNT: usize = 7;

/// Relative residual bound for [`steady_state`].
pub const DEFAULT_STEADY_TOLERANCE: f64 = 1e-12;

/// Slack allowed on the simplex constraints of [`Populations`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

pub type Matrix7 = SMatrix<f64, LEVEL_COUNT, LEVEL_COUNT>;
pub type Vector7 = SVector<f64, LEVEL_COUNT>;

/// Energy levels, numbered 1 to 7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    /// NV⁻ ground, m_s = 0
    L1 = 1,
    /// NV⁻ ground, m_s = ±1
    L2 = 2,
    /// NV⁻ excited, m_s = 0
    L3 = 3,
    /// NV⁻ excited, m_s = ±1
    L4 = 4,
    /// NV⁻ singlet
    L5 = 5,
    /// NV⁰ ground
    L6 = 6,
    /// NV⁰ excited
    L7 = 7,
}

impl Level {
    pub const ALL: [Level; LEVEL_COUNT] = [
        Level::L1,
        Level::L2,
        Level::L3,
        Level::L4,
        Level::L5,
        Level::L6,
        Level::L7,
    ];

    /// Zero-based vector index.
    pub fn index(self) -> usize {
        self as usize - 1
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticsError {
    #[error("invalid parameters: {}", join_violations(.0))]
    InvalidParameters(Vec<Violation>),
    #[error("steady state is not unique: {} closed classes {:?}", .closed_classes.len(), .closed_classes)]
    DegenerateSteadyState { closed_classes: Vec<Vec<usize>> },
    #[error("steady-state solve failed: {reason}")]
    NumericalFailure { reason: String },
    #[error("integrator step failure at t = {time:e} s (h = {step:e} s)")]
    StepFailure { time: f64, step: f64 },
    #[error("not a population vector: {0}")]
    InvalidPopulations(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.message.as_str()).collect::<Vec<_>>().join("; ")
}

/// Occupation fractions p₁…p₇ of a single centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Populations([f64; LEVEL_COUNT]);

impl Populations {
    pub fn new(p: [f64; LEVEL_COUNT]) -> Result<Self, KineticsError> {
        if p.iter().any(|x| !x.is_finite()) {
            return Err(KineticsError::InvalidPopulations("non-finite component".into()));
        }
        if p.iter().any(|&x| x < -SIMPLEX_TOLERANCE || x > 1.0 + SIMPLEX_TOLERANCE) {
            return Err(KineticsError::InvalidPopulations("component outside [0, 1]".into()));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(KineticsError::InvalidPopulations(format!("components sum to {s}")));
        }
        Ok(Populations(p))
    }

    /// All population in one level.
    pub fn pure(level: Level) -> Self {
        let mut p = [0.0; LEVEL_COUNT];
        p[level.index()] = 1.0;
        Populations(p)
    }

    pub fn uniform() -> Self {
        Populations([1.0 / LEVEL_COUNT as f64; LEVEL_COUNT])
    }

    pub(crate) fn from_vector(v: &Vector7) -> Self {
        let mut p = [0.0; LEVEL_COUNT];
        p.copy_from_slice(v.as_slice());
        Populations(p)
    }

    pub fn get(&self, level: Level) -> f64 {
        self.0[level.index()]
    }

    pub fn as_array(&self) -> &[f64; LEVEL_COUNT] {
        &self.0
    }

    pub fn to_vector(&self) -> Vector7 {
        Vector7::from_column_slice(&self.0)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// p₃ + p₄
    pub fn nv_minus_excited(&self) -> f64 {
        self.get(Level::L3) + self.get(Level::L4)
    }

    /// p₇
    pub fn nv_zero_excited(&self) -> f64 {
        self.get(Level::L7)
    }
}

impl fmt::Display for Populations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "p{}={:.6e}", i + 1, p)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Both charge states with photo-ionization and recombination.
    #[default]
    Full,
    /// NV⁻ only; levels 6 and 7 are inert.
    NvMinusOnly,
}

impl Variant {
    /// Number of leading levels that take part in the dynamics.
    pub fn active_levels(self) -> usize {
        match self {
            Variant::Full => LEVEL_COUNT,
            Variant::NvMinusOnly => 5,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::NvMinusOnly => "nv_minus_only",
        })
    }
}

/// Generator of the population dynamics, `dp/dt = m · p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateMatrix {
    pub m: Matrix7,
    pub variant: Variant,
}

impl RateMatrix {
    fn empty(variant: Variant) -> Self {
        RateMatrix {
            m: Matrix7::zeros(),
            variant,
        }
    }

    /// Moves population from `from` to `to` at `rate` (s⁻¹).
    fn transfer(&mut self, from: Level, to: Level, rate: f64) {
        let (i, j) = (from.index(), to.index());
        self.m[(j, i)] += rate;
        self.m[(i, i)] -= rate;
    }

    pub fn entry(&self, to: Level, from: Level) -> f64 {
        self.m[(to.index(), from.index())]
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.m.iter().fold(0.0, |a, &x| a.max(x.abs()))
    }

    pub fn column_sums(&self) -> [f64; LEVEL_COUNT] {
        let mut out = [0.0; LEVEL_COUNT];
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.m.column(j).iter().sum();
        }
        out
    }

    /// Partition of the active levels into closed communicating classes
    /// (1-based level numbers). The steady state is unique iff there is
    /// exactly one.
    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        let n = self.variant.active_levels();
        let mut reach = [[false; LEVEL_COUNT]; LEVEL_COUNT];
        for (i, row) in reach.iter_mut().enumerate().take(n) {
            row[i] = true;
            for (j, r) in row.iter_mut().enumerate().take(n) {
                if i != j && self.m[(j, i)] > 0.0 {
                    *r = true;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut seen = [false; LEVEL_COUNT];
        for i in 0..n {
            if seen[i] {
                continue;
            }
            let closed = (0..n).all(|j| !reach[i][j] || reach[j][i]);
            let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
            for &j in &class {
                seen[j] = true;
            }
            if closed {
                classes.push(class.into_iter().map(|j| j + 1).collect());
            }
        }
        classes
    }
}

/// Assembles the rate matrix for one operating point.
///
/// Transitions (from → to: rate):
///
/// | channel | transitions |
/// |---|---|
/// | pumping | 1→3, 2→4: k_pump_g + k_pump_r |
/// | spontaneous + stimulated decay | 3→1: r31 + k_stim, 4→2: r42 + k_stim |
/// | ISC | 3→5: r35, 4→5: r45 |
/// | singlet decay | 5→1: r51, 5→2: r52 |
/// | excited-state ionization | 3→6, 4→6: k_ion_g + k_ion_r |
/// | singlet ionization | 5→6: k_ion_s |
/// | NV⁰ pumping | 6→7: k_pump_nv0 |
/// | NV⁰ decay | 7→6: r76 + k_stim_nv0 |
/// | recombination | 7→1, 7→2: (k_rec_g + k_rec_r) / 2 each |
///
/// Every transfer removes from its source what it adds to its target, so
/// columns sum to zero.
pub fn build_rate_matrix(
    params: &NvParameters,
    rates: &DrivingRates,
    variant: Variant,
) -> Result<RateMatrix, KineticsError> {
    params.validate().map_err(KineticsError::InvalidParameters)?;
    if rates.as_array().iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
        return Err(KineticsError::InvalidParameters(vec![Violation {
            code: crate::model::ViolationCode::NegativeRate,
            field: "driving_rates".into(),
            message: "driving rates must be finite and non-negative".into(),
        }]));
    }

    use Level::*;
    let mut rm = RateMatrix::empty(variant);
    let pump = rates.k_pump_g + rates.k_pump_r;
    rm.transfer(L1, L3, pump);
    rm.transfer(L2, L4, pump);
    rm.transfer(L3, L1, params.r31 + rates.k_stim);
    rm.transfer(L4, L2, params.r42 + rates.k_stim);
    rm.transfer(L3, L5, params.r35);
    rm.transfer(L4, L5, params.r45);
    rm.transfer(L5, L1, params.r51);
    rm.transfer(L5, L2, params.r52);

    if variant == Variant::Full {
        let ion = rates.k_ion_g + rates.k_ion_r;
        rm.transfer(L3, L6, ion);
        rm.transfer(L4, L6, ion);
        rm.transfer(L5, L6, rates.k_ion_s);
        rm.transfer(L6, L7, rates.k_pump_nv0);
        rm.transfer(L7, L6, params.r76 + rates.k_stim_nv0);
        let rec = 0.5 * (rates.k_rec_g + rates.k_rec_r);
        rm.transfer(L7, L1, rec);
        rm.transfer(L7, L2, rec);
    }
    Ok(rm)
}

/// `m · p`, in s⁻¹.
pub fn residual(matrix: &RateMatrix, p: &Populations) -> [f64; LEVEL_COUNT] {
    let r = matrix.m * p.to_vector();
    let mut out = [0.0; LEVEL_COUNT];
    out.copy_from_slice(r.as_slice());
    out
}

/// Unique stationary populations of `matrix`.
///
/// Uniqueness is decided structurally from the transition graph; the
/// populations come from a direct solve with one balance row replaced by the
/// normalization constraint, restricted to the closed class. Levels outside
/// it (and levels 6, 7 in the `NvMinusOnly` variant) are exactly zero.
pub fn steady_state(matrix: &RateMatrix, tolerance: f64) -> Result<Populations, KineticsError> {
    let classes = matrix.closed_classes();
    if classes.len() != 1 {
        return Err(KineticsError::DegenerateSteadyState {
            closed_classes: classes,
        });
    }

    // Transient levels carry no stationary population; solve on the class.
    let support = &classes[0];
    let n = support.len();
    let scale = matrix.max_abs_entry();
    if !scale.is_finite() {
        return Err(KineticsError::NumericalFailure {
            reason: format!("matrix scale {scale}"),
        });
    }
    let norm = if scale > 0.0 { scale } else { 1.0 };
    let mut a = DMatrix::from_fn(n, n, |i, j| matrix.m[(support[i] - 1, support[j] - 1)]);
    let mut b = DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = norm;
    }
    b[n - 1] = norm;
    let x = a.lu().solve(&b).ok_or_else(|| KineticsError::NumericalFailure {
        reason: "singular system after normalization".into(),
    })?;

    let mut p = Vector7::zeros();
    for (i, &level) in support.iter().enumerate() {
        let v = x[i];
        if !v.is_finite() || v < -SIMPLEX_TOLERANCE {
            return Err(KineticsError::NumericalFailure {
                reason: format!("component p{level} = {v:e}"),
            });
        }
        p[level - 1] = v.max(0.0);
    }
    let total = p.sum();
    p /= total;

    let r = (matrix.m * p).amax();
    if r > tolerance * norm {
        return Err(KineticsError::NumericalFailure {
            reason: format!("residual {r:e} exceeds {:e}", tolerance * norm),
        });
    }
    Ok(Populations::from_vector(&p))
}

//! Measurable quantities derived from steady-state populations.

use crate::kinetics::{Level, Populations};
use crate::model::{CavityGeometry, NvParameters};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservableError {
    #[error("green-only excited populations are zero; f_sp undefined")]
    ZeroDenominator,
}

/// The constants that enter the single-pass gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainContext {
    pub field_enhancement_f: f64,
    pub sigma_se: f64,
    pub eta: f64,
    pub beta: f64,
    pub rho_nv: f64,
    pub sample_length: f64,
}

impl GainContext {
    pub fn new(params: &NvParameters, geom: &CavityGeometry) -> Self {
        GainContext {
            field_enhancement_f: geom.field_enhancement_f,
            sigma_se: params.sigma_se,
            eta: params.eta,
            beta: params.beta,
            rho_nv: params.rho_nv,
            sample_length: params.sample_length,
        }
    }

    /// F · σ_se · ρ_NV · l
    pub fn gain_scale(&self) -> f64 {
        self.field_enhancement_f * self.sigma_se * self.rho_nv * self.sample_length
    }
}

/// Ratio of total intra-cavity red power to the seed-only power. Half the
/// stimulated power leaves through the collection mirror.
pub fn amplification_factor(p: &Populations, ctx: &GainContext) -> f64 {
    let inverted = p.nv_minus_excited() + ctx.eta * p.nv_zero_excited();
    1.0 + 0.5 * inverted * ctx.gain_scale()
}

/// Spontaneous emission with the red seed relative to green pumping alone.
pub fn spontaneous_factor(
    p_with_red: &Populations,
    p_green_only: &Populations,
    beta: f64,
) -> Result<f64, ObservableError> {
    let den = p_green_only.nv_minus_excited() + beta * p_green_only.nv_zero_excited();
    if den <= 0.0 {
        return Err(ObservableError::ZeroDenominator);
    }
    Ok((p_with_red.nv_minus_excited() + beta * p_with_red.nv_zero_excited()) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeFractions {
    pub nv_minus_total: f64,
    pub nv_zero_total: f64,
    pub p_minus_excited: f64,
    pub p_zero_excited: f64,
}

pub fn charge_fractions(p: &Populations) -> ChargeFractions {
    use Level::*;
    ChargeFractions {
        nv_minus_total: [L1, L2, L3, L4, L5].iter().map(|&l| p.get(l)).sum(),
        nv_zero_total: p.get(L6) + p.get(L7),
        p_minus_excited: p.nv_minus_excited(),
        p_zero_excited: p.nv_zero_excited(),
    }
}

/// Everything reported for one (green, red) operating point. Powers in W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservablePoint {
    pub green_power: f64,
    pub red_power: f64,
    pub f_amp: f64,
    pub f_sp: f64,
    pub p_minus_excited: f64,
    pub p_zero_excited: f64,
    pub nv_minus_total: f64,
    pub nv_zero_total: f64,
}

//! Physical constants, NV-centre parameters, cavity geometry, and the
//! conversion from laser input power to per-centre driving rates.
//!
//! Everything in here is SI: W, m, s, m², m⁻³. Unit conversion from
//! lab units (mW, nm, µm, MHz, ppm) happens at the configuration boundary.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// Wavelength of the green pump laser.
pub const GREEN_WAVELENGTH: f64 = 532e-9;
/// Wavelength of the red seed laser, resonant with the cavity.
pub const RED_WAVELENGTH: f64 = 721e-9;

/// Default fraction of green input power reaching the sample through the
/// dielectric coating.
pub const DEFAULT_GREEN_TRANSMISSION: f64 = 0.6;
/// Default ratio of intra-cavity to fibre-input power for the red seed.
pub const DEFAULT_FIELD_ENHANCEMENT: f64 = 1200.0;
/// Default flat-top mode radius.
pub const DEFAULT_SPOT_RADIUS: f64 = 5e-6;

/// Atomic number density of diamond, cm⁻³. Used for ppm conversions.
pub const DIAMOND_ATOM_DENSITY_CM3: f64 = 1.76e23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub planck_constant: f64,
    pub light_speed: f64,
}

impl PhysicalConstants {
    /// Exact SI (2019) values.
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        planck_constant: 6.626_070_15e-34,
        light_speed: 299_792_458.0,
    };

    pub fn photon_energy(&self, wavelength: f64) -> f64 {
        self.planck_constant * self.light_speed / wavelength
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA
    }
}

/// Rate constants, cross-sections and ratios of the seven-level NV model.
///
/// Level numbering: 1, 2 are the NV⁻ ground states (m_s = 0, ±1), 3, 4 the
/// matching NV⁻ excited states, 5 the NV⁻ singlet, 6 and 7 the NV⁰ ground
/// and excited states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NvParameters {
    /// Radiative decay 3 → 1, s⁻¹.
    pub r31: f64,
    /// Radiative decay 4 → 2, s⁻¹.
    pub r42: f64,
    /// Inter-system crossing 3 → 5, s⁻¹.
    pub r35: f64,
    /// Inter-system crossing 4 → 5, s⁻¹.
    pub r45: f64,
    /// Singlet decay 5 → 1, s⁻¹.
    pub r51: f64,
    /// Singlet decay 5 → 2, s⁻¹.
    pub r52: f64,
    /// NV⁰ radiative decay 7 → 6, s⁻¹.
    pub r76: f64,
    /// NV⁻ absorption cross-section at 532 nm, m².
    pub sigma_g: f64,
    /// NV⁻ absorption cross-section at 721 nm, m².
    pub sigma_r: f64,
    /// NV⁻ stimulated-emission cross-section at 721 nm, m².
    pub sigma_se: f64,
    /// Excited-state ionization cross-section, green, m².
    pub sigma_i_g: f64,
    /// Excited-state ionization cross-section, red, m².
    pub sigma_i_r: f64,
    /// Singlet ionization cross-section, red, m².
    pub sigma_i_s: f64,
    /// Recombination cross-section, green, m².
    pub sigma_r_g: f64,
    /// Recombination cross-section, red, m².
    pub sigma_r_r: f64,
    /// NV⁰ / NV⁻ green absorption ratio.
    pub xi: f64,
    /// NV⁰ / NV⁻ stimulated-emission ratio.
    pub eta: f64,
    /// NV⁰ / NV⁻ spontaneous-emission rate ratio.
    pub beta: f64,
    /// NV density, m⁻³.
    pub rho_nv: f64,
    /// Sample thickness (taken as the gain length), m.
    pub sample_length: f64,
}

const MHZ: f64 = 1e6;

impl NvParameters {
    /// Literature values used for the HPHT type-1b sample, with the ratio
    /// entries expanded against their base cross-section or rate.
    pub fn literature() -> Self {
        let r31 = 63.93 * MHZ;
        let r76 = 0.74 * r31;
        let sigma_se = 3.22e-21;
        let sigma_g = 3.1e-21;
        NvParameters {
            r31,
            r42: r31,
            r35: 7.93 * MHZ,
            r45: 53.25 * MHZ,
            r51: 0.98 * MHZ,
            r52: 0.72 * MHZ,
            r76,
            sigma_g,
            sigma_r: 3e-24,
            sigma_se,
            sigma_i_g: 0.037 * sigma_g,
            sigma_i_r: 0.071 * sigma_se,
            sigma_i_s: 0.0215 * sigma_se,
            sigma_r_g: 0.08 * sigma_g,
            sigma_r_r: 0.22 * sigma_se,
            xi: 1.3,
            eta: 1.0 / 3.0,
            beta: r76 / r31,
            rho_nv: 3e23,
            sample_length: 50e-6,
        }
    }

    /// Alias: the level-4 radiative decay is written `r41` in some
    /// formulations; it is `r42`.
    pub fn r41(&self) -> f64 {
        self.r42
    }

    fn rates(&self) -> [(&'static str, f64); 7] {
        [
            ("r31", self.r31),
            ("r42", self.r42),
            ("r35", self.r35),
            ("r45", self.r45),
            ("r51", self.r51),
            ("r52", self.r52),
            ("r76", self.r76),
        ]
    }

    fn cross_sections(&self) -> [(&'static str, f64); 8] {
        [
            ("sigma_g", self.sigma_g),
            ("sigma_r", self.sigma_r),
            ("sigma_se", self.sigma_se),
            ("sigma_i_g", self.sigma_i_g),
            ("sigma_i_r", self.sigma_i_r),
            ("sigma_i_s", self.sigma_i_s),
            ("sigma_r_g", self.sigma_r_g),
            ("sigma_r_r", self.sigma_r_r),
        ]
    }

    /// Checks every invariant and reports all violations, not just the first.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        for (name, v) in self.rates() {
            if !v.is_finite() {
                out.push(Violation::new(ViolationCode::NonFinite, name, format!("non-finite rate {name}")));
            } else if v < 0.0 {
                out.push(Violation::new(ViolationCode::NegativeRate, name, format!("negative rate {name}")));
            }
        }
        for (name, v) in self.cross_sections() {
            if !v.is_finite() {
                out.push(Violation::new(
                    ViolationCode::NonFinite,
                    name,
                    format!("non-finite cross-section {name}"),
                ));
            } else if v < 0.0 {
                out.push(Violation::new(
                    ViolationCode::NegativeCrossSection,
                    name,
                    format!("negative cross-section {name}"),
                ));
            }
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            out.push(Violation::new(ViolationCode::RatioOutOfRange, "xi", "xi must be positive"));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            out.push(Violation::new(ViolationCode::RatioOutOfRange, "eta", "eta outside [0, 1]"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            out.push(Violation::new(ViolationCode::RatioOutOfRange, "beta", "beta must be positive"));
        }
        if !(self.rho_nv > 0.0 && self.rho_nv.is_finite()) {
            out.push(Violation::new(ViolationCode::NonPositiveDensity, "rho_nv", "non-positive NV density"));
        }
        if !(self.sample_length > 0.0 && self.sample_length.is_finite()) {
            out.push(Violation::new(
                ViolationCode::NonPositiveLength,
                "sample_length",
                "non-positive sample length",
            ));
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

impl Default for NvParameters {
    fn default() -> Self {
        Self::literature()
    }
}

/// Literature parameters with derived entries expanded and `beta = r76 / r31`.
pub fn default_parameters() -> NvParameters {
    NvParameters::literature()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    NegativeRate,
    NegativeCrossSection,
    RatioOutOfRange,
    NonPositiveDensity,
    NonPositiveLength,
    NonFinite,
    InvalidGeometry,
}

/// One failed parameter invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, field: &str, message: impl Into<String>) -> Self {
        Violation {
            code,
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Green,
    Red,
}

impl Channel {
    pub fn wavelength(self) -> f64 {
        match self {
            Channel::Green => GREEN_WAVELENGTH,
            Channel::Red => RED_WAVELENGTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserDrive {
    /// m
    pub wavelength: f64,
    /// Power at the fibre input, W.
    pub input_power: f64,
}

impl LaserDrive {
    pub fn green(input_power: f64) -> Self {
        LaserDrive {
            wavelength: GREEN_WAVELENGTH,
            input_power,
        }
    }

    pub fn red(input_power: f64) -> Self {
        LaserDrive {
            wavelength: RED_WAVELENGTH,
            input_power,
        }
    }
}

/// Flat-top cylindrical mode model of the cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    /// m
    pub spot_radius: f64,
    /// Intra-cavity / input power ratio for the resonant red seed
    /// (roughly finesse / π).
    pub field_enhancement_f: f64,
    /// Fraction of green input power transmitted into the cavity.
    pub green_transmission: f64,
}

impl Default for CavityGeometry {
    fn default() -> Self {
        CavityGeometry {
            spot_radius: DEFAULT_SPOT_RADIUS,
            field_enhancement_f: DEFAULT_FIELD_ENHANCEMENT,
            green_transmission: DEFAULT_GREEN_TRANSMISSION,
        }
    }
}

impl CavityGeometry {
    pub fn spot_area(&self) -> f64 {
        PI * self.spot_radius * self.spot_radius
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        if !(self.spot_radius > 0.0 && self.spot_radius.is_finite()) {
            out.push(Violation::new(
                ViolationCode::InvalidGeometry,
                "spot_radius",
                "non-positive spot radius",
            ));
        }
        if !(self.field_enhancement_f >= 1.0 && self.field_enhancement_f.is_finite()) {
            out.push(Violation::new(
                ViolationCode::InvalidGeometry,
                "field_enhancement_f",
                "field enhancement below 1",
            ));
        }
        if !(self.green_transmission > 0.0 && self.green_transmission <= 1.0) {
            out.push(Violation::new(
                ViolationCode::InvalidGeometry,
                "green_transmission",
                "green transmission outside (0, 1]",
            ));
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

/// On-sample intensity (W/m²) for one laser under the flat-top approximation.
///
/// Red power is scaled by the field enhancement, green power by the coating
/// transmission. The drive is expected to match the channel wavelength; this
/// is checked in debug builds only.
pub fn intensity(drive: &LaserDrive, geom: &CavityGeometry, channel: Channel) -> f64 {
    debug_assert!(
        (drive.wavelength - channel.wavelength()).abs() <= 1e-6 * channel.wavelength(),
        "drive wavelength does not match channel"
    );
    let scale = match channel {
        Channel::Green => geom.green_transmission,
        Channel::Red => geom.field_enhancement_f,
    };
    scale * drive.input_power / geom.spot_area()
}

/// Intensity-driven transition rates for one centre, all in s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DrivingRates {
    pub k_pump_g: f64,
    pub k_pump_r: f64,
    pub k_stim: f64,
    pub k_ion_g: f64,
    pub k_ion_r: f64,
    pub k_ion_s: f64,
    pub k_rec_g: f64,
    pub k_rec_r: f64,
    pub k_pump_nv0: f64,
    pub k_stim_nv0: f64,
}

impl DrivingRates {
    pub fn is_dark(&self) -> bool {
        self.as_array().iter().all(|&k| k == 0.0)
    }

    pub fn as_array(&self) -> [f64; 10] {
        [
            self.k_pump_g,
            self.k_pump_r,
            self.k_stim,
            self.k_ion_g,
            self.k_ion_r,
            self.k_ion_s,
            self.k_rec_g,
            self.k_rec_r,
            self.k_pump_nv0,
            self.k_stim_nv0,
        ]
    }
}

/// Photon flux per unit cross-section for each beam, multiplied out against
/// every channel's cross-section.
pub fn driving_rates(
    params: &NvParameters,
    i_green: f64,
    i_red: f64,
    constants: &PhysicalConstants,
) -> DrivingRates {
    let flux_g = i_green / constants.photon_energy(GREEN_WAVELENGTH);
    let flux_r = i_red / constants.photon_energy(RED_WAVELENGTH);
    DrivingRates {
        k_pump_g: flux_g * params.sigma_g,
        k_pump_r: flux_r * params.sigma_r,
        k_stim: flux_r * params.sigma_se,
        k_ion_g: flux_g * params.sigma_i_g,
        k_ion_r: flux_r * params.sigma_i_r,
        k_ion_s: flux_r * params.sigma_i_s,
        k_rec_g: flux_g * params.sigma_r_g,
        k_rec_r: flux_r * params.sigma_r_r,
        k_pump_nv0: flux_g * params.xi * params.sigma_g,
        k_stim_nv0: flux_r * params.eta * params.sigma_se,
    }
}

/// Convenience: input powers (W) straight to driving rates.
pub fn driving_rates_from_powers(
    params: &NvParameters,
    geom: &CavityGeometry,
    green_power: f64,
    red_power: f64,
) -> DrivingRates {
    let i_g = intensity(&LaserDrive::green(green_power), geom, Channel::Green);
    let i_r = intensity(&LaserDrive::red(red_power), geom, Channel::Red);
    driving_rates(params, i_g, i_r, &PhysicalConstants::CODATA)
}

/// NV concentration in ppm to number density in m⁻³.
pub fn ppm_to_density(ppm: f64) -> f64 {
    ppm * 1e-6 * DIAMOND_ATOM_DENSITY_CM3 * 1e6
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn literature_values() {
        let p = default_parameters();
        assert_eq!(p.r31, 6.393e7);
        assert_eq!(p.r42, p.r31);
        assert_relative_eq!(p.r35, 7.93e6, max_relative = 1e-15);
        assert_relative_eq!(p.r51, 9.8e5, max_relative = 1e-15);
        assert_relative_eq!(p.sigma_i_r, 2.2862e-22, max_relative = 1e-12);
        assert_relative_eq!(p.sigma_i_g, 0.037 * 3.1e-21, max_relative = 1e-15);
        assert_relative_eq!(p.sigma_r_r, 0.22 * 3.22e-21, max_relative = 1e-15);
        assert_relative_eq!(p.r76, 0.74 * 6.393e7, max_relative = 1e-15);
        assert_relative_eq!(p.beta, 0.74, max_relative = 1e-15);
        assert_eq!(p.sigma_se, 3.22e-21);
        assert_eq!(p.rho_nv, 3e23);
        assert_eq!(p.r41(), p.r42);
    }

    #[test]
    fn defaults_validate() {
        assert!(default_parameters().validate().is_ok());
        assert!(CavityGeometry::default().validate().is_ok());
    }

    #[test]
    fn negative_cross_section_reported() {
        let p = NvParameters {
            sigma_g: -1.0,
            ..default_parameters()
        };
        let v = p.validate().unwrap_err();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::NegativeCrossSection);
        assert_eq!(v[0].message, "negative cross-section sigma_g");
    }

    #[test]
    fn zero_density_reported() {
        let p = NvParameters {
            rho_nv: 0.0,
            ..default_parameters()
        };
        let v = p.validate().unwrap_err();
        assert_eq!(v[0].code, ViolationCode::NonPositiveDensity);
        assert_eq!(v[0].message, "non-positive NV density");
    }

    #[test]
    fn all_violations_collected() {
        let p = NvParameters {
            r35: -1.0,
            eta: 1.5,
            rho_nv: 0.0,
            ..default_parameters()
        };
        let codes: Vec<_> = p.validate().unwrap_err().into_iter().map(|v| v.code).collect();
        assert_eq!(
            codes,
            vec![
                ViolationCode::NegativeRate,
                ViolationCode::RatioOutOfRange,
                ViolationCode::NonPositiveDensity
            ]
        );
    }

    #[test]
    fn intensity_examples() {
        let geom = CavityGeometry::default();
        assert_eq!(intensity(&LaserDrive::red(0.0), &geom, Channel::Red), 0.0);
        let i_r = intensity(&LaserDrive::red(67e-6), &geom, Channel::Red);
        assert_relative_eq!(i_r, 1200.0 * 6.7e-5 / (PI * 25e-12), max_relative = 1e-14);
        assert_relative_eq!(i_r, 1.024e9, max_relative = 1e-3);
        let i_g = intensity(&LaserDrive::green(50e-3), &geom, Channel::Green);
        assert_relative_eq!(i_g, 3.82e8, max_relative = 1e-3);
    }

    #[test]
    fn intensity_scales_with_power_and_area() {
        let geom = CavityGeometry::default();
        let a = intensity(&LaserDrive::green(1e-3), &geom, Channel::Green);
        let b = intensity(&LaserDrive::green(3e-3), &geom, Channel::Green);
        assert_relative_eq!(b, 3.0 * a, max_relative = 1e-15);
        let wide = CavityGeometry {
            spot_radius: 2.0 * geom.spot_radius,
            ..geom
        };
        let c = intensity(&LaserDrive::green(1e-3), &wide, Channel::Green);
        assert_relative_eq!(c, a / 4.0, max_relative = 1e-15);
    }

    #[test]
    fn dark_rates_are_zero() {
        let k = driving_rates(&default_parameters(), 0.0, 0.0, &PhysicalConstants::CODATA);
        assert!(k.is_dark());
    }

    #[test]
    fn green_pump_rate() {
        let c = PhysicalConstants::CODATA;
        assert_relative_eq!(c.photon_energy(GREEN_WAVELENGTH), 3.736e-19, max_relative = 1e-3);
        let k = driving_rates(&default_parameters(), 3.82e8, 0.0, &c);
        assert_relative_eq!(k.k_pump_g, 3.82e8 * 3.1e-21 / c.photon_energy(532e-9), max_relative = 1e-15);
        assert_relative_eq!(k.k_pump_g, 3.17e6, max_relative = 1e-2);
        assert_eq!(k.k_stim, 0.0);
        assert_eq!(k.k_rec_r, 0.0);
    }

    #[test]
    fn stim_to_red_pump_ratio() {
        let k = driving_rates(&default_parameters(), 0.0, 1.024e9, &PhysicalConstants::CODATA);
        assert_relative_eq!(k.k_stim / k.k_pump_r, 3.22e-21 / 3e-24, max_relative = 1e-14);
        assert_eq!(k.k_pump_g, 0.0);
    }

    #[test]
    fn red_rates_linear() {
        let p = default_parameters();
        let c = PhysicalConstants::CODATA;
        let a = driving_rates(&p, 2e8, 5e8, &c);
        let b = driving_rates(&p, 2e8, 1e9, &c);
        for (x, y) in [
            (a.k_pump_r, b.k_pump_r),
            (a.k_stim, b.k_stim),
            (a.k_ion_r, b.k_ion_r),
            (a.k_ion_s, b.k_ion_s),
            (a.k_rec_r, b.k_rec_r),
            (a.k_stim_nv0, b.k_stim_nv0),
        ] {
            assert_eq!(2.0 * x, y);
        }
        assert_eq!(a.k_pump_g, b.k_pump_g);
        assert_eq!(a.k_ion_g, b.k_ion_g);
        assert_eq!(a.k_rec_g, b.k_rec_g);
        assert_eq!(a.k_pump_nv0, b.k_pump_nv0);
    }

    #[test]
    fn ppm_matches_quoted_density() {
        // 1.7 ppm quoted alongside 3e17 cm^-3
        assert_relative_eq!(ppm_to_density(1.7), 3e23, max_relative = 3e-3);
    }
}

//! Run configuration in lab units (MHz, mW, µW, µm, ppm). Conversion to SI
//! happens once, in [`RunConfig::parameters`], [`RunConfig::geometry`] and
//! the sweep resolvers.

use std::path::{Path, PathBuf};

use nvcav_core::experiments::log_spaced;
use nvcav_core::model::ppm_to_density;
use nvcav_core::{CavityGeometry, NvParameters, SweepConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub parameters: ParameterSection,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub io: IoSection,
}

/// Overrides of the built-in parameter table. Absent keys keep their
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r31_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r42_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r35_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r45_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r51_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r52_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r76_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_g_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_r_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_se_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_i_g_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_i_r_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_i_s_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_r_g_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_r_r_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nv_density_ppm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nv_density_cm3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_length_um: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spot_radius_um: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_enhancement_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub green_transmission: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

/// Pump powers are given either as an explicit list or as a log range.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub green_mw: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub green_log_mw: Option<LogRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub red_uw: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Also write SVG plots next to sweep CSVs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plots: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Green,
    Grid,
}

fn milli(x: f64) -> f64 {
    x / 1e3
}

fn micro(x: f64) -> f64 {
    x / 1e6
}

fn mhz(x: f64) -> f64 {
    x * 1e6
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(flatten(&e.to_string())))?;
        cfg.parameters()?;
        cfg.geometry()?;
        Ok(cfg)
    }

    /// Reads a TOML file, or the `#` metadata block of a CSV written by
    /// this tool.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if text.starts_with('#') {
            Self::from_toml(&metadata_block(&text))
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn variant(&self) -> Variant {
        self.parameters.variant.unwrap_or_default()
    }

    pub fn parameters(&self) -> Result<NvParameters, CliError> {
        let s = &self.parameters;
        let mut p = NvParameters::literature();
        let set = |slot: &mut f64, v: Option<f64>, conv: fn(f64) -> f64| {
            if let Some(v) = v {
                *slot = conv(v);
            }
        };
        let same: fn(f64) -> f64 = |x| x;
        set(&mut p.r31, s.r31_mhz, mhz);
        set(&mut p.r42, s.r42_mhz, mhz);
        set(&mut p.r35, s.r35_mhz, mhz);
        set(&mut p.r45, s.r45_mhz, mhz);
        set(&mut p.r51, s.r51_mhz, mhz);
        set(&mut p.r52, s.r52_mhz, mhz);
        set(&mut p.r76, s.r76_mhz, mhz);
        set(&mut p.sigma_g, s.sigma_g_m2, same);
        set(&mut p.sigma_r, s.sigma_r_m2, same);
        set(&mut p.sigma_se, s.sigma_se_m2, same);
        set(&mut p.sigma_i_g, s.sigma_i_g_m2, same);
        set(&mut p.sigma_i_r, s.sigma_i_r_m2, same);
        set(&mut p.sigma_i_s, s.sigma_i_s_m2, same);
        set(&mut p.sigma_r_g, s.sigma_r_g_m2, same);
        set(&mut p.sigma_r_r, s.sigma_r_r_m2, same);
        set(&mut p.xi, s.xi, same);
        set(&mut p.eta, s.eta, same);
        set(&mut p.beta, s.beta, same);
        set(&mut p.sample_length, s.sample_length_um, micro);
        match (s.nv_density_ppm, s.nv_density_cm3) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "give nv_density_ppm or nv_density_cm3, not both".into(),
                ))
            }
            (Some(ppm), None) => p.rho_nv = ppm_to_density(ppm),
            (None, Some(cm3)) => p.rho_nv = cm3 * 1e6,
            (None, None) => {}
        }
        p.validate().map_err(|v| {
            CliError::Config(
                v.iter()
                    .map(|x| format!("{}: {}", x.field, x.message))
                    .collect::<Vec<_>>()
                    .join("; "),
            )
        })?;
        Ok(p)
    }

    pub fn geometry(&self) -> Result<CavityGeometry, CliError> {
        let s = &self.geometry;
        let mut g = CavityGeometry::default();
        if let Some(r) = s.spot_radius_um {
            g.spot_radius = micro(r);
        }
        if let Some(f) = s.field_enhancement_f {
            g.field_enhancement_f = f;
        }
        if let Some(t) = s.green_transmission {
            g.green_transmission = t;
        }
        g.validate().map_err(|v| {
            CliError::Config(v.iter().map(|x| x.message.clone()).collect::<Vec<_>>().join("; "))
        })?;
        Ok(g)
    }

    /// Copy with the sweep lists filled in from the command's defaults.
    pub fn effective(&self, kind: SweepKind) -> Result<RunConfig, CliError> {
        let mut out = self.clone();
        let s = &mut out.sweep;
        if s.green_mw.is_some() && s.green_log_mw.is_some() {
            return Err(CliError::Config("give green_mw or green_log_mw, not both".into()));
        }
        match kind {
            SweepKind::Green => {
                if s.green_mw.is_none() && s.green_log_mw.is_none() {
                    s.green_log_mw = Some(LogRange {
                        min: 1.0,
                        max: 150.0,
                        points: 150,
                    });
                }
                s.red_uw.get_or_insert_with(|| vec![67.0]);
            }
            SweepKind::Grid => {
                if s.green_mw.is_none() && s.green_log_mw.is_none() {
                    let mut g = vec![1.0];
                    g.extend((1..=60).map(|i| f64::from(i) * 2.5));
                    s.green_mw = Some(g);
                }
                s.red_uw
                    .get_or_insert_with(|| vec![1000.0, 5000.0, 15000.0, 47000.0]);
            }
        }
        Ok(out)
    }

    /// SI sweep configuration; call on an [`effective`](Self::effective)
    /// config.
    pub fn sweep_config(&self) -> Result<SweepConfig, CliError> {
        let s = &self.sweep;
        let green = match (&s.green_mw, &s.green_log_mw) {
            (Some(list), None) => list.iter().map(|&x| milli(x)).collect(),
            (None, Some(r)) => {
                if r.points < 2 || !(r.min > 0.0 && r.max > r.min) {
                    return Err(CliError::Config("green_log_mw needs 0 < min < max and points >= 2".into()));
                }
                log_spaced(milli(r.min), milli(r.max), r.points)
            }
            _ => return Err(CliError::Config("no pump powers configured".into())),
        };
        let red = s
            .red_uw
            .as_ref()
            .ok_or_else(|| CliError::Config("no seed powers configured".into()))?
            .iter()
            .map(|&x| micro(x))
            .collect();
        let cfg = SweepConfig {
            green_powers: green,
            red_powers: red,
            geometry: self.geometry()?,
            params: self.parameters()?,
            variant: self.variant(),
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.io.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn plots(&self) -> bool {
        self.io.plots.unwrap_or(false)
    }
}

/// The leading `#` lines of a file with the `# ` prefix removed.
pub fn metadata_block(text: &str) -> String {
    let mut out = String::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.strip_prefix("# ").unwrap_or(&line[1..]);
        out.push_str(body);
        out.push('\n');
    }
    out
}

fn flatten(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

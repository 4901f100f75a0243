//! `nvcav` command-line front end. Every command is a thin composition of
//! `nvcav_core` calls; this crate handles configuration, units and files.

pub mod config;
pub mod plot;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nvcav_core::experiments::{self, ExperimentError};
use nvcav_core::kinetics::DEFAULT_STEADY_TOLERANCE;
use nvcav_core::spectroscopy::{self, emission_peaks, DIAMOND_REFRACTIVE_INDEX};
use nvcav_core::{LorentzianPeak, Spectrum};
use serde::Deserialize;

pub use config::{RunConfig, SweepKind};
pub use plot::PlotKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    SchemaMismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::SchemaMismatch(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Solver(_) => "solver",
            CliError::Io(_) => "io",
            CliError::SchemaMismatch(_) => "schema_mismatch",
        }
    }

    /// Single-line JSON for stderr.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

impl From<nvcav_core::Error> for CliError {
    fn from(e: nvcav_core::Error) -> Self {
        match e {
            nvcav_core::Error::Experiment(ExperimentError::InvalidConfig(m)) => CliError::Config(m),
            other => CliError::Solver(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "nvcav", version, about = "NV-centre cavity photodynamics")]
pub struct Cli {
    /// TOML run configuration, or a CSV previously written by nvcav.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady state and observables at one operating point.
    Steady {
        #[arg(long, default_value_t = 50.0)]
        green_mw: f64,
        #[arg(long, default_value_t = 67.0)]
        red_uw: f64,
    },
    /// Pump-power sweep at one seed power.
    SweepGreen(SweepArgs),
    /// Pump × seed power grid.
    SweepGrid(SweepArgs),
    /// Füchtbauer-Ladenburg cross-section of an emission spectrum.
    Xsection {
        #[arg(long)]
        input: PathBuf,
        /// Refractive index.
        #[arg(long, default_value_t = DIAMOND_REFRACTIVE_INDEX)]
        n: f64,
        /// Radiative rate; defaults to the configured r31.
        #[arg(long)]
        gamma_mhz: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multi-Lorentzian fit of an emission spectrum.
    FitPeaks {
        #[arg(long)]
        input: PathBuf,
        /// CSV with columns center_nm, amplitude, fwhm_nm; defaults to the
        /// built-in eight-peak table.
        #[arg(long)]
        initial: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes the built-in eight-peak emission spectrum.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 600.0)]
        min_nm: f64,
        #[arg(long, default_value_t = 850.0)]
        max_nm: f64,
        #[arg(long, default_value_t = 2000)]
        points: usize,
    },
    /// SVG figure from a sweep CSV.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Output CSV; defaults to a file in the configured output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write SVG figures next to the CSV.
    #[arg(long)]
    pub plot: bool,
}

const NM: f64 = 1e-9;

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Steady { green_mw, red_uw } => steady(&cfg, *green_mw, *red_uw, stdout),
        Command::SweepGreen(a) => sweep(&cfg, SweepKind::Green, a, stdout),
        Command::SweepGrid(a) => sweep(&cfg, SweepKind::Grid, a, stdout),
        Command::Xsection {
            input,
            n,
            gamma_mhz,
            out,
        } => xsection(&cfg, input, *n, *gamma_mhz, out.as_deref(), stdout),
        Command::FitPeaks {
            input,
            initial,
            max_iter,
            tol,
            out,
        } => fit_peaks(input, initial.as_deref(), *max_iter, *tol, out.as_deref(), stdout),
        Command::Synth {
            out,
            min_nm,
            max_nm,
            points,
        } => {
            let s = spectroscopy::synthesize_spectrum(&emission_peaks(), min_nm * NM, max_nm * NM, *points, true)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let mut w = create(out)?;
            s.write_csv(&mut w).map_err(|e| io_err(out, e))?;
            w.flush().map_err(|e| io_err(out, e))
        }
        Command::Plot { input, kind, out } => emit_plot(input, *kind, out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn steady(cfg: &RunConfig, green_mw: f64, red_uw: f64, stdout: &mut dyn Write) -> Result<(), CliError> {
    let params = cfg.parameters()?;
    let geom = cfg.geometry()?;
    let (g, r) = (green_mw / 1e3, red_uw / 1e6);
    let pops = experiments::solve_point(&params, &geom, cfg.variant(), g, r)?;
    let obs = experiments::evaluate_point(&params, &geom, cfg.variant(), g, r)?;
    let report = serde_json::json!({
        "green_power_mW": green_mw,
        "red_power_uW": red_uw,
        "variant": cfg.variant().to_string(),
        "populations": pops.as_array(),
        "population_sum": pops.sum(),
        "f_amp": obs.f_amp,
        "f_sp": obs.f_sp,
        "p_minus_excited": obs.p_minus_excited,
        "p_zero_excited": obs.p_zero_excited,
        "nv_minus_total": obs.nv_minus_total,
        "nv_zero_total": obs.nv_zero_total,
    });
    writeln!(stdout, "{}", serde_json::to_string_pretty(&report).unwrap()).map_err(|e| CliError::Io(e.to_string()))
}

/// `#` metadata lines: a TOML comment naming the tool, then the effective
/// config, so the block parses back as a config.
pub fn metadata_lines(cfg: &RunConfig, command: &str) -> Vec<String> {
    let mut lines = vec![format!(
        "# nvcav {} {command}; steady tolerance {DEFAULT_STEADY_TOLERANCE:e}",
        env!("CARGO_PKG_VERSION")
    )];
    lines.extend(cfg.to_toml().lines().map(str::to_string));
    lines
}

fn sweep(cfg: &RunConfig, kind: SweepKind, args: &SweepArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let eff = cfg.effective(kind)?;
    let sc = eff.sweep_config()?;
    let (name, plots): (&str, &[PlotKind]) = match kind {
        SweepKind::Green => ("sweep-green", &[PlotKind::PumpSweep, PlotKind::Populations]),
        SweepKind::Grid => ("sweep-grid", &[PlotKind::SeedSweep]),
    };
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| eff.output_dir().join(format!("{}.csv", name.replace('-', "_"))));
    let meta = metadata_lines(&eff, name);
    let mut failed = 0;
    let mut w = create(&out)?;
    match kind {
        SweepKind::Green => {
            let red = sc.red_powers.first().copied().unwrap_or(0.0);
            if sc.red_powers.len() != 1 {
                return Err(CliError::Config("sweep-green needs exactly one red power".into()));
            }
            let pts = experiments::sweep_green(&sc)?;
            experiments::write_sweep_csv(&mut w, &meta, pts.iter().map(|p| (p.green_power, red, Some(p))))
                .map_err(|e| io_err(&out, e))?;
        }
        SweepKind::Grid => {
            let grid = experiments::sweep_grid(&sc)?;
            failed = grid.rows.iter().filter(|r| r.outcome.is_err()).count();
            grid.write_csv(&mut w, &meta).map_err(|e| io_err(&out, e))?;
        }
    }
    w.flush().map_err(|e| io_err(&out, e))?;
    drop(w);
    if args.plot || eff.plots() {
        for &k in plots {
            let svg_path = out.with_extension(format!("{}.svg", plot_suffix(k)));
            emit_plot(&out, k, &svg_path)?;
        }
    }
    writeln!(stdout, "{}", out.display()).map_err(|e| CliError::Io(e.to_string()))?;
    if failed > 0 {
        return Err(CliError::Solver(format!("{failed} grid points failed; written as NaN")));
    }
    Ok(())
}

fn plot_suffix(k: PlotKind) -> &'static str {
    match k {
        PlotKind::PumpSweep => "pump-sweep",
        PlotKind::SeedSweep => "seed-sweep",
        PlotKind::Populations => "populations",
    }
}

pub fn emit_plot(input: &Path, kind: PlotKind, out: &Path) -> Result<(), CliError> {
    let f = File::open(input).map_err(|e| io_err(input, e))?;
    let svg = plot::render(std::io::BufReader::new(f), kind)?;
    let mut w = create(out)?;
    w.write_all(svg.as_bytes()).map_err(|e| io_err(out, e))?;
    w.flush().map_err(|e| io_err(out, e))
}

fn read_spectrum(path: &Path) -> Result<Spectrum, CliError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    Spectrum::read_csv(std::io::BufReader::new(f)).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub const RED_LINE_NM: f64 = 721.0;

fn xsection(
    cfg: &RunConfig,
    input: &Path,
    n: f64,
    gamma_mhz: Option<f64>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let spectrum = read_spectrum(input)?;
    let gamma = match gamma_mhz {
        Some(g) => g * 1e6,
        None => cfg.parameters()?.r31,
    };
    let curve = spectroscopy::fl_cross_section(&spectrum, n, gamma).map_err(|e| CliError::Solver(e.to_string()))?;
    let sigma = spectroscopy::cross_section_at(&curve, RED_LINE_NM * NM).map_err(|e| CliError::Solver(e.to_string()))?;
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir().join("xsection.csv"));
    let mut w = create(&out)?;
    writeln!(w, "# nvcav {} xsection; n = {n}; gamma = {gamma} s^-1", env!("CARGO_PKG_VERSION"))
        .map_err(|e| io_err(&out, e))?;
    curve.write_csv(&mut w).map_err(|e| io_err(&out, e))?;
    w.flush().map_err(|e| io_err(&out, e))?;
    let summary = serde_json::json!({
        "wavelength_nm": RED_LINE_NM,
        "sigma_m2": sigma,
        "n": n,
        "gamma_per_s": gamma,
        "output": out.display().to_string(),
    });
    writeln!(stdout, "{summary}").map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Deserialize)]
struct PeakRow {
    center_nm: f64,
    amplitude: f64,
    fwhm_nm: f64,
}

fn read_peaks(path: &Path) -> Result<Vec<LorentzianPeak>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(path, e))?;
    let mut peaks = Vec::new();
    for row in rdr.deserialize::<PeakRow>() {
        let row = row.map_err(|e| CliError::SchemaMismatch(format!("{}: {e}", path.display())))?;
        peaks.push(
            LorentzianPeak::new(row.center_nm * NM, row.amplitude, row.fwhm_nm * NM)
                .map_err(|e| CliError::Config(e.to_string()))?,
        );
    }
    Ok(peaks)
}

fn fit_peaks(
    input: &Path,
    initial: Option<&Path>,
    max_iter: usize,
    tol: f64,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let spectrum = read_spectrum(input)?;
    let init = match initial {
        Some(p) => read_peaks(p)?,
        None => emission_peaks(),
    };
    let fit = spectroscopy::fit_peaks(&spectrum, &init, max_iter, tol).map_err(|e| CliError::Solver(e.to_string()))?;
    let report = fit.to_json().to_string();
    if let Some(out) = out {
        let mut w = create(out)?;
        writeln!(w, "{report}").map_err(|e| io_err(out, e))?;
        w.flush().map_err(|e| io_err(out, e))?;
    }
    writeln!(stdout, "{report}").map_err(|e| CliError::Io(e.to_string()))?;
    fit.ensure_converged().map_err(|e| CliError::Solver(e.to_string()))?;
    Ok(())
}

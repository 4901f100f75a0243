//! Static SVG figures from sweep CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// f_amp and f_sp against pump power.
    PumpSweep,
    /// f_amp against seed power at fixed pump powers.
    SeedSweep,
    /// Charge-state and excited populations against pump power.
    Populations,
}

impl PlotKind {
    fn required(self) -> &'static [&'static str] {
        match self {
            PlotKind::PumpSweep => &["green_power_mW", "f_amp", "f_sp"],
            PlotKind::SeedSweep => &["green_power_mW", "red_power_mW", "f_amp"],
            PlotKind::Populations => &[
                "green_power_mW",
                "nv_minus_total",
                "nv_zero_total",
                "p_minus_excited",
                "p_zero_excited",
            ],
        }
    }
}

struct Table {
    columns: BTreeMap<String, Vec<f64>>,
}

impl Table {
    fn read<R: Read>(reader: R, required: &[&str]) -> Result<Table, CliError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| CliError::SchemaMismatch(e.to_string()))?
            .clone();
        let mut idx = Vec::new();
        for name in required {
            match headers.iter().position(|h| h == *name) {
                Some(i) => idx.push(i),
                None => return Err(CliError::SchemaMismatch(format!("missing column {name}"))),
            }
        }
        let mut columns: BTreeMap<String, Vec<f64>> = required.iter().map(|n| (n.to_string(), Vec::new())).collect();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| CliError::SchemaMismatch(e.to_string()))?;
            for (name, &i) in required.iter().zip(&idx) {
                let v: f64 = rec
                    .get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| CliError::SchemaMismatch(format!("bad value in column {name}")))?;
                columns.get_mut(*name).unwrap().push(v);
            }
        }
        if columns[required[0]].is_empty() {
            return Err(CliError::SchemaMismatch("no data rows".into()));
        }
        Ok(Table { columns })
    }

    fn col(&self, name: &str) -> &[f64] {
        &self.columns[name]
    }
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

struct Panel {
    title: String,
    x_label: String,
    y_label: String,
    log_x: bool,
    reference_one: bool,
    series: Vec<Series>,
}

const PANEL_W: f64 = 460.0;
const PANEL_H: f64 = 340.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub fn render<R: Read>(reader: R, kind: PlotKind) -> Result<String, CliError> {
    let t = Table::read(reader, kind.required())?;
    let green = t.col("green_power_mW");
    let curve = |y: &str| -> Vec<(f64, f64)> { green.iter().copied().zip(t.col(y).iter().copied()).collect() };
    let panels = match kind {
        PlotKind::PumpSweep => vec![
            Panel {
                title: "Amplification factor".into(),
                x_label: "green input power (mW)".into(),
                y_label: "f_amp".into(),
                log_x: true,
                reference_one: true,
                series: vec![Series {
                    label: "f_amp".into(),
                    points: curve("f_amp"),
                }],
            },
            Panel {
                title: "Spontaneous-emission factor".into(),
                x_label: "green input power (mW)".into(),
                y_label: "f_sp".into(),
                log_x: true,
                reference_one: true,
                series: vec![Series {
                    label: "f_sp".into(),
                    points: curve("f_sp"),
                }],
            },
        ],
        PlotKind::SeedSweep => {
            let red = t.col("red_power_mW");
            let f = t.col("f_amp");
            let mut by_green: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
            for i in 0..green.len() {
                by_green.entry(green[i].to_bits()).or_default().push((red[i], f[i]));
            }
            let all: Vec<f64> = by_green.keys().map(|&b| f64::from_bits(b)).collect();
            let mut chosen: Vec<f64> = all
                .iter()
                .copied()
                .filter(|g| [25.0, 50.0, 75.0, 100.0].iter().any(|c| (g - c).abs() < 1e-9 * c))
                .collect();
            if chosen.is_empty() {
                let step = (all.len() / 4).max(1);
                chosen = all.iter().copied().step_by(step).take(4).collect();
            }
            vec![Panel {
                title: "Amplification factor vs seed power".into(),
                x_label: "red input power (mW)".into(),
                y_label: "f_amp".into(),
                log_x: false,
                reference_one: true,
                series: chosen
                    .iter()
                    .map(|g| {
                        let mut pts = by_green[&g.to_bits()].clone();
                        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                        Series {
                            label: format!("green {} mW", g),
                            points: pts,
                        }
                    })
                    .collect(),
            }]
        }
        PlotKind::Populations => vec![
            Panel {
                title: "Charge-state populations".into(),
                x_label: "green input power (mW)".into(),
                y_label: "population".into(),
                log_x: true,
                reference_one: false,
                series: vec![
                    Series {
                        label: "NV- total".into(),
                        points: curve("nv_minus_total"),
                    },
                    Series {
                        label: "NV0 total".into(),
                        points: curve("nv_zero_total"),
                    },
                ],
            },
            Panel {
                title: "Excited populations".into(),
                x_label: "green input power (mW)".into(),
                y_label: "population".into(),
                log_x: true,
                reference_one: false,
                series: vec![
                    Series {
                        label: "p3 + p4".into(),
                        points: curve("p_minus_excited"),
                    },
                    Series {
                        label: "p7".into(),
                        points: curve("p_zero_excited"),
                    },
                ],
            },
        ],
    };
    Ok(svg(&panels))
}

fn svg(panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{PANEL_H:.0}" viewBox="0 0 {width:.0} {PANEL_H:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        draw_panel(&mut s, p, i as f64 * PANEL_W);
    }
    s.push_str("</svg>\n");
    s
}

fn finite_points(p: &Panel) -> impl Iterator<Item = (f64, f64)> + '_ {
    p.series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(move |&(x, y)| x.is_finite() && y.is_finite() && (!p.log_x || x > 0.0))
}

fn draw_panel(s: &mut String, p: &Panel, x0: f64) {
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in finite_points(p) {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if !xmin.is_finite() {
        (xmin, xmax, ymin, ymax) = (1.0, 10.0, 0.0, 1.0);
    }
    if p.reference_one {
        ymin = ymin.min(1.0);
        ymax = ymax.max(1.0);
    }
    let pad = if ymax > ymin { 0.05 * (ymax - ymin) } else { 0.5 };
    ymin -= pad;
    ymax += pad;
    let (fx, ilx) = if p.log_x {
        (f64::log10 as fn(f64) -> f64, true)
    } else {
        (std::convert::identity as fn(f64) -> f64, false)
    };
    let (ax0, ax1) = if xmax > xmin { (fx(xmin), fx(xmax)) } else { (fx(xmin) - 0.5, fx(xmin) + 0.5) };
    let left = x0 + MARGIN_L;
    let right = x0 + PANEL_W - MARGIN_R;
    let top = MARGIN_T;
    let bottom = PANEL_H - MARGIN_B;
    let px = |x: f64| left + (fx(x) - ax0) / (ax1 - ax0) * (right - left);
    let py = |y: f64| bottom - (y - ymin) / (ymax - ymin) * (bottom - top);

    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
        (left + right) / 2.0,
        top - 15.0,
        escape(&p.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );

    let xticks = if ilx { log_ticks(xmin, xmax) } else { nice_ticks(xmin, xmax) };
    for t in xticks {
        let x = px(t);
        if x < left - 1e-9 || x > right + 1e-9 {
            continue;
        }
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 18.0,
            tick_label(t)
        );
    }
    for t in nice_ticks(ymin, ymax) {
        let y = py(t);
        if y < top - 1e-9 || y > bottom + 1e-9 {
            continue;
        }
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        PANEL_H - 15.0,
        escape(&p.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
        x0 + 18.0,
        (top + bottom) / 2.0,
        x0 + 18.0,
        (top + bottom) / 2.0,
        escape(&p.y_label)
    );

    if p.reference_one {
        let y = py(1.0);
        let _ = writeln!(
            s,
            r#"<line x1="{left:.2}" y1="{y:.2}" x2="{right:.2}" y2="{y:.2}" stroke="black" stroke-dasharray="2,3"/>"#
        );
    }

    for (k, series) in p.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = series
            .points
            .iter()
            .filter(|&&(x, y)| x.is_finite() && y.is_finite() && (!p.log_x || x > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = top + 15.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"/>"#,
            right - 130.0,
            right - 110.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            right - 105.0,
            ly + 4.0,
            escape(&series.label)
        );
    }
}

fn nice_ticks(min: f64, max: f64) -> Vec<f64> {
    if !(max > min) {
        return vec![min];
    }
    let raw = (max - min) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (min / step).ceil() as i64;
    let last = (max / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn log_ticks(min: f64, max: f64) -> Vec<f64> {
    let lo = min.log10().floor() as i32;
    let hi = max.log10().ceil() as i32;
    let mut out = Vec::new();
    for e in lo..=hi {
        for m in [1.0, 2.0, 5.0] {
            out.push(m * 10f64.powi(e));
        }
    }
    out
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "# meta\ngreen_power_mW,red_power_mW,f_amp,f_sp,p_minus_excited,p_zero_excited,nv_minus_total,nv_zero_total\n\
1,0.067,1.1,1.02,0.1,0.01,0.7,0.3\n10,0.067,1.5,0.95,0.2,0.02,0.72,0.28\n100,0.067,1.8,1.04,0.25,0.03,0.75,0.25\n";

    #[test]
    fn pump_sweep_has_reference_line_and_is_deterministic() {
        let a = render(CSV.as_bytes(), PlotKind::PumpSweep).unwrap();
        let b = render(CSV.as_bytes(), PlotKind::PumpSweep).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("stroke-dasharray").count(), 2);
        assert_eq!(a.matches("<polyline").count(), 2);
        assert!(a.starts_with("<svg"));
    }

    #[test]
    fn schema_errors() {
        let header_only = "green_power_mW,f_amp,f_sp\n";
        assert!(matches!(
            render(header_only.as_bytes(), PlotKind::PumpSweep),
            Err(CliError::SchemaMismatch(_))
        ));
        assert!(matches!(
            render("a,b\n1,2\n".as_bytes(), PlotKind::Populations),
            Err(CliError::SchemaMismatch(_))
        ));
        assert!(matches!(render("".as_bytes(), PlotKind::PumpSweep), Err(CliError::SchemaMismatch(_))));
    }

    #[test]
    fn seed_sweep_groups_by_pump_power() {
        let csv = "green_power_mW,red_power_mW,f_amp\n25,1,1.2\n25,5,1.1\n50,1,1.3\n50,5,1.2\n30,1,1.25\n30,5,1.15\n";
        let svg = render(csv.as_bytes(), PlotKind::SeedSweep).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("green 25 mW"));
    }

    #[test]
    fn ticks() {
        let t = nice_ticks(0.0, 1.0);
        assert_eq!(t.len(), 6);
        assert_eq!(tick_label(t[3]), "0.6");
        assert_eq!(tick_label(0.25), "0.25");
        assert_eq!(tick_label(150.0), "150");
    }
}

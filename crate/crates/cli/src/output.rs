//! Serialization of trajectories, summaries and plots.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use plotters::prelude::*;
use qtransport_core::analysis::Summary;
use qtransport_core::scenario::RunDiagnostics;
use qtransport_core::ObservableRecord;

use crate::CliError;

/// Renders a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), fmt_f64)
}

/// Time-series column names for an `m`-site channel.
pub fn csv_header(m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=m).map(|i| format!("n_{i}")));
    h.extend((1..m).map(|i| format!("j_{i}")));
    h.extend(["mu_L", "mu_R", "N_L", "N_R", "I", "coh_max"].map(String::from));
    h
}

/// Numeric row matching [`csv_header`].
pub fn csv_row(r: &ObservableRecord) -> Vec<f64> {
    let mut row = Vec::with_capacity(2 * r.n.len() + 6);
    row.push(r.t);
    row.extend(&r.n);
    row.extend(&r.j);
    row.extend([r.mu_l, r.mu_r, r.pop_l, r.pop_r, r.current, r.coh_max]);
    row
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Writes a header and rows of preformatted fields.
pub fn write_table<W: Write>(w: W, header: &[String], rows: &[Vec<String>]) -> Result<(), csv::Error> {
    let mut out = csv_writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, records: &[ObservableRecord]) -> Result<(), CliError> {
    let m = records.first().map_or(0, |r| r.n.len());
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| csv_row(r).into_iter().map(fmt_f64).collect())
        .collect();
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_table(file, &csv_header(m), &rows).map_err(|e| CliError::io(path, e))
}

/// Flat `key=value` summary text.
pub fn render_summary(s: &Summary, diag: Option<&RunDiagnostics>) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    kv("tau_rel", fmt_f64(s.tau_rel));
    kv("tau_eq_formula", fmt_opt(s.tau_eq_formula));
    kv("tau_eq_fitted", fmt_opt(s.tau_eq_fitted));
    kv("mu_inf", fmt_f64(s.mu_inf));
    kv("n_inf", fmt_f64(s.n_inf));
    kv("N_inf", fmt_f64(s.pop_inf));
    kv("G_formula", fmt_opt(s.g_formula));
    kv("G_measured", fmt_opt(s.g_measured));
    kv("G_fermi_bound", fmt_opt(s.g_fermi_bound));
    if let Some(d) = diag {
        kv("t_end", fmt_f64(d.t_end));
        kv("conservation_drift", fmt_f64(d.conservation_drift));
        kv("endpoint_dev", fmt_f64(d.endpoint_dev));
    }
    match &s.report {
        Some(r) => {
            kv(
                "metastable_window",
                format!("{},{}", fmt_f64(r.metastable_window.0), fmt_f64(r.metastable_window.1)),
            );
            if let Some(w) = r.asymptotic_window {
                kv("asymptotic_window", format!("{},{}", fmt_f64(w.0), fmt_f64(w.1)));
            }
            for c in &r.checks {
                kv(&format!("consistency_{}", c.name), c.passed.to_string());
                kv(&format!("deviation_{}", c.name), fmt_opt(c.measured));
            }
        }
        None => kv("report", "none".to_string()),
    }
    kv("checks_passed", s.checks_passed().to_string());
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Line plot of the selected columns against `t`, optionally against
/// `log10 t` (rows with `t <= 0` are then dropped).
pub fn write_svg(
    path: &Path,
    header: &[String],
    rows: &[Vec<f64>],
    columns: &[String],
    log_x: bool,
) -> Result<(), CliError> {
    let mut idx = Vec::with_capacity(columns.len());
    for c in columns {
        match header.iter().position(|h| h == c) {
            Some(i) if i > 0 => idx.push(i),
            _ => return Err(CliError::config(format!("plot column not in output: {c}"))),
        }
    }
    let pts: Vec<(f64, &Vec<f64>)> = rows
        .iter()
        .filter(|r| !log_x || r[0] > 0.0)
        .map(|r| (if log_x { r[0].log10() } else { r[0] }, r))
        .collect();
    if pts.len() < 2 || idx.is_empty() {
        return Err(CliError::config("nothing to plot".to_string()));
    }
    let (x0, x1) = (pts[0].0, pts[pts.len() - 1].0);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, r) in &pts {
        for &i in &idx {
            y0 = y0.min(r[i]);
            y1 = y1.max(r[i]);
        }
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);

    let draw = || -> Result<(), Box<dyn std::error::Error>> {
        let root = SVGBackend::new(path, (900, 540)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))?;
        chart
            .configure_mesh()
            .x_desc(if log_x { "log10 t" } else { "t" })
            .draw()?;
        for (k, &i) in idx.iter().enumerate() {
            let color = Palette99::pick(k).to_rgba();
            chart
                .draw_series(LineSeries::new(
                    pts.iter().map(|(x, r)| (*x, r[i])),
                    color.stroke_width(2),
                ))?
                .label(header[i].clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()?;
        root.present()?;
        Ok(())
    };
    draw().map_err(|e| CliError::io(path, e))
}

//! CSV tables, SVG line plots and pass/fail summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::params::SECONDS_PER_DAY;
use crate::plant::AnnualRun;
use crate::scenario::{EstimationRun, ProfileSnapshot};

/// First line of every CSV file written here.
pub const CSV_MAGIC: &str = "# icestate-csv v1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)
            .expect("csv output is UTF-8");
        Ok(format!("{CSV_MAGIC}\n{body}"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    /// Parses a file produced by [`Table::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let body = text.strip_prefix(CSV_MAGIC).map(|b| b.trim_start_matches('\n')).unwrap_or(&text);
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let header = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| crate::Error::Parse(format!("bad number {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }
}

fn station_label(eta: f64) -> String {
    format!("T_eta_{eta}")
}

/// t_days, h_m, H_m, T_surface_C, then the ice profile at each station.
pub fn annual_table(run: Option<&AnnualRun>, stations: &[f64]) -> Table {
    let mut header = vec!["t_days".to_string(), "h_m".into(), "H_m".into(), "T_surface_C".into()];
    header.extend(stations.iter().map(|&s| station_label(s)));
    let mut t = Table::new(header);
    for r in run.iter().flat_map(|r| &r.records) {
        let mut row = vec![r.days(), r.snow_depth, r.thickness, r.surface_temperature];
        row.extend(&r.profile);
        t.push(row);
    }
    t
}

/// t_days, Phi, Linf_C, H_tilde_m, fitted_rate (the log-slope of Φ since
/// the previous sample), overshoot_C.
pub fn estimation_table(run: &EstimationRun) -> Table {
    let mut t = Table::new(["t_days", "Phi", "Linf_C", "H_tilde_m", "fitted_rate", "overshoot_C"]);
    let mut prev: Option<(f64, f64)> = None;
    for s in &run.samples {
        let rate = match prev {
            Some((t0, p0)) if s.time > t0 && p0 > 0.0 && s.diag.phi > 0.0 => -(s.diag.phi / p0).ln() / (s.time - t0),
            _ => 0.0,
        };
        t.push(vec![s.days(), s.diag.phi, s.diag.linf, s.diag.h_tilde, rate, s.diag.overshoot]);
        prev = Some((s.time, s.diag.phi));
    }
    t
}

pub fn snapshot_table(snap: &ProfileSnapshot) -> Table {
    let mut t = Table::new(["x_m", "T_true_C", "T_est_C"]);
    for ((x, a), b) in snap.depths.iter().zip(&snap.truth).zip(&snap.estimate) {
        t.push(vec![*x, *a, *b]);
    }
    t
}

/// Φ of two runs on their common sample times.
pub fn comparison_table(open: &EstimationRun, closed: &EstimationRun) -> Table {
    let mut t = Table::new([
        "t_days",
        "Phi_open",
        "Phi_backstepping",
        "Linf_open_C",
        "Linf_backstepping_C",
        "H_tilde_backstepping_m",
    ]);
    for (a, b) in open.samples.iter().zip(&closed.samples) {
        t.push(vec![a.days(), a.diag.phi, b.diag.phi, a.diag.linf, b.diag.linf, b.diag.h_tilde]);
    }
    t
}

/// One named polyline.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// A self-contained SVG line chart. `log_y` plots log₁₀ of positive values.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let (w, h) = (720.0, 420.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
                .map(|&(x, y)| (x, ty(y)))
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let sy = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let ylab = if log_y { format!("1e{fy:.1}") } else { format!("{fy:.3}") };
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{fx:.2}</text>"#, sx(fx), h - bottom + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{ylab}</text>"#, left - 6.0, sy(fy) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 10.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (i, (ser, p)) in series.iter().zip(&pts).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let ly = top + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
            w - right - 150.0,
            escape(ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryLine {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl SummaryLine {
    pub fn check(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            status: if passed { Status::Pass } else { Status::Fail },
            detail,
        }
    }

    pub fn skip(name: &str, detail: String) -> Self {
        Self {
            name: name.into(),
            status: Status::Skip,
            detail,
        }
    }

    pub fn info(name: &str, detail: String) -> Self {
        Self::skip(name, detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub lines: Vec<SummaryLine>,
}

impl Summary {
    pub fn push(&mut self, line: SummaryLine) {
        self.lines.push(line);
    }

    pub fn failed(&self) -> bool {
        self.lines.iter().any(|l| l.status == Status::Fail)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            let tag = match l.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skip => "INFO",
            };
            let _ = writeln!(s, "{tag} {}: {}", l.name, l.detail);
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }
}

pub fn days(t: f64) -> f64 {
    t / SECONDS_PER_DAY
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(["a", "b"]);
        t.push(vec![1.5, -2.25e-7]);
        t.push(vec![0.1, 3.0]);
        t.write_csv(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(CSV_MAGIC));
        let back = Table::read_csv(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("b").unwrap(), vec![-2.25e-7, 3.0]);
    }

    #[test]
    fn header_only_table() {
        let t = annual_table(None, &[0.5]);
        let s = t.to_csv_string().unwrap();
        assert_eq!(s.lines().count(), 2);
        assert!(s.contains("T_eta_0.5"));
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let s = svg_plot(
            "x < y",
            "t",
            "v",
            &[Series { label: "a", points: vec![(0.0, 1.0), (1.0, 2.0)] }],
            true,
        );
        assert!(s.starts_with("<svg"));
        assert!(s.trim_end().ends_with("</svg>"));
        assert!(s.contains("x &lt; y"));
        let empty = svg_plot("e", "t", "v", &[], false);
        assert!(empty.contains("</svg>"));
    }

    #[test]
    fn summary_status() {
        let mut s = Summary::default();
        s.push(SummaryLine::check("a", true, "ok".into()));
        s.push(SummaryLine::skip("b", "n/a".into()));
        assert!(!s.failed());
        s.push(SummaryLine::check("c", false, "bad".into()));
        assert!(s.failed());
        assert!(s.render().contains("FAIL c: bad"));
    }
}

//! CSV series and a static SVG line chart.
//!
//! A series file has a header row; the first column is the x axis and every
//! further column is one line.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub x_label: String,
    pub x: Vec<f64>,
    /// `(name, values)` per line, each as long as `x`.
    pub lines: Vec<(String, Vec<f64>)>,
}

impl Series {
    pub fn validate(&self) -> Result<()> {
        if self.lines.is_empty() {
            return Err(Error::Format("series needs at least one y column".into()));
        }
        if self.x.len() < 2 {
            return Err(Error::Format("series needs at least two rows".into()));
        }
        if self.lines.iter().any(|(_, v)| v.len() != self.x.len()) {
            return Err(Error::Format("series columns differ in length".into()));
        }
        if self.x.iter().chain(self.lines.iter().flat_map(|(_, v)| v)).any(|v| !v.is_finite()) {
            return Err(Error::Format("series values must be finite".into()));
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

pub fn read_series(text: &str) -> Result<Series> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header.len() < 2 {
        return Err(Error::Format("series needs an x column and at least one y column".into()));
    }
    let mut x = Vec::new();
    let mut ys = vec![Vec::new(); header.len() - 1];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let mut vals = rec.iter().map(|f| {
            f.parse::<f64>()
                .map_err(|_| Error::Format(format!("row {}: {f:?} is not a number", i + 2)))
        });
        x.push(vals.next().transpose()?.unwrap_or(f64::NAN));
        for y in &mut ys {
            y.push(vals.next().transpose()?.unwrap_or(f64::NAN));
        }
    }
    let s = Series {
        x_label: header[0].clone(),
        x,
        lines: header[1..].iter().cloned().zip(ys).collect(),
    };
    s.validate()?;
    Ok(s)
}

pub fn write_series(series: &Series) -> Result<String> {
    series.validate()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once(series.x_label.as_str())
        .chain(series.lines.iter().map(|(n, _)| n.as_str()))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for (i, x) in series.x.iter().enumerate() {
        let row: Vec<String> = std::iter::once(*x)
            .chain(series.lines.iter().map(|(_, v)| v[i]))
            .map(|v| v.to_string())
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn load_series(path: impl AsRef<Path>) -> Result<Series> {
    let path = path.as_ref();
    read_series(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Tick step of the form 1, 2, or 5 times a power of ten giving about
/// `target` intervals over `span`.
fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Keep the minimum and maximum of each bucket so long series stay small
/// without losing their envelope.
fn decimate(x: &[f64], y: &[f64], buckets: usize) -> Vec<(f64, f64)> {
    if x.len() <= 2 * buckets {
        return x.iter().copied().zip(y.iter().copied()).collect();
    }
    let size = x.len().div_ceil(buckets);
    let mut out = Vec::with_capacity(2 * buckets);
    for start in (0..x.len()).step_by(size) {
        let end = (start + size).min(x.len());
        let (mut lo, mut hi) = (start, start);
        for i in start..end {
            if y[i] < y[lo] {
                lo = i;
            }
            if y[i] > y[hi] {
                hi = i;
            }
        }
        let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        out.push((x[a], y[a]));
        if b != a {
            out.push((x[b], y[b]));
        }
    }
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Render every line of `series` into one chart.
pub fn render_svg(series: &Series, title: &str) -> Result<String> {
    series.validate()?;
    let (w, h) = (800.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let (x0, x1) = range(series.x.iter().copied());
    let (y0, y1) = range(series.lines.iter().flat_map(|(_, v)| v.iter().copied()));
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (axis, (lo, hi)) in [("x", (x0, x1)), ("y", (y0, y1))] {
        let step = nice_step(hi - lo, 6);
        let mut t = (lo / step).ceil() * step;
        while t <= hi + step * 1e-9 {
            let label = format!("{}", (t / step).round() * step);
            if axis == "x" {
                let px = sx(t);
                let _ = writeln!(s, r##"<line x1="{px:.2}" y1="{top}" x2="{px:.2}" y2="{}" stroke="#ddd"/>"##, top + ph);
                let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{label}</text>"#, top + ph + 18.0);
            } else {
                let py = sy(t);
                let _ = writeln!(s, r##"<line x1="{left}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#ddd"/>"##, left + pw);
                let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, left - 6.0, py + 4.0);
            }
            t += step;
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 10.0,
        escape(&series.x_label)
    );
    for (i, (name, ys)) in series.lines.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = decimate(&series.x, ys, 1000)
            .into_iter()
            .map(|(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Series {
        Series {
            x_label: "t".into(),
            x: (0..50).map(|i| i as f64 * 0.1).collect(),
            lines: vec![
                ("a".into(), (0..50).map(|i| (i as f64 * 0.3).sin()).collect()),
                ("b<&>".into(), (0..50).map(|i| i as f64 * 0.01).collect()),
            ],
        }
    }

    #[test]
    fn csv_round_trip() {
        let s = sample();
        let text = write_series(&s).unwrap();
        let back = read_series(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(write_series(&back).unwrap(), text);
    }

    #[test]
    fn bad_csv() {
        assert!(read_series("t\n1\n2\n").is_err());
        assert!(read_series("t,a\n1,x\n2,3\n").is_err());
        assert!(read_series("t,a\n1,2\n").is_err());
    }

    #[test]
    fn svg_has_one_polyline_per_line() {
        let svg = render_svg(&sample(), "demo").unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;&amp;&gt;"));
    }

    #[test]
    fn long_series_are_decimated() {
        let x: Vec<f64> = (0..100_000).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 0.01).sin()).collect();
        let d = decimate(&x, &y, 1000);
        assert!(d.len() <= 2000);
        let max = d.iter().map(|p| p.1).fold(f64::MIN, f64::max);
        assert!((max - y.iter().copied().fold(f64::MIN, f64::max)).abs() < 1e-12);
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(nice_step(10.0, 5), 2.0);
        assert_eq!(nice_step(0.7, 6), 0.2);
        assert_eq!(nice_step(1000.0, 4), 500.0);
    }
}

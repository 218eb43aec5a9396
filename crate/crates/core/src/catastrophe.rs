//! Arousal/performance paths: whole-market stress (reciprocal multivariate
//! entropy) against an asset's own entropy, sliced into crisis segments and
//! rendered as SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Result, StressError};
use crate::series::{format_value, write_file, CrisisRegistry};
use crate::stress::{Measure, StressSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub date: NaiveDate,
    /// External stress, `1 / Mod-MMSE` of the basket.
    pub arousal: f64,
    /// Internal performance, Mod-MSE of the asset.
    pub performance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatastrophePath {
    pub asset_id: String,
    pub points: Vec<PathPoint>,
    pub smoothing: usize,
}

/// Centred moving mean over `k` consecutive entries; entries whose window
/// runs off either end, or touches a gap, are dropped.
fn centred_mean(s: &StressSeries, k: usize) -> BTreeMap<NaiveDate, f64> {
    let before = (k - 1) / 2;
    let after = k / 2;
    let n = s.len();
    let mut out = BTreeMap::new();
    if n < k {
        return out;
    }
    for i in before..n - after {
        let window = &s.values[i - before..=i + after];
        let defined: Option<Vec<f64>> = window.iter().copied().collect();
        if let Some(w) = defined {
            // pivoted on the first value so a constant window returns itself
            let pivot = w[0];
            let dev: f64 = w.iter().map(|v| v - pivot).sum();
            out.insert(s.dates[i], pivot + dev / k as f64);
        }
    }
    out
}

/// Pairs the asset's Mod-MSE with the basket's reciprocal Mod-MMSE on their
/// common dates, each smoothed by a centred `smoothing`-day mean first.
pub fn build_path(
    performance: &StressSeries,
    arousal: &StressSeries,
    smoothing: usize,
) -> Result<CatastrophePath> {
    if performance.measure != Measure::ModMse {
        return Err(StressError::WrongMeasure {
            expected: Measure::ModMse.as_str(),
            found: performance.measure.as_str(),
        });
    }
    if arousal.measure != Measure::InvModMmse {
        return Err(StressError::WrongMeasure {
            expected: Measure::InvModMmse.as_str(),
            found: arousal.measure.as_str(),
        });
    }
    if smoothing == 0 {
        return Err(StressError::InvalidParameter("smoothing must be at least 1".into()));
    }
    if performance.is_empty() || arousal.is_empty() {
        return Err(StressError::EmptyIntersection(
            "performance or arousal series is empty".into(),
        ));
    }
    let perf = centred_mean(performance, smoothing);
    let arou = centred_mean(arousal, smoothing);
    let points: Vec<PathPoint> = perf
        .iter()
        .filter_map(|(d, &p)| {
            arou.get(d).map(|&a| PathPoint {
                date: *d,
                arousal: a,
                performance: p,
            })
        })
        .filter(|p| p.arousal > 0.0 && p.performance > 0.0 && p.arousal.is_finite() && p.performance.is_finite())
        .collect();
    if points.is_empty() {
        return Err(StressError::EmptyIntersection(format!(
            "{} and {} share no usable dates",
            performance.instrument, arousal.instrument
        )));
    }
    Ok(CatastrophePath {
        asset_id: performance.instrument.clone(),
        points,
        smoothing,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrisisSegment {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub points: Vec<PathPoint>,
    /// Rank of each point in date order, lightest (0) to darkest.
    pub gradient_index: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sliced {
    pub segments: Vec<CrisisSegment>,
    pub warnings: Vec<String>,
}

/// One segment per registry period the path enters; empty periods produce a
/// warning instead.
pub fn slice_crises(path: &CatastrophePath, registry: &CrisisRegistry) -> Sliced {
    let mut out = Sliced::default();
    for period in registry.periods() {
        let points: Vec<PathPoint> = path
            .points
            .iter()
            .filter(|p| period.contains(p.date))
            .copied()
            .collect();
        if points.is_empty() {
            out.warnings.push(format!(
                "{}: no path points in {} [{}, {})",
                path.asset_id, period.label, period.start, period.end
            ));
            continue;
        }
        out.segments.push(CrisisSegment {
            label: period.label.clone(),
            start: period.start,
            end: period.end,
            gradient_index: (0..points.len()).collect(),
            points,
        });
    }
    out
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(StressError::TooShort {
            needed: 2,
            available: x.len().min(y.len()),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 || x.iter().all(|&v| v == x[0]) {
        return Err(StressError::Degenerate(
            "arousal is constant over the segment".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// Slope of performance regressed on arousal across a segment.
pub fn segment_slope(seg: &CrisisSegment) -> Result<f64> {
    let x: Vec<f64> = seg.points.iter().map(|p| p.arousal).collect();
    let y: Vec<f64> = seg.points.iter().map(|p| p.performance).collect();
    least_squares_slope(&x, &y)
}

/// `date,arousal,performance,segment_label`; the label names the first
/// registry period containing the date, or is empty.
pub fn path_csv(path: &CatastrophePath, registry: &CrisisRegistry) -> String {
    let mut out = String::from("date,arousal,performance,segment_label\n");
    for p in &path.points {
        let label = registry
            .periods()
            .iter()
            .find(|r| r.contains(p.date))
            .map(|r| r.label.as_str())
            .unwrap_or("");
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.date,
            format_value(p.arousal),
            format_value(p.performance),
            label
        );
    }
    out
}

pub fn write_path_csv(path: &CatastrophePath, registry: &CrisisRegistry, file: &Path) -> Result<()> {
    write_file(file, path_csv(path, registry).as_bytes())
}

/// One polyline worth of `(arousal, performance)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl From<&CatastrophePath> for PlotSeries {
    fn from(p: &CatastrophePath) -> Self {
        Self {
            label: p.asset_id.clone(),
            points: p.points.iter().map(|q| (q.arousal, q.performance)).collect(),
        }
    }
}

impl From<&CrisisSegment> for PlotSeries {
    fn from(s: &CrisisSegment) -> Self {
        Self {
            label: s.label.clone(),
            points: s.points.iter().map(|q| (q.arousal, q.performance)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgStyle {
    pub width: u32,
    pub height: u32,
    pub margin: u32,
    pub point_radius: f64,
    pub title: Option<String>,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self {
            width: 800,
            height: 600,
            margin: 70,
            point_radius: 2.5,
            title: None,
        }
    }
}

pub const X_LABEL: &str = "External stress (1/Mod-MMSE)";
pub const Y_LABEL: &str = "Performance (Mod-MSE)";

fn hsl_hex(h: f64, s: f64, l: f64) -> String {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = (h.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let to = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    format!("#{:02x}{:02x}{:02x}", to(r), to(g), to(b))
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders paths or segments as one polyline each, with per-point markers
/// shaded light to dark in date order.
pub fn emit_svg(series: &[PlotSeries], style: &SvgStyle) -> Result<String> {
    let series: Vec<&PlotSeries> = series.iter().filter(|s| !s.points.is_empty()).collect();
    if series.is_empty() {
        return Err(StressError::EmptyPlot);
    }
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = padded_range(all().map(|p| p.0));
    let (y0, y1) = padded_range(all().map(|p| p.1));
    let (w, h, m) = (style.width as f64, style.height as f64, style.margin as f64);
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(title) = &style.title {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="16">{}</text>"#,
            w / 2.0,
            m / 2.0,
            escape(title)
        );
    }
    let _ = writeln!(
        svg,
        r#"<g stroke="black" stroke-width="1"><line x1="{m:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{m:.2}" y1="{m:.2}" x2="{m:.2}" y2="{:.2}"/></g>"#,
        h - m,
        w - m,
        h - m,
        h - m
    );
    for t in 0..=4 {
        let f = t as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{xv:.3}</text>"#,
            px(xv),
            h - m + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{yv:.3}</text>"#,
            m - 6.0,
            py(yv) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{X_LABEL}</text>"#,
        w / 2.0,
        h - m / 4.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 {:.2} {:.2})">{Y_LABEL}</text>"#,
        m / 4.0,
        h / 2.0,
        m / 4.0,
        h / 2.0
    );

    let n = series.len();
    for (i, s) in series.iter().enumerate() {
        let hue = if n == 1 { 210.0 } else { 360.0 * i as f64 / n as f64 };
        let coords: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(svg, r#"<g data-label="{}">"#, escape(&s.label));
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            hsl_hex(hue, 0.6, 0.5),
            coords.join(" ")
        );
        let k = s.points.len();
        for (g, &(x, y)) in s.points.iter().enumerate() {
            let shade = if k > 1 { g as f64 / (k - 1) as f64 } else { 1.0 };
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{}"/>"#,
                px(x),
                py(y),
                style.point_radius,
                hsl_hex(hue, 0.7, 0.85 - 0.6 * shade)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{}">{}</text>"#,
            w - m + 5.0,
            m + 16.0 * i as f64,
            hsl_hex(hue, 0.6, 0.4),
            escape(&s.label)
        );
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{weekday_dates, MarketPeriod};

    fn dates(n: usize) -> Vec<NaiveDate> {
        weekday_dates(NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(), n)
    }

    fn series(measure: Measure, d: &[NaiveDate], v: &[f64]) -> StressSeries {
        StressSeries {
            measure,
            instrument: "A".into(),
            dates: d.to_vec(),
            values: v.iter().map(|&x| Some(x)).collect(),
        }
    }

    #[test]
    fn inner_join_without_smoothing() {
        let d = dates(4);
        let perf = series(Measure::ModMse, &d[..3], &[1.0, 2.0, 3.0]);
        let arou = series(Measure::InvModMmse, &d[1..], &[5.0, 6.0, 7.0]);
        let path = build_path(&perf, &arou, 1).unwrap();
        assert_eq!(path.points.len(), 2);
        assert_eq!(path.points[0].date, d[1]);
        assert_eq!((path.points[1].arousal, path.points[1].performance), (6.0, 3.0));
    }

    #[test]
    fn constant_inputs_collapse_to_one_location() {
        let d = dates(30);
        let perf = series(Measure::ModMse, &d, &[0.7; 30]);
        let arou = series(Measure::InvModMmse, &d, &[2.5; 30]);
        let path = build_path(&perf, &arou, 21).unwrap();
        assert_eq!(path.points.len(), 10);
        assert!(path.points.iter().all(|p| p.arousal == 2.5 && p.performance == 0.7));
    }

    #[test]
    fn centred_smoothing_by_hand() {
        let d = dates(5);
        let perf = series(Measure::ModMse, &d, &[1.0, 2.0, 4.0, 8.0, 16.0]);
        let arou = series(Measure::InvModMmse, &d, &[3.0, 3.0, 6.0, 9.0, 9.0]);
        let path = build_path(&perf, &arou, 3).unwrap();
        let want = [(4.0, 7.0 / 3.0), (6.0, 14.0 / 3.0), (8.0, 28.0 / 3.0)];
        assert_eq!(path.points.len(), 3);
        for (p, w) in path.points.iter().zip(want) {
            assert!((p.arousal - w.0).abs() < 1e-12 && (p.performance - w.1).abs() < 1e-12);
        }
        assert_eq!(path.points[0].date, d[1]);
    }

    #[test]
    fn gaps_and_wrong_measures() {
        let d = dates(7);
        let mut perf = series(Measure::ModMse, &d, &[1.0; 7]);
        perf.values[3] = None;
        let arou = series(Measure::InvModMmse, &d, &[1.0; 7]);
        let path = build_path(&perf, &arou, 3).unwrap();
        let kept: Vec<NaiveDate> = path.points.iter().map(|p| p.date).collect();
        assert_eq!(kept, vec![d[1], d[5]]);
        assert!(matches!(
            build_path(&arou, &perf, 1),
            Err(StressError::WrongMeasure { .. })
        ));
        let far = series(Measure::InvModMmse, &dates(40)[30..], &[1.0; 10]);
        assert!(matches!(
            build_path(&perf, &far, 1),
            Err(StressError::EmptyIntersection(_))
        ));
    }

    #[test]
    fn slope_cases() {
        assert_eq!(least_squares_slope(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(least_squares_slope(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]).unwrap(), 0.0);
        assert!(least_squares_slope(&[1.0], &[1.0]).is_err());
        assert!(least_squares_slope(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn one_point_segment() {
        let d = dates(10);
        let perf = series(Measure::ModMse, &d, &[1.0; 10]);
        let arou = series(Measure::InvModMmse, &d, &[2.0; 10]);
        let path = build_path(&perf, &arou, 1).unwrap();
        let reg = CrisisRegistry::new(vec![MarketPeriod {
            label: "one".into(),
            start: d[4],
            end: d[5],
        }])
        .unwrap();
        let sliced = slice_crises(&path, &reg);
        assert_eq!(sliced.segments.len(), 1);
        assert_eq!(sliced.segments[0].points.len(), 1);
        assert!(sliced.warnings.is_empty());
        assert!(segment_slope(&sliced.segments[0]).is_err());
    }

    #[test]
    fn svg_structure() {
        let one = PlotSeries {
            label: "A".into(),
            points: vec![(1.0, 2.0), (1.5, 2.5)],
        };
        let svg = emit_svg(std::slice::from_ref(&one), &SvgStyle::default()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pl = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts = pl.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
        assert_eq!(pts.split(' ').count(), 2);
        assert!(svg.contains(X_LABEL) && svg.contains(Y_LABEL));
        assert_eq!(emit_svg(&[one], &SvgStyle::default()).unwrap(), svg);
        assert!(matches!(emit_svg(&[], &SvgStyle::default()), Err(StressError::EmptyPlot)));
    }

    #[test]
    fn segment_hues_differ() {
        let mk = |l: &str| PlotSeries {
            label: l.into(),
            points: vec![(1.0, 1.0), (2.0, 3.0), (3.0, 2.0)],
        };
        let svg = emit_svg(&[mk("a"), mk("b"), mk("c")], &SvgStyle::default()).unwrap();
        let strokes: Vec<&str> = svg
            .lines()
            .filter(|l| l.starts_with("<polyline"))
            .map(|l| l.split("stroke=\"").nth(1).unwrap().split('"').next().unwrap())
            .collect();
        assert_eq!(strokes.len(), 3);
        assert!(strokes[0] != strokes[1] && strokes[1] != strokes[2] && strokes[0] != strokes[2]);
    }

    #[test]
    fn hsl_primaries() {
        assert_eq!(hsl_hex(0.0, 1.0, 0.5), "#ff0000");
        assert_eq!(hsl_hex(120.0, 1.0, 0.5), "#00ff00");
        assert_eq!(hsl_hex(240.0, 1.0, 0.5), "#0000ff");
    }
}

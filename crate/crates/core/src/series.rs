//! Daily price series: ingestion, channel alignment, standardization and
//! moving-average detrending, plus the trading calendar and the registry of
//! named market periods.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};

use crate::error::{Result, StressError};

/// Largest fraction of the ingested days that may be synthesized by forward-fill.
pub const MAX_FILL_FRACTION: f64 = 0.10;

/// Whole days that may be forward-filled in a series of `total` days: the
/// fraction rounded up, so a single filled day is always tolerated.
pub fn fill_allowance(total: usize) -> usize {
    (MAX_FILL_FRACTION * total as f64).ceil() as usize
}

/// Trading-day calendar used to express windows in years and months.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TradingCalendar {
    pub year_length: usize,
    pub month_length: usize,
}

impl Default for TradingCalendar {
    fn default() -> Self {
        Self {
            year_length: 261,
            month_length: 21,
        }
    }
}

impl TradingCalendar {
    pub fn new(year_length: usize, month_length: usize) -> Result<Self> {
        if year_length == 0 || month_length == 0 || month_length >= year_length {
            return Err(StressError::InvalidParameter(format!(
                "calendar requires 0 < month_length < year_length, got {month_length} and {year_length}"
            )));
        }
        Ok(Self {
            year_length,
            month_length,
        })
    }

    pub fn years(&self, n: usize) -> usize {
        n * self.year_length
    }
}

/// Date-aligned daily closes for one instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    id: String,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl PriceSeries {
    pub fn new(id: impl Into<String>, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if dates.len() != values.len() {
            return Err(StressError::InvalidParameter(format!(
                "{id}: {} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(StressError::InvalidParameter(format!(
                "{id}: dates not strictly increasing at {}",
                w[1]
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v <= 0.0)
        {
            return Err(StressError::InvalidParameter(format!(
                "{id}: price {v} on {} is not a positive finite number",
                dates[i]
            )));
        }
        Ok(Self { id, dates, values })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same dates, every price passed through `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.id.clone(),
            self.dates.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Writes `date,value` rows (no header) with round-trip exact values.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.len() * 36);
        for (d, v) in self.dates.iter().zip(&self.values) {
            out.push_str(&format!("{d},{}\n", format_value(*v)));
        }
        write_file(path, out.as_bytes())
    }
}

/// 17 significant digits: parses back to the identical `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |e: std::io::Error| StressError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(bytes).map_err(io_err)
}

/// Result of reading a price CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub series: PriceSeries,
    /// Number of interior trading days synthesized from the previous close.
    pub fill_count: usize,
}

/// Reads a `date,close` CSV (header optional), sorts it by date and
/// forward-fills missing weekdays inside a single trading week.
///
/// A gap that spans a weekend is taken to be a holiday and left alone; a
/// missing weekday whose neighbours sit in the same week is filled from the
/// previous close.
pub fn ingest_csv(path: &Path) -> Result<Ingested> {
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let text = fs::read(path).map_err(|e| StressError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let malformed = |line: u64, message: String| StressError::MalformedRow {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_slice());
    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(idx as u64 + 1);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(idx as u64 + 1);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if idx == 0 && record.get(0).is_some_and(|f| f.eq_ignore_ascii_case("date")) {
            continue;
        }
        if record.len() != 2 {
            return Err(malformed(line, format!("expected 2 fields, found {}", record.len())));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| malformed(line, format!("invalid date {:?}: {e}", &record[0])))?;
        let price: f64 = record[1]
            .parse()
            .map_err(|_| malformed(line, format!("invalid price {:?}", &record[1])))?;
        if !price.is_finite() || price <= 0.0 {
            return Err(malformed(line, format!("price must be positive, got {price}")));
        }
        rows.push((date, price));
    }
    if rows.len() < 2 {
        return Err(malformed(
            rows.len() as u64,
            "at least 2 data rows are required".to_string(),
        ));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(StressError::DuplicateDate {
            path: path.to_path_buf(),
            date: w[0].0.to_string(),
        });
    }

    let mut dates = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    let mut fill_count = 0;
    for (k, &(date, price)) in rows.iter().enumerate() {
        if k > 0 {
            let (prev_date, prev_price) = rows[k - 1];
            let missing = missing_midweek_days(prev_date, date);
            fill_count += missing.len();
            for d in missing {
                dates.push(d);
                values.push(prev_price);
            }
        }
        dates.push(date);
        values.push(price);
    }
    if fill_count > fill_allowance(dates.len()) {
        return Err(StressError::TooSparse {
            path: path.to_path_buf(),
            filled: fill_count,
            total: dates.len(),
        });
    }
    Ok(Ingested {
        series: PriceSeries::new(id, dates, values)?,
        fill_count,
    })
}

fn is_weekend(d: NaiveDate) -> bool {
    matches!(d.weekday(), Weekday::Sat | Weekday::Sun)
}

/// Weekdays strictly between `a` and `b`, unless the gap crosses a weekend.
fn missing_midweek_days(a: NaiveDate, b: NaiveDate) -> Vec<NaiveDate> {
    let between: Vec<NaiveDate> = a
        .iter_days()
        .skip(1)
        .take_while(|d| *d < b)
        .collect();
    if between.iter().any(|d| is_weekend(*d)) {
        return Vec::new();
    }
    between
}

/// `count` consecutive weekdays starting at `start` (moved forward to a weekday).
pub fn weekday_dates(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !is_weekend(d) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// Zero mean, unit population standard deviation.
pub fn standardize(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(StressError::TooShort {
            needed: 2,
            available: x.len(),
        });
    }
    let (mean, sd) = mean_and_pop_std(x);
    let constant = x.iter().all(|&v| v == x[0]);
    if constant || sd <= 0.0 || !sd.is_finite() {
        return Err(StressError::Degenerate(
            "zero-variance window cannot be standardized".into(),
        ));
    }
    Ok(x.iter().map(|&v| (v - mean) / sd).collect())
}

/// Mean with one correction pass, and population standard deviation.
pub(crate) fn mean_and_pop_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mut mean = x.iter().sum::<f64>() / n;
    mean += x.iter().map(|&v| v - mean).sum::<f64>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Moving-average detrending at scale `tau`.
///
/// `s(j)` is the mean of `x[j..j+tau]` and the output is `x[j + tau/2] - s(j)`,
/// giving `x.len() - tau + 1` samples.
pub fn ma_detrend(x: &[f64], tau: usize) -> Result<Vec<f64>> {
    if tau < 2 {
        return Err(StressError::InvalidParameter(format!(
            "detrend scale must be at least 2, got {tau}"
        )));
    }
    if tau >= x.len() {
        return Err(StressError::TooShort {
            needed: tau + 1,
            available: x.len(),
        });
    }
    let half = tau / 2;
    let inv = tau as f64;
    Ok(x.windows(tau)
        .map(|w| w[half] - w.iter().sum::<f64>() / inv)
        .collect())
}

/// Standardized, MA-detrended dynamics of one window of a series.
#[derive(Debug, Clone, PartialEq)]
pub struct DetrendedSeries {
    pub source_id: String,
    pub scale: usize,
    /// Date of the centre sample each detrended value is anchored to.
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl DetrendedSeries {
    /// Standardizes `values` and detrends them at `scale`.
    pub fn from_window(
        source_id: &str,
        dates: &[NaiveDate],
        values: &[f64],
        scale: usize,
    ) -> Result<Self> {
        let z = standardize(values)?;
        let y = ma_detrend(&z, scale)?;
        let half = scale / 2;
        Ok(Self {
            source_id: source_id.to_string(),
            scale,
            dates: dates[half..half + y.len()].to_vec(),
            values: y,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Several instruments restricted to their common trading dates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub ids: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// One column per channel, in input order.
    pub columns: Vec<Vec<f64>>,
}

impl ChannelMatrix {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.columns.len()
    }
}

pub fn align_channels(series: &[PriceSeries]) -> Result<ChannelMatrix> {
    if series.len() < 2 {
        return Err(StressError::InvalidParameter(format!(
            "alignment needs at least 2 channels, got {}",
            series.len()
        )));
    }
    let mut common: BTreeSet<NaiveDate> = series[0].dates.iter().copied().collect();
    for s in &series[1..] {
        let other: BTreeSet<NaiveDate> = s.dates.iter().copied().collect();
        common = common.intersection(&other).copied().collect();
    }
    if common.is_empty() {
        let ids: Vec<&str> = series.iter().map(|s| s.id()).collect();
        return Err(StressError::EmptyIntersection(ids.join(", ")));
    }
    let columns = series
        .iter()
        .map(|s| {
            s.dates
                .iter()
                .zip(&s.values)
                .filter(|(d, _)| common.contains(d))
                .map(|(_, v)| *v)
                .collect()
        })
        .collect();
    Ok(ChannelMatrix {
        ids: series.iter().map(|s| s.id.clone()).collect(),
        dates: common.into_iter().collect(),
        columns,
    })
}

/// A named half-open date interval `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketPeriod {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl MarketPeriod {
    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrisisRegistry {
    periods: Vec<MarketPeriod>,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid literal date")
}

impl CrisisRegistry {
    pub fn new(periods: Vec<MarketPeriod>) -> Result<Self> {
        if periods.is_empty() {
            return Err(StressError::InvalidParameter(
                "crisis registry is empty".into(),
            ));
        }
        if let Some(p) = periods.iter().find(|p| p.start >= p.end) {
            return Err(StressError::InvalidParameter(format!(
                "period {} starts on {} but ends on {}",
                p.label, p.start, p.end
            )));
        }
        Ok(Self { periods })
    }

    /// The three two-year crisis windows used for catastrophe segments.
    pub fn crisis_segments() -> Self {
        let p = |label: &str, y0: i32, y1: i32| MarketPeriod {
            label: label.to_string(),
            start: ymd(y0, 1, 1),
            end: ymd(y1, 1, 1),
        };
        Self {
            periods: vec![
                p("IBB", 2000, 2002),
                p("SubPrime", 2008, 2010),
                p("COVID", 2020, 2022),
            ],
        }
    }

    /// The seven consecutive market regimes of 1997-2021.
    pub fn market_periods() -> Self {
        let p = |label: &str, y0: i32, y1: i32| MarketPeriod {
            label: label.to_string(),
            start: ymd(y0, 1, 1),
            end: ymd(y1 + 1, 1, 1),
        };
        Self {
            periods: vec![
                p("Dot-com boom", 1997, 1999),
                p("Internet bubble burst (Crisis-1)", 2000, 2003),
                p("Economic recovery", 2004, 2007),
                p("Sub-Prime mortgage crisis (Crisis-2)", 2008, 2011),
                p("Post-GFC recovery", 2012, 2014),
                p("Bull run", 2015, 2019),
                p("COVID pandemic (Crisis-3)", 2020, 2021),
            ],
        }
    }

    pub fn periods(&self) -> &[MarketPeriod] {
        &self.periods
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn write_tmp(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn ingest_three_days() {
        let f = write_tmp("date,close\n2024-01-08,1\n2024-01-09,2\n2024-01-10,3\n");
        let got = ingest_csv(f.path()).unwrap();
        assert_eq!(got.series.len(), 3);
        assert_eq!(got.fill_count, 0);
    }

    #[test]
    fn ingest_forward_fills_midweek_gap() {
        let f = write_tmp("2024-01-08,100\n2024-01-10,102\n");
        let got = ingest_csv(f.path()).unwrap();
        assert_eq!(got.series.dates()[1], d("2024-01-09"));
        assert_eq!(got.series.values(), &[100.0, 100.0, 102.0]);
        assert_eq!(got.fill_count, 1);
    }

    #[test]
    fn gap_across_weekend_is_a_holiday() {
        // Friday to Tuesday: Monday treated as an exchange holiday.
        let f = write_tmp("2024-01-05,100\n2024-01-09,101\n");
        let got = ingest_csv(f.path()).unwrap();
        assert_eq!(got.series.len(), 2);
        assert_eq!(got.fill_count, 0);
    }

    #[test]
    fn ingest_sorts_rows() {
        let f = write_tmp("2024-01-10,3\n2024-01-08,1\n2024-01-09,2\n");
        let got = ingest_csv(f.path()).unwrap();
        assert_eq!(got.series.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn invalid_date_names_line() {
        let f = write_tmp("date,close\n2020-02-28,99\n2020-02-30,100\n");
        match ingest_csv(f.path()) {
            Err(StressError::MalformedRow { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("2020-02-30"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ingest_rejects_bad_rows() {
        let dup = write_tmp("2024-01-08,1\n2024-01-08,2\n");
        assert!(matches!(
            ingest_csv(dup.path()),
            Err(StressError::DuplicateDate { .. })
        ));
        let neg = write_tmp("2024-01-08,1\n2024-01-09,-2\n");
        assert!(matches!(
            ingest_csv(neg.path()),
            Err(StressError::MalformedRow { line: 2, .. })
        ));
        let one = write_tmp("2024-01-08,1\n");
        assert!(ingest_csv(one.path()).is_err());
        assert!(matches!(
            ingest_csv(Path::new("/nonexistent/x.csv")),
            Err(StressError::Io { .. })
        ));
    }

    #[test]
    fn sparse_file_is_rejected() {
        // Mon and Fri of each week only: 3 of 5 days filled.
        let mut body = String::new();
        for w in 0..4 {
            let mon = d("2024-01-08") + Days::new(7 * w);
            body.push_str(&format!("{mon},10\n{},11\n", mon + Days::new(4)));
        }
        let f = write_tmp(&body);
        assert!(matches!(
            ingest_csv(f.path()),
            Err(StressError::TooSparse { .. })
        ));
    }

    #[test]
    fn standardize_small() {
        let z = standardize(&[1.0, 2.0, 3.0]).unwrap();
        let e = (1.5f64).sqrt();
        assert!((z[0] + e).abs() < 1e-15);
        assert!(z[1].abs() < 1e-15);
        assert!((z[2] - e).abs() < 1e-15);
        assert!(matches!(
            standardize(&[5.0, 5.0, 5.0]),
            Err(StressError::Degenerate(_))
        ));
    }

    #[test]
    fn detrend_ramp_is_zero() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y = ma_detrend(&x, 5).unwrap();
        assert_eq!(y, vec![0.0; 6]);
    }

    #[test]
    fn detrend_impulse_by_hand() {
        let y = ma_detrend(&[0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0], 5).unwrap();
        assert_eq!(y, vec![4.0, -1.0, -1.0]);
    }

    #[test]
    fn detrend_rejects_bad_scale() {
        assert!(ma_detrend(&[1.0, 2.0, 3.0], 3).is_err());
        assert!(ma_detrend(&[1.0, 2.0, 3.0], 1).is_err());
        assert_eq!(ma_detrend(&[7.0; 6], 4).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn detrended_series_dates_are_centered() {
        let dates = weekday_dates(d("2024-01-01"), 8);
        let ds = DetrendedSeries::from_window("x", &dates, &[1., 3., 2., 5., 4., 6., 8., 7.], 5)
            .unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.dates[0], dates[2]);
    }

    #[test]
    fn align_intersects_dates() {
        let all = weekday_dates(d("2024-01-01"), 10);
        let a = PriceSeries::new("a", all[..8].to_vec(), vec![1.0; 8]).unwrap();
        let b = PriceSeries::new("b", all[3..].to_vec(), vec![2.0; 7]).unwrap();
        let mut c_dates = all.clone();
        c_dates.remove(5);
        let c = PriceSeries::new("c", c_dates, vec![3.0; 9]).unwrap();
        let m = align_channels(&[a.clone(), b, c]).unwrap();
        assert_eq!(m.dates, vec![all[3], all[4], all[6], all[7]]);
        assert_eq!(m.columns[2], vec![3.0; 4]);
        assert_eq!(m.ids, vec!["a", "b", "c"]);

        let m = align_channels(&[a.clone(), a.clone().with_id("a2")]).unwrap();
        assert_eq!(m.columns[0], m.columns[1]);
        assert_eq!(m.len(), 8);

        let late = PriceSeries::new("z", vec![d("2030-01-01")], vec![1.0]).unwrap();
        assert!(matches!(
            align_channels(&[a, late]),
            Err(StressError::EmptyIntersection(_))
        ));
    }

    #[test]
    fn registry_validation() {
        assert!(CrisisRegistry::new(vec![]).is_err());
        let bad = MarketPeriod {
            label: "x".into(),
            start: d("2020-01-02"),
            end: d("2020-01-01"),
        };
        assert!(CrisisRegistry::new(vec![bad]).is_err());
        assert_eq!(CrisisRegistry::market_periods().periods().len(), 7);
        let reg = CrisisRegistry::crisis_segments();
        let ibb = &reg.periods()[0];
        assert!(ibb.contains(d("2001-12-31")));
        assert!(!ibb.contains(d("2002-01-01")));
    }

    #[test]
    fn calendar_validation() {
        assert!(TradingCalendar::new(261, 21).is_ok());
        assert!(TradingCalendar::new(21, 21).is_err());
        assert!(TradingCalendar::new(0, 0).is_err());
        assert_eq!(TradingCalendar::default().years(4), 1044);
    }
}

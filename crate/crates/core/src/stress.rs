//! Date-indexed rolling measure values.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::error::{Result, StressError};
use crate::series::{format_value, write_file};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    ModMse,
    ModMmse,
    InvModMse,
    InvModMmse,
    Det,
    Alis,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::ModMse => "mod_mse",
            Measure::ModMmse => "mod_mmse",
            Measure::InvModMse => "inv_mod_mse",
            Measure::InvModMmse => "inv_mod_mmse",
            Measure::Det => "det",
            Measure::Alis => "alis",
        }
    }

    fn reciprocal(self) -> Option<Measure> {
        match self {
            Measure::ModMse => Some(Measure::InvModMse),
            Measure::ModMmse => Some(Measure::InvModMmse),
            Measure::InvModMse => Some(Measure::ModMse),
            Measure::InvModMmse => Some(Measure::ModMmse),
            _ => None,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = StressError;

    fn from_str(s: &str) -> Result<Self> {
        [
            Measure::ModMse,
            Measure::ModMmse,
            Measure::InvModMse,
            Measure::InvModMmse,
            Measure::Det,
            Measure::Alis,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| StressError::InvalidParameter(format!("unknown measure {s:?}")))
    }
}

/// Rolling measure values dated at each window's last trading day.
///
/// `None` marks a window whose value could not be computed (degenerate or
/// undefined); the date is kept so gaps stay visible.
#[derive(Debug, Clone, PartialEq)]
pub struct StressSeries {
    pub measure: Measure,
    pub instrument: String,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<Option<f64>>,
}

impl StressSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn gap_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Present values only, in date order.
    pub fn defined(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.dates
            .iter()
            .zip(&self.values)
            .filter_map(|(d, v)| v.map(|v| (*d, v)))
    }

    /// `1 / value` for entropy measures; a zero entropy becomes a gap.
    pub fn reciprocal(&self) -> Result<Self> {
        let measure = self.measure.reciprocal().ok_or(StressError::WrongMeasure {
            expected: "an entropy measure",
            found: self.measure.as_str(),
        })?;
        Ok(Self {
            measure,
            instrument: self.instrument.clone(),
            dates: self.dates.clone(),
            values: self
                .values
                .iter()
                .map(|v| v.filter(|&e| e > 0.0).map(|e| 1.0 / e))
                .collect(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,value,measure,instrument\n");
        for (d, v) in self.dates.iter().zip(&self.values) {
            let value = v.map(format_value).unwrap_or_default();
            out.push_str(&format!("{d},{value},{},{}\n", self.measure, self.instrument));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_csv().as_bytes())
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| StressError::MalformedRow {
            path: "<stress series>".into(),
            line: line as u64,
            message,
        };
        let mut measure = None;
        let mut instrument = String::new();
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(bad(i + 1, format!("expected 4 fields, got {}", fields.len())));
            }
            let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d")
                .map_err(|e| bad(i + 1, e.to_string()))?;
            let value = if fields[1].is_empty() {
                None
            } else {
                Some(
                    fields[1]
                        .parse::<f64>()
                        .map_err(|e| bad(i + 1, e.to_string()))?,
                )
            };
            measure = Some(fields[2].parse::<Measure>()?);
            instrument = fields[3].to_string();
            dates.push(date);
            values.push(value);
        }
        Ok(Self {
            measure: measure.ok_or_else(|| bad(1, "no rows".into()))?,
            instrument,
            dates,
            values,
        })
    }
}

/// Start offsets of every full window of `window` samples stepping by `increment`.
pub fn window_starts(len: usize, window: usize, increment: usize) -> Vec<usize> {
    if window == 0 || increment == 0 || len < window {
        return Vec::new();
    }
    (0..=len - window).step_by(increment).collect()
}

/// Evaluates `f` on every window in parallel; results keep window order, so
/// any thread schedule gives the same output.
pub(crate) fn roll<F>(len: usize, window: usize, increment: usize, f: F) -> Vec<Option<f64>>
where
    F: Fn(usize) -> Option<f64> + Sync,
{
    window_starts(len, window, increment)
        .into_par_iter()
        .map(&f)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> StressSeries {
        StressSeries {
            measure: Measure::ModMse,
            instrument: "SPX".into(),
            dates: crate::series::weekday_dates(NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(), 3),
            values: vec![Some(0.5), None, Some(0.0)],
        }
    }

    #[test]
    fn reciprocal_maps_zero_to_gap() {
        let inv = sample().reciprocal().unwrap();
        assert_eq!(inv.measure, Measure::InvModMse);
        assert_eq!(inv.values, vec![Some(2.0), None, None]);
        let det = StressSeries {
            measure: Measure::Det,
            ..sample()
        };
        assert!(det.reciprocal().is_err());
    }

    #[test]
    fn csv_renders_gaps_as_empty() {
        let csv = sample().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "date,value,measure,instrument");
        assert_eq!(lines[2], "2024-01-02,,mod_mse,SPX");
        assert_eq!(StressSeries::parse_csv(&csv).unwrap(), sample());
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_starts(1044, 1044, 1), vec![0]);
        assert_eq!(window_starts(1048, 1044, 1).len(), 5);
        assert_eq!(window_starts(1048, 1044, 3), vec![0, 3]);
        assert!(window_starts(10, 11, 1).is_empty());
    }
}

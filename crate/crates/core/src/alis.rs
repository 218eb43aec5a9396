//! Latent index of stress from band-limited instantaneous amplitude.
//!
//! Prices are detrended with a one-year moving average, split into a
//! low-frequency and a high-frequency band, and each band's envelope is
//! summarized by a trimmed mean over four-year windows stepped monthly. The
//! two monthly series are normalized, shifted to start at zero and summed;
//! months above the median are flagged as stressed.

use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Result, StressError};
use crate::filter::{bandpass, instantaneous_amplitude};
use crate::series::{format_value, ma_detrend, mean_and_pop_std, write_file, PriceSeries, TradingCalendar};
use crate::stress::window_starts;

/// Band edges in cycles per trading day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSpec {
    pub lf_high_cut: f64,
    pub hf_low_cut: f64,
    pub hf_high_cut: f64,
}

impl Default for BandSpec {
    fn default() -> Self {
        Self {
            lf_high_cut: 1.0 / 240.0,
            hf_low_cut: 1.0 / 60.0,
            hf_high_cut: 1.0 / 5.0,
        }
    }
}

impl BandSpec {
    pub fn validate(&self) -> Result<()> {
        let ordered = 0.0 < self.lf_high_cut
            && self.lf_high_cut < self.hf_low_cut
            && self.hf_low_cut < self.hf_high_cut
            && self.hf_high_cut <= 0.5;
        if !ordered {
            return Err(StressError::InvalidParameter(format!(
                "bands need 0 < lf_cut < hf_lo < hf_hi <= 0.5, got {}, {}, {}",
                self.lf_high_cut, self.hf_low_cut, self.hf_high_cut
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlisConfig {
    pub bands: BandSpec,
    /// Fraction dropped from each tail before averaging.
    pub trim: f64,
    pub detrend_tau: usize,
    pub window: usize,
    pub increment: usize,
}

impl AlisConfig {
    /// One-year detrend, four-year windows, one-month increments.
    pub fn from_calendar(cal: &TradingCalendar) -> Self {
        Self {
            bands: BandSpec::default(),
            trim: 0.20,
            detrend_tau: cal.year_length,
            window: cal.years(4),
            increment: cal.month_length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bands.validate()?;
        if !(0.0..0.5).contains(&self.trim) {
            return Err(StressError::InvalidParameter(format!(
                "trim must lie in [0, 0.5), got {}",
                self.trim
            )));
        }
        if self.detrend_tau < 2 || self.increment == 0 || self.window <= self.increment {
            return Err(StressError::InvalidParameter(
                "alis needs detrend_tau >= 2 and window > increment >= 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for AlisConfig {
    fn default() -> Self {
        Self::from_calendar(&TradingCalendar::default())
    }
}

/// Mean after dropping `floor(trim * len)` values from each end of the sorted window.
pub fn trimmed_mean(values: &[f64], trim: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = (trim * values.len() as f64).floor() as usize;
    let kept = &sorted[k..sorted.len() - k];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Trimmed mean of every full window stepping by `increment`.
pub fn trimmed_window_means(ia: &[f64], window: usize, increment: usize, trim: f64) -> Result<Vec<f64>> {
    if window == 0 || increment == 0 || !(0.0..0.5).contains(&trim) {
        return Err(StressError::InvalidParameter(format!(
            "trimmed means need window, increment >= 1 and trim in [0, 0.5), got {window}, {increment}, {trim}"
        )));
    }
    if ia.len() < window {
        return Err(StressError::TooShort {
            needed: window,
            available: ia.len(),
        });
    }
    Ok(window_starts(ia.len(), window, increment)
        .into_iter()
        .map(|s| trimmed_mean(&ia[s..s + window], trim))
        .collect())
}

/// Exact median; the mean of the two central values for an even count.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlisSeries {
    pub instrument: String,
    /// Last day of the month-long block at the centre of each window.
    pub month_dates: Vec<NaiveDate>,
    pub lf: Vec<f64>,
    pub hf: Vec<f64>,
    pub alis: Vec<f64>,
    pub threshold: f64,
    pub bands: BandSpec,
    pub trim: f64,
}

impl AlisSeries {
    pub fn len(&self) -> usize {
        self.alis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alis.is_empty()
    }

    pub fn above_threshold(&self) -> impl Iterator<Item = bool> + '_ {
        self.alis.iter().map(|&a| a > self.threshold)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# instrument={} lf_cut={} hf_lo={} hf_hi={} trim={} offset_rule=subtract_first threshold={}\n",
            self.instrument,
            format_value(self.bands.lf_high_cut),
            format_value(self.bands.hf_low_cut),
            format_value(self.bands.hf_high_cut),
            self.trim,
            format_value(self.threshold),
        );
        out.push_str("month_end_date,lf,hf,alis,above_threshold\n");
        for (i, above) in self.above_threshold().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.month_dates[i],
                format_value(self.lf[i]),
                format_value(self.hf[i]),
                format_value(self.alis[i]),
                above
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_csv().as_bytes())
    }
}

fn normalize_band(values: &[f64], band: &'static str) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(StressError::TooShort {
            needed: 2,
            available: values.len(),
        });
    }
    let (mean, sd) = mean_and_pop_std(values);
    if values.iter().all(|&v| v == values[0]) || sd.is_nan() || sd <= 0.0 {
        return Err(StressError::DegenerateBand { band });
    }
    let z: Vec<f64> = values.iter().map(|&v| (v - mean) / sd).collect();
    let offset = z[0];
    Ok(z.into_iter().map(|v| v - offset).collect())
}

/// Full instantaneous-amplitude ALIS pipeline for one price series.
///
/// Prices are first divided by their maximum, which leaves the index
/// unchanged but makes it exactly invariant to rescaling of the input.
pub fn ia_alis(x: &PriceSeries, cfg: &AlisConfig) -> Result<AlisSeries> {
    cfg.validate()?;
    let needed = cfg.window + cfg.detrend_tau - 1;
    if x.len() < needed {
        return Err(StressError::TooShort {
            needed,
            available: x.len(),
        });
    }
    let peak = x.values().iter().copied().fold(f64::MIN, f64::max);
    let unit: Vec<f64> = x.values().iter().map(|v| v / peak).collect();
    let z = ma_detrend(&unit, cfg.detrend_tau)?;
    let dates = &x.dates()[cfg.detrend_tau / 2..cfg.detrend_tau / 2 + z.len()];

    let b = &cfg.bands;
    let ia_lf = instantaneous_amplitude(&bandpass(&z, 0.0, b.lf_high_cut)?)?;
    let ia_hf = instantaneous_amplitude(&bandpass(&z, b.hf_low_cut, b.hf_high_cut)?)?;
    let lf = normalize_band(
        &trimmed_window_means(&ia_lf, cfg.window, cfg.increment, cfg.trim)?,
        "LF",
    )?;
    let hf = normalize_band(
        &trimmed_window_means(&ia_hf, cfg.window, cfg.increment, cfg.trim)?,
        "HF",
    )?;
    let alis: Vec<f64> = lf.iter().zip(&hf).map(|(a, b)| a + b).collect();
    let threshold = median(&alis);

    let centre_block_end = (cfg.window - cfg.increment) / 2 + cfg.increment - 1;
    let month_dates = window_starts(z.len(), cfg.window, cfg.increment)
        .into_iter()
        .map(|s| dates[s + centre_block_end])
        .collect();
    Ok(AlisSeries {
        instrument: x.id().to_string(),
        month_dates,
        lf,
        hf,
        alis,
        threshold,
        bands: cfg.bands,
        trim: cfg.trim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trimmed_mean_of_one_to_ten() {
        let w: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(trimmed_mean(&w, 0.2), 5.5);
        assert_eq!(trimmed_window_means(&[4.0; 30], 10, 3, 0.2).unwrap(), vec![4.0; 7]);
        assert!(trimmed_window_means(&w, 11, 1, 0.2).is_err());
    }

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn band_validation() {
        assert!(BandSpec::default().validate().is_ok());
        let bad = BandSpec {
            lf_high_cut: 0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_band_is_named() {
        assert_eq!(
            normalize_band(&[1.0, 1.0, 1.0], "HF"),
            Err(StressError::DegenerateBand { band: "HF" })
        );
        assert_eq!(normalize_band(&[1.0, 3.0], "LF").unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn too_short_series() {
        let dates = crate::series::weekday_dates(NaiveDate::from_ymd_opt(2000, 1, 3).unwrap(), 1200);
        let x = PriceSeries::new("x", dates, vec![1.0; 1200]).unwrap();
        assert!(matches!(
            ia_alis(&x, &AlisConfig::default()),
            Err(StressError::TooShort { needed: 1304, .. })
        ));
    }
}

//! Modified multiscale sample entropy (univariate and multivariate).
//!
//! Each window is standardized per channel, detrended with a moving average
//! of scale `tau`, embedded into composite delay vectors and scored by the
//! Chebyshev match probability at the base dimension `M` and at `M + 1`.
//! For more than one channel the `M + 1` set pools the `p` families obtained
//! by raising one channel's dimension at a time.

use crate::embedding::{chebyshev_within, composite_delay_vectors, DelayVectors, EmbeddingSpec};
use crate::error::{Result, StressError};
use crate::series::{align_channels, ma_detrend, standardize, PriceSeries};
use crate::stress::{roll, Measure, StressSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct SampEnConfig {
    /// Either one `(m, l)` pair applied to every channel, or one per channel.
    pub embedding: EmbeddingSpec,
    /// Match tolerance in units of the standardized window's deviation.
    pub r: f64,
    pub tau: usize,
    pub window: usize,
    pub increment: usize,
}

impl Default for SampEnConfig {
    fn default() -> Self {
        Self {
            embedding: EmbeddingSpec::uniform(1, 2, 1).expect("valid default"),
            r: 0.15,
            tau: 5,
            window: 1044,
            increment: 1,
        }
    }
}

impl SampEnConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(StressError::InvalidParameter(m));
        if self.r <= 0.0 || !self.r.is_finite() {
            return invalid(format!("tolerance r must be positive, got {}", self.r));
        }
        if self.tau < 2 {
            return invalid(format!("scale tau must be at least 2, got {}", self.tau));
        }
        if self.increment == 0 {
            return invalid("increment must be at least 1".into());
        }
        let minimum = self.tau + self.embedding.span() + 10;
        if self.window <= minimum {
            return invalid(format!(
                "window {} too short for tau {} and embedding span {} (need > {minimum})",
                self.window,
                self.tau,
                self.embedding.span()
            ));
        }
        Ok(())
    }

    /// The embedding for `p` channels, broadcasting a single-channel spec.
    pub fn embedding_for(&self, p: usize) -> Result<EmbeddingSpec> {
        match self.embedding.channels() {
            n if n == p => Ok(self.embedding.clone()),
            1 => EmbeddingSpec::uniform(p, self.embedding.dims()[0], self.embedding.delays()[0]),
            n => Err(StressError::InvalidParameter(format!(
                "embedding declares {n} channels but {p} were supplied"
            ))),
        }
    }
}

/// Sample entropy together with the two global match probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleEntropy {
    pub value: f64,
    /// Match probability at the base dimension `M`.
    pub phi_m: f64,
    /// Match probability at the extended dimension `M + 1`.
    pub phi_m1: f64,
}

/// Number of ordered pairs `(i, j)`, `i != j`, within Chebyshev distance `r`.
fn ordered_matches(v: &DelayVectors, r: f64) -> u64 {
    let n = v.len();
    let mut count = 0u64;
    for i in 0..n {
        let a = v.row(i);
        for j in i + 1..n {
            if chebyshev_within(a, v.row(j), r) {
                count += 1;
            }
        }
    }
    2 * count
}

/// Mean over vectors of `B(i) / (Q - 1)` for a set of `Q` vectors.
fn match_probability(v: &DelayVectors, r: f64) -> Result<f64> {
    let q = v.len();
    if q < 2 {
        return Err(StressError::TooShort {
            needed: 2,
            available: q,
        });
    }
    Ok(ordered_matches(v, r) as f64 / (q as f64 * (q as f64 - 1.0)))
}

/// Sample entropy of already standardized and detrended channels.
///
/// Base vectors number `N - n` with `n = max(m)·max(l)`. Extended vectors use
/// `n* = (max(m) + 1)·max(l)`; with several channels there are `p` families,
/// each raising one channel's dimension. Matches are counted between vectors
/// of the same family and pooled, so every extended match extends a base
/// match of the same pair.
pub fn sample_entropy(channels: &[&[f64]], spec: &EmbeddingSpec, r: f64) -> Result<SampleEntropy> {
    if r.is_nan() || r <= 0.0 {
        return Err(StressError::InvalidParameter(format!(
            "tolerance r must be positive, got {r}"
        )));
    }
    let base = composite_delay_vectors(channels, spec)?;
    let phi_m = match_probability(&base, r)?;

    let max_m = spec.dims().iter().max().copied().unwrap_or(0);
    let max_l = spec.delays().iter().max().copied().unwrap_or(0);
    let extended_span = (max_m + 1) * max_l;
    let len = channels[0].len();
    if len <= extended_span {
        return Err(StressError::TooShort {
            needed: extended_span + 1,
            available: len,
        });
    }
    let count = len - extended_span;
    if count < 2 {
        return Err(StressError::TooShort {
            needed: extended_span + 2,
            available: len,
        });
    }
    let mut matches = 0u64;
    for k in 0..spec.channels() {
        let mut family = composite_delay_vectors(channels, &spec.extended_at(k))?;
        family.truncate(count);
        matches += ordered_matches(&family, r);
    }
    let q = count as f64;
    let phi_m1 = matches as f64 / (spec.channels() as f64 * q * (q - 1.0));

    if phi_m1 == 0.0 || phi_m == 0.0 {
        return Err(StressError::UndefinedEntropy { phi_m, phi_m1 });
    }
    Ok(SampleEntropy {
        value: (phi_m / phi_m1).ln(),
        phi_m,
        phi_m1,
    })
}

/// Standardize and detrend each raw channel window, then score it.
pub fn mod_mse_window(channels: &[&[f64]], cfg: &SampEnConfig) -> Result<SampleEntropy> {
    let detrended = channels
        .iter()
        .map(|c| standardize(c).and_then(|z| ma_detrend(&z, cfg.tau)))
        .collect::<Result<Vec<_>>>()?;
    let views: Vec<&[f64]> = detrended.iter().map(Vec::as_slice).collect();
    let spec = cfg.embedding_for(channels.len())?;
    sample_entropy(&views, &spec, cfg.r)
}

/// Rolling Mod-MSE of one price series, dated at each window's last day.
pub fn rolling_mod_mse(x: &PriceSeries, cfg: &SampEnConfig) -> Result<StressSeries> {
    cfg.validate()?;
    cfg.embedding_for(1)?;
    rolling(&[x.values()], x.dates(), x.id(), Measure::ModMse, cfg)
}

/// Rolling Mod-MMSE over the common dates of several price series.
pub fn rolling_mod_mmse(channels: &[PriceSeries], cfg: &SampEnConfig) -> Result<StressSeries> {
    cfg.validate()?;
    let aligned = align_channels(channels)?;
    cfg.embedding_for(aligned.channels())?;
    let views: Vec<&[f64]> = aligned.columns.iter().map(Vec::as_slice).collect();
    let label = aligned.ids.join("+");
    rolling(&views, &aligned.dates, &label, Measure::ModMmse, cfg)
}

fn rolling(
    columns: &[&[f64]],
    dates: &[chrono::NaiveDate],
    instrument: &str,
    measure: Measure,
    cfg: &SampEnConfig,
) -> Result<StressSeries> {
    let len = dates.len();
    if len < cfg.window {
        return Err(StressError::TooShort {
            needed: cfg.window,
            available: len,
        });
    }
    let values = roll(len, cfg.window, cfg.increment, |s| {
        let windows: Vec<&[f64]> = columns.iter().map(|c| &c[s..s + cfg.window]).collect();
        mod_mse_window(&windows, cfg).ok().map(|e| e.value)
    });
    let dates = crate::stress::window_starts(len, cfg.window, cfg.increment)
        .into_iter()
        .map(|s| dates[s + cfg.window - 1])
        .collect();
    Ok(StressSeries {
        measure,
        instrument: instrument.to_string(),
        dates,
        values,
    })
}

//! Recurrence plots and determinism (DET) over delay-embedded windows.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::embedding::{euclidean, takens_embed, DelayVectors};
use crate::error::{Result, StressError};
use crate::series::{ma_detrend, standardize, PriceSeries};
use crate::stress::{roll, window_starts, Measure, StressSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Fixed,
    Auto,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Fixed => "fixed",
            Selection::Auto => "auto",
        })
    }
}

impl FromStr for Selection {
    type Err = StressError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Selection::Fixed),
            "auto" => Ok(Selection::Auto),
            _ => Err(StressError::InvalidParameter(format!(
                "selection must be fixed or auto, got {s:?}"
            ))),
        }
    }
}

/// Candidate grid and surrogate ensemble for automatic embedding selection.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionGrid {
    pub dims: Vec<usize>,
    pub delays: Vec<usize>,
    pub surrogates: usize,
}

impl Default for SelectionGrid {
    fn default() -> Self {
        Self {
            dims: (2..=8).collect(),
            delays: (1..=5).collect(),
            surrogates: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RqaConfig {
    pub m: usize,
    pub l: usize,
    /// Threshold as a fraction of the mean pairwise Euclidean distance.
    pub epsilon_fraction: f64,
    pub j_min: usize,
    pub selection: Selection,
    pub grid: SelectionGrid,
    pub tau: usize,
    pub window: usize,
    pub increment: usize,
    /// Base seed for surrogate ensembles; each window derives its own.
    pub seed: u64,
}

impl Default for RqaConfig {
    fn default() -> Self {
        Self {
            m: 2,
            l: 1,
            epsilon_fraction: 0.6,
            j_min: 2,
            selection: Selection::Fixed,
            grid: SelectionGrid::default(),
            tau: 5,
            window: 1044,
            increment: 1,
            seed: 0,
        }
    }
}

impl RqaConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(StressError::InvalidParameter(m));
        if self.m == 0 || self.l == 0 {
            return invalid("rqa embedding dimension and delay must be at least 1".into());
        }
        if !(self.epsilon_fraction > 0.0 && self.epsilon_fraction < 1.0) {
            return invalid(format!(
                "epsilon fraction must lie in (0, 1), got {}",
                self.epsilon_fraction
            ));
        }
        if self.j_min < 2 {
            return invalid(format!("j_min must be at least 2, got {}", self.j_min));
        }
        if self.tau < 2 || self.increment == 0 {
            return invalid("rqa tau must be >= 2 and increment >= 1".into());
        }
        if self.selection == Selection::Auto
            && (self.grid.dims.is_empty() || self.grid.delays.is_empty() || self.grid.surrogates == 0)
        {
            return invalid("automatic selection needs a non-empty grid and surrogates".into());
        }
        Ok(())
    }
}

/// Thresholded distance matrix over delay vectors, line of identity excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceMatrix {
    size: usize,
    entries: Vec<bool>,
    /// Absolute threshold the matrix was built with.
    pub epsilon: f64,
    /// All pairwise distances were zero.
    pub fully_recurrent: bool,
    /// `diag_hist[j]` = number of maximal diagonal runs of length `j`, both triangles.
    pub diag_hist: Vec<u64>,
    recurrence_points: u64,
}

impl RecurrenceMatrix {
    /// Builds a matrix from explicit entries; must be square, symmetric and
    /// zero on the diagonal.
    pub fn from_entries(rows: &[Vec<bool>]) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(StressError::InvalidParameter("matrix is not square".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row[i] {
                return Err(StressError::InvalidParameter(
                    "line of identity must be zero".into(),
                ));
            }
            for (j, &v) in row.iter().enumerate().take(i) {
                if v != rows[j][i] {
                    return Err(StressError::InvalidParameter("matrix is not symmetric".into()));
                }
            }
        }
        Ok(Self::assemble(size, rows.concat(), f64::NAN, false))
    }

    fn assemble(size: usize, entries: Vec<bool>, epsilon: f64, fully_recurrent: bool) -> Self {
        let recurrence_points = entries.iter().filter(|&&b| b).count() as u64;
        let mut m = Self {
            size,
            entries,
            epsilon,
            fully_recurrent,
            diag_hist: Vec::new(),
            recurrence_points,
        };
        m.diag_hist = m.line_histogram(1);
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.size + j]
    }

    pub fn recurrence_points(&self) -> u64 {
        self.recurrence_points
    }

    /// Histogram of maximal diagonal runs (doubled for the lower triangle),
    /// restricted to diagonals at least `min_diagonal` cells long.
    pub fn line_histogram(&self, min_diagonal: usize) -> Vec<u64> {
        let n = self.size;
        let mut hist = vec![0u64; n.max(1)];
        for k in 1..n {
            if n - k < min_diagonal {
                break;
            }
            let mut run = 0usize;
            for i in 0..n - k {
                if self.get(i, i + k) {
                    run += 1;
                } else if run > 0 {
                    hist[run] += 2;
                    run = 0;
                }
            }
            if run > 0 {
                hist[run] += 2;
            }
        }
        hist
    }

    /// Binary PGM, recurrence points black.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.size, self.size).into_bytes();
        out.extend(self.entries.iter().map(|&b| if b { 0u8 } else { 255u8 }));
        out
    }
}

/// Recurrence matrix at `epsilon_fraction` of the mean pairwise distance.
/// Distances equal to the threshold count as recurrent.
pub fn recurrence_matrix(vectors: &DelayVectors, epsilon_fraction: f64) -> Result<RecurrenceMatrix> {
    let n = vectors.len();
    if n < 2 {
        return Err(StressError::TooShort {
            needed: 2,
            available: n,
        });
    }
    if !(epsilon_fraction > 0.0 && epsilon_fraction < 1.0) {
        return Err(StressError::InvalidParameter(format!(
            "epsilon fraction must lie in (0, 1), got {epsilon_fraction}"
        )));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = vectors.row(i);
            (i + 1..n).map(|j| euclidean(a, vectors.row(j))).collect()
        })
        .collect();
    let pairs = (n * (n - 1) / 2) as f64;
    let mean = rows.iter().flatten().sum::<f64>() / pairs;
    let epsilon = epsilon_fraction * mean;
    let mut entries = vec![false; n * n];
    for (i, row) in rows.iter().enumerate() {
        for (off, &d) in row.iter().enumerate() {
            if d <= epsilon {
                let j = i + 1 + off;
                entries[i * n + j] = true;
                entries[j * n + i] = true;
            }
        }
    }
    Ok(RecurrenceMatrix::assemble(n, entries, epsilon, mean == 0.0))
}

/// Fraction of recurrence points on diagonal lines of at least `j_min` cells.
///
/// Diagonals shorter than `j_min` cannot host a line and are left out of
/// both sums; runs cut by the matrix border keep their truncated length.
pub fn det(rp: &RecurrenceMatrix, j_min: usize) -> Result<f64> {
    if j_min < 1 {
        return Err(StressError::InvalidParameter("j_min must be positive".into()));
    }
    let hist = rp.line_histogram(j_min);
    let weighted = |from: usize| -> u64 {
        hist.iter()
            .enumerate()
            .skip(from)
            .map(|(j, &c)| j as u64 * c)
            .sum()
    };
    let total = weighted(1);
    if total == 0 {
        return Err(StressError::UndefinedDeterminism);
    }
    Ok(weighted(j_min) as f64 / total as f64)
}

/// Outcome of the differential-entropy embedding search.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingChoice {
    pub m: usize,
    pub l: usize,
    pub criterion: f64,
    /// `(m, l, criterion)` for every grid point evaluated, in grid order.
    pub table: Vec<(usize, usize, f64)>,
}

/// Log-volume of the unit Euclidean ball in `d` dimensions.
fn ln_unit_ball(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = V_{d-2} * 2π / d
    let mut v = if d.is_multiple_of(2) { 1.0f64 } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v.ln()
}

/// Kozachenko-Leonenko nearest-neighbour differential entropy (nats).
///
/// Points with an exact duplicate use their nearest distinct neighbour.
pub fn kl_entropy(points: &DelayVectors) -> f64 {
    let n = points.len();
    let d = points.dim();
    let nearest: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = points.row(i);
            let mut best = f64::INFINITY;
            for j in 0..n {
                if j != i {
                    let sq: f64 = a
                        .iter()
                        .zip(points.row(j))
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum();
                    if sq > 0.0 && sq < best {
                        best = sq;
                    }
                }
            }
            best.is_finite().then(|| 0.5 * best.ln())
        })
        .collect();
    let logs: Vec<f64> = nearest.into_iter().flatten().collect();
    if logs.is_empty() {
        return f64::NEG_INFINITY;
    }
    let q = logs.len();
    // digamma(n) - digamma(1) = H_{n-1}
    let harmonic: f64 = (1..n).map(|k| 1.0 / k as f64).sum();
    d as f64 * logs.iter().sum::<f64>() / q as f64 + ln_unit_ball(d) + harmonic
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed derived from a base seed and any number of stream identifiers.
pub(crate) fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Criterion value at one grid point with its sampling spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionScore {
    pub value: f64,
    /// Standard error of `value`, estimated from the surrogate ensemble.
    pub spread: f64,
}

/// Standard errors by which a lower-dimensional candidate may trail the
/// minimum and still be preferred.
pub const PARSIMONY_SE: f64 = 2.0;

/// Differential-entropy ratio criterion for one `(m, l)`.
///
/// The window is embedded and its nearest-neighbour entropy divided by the
/// mean entropy of `surrogates` iid standard-normal series of the same length
/// embedded the same way; `m·ln(Q)/Q` is added for `Q` embedded vectors. The
/// spread combines the surrogate ensemble's relative deviation for the signal
/// estimate and for the ensemble mean.
pub fn embedding_criterion(z: &[f64], m: usize, l: usize, surrogates: usize, seed: u64) -> Result<CriterionScore> {
    let points = takens_embed(z, m, l)?;
    let q = points.len();
    if q < 3 {
        return Err(StressError::TooShort {
            needed: (m - 1) * l + 3,
            available: z.len(),
        });
    }
    let h_signal = kl_entropy(&points);
    let h_surrogates = (0..surrogates)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[m as u64, l as u64, k as u64]));
            let noise: Vec<f64> = (0..z.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            takens_embed(&noise, m, l).map(|p| kl_entropy(&p))
        })
        .collect::<Result<Vec<f64>>>()?;
    let k = surrogates as f64;
    let mean = h_surrogates.iter().sum::<f64>() / k;
    let sd = if surrogates > 1 {
        (h_surrogates.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    let qf = q as f64;
    Ok(CriterionScore {
        value: h_signal / mean + m as f64 * qf.ln() / qf,
        spread: sd / mean.abs() * (1.0 + 1.0 / k).sqrt(),
    })
}

/// Grid search over `(m, l)`.
///
/// The smallest `m` whose best delay comes within [`PARSIMONY_SE`] standard
/// errors of the overall minimum is chosen, with the delay minimizing the
/// criterion at that `m`; remaining ties go to the smaller `l`.
pub fn select_embedding(x: &[f64], grid: &SelectionGrid, seed: u64) -> Result<EmbeddingChoice> {
    if grid.dims.is_empty() || grid.delays.is_empty() || grid.surrogates == 0 {
        return Err(StressError::InvalidParameter("empty selection grid".into()));
    }
    let z = standardize(x)?;
    let mut points: Vec<(usize, usize)> = grid
        .dims
        .iter()
        .flat_map(|&m| grid.delays.iter().map(move |&l| (m, l)))
        .collect();
    points.sort_unstable();
    points.dedup();
    let scored: Vec<Result<CriterionScore>> = points
        .par_iter()
        .map(|&(m, l)| embedding_criterion(&z, m, l, grid.surrogates, seed))
        .collect();
    let scored: Vec<(usize, usize, CriterionScore)> = points
        .iter()
        .zip(scored)
        .filter_map(|(&(m, l), c)| c.ok().filter(|c| c.value.is_finite()).map(|c| (m, l, c)))
        .collect();
    // first minimum in (m, l) order
    let lowest = |cands: &mut dyn Iterator<Item = &(usize, usize, CriterionScore)>| {
        cands.fold(None::<(usize, usize, CriterionScore)>, |best, &cand| match best {
            Some(b) if b.2.value <= cand.2.value => Some(b),
            _ => Some(cand),
        })
    };
    let overall = lowest(&mut scored.iter()).ok_or(StressError::TooShort {
        needed: grid.dims.iter().min().copied().unwrap_or(1) + 3,
        available: x.len(),
    })?;
    let bound = overall.2.value + PARSIMONY_SE * overall.2.spread;
    let chosen = scored
        .iter()
        .map(|c| c.0)
        .filter_map(|m| lowest(&mut scored.iter().filter(|c| c.0 == m)))
        .find(|c| c.2.value <= bound)
        .unwrap_or(overall);
    Ok(EmbeddingChoice {
        m: chosen.0,
        l: chosen.1,
        criterion: chosen.2.value,
        table: scored.iter().map(|&(m, l, c)| (m, l, c.value)).collect(),
    })
}

/// DET of one raw window: standardize, detrend, embed, threshold, score.
///
/// A constant window cannot be standardized; its embedding is a single
/// repeated point, fully recurrent, and scores 1.
pub fn det_window(x: &[f64], cfg: &RqaConfig, seed: u64) -> Result<f64> {
    if x.len() > cfg.tau && x.iter().all(|&v| v == x[0]) {
        let z = vec![0.0; x.len() - cfg.tau + 1];
        let rp = recurrence_matrix(&takens_embed(&z, cfg.m, cfg.l)?, cfg.epsilon_fraction)?;
        return det(&rp, cfg.j_min);
    }
    let z = ma_detrend(&standardize(x)?, cfg.tau)?;
    let (m, l) = match cfg.selection {
        Selection::Fixed => (cfg.m, cfg.l),
        Selection::Auto => {
            let c = select_embedding(&z, &cfg.grid, seed)?;
            (c.m, c.l)
        }
    };
    let rp = recurrence_matrix(&takens_embed(&z, m, l)?, cfg.epsilon_fraction)?;
    det(&rp, cfg.j_min)
}

/// Rolling DET, dated at each window's last day.
pub fn rolling_det(x: &PriceSeries, cfg: &RqaConfig) -> Result<StressSeries> {
    cfg.validate()?;
    if x.len() < cfg.window {
        return Err(StressError::TooShort {
            needed: cfg.window,
            available: x.len(),
        });
    }
    let values = roll(x.len(), cfg.window, cfg.increment, |s| {
        let seed = derive_seed(cfg.seed, &[s as u64]);
        det_window(&x.values()[s..s + cfg.window], cfg, seed).ok()
    });
    let dates = window_starts(x.len(), cfg.window, cfg.increment)
        .into_iter()
        .map(|s| x.dates()[s + cfg.window - 1])
        .collect();
    Ok(StressSeries {
        measure: Measure::Det,
        instrument: x.id().to_string(),
        dates,
        values,
    })
}

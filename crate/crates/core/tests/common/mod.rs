//! Test-side oracles and synthetic signals. Nothing here calls into the
//! library's numeric code; oracles are written straight from the definitions.
#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

pub fn sine(period: f64, n: usize) -> Vec<f64> {
    (0..n).map(|t| (2.0 * PI * t as f64 / period).sin()).collect()
}

/// AR(1) with a coefficient that may change along the series.
pub fn ar1(seed: u64, phis: &[f64]) -> Vec<f64> {
    let mut r = rng(seed);
    let mut prev = 0.0;
    phis.iter()
        .map(|&phi| {
            let e: f64 = StandardNormal.sample(&mut r);
            prev = phi * prev + e;
            prev
        })
        .collect()
}

pub fn uniform(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

pub fn weekdays(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(n)
        .collect()
}

pub fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

// ---- series oracles ----

pub fn oracle_standardize(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    x.iter().map(|v| (v - mean) / var.sqrt()).collect()
}

pub fn oracle_detrend(x: &[f64], tau: usize) -> Vec<f64> {
    (0..=x.len() - tau)
        .map(|j| {
            let s: f64 = x[j..j + tau].iter().sum::<f64>() / tau as f64;
            x[j + tau / 2] - s
        })
        .collect()
}

// ---- sample entropy oracles ----

fn cheb(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Mean over `i` of `#{j != i : d(i, j) <= r} / (Q - 1)`.
fn phi(vectors: &[Vec<f64>], r: f64) -> f64 {
    let q = vectors.len();
    let mut total = 0.0;
    for i in 0..q {
        let mut b = 0usize;
        for j in 0..q {
            if i != j && cheb(&vectors[i], &vectors[j]) <= r {
                b += 1;
            }
        }
        total += b as f64 / (q - 1) as f64;
    }
    total / q as f64
}

fn entropy_of((phi_m, phi_m1): (f64, f64)) -> Option<f64> {
    (phi_m > 0.0 && phi_m1 > 0.0).then(|| -(phi_m1 / phi_m).ln())
}

/// Univariate sample entropy, triple loop, straight from the definition.
pub fn oracle_sampen(x: &[f64], m: usize, l: usize, r: f64) -> Option<f64> {
    entropy_of(oracle_phis(x, m, l, r))
}

/// `(Φ_m, Φ_{m+1})` for one channel.
pub fn oracle_phis(x: &[f64], m: usize, l: usize, r: f64) -> (f64, f64) {
    let embed = |dim: usize, count: usize| -> Vec<Vec<f64>> {
        (0..count)
            .map(|i| (0..dim).map(|j| x[i + j * l]).collect())
            .collect()
    };
    let n = x.len();
    let phi_m = phi(&embed(m, n - m * l), r);
    let phi_m1 = phi(&embed(m + 1, n - (m + 1) * l), r);
    (phi_m, phi_m1)
}

/// Multivariate sample entropy with the per-channel extension families.
pub fn oracle_msampen(chans: &[Vec<f64>], dims: &[usize], delays: &[usize], r: f64) -> Option<f64> {
    entropy_of(oracle_mphis(chans, dims, delays, r))
}

/// `(Φ_M, Φ_{M*})`, the latter averaged over the extended families, each
/// family compared only with itself.
pub fn oracle_mphis(chans: &[Vec<f64>], dims: &[usize], delays: &[usize], r: f64) -> (f64, f64) {
    let n = chans[0].len();
    let lmax = *delays.iter().max().unwrap();
    let mmax = *dims.iter().max().unwrap();
    let cdv = |ms: &[usize], i: usize| -> Vec<f64> {
        let mut v = Vec::new();
        for (k, ch) in chans.iter().enumerate() {
            for j in 0..ms[k] {
                v.push(ch[i + j * delays[k]]);
            }
        }
        v
    };
    let base: Vec<Vec<f64>> = (0..n - mmax * lmax).map(|i| cdv(dims, i)).collect();
    let count = n - (mmax + 1) * lmax;
    let mut extended = 0.0;
    for k in 0..chans.len() {
        let mut ms = dims.to_vec();
        ms[k] += 1;
        let family: Vec<Vec<f64>> = (0..count).map(|i| cdv(&ms, i)).collect();
        extended += phi(&family, r);
    }
    (phi(&base, r), extended / chans.len() as f64)
}

/// Full window pipeline: standardize and detrend each channel, then score.
/// Returns `(Φ_M, Φ_{M*}, entropy)`.
pub fn oracle_mod_mse(chans: &[&[f64]], m: usize, l: usize, r: f64, tau: usize) -> (f64, f64, Option<f64>) {
    let prepared: Vec<Vec<f64>> = chans
        .iter()
        .map(|c| oracle_detrend(&oracle_standardize(c), tau))
        .collect();
    let phis = if prepared.len() == 1 {
        oracle_phis(&prepared[0], m, l, r)
    } else {
        let p = prepared.len();
        oracle_mphis(&prepared, &vec![m; p], &vec![l; p], r)
    };
    (phis.0, phis.1, entropy_of(phis))
}

// ---- recurrence oracles ----

pub fn random_symmetric(seed: u64, n: usize, density: f64) -> Vec<Vec<bool>> {
    let mut r = rng(seed);
    let mut m = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = r.random_bool(density);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

/// DET by scanning every off-identity diagonal for maximal runs. Diagonals
/// shorter than `j_min` are skipped entirely.
pub fn oracle_det(m: &[Vec<bool>], j_min: usize) -> Option<f64> {
    let n = m.len() as isize;
    let (mut on_lines, mut total) = (0usize, 0usize);
    for k in -(n - 1)..n {
        if k == 0 || ((n - k.abs()) as usize) < j_min {
            continue;
        }
        let mut run = 0usize;
        let mut flush = |run: usize| {
            total += run;
            if run >= j_min {
                on_lines += run;
            }
        };
        for i in 0..n {
            let j = i + k;
            if j < 0 || j >= n {
                continue;
            }
            if m[i as usize][j as usize] {
                run += 1;
            } else {
                flush(run);
                run = 0;
            }
        }
        flush(run);
    }
    (total > 0).then(|| on_lines as f64 / total as f64)
}

/// Boolean recurrence matrix from raw vectors by direct thresholding.
pub fn oracle_recurrence(vectors: &[Vec<f64>], fraction: f64) -> Vec<Vec<bool>> {
    let n = vectors.len();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += dist(&vectors[i], &vectors[j]);
        }
    }
    let eps = fraction * sum / (n * (n - 1) / 2) as f64;
    (0..n)
        .map(|i| (0..n).map(|j| i != j && dist(&vectors[i], &vectors[j]) <= eps).collect())
        .collect()
}

// ---- regression ----

/// Least-squares slope via the 2x2 normal equations on raw sums.
pub fn normal_equation_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

// ---- synthetic price series ----

/// Twelve trading years of positive prices around 100 whose fluctuations are
/// `inflation` times larger on the sample range `[lo, hi)`.
pub fn inflated_span(seed: u64, n: usize, lo: usize, hi: usize, inflation: f64) -> Vec<f64> {
    noise(seed, n)
        .iter()
        .enumerate()
        .map(|(t, e)| {
            let k = if (lo..hi).contains(&t) { inflation } else { 1.0 };
            100.0 + 0.002 * t as f64 + k * e
        })
        .collect()
}

/// Integer-valued random-walk prices: every product with a small power of
/// two or three stays exact.
pub fn integer_walk(seed: u64, n: usize) -> Vec<f64> {
    let mut level = 10_000.0;
    noise(seed, n)
        .iter()
        .map(|e| {
            level = (level + (40.0 * e).round()).max(1.0);
            level
        })
        .collect()
}

//! Delay-coordinate embeddings shared by the entropy and recurrence measures.

use crate::error::{Result, StressError};

/// Per-channel embedding dimensions and delays for composite delay vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingSpec {
    dims: Vec<usize>,
    delays: Vec<usize>,
}

impl EmbeddingSpec {
    pub fn new(dims: Vec<usize>, delays: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.len() != delays.len() {
            return Err(StressError::InvalidParameter(format!(
                "embedding needs one dimension and one delay per channel, got {} and {}",
                dims.len(),
                delays.len()
            )));
        }
        if dims.iter().chain(&delays).any(|&v| v == 0) {
            return Err(StressError::InvalidParameter(
                "embedding dimensions and delays must be at least 1".into(),
            ));
        }
        Ok(Self { dims, delays })
    }

    /// Same `(m, l)` on each of `channels` channels.
    pub fn uniform(channels: usize, m: usize, l: usize) -> Result<Self> {
        Self::new(vec![m; channels], vec![l; channels])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn channels(&self) -> usize {
        self.dims.len()
    }

    /// `max(m_k) * max(l_k)`: samples reserved at the end of each channel.
    pub fn span(&self) -> usize {
        self.dims.iter().max().copied().unwrap_or(0) * self.delays.iter().max().copied().unwrap_or(0)
    }

    /// Length of one composite vector, `sum(m_k)`.
    pub fn vector_len(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Spec with channel `k`'s dimension raised by one.
    pub fn extended_at(&self, k: usize) -> Self {
        let mut dims = self.dims.clone();
        dims[k] += 1;
        Self {
            dims,
            delays: self.delays.clone(),
        }
    }
}

/// A set of equal-length vectors stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayVectors {
    dim: usize,
    data: Vec<f64>,
}

impl DelayVectors {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(StressError::InvalidParameter(
                "delay vectors must be non-empty and of equal length".into(),
            ));
        }
        Ok(Self {
            dim,
            data: rows.concat(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub(crate) fn truncate(&mut self, count: usize) {
        self.data.truncate(count * self.dim);
    }
}

/// Composite delay vectors over channels of equal length `N`.
///
/// Vector `i` concatenates, channel by channel, the samples at offsets
/// `i, i + l_k, ..., i + (m_k - 1) l_k`. There are `N - max(m)·max(l)` vectors.
pub fn composite_delay_vectors(channels: &[&[f64]], spec: &EmbeddingSpec) -> Result<DelayVectors> {
    if channels.len() != spec.channels() {
        return Err(StressError::InvalidParameter(format!(
            "{} channels supplied for a {}-channel embedding",
            channels.len(),
            spec.channels()
        )));
    }
    let len = channels[0].len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(StressError::InvalidParameter(
            "channels must have equal length".into(),
        ));
    }
    let span = spec.span();
    if len <= span {
        return Err(StressError::TooShort {
            needed: span + 1,
            available: len,
        });
    }
    let count = len - span;
    let dim = spec.vector_len();
    let mut data = Vec::with_capacity(count * dim);
    for i in 0..count {
        for (k, ch) in channels.iter().enumerate() {
            let l = spec.delays[k];
            data.extend((0..spec.dims[k]).map(|j| ch[i + j * l]));
        }
    }
    Ok(DelayVectors { dim, data })
}

/// Scalar delay embedding `[x(i), x(i+l), ..., x(i+(m-1)l)]` for every
/// admissible `i`: `x.len() - (m-1)·l` vectors.
pub fn takens_embed(x: &[f64], m: usize, l: usize) -> Result<DelayVectors> {
    if m == 0 || l == 0 {
        return Err(StressError::InvalidParameter(
            "embedding dimension and delay must be at least 1".into(),
        ));
    }
    let reach = (m - 1) * l;
    if x.len() <= reach {
        return Err(StressError::TooShort {
            needed: reach + 1,
            available: x.len(),
        });
    }
    let count = x.len() - reach;
    let mut data = Vec::with_capacity(count * m);
    for i in 0..count {
        data.extend((0..m).map(|j| x[i + j * l]));
    }
    Ok(DelayVectors { dim: m, data })
}

#[inline]
pub(crate) fn chebyshev_within(a: &[f64], b: &[f64], r: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= r)
}

#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

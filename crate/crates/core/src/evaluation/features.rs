use crate::data::SequenceBatch;
use crate::error::{Error, Result};

pub const FEATURES_PER_CHANNEL: usize = 7;

pub const FEATURE_NAMES: [&str; FEATURES_PER_CHANNEL] =
    ["median", "mean", "std", "variance", "rms", "max", "min"];

/// Seven statistics per channel, channel-major, in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Population statistics (divide by `W`) of each channel of a flat `C × W` sequence.
pub fn extract_features(seq: &[f64], channels: usize) -> Result<FeatureVector> {
    if channels == 0 || seq.is_empty() || seq.len() % channels != 0 {
        return Err(Error::Metric(format!(
            "cannot split {} values into {channels} channels",
            seq.len()
        )));
    }
    let w = seq.len() / channels;
    let mut out = Vec::with_capacity(channels * FEATURES_PER_CHANNEL);
    let mut sorted = Vec::with_capacity(w);
    for row in seq.chunks_exact(w) {
        sorted.clear();
        sorted.extend_from_slice(row);
        sorted.sort_by(f64::total_cmp);
        let median = if w % 2 == 1 {
            sorted[w / 2]
        } else {
            0.5 * (sorted[w / 2 - 1] + sorted[w / 2])
        };
        let n = w as f64;
        let mean = row.iter().sum::<f64>() / n;
        let variance = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let rms = (row.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        out.extend([
            median,
            mean,
            variance.sqrt(),
            variance,
            rms,
            sorted[w - 1],
            sorted[0],
        ]);
    }
    Ok(FeatureVector(out))
}

/// One feature vector per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Metric("feature rows have differing lengths".into()));
        }
        Ok(Self {
            rows: rows.len(),
            dim,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Values of feature `j` across all rows.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.dim + j]).collect()
    }
}

pub fn feature_matrix(batch: &SequenceBatch) -> Result<FeatureMatrix> {
    let rows = (0..batch.len())
        .map(|i| extract_features(batch.sequence(i), batch.channels()).map(|f| f.0))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::from_rows(&rows)
}

use serde::{Deserialize, Serialize};

use super::features::FeatureMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 50;

/// Mass added to every histogram bin before renormalizing.
pub const SMOOTHING: f64 = 1e-10;

const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// How per-feature Jensen-Shannon distances are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JsReduction {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub bins: usize,
    pub reduction: JsReduction,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            reduction: JsReduction::Mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub avg_cos_sim: f64,
    pub avg_jen_dis: f64,
    pub n_real: usize,
    pub n_syn: usize,
    pub per_feature_js: Vec<f64>,
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (norm(a) * norm(b))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_pair(real: &FeatureMatrix, syn: &FeatureMatrix) -> Result<()> {
    if real.rows() == 0 || syn.rows() == 0 {
        return Err(Error::Metric("feature matrices must be non-empty".into()));
    }
    if real.dim() != syn.dim() {
        return Err(Error::Metric(format!(
            "feature dimensions differ: real {} vs synthetic {}",
            real.dim(),
            syn.dim()
        )));
    }
    Ok(())
}

fn mean_unit_row(m: &FeatureMatrix, side: &str) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; m.dim()];
    for i in 0..m.rows() {
        let row = m.row(i);
        let n = norm(row);
        if !(n > 0.0) {
            return Err(Error::Metric(format!(
                "{side} sample {i} has a zero-norm feature vector"
            )));
        }
        acc.iter_mut().zip(row).for_each(|(a, v)| *a += v / n);
    }
    let rows = m.rows() as f64;
    acc.iter_mut().for_each(|a| *a /= rows);
    Ok(acc)
}

/// Mean cosine similarity over every (real, synthetic) pair.
///
/// The all-pairs mean equals the dot product of the mean unit-normalized
/// real row and the mean unit-normalized synthetic row, which is O(n).
pub fn avg_cos_sim(real: &FeatureMatrix, syn: &FeatureMatrix) -> Result<f64> {
    check_pair(real, syn)?;
    let a = mean_unit_row(real, "real")?;
    let b = mean_unit_row(syn, "synthetic")?;
    Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum())
}

/// Base-2 Kullback-Leibler divergence, with `0 · log(0/q) = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::Metric(format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    for (name, d) in [("p", p), ("q", q)] {
        let s: f64 = d.iter().sum();
        if (s - 1.0).abs() > NORMALIZATION_TOLERANCE || d.iter().any(|&v| v < 0.0) {
            return Err(Error::Metric(format!("{name} is not a probability vector (sum {s})")));
        }
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::Metric("q has zero mass where p is positive".into()));
        }
        total += pi * (pi / qi).log2();
    }
    Ok(total)
}

/// `sqrt((KL(p‖m) + KL(q‖m)) / 2)` with `m` the pointwise mean; in [0, 1].
pub fn js_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let div = 0.5 * (kl_divergence(p, &m)? + kl_divergence(q, &m)?);
    Ok(div.clamp(0.0, 1.0).sqrt())
}

/// Smoothed probability histogram of `values` over `[lo, hi]`.
/// A degenerate range puts all mass in the first bin.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    let width = hi - lo;
    for &v in values {
        let bin = if width > 0.0 {
            (((v - lo) / width * bins as f64) as usize).min(bins - 1)
        } else {
            0
        };
        counts[bin] += 1.0;
    }
    let n = values.len() as f64;
    counts.iter_mut().for_each(|c| *c = *c / n + SMOOTHING);
    let total: f64 = counts.iter().sum();
    counts.iter_mut().for_each(|c| *c /= total);
    counts
}

/// Jensen-Shannon distance between the real and synthetic distributions of
/// each feature, binned over their joint range.
pub fn js_per_feature(real: &FeatureMatrix, syn: &FeatureMatrix, bins: usize) -> Result<Vec<f64>> {
    check_pair(real, syn)?;
    if bins == 0 {
        return Err(Error::Metric("histogram needs at least one bin".into()));
    }
    (0..real.dim())
        .map(|j| {
            let a = real.column(j);
            let b = syn.column(j);
            let (lo, hi) = a
                .iter()
                .chain(&b)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::Metric(format!("feature {j} has non-finite values")));
            }
            js_distance(&histogram(&a, lo, hi, bins), &histogram(&b, lo, hi, bins))
        })
        .collect()
}

/// Mean per-feature Jensen-Shannon distance.
pub fn avg_jen_dis(real: &FeatureMatrix, syn: &FeatureMatrix, bins: usize) -> Result<f64> {
    let per = js_per_feature(real, syn, bins)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

pub fn similarity_report(
    real: &FeatureMatrix,
    syn: &FeatureMatrix,
    options: &MetricOptions,
) -> Result<SimilarityReport> {
    let per_feature_js = js_per_feature(real, syn, options.bins)?;
    let total: f64 = per_feature_js.iter().sum();
    let avg_jen_dis = match options.reduction {
        JsReduction::Mean => total / per_feature_js.len() as f64,
        JsReduction::Sum => total,
    };
    Ok(SimilarityReport {
        avg_cos_sim: avg_cos_sim(real, syn)?,
        avg_jen_dis,
        n_real: real.rows(),
        n_syn: syn.rows(),
        per_feature_js,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn cosine_identity_and_orthogonality() {
        let a = fm(&[&[1.0, 2.0, 3.0]]);
        assert!((avg_cos_sim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let x = fm(&[&[1.0, 0.0]]);
        let y = fm(&[&[0.0, 1.0]]);
        assert_eq!(avg_cos_sim(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn zero_norm_row_named() {
        let a = fm(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let err = avg_cos_sim(&a, &a).unwrap_err().to_string();
        assert!(err.contains("real sample 1"), "{err}");
    }

    #[test]
    fn kl_one_bit() {
        assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn kl_rejects_unnormalized() {
        assert!(matches!(kl_divergence(&[0.5, 0.6], &[0.5, 0.5]), Err(Error::Metric(_))));
    }

    #[test]
    fn js_identical_is_zero_and_disjoint_is_one() {
        let a = fm(&[&[0.0], &[1.0], &[2.0]]);
        assert_eq!(avg_jen_dis(&a, &a, 50).unwrap(), 0.0);
        let lo = fm(&[&[0.0], &[0.1]]);
        let hi = fm(&[&[10.0], &[10.1]]);
        assert!((avg_jen_dis(&lo, &hi, 50).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn degenerate_feature_is_one_hot() {
        let a = fm(&[&[3.0], &[3.0]]);
        let h = histogram(&a.column(0), 3.0, 3.0, 4);
        assert!(h[0] > 0.999_999);
        assert_eq!(avg_jen_dis(&a, &a, 4).unwrap(), 0.0);
    }

    #[test]
    fn sum_reduction() {
        let a = fm(&[&[0.0, 1.0], &[1.0, 2.0]]);
        let b = fm(&[&[0.5, 5.0], &[1.0, 6.0]]);
        let mean = similarity_report(&a, &b, &MetricOptions::default()).unwrap();
        let sum = similarity_report(
            &a,
            &b,
            &MetricOptions {
                reduction: JsReduction::Sum,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((sum.avg_jen_dis - 2.0 * mean.avg_jen_dis).abs() < 1e-15);
    }
}

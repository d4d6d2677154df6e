use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Row `i` is the unit eigenvector for `values[i]`, signed so that its
    /// largest-magnitude entry is positive.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi rotations on a row-major `d × d` symmetric matrix.
pub fn symmetric_eigen(matrix: &[f64], d: usize) -> Result<SymmetricEigen> {
    if d == 0 || matrix.len() != d * d {
        return Err(Error::Metric(format!(
            "expected a {d}x{d} matrix, got {} values",
            matrix.len()
        )));
    }
    for i in 0..d {
        for j in 0..i {
            let (x, y) = (matrix[i * d + j], matrix[j * d + i]);
            if (x - y).abs() > 1e-12 * x.abs().max(y.abs()).max(1.0) {
                return Err(Error::Metric(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..d)
            .flat_map(|p| (p + 1..d).map(move |q| (p, q)))
            .map(|(p, q)| a[p * d + q].powi(2))
            .sum();
        if off <= f64::EPSILON.powi(2) * scale || off == 0.0 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akq) = (a[k * d + p], a[k * d + q]);
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[p * d + k], a[q * d + k]);
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                a[p * d + q] = 0.0;
                a[q * d + p] = 0.0;
                for k in 0..d {
                    let (vkp, vkq) = (v[k * d + p], v[k * d + q]);
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[j * d + j].total_cmp(&a[i * d + i]));
    let values = order.iter().map(|&i| a[i * d + i]).collect();
    let vectors = order
        .iter()
        .map(|&col| {
            let mut vec: Vec<f64> = (0..d).map(|k| v[k * d + col]).collect();
            let pivot = vec
                .iter()
                .copied()
                .max_by(|x, y| x.abs().total_cmp(&y.abs()))
                .unwrap_or(0.0);
            if pivot < 0.0 {
                vec.iter_mut().for_each(|x| *x = -*x);
            }
            vec
        })
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

/// Principal axes fitted to a set of rows.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k × d`, orthonormal rows.
    pub components: Vec<Vec<f64>>,
    /// Non-increasing, sample covariance (divisor `n − 1`).
    pub explained_variance: Vec<f64>,
}

impl Pca {
    pub fn fit(rows: &[Vec<f64>], k: usize) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::Metric(format!("PCA needs at least 2 rows, got {n}")));
        }
        let d = rows[0].len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::Metric("PCA rows must share a positive width".into()));
        }
        if k == 0 || k > d {
            return Err(Error::Metric(format!("cannot keep {k} of {d} components")));
        }
        let mut mean = vec![0.0; d];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let mut cov = vec![0.0; d * d];
        let mut centered = vec![0.0; d];
        for r in rows {
            centered.iter_mut().zip(r.iter().zip(&mean)).for_each(|(c, (x, m))| *c = x - m);
            for i in 0..d {
                let ci = centered[i];
                for j in i..d {
                    cov[i * d + j] += ci * centered[j];
                }
            }
        }
        let denom = (n - 1) as f64;
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] /= denom;
                cov[j * d + i] = cov[i * d + j];
            }
        }
        let eig = symmetric_eigen(&cov, d)?;
        Ok(Self {
            mean,
            components: eig.vectors.into_iter().take(k).collect(),
            explained_variance: eig.values.into_iter().take(k).map(|v| v.max(0.0)).collect(),
        })
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let d = self.mean.len();
        rows.iter()
            .map(|r| {
                if r.len() != d {
                    return Err(Error::Metric(format!(
                        "row width {} does not match fitted width {d}",
                        r.len()
                    )));
                }
                Ok(self
                    .components
                    .iter()
                    .map(|c| c.iter().zip(r.iter().zip(&self.mean)).map(|(w, (x, m))| w * (x - m)).sum())
                    .collect())
            })
            .collect()
    }
}

/// Fits on `rows` and projects them: `(projections n×k, fitted model)`.
pub fn pca_project(rows: &[Vec<f64>], k: usize) -> Result<(Vec<Vec<f64>>, Pca)> {
    let pca = Pca::fit(rows, k)?;
    let proj = pca.transform(rows)?;
    Ok((proj, pca))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_on_a_line() {
        let rows: Vec<Vec<f64>> = (0..10).map(|t| vec![t as f64, 2.0 * t as f64]).collect();
        let (_, pca) = pca_project(&rows, 2).unwrap();
        let s = 5f64.sqrt();
        assert!((pca.components[0][0] - 1.0 / s).abs() < 1e-12);
        assert!((pca.components[0][1] - 2.0 / s).abs() < 1e-12);
        assert!(pca.explained_variance[1] < 1e-10);
    }

    #[test]
    fn diagonal_covariance() {
        // Columns with sample variances 4 and 1 and zero covariance.
        let rows = vec![
            vec![2.0, 1.0],
            vec![-2.0, 1.0],
            vec![2.0, -1.0],
            vec![-2.0, -1.0],
        ];
        let (_, pca) = pca_project(&rows, 2).unwrap();
        let scale = 4.0 / 3.0;
        assert!((pca.explained_variance[0] - 4.0 * scale).abs() < 1e-12);
        assert!((pca.explained_variance[1] - scale).abs() < 1e-12);
        assert!((pca.components[0][0].abs() - 1.0).abs() < 1e-12);
        assert!((pca.components[1][1].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(Pca::fit(&[vec![1.0]], 1), Err(Error::Metric(_))));
    }
}

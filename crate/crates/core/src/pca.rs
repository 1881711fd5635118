//! Principal component analysis through a deterministic eigendecomposition
//! of the sample covariance matrix.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PcaError {
    #[error("cannot fit principal components on zero rows")]
    EmptyInput,
    #[error("expected a vector of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `m` rows of length `n`, orthonormal.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component, nonincreasing.
    pub explained_variance: Vec<f64>,
    pub n: usize,
    pub m: usize,
    /// Conditions noticed while fitting (clamped `m`, zero variance).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations. `a` is an
/// `n x n` row-major matrix and is destroyed. Returns eigenvalues and the
/// eigenvectors as columns of a row-major matrix.
pub fn symmetric_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>();
    let tolerance = frob * 1e-30;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        if off <= tolerance || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let g = a[r * n + p];
                        let h = a[r * n + q];
                        let np = g - s * (h + g * tau);
                        let nq = h + s * (g - h * tau);
                        a[r * n + p] = np;
                        a[p * n + r] = np;
                        a[r * n + q] = nq;
                        a[q * n + r] = nq;
                    }
                    let g = v[r * n + p];
                    let h = v[r * n + q];
                    v[r * n + p] = g - s * (h + g * tau);
                    v[r * n + q] = h + s * (g - h * tau);
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i * n + i]).collect();
    (values, v)
}

/// Flips a vector so that its largest-magnitude entry is positive.
fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Fits `m` principal components to the rows. `m` is clamped to
/// `min(n, rows)`; clamping and zero-variance input are recorded in
/// [`PcaModel::warnings`] rather than failing.
pub fn fit_pca(rows: &[Vec<f64>], m: usize) -> Result<PcaModel, PcaError> {
    let first = rows.first().ok_or(PcaError::EmptyInput)?;
    let n = first.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(PcaError::DimensionMismatch {
            expected: n,
            actual: bad.len(),
        });
    }
    let count = rows.len();
    let mut warnings = Vec::new();
    let m_fit = m.min(n).min(count);
    if m_fit != m {
        warnings.push(format!(
            "requested {m} components but only {m_fit} are available ({count} rows, {n} columns)"
        ));
    }

    let mut mean = vec![0.0; n];
    for r in rows {
        for (acc, x) in mean.iter_mut().zip(r) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= count as f64);

    let mut cov = vec![0.0; n * n];
    let mut centered = vec![0.0; n];
    for r in rows {
        for j in 0..n {
            centered[j] = r[j] - mean[j];
        }
        for i in 0..n {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let row = &mut cov[i * n..(i + 1) * n];
            for j in i..n {
                row[j] += ci * centered[j];
            }
        }
    }
    let denom = (count.max(2) - 1) as f64;
    for i in 0..n {
        for j in i..n {
            let c = cov[i * n + j] / denom;
            cov[i * n + j] = c;
            cov[j * n + i] = c;
        }
    }

    let (values, vectors) = symmetric_eigen(cov, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut components = Vec::with_capacity(m_fit);
    let mut explained_variance = Vec::with_capacity(m_fit);
    for &k in order.iter().take(m_fit) {
        let mut c: Vec<f64> = (0..n).map(|i| vectors[i * n + k]).collect();
        normalize_sign(&mut c);
        components.push(c);
        explained_variance.push(values[k].max(0.0));
    }
    if explained_variance.iter().all(|&v| v <= 1e-12) {
        warnings.push("degenerate input: all rows are identical, every variance is zero".into());
        explained_variance.iter_mut().for_each(|v| *v = 0.0);
    }

    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        n,
        m: m_fit,
        warnings,
    })
}

impl PcaModel {
    pub fn is_degenerate(&self) -> bool {
        self.explained_variance.iter().all(|&v| v == 0.0)
    }

    /// `components * (x - mean)`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, PcaError> {
        if x.len() != self.n {
            return Err(PcaError::DimensionMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(&centered).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Maps a projection back to input space.
    pub fn reconstruct(&self, values: &[f64]) -> Result<Vec<f64>, PcaError> {
        if values.len() != self.m {
            return Err(PcaError::DimensionMismatch {
                expected: self.m,
                actual: values.len(),
            });
        }
        let mut out = self.mean.clone();
        for (c, v) in self.components.iter().zip(values) {
            for (o, x) in out.iter_mut().zip(c) {
                *o += v * x;
            }
        }
        Ok(out)
    }
}

//! Linear dimensionality-reduction baseline for reconstruction comparisons.
//!
//! Fits by eigendecomposition of the sample covariance with the
//! deterministic cyclic Jacobi solver, so fits are bit-reproducible across
//! platforms. Component signs follow one convention (largest-magnitude
//! entry positive) to keep golden files stable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigh, Mat};

/// Fitted PCA basis: per-channel mean, k orthonormal component rows in
/// descending eigenvalue order, and the eigenvalues themselves (sample
/// covariance, divisor n−1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// k×m, row-major, orthonormal rows.
    pub components: Vec<Vec<f64>>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Scores = (x − mean) · componentsᵀ, one row per input row.
    pub fn transform(&self, data: &Mat) -> Mat {
        assert_eq!(data.cols(), self.dim(), "dimension mismatch");
        let mut out = Mat::zeros(data.rows(), self.k());
        for i in 0..data.rows() {
            let row = data.row(i);
            let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
            for (j, comp) in self.components.iter().enumerate() {
                out.set(i, j, crate::linalg::dot(&centered, comp));
            }
        }
        out
    }

    /// Reconstruction = mean + scores · components.
    pub fn inverse(&self, scores: &Mat) -> Mat {
        assert_eq!(scores.cols(), self.k(), "score width mismatch");
        let mut out = Mat::zeros(scores.rows(), self.dim());
        for i in 0..scores.rows() {
            let row = out.row_mut(i);
            row.copy_from_slice(&self.mean);
            for (j, comp) in self.components.iter().enumerate() {
                crate::linalg::axpy(scores.get(i, j), comp, row);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("PCA model serializes")
    }

    pub fn from_json(text: &str) -> Result<PcaModel> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("PCA model JSON: {e}")))
    }
}

/// Eigendecomposition of the sample covariance (divisor n−1). Eigenvalue
/// ties keep their Jacobi output order; each component's
/// largest-magnitude entry is made positive.
pub fn fit(data: &Mat, k: usize) -> Result<PcaModel> {
    let (n, m) = (data.rows(), data.cols());
    if k < 1 || k > m || k > n.saturating_sub(1) {
        return Err(Error::Shape(format!(
            "k={k} out of range for {n}×{m} data (need 1 ≤ k ≤ min(n−1, m))"
        )));
    }
    let mean = data.col_means();
    let mut cov = Mat::zeros(m, m);
    let mut centered = vec![0.0; m];
    for i in 0..n {
        let row = data.row(i);
        for (c, (x, mu)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
            *c = x - mu;
        }
        for a in 0..m {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            let target = cov.row_mut(a);
            for b in 0..=a {
                target[b] += ca * centered[b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..m {
        for b in 0..=a {
            let v = cov.get(a, b) / denom;
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
    }

    let (evals, evecs) = jacobi_eigh(&cov)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| evals[b].partial_cmp(&evals[a]).unwrap().then(a.cmp(&b)));

    let mut eigenvalues = Vec::with_capacity(k);
    let mut components = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        eigenvalues.push(evals[idx]);
        let mut comp: Vec<f64> = (0..m).map(|r| evecs.get(r, idx)).collect();
        // sign convention: the largest-magnitude entry is positive
        let lead = comp
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.abs().partial_cmp(&b.abs()).unwrap().then(ib.cmp(ia))
            })
            .map(|(i, _)| i)
            .unwrap();
        if comp[lead] < 0.0 {
            for v in &mut comp {
                *v = -*v;
            }
        }
        components.push(comp);
    }
    Ok(PcaModel { mean, eigenvalues, components })
}

/// Mean squared reconstruction error over all entries (per-row mean over
/// the m features, averaged over rows — the same normalization the
/// autoencoder reports, so the curves are directly comparable).
pub fn reconstruction_mse(model: &PcaModel, data: &Mat) -> f64 {
    let scores = model.transform(data);
    let recon = model.inverse(&scores);
    let mut sum = 0.0;
    for i in 0..data.rows() {
        for j in 0..data.cols() {
            let d = data.get(i, j) - recon.get(i, j);
            sum += d * d;
        }
    }
    sum / (data.rows() * data.cols()) as f64
}

/// Reconstruction MSE of `eval` for every latent dimension `1..=k_max`,
/// with the basis fitted on `train`. Computed incrementally: the residual
/// after k components shrinks by one rank-1 term per step.
pub fn mse_curve(train: &Mat, eval: &Mat, k_max: usize) -> Result<Vec<(usize, f64)>> {
    let model = fit(train, k_max)?;
    let scores = model.transform(eval);
    let (n, m) = (eval.rows(), eval.cols());
    let mut residual = Mat::zeros(n, m);
    for i in 0..n {
        let row = residual.row_mut(i);
        for (j, r) in row.iter_mut().enumerate() {
            *r = eval.get(i, j) - model.mean[j];
        }
    }
    let mut curve = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let comp = &model.components[k - 1];
        for i in 0..n {
            crate::linalg::axpy(-scores.get(i, k - 1), comp, residual.row_mut(i));
        }
        let mse = residual.data().iter().map(|v| v * v).sum::<f64>() / (n * m) as f64;
        curve.push((k, mse));
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Data whose sample covariance is exactly [[2,1],[1,2]] has analytic
    /// eigenpairs: eigenvalues {3, 1}, first component (1,1)/√2.
    #[test]
    fn two_by_two_analytic_eigenstructure() {
        // four zero-mean rows with covariance (divisor n−1 = 3) [[2,1],[1,2]]:
        // diag (2a²+2b²)/3 = 2 and off-diag (2a²−2b²)/3 = 1 give a=1.5, b=√3/2
        let a = 1.5;
        let b = 3.0f64.sqrt() / 2.0;
        let data = Mat::from_rows(&[
            vec![a, a],
            vec![-a, -a],
            vec![b, -b],
            vec![-b, b],
        ]);
        let model = fit(&data, 2).unwrap();
        assert!((model.eigenvalues[0] - 3.0).abs() < 1e-9, "{:?}", model.eigenvalues);
        assert!((model.eigenvalues[1] - 1.0).abs() < 1e-9);
        let c0 = &model.components[0];
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((c0[0] - inv_sqrt2).abs() < 1e-9);
        assert!((c0[1] - inv_sqrt2).abs() < 1e-9);
    }

    #[test]
    fn rank_one_data_reconstructs_exactly_with_k1() {
        let mut rng = Rng::new(3);
        let direction = [1.0, -2.0, 0.5];
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                let t = rng.uniform_in(-2.0, 2.0);
                direction.iter().map(|d| d * t + 1.0).collect()
            })
            .collect();
        let data = Mat::from_rows(&rows);
        let model = fit(&data, 1).unwrap();
        assert!(reconstruction_mse(&model, &data) < 1e-18);
    }

    #[test]
    fn full_rank_reconstruction_is_exact() {
        let mut rng = Rng::new(4);
        let rows: Vec<Vec<f64>> =
            (0..30).map(|_| (0..5).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).collect();
        let data = Mat::from_rows(&rows);
        let model = fit(&data, 5).unwrap();
        assert!(reconstruction_mse(&model, &data) < 1e-18);
    }

    #[test]
    fn transform_of_mean_row_is_zero() {
        let data = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 6.0], vec![2.0, 4.0]]);
        let model = fit(&data, 1).unwrap();
        let mean_row = Mat::from_rows(std::slice::from_ref(&model.mean));
        let scores = model.transform(&mean_row);
        assert!(scores.get(0, 0).abs() < 1e-12);
    }

    #[test]
    fn components_are_orthonormal() {
        let mut rng = Rng::new(6);
        let rows: Vec<Vec<f64>> =
            (0..40).map(|_| (0..6).map(|_| rng.gauss()).collect()).collect();
        let model = fit(&Mat::from_rows(&rows), 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let d = crate::linalg::dot(&model.components[i], &model.components[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-9, "({i},{j}): {d}");
            }
        }
        // eigenvalues non-increasing
        for w in model.eigenvalues.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
    }

    #[test]
    fn total_variance_equals_trace() {
        let mut rng = Rng::new(7);
        let rows: Vec<Vec<f64>> =
            (0..25).map(|_| (0..5).map(|_| rng.uniform_in(-3.0, 3.0)).collect()).collect();
        let data = Mat::from_rows(&rows);
        let model = fit(&data, 5).unwrap();
        let means = data.col_means();
        let mut trace = 0.0;
        for j in 0..5 {
            let var: f64 =
                (0..25).map(|i| (data.get(i, j) - means[j]).powi(2)).sum::<f64>() / 24.0;
            trace += var;
        }
        let total: f64 = model.eigenvalues.iter().sum();
        assert!((total - trace).abs() < 1e-9);
    }

    #[test]
    fn training_mse_matches_discarded_eigenvalues() {
        // Projection optimality: MSE over entries after keeping k components
        // equals (Σ discarded λ)/m scaled by (n−1)/n, since eigenvalues use
        // the n−1 divisor while the MSE averages over all n rows.
        let mut rng = Rng::new(8);
        let n = 30;
        let m = 6;
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..m).map(|_| rng.uniform_in(-2.0, 2.0)).collect()).collect();
        let data = Mat::from_rows(&rows);
        let full = fit(&data, m).unwrap();
        let curve = mse_curve(&data, &data, m).unwrap();
        let scale = (n - 1) as f64 / n as f64;
        for (k, mse) in &curve {
            let discarded: f64 = full.eigenvalues[*k..].iter().sum();
            let expect = discarded * scale / m as f64;
            assert!((mse - expect).abs() < 1e-9, "k={k}: {mse} vs {expect}");
        }
    }

    #[test]
    fn mse_curve_is_non_increasing_and_hits_zero_at_rank() {
        let mut rng = Rng::new(9);
        let rows: Vec<Vec<f64>> =
            (0..40).map(|_| (0..7).map(|_| rng.gauss()).collect()).collect();
        let data = Mat::from_rows(&rows);
        let curve = mse_curve(&data, &data, 7).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12);
        }
        assert!(curve.last().unwrap().1 < 1e-18);
    }

    #[test]
    fn fit_rejects_bad_k() {
        let data = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(fit(&data, 0), Err(Error::Shape(_))));
        assert!(matches!(fit(&data, 2), Err(Error::Shape(_)))); // k > n−1
    }

    #[test]
    fn json_round_trip() {
        let data = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0], vec![0.0, 4.0]]);
        let model = fit(&data, 2).unwrap();
        let back = PcaModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back.mean, model.mean);
        assert_eq!(back.components, model.components);
    }
}

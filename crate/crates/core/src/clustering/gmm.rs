//! Gaussian mixture model fitted by expectation-maximization.
//!
//! E-step responsibilities and the log-likelihood are evaluated in the log
//! domain (Cholesky factorization per component, log-sum-exp per row), the
//! M-step re-estimates weights, means, and covariances from the
//! responsibilities with a ridge `reg·I` added to every covariance.
//! Initialization is a seeded farthest-point sweep over the data with
//! identity covariances and uniform weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, solve_lower, Mat};
use crate::rng::Rng;

/// Mixture parameters: weights on the simplex, K×d means, one SPD
/// covariance per component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
}

impl GmmParams {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    fn cov_mat(&self, k: usize) -> Mat {
        Mat::from_rows(&self.covariances[k])
    }
}

/// EM stopping and conditioning knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Ridge added to every covariance in each M-step.
    pub reg: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions { tol: 1e-6, max_iter: 500, reg: 1e-6 }
    }
}

/// Fit result: parameters, posterior responsibilities of the training
/// rows, and the log-likelihood after each EM iteration.
#[derive(Debug, Clone)]
pub struct GmmFit {
    pub params: GmmParams,
    pub responsibilities: Mat,
    pub log_likelihood: Vec<f64>,
}

struct ComponentFactor {
    chol: Mat,
    log_norm: f64, // -(d/2)·ln(2π) − ½·ln|Σ|
}

fn factorize(params: &GmmParams) -> Result<Vec<ComponentFactor>> {
    let d = params.dim() as f64;
    params
        .covariances
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let chol = cholesky(&params.cov_mat(k))?;
            let log_det: f64 = (0..chol.rows()).map(|i| chol.get(i, i).ln()).sum::<f64>() * 2.0;
            let log_norm = -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det);
            Ok(ComponentFactor { chol, log_norm })
        })
        .collect()
}

fn log_density(factor: &ComponentFactor, mean: &[f64], x: &[f64]) -> f64 {
    let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let y = solve_lower(&factor.chol, &diff);
    let quad: f64 = y.iter().map(|v| v * v).sum();
    factor.log_norm - 0.5 * quad
}

/// Posterior responsibilities and total log-likelihood of `x` under
/// `params`.
fn e_step(params: &GmmParams, x: &Mat) -> Result<(Mat, f64)> {
    let (n, k) = (x.rows(), params.k());
    let factors = factorize(params)?;
    let log_weights: Vec<f64> = params.weights.iter().map(|w| w.max(1e-300).ln()).collect();
    let mut resp = Mat::zeros(n, k);
    let mut ll = 0.0;
    let mut row_log = vec![0.0; k];
    for i in 0..n {
        let xi = x.row(i);
        for c in 0..k {
            row_log[c] = log_weights[c] + log_density(&factors[c], &params.means[c], xi);
        }
        let max = row_log.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = row_log.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum_exp.ln();
        ll += lse;
        for c in 0..k {
            resp.set(i, c, (row_log[c] - lse).exp());
        }
    }
    Ok((resp, ll))
}

fn m_step(x: &Mat, resp: &Mat, reg: f64) -> GmmParams {
    let (n, d, k) = (x.rows(), x.cols(), resp.cols());
    let mut weights = vec![0.0; k];
    let mut means = vec![vec![0.0; d]; k];
    let mut covariances = vec![vec![vec![0.0; d]; d]; k];

    for c in 0..k {
        let mut nk = 0.0;
        for i in 0..n {
            nk += resp.get(i, c);
        }
        weights[c] = nk / n as f64;
        if nk < 1e-300 {
            // dead component: leave a unit Gaussian at the origin
            for row in covariances[c].iter_mut().enumerate() {
                row.1[row.0] = 1.0;
            }
            continue;
        }
        for i in 0..n {
            let r = resp.get(i, c);
            for (j, m) in means[c].iter_mut().enumerate() {
                *m += r * x.get(i, j);
            }
        }
        for m in &mut means[c] {
            *m /= nk;
        }
        for i in 0..n {
            let r = resp.get(i, c);
            let xi = x.row(i);
            for a in 0..d {
                let da = xi[a] - means[c][a];
                for b in 0..=a {
                    let v = r * da * (xi[b] - means[c][b]);
                    covariances[c][a][b] += v;
                }
            }
        }
        for a in 0..d {
            for b in 0..=a {
                covariances[c][a][b] /= nk;
                covariances[c][b][a] = covariances[c][a][b];
            }
            covariances[c][a][a] += reg;
        }
    }
    GmmParams { weights, means, covariances }
}

/// Seeded farthest-point mean selection: the first mean is a random row,
/// each next one the row farthest (squared Euclidean) from all chosen so
/// far, ties to the lowest index.
fn init_params(x: &Mat, k: usize, seed: u64) -> GmmParams {
    let (n, d) = (x.rows(), x.cols());
    let mut rng = Rng::new(seed);
    let mut chosen: Vec<usize> = vec![rng.below(n)];
    let mut min_dist2 = vec![f64::INFINITY; n];
    while chosen.len() < k {
        let last = *chosen.last().unwrap();
        for i in 0..n {
            let mut d2 = 0.0;
            for j in 0..d {
                let diff = x.get(i, j) - x.get(last, j);
                d2 += diff * diff;
            }
            min_dist2[i] = min_dist2[i].min(d2);
        }
        let mut best = 0;
        for i in 1..n {
            if min_dist2[i] > min_dist2[best] {
                best = i;
            }
        }
        chosen.push(best);
    }
    let means = chosen.iter().map(|&i| x.row(i).to_vec()).collect();
    let eye: Vec<Vec<f64>> =
        (0..d).map(|a| (0..d).map(|b| if a == b { 1.0 } else { 0.0 }).collect()).collect();
    GmmParams { weights: vec![1.0 / k as f64; k], means, covariances: vec![eye; k] }
}

/// Run EM until the log-likelihood change drops below `tol` or `max_iter`
/// iterations.
pub fn gmm_fit(x: &Mat, k: usize, seed: u64, opts: &GmmOptions) -> Result<GmmFit> {
    let n = x.rows();
    if k == 0 {
        return Err(Error::Data("K must be at least 1".into()));
    }
    if n < k {
        return Err(Error::Data(format!("{n} rows for K={k} components")));
    }
    if !x.all_finite() {
        return Err(Error::Data("non-finite value in GMM input".into()));
    }

    let mut params = init_params(x, k, seed);
    let mut history = Vec::new();
    let mut resp;
    loop {
        let (r, ll) = e_step(&params, x)?;
        resp = r;
        let done = history.last().is_some_and(|&prev: &f64| (ll - prev).abs() < opts.tol)
            || history.len() + 1 >= opts.max_iter;
        history.push(ll);
        params = m_step(x, &resp, opts.reg);
        if done {
            // responsibilities correspond to the params that produced them;
            // refresh once so the returned pair is consistent
            let (r, ll) = e_step(&params, x)?;
            resp = r;
            history.push(ll);
            break;
        }
    }
    Ok(GmmFit { params, responsibilities: resp, log_likelihood: history })
}

/// Hard labels: argmax responsibility per row, ties to the lowest
/// component index.
pub fn gmm_predict(params: &GmmParams, x: &Mat) -> Result<Vec<usize>> {
    if x.cols() != params.dim() {
        return Err(Error::Shape(format!(
            "data dimension {} vs mixture dimension {}",
            x.cols(),
            params.dim()
        )));
    }
    let (resp, _) = e_step(params, x)?;
    let mut labels = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let mut best = 0;
        for c in 1..params.k() {
            if resp.get(i, c) > resp.get(i, best) {
                best = c;
            }
        }
        labels.push(best);
    }
    Ok(labels)
}

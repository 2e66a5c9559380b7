//! From-scratch MLP variational autoencoder with manual backpropagation.
//!
//! Architecture: a four-stage encoder (m → 0.8m → 0.27m → 8 → two parallel
//! width-2 heads emitting μ and log σ), the reparameterized latent
//! z = μ + σ⊙ζ, a mirrored decoder ending in a sigmoid layer, and a final
//! trainable linear layer of width m initialized with an orthogonal weight
//! matrix. All hidden activations are ReLU.
//!
//! The per-sample loss is the feature-mean squared reconstruction error
//! plus the KL divergence of N(μ, σ²) from the standard normal prior,
//! `−½ Σⱼ (1 + 2·logσⱼ − μⱼ² − σⱼ²)`.

mod io;
mod train;

pub use io::{load_model, model_from_json, model_to_json, save_model};
pub use train::{train, validation_split, AdamState, LossRecord, TrainConfig};

use crate::dataset::{normalize_mat, FeatureMatrix, NormalizationSpec};
use crate::error::{Error, Result};
use crate::linalg::{axpy, matmul_nt, qr_orthogonal, Mat};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    fn apply(&self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
            Activation::Linear => v,
        }
    }

    /// Derivative expressed through the post-activation value.
    fn derivative_from_output(&self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
        }
    }
}

/// One dense layer: out×in weights, out biases, activation.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub w: Mat,
    pub b: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    /// Batch forward: `act(X·Wᵀ + b)` row by row.
    fn forward(&self, x: &Mat) -> Mat {
        let mut y = matmul_nt(x, &self.w);
        for i in 0..y.rows() {
            let row = y.row_mut(i);
            for (v, b) in row.iter_mut().zip(&self.b) {
                *v = self.activation.apply(*v + b);
            }
        }
        y
    }

    /// Backprop one layer: consumes dL/d(output), accumulates parameter
    /// gradients, and returns dL/d(input). `input`/`output` are the cached
    /// forward matrices.
    fn backward(&self, input: &Mat, output: &Mat, d_out: &Mat, grad: &mut LayerGrad) -> Mat {
        let batch = input.rows();
        let mut d_in = Mat::zeros(batch, self.in_dim());
        let mut d_pre = vec![0.0; self.out_dim()];
        for i in 0..batch {
            for (n, dp) in d_pre.iter_mut().enumerate() {
                *dp = d_out.get(i, n) * self.activation.derivative_from_output(output.get(i, n));
            }
            let x_row = input.row(i);
            for (n, &dp) in d_pre.iter().enumerate() {
                if dp != 0.0 {
                    axpy(dp, x_row, grad.dw.row_mut(n));
                    grad.db[n] += dp;
                    axpy(dp, self.w.row(n), d_in.row_mut(i));
                }
            }
        }
        d_in
    }
}

/// Gradient buffer shaped like one layer.
#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub dw: Mat,
    pub db: Vec<f64>,
}

impl LayerGrad {
    fn zeros_like(layer: &DenseLayer) -> Self {
        LayerGrad { dw: Mat::zeros(layer.w.rows(), layer.w.cols()), db: vec![0.0; layer.b.len()] }
    }
}

/// Encoder/decoder/orthogonal-layer parameters plus the normalizer the
/// model was trained with.
#[derive(Debug, Clone)]
pub struct VaeModel {
    pub encoder: Vec<DenseLayer>,
    pub mu_head: DenseLayer,
    pub logsigma_head: DenseLayer,
    pub decoder: Vec<DenseLayer>,
    pub orthogonal: DenseLayer,
    pub input_dim: usize,
    pub latent_dim: usize,
    pub normalizer: Option<NormalizationSpec>,
}

/// Hidden widths: round-half-up of 0.8m and 0.27m, floored at 8.
pub fn hidden_widths(m: usize) -> (usize, usize) {
    let round_half_up = |x: f64| (x + 0.5).floor() as usize;
    (round_half_up(0.8 * m as f64).max(8), round_half_up(0.27 * m as f64).max(8))
}

/// Layer count in the fixed parameter order (encoder hiddens, μ head,
/// log σ head, decoder, orthogonal).
const ENCODER_LAYERS: usize = 3;
const DECODER_LAYERS: usize = 4;

impl VaeModel {
    /// Fixed traversal order of every layer, shared by gradients, Adam
    /// state, snapshots, and serialization.
    pub fn layers(&self) -> Vec<&DenseLayer> {
        let mut out = Vec::with_capacity(ENCODER_LAYERS + 2 + DECODER_LAYERS + 1);
        out.extend(self.encoder.iter());
        out.push(&self.mu_head);
        out.push(&self.logsigma_head);
        out.extend(self.decoder.iter());
        out.push(&self.orthogonal);
        out
    }

    pub fn layers_mut(&mut self) -> Vec<&mut DenseLayer> {
        let mut out: Vec<&mut DenseLayer> = Vec::with_capacity(ENCODER_LAYERS + 2 + DECODER_LAYERS + 1);
        out.extend(self.encoder.iter_mut());
        out.push(&mut self.mu_head);
        out.push(&mut self.logsigma_head);
        out.extend(self.decoder.iter_mut());
        out.push(&mut self.orthogonal);
        out
    }

    pub fn zero_gradients(&self) -> Vec<LayerGrad> {
        self.layers().iter().map(|l| LayerGrad::zeros_like(l)).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().iter().map(|l| l.w.rows() * l.w.cols() + l.b.len()).sum()
    }
}

/// Build an untrained model for `m` input features.
///
/// Dense weights and biases draw from U(−1/√fan_in, 1/√fan_in) on the
/// seeded stream, in layer order (weights row-major, then biases); the
/// orthogonal layer takes the Q factor of a seeded Gaussian matrix and a
/// zero bias. Fixing the draw order makes fixed-seed builds reproducible.
pub fn build_model(m: usize, latent_dim: usize, seed: u64) -> Result<VaeModel> {
    if m < 4 {
        return Err(Error::Shape(format!("need at least 4 input features, got {m}")));
    }
    if latent_dim < 1 {
        return Err(Error::Shape("latent dimension must be at least 1".into()));
    }
    let (w1, w2) = hidden_widths(m);
    let mut rng = Rng::new(seed);

    let mut dense = |out: usize, inp: usize, activation: Activation| {
        let scale = 1.0 / (inp as f64).sqrt();
        let mut w = Mat::zeros(out, inp);
        for v in w.data_mut() {
            *v = rng.uniform_in(-scale, scale);
        }
        let b: Vec<f64> = (0..out).map(|_| rng.uniform_in(-scale, scale)).collect();
        DenseLayer { w, b, activation }
    };

    let encoder = vec![
        dense(w1, m, Activation::Relu),
        dense(w2, w1, Activation::Relu),
        dense(8, w2, Activation::Relu),
    ];
    let mu_head = dense(latent_dim, 8, Activation::Linear);
    let logsigma_head = dense(latent_dim, 8, Activation::Linear);
    let decoder = vec![
        dense(8, latent_dim, Activation::Relu),
        dense(w2, 8, Activation::Relu),
        dense(w1, w2, Activation::Relu),
        dense(m, w1, Activation::Sigmoid),
    ];

    let mut gaussian = Mat::zeros(m, m);
    for v in gaussian.data_mut() {
        *v = rng.gauss();
    }
    let orthogonal =
        DenseLayer { w: qr_orthogonal(&gaussian), b: vec![0.0; m], activation: Activation::Linear };

    Ok(VaeModel {
        encoder,
        mu_head,
        logsigma_head,
        decoder,
        orthogonal,
        input_dim: m,
        latent_dim,
        normalizer: None,
    })
}

/// Deterministic encoder pass for one normalized sample: (μ, log σ).
pub fn encode(model: &VaeModel, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != model.input_dim {
        return Err(Error::Shape(format!(
            "input length {} vs model dimension {}",
            x.len(),
            model.input_dim
        )));
    }
    let batch = Mat::from_rows(&[x.to_vec()]);
    let (mu, ls) = encode_batch(model, &batch);
    Ok((mu.row(0).to_vec(), ls.row(0).to_vec()))
}

fn encode_batch(model: &VaeModel, x: &Mat) -> (Mat, Mat) {
    let mut h = x.clone();
    for layer in &model.encoder {
        h = layer.forward(&h);
    }
    (model.mu_head.forward(&h), model.logsigma_head.forward(&h))
}

/// z = μ + σ⊙ζ with σ = exp(logσ). With `variance_scaling`, the noise is
/// scaled by σ² instead (the published recurrence written with σ²), kept
/// behind a flag for fidelity studies.
pub fn reparameterize(mu: &[f64], logsigma: &[f64], zeta: &[f64], variance_scaling: bool) -> Vec<f64> {
    mu.iter()
        .zip(logsigma)
        .zip(zeta)
        .map(|((m, ls), z)| {
            let scale = if variance_scaling { (2.0 * ls).exp() } else { ls.exp() };
            m + scale * z
        })
        .collect()
}

/// Decoder pass: latent → sigmoid-bounded x′ in (0,1)^m.
pub fn decode(model: &VaeModel, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != model.latent_dim {
        return Err(Error::Shape(format!(
            "latent length {} vs model latent dimension {}",
            z.len(),
            model.latent_dim
        )));
    }
    let mut h = Mat::from_rows(&[z.to_vec()]);
    for layer in &model.decoder {
        h = layer.forward(&h);
    }
    Ok(h.row(0).to_vec())
}

/// Final linear map x″ = W·x′ + b of the orthogonal output layer.
pub fn orthogonal_out(model: &VaeModel, x_prime: &[f64]) -> Result<Vec<f64>> {
    if x_prime.len() != model.input_dim {
        return Err(Error::Shape(format!(
            "input length {} vs model dimension {}",
            x_prime.len(),
            model.input_dim
        )));
    }
    let h = Mat::from_rows(&[x_prime.to_vec()]);
    Ok(model.orthogonal.forward(&h).row(0).to_vec())
}

/// Per-sample loss components: feature-mean squared reconstruction error,
/// the KL term, and their sum.
pub fn loss(x: &[f64], x_out: &[f64], mu: &[f64], logsigma: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), x_out.len());
    let m = x.len() as f64;
    let rec = x.iter().zip(x_out).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / m;
    let kl = kl_term(mu, logsigma);
    (rec, kl, rec + kl)
}

/// `−½ Σⱼ (1 + 2·logσⱼ − μⱼ² − σⱼ²)`; zero exactly at the standard normal.
pub fn kl_term(mu: &[f64], logsigma: &[f64]) -> f64 {
    -0.5 * mu
        .iter()
        .zip(logsigma)
        .map(|(m, ls)| 1.0 + 2.0 * ls - m * m - (2.0 * ls).exp())
        .sum::<f64>()
}

/// Everything cached by one training forward pass.
pub struct ForwardPass {
    enc_outputs: Vec<Mat>,
    mu: Mat,
    logsigma: Mat,
    z: Mat,
    dec_outputs: Vec<Mat>,
    x_out: Mat,
    pub rec: f64,
    pub kl: f64,
}

impl ForwardPass {
    pub fn total(&self, kl_weight: f64) -> f64 {
        self.rec + kl_weight * self.kl
    }
}

/// Batch forward with injected noise (`None` means ζ = 0, the
/// deterministic validation path).
pub fn forward_batch(
    model: &VaeModel,
    x: &Mat,
    zeta: Option<&Mat>,
    variance_scaling: bool,
) -> ForwardPass {
    let batch = x.rows();
    let mut enc_outputs = Vec::with_capacity(model.encoder.len());
    let mut h = x.clone();
    for layer in &model.encoder {
        h = layer.forward(&h);
        enc_outputs.push(h.clone());
    }
    let mu = model.mu_head.forward(&h);
    let logsigma = model.logsigma_head.forward(&h);

    let mut z = mu.clone();
    if let Some(zeta) = zeta {
        for i in 0..batch {
            for j in 0..model.latent_dim {
                let ls = logsigma.get(i, j);
                let scale = if variance_scaling { (2.0 * ls).exp() } else { ls.exp() };
                let v = z.get(i, j) + scale * zeta.get(i, j);
                z.set(i, j, v);
            }
        }
    }

    let mut dec_outputs = Vec::with_capacity(model.decoder.len());
    let mut d = z.clone();
    for layer in &model.decoder {
        d = layer.forward(&d);
        dec_outputs.push(d.clone());
    }
    let x_out = model.orthogonal.forward(&d);

    let m = model.input_dim as f64;
    let mut rec = 0.0;
    for i in 0..batch {
        let xi = x.row(i);
        let oi = x_out.row(i);
        let mut s = 0.0;
        for (a, b) in xi.iter().zip(oi) {
            let d = a - b;
            s += d * d;
        }
        rec += s / m;
    }
    rec /= batch as f64;

    let mut kl = 0.0;
    for i in 0..batch {
        kl += kl_term(mu.row(i), logsigma.row(i));
    }
    kl /= batch as f64;

    ForwardPass { enc_outputs, mu, logsigma, z, dec_outputs, x_out, rec, kl }
}

/// Exact analytic gradients of `rec + kl_weight·kl` for the whole batch,
/// including the μ/logσ heads through the reparameterization path. The
/// layer order matches [`VaeModel::layers`]; accumulation order is fixed,
/// so gradients are deterministic.
pub fn backward_batch(
    model: &VaeModel,
    x: &Mat,
    pass: &ForwardPass,
    zeta: Option<&Mat>,
    kl_weight: f64,
    variance_scaling: bool,
) -> Vec<LayerGrad> {
    let batch = x.rows();
    let m = model.input_dim as f64;
    let mut grads = model.zero_gradients();
    let n_enc = model.encoder.len();
    // grads index map: encoder 0.., mu, logsigma, decoder.., orthogonal
    let idx_mu = n_enc;
    let idx_ls = n_enc + 1;
    let idx_dec = n_enc + 2;
    let idx_orth = idx_dec + model.decoder.len();

    // d total / d x_out
    let mut d_out = Mat::zeros(batch, model.input_dim);
    for i in 0..batch {
        let xi = x.row(i);
        let oi = pass.x_out.row(i);
        let row = d_out.row_mut(i);
        for (j, r) in row.iter_mut().enumerate() {
            *r = 2.0 * (oi[j] - xi[j]) / (m * batch as f64);
        }
    }

    // orthogonal layer (input is the last decoder output)
    let dec_last = pass.dec_outputs.last().expect("decoder has layers");
    let mut d = model.orthogonal.backward(dec_last, &pass.x_out, &d_out, &mut grads[idx_orth]);

    // decoder chain
    for li in (0..model.decoder.len()).rev() {
        let input: &Mat = if li == 0 { &pass.z } else { &pass.dec_outputs[li - 1] };
        d = model.decoder[li].backward(input, &pass.dec_outputs[li], &d, &mut grads[idx_dec + li]);
    }
    let d_z = d;

    // reparameterization + KL head gradients
    let mut d_mu = d_z.clone();
    let mut d_ls = Mat::zeros(batch, model.latent_dim);
    for i in 0..batch {
        for j in 0..model.latent_dim {
            let mu = pass.mu.get(i, j);
            let ls = pass.logsigma.get(i, j);
            let sigma2 = (2.0 * ls).exp();
            let mut g_ls = 0.0;
            if let Some(zeta) = zeta {
                let dz_dls = if variance_scaling {
                    2.0 * sigma2 * zeta.get(i, j)
                } else {
                    ls.exp() * zeta.get(i, j)
                };
                g_ls += d_z.get(i, j) * dz_dls;
            }
            // KL: ∂kl/∂μ = μ, ∂kl/∂logσ = σ² − 1 (per sample, mean over batch)
            let scale = kl_weight / batch as f64;
            let v = d_mu.get(i, j) + scale * mu;
            d_mu.set(i, j, v);
            g_ls += scale * (sigma2 - 1.0);
            d_ls.set(i, j, g_ls);
        }
    }

    let enc_last = pass.enc_outputs.last().expect("encoder has layers");
    let d_h_mu = model.mu_head.backward(enc_last, &pass.mu, &d_mu, &mut grads[idx_mu]);
    let d_h_ls = model.logsigma_head.backward(enc_last, &pass.logsigma, &d_ls, &mut grads[idx_ls]);
    let mut d_h = d_h_mu;
    for i in 0..batch {
        let row = d_h.row_mut(i);
        for (j, r) in row.iter_mut().enumerate() {
            *r += d_h_ls.get(i, j);
        }
    }

    // encoder chain
    let mut d = d_h;
    for li in (0..n_enc).rev() {
        let input: &Mat = if li == 0 { x } else { &pass.enc_outputs[li - 1] };
        d = model.encoder[li].backward(input, &pass.enc_outputs[li], &d, &mut grads[li]);
    }
    grads
}

/// Per-timestep 2-D latent points: the phase trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTrajectory {
    pub points: Mat,
    pub sample_rate: f64,
}

impl LatentTrajectory {
    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    /// CSV with the exact header `t,z1,z2`.
    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut out = String::from("t,z1,z2\n");
        for i in 0..self.points.rows() {
            out.push_str(&crate::dataset::fmt_f64(i as f64 / self.sample_rate));
            for j in 0..self.points.cols() {
                out.push(',');
                out.push_str(&crate::dataset::fmt_f64(self.points.get(i, j)));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load_csv(path: &std::path::Path) -> Result<LatentTrajectory> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty trajectory file".into()))?;
        if header != "t,z1,z2" {
            return Err(Error::Format(format!("expected header t,z1,z2, got {header:?}")));
        }
        let mut times = Vec::new();
        let mut rows = Vec::new();
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 3 {
                return Err(Error::Format("trajectory rows need 3 columns".into()));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Format(format!("bad number {s:?}")))
            };
            times.push(parse(cells[0])?);
            rows.push(vec![parse(cells[1])?, parse(cells[2])?]);
        }
        if times.len() < 2 {
            return Err(Error::Data("trajectory needs at least 2 rows".into()));
        }
        let dt = times[1] - times[0];
        if dt <= 0.0 {
            return Err(Error::Data("non-increasing trajectory timestamps".into()));
        }
        Ok(LatentTrajectory { points: Mat::from_rows(&rows), sample_rate: 1.0 / dt })
    }
}

/// Mean-embedding trajectory of a dataset: per row, z = μ(x) with ζ = 0.
/// The input is raw sensor data; the model's stored normalizer is applied
/// first.
pub fn project(model: &VaeModel, data: &FeatureMatrix) -> Result<LatentTrajectory> {
    let normalized = normalized_values(model, data)?;
    let (mu, _) = encode_batch(model, &normalized);
    Ok(LatentTrajectory { points: mu, sample_rate: data.sample_rate() })
}

/// Mean over rows of the per-sample reconstruction error with ζ = 0.
pub fn reconstruction_mse(model: &VaeModel, data: &FeatureMatrix) -> Result<f64> {
    let normalized = normalized_values(model, data)?;
    let pass = forward_batch(model, &normalized, None, false);
    Ok(pass.rec)
}

fn normalized_values(model: &VaeModel, data: &FeatureMatrix) -> Result<Mat> {
    if data.n_channels() != model.input_dim {
        return Err(Error::Shape(format!(
            "data has {} channels, model expects {}",
            data.n_channels(),
            model.input_dim
        )));
    }
    let spec = model
        .normalizer
        .as_ref()
        .ok_or_else(|| Error::Data("model has no normalizer (untrained)".into()))?;
    let mut values = data.values().clone();
    normalize_mat(spec, &mut values);
    Ok(values)
}

//! Model serialization: a JSON document carrying every layer (row-major
//! weights, biases, activation), the normalizer, and the training
//! configuration. Numeric payloads are written in scientific notation with
//! 18 significant digits, enough to reproduce each f64 bit-exactly.

use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, TrainConfig, VaeModel};
use crate::dataset::NormalizationSpec;
use crate::error::{Error, Result};
use crate::linalg::Mat;

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Relu => "relu",
        Activation::Sigmoid => "sigmoid",
        Activation::Linear => "linear",
    }
}

fn parse_activation(s: &str) -> Result<Activation> {
    match s {
        "relu" => Ok(Activation::Relu),
        "sigmoid" => Ok(Activation::Sigmoid),
        "linear" => Ok(Activation::Linear),
        other => Err(Error::Format(format!("unknown activation {other:?}"))),
    }
}

fn push_float_array(out: &mut String, values: &[f64]) {
    out.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("{v:.17e}"));
    }
    out.push(']');
}

/// Serialize a model (with the config that trained it) to the on-disk JSON
/// form. Layer order is fixed: encoder hiddens, μ head, log σ head,
/// decoder, orthogonal layer.
pub fn model_to_json(model: &VaeModel, config: &TrainConfig) -> String {
    let mut out = String::with_capacity(model.parameter_count() * 26);
    out.push_str("{\n");
    out.push_str(&format!("  \"input_dim\": {},\n", model.input_dim));
    out.push_str(&format!("  \"latent_dim\": {},\n", model.latent_dim));
    out.push_str("  \"layers\": [\n");
    let layers = model.layers();
    for (i, layer) in layers.iter().enumerate() {
        out.push_str(&format!(
            "    {{\"rows\": {}, \"cols\": {}, \"activation\": \"{}\", \"weights\": ",
            layer.w.rows(),
            layer.w.cols(),
            activation_name(layer.activation)
        ));
        push_float_array(&mut out, layer.w.data());
        out.push_str(", \"biases\": ");
        push_float_array(&mut out, &layer.b);
        out.push('}');
        if i + 1 < layers.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("  ],\n");
    match &model.normalizer {
        Some(spec) => {
            out.push_str("  \"normalizer\": {\"mins\": ");
            push_float_array(&mut out, &spec.mins);
            out.push_str(", \"maxs\": ");
            push_float_array(&mut out, &spec.maxs);
            out.push_str("},\n");
        }
        None => out.push_str("  \"normalizer\": null,\n"),
    }
    out.push_str("  \"training_config\": ");
    out.push_str(&serde_json::to_string(config).expect("config serializes"));
    out.push_str(",\n");
    out.push_str(&format!("  \"seed\": {}\n", config.seed));
    out.push_str("}\n");
    out
}

#[derive(Serialize, Deserialize)]
struct LayerJson {
    rows: usize,
    cols: usize,
    activation: String,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Deserialize)]
struct ModelJson {
    input_dim: usize,
    latent_dim: usize,
    layers: Vec<LayerJson>,
    normalizer: Option<NormalizationSpec>,
    training_config: TrainConfig,
    #[allow(dead_code)]
    seed: u64,
}

pub fn model_from_json(text: &str) -> Result<(VaeModel, TrainConfig)> {
    let raw: ModelJson =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("model JSON: {e}")))?;
    if raw.layers.len() != 10 {
        return Err(Error::Format(format!(
            "expected 10 layers (3 encoder, 2 heads, 4 decoder, 1 orthogonal), got {}",
            raw.layers.len()
        )));
    }
    let mut layers = Vec::with_capacity(raw.layers.len());
    for l in &raw.layers {
        if l.weights.len() != l.rows * l.cols {
            return Err(Error::Format(format!(
                "layer weight array has {} entries for {}×{}",
                l.weights.len(),
                l.rows,
                l.cols
            )));
        }
        if l.biases.len() != l.rows {
            return Err(Error::Format(format!(
                "layer bias array has {} entries for {} rows",
                l.biases.len(),
                l.rows
            )));
        }
        layers.push(DenseLayer {
            w: Mat::from_vec(l.rows, l.cols, l.weights.clone()),
            b: l.biases.clone(),
            activation: parse_activation(&l.activation)?,
        });
    }
    let mut iter = layers.into_iter();
    let encoder: Vec<DenseLayer> = (0..3).map(|_| iter.next().unwrap()).collect();
    let mu_head = iter.next().unwrap();
    let logsigma_head = iter.next().unwrap();
    let decoder: Vec<DenseLayer> = (0..4).map(|_| iter.next().unwrap()).collect();
    let orthogonal = iter.next().unwrap();

    let model = VaeModel {
        encoder,
        mu_head,
        logsigma_head,
        decoder,
        orthogonal,
        input_dim: raw.input_dim,
        latent_dim: raw.latent_dim,
        normalizer: raw.normalizer,
    };
    validate_shapes(&model)?;
    Ok((model, raw.training_config))
}

fn validate_shapes(model: &VaeModel) -> Result<()> {
    let fail = |msg: &str| Err(Error::Format(msg.to_string()));
    if model.encoder[0].in_dim() != model.input_dim {
        return fail("encoder input width must equal input_dim");
    }
    for pair in model.encoder.windows(2) {
        if pair[0].out_dim() != pair[1].in_dim() {
            return fail("inconsistent encoder layer widths");
        }
    }
    let trunk = model.encoder.last().unwrap().out_dim();
    for head in [&model.mu_head, &model.logsigma_head] {
        if head.in_dim() != trunk || head.out_dim() != model.latent_dim {
            return fail("head widths must map encoder trunk to latent_dim");
        }
    }
    if model.decoder[0].in_dim() != model.latent_dim {
        return fail("decoder input width must equal latent_dim");
    }
    for pair in model.decoder.windows(2) {
        if pair[0].out_dim() != pair[1].in_dim() {
            return fail("inconsistent decoder layer widths");
        }
    }
    if model.decoder.last().unwrap().out_dim() != model.input_dim
        || model.orthogonal.in_dim() != model.input_dim
        || model.orthogonal.out_dim() != model.input_dim
    {
        return fail("decoder and orthogonal layers must end at input_dim");
    }
    Ok(())
}

pub fn save_model(model: &VaeModel, config: &TrainConfig, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, model_to_json(model, config))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_model(path: &std::path::Path) -> Result<(VaeModel, TrainConfig)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    model_from_json(&text)
}

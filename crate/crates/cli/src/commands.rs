//! Command implementations behind the CLI: each one reads its inputs from
//! disk, runs one pipeline stage, writes its artifacts, and returns a
//! [`RunReport`]. Artifacts are byte-identical across reruns with the same
//! config and seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use oscmodes::clustering::{
    self, extract_cycles, gmm_point_cluster, ClusterLabels, GmmDtwOptions,
};
use oscmodes::dataset::{
    self, estimate_period, fmt_f64, segment_cycles, CycleSet, FeatureMatrix,
};
use oscmodes::error::{Error, Result};
use oscmodes::linalg::Mat;
use oscmodes::metrics::{self, MetricsReport};
use oscmodes::pca;
use oscmodes::synthgen::generate_suite;
use oscmodes::vae::{self, build_model, VaeModel};
use oscmodes::wd;

use crate::config::{ClusterMethod, RunConfig};
use crate::report::{RunReport, StageClock};
use crate::svg;

/// Train/predict file pair of one mode, relative to the manifest location.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitPaths {
    pub train: String,
    pub predict: String,
}

pub type Manifest = BTreeMap<String, SplitPaths>;

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

/// Load one split of every mode, in manifest (lexicographic) order.
fn load_split(manifest: &Manifest, base: &Path, predict: bool) -> Result<Vec<(String, FeatureMatrix)>> {
    let mut out = Vec::with_capacity(manifest.len());
    for (mode, paths) in manifest {
        let rel = if predict { &paths.predict } else { &paths.train };
        let matrix = dataset::load_csv(&base.join(rel))?;
        out.push((mode.clone(), matrix));
    }
    Ok(out)
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn config_echo(config: &RunConfig) -> serde_json::Value {
    serde_json::to_value(config).expect("config serializes")
}

/// Oscillation period in samples: the configured value, or the dominant
/// spectral peak of channel 0 of the first training matrix.
fn resolve_period(config: &RunConfig, first_train: &FeatureMatrix) -> Result<usize> {
    match config.period {
        Some(p) => Ok(p),
        None => estimate_period(first_train, 0),
    }
}

/// Project a dataset and cut the trajectory into whole cycles.
fn latent_cycles(
    model: &VaeModel,
    matrix: &FeatureMatrix,
    period: usize,
    limit: Option<usize>,
) -> Result<(Mat, CycleSet, Vec<Mat>)> {
    let trajectory = vae::project(model, matrix)?;
    let cycle_set = segment_cycles(trajectory.len(), period, limit)?;
    let cycles = extract_cycles(&trajectory.points, &cycle_set);
    Ok((trajectory.points, cycle_set, cycles))
}

/// Generate the labeled synthetic suite and write per-mode train/predict
/// CSVs plus the manifest.
pub fn cmd_synth(config: &RunConfig, out: &Path, timings: bool) -> Result<RunReport> {
    ensure_out_dir(out)?;
    let mut clock = StageClock::new(timings);
    let suite = clock.stage("synth", || generate_suite(&config.synth))?;

    let mut manifest: Manifest = BTreeMap::new();
    let mut artifacts = Vec::new();
    for entry in &suite {
        let name = entry.label.clone().unwrap_or_else(|| "single".to_string());
        let train_name = format!("{name}_train.csv");
        let predict_name = format!("{name}_predict.csv");
        entry.train.save_csv(&out.join(&train_name))?;
        entry.predict.save_csv(&out.join(&predict_name))?;
        artifacts.push(train_name.clone());
        artifacts.push(predict_name.clone());
        manifest.insert(name, SplitPaths { train: train_name, predict: predict_name });
    }
    let manifest_text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&out.join("manifest.json"), &manifest_text)?;
    artifacts.push("manifest.json".to_string());

    let mut report = RunReport::new("synth", config_echo(config));
    report.artifacts = artifacts;
    report.timings_ms = clock.into_timings();
    report.write(out)?;
    Ok(report)
}

/// Train one autoencoder on the concatenated training matrices of every
/// mode; writes the model JSON and the per-epoch loss history.
pub fn cmd_train(manifest_path: &Path, config: &RunConfig, out: &Path, timings: bool) -> Result<RunReport> {
    ensure_out_dir(out)?;
    let mut clock = StageClock::new(timings);
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_dir(manifest_path);
    let labeled = clock.stage("load", || load_split(&manifest, &base, false))?;
    let parts: Vec<&FeatureMatrix> = labeled.iter().map(|(_, m)| m).collect();
    let data = FeatureMatrix::concat(&parts)?;

    let model = build_model(data.n_channels(), 2, config.train.seed)?;
    let (model, history) = clock.stage("train", || vae::train(model, &data, &config.train))?;

    vae::save_model(&model, &config.train, &out.join("model.json"))?;
    let mut csv = String::from("epoch,train_loss,val_loss,rec,kl\n");
    for r in &history {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch,
            fmt_f64(r.train_loss),
            fmt_f64(r.val_loss),
            fmt_f64(r.rec),
            fmt_f64(r.kl)
        ));
    }
    write_text(&out.join("history.csv"), &csv)?;

    let best = history.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
    let mut report = RunReport::new("train", config_echo(config));
    report.artifacts = vec!["model.json".into(), "history.csv".into()];
    report.extra = Some(serde_json::json!({
        "epochs_run": history.len(),
        "best_val_loss": best,
        "rows": data.n_samples(),
        "channels": data.n_channels(),
    }));
    report.timings_ms = clock.into_timings();
    report.write(out)?;
    Ok(report)
}

/// Project one dataset to its latent trajectory CSV (`t,z1,z2`).
pub fn cmd_encode(model_path: &Path, data_path: &Path, out: &Path, timings: bool) -> Result<RunReport> {
    ensure_out_dir(out)?;
    let mut clock = StageClock::new(timings);
    let (model, train_config) = vae::load_model(model_path)?;
    let data = dataset::load_csv(data_path)?;
    let trajectory = clock.stage("encode", || vae::project(&model, &data))?;

    let stem = data_path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    let name = format!("{stem}_latent.csv");
    trajectory.save_csv(&out.join(&name))?;

    let mut report = RunReport::new(
        "encode",
        serde_json::json!({"model": model_path.display().to_string(), "train_config": train_config}),
    );
    report.artifacts = vec![name];
    report.timings_ms = clock.into_timings();
    report.write(out)?;
    Ok(report)
}

struct LabeledCycles {
    /// Mode names in manifest order.
    modes: Vec<String>,
    /// Per-mode latent cycles of the chosen split.
    per_mode: Vec<Vec<Mat>>,
    period: usize,
}

fn project_split(
    model: &VaeModel,
    manifest: &Manifest,
    base: &Path,
    config: &RunConfig,
    predict: bool,
) -> Result<LabeledCycles> {
    let loaded = load_split(manifest, base, predict)?;
    if loaded.is_empty() {
        return Err(Error::Data("empty manifest".into()));
    }
    let period = resolve_period(config, &loaded[0].1)?;
    let mut modes = Vec::new();
    let mut per_mode = Vec::new();
    for (mode, matrix) in &loaded {
        let (_, _, cycles) = latent_cycles(model, matrix, period, None)?;
        modes.push(mode.clone());
        per_mode.push(cycles);
    }
    Ok(LabeledCycles { modes, per_mode, period })
}

/// Supervised classification: benchmarks from the labeled training cycles,
/// queries from the prediction cycles, grouped `group_size` cycles at a
/// time.
pub fn cmd_classify_wd(
    model_path: &Path,
    manifest_path: &Path,
    config: &RunConfig,
    out: &Path,
    timings: bool,
) -> Result<RunReport> {
    if config.classify.group_size == 0 {
        return Err(Error::Data("group_size must be at least 1".into()));
    }
    ensure_out_dir(out)?;
    let mut clock = StageClock::new(timings);
    let (model, _) = vae::load_model(model_path)?;
    let manifest = load_manifest(manifest_path)?;
    if manifest.values().next().is_none() {
        return Err(Error::Data("empty manifest".into()));
    }
    let base = manifest_dir(manifest_path);

    let bench = clock.stage("benchmarks", || project_split(&model, &manifest, &base, config, false))?;
    if bench.modes.iter().any(|m| m == "single") {
        return Err(Error::Data("benchmarks need labeled modes".into()));
    }
    let mut labeled = Vec::new();
    for (mode, cycles) in bench.modes.iter().zip(&bench.per_mode) {
        for c in cycles {
            labeled.push((mode.clone(), c.clone()));
        }
    }
    let library = wd::build_benchmarks(&labeled)?;

    let queries = clock.stage("queries", || project_split(&model, &manifest, &base, config, true))?;
    let group = config.classify.group_size;
    let mut report_rows = Vec::new();
    let mut index = 0usize;
    let mut pred_idx = Vec::new();
    let mut truth_idx = Vec::new();
    let mut score_rows: Vec<Vec<f64>> = Vec::new();
    let class_names: Vec<String> = queries.modes.clone();
    clock.stage("classify", || -> Result<()> {
        for (mode_i, (mode, cycles)) in queries.modes.iter().zip(&queries.per_mode).enumerate() {
            for chunk in cycles.chunks(group) {
                if chunk.len() < group {
                    break; // trailing partial group dropped
                }
                let mut samples = Vec::new();
                for c in chunk {
                    samples.extend(wd::flatten_cycle(c)?);
                }
                samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let (predicted, scores) = wd::classify(&library, &samples)?;
                pred_idx.push(class_names.iter().position(|m| *m == predicted).unwrap());
                truth_idx.push(mode_i);
                // smaller distance = stronger membership
                score_rows.push(class_names.iter().map(|m| -scores[m]).collect());
                report_rows.push(wd::WdCycleReport {
                    index,
                    scores,
                    predicted,
                    truth: Some(mode.clone()),
                });
                index += 1;
            }
        }
        Ok(())
    })?;

    let wd_report = wd::WdReport { cycles: report_rows };
    write_text(
        &out.join("wd_report.json"),
        &serde_json::to_string_pretty(&wd_report).expect("report serializes"),
    )?;
    write_text(&out.join("wd_table.csv"), &wd_report.to_csv())?;

    let cm = metrics::confusion(&pred_idx, &truth_idx, class_names.len(), class_names.clone())?;
    let metrics_report = metrics::report(&cm, Some((&score_rows, &truth_idx)))?;
    write_text(
        &out.join("metrics.json"),
        &serde_json::to_string_pretty(&metrics_report).expect("metrics serialize"),
    )?;

    let mut report = RunReport::new("classify-wd", config_echo(config));
    report.artifacts =
        vec!["wd_report.json".into(), "wd_table.csv".into(), "metrics.json".into()];
    report.metrics = Some(metrics_report);
    report.extra = Some(serde_json::json!({
        "accuracy": wd_report.accuracy(),
        "period": queries.period,
        "groups": index,
        "group_size": group,
    }));
    report.timings_ms = clock.into_timings();
    report.write(out)?;
    Ok(report)
}

/// Square CSV of a DTW feature matrix, headered by cycle index.
fn dtw_matrix_csv(features: &Mat) -> String {
    let n = features.rows();
    let mut out = String::from("cycle");
    for j in 0..n {
        out.push_str(&format!(",{j}"));
    }
    out.push('\n');
    for i in 0..n {
        out.push_str(&format!("{i}"));
        for j in 0..n {
            out.push(',');
            out.push_str(&fmt_f64(features.get(i, j)));
        }
        out.push('\n');
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn run_cluster_method(
    method: ClusterMethod,
    config: &RunConfig,
    all_cycles: &[Mat],
    combined_points: &Mat,
    combined_set: &CycleSet,
    k: usize,
    seed: u64,
    out: &Path,
) -> Result<(ClusterLabels, Vec<String>)> {
    match method {
        ClusterMethod::GmmDtw => {
            let opts = GmmDtwOptions {
                pca_dims: config.cluster.pca_dims,
                raw_features: config.cluster.raw_features,
                gmm: config.cluster.gmm_options(),
            };
            let features = clustering::dtw_feature_matrix(all_cycles)?;
            write_text(&out.join("dtw_matrix.csv"), &dtw_matrix_csv(&features))?;
            let labels = clustering::gmm_over_dtw_features(&features, k, seed, &opts)?;
            Ok((labels, vec!["dtw_matrix.csv".into()]))
        }
        ClusterMethod::Gmm => {
            let labels = gmm_point_cluster(
                combined_points,
                combined_set,
                k,
                seed,
                &config.cluster.gmm_options(),
            )?;
            Ok((labels, Vec::new()))
        }
        ClusterMethod::KShape => {
            let flattened: Vec<Vec<f64>> = all_cycles
                .iter()
                .map(|c| {
                    // interleaved series, order preserved (shape matters here)
                    let mut seq = Vec::with_capacity(c.rows() * c.cols());
                    for row in c.iter_rows() {
                        seq.extend_from_slice(row);
                    }
                    seq
                })
                .collect();
            let model = clustering::kshape_fit(&flattened, k, seed, config.cluster.kshape_max_iter)?;
            let n = model.assignments.len();
            let mut scores = Mat::zeros(n, k);
            for (i, row) in model.distances.iter().enumerate() {
                for (c, d) in row.iter().enumerate() {
                    scores.set(i, c, -d);
                }
            }
            Ok((ClusterLabels { labels: model.assignments, scores }, Vec::new()))
        }
    }
}

/// Unsupervised clustering of the prediction cycles with one of the three
/// methods, aligned and scored against mode labels when available.
pub fn cmd_cluster(
    model_path: &Path,
    manifest_path: &Path,
    config: &RunConfig,
    out: &Path,
    timings: bool,
) -> Result<RunReport> {
    ensure_out_dir(out)?;
    let mut clock = StageClock::new(timings);
    let (model, _) = vae::load_model(model_path)?;
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_dir(manifest_path);
    let queries = clock.stage("project", || project_split(&model, &manifest, &base, config, true))?;

    let labeled = !(queries.modes.len() == 1 && queries.modes[0] == "single");
    let k = config.cluster.k.unwrap_or(queries.modes.len());
    let n_cycles: usize = queries.per_mode.iter().map(Vec::len).sum();
    if k > n_cycles {
        return Err(Error::Data(format!("K={k} exceeds {n_cycles} cycles")));
    }

    // flat cycle list + truth, plus the stacked point matrix for the
    // point-wise GMM baseline
    let mut all_cycles = Vec::with_capacity(n_cycles);
    let mut truth_idx = Vec::with_capacity(n_cycles);
    let mut stacked_rows = Vec::new();
    for (mode_i, cycles) in queries.per_mode.iter().enumerate() {
        for c in cycles {
            truth_idx.push(mode_i);
            for row in c.iter_rows() {
                stacked_rows.push(row.to_vec());
            }
            all_cycles.push(c.clone());
        }
    }
    let combined_points = Mat::from_rows(&stacked_rows);
    let combined_set = segment_cycles(combined_points.rows(), queries.period, None)?;

    let method = config.cluster.method;
    let seed = config.train.seed;
    let (outcome, mut method_artifacts) = clock.stage("cluster", || {
        run_cluster_method(
            method,
            config,
            &all_cycles,
            &combined_points,
            &combined_set,
            k,
            seed,
            out,
        )
    })?;

    let mut metrics_report: Option<MetricsReport> = None;
    let mut permutation: Option<Vec<usize>> = None;
    let mut aligned = outcome.labels.clone();
    let mut accuracy: Option<f64> = None;
    if labeled && k == queries.modes.len() && k <= 6 {
        let (perm, relabeled) = clustering::align_labels(&outcome.labels, &truth_idx, k)?;
        // carry scores through the same relabeling
        let mut aligned_scores: Vec<Vec<f64>> = vec![vec![0.0; k]; n_cycles];
        for (i, row) in aligned_scores.iter_mut().enumerate() {
            for p in 0..k {
                row[perm[p]] = outcome.scores.get(i, p);
            }
        }
        let cm = metrics::confusion(&relabeled, &truth_idx, k, queries.modes.clone())?;
        let rep = metrics::report(&cm, Some((&aligned_scores, &truth_idx)))?;
        accuracy = Some(
            relabeled.iter().zip(&truth_idx).filter(|(a, b)| a == b).count() as f64
                / n_cycles as f64,
        );
        metrics_report = Some(rep);
        permutation = Some(perm);
        aligned = relabeled;
    }

    // one polyline per cycle, colored by aligned label (mode palette) or
    // raw cluster index
    let svg_cycles: Vec<(Mat, &str)> = all_cycles
        .iter()
        .zip(&aligned)
        .map(|(c, &label)| {
            let color = if labeled && permutation.is_some() {
                svg::mode_color(&queries.modes[label])
            } else {
                svg::cluster_color(label)
            };
            (c.clone(), color)
        })
        .collect();
    write_text(&out.join("trajectory.svg"), &svg::trajectory_svg(&svg_cycles))?;

    let mut labels_csv = String::from("index,truth,raw_label,aligned_label\n");
    for i in 0..n_cycles {
        let truth = if labeled { queries.modes[truth_idx[i]].as_str() } else { "" };
        labels_csv.push_str(&format!("{i},{truth},{},{}\n", outcome.labels[i], aligned[i]));
    }
    write_text(&out.join("labels.csv"), &labels_csv)?;

    // cycle windows of the stacked prediction trajectory, labeled with
    // ground truth where known
    let mut labeled_set = combined_set.clone();
    for (i, cycle) in labeled_set.cycles.iter_mut().enumerate() {
        if labeled {
            cycle.label = Some(queries.modes[truth_idx[i]].clone());
        }
    }
    write_text(&out.join("cycles.json"), &labeled_set.to_json())?;

    let cluster_report = serde_json::json!({
        "method": method.name(),
        "k": k,
        "seed": seed,
        "labels": outcome.labels,
        "permutation": permutation,
        "aligned_labels": if permutation.is_some() { Some(&aligned) } else { None },
        "accuracy": accuracy,
        "metrics": metrics_report,
    });
    write_text(
        &out.join("cluster_report.json"),
        &serde_json::to_string_pretty(&cluster_report).expect("report serializes"),
    )?;

    let mut report = RunReport::new("cluster", config_echo(config));
    report.artifacts = vec![
        "cluster_report.json".into(),
        "labels.csv".into(),
        "cycles.json".into(),
        "trajectory.svg".into(),
    ];
    report.artifacts.append(&mut method_artifacts);
    report.metrics = metrics_report;
    report.extra = Some(serde_json::json!({
        "method": method.name(),
        "k": k,
        "cycles": n_cycles,
        "accuracy": accuracy,
    }));
    report.timings_ms = clock.into_timings();
    report.write(out)?;
    Ok(report)
}

/// PCA-vs-autoencoder reconstruction comparison: the per-k PCA curve on
/// held-out data plus the trained model's latent-2 error as a horizontal
/// reference column.
pub fn cmd_pca_compare(
    manifest_path: &Path,
    model_path: Option<&Path>,
    config: &RunConfig,
    out: &Path,
    timings: bool,
) -> Result<RunReport> {
    ensure_out_dir(out)?;
    let mut clock = StageClock::new(timings);
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_dir(manifest_path);
    let train_parts = load_split(&manifest, &base, false)?;
    let predict_parts = load_split(&manifest, &base, true)?;
    let train =
        FeatureMatrix::concat(&train_parts.iter().map(|(_, m)| m).collect::<Vec<_>>())?;
    let predict =
        FeatureMatrix::concat(&predict_parts.iter().map(|(_, m)| m).collect::<Vec<_>>())?;

    // identical normalization to the autoencoder path keeps curves comparable
    let spec = dataset::fit_normalizer(&train);
    let train_n = dataset::apply_normalizer(&spec, &train)?;
    let predict_n = dataset::apply_normalizer(&spec, &predict)?;

    let k_max = config
        .pca
        .k_max
        .min(train.n_samples().saturating_sub(1))
        .min(train.n_channels());
    let pca_model = clock.stage("pca-fit", || pca::fit(train_n.values(), k_max))?;
    write_text(&out.join("pca_model.json"), &pca_model.to_json())?;
    let curve = clock.stage("pca", || {
        pca::mse_curve(train_n.values(), predict_n.values(), k_max)
    })?;

    let vae_mse = match model_path {
        Some(path) => {
            let (model, _) = vae::load_model(path)?;
            Some(clock.stage("vae-mse", || vae::reconstruction_mse(&model, &predict))?)
        }
        None => None,
    };

    let mut csv = String::from("k,pca_mse,vae2_mse\n");
    for (k, mse) in &curve {
        let vae_cell = vae_mse.map(fmt_f64).unwrap_or_default();
        csv.push_str(&format!("{k},{},{vae_cell}\n", fmt_f64(*mse)));
    }
    write_text(&out.join("mse_curve.csv"), &csv)?;

    let crossover = vae_mse.map(|v| {
        curve.iter().find(|(_, mse)| *mse <= v).map(|(k, _)| *k)
    });
    let mut report = RunReport::new("pca-compare", config_echo(config));
    report.artifacts = vec!["mse_curve.csv".into(), "pca_model.json".into()];
    report.extra = Some(serde_json::json!({
        "k_max": k_max,
        "vae2_mse": vae_mse,
        "crossover_k": crossover,
        "pca2_mse": curve.get(1).map(|(_, m)| *m),
    }));
    report.timings_ms = clock.into_timings();
    report.write(out)?;
    Ok(report)
}

/// One sensitivity-sweep cell: train with the overridden batch size and
/// learning rate, then score the supervised and unsupervised classifiers.
fn sweep_cell(
    config: &RunConfig,
    suite_dir: &Path,
    batch_size: usize,
    learning_rate: f64,
    out: &Path,
) -> Result<serde_json::Value> {
    let mut cell = config.clone();
    cell.train.batch_size = batch_size;
    cell.train.learning_rate = learning_rate;
    cell.cluster.method = ClusterMethod::GmmDtw;

    let tag = format!("b{batch_size}_lr{learning_rate}");
    let cell_dir = out.join(&tag);
    let manifest = suite_dir.join("manifest.json");
    cmd_train(&manifest, &cell, &cell_dir, false)?;
    let model = cell_dir.join("model.json");
    let wd_report = cmd_classify_wd(&model, &manifest, &cell, &cell_dir.join("wd"), false)?;
    let cluster_report = cmd_cluster(&model, &manifest, &cell, &cell_dir.join("cluster"), false)?;

    let wd_accuracy = wd_report
        .extra
        .as_ref()
        .and_then(|e| e.get("accuracy"))
        .and_then(|a| a.as_f64());
    let cluster_accuracy = cluster_report
        .extra
        .as_ref()
        .and_then(|e| e.get("accuracy"))
        .and_then(|a| a.as_f64());
    let m = cluster_report.metrics.as_ref();
    Ok(serde_json::json!({
        "batch_size": batch_size,
        "learning_rate": learning_rate,
        "status": "ok",
        "wd_accuracy": wd_accuracy,
        "cluster_accuracy": cluster_accuracy,
        "macro_accuracy": m.map(|m| m.macro_rates.accuracy),
        "macro_precision": m.map(|m| m.macro_rates.precision),
        "macro_recall": m.map(|m| m.macro_rates.recall),
        "macro_f1": m.map(|m| m.macro_rates.f1),
        "macro_far": m.map(|m| m.macro_rates.false_alarm_rate),
        "gms": m.map(|m| m.gms),
        "macro_auc": m.and_then(|m| m.macro_auc),
    }))
}

/// Batch-size × learning-rate sweep over the full pipeline. Cell failures
/// are recorded and the sweep continues.
pub fn cmd_sensitivity(config: &RunConfig, out: &Path, timings: bool) -> Result<RunReport> {
    ensure_out_dir(out)?;
    let mut clock = StageClock::new(timings);
    if config.sensitivity.batch_sizes.is_empty() || config.sensitivity.learning_rates.is_empty() {
        return Err(Error::Data("sensitivity grid must be non-empty".into()));
    }

    let suite_dir = out.join("dataset");
    clock.stage("synth", || cmd_synth(config, &suite_dir, false))?;

    let mut rows = Vec::new();
    for &batch in &config.sensitivity.batch_sizes {
        for &lr in &config.sensitivity.learning_rates {
            let label = format!("batch {batch}, lr {lr}");
            let row = clock.stage(&label, || {
                sweep_cell(config, &suite_dir, batch, lr, out).unwrap_or_else(|err| {
                    serde_json::json!({
                        "batch_size": batch,
                        "learning_rate": lr,
                        "status": format!("error: {err}"),
                    })
                })
            });
            rows.push(row);
        }
    }

    let columns = [
        "wd_accuracy",
        "cluster_accuracy",
        "macro_accuracy",
        "macro_precision",
        "macro_recall",
        "macro_f1",
        "macro_far",
        "gms",
        "macro_auc",
    ];
    let mut csv = String::from("batch_size,learning_rate,status,");
    csv.push_str(&columns.join(","));
    csv.push('\n');
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{}",
            row["batch_size"],
            row["learning_rate"],
            row["status"].as_str().unwrap_or("?").replace(',', ";")
        ));
        for col in &columns {
            csv.push(',');
            if let Some(v) = row.get(*col).and_then(|v| v.as_f64()) {
                csv.push_str(&fmt_f64(v));
            }
        }
        csv.push('\n');
    }
    write_text(&out.join("sweep.csv"), &csv)?;

    // spread (max − min over successful cells) per metric
    let mut spread = serde_json::Map::new();
    for col in &columns {
        let values: Vec<f64> =
            rows.iter().filter_map(|r| r.get(*col).and_then(|v| v.as_f64())).collect();
        if !values.is_empty() {
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            spread.insert(col.to_string(), serde_json::json!(hi - lo));
        }
    }
    let sweep_report = serde_json::json!({"cells": rows, "spread": spread});
    write_text(
        &out.join("sweep_report.json"),
        &serde_json::to_string_pretty(&sweep_report).expect("sweep serializes"),
    )?;

    let mut report = RunReport::new("sensitivity", config_echo(config));
    report.artifacts = vec!["sweep.csv".into(), "sweep_report.json".into()];
    report.extra = Some(serde_json::json!({"spread": spread, "cells": rows.len()}));
    report.timings_ms = clock.into_timings();
    report.write(out)?;
    Ok(report)
}

/// The full chain: synthesize, train, classify, cluster; stage outputs land
/// in subdirectories of `out`.
pub fn cmd_pipeline(config: &RunConfig, out: &Path, timings: bool) -> Result<RunReport> {
    ensure_out_dir(out)?;
    let dataset_dir = out.join("dataset");
    cmd_synth(config, &dataset_dir, timings)?;
    let manifest = dataset_dir.join("manifest.json");
    let train_dir = out.join("train");
    cmd_train(&manifest, config, &train_dir, timings)?;
    let model = train_dir.join("model.json");
    let wd_report = cmd_classify_wd(&model, &manifest, config, &out.join("classify-wd"), timings)?;
    let cluster_report = cmd_cluster(&model, &manifest, config, &out.join("cluster"), timings)?;
    cmd_pca_compare(&manifest, Some(&model), config, &out.join("pca-compare"), timings)?;

    let mut report = RunReport::new("pipeline", config_echo(config));
    report.artifacts = vec![
        "dataset".into(),
        "train".into(),
        "classify-wd".into(),
        "cluster".into(),
        "pca-compare".into(),
    ];
    report.extra = Some(serde_json::json!({
        "wd": wd_report.extra,
        "cluster": cluster_report.extra,
    }));
    report.write(out)?;
    Ok(report)
}

//! End-to-end library flow on a reduced-rate dual-oscillator system
//! (200 Hz sampling keeps matrices small enough for a test): training
//! quality against the untrained baseline, latent-trajectory periodicity,
//! the PCA comparison, and both classifiers.

use std::sync::OnceLock;

use oscmodes::clustering::{
    align_labels, extract_cycles, gmm_dtw_cluster, GmmDtwOptions,
};
use oscmodes::dataset::{apply_normalizer, estimate_period, fit_normalizer, segment_cycles, FeatureMatrix};
use oscmodes::linalg::Mat;
use oscmodes::pca;
use oscmodes::synthgen::{generate, generate_suite, ModeKind, ModeSpec, SynthConfig};
use oscmodes::vae::{self, build_model, forward_batch, TrainConfig, VaeModel};
use oscmodes::wd;

struct Trained {
    suite: Vec<(String, FeatureMatrix, FeatureMatrix)>,
    model: VaeModel,
    untrained_rec: f64,
    period: usize,
}

fn synth_config() -> SynthConfig {
    SynthConfig { flames: 2, sample_rate: 200.0, seed: 77, ..SynthConfig::default() }
}

fn trained() -> &'static Trained {
    static TRAINED: OnceLock<Trained> = OnceLock::new();
    TRAINED.get_or_init(|| {
        let suite = generate_suite(&synth_config()).unwrap();
        let suite: Vec<(String, FeatureMatrix, FeatureMatrix)> = suite
            .into_iter()
            .map(|e| (e.label.unwrap(), e.train, e.predict))
            .collect();
        let concat =
            FeatureMatrix::concat(&suite.iter().map(|(_, t, _)| t).collect::<Vec<_>>()).unwrap();
        // the reduced-rate suite has ~12 batches per epoch, so the epoch
        // budget is higher than a full-rate run would need
        let config =
            TrainConfig { max_epochs: 400, patience: 100, seed: 3, ..TrainConfig::default() };
        let model = build_model(concat.n_channels(), 2, config.seed).unwrap();

        // untrained-baseline oracle: reconstruction error of the freshly
        // initialized model on the same normalized data
        let spec = fit_normalizer(&concat);
        let normalized = apply_normalizer(&spec, &concat).unwrap();
        let mut untrained = model.clone();
        untrained.normalizer = Some(spec);
        let untrained_rec = forward_batch(&untrained, normalized.values(), None, false).rec;

        let (model, history) = vae::train(model, &concat, &config).unwrap();
        let period = estimate_period(&suite[0].1, 0).unwrap();
        assert!(history.len() <= config.max_epochs);
        Trained { suite, model, untrained_rec, period }
    })
}

#[test]
fn period_estimate_matches_generator() {
    let t = trained();
    assert_eq!(t.period, 20); // 200 Hz / 10 Hz
}

#[test]
fn training_beats_untrained_baseline_tenfold() {
    let t = trained();
    let concat =
        FeatureMatrix::concat(&t.suite.iter().map(|(_, tr, _)| tr).collect::<Vec<_>>()).unwrap();
    let trained_rec = vae::reconstruction_mse(&t.model, &concat).unwrap();
    assert!(
        trained_rec * 10.0 <= t.untrained_rec,
        "trained rec {trained_rec} not 10× below untrained {}",
        t.untrained_rec
    );
}

#[test]
fn latent_trajectory_is_periodic_on_noise_free_data() {
    let t = trained();
    // noise-free generation of the same mode: exactly periodic inputs must
    // embed to coinciding latent points one period apart
    let config = SynthConfig { noise_std: 0.0, duration: 2.0, ..synth_config() };
    let (matrix, _) = generate(&config, &ModeSpec::canonical(ModeKind::AP, 2).unwrap()).unwrap();
    let traj = vae::project(&t.model, &matrix).unwrap();
    let period = t.period;
    for i in 0..traj.len() - period {
        for j in 0..2 {
            let a = traj.points.get(i, j);
            let b = traj.points.get(i + period, j);
            assert!((a - b).abs() < 1e-3, "row {i}, dim {j}: {a} vs {b}");
        }
    }
}

#[test]
fn vae_beats_pca_two_on_held_out_data() {
    let t = trained();
    let train_concat =
        FeatureMatrix::concat(&t.suite.iter().map(|(_, tr, _)| tr).collect::<Vec<_>>()).unwrap();
    let predict_concat =
        FeatureMatrix::concat(&t.suite.iter().map(|(_, _, p)| p).collect::<Vec<_>>()).unwrap();
    let spec = fit_normalizer(&train_concat);
    let train_n = apply_normalizer(&spec, &train_concat).unwrap();
    let predict_n = apply_normalizer(&spec, &predict_concat).unwrap();

    let curve = pca::mse_curve(train_n.values(), predict_n.values(), 6).unwrap();
    let vae_mse = vae::reconstruction_mse(&t.model, &predict_concat).unwrap();
    assert!(vae_mse < curve[1].1, "VAE {vae_mse} not below PCA(2) {}", curve[1].1);
}

fn latent_cycles(model: &VaeModel, matrix: &FeatureMatrix, period: usize) -> Vec<Mat> {
    let traj = vae::project(model, matrix).unwrap();
    let set = segment_cycles(traj.len(), period, None).unwrap();
    extract_cycles(&traj.points, &set)
}

#[test]
fn wd_classifies_the_prediction_set_perfectly() {
    let t = trained();
    let mut labeled = Vec::new();
    for (mode, train, _) in &t.suite {
        for c in latent_cycles(&t.model, train, t.period) {
            labeled.push((mode.clone(), c));
        }
    }
    let library = wd::build_benchmarks(&labeled).unwrap();

    let mut correct = 0;
    let mut total = 0;
    for (mode, _, predict) in &t.suite {
        for c in latent_cycles(&t.model, predict, t.period) {
            let (pred, _) = wd::classify(&library, &wd::flatten_cycle(&c).unwrap()).unwrap();
            correct += (pred == *mode) as usize;
            total += 1;
        }
    }
    assert_eq!(total, 40); // 20 prediction cycles per mode
    assert_eq!(correct, total, "WD accuracy {correct}/{total}");
}

#[test]
fn gmm_dtw_recovers_the_two_modes_exactly() {
    let t = trained();
    let mut cycles = Vec::new();
    let mut truth = Vec::new();
    for (mode_i, (_, _, predict)) in t.suite.iter().enumerate() {
        for c in latent_cycles(&t.model, predict, t.period) {
            cycles.push(c);
            truth.push(mode_i);
        }
    }
    let outcome = gmm_dtw_cluster(&cycles, 2, 5, &GmmDtwOptions::default()).unwrap();
    let (_, relabeled) = align_labels(&outcome.labels, &truth, 2).unwrap();
    let correct = relabeled.iter().zip(&truth).filter(|(a, b)| a == b).count();
    assert_eq!(correct, truth.len(), "alignment-adjusted accuracy below 1");
}

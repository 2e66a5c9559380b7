//! Seeded generator of labeled synthetic coupled-oscillator datasets.
//!
//! Each flame contributes 20 sensors × 4 variables (U, V, W velocity in m/s,
//! T in K) sampled along the flame axis. A channel is a phase-offset
//! sinusoid with one added harmonic:
//!
//! ```text
//! x(t) = B(v, j) + A(v, j) · a · [sin(2πft + φᵢ + ψⱼ) + h₂·sin(4πft + 2φᵢ + ψⱼ)] + ε(t)
//! ```
//!
//! where `φᵢ` is the flame's mode phase offset, `ψⱼ = 0.05·j` rad models
//! convective delay along the sensor axis (and keeps the latent loop
//! non-degenerate), `a` is the mode amplitude scale, and `ε ~ N(0,
//! noise_std·A)`. Baselines `B` and amplitudes `A` ramp linearly with
//! sensor height, per variable:
//!
//! | variable | B ramp        | A ramp      |
//! |----------|---------------|-------------|
//! | U        | 0.5 → 3.0     | 0.3 → 1.2   |
//! | V        | −0.2 → 0.2    | 0.1 → 0.5   |
//! | W        | −0.2 → 0.2    | 0.1 → 0.5   |
//! | T        | 300 → 1500    | 150 → 400   |
//!
//! Mode phase relationships: in-phase (all offsets equal), anti-phase
//! ({0, π}), rotation ({0, 2π/3, 4π/3}), partially in-phase ({0, 0, π}),
//! and death (amplitude suppressed to a small residual).

use serde::{Deserialize, Serialize};

use crate::dataset::{ChannelDescriptor, FeatureMatrix, Variable};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::Rng;

/// Dynamical mode of a coupled-flame system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeKind {
    /// In-phase: negligible phase difference between flames.
    IP,
    /// Anti-phase: half-period phase difference (dual systems).
    AP,
    /// Rotation: constant 2π/3 differences among three flames.
    Rotation,
    /// Death: oscillation amplitude suppressed to a small residual.
    Death,
    /// Partially in-phase: two flames in phase, one in anti-phase.
    Pip,
}

impl ModeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModeKind::IP => "IP",
            ModeKind::AP => "AP",
            ModeKind::Rotation => "ROTATION",
            ModeKind::Death => "DEATH",
            ModeKind::Pip => "PIP",
        }
    }
}

/// Residual oscillation fraction of the death mode. The reference behavior
/// is "very small"; 0.05 is the default and callers may override it in
/// [`ModeSpec`].
pub const DEATH_AMPLITUDE: f64 = 0.05;

/// A mode's phase offsets (radians, one per flame) and amplitude scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub name: ModeKind,
    pub phase_offsets: Vec<f64>,
    pub amplitude_scale: f64,
}

impl ModeSpec {
    /// Canonical spec for `kind` in a system of `flames` oscillators.
    pub fn canonical(kind: ModeKind, flames: usize) -> Result<ModeSpec> {
        use std::f64::consts::PI;
        let (offsets, amplitude) = match (kind, flames) {
            (ModeKind::IP, n) => (vec![0.0; n], 1.0),
            (ModeKind::AP, 2) => (vec![0.0, PI], 1.0),
            (ModeKind::Rotation, 3) => (vec![0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0], 1.0),
            (ModeKind::Death, n) => (vec![0.0; n], DEATH_AMPLITUDE),
            (ModeKind::Pip, 3) => (vec![0.0, 0.0, PI], 1.0),
            (kind, n) => {
                return Err(Error::Unsupported(format!(
                    "mode {:?} undefined for {n} flames",
                    kind
                )))
            }
        };
        Ok(ModeSpec { name: kind, phase_offsets: offsets, amplitude_scale: amplitude })
    }
}

/// Generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub flames: usize,
    pub sensors_per_flame: usize,
    /// Oscillation fundamental, Hz.
    pub base_frequency: f64,
    pub sample_rate: f64,
    /// Length of a generated matrix, seconds.
    pub duration: f64,
    /// Gaussian noise std as a fraction of the channel amplitude.
    pub noise_std: f64,
    /// Relative weight of the second harmonic.
    pub harmonic2_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            flames: 2,
            sensors_per_flame: 20,
            base_frequency: 10.0,
            sample_rate: 1000.0,
            duration: 5.0,
            noise_std: 0.02,
            harmonic2_fraction: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.flames) {
            return Err(Error::Data(format!("flames must be 1..=3, got {}", self.flames)));
        }
        if !(1..=20).contains(&self.sensors_per_flame) {
            return Err(Error::Data(format!(
                "sensors_per_flame must be 1..=20, got {}",
                self.sensors_per_flame
            )));
        }
        if self.sample_rate <= 2.0 * self.base_frequency {
            return Err(Error::Data(format!(
                "sample rate {} must exceed twice the base frequency {}",
                self.sample_rate, self.base_frequency
            )));
        }
        if self.duration * self.base_frequency < 2.0 {
            return Err(Error::Data("duration must cover at least 2 periods".into()));
        }
        if self.noise_std < 0.0 || self.harmonic2_fraction < 0.0 {
            return Err(Error::Data("noise_std and harmonic2_fraction must be >= 0".into()));
        }
        Ok(())
    }

    /// Samples per oscillation period.
    pub fn period_samples(&self) -> usize {
        (self.sample_rate / self.base_frequency).round() as usize
    }
}

fn ramps(v: Variable) -> (f64, f64, f64, f64) {
    // (B at sensor 0, B at last sensor, A at sensor 0, A at last sensor)
    match v {
        Variable::U => (0.5, 3.0, 0.3, 1.2),
        Variable::V => (-0.2, 0.2, 0.1, 0.5),
        Variable::W => (-0.2, 0.2, 0.1, 0.5),
        Variable::T => (300.0, 1500.0, 150.0, 400.0),
    }
}

fn lerp(a: f64, b: f64, frac: f64) -> f64 {
    a + (b - a) * frac
}

/// Baseline and amplitude of the channel at sensor `j`.
pub fn channel_ramp(v: Variable, sensor: usize, sensors_per_flame: usize) -> (f64, f64) {
    let frac = if sensors_per_flame > 1 {
        sensor as f64 / (sensors_per_flame - 1) as f64
    } else {
        0.0
    };
    let (b0, b1, a0, a1) = ramps(v);
    (lerp(b0, b1, frac), lerp(a0, a1, frac))
}

/// Generate one labeled matrix for `mode`. Bit-identical output for
/// identical `(config, mode)` including the seed.
pub fn generate(config: &SynthConfig, mode: &ModeSpec) -> Result<(FeatureMatrix, ModeKind)> {
    config.validate()?;
    if mode.phase_offsets.len() != config.flames {
        return Err(Error::Shape(format!(
            "{} phase offsets for {} flames",
            mode.phase_offsets.len(),
            config.flames
        )));
    }
    let n = (config.duration * config.sample_rate).round() as usize;
    let m = config.flames * config.sensors_per_flame * Variable::ALL.len();
    let mut channels = Vec::with_capacity(m);
    let mut rng = Rng::new(config.seed);
    let omega = 2.0 * std::f64::consts::PI * config.base_frequency / config.sample_rate;
    let h2 = config.harmonic2_fraction;

    // Column-by-column synthesis; noise draws follow channel-major order.
    let mut values = Mat::zeros(n, m);
    let mut col = 0;
    for flame in 0..config.flames {
        let phi = mode.phase_offsets[flame];
        for sensor in 0..config.sensors_per_flame {
            let psi = 0.05 * sensor as f64;
            for variable in Variable::ALL {
                channels.push(ChannelDescriptor::new(flame as u32, sensor as u32, variable)?);
                let (base, amp) = channel_ramp(variable, sensor, config.sensors_per_flame);
                let noise_sigma = config.noise_std * amp;
                for i in 0..n {
                    let theta = omega * i as f64;
                    let mut v = (theta + phi + psi).sin() + h2 * (2.0 * theta + 2.0 * phi + psi).sin();
                    v = base + amp * mode.amplitude_scale * v;
                    if noise_sigma > 0.0 {
                        v += noise_sigma * rng.gauss();
                    }
                    values.set(i, col, v);
                }
                col += 1;
            }
        }
    }
    let matrix = FeatureMatrix::new(values, config.sample_rate, channels)?;
    Ok((matrix, mode.name))
}

/// One mode's datasets within a suite.
#[derive(Debug, Clone)]
pub struct SuiteEntry {
    /// Mode label; `None` for the unlabeled single-flame dataset.
    pub label: Option<String>,
    pub train: FeatureMatrix,
    pub predict: FeatureMatrix,
}

/// Labeled train/predict datasets for every mode of the given flame count:
/// {IP, AP} for dual systems, {IP, DEATH, ROTATION, PIP} for triple systems,
/// one unlabeled flicker dataset for a single flame. Training matrices
/// cover at least 50 oscillation periods and prediction matrices at least
/// 20, each generated from its own seed forked off `config.seed`.
pub fn generate_suite(config: &SynthConfig) -> Result<Vec<SuiteEntry>> {
    config.validate()?;
    let modes: Vec<Option<ModeKind>> = match config.flames {
        1 => vec![None],
        2 => vec![Some(ModeKind::IP), Some(ModeKind::AP)],
        3 => vec![
            Some(ModeKind::IP),
            Some(ModeKind::Death),
            Some(ModeKind::Rotation),
            Some(ModeKind::Pip),
        ],
        other => return Err(Error::Data(format!("flames must be 1..=3, got {other}"))),
    };

    let period = 1.0 / config.base_frequency;
    let train_duration = config.duration.max(50.0 * period);
    let predict_duration = 20.0 * period;

    let mut master = Rng::new(config.seed);
    let mut entries = Vec::with_capacity(modes.len());
    for mode in modes {
        let kind = mode.unwrap_or(ModeKind::IP);
        let spec = ModeSpec::canonical(kind, config.flames)?;
        let train_cfg = SynthConfig {
            duration: train_duration,
            seed: master.next_u64(),
            ..config.clone()
        };
        let predict_cfg = SynthConfig {
            duration: predict_duration,
            seed: master.next_u64(),
            ..config.clone()
        };
        let (train, _) = generate(&train_cfg, &spec)?;
        let (predict, _) = generate(&predict_cfg, &spec)?;
        entries.push(SuiteEntry { label: mode.map(|k| k.name().to_string()), train, predict });
    }
    Ok(entries)
}

//! Multichannel time-series ingestion, normalization, and cycle segmentation.
//!
//! The canonical interchange format is UTF-8 CSV: first column `t` (seconds),
//! remaining columns named `f{flame}_s{sensor}_{U|V|W|T}`, one row per time
//! sample in time order. Cycle sets serialize as JSON
//! `{ "L": int, "cycles": [{"start": int, "label": string|null}] }`.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Physical variable carried by a channel: velocity components in m/s,
/// temperature in K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    U,
    V,
    W,
    T,
}

impl Variable {
    pub const ALL: [Variable; 4] = [Variable::U, Variable::V, Variable::W, Variable::T];
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variable::U => "U",
            Variable::V => "V",
            Variable::W => "W",
            Variable::T => "T",
        };
        f.write_str(s)
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "U" => Ok(Variable::U),
            "V" => Ok(Variable::V),
            "W" => Ok(Variable::W),
            "T" => Ok(Variable::T),
            other => Err(Error::Format(format!("unknown variable {other:?}"))),
        }
    }
}

/// Identity of one sensor channel: which flame, which sensor along the
/// flame axis (0–19), which variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelDescriptor {
    pub flame_index: u32,
    pub sensor_index: u32,
    pub variable: Variable,
}

impl ChannelDescriptor {
    pub fn new(flame_index: u32, sensor_index: u32, variable: Variable) -> Result<Self> {
        if sensor_index > 19 {
            return Err(Error::Format(format!(
                "sensor index {sensor_index} out of range [0, 19]"
            )));
        }
        Ok(ChannelDescriptor { flame_index, sensor_index, variable })
    }

    /// Column name in the CSV header, `f{flame}_s{sensor}_{var}`.
    pub fn column_name(&self) -> String {
        format!("f{}_s{}_{}", self.flame_index, self.sensor_index, self.variable)
    }

    fn parse(name: &str) -> Result<Self> {
        let bad = || Error::Format(format!("malformed channel name {name:?}"));
        let mut parts = name.split('_');
        let f = parts.next().ok_or_else(bad)?;
        let s = parts.next().ok_or_else(bad)?;
        let v = parts.next().ok_or_else(bad)?;
        if parts.next().is_some() || !f.starts_with('f') || !s.starts_with('s') {
            return Err(bad());
        }
        let flame: u32 = f[1..].parse().map_err(|_| bad())?;
        let sensor: u32 = s[1..].parse().map_err(|_| bad())?;
        let variable: Variable = v.parse()?;
        ChannelDescriptor::new(flame, sensor, variable)
    }
}

/// Time-major matrix of sensor channels: rows are time samples, columns are
/// channels, with a uniform sample rate.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    values: Mat,
    sample_rate: f64,
    channels: Vec<ChannelDescriptor>,
}

impl FeatureMatrix {
    pub fn new(values: Mat, sample_rate: f64, channels: Vec<ChannelDescriptor>) -> Result<Self> {
        if values.rows() < 2 {
            return Err(Error::Data(format!(
                "need at least 2 time samples, got {}",
                values.rows()
            )));
        }
        if channels.len() != values.cols() {
            return Err(Error::Shape(format!(
                "{} channel descriptors for {} columns",
                channels.len(),
                values.cols()
            )));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Data(format!("invalid sample rate {sample_rate}")));
        }
        if !values.all_finite() {
            return Err(Error::Data("non-finite value in feature matrix".into()));
        }
        let unique: BTreeSet<_> = channels.iter().collect();
        if unique.len() != channels.len() {
            return Err(Error::Data("duplicate channel descriptor".into()));
        }
        Ok(FeatureMatrix { values, sample_rate, channels })
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channels(&self) -> &[ChannelDescriptor] {
        &self.channels
    }

    pub fn n_samples(&self) -> usize {
        self.values.rows()
    }

    pub fn n_channels(&self) -> usize {
        self.values.cols()
    }

    /// One channel as a time series.
    pub fn channel_values(&self, channel: usize) -> Vec<f64> {
        (0..self.values.rows()).map(|i| self.values.get(i, channel)).collect()
    }

    /// Stack matrices row-wise; all inputs must share channels and rate.
    pub fn concat(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let first = parts.first().ok_or_else(|| Error::Data("nothing to concatenate".into()))?;
        let mut data = Vec::new();
        for p in parts {
            if p.channels != first.channels {
                return Err(Error::Data("channel schema mismatch in concatenation".into()));
            }
            if p.sample_rate != first.sample_rate {
                return Err(Error::Data("sample rate mismatch in concatenation".into()));
            }
            data.extend_from_slice(p.values.data());
        }
        let rows = data.len() / first.n_channels();
        FeatureMatrix::new(
            Mat::from_vec(rows, first.n_channels(), data),
            first.sample_rate,
            first.channels.clone(),
        )
    }

    /// Write the canonical CSV form, `t` column first.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push('t');
        for ch in &self.channels {
            out.push(',');
            out.push_str(&ch.column_name());
        }
        out.push('\n');
        for i in 0..self.values.rows() {
            out.push_str(&fmt_f64(i as f64 / self.sample_rate));
            for v in self.values.row(i) {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Shortest round-trip decimal form of an `f64`; `Display` for `f64` is
/// exact-round-trip in Rust, which keeps golden files diffable and reruns
/// byte-identical.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Parse the canonical CSV format.
pub fn load_csv(path: &Path) -> Result<FeatureMatrix> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty file".into()))?;
    let mut fields = header.split(',');
    match fields.next() {
        Some("t") => {}
        other => {
            return Err(Error::Format(format!(
                "first column must be 't', got {other:?}"
            )))
        }
    }
    let channels: Vec<ChannelDescriptor> =
        fields.map(ChannelDescriptor::parse).collect::<Result<_>>()?;
    if channels.is_empty() {
        return Err(Error::Format("no data columns in header".into()));
    }

    let mut times = Vec::new();
    let mut data = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let t: f64 = cells
            .next()
            .unwrap()
            .parse()
            .map_err(|_| Error::Format(format!("bad timestamp on line {}", lineno + 2)))?;
        times.push(t);
        let mut count = 0;
        for cell in cells {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Format(format!("bad value on line {}", lineno + 2)))?;
            if !v.is_finite() {
                return Err(Error::Data(format!("non-finite value on line {}", lineno + 2)));
            }
            data.push(v);
            count += 1;
        }
        if count != channels.len() {
            return Err(Error::Format(format!(
                "line {} has {} values, expected {}",
                lineno + 2,
                count,
                channels.len()
            )));
        }
    }
    if times.len() < 2 {
        return Err(Error::Data("need at least 2 rows".into()));
    }

    let sample_rate = infer_sample_rate(&times)?;
    let rows = times.len();
    FeatureMatrix::new(Mat::from_vec(rows, channels.len(), data), sample_rate, channels)
}

/// Sample rate as 1/median(Δt); spacing deviating from the median by more
/// than 1 µs is rejected as non-uniform.
fn infer_sample_rate(times: &[f64]) -> Result<f64> {
    let mut diffs: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    diffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = diffs[(diffs.len() - 1) / 2];
    if median <= 0.0 {
        return Err(Error::Data("timestamps not strictly increasing".into()));
    }
    for d in &diffs {
        if (d - median).abs() > 1e-6 {
            return Err(Error::Data(format!(
                "non-uniform timestamps: spacing {d} vs median {median}"
            )));
        }
    }
    Ok(1.0 / median)
}

/// Per-channel min/max used to map data into the decoder's [0, 1] range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl NormalizationSpec {
    pub fn channel_count(&self) -> usize {
        self.mins.len()
    }
}

/// Per-channel extrema over all rows; constant channels get min = max.
pub fn fit_normalizer(data: &FeatureMatrix) -> NormalizationSpec {
    let m = data.n_channels();
    let mut mins = vec![f64::INFINITY; m];
    let mut maxs = vec![f64::NEG_INFINITY; m];
    for row in data.values().iter_rows() {
        for j in 0..m {
            mins[j] = mins[j].min(row[j]);
            maxs[j] = maxs[j].max(row[j]);
        }
    }
    NormalizationSpec { mins, maxs }
}

/// Map to [0, 1] per channel: `(x − min)/(max − min)`. Constant channels map
/// to 0.0. Values within 1e-12 of a bound clamp onto it; anything further
/// outside passes through unclamped so drift stays visible.
pub fn apply_normalizer(spec: &NormalizationSpec, data: &FeatureMatrix) -> Result<FeatureMatrix> {
    if spec.channel_count() != data.n_channels() {
        return Err(Error::Shape(format!(
            "normalizer has {} channels, data has {}",
            spec.channel_count(),
            data.n_channels()
        )));
    }
    let mut out = data.values().clone();
    normalize_mat(spec, &mut out);
    FeatureMatrix::new(out, data.sample_rate(), data.channels().to_vec())
}

/// Normalization on a bare matrix (no descriptors); shared by model code.
pub fn normalize_mat(spec: &NormalizationSpec, values: &mut Mat) {
    let m = values.cols();
    assert_eq!(spec.channel_count(), m);
    for i in 0..values.rows() {
        let row = values.row_mut(i);
        for j in 0..m {
            let (lo, hi) = (spec.mins[j], spec.maxs[j]);
            let y = if hi > lo { (row[j] - lo) / (hi - lo) } else { 0.0 };
            row[j] = clamp_near(y);
        }
    }
}

fn clamp_near(y: f64) -> f64 {
    if (-1e-12..0.0).contains(&y) {
        0.0
    } else if y > 1.0 && y <= 1.0 + 1e-12 {
        1.0
    } else {
        y
    }
}

/// Inverse of [`apply_normalizer`]: `x = min + y·(max − min)`; constant
/// channels recover their stored min.
pub fn invert_normalizer(spec: &NormalizationSpec, data: &FeatureMatrix) -> Result<FeatureMatrix> {
    if spec.channel_count() != data.n_channels() {
        return Err(Error::Shape(format!(
            "normalizer has {} channels, data has {}",
            spec.channel_count(),
            data.n_channels()
        )));
    }
    let mut out = data.values().clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        for j in 0..row.len() {
            let (lo, hi) = (spec.mins[j], spec.maxs[j]);
            row[j] = if hi > lo { lo + row[j] * (hi - lo) } else { lo };
        }
    }
    FeatureMatrix::new(out, data.sample_rate(), data.channels().to_vec())
}

/// Dominant oscillation period of one channel, in samples.
///
/// Scans DFT bins above 0.5 Hz with a Goertzel recurrence on the
/// mean-removed signal and returns `round(sample_rate / f*)` for the
/// largest-magnitude bin `f*`.
pub fn estimate_period(data: &FeatureMatrix, channel: usize) -> Result<usize> {
    if channel >= data.n_channels() {
        return Err(Error::Shape(format!(
            "channel {channel} out of range ({} channels)",
            data.n_channels()
        )));
    }
    let n = data.n_samples();
    if n < 4 {
        return Err(Error::Data(format!("need at least 4 samples, got {n}")));
    }
    let mut signal = data.channel_values(channel);
    let mean = signal.iter().sum::<f64>() / n as f64;
    for v in &mut signal {
        *v -= mean;
    }
    if signal.iter().all(|v| v.abs() < 1e-12) {
        return Err(Error::DegenerateSignal(format!("channel {channel} is constant")));
    }

    let fs = data.sample_rate();
    let min_bin = (0.5 * n as f64 / fs).floor() as usize + 1; // first bin with f > 0.5 Hz
    let mut best_bin = 0;
    let mut best_mag = -1.0;
    for k in min_bin..=n / 2 {
        let mag = goertzel_power(&signal, k);
        if mag > best_mag {
            best_mag = mag;
            best_bin = k;
        }
    }
    if best_bin == 0 || best_mag <= 0.0 {
        return Err(Error::DegenerateSignal(format!(
            "channel {channel} has no spectral peak above 0.5 Hz"
        )));
    }
    let f_star = best_bin as f64 * fs / n as f64;
    Ok((fs / f_star).round() as usize)
}

/// Squared magnitude of DFT bin `k` via the Goertzel recurrence.
fn goertzel_power(signal: &[f64], k: usize) -> f64 {
    let n = signal.len() as f64;
    let w = 2.0 * std::f64::consts::PI * k as f64 / n;
    let coeff = 2.0 * w.cos();
    let (mut s1, mut s2) = (0.0, 0.0);
    for &x in signal {
        let s0 = x + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    s1 * s1 + s2 * s2 - coeff * s1 * s2
}

/// One segmented cycle: window start index plus an optional mode label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub start: usize,
    pub label: Option<String>,
}

/// Equal-length contiguous windows of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSet {
    #[serde(rename = "L")]
    pub cycle_length: usize,
    pub cycles: Vec<Cycle>,
    #[serde(skip)]
    pub source_len: usize,
}

impl CycleSet {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cycle set serializes")
    }

    pub fn from_json(text: &str) -> Result<CycleSet> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("cycle set JSON: {e}")))
    }
}

/// Tile `[0, ⌊n/L⌋·L)` with consecutive non-overlapping windows of length
/// `L`, keeping at most `count_limit` of them; the trailing partial window
/// is dropped.
pub fn segment_cycles(n: usize, cycle_length: usize, count_limit: Option<usize>) -> Result<CycleSet> {
    if cycle_length < 2 {
        return Err(Error::Shape(format!("cycle length {cycle_length} < 2")));
    }
    if cycle_length > n {
        return Err(Error::Shape(format!("cycle length {cycle_length} exceeds {n} samples")));
    }
    let mut count = n / cycle_length;
    if let Some(limit) = count_limit {
        count = count.min(limit);
    }
    let cycles = (0..count).map(|i| Cycle { start: i * cycle_length, label: None }).collect();
    Ok(CycleSet { cycle_length, cycles, source_len: n })
}

//! Supervised mode recognition by 1-D Wasserstein distance.
//!
//! A labeled latent cycle becomes a benchmark distribution by flattening its
//! 2-D points into one sorted sample sequence. A query cycle is classified
//! by the smallest per-mode average Wasserstein-1 distance to the mode's
//! benchmark cycles. In one dimension the Kantorovich problem has an exact
//! closed-form solution over order statistics, so no dual-function search
//! is involved.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Interleave a cycle's latent coordinates `(z₁(t₀), z₂(t₀), z₁(t₁), …)` and
/// sort ascending, producing the cycle's empirical sample sequence of
/// length 2L. Sorting discards the flattening order, so any deterministic
/// interleaving yields the same distances.
pub fn flatten_cycle(cycle: &Mat) -> Result<Vec<f64>> {
    if cycle.rows() == 0 {
        return Err(Error::Shape("empty cycle".into()));
    }
    let mut samples = Vec::with_capacity(cycle.rows() * cycle.cols());
    for row in cycle.iter_rows() {
        samples.extend_from_slice(row);
    }
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(samples)
}

/// Exact Wasserstein-1 distance between two empirical distributions given
/// as ascending sample sequences, computed as `∫ |F_p(x) − F_q(x)| dx` over
/// the merged support grid (the quantile-integral form evaluated on the
/// CDF side). For equal sizes this reduces to the mean absolute difference
/// of order statistics.
pub fn wd_1d(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::Shape("empty sample sequence".into()));
    }
    debug_assert!(p.windows(2).all(|w| w[0] <= w[1]), "p must be sorted");
    debug_assert!(q.windows(2).all(|w| w[0] <= w[1]), "q must be sorted");

    let mut grid: Vec<f64> = Vec::with_capacity(p.len() + q.len());
    grid.extend_from_slice(p);
    grid.extend_from_slice(q);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let np = p.len() as f64;
    let nq = q.len() as f64;
    let mut total = 0.0;
    for w in grid.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        if x1 <= x0 {
            continue;
        }
        let fp = p.partition_point(|&v| v <= x0) as f64 / np;
        let fq = q.partition_point(|&v| v <= x0) as f64 / nq;
        total += (fp - fq).abs() * (x1 - x0);
    }
    Ok(total)
}

/// Labeled benchmark cycles: per mode, the sorted sample sequences of its
/// `N` benchmark cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkLibrary {
    pub benchmarks: BTreeMap<String, Vec<Vec<f64>>>,
}

impl BenchmarkLibrary {
    pub fn modes(&self) -> impl Iterator<Item = &String> {
        self.benchmarks.keys()
    }
}

/// Group flattened, sorted cycle sequences by mode label.
pub fn build_benchmarks(labeled_cycles: &[(String, Mat)]) -> Result<BenchmarkLibrary> {
    if labeled_cycles.is_empty() {
        return Err(Error::Data("no labeled cycles".into()));
    }
    let mut benchmarks: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for (label, cycle) in labeled_cycles {
        benchmarks.entry(label.clone()).or_default().push(flatten_cycle(cycle)?);
    }
    Ok(BenchmarkLibrary { benchmarks })
}

/// Score a query sample sequence against every mode: the per-mode score is
/// the average Wasserstein distance over that mode's benchmark cycles, and
/// the prediction is the argmin (ties broken by lexicographic mode name).
pub fn classify(library: &BenchmarkLibrary, query: &[f64]) -> Result<(String, BTreeMap<String, f64>)> {
    if library.benchmarks.is_empty() {
        return Err(Error::Data("empty benchmark library".into()));
    }
    let mut scores = BTreeMap::new();
    for (mode, cycles) in &library.benchmarks {
        if cycles.is_empty() {
            return Err(Error::Data(format!("mode {mode} has no benchmark cycles")));
        }
        let mut sum = 0.0;
        for bench in cycles {
            sum += wd_1d(query, bench)?;
        }
        scores.insert(mode.clone(), sum / cycles.len() as f64);
    }
    // BTreeMap iterates in lexicographic key order; strict `<` keeps the
    // first (smallest) name on ties.
    let mut best: Option<(&String, f64)> = None;
    for (mode, &score) in &scores {
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((mode, score));
        }
    }
    let (mode, _) = best.unwrap();
    Ok((mode.clone(), scores))
}

/// One query group's scores and prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WdCycleReport {
    pub index: usize,
    pub scores: BTreeMap<String, f64>,
    pub predicted: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
}

/// Classification results for a set of query cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct WdReport {
    pub cycles: Vec<WdCycleReport>,
}

impl WdReport {
    /// Table of `(circle index, mode, WD value)` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,mode,wd\n");
        for cycle in &self.cycles {
            for (mode, wd) in &cycle.scores {
                out.push_str(&format!("{},{},{}\n", cycle.index, mode, crate::dataset::fmt_f64(*wd)));
            }
        }
        out
    }

    pub fn accuracy(&self) -> Option<f64> {
        let scored: Vec<_> = self.cycles.iter().filter_map(|c| c.truth.as_ref().map(|t| (t, &c.predicted))).collect();
        if scored.is_empty() {
            return None;
        }
        let correct = scored.iter().filter(|(t, p)| t == p).count();
        Some(correct as f64 / scored.len() as f64)
    }
}

//! k-Shape baseline: shape-based distance over z-normalized 1-D sequences
//! and centroid-based clustering.
//!
//! The cycles being clustered are whole oscillation periods, so the
//! cross-correlation is circular: a sequence shifted by any integer lag has
//! distance 0 to the original, which is the shift invariance the distance
//! is meant to provide. Correlation is computed directly over all L shifts
//! (O(L²)) — exactness over speed at these cycle lengths.

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Mean-0, std-1 copy of `x`; zero-variance input is degenerate.
pub fn znormalize(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Shape("empty sequence".into()));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var <= 1e-300 {
        return Err(Error::DegenerateSignal("zero-variance sequence".into()));
    }
    let std = var.sqrt();
    Ok(x.iter().map(|v| (v - mean) / std).collect())
}

/// Shape-based distance in [0, 2]: `1 − max_s NCC(s)` where `NCC(s)` is the
/// circular cross-correlation of the z-normalized sequences at shift `s`,
/// scaled by the sequence length.
pub fn sbd(a: &[f64], b: &[f64]) -> Result<f64> {
    let (ncc, _) = max_circular_ncc(&znormalize(a)?, &znormalize(b)?)?;
    Ok(1.0 - ncc)
}

/// Best circular NCC and the shift attaining it (ties to the smallest
/// shift). Inputs must already be z-normalized.
fn max_circular_ncc(a: &[f64], b: &[f64]) -> Result<(f64, usize)> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "sequence lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let l = a.len();
    let mut best = f64::NEG_INFINITY;
    let mut best_shift = 0;
    for s in 0..l {
        let mut c = 0.0;
        for t in 0..l {
            c += a[t] * b[(t + s) % l];
        }
        let ncc = c / l as f64;
        if ncc > best {
            best = ncc;
            best_shift = s;
        }
    }
    Ok((best, best_shift))
}

fn rotate(x: &[f64], shift: usize) -> Vec<f64> {
    let l = x.len();
    (0..l).map(|t| x[(t + shift) % l]).collect()
}

/// Give every missing cluster one member, stolen from the currently
/// largest cluster so no occupied cluster is emptied (requires n ≥ k).
fn repair_empty_clusters(assignments: &mut [usize], k: usize) {
    for c in 0..k {
        if assignments.contains(&c) {
            continue;
        }
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let donor = (0..k).max_by(|&x, &y| counts[x].cmp(&counts[y]).then(y.cmp(&x))).unwrap();
        let victim = assignments.iter().position(|&a| a == donor).unwrap();
        assignments[victim] = c;
    }
}

/// k-Shape clustering result.
#[derive(Debug, Clone)]
pub struct KShapeModel {
    /// z-normalized centroid sequences.
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// SBD of every sequence to every centroid (n × K), usable as scores.
    pub distances: Vec<Vec<f64>>,
}

/// Alternate assignment (nearest centroid by SBD) and centroid refinement
/// (principal eigenvector of the shift-aligned, centered correlation matrix
/// found by power iteration at 1e-8 tolerance) from a seeded random initial
/// assignment, until assignments stop changing or `max_iter`.
pub fn kshape_fit(sequences: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KShapeModel> {
    let n = sequences.len();
    if k == 0 {
        return Err(Error::Data("K must be at least 1".into()));
    }
    if n < k {
        return Err(Error::Data(format!("{n} sequences for K={k}")));
    }
    let l = sequences[0].len();
    if sequences.iter().any(|s| s.len() != l) {
        return Err(Error::Shape("sequences must share one length".into()));
    }
    let normalized: Vec<Vec<f64>> =
        sequences.iter().map(|s| znormalize(s)).collect::<Result<_>>()?;

    let mut rng = Rng::new(seed);
    let mut assignments: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
    repair_empty_clusters(&mut assignments, k);

    let mut centroids: Vec<Vec<f64>> = vec![vec![0.0; l]; k];
    for _ in 0..max_iter {
        // refinement
        for c in 0..k {
            let members: Vec<&Vec<f64>> = assignments
                .iter()
                .zip(&normalized)
                .filter(|(&a, _)| a == c)
                .map(|(_, s)| s)
                .collect();
            if members.is_empty() {
                continue; // keep the previous centroid
            }
            centroids[c] = refine_centroid(&members, &centroids[c])?;
        }
        // assignment
        let mut changed = false;
        for (i, seq) in normalized.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let (ncc, _) = max_circular_ncc(seq, centroid)?;
                let d = 1.0 - ncc;
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut distances = Vec::with_capacity(n);
    for seq in &normalized {
        let row: Vec<f64> = centroids
            .iter()
            .map(|c| max_circular_ncc(seq, c).map(|(ncc, _)| 1.0 - ncc))
            .collect::<Result<_>>()?;
        distances.push(row);
    }
    Ok(KShapeModel { centroids, assignments, distances })
}

/// Principal eigenvector of `Qᵀ S Q` where `S = Σ v vᵀ` over the members
/// aligned to the current centroid and `Q = I − 𝟙𝟙ᵀ/L` centers the result.
/// `S` is never materialized: one power-iteration step costs
/// O(members · L).
fn refine_centroid(members: &[&Vec<f64>], previous: &[f64]) -> Result<Vec<f64>> {
    let l = previous.len();
    let zero_prev = previous.iter().all(|&v| v == 0.0);
    let aligned: Vec<Vec<f64>> = if zero_prev {
        members.iter().map(|m| (*m).clone()).collect()
    } else {
        members
            .iter()
            .map(|m| {
                let (_, shift) = max_circular_ncc(previous, m)?;
                Ok(rotate(m, shift))
            })
            .collect::<Result<_>>()?
    };

    fn center(v: &mut [f64]) {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        for x in v.iter_mut() {
            *x -= mean;
        }
    }
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    // one power step v ← Qᵀ S Q v without forming S
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut qv = v.to_vec();
        center(&mut qv);
        let mut sv = vec![0.0; l];
        for m in &aligned {
            let proj: f64 = m.iter().zip(&qv).map(|(a, b)| a * b).sum();
            for (s, &mi) in sv.iter_mut().zip(m.iter()) {
                *s += proj * mi;
            }
        }
        center(&mut sv);
        sv
    };

    let mut result = if zero_prev { aligned[0].clone() } else { previous.to_vec() };
    let n0 = norm(&result);
    if n0 == 0.0 {
        result = aligned[0].clone();
    }
    let n0 = norm(&result).max(1e-300);
    for x in result.iter_mut() {
        *x /= n0;
    }
    for _ in 0..500 {
        let mut next = apply(&result);
        let n = norm(&next);
        if n <= 1e-300 {
            // degenerate cluster; fall back to the first aligned member
            next = aligned[0].clone();
        } else {
            for x in next.iter_mut() {
                *x /= n;
            }
        }
        let delta: f64 =
            result.iter().zip(&next).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let flipped: f64 =
            result.iter().zip(&next).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
        result = next;
        if delta.min(flipped) < 1e-8 {
            break;
        }
    }

    // orient toward the mass of the cluster, then z-normalize
    let reference = if zero_prev { &aligned[0] } else { previous };
    let dot: f64 = result.iter().zip(reference.iter()).map(|(a, b)| a * b).sum();
    if dot < 0.0 {
        for x in result.iter_mut() {
            *x = -*x;
        }
    }
    znormalize(&result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(l: usize, periods: usize, phase: f64) -> Vec<f64> {
        (0..l)
            .map(|t| {
                (2.0 * std::f64::consts::PI * periods as f64 * t as f64 / l as f64 + phase).sin()
            })
            .collect()
    }

    #[test]
    fn sbd_self_is_zero() {
        let a = sine(64, 2, 0.3);
        assert!(sbd(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sbd_shift_invariance_on_periodic_sequences() {
        let a = sine(100, 2, 0.0);
        for lag in [1, 7, 23, 50, 99] {
            let shifted = super::rotate(&a, lag);
            assert!(sbd(&a, &shifted).unwrap() < 1e-9, "lag {lag}");
        }
    }

    #[test]
    fn sbd_offset_invariance() {
        let a = sine(80, 3, 1.0);
        let b: Vec<f64> = a.iter().map(|v| v + 42.0).collect();
        assert!(sbd(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn sbd_range_and_opposite() {
        let a = sine(60, 1, 0.0);
        let b: Vec<f64> = a.iter().map(|v| -v).collect();
        let d = sbd(&a, &b).unwrap();
        assert!((0.0..=2.0).contains(&d));
        // a circularly shifted sine reaches its negation, so distance ~0 here
        assert!(d < 1e-9);
        // white-ish vs sine stays within bounds too
        let mut rng = crate::rng::Rng::new(2);
        let noise: Vec<f64> = (0..60).map(|_| rng.gauss()).collect();
        let d = sbd(&a, &noise).unwrap();
        assert!((0.0..=2.0).contains(&d));
    }

    #[test]
    fn sbd_rejects_zero_variance() {
        let flat = vec![3.0; 10];
        let a = sine(10, 1, 0.0);
        assert!(matches!(sbd(&flat, &a), Err(Error::DegenerateSignal(_))));
    }

    #[test]
    fn kshape_single_cluster() {
        let seqs: Vec<Vec<f64>> = (0..5).map(|i| sine(40, 1, i as f64 * 0.5)).collect();
        let model = kshape_fit(&seqs, 1, 0, 100).unwrap();
        assert!(model.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn kshape_separates_identical_groups() {
        // two groups of identical-within-group sequences
        let a = sine(50, 1, 0.0);
        let mut rng = crate::rng::Rng::new(5);
        let b: Vec<f64> = (0..50).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let seqs = vec![a.clone(), a.clone(), a, b.clone(), b.clone(), b];
        let model = kshape_fit(&seqs, 2, 3, 100).unwrap();
        assert_eq!(model.assignments[0], model.assignments[1]);
        assert_eq!(model.assignments[0], model.assignments[2]);
        assert_eq!(model.assignments[3], model.assignments[4]);
        assert_eq!(model.assignments[3], model.assignments[5]);
        assert_ne!(model.assignments[0], model.assignments[3]);
    }

    #[test]
    fn init_repair_never_leaves_an_empty_cluster() {
        // the tricky case: giving cluster 2 the index that is cluster 0's
        // only member must not empty cluster 0
        let mut a = vec![1, 1, 0];
        repair_empty_clusters(&mut a, 3);
        let mut seen = [false; 3];
        for &l in &a {
            seen[l] = true;
        }
        assert!(seen.iter().all(|&s| s), "{a:?}");

        // exhaustive over random initial assignments
        let mut rng = crate::rng::Rng::new(13);
        for _ in 0..500 {
            let k = 2 + rng.below(4);
            let n = k + rng.below(6);
            let mut a: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
            repair_empty_clusters(&mut a, k);
            let mut seen = vec![false; k];
            for &l in &a {
                seen[l] = true;
            }
            assert!(seen.iter().all(|&s| s), "k={k}: {a:?}");
        }
    }

    #[test]
    fn kshape_assignments_are_nearest_centroid() {
        let mut rng = crate::rng::Rng::new(9);
        let seqs: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let base = sine(30, 1 + (i % 2), 0.0);
                base.iter().map(|v| v + 0.05 * rng.gauss()).collect()
            })
            .collect();
        let model = kshape_fit(&seqs, 2, 1, 100).unwrap();
        for (i, row) in model.distances.iter().enumerate() {
            let assigned = model.assignments[i];
            for d in row {
                assert!(row[assigned] <= d + 1e-12);
            }
        }
        // centroids are z-normalized
        for c in &model.centroids {
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            let var = c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c.len() as f64;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-6);
        }
    }
}

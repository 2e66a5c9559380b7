//! Unsupervised mode recognition: DTW distances + GMM clustering (the
//! GMM-DTW method), a plain GMM-over-points baseline, a k-Shape baseline,
//! and label alignment for scoring clusterings against ground truth.

pub mod gmm;
pub mod kshape;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Mat;

pub use gmm::{gmm_fit, gmm_predict, GmmFit, GmmOptions, GmmParams};
pub use kshape::{kshape_fit, sbd, KShapeModel};

/// Dynamic-time-warping distance between two sequences of d-vectors (rows).
///
/// Full dynamic program: the local cost is the Euclidean norm of the
/// element difference (which reduces to `|q − c|` for scalars), the
/// accumulated cost obeys
/// `W[i,j] = D[i,j] + min(W[i-1,j], W[i,j-1], W[i-1,j-1])`
/// with `W[1,1] = D[1,1]` and the first row and column reachable only
/// through the recurrence (conceptual infinity padding).
pub fn dtw(a: &Mat, b: &Mat) -> Result<f64> {
    validate_pair(a, b)?;
    let (s, t) = (a.rows(), b.rows());
    // rolling rows; only the distance is needed
    let mut prev = vec![f64::INFINITY; t + 1];
    let mut curr = vec![f64::INFINITY; t + 1];
    prev[0] = 0.0;
    for i in 1..=s {
        curr[0] = f64::INFINITY;
        for j in 1..=t {
            let d = local_cost(a.row(i - 1), b.row(j - 1));
            let best = prev[j].min(curr[j - 1]).min(prev[j - 1]);
            curr[j] = d + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[t])
}

/// Optimal warping path as 0-based index pairs from `(0, 0)` to
/// `(s−1, t−1)`, monotone and continuous with steps `{(1,0),(0,1),(1,1)}`.
/// Backtracking ties prefer the diagonal predecessor, then the left one,
/// then the upper one. The summed local costs along the path equal the DTW
/// distance.
pub fn dtw_path(a: &Mat, b: &Mat) -> Result<Vec<(usize, usize)>> {
    validate_pair(a, b)?;
    let (s, t) = (a.rows(), b.rows());
    let mut w = Mat::zeros(s + 1, t + 1);
    for j in 0..=t {
        w.set(0, j, f64::INFINITY);
    }
    for i in 1..=s {
        w.set(i, 0, f64::INFINITY);
    }
    w.set(0, 0, 0.0);
    for i in 1..=s {
        for j in 1..=t {
            let d = local_cost(a.row(i - 1), b.row(j - 1));
            let best = w.get(i - 1, j).min(w.get(i, j - 1)).min(w.get(i - 1, j - 1));
            w.set(i, j, d + best);
        }
    }

    let mut path = vec![(s - 1, t - 1)];
    let (mut i, mut j) = (s, t);
    while !(i == 1 && j == 1) {
        let diag = w.get(i - 1, j - 1);
        let left = w.get(i, j - 1);
        let up = w.get(i - 1, j);
        if diag <= left && diag <= up {
            i -= 1;
            j -= 1;
        } else if left <= up {
            j -= 1;
        } else {
            i -= 1;
        }
        path.push((i - 1, j - 1));
    }
    path.reverse();
    Ok(path)
}

fn validate_pair(a: &Mat, b: &Mat) -> Result<()> {
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::Shape("empty sequence".into()));
    }
    if a.cols() != b.cols() {
        return Err(Error::Shape(format!(
            "element dimensions differ: {} vs {}",
            a.cols(),
            b.cols()
        )));
    }
    Ok(())
}

#[inline]
fn local_cost(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (a, b) in p.iter().zip(q) {
        let d = a - b;
        s += d * d;
    }
    s.sqrt()
}

/// Symmetric matrix of pairwise DTW distances between cycles; row `i` is
/// the feature vector of cycle `i`. Pairs are computed once (in parallel;
/// results land in disjoint cells, so the output is deterministic).
pub fn dtw_feature_matrix(cycles: &[Mat]) -> Result<Mat> {
    let n = cycles.len();
    if n < 2 {
        return Err(Error::Shape(format!("need at least 2 cycles, got {n}")));
    }
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let distances: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| dtw(&cycles[i], &cycles[j]))
        .collect::<Result<_>>()?;
    let mut out = Mat::zeros(n, n);
    for (&(i, j), &d) in pairs.iter().zip(&distances) {
        out.set(i, j, d);
        out.set(j, i, d);
    }
    Ok(out)
}

/// Extract a cycle set's windows from a trajectory matrix.
pub fn extract_cycles(points: &Mat, cycles: &crate::dataset::CycleSet) -> Vec<Mat> {
    cycles
        .cycles
        .iter()
        .map(|c| points.select_rows(&(c.start..c.start + cycles.cycle_length).collect::<Vec<_>>()))
        .collect()
}

/// Options shared by the GMM-based clustering entry points.
#[derive(Debug, Clone, Default)]
pub struct GmmDtwOptions {
    /// Project DTW feature rows to this many dimensions before GMM;
    /// `None` means `min(8, n_cycles − 1)`.
    pub pca_dims: Option<usize>,
    /// Feed raw n-dimensional DTW rows to the GMM instead of projecting.
    pub raw_features: bool,
    pub gmm: GmmOptions,
}

/// Per-cycle labels plus the soft scores behind them.
#[derive(Debug, Clone)]
pub struct ClusterLabels {
    pub labels: Vec<usize>,
    /// Per-cycle membership scores, one column per cluster.
    pub scores: Mat,
}

/// GMM-DTW: cluster cycles by their DTW-distance feature rows, compacted by
/// PCA to a low-dimensional embedding so mixture covariances stay
/// well-conditioned.
pub fn gmm_dtw_cluster(
    cycles: &[Mat],
    k: usize,
    seed: u64,
    opts: &GmmDtwOptions,
) -> Result<ClusterLabels> {
    let n = cycles.len();
    if n < k {
        return Err(Error::Data(format!("{n} cycles for K={k}")));
    }
    let features = dtw_feature_matrix(cycles)?;
    gmm_over_dtw_features(&features, k, seed, opts)
}

/// The mixture half of GMM-DTW, on an already computed DTW matrix.
pub fn gmm_over_dtw_features(
    features: &Mat,
    k: usize,
    seed: u64,
    opts: &GmmDtwOptions,
) -> Result<ClusterLabels> {
    let n = features.rows();
    let reduced = if opts.raw_features {
        features.clone()
    } else {
        let dims = opts.pca_dims.unwrap_or_else(|| 8.min(n - 1));
        let model = crate::pca::fit(features, dims)?;
        model.transform(features)
    };
    let fit = gmm_fit(&reduced, k, seed, &opts.gmm)?;
    let labels = gmm_predict(&fit.params, &reduced)?;
    Ok(ClusterLabels { labels, scores: fit.responsibilities })
}

/// Plain GMM baseline: mixture over the raw 2-D phase points, each cycle
/// labeled by majority vote of its points (vote ties to the lowest label).
pub fn gmm_point_cluster(
    points: &Mat,
    cycles: &crate::dataset::CycleSet,
    k: usize,
    seed: u64,
    opts: &GmmOptions,
) -> Result<ClusterLabels> {
    let fit = gmm_fit(points, k, seed, opts)?;
    let point_labels = gmm_predict(&fit.params, points)?;
    let n = cycles.len();
    let mut labels = Vec::with_capacity(n);
    let mut scores = Mat::zeros(n, k);
    for (ci, c) in cycles.cycles.iter().enumerate() {
        let mut votes = vec![0usize; k];
        for p in c.start..c.start + cycles.cycle_length {
            votes[point_labels[p]] += 1;
            for j in 0..k {
                let v = scores.get(ci, j) + fit.responsibilities.get(p, j);
                scores.set(ci, j, v);
            }
        }
        for j in 0..k {
            let v = scores.get(ci, j) / cycles.cycle_length as f64;
            scores.set(ci, j, v);
        }
        let best = votes
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.cmp(b).then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .unwrap();
        labels.push(best);
    }
    Ok(ClusterLabels { labels, scores })
}

/// Relabel a clustering to best agree with ground truth: exhaustive search
/// over all K! label permutations (K ≤ 6), agreement ties resolved toward
/// the lexicographically smallest permutation. Returns the permutation
/// (`perm[predicted] = aligned`) and the relabeled predictions.
pub fn align_labels(pred: &[usize], truth: &[usize], k: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if k > 6 {
        return Err(Error::Unsupported(format!("label alignment limited to K ≤ 6, got {k}")));
    }
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} truth labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.iter().chain(truth).any(|&l| l >= k) {
        return Err(Error::Data(format!("label out of range for K={k}")));
    }

    let mut best_perm: Option<Vec<usize>> = None;
    let mut best_agree = 0usize;
    let mut first = true;
    for perm in lex_permutations(k) {
        let agree = pred.iter().zip(truth).filter(|(&p, &t)| perm[p] == t).count();
        if first || agree > best_agree {
            best_agree = agree;
            best_perm = Some(perm);
            first = false;
        }
    }
    let perm = best_perm.unwrap();
    let relabeled = pred.iter().map(|&p| perm[p]).collect();
    Ok((perm, relabeled))
}

/// All permutations of `0..k` in lexicographic order.
fn lex_permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    let mut used = vec![false; k];
    fn rec(k: usize, current: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in 0..k {
            if !used[i] {
                used[i] = true;
                current.push(i);
                rec(k, current, used, out);
                current.pop();
                used[i] = false;
            }
        }
    }
    rec(k, &mut current, &mut used, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(values: &[f64]) -> Mat {
        Mat::from_vec(values.len(), 1, values.to_vec())
    }

    /// Exhaustive enumeration of all monotone warping paths; the
    /// independent oracle for the dynamic program.
    fn dtw_brute(a: &Mat, b: &Mat) -> f64 {
        fn go(a: &Mat, b: &Mat, i: usize, j: usize) -> f64 {
            let here = super::local_cost(a.row(i), b.row(j));
            if i == 0 && j == 0 {
                return here;
            }
            let mut best = f64::INFINITY;
            if i > 0 {
                best = best.min(go(a, b, i - 1, j));
            }
            if j > 0 {
                best = best.min(go(a, b, i, j - 1));
            }
            if i > 0 && j > 0 {
                best = best.min(go(a, b, i - 1, j - 1));
            }
            here + best
        }
        go(a, b, a.rows() - 1, b.rows() - 1)
    }

    #[test]
    fn dtw_identity_is_zero() {
        let a = seq(&[0.3, 1.7, -2.0, 0.4]);
        assert_eq!(dtw(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn dtw_pinned_examples() {
        assert!((dtw(&seq(&[0.0, 0.0]), &seq(&[1.0, 1.0])).unwrap() - 2.0).abs() < 1e-12);
        assert!((dtw(&seq(&[1.0, 2.0, 3.0]), &seq(&[1.0, 2.0, 2.0, 3.0])).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn dtw_matches_brute_force_on_short_sequences() {
        let mut rng = crate::rng::Rng::new(23);
        for _ in 0..100 {
            let la = 1 + rng.below(6);
            let lb = 1 + rng.below(6);
            let a = seq(&(0..la).map(|_| rng.uniform_in(-2.0, 2.0)).collect::<Vec<_>>());
            let b = seq(&(0..lb).map(|_| rng.uniform_in(-2.0, 2.0)).collect::<Vec<_>>());
            let got = dtw(&a, &b).unwrap();
            let want = dtw_brute(&a, &b);
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn dtw_rejects_bad_shapes() {
        let a = seq(&[1.0]);
        let empty = Mat::zeros(0, 1);
        assert!(matches!(dtw(&a, &empty), Err(Error::Shape(_))));
        let b2 = Mat::from_rows(&[vec![1.0, 2.0]]);
        assert!(matches!(dtw(&a, &b2), Err(Error::Shape(_))));
    }

    #[test]
    fn dtw_path_diagonal_for_equal_sequences() {
        let a = seq(&[1.0, 2.0, 3.0]);
        let path = dtw_path(&a, &a).unwrap();
        assert_eq!(path, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn dtw_path_pinned_example() {
        // unique zero-cost path: the repeated 2 aligns at no cost
        let path = dtw_path(&seq(&[1.0, 2.0, 3.0]), &seq(&[1.0, 2.0, 2.0, 3.0])).unwrap();
        assert_eq!(path, vec![(0, 0), (1, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn dtw_path_cost_equals_distance() {
        let mut rng = crate::rng::Rng::new(31);
        for _ in 0..50 {
            let la = 1 + rng.below(8);
            let lb = 1 + rng.below(8);
            let a = Mat::from_rows(
                &(0..la)
                    .map(|_| vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)])
                    .collect::<Vec<_>>(),
            );
            let b = Mat::from_rows(
                &(0..lb)
                    .map(|_| vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)])
                    .collect::<Vec<_>>(),
            );
            let path = dtw_path(&a, &b).unwrap();
            let cost: f64 =
                path.iter().map(|&(i, j)| super::local_cost(a.row(i), b.row(j))).sum();
            let d = dtw(&a, &b).unwrap();
            assert!((cost - d).abs() < 1e-9);
            // monotone continuous steps, correct endpoints
            assert_eq!(path[0], (0, 0));
            assert_eq!(*path.last().unwrap(), (la - 1, lb - 1));
            for w in path.windows(2) {
                let di = w[1].0 - w[0].0;
                let dj = w[1].1 - w[0].1;
                assert!(di <= 1 && dj <= 1 && di + dj >= 1);
            }
            // distance dominates both forced corner cells
            assert!(d + 1e-12 >= super::local_cost(a.row(0), b.row(0)));
            assert!(d + 1e-12 >= super::local_cost(a.row(la - 1), b.row(lb - 1)));
        }
    }

    #[test]
    fn dtw_symmetry_and_diagonal_bound() {
        let mut rng = crate::rng::Rng::new(37);
        for _ in 0..50 {
            let l = 2 + rng.below(6);
            let a = seq(&(0..l).map(|_| rng.uniform_in(-1.0, 1.0)).collect::<Vec<_>>());
            let b = seq(&(0..l).map(|_| rng.uniform_in(-1.0, 1.0)).collect::<Vec<_>>());
            let ab = dtw(&a, &b).unwrap();
            let ba = dtw(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-12);
            let diag: f64 = (0..l).map(|i| super::local_cost(a.row(i), b.row(i))).sum();
            assert!(ab <= diag + 1e-12);
        }
    }

    #[test]
    fn feature_matrix_is_symmetric_with_zero_diagonal() {
        let cycles = vec![seq(&[0.0, 1.0]), seq(&[0.5, 1.5]), seq(&[3.0, 4.0])];
        let m = dtw_feature_matrix(&cycles).unwrap();
        for i in 0..3 {
            assert_eq!(m.get(i, i), 0.0);
            for j in 0..3 {
                assert!((m.get(i, j) - m.get(j, i)).abs() < 1e-12);
                assert!(m.get(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn feature_matrix_identical_cycles_is_zero() {
        let c = seq(&[1.0, 2.0, 3.0]);
        let m = dtw_feature_matrix(&[c.clone(), c.clone(), c]).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn align_labels_examples() {
        let (perm, relabeled) = align_labels(&[0, 1, 0], &[0, 1, 0], 2).unwrap();
        assert_eq!(perm, vec![0, 1]);
        assert_eq!(relabeled, vec![0, 1, 0]);

        let (perm, relabeled) = align_labels(&[0, 0, 1, 1], &[1, 1, 0, 0], 2).unwrap();
        assert_eq!(perm, vec![1, 0]);
        assert_eq!(relabeled, vec![1, 1, 0, 0]);
    }

    #[test]
    fn align_labels_never_hurts() {
        let mut rng = crate::rng::Rng::new(41);
        for _ in 0..50 {
            let k = 2 + rng.below(4);
            let n = 20;
            let pred: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
            let raw = pred.iter().zip(&truth).filter(|(p, t)| p == t).count();
            let (_, relabeled) = align_labels(&pred, &truth, k).unwrap();
            let aligned = relabeled.iter().zip(&truth).filter(|(p, t)| p == t).count();
            assert!(aligned >= raw);
        }
    }

    #[test]
    fn align_labels_rejects_large_k() {
        assert!(matches!(align_labels(&[0], &[0], 7), Err(Error::Unsupported(_))));
    }

    #[test]
    fn gmm_dtw_separates_block_structured_cycles() {
        // two groups with zero within-group DTW distance
        let a = seq(&[0.0, 0.0, 0.0]);
        let b = seq(&[5.0, 5.0, 5.0]);
        let cycles = vec![a.clone(), a.clone(), a, b.clone(), b.clone(), b];
        let out = gmm_dtw_cluster(&cycles, 2, 7, &GmmDtwOptions::default()).unwrap();
        assert_eq!(out.labels[0], out.labels[1]);
        assert_eq!(out.labels[0], out.labels[2]);
        assert_eq!(out.labels[3], out.labels[4]);
        assert_eq!(out.labels[3], out.labels[5]);
        assert_ne!(out.labels[0], out.labels[3]);
    }

    #[test]
    fn gmm_point_cluster_majority_votes() {
        // 2 cycles of 4 points each, well separated in 2-D
        let mut rows = Vec::new();
        for _ in 0..4 {
            rows.push(vec![0.0, 0.0]);
        }
        for _ in 0..4 {
            rows.push(vec![10.0, 10.0]);
        }
        let points = Mat::from_rows(&rows);
        let cs = crate::dataset::segment_cycles(8, 4, None).unwrap();
        let out = gmm_point_cluster(&points, &cs, 2, 3, &GmmOptions::default()).unwrap();
        assert_ne!(out.labels[0], out.labels[1]);

        let one = gmm_point_cluster(&points, &cs, 1, 3, &GmmOptions::default()).unwrap();
        assert_eq!(one.labels, vec![0, 0]);
    }
}

//! Confusion matrices and the seven-indicator evaluation suite: accuracy,
//! precision, recall, F1, false alarm rate, AUC, and geometric mean score,
//! with macro-averaging for multiclass runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// K×K count matrix; rows are truth, columns are prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Per-sample counts of a one-vs-rest reading of a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl BinaryCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Count predictions against truth. Labels must lie in `[0, k)`.
pub fn confusion(pred: &[usize], truth: &[usize], k: usize, class_names: Vec<String>) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} truth labels",
            pred.len(),
            truth.len()
        )));
    }
    if class_names.len() != k {
        return Err(Error::Shape(format!("{} names for k={k}", class_names.len())));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::Data(format!("label out of range: pred {p}, truth {t}, k {k}")));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts, class_names })
}

/// One-vs-rest counts for class `k`: TP on the diagonal, FN along its row,
/// FP down its column, TN everywhere else.
pub fn one_vs_rest(cm: &ConfusionMatrix, class: usize) -> BinaryCounts {
    assert!(class < cm.k(), "class index out of range");
    let tp = cm.counts[class][class];
    let row: u64 = cm.counts[class].iter().sum();
    let col: u64 = cm.counts.iter().map(|r| r[class]).sum();
    let total = cm.total();
    BinaryCounts { tp, fp: col - tp, fn_: row - tp, tn: total + tp - row - col }
}

/// The five confusion-derived rates. `undefined` flags any 0/0 rate, which
/// is reported as 0 to keep pipelines total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    #[serde(rename = "AC")]
    pub accuracy: f64,
    #[serde(rename = "PR")]
    pub precision: f64,
    #[serde(rename = "RC")]
    pub recall: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "FAR")]
    pub false_alarm_rate: f64,
    #[serde(default)]
    pub undefined: bool,
}

fn ratio(num: u64, den: u64, undefined: &mut bool) -> f64 {
    if den == 0 {
        *undefined = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, precision, recall, F1, and false alarm rate of binary counts.
pub fn rates(c: &BinaryCounts) -> Rates {
    assert!(c.total() > 0, "rates need at least one sample");
    let mut undefined = false;
    let accuracy = (c.tn + c.tp) as f64 / c.total() as f64;
    let precision = ratio(c.tp, c.tp + c.fp, &mut undefined);
    let recall = ratio(c.tp, c.tp + c.fn_, &mut undefined);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        undefined = true;
        0.0
    };
    let false_alarm_rate = ratio(c.fp, c.fp + c.tn, &mut undefined);
    Rates { accuracy, precision, recall, f1, false_alarm_rate, undefined }
}

/// Rank-based AUC: the probability that a random positive outscores a
/// random negative, ties counting one half. Equals the trapezoidal ROC
/// integral.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            positive.len()
        )));
    }
    let pos: Vec<f64> = scores.iter().zip(positive).filter(|(_, &p)| p).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(positive).filter(|(_, &p)| !p).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Data("AUC needs at least one positive and one negative".into()));
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (pos.len() as f64 * neg.len() as f64))
}

/// Geometric mean score over classes: the Nth root of the product of every
/// class's precision, recall, and F1 (3N factors). `root3n` switches to the
/// 3N-th root reading.
pub fn gms(per_class: &[Rates], root3n: bool) -> f64 {
    let n = per_class.len();
    assert!(n >= 1, "gms needs at least one class");
    let product: f64 = per_class.iter().map(|r| r.precision * r.recall * r.f1).product();
    let root = if root3n { (3 * n) as f64 } else { n as f64 };
    if product <= 0.0 {
        0.0
    } else {
        product.powf(1.0 / root)
    }
}

/// Arithmetic mean over classes.
pub fn macro_mean(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "macro mean needs at least one class");
    values.iter().sum::<f64>() / values.len() as f64
}

/// Arithmetic means of the per-class rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroRates {
    #[serde(rename = "AC")]
    pub accuracy: f64,
    #[serde(rename = "PR")]
    pub precision: f64,
    #[serde(rename = "RC")]
    pub recall: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "FAR")]
    pub false_alarm_rate: f64,
}

/// Full evaluation report of the seven-indicator suite:
/// `{per_class: {name: {AC, PR, RC, F1, FAR}}, macro: {…}, GMS, AUC?}`.
///
/// `GMS` is a single cross-class aggregate and is reported once per run,
/// not macro-averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: BTreeMap<String, Rates>,
    #[serde(rename = "macro")]
    pub macro_rates: MacroRates,
    #[serde(rename = "GMS")]
    pub gms: f64,
    /// One-vs-rest AUC per class, present only when scores were available.
    #[serde(rename = "AUC", skip_serializing_if = "Option::is_none")]
    pub auc: Option<BTreeMap<String, f64>>,
    #[serde(rename = "macro_AUC", skip_serializing_if = "Option::is_none")]
    pub macro_auc: Option<f64>,
}

/// Build the report from a confusion matrix, optionally with per-sample
/// one-vs-rest scores (`scores[i][k]` = confidence that sample `i` belongs
/// to class `k`) for AUC.
pub fn report(cm: &ConfusionMatrix, scores: Option<(&[Vec<f64>], &[usize])>) -> Result<MetricsReport> {
    let k = cm.k();
    let per: Vec<Rates> = (0..k).map(|c| rates(&one_vs_rest(cm, c))).collect();
    let mut per_class = BTreeMap::new();
    for (c, r) in per.iter().enumerate() {
        per_class.insert(cm.class_names[c].clone(), *r);
    }
    let mut auc_map = None;
    let mut macro_auc = None;
    if let Some((score_rows, truth)) = scores {
        let mut map = BTreeMap::new();
        let mut values = Vec::with_capacity(k);
        for c in 0..k {
            let s: Vec<f64> = score_rows.iter().map(|row| row[c]).collect();
            let pos: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            let v = auc(&s, &pos)?;
            map.insert(cm.class_names[c].clone(), v);
            values.push(v);
        }
        macro_auc = Some(macro_mean(&values));
        auc_map = Some(map);
    }
    Ok(MetricsReport {
        per_class,
        macro_rates: MacroRates {
            accuracy: macro_mean(&per.iter().map(|r| r.accuracy).collect::<Vec<_>>()),
            precision: macro_mean(&per.iter().map(|r| r.precision).collect::<Vec<_>>()),
            recall: macro_mean(&per.iter().map(|r| r.recall).collect::<Vec<_>>()),
            f1: macro_mean(&per.iter().map(|r| r.f1).collect::<Vec<_>>()),
            false_alarm_rate: macro_mean(
                &per.iter().map(|r| r.false_alarm_rate).collect::<Vec<_>>(),
            ),
        },
        gms: gms(&per, false),
        auc: auc_map,
        macro_auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn confusion_diagonal_when_perfect() {
        let cm = confusion(&[0, 1, 2, 1], &[0, 1, 2, 1], 3, names(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(cm.counts[i][j], 0);
                }
            }
        }
        assert_eq!(cm.total(), 4);
    }

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn confusion_single_misprediction() {
        let cm = confusion(&[1], &[0], 2, names(2)).unwrap();
        assert_eq!(cm.counts[0][1], 1);
        assert_eq!(cm.total(), 1);
    }

    #[test]
    fn confusion_rejects_out_of_range() {
        assert!(matches!(confusion(&[2], &[0], 2, names(2)), Err(Error::Data(_))));
    }

    #[test]
    fn one_vs_rest_reads_off_2x2() {
        let cm = ConfusionMatrix {
            counts: vec![vec![9, 2], vec![1, 8]],
            class_names: names(2),
        };
        let c = one_vs_rest(&cm, 1);
        assert_eq!(c, BinaryCounts { tp: 8, fp: 2, fn_: 1, tn: 9 });
        // totals hold for every class
        for class in 0..2 {
            assert_eq!(one_vs_rest(&cm, class).total(), cm.total());
        }
    }

    #[test]
    fn rates_worked_example() {
        let r = rates(&BinaryCounts { tp: 8, fp: 2, fn_: 1, tn: 9 });
        assert!(close(r.accuracy, 0.85, 1e-12));
        assert!(close(r.precision, 0.8, 1e-12));
        assert!(close(r.recall, 8.0 / 9.0, 1e-12));
        let f1 = 2.0 * 0.8 * (8.0 / 9.0) / (0.8 + 8.0 / 9.0);
        assert!(close(r.f1, f1, 1e-12));
        assert!(close(r.false_alarm_rate, 2.0 / 11.0, 1e-12));
        assert!(!r.undefined);
    }

    #[test]
    fn rates_perfect_classifier() {
        let r = rates(&BinaryCounts { tp: 5, fp: 0, fn_: 0, tn: 5 });
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.false_alarm_rate, 0.0);
    }

    #[test]
    fn rates_zero_over_zero_flags() {
        let r = rates(&BinaryCounts { tp: 0, fp: 0, fn_: 3, tn: 7 });
        assert_eq!(r.precision, 0.0);
        assert!(r.undefined);
    }

    #[test]
    fn auc_examples() {
        // perfect separation
        let v = auc(&[0.9, 0.8, 0.3, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(v, 1.0);
        // pairwise oracle: pos {0.8, 0.4}, neg {0.6, 0.2} -> 3 wins of 4
        let v = auc(&[0.8, 0.4, 0.6, 0.2], &[true, true, false, false]).unwrap();
        assert_eq!(v, 0.75);
        // single tie
        let v = auc(&[0.5, 0.5], &[true, false]).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn auc_rejects_single_class() {
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::Data(_))));
    }

    #[test]
    fn gms_examples() {
        let perfect = Rates {
            accuracy: 1.0,
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            false_alarm_rate: 0.0,
            undefined: false,
        };
        assert_eq!(gms(&[perfect, perfect], false), 1.0);

        let zero = Rates { precision: 0.0, ..perfect };
        assert_eq!(gms(&[perfect, zero], false), 0.0);

        let half = Rates { precision: 0.5, recall: 0.5, f1: 0.5, ..perfect };
        assert!(close(gms(&[half], false), 0.125, 1e-12));
        // alternative 3N-th root reading
        assert!(close(gms(&[half], true), 0.5, 1e-12));
    }

    #[test]
    fn macro_examples() {
        assert_eq!(macro_mean(&[1.0, 1.0]), 1.0);
        assert_eq!(macro_mean(&[1.0, 0.0]), 0.5);
    }

    #[test]
    fn report_shape() {
        let cm = confusion(&[0, 1, 1, 0], &[0, 1, 0, 0], 2, vec!["AP".into(), "IP".into()]).unwrap();
        let scores = vec![
            vec![0.9, 0.1],
            vec![0.2, 0.8],
            vec![0.4, 0.6],
            vec![0.7, 0.3],
        ];
        let truth = [0usize, 1, 0, 0];
        let rep = report(&cm, Some((&scores, &truth))).unwrap();
        assert_eq!(rep.per_class.len(), 2);
        assert!(rep.auc.is_some());
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json["per_class"]["AP"].get("AC").is_some());
        assert!(json["per_class"]["AP"].get("FAR").is_some());
        assert!(json["macro"].get("F1").is_some());
        assert!(json.get("GMS").is_some());
        assert!(json["AUC"].get("IP").is_some());
    }
}

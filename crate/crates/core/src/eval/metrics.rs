//! Confusion matrices, per-class precision/recall/F1, and Kendall's tau-b.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::pipeline::QueryType;

/// Rows are true classes, columns predicted classes in
/// [`QueryType::CLASSES`] order, plus a final column for rejected
/// (unanswerable) predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 5]; 4],
}

fn class_index(k: QueryType) -> Option<usize> {
    QueryType::CLASSES.iter().position(|c| *c == k)
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 5]; 4]) -> ConfusionMatrix {
        ConfusionMatrix { counts }
    }

    pub fn from_predictions(preds: &[QueryType], labels: &[QueryType]) -> Result<ConfusionMatrix, EvalError> {
        if preds.len() != labels.len() {
            return Err(EvalError::LengthMismatch {
                left: preds.len(),
                right: labels.len(),
            });
        }
        let mut counts = [[0u64; 5]; 4];
        for (p, l) in preds.iter().zip(labels) {
            let Some(row) = class_index(*l) else {
                return Err(EvalError::Corpus(format!("label `{}` is not a classifiable type", l.as_str())));
            };
            let col = class_index(*p).unwrap_or(4);
            counts[row][col] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted_total(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }

    pub fn report(&self) -> ClassificationReport {
        let per_class = QueryType::CLASSES
            .iter()
            .enumerate()
            .map(|(i, &kind)| {
                let tp = self.counts[i][i] as f64;
                let predicted = self.predicted_total(i) as f64;
                let actual = self.row_total(i) as f64;
                let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
                let recall = if actual > 0.0 { tp / actual } else { 0.0 };
                let f1 = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                ClassMetrics {
                    kind,
                    precision,
                    recall,
                    f1,
                    support: self.row_total(i),
                }
            })
            .collect();
        let trace: u64 = (0..4).map(|i| self.counts[i][i]).sum();
        let total = self.total();
        ClassificationReport {
            per_class,
            accuracy: if total > 0 { trace as f64 / total as f64 } else { 0.0 },
            total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub kind: QueryType,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub total: u64,
}

impl ClassificationReport {
    pub fn class(&self, kind: QueryType) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.kind == kind)
    }
}

/// Precision, recall, and F1 per class plus accuracy. A class never
/// predicted has precision 0.
pub fn classification_metrics(preds: &[QueryType], labels: &[QueryType]) -> Result<ClassificationReport, EvalError> {
    Ok(ConfusionMatrix::from_predictions(preds, labels)?.report())
}

/// Pairs tied in the sorted sequence, counted run by run.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Merge sort that returns the number of inversions.
fn sort_counting_swaps(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_counting_swaps(&mut v[..mid]) + sort_counting_swaps(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            merged.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    swaps
}

/// Tie-corrected Kendall rank correlation in O(n log n) (Knight's method).
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(EvalError::TooShort(xs.len()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let n = xs.len() as u64;
    let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n0 = n * (n - 1) / 2;
    let n1 = tied_pairs(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let n3 = tied_pairs(&pairs);
    let mut y_sorted: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = sort_counting_swaps(&mut y_sorted);
    let n2 = tied_pairs(&y_sorted);
    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    if denom == 0.0 {
        return Err(EvalError::Degenerate);
    }
    // concordant minus discordant, from the identity C - D = n0 - n1 - n2 + n3 - 2 * swaps
    let numer = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    Ok((numer / denom).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Direct pair enumeration.
    fn tau_oracle(xs: &[f64], ys: &[f64]) -> Option<f64> {
        let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..xs.len() {
            for j in i + 1..xs.len() {
                let dx = (xs[i] - xs[j]).signum() * if xs[i] == xs[j] { 0.0 } else { 1.0 };
                let dy = (ys[i] - ys[j]).signum() * if ys[i] == ys[j] { 0.0 } else { 1.0 };
                if dx == 0.0 && dy == 0.0 {
                } else if dx == 0.0 {
                    tx += 1;
                } else if dy == 0.0 {
                    ty += 1;
                } else if dx == dy {
                    c += 1;
                } else {
                    d += 1;
                }
            }
        }
        let denom = (((c + d + tx) * (c + d + ty)) as f64).sqrt();
        (denom > 0.0).then(|| (c - d) as f64 / denom)
    }

    #[test]
    fn perfect_and_reversed() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r: Vec<f64> = x.iter().rev().copied().collect();
        assert_eq!(kendall_tau(&x, &x).unwrap(), 1.0);
        assert_eq!(kendall_tau(&x, &r).unwrap(), -1.0);
    }

    #[test]
    fn errors() {
        assert_eq!(kendall_tau(&[1.0], &[1.0]), Err(EvalError::TooShort(1)));
        assert_eq!(kendall_tau(&[1.0, 2.0], &[1.0]), Err(EvalError::LengthMismatch { left: 2, right: 1 }));
        assert_eq!(kendall_tau(&[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]), Err(EvalError::Degenerate));
    }

    #[test]
    fn matches_pair_oracle_with_ties() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 200 {
            let n = rng.gen_range(2..=30);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=5) as f64).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=5) as f64).collect();
            match tau_oracle(&xs, &ys) {
                Some(want) => {
                    let got = kendall_tau(&xs, &ys).unwrap();
                    assert!((got - want).abs() < 1e-12, "{xs:?} {ys:?}");
                    assert!((kendall_tau(&ys, &xs).unwrap() - got).abs() < 1e-12);
                    checked += 1;
                }
                None => assert_eq!(kendall_tau(&xs, &ys), Err(EvalError::Degenerate)),
            }
        }
    }

    #[test]
    fn perfect_predictions_score_one() {
        let labels = [QueryType::Analytical, QueryType::Visual, QueryType::Contextual, QueryType::Navigation];
        let r = classification_metrics(&labels, &labels).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r.per_class.iter().all(|c| c.precision == 1.0 && c.recall == 1.0 && c.f1 == 1.0));
    }

    #[test]
    fn rejected_predictions_count_against_recall() {
        let labels = [QueryType::Analytical, QueryType::Analytical];
        let preds = [QueryType::Analytical, QueryType::Unanswerable];
        let r = classification_metrics(&preds, &labels).unwrap();
        let a = r.class(QueryType::Analytical).unwrap();
        assert_eq!((a.precision, a.recall), (1.0, 0.5));
        assert_eq!(r.accuracy, 0.5);
        assert!(classification_metrics(&preds, &labels[..1]).is_err());
    }

    #[test]
    fn accuracy_is_support_weighted_recall() {
        let m = ConfusionMatrix::from_counts([[5, 1, 0, 0, 1], [2, 3, 0, 0, 0], [0, 1, 4, 1, 0], [0, 0, 0, 2, 0]]);
        let r = m.report();
        let weighted: f64 = r.per_class.iter().map(|c| c.recall * c.support as f64).sum::<f64>() / r.total as f64;
        assert!((weighted - r.accuracy).abs() < 1e-12);
    }
}

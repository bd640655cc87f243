use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts indexed `[true][predicted]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Per-class F1, `None` for classes that never occur and are never
    /// predicted.
    pub fn per_class_f1(&self) -> Vec<Option<f64>> {
        let k = self.num_classes();
        (0..k)
            .map(|c| {
                let tp = self.counts[c][c] as f64;
                let fp = (0..k).filter(|&r| r != c).map(|r| self.counts[r][c]).sum::<u64>() as f64;
                let fn_ = (0..k).filter(|&p| p != c).map(|p| self.counts[c][p]).sum::<u64>() as f64;
                if tp + fp + fn_ == 0.0 {
                    None
                } else if tp == 0.0 {
                    Some(0.0)
                } else {
                    let precision = tp / (tp + fp);
                    let recall = tp / (tp + fn_);
                    Some(2.0 * precision * recall / (precision + recall))
                }
            })
            .collect()
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(k);
    for (&p, &y) in preds.iter().zip(labels) {
        for v in [p, y] {
            if v >= k {
                return Err(Error::Label { label: v, classes: k });
            }
        }
        cm.counts[y][p] += 1;
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyInput("accuracy of an empty confusion matrix".into()));
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// Unweighted mean of per-class F1 over the classes that occur or are
/// predicted.
pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::EmptyInput("macro-F1 of an empty confusion matrix".into()));
    }
    let included: Vec<f64> = cm.per_class_f1().into_iter().flatten().collect();
    Ok(included.iter().sum::<f64>() / included.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_examples() {
        let cm = confusion(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 2]]);
        assert_eq!(accuracy(&cm).unwrap(), 0.75);
        assert!((macro_f1(&cm).unwrap() - 0.733_333_333_333_333_3).abs() < 1e-12);
        let id = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(id.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!((accuracy(&id).unwrap(), macro_f1(&id).unwrap()), (1.0, 1.0));
        let empty = confusion(&[], &[], 3).unwrap();
        assert_eq!(empty, ConfusionMatrix::zeros(3));
        assert!(matches!(accuracy(&empty), Err(Error::EmptyInput(_))));
        let wrong = confusion(&[1, 0], &[0, 1], 2).unwrap();
        assert_eq!((accuracy(&wrong).unwrap(), macro_f1(&wrong).unwrap()), (0.0, 0.0));
    }

    #[test]
    fn absent_classes_are_excluded() {
        let cm = confusion(&[0, 1, 1], &[0, 1, 1], 3).unwrap();
        assert_eq!(cm.per_class_f1()[2], None);
        assert_eq!(macro_f1(&cm).unwrap(), 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(confusion(&[0], &[0, 1], 2), Err(Error::Input(_))));
        assert!(matches!(confusion(&[2], &[0], 2), Err(Error::Label { .. })));
    }

    fn brute_force(preds: &[usize], labels: &[usize], k: usize) -> (f64, f64) {
        let n = preds.len() as f64;
        let acc = preds.iter().zip(labels).filter(|(p, y)| p == y).count() as f64 / n;
        let mut f1s = Vec::new();
        for c in 0..k {
            let tp = preds.iter().zip(labels).filter(|&(&p, &y)| p == c && y == c).count() as f64;
            let pred_c = preds.iter().filter(|&&p| p == c).count() as f64;
            let true_c = labels.iter().filter(|&&y| y == c).count() as f64;
            if pred_c == 0.0 && true_c == 0.0 {
                continue;
            }
            f1s.push(if tp == 0.0 { 0.0 } else { 2.0 * tp / (pred_c + true_c) });
        }
        (acc, f1s.iter().sum::<f64>() / f1s.len() as f64)
    }

    proptest! {
        #[test]
        fn matches_brute_force(k in 2usize..7, pairs in prop::collection::vec((0usize..64, 0usize..64), 1..80)) {
            let preds: Vec<usize> = pairs.iter().map(|p| p.0 % k).collect();
            let labels: Vec<usize> = pairs.iter().map(|p| p.1 % k).collect();
            let cm = confusion(&preds, &labels, k).unwrap();
            prop_assert_eq!(cm.total(), preds.len() as u64);
            let (acc, f1) = brute_force(&preds, &labels, k);
            prop_assert!((accuracy(&cm).unwrap() - acc).abs() < 1e-12);
            prop_assert!((macro_f1(&cm).unwrap() - f1).abs() < 1e-12);
        }

        #[test]
        fn macro_f1_is_permutation_invariant(k in 2usize..6, shift in 1usize..5, pairs in prop::collection::vec((0usize..32, 0usize..32), 1..60)) {
            let preds: Vec<usize> = pairs.iter().map(|p| p.0 % k).collect();
            let labels: Vec<usize> = pairs.iter().map(|p| p.1 % k).collect();
            let perm = |v: &[usize]| v.iter().map(|&c| (c + shift) % k).collect::<Vec<_>>();
            let a = macro_f1(&confusion(&preds, &labels, k).unwrap()).unwrap();
            let b = macro_f1(&confusion(&perm(&preds), &perm(&labels), k).unwrap()).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

//! Confusion matrices and evaluation metrics.

use std::fmt;

use crate::corpus::LabelScheme;
use crate::error::{Error, Result};

/// Gold-by-predicted counts; rows are gold labels, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub scheme: LabelScheme,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(scheme: LabelScheme) -> Self {
        let c = scheme.classes();
        ConfusionMatrix {
            scheme,
            counts: vec![0; c * c],
        }
    }

    pub fn classes(&self) -> usize {
        self.scheme.classes()
    }

    pub fn count(&self, gold: usize, predicted: usize) -> usize {
        self.counts[gold * self.classes() + predicted]
    }

    pub fn add(&mut self, gold: usize, predicted: usize) {
        let c = self.classes();
        self.counts[gold * c + predicted] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    fn row_sum(&self, gold: usize) -> usize {
        (0..self.classes()).map(|p| self.count(gold, p)).sum()
    }

    fn col_sum(&self, predicted: usize) -> usize {
        (0..self.classes()).map(|g| self.count(g, predicted)).sum()
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "gold \\ predicted")?;
        for g in 0..self.classes() {
            write!(f, "{:>14}", self.scheme.label_name(g))?;
            for p in 0..self.classes() {
                write!(f, " {:>6}", self.count(g, p))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Tallies predictions against gold labels.
pub fn confusion(
    scheme: LabelScheme,
    predictions: &[usize],
    gold: &[usize],
) -> Result<ConfusionMatrix> {
    if predictions.len() != gold.len() {
        return Err(Error::Data(format!(
            "{} predictions against {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(scheme);
    for (&p, &g) in predictions.iter().zip(gold) {
        if p >= cm.classes() || g >= cm.classes() {
            return Err(Error::Data(format!(
                "label out of range for the {scheme}-class scheme"
            )));
        }
        cm.add(g, p);
    }
    Ok(cm)
}

/// F1 of one class; 0 when the precision + recall denominator is 0.
fn class_f1(cm: &ConfusionMatrix, class: usize) -> f64 {
    let tp = cm.count(class, class) as f64;
    let fp = cm.col_sum(class) as f64 - tp;
    let fn_ = cm.row_sum(class) as f64 - tp;
    let denom = 2.0 * tp + fp + fn_;
    if denom == 0.0 {
        0.0
    } else {
        2.0 * tp / denom
    }
}

/// Mean of the positive-class and negative-class F1 scores. Only defined
/// for the 3-class scheme.
pub fn avg_f1_pos_neg(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.scheme != LabelScheme::Three {
        return Err(Error::Data(
            "averaged positive/negative F1 requires the 3-class scheme".into(),
        ));
    }
    let pos = cm.scheme.label_index("positive").unwrap();
    let neg = cm.scheme.label_index("negative").unwrap();
    Ok((class_f1(cm, pos) + class_f1(cm, neg)) / 2.0)
}

/// Fraction of correct predictions.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Data("accuracy of an empty confusion matrix".into()));
    }
    let trace: usize = (0..cm.classes()).map(|c| cm.count(c, c)).sum();
    Ok(trace as f64 / total as f64)
}

/// The metric used for model selection and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    AvgF1,
    Accuracy,
}

impl Metric {
    pub fn parse(s: &str) -> Result<Metric> {
        match s {
            "avgf1" => Ok(Metric::AvgF1),
            "acc" | "accuracy" => Ok(Metric::Accuracy),
            other => Err(Error::Config(format!(
                "unknown metric `{other}` (expected avgf1 or acc)"
            ))),
        }
    }

    pub fn compute(&self, cm: &ConfusionMatrix) -> Result<f64> {
        match self {
            Metric::AvgF1 => avg_f1_pos_neg(cm),
            Metric::Accuracy => accuracy(cm),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::AvgF1 => write!(f, "avgf1"),
            Metric::Accuracy => write!(f, "acc"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm_from(rows: &[&[usize]], scheme: LabelScheme) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::new(scheme);
        for (g, row) in rows.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                for _ in 0..n {
                    cm.add(g, p);
                }
            }
        }
        cm
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let cm = confusion(LabelScheme::Three, &[0, 1, 2, 1], &[0, 1, 2, 1]).unwrap();
        assert_eq!(cm.count(0, 0), 1);
        assert_eq!(cm.count(1, 1), 2);
        assert_eq!(cm.count(0, 1), 0);
        assert_eq!(avg_f1_pos_neg(&cm).unwrap(), 1.0);
        assert_eq!(accuracy(&cm).unwrap(), 1.0);
    }

    #[test]
    fn empty_input_gives_zero_matrix() {
        let cm = confusion(LabelScheme::Three, &[], &[]).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(accuracy(&cm).is_err());
    }

    #[test]
    fn tally_example() {
        // gold [pos, pos, neg], predicted [pos, neg, neg]
        let cm = confusion(LabelScheme::Three, &[0, 2, 2], &[0, 0, 2]).unwrap();
        assert_eq!(cm.count(0, 0), 1);
        assert_eq!(cm.count(0, 2), 1);
        assert_eq!(cm.count(2, 2), 1);
        assert_eq!(cm.total(), 3);
    }

    #[test]
    fn length_mismatch_is_error() {
        assert!(confusion(LabelScheme::Three, &[0], &[0, 1]).is_err());
    }

    #[test]
    fn avg_f1_hand_computed() {
        // positive: TP=2 FP=1 FN=1; negative: TP=1 FP=0 FN=1; neutral absorbs the rest
        let cm = cm_from(
            &[&[2, 1, 0], &[1, 5, 0], &[0, 1, 1]],
            LabelScheme::Three,
        );
        let f1 = avg_f1_pos_neg(&cm).unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn always_neutral_model_scores_zero() {
        let cm = cm_from(&[&[0, 3, 0], &[0, 2, 0], &[0, 4, 0]], LabelScheme::Three);
        assert_eq!(avg_f1_pos_neg(&cm).unwrap(), 0.0);
    }

    #[test]
    fn avg_f1_requires_three_class_scheme() {
        let cm = ConfusionMatrix::new(LabelScheme::Five);
        assert!(avg_f1_pos_neg(&cm).is_err());
    }

    #[test]
    fn avg_f1_ignores_pure_neutral_cell() {
        let mut a = cm_from(&[&[2, 1, 0], &[0, 2, 1], &[1, 0, 3]], LabelScheme::Three);
        let f1_before = avg_f1_pos_neg(&a).unwrap();
        for _ in 0..10 {
            a.add(1, 1);
        }
        assert_eq!(avg_f1_pos_neg(&a).unwrap(), f1_before);
    }

    #[test]
    fn accuracy_three_of_four() {
        let cm = confusion(LabelScheme::Three, &[0, 1, 2, 0], &[0, 1, 2, 1]).unwrap();
        assert_eq!(accuracy(&cm).unwrap(), 0.75);
    }

    #[test]
    fn accuracy_invariant_under_label_permutation() {
        let cm = cm_from(&[&[5, 1, 0], &[2, 3, 1], &[0, 2, 6]], LabelScheme::Three);
        // permute labels as (0 1 2) -> (2 0 1) on both axes
        let perm = [2usize, 0, 1];
        let mut permuted = ConfusionMatrix::new(LabelScheme::Three);
        for g in 0..3 {
            for p in 0..3 {
                for _ in 0..cm.count(g, p) {
                    permuted.add(perm[g], perm[p]);
                }
            }
        }
        assert_eq!(accuracy(&cm).unwrap(), accuracy(&permuted).unwrap());
    }

    #[test]
    fn metrics_stay_in_unit_interval() {
        let mut rng = crate::rng::Rng::new(21);
        for _ in 0..50 {
            let mut cm = ConfusionMatrix::new(LabelScheme::Three);
            for _ in 0..rng.below(40) + 1 {
                cm.add(rng.below(3), rng.below(3));
            }
            let f1 = avg_f1_pos_neg(&cm).unwrap();
            let acc = accuracy(&cm).unwrap();
            assert!((0.0..=1.0).contains(&f1));
            assert!((0.0..=1.0).contains(&acc));
        }
    }

    #[test]
    fn metric_parse_and_compute() {
        let cm = confusion(LabelScheme::Three, &[0, 2], &[0, 2]).unwrap();
        assert_eq!(Metric::parse("avgf1").unwrap().compute(&cm).unwrap(), 1.0);
        assert_eq!(Metric::parse("acc").unwrap().compute(&cm).unwrap(), 1.0);
        assert!(Metric::parse("auc").is_err());
    }
}

//! Counting and localization metrics.
//!
//! Count accuracy, MSE and MAE over integer counts; per-class accuracy keyed
//! by the ground-truth count; mean average Euclidean distance (mAED) between
//! matched point sets; and the rules that turn raw regression or
//! classification outputs into integer counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::match_points;
use crate::corpus::PointAnnotation;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no count pairs to evaluate")]
    Empty,
    #[error("{gt} ground-truth images but {pred} predicted images")]
    LengthMismatch { gt: usize, pred: usize },
    #[error("mAED needs at least one image")]
    NoImages,
    #[error("penalty must be positive and finite, got {0}")]
    BadPenalty(f64),
    #[error("regression output {0} is not finite")]
    NonFinite(f64),
    #[error("classification scores are empty")]
    NoScores,
    #[error("classification score at index {0} is NaN")]
    NanScore(usize),
}

/// Ground-truth and predicted count for one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountPair {
    pub id: String,
    pub gt: u32,
    pub pred: u32,
}

impl CountPair {
    pub fn new(id: impl Into<String>, gt: u32, pred: u32) -> Self {
        Self {
            id: id.into(),
            gt,
            pred,
        }
    }
}

/// Accuracy and occurrence count of one ground-truth class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStat {
    pub accuracy: f64,
    pub occurrences: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub mse: f64,
    pub mae: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class: Option<BTreeMap<u32, ClassStat>>,
}

pub fn count_metrics(pairs: &[CountPair]) -> Result<MetricsReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = pairs.len() as f64;
    let mut correct = 0usize;
    let mut sq = 0.0;
    let mut abs = 0.0;
    for p in pairs {
        let d = f64::from(p.gt) - f64::from(p.pred);
        correct += usize::from(p.gt == p.pred);
        sq += d * d;
        abs += d.abs();
    }
    Ok(MetricsReport {
        accuracy: correct as f64 / n,
        mse: sq / n,
        mae: abs / n,
        n: pairs.len(),
        per_class: None,
    })
}

/// [`count_metrics`] plus the per-class breakdown.
pub fn count_metrics_with_classes(pairs: &[CountPair]) -> Result<MetricsReport, MetricsError> {
    let mut report = count_metrics(pairs)?;
    report.per_class = Some(per_class_accuracy(pairs)?);
    Ok(report)
}

/// Accuracy grouped by ground-truth count.
pub fn per_class_accuracy(pairs: &[CountPair]) -> Result<BTreeMap<u32, ClassStat>, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut tally: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for p in pairs {
        let e = tally.entry(p.gt).or_default();
        e.0 += 1;
        e.1 += usize::from(p.gt == p.pred);
    }
    Ok(tally
        .into_iter()
        .map(|(class, (occurrences, correct))| {
            (
                class,
                ClassStat {
                    accuracy: correct as f64 / occurrences as f64,
                    occurrences,
                    correct,
                },
            )
        })
        .collect())
}

/// How each image's summed distance is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    /// `max(|gt|, |pred|)`, so penalties are averaged over the side that
    /// incurred them.
    #[default]
    MaxCard,
    /// `|gt|`; images without ground truth fall back to `|pred|`.
    GtCard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaedConfig {
    pub penalty: f64,
    /// Sum squared distances for matched pairs (the printed formula) instead
    /// of plain distances.
    pub squared: bool,
    pub denominator: Denominator,
}

impl Default for MaedConfig {
    fn default() -> Self {
        Self {
            penalty: 1.0,
            squared: true,
            denominator: Denominator::MaxCard,
        }
    }
}

/// One image's mAED term.
pub fn maed_image(
    gt: &[PointAnnotation],
    pred: &[PointAnnotation],
    cfg: &MaedConfig,
) -> Result<f64, MetricsError> {
    if !(cfg.penalty.is_finite() && cfg.penalty > 0.0) {
        return Err(MetricsError::BadPenalty(cfg.penalty));
    }
    if gt.is_empty() && pred.is_empty() {
        return Ok(0.0);
    }
    let m = match_points(gt, pred, cfg.penalty);
    let matched: f64 = m
        .pairs
        .iter()
        .map(|p| {
            if cfg.squared {
                p.distance * p.distance
            } else {
                p.distance
            }
        })
        .sum();
    let total = matched + cfg.penalty * m.unmatched() as f64;
    let denom = match cfg.denominator {
        Denominator::MaxCard => gt.len().max(pred.len()),
        Denominator::GtCard if gt.is_empty() => pred.len(),
        Denominator::GtCard => gt.len(),
    };
    Ok(total / denom as f64)
}

/// Mean over images of the per-image mAED term, accumulated in image order.
pub fn maed(
    gt_sets: &[Vec<PointAnnotation>],
    pred_sets: &[Vec<PointAnnotation>],
    cfg: &MaedConfig,
) -> Result<f64, MetricsError> {
    if gt_sets.len() != pred_sets.len() {
        return Err(MetricsError::LengthMismatch {
            gt: gt_sets.len(),
            pred: pred_sets.len(),
        });
    }
    if gt_sets.is_empty() {
        return Err(MetricsError::NoImages);
    }
    let mut sum = 0.0;
    for (g, p) in gt_sets.iter().zip(pred_sets) {
        sum += maed_image(g, p, cfg)?;
    }
    Ok(sum / gt_sets.len() as f64)
}

/// Rounds a regression output to a count: nearest integer, halves away
/// from zero, negatives clamp to 0.
pub fn decide_count_regression(raw: f64) -> Result<u32, MetricsError> {
    if !raw.is_finite() {
        return Err(MetricsError::NonFinite(raw));
    }
    Ok(raw.round().clamp(0.0, f64::from(u32::MAX)) as u32)
}

/// Maximum-a-posteriori class; ties go to the lowest index.
pub fn decide_count_classification(scores: &[f64]) -> Result<usize, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::NoScores);
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(MetricsError::NanScore(i));
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::brute_force_match;
    use proptest::prelude::*;

    fn pairs(raw: &[(u32, u32)]) -> Vec<CountPair> {
        raw.iter()
            .enumerate()
            .map(|(i, &(g, p))| CountPair::new(format!("{i}"), g, p))
            .collect()
    }

    #[test]
    fn perfect_predictions() {
        let r = count_metrics(&pairs(&[(0, 0), (3, 3), (7, 7)])).unwrap();
        assert_eq!((r.accuracy, r.mse, r.mae, r.n), (1.0, 0.0, 0.0, 3));
    }

    #[test]
    fn two_element_arithmetic() {
        let r = count_metrics(&pairs(&[(2, 3), (2, 2)])).unwrap();
        assert_eq!((r.accuracy, r.mse, r.mae), (0.5, 0.5, 0.5));
        assert_eq!(count_metrics(&[]), Err(MetricsError::Empty));
        assert_eq!(per_class_accuracy(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn distech_class_zero() {
        let mut raw = vec![(0, 0); 17];
        raw.extend([(0, 1), (0, 2)]);
        let classes = per_class_accuracy(&pairs(&raw)).unwrap();
        let zero = classes[&0];
        assert_eq!(zero.occurrences, 19);
        assert_eq!(format!("{:.2}", zero.accuracy * 100.0), "89.47");
    }

    #[test]
    fn single_class_all_correct() {
        let classes = per_class_accuracy(&pairs(&[(4, 4); 6])).unwrap();
        assert_eq!(classes.len(), 1);
        assert_eq!(classes[&4].accuracy, 1.0);
        assert_eq!(classes[&4].occurrences, 6);
    }

    #[test]
    fn maed_examples() {
        let cfg = MaedConfig::default();
        let g = vec![PointAnnotation::at(0.2, 0.2)];
        let p = vec![PointAnnotation::at(0.2, 0.5)];
        let v = maed(&[g.clone()], &[p.clone()], &cfg).unwrap();
        assert!((v - 0.09).abs() < 1e-12);
        let plain = MaedConfig {
            squared: false,
            ..cfg
        };
        assert!((maed(&[g.clone()], &[p], &plain).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(maed(&[g.clone()], &[g], &cfg).unwrap(), 0.0);
    }

    #[test]
    fn two_gt_one_pred_against_enumeration() {
        let g = vec![PointAnnotation::at(0.1, 0.1), PointAnnotation::at(0.8, 0.7)];
        let p = vec![PointAnnotation::at(0.75, 0.65)];
        let oracle = brute_force_match(&g, &p, 1.0).unwrap();
        assert_eq!(oracle.pairs.len(), 1);
        let d = oracle.pairs[0].distance;
        let expected = (d * d + 1.0) / 2.0;
        let v = maed(&[g], &[p], &MaedConfig::default()).unwrap();
        assert!((v - expected).abs() < 1e-12);
        assert!((d - 0.05f64.hypot(0.05)).abs() < 1e-12);
    }

    #[test]
    fn one_sided_image_costs_exactly_the_penalty() {
        let cfg = MaedConfig::default();
        for k in 1..6 {
            let pts: Vec<_> = (0..k).map(|i| PointAnnotation::at(0.1 * i as f64, 0.5)).collect();
            assert_eq!(maed_image(&pts, &[], &cfg).unwrap(), 1.0);
            assert_eq!(maed_image(&[], &pts, &cfg).unwrap(), 1.0);
            let gt_card = MaedConfig {
                denominator: Denominator::GtCard,
                ..cfg
            };
            assert_eq!(maed_image(&[], &pts, &gt_card).unwrap(), 1.0);
        }
        assert_eq!(maed_image(&[], &[], &cfg).unwrap(), 0.0);
    }

    #[test]
    fn gt_card_denominator() {
        let cfg = MaedConfig {
            denominator: Denominator::GtCard,
            ..MaedConfig::default()
        };
        let g = vec![PointAnnotation::at(0.5, 0.5)];
        let p = vec![PointAnnotation::at(0.5, 0.5), PointAnnotation::at(0.1, 0.1)];
        assert_eq!(maed_image(&g, &p, &cfg).unwrap(), 1.0);
        assert_eq!(maed_image(&g, &p, &MaedConfig::default()).unwrap(), 0.5);
    }

    #[test]
    fn maed_errors() {
        let cfg = MaedConfig::default();
        assert_eq!(
            maed(&[vec![]], &[], &cfg),
            Err(MetricsError::LengthMismatch { gt: 1, pred: 0 })
        );
        assert_eq!(maed(&[], &[], &cfg), Err(MetricsError::NoImages));
        let bad = MaedConfig {
            penalty: 0.0,
            ..cfg
        };
        assert_eq!(maed(&[vec![]], &[vec![]], &bad), Err(MetricsError::BadPenalty(0.0)));
    }

    #[test]
    fn regression_rounding() {
        assert_eq!(decide_count_regression(2.4).unwrap(), 2);
        assert_eq!(decide_count_regression(2.5).unwrap(), 3);
        assert_eq!(decide_count_regression(-0.3).unwrap(), 0);
        assert_eq!(decide_count_regression(-2.5).unwrap(), 0);
        assert!(decide_count_regression(f64::NAN).is_err());
        assert!(decide_count_regression(f64::INFINITY).is_err());
    }

    #[test]
    fn classification_rule() {
        let mut one_hot = vec![0.0; 21];
        one_hot[4] = 1.0;
        assert_eq!(decide_count_classification(&one_hot).unwrap(), 4);
        assert_eq!(decide_count_classification(&[1.0 / 21.0; 21]).unwrap(), 0);
        assert_eq!(decide_count_classification(&[]), Err(MetricsError::NoScores));
        assert_eq!(
            decide_count_classification(&[0.1, f64::NAN]),
            Err(MetricsError::NanScore(1))
        );
    }

    fn point_sets() -> impl Strategy<Value = Vec<Vec<PointAnnotation>>> {
        proptest::collection::vec(
            proptest::collection::vec(
                (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(x, y)| PointAnnotation::at(x, y)),
                0..6,
            ),
            1..5,
        )
    }

    proptest! {
        #[test]
        fn per_class_weighted_mean_is_overall_accuracy(
            raw in proptest::collection::vec((0u32..8, 0u32..8), 1..300)
        ) {
            let ps = pairs(&raw);
            let overall = count_metrics(&ps).unwrap();
            let classes = per_class_accuracy(&ps).unwrap();
            let total: usize = classes.values().map(|c| c.occurrences).sum();
            prop_assert_eq!(total, overall.n);
            let weighted: f64 = classes
                .values()
                .map(|c| c.accuracy * c.occurrences as f64)
                .sum::<f64>() / total as f64;
            prop_assert!((weighted - overall.accuracy).abs() < 1e-12);
        }

        #[test]
        fn count_metrics_order_free_and_jensen(
            raw in proptest::collection::vec((0u32..21, 0u32..21), 1..100)
        ) {
            let ps = pairs(&raw);
            let mut rev = ps.clone();
            rev.reverse();
            let a = count_metrics(&ps).unwrap();
            let b = count_metrics(&rev).unwrap();
            prop_assert_eq!(a.accuracy, b.accuracy);
            prop_assert!(a.mae <= a.mse.sqrt() + 1e-12);
        }

        #[test]
        fn maed_nonnegative_and_zero_on_permutations(sets in point_sets(), squared in any::<bool>()) {
            let cfg = MaedConfig { squared, ..MaedConfig::default() };
            let shuffled: Vec<Vec<PointAnnotation>> = sets
                .iter()
                .map(|s| s.iter().rev().copied().collect())
                .collect();
            prop_assert_eq!(maed(&sets, &shuffled, &cfg).unwrap(), 0.0);
            let other: Vec<Vec<PointAnnotation>> = sets
                .iter()
                .map(|s| s.iter().map(|p| PointAnnotation::at(1.0 - p.cy, p.cx)).collect())
                .collect();
            let v = maed(&sets, &other, &cfg).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!(v <= cfg.penalty * 2.0);
        }

        #[test]
        fn argmax_ignores_affine_maps(
            scores in proptest::collection::vec(-10.0f64..10.0, 1..25),
            shift in -100.0f64..100.0,
            scale in 0.001f64..100.0,
        ) {
            let base = decide_count_classification(&scores).unwrap();
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let scaled: Vec<f64> = scores.iter().map(|s| s * scale).collect();
            let best = scores[base];
            // affine maps can merge near-ties through rounding
            let s = decide_count_classification(&shifted).unwrap();
            prop_assert!(s == base || (scores[s] - best).abs() < 1e-9);
            let k = decide_count_classification(&scaled).unwrap();
            prop_assert!(k == base || (scores[k] - best).abs() < 1e-9);
        }
    }
}

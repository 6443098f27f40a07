//! Group confusion tables and the fairness metrics computed from them.
//!
//! Every metric that divides by a group-dependent count can be undefined
//! (empty group, no predicted positives, no actual negatives); those come
//! back as `None`, never as NaN, and serialize as JSON null.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::data::{GroupTag, SampleSet};
use crate::error::{Error, Result};
use crate::model::{predict, LinearModel};

/// Confusion counts of one group. "Positive" refers to the favorable
/// label +1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl GroupCounts {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    fn predicted_positive(&self) -> usize {
        self.true_positive + self.false_positive
    }

    fn actual_positive(&self) -> usize {
        self.true_positive + self.false_negative
    }

    fn actual_negative(&self) -> usize {
        self.false_positive + self.true_negative
    }
}

/// Confusion tables of both groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedConfusion {
    pub unprivileged: GroupCounts,
    pub privileged: GroupCounts,
}

/// Ratio-based rates of one group; `None` whenever the denominator is
/// zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    /// P(prediction = +1), over the whole group.
    pub positive_rate: Option<f64>,
    pub true_positive_rate: Option<f64>,
    pub false_positive_rate: Option<f64>,
    pub true_negative_rate: Option<f64>,
    pub false_negative_rate: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// Derive all rates of one group's counts.
pub fn rates(counts: &GroupCounts) -> GroupRates {
    GroupRates {
        positive_rate: ratio(counts.predicted_positive(), counts.total()),
        true_positive_rate: ratio(counts.true_positive, counts.actual_positive()),
        false_positive_rate: ratio(counts.false_positive, counts.actual_negative()),
        true_negative_rate: ratio(counts.true_negative, counts.actual_negative()),
        false_negative_rate: ratio(counts.false_negative, counts.actual_positive()),
    }
}

/// Tally per-group confusion counts for hard predictions in {-1, +1}.
/// Samples without a group tag are an error; fairness metrics are only
/// meaningful over tagged data.
pub fn confusion(data: &SampleSet, predictions: &Array1<f64>) -> Result<GroupedConfusion> {
    if predictions.len() != data.n() {
        return Err(Error::DimensionMismatch { expected: data.n(), actual: predictions.len() });
    }
    let mut table = GroupedConfusion::default();
    for i in 0..data.n() {
        let counts = match data.groups()[i] {
            GroupTag::Unprivileged => &mut table.unprivileged,
            GroupTag::Privileged => &mut table.privileged,
            GroupTag::None => return Err(Error::UngroupedSample { index: i }),
        };
        let actual = data.labels()[i] > 0.0;
        let predicted = predictions[i] > 0.0;
        match (actual, predicted) {
            (true, true) => counts.true_positive += 1,
            (false, true) => counts.false_positive += 1,
            (false, false) => counts.true_negative += 1,
            (true, false) => counts.false_negative += 1,
        }
    }
    Ok(table)
}

/// Difference of predicted-positive rates, unprivileged minus privileged.
/// Zero is parity; negative values favor the privileged group.
pub fn demographic_parity(table: &GroupedConfusion) -> Option<f64> {
    let u = rates(&table.unprivileged).positive_rate?;
    let p = rates(&table.privileged).positive_rate?;
    Some(u - p)
}

/// Ratio of predicted-positive rates, unprivileged over privileged. One is
/// parity. Undefined when either group is empty or the privileged rate is
/// zero.
pub fn disparate_impact(table: &GroupedConfusion) -> Option<f64> {
    let u = rates(&table.unprivileged).positive_rate?;
    let p = rates(&table.privileged).positive_rate?;
    if p == 0.0 {
        None
    } else {
        Some(u / p)
    }
}

/// Mean of the FPR and TPR gaps, privileged minus unprivileged. Zero is
/// parity.
pub fn average_odds_difference(table: &GroupedConfusion) -> Option<f64> {
    let u = rates(&table.unprivileged);
    let p = rates(&table.privileged);
    let fpr_gap = p.false_positive_rate? - u.false_positive_rate?;
    let tpr_gap = p.true_positive_rate? - u.true_positive_rate?;
    Some(0.5 * (fpr_gap + tpr_gap))
}

/// Full evaluation of a model on one dataset: accuracy plus every fairness
/// metric, with an unfairness verdict at the configured threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub accuracy: f64,
    pub demographic_parity: Option<f64>,
    pub disparate_impact: Option<f64>,
    pub average_odds_difference: Option<f64>,
    pub fnr_unprivileged: Option<f64>,
    pub fnr_privileged: Option<f64>,
    pub fpr_unprivileged: Option<f64>,
    pub fpr_privileged: Option<f64>,
    /// True when disparate impact < 1 - epsilon; None when that metric is
    /// undefined.
    pub unfair: Option<bool>,
    pub fairness_epsilon: f64,
}

/// Default slack in the disparate-impact unfairness test (the 80% rule).
pub const DEFAULT_FAIRNESS_EPSILON: f64 = 0.2;

/// Predict with `model` on `data` and assemble the [`MetricsRecord`].
pub fn evaluate_model(
    model: &LinearModel,
    data: &SampleSet,
    fairness_epsilon: f64,
) -> Result<MetricsRecord> {
    if data.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), actual: data.dim() });
    }
    evaluate_predictions(data, &predict(model, data.features()), fairness_epsilon)
}

/// Assemble the [`MetricsRecord`] from precomputed hard predictions, for
/// models outside the linear family.
pub fn evaluate_predictions(
    data: &SampleSet,
    predictions: &Array1<f64>,
    fairness_epsilon: f64,
) -> Result<MetricsRecord> {
    if !(0.0..1.0).contains(&fairness_epsilon) {
        return Err(Error::InvalidConfig(format!(
            "fairness epsilon must be in [0, 1), got {fairness_epsilon}"
        )));
    }
    let correct = (0..data.n())
        .filter(|&i| (predictions[i] > 0.0) == (data.labels()[i] > 0.0))
        .count();
    let table = confusion(data, predictions)?;
    let u = rates(&table.unprivileged);
    let p = rates(&table.privileged);
    let di = disparate_impact(&table);
    Ok(MetricsRecord {
        accuracy: correct as f64 / data.n() as f64,
        demographic_parity: demographic_parity(&table),
        disparate_impact: di,
        average_odds_difference: average_odds_difference(&table),
        fnr_unprivileged: u.false_negative_rate,
        fnr_privileged: p.false_negative_rate,
        fpr_unprivileged: u.false_positive_rate,
        fpr_privileged: p.false_positive_rate,
        unfair: di.map(|v| v < 1.0 - fairness_epsilon),
        fairness_epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};
    use crate::model::{train, LossKind, TrainConfig};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn tagged_set(labels: &[f64], groups: &[GroupTag]) -> SampleSet {
        let n = labels.len();
        let features =
            Array2::from_shape_vec((n, 1), (0..n).map(|i| i as f64).collect()).unwrap();
        SampleSet::new(
            features,
            Array1::from_vec(labels.to_vec()),
            groups.to_vec(),
            vec!["f".into()],
        )
        .unwrap()
    }

    #[test]
    fn confusion_matches_hand_tally() {
        use GroupTag::{Privileged as P, Unprivileged as U};
        let data = tagged_set(
            &[1.0, 1.0, -1.0, -1.0, 1.0, -1.0],
            &[U, U, U, P, P, P],
        );
        let predictions = array![1.0, -1.0, 1.0, 1.0, 1.0, -1.0];
        let table = confusion(&data, &predictions).unwrap();
        assert_eq!(
            table.unprivileged,
            GroupCounts {
                true_positive: 1,
                false_positive: 1,
                true_negative: 0,
                false_negative: 1
            }
        );
        assert_eq!(
            table.privileged,
            GroupCounts {
                true_positive: 1,
                false_positive: 1,
                true_negative: 1,
                false_negative: 0
            }
        );
    }

    #[test]
    fn confusion_rejects_untagged_samples() {
        let data = tagged_set(&[1.0, -1.0], &[GroupTag::Privileged, GroupTag::None]);
        let predictions = array![1.0, 1.0];
        assert!(matches!(
            confusion(&data, &predictions),
            Err(Error::UngroupedSample { index: 1 })
        ));
    }

    #[test]
    fn parity_metrics_match_hand_case() {
        // Unprivileged: 2 of 3 predicted positive. Privileged: 2 of 2.
        let table = GroupedConfusion {
            unprivileged: GroupCounts {
                true_positive: 1,
                false_positive: 1,
                true_negative: 1,
                false_negative: 0,
            },
            privileged: GroupCounts {
                true_positive: 1,
                false_positive: 1,
                true_negative: 0,
                false_negative: 0,
            },
        };
        assert_abs_diff_eq!(
            demographic_parity(&table).unwrap(),
            2.0 / 3.0 - 1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(disparate_impact(&table).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        // FPR gap: 1 - 1/2; TPR gap: 1 - 1.
        assert_abs_diff_eq!(
            average_odds_difference(&table).unwrap(),
            0.5 * (1.0 - 0.5),
            epsilon = 1e-12
        );
    }

    #[test]
    fn undefined_cases_are_none_not_nan() {
        // Empty privileged group.
        let empty_priv = GroupedConfusion {
            unprivileged: GroupCounts { true_positive: 1, ..Default::default() },
            privileged: GroupCounts::default(),
        };
        assert_eq!(demographic_parity(&empty_priv), None);
        assert_eq!(disparate_impact(&empty_priv), None);
        assert_eq!(average_odds_difference(&empty_priv), None);

        // Privileged present but never predicted positive.
        let zero_priv_rate = GroupedConfusion {
            unprivileged: GroupCounts { true_positive: 1, ..Default::default() },
            privileged: GroupCounts { true_negative: 2, false_negative: 1, ..Default::default() },
        };
        assert!(demographic_parity(&zero_priv_rate).is_some());
        assert_eq!(disparate_impact(&zero_priv_rate), None);

        // No actual negatives in one group: FPR undefined.
        let no_negatives = GroupedConfusion {
            unprivileged: GroupCounts { true_positive: 2, false_negative: 1, ..Default::default() },
            privileged: GroupCounts {
                true_positive: 1,
                false_positive: 1,
                true_negative: 1,
                false_negative: 1,
            },
        };
        assert_eq!(average_odds_difference(&no_negatives), None);
        assert_eq!(rates(&no_negatives.unprivileged).false_positive_rate, None);
    }

    #[test]
    fn rates_match_count_ratios() {
        let counts = GroupCounts {
            true_positive: 3,
            false_positive: 1,
            true_negative: 4,
            false_negative: 2,
        };
        let r = rates(&counts);
        assert_abs_diff_eq!(r.positive_rate.unwrap(), 4.0 / 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.true_positive_rate.unwrap(), 3.0 / 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.false_positive_rate.unwrap(), 1.0 / 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.true_negative_rate.unwrap(), 4.0 / 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.false_negative_rate.unwrap(), 2.0 / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_model_end_to_end() {
        let data = generate_synthetic(&SyntheticConfig::new(400, 4.0, 5)).unwrap();
        let model = train(&data, &TrainConfig::new(LossKind::Logistic, 1.0)).unwrap();
        let record = evaluate_model(&model, &data, DEFAULT_FAIRNESS_EPSILON).unwrap();
        assert!(record.accuracy > 0.7, "accuracy {}", record.accuracy);
        assert!(record.disparate_impact.is_some());
        assert_eq!(record.fairness_epsilon, 0.2);
        // JSON nulls come from Options, never NaN.
        let json = serde_json::to_string(&record).unwrap();
        assert!(!json.contains("NaN"));
    }

    #[test]
    fn unfair_flag_tracks_threshold() {
        let table = GroupedConfusion {
            unprivileged: GroupCounts {
                true_positive: 1,
                true_negative: 3,
                ..Default::default()
            },
            privileged: GroupCounts { true_positive: 4, ..Default::default() },
        };
        // Disparate impact = (1/4) / 1 = 0.25.
        let di = disparate_impact(&table).unwrap();
        assert_abs_diff_eq!(di, 0.25, epsilon = 1e-12);
        assert!(di < 0.8);
    }

    proptest! {
        /// Random confusion tables: defined metrics stay in range, and the
        /// hand-computed loop tally agrees with the formulas.
        #[test]
        fn metric_ranges_hold(
            tp_u in 0usize..20, fp_u in 0usize..20, tn_u in 0usize..20, fn_u in 0usize..20,
            tp_p in 0usize..20, fp_p in 0usize..20, tn_p in 0usize..20, fn_p in 0usize..20,
        ) {
            let table = GroupedConfusion {
                unprivileged: GroupCounts {
                    true_positive: tp_u, false_positive: fp_u,
                    true_negative: tn_u, false_negative: fn_u,
                },
                privileged: GroupCounts {
                    true_positive: tp_p, false_positive: fp_p,
                    true_negative: tn_p, false_negative: fn_p,
                },
            };
            if let Some(dp) = demographic_parity(&table) {
                prop_assert!((-1.0..=1.0).contains(&dp));
                let expect = (tp_u + fp_u) as f64 / (tp_u + fp_u + tn_u + fn_u) as f64
                    - (tp_p + fp_p) as f64 / (tp_p + fp_p + tn_p + fn_p) as f64;
                prop_assert!((dp - expect).abs() < 1e-12);
            }
            if let Some(di) = disparate_impact(&table) {
                prop_assert!(di >= 0.0 && di.is_finite());
            }
            if let Some(aod) = average_odds_difference(&table) {
                prop_assert!((-1.0..=1.0).contains(&aod));
            }
        }
    }
}

//! Confusion counts, operating-point and sweep AUC, the per-threshold report
//! and the normalized `(d_mean, d_max)` scatter.
//!
//! Anomalous is the positive class throughout.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::normality::ImageScore;
use crate::threshold::{classify, Statistic, ThresholdId, ThresholdSet, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("evaluation needs both classes, got {positives} anomalous and {negatives} normal")]
    SingleClass { positives: usize, negatives: usize },
    #[error("{items} items but {verdicts} verdict rows")]
    LengthMismatch { items: usize, verdicts: usize },
    #[error("unknown label {0:?}, expected normal or anomalous")]
    UnknownLabel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Anomalous,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Anomalous => "anomalous",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Normal => Label::Anomalous,
            Label::Anomalous => Label::Normal,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(Label::Normal),
            "anomalous" => Ok(Label::Anomalous),
            other => Err(EvalError::UnknownLabel(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScore {
    pub score: ImageScore,
    pub label: Label,
    pub source: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl ConfusionCounts {
    pub fn positives(&self) -> usize {
        self.true_pos + self.false_neg
    }

    pub fn negatives(&self) -> usize {
        self.true_neg + self.false_pos
    }

    pub fn record(&mut self, verdict: Verdict, label: Label) {
        match (verdict, label) {
            (Verdict::Anomalous, Label::Anomalous) => self.true_pos += 1,
            (Verdict::Anomalous, Label::Normal) => self.false_pos += 1,
            (Verdict::Normal, Label::Normal) => self.true_neg += 1,
            (Verdict::Normal, Label::Anomalous) => self.false_neg += 1,
        }
    }

    pub fn tpr(&self) -> f64 {
        self.true_pos as f64 / self.positives() as f64
    }

    pub fn fpr(&self) -> f64 {
        self.false_pos as f64 / self.negatives() as f64
    }
}

pub fn confusion<I>(decisions: I) -> ConfusionCounts
where
    I: IntoIterator<Item = (Verdict, Label)>,
{
    let mut c = ConfusionCounts::default();
    for (verdict, label) in decisions {
        c.record(verdict, label);
    }
    c
}

fn require_both(positives: usize, negatives: usize) -> Result<(), EvalError> {
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass {
            positives,
            negatives,
        });
    }
    Ok(())
}

/// Area under the one-point ROC polygon `(0,0) -> (FPR,TPR) -> (1,1)`,
/// i.e. `(TPR + TNR) / 2`.
pub fn operating_point_auc(c: &ConfusionCounts) -> Result<f64, EvalError> {
    require_both(c.positives(), c.negatives())?;
    let tnr = c.true_neg as f64 / c.negatives() as f64;
    Ok((c.tpr() + tnr) / 2.0)
}

/// Threshold-free ROC area: `P(anomalous > normal) + P(tie) / 2` over the
/// chosen statistic, via mid-ranks.
pub fn sweep_auc(items: &[LabeledScore], statistic: Statistic) -> Result<f64, EvalError> {
    let mut scored: Vec<(f64, Label)> = items
        .iter()
        .map(|it| (statistic.of(&it.score), it.label))
        .collect();
    let positives = scored
        .iter()
        .filter(|(_, l)| *l == Label::Anomalous)
        .count();
    let negatives = scored.len() - positives;
    require_both(positives, negatives)?;

    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

    // twice the rank sum of the positives; mid-ranks of tie groups are
    // half-integers, so doubling keeps everything in integers
    let mut rank_sum2: u64 = 0;
    let mut start = 0;
    while start < scored.len() {
        let mut end = start + 1;
        while end < scored.len() && scored[end].0 == scored[start].0 {
            end += 1;
        }
        // 1-based ranks start+1..=end, doubled midrank = start + 1 + end
        let mid2 = (start + 1 + end) as u64;
        let pos_in_group = scored[start..end]
            .iter()
            .filter(|(_, l)| *l == Label::Anomalous)
            .count() as u64;
        rank_sum2 += mid2 * pos_in_group;
        start = end;
    }
    let np = positives as u64;
    let nn = negatives as u64;
    // 2U = 2R - np(np+1)
    let u2 = rank_sum2 - np * (np + 1);
    Ok(u2 as f64 / (2 * np * nn) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub confusion: ConfusionCounts,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    per_threshold: [ThresholdResult; 6],
    pub max_auc: f64,
    pub sweep_auc_max: f64,
    pub sweep_auc_mean: f64,
}

impl EvaluationReport {
    pub fn get(&self, id: ThresholdId) -> &ThresholdResult {
        &self.per_threshold[id.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ThresholdId, &ThresholdResult)> + '_ {
        ThresholdId::ALL
            .into_iter()
            .map(move |id| (id, &self.per_threshold[id.index()]))
    }

    /// Threshold with the highest operating-point AUC; the first wins ties.
    pub fn best(&self) -> ThresholdId {
        let mut best = ThresholdId::Threshold1;
        for (id, r) in self.iter() {
            if r.auc > self.get(best).auc {
                best = id;
            }
        }
        best
    }
}

/// Builds the report from precomputed verdicts, one row of six per item in
/// `threshold1..threshold6` order.
pub fn evaluate_verdicts(
    items: &[LabeledScore],
    verdicts: &[[Verdict; 6]],
) -> Result<EvaluationReport, EvalError> {
    if items.len() != verdicts.len() {
        return Err(EvalError::LengthMismatch {
            items: items.len(),
            verdicts: verdicts.len(),
        });
    }
    let sweep_auc_max = sweep_auc(items, Statistic::Max)?;
    let sweep_auc_mean = sweep_auc(items, Statistic::Mean)?;

    let mut per_threshold = [ThresholdResult {
        confusion: ConfusionCounts::default(),
        auc: 0.0,
    }; 6];
    for id in ThresholdId::ALL {
        let k = id.index();
        let c = confusion(items.iter().zip(verdicts).map(|(it, v)| (v[k], it.label)));
        per_threshold[k] = ThresholdResult {
            confusion: c,
            auc: operating_point_auc(&c)?,
        };
    }
    let max_auc = per_threshold
        .iter()
        .map(|r| r.auc)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EvaluationReport {
        per_threshold,
        max_auc,
        sweep_auc_max,
        sweep_auc_mean,
    })
}

/// Classifies every item under each threshold and assembles the report.
pub fn evaluate_all(
    items: &[LabeledScore],
    thresholds: &ThresholdSet,
) -> Result<EvaluationReport, EvalError> {
    let verdicts: Vec<[Verdict; 6]> = items
        .iter()
        .map(|it| ThresholdId::ALL.map(|id| classify(&it.score, thresholds, id).verdict))
        .collect();
    evaluate_verdicts(items, &verdicts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub source: String,
    pub label: Label,
    pub norm_mean: f64,
    pub norm_max: f64,
}

fn min_max_normalizer(values: impl Iterator<Item = f64> + Clone) -> impl Fn(f64) -> f64 {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    move |v| if range > 0.0 { (v - lo) / range } else { 0.0 }
}

/// Min-max normalizes `d_mean` and `d_max` independently over the item set.
/// An axis with zero range maps to 0.
pub fn scatter_export(items: &[LabeledScore]) -> Vec<ScatterPoint> {
    let norm_mean = min_max_normalizer(items.iter().map(|it| it.score.d_mean));
    let norm_max = min_max_normalizer(items.iter().map(|it| it.score.d_max));
    items
        .iter()
        .map(|it| ScatterPoint {
            source: it.source.clone(),
            label: it.label,
            norm_mean: norm_mean(it.score.d_mean),
            norm_max: norm_max(it.score.d_max),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn item(d_mean: f64, d_max: f64, label: Label) -> LabeledScore {
        LabeledScore {
            score: ImageScore { d_mean, d_max },
            label,
            source: format!("{label}-{d_max}"),
        }
    }

    #[test]
    fn confusion_examples() {
        use Label::*;
        use Verdict as V;
        let all_right = [
            (V::Anomalous, Anomalous),
            (V::Anomalous, Anomalous),
            (V::Anomalous, Anomalous),
            (V::Normal, Normal),
            (V::Normal, Normal),
        ];
        let c = confusion(all_right);
        assert_eq!(
            (c.true_pos, c.false_pos, c.true_neg, c.false_neg),
            (3, 0, 2, 0)
        );
        let c = confusion([(V::Normal, Anomalous), (V::Normal, Normal)]);
        assert_eq!(
            (c.true_pos, c.false_pos, c.true_neg, c.false_neg),
            (0, 0, 1, 1)
        );
    }

    #[test]
    fn operating_point_examples() {
        let perfect = ConfusionCounts {
            true_pos: 4,
            false_pos: 0,
            true_neg: 9,
            false_neg: 0,
        };
        assert_eq!(operating_point_auc(&perfect), Ok(1.0));
        let all_normal = ConfusionCounts {
            true_pos: 0,
            false_pos: 0,
            true_neg: 9,
            false_neg: 4,
        };
        assert_eq!(operating_point_auc(&all_normal), Ok(0.5));
        let all_anom = ConfusionCounts {
            true_pos: 4,
            false_pos: 9,
            true_neg: 0,
            false_neg: 0,
        };
        assert_eq!(operating_point_auc(&all_anom), Ok(0.5));
        // TPR 0.8, FPR 0.2
        let c = ConfusionCounts {
            true_pos: 8,
            false_pos: 2,
            true_neg: 8,
            false_neg: 2,
        };
        assert!((operating_point_auc(&c).unwrap() - 0.8).abs() < 1e-15);
        let none = ConfusionCounts {
            true_pos: 0,
            false_pos: 1,
            true_neg: 1,
            false_neg: 0,
        };
        assert!(matches!(
            operating_point_auc(&none),
            Err(EvalError::SingleClass { .. })
        ));
    }

    #[test]
    fn sweep_examples() {
        let items = vec![
            item(1.0, 1.0, Label::Normal),
            item(2.0, 2.0, Label::Normal),
            item(3.0, 3.0, Label::Anomalous),
            item(4.0, 4.0, Label::Anomalous),
        ];
        assert_eq!(sweep_auc(&items, Statistic::Max), Ok(1.0));
        let ties: Vec<_> = (0..6)
            .map(|i| {
                item(
                    1.0,
                    1.0,
                    if i % 2 == 0 {
                        Label::Normal
                    } else {
                        Label::Anomalous
                    },
                )
            })
            .collect();
        assert_eq!(sweep_auc(&ties, Statistic::Mean), Ok(0.5));
        assert!(sweep_auc(&items[..2], Statistic::Max).is_err());
    }

    #[test]
    fn separated_set_report() {
        let items = vec![
            item(1.0, 2.0, Label::Normal),
            item(1.1, 2.1, Label::Normal),
            item(5.0, 9.0, Label::Anomalous),
        ];
        let t = ThresholdSet::from_values([2.1, 2.0, 2.05, 1.1, 1.0, 1.05]).unwrap();
        let r = evaluate_all(&items, &t).unwrap();
        assert_eq!(r.get(ThresholdId::Threshold1).auc, 1.0);
        assert_eq!(r.get(ThresholdId::Threshold2).auc, 0.75);
        assert_eq!(r.max_auc, 1.0);
        assert_eq!(r.best(), ThresholdId::Threshold1);
        assert_eq!((r.sweep_auc_max, r.sweep_auc_mean), (1.0, 1.0));
    }

    #[test]
    fn verdict_rows_must_match_items() {
        let items = vec![
            item(1.0, 1.0, Label::Normal),
            item(2.0, 2.0, Label::Anomalous),
        ];
        assert_eq!(
            evaluate_verdicts(&items, &[[Verdict::Normal; 6]]),
            Err(EvalError::LengthMismatch {
                items: 2,
                verdicts: 1
            })
        );
    }

    #[test]
    fn scatter_examples() {
        let items = vec![
            item(1.0, 5.0, Label::Normal),
            item(3.0, 7.0, Label::Anomalous),
        ];
        let s = scatter_export(&items);
        assert_eq!((s[0].norm_mean, s[1].norm_mean), (0.0, 1.0));
        assert_eq!((s[0].norm_max, s[1].norm_max), (0.0, 1.0));
        assert_eq!(s[1].label, Label::Anomalous);

        let same = vec![item(2.0, 2.0, Label::Normal); 3];
        assert!(scatter_export(&same)
            .iter()
            .all(|p| p.norm_mean == 0.0 && p.norm_max == 0.0));
    }

    #[test]
    fn label_parsing() {
        assert_eq!("normal".parse(), Ok(Label::Normal));
        assert_eq!("anomalous".parse(), Ok(Label::Anomalous));
        assert!("Normal".parse::<Label>().is_err());
    }
}

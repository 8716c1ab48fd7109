//! The six working-point thresholds and the decision rule.
//!
//! With `D1` the calibration `d_max` vector and `D2` the `d_mean` vector:
//!
//! | id         | statistic | value                  |
//! |------------|-----------|------------------------|
//! | threshold1 | max       | `max(D1)`              |
//! | threshold2 | max       | `max(D1) - std(D1)`    |
//! | threshold3 | max       | `mean(D1) + std(D1)`   |
//! | threshold4 | mean      | `max(D2)`              |
//! | threshold5 | mean      | `max(D2) - std(D2)`    |
//! | threshold6 | mean      | `mean(D2) + std(D2)`   |
//!
//! `std` is the population standard deviation (divide by `N`). Negative
//! values are clamped to zero. An image is anomalous iff its statistic is
//! strictly greater than the threshold.

use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::normality::{CalibrationVectors, ImageScore};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ThresholdError {
    #[error("calibration vectors are empty")]
    EmptyCalibration,
    #[error("unknown threshold identifier {0:?}")]
    UnknownThreshold(alloc::string::String),
    #[error("unknown statistic {0:?}")]
    UnknownStatistic(alloc::string::String),
}

/// Which image statistic a threshold gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    Max,
    Mean,
}

impl Statistic {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Max => "max",
            Statistic::Mean => "mean",
        }
    }

    pub fn of(self, score: &ImageScore) -> f64 {
        match self {
            Statistic::Max => score.d_max,
            Statistic::Mean => score.d_mean,
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Statistic {
    type Err = ThresholdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Statistic::Max),
            "mean" => Ok(Statistic::Mean),
            other => Err(ThresholdError::UnknownStatistic(other.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ThresholdId {
    Threshold1,
    Threshold2,
    Threshold3,
    Threshold4,
    Threshold5,
    Threshold6,
}

impl ThresholdId {
    pub const ALL: [ThresholdId; 6] = [
        ThresholdId::Threshold1,
        ThresholdId::Threshold2,
        ThresholdId::Threshold3,
        ThresholdId::Threshold4,
        ThresholdId::Threshold5,
        ThresholdId::Threshold6,
    ];

    /// Zero-based position in [`ThresholdId::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        [
            "threshold1",
            "threshold2",
            "threshold3",
            "threshold4",
            "threshold5",
            "threshold6",
        ][self.index()]
    }

    pub fn short_name(self) -> &'static str {
        ["t1", "t2", "t3", "t4", "t5", "t6"][self.index()]
    }

    pub fn statistic(self) -> Statistic {
        if self.index() < 3 {
            Statistic::Max
        } else {
            Statistic::Mean
        }
    }
}

impl fmt::Display for ThresholdId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ThresholdId {
    type Err = ThresholdError;

    /// Accepts `threshold3`, `t3` or `3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix("threshold")
            .or_else(|| s.strip_prefix('t'))
            .unwrap_or(s);
        match digits {
            "1" => Ok(ThresholdId::Threshold1),
            "2" => Ok(ThresholdId::Threshold2),
            "3" => Ok(ThresholdId::Threshold3),
            "4" => Ok(ThresholdId::Threshold4),
            "5" => Ok(ThresholdId::Threshold5),
            "6" => Ok(ThresholdId::Threshold6),
            _ => Err(ThresholdError::UnknownThreshold(s.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub value: f64,
    pub statistic: Statistic,
}

/// The six thresholds, indexed by [`ThresholdId`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSet {
    values: [f64; 6],
}

impl ThresholdSet {
    /// Builds a set from raw values in `threshold1..threshold6` order,
    /// e.g. when loading a persisted artifact. Values must be finite and
    /// non-negative.
    pub fn from_values(values: [f64; 6]) -> Option<Self> {
        values
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
            .then_some(Self { values })
    }

    pub fn get(&self, id: ThresholdId) -> Threshold {
        Threshold {
            value: self.values[id.index()],
            statistic: id.statistic(),
        }
    }

    pub fn value(&self, id: ThresholdId) -> f64 {
        self.values[id.index()]
    }

    pub fn values(&self) -> [f64; 6] {
        self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (ThresholdId, Threshold)> + '_ {
        ThresholdId::ALL
            .into_iter()
            .map(move |id| (id, self.get(id)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Normal,
    Anomalous,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Normal => "normal",
            Verdict::Anomalous => "anomalous",
        }
    }

    pub fn is_anomalous(self) -> bool {
        self == Verdict::Anomalous
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub verdict: Verdict,
    pub threshold: ThresholdId,
    pub score_used: f64,
    pub threshold_value: f64,
}

/// Mean and population standard deviation.
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn triple(v: &[f64]) -> [f64; 3] {
    let (mean, std) = mean_std(v);
    let max = max_of(v);
    [max, (max - std).max(0.0), (mean + std).max(0.0)]
}

pub fn compute_thresholds(calib: &CalibrationVectors) -> Result<ThresholdSet, ThresholdError> {
    if calib.is_empty() {
        return Err(ThresholdError::EmptyCalibration);
    }
    let [t1, t2, t3] = triple(calib.d_max());
    let [t4, t5, t6] = triple(calib.d_mean());
    Ok(ThresholdSet {
        values: [t1, t2, t3, t4, t5, t6],
    })
}

pub fn classify(score: &ImageScore, thresholds: &ThresholdSet, which: ThresholdId) -> Decision {
    let Threshold { value, statistic } = thresholds.get(which);
    let score_used = statistic.of(score);
    let verdict = if score_used > value {
        Verdict::Anomalous
    } else {
        Verdict::Normal
    };
    Decision {
        verdict,
        threshold: which,
        score_used,
        threshold_value: value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn calib(d_max: Vec<f64>, d_mean: Vec<f64>) -> CalibrationVectors {
        CalibrationVectors::new(d_max, d_mean).unwrap()
    }

    #[test]
    fn zero_calibration_gives_zero_thresholds() {
        let t = compute_thresholds(&calib(vec![0.0; 3], vec![0.0; 3])).unwrap();
        assert_eq!(t.values(), [0.0; 6]);
    }

    #[test]
    fn one_two_three() {
        let t = compute_thresholds(&calib(vec![1.0, 2.0, 3.0], vec![0.5, 0.5, 0.5])).unwrap();
        let s = 0.816_496_580_927_726;
        assert_eq!(t.value(ThresholdId::Threshold1), 3.0);
        assert!((t.value(ThresholdId::Threshold2) - (3.0 - s)).abs() < 1e-12);
        assert!((t.value(ThresholdId::Threshold3) - (2.0 + s)).abs() < 1e-12);
        assert_eq!(t.value(ThresholdId::Threshold6), 0.5);
    }

    #[test]
    fn constant_calibration_has_no_margin() {
        let c = 1.75;
        let t = compute_thresholds(&calib(vec![c, c], vec![1.0, 1.0])).unwrap();
        for id in [
            ThresholdId::Threshold1,
            ThresholdId::Threshold2,
            ThresholdId::Threshold3,
        ] {
            assert_eq!(t.value(id), c);
        }
    }

    #[test]
    fn empty_calibration_is_an_error() {
        assert_eq!(
            compute_thresholds(&calib(vec![], vec![])),
            Err(ThresholdError::EmptyCalibration)
        );
    }

    #[test]
    fn single_outlier_margin() {
        // population std of [0, 0, 0, 10] is sqrt(18.75)
        let t = triple(&[0.0, 0.0, 0.0, 10.0]);
        assert_eq!(t[1], 10.0 - libm::sqrt(18.75));
        assert_eq!(t[2], 2.5 + libm::sqrt(18.75));
        assert!(ThresholdSet::from_values([-1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn decision_examples() {
        let t = ThresholdSet::from_values([3.0, 2.0, 2.5, 3.5, 3.0, 3.5]).unwrap();
        let d = classify(
            &ImageScore {
                d_mean: 1.0,
                d_max: 2.5,
            },
            &t,
            ThresholdId::Threshold1,
        );
        assert_eq!(d.verdict, Verdict::Normal);
        let d = classify(
            &ImageScore {
                d_mean: 1.0,
                d_max: 3.0,
            },
            &t,
            ThresholdId::Threshold1,
        );
        assert_eq!(d.verdict, Verdict::Normal, "ties are normal");
        let d = classify(
            &ImageScore {
                d_mean: 4.0,
                d_max: 4.0,
            },
            &t,
            ThresholdId::Threshold6,
        );
        assert_eq!(d.verdict, Verdict::Anomalous);
        assert_eq!(d.score_used, 4.0);
        assert_eq!(d.threshold_value, 3.5);
    }

    #[test]
    fn parse_identifiers() {
        assert_eq!("threshold4".parse(), Ok(ThresholdId::Threshold4));
        assert_eq!("t2".parse(), Ok(ThresholdId::Threshold2));
        assert_eq!("6".parse(), Ok(ThresholdId::Threshold6));
        assert!("threshold7".parse::<ThresholdId>().is_err());
        assert!("t".parse::<ThresholdId>().is_err());
        for id in ThresholdId::ALL {
            assert_eq!(id.name().parse(), Ok(id));
        }
        assert_eq!(ThresholdId::Threshold3.statistic(), Statistic::Max);
        assert_eq!(ThresholdId::Threshold4.statistic(), Statistic::Mean);
    }

    fn arb_calib() -> impl Strategy<Value = CalibrationVectors> {
        proptest::collection::vec((0.0f64..50.0, 0.0f64..1.0), 1..40).prop_map(|pairs| {
            let d_max: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let d_mean = pairs.iter().map(|p| p.0 * p.1).collect();
            CalibrationVectors::new(d_max, d_mean).unwrap()
        })
    }

    fn arb_score() -> impl Strategy<Value = ImageScore> {
        (0.0f64..60.0, 0.0f64..1.0).prop_map(|(mx, f)| ImageScore {
            d_mean: mx * f,
            d_max: mx,
        })
    }

    proptest! {
        #[test]
        fn calibration_pool_is_normal_under_max_thresholds(c in arb_calib()) {
            let t = compute_thresholds(&c).unwrap();
            for s in c.scores() {
                prop_assert_eq!(classify(&s, &t, ThresholdId::Threshold1).verdict, Verdict::Normal);
                prop_assert_eq!(classify(&s, &t, ThresholdId::Threshold4).verdict, Verdict::Normal);
            }
        }

        #[test]
        fn dominating_score_stays_anomalous(c in arb_calib(), a in arb_score(), b in arb_score()) {
            let t = compute_thresholds(&c).unwrap();
            let hi = ImageScore { d_mean: a.d_mean.max(b.d_mean), d_max: a.d_max.max(b.d_max) };
            for id in ThresholdId::ALL {
                if classify(&a, &t, id).verdict.is_anomalous() {
                    prop_assert!(classify(&hi, &t, id).verdict.is_anomalous());
                }
            }
        }

        #[test]
        fn verdicts_are_scale_equivariant(c in arb_calib(), s in arb_score(), exp in -8i32..8) {
            // powers of two scale exactly
            let k = libm::pow(2.0, exp as f64);
            let t = compute_thresholds(&c).unwrap();
            let scaled = CalibrationVectors::new(
                c.d_max().iter().map(|v| v * k).collect(),
                c.d_mean().iter().map(|v| v * k).collect(),
            ).unwrap();
            let ts = compute_thresholds(&scaled).unwrap();
            let ss = ImageScore { d_mean: s.d_mean * k, d_max: s.d_max * k };
            for id in ThresholdId::ALL {
                prop_assert_eq!(classify(&s, &t, id).verdict, classify(&ss, &ts, id).verdict);
            }
        }
    }
}

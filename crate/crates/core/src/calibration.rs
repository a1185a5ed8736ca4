//! Expected calibration error over equal-width confidence bins, reliability
//! curves and regime-conditioned ECE.
//!
//! Bins are right-closed: bin `m` (0-based) holds `(m/M, (m+1)/M]`, with a
//! confidence of exactly 0 placed in the first bin and 1.0 in the last.
//! Trials without a confidence are excluded and counted, never imputed.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTrial {
    #[serde(default)]
    pub confidence: Option<f64>,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<String>,
    /// Decision date, used to decide whether the trial is out of sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<NaiveDate>,
}

impl CalibrationTrial {
    pub fn new(confidence: f64, correct: bool) -> Self {
        Self {
            confidence: Some(confidence),
            correct,
            regime: None,
            date: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.confidence {
            Some(c) if !(0.0..=1.0).contains(&c) => Err(Error::validation(
                "calibration trial",
                format!("confidence {c} outside [0, 1]"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub bin_index: usize,
    pub count: usize,
    /// `None` for an empty bin.
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EceResult {
    pub ece: f64,
    pub bins: Vec<BinStats>,
    pub n: usize,
    pub excluded: usize,
}

fn bin_of(confidence: f64, bins: usize) -> usize {
    // tolerance keeps exact edges such as 0.3 * 10 in the lower bin
    let raw = (confidence * bins as f64 - 1e-12).ceil() as i64 - 1;
    raw.clamp(0, bins as i64 - 1) as usize
}

pub fn ece(trials: &[CalibrationTrial], bins: usize) -> Result<EceResult> {
    if bins == 0 {
        return Err(Error::contract("ece: bin count must be >= 1"));
    }
    if trials.is_empty() {
        return Err(Error::contract("ece: no trials"));
    }
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    let mut hits = vec![0usize; bins];
    let mut excluded = 0;
    for t in trials {
        t.validate()?;
        let Some(c) = t.confidence else {
            excluded += 1;
            continue;
        };
        let m = bin_of(c, bins);
        count[m] += 1;
        conf_sum[m] += c;
        hits[m] += t.correct as usize;
    }
    let n: usize = count.iter().sum();
    if n == 0 {
        return Err(Error::contract(format!(
            "ece: all {excluded} trials lack a confidence"
        )));
    }
    let mut total = 0.0;
    let stats = (0..bins)
        .map(|m| {
            if count[m] == 0 {
                return BinStats {
                    bin_index: m,
                    count: 0,
                    mean_confidence: None,
                    accuracy: None,
                };
            }
            let conf = conf_sum[m] / count[m] as f64;
            let acc = hits[m] as f64 / count[m] as f64;
            total += count[m] as f64 / n as f64 * (acc - conf).abs();
            BinStats {
                bin_index: m,
                count: count[m],
                mean_confidence: Some(conf),
                accuracy: Some(acc),
            }
        })
        .collect();
    Ok(EceResult {
        ece: total,
        bins: stats,
        n,
        excluded,
    })
}

/// `(mean confidence, accuracy)` of each occupied bin, by bin index.
pub fn reliability_curve(trials: &[CalibrationTrial], bins: usize) -> Result<Vec<(f64, f64)>> {
    Ok(ece(trials, bins)?
        .bins
        .into_iter()
        .filter_map(|b| b.mean_confidence.zip(b.accuracy))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeEce {
    pub ece: f64,
    pub n: usize,
    /// Fewer trials than bins.
    pub low_sample: bool,
}

pub fn regime_conditioned_ece(
    trials: &[CalibrationTrial],
    bins: usize,
    exec: Exec,
) -> Result<BTreeMap<String, RegimeEce>> {
    let mut groups: BTreeMap<&str, Vec<CalibrationTrial>> = BTreeMap::new();
    for t in trials {
        let regime = t
            .regime
            .as_deref()
            .ok_or_else(|| Error::contract("regime_conditioned_ece: trial without regime label"))?;
        groups.entry(regime).or_default().push(t.clone());
    }
    let parts: Vec<(&str, Vec<CalibrationTrial>)> = groups.into_iter().collect();
    let results = exec.map(&parts, |(_, ts)| ece(ts, bins));
    parts
        .iter()
        .zip(results)
        .map(|((name, _), r)| {
            let r = r?;
            Ok((
                name.to_string(),
                RegimeEce {
                    ece: r.ece,
                    n: r.n,
                    low_sample: r.n < bins,
                },
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trials(conf: &[f64], correct: &[bool]) -> Vec<CalibrationTrial> {
        conf.iter()
            .zip(correct)
            .map(|(&c, &k)| CalibrationTrial::new(c, k))
            .collect()
    }

    fn with_regime(mut ts: Vec<CalibrationTrial>, r: &str) -> Vec<CalibrationTrial> {
        for t in &mut ts {
            t.regime = Some(r.into());
        }
        ts
    }

    #[test]
    fn hand_case() {
        let ts = trials(&[0.9, 0.9, 0.6, 0.6], &[true, false, true, true]);
        let r = ece(&ts, 4).unwrap();
        assert!((r.ece - 0.4).abs() < 1e-9);
        let curve = reliability_curve(&ts, 4).unwrap();
        assert_eq!(curve.len(), 2);
        assert!((curve[0].0 - 0.6).abs() < 1e-12 && curve[0].1 == 1.0);
        assert!((curve[1].0 - 0.9).abs() < 1e-12 && curve[1].1 == 0.5);
    }

    #[test]
    fn perfect_and_worst() {
        // bin (0.7, 0.8]: 4 trials at 0.75, 3 correct; bin (0.4, 0.5]: 0.5, 1 of 2
        let ts = trials(
            &[0.75, 0.75, 0.75, 0.75, 0.5, 0.5],
            &[true, true, true, false, true, false],
        );
        assert!(ece(&ts, 10).unwrap().ece.abs() < 1e-12);
        for (c, a) in reliability_curve(&ts, 10).unwrap() {
            assert!((c - a).abs() < 1e-12);
        }
        let ts = trials(&[1.0; 5], &[false; 5]);
        assert_eq!(ece(&ts, 10).unwrap().ece, 1.0);
        assert_eq!(ece(&ts, 10).unwrap().bins[9].count, 5);
    }

    #[test]
    fn single_bin_single_point() {
        let ts = trials(&[0.55, 0.58], &[true, false]);
        assert_eq!(reliability_curve(&ts, 10).unwrap().len(), 1);
    }

    #[test]
    fn edges_and_exclusions() {
        assert_eq!(bin_of(0.0, 10), 0);
        assert_eq!(bin_of(0.3, 10), 2);
        assert_eq!(bin_of(0.30001, 10), 3);
        assert_eq!(bin_of(1.0, 10), 9);
        let mut ts = trials(&[0.9], &[true]);
        ts.push(CalibrationTrial {
            confidence: None,
            correct: false,
            regime: None,
            date: None,
        });
        let r = ece(&ts, 10).unwrap();
        assert_eq!((r.n, r.excluded), (1, 1));
        assert!(ece(&[], 10).is_err());
        assert!(ece(&ts, 0).is_err());
    }

    #[test]
    fn regimes() {
        let good = with_regime(trials(&[0.5, 0.5], &[true, false]), "bull");
        let bad = with_regime(trials(&[1.0, 1.0], &[false, false]), "bear");
        let all: Vec<_> = good.iter().chain(&bad).cloned().collect();
        let r = regime_conditioned_ece(&all, 10, Exec::default()).unwrap();
        assert!(r["bull"].ece.abs() < 1e-12);
        assert_eq!(r["bear"].ece, 1.0);
        assert!(r["bull"].low_sample);

        let one = regime_conditioned_ece(&good, 10, Exec::Sequential).unwrap();
        assert_eq!(one["bull"].ece, ece(&good, 10).unwrap().ece);

        let unlabeled = trials(&[0.5], &[true]);
        assert!(regime_conditioned_ece(&unlabeled, 10, Exec::Sequential).is_err());
    }

    #[test]
    fn pooled_ece_is_not_weighted_mean_of_regimes() {
        // 10 trials, two regimes of 5; both sides enumerated by hand with M = 2
        // regime a: conf 0.9 x5, correct 5 -> gap 0.1
        // regime b: conf 0.9 x5, correct 0 -> gap 0.9
        // weighted mean = 0.5; pooled: one bin, acc 0.5, conf 0.9 -> 0.4
        let a = with_regime(trials(&[0.9; 5], &[true; 5]), "a");
        let b = with_regime(trials(&[0.9; 5], &[false; 5]), "b");
        let all: Vec<_> = a.into_iter().chain(b).collect();
        let per = regime_conditioned_ece(&all, 2, Exec::Sequential).unwrap();
        let weighted = 0.5 * per["a"].ece + 0.5 * per["b"].ece;
        let pooled = ece(&all, 2).unwrap().ece;
        assert!((weighted - 0.5).abs() < 1e-12);
        assert!((pooled - 0.4).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ece_bounded_and_order_free(
            pairs in proptest::collection::vec((0.0f64..=1.0, any::<bool>()), 1..60),
            bins in 1usize..20,
            seed in any::<u64>(),
        ) {
            let ts: Vec<_> = pairs.iter().map(|&(c, k)| CalibrationTrial::new(c, k)).collect();
            let e = ece(&ts, bins).unwrap().ece;
            prop_assert!((0.0..=1.0 + 1e-12).contains(&e));
            let mut shuffled = ts.clone();
            let len = shuffled.len();
            shuffled.rotate_left((seed as usize) % len);
            shuffled.reverse();
            prop_assert!((ece(&shuffled, bins).unwrap().ece - e).abs() < 1e-12);
        }

        #[test]
        fn single_bin_is_accuracy_gap(pairs in proptest::collection::vec((0.0f64..=1.0, any::<bool>()), 1..60)) {
            let ts: Vec<_> = pairs.iter().map(|&(c, k)| CalibrationTrial::new(c, k)).collect();
            let n = ts.len() as f64;
            let acc = pairs.iter().filter(|p| p.1).count() as f64 / n;
            let conf = pairs.iter().map(|p| p.0).sum::<f64>() / n;
            prop_assert!((ece(&ts, 1).unwrap().ece - (acc - conf).abs()).abs() < 1e-12);
        }
    }
}

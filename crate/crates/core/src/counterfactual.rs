//! Counter-evidence diagnostics: view-flip rate at a given evidence strength,
//! the three-axis monotonicity verdict, and sector bias scores.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datamodel::{CounterfactualTrial, View};
use crate::error::{Error, Result};
use crate::par::Exec;

/// Tolerance for matching ρ values and for monotonicity comparisons.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AxisStatistics {
    pub flip: Vec<(f64, f64)>,
    /// Signed mean of `confidence_before - confidence_after`.
    pub confidence: Vec<(f64, f64)>,
    /// Mean of `|position_before| - |position_after|`.
    pub position: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityVerdict {
    pub flip_axis_monotone: bool,
    pub confidence_axis_monotone: bool,
    pub position_axis_monotone: bool,
    /// No axis responds monotonically to counter-evidence.
    pub locked: bool,
    pub axis_statistics: AxisStatistics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasScore {
    pub sector: String,
    pub pi_s: f64,
}

fn same_rho(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOLERANCE
}

fn available(trials: &[CounterfactualTrial]) -> String {
    let mut rhos: Vec<f64> = Vec::new();
    for t in trials {
        if !rhos.iter().any(|&r| same_rho(r, t.rho)) {
            rhos.push(t.rho);
        }
    }
    rhos.sort_by(f64::total_cmp);
    let names: Vec<String> = rhos.iter().map(|r| r.to_string()).collect();
    format!("[{}]", names.join(", "))
}

pub fn flip_rate(trials: &[CounterfactualTrial], rho: f64) -> Result<f64> {
    let (mut n, mut flips) = (0usize, 0usize);
    for t in trials.iter().filter(|t| same_rho(t.rho, rho)) {
        n += 1;
        flips += (t.updated_view != t.baseline_view) as usize;
    }
    if n == 0 {
        return Err(Error::contract(format!(
            "no counterfactual trials at rho {rho}; available: {}",
            available(trials)
        )));
    }
    Ok(flips as f64 / n as f64)
}

/// Groups trials by ρ in ascending order. With a declared grid every trial
/// must sit on a grid point and every grid point needs a trial; without one
/// the distinct trial strengths form the grid.
pub fn group_by_rho<'a>(
    trials: &'a [CounterfactualTrial],
    grid: Option<&[f64]>,
) -> Result<Vec<(f64, Vec<&'a CounterfactualTrial>)>> {
    let mut points: Vec<f64> = match grid {
        Some(g) => g.to_vec(),
        None => trials.iter().map(|t| t.rho).collect(),
    };
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| same_rho(*a, *b));

    let mut groups: Vec<(f64, Vec<&CounterfactualTrial>)> =
        points.iter().map(|&r| (r, Vec::new())).collect();
    for t in trials {
        match groups.iter_mut().find(|(r, _)| same_rho(*r, t.rho)) {
            Some((_, g)) => g.push(t),
            None => {
                return Err(Error::contract(format!(
                    "trial {} at rho {} is not on the declared grid",
                    t.trial_id, t.rho
                )))
            }
        }
    }
    if let Some((r, _)) = groups.iter().find(|(_, g)| g.is_empty()) {
        return Err(Error::contract(format!(
            "no counterfactual trials at rho {r}; available: {}",
            available(trials)
        )));
    }
    Ok(groups)
}

/// Nondecreasing with at least one strict step.
fn monotone(points: &[(f64, f64)], grid_len: usize) -> bool {
    if points.len() < grid_len || points.len() < 2 {
        return false;
    }
    let steps = points.windows(2).map(|w| w[1].1 - w[0].1);
    let mut strict = false;
    for d in steps {
        if d < -TOLERANCE {
            return false;
        }
        strict |= d > TOLERANCE;
    }
    strict
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, s) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| s / n as f64)
}

pub fn monotonicity_verdict(
    trials: &[CounterfactualTrial],
    grid: Option<&[f64]>,
) -> Result<MonotonicityVerdict> {
    monotonicity_verdict_with(trials, grid, Exec::default())
}

pub fn monotonicity_verdict_with(
    trials: &[CounterfactualTrial],
    grid: Option<&[f64]>,
    exec: Exec,
) -> Result<MonotonicityVerdict> {
    for t in trials {
        t.validate()?;
    }
    let groups = group_by_rho(trials, grid)?;
    if groups.len() < 3 {
        return Err(Error::Undefined(format!(
            "monotonicity needs at least 3 distinct rho values, got {}",
            groups.len()
        )));
    }
    // (flip, confidence shift, position shift) per group; the last two are
    // `None` when no trial in the group records them
    let responses = exec.map(&groups, |(_, g)| {
        let flips = g
            .iter()
            .filter(|t| t.updated_view != t.baseline_view)
            .count();
        let conf = mean(
            g.iter()
                .filter_map(|t| Some(t.confidence_before? - t.confidence_after?)),
        );
        let pos = mean(
            g.iter()
                .filter_map(|t| Some(t.position_before?.abs() - t.position_after?.abs())),
        );
        (flips as f64 / g.len() as f64, conf, pos)
    });

    let mut stats = AxisStatistics::default();
    for ((rho, _), (f, c, p)) in groups.iter().zip(&responses) {
        stats.flip.push((*rho, *f));
        if let Some(c) = c {
            stats.confidence.push((*rho, *c));
        }
        if let Some(p) = p {
            stats.position.push((*rho, *p));
        }
    }
    let n = groups.len();
    let flip = monotone(&stats.flip, n);
    let conf = monotone(&stats.confidence, n);
    let pos = monotone(&stats.position, n);
    Ok(MonotonicityVerdict {
        flip_axis_monotone: flip,
        confidence_axis_monotone: conf,
        position_axis_monotone: pos,
        locked: !(flip || conf || pos),
        axis_statistics: stats,
    })
}

/// `(long - short) / total` over the recommendations for `sector`; neutral
/// views count toward the total.
pub fn bias_score(recommendations: &[(String, View)], sector: &str) -> Result<BiasScore> {
    let (mut long, mut short, mut total) = (0i64, 0i64, 0i64);
    for (_, v) in recommendations.iter().filter(|(s, _)| s == sector) {
        total += 1;
        match v {
            View::Long => long += 1,
            View::Short => short += 1,
            View::Neutral => {}
        }
    }
    if total == 0 {
        return Err(Error::contract(format!(
            "no recommendations for sector {sector}"
        )));
    }
    Ok(BiasScore {
        sector: sector.to_string(),
        pi_s: (long - short) as f64 / total as f64,
    })
}

/// Bias score per sector from the baseline views of sector-tagged trials.
pub fn bias_scores_from_trials(trials: &[CounterfactualTrial]) -> BTreeMap<String, BiasScore> {
    let recs: Vec<(String, View)> = trials
        .iter()
        .filter_map(|t| Some((t.sector.clone()?, t.baseline_view)))
        .collect();
    let mut sectors: Vec<&str> = recs.iter().map(|(s, _)| s.as_str()).collect();
    sectors.sort_unstable();
    sectors.dedup();
    sectors
        .into_iter()
        .map(|s| {
            (
                s.to_string(),
                bias_score(&recs, s).expect("sector has recommendations"),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trial(rho: f64, flip: bool) -> CounterfactualTrial {
        CounterfactualTrial {
            trial_id: format!("t{rho}"),
            rho,
            baseline_view: View::Long,
            updated_view: if flip { View::Short } else { View::Long },
            confidence_before: None,
            confidence_after: None,
            position_before: None,
            position_after: None,
            sector: None,
            intensity: None,
        }
    }

    fn at(rho: f64, flips: usize, n: usize) -> Vec<CounterfactualTrial> {
        (0..n).map(|i| trial(rho, i < flips)).collect()
    }

    #[test]
    fn flip_counts() {
        assert_eq!(flip_rate(&at(1.0, 4, 4), 1.0).unwrap(), 1.0);
        assert_eq!(flip_rate(&at(0.6, 3, 5), 0.6).unwrap(), 0.6);
        let err = flip_rate(&at(0.6, 3, 5), 0.75).unwrap_err().to_string();
        assert!(err.contains("0.6"), "{err}");
    }

    #[test]
    fn locked_and_unlocked() {
        let flat: Vec<_> = [0.6, 0.75, 1.0].iter().flat_map(|&r| at(r, 1, 4)).collect();
        assert!(monotonicity_verdict(&flat, None).unwrap().locked);

        let rising: Vec<_> = [(0.6, 1), (0.75, 2), (1.0, 4)]
            .iter()
            .flat_map(|&(r, k)| at(r, k, 4))
            .collect();
        let v = monotonicity_verdict(&rising, None).unwrap();
        assert!(v.flip_axis_monotone && !v.locked);
        assert_eq!(v.axis_statistics.flip[2], (1.0, 1.0));
    }

    #[test]
    fn confidence_axis_alone_unlocks() {
        let mut ts: Vec<_> = [0.6, 0.75, 1.0].iter().flat_map(|&r| at(r, 0, 2)).collect();
        for t in &mut ts {
            t.confidence_before = Some(0.9);
            t.confidence_after = Some(0.9 - t.rho / 2.0);
        }
        let v = monotonicity_verdict(&ts, None).unwrap();
        assert!(!v.flip_axis_monotone && v.confidence_axis_monotone && !v.locked);
        assert!(!v.position_axis_monotone);
    }

    #[test]
    fn grid_rules() {
        let ts: Vec<_> = [0.6, 1.0].iter().flat_map(|&r| at(r, 1, 2)).collect();
        assert!(matches!(
            monotonicity_verdict(&ts, None),
            Err(Error::Undefined(_))
        ));
        assert!(monotonicity_verdict(&ts, Some(&[0.6, 0.75, 1.0])).is_err());
        assert!(monotonicity_verdict(&ts, Some(&[0.6])).is_err());
    }

    #[test]
    fn bias() {
        let recs = |vs: &[View]| -> Vec<(String, View)> {
            vs.iter().map(|&v| ("tech".to_string(), v)).collect()
        };
        assert_eq!(
            bias_score(&recs(&[View::Long; 3]), "tech").unwrap().pi_s,
            1.0
        );
        assert_eq!(
            bias_score(&recs(&[View::Long, View::Short]), "tech")
                .unwrap()
                .pi_s,
            0.0
        );
        assert!(bias_score(&recs(&[View::Long]), "energy").is_err());

        let mut ts = at(0.6, 0, 2);
        ts[0].sector = Some("tech".into());
        let scores = bias_scores_from_trials(&ts);
        assert_eq!(scores.len(), 1);
        assert_eq!(scores["tech"].pi_s, 1.0);
    }

    fn views() -> impl Strategy<Value = View> {
        prop_oneof![Just(View::Long), Just(View::Short), Just(View::Neutral)]
    }

    fn negate(v: View) -> View {
        match v {
            View::Long => View::Short,
            View::Short => View::Long,
            View::Neutral => View::Neutral,
        }
    }

    proptest! {
        #[test]
        fn flip_rate_bounded_and_order_free(
            pairs in proptest::collection::vec((views(), views()), 1..40),
            seed in any::<usize>(),
        ) {
            let ts: Vec<_> = pairs.iter().map(|&(a, b)| CounterfactualTrial {
                baseline_view: a,
                updated_view: b,
                ..trial(0.5, false)
            }).collect();
            let r = flip_rate(&ts, 0.5).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            let mut shuffled = ts.clone();
            let len = shuffled.len();
            shuffled.rotate_left(seed % len);
            prop_assert_eq!(flip_rate(&shuffled, 0.5).unwrap(), r);
        }

        #[test]
        fn verdict_ignores_within_rho_order(
            flips in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 1..6), 3..5),
        ) {
            let ts: Vec<_> = flips.iter().enumerate()
                .flat_map(|(i, fs)| fs.iter().map(move |&f| trial(0.2 * i as f64, f)))
                .collect();
            let mut rev = ts.clone();
            rev.reverse();
            prop_assert_eq!(
                monotonicity_verdict(&ts, None).unwrap(),
                monotonicity_verdict(&rev, None).unwrap()
            );
        }

        #[test]
        fn bias_antisymmetric(vs in proptest::collection::vec(views(), 1..30)) {
            let recs: Vec<_> = vs.iter().map(|&v| ("s".to_string(), v)).collect();
            let neg: Vec<_> = vs.iter().map(|&v| ("s".to_string(), negate(v))).collect();
            let a = bias_score(&recs, "s").unwrap().pi_s;
            prop_assert!((-1.0..=1.0).contains(&a));
            prop_assert_eq!(bias_score(&neg, "s").unwrap().pi_s, -a);
        }
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::agreement::ErrorCategory;
use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959964;

/// Wilson score interval for `successes / n`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> Option<(f64, f64)> {
    if n == 0 {
        return None;
    }
    let (all, none) = (successes == n, successes == 0);
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    let lo = if none { 0.0 } else { (centre - half).max(0.0) };
    let hi = if all { 1.0 } else { (centre + half).min(1.0) };
    Some((lo, hi))
}

/// Win fraction within each quantile bin of an auxiliary score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRate {
    pub bin: usize,
    pub count: usize,
    pub wins: usize,
    pub rate: Option<f64>,
}

pub fn win_rate_by_quantile(items: &[(f64, bool)], n_bins: usize) -> Result<Vec<BinRate>> {
    if n_bins == 0 {
        return Err(Error::Validation("n_bins must be positive".into()));
    }
    let mut sorted = items.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    let mut bins: Vec<BinRate> = (0..n_bins)
        .map(|bin| BinRate { bin, count: 0, wins: 0, rate: None })
        .collect();
    for (rank, (_, won)) in sorted.iter().enumerate() {
        let b = &mut bins[rank * n_bins / n.max(1)];
        b.count += 1;
        b.wins += *won as usize;
    }
    for b in &mut bins {
        b.rate = (b.count > 0).then(|| b.wins as f64 / b.count as f64);
    }
    Ok(bins)
}

/// How a system's description fared against the reference for one item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreferenceOutcome {
    /// Removed before rating because it matched the reference exactly.
    Identical,
    Preferred,
    NotPreferred,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedItem {
    pub entity_id: String,
    pub system: String,
    pub outcome: PreferenceOutcome,
    /// Coded category for a non-preferred item, if it was in the coded sample.
    pub label: Option<ErrorCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub system: String,
    pub items: usize,
    pub identical: f64,
    pub preferred: f64,
    pub not_preferred: f64,
    /// Category shares of all items, extrapolated from the coded subset of
    /// non-preferred items.
    pub categories: BTreeMap<ErrorCategory, f64>,
    pub good_enough: f64,
    /// `identical + preferred + good_enough`.
    pub high_quality: f64,
    pub coded: usize,
}

/// Per-system outcome shares and the error-category breakdown.
pub fn error_distribution_report(items: &[EvaluatedItem]) -> Vec<ErrorProfile> {
    let mut by_system: BTreeMap<&str, Vec<&EvaluatedItem>> = BTreeMap::new();
    for it in items {
        by_system.entry(it.system.as_str()).or_default().push(it);
    }
    by_system
        .into_iter()
        .map(|(system, its)| {
            let n = its.len() as f64;
            let share = |o: PreferenceOutcome| its.iter().filter(|i| i.outcome == o).count() as f64 / n;
            let not_preferred = share(PreferenceOutcome::NotPreferred);
            let coded: Vec<ErrorCategory> = its
                .iter()
                .filter(|i| i.outcome == PreferenceOutcome::NotPreferred)
                .filter_map(|i| i.label)
                .collect();
            let categories: BTreeMap<ErrorCategory, f64> = ErrorCategory::ALL
                .iter()
                .map(|&c| {
                    let frac = if coded.is_empty() {
                        0.0
                    } else {
                        coded.iter().filter(|&&x| x == c).count() as f64 / coded.len() as f64
                    };
                    (c, frac * not_preferred)
                })
                .collect();
            let identical = share(PreferenceOutcome::Identical);
            let preferred = share(PreferenceOutcome::Preferred);
            let good_enough = categories[&ErrorCategory::GoodEnough];
            ErrorProfile {
                system: system.to_string(),
                items: its.len(),
                identical,
                preferred,
                not_preferred,
                good_enough,
                high_quality: identical + preferred + good_enough,
                categories,
                coded: coded.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_closed_form() {
        let (lo, hi) = wilson_interval(50, 100, Z95).unwrap();
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
        assert_eq!(wilson_interval(0, 0, Z95), None);
    }

    #[test]
    fn all_identical() {
        let items: Vec<EvaluatedItem> = (0..5)
            .map(|i| EvaluatedItem {
                entity_id: i.to_string(),
                system: "m".into(),
                outcome: PreferenceOutcome::Identical,
                label: None,
            })
            .collect();
        let r = error_distribution_report(&items);
        assert_eq!(r[0].identical, 1.0);
        assert_eq!(r[0].high_quality, 1.0);
    }

    #[test]
    fn hand_built_profile() {
        use ErrorCategory::*;
        use PreferenceOutcome::*;
        // 10 items: 2 identical, 4 preferred, 4 not preferred coded 2 good, 1 vague, 1 long
        let spec = [
            (Identical, None),
            (Identical, None),
            (Preferred, None),
            (Preferred, None),
            (Preferred, None),
            (Preferred, None),
            (NotPreferred, Some(GoodEnough)),
            (NotPreferred, Some(GoodEnough)),
            (NotPreferred, Some(TooVague)),
            (NotPreferred, Some(TooLong)),
        ];
        let items: Vec<EvaluatedItem> = spec
            .iter()
            .enumerate()
            .map(|(i, &(outcome, label))| EvaluatedItem {
                entity_id: i.to_string(),
                system: "m".into(),
                outcome,
                label,
            })
            .collect();
        let r = &error_distribution_report(&items)[0];
        assert!((r.identical - 0.2).abs() < 1e-12);
        assert!((r.preferred - 0.4).abs() < 1e-12);
        assert!((r.good_enough - 0.2).abs() < 1e-12);
        assert!((r.categories[&TooVague] - 0.1).abs() < 1e-12);
        assert!((r.high_quality - 0.8).abs() < 1e-12);
    }

    #[test]
    fn quantile_win_rates() {
        let items: Vec<(f64, bool)> = (0..20).map(|i| (i as f64, i >= 10)).collect();
        let bins = win_rate_by_quantile(&items, 2).unwrap();
        assert_eq!(bins[0].rate, Some(0.0));
        assert_eq!(bins[1].rate, Some(1.0));
    }
}

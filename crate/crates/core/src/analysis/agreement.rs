use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fleiss' κ for an item × category count table with `raters` ratings per item.
/// `None` when chance agreement is 1 and κ is undefined.
pub fn fleiss_kappa(table: &[Vec<usize>], raters: usize) -> Result<Option<f64>> {
    if table.is_empty() {
        return Err(Error::Validation("no items".into()));
    }
    if raters < 2 {
        return Err(Error::Validation("need at least two raters per item".into()));
    }
    let k = table[0].len();
    for (i, row) in table.iter().enumerate() {
        if row.len() != k {
            return Err(Error::Shape(format!("item {i} has {} categories, expected {k}", row.len())));
        }
        let total: usize = row.iter().sum();
        if total != raters {
            return Err(Error::Validation(format!("item {i} has {total} ratings, expected {raters}")));
        }
    }
    let n_items = table.len() as f64;
    let n = raters as f64;
    let p_bar = table
        .iter()
        .map(|row| row.iter().map(|&c| (c * c) as f64).sum::<f64>() - n)
        .sum::<f64>()
        / (n_items * n * (n - 1.0));
    let p_e: f64 = (0..k)
        .map(|j| {
            let pj = table.iter().map(|r| r[j]).sum::<usize>() as f64 / (n_items * n);
            pj * pj
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(None);
    }
    Ok(Some((p_bar - p_e) / (1.0 - p_e)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    GoodEnough,
    TooVague,
    FactualError,
    FormattingError,
    MisFocused,
    TooLong,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 6] = [
        ErrorCategory::GoodEnough,
        ErrorCategory::TooVague,
        ErrorCategory::FactualError,
        ErrorCategory::FormattingError,
        ErrorCategory::MisFocused,
        ErrorCategory::TooLong,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorLabel {
    pub entity_id: String,
    pub category: ErrorCategory,
    pub annotator: String,
    pub round: u32,
}

/// κ at or below which another coding round is needed.
pub const CODING_STOP_KAPPA: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub entity_id: String,
    pub labels: BTreeMap<String, ErrorCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingRound {
    /// Mean pairwise κ over annotator pairs; `None` if undefined for every pair.
    pub kappa: Option<f64>,
    pub disagreements: Vec<Disagreement>,
    pub stop: bool,
}

/// Agreement for one round of error coding. Each annotator's labels must
/// cover the same items, one label per item.
pub fn coding_round(annotators: &[Vec<ErrorLabel>]) -> Result<CodingRound> {
    if annotators.len() < 2 {
        return Err(Error::Validation("coding needs at least two annotators".into()));
    }
    let maps: Vec<BTreeMap<&str, ErrorCategory>> = annotators
        .iter()
        .map(|labels| {
            let mut m = BTreeMap::new();
            for l in labels {
                if m.insert(l.entity_id.as_str(), l.category).is_some() {
                    return Err(Error::Validation(format!("item {} labeled twice", l.entity_id)));
                }
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let items: Vec<&str> = maps[0].keys().copied().collect();
    for (a, m) in maps.iter().enumerate().skip(1) {
        if m.keys().copied().collect::<Vec<_>>() != items {
            return Err(Error::Validation(format!("annotator {a} covers different items")));
        }
    }
    let names: Vec<String> = annotators
        .iter()
        .enumerate()
        .map(|(i, l)| l.first().map_or(format!("annotator{i}"), |x| x.annotator.clone()))
        .collect();

    let mut kappas = Vec::new();
    for a in 0..maps.len() {
        for b in a + 1..maps.len() {
            let table: Vec<Vec<usize>> = items
                .iter()
                .map(|id| {
                    let mut row = vec![0; ErrorCategory::ALL.len()];
                    row[maps[a][id].index()] += 1;
                    row[maps[b][id].index()] += 1;
                    row
                })
                .collect();
            if let Some(k) = fleiss_kappa(&table, 2)? {
                kappas.push(k);
            }
        }
    }
    let kappa = (!kappas.is_empty()).then(|| kappas.iter().sum::<f64>() / kappas.len() as f64);
    let disagreements = items
        .iter()
        .filter(|id| maps.iter().any(|m| m[*id] != maps[0][*id]))
        .map(|id| Disagreement {
            entity_id: id.to_string(),
            labels: names.iter().cloned().zip(maps.iter().map(|m| m[id])).collect(),
        })
        .collect();
    Ok(CodingRound {
        stop: kappa.is_some_and(|k| k > CODING_STOP_KAPPA),
        kappa,
        disagreements,
    })
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MM_TOLERANCE: f64 = 1e-10;
const MM_MAX_ITER: usize = 1_000_000;

/// Pairwise outcome counts between systems over shared test instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeMatrix {
    pub systems: Vec<String>,
    /// `wins[i][j]`: instances where system `i` strictly beats `j`.
    pub wins: Vec<Vec<u64>>,
    pub ties: Vec<Vec<u64>>,
}

impl OutcomeMatrix {
    pub fn new(systems: Vec<String>) -> Self {
        let k = systems.len();
        OutcomeMatrix {
            systems,
            wins: vec![vec![0; k]; k],
            ties: vec![vec![0; k]; k],
        }
    }

    /// Count strict wins and ties per pair over instances scored by both systems.
    pub fn from_scores<I: Ord>(systems: Vec<String>, scores: &BTreeMap<I, BTreeMap<String, f64>>) -> Self {
        let mut m = OutcomeMatrix::new(systems);
        for per_system in scores.values() {
            for i in 0..m.systems.len() {
                for j in i + 1..m.systems.len() {
                    let (Some(a), Some(b)) = (per_system.get(&m.systems[i]), per_system.get(&m.systems[j])) else {
                        continue;
                    };
                    m.record(i, j, a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                }
            }
        }
        m
    }

    /// Record one comparison of system `i` against `j`.
    pub fn record(&mut self, i: usize, j: usize, outcome: std::cmp::Ordering) {
        match outcome {
            std::cmp::Ordering::Greater => self.wins[i][j] += 1,
            std::cmp::Ordering::Less => self.wins[j][i] += 1,
            std::cmp::Ordering::Equal => {
                self.ties[i][j] += 1;
                self.ties[j][i] += 1;
            }
        }
    }

    pub fn index(&self, system: &str) -> Option<usize> {
        self.systems.iter().position(|s| s == system)
    }

    pub fn shared(&self, i: usize, j: usize) -> u64 {
        self.wins[i][j] + self.wins[j][i] + self.ties[i][j]
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&raw)?)
    }
}

/// Latent strengths; the first system is fixed to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtScores {
    pub systems: Vec<String>,
    pub scores: Vec<f64>,
    pub iterations: usize,
}

impl BtScores {
    /// `s_i / (s_i + s_j)`. The pair is evaluated once in index order so
    /// that `P(i, j) + P(j, i) == 1` holds exactly.
    pub fn probability(&self, i: usize, j: usize) -> f64 {
        if i > j {
            return 1.0 - self.probability(j, i);
        }
        self.scores[i] / (self.scores[i] + self.scores[j])
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let k = self.scores.len();
        (0..k)
            .map(|i| (0..k).map(|j| if i == j { 0.5 } else { self.probability(i, j) }).collect())
            .collect()
    }
}

fn effective_wins(w: &OutcomeMatrix) -> Vec<Vec<f64>> {
    let k = w.systems.len();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| if i == j { 0.0 } else { w.wins[i][j] as f64 + 0.5 * w.ties[i][j] as f64 })
                .collect()
        })
        .collect()
}

/// Systems that cannot reach every other system along directed win edges.
fn unreachable_systems(w: &[Vec<f64>]) -> Vec<usize> {
    let k = w.len();
    let reach = |from: usize, forward: bool| {
        let mut seen = vec![false; k];
        seen[from] = true;
        let mut stack = vec![from];
        while let Some(i) = stack.pop() {
            for j in 0..k {
                let edge = if forward { w[i][j] } else { w[j][i] };
                if edge > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    let fwd = reach(0, true);
    let bwd = reach(0, false);
    (0..k).filter(|&i| !(fwd[i] && bwd[i])).collect()
}

/// Maximum-likelihood strengths by minorization–maximization. Ties count
/// half a win for each side.
pub fn fit_bradley_terry(w: &OutcomeMatrix) -> Result<BtScores> {
    let k = w.systems.len();
    if k < 2 {
        return Err(Error::Validation("need at least two systems".into()));
    }
    let eff = effective_wins(w);
    let total_wins: Vec<f64> = eff.iter().map(|r| r.iter().sum()).collect();
    let zero: Vec<&str> = (0..k).filter(|&i| total_wins[i] == 0.0).map(|i| w.systems[i].as_str()).collect();
    if !zero.is_empty() {
        return Err(Error::Disconnected(format!("systems without wins: {}", zero.join(", "))));
    }
    let cut = unreachable_systems(&eff);
    if !cut.is_empty() {
        let names: Vec<&str> = cut.iter().map(|&i| w.systems[i].as_str()).collect();
        return Err(Error::Disconnected(format!(
            "comparison graph is not strongly connected from {}: {}",
            w.systems[0],
            names.join(", ")
        )));
    }

    let mut s = vec![1.0; k];
    for iter in 1..=MM_MAX_ITER {
        let mut next = vec![0.0; k];
        for i in 0..k {
            let denom: f64 = (0..k)
                .filter(|&j| j != i)
                .map(|j| (eff[i][j] + eff[j][i]) / (s[i] + s[j]))
                .sum();
            next[i] = total_wins[i] / denom;
        }
        let norm = next[0];
        next.iter_mut().for_each(|v| *v /= norm);
        let change = s
            .iter()
            .zip(&next)
            .map(|(a, b)| ((b - a) / a).abs())
            .fold(0.0, f64::max);
        s = next;
        if change < MM_TOLERANCE {
            return Ok(BtScores {
                systems: w.systems.clone(),
                scores: s,
                iterations: iter,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MM_MAX_ITER,
        residual: f64::NAN,
    })
}

/// Exact two-sided sign test of `H0: P(win) = 1/2`; ties are excluded by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: u64,
    pub losses: u64,
    pub p_value: f64,
}

impl SignTest {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// `min(1, 2 · P(X ≤ min(wins, losses)))` for `X ~ Bin(n, 1/2)`.
pub fn sign_test(wins: u64, losses: u64) -> SignTest {
    let n = wins + losses;
    let p_value = if n == 0 {
        1.0
    } else {
        let lo = wins.min(losses);
        let ln_half_n = -(n as f64) * std::f64::consts::LN_2;
        let terms: Vec<f64> = (0..=lo).map(|k| ln_choose(n, k) + ln_half_n).collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tail = (max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()).exp();
        (2.0 * tail).min(1.0)
    };
    SignTest { wins, losses, p_value }
}

/// One row of a pairwise comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseRow {
    pub system_a: String,
    pub system_b: String,
    pub wins_a: u64,
    pub wins_b: u64,
    pub ties: u64,
    pub bt_probability: f64,
    pub sign_test_p: f64,
    pub significant: bool,
}

/// Every ordered pair `(a, b)` with `a ≠ b`: fitted `P(a beats b)` and the sign test.
pub fn pairwise_table(w: &OutcomeMatrix, bt: &BtScores, alpha: f64) -> Vec<PairwiseRow> {
    let k = w.systems.len();
    let mut rows = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let t = sign_test(w.wins[i][j], w.wins[j][i]);
            rows.push(PairwiseRow {
                system_a: w.systems[i].clone(),
                system_b: w.systems[j].clone(),
                wins_a: w.wins[i][j],
                wins_b: w.wins[j][i],
                ties: w.ties[i][j],
                bt_probability: bt.probability(i, j),
                sign_test_p: t.p_value,
                significant: t.significant(alpha),
            });
        }
    }
    rows
}

/// CSV columns: `system_a,system_b,wins_a,wins_b,ties,bt_probability,sign_test_p,significant`.
pub fn write_pairwise_csv(rows: &[PairwiseRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

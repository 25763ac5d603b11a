use serde::{Deserialize, Serialize};

use super::GenerationResult;
use crate::encoding::EOS;

/// Next-token log-probabilities given the tokens emitted so far (BOS excluded).
pub trait StepScorer {
    fn log_probs(&self, prefix: &[usize]) -> Vec<f64>;
}

impl<F: Fn(&[usize]) -> Vec<f64>> StepScorer for F {
    fn log_probs(&self, prefix: &[usize]) -> Vec<f64> {
        self(prefix)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeStrategy {
    Greedy,
    Beam(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Emitted tokens, EOS excluded.
    pub tokens: Vec<usize>,
    /// EOS was emitted within the cap.
    pub terminated: bool,
    pub log_prob: f64,
}

/// Autoregressive search. At most `max_tokens` content tokens are emitted;
/// the sequence counts as terminated only if EOS follows within that budget.
pub fn decode(scorer: &impl StepScorer, max_tokens: usize, strategy: DecodeStrategy) -> Decoded {
    match strategy {
        DecodeStrategy::Greedy => beam(scorer, max_tokens, 1),
        DecodeStrategy::Beam(k) => beam(scorer, max_tokens, k.max(1)),
    }
}

fn beam(scorer: &impl StepScorer, max_tokens: usize, width: usize) -> Decoded {
    let mut live: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 0.0)];
    let mut done: Vec<Decoded> = Vec::new();

    for step in 0..=max_tokens {
        let mut candidates: Vec<(Vec<usize>, f64, bool)> = Vec::new();
        for (prefix, lp) in &live {
            let scores = scorer.log_probs(prefix);
            let mut order: Vec<usize> = (0..scores.len()).filter(|&t| scores[t].is_finite()).collect();
            // highest score first, lower id wins ties
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            for &t in order.iter().take(width) {
                let total = lp + scores[t];
                if t == EOS {
                    candidates.push((prefix.clone(), total, true));
                } else if step < max_tokens {
                    let mut next = prefix.clone();
                    next.push(t);
                    candidates.push((next, total, false));
                }
            }
        }
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        candidates.truncate(width);
        let previous = std::mem::take(&mut live);
        for (tokens, lp, finished) in candidates {
            if finished {
                done.push(Decoded { tokens, terminated: true, log_prob: lp });
            } else {
                live.push((tokens, lp));
            }
        }
        if step == max_tokens {
            // capped hypotheses stay as they were
            live = previous;
            break;
        }
        let best_done = done.iter().map(|d| d.log_prob).fold(f64::NEG_INFINITY, f64::max);
        if live.is_empty() || live.iter().all(|(_, lp)| *lp < best_done) {
            break;
        }
    }

    let unfinished = live.into_iter().map(|(tokens, lp)| Decoded {
        terminated: false,
        log_prob: lp,
        tokens,
    });
    done.into_iter()
        .chain(unfinished)
        .max_by(|a, b| a.log_prob.total_cmp(&b.log_prob).then_with(|| b.tokens.cmp(&a.tokens)))
        .expect("decoding produces at least one hypothesis")
}

/// Outcome of [`filter_truncated`].
#[derive(Debug, Clone)]
pub struct TruncationFilter {
    pub kept: Vec<GenerationResult>,
    pub dropped: usize,
    pub dropped_fraction: f64,
}

/// Drop generations that hit the length cap without emitting EOS.
pub fn filter_truncated(results: Vec<GenerationResult>) -> TruncationFilter {
    let total = results.len();
    let kept: Vec<GenerationResult> = results.into_iter().filter(|r| r.terminated).collect();
    let dropped = total - kept.len();
    TruncationFilter {
        dropped_fraction: if total == 0 { 0.0 } else { dropped as f64 / total as f64 },
        dropped,
        kept,
    }
}

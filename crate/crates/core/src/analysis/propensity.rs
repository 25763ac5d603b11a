use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clip bound for propensities before weighting.
pub const PROPENSITY_EPS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropensityConfig {
    /// Width of the hashed bag-of-words feature space.
    pub buckets: usize,
    pub l2: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for PropensityConfig {
    fn default() -> Self {
        PropensityConfig {
            buckets: 1024,
            l2: 1e-2,
            learning_rate: 0.5,
            iterations: 500,
            seed: 0,
        }
    }
}

/// Logistic regression over hashed token-presence features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub seed: u64,
}

fn bucket(token: &str, seed: u64, buckets: usize) -> usize {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in token.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    (h % buckets as u64) as usize
}

fn features(text: &str, seed: u64, buckets: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = text
        .split_whitespace()
        .map(|t| bucket(&t.to_lowercase(), seed, buckets))
        .collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl PropensityModel {
    /// Probability that the article already has a description.
    pub fn predict(&self, text: &str) -> f64 {
        let z = self.bias
            + features(text, self.seed, self.weights.len())
                .iter()
                .map(|&i| self.weights[i])
                .sum::<f64>();
        sigmoid(z)
    }
}

/// Full-batch gradient descent on L2-regularized log loss.
pub fn train_propensity<S: AsRef<str>>(examples: &[(S, bool)], config: &PropensityConfig) -> Result<PropensityModel> {
    let positives = examples.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == examples.len() {
        return Err(Error::Validation("propensity training needs both classes".into()));
    }
    if config.buckets == 0 {
        return Err(Error::Validation("buckets must be positive".into()));
    }
    let xs: Vec<Vec<usize>> = examples
        .iter()
        .map(|(t, _)| features(t.as_ref(), config.seed, config.buckets))
        .collect();
    let ys: Vec<f64> = examples.iter().map(|(_, y)| *y as u8 as f64).collect();
    let n = examples.len() as f64;
    let prior = positives as f64 / n;
    let mut model = PropensityModel {
        weights: vec![0.0; config.buckets],
        bias: (prior / (1.0 - prior)).ln(),
        seed: config.seed,
    };
    for _ in 0..config.iterations {
        let mut grad = vec![0.0; config.buckets];
        let mut grad_b = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            let z = model.bias + x.iter().map(|&i| model.weights[i]).sum::<f64>();
            let r = sigmoid(z) - y;
            grad_b += r;
            for &i in x {
                grad[i] += r;
            }
        }
        for (w, g) in model.weights.iter_mut().zip(&grad) {
            *w -= config.learning_rate * (g / n + config.l2 * *w);
        }
        model.bias -= config.learning_rate * grad_b / n;
    }
    Ok(model)
}

/// Inverse-odds weight `(1 - p) / p` after clipping `p` to `[ε, 1 - ε]`.
pub fn propensity_weight(p: f64) -> f64 {
    let p = p.clamp(PROPENSITY_EPS, 1.0 - PROPENSITY_EPS);
    (1.0 - p) / p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityRecord {
    pub entity_id: String,
    pub p: f64,
    pub weight: f64,
}

impl PropensityRecord {
    pub fn new(entity_id: impl Into<String>, p: f64) -> Self {
        let clipped = p.clamp(PROPENSITY_EPS, 1.0 - PROPENSITY_EPS);
        PropensityRecord {
            entity_id: entity_id.into(),
            p: clipped,
            weight: propensity_weight(clipped),
        }
    }
}

/// `Σ wᵢ sᵢ / Σ wᵢ`.
pub fn weighted_mean(scores: &[f64], weights: &[f64]) -> Result<f64> {
    if scores.len() != weights.len() {
        return Err(Error::Shape(format!("{} scores, {} weights", scores.len(), weights.len())));
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::Validation("weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Validation("total weight is zero".into()));
    }
    Ok(scores.iter().zip(weights).map(|(s, w)| s * w).sum::<f64>() / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    #[default]
    Quantile,
    EqualWidth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_score: Option<f64>,
}

/// Group `(propensity, score)` pairs into `n_bins` bins and average scores per bin.
pub fn stratify(records: &[(f64, f64)], n_bins: usize, binning: Binning) -> Result<Vec<Stratum>> {
    if n_bins == 0 {
        return Err(Error::Validation("n_bins must be positive".into()));
    }
    if records.is_empty() {
        return Err(Error::Validation("nothing to stratify".into()));
    }
    let mut sorted: Vec<(f64, f64)> = records.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = sorted.len();
    let assign: Vec<usize> = match binning {
        Binning::Quantile => (0..n).map(|r| r * n_bins / n).collect(),
        Binning::EqualWidth => {
            let (lo, hi) = (sorted[0].0, sorted[n - 1].0);
            let width = (hi - lo) / n_bins as f64;
            sorted
                .iter()
                .map(|(p, _)| {
                    if width == 0.0 {
                        0
                    } else {
                        (((p - lo) / width) as usize).min(n_bins - 1)
                    }
                })
                .collect()
        }
    };
    let mut strata: Vec<Stratum> = (0..n_bins)
        .map(|bin| Stratum {
            bin,
            lower: f64::INFINITY,
            upper: f64::NEG_INFINITY,
            count: 0,
            mean_score: None,
        })
        .collect();
    let mut sums = vec![0.0; n_bins];
    for ((p, s), &b) in sorted.iter().zip(&assign) {
        let st = &mut strata[b];
        st.count += 1;
        st.lower = st.lower.min(*p);
        st.upper = st.upper.max(*p);
        sums[b] += s;
    }
    for (st, sum) in strata.iter_mut().zip(sums) {
        if st.count > 0 {
            st.mean_score = Some(sum / st.count as f64);
        } else {
            st.lower = f64::NAN;
            st.upper = f64::NAN;
        }
    }
    Ok(strata)
}

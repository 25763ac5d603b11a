use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shortdesc::analysis::{
    coding_round, fit_bradley_terry, fleiss_kappa, propensity_weight, sign_test, stratify, weighted_mean, Binning,
    ErrorCategory, ErrorLabel, OutcomeMatrix, CODING_STOP_KAPPA,
};

use crate::Outcome;

fn choose(n: u64, k: u64) -> u128 {
    (0..k as u128).fold(1u128, |c, i| c * (n as u128 - i) / (i + 1))
}

/// Two-sided exact binomial p-value with integer arithmetic.
fn binomial_p(wins: u64, losses: u64) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let tail: u128 = (0..=wins.min(losses)).map(|k| choose(n, k)).sum();
    (2.0 * tail as f64 / 2f64.powi(n as i32)).min(1.0)
}

/// Maximizer of a·ln σ(x) + b·ln σ(−x), by bisection on the sign of the
/// derivative a − (a + b)·σ(x), returned as σ(x).
fn two_system_grid(a: u64, b: u64) -> f64 {
    let sigma = |x: f64| 1.0 / (1.0 + (-x).exp());
    let (mut lo, mut hi) = (-30.0f64, 30.0f64);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if a as f64 - (a + b) as f64 * sigma(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    sigma((lo + hi) / 2.0)
}

pub fn bradley_terry() -> Outcome {
    let strengths = [1.0, 3.0, 0.5, 1.8];
    let mut m = OutcomeMatrix::new((0..4).map(|i| format!("sys{i}")).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    for i in 0..4 {
        for j in i + 1..4 {
            let p = strengths[i] / (strengths[i] + strengths[j]);
            for _ in 0..10_000 {
                m.record(i, j, if rng.random_bool(p) { Ordering::Greater } else { Ordering::Less });
            }
        }
    }
    let bt = fit_bradley_terry(&m).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                worst = worst.max((bt.probability(i, j) - strengths[i] / (strengths[i] + strengths[j])).abs());
            }
        }
    }
    check!(worst <= 0.02, "recovered probability off by {worst:.4}");

    let mut two_worst: f64 = 0.0;
    for (a, b) in [(8, 2), (5, 5), (1, 99), (37, 12), (250, 251), (1, 1), (3, 400)] {
        let mut t = OutcomeMatrix::new(vec!["x".into(), "y".into()]);
        t.wins[0][1] = a;
        t.wins[1][0] = b;
        let p = fit_bradley_terry(&t).map_err(|e| e.to_string())?.probability(0, 1);
        let frac = a as f64 / (a + b) as f64;
        two_worst = two_worst.max((p - frac).abs());
        check!((two_system_grid(a, b) - frac).abs() <= 1e-9, "grid oracle disagrees with {a}/{b}");
    }
    check!(two_worst <= 1e-9, "two-system MLE off the win fraction by {two_worst:.2e}");

    let mut sign_worst: f64 = 0.0;
    for n in 0..=50u64 {
        for w in 0..=n {
            sign_worst = sign_worst.max((sign_test(w, n - w).p_value - binomial_p(w, n - w)).abs());
        }
    }
    check!(sign_worst <= 1e-9, "sign test off the exact binomial by {sign_worst:.2e}");
    Ok(format!(
        "4 systems x 10K/pair recovered within {worst:.4}; two-system MLE {two_worst:.1e}; sign test n<=50 {sign_worst:.1e}"
    ))
}

pub fn propensity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut half_worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..300);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let w = vec![propensity_weight(0.5); n];
        let plain = scores.iter().sum::<f64>() / n as f64;
        half_worst = half_worst.max((weighted_mean(&scores, &w).map_err(|e| e.to_string())? - plain).abs());
    }
    check!(half_worst <= 1e-12, "p = 0.5 weighting moved the mean by {half_worst:.2e}");

    let w = [propensity_weight(0.8), propensity_weight(0.2)];
    check!((w[0] - 0.25).abs() < 1e-12 && (w[1] - 4.0).abs() < 1e-12, "weights {w:?}");
    let worked = weighted_mean(&[0.9, 0.7], &w).map_err(|e| e.to_string())?;
    check!((worked - 0.71176).abs() <= 1e-5, "worked example gives {worked}");

    for n in [1usize, 9, 10, 11, 257, 1000] {
        let records: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.01..0.99), rng.random_range(0.0..1.0))).collect();
        for binning in [Binning::Quantile, Binning::EqualWidth] {
            let strata = stratify(&records, 10, binning).map_err(|e| e.to_string())?;
            let total: usize = strata.iter().map(|s| s.count).sum();
            check!(total == n, "{binning:?} deciles hold {total} of {n}");
        }
    }
    Ok(format!("p=0.5 deviation {half_worst:.1e}; worked example {worked:.5}; decile counts sum to totals"))
}

/// κ = 1 − 1.2·d/n for two annotators over `n` items with `6·cycles`
/// disagreements that keep the pooled marginals uniform.
fn coding_fixture(n: usize, cycles: usize) -> Vec<Vec<ErrorLabel>> {
    let label = |i: usize, c: usize, who: &str| ErrorLabel {
        entity_id: format!("item{i:04}"),
        category: ErrorCategory::ALL[c % 6],
        annotator: who.into(),
        round: 1,
    };
    let first = (0..n).map(|i| label(i, i % 6, "first")).collect();
    let second = (0..n).map(|i| label(i, i % 6 + usize::from(i < 6 * cycles), "second")).collect();
    vec![first, second]
}

pub fn fleiss() -> Outcome {
    let k = fleiss_kappa(&[vec![3, 0], vec![0, 3], vec![2, 1], vec![1, 2]], 3)
        .map_err(|e| e.to_string())?
        .ok_or("kappa undefined on the worked example")?;
    check!((k - 1.0 / 3.0).abs() < 1e-12, "worked example gives {k}");
    let perfect = fleiss_kappa(&[vec![3, 0], vec![0, 3], vec![3, 0], vec![0, 3]], 3)
        .map_err(|e| e.to_string())?
        .ok_or("kappa undefined on perfect agreement")?;
    check!(perfect == 1.0, "perfect agreement gives {perfect}");

    let high = coding_round(&coding_fixture(720, 23)).map_err(|e| e.to_string())?;
    let low = coding_round(&coding_fixture(48, 3)).map_err(|e| e.to_string())?;
    let (kh, kl) = (high.kappa.unwrap_or(f64::NAN), low.kappa.unwrap_or(f64::NAN));
    check!((kh - 0.77).abs() < 1e-12 && high.stop, "0.77 fixture: kappa {kh}, stop {}", high.stop);
    check!((kl - 0.55).abs() < 1e-12 && !low.stop, "0.55 fixture: kappa {kl}, stop {}", low.stop);
    Ok(format!(
        "worked example {k:.6}; perfect 1; stop rule (kappa > {CODING_STOP_KAPPA}) fires at {kh:.2}, not at {kl:.2}"
    ))
}

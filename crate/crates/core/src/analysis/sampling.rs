use rand::seq::index;
use rand::Rng;

use crate::autograd::Mat;
use crate::error::{Error, Result};

/// Quantile bins over items sorted by score (ties by id). Bin `b` holds
/// ranks `[b·N/n_bins, (b+1)·N/n_bins)`.
pub fn quantile_bins<'a>(scores: &'a [(String, f64)], n_bins: usize) -> Result<Vec<Vec<&'a (String, f64)>>> {
    if n_bins == 0 {
        return Err(Error::Validation("n_bins must be positive".into()));
    }
    let mut sorted: Vec<&(String, f64)> = scores.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let n = sorted.len();
    let mut bins = vec![Vec::new(); n_bins];
    for (rank, item) in sorted.into_iter().enumerate() {
        bins[rank * n_bins / n.max(1)].push(item);
    }
    Ok(bins)
}

/// `per_bin` ids drawn uniformly without replacement from each quantile bin,
/// listed bin by bin.
pub fn stratified_sample_by_metric<R: Rng + ?Sized>(
    scores: &[(String, f64)],
    per_bin: usize,
    n_bins: usize,
    rng: &mut R,
) -> Result<Vec<String>> {
    let bins = quantile_bins(scores, n_bins)?;
    if let Some((b, bin)) = bins.iter().enumerate().find(|(_, bin)| bin.len() < per_bin) {
        return Err(Error::Insufficient(format!(
            "bin {b} has {} items, {per_bin} requested",
            bin.len()
        )));
    }
    let mut out = Vec::with_capacity(per_bin * n_bins);
    for bin in &bins {
        let mut picked: Vec<usize> = index::sample(rng, bin.len(), per_bin).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| bin[i].0.clone()));
    }
    Ok(out)
}

fn squared_distance(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first index uniform, then proportional to the squared
/// distance to the nearest chosen point. When every remaining point
/// coincides with a chosen one, the draw is uniform over the remainder.
pub fn kmeanspp_sample<R: Rng + ?Sized>(points: &Mat, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    let n = points.nrows();
    if k > n {
        return Err(Error::Validation(format!("k = {k} exceeds {n} points")));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| squared_distance(points.row(i), points.row(chosen[0])))
        .collect();
    let mut selected = vec![false; n];
    selected[chosen[0]] = true;
    while chosen.len() < k {
        let total: f64 = nearest.iter().enumerate().filter(|(i, _)| !selected[*i]).map(|(_, d)| d).sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = None;
            for i in (0..n).filter(|&i| !selected[i] && nearest[i] > 0.0) {
                pick = Some(i);
                if target < nearest[i] {
                    break;
                }
                target -= nearest[i];
            }
            pick.expect("positive mass")
        } else {
            let rest: Vec<usize> = (0..n).filter(|&i| !selected[i]).collect();
            rest[rng.random_range(0..rest.len())]
        };
        selected[next] = true;
        chosen.push(next);
        for i in 0..n {
            nearest[i] = nearest[i].min(squared_distance(points.row(i), points.row(next)));
        }
    }
    Ok(chosen)
}

//! Choosing items for human rating: stratify by metric score so every score
//! range is represented, then pick a diverse coding subset with k-means++.
//!
//! `cargo run --example evaluation_sample`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shortdesc::analysis::{kmeanspp_sample, quantile_bins, stratified_sample_by_metric};
use shortdesc::autograd::Mat;

fn main() -> shortdesc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let scores: Vec<(String, f64)> = (0..500).map(|i| (format!("Q{i}"), rng.random::<f64>().powi(2))).collect();

    for (b, bin) in quantile_bins(&scores, 5)?.iter().enumerate() {
        let lo = bin.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let hi = bin.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        println!("bin {b}: {} items, scores [{lo:.3}, {hi:.3}]", bin.len());
    }
    let sample = stratified_sample_by_metric(&scores, 20, 5, &mut rng)?;
    println!("stratified sample: {} items, first {:?}", sample.len(), &sample[..5]);

    let points = Mat::from_shape_simple_fn((sample.len(), 8), || rng.random_range(-1.0..1.0));
    let coding = kmeanspp_sample(&points, 10, &mut rng)?;
    println!("coding subset: {:?}", coding.iter().map(|&i| &sample[i]).collect::<Vec<_>>());
    Ok(())
}

//! Transport-based similarity with a hand-rolled embedder: each token is a
//! letter-frequency vector, so near-synonymous spellings land close together.
//!
//! `cargo run --example similarity_metric`

use shortdesc::autograd::Mat;
use shortdesc::corpus::LanguageCode;
use shortdesc::metric::{compute_idf, similarity, Embedder, SimilarityConfig, Weighting};

struct LetterCounts;

impl Embedder for LetterCounts {
    fn embed(&self, text: &str, _language: &LanguageCode) -> shortdesc::Result<(Vec<String>, Mat)> {
        let tokens: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
        let mut m = Mat::zeros((tokens.len().max(1), 26));
        for (i, t) in tokens.iter().enumerate() {
            for c in t.chars().filter(char::is_ascii_lowercase) {
                m[[i, (c as u8 - b'a') as usize]] += 1.0 / t.len() as f64;
            }
        }
        Ok((tokens, m))
    }
}

fn main() -> shortdesc::Result<()> {
    let en = LanguageCode::new("en");
    let reference = "river in central europe";
    let candidates = [
        "river in central europe",
        "river in europe",
        "stream in central europe",
        "mountain in asia",
        "species of insect",
    ];

    let docs: Vec<Vec<String>> = candidates.iter().map(|c| c.split_whitespace().map(String::from).collect()).collect();
    let uniform = SimilarityConfig::default();
    let idf = SimilarityConfig { weighting: Weighting::Idf, idf: Some(compute_idf(&docs)?), ..Default::default() };

    println!("reference: {reference:?}\n{:<28}{:>10}{:>10}", "candidate", "uniform", "idf");
    for c in candidates {
        let u = similarity(c, reference, &en, &LetterCounts, &uniform)?;
        let w = similarity(c, reference, &en, &LetterCounts, &idf)?;
        println!("{c:<28}{u:>10.4}{w:>10.4}");
    }
    Ok(())
}

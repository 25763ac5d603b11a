use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use shortdesc::analysis::PropensityConfig;
use shortdesc::corpus::{LanguageCode, LanguageConfig, SplitSizes, SynthSpec};
use shortdesc::experiment::ExperimentSettings;
use shortdesc::generator::SystemKind;
use shortdesc::metric::{EmdSolver, SinkhornConfig, Weighting};
use shortdesc_eval::EntryQuestion;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_entities: usize,
    pub vocab_size: usize,
    pub n_types: usize,
    pub missing_article_rate: BTreeMap<LanguageCode, f64>,
    pub missing_description_rate: BTreeMap<LanguageCode, f64>,
    pub untyped_rate: f64,
    pub type_critical: bool,
    pub single_description: bool,
    pub max_filler: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let base = SynthSpec::new(500, Vec::new(), 0);
        SynthConfig {
            n_entities: base.n_entities,
            vocab_size: base.vocab_size,
            n_types: base.n_types,
            missing_article_rate: base.missing_article_rate,
            // about a fifth of articles lack a description, so propensity has both classes
            missing_description_rate: ["en", "de", "zh"].into_iter().map(|l| (l.into(), 0.2)).collect(),
            untyped_rate: base.untyped_rate,
            type_critical: base.type_critical,
            single_description: base.single_description,
            max_filler: base.max_filler,
        }
    }
}

impl SynthConfig {
    pub fn to_spec(&self, languages: Vec<LanguageConfig>, seed: u64) -> SynthSpec {
        SynthSpec {
            n_entities: self.n_entities,
            languages,
            vocab_size: self.vocab_size,
            n_types: self.n_types,
            seed,
            missing_article_rate: self.missing_article_rate.clone(),
            missing_description_rate: self.missing_description_rate.clone(),
            untyped_rate: self.untyped_rate,
            type_critical: self.type_critical,
            single_description: self.single_description,
            max_filler: self.max_filler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    #[default]
    Auto,
    Exact,
    Sinkhorn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub weighting: Weighting,
    pub solver: SolverChoice,
    pub sinkhorn_epsilon: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            weighting: Weighting::Uniform,
            solver: SolverChoice::Auto,
            sinkhorn_epsilon: SinkhornConfig::default().epsilon,
        }
    }
}

impl MetricConfig {
    pub fn solver(&self) -> EmdSolver {
        match self.solver {
            SolverChoice::Auto => EmdSolver::Auto,
            SolverChoice::Exact => EmdSolver::Exact,
            SolverChoice::Sinkhorn => EmdSolver::Sinkhorn(SinkhornConfig {
                epsilon: self.sinkhorn_epsilon,
                ..SinkhornConfig::default()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropensitySettings {
    pub model: PropensityConfig,
    /// System whose scores are reweighted.
    pub system: String,
    pub bins: usize,
}

impl Default for PropensitySettings {
    fn default() -> Self {
        PropensitySettings {
            model: PropensityConfig::default(),
            system: SystemKind::Full.name().into(),
            bins: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleEvalConfig {
    pub campaign_id: String,
    pub system: String,
    pub language: LanguageCode,
    pub bins: usize,
    pub per_bin: usize,
    /// Size of the diverse subset drawn for error coding.
    pub coding_sample: usize,
    pub snippet_chars: usize,
}

impl Default for SampleEvalConfig {
    fn default() -> Self {
        SampleEvalConfig {
            campaign_id: "eval".into(),
            system: SystemKind::Full.name().into(),
            language: "en".into(),
            bins: 10,
            per_bin: 9,
            coding_sample: 20,
            snippet_chars: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServeConfig {
    pub address: String,
    pub question: EntryQuestion,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            address: "127.0.0.1:8080".into(),
            question: EntryQuestion {
                language: "en".into(),
                prompt: "Which of these is a river?".into(),
                options: vec!["Danube".into(), "Everest".into(), "Sahara".into()],
                answer: "Danube".into(),
            },
        }
    }
}

/// Whole-pipeline configuration; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub languages: Vec<LanguageConfig>,
    /// External corpus; when absent, `synth` provides one.
    pub corpus: Option<PathBuf>,
    pub types: Option<PathBuf>,
    pub dictionaries: Option<PathBuf>,
    pub synthetic: SynthConfig,
    pub split: SplitSizes,
    pub experiment: ExperimentSettings,
    pub metric: MetricConfig,
    pub alpha: f64,
    pub propensity: PropensitySettings,
    pub sample_eval: SampleEvalConfig,
    pub serve: ServeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            languages: vec![LanguageConfig::word("en"), LanguageConfig::word("de"), LanguageConfig::character("zh")],
            corpus: None,
            types: None,
            dictionaries: None,
            synthetic: SynthConfig::default(),
            split: SplitSizes {
                train: 400,
                valid: 50,
                test: 50,
            },
            experiment: ExperimentSettings::default(),
            metric: MetricConfig::default(),
            alpha: 0.05,
            propensity: PropensitySettings::default(),
            sample_eval: SampleEvalConfig::default(),
            serve: ServeConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&raw).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    /// Apply command-line overrides and check cross-field constraints.
    pub fn resolve(mut self, seed: Option<u64>, systems: &[String]) -> Result<Self, CliError> {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.experiment.model.seed = self.seed;
        if !systems.is_empty() {
            self.experiment.systems = systems
                .iter()
                .map(|s| s.parse::<SystemKind>().map_err(|e| CliError::Validation(e.to_string())))
                .collect::<Result<_, _>>()?;
        }
        if self.languages.is_empty() {
            return Err(CliError::Validation("no languages configured".into()));
        }
        for p in [&self.corpus, &self.types, &self.dictionaries].into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::Validation(format!("configured path {} does not exist", p.display())));
            }
        }
        if !(0.0..1.0).contains(&self.alpha) || self.alpha == 0.0 {
            return Err(CliError::Validation(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        self.experiment
            .model
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(self)
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.canonical().as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

//! Run configuration: one JSON file drives every stage, and every report
//! embeds the configuration verbatim together with its hash and the
//! effective seeds.

use serde::{Deserialize, Serialize};

use eqs_core::aqce::AqceConfig;
use eqs_core::eqs::AdamConfig;
use eqs_core::fingerprint;
use eqs_core::ingest::GeneratorParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; stage seeds default to fixed offsets from it.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub dataset: DatasetSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub svm: SvmConfig,
    #[serde(default = "default_gs_tol")]
    pub gram_schmidt_tol: f64,
    /// Truncation rank for synthesis; defaults to the label count.
    #[serde(default)]
    pub k: Option<usize>,
    /// Ranks for the exact low-rank accuracy table.
    #[serde(default = "default_k_sweep")]
    pub k_sweep: Vec<usize>,
    #[serde(default)]
    pub aqce: AqceSection,
    #[serde(default)]
    pub gradients: GradientSection,
    #[serde(default)]
    pub adam: AdamSection,
}

fn default_seed() -> u64 {
    7
}

fn default_out_dir() -> String {
    "out".to_string()
}

fn default_gs_tol() -> f64 {
    1e-8
}

fn default_k_sweep() -> Vec<usize> {
    vec![1, 2, 4, 8, 16, 32]
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config uses defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// Load a conforming dataset directory.
    Dir(String),
    /// Draw the synthetic clustered dataset.
    Generate(GeneratorSection),
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Generate(GeneratorSection::default())
    }
}

/// Generator parameters with the seed made optional so it can derive from
/// the master seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    #[serde(default = "default_n_qubits")]
    pub n_qubits: usize,
    #[serde(default = "default_labels")]
    pub labels: usize,
    #[serde(default = "default_per_label")]
    pub per_label: usize,
    #[serde(default = "default_anchor_depth")]
    pub anchor_depth: usize,
    #[serde(default = "default_noise_depth")]
    pub noise_depth: usize,
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_n_qubits() -> usize {
    6
}
fn default_labels() -> usize {
    4
}
fn default_per_label() -> usize {
    50
}
fn default_anchor_depth() -> usize {
    20
}
fn default_noise_depth() -> usize {
    4
}
fn default_noise_scale() -> f64 {
    0.1
}

impl Default for GeneratorSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl GeneratorSection {
    pub fn to_params(&self, master_seed: u64) -> GeneratorParams {
        GeneratorParams {
            n_qubits: self.n_qubits,
            label_count: self.labels,
            per_label: self.per_label,
            anchor_depth: self.anchor_depth,
            noise_depth: self.noise_depth,
            noise_scale: self.noise_scale,
            seed: self.seed.unwrap_or(master_seed.wrapping_add(1)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_train_fraction() -> f64 {
    0.5
}

impl Default for SplitConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmConfig {
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_svm_tol")]
    pub tol: f64,
}

fn default_c() -> f64 {
    1.0
}
fn default_svm_tol() -> f64 {
    1e-3
}

impl Default for SvmConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AqceSection {
    #[serde(default = "default_j0")]
    pub initial_gates: usize,
    #[serde(default = "default_delta_j")]
    pub growth_per_step: usize,
    #[serde(default = "default_sweeps")]
    pub sweeps_per_step: usize,
    #[serde(default)]
    pub max_gates: Option<usize>,
    #[serde(default = "default_f_target")]
    pub target_fidelity: f64,
    #[serde(default)]
    pub per_target_fidelity: Option<Vec<f64>>,
    #[serde(default)]
    pub pairs: Option<Vec<(usize, usize)>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_j0() -> usize {
    12
}
fn default_delta_j() -> usize {
    6
}
fn default_sweeps() -> usize {
    4
}
fn default_f_target() -> f64 {
    0.6
}

impl Default for AqceSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl AqceSection {
    pub fn to_config(&self, master_seed: u64) -> AqceConfig {
        AqceConfig {
            initial_gates: self.initial_gates,
            growth_per_step: self.growth_per_step,
            sweeps_per_step: self.sweeps_per_step,
            max_gates: self.max_gates,
            target_fidelity: self.target_fidelity,
            per_target_fidelity: self.per_target_fidelity.clone(),
            pairs: self.pairs.clone(),
            seed: self.seed.unwrap_or(master_seed.wrapping_add(4)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientSection {
    #[serde(default = "default_n_random_seeds")]
    pub n_random_seeds: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_n_random_seeds() -> usize {
    10
}

impl Default for GradientSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_alpha() -> f64 {
    0.009
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}
fn default_batch_size() -> usize {
    1000
}
fn default_steps() -> usize {
    200
}

impl Default for AdamSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl AdamSection {
    pub fn to_config(&self, master_seed: u64) -> AdamConfig {
        AdamConfig {
            alpha: self.alpha,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            batch_size: self.batch_size,
            steps: self.steps,
            seed: self.seed.unwrap_or(master_seed.wrapping_add(5)),
        }
    }
}

impl RunConfig {
    pub fn split_seed(&self) -> u64 {
        self.split.seed.unwrap_or(self.seed.wrapping_add(2))
    }

    pub fn gradients_seed(&self) -> u64 {
        self.gradients.seed.unwrap_or(self.seed.wrapping_add(3))
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(format!(
                "split.train_fraction must lie in (0, 1), got {}",
                self.split.train_fraction
            ));
        }
        if self.svm.c <= 0.0 {
            return Err(format!("svm.c must be positive, got {}", self.svm.c));
        }
        if self.svm.tol <= 0.0 {
            return Err(format!("svm.tol must be positive, got {}", self.svm.tol));
        }
        if self.gram_schmidt_tol <= 0.0 {
            return Err("gram_schmidt_tol must be positive".to_string());
        }
        if self.k == Some(0) {
            return Err("k must be ≥ 1".to_string());
        }
        if self.k_sweep.iter().any(|&k| k == 0) {
            return Err("k_sweep entries must be ≥ 1".to_string());
        }
        if let Some(t) = self.threads {
            if t == 0 {
                return Err("threads must be ≥ 1".to_string());
            }
        }
        if self.aqce.initial_gates < 1 || self.aqce.growth_per_step < 1 || self.aqce.sweeps_per_step < 1
        {
            return Err(
                "aqce.initial_gates, aqce.growth_per_step and aqce.sweeps_per_step must be ≥ 1"
                    .to_string(),
            );
        }
        if !(self.aqce.target_fidelity > 0.0 && self.aqce.target_fidelity <= 1.0) {
            return Err(format!(
                "aqce.target_fidelity must lie in (0, 1], got {}",
                self.aqce.target_fidelity
            ));
        }
        if let Some(targets) = &self.aqce.per_target_fidelity {
            if targets.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
                return Err("aqce.per_target_fidelity entries must lie in (0, 1]".to_string());
            }
        }
        if self.gradients.n_random_seeds < 1 {
            return Err("gradients.n_random_seeds must be ≥ 1".to_string());
        }
        if self.adam.steps < 1 || self.adam.batch_size < 1 {
            return Err("adam.steps and adam.batch_size must be ≥ 1".to_string());
        }
        Ok(())
    }

    /// Hash of the canonical serialized configuration.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        fingerprint::hex16(fingerprint::fnv1a_64(text.as_bytes()))
    }
}

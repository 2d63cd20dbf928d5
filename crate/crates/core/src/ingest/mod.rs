//! Data ingestion: QASM parsing, a synthetic labeled-circuit generator, and
//! the on-disk dataset layout.
//!
//! A dataset directory looks like
//!
//! ```text
//! dataset/
//!   meta.json          // qubit count, label count, generator parameters
//!   labels.csv         // id,label
//!   circuits/<id>.qasm // one state-preparation circuit per item
//! ```
//!
//! Any conforming directory loads, so externally produced circuit datasets
//! can be dropped in alongside generated ones.

pub mod kak;
pub mod qasm;

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint;
use crate::simulator::{standard_normal, StateVector, TwoQubitGate};
pub use qasm::{parse_qasm, to_feature_state, QasmError, QasmProgram, QasmStatement};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{file}: {source}")]
    Qasm { file: String, source: QasmError },
    #[error("malformed metadata: {0}")]
    BadMeta(String),
    #[error("malformed labels.csv line {line}: {reason}")]
    BadLabels { line: usize, reason: String },
    #[error("item {id} has {actual} qubits, dataset declares {expected}")]
    QubitMismatch { id: String, expected: usize, actual: usize },
    #[error("item {id} has label {label}, dataset declares {label_count} labels")]
    LabelOutOfRange { id: String, label: usize, label_count: usize },
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Kak(#[from] kak::KakError),
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// Generator knobs for the synthetic clustered dataset.
///
/// Per label one random anchor circuit is drawn; each item is the anchor
/// followed by `noise_depth` perturbation gates `exp(i Σ_j θ_j G_j / √15)`
/// with `θ_j ~ N(0, noise_scale²)`. The `1/√15` normalizes the generator
/// sum so `noise_scale` sets the per-gate rotation angle scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_qubits: usize,
    pub label_count: usize,
    pub per_label: usize,
    pub anchor_depth: usize,
    pub noise_depth: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

const NOISE_GENERATOR_NORM: f64 = 0.2581988897471611; // 1/√15

#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub id: String,
    pub label: usize,
    pub program: QasmProgram,
}

/// A labeled collection of state-preparation circuits sharing one register
/// width.
#[derive(Debug, Clone)]
pub struct LabeledCircuitDataset {
    pub n_qubits: usize,
    pub label_count: usize,
    pub items: Vec<DatasetItem>,
    pub generator: Option<GeneratorParams>,
}

impl LabeledCircuitDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.label).collect()
    }

    /// Simulates every item into its quantum feature state.
    pub fn feature_states(&self) -> Result<Vec<StateVector>> {
        self.items
            .iter()
            .map(|item| {
                qasm::to_feature_state(&item.program)
                    .map_err(|source| IngestError::Qasm { file: item.id.clone(), source })
            })
            .collect()
    }

    /// Content hash over programs and labels; stable across loads.
    pub fn fingerprint(&self) -> String {
        let mut text = String::new();
        for item in &self.items {
            text.push_str(&item.id);
            text.push(',');
            text.push_str(&item.label.to_string());
            text.push('\n');
            text.push_str(&item.program.to_string());
        }
        fingerprint::hex16(fingerprint::fnv1a_64(text.as_bytes()))
    }
}

/// Draws the synthetic clustered dataset. Deterministic under `seed`.
pub fn generate_clustered_dataset(params: &GeneratorParams) -> Result<LabeledCircuitDataset> {
    if params.label_count < 1 || params.per_label < 1 || params.anchor_depth < 1 || params.noise_depth < 1 {
        return Err(IngestError::InvalidParams(
            "label_count, per_label, anchor_depth and noise_depth must all be ≥ 1".to_string(),
        ));
    }
    if params.n_qubits < 2 {
        return Err(IngestError::InvalidParams(
            "two-qubit anchors need n_qubits ≥ 2".to_string(),
        ));
    }
    if params.n_qubits > qasm::MAX_SIM_QUBITS {
        return Err(IngestError::InvalidParams(format!(
            "n_qubits {} exceeds the simulation cap {}",
            params.n_qubits,
            qasm::MAX_SIM_QUBITS
        )));
    }
    if !(params.noise_scale >= 0.0) {
        return Err(IngestError::InvalidParams("noise_scale must be ≥ 0".to_string()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let random_pair = |rng: &mut ChaCha8Rng| -> (usize, usize) {
        let i = rng.gen_range(0..params.n_qubits);
        let mut j = rng.gen_range(0..params.n_qubits - 1);
        if j >= i {
            j += 1;
        }
        (i, j)
    };

    let anchors: Vec<Vec<TwoQubitGate>> = (0..params.label_count)
        .map(|_| {
            (0..params.anchor_depth)
                .map(|_| {
                    let pair = random_pair(&mut rng);
                    let mut coeffs = [0.0; 15];
                    for c in &mut coeffs {
                        *c = standard_normal(&mut rng);
                    }
                    TwoQubitGate::from_params(pair, coeffs).expect("distinct pair")
                })
                .collect()
        })
        .collect();

    let mut items = Vec::with_capacity(params.label_count * params.per_label);
    let width = (params.label_count * params.per_label).to_string().len().max(4);
    for (label, anchor) in anchors.iter().enumerate() {
        for _ in 0..params.per_label {
            let mut gates = anchor.clone();
            for _ in 0..params.noise_depth {
                let pair = random_pair(&mut rng);
                let mut coeffs = [0.0; 15];
                for c in &mut coeffs {
                    *c = params.noise_scale * NOISE_GENERATOR_NORM * standard_normal(&mut rng);
                }
                gates.push(TwoQubitGate::from_params(pair, coeffs).expect("distinct pair"));
            }
            // Gates listed in application order become statements in order.
            let mut statements = Vec::new();
            for gate in &gates {
                statements.extend(kak::gate_to_statements(gate)?);
            }
            let id = format!("{:0width$}", items.len(), width = width);
            items.push(DatasetItem {
                id,
                label,
                program: QasmProgram {
                    register: "q".to_string(),
                    n_qubits: params.n_qubits,
                    statements,
                },
            });
        }
    }

    Ok(LabeledCircuitDataset {
        n_qubits: params.n_qubits,
        label_count: params.label_count,
        items,
        generator: Some(params.clone()),
    })
}

/// Stratified train/test split: per label, indices are shuffled under the
/// seed and the first `round(train_fraction · count)` go to training.
/// Returned index lists are sorted ascending.
pub fn split_train_test(
    labels: &[usize],
    label_count: usize,
    train_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in 0..label_count {
        let mut idx: Vec<usize> =
            (0..labels.len()).filter(|&i| labels[i] == label).collect();
        // Fisher-Yates.
        for i in (1..idx.len()).rev() {
            let j = rng.gen_range(0..=i);
            idx.swap(i, j);
        }
        let mut take = (train_fraction * idx.len() as f64).round() as usize;
        take = take.min(idx.len());
        if idx.len() > 1 {
            take = take.clamp(1, idx.len() - 1);
        }
        train.extend_from_slice(&idx[..take]);
        test.extend_from_slice(&idx[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

// --- directory format ------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    format: String,
    n_qubits: usize,
    label_count: usize,
    item_count: usize,
    generator: Option<GeneratorParams>,
}

const META_FORMAT: &str = "labeled-qasm-circuits/v1";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}

/// Writes `meta.json`, `labels.csv` and `circuits/<id>.qasm`.
pub fn write_dataset_dir(ds: &LabeledCircuitDataset, dir: &Path) -> Result<()> {
    let circuits = dir.join("circuits");
    std::fs::create_dir_all(&circuits).map_err(io_err(&circuits))?;

    let meta = DatasetMeta {
        format: META_FORMAT.to_string(),
        n_qubits: ds.n_qubits,
        label_count: ds.label_count,
        item_count: ds.items.len(),
        generator: ds.generator.clone(),
    };
    let meta_path = dir.join("meta.json");
    let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    std::fs::write(&meta_path, meta_json).map_err(io_err(&meta_path))?;

    let labels_path = dir.join("labels.csv");
    let mut labels = std::io::BufWriter::new(
        std::fs::File::create(&labels_path).map_err(io_err(&labels_path))?,
    );
    writeln!(labels, "id,label").map_err(io_err(&labels_path))?;
    for item in &ds.items {
        writeln!(labels, "{},{}", item.id, item.label).map_err(io_err(&labels_path))?;
        let qasm_path = circuits.join(format!("{}.qasm", item.id));
        std::fs::write(&qasm_path, item.program.to_string()).map_err(io_err(&qasm_path))?;
    }
    labels.flush().map_err(io_err(&labels_path))?;
    Ok(())
}

/// Loads a conforming dataset directory, re-parsing every circuit.
pub fn load_dataset_dir(dir: &Path) -> Result<LabeledCircuitDataset> {
    let meta_path = dir.join("meta.json");
    let meta_text = std::fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: DatasetMeta =
        serde_json::from_str(&meta_text).map_err(|e| IngestError::BadMeta(e.to_string()))?;
    if meta.format != META_FORMAT {
        return Err(IngestError::BadMeta(format!("unknown format `{}`", meta.format)));
    }

    let labels_path = dir.join("labels.csv");
    let labels_text = std::fs::read_to_string(&labels_path).map_err(io_err(&labels_path))?;
    let mut items = Vec::new();
    for (lineno, line) in labels_text.lines().enumerate() {
        if lineno == 0 {
            if line.trim() != "id,label" {
                return Err(IngestError::BadLabels {
                    line: 1,
                    reason: "expected header `id,label`".to_string(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (id, label_text) = line.split_once(',').ok_or(IngestError::BadLabels {
            line: lineno + 1,
            reason: "expected `id,label`".to_string(),
        })?;
        let label: usize = label_text.trim().parse().map_err(|_| IngestError::BadLabels {
            line: lineno + 1,
            reason: format!("bad label `{label_text}`"),
        })?;
        let id = id.trim().to_string();
        if label >= meta.label_count {
            return Err(IngestError::LabelOutOfRange {
                id,
                label,
                label_count: meta.label_count,
            });
        }
        let qasm_path = dir.join("circuits").join(format!("{id}.qasm"));
        let text = std::fs::read_to_string(&qasm_path).map_err(io_err(&qasm_path))?;
        let program = qasm::parse_qasm(&text)
            .map_err(|source| IngestError::Qasm { file: id.clone(), source })?;
        if program.n_qubits != meta.n_qubits {
            return Err(IngestError::QubitMismatch {
                id,
                expected: meta.n_qubits,
                actual: program.n_qubits,
            });
        }
        items.push(DatasetItem { id, label, program });
    }
    if items.len() != meta.item_count {
        return Err(IngestError::BadMeta(format!(
            "meta declares {} items, labels.csv lists {}",
            meta.item_count,
            items.len()
        )));
    }
    Ok(LabeledCircuitDataset {
        n_qubits: meta.n_qubits,
        label_count: meta.label_count,
        items,
        generator: meta.generator,
    })
}

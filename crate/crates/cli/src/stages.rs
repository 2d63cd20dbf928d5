//! Stage implementations shared by the subcommands and `pipeline`.
//!
//! Every stage writes machine-readable outputs under the configured output
//! directory and returns its report as a JSON value; `pipeline` chains the
//! stages and consolidates the reports. Intermediate artifacts travel
//! through files so stage-wise and pipeline invocations produce identical
//! results.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use eqs_core::eqs::{self, EqsModel, ParameterizedEqs};
use eqs_core::ingest::{self, LabeledCircuitDataset};
use eqs_core::kernel::{self, KernelModel, KernelModelFile};
use eqs_core::spectral::{self, SpectralBundleFile, SpectralDecomposition};
use eqs_core::{aqce, StateVector};

use crate::config::{DatasetSource, RunConfig};

#[derive(Debug)]
pub enum StageError {
    Config(String),
    NotConverged(String),
    Other(String),
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StageError::Config(m) => write!(f, "configuration error: {m}"),
            StageError::NotConverged(m) => write!(f, "synthesis did not converge: {m}"),
            StageError::Other(m) => write!(f, "{m}"),
        }
    }
}

pub type Result<T> = std::result::Result<T, StageError>;

fn other<E: std::fmt::Display>(e: E) -> StageError {
    StageError::Other(e.to_string())
}

pub struct Workspace {
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

/// Dataset plus simulated feature states and the train/test split.
pub struct Prepared {
    pub dataset: LabeledCircuitDataset,
    pub states: Vec<StateVector>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl Prepared {
    pub fn train_states(&self) -> Vec<StateVector> {
        self.train_idx.iter().map(|&i| self.states[i].clone()).collect()
    }

    pub fn train_labels(&self) -> Vec<usize> {
        self.train_idx.iter().map(|&i| self.dataset.items[i].label).collect()
    }

    pub fn test_states(&self) -> Vec<StateVector> {
        self.test_idx.iter().map(|&i| self.states[i].clone()).collect()
    }

    pub fn test_labels(&self) -> Vec<usize> {
        self.test_idx.iter().map(|&i| self.dataset.items[i].label).collect()
    }
}

impl Workspace {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate().map_err(StageError::Config)?;
        let out_dir = PathBuf::from(&config.out_dir);
        std::fs::create_dir_all(&out_dir).map_err(other)?;
        Ok(Self { config, out_dir })
    }

    fn meta(&self) -> Value {
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": self.config.hash(),
            "config": serde_json::to_value(&self.config).expect("config serializes"),
            "seeds": {
                "master": self.config.seed,
                "dataset": match &self.config.dataset {
                    DatasetSource::Generate(g) => json!(g.to_params(self.config.seed).seed),
                    DatasetSource::Dir(_) => Value::Null,
                },
                "split": self.config.split_seed(),
                "aqce": self.config.aqce.to_config(self.config.seed).seed,
                "gradients": self.config.gradients_seed(),
                "adam": self.config.adam.to_config(self.config.seed).seed,
            },
            "generated_at": unix_time(),
        })
    }

    fn write_report(&self, name: &str, mut report: Value) -> Result<Value> {
        if let Value::Object(map) = &mut report {
            if let Value::Object(meta) = self.meta() {
                for (k, v) in meta {
                    map.insert(k, v);
                }
            }
        }
        let path = self.out_dir.join(name);
        let text = serde_json::to_string_pretty(&report).map_err(other)?;
        std::fs::write(&path, text).map_err(other)?;
        Ok(report)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let path = self.out_dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(other)?;
        std::fs::write(&path, text).map_err(other)
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<T> {
        let path = self.out_dir.join(name);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| StageError::Other(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| StageError::Other(format!("{}: {e}", path.display())))
    }

    /// Materializes the configured dataset: loads a directory, or draws the
    /// generator output (deterministic, so no files are required).
    pub fn dataset(&self) -> Result<LabeledCircuitDataset> {
        match &self.config.dataset {
            DatasetSource::Dir(dir) => ingest::load_dataset_dir(Path::new(dir)).map_err(other),
            DatasetSource::Generate(g) => {
                ingest::generate_clustered_dataset(&g.to_params(self.config.seed)).map_err(other)
            }
        }
    }

    pub fn prepare(&self) -> Result<Prepared> {
        let dataset = self.dataset()?;
        let states = dataset.feature_states().map_err(other)?;
        let labels = dataset.labels();
        let (train_idx, test_idx) = ingest::split_train_test(
            &labels,
            dataset.label_count,
            self.config.split.train_fraction,
            self.config.split_seed(),
        );
        Ok(Prepared { dataset, states, train_idx, test_idx })
    }

    // --- stages -------------------------------------------------------------

    /// Writes the generated dataset directory plus its report; with a
    /// directory source it just validates and fingerprints the input.
    pub fn cmd_generate(&self) -> Result<Value> {
        let dataset = self.dataset()?;
        let dir = match &self.config.dataset {
            DatasetSource::Generate(_) => {
                let dir = self.out_dir.join("dataset");
                ingest::write_dataset_dir(&dataset, &dir).map_err(other)?;
                dir
            }
            DatasetSource::Dir(d) => PathBuf::from(d),
        };
        self.write_report(
            "generate_report.json",
            json!({
                "dataset_dir": dir.to_string_lossy(),
                "dataset_fingerprint": dataset.fingerprint(),
                "n_qubits": dataset.n_qubits,
                "label_count": dataset.label_count,
                "items": dataset.len(),
            }),
        )
    }

    /// Trains the one-vs-rest kernel model and reports accuracies.
    pub fn cmd_train(&self) -> Result<Value> {
        let prepared = self.prepare()?;
        let train_states = prepared.train_states();
        let train_labels = prepared.train_labels();
        let mut model = kernel::train_one_vs_rest(
            &train_states,
            &train_labels,
            prepared.dataset.label_count,
            self.config.svm.c,
            self.config.svm.tol,
        )
        .map_err(|e| match e {
            kernel::KernelError::SingleLabel => {
                StageError::Config("dataset has a single label; classification needs two".into())
            }
            e => other(e),
        })?;
        model.dataset_fingerprint = prepared.dataset.fingerprint();
        model.train_indices = prepared.train_idx.clone();

        let train_acc = kernel::accuracy(
            |x| kernel::predict_implicit(&model, x).map(|(l, _)| l),
            &train_states,
            &train_labels,
        )
        .map_err(other)?;
        let test_acc = kernel::accuracy(
            |x| kernel::predict_implicit(&model, x).map(|(l, _)| l),
            &prepared.test_states(),
            &prepared.test_labels(),
        )
        .map_err(other)?;

        self.write_json("model.json", &model.to_file())?;
        self.write_report(
            "train_report.json",
            json!({
                "dataset_fingerprint": model.dataset_fingerprint,
                "train_points": prepared.train_idx.len(),
                "test_points": prepared.test_idx.len(),
                "train_accuracy": train_acc,
                "test_accuracy": test_acc,
            }),
        )
    }

    fn load_model(&self, prepared: &Prepared) -> Result<KernelModel> {
        let file: KernelModelFile = self.read_json("model.json")?;
        if file.dataset_fingerprint != prepared.dataset.fingerprint() {
            return Err(StageError::Config(
                "model.json was trained on a different dataset".to_string(),
            ));
        }
        let states: Vec<StateVector> =
            file.train_indices.iter().map(|&i| prepared.states[i].clone()).collect();
        let labels: Vec<usize> =
            file.train_indices.iter().map(|&i| prepared.dataset.items[i].label).collect();
        kernel::KernelModel::from_file(file, states, labels).map_err(other)
    }

    fn decompose(&self, model: &KernelModel) -> Result<SpectralDecomposition> {
        let gram = kernel::gram(&model.train_states).map_err(other)?;
        spectral::decompose_kernel_model(model, &gram, self.config.gram_schmidt_tol)
            .map_err(other)
    }

    /// Diagonalizes the observables, writes the bundle, the spectrum CSV,
    /// and the exact low-rank accuracy table.
    pub fn cmd_spectral(&self) -> Result<Value> {
        let prepared = self.prepare()?;
        let model = self.load_model(&prepared)?;
        let decomposition = self.decompose(&model)?;

        self.write_json("spectral_bundle.json", &decomposition.to_file())?;

        // Spectrum CSV: one row per (label, k).
        let mut csv = String::from("label,k,lambda,cumulative_ratio\n");
        for obs in &decomposition.observables {
            for k in 1..=obs.eigenvalues.len() {
                let ratio = spectral::cumulative_contribution(obs, k).map_err(other)?;
                csv.push_str(&format!("{},{},{},{}\n", obs.label, k, obs.eigenvalues[k - 1], ratio));
            }
        }
        std::fs::write(self.out_dir.join("spectral.csv"), csv).map_err(other)?;

        // Accuracy-vs-K table; always includes the full-rank row.
        let mut ks: Vec<usize> = self
            .config
            .k_sweep
            .iter()
            .copied()
            .filter(|&k| k <= decomposition.subspace_dim)
            .collect();
        if !ks.contains(&decomposition.subspace_dim) {
            ks.push(decomposition.subspace_dim);
        }
        ks.sort_unstable();
        ks.dedup();
        let mut table = String::from("k,train_accuracy,test_accuracy\n");
        let mut table_rows = Vec::new();
        for &k in &ks {
            let low = decomposition.low_rank_model(k).map_err(other)?;
            let train_acc = kernel::accuracy(
                |x| spectral::predict_low_rank(&low, x).map(|(l, _)| l),
                &prepared.train_states(),
                &prepared.train_labels(),
            )
            .map_err(other)?;
            let test_acc = kernel::accuracy(
                |x| spectral::predict_low_rank(&low, x).map(|(l, _)| l),
                &prepared.test_states(),
                &prepared.test_labels(),
            )
            .map_err(other)?;
            table.push_str(&format!("{k},{train_acc},{test_acc}\n"));
            table_rows.push(json!({"k": k, "train_accuracy": train_acc, "test_accuracy": test_acc}));
        }
        std::fs::write(self.out_dir.join("accuracy_vs_k.csv"), table).map_err(other)?;

        self.write_report(
            "spectral_report.json",
            json!({
                "subspace_dim": decomposition.subspace_dim,
                "gram_schmidt_tol": decomposition.gram_schmidt_tol,
                "eigenvalue_sums": decomposition
                    .observables
                    .iter()
                    .map(|o| o.eigenvalues.iter().sum::<f64>())
                    .collect::<Vec<_>>(),
                "accuracy_vs_k": table_rows,
            }),
        )
    }

    fn effective_k(&self, decomposition_dim: usize, label_count: usize) -> usize {
        self.config.k.unwrap_or(label_count).min(decomposition_dim).max(1)
    }

    /// Synthesizes the surrogate circuits from the spectral bundle and
    /// exports traces plus heatmap data.
    pub fn cmd_synthesize(&self) -> Result<Value> {
        let prepared = self.prepare()?;
        let model = self.load_model(&prepared)?;
        let bundle: SpectralBundleFile = self.read_json("spectral_bundle.json")?;
        if bundle.dataset_fingerprint != prepared.dataset.fingerprint() {
            return Err(StageError::Config(
                "spectral_bundle.json references a different dataset".to_string(),
            ));
        }
        let observables =
            spectral::observables_from_file(&bundle, &model.train_states).map_err(other)?;
        let decomposition = SpectralDecomposition {
            subspace_dim: bundle.subspace_dim,
            gram_schmidt_tol: bundle.gram_schmidt_tol,
            biases: bundle.labels.iter().map(|l| l.bias).collect(),
            data_coeffs: Vec::new(),
            dataset_fingerprint: bundle.dataset_fingerprint.clone(),
            train_indices: bundle.train_indices.clone(),
            observables,
        };

        let k = self.effective_k(decomposition.subspace_dim, prepared.dataset.label_count);
        let aqce_config = self.config.aqce.to_config(self.config.seed);
        let (eqs_model, traces) =
            EqsModel::from_spectral(&decomposition, k, &aqce_config).map_err(other)?;

        for (label_model, trace) in eqs_model.per_label.iter().zip(&traces) {
            let mut csv = String::from("update_index,sweep,m,pair_i,pair_j,f_total");
            let k_count = label_model.eigenvalues.len();
            for i in 0..k_count {
                csv.push_str(&format!(",f_{i}"));
            }
            csv.push('\n');
            for (idx, rec) in trace.records.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}",
                    idx, rec.sweep, rec.gate_index, rec.pair.0, rec.pair.1, rec.total
                ));
                for f in &rec.fidelities {
                    csv.push_str(&format!(",{f}"));
                }
                csv.push('\n');
            }
            std::fs::write(
                self.out_dir.join(format!("aqce_trace_{}.csv", label_model.label)),
                csv,
            )
            .map_err(other)?;

            let mut heat = String::from("gate_index,qubit_i,qubit_j,frobenius_distance\n");
            let distances = aqce::identity_distances(&label_model.circuit);
            for (g, (gate, d)) in
                label_model.circuit.gates().iter().zip(&distances).enumerate()
            {
                heat.push_str(&format!("{},{},{},{}\n", g + 1, gate.pair().0, gate.pair().1, d));
            }
            std::fs::write(
                self.out_dir.join(format!("heatmap_{}.csv", label_model.label)),
                heat,
            )
            .map_err(other)?;
        }

        self.write_json("eqs_model.json", &eqs_model)?;

        // Accuracy comparison against the exact low-rank model at the same K.
        let low = decomposition.low_rank_model(k).map_err(other)?;
        let eqs_test_acc = kernel::accuracy(
            |x| eqs::predict_eqs(&eqs_model, x).map(|(l, _)| l),
            &prepared.test_states(),
            &prepared.test_labels(),
        )
        .map_err(other)?;
        let low_test_acc = kernel::accuracy(
            |x| spectral::predict_low_rank(&low, x).map(|(l, _)| l),
            &prepared.test_states(),
            &prepared.test_labels(),
        )
        .map_err(other)?;

        let report = self.write_report(
            "synthesize_report.json",
            json!({
                "k": k,
                "converged": eqs_model.all_converged(),
                "per_label": eqs_model
                    .per_label
                    .iter()
                    .map(|m| json!({
                        "label": m.label,
                        "converged": m.converged,
                        "gate_count": m.circuit.len(),
                        "achieved_fidelities": m.achieved_fidelities,
                    }))
                    .collect::<Vec<_>>(),
                "eqs_test_accuracy": eqs_test_acc,
                "exact_low_rank_test_accuracy": low_test_acc,
            }),
        )?;
        if !eqs_model.all_converged() {
            return Err(StageError::NotConverged(format!(
                "labels {:?} missed their fidelity targets within the gate budget",
                eqs_model
                    .per_label
                    .iter()
                    .filter(|m| !m.converged)
                    .map(|m| m.label)
                    .collect::<Vec<_>>()
            )));
        }
        Ok(report)
    }

    /// Gradient-magnitude comparison on the held-out split.
    pub fn cmd_gradients(&self) -> Result<Value> {
        let prepared = self.prepare()?;
        let eqs_model: EqsModel = self.read_json("eqs_model.json")?;
        let parameterized = ParameterizedEqs::from_model(&eqs_model).map_err(other)?;
        let report = eqs::gradient_experiment(
            &parameterized,
            &prepared.test_states(),
            &prepared.test_labels(),
            self.config.gradients.n_random_seeds,
            self.config.gradients_seed(),
        )
        .map_err(other)?;
        let per_label: Vec<Value> = report
            .iter()
            .map(|r| {
                let n = r.sum_sq_random.len() as f64;
                let mean = r.sum_sq_random.iter().sum::<f64>() / n;
                let var = r
                    .sum_sq_random
                    .iter()
                    .map(|x| (x - mean) * (x - mean))
                    .sum::<f64>()
                    / n;
                json!({
                    "label": r.label,
                    "sum_sq_eqs": r.sum_sq_eqs,
                    "sum_sq_random": r.sum_sq_random,
                    "random_mean": mean,
                    "random_std": var.sqrt(),
                    "ratio_mean": r.ratio_mean,
                })
            })
            .collect();
        self.write_report(
            "gradient_report.json",
            json!({
                "eval_points": prepared.test_idx.len(),
                "n_random_seeds": self.config.gradients.n_random_seeds,
                "per_label": per_label,
            }),
        )
    }

    /// Adam fine-tuning of the parameterized surrogate on the training
    /// split; writes one loss trace per label.
    pub fn cmd_finetune(&self) -> Result<Value> {
        let prepared = self.prepare()?;
        let eqs_model: EqsModel = self.read_json("eqs_model.json")?;
        let parameterized = ParameterizedEqs::from_model(&eqs_model).map_err(other)?;
        let adam = self.config.adam.to_config(self.config.seed);
        let train_states = prepared.train_states();
        let train_labels = prepared.train_labels();
        let mut summaries = Vec::new();
        for model in &parameterized.per_label {
            let (trained, trace) =
                eqs::adam_train(model, &train_states, &train_labels, &adam).map_err(other)?;
            let mut csv = String::from("step,loss\n");
            for (step, l) in trace.iter().enumerate() {
                csv.push_str(&format!("{},{}\n", step + 1, l));
            }
            std::fs::write(
                self.out_dir.join(format!("loss_trace_{}.csv", model.label)),
                csv,
            )
            .map_err(other)?;
            let final_loss =
                eqs::loss(&trained, &train_states, &train_labels).map_err(other)?;
            summaries.push(json!({
                "label": model.label,
                "initial_loss": trace.first(),
                "final_loss": final_loss,
                "steps": trace.len(),
            }));
        }
        self.write_report("finetune_report.json", json!({ "per_label": summaries }))
    }

    /// Runs every stage in order and consolidates the reports. Synthesis
    /// non-convergence is deferred so later stages still run.
    pub fn cmd_pipeline(&self) -> Result<Value> {
        let generate = self.cmd_generate()?;
        let train = self.cmd_train()?;
        let spectral = self.cmd_spectral()?;
        let (synthesize, not_converged) = match self.cmd_synthesize() {
            Ok(v) => (v, false),
            Err(StageError::NotConverged(_)) => {
                (self.read_json::<Value>("synthesize_report.json")?, true)
            }
            Err(e) => return Err(e),
        };
        let gradients = self.cmd_gradients()?;
        let report = self.write_report(
            "pipeline_report.json",
            json!({
                "stages": {
                    "generate": generate,
                    "train": train,
                    "spectral": spectral,
                    "synthesize": synthesize,
                    "gradients": gradients,
                },
            }),
        )?;
        if not_converged {
            return Err(StageError::NotConverged(
                "synthesis missed its fidelity targets; see synthesize_report.json".to_string(),
            ));
        }
        Ok(report)
    }
}

fn unix_time() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

//! The explicit quantum surrogate: a synthesized circuit `C^(l)` plus a
//! diagonal observable `Σ_k λ_k |k⟩⟨k|` per label, evaluated as
//! `f^(l)(x) = Σ_k λ_k |⟨k|C^(l)†|ψ(x)⟩|² + b^(l)`.
//!
//! For trainability work every two-qubit gate is re-parameterized as
//! `exp(i Σ_j θ_j G_j)` over the 15-generator Pauli basis. Gradients of the
//! weighted cross-entropy are computed analytically: the derivative of each
//! gate exponential comes from the eigendecomposition form of the Fréchet
//! derivative, and the chain rule contracts through the same environment
//! tensors the synthesizer uses. Simulation gives exact expectation values,
//! so the analytic path is both faster and a stronger test target than
//! shift-rule sampling.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aqce::{self, AqceConfig, AqceTrace};
use crate::kernel::argmax;
use crate::numerics::{self, CMatrix, HermitianMatrix};
use crate::simulator::{
    apply_matrix, environment_tensor, exp_i_generators, generator_basis, trace_mul_adjoint,
    GateCircuit, Mat4, SimError, StateVector,
};
use crate::spectral::{self, SpectralDecomposition};

#[derive(Debug, Error)]
pub enum EqsError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error(transparent)]
    Aqce(#[from] aqce::AqceError),
    #[error(transparent)]
    Spectral(#[from] spectral::SpectralError),
    #[error("gate logarithm failed: reconstruction residual {0:.3e}")]
    LogBranch(f64),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("state/label count mismatch: {states} states, {labels} labels")]
    CountMismatch { states: usize, labels: usize },
    #[error("invalid optimizer config: {0}")]
    BadConfig(String),
}

pub type Result<T> = std::result::Result<T, EqsError>;

// --- the surrogate ----------------------------------------------------------

/// One label's surrogate: circuit, diagonal observable, classical bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EqsLabelModel {
    pub label: usize,
    pub circuit: GateCircuit,
    pub eigenvalues: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub achieved_fidelities: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EqsModel {
    pub n_qubits: usize,
    pub per_label: Vec<EqsLabelModel>,
}

impl EqsModel {
    /// Synthesizes one circuit per label embedding the top-K eigenvectors
    /// of the spectral decomposition.
    pub fn from_spectral(
        decomposition: &SpectralDecomposition,
        k: usize,
        config: &AqceConfig,
    ) -> Result<(Self, Vec<AqceTrace>)> {
        let mut per_label = Vec::with_capacity(decomposition.observables.len());
        let mut traces = Vec::with_capacity(decomposition.observables.len());
        let mut n_qubits = 0;
        for (obs, &bias) in decomposition.observables.iter().zip(&decomposition.biases) {
            let truncated = spectral::truncate(obs, k.min(obs.eigenvalues.len()))?;
            n_qubits = truncated.eigenvectors[0].n_qubits();
            let result = aqce::synthesize_isometry(&truncated.eigenvectors, config)?;
            per_label.push(EqsLabelModel {
                label: obs.label,
                circuit: result.circuit,
                eigenvalues: truncated.eigenvalues,
                bias,
                converged: result.converged,
                achieved_fidelities: result.trace.final_fidelities.clone(),
            });
            traces.push(result.trace);
        }
        Ok((EqsModel { n_qubits, per_label }, traces))
    }

    pub fn decision_values(&self, x: &StateVector) -> Result<Vec<f64>> {
        self.per_label
            .iter()
            .map(|m| {
                let back = m.circuit.apply_adjoint(x)?;
                let mut f = m.bias;
                for (k, lambda) in m.eigenvalues.iter().enumerate() {
                    f += lambda * back.amp(k).norm_sqr();
                }
                Ok(f)
            })
            .collect()
    }

    pub fn all_converged(&self) -> bool {
        self.per_label.iter().all(|m| m.converged)
    }
}

/// Argmax prediction from the surrogate's decision values.
pub fn predict_eqs(model: &EqsModel, x: &StateVector) -> Result<(usize, Vec<f64>)> {
    let decisions = model.decision_values(x)?;
    Ok((argmax(&decisions), decisions))
}

// --- parameterization -------------------------------------------------------

/// A gate expressed by its 15 generator coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterizedGate {
    pub pair: (usize, usize),
    pub theta: [f64; 15],
}

/// One label's surrogate with every gate re-parameterized; eigenvalues and
/// bias stay frozen.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterizedLabelModel {
    pub label: usize,
    pub n_qubits: usize,
    pub gates: Vec<ParameterizedGate>,
    pub eigenvalues: Vec<f64>,
    pub bias: f64,
}

impl ParameterizedLabelModel {
    pub fn param_count(&self) -> usize {
        15 * self.gates.len()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for g in &self.gates {
            out.extend_from_slice(&g.theta);
        }
        out
    }

    pub fn set_flattened(&mut self, theta: &[f64]) {
        assert_eq!(theta.len(), self.param_count());
        for (g, chunk) in self.gates.iter_mut().zip(theta.chunks_exact(15)) {
            g.theta.copy_from_slice(chunk);
        }
    }

    pub fn circuit(&self) -> Result<GateCircuit> {
        let gates = self
            .gates
            .iter()
            .map(|g| crate::simulator::TwoQubitGate::from_params(g.pair, g.theta))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(GateCircuit::new(self.n_qubits, gates)?)
    }

    pub fn decision(&self, x: &StateVector) -> Result<f64> {
        let matrices = self.gate_matrices();
        let phi = self.apply_adjoint_with(&matrices, x)?;
        let mut f = self.bias;
        for (k, lambda) in self.eigenvalues.iter().enumerate() {
            f += lambda * phi.amp(k).norm_sqr();
        }
        Ok(f)
    }

    fn gate_matrices(&self) -> Vec<Mat4> {
        self.gates.iter().map(|g| exp_i_generators(&g.theta)).collect()
    }

    fn apply_adjoint_with(&self, matrices: &[Mat4], x: &StateVector) -> Result<StateVector> {
        let mut state = x.clone();
        for (g, m) in self.gates.iter().zip(matrices) {
            state = apply_matrix(&state, crate::simulator::adjoint4(m), g.pair)?;
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterizedEqs {
    pub n_qubits: usize,
    pub per_label: Vec<ParameterizedLabelModel>,
}

impl ParameterizedEqs {
    /// Recovers generator coefficients for every gate of every circuit.
    pub fn from_model(model: &EqsModel) -> Result<Self> {
        let per_label = model
            .per_label
            .iter()
            .map(|m| {
                let thetas = recover_params(&m.circuit)?;
                Ok(ParameterizedLabelModel {
                    label: m.label,
                    n_qubits: m.circuit.n_qubits(),
                    gates: m
                        .circuit
                        .gates()
                        .iter()
                        .zip(thetas)
                        .map(|(g, theta)| ParameterizedGate { pair: g.pair(), theta })
                        .collect(),
                    eigenvalues: m.eigenvalues.clone(),
                    bias: m.bias,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ParameterizedEqs { n_qubits: model.n_qubits, per_label })
    }

    pub fn decision_values(&self, x: &StateVector) -> Result<Vec<f64>> {
        self.per_label.iter().map(|m| m.decision(x)).collect()
    }
}

/// Generator coefficients of each gate: `θ` with
/// `exp(i Σ_j θ_j G_j) = U` up to global phase.
pub fn recover_params(circuit: &GateCircuit) -> Result<Vec<[f64; 15]>> {
    circuit
        .gates()
        .iter()
        .map(|g| hermitian_log_coefficients(g.matrix()))
        .collect()
}

fn hermitian_log_coefficients(u: &Mat4) -> Result<[f64; 15]> {
    match log_attempt(u) {
        Ok(theta) => Ok(theta),
        // An eigenvalue pinned at −1 can foil the branch; a 1e-12 phase
        // nudge moves it off and costs nothing at the reconstruction
        // tolerance.
        Err(_) => {
            let nudge = Complex64::from_polar(1.0, 1e-12);
            let mut shifted = *u;
            for row in shifted.iter_mut() {
                for z in row.iter_mut() {
                    *z *= nudge;
                }
            }
            log_attempt(&shifted)
        }
    }
}

fn log_attempt(u: &Mat4) -> Result<[f64; 15]> {
    let uc: CMatrix = u.iter().map(|r| r.to_vec()).collect();
    let det = numerics::det(&uc);
    let strip = Complex64::from_polar(1.0, -det.arg() / 4.0);
    let su: CMatrix = uc
        .iter()
        .map(|row| row.iter().map(|z| z * strip).collect())
        .collect();

    // U' = exp(iH): real and imaginary parts of U' are commuting Hermitian
    // matrices sharing H's eigenbasis; the eigenphases come from atan2.
    let mut re = vec![vec![Complex64::new(0.0, 0.0); 4]; 4];
    let mut im = vec![vec![Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let a = 0.5 * (su[i][j] + su[j][i].conj());
            let b = (su[i][j] - su[j][i].conj()) * Complex64::new(0.0, -0.5);
            re[i][j] = a;
            im[i][j] = b;
        }
    }
    let (v, a_vals, b_vals) = numerics::eigh_commuting_pair(
        &HermitianMatrix::new(re)?,
        &HermitianMatrix::new(im)?,
    )?;
    let mu: Vec<f64> = a_vals.iter().zip(&b_vals).map(|(&a, &b)| b.atan2(a)).collect();

    let mut h = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            h[i][j] = (0..4).map(|k| v[i][k] * mu[k] * v[j][k].conj()).sum();
        }
    }
    let mut theta = [0.0f64; 15];
    for (t, g) in theta.iter_mut().zip(generator_basis()) {
        let mut tr = Complex64::new(0.0, 0.0);
        for a in 0..4 {
            for b in 0..4 {
                tr += g[a][b] * h[b][a];
            }
        }
        *t = tr.re / 4.0;
    }

    // Phase-aware reconstruction check.
    let rebuilt = exp_i_generators(&theta);
    let overlap = trace_mul_adjoint(u, &rebuilt);
    let phase = if overlap.norm() > 1e-300 {
        overlap / overlap.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut dev = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            dev += (rebuilt[i][j] * phase - u[i][j]).norm_sqr();
        }
    }
    let dev = dev.sqrt();
    if dev > 1e-8 {
        return Err(EqsError::LogBranch(dev));
    }
    Ok(theta)
}

// --- loss and gradients -----------------------------------------------------

fn sigmoid(f: f64) -> f64 {
    1.0 / (1.0 + (-f).exp())
}

const PROB_CLAMP: f64 = 1e-12;

struct BatchWeights {
    positive: f64,
    negative: f64,
    count: f64,
}

fn batch_weights(model_label: usize, labels: &[usize]) -> BatchWeights {
    let m = labels.len() as f64;
    let m_l = labels.iter().filter(|&&l| l == model_label).count() as f64;
    BatchWeights { positive: (m - m_l) / m, negative: m_l / m, count: m }
}

/// Weighted cross-entropy of one label's surrogate over a batch:
/// `L = −(1/M) Σ_x [ (M_{≠l}/M)·y·log p + (M_l/M)·(1−y)·log(1−p) ]` with
/// `p = σ(f)` clamped away from 0 and 1.
pub fn loss(
    model: &ParameterizedLabelModel,
    states: &[StateVector],
    labels: &[usize],
) -> Result<f64> {
    check_batch(states, labels)?;
    let w = batch_weights(model.label, labels);
    let matrices = model.gate_matrices();
    let mut total = 0.0;
    for (x, &l) in states.iter().zip(labels) {
        let phi = model.apply_adjoint_with(&matrices, x)?;
        let mut f = model.bias;
        for (k, lambda) in model.eigenvalues.iter().enumerate() {
            f += lambda * phi.amp(k).norm_sqr();
        }
        let p = sigmoid(f).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let y = f64::from(l == model.label);
        total -= (w.positive * y * p.ln() + w.negative * (1.0 - y) * (1.0 - p).ln()) / w.count;
    }
    Ok(total)
}

/// Loss plus the exact analytic gradient over all `15·J` gate parameters,
/// flattened gate-major (`index = 15·gate + generator`).
pub fn loss_gradient(
    model: &ParameterizedLabelModel,
    states: &[StateVector],
    labels: &[usize],
) -> Result<(f64, Vec<f64>)> {
    check_batch(states, labels)?;
    let w = batch_weights(model.label, labels);
    let j = model.gates.len();
    let dim = 1usize << model.n_qubits;

    // Per gate: the unitary and its 15 parameter derivatives, shared by
    // the whole batch.
    let mut matrices = Vec::with_capacity(j);
    let mut derivatives = Vec::with_capacity(j);
    for g in &model.gates {
        let (u, du) = gate_exp_with_derivatives(&g.theta)?;
        matrices.push(u);
        derivatives.push(du);
    }

    let k_count = model.eigenvalues.len();
    let per_point: Vec<(f64, Vec<f64>)> = states
        .par_iter()
        .zip(labels.par_iter())
        .map(|(x, &l)| {
            // Forward: s_m = U_m† s_{m−1}, so s_J = C†|ψ(x)⟩.
            let mut prefixes = Vec::with_capacity(j + 1);
            prefixes.push(x.clone());
            for (g, m) in model.gates.iter().zip(&matrices) {
                let next = apply_matrix(
                    prefixes.last().expect("non-empty"),
                    crate::simulator::adjoint4(m),
                    g.pair,
                )
                .expect("validated gates");
                prefixes.push(next);
            }
            let phi = prefixes.last().expect("non-empty");
            let mut f = model.bias;
            for (k, lambda) in model.eigenvalues.iter().enumerate() {
                f += lambda * phi.amp(k).norm_sqr();
            }
            let p = sigmoid(f).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            let y = f64::from(l == model.label);
            let point_loss =
                -(w.positive * y * p.ln() + w.negative * (1.0 - y) * (1.0 - p).ln()) / w.count;
            let dl_df = -(w.positive * y * (1.0 - p) - w.negative * (1.0 - y) * p) / w.count;

            // Cotangent of φ: f = Σ λ_k |φ_k|² gives df = 2 Re⟨g|dφ⟩ with
            // g_k = λ_k φ_k.
            let mut cotangent = vec![Complex64::new(0.0, 0.0); dim];
            for (k, lambda) in model.eigenvalues.iter().enumerate().take(k_count) {
                cotangent[k] = *lambda * phi.amp(k);
            }
            let mut carrier =
                StateVector::from_amps(model.n_qubits, cotangent).expect("length matches");

            // Backward: dL/dθ_{m,j} = dL/df · 2 Re Tr[E_m (dU_{m,j})†]
            // with E_m the pair-environment of (carrier, s_{m−1}).
            let mut grad = vec![0.0f64; 15 * j];
            for m in (0..j).rev() {
                let env = environment_tensor(
                    &[(&carrier, &prefixes[m])],
                    model.gates[m].pair,
                )
                .expect("validated pair")[0];
                for (jj, du) in derivatives[m].iter().enumerate() {
                    grad[15 * m + jj] = dl_df * 2.0 * trace_mul_adjoint(&env, du).re;
                }
                if m > 0 {
                    carrier = apply_matrix(&carrier, matrices[m], model.gates[m].pair)
                        .expect("validated pair");
                }
            }
            (point_loss, grad)
        })
        .collect();

    let mut total_loss = 0.0;
    let mut total_grad = vec![0.0f64; 15 * j];
    for (pl, pg) in per_point {
        total_loss += pl;
        for (t, g) in total_grad.iter_mut().zip(&pg) {
            *t += g;
        }
    }
    Ok((total_loss, total_grad))
}

fn check_batch(states: &[StateVector], labels: &[usize]) -> Result<()> {
    if states.is_empty() {
        return Err(EqsError::EmptyBatch);
    }
    if states.len() != labels.len() {
        return Err(EqsError::CountMismatch { states: states.len(), labels: labels.len() });
    }
    Ok(())
}

/// `U = exp(i Σ θ_j G_j)` together with `∂U/∂θ_j` for every generator,
/// via the eigendecomposition form of the Fréchet derivative:
/// with `H = VhV†`, `∂U = V (Γ ∘ V†(iG_j)V) V†` where
/// `Γ_ab = e^{i(h_a+h_b)/2}·sinc((h_a−h_b)/2)`.
fn gate_exp_with_derivatives(theta: &[f64; 15]) -> Result<(Mat4, [Mat4; 15])> {
    let basis = generator_basis();
    let mut h = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (t, g) in theta.iter().zip(basis) {
        for i in 0..4 {
            for j in 0..4 {
                h[i][j] += *t * g[i][j];
            }
        }
    }
    let entries: CMatrix = h.iter().map(|r| r.to_vec()).collect();
    let (vals, v) = numerics::eigh(&HermitianMatrix::new(entries)?)?;

    let mut u = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            u[i][j] = (0..4)
                .map(|k| v[i][k] * Complex64::from_polar(1.0, vals[k]) * v[j][k].conj())
                .sum();
        }
    }

    let sinc = |x: f64| if x.abs() < 1e-4 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    let mut gamma = [[Complex64::new(0.0, 0.0); 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let mid = 0.5 * (vals[a] + vals[b]);
            let half = 0.5 * (vals[a] - vals[b]);
            gamma[a][b] = Complex64::from_polar(sinc(half), mid);
        }
    }

    let mut derivatives = [[[Complex64::new(0.0, 0.0); 4]; 4]; 15];
    for (out, g) in derivatives.iter_mut().zip(basis) {
        // M = V† (iG) V, then ∂U = V (Γ∘M) V†.
        let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                let mut s = Complex64::new(0.0, 0.0);
                for r in 0..4 {
                    for c in 0..4 {
                        s += v[r][a].conj() * Complex64::new(0.0, 1.0) * g[r][c] * v[c][b];
                    }
                }
                m[a][b] = s * gamma[a][b];
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = (0..4)
                    .flat_map(|a| (0..4).map(move |b| (a, b)))
                    .map(|(a, b)| v[i][a] * m[a][b] * v[j][b].conj())
                    .sum();
            }
        }
    }
    Ok((u, derivatives))
}

// --- gradient experiment -----------------------------------------------------

/// Per-label comparison of gradient magnitudes at the surrogate's own
/// parameters versus uniform-random re-initializations of the same
/// circuit topology.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientExperimentLabel {
    pub label: usize,
    pub sum_sq_eqs: f64,
    pub sum_sq_random: Vec<f64>,
    pub ratio_mean: f64,
}

/// Σ_j g_j² at the recovered parameters and at `θ ~ U[0, 2π)` over the
/// same topology, one draw per seed; deterministic under `seed`.
pub fn gradient_experiment(
    eqs: &ParameterizedEqs,
    states: &[StateVector],
    labels: &[usize],
    n_random_seeds: usize,
    seed: u64,
) -> Result<Vec<GradientExperimentLabel>> {
    check_batch(states, labels)?;
    if n_random_seeds == 0 {
        return Err(EqsError::BadConfig("n_random_seeds must be ≥ 1".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(eqs.per_label.len());
    for model in &eqs.per_label {
        let (_, grad) = loss_gradient(model, states, labels)?;
        let sum_sq_eqs: f64 = grad.iter().map(|g| g * g).sum();
        let mut sum_sq_random = Vec::with_capacity(n_random_seeds);
        for _ in 0..n_random_seeds {
            let mut random = model.clone();
            for gate in &mut random.gates {
                for t in &mut gate.theta {
                    *t = rng.gen::<f64>() * std::f64::consts::TAU;
                }
            }
            let (_, rg) = loss_gradient(&random, states, labels)?;
            sum_sq_random.push(rg.iter().map(|g| g * g).sum());
        }
        let mean_random =
            sum_sq_random.iter().sum::<f64>() / sum_sq_random.len() as f64;
        out.push(GradientExperimentLabel {
            label: model.label,
            sum_sq_eqs,
            sum_sq_random,
            ratio_mean: sum_sq_eqs / mean_random.max(f64::MIN_POSITIVE),
        });
    }
    Ok(out)
}

// --- Adam fine-tuning ---------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            alpha: 0.009,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 1000,
            steps: 200,
            seed: 0,
        }
    }
}

/// Adam with bias correction over one label's gate parameters; eigenvalues
/// and bias stay frozen. Batches are drawn from a deterministic shuffle,
/// reshuffled whenever the pass through the data completes. Returns the
/// trained model and the per-step batch loss trace.
pub fn adam_train(
    model: &ParameterizedLabelModel,
    states: &[StateVector],
    labels: &[usize],
    config: &AdamConfig,
) -> Result<(ParameterizedLabelModel, Vec<f64>)> {
    check_batch(states, labels)?;
    if config.steps < 1 {
        return Err(EqsError::BadConfig("steps must be ≥ 1".to_string()));
    }
    if config.batch_size < 1 {
        return Err(EqsError::BadConfig("batch_size must be ≥ 1".to_string()));
    }
    let batch_size = config.batch_size.min(states.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..states.len()).collect();
    let mut cursor = order.len(); // force an initial shuffle

    let mut trained = model.clone();
    let mut theta = trained.flatten();
    let mut m1 = vec![0.0f64; theta.len()];
    let mut m2 = vec![0.0f64; theta.len()];
    let mut trace = Vec::with_capacity(config.steps);

    for step in 1..=config.steps {
        let mut batch_idx = Vec::with_capacity(batch_size);
        while batch_idx.len() < batch_size {
            if cursor >= order.len() {
                for i in (1..order.len()).rev() {
                    let j = rng.gen_range(0..=i);
                    order.swap(i, j);
                }
                cursor = 0;
            }
            batch_idx.push(order[cursor]);
            cursor += 1;
        }
        let batch_states: Vec<StateVector> =
            batch_idx.iter().map(|&i| states[i].clone()).collect();
        let batch_labels: Vec<usize> = batch_idx.iter().map(|&i| labels[i]).collect();

        let (batch_loss, grad) = loss_gradient(&trained, &batch_states, &batch_labels)?;
        trace.push(batch_loss);

        let b1t = 1.0 - config.beta1.powi(step as i32);
        let b2t = 1.0 - config.beta2.powi(step as i32);
        for i in 0..theta.len() {
            m1[i] = config.beta1 * m1[i] + (1.0 - config.beta1) * grad[i];
            m2[i] = config.beta2 * m2[i] + (1.0 - config.beta2) * grad[i] * grad[i];
            let m_hat = m1[i] / b1t;
            let v_hat = m2[i] / b2t;
            theta[i] -= config.alpha * m_hat / (v_hat.sqrt() + config.epsilon);
        }
        trained.set_flattened(&theta);
    }
    Ok((trained, trace))
}

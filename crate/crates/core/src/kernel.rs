//! The implicit model: fidelity quantum kernel, Gram matrix, soft-margin SVM
//! dual solver (SMO with maximal-violating-pair selection), and a
//! one-vs-rest multi-class wrapper.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{self, HermitianMatrix};
use crate::simulator::{inner_product, SimError, StateVector};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("Gram matrix needs at least one state")]
    EmptyInput,
    #[error("state {index} is not normalized: ⟨ψ|ψ⟩ = {norm}")]
    NotNormalized { index: usize, norm: f64 },
    #[error("binary training requires both classes, got only y = {0}")]
    SingleClass(f64),
    #[error("training requires at least two distinct labels")]
    SingleLabel,
    #[error("regularization C must be positive, got {0}")]
    BadRegularization(f64),
    #[error("Gram matrix is not positive semidefinite: min eigenvalue {0:.3e}")]
    NotPsd(f64),
    #[error("SMO did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("label/state count mismatch: {labels} labels, {states} states")]
    CountMismatch { labels: usize, states: usize },
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error("model file is malformed: {0}")]
    BadModelFile(String),
}

pub type Result<T> = std::result::Result<T, KernelError>;

const PSD_TOL: f64 = -1e-8;

/// `k(a, b) = |⟨a|b⟩|²`, the pure-state fidelity kernel.
pub fn quantum_kernel(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(inner_product(a, b)?.norm_sqr())
}

/// Kernel matrix over a set of feature states, with the raw complex
/// overlaps retained for subspace work.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: Vec<Vec<f64>>,
    /// `overlaps[r][c] = ⟨ψ_r|ψ_c⟩` (row is the bra).
    overlaps: Vec<Vec<Complex64>>,
    min_eig: OnceLock<f64>,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn overlaps(&self) -> &[Vec<Complex64>] {
        &self.overlaps
    }

    /// Smallest eigenvalue of the kernel matrix; computed once on demand.
    pub fn min_eigenvalue(&self) -> f64 {
        *self.min_eig.get_or_init(|| {
            let m: numerics::CMatrix = self
                .entries
                .iter()
                .map(|row| row.iter().map(|&x| Complex64::new(x, 0.0)).collect())
                .collect();
            let h = HermitianMatrix::new(m).expect("kernel matrix is symmetric");
            let (vals, _) = numerics::eigh(&h).expect("Jacobi converges on PSD input");
            vals.last().copied().unwrap_or(0.0)
        })
    }
}

/// Builds the Gram matrix `K_{mm'} = |⟨ψ_m|ψ_m'⟩|²`.
pub fn gram(states: &[StateVector]) -> Result<GramMatrix> {
    if states.is_empty() {
        return Err(KernelError::EmptyInput);
    }
    for (i, s) in states.iter().enumerate() {
        let norm = s.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(KernelError::NotNormalized { index: i, norm });
        }
    }
    let m = states.len();
    let upper: Vec<Vec<Complex64>> = (0..m)
        .into_par_iter()
        .map(|r| {
            (r..m)
                .map(|c| inner_product(&states[r], &states[c]).expect("equal qubit counts"))
                .collect()
        })
        .collect();
    let mut overlaps = vec![vec![Complex64::new(0.0, 0.0); m]; m];
    for r in 0..m {
        for (offset, &v) in upper[r].iter().enumerate() {
            let c = r + offset;
            overlaps[r][c] = v;
            overlaps[c][r] = v.conj();
        }
    }
    let mut entries = vec![vec![0.0; m]; m];
    for r in 0..m {
        entries[r][r] = 1.0;
        for c in (r + 1)..m {
            let k = overlaps[r][c].norm_sqr();
            entries[r][c] = k;
            entries[c][r] = k;
        }
    }
    Ok(GramMatrix { entries, overlaps, min_eig: OnceLock::new() })
}

/// Solution of one binary soft-margin dual problem.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    /// Non-negative dual variables λ.
    pub lambda: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Dual objective after every update; non-decreasing.
    pub objective_trace: Vec<f64>,
}

/// Maximal-violating-pair SMO for
/// `max Σλ − ½ΣΣ λλ yy K` s.t. `0 ≤ λ ≤ C`, `Σ λy = 0`.
pub fn smo_solve(k: &[Vec<f64>], y: &[f64], c: f64, tol: f64) -> Result<SmoSolution> {
    let m = y.len();
    let mut lambda = vec![0.0f64; m];
    // Gradient of ½λᵀQλ − Σλ with Q_ij = y_i y_j K_ij.
    let mut grad = vec![-1.0f64; m];
    let mut trace = vec![0.0f64];
    let max_iter = 100_000.max(100 * m);

    for iter in 0..max_iter {
        let mut i_best: Option<(usize, f64)> = None;
        let mut j_best: Option<(usize, f64)> = None;
        for t in 0..m {
            let score = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && lambda[t] < c) || (y[t] < 0.0 && lambda[t] > 0.0);
            let in_low = (y[t] < 0.0 && lambda[t] < c) || (y[t] > 0.0 && lambda[t] > 0.0);
            if in_up && i_best.map_or(true, |(_, s)| score > s) {
                i_best = Some((t, score));
            }
            if in_low && j_best.map_or(true, |(_, s)| score < s) {
                j_best = Some((t, score));
            }
        }
        let ((i, up), (j, low)) = match (i_best, j_best) {
            (Some(a), Some(b)) => (a, b),
            _ => break,
        };
        if up - low <= tol {
            return Ok(finish(y, c, lambda, grad, iter, trace));
        }

        let s = y[i] * y[j];
        let mut eta = k[i][i] + k[j][j] - 2.0 * k[i][j];
        if eta < 1e-12 {
            eta = 1e-12;
        }
        let e_i = y[i] * grad[i];
        let e_j = y[j] * grad[j];
        let (lo, hi) = if s < 0.0 {
            ((lambda[j] - lambda[i]).max(0.0), (c + lambda[j] - lambda[i]).min(c))
        } else {
            ((lambda[i] + lambda[j] - c).max(0.0), (lambda[i] + lambda[j]).min(c))
        };
        let unclipped = lambda[j] + y[j] * (e_i - e_j) / eta;
        let mut new_j = unclipped.clamp(lo, hi);
        let mut new_i = lambda[i] - s * (new_j - lambda[j]);
        // Snap to the box: multipliers one ulp off a bound otherwise stay
        // in the working sets and block progress.
        let snap = 1e-10 * c;
        for v in [&mut new_i, &mut new_j] {
            if *v < snap {
                *v = 0.0;
            } else if *v > c - snap {
                *v = c;
            }
        }
        let delta_j = new_j - lambda[j];
        let delta_i = new_i - lambda[i];
        if delta_i == 0.0 && delta_j == 0.0 {
            // Numerically stuck at the selected pair; accept the iterate.
            return Ok(finish(y, c, lambda, grad, iter, trace));
        }
        lambda[i] = new_i;
        lambda[j] = new_j;
        for t in 0..m {
            grad[t] += y[t] * y[i] * k[t][i] * delta_i + y[t] * y[j] * k[t][j] * delta_j;
        }
        // W = Σλ − ½λᵀQλ, using λᵀQλ = Σλ_t(grad_t + 1).
        let w: f64 = lambda
            .iter()
            .zip(&grad)
            .map(|(&l, &g)| 0.5 * l * (1.0 - g))
            .sum();
        trace.push(w);
    }

    let violation = max_violation(&lambda, &grad, y, c);
    if violation <= tol {
        let iters = trace.len() - 1;
        return Ok(finish(y, c, lambda, grad, iters, trace));
    }
    Err(KernelError::NoConvergence(max_iter))
}

fn max_violation(lambda: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for t in 0..y.len() {
        let score = -y[t] * grad[t];
        if (y[t] > 0.0 && lambda[t] < c) || (y[t] < 0.0 && lambda[t] > 0.0) {
            up = up.max(score);
        }
        if (y[t] < 0.0 && lambda[t] < c) || (y[t] > 0.0 && lambda[t] > 0.0) {
            low = low.min(score);
        }
    }
    if up.is_finite() && low.is_finite() {
        up - low
    } else {
        0.0
    }
}

fn finish(
    y: &[f64],
    c: f64,
    lambda: Vec<f64>,
    grad: Vec<f64>,
    iterations: usize,
    trace: Vec<f64>,
) -> SmoSolution {
    // Bias from free support vectors; midpoint of the violation interval
    // when every multiplier sits at a bound.
    let free: Vec<usize> = (0..y.len())
        .filter(|&t| lambda[t] > 1e-9 * c && lambda[t] < c * (1.0 - 1e-9))
        .collect();
    let bias = if free.is_empty() {
        let mut up = f64::NEG_INFINITY;
        let mut low = f64::INFINITY;
        for t in 0..y.len() {
            let score = -y[t] * grad[t];
            if (y[t] > 0.0 && lambda[t] < c) || (y[t] < 0.0 && lambda[t] > 0.0) {
                up = up.max(score);
            }
            if (y[t] < 0.0 && lambda[t] < c) || (y[t] > 0.0 && lambda[t] > 0.0) {
                low = low.min(score);
            }
        }
        if up.is_finite() && low.is_finite() {
            (up + low) / 2.0
        } else {
            0.0
        }
    } else {
        free.iter().map(|&t| -y[t] * grad[t]).sum::<f64>() / free.len() as f64
    };
    SmoSolution { lambda, bias, iterations, objective_trace: trace }
}

/// Trains one binary classifier; returns signed duals `α_m = λ_m y_m` and
/// the bias.
pub fn train_svm_binary(
    gram: &GramMatrix,
    y: &[f64],
    c: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    if y.len() != gram.dim() {
        return Err(KernelError::CountMismatch { labels: y.len(), states: gram.dim() });
    }
    if c <= 0.0 {
        return Err(KernelError::BadRegularization(c));
    }
    if y.iter().all(|&v| v > 0.0) || y.iter().all(|&v| v < 0.0) {
        return Err(KernelError::SingleClass(y[0]));
    }
    let min_eig = gram.min_eigenvalue();
    if min_eig < PSD_TOL {
        return Err(KernelError::NotPsd(min_eig));
    }
    let sol = smo_solve(gram.entries(), y, c, tol)?;
    let alpha = sol.lambda.iter().zip(y).map(|(&l, &yi)| l * yi).collect();
    Ok((alpha, sol.bias))
}

/// A trained one-vs-rest fidelity-kernel model.
///
/// `alphas[l][m]` is the signed dual coefficient of training point `m` in
/// the binary problem for label `l`; the bias stays a classical scalar
/// added after the kernel sum.
#[derive(Debug, Clone)]
pub struct KernelModel {
    pub label_count: usize,
    pub alphas: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub regularization: f64,
    pub train_states: Vec<StateVector>,
    pub train_labels: Vec<usize>,
    pub dataset_fingerprint: String,
    pub train_indices: Vec<usize>,
}

impl KernelModel {
    /// Per-label decision values `f^(l)(x) = Σ_m α_m^(l) k(ψ_m, x) + b^(l)`.
    pub fn decision_values(&self, x: &StateVector) -> Result<Vec<f64>> {
        let kernels: Vec<f64> = self
            .train_states
            .iter()
            .map(|s| quantum_kernel(s, x))
            .collect::<Result<_>>()?;
        Ok((0..self.label_count)
            .map(|l| {
                self.alphas[l]
                    .iter()
                    .zip(&kernels)
                    .map(|(a, k)| a * k)
                    .sum::<f64>()
                    + self.biases[l]
            })
            .collect())
    }
}

/// Trains one binary SVM per label (`y = +1` on the label, `−1` elsewhere).
pub fn train_one_vs_rest(
    states: &[StateVector],
    labels: &[usize],
    label_count: usize,
    c: f64,
    tol: f64,
) -> Result<KernelModel> {
    if states.len() != labels.len() {
        return Err(KernelError::CountMismatch { labels: labels.len(), states: states.len() });
    }
    let mut seen = vec![false; label_count];
    for &l in labels {
        seen[l] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(KernelError::SingleLabel);
    }
    let gram = gram(states)?;
    let mut alphas = Vec::with_capacity(label_count);
    let mut biases = Vec::with_capacity(label_count);
    for l in 0..label_count {
        if !seen[l] {
            // Label absent from the training split: a constant rejector.
            alphas.push(vec![0.0; states.len()]);
            biases.push(f64::NEG_INFINITY);
            continue;
        }
        let y: Vec<f64> = labels.iter().map(|&li| if li == l { 1.0 } else { -1.0 }).collect();
        let (alpha, bias) = train_svm_binary(&gram, &y, c, tol)?;
        alphas.push(alpha);
        biases.push(bias);
    }
    Ok(KernelModel {
        label_count,
        alphas,
        biases,
        regularization: c,
        train_states: states.to_vec(),
        train_labels: labels.to_vec(),
        dataset_fingerprint: String::new(),
        train_indices: (0..states.len()).collect(),
    })
}

/// Argmax prediction with ties broken toward the smallest label index.
pub fn predict_implicit(model: &KernelModel, x: &StateVector) -> Result<(usize, Vec<f64>)> {
    let decisions = model.decision_values(x)?;
    Ok((argmax(&decisions), decisions))
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fraction of points whose argmax prediction matches the label.
pub fn accuracy<F, E>(
    predict: F,
    states: &[StateVector],
    labels: &[usize],
) -> std::result::Result<f64, E>
where
    F: Fn(&StateVector) -> std::result::Result<usize, E>,
{
    let mut correct = 0usize;
    for (s, &l) in states.iter().zip(labels) {
        if predict(s)? == l {
            correct += 1;
        }
    }
    Ok(correct as f64 / states.len().max(1) as f64)
}

// --- model file ------------------------------------------------------------

#[derive(Serialize, Deserialize)]
pub struct KernelModelFile {
    pub label_count: usize,
    pub regularization: f64,
    pub alphas: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub dataset_fingerprint: String,
    pub train_indices: Vec<usize>,
}

impl KernelModel {
    pub fn to_file(&self) -> KernelModelFile {
        KernelModelFile {
            label_count: self.label_count,
            regularization: self.regularization,
            alphas: self.alphas.clone(),
            biases: self.biases.clone(),
            dataset_fingerprint: self.dataset_fingerprint.clone(),
            train_indices: self.train_indices.clone(),
        }
    }

    /// Rebinds a model file to its training states.
    pub fn from_file(
        file: KernelModelFile,
        train_states: Vec<StateVector>,
        train_labels: Vec<usize>,
    ) -> Result<Self> {
        if file.alphas.len() != file.label_count || file.biases.len() != file.label_count {
            return Err(KernelError::BadModelFile(
                "per-label vectors do not match label_count".to_string(),
            ));
        }
        for a in &file.alphas {
            if a.len() != train_states.len() {
                return Err(KernelError::BadModelFile(format!(
                    "alpha vector of length {} does not match {} training states",
                    a.len(),
                    train_states.len()
                )));
            }
        }
        Ok(KernelModel {
            label_count: file.label_count,
            alphas: file.alphas,
            biases: file.biases,
            regularization: file.regularization,
            train_states,
            train_labels,
            dataset_fingerprint: file.dataset_fingerprint,
            train_indices: file.train_indices,
        })
    }
}

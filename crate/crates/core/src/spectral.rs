//! Spectral form of the implicit model: the observable `Σ_m α_m |ψ_m⟩⟨ψ_m|`
//! is supported on the span of the training feature states, so it is
//! diagonalized exactly inside that subspace — matrix elements come from
//! overlap data alone, never from `2^n × 2^n` objects. Truncating the
//! spectrum to the K eigenpairs of largest λ² gives the exact low-rank
//! model.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{argmax, GramMatrix, KernelModel};
use crate::numerics::{self, CMatrix, GramSchmidtResult, HermitianMatrix};
use crate::simulator::{inner_product, SimError, StateVector};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("coefficients are inconsistent with the Gram overlaps: deviation {0:.3e}")]
    InconsistentCoefficients(f64),
    #[error("alpha vector of length {alphas} does not match {points} data points")]
    AlphaCountMismatch { alphas: usize, points: usize },
    #[error("rank K = {k} out of range 1..={max}")]
    RankOutOfRange { k: usize, max: usize },
    #[error("bundle file is malformed: {0}")]
    BadBundle(String),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// Eigen-decomposition of one label's observable inside the subspace,
/// sorted descending by λ² (the ranking the contribution ratio uses).
#[derive(Debug, Clone)]
pub struct SpectralObservable {
    pub label: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<StateVector>,
    /// Expansion of each eigenvector over the orthonormal subspace basis.
    pub basis_coeffs: Vec<Vec<Complex64>>,
    pub subspace_dim: usize,
}

/// `[O]_{ij} = Σ_m α_m ⟨e_i|ψ_m⟩⟨ψ_m|e_j⟩` from Gram-Schmidt coefficients.
///
/// The coefficients are cross-checked against the stored Gram overlaps
/// before use.
pub fn build_observable_matrix(
    gram: &GramMatrix,
    subspace: &GramSchmidtResult,
    alpha: &[f64],
) -> Result<HermitianMatrix> {
    let m = subspace.coeffs.len();
    if alpha.len() != m {
        return Err(SpectralError::AlphaCountMismatch { alphas: alpha.len(), points: m });
    }
    let rank = subspace.rank;

    // ⟨ψ_r|ψ_c⟩ must equal Σ_i conj(C[r][i]) C[c][i] within tolerance.
    let mut dev = 0.0f64;
    for r in 0..m {
        for c in 0..m {
            let from_coeffs: Complex64 = (0..rank)
                .map(|i| subspace.coeffs[r][i].conj() * subspace.coeffs[c][i])
                .sum();
            dev = dev.max((from_coeffs - gram.overlaps()[r][c]).norm());
        }
    }
    if dev > 1e-6 {
        return Err(SpectralError::InconsistentCoefficients(dev));
    }

    let mut entries = vec![vec![Complex64::new(0.0, 0.0); rank]; rank];
    for (am, row) in alpha.iter().zip(&subspace.coeffs) {
        if *am == 0.0 {
            continue;
        }
        for i in 0..rank {
            let left = *am * row[i];
            for j in 0..rank {
                entries[i][j] += left * row[j].conj();
            }
        }
    }
    Ok(HermitianMatrix::new(entries)?)
}

/// Diagonalizes the subspace observable and reconstructs eigenvector
/// statevectors `|λ_k⟩ = Σ_i c_i |e_i⟩`.
pub fn diagonalize_observable(
    matrix: &HermitianMatrix,
    basis: &[StateVector],
    label: usize,
) -> Result<SpectralObservable> {
    let rank = matrix.dim();
    let (vals, vecs) = numerics::eigh(matrix)?;
    let mut order: Vec<usize> = (0..rank).collect();
    // Descending by λ²; stable, so equal-λ² entries keep the eigh order
    // (descending by value) and ties break toward the lower index.
    order.sort_by(|&a, &b| {
        (vals[b] * vals[b])
            .partial_cmp(&(vals[a] * vals[a]))
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let n_qubits = basis.first().map(|b| b.n_qubits()).unwrap_or(0);
    let dim = 1usize << n_qubits;
    let mut eigenvalues = Vec::with_capacity(rank);
    let mut eigenvectors = Vec::with_capacity(rank);
    let mut basis_coeffs = Vec::with_capacity(rank);
    for &k in &order {
        eigenvalues.push(vals[k]);
        let coeffs: Vec<Complex64> = (0..rank).map(|i| vecs[i][k]).collect();
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        for (c, e) in coeffs.iter().zip(basis) {
            for (out, amp) in amps.iter_mut().zip(e.amps()) {
                *out += c * amp;
            }
        }
        let mut state = StateVector::from_amps(n_qubits, amps)?;
        state.normalize();
        eigenvectors.push(state);
        basis_coeffs.push(coeffs);
    }
    Ok(SpectralObservable { label, eigenvalues, eigenvectors, basis_coeffs, subspace_dim: rank })
}

/// Keeps the K eigenpairs of largest λ².
pub fn truncate(observable: &SpectralObservable, k: usize) -> Result<SpectralObservable> {
    if k < 1 || k > observable.eigenvalues.len() {
        return Err(SpectralError::RankOutOfRange { k, max: observable.eigenvalues.len() });
    }
    Ok(SpectralObservable {
        label: observable.label,
        eigenvalues: observable.eigenvalues[..k].to_vec(),
        eigenvectors: observable.eigenvectors[..k].to_vec(),
        // Bundle-reconstructed observables carry no basis expansion.
        basis_coeffs: observable.basis_coeffs.iter().take(k).cloned().collect(),
        subspace_dim: observable.subspace_dim,
    })
}

/// `Σ_{i<K} λ_i² / Σ_i λ_i²` over the observable's spectrum.
pub fn cumulative_contribution(observable: &SpectralObservable, k: usize) -> Result<f64> {
    if k < 1 || k > observable.eigenvalues.len() {
        return Err(SpectralError::RankOutOfRange { k, max: observable.eigenvalues.len() });
    }
    let total: f64 = observable.eigenvalues.iter().map(|l| l * l).sum();
    if total == 0.0 {
        return Ok(1.0);
    }
    let head: f64 = observable.eigenvalues[..k].iter().map(|l| l * l).sum();
    Ok(head / total)
}

/// The exact low-rank surrogate: per label a truncated observable plus the
/// classical bias.
#[derive(Debug, Clone)]
pub struct LowRankModel {
    pub observables: Vec<SpectralObservable>,
    pub biases: Vec<f64>,
}

impl LowRankModel {
    pub fn decision_values(&self, x: &StateVector) -> Result<Vec<f64>> {
        self.observables
            .iter()
            .zip(&self.biases)
            .map(|(obs, b)| {
                let mut f = *b;
                for (lambda, vec) in obs.eigenvalues.iter().zip(&obs.eigenvectors) {
                    f += lambda * inner_product(vec, x)?.norm_sqr();
                }
                Ok(f)
            })
            .collect()
    }
}

/// `f^(l)(x) = Σ_k λ_k^(l) |⟨λ_k|ψ(x)⟩|² + b^(l)`, argmax with index
/// tie-break.
pub fn predict_low_rank(model: &LowRankModel, x: &StateVector) -> Result<(usize, Vec<f64>)> {
    let decisions = model.decision_values(x)?;
    Ok((argmax(&decisions), decisions))
}

/// Full spectral decomposition of a trained kernel model: one observable
/// per label over the shared training-state subspace.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub subspace_dim: usize,
    pub gram_schmidt_tol: f64,
    pub observables: Vec<SpectralObservable>,
    pub biases: Vec<f64>,
    /// Per label: expansion of each eigenvector over the training states,
    /// `|λ_k⟩ = Σ_m c_{k,m} |ψ_m⟩`.
    pub data_coeffs: Vec<CMatrix>,
    pub dataset_fingerprint: String,
    pub train_indices: Vec<usize>,
}

impl SpectralDecomposition {
    /// Exact low-rank model at rank `k` (shared across labels, capped at
    /// the subspace dimension).
    pub fn low_rank_model(&self, k: usize) -> Result<LowRankModel> {
        let observables: Vec<SpectralObservable> = self
            .observables
            .iter()
            .map(|obs| truncate(obs, k.min(obs.eigenvalues.len())))
            .collect::<Result<_>>()?;
        Ok(LowRankModel { observables, biases: self.biases.clone() })
    }

    /// Per-label ranks.
    pub fn low_rank_model_per_label(&self, ks: &[usize]) -> Result<LowRankModel> {
        let observables: Vec<SpectralObservable> = self
            .observables
            .iter()
            .zip(ks)
            .map(|(obs, &k)| truncate(obs, k))
            .collect::<Result<_>>()?;
        Ok(LowRankModel { observables, biases: self.biases.clone() })
    }
}

/// Runs Gram-Schmidt over the training states and diagonalizes every
/// label's observable in that basis.
pub fn decompose_kernel_model(
    model: &KernelModel,
    gram: &GramMatrix,
    gram_schmidt_tol: f64,
) -> Result<SpectralDecomposition> {
    let subspace = numerics::gram_schmidt(&model.train_states, gram_schmidt_tol)?;
    let over_inputs = subspace.basis_over_inputs();
    let mut observables = Vec::with_capacity(model.label_count);
    let mut data_coeffs = Vec::with_capacity(model.label_count);
    for l in 0..model.label_count {
        let matrix = build_observable_matrix(gram, &subspace, &model.alphas[l])?;
        let obs = diagonalize_observable(&matrix, &subspace.basis, l)?;
        // Chain the two expansions: eigenvector over basis, basis over data.
        let m = model.train_states.len();
        let coeffs: CMatrix = obs
            .basis_coeffs
            .iter()
            .map(|row| {
                let mut out = vec![Complex64::new(0.0, 0.0); m];
                for (c, basis_row) in row.iter().zip(&over_inputs) {
                    for (o, r) in out.iter_mut().zip(basis_row) {
                        *o += c * r;
                    }
                }
                out
            })
            .collect();
        data_coeffs.push(coeffs);
        observables.push(obs);
    }
    Ok(SpectralDecomposition {
        subspace_dim: subspace.rank,
        gram_schmidt_tol,
        observables,
        biases: model.biases.clone(),
        data_coeffs,
        dataset_fingerprint: model.dataset_fingerprint.clone(),
        train_indices: model.train_indices.clone(),
    })
}

// --- bundle file -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
pub struct SpectralLabelFile {
    pub label: usize,
    pub bias: f64,
    pub eigenvalues: Vec<f64>,
    /// `data_coeffs[k][m]` as `[re, im]`: eigenvector k over training
    /// state m.
    pub data_coeffs: Vec<Vec<[f64; 2]>>,
}

/// On-disk spectral bundle: eigenvector coefficients over the training
/// states rather than full statevectors.
#[derive(Serialize, Deserialize)]
pub struct SpectralBundleFile {
    pub subspace_dim: usize,
    pub gram_schmidt_tol: f64,
    pub dataset_fingerprint: String,
    pub train_indices: Vec<usize>,
    pub labels: Vec<SpectralLabelFile>,
}

impl SpectralDecomposition {
    pub fn to_file(&self) -> SpectralBundleFile {
        let labels = self
            .observables
            .iter()
            .zip(&self.biases)
            .zip(&self.data_coeffs)
            .map(|((obs, &bias), coeffs)| SpectralLabelFile {
                label: obs.label,
                bias,
                eigenvalues: obs.eigenvalues.clone(),
                data_coeffs: coeffs
                    .iter()
                    .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
                    .collect(),
            })
            .collect();
        SpectralBundleFile {
            subspace_dim: self.subspace_dim,
            gram_schmidt_tol: self.gram_schmidt_tol,
            dataset_fingerprint: self.dataset_fingerprint.clone(),
            train_indices: self.train_indices.clone(),
            labels,
        }
    }
}

/// Rebuilds eigenvector statevectors from a bundle plus the training
/// states it references.
pub fn observables_from_file(
    file: &SpectralBundleFile,
    train_states: &[StateVector],
) -> Result<Vec<SpectralObservable>> {
    let n_qubits = train_states
        .first()
        .map(|s| s.n_qubits())
        .ok_or_else(|| SpectralError::BadBundle("no training states".to_string()))?;
    let dim = 1usize << n_qubits;
    file.labels
        .iter()
        .map(|lf| {
            let mut eigenvectors = Vec::with_capacity(lf.eigenvalues.len());
            for row in &lf.data_coeffs {
                if row.len() != train_states.len() {
                    return Err(SpectralError::BadBundle(format!(
                        "coefficient row of length {} does not match {} training states",
                        row.len(),
                        train_states.len()
                    )));
                }
                let mut amps = vec![Complex64::new(0.0, 0.0); dim];
                for (&[re, im], s) in row.iter().zip(train_states) {
                    let c = Complex64::new(re, im);
                    for (out, amp) in amps.iter_mut().zip(s.amps()) {
                        *out += c * amp;
                    }
                }
                let mut state = StateVector::from_amps(n_qubits, amps)?;
                state.normalize();
                eigenvectors.push(state);
            }
            Ok(SpectralObservable {
                label: lf.label,
                eigenvalues: lf.eigenvalues.clone(),
                eigenvectors,
                basis_coeffs: Vec::new(),
                subspace_dim: file.subspace_dim,
            })
        })
        .collect()
}

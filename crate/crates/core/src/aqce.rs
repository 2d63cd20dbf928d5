//! Circuit synthesis by sweeps of SVD-optimal two-qubit gate updates.
//!
//! Given K orthogonal targets {|Ψ^(k)⟩}, the synthesizer grows a circuit
//! `C = U_1 U_2 … U_J` until `C|k⟩ ≈ |Ψ^(k)⟩` for every k. The total
//! fidelity `F = Σ_k |⟨k|C†|Ψ^(k)⟩|` factors at every gate slot m through
//! the split
//!
//! ```text
//! ⟨k|C†|Ψ^(k)⟩ = ⟨k|U_J†…U_{m+1}†  ·  U_m†  ·  U_{m−1}†…U_1†|Ψ^(k)⟩
//!                 └── reference side ┘        └── target side ──┘
//! ```
//!
//! so the dependence on `U_m` is `Tr[F_m^(k) U_m†]` with `F_m^(k)` the 4×4
//! partial trace of |target side⟩⟨reference side| onto a qubit pair. Per
//! update the per-target phases are aligned against the current gate, the
//! phased tensors are summed, and the SVD of the sum yields both the score
//! of each candidate pair and the optimal replacement gate. Each update can
//! relocate the gate to the best-scoring pair, and each one is guaranteed
//! not to decrease the total fidelity.
//!
//! Gates are only ever replaced by exact unitaries, so the synthesized
//! circuit maps the computational basis to exactly orthonormal states;
//! approximation error shows up per target, never as non-orthogonality.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics;
use crate::simulator::{
    apply_gate, environment_tensor, trace_mul_adjoint, GateCircuit, Mat4, SimError, StateVector,
    TwoQubitGate,
};

#[derive(Debug, Error)]
pub enum AqceError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error("no targets given")]
    NoTargets,
    #[error("{count} targets exceed the 2^{n_qubits} basis states")]
    TooManyTargets { count: usize, n_qubits: usize },
    #[error("targets {i} and {j} are not orthogonal: |⟨i|j⟩| = {overlap:.3e}")]
    NotOrthogonal { i: usize, j: usize, overlap: f64 },
    #[error("target {index} has {actual} qubits, expected {expected}")]
    QubitMismatch { index: usize, expected: usize, actual: usize },
    #[error("synthesis needs at least 2 qubits")]
    TooFewQubits,
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("fidelity target count {targets} does not match {count} targets")]
    TargetCountMismatch { targets: usize, count: usize },
}

pub type Result<T> = std::result::Result<T, AqceError>;

/// Hard cap on the gate budget when `max_gates` is left unbounded.
pub const SAFETY_GATE_CAP: usize = 4096;

/// Synthesis schedule knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AqceConfig {
    /// Initial number of identity gates J₀.
    pub initial_gates: usize,
    /// Gates added per growth step (δJ).
    pub growth_per_step: usize,
    /// Sweeps after each growth step (N).
    pub sweeps_per_step: usize,
    /// Gate budget; `None` means unbounded up to [`SAFETY_GATE_CAP`].
    pub max_gates: Option<usize>,
    /// Fidelity target applied to every k.
    pub target_fidelity: f64,
    /// Optional per-k overrides of `target_fidelity`.
    pub per_target_fidelity: Option<Vec<f64>>,
    /// Candidate pair set B; `None` means all unordered pairs.
    pub pairs: Option<Vec<(usize, usize)>>,
    /// Recorded with results; the schedule itself is deterministic.
    pub seed: u64,
}

impl Default for AqceConfig {
    fn default() -> Self {
        Self {
            initial_gates: 12,
            growth_per_step: 6,
            sweeps_per_step: 4,
            max_gates: None,
            target_fidelity: 0.6,
            per_target_fidelity: None,
            pairs: None,
            seed: 0,
        }
    }
}

impl AqceConfig {
    fn validate(&self, k: usize, n_qubits: usize) -> Result<Vec<f64>> {
        if self.initial_gates < 1 || self.growth_per_step < 1 || self.sweeps_per_step < 1 {
            return Err(AqceError::BadConfig(
                "initial_gates, growth_per_step and sweeps_per_step must be ≥ 1".to_string(),
            ));
        }
        let targets = match &self.per_target_fidelity {
            Some(v) => {
                if v.len() != k {
                    return Err(AqceError::TargetCountMismatch { targets: v.len(), count: k });
                }
                v.clone()
            }
            None => vec![self.target_fidelity; k],
        };
        for &t in &targets {
            if !(t > 0.0 && t <= 1.0) {
                return Err(AqceError::BadConfig(format!("fidelity target {t} outside (0, 1]")));
            }
        }
        if let Some(pairs) = &self.pairs {
            if pairs.is_empty() {
                return Err(AqceError::BadConfig("empty pair set".to_string()));
            }
            for &(i, j) in pairs {
                if i == j || i >= n_qubits || j >= n_qubits {
                    return Err(AqceError::BadConfig(format!(
                        "pair ({i}, {j}) invalid on {n_qubits} qubits"
                    )));
                }
            }
        }
        Ok(targets)
    }

    fn pair_set(&self, n_qubits: usize) -> Vec<(usize, usize)> {
        match &self.pairs {
            Some(p) => {
                let mut sorted = p.clone();
                sorted.sort_unstable();
                sorted.dedup();
                sorted
            }
            None => {
                let mut all = Vec::new();
                for i in 0..n_qubits {
                    for j in (i + 1)..n_qubits {
                        all.push((i, j));
                    }
                }
                all
            }
        }
    }

    fn gate_budget(&self) -> usize {
        self.max_gates.unwrap_or(SAFETY_GATE_CAP).min(SAFETY_GATE_CAP)
    }
}

/// One gate update during synthesis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AqceUpdateRecord {
    pub sweep: usize,
    pub gate_index: usize,
    pub pair: (usize, usize),
    pub fidelities: Vec<f64>,
    pub total: f64,
}

/// Full synthesis trace: every update plus the outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AqceTrace {
    pub records: Vec<AqceUpdateRecord>,
    pub final_fidelities: Vec<f64>,
    pub converged: bool,
    pub gate_count: usize,
}

pub struct SynthesisResult {
    pub circuit: GateCircuit,
    pub trace: AqceTrace,
    pub converged: bool,
}

/// `θ = −arg(Tr[F U†])`, with θ = 0 when the trace vanishes.
pub fn phase_align(f: &Mat4, u: &Mat4) -> f64 {
    let t = trace_mul_adjoint(f, u);
    if t.norm() < 1e-300 {
        0.0
    } else {
        -t.arg()
    }
}

/// Sweep-internal alignment: identical to [`phase_align`] while the trace
/// is significant, but when it sinks to rounding level its argument is
/// noise, and using it would break the global-phase invariance of the
/// synthesis. The fallback phases against the tensor's largest entry,
/// which transforms covariantly under a global phase of the target.
fn phase_align_stable(f: &Mat4, u: &Mat4) -> f64 {
    let t = trace_mul_adjoint(f, u);
    let scale = crate::simulator::frobenius4(f);
    if t.norm() > 1e-12 * scale {
        return -t.arg();
    }
    let mut lead = Complex64::new(0.0, 0.0);
    for row in f.iter() {
        for z in row {
            if z.norm() > lead.norm() {
                lead = *z;
            }
        }
    }
    if lead.norm() < 1e-300 {
        0.0
    } else {
        -lead.arg()
    }
}

/// The unitary maximizing `|Tr[F U†]|`, namely `X·Y` from `F = X·D·Y`;
/// the maximum value is `Σ D`.
pub fn optimal_gate(f: &Mat4) -> Result<Mat4> {
    let m: numerics::CMatrix = f.iter().map(|row| row.to_vec()).collect();
    let svd = numerics::svd(&m)?;
    let xy = numerics::mat_mul(&svd.x, &svd.y);
    let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = xy[i][j];
        }
    }
    polar_polish(&mut out);
    Ok(out)
}

/// One Newton–Schulz step `U ← U(3I − U†U)/2`: squares the distance of a
/// near-unitary matrix to the unitary manifold, keeping gates inside the
/// construction tolerance.
fn polar_polish(u: &mut Mat4) {
    use crate::simulator::{adjoint4, mul4};
    let uhu = mul4(&adjoint4(u), u);
    let mut correction = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let target = if i == j { 3.0 } else { 0.0 };
            correction[i][j] = (Complex64::new(target, 0.0) - uhu[i][j]) * 0.5;
        }
    }
    *u = mul4(u, &correction);
}

/// Per-target fidelities `F^(k) = |⟨k|C†|Ψ^(k)⟩|` and their sum.
pub fn circuit_fidelities(
    circuit: &GateCircuit,
    targets: &[StateVector],
) -> Result<(Vec<f64>, f64)> {
    let mut fidelities = Vec::with_capacity(targets.len());
    for (k, target) in targets.iter().enumerate() {
        let back = circuit.apply_adjoint(target)?;
        fidelities.push(back.amp(k).norm());
    }
    let total = fidelities.iter().sum();
    Ok((fidelities, total))
}

/// Frobenius distance of each gate from the identity, for structure
/// heatmaps.
pub fn identity_distances(circuit: &GateCircuit) -> Vec<f64> {
    circuit
        .gates()
        .iter()
        .map(|g| {
            let mut d = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    let target = if i == j { 1.0 } else { 0.0 };
                    d += (g.matrix()[i][j] - Complex64::new(target, 0.0)).norm_sqr();
                }
            }
            d.sqrt()
        })
        .collect()
}

/// Grows and sweeps a circuit until every `F^(k)` reaches its target or the
/// gate budget is exhausted; budget exhaustion is reported through the
/// `converged` flag, not an error.
pub fn synthesize_isometry(
    targets: &[StateVector],
    config: &AqceConfig,
) -> Result<SynthesisResult> {
    if targets.is_empty() {
        return Err(AqceError::NoTargets);
    }
    let n_qubits = targets[0].n_qubits();
    if n_qubits < 2 {
        return Err(AqceError::TooFewQubits);
    }
    let k_count = targets.len();
    if k_count > (1usize << n_qubits) {
        return Err(AqceError::TooManyTargets { count: k_count, n_qubits });
    }
    for (i, t) in targets.iter().enumerate() {
        if t.n_qubits() != n_qubits {
            return Err(AqceError::QubitMismatch {
                index: i,
                expected: n_qubits,
                actual: t.n_qubits(),
            });
        }
    }
    for i in 0..k_count {
        for j in (i + 1)..k_count {
            let overlap = crate::simulator::inner_product(&targets[i], &targets[j])?.norm();
            if overlap > 1e-6 {
                return Err(AqceError::NotOrthogonal { i, j, overlap });
            }
        }
    }
    let fidelity_targets = config.validate(k_count, n_qubits)?;
    let pair_set = config.pair_set(n_qubits);
    let budget = config.gate_budget();

    // J₀ identity gates on a round-robin pair schedule.
    let mut schedule = pair_set.iter().cycle().copied();
    let mut gates: Vec<TwoQubitGate> = (0..config.initial_gates)
        .map(|_| TwoQubitGate::identity(schedule.next().expect("non-empty pair set")))
        .collect::<std::result::Result<_, _>>()?;

    let mut records: Vec<AqceUpdateRecord> = Vec::new();
    let mut sweep_counter = 0usize;

    let reached = |fids: &[f64]| -> bool {
        fids.iter().zip(&fidelity_targets).all(|(f, t)| f >= t)
    };

    let circuit_of = |gates: &[TwoQubitGate]| -> Result<GateCircuit> {
        Ok(GateCircuit::new(n_qubits, gates.to_vec())?)
    };

    // The initial identity circuit may already satisfy the targets.
    let (mut fids, _) = circuit_fidelities(&circuit_of(&gates)?, targets)?;
    let mut converged = reached(&fids);

    while !converged && gates.len() < budget {
        // Grow by δJ identities appended on the reference-state side.
        let grow = config.growth_per_step.min(budget - gates.len());
        for _ in 0..grow {
            gates.push(TwoQubitGate::identity(schedule.next().expect("non-empty pair set"))?);
        }

        for _ in 0..config.sweeps_per_step {
            sweep_counter += 1;
            sweep(&mut gates, targets, &pair_set, sweep_counter, &mut records)?;
            let (f, _) = circuit_fidelities(&circuit_of(&gates)?, targets)?;
            fids = f;
            if reached(&fids) {
                converged = true;
                break;
            }
        }
    }

    let gate_count = gates.len();
    Ok(SynthesisResult {
        circuit: circuit_of(&gates)?,
        trace: AqceTrace {
            records,
            final_fidelities: fids,
            converged,
            gate_count,
        },
        converged,
    })
}

/// One sweep m = 1..J of phase-aligned SVD updates with pair relocation.
fn sweep(
    gates: &mut [TwoQubitGate],
    targets: &[StateVector],
    pair_set: &[(usize, usize)],
    sweep_index: usize,
    records: &mut Vec<AqceUpdateRecord>,
) -> Result<()> {
    let j = gates.len();
    let k_count = targets.len();
    let n_qubits = targets[0].n_qubits();

    // Reference side for m = 1: U_2 … U_J |k⟩, gate J applied first.
    let mut reference: Vec<StateVector> = (0..k_count)
        .map(|k| {
            let mut s = StateVector::computational_basis(n_qubits, k);
            for g in gates.iter().skip(1).rev() {
                s = apply_gate(&s, g)?;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    // Target side for m = 1: the raw targets.
    let mut unwound: Vec<StateVector> = targets.to_vec();

    for m in 0..j {
        let current = gates[m].matrix();
        // Score every candidate pair: aligned tensor sum and its nuclear
        // norm.
        let scored: Vec<(f64, Mat4, Vec<f64>)> = pair_set
            .par_iter()
            .map(|&pair| {
                let pairs: Vec<(&StateVector, &StateVector)> =
                    reference.iter().zip(unwound.iter()).collect();
                let tensors = environment_tensor(&pairs, pair).expect("validated pair");
                let mut combined = [[Complex64::new(0.0, 0.0); 4]; 4];
                for f in &tensors {
                    let theta = phase_align_stable(f, current);
                    let phase = Complex64::from_polar(1.0, theta);
                    for a in 0..4 {
                        for b in 0..4 {
                            combined[a][b] += phase * f[a][b];
                        }
                    }
                }
                let m4: numerics::CMatrix = combined.iter().map(|r| r.to_vec()).collect();
                let svd = numerics::svd(&m4).expect("finite tensors");
                let score: f64 = svd.d.iter().sum();
                let xy = numerics::mat_mul(&svd.x, &svd.y);
                let mut gate = [[Complex64::new(0.0, 0.0); 4]; 4];
                for a in 0..4 {
                    for b in 0..4 {
                        gate[a][b] = xy[a][b];
                    }
                }
                polar_polish(&mut gate);
                // Per-target fidelities at the new gate.
                let fids: Vec<f64> = tensors
                    .iter()
                    .map(|f| trace_mul_adjoint(f, &gate).norm())
                    .collect();
                (score, gate, fids)
            })
            .collect();

        // argmax over pairs; ties toward the lexicographically smallest,
        // which is the earliest entry of the sorted pair set.
        let mut best = 0usize;
        for (l, entry) in scored.iter().enumerate() {
            if entry.0 > scored[best].0 {
                best = l;
            }
        }
        let (_, new_matrix, fids) = &scored[best];
        let new_pair = pair_set[best];
        gates[m].set_pair(new_pair)?;
        gates[m].set_matrix(*new_matrix)?;

        records.push(AqceUpdateRecord {
            sweep: sweep_index,
            gate_index: m + 1,
            pair: new_pair,
            fidelities: fids.clone(),
            total: fids.iter().sum(),
        });

        // Advance the split: the updated gate moves to the target side,
        // the next gate leaves the reference side.
        if m + 1 < j {
            let adj_updated = crate::simulator::adjoint4(gates[m].matrix());
            let pair_updated = gates[m].pair();
            for t in unwound.iter_mut() {
                *t = crate::simulator::apply_matrix(t, adj_updated, pair_updated)?;
            }
            let adj_next = crate::simulator::adjoint4(gates[m + 1].matrix());
            let pair_next = gates[m + 1].pair();
            for r in reference.iter_mut() {
                *r = crate::simulator::apply_matrix(r, adj_next, pair_next)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{inner_product, run_circuit, standard_normal, unitarity_deviation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_gate(rng: &mut ChaCha8Rng, pair: (usize, usize)) -> TwoQubitGate {
        let mut params = [0.0; 15];
        for p in &mut params {
            *p = standard_normal(rng);
        }
        TwoQubitGate::from_params(pair, params).unwrap()
    }

    #[test]
    fn phase_align_examples() {
        let mut f = [[Complex64::new(0.0, 0.0); 4]; 4];
        // Tr[F·I†] = f00.
        f[0][0] = Complex64::new(2.5, 0.0);
        assert_eq!(phase_align(&f, &crate::simulator::eye4()), 0.0);
        f[0][0] = Complex64::new(0.0, 3.0);
        assert!((phase_align(&f, &crate::simulator::eye4()) + std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        // Zero trace → zero phase by decision.
        f[0][0] = Complex64::new(0.0, 0.0);
        f[0][1] = Complex64::new(1.0, 1.0);
        assert_eq!(phase_align(&f, &crate::simulator::eye4()), 0.0);
    }

    #[test]
    fn phase_align_makes_trace_real_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let mut f = [[Complex64::new(0.0, 0.0); 4]; 4];
            for row in f.iter_mut() {
                for z in row.iter_mut() {
                    *z = Complex64::new(standard_normal(&mut rng), standard_normal(&mut rng));
                }
            }
            let u = *random_gate(&mut rng, (0, 1)).matrix();
            let theta = phase_align(&f, &u);
            let rotated = Complex64::from_polar(1.0, theta) * trace_mul_adjoint(&f, &u);
            assert!(rotated.im.abs() < 1e-12);
            assert!(rotated.re >= -1e-12);
        }
    }

    #[test]
    fn optimal_gate_examples() {
        // F = I: any optimum gives |Tr[F U†]| = 4.
        let u = optimal_gate(&crate::simulator::eye4()).unwrap();
        assert!((trace_mul_adjoint(&crate::simulator::eye4(), &u).norm() - 4.0).abs() < 1e-9);

        // F unitary: optimum recovers |Tr| = 4.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = *random_gate(&mut rng, (0, 1)).matrix();
        let u = optimal_gate(&v).unwrap();
        assert!((trace_mul_adjoint(&v, &u).norm() - 4.0).abs() < 1e-9);

        // Random F: dominance over 1000 random unitaries.
        let mut f = [[Complex64::new(0.0, 0.0); 4]; 4];
        for row in f.iter_mut() {
            for z in row.iter_mut() {
                *z = Complex64::new(standard_normal(&mut rng), standard_normal(&mut rng));
            }
        }
        let u = optimal_gate(&f).unwrap();
        assert!(unitarity_deviation(&u) < 1e-9);
        let best = trace_mul_adjoint(&f, &u).norm();
        for _ in 0..1000 {
            let v = *random_gate(&mut rng, (0, 1)).matrix();
            assert!(trace_mul_adjoint(&f, &v).norm() <= best + 1e-9);
        }
    }

    #[test]
    fn circuit_fidelities_examples() {
        // Identity circuit on computational-basis targets: all F = 1.
        let circuit = GateCircuit::empty(3);
        let targets: Vec<StateVector> =
            (0..4).map(|k| StateVector::computational_basis(3, k)).collect();
        let (fids, total) = circuit_fidelities(&circuit, &targets).unwrap();
        for f in &fids {
            assert!((f - 1.0).abs() < 1e-12);
        }
        assert!((total - 4.0).abs() < 1e-12);

        // Orthogonal-to-target case: F = 0.
        let targets = vec![StateVector::computational_basis(3, 5)];
        let (fids, _) = circuit_fidelities(&circuit, &targets).unwrap();
        assert!(fids[0] < 1e-12);

        // Random circuit matches run_circuit + inner_product composition.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gates = vec![random_gate(&mut rng, (0, 1)), random_gate(&mut rng, (1, 2))];
        let circuit = GateCircuit::new(3, gates).unwrap();
        let target = StateVector::random(&mut rng, 3);
        let (fids, _) = circuit_fidelities(&circuit, std::slice::from_ref(&target)).unwrap();
        let forward = run_circuit(&circuit, &StateVector::computational_basis(3, 0)).unwrap();
        let oracle = inner_product(&forward, &target).unwrap().norm();
        assert!((fids[0] - oracle).abs() < 1e-12);
    }

    #[test]
    fn trivial_target_converges_immediately() {
        let targets = vec![StateVector::zero(3)];
        let config = AqceConfig { initial_gates: 4, ..AqceConfig::default() };
        let result = synthesize_isometry(&targets, &config).unwrap();
        assert!(result.converged);
        assert_eq!(result.circuit.len(), 4);
        assert!(result.trace.records.is_empty(), "no sweeps should be needed");
        assert!((result.trace.final_fidelities[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plant_and_recover_two_gate_circuit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let planted = GateCircuit::new(
            4,
            vec![random_gate(&mut rng, (0, 1)), random_gate(&mut rng, (2, 3))],
        )
        .unwrap();
        let target = run_circuit(&planted, &StateVector::zero(4)).unwrap();
        let config = AqceConfig {
            initial_gates: 2,
            growth_per_step: 6,
            sweeps_per_step: 4,
            max_gates: Some(8),
            target_fidelity: 0.999,
            ..AqceConfig::default()
        };
        let result = synthesize_isometry(std::slice::from_ref(&target), &config).unwrap();
        assert!(result.converged, "fidelity {:?}", result.trace.final_fidelities);
        assert!(result.trace.final_fidelities[0] >= 0.999);
        assert!(result.circuit.len() <= 8);

        // Trace monotone within 1e-9 at every update.
        for w in result.trace.records.windows(2) {
            assert!(
                w[1].total >= w[0].total - 1e-9,
                "fidelity decreased: {} -> {}",
                w[0].total,
                w[1].total
            );
        }
    }

    #[test]
    fn bell_targets_reach_unit_fidelity() {
        let f = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::from_amps(
            2,
            vec![
                Complex64::new(f, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(f, 0.0),
            ],
        )
        .unwrap();
        let minus = StateVector::from_amps(
            2,
            vec![
                Complex64::new(f, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(-f, 0.0),
            ],
        )
        .unwrap();
        let config = AqceConfig {
            initial_gates: 1,
            growth_per_step: 1,
            sweeps_per_step: 2,
            target_fidelity: 0.999,
            ..AqceConfig::default()
        };
        let result = synthesize_isometry(&[plus, minus], &config).unwrap();
        assert!(result.converged);
        for f in &result.trace.final_fidelities {
            assert!(*f >= 0.999, "fidelity {f}");
        }
    }

    #[test]
    fn per_target_fidelity_overrides_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let planted = GateCircuit::new(
            3,
            vec![random_gate(&mut rng, (0, 1)), random_gate(&mut rng, (1, 2))],
        )
        .unwrap();
        let t0 = run_circuit(&planted, &StateVector::computational_basis(3, 0)).unwrap();
        let t1 = run_circuit(&planted, &StateVector::computational_basis(3, 1)).unwrap();
        let config = AqceConfig {
            initial_gates: 1,
            growth_per_step: 1,
            sweeps_per_step: 1,
            max_gates: Some(12),
            per_target_fidelity: Some(vec![0.95, 0.3]),
            ..AqceConfig::default()
        };
        let result = synthesize_isometry(&[t0.clone(), t1.clone()], &config).unwrap();
        assert!(result.converged);
        assert!(result.trace.final_fidelities[0] >= 0.95);
        assert!(result.trace.final_fidelities[1] >= 0.3);

        let bad = AqceConfig {
            per_target_fidelity: Some(vec![0.9]),
            ..AqceConfig::default()
        };
        assert!(matches!(
            synthesize_isometry(&[t0, t1], &bad),
            Err(AqceError::TargetCountMismatch { .. })
        ));
    }

    #[test]
    fn restricted_pair_set_is_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let planted = GateCircuit::new(
            3,
            vec![random_gate(&mut rng, (0, 2)), random_gate(&mut rng, (0, 1))],
        )
        .unwrap();
        let target = run_circuit(&planted, &StateVector::zero(3)).unwrap();
        let allowed = vec![(0usize, 1usize), (1, 2)];
        let config = AqceConfig {
            initial_gates: 2,
            growth_per_step: 2,
            sweeps_per_step: 3,
            max_gates: Some(10),
            target_fidelity: 0.99,
            pairs: Some(allowed.clone()),
            ..AqceConfig::default()
        };
        let result = synthesize_isometry(std::slice::from_ref(&target), &config).unwrap();
        for gate in result.circuit.gates() {
            assert!(allowed.contains(&gate.pair()), "gate on disallowed pair {:?}", gate.pair());
        }
        assert!(result.trace.final_fidelities[0] >= 0.99, "restricted pairs still suffice on a line");
    }

    #[test]
    fn rejects_non_orthogonal_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = StateVector::random(&mut rng, 3);
        let result = synthesize_isometry(&[a.clone(), a], &AqceConfig::default());
        assert!(matches!(result, Err(AqceError::NotOrthogonal { .. })));
    }

    #[test]
    fn budget_exhaustion_sets_flag_instead_of_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // A hard random target with a tiny budget cannot converge.
        let target = StateVector::random(&mut rng, 4);
        let config = AqceConfig {
            initial_gates: 1,
            growth_per_step: 1,
            sweeps_per_step: 1,
            max_gates: Some(2),
            target_fidelity: 0.9999999,
            ..AqceConfig::default()
        };
        let result = synthesize_isometry(std::slice::from_ref(&target), &config).unwrap();
        assert!(!result.converged);
        assert_eq!(result.circuit.len(), 2);
    }

    #[test]
    fn synthesized_gates_stay_unitary_and_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let planted = GateCircuit::new(
            3,
            vec![random_gate(&mut rng, (0, 1)), random_gate(&mut rng, (1, 2))],
        )
        .unwrap();
        let t0 = run_circuit(&planted, &StateVector::computational_basis(3, 0)).unwrap();
        let t1 = run_circuit(&planted, &StateVector::computational_basis(3, 1)).unwrap();
        let config = AqceConfig {
            initial_gates: 2,
            growth_per_step: 2,
            sweeps_per_step: 3,
            max_gates: Some(10),
            target_fidelity: 0.99,
            ..AqceConfig::default()
        };
        let result = synthesize_isometry(&[t0, t1], &config).unwrap();
        for gate in result.circuit.gates() {
            assert!(unitarity_deviation(gate.matrix()) <= 1e-9);
        }
        // Gram matrix of {C|k⟩} is exactly the identity up to fp.
        let c0 = run_circuit(&result.circuit, &StateVector::computational_basis(3, 0)).unwrap();
        let c1 = run_circuit(&result.circuit, &StateVector::computational_basis(3, 1)).unwrap();
        assert!((inner_product(&c0, &c0).unwrap().norm() - 1.0).abs() < 1e-9);
        assert!((inner_product(&c1, &c1).unwrap().norm() - 1.0).abs() < 1e-9);
        assert!(inner_product(&c0, &c1).unwrap().norm() < 1e-9);
    }

    #[test]
    fn global_phase_invariance_of_trajectories() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let planted = GateCircuit::new(
            3,
            vec![random_gate(&mut rng, (0, 2)), random_gate(&mut rng, (1, 2))],
        )
        .unwrap();
        let t0 = run_circuit(&planted, &StateVector::computational_basis(3, 0)).unwrap();
        let t1 = run_circuit(&planted, &StateVector::computational_basis(3, 1)).unwrap();
        let config = AqceConfig {
            initial_gates: 2,
            growth_per_step: 2,
            sweeps_per_step: 2,
            max_gates: Some(6),
            target_fidelity: 0.999,
            ..AqceConfig::default()
        };
        let plain = synthesize_isometry(&[t0.clone(), t1.clone()], &config).unwrap();
        let phased = synthesize_isometry(&[t0.phased(0.7), t1], &config).unwrap();
        assert_eq!(plain.trace.records.len(), phased.trace.records.len());
        for (a, b) in plain.trace.records.iter().zip(&phased.trace.records) {
            assert_eq!(a.pair, b.pair);
            for (fa, fb) in a.fidelities.iter().zip(&b.fidelities) {
                assert!((fa - fb).abs() < 1e-9, "trajectory moved: {fa} vs {fb}");
            }
        }
        for (fa, fb) in plain
            .trace
            .final_fidelities
            .iter()
            .zip(&phased.trace.final_fidelities)
        {
            assert!((fa - fb).abs() < 1e-9);
        }
    }

    #[test]
    fn local_update_fidelities_match_global_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let target = StateVector::random(&mut rng, 3);
        let config = AqceConfig {
            initial_gates: 2,
            growth_per_step: 2,
            sweeps_per_step: 1,
            max_gates: Some(4),
            target_fidelity: 0.999999,
            ..AqceConfig::default()
        };
        let result = synthesize_isometry(std::slice::from_ref(&target), &config).unwrap();
        // The last record's fidelities are the circuit's exact fidelities.
        let last = result.trace.records.last().unwrap();
        let (exact, _) = circuit_fidelities(&result.circuit, &[target]).unwrap();
        for (a, b) in last.fidelities.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-10, "local {a} vs global {b}");
        }
    }
}

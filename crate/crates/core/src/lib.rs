//! Pipeline for converting trained fidelity-kernel classifiers into explicit
//! quantum surrogates.
//!
//! The crate is organized around the stages of that conversion:
//!
//! * [`simulator`] — dense statevector simulation of two-qubit gate circuits,
//!   inner products, and environment (fidelity-tensor) extraction.
//! * [`numerics`] — self-contained dense linear algebra: Hermitian
//!   eigendecomposition, complex SVD, rank-revealing Gram-Schmidt.
//! * [`ingest`] — an OpenQASM 2.0 subset parser, a synthetic labeled-circuit
//!   dataset generator, and the on-disk dataset format.
//! * [`kernel`] — the implicit model: fidelity kernel Gram matrices and a
//!   one-vs-rest soft-margin SVM trained by SMO.
//! * [`spectral`] — diagonalization of the implicit model's observable inside
//!   the feature-state span, rank-K truncation, and the exact low-rank model.
//! * [`aqce`] — circuit synthesis: sweeps of SVD-optimal two-qubit gate
//!   updates that grow a circuit embedding K orthogonal target states.
//! * [`eqs`] — the explicit surrogate itself: evaluation, the 15-parameter
//!   gate re-parameterization, weighted cross-entropy loss with analytic
//!   gradients, and Adam fine-tuning.

pub mod aqce;
pub mod eqs;
pub mod fingerprint;
pub mod ingest;
pub mod kernel;
pub mod numerics;
pub mod simulator;
pub mod spectral;

pub use aqce::{AqceConfig, AqceTrace};
pub use eqs::{EqsModel, ParameterizedEqs};
pub use ingest::{LabeledCircuitDataset, QasmProgram};
pub use kernel::{GramMatrix, KernelModel};
pub use numerics::{HermitianMatrix, SvdResult};
pub use simulator::{GateCircuit, StateVector, TwoQubitGate};
pub use spectral::{LowRankModel, SpectralObservable};

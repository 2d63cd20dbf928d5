//! Dense statevector simulation of two-qubit gate circuits.
//!
//! Conventions, fixed once and used everywhere:
//!
//! * Basis ordering: qubit 0 is the **least significant bit** of the
//!   amplitude index, so `|q1 q0⟩ = |01⟩` is index 1 on two qubits.
//! * A gate on pair `(i, j)` acts on the 4-dimensional sub-index
//!   `b = bit_i + 2·bit_j`: the first qubit of the pair is the low bit.
//! * A circuit is the ordered product `C = U_1 U_2 … U_J`; applying it to a
//!   state therefore applies gate `J` first and gate `1` last.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Mat2 = [[Complex64; 2]; 2];
pub type Mat4 = [[Complex64; 4]; 4];

#[derive(Debug, Error)]
pub enum SimError {
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("gate pair ({0}, {0}) uses the same qubit twice")]
    DegeneratePair(usize),
    #[error("qubit count mismatch: {left} vs {right}")]
    QubitCountMismatch { left: usize, right: usize },
    #[error("amplitude vector of length {len} is not 2^{n_qubits}")]
    BadAmplitudeLength { len: usize, n_qubits: usize },
    #[error("matrix is not unitary: ‖UU† − I‖_F = {deviation:.3e}")]
    NotUnitary { deviation: f64 },
    #[error("declared params do not reproduce the gate matrix: deviation {deviation:.3e}")]
    ParamsMatrixMismatch { deviation: f64 },
    #[error("malformed gate matrix: expected 4×4 entries of [re, im]")]
    MalformedMatrix,
    #[error("params must have exactly 15 entries, got {0}")]
    BadParamCount(usize),
}

pub type Result<T> = std::result::Result<T, SimError>;

const UNITARY_TOL: f64 = 1e-10;

/// A normalized pure state over `2^n_qubits` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// The all-zeros state `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        Self::computational_basis(n_qubits, 0)
    }

    /// The computational basis state with the given index.
    pub fn computational_basis(n_qubits: usize, index: usize) -> Self {
        let dim = 1usize << n_qubits;
        assert!(index < dim, "basis index {index} out of range for {n_qubits} qubits");
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    /// Wraps raw amplitudes; only the length is checked.
    pub fn from_amps(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1usize << n_qubits {
            return Err(SimError::BadAmplitudeLength { len: amps.len(), n_qubits });
        }
        Ok(Self { n_qubits, amps })
    }

    /// A Haar-like random state: i.i.d. complex Gaussian amplitudes,
    /// normalized.
    pub fn random<R: rand::Rng>(rng: &mut R, n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut amps: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(standard_normal(rng), standard_normal(rng)))
            .collect();
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let inv = 1.0 / norm;
        for z in &mut amps {
            *z *= inv;
        }
        Self { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amp(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let inv = 1.0 / self.norm();
        for z in &mut self.amps {
            *z *= inv;
        }
    }

    /// Multiplies every amplitude by `e^{iφ}`.
    pub fn phased(&self, phi: f64) -> Self {
        let factor = Complex64::from_polar(1.0, phi);
        Self {
            n_qubits: self.n_qubits,
            amps: self.amps.iter().map(|z| z * factor).collect(),
        }
    }
}

/// Box-Muller standard normal sample.
pub(crate) fn standard_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// A two-qubit unitary placed on an ordered qubit pair.
///
/// `params`, when present, are the 15 coefficients of the gate's generator
/// in the two-qubit Pauli basis (see [`generator_basis`]), with
/// `matrix = exp(i Σ_j params_j G_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitGate {
    pair: (usize, usize),
    matrix: Mat4,
    params: Option<[f64; 15]>,
}

impl TwoQubitGate {
    pub fn new(pair: (usize, usize), matrix: Mat4) -> Result<Self> {
        if pair.0 == pair.1 {
            return Err(SimError::DegeneratePair(pair.0));
        }
        let dev = unitarity_deviation(&matrix);
        if dev > UNITARY_TOL {
            return Err(SimError::NotUnitary { deviation: dev });
        }
        Ok(Self { pair, matrix, params: None })
    }

    /// The identity gate on a pair.
    pub fn identity(pair: (usize, usize)) -> Result<Self> {
        Self::new(pair, eye4())
    }

    /// Builds `exp(i Σ_j params_j G_j)` over the Pauli generator basis and
    /// records the parameters.
    pub fn from_params(pair: (usize, usize), params: [f64; 15]) -> Result<Self> {
        if pair.0 == pair.1 {
            return Err(SimError::DegeneratePair(pair.0));
        }
        let matrix = exp_i_generators(&params);
        Ok(Self { pair, matrix, params: Some(params) })
    }

    /// CNOT with the given control and target.
    pub fn cnot(control: usize, target: usize) -> Result<Self> {
        // Pair is (control, target): control is the low sub-index bit.
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        let m = [[o, z, z, z], [z, z, z, o], [z, z, o, z], [z, o, z, z]];
        Self::new((control, target), m)
    }

    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.matrix
    }

    pub fn params(&self) -> Option<&[f64; 15]> {
        self.params.as_ref()
    }

    /// Replaces the matrix, dropping any recorded parameters.
    pub fn set_matrix(&mut self, matrix: Mat4) -> Result<()> {
        let dev = unitarity_deviation(&matrix);
        if dev > UNITARY_TOL {
            return Err(SimError::NotUnitary { deviation: dev });
        }
        self.matrix = matrix;
        self.params = None;
        Ok(())
    }

    pub fn set_pair(&mut self, pair: (usize, usize)) -> Result<()> {
        if pair.0 == pair.1 {
            return Err(SimError::DegeneratePair(pair.0));
        }
        self.pair = pair;
        Ok(())
    }
}

/// An ordered list of two-qubit gates; index m runs 1..=J over `gates`.
///
/// As an operator the circuit is `U_1 U_2 … U_J`, so [`run_circuit`] applies
/// the *last* element of `gates` first.
#[derive(Debug, Clone, PartialEq)]
pub struct GateCircuit {
    n_qubits: usize,
    gates: Vec<TwoQubitGate>,
}

impl GateCircuit {
    pub fn new(n_qubits: usize, gates: Vec<TwoQubitGate>) -> Result<Self> {
        for g in &gates {
            check_pair(g.pair(), n_qubits)?;
        }
        Ok(Self { n_qubits, gates })
    }

    pub fn empty(n_qubits: usize) -> Self {
        Self { n_qubits, gates: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[TwoQubitGate] {
        &self.gates
    }

    pub fn gates_mut(&mut self) -> &mut [TwoQubitGate] {
        &mut self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: TwoQubitGate) -> Result<()> {
        check_pair(gate.pair(), self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Applies the adjoint circuit `C† = U_J† … U_1†` to a state.
    pub fn apply_adjoint(&self, input: &StateVector) -> Result<StateVector> {
        if input.n_qubits() != self.n_qubits {
            return Err(SimError::QubitCountMismatch { left: self.n_qubits, right: input.n_qubits() });
        }
        let mut state = input.clone();
        for gate in &self.gates {
            state = apply_matrix(&state, adjoint4(gate.matrix()), gate.pair())?;
        }
        Ok(state)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CircuitJson::from(self)).expect("circuit serialization")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let parsed: CircuitJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
        parsed.try_into().map_err(|e: SimError| e.to_string())
    }
}

impl Serialize for GateCircuit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CircuitJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for GateCircuit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = CircuitJson::deserialize(d)?;
        json.try_into().map_err(serde::de::Error::custom)
    }
}

/// Applies a two-qubit gate to a state.
pub fn apply_gate(state: &StateVector, gate: &TwoQubitGate) -> Result<StateVector> {
    check_pair(gate.pair(), state.n_qubits())?;
    apply_matrix(state, *gate.matrix(), gate.pair())
}

/// Runs a circuit: gates applied in order m = J down to 1, producing
/// `C|input⟩` under the product convention `C = U_1 U_2 … U_J`.
pub fn run_circuit(circuit: &GateCircuit, input: &StateVector) -> Result<StateVector> {
    if input.n_qubits() != circuit.n_qubits() {
        return Err(SimError::QubitCountMismatch {
            left: circuit.n_qubits(),
            right: input.n_qubits(),
        });
    }
    let mut state = input.clone();
    for gate in circuit.gates().iter().rev() {
        state = apply_matrix(&state, *gate.matrix(), gate.pair())?;
    }
    Ok(state)
}

/// `⟨a|b⟩ = Σ_i conj(a_i)·b_i`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(SimError::QubitCountMismatch { left: a.n_qubits(), right: b.n_qubits() });
    }
    Ok(a.amps().iter().zip(b.amps()).map(|(x, y)| x.conj() * y).sum())
}

/// For each `(bra, ket)` pair returns the 4×4 partial trace of `|ket⟩⟨bra|`
/// over every qubit outside `pair`, computed by direct contraction of the
/// amplitude tensors in O(2^n) per entry.
pub fn environment_tensor(
    targets: &[(&StateVector, &StateVector)],
    pair: (usize, usize),
) -> Result<Vec<Mat4>> {
    let mut out = Vec::with_capacity(targets.len());
    for &(bra, ket) in targets {
        if bra.n_qubits() != ket.n_qubits() {
            return Err(SimError::QubitCountMismatch { left: bra.n_qubits(), right: ket.n_qubits() });
        }
        check_pair(pair, ket.n_qubits())?;
        let n = ket.n_qubits();
        let rest = 1usize << (n - 2);
        let scatter = Scatter::new(pair);
        let mut f = [[Complex64::new(0.0, 0.0); 4]; 4];
        for r in 0..rest {
            let base = scatter.base(r);
            let mut kets = [Complex64::new(0.0, 0.0); 4];
            let mut bras = [Complex64::new(0.0, 0.0); 4];
            for a in 0..4 {
                let idx = base | scatter.sub(a);
                kets[a] = ket.amp(idx);
                bras[a] = bra.amp(idx).conj();
            }
            for (a, row) in f.iter_mut().enumerate() {
                for (b, entry) in row.iter_mut().enumerate() {
                    *entry += kets[a] * bras[b];
                }
            }
        }
        out.push(f);
    }
    Ok(out)
}

/// Bit scattering for a qubit pair: maps a "rest" pattern over the other
/// n−2 qubits plus a 2-bit sub-index onto a global amplitude index.
struct Scatter {
    low: usize,
    high: usize,
    pair: (usize, usize),
}

impl Scatter {
    fn new(pair: (usize, usize)) -> Self {
        let (low, high) = if pair.0 < pair.1 { (pair.0, pair.1) } else { (pair.1, pair.0) };
        Self { low, high, pair }
    }

    /// Spreads `rest` over all bit positions except the pair's.
    #[inline]
    fn base(&self, rest: usize) -> usize {
        let low_mask = (1usize << self.low) - 1;
        let x = (rest & low_mask) | ((rest & !low_mask) << 1);
        let high_mask = (1usize << self.high) - 1;
        (x & high_mask) | ((x & !high_mask) << 1)
    }

    /// Places the 2-bit sub-index: bit 0 on `pair.0`, bit 1 on `pair.1`.
    #[inline]
    fn sub(&self, a: usize) -> usize {
        ((a & 1) << self.pair.0) | (((a >> 1) & 1) << self.pair.1)
    }
}

/// Applies a raw 4×4 unitary on a qubit pair without constructing a gate.
/// The matrix is trusted; gate constructors are the validating path.
pub fn apply_matrix(state: &StateVector, m: Mat4, pair: (usize, usize)) -> Result<StateVector> {
    check_pair(pair, state.n_qubits())?;
    let n = state.n_qubits();
    let rest = 1usize << (n - 2);
    let scatter = Scatter::new(pair);
    let mut amps = state.amps().to_vec();
    for r in 0..rest {
        let base = scatter.base(r);
        let idx = [
            base | scatter.sub(0),
            base | scatter.sub(1),
            base | scatter.sub(2),
            base | scatter.sub(3),
        ];
        let old = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
        for (a, &target) in idx.iter().enumerate() {
            amps[target] = m[a][0] * old[0] + m[a][1] * old[1] + m[a][2] * old[2] + m[a][3] * old[3];
        }
    }
    StateVector::from_amps(n, amps)
}

/// Applies a single-qubit unitary directly as an amplitude update.
pub fn apply_single(state: &StateVector, qubit: usize, m: Mat2) -> Result<StateVector> {
    let n = state.n_qubits();
    if qubit >= n {
        return Err(SimError::QubitOutOfRange { index: qubit, n_qubits: n });
    }
    let step = 1usize << qubit;
    let mut amps = state.amps().to_vec();
    let mut i = 0;
    while i < amps.len() {
        for offset in 0..step {
            let lo = i + offset;
            let hi = lo + step;
            let a = amps[lo];
            let b = amps[hi];
            amps[lo] = m[0][0] * a + m[0][1] * b;
            amps[hi] = m[1][0] * a + m[1][1] * b;
        }
        i += 2 * step;
    }
    StateVector::from_amps(n, amps)
}

fn check_pair(pair: (usize, usize), n_qubits: usize) -> Result<()> {
    if pair.0 == pair.1 {
        return Err(SimError::DegeneratePair(pair.0));
    }
    for q in [pair.0, pair.1] {
        if q >= n_qubits {
            return Err(SimError::QubitOutOfRange { index: q, n_qubits });
        }
    }
    Ok(())
}

// --- 4×4 helpers ----------------------------------------------------------

pub fn eye4() -> Mat4 {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    [[o, z, z, z], [z, o, z, z], [z, z, o, z], [z, z, z, o]]
}

pub fn adjoint4(m: &Mat4) -> Mat4 {
    let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (i, row) in m.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            out[j][i] = z.conj();
        }
    }
    out
}

pub fn mul4(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            for j in 0..4 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// `Tr[F U†]` without forming the product.
pub fn trace_mul_adjoint(f: &Mat4, u: &Mat4) -> Complex64 {
    let mut t = Complex64::new(0.0, 0.0);
    for a in 0..4 {
        for b in 0..4 {
            t += f[a][b] * u[a][b].conj();
        }
    }
    t
}

pub fn frobenius4(m: &Mat4) -> f64 {
    m.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn unitarity_deviation(m: &Mat4) -> f64 {
    let prod = mul4(m, &adjoint4(m));
    let mut dev = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let target = if i == j { 1.0 } else { 0.0 };
            dev += (prod[i][j] - Complex64::new(target, 0.0)).norm_sqr();
        }
    }
    dev.sqrt()
}

/// Kronecker product of two 2×2 matrices; the first factor takes the high
/// sub-index bit (the second qubit of a pair).
pub fn kron2(high: &Mat2, low: &Mat2) -> Mat4 {
    let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
    for hr in 0..2 {
        for hc in 0..2 {
            for lr in 0..2 {
                for lc in 0..2 {
                    out[hr * 2 + lr][hc * 2 + lc] = high[hr][hc] * low[lr][lc];
                }
            }
        }
    }
    out
}

pub mod pauli {
    use num_complex::Complex64;

    use super::Mat2;

    const Z0: Complex64 = Complex64::new(0.0, 0.0);
    const O1: Complex64 = Complex64::new(1.0, 0.0);

    pub const I: Mat2 = [[O1, Z0], [Z0, O1]];
    pub const X: Mat2 = [[Z0, O1], [O1, Z0]];
    pub const Y: Mat2 = [[Z0, Complex64::new(0.0, -1.0)], [Complex64::new(0.0, 1.0), Z0]];
    pub const Z: Mat2 = [[O1, Z0], [Z0, Complex64::new(-1.0, 0.0)]];

    pub const ALL: [(&str, Mat2); 4] = [("I", I), ("X", X), ("Y", Y), ("Z", Z)];
}

/// The 15 non-identity two-qubit Pauli strings, ordered lexicographically by
/// label with the first factor acting on the pair's first qubit: IX, IY, IZ,
/// XI, XX, …, ZZ.
pub fn generator_basis() -> &'static [Mat4; 15] {
    static BASIS: OnceLock<[Mat4; 15]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut out = [[[Complex64::new(0.0, 0.0); 4]; 4]; 15];
        let mut k = 0;
        for (a_idx, (_, a)) in pauli::ALL.iter().enumerate() {
            for (b_idx, (_, b)) in pauli::ALL.iter().enumerate() {
                if a_idx == 0 && b_idx == 0 {
                    continue;
                }
                // First label factor acts on pair.0 = low sub-index bit.
                out[k] = kron2(b, a);
                k += 1;
            }
        }
        out
    })
}

pub fn generator_labels() -> [&'static str; 15] {
    [
        "IX", "IY", "IZ", "XI", "XX", "XY", "XZ", "YI", "YX", "YY", "YZ", "ZI", "ZX", "ZY", "ZZ",
    ]
}

/// `exp(i Σ_j coeffs_j G_j)` over the generator basis, via eigendecomposition
/// of the Hermitian generator.
pub fn exp_i_generators(coeffs: &[f64; 15]) -> Mat4 {
    let basis = generator_basis();
    let mut h = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (c, g) in coeffs.iter().zip(basis.iter()) {
        for i in 0..4 {
            for j in 0..4 {
                h[i][j] += *c * g[i][j];
            }
        }
    }
    exp_i_hermitian4(&h)
}

/// `exp(iH)` for Hermitian `H`.
pub fn exp_i_hermitian4(h: &Mat4) -> Mat4 {
    let entries: crate::numerics::CMatrix =
        h.iter().map(|row| row.to_vec()).collect();
    let hm = crate::numerics::HermitianMatrix::new(entries).expect("generator sum is Hermitian");
    let (vals, v) = crate::numerics::eigh(&hm).expect("4×4 Jacobi converges");
    let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4)
                .map(|k| v[i][k] * Complex64::from_polar(1.0, vals[k]) * v[j][k].conj())
                .sum();
        }
    }
    out
}

// --- serialization --------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct GateJson {
    pair: [usize; 2],
    matrix: Vec<Vec<[f64; 2]>>,
    params: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct CircuitJson {
    n_qubits: usize,
    gates: Vec<GateJson>,
}

impl From<&GateCircuit> for CircuitJson {
    fn from(c: &GateCircuit) -> Self {
        let gates = c
            .gates()
            .iter()
            .map(|g| GateJson {
                pair: [g.pair().0, g.pair().1],
                matrix: g
                    .matrix()
                    .iter()
                    .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
                    .collect(),
                params: g.params().map(|p| p.to_vec()),
            })
            .collect();
        CircuitJson { n_qubits: c.n_qubits(), gates }
    }
}

impl TryFrom<CircuitJson> for GateCircuit {
    type Error = SimError;

    fn try_from(json: CircuitJson) -> Result<Self> {
        let mut gates = Vec::with_capacity(json.gates.len());
        for g in json.gates {
            if g.matrix.len() != 4 || g.matrix.iter().any(|row| row.len() != 4) {
                return Err(SimError::MalformedMatrix);
            }
            let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
            for (i, row) in g.matrix.iter().enumerate() {
                for (j, &[re, im]) in row.iter().enumerate() {
                    m[i][j] = Complex64::new(re, im);
                }
            }
            let mut gate = TwoQubitGate::new((g.pair[0], g.pair[1]), m)?;
            if let Some(p) = g.params {
                if p.len() != 15 {
                    return Err(SimError::BadParamCount(p.len()));
                }
                let mut arr = [0.0; 15];
                arr.copy_from_slice(&p);
                let rebuilt = exp_i_generators(&arr);
                let mut dev = 0.0;
                for i in 0..4 {
                    for j in 0..4 {
                        dev += (rebuilt[i][j] - m[i][j]).norm_sqr();
                    }
                }
                let dev = dev.sqrt();
                if dev > UNITARY_TOL {
                    return Err(SimError::ParamsMatrixMismatch { deviation: dev });
                }
                gate.params = Some(arr);
            }
            gates.push(gate);
        }
        GateCircuit::new(json.n_qubits, gates)
    }
}

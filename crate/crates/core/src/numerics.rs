//! Self-contained dense linear algebra over `Complex64`.
//!
//! Everything here operates on plain `Vec<Vec<Complex64>>` matrices (row
//! major). The sizes this crate needs are small — 4×4 for gate updates and
//! at most a few hundred for subspace work — so the solvers favour
//! robustness over asymptotics: a cyclic Jacobi eigensolver for Hermitian
//! matrices, an SVD built on top of it, and modified Gram-Schmidt with one
//! re-orthogonalization pass.

use num_complex::Complex64;
use thiserror::Error;

use crate::simulator::StateVector;

pub type CMatrix = Vec<Vec<Complex64>>;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is not Hermitian: asymmetry {asymmetry:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { asymmetry: f64, tol: f64 },
    #[error("matrix is not square: {rows} rows, {cols} columns in row {row}")]
    NotSquare { rows: usize, cols: usize, row: usize },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("Gram-Schmidt requires at least one input vector")]
    EmptyInput,
    #[error("vector at index {index} has {actual} qubits, expected {expected}")]
    QubitMismatch { index: usize, expected: usize, actual: usize },
}

pub type Result<T> = std::result::Result<T, NumericsError>;

const HERMITIAN_TOL: f64 = 1e-8;
const JACOBI_TOL: f64 = 1e-12;
const MAX_JACOBI_SWEEPS: usize = 100;

/// A Hermitian matrix, symmetrized `(A + A†)/2` at construction.
#[derive(Debug, Clone)]
pub struct HermitianMatrix {
    dim: usize,
    entries: CMatrix,
}

impl HermitianMatrix {
    /// Builds from arbitrary square entries. Fails if the input deviates
    /// from Hermitian symmetry by more than `1e-8 · max(1, ‖A‖_F)`.
    pub fn new(entries: CMatrix) -> Result<Self> {
        let dim = check_square(&entries)?;
        let norm = frobenius_norm(&entries);
        let mut asym = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                asym += (entries[i][j] - entries[j][i].conj()).norm_sqr();
            }
        }
        let asym = asym.sqrt();
        let tol = HERMITIAN_TOL * norm.max(1.0);
        if asym > tol {
            return Err(NumericsError::NotHermitian { asymmetry: asym, tol });
        }
        let mut sym = entries.clone();
        for i in 0..dim {
            for j in 0..dim {
                sym[i][j] = 0.5 * (entries[i][j] + entries[j][i].conj());
            }
        }
        Ok(Self { dim, entries: sym })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }
}

/// Singular value decomposition in the form `F = X · diag(D) · Y` with both
/// `X` and `Y` unitary and `D` sorted descending.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub x: CMatrix,
    pub d: Vec<f64>,
    pub y: CMatrix,
}

/// Output of [`gram_schmidt`].
#[derive(Debug, Clone)]
pub struct GramSchmidtResult {
    /// Orthonormal basis of the span of the inputs.
    pub basis: Vec<StateVector>,
    /// `coeffs[m][i] = ⟨e_i|v_m⟩`; every input reconstructs as
    /// `v_m ≈ Σ_i coeffs[m][i] e_i` within the tolerance.
    pub coeffs: Vec<Vec<Complex64>>,
    /// Number of basis vectors kept.
    pub rank: usize,
    /// Input indices that produced a basis vector, in emission order.
    pub kept_indices: Vec<usize>,
}

impl GramSchmidtResult {
    /// Expresses each basis vector over the *inputs*: returns `R` with
    /// `e_i = Σ_m R[i][m] v_m`. Only kept inputs get nonzero columns.
    pub fn basis_over_inputs(&self) -> CMatrix {
        let n_inputs = self.coeffs.len();
        let mut r = vec![vec![Complex64::new(0.0, 0.0); n_inputs]; self.rank];
        for i in 0..self.rank {
            let src = self.kept_indices[i];
            let pivot = self.coeffs[src][i];
            let mut row = vec![Complex64::new(0.0, 0.0); n_inputs];
            row[src] = Complex64::new(1.0, 0.0);
            for j in 0..i {
                let c = self.coeffs[src][j];
                for m in 0..n_inputs {
                    row[m] -= c * r[j][m];
                }
            }
            for m in 0..n_inputs {
                r[i][m] = row[m] / pivot;
            }
        }
        r
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted descending by value and the matching unitary
/// eigenvector columns. Converges when the off-diagonal Frobenius norm
/// drops below `1e-12 · ‖A‖_F`.
pub fn eigh(a: &HermitianMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let (vals, vecs) = jacobi(a.entries())?;
    Ok(sort_eigh_descending(vals, vecs))
}

fn jacobi(input: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = input.len();
    let mut a = input.clone();
    let mut v = identity(n);
    if n == 0 {
        return Ok((vec![], v));
    }
    let norm = frobenius_norm(&a).max(f64::MIN_POSITIVE);
    let tol = JACOBI_TOL * norm;

    for sweep in 0..MAX_JACOBI_SWEEPS {
        if off_diagonal_norm(&a) <= tol {
            let vals = (0..n).map(|i| a[i][i].re).collect();
            return Ok((vals, v));
        }
        let _ = sweep;
        for p in 0..n {
            for q in (p + 1)..n {
                let beta = a[p][q];
                let mag = beta.norm();
                if mag <= tol / (n as f64) {
                    continue;
                }
                // Phase factor turns the (p,q) entry real, then a classic
                // real rotation zeroes it.
                let e_conj = beta.conj() / mag;
                let app = a[p][p].re;
                let aqq = a[q][q].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Column update: B = A · R, with R the (p,q) block
                // [[c, s], [-s·ē, c·ē]].
                for r in 0..n {
                    let arp = a[r][p];
                    let arq = a[r][q];
                    a[r][p] = arp * c - arq * s * e_conj;
                    a[r][q] = arp * s + arq * c * e_conj;
                }
                // Row update: A' = R† · B.
                let e = e_conj.conj();
                for r in 0..n {
                    let apr = a[p][r];
                    let aqr = a[q][r];
                    a[p][r] = apr * c - aqr * s * e;
                    a[q][r] = apr * s + aqr * c * e;
                }
                a[p][q] = Complex64::new(0.0, 0.0);
                a[q][p] = Complex64::new(0.0, 0.0);
                a[p][p] = Complex64::new(a[p][p].re, 0.0);
                a[q][q] = Complex64::new(a[q][q].re, 0.0);
                for r in 0..n {
                    let vrp = v[r][p];
                    let vrq = v[r][q];
                    v[r][p] = vrp * c - vrq * s * e_conj;
                    v[r][q] = vrp * s + vrq * c * e_conj;
                }
            }
        }
    }
    if off_diagonal_norm(&a) <= tol {
        let vals = (0..n).map(|i| a[i][i].re).collect();
        return Ok((vals, v));
    }
    Err(NumericsError::NoConvergence { sweeps: MAX_JACOBI_SWEEPS })
}

fn sort_eigh_descending(vals: Vec<f64>, vecs: CMatrix) -> (Vec<f64>, CMatrix) {
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let mut sorted_vecs = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            sorted_vecs[r][new_col] = vecs[r][old_col];
        }
    }
    (sorted_vals, sorted_vecs)
}

/// SVD of a square complex matrix by one-sided Jacobi: column pairs of a
/// working copy are rotated orthogonal, accumulating the right factor.
/// Robust for rank-deficient inputs; null columns of `X` are completed
/// from the standard basis.
pub fn svd(f: &CMatrix) -> Result<SvdResult> {
    let n = check_square(f)?;
    for (i, row) in f.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(NumericsError::NonFinite { row: i, col: j });
            }
        }
    }
    // Columns of `a`; `v` accumulates right rotations so that a = F·v.
    let mut a: Vec<Vec<Complex64>> = (0..n)
        .map(|c| (0..n).map(|r| f[r][c]).collect())
        .collect();
    let mut v: Vec<Vec<Complex64>> = (0..n)
        .map(|c| {
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            col[c] = Complex64::new(1.0, 0.0);
            col
        })
        .collect();

    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let app: f64 = a[p].iter().map(|z| z.norm_sqr()).sum();
                let aqq: f64 = a[q].iter().map(|z| z.norm_sqr()).sum();
                let apq: Complex64 = a[p].iter().zip(&a[q]).map(|(x, y)| x.conj() * y).sum();
                let mag = apq.norm();
                if mag <= 1e-15 * (app * aqq).sqrt().max(f64::MIN_POSITIVE) {
                    continue;
                }
                rotated = true;
                // Diagonalize the 2×2 column Gram [[app, apq], [conj, aqq]].
                let e_conj = apq.conj() / mag;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for cols in [&mut a, &mut v] {
                    let (left, right) = cols.split_at_mut(q);
                    let col_p = &mut left[p];
                    let col_q = &mut right[0];
                    for (zp, zq) in col_p.iter_mut().zip(col_q.iter_mut()) {
                        let old_p = *zp;
                        let old_q = *zq;
                        *zp = old_p * c - old_q * s * e_conj;
                        *zq = old_p * s + old_q * c * e_conj;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Singular values are the column norms; sort descending.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = a
        .iter()
        .map(|col| col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));

    // Null directions multiply a zero singular value, so any orthonormal
    // completion is valid; completing BOTH factors from the standard basis
    // keeps X·Y a continuous function of F, which rotation-accumulated
    // null bases would not be.
    let scale = order.first().map(|&i| norms[i]).unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let mut d = Vec::with_capacity(n);
    let mut x_cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut y_rows: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for &i in &order {
        let nrm = norms[i];
        if nrm > scale * 1e-14 {
            d.push(nrm);
            let inv = 1.0 / nrm;
            x_cols.push(a[i].iter().map(|z| z * inv).collect());
            y_rows.push(v[i].iter().map(|z| z.conj()).collect());
        } else {
            d.push(0.0);
            x_cols.push(Vec::new());
            y_rows.push(Vec::new());
        }
    }
    complete_orthonormal(&mut x_cols, n);
    complete_orthonormal(&mut y_rows, n);

    let mut x = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (c, col) in x_cols.iter().enumerate() {
        for r in 0..n {
            x[r][c] = col[r];
        }
    }
    Ok(SvdResult { x, d, y: y_rows })
}

/// Fills the empty slots of `cols` with vectors orthonormal to the rest,
/// drawn from the standard basis. The first candidate whose projected
/// residual clears `1/√n` is taken — one always exists, and a fixed
/// threshold keeps the choice stable under perturbation of the kept
/// vectors, where a best-candidate rule could flip on ties.
fn complete_orthonormal(cols: &mut [Vec<Complex64>], n: usize) {
    let threshold = 0.99 / (n as f64).sqrt();
    for idx in 0..cols.len() {
        if !cols[idx].is_empty() {
            continue;
        }
        let mut fallback: Option<(f64, Vec<Complex64>)> = None;
        let mut chosen: Option<(f64, Vec<Complex64>)> = None;
        for cand in 0..n {
            let mut w = vec![Complex64::new(0.0, 0.0); n];
            w[cand] = Complex64::new(1.0, 0.0);
            for _ in 0..2 {
                for col in cols.iter().filter(|c| !c.is_empty()) {
                    let ip: Complex64 = col.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                    for (wr, cr) in w.iter_mut().zip(col) {
                        *wr -= ip * cr;
                    }
                }
            }
            let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm >= threshold {
                chosen = Some((norm, w));
                break;
            }
            if fallback.as_ref().map_or(true, |(f, _)| norm > *f) {
                fallback = Some((norm, w));
            }
        }
        let (norm, mut w) =
            chosen.or(fallback).expect("basis completion always finds a candidate");
        let inv = 1.0 / norm;
        for z in &mut w {
            *z *= inv;
        }
        cols[idx] = w;
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass.
///
/// Inputs whose residual after projection falls below `tol` are recorded as
/// dependent: they contribute an expansion row but no basis vector.
pub fn gram_schmidt(vectors: &[StateVector], tol: f64) -> Result<GramSchmidtResult> {
    if vectors.is_empty() {
        return Err(NumericsError::EmptyInput);
    }
    let n_qubits = vectors[0].n_qubits();
    for (i, v) in vectors.iter().enumerate() {
        if v.n_qubits() != n_qubits {
            return Err(NumericsError::QubitMismatch {
                index: i,
                expected: n_qubits,
                actual: v.n_qubits(),
            });
        }
    }

    let mut basis: Vec<StateVector> = Vec::new();
    let mut coeffs: Vec<Vec<Complex64>> = Vec::with_capacity(vectors.len());
    let mut kept_indices: Vec<usize> = Vec::new();

    for (m, v) in vectors.iter().enumerate() {
        let mut w: Vec<Complex64> = v.amps().to_vec();
        let mut row = vec![Complex64::new(0.0, 0.0); basis.len()];
        for _ in 0..2 {
            for (i, e) in basis.iter().enumerate() {
                let c: Complex64 = e.amps().iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                for (wr, er) in w.iter_mut().zip(e.amps()) {
                    *wr -= c * er;
                }
                row[i] += c;
            }
        }
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > tol {
            let inv = 1.0 / norm;
            for z in &mut w {
                *z *= inv;
            }
            basis.push(StateVector::from_amps(n_qubits, w).expect("length preserved"));
            row.push(Complex64::new(norm, 0.0));
            kept_indices.push(m);
        }
        coeffs.push(row);
    }

    let rank = basis.len();
    for row in &mut coeffs {
        row.resize(rank, Complex64::new(0.0, 0.0));
    }
    Ok(GramSchmidtResult { basis, coeffs, rank, kept_indices })
}

/// Simultaneous eigendecomposition of two commuting Hermitian matrices.
///
/// Returns a common unitary eigenbasis `V` plus the real diagonals of
/// `V†AV` and `V†BV`. Degenerate eigenvalue clusters of `A` are resolved by
/// diagonalizing the projection of `B` inside each cluster.
pub fn eigh_commuting_pair(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<(CMatrix, Vec<f64>, Vec<f64>)> {
    let n = a.dim();
    let (wa, mut v) = eigh(a)?;
    let scale = wa.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    let cluster_tol = 1e-8 * scale;

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (wa[end - 1] - wa[end]).abs() <= cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            let cols: Vec<usize> = (start..end).collect();
            let sub = project(b.entries(), &v, &cols);
            let (_, vb) = eigh(&HermitianMatrix::new(sub)?)?;
            rotate_columns(&mut v, &cols, &vb);
        }
        start = end;
    }

    let diag = |m: &CMatrix| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let col: Vec<Complex64> = (0..n).map(|r| v[r][k]).collect();
                let mv = mat_vec(m, &col);
                col.iter().zip(&mv).map(|(a, b)| (a.conj() * b).re).sum()
            })
            .collect()
    };
    let a_vals = diag(a.entries());
    let b_vals = diag(b.entries());
    Ok((v, a_vals, b_vals))
}

fn project(m: &CMatrix, v: &CMatrix, cols: &[usize]) -> CMatrix {
    let n = m.len();
    let k = cols.len();
    let mut mv = vec![vec![Complex64::new(0.0, 0.0); k]; n];
    for (j, &cj) in cols.iter().enumerate() {
        let col: Vec<Complex64> = (0..n).map(|r| v[r][cj]).collect();
        let out = mat_vec(m, &col);
        for r in 0..n {
            mv[r][j] = out[r];
        }
    }
    let mut sub = vec![vec![Complex64::new(0.0, 0.0); k]; k];
    for (i, &ci) in cols.iter().enumerate() {
        for j in 0..k {
            sub[i][j] = (0..n).map(|r| v[r][ci].conj() * mv[r][j]).sum();
        }
    }
    sub
}

fn rotate_columns(v: &mut CMatrix, cols: &[usize], rot: &CMatrix) {
    let n = v.len();
    let k = cols.len();
    for r in 0..n {
        let old: Vec<Complex64> = cols.iter().map(|&c| v[r][c]).collect();
        for (j, &cj) in cols.iter().enumerate() {
            v[r][cj] = (0..k).map(|i| old[i] * rot[i][j]).sum();
        }
    }
}

// --- small dense helpers -------------------------------------------------

pub fn identity(n: usize) -> CMatrix {
    let mut m = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

pub fn adjoint(m: &CMatrix) -> CMatrix {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut out = vec![vec![Complex64::new(0.0, 0.0); rows]; cols];
    for (i, row) in m.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            out[j][i] = z.conj();
        }
    }
    out
}

pub fn mat_mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let n = a.len();
    let inner = if n == 0 { 0 } else { a[0].len() };
    let m = if b.is_empty() { 0 } else { b[0].len() };
    let mut out = vec![vec![Complex64::new(0.0, 0.0); m]; n];
    for i in 0..n {
        for k in 0..inner {
            let aik = a[i][k];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..m {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn mat_vec(m: &CMatrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter()
        .flat_map(|row| row.iter())
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    (0..m.len()).map(|i| m[i][i]).sum()
}

/// Determinant via LU decomposition with partial pivoting.
pub fn det(m: &CMatrix) -> Complex64 {
    let n = m.len();
    let mut a = m.clone();
    let mut result = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let (pivot, _) = (col..n)
            .map(|r| (r, a[r][col].norm()))
            .fold((col, -1.0), |best, cand| if cand.1 > best.1 { cand } else { best });
        if a[pivot][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            a.swap(pivot, col);
            result = -result;
        }
        result *= a[col][col];
        let inv = Complex64::new(1.0, 0.0) / a[col][col];
        for r in (col + 1)..n {
            let factor = a[r][col] * inv;
            for c in col..n {
                let sub = factor * a[col][c];
                a[r][c] -= sub;
            }
        }
    }
    result
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i][j].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn check_square(m: &CMatrix) -> Result<usize> {
    let n = m.len();
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(NumericsError::NotSquare { rows: n, cols: row.len(), row: i });
        }
    }
    Ok(n)
}

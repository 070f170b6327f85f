//! Dense complex matrix algebra for bipartite system-environment operators.
//!
//! Joint operators use the system-major Kronecker convention: the joint
//! index of `(i, k)` with `i` a system index and `k` an environment index is
//! `i * d_E + k`. [`tensor`], [`partial_trace_env`] and [`partial_trace_sys`]
//! all agree on it.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{RdlError, Result};

pub type C64 = num_complex::Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

/// Numerical thresholds shared by every module. All are absolute, max-norm
/// unless noted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub herm: f64,
    pub trace: f64,
    pub unitary: f64,
    pub psd: f64,
    /// Singular-value cutoff for rank and span-membership decisions.
    pub rank: f64,
    /// Threshold on `||Tr_E(U Y U^dag)||_max` for U-consistency.
    pub consistency: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm: 1e-9,
            trace: 1e-9,
            unitary: 1e-9,
            psd: 1e-9,
            rank: 1e-8,
            consistency: 1e-8,
        }
    }
}

impl Tolerances {
    /// Every threshold set to the same value.
    pub fn uniform(tol: f64) -> Self {
        Tolerances {
            herm: tol,
            trace: tol,
            unitary: tol,
            psd: tol,
            rank: tol,
            consistency: tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.herm,
            self.trace,
            self.unitary,
            self.psd,
            self.rank,
            self.consistency,
        ];
        if all.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(RdlError::InvalidParameter(
                "tolerances must be finite and positive".into(),
            ));
        }
        Ok(())
    }
}

/// System and environment Hilbert-space dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteDims {
    pub d_s: usize,
    pub d_e: usize,
}

impl BipartiteDims {
    pub fn new(d_s: usize, d_e: usize) -> Result<Self> {
        if d_s < 2 {
            return Err(RdlError::Dimension(format!(
                "system dimension must be at least 2, got {d_s}"
            )));
        }
        if d_e < 1 {
            return Err(RdlError::Dimension(
                "environment dimension must be at least 1".into(),
            ));
        }
        Ok(BipartiteDims { d_s, d_e })
    }

    pub fn two_qubit() -> Self {
        BipartiteDims { d_s: 2, d_e: 2 }
    }

    /// Side length of a joint operator.
    pub fn joint(&self) -> usize {
        self.d_s * self.d_e
    }

    pub fn check_joint(&self, x: &CMatrix) -> Result<()> {
        let n = self.joint();
        if x.nrows() != n || x.ncols() != n {
            return Err(RdlError::Dimension(format!(
                "expected a {n}x{n} joint operator, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn check_system(&self, x: &CMatrix) -> Result<()> {
        let n = self.d_s;
        if x.nrows() != n || x.ncols() != n {
            return Err(RdlError::Dimension(format!(
                "expected a {n}x{n} system operator, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Pauli matrix `sigma^(k)` for `k` in 1..=3; `k = 0` gives the identity.
pub fn pauli(k: usize) -> CMatrix {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match k {
        0 => CMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        1 => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        2 => CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        3 => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => panic!("Pauli index must be 0..=3, got {k}"),
    }
}

/// `|psi><psi|` for a column vector of amplitudes.
pub fn projector(amplitudes: &[C64]) -> CMatrix {
    let v = nalgebra::DVector::from_column_slice(amplitudes);
    &v * v.adjoint()
}

pub fn max_norm(x: &CMatrix) -> f64 {
    x.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

pub fn trace(x: &CMatrix) -> C64 {
    x.diagonal().iter().sum()
}

/// Hilbert-Schmidt inner product `Tr(A^dag B)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn require_square(x: &CMatrix, what: &str) -> Result<()> {
    if x.nrows() != x.ncols() {
        return Err(RdlError::Dimension(format!(
            "{what} must be square, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Kronecker product, `(A (x) B)[i*d_B + k, j*d_B + l] = A[i,j] B[k,l]`.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Trace over the environment factor.
pub fn partial_trace_env(x: &CMatrix, dims: BipartiteDims) -> Result<CMatrix> {
    dims.check_joint(x)?;
    let (ds, de) = (dims.d_s, dims.d_e);
    Ok(CMatrix::from_fn(ds, ds, |i, j| {
        (0..de).map(|k| x[(i * de + k, j * de + k)]).sum()
    }))
}

/// Trace over the system factor.
pub fn partial_trace_sys(x: &CMatrix, dims: BipartiteDims) -> Result<CMatrix> {
    dims.check_joint(x)?;
    let (ds, de) = (dims.d_s, dims.d_e);
    Ok(CMatrix::from_fn(de, de, |k, l| {
        (0..ds).map(|i| x[(i * de + k, i * de + l)]).sum()
    }))
}

pub fn hermiticity_defect(x: &CMatrix) -> f64 {
    let n = x.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((x[(i, j)] - x[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn check_hermitian(x: &CMatrix, tol: f64) -> Result<()> {
    require_square(x, "Hermitian operand")?;
    let deviation = hermiticity_defect(x);
    if deviation > tol {
        return Err(RdlError::Hermiticity { deviation });
    }
    Ok(())
}

pub fn check_unitary(u: &CMatrix, tol: f64) -> Result<()> {
    require_square(u, "unitary")?;
    let n = u.nrows();
    let deviation = max_abs_diff(&(u.adjoint() * u), &identity(n));
    if deviation > tol {
        return Err(RdlError::Unitarity { deviation });
    }
    Ok(())
}

/// Validates Hermiticity, unit trace and positivity.
pub fn check_density(rho: &CMatrix, tol: &Tolerances) -> Result<()> {
    require_square(rho, "density matrix")?;
    let herm = hermiticity_defect(rho);
    if herm > tol.herm {
        return Err(RdlError::NotAState {
            min_eigenvalue: f64::NAN,
            reason: format!("not Hermitian (defect {herm:e})"),
        });
    }
    let tr = trace(rho);
    if (tr - c(1.0, 0.0)).norm() > tol.trace {
        return Err(RdlError::NotAState {
            min_eigenvalue: f64::NAN,
            reason: format!("trace is {:.6}{:+.6}i, not 1", tr.re, tr.im),
        });
    }
    let min = min_eigenvalue(rho)?;
    if min < -tol.psd {
        return Err(RdlError::NotAState {
            min_eigenvalue: min,
            reason: "not positive semidefinite".into(),
        });
    }
    Ok(())
}

/// `U X U^dag`, with `U` checked for unitarity first.
pub fn adjoint_action(u: &CMatrix, x: &CMatrix, tol_unitary: f64) -> Result<CMatrix> {
    require_square(x, "operand")?;
    if u.shape() != x.shape() {
        return Err(RdlError::Dimension(format!(
            "unitary is {}x{} but operand is {}x{}",
            u.nrows(),
            u.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    check_unitary(u, tol_unitary)?;
    Ok(conjugate(u, x))
}

/// `U X U^dag` without any checks.
pub(crate) fn conjugate(u: &CMatrix, x: &CMatrix) -> CMatrix {
    u * x * u.adjoint()
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

const CLUSTER_TOL: f64 = 1e-10;

/// Hermitian eigendecomposition with real eigenvalues sorted ascending.
///
/// Eigenvectors of (numerically) degenerate eigenvalues are replaced by a
/// canonical basis of their eigenspace: pivoted Gram-Schmidt on the
/// projections of the standard basis vectors. Each vector is then phased so
/// its first non-negligible component is real and positive. The result is
/// therefore independent of the arbitrary basis the solver returns.
pub fn hermitian_eigen(x: &CMatrix) -> Result<HermitianEigen> {
    require_square(x, "eigen operand")?;
    let n = x.nrows();
    let sym = (x + x.adjoint()) * c(0.5, 0.0);
    let scale = max_norm(&sym).max(1.0);
    let eig = SymmetricEigen::try_new(sym, 1e-15 * scale, 10_000)
        .ok_or_else(|| RdlError::Numerical("Hermitian eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }

    let cluster_tol = CLUSTER_TOL * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] <= cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            canonicalize_cluster(&mut vectors, start, end);
        }
        start = end;
    }
    for k in 0..n {
        fix_phase(&mut vectors, k);
    }
    Ok(HermitianEigen { values, vectors })
}

fn canonicalize_cluster(vectors: &mut CMatrix, start: usize, end: usize) {
    let n = vectors.nrows();
    let q = vectors.columns(start, end - start).into_owned();
    let mut accepted: Vec<nalgebra::DVector<C64>> = Vec::with_capacity(end - start);
    for _ in start..end {
        let mut best: Option<(f64, nalgebra::DVector<C64>)> = None;
        for j in 0..n {
            // projection of e_j onto the cluster span
            let coeffs = q.row(j).adjoint();
            let mut v = &q * coeffs;
            for a in &accepted {
                let ov = a.dotc(&v);
                v -= a * ov;
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|(b, _)| norm > *b + 1e-12) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("cluster has at least one vector");
        accepted.push(v / c(norm, 0.0));
    }
    for (k, v) in accepted.into_iter().enumerate() {
        vectors.set_column(start + k, &v);
    }
}

fn fix_phase(vectors: &mut CMatrix, col: usize) {
    let lead = vectors
        .column(col)
        .iter()
        .copied()
        .find(|z| z.norm() > 1e-8);
    if let Some(z) = lead {
        let phase = z.conj() / z.norm();
        vectors.column_mut(col).iter_mut().for_each(|v| *v *= phase);
    }
}

pub fn eigenvalues_hermitian(x: &CMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eigen(x)?.values)
}

pub fn min_eigenvalue(x: &CMatrix) -> Result<f64> {
    Ok(eigenvalues_hermitian(x)?[0])
}

/// `(1/2) sum |lambda_i|` over the eigenvalues of `rho - sigma`.
pub fn trace_distance(rho: &CMatrix, sigma: &CMatrix, tol_herm: f64) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(RdlError::Dimension(format!(
            "trace distance between {}x{} and {}x{} operators",
            rho.nrows(),
            rho.ncols(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    check_hermitian(rho, tol_herm)?;
    check_hermitian(sigma, tol_herm)?;
    let vals = eigenvalues_hermitian(&(rho - sigma))?;
    Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
}

/// Orthonormal Hermitian basis of the `d x d` operators under the
/// Hilbert-Schmidt inner product.
///
/// The first element is `I/sqrt(d)`; the remaining ones are generalized
/// Gell-Mann matrices scaled to unit norm, ordered as the symmetric and
/// antisymmetric off-diagonal pairs for `(j, k)`, `j < k`, followed by the
/// diagonal ones. For `d = 2` this is `{I, X, Y, Z} / sqrt(2)`.
pub fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    assert!(d >= 1, "basis dimension must be positive");
    let mut basis = Vec::with_capacity(d * d);
    basis.push(identity(d) / c((d as f64).sqrt(), 0.0));
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in (j + 1)..d {
            let mut sym = CMatrix::zeros(d, d);
            sym[(j, k)] = c(r, 0.0);
            sym[(k, j)] = c(r, 0.0);
            basis.push(sym);
            let mut anti = CMatrix::zeros(d, d);
            anti[(j, k)] = c(0.0, -r);
            anti[(k, j)] = c(0.0, r);
            basis.push(anti);
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut diag = CMatrix::zeros(d, d);
        for j in 0..l {
            diag[(j, j)] = c(norm, 0.0);
        }
        diag[(l, l)] = c(-(l as f64) * norm, 0.0);
        basis.push(diag);
    }
    basis
}

/// Coordinates `<B_k, X>` of `x` in an orthonormal basis.
pub fn coordinates(x: &CMatrix, basis: &[CMatrix]) -> Vec<C64> {
    basis.iter().map(|b| hs_inner(b, x)).collect()
}

/// Real coordinates of a Hermitian operator (imaginary parts dropped).
pub fn real_coordinates(x: &CMatrix, basis: &[CMatrix]) -> Vec<f64> {
    basis.iter().map(|b| hs_inner(b, x).re).collect()
}

pub fn from_coordinates(coeffs: &[C64], basis: &[CMatrix]) -> CMatrix {
    assert_eq!(coeffs.len(), basis.len(), "coordinate length mismatch");
    let (r, cc) = basis[0].shape();
    basis
        .iter()
        .zip(coeffs)
        .fold(CMatrix::zeros(r, cc), |acc, (b, w)| acc + b * *w)
}

pub fn from_real_coordinates(coeffs: &[f64], basis: &[CMatrix]) -> CMatrix {
    let cs: Vec<C64> = coeffs.iter().map(|&v| c(v, 0.0)).collect();
    from_coordinates(&cs, basis)
}

/// Swap unitary on `C^d (x) C^d`: `|a>|b> -> |b>|a>`.
pub fn swap_unitary(d: usize) -> CMatrix {
    let n = d * d;
    let mut u = CMatrix::zeros(n, n);
    for a in 0..d {
        for b in 0..d {
            u[(b * d + a, a * d + b)] = c(1.0, 0.0);
        }
    }
    u
}

//! Assignment map, dynamical map and their representations.
//!
//! Conventions:
//! * superoperator matrices act on coordinates in `hermitian_basis(d_S)`;
//! * `choi = sum_{jk} |j><k| (x) Phi(|j><k|)`, unnormalized, input factor
//!   first, so trace preservation means `Tr_out(choi) = I`;
//! * a Choi eigenvector `v` unvectorizes column-major: `E[r][c] = v[c*d + r]`.

use serde::Serialize;

use crate::error::{RdlError, Result};
use crate::json;
use crate::operator::{
    c, check_unitary, conjugate, coordinates, from_coordinates, from_real_coordinates,
    hermitian_basis, hermitian_eigen, hermiticity_defect, identity, max_abs_diff,
    partial_trace_env, BipartiteDims, CMatrix, RMatrix, Tolerances, C64,
};
use crate::subspace::SubspaceV;

/// The linear map `Lambda_S : V_S -> V` fixed by `Lambda_S(rho_S^(i)) = rho_SE^(i)`.
#[derive(Debug, Clone)]
pub struct AssignmentMap {
    subspace: SubspaceV,
}

pub fn build_assignment(v: &SubspaceV) -> AssignmentMap {
    AssignmentMap {
        subspace: v.clone(),
    }
}

impl AssignmentMap {
    pub fn dims(&self) -> BipartiteDims {
        self.subspace.dims()
    }

    pub fn pairs(&self) -> &[(CMatrix, CMatrix)] {
        self.subspace.independent_pairs()
    }

    pub fn subspace(&self) -> &SubspaceV {
        &self.subspace
    }

    /// `sum d_i rho_SE^(i)` where `x = sum d_i rho_S^(i)`.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        let exp = self.subspace.expand_reduced(x)?;
        Ok(self.subspace.lift(&exp.coefficients))
    }
}

/// How a map known only on `V_S` is extended to all operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Extension {
    /// Zero on the Hilbert-Schmidt orthogonal complement of `V_S`.
    Zero,
    /// No extension: building fails unless `V_S` is the full operator space.
    None,
}

#[derive(Debug, Clone, Serialize)]
pub struct Superoperator {
    pub d_s: usize,
    #[serde(with = "json::matrix")]
    pub matrix: CMatrix,
    #[serde(with = "json::matrix")]
    pub choi: CMatrix,
    pub extension: Extension,
    pub consistency_certified: bool,
    /// Dimension of the subspace the map was determined on.
    pub domain_dim: usize,
}

impl Superoperator {
    /// Superoperator of an arbitrary linear map on `d x d` operators.
    pub fn from_linear_map(d: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let basis = hermitian_basis(d);
        let mut matrix = CMatrix::zeros(d * d, d * d);
        for (k, b) in basis.iter().enumerate() {
            for (r, w) in coordinates(&f(b), &basis).into_iter().enumerate() {
                matrix[(r, k)] = w;
            }
        }
        Self::from_matrix(d, matrix, Extension::None, true, d * d)
    }

    fn from_matrix(
        d: usize,
        matrix: CMatrix,
        extension: Extension,
        consistency_certified: bool,
        domain_dim: usize,
    ) -> Self {
        let mut s = Superoperator {
            d_s: d,
            matrix,
            choi: CMatrix::zeros(d * d, d * d),
            extension,
            consistency_certified,
            domain_dim,
        };
        s.choi = s.compute_choi();
        s
    }

    fn compute_choi(&self) -> CMatrix {
        let d = self.d_s;
        let mut choi = CMatrix::zeros(d * d, d * d);
        for j in 0..d {
            for k in 0..d {
                let mut e = CMatrix::zeros(d, d);
                e[(j, k)] = c(1.0, 0.0);
                let out = self.apply_unchecked(&e);
                for r in 0..d {
                    for s in 0..d {
                        choi[(j * d + r, k * d + s)] = out[(r, s)];
                    }
                }
            }
        }
        choi
    }

    fn apply_unchecked(&self, x: &CMatrix) -> CMatrix {
        let basis = hermitian_basis(self.d_s);
        let v = nalgebra::DVector::from_vec(coordinates(x, &basis));
        let out = &self.matrix * v;
        let coeffs: Vec<C64> = out.iter().copied().collect();
        from_coordinates(&coeffs, &basis)
    }

    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.nrows() != self.d_s || x.ncols() != self.d_s {
            return Err(RdlError::Dimension(format!(
                "map acts on {}x{} operators, got {}x{}",
                self.d_s,
                self.d_s,
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(self.apply_unchecked(x))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MapOptions {
    pub extension: Extension,
    /// Set when the caller holds a passing subspace-consistency report.
    pub consistency_certified: bool,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions {
            extension: Extension::Zero,
            consistency_certified: false,
        }
    }
}

/// `Phi_S = Tr_E o Ad_U o Lambda_S`, built column by column on the
/// Hermitian basis projected onto `V_S`.
pub fn build_dynamical_map(
    assignment: &AssignmentMap,
    u: &CMatrix,
    opts: MapOptions,
    tol: &Tolerances,
) -> Result<Superoperator> {
    let dims = assignment.dims();
    dims.check_joint(u)?;
    check_unitary(u, tol.unitary)?;
    let d = dims.d_s;
    let full = d * d;
    let domain_dim = assignment.subspace().dim_vs();
    if domain_dim < full && opts.extension == Extension::None {
        return Err(RdlError::IncompleteDomain {
            domain_dim,
            full_dim: full,
        });
    }
    let basis = hermitian_basis(d);
    let projector: RMatrix = assignment.subspace().reduced_projector();
    let mut matrix = CMatrix::zeros(full, full);
    for k in 0..full {
        let col: Vec<f64> = projector.column(k).iter().copied().collect();
        let x = from_real_coordinates(&col, &basis);
        let lifted = assignment.apply(&x)?;
        let out = partial_trace_env(&conjugate(u, &lifted), dims)?;
        for (r, w) in coordinates(&out, &basis).into_iter().enumerate() {
            matrix[(r, k)] = w;
        }
    }
    Ok(Superoperator::from_matrix(
        d,
        matrix,
        opts.extension,
        opts.consistency_certified,
        domain_dim,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct KrausTerm {
    /// `+1` or `-1`.
    pub e: f64,
    #[serde(with = "json::matrix")]
    pub op: CMatrix,
}

/// `Phi(rho) = sum_i e_i E_i rho E_i^dag` with real signs `e_i`.
#[derive(Debug, Clone, Serialize)]
pub struct SignedKraus {
    pub terms: Vec<KrausTerm>,
}

impl SignedKraus {
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let (r, cc) = rho.shape();
        self.terms.iter().fold(CMatrix::zeros(r, cc), |acc, t| {
            acc + (&t.op * rho * t.op.adjoint()) * c(t.e, 0.0)
        })
    }

    /// `sum_i e_i E_i^dag E_i`; the identity for trace-preserving maps.
    pub fn normalization(&self) -> CMatrix {
        let d = self.terms.first().map_or(0, |t| t.op.nrows());
        self.terms.iter().fold(CMatrix::zeros(d, d), |acc, t| {
            acc + (t.op.adjoint() * &t.op) * c(t.e, 0.0)
        })
    }

    pub fn all_positive(&self) -> bool {
        self.terms.iter().all(|t| t.e > 0.0)
    }
}

/// Signed operator-sum form from the Choi eigendecomposition; terms come in
/// ascending eigenvalue order, so negative signs first.
pub fn decompose_signed_kraus(s: &Superoperator, tol: f64) -> Result<SignedKraus> {
    let deviation = hermiticity_defect(&s.choi);
    if deviation > tol {
        return Err(RdlError::Hermiticity { deviation });
    }
    let d = s.d_s;
    let eig = hermitian_eigen(&s.choi)?;
    let terms = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, l)| l.abs() > tol)
        .map(|(k, &l)| {
            let v = eig.vectors.column(k);
            let scale = l.abs().sqrt();
            KrausTerm {
                e: l.signum(),
                op: CMatrix::from_fn(d, d, |r, col| v[col * d + r] * scale),
            }
        })
        .collect();
    Ok(SignedKraus { terms })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdicts {
    pub hermitian_preserving: bool,
    pub trace_preserving: bool,
    pub completely_positive: bool,
    pub min_choi_eigenvalue: f64,
}

pub fn verdicts(s: &Superoperator, tol: &Tolerances) -> Result<Verdicts> {
    let hermitian_preserving = hermiticity_defect(&s.choi) <= tol.herm;
    let dims = BipartiteDims {
        d_s: s.d_s,
        d_e: s.d_s,
    };
    let marginal = partial_trace_env(&s.choi, dims)?;
    let trace_preserving = max_abs_diff(&marginal, &identity(s.d_s)) <= tol.trace;
    let min_choi_eigenvalue = hermitian_eigen(&s.choi)?.values[0];
    Ok(Verdicts {
        hermitian_preserving,
        trace_preserving,
        completely_positive: hermitian_preserving && min_choi_eigenvalue >= -tol.psd,
        min_choi_eigenvalue,
    })
}

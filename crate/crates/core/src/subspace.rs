//! The spanned subspace `V = span_C S`, its reduced image `V_S = Tr_E V`,
//! the independent pairs `(rho_S^(i), rho_SE^(i))` and the traceless kernel
//! `{Y in V : Tr_E Y = 0}`.
//!
//! All rank and membership decisions are made on real coordinates in the
//! orthonormal Hermitian basis (members are Hermitian, so their coordinates
//! are real) and go through one singular-value threshold, `tol_rank`.

use nalgebra::SVD;
use serde::Serialize;

use crate::error::{RdlError, Result};
use crate::family::StateFamily;
use crate::json;
use crate::operator::{
    c, coordinates, from_coordinates, from_real_coordinates, hermitian_basis, max_abs_diff,
    max_norm, partial_trace_env, real_coordinates, BipartiteDims, CMatrix, RMatrix, C64,
};

/// Singular values in descending order.
pub(crate) fn singular_values(a: &RMatrix) -> Vec<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return Vec::new();
    }
    SVD::new(a.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v
    } else {
        v.into_iter().map(|x| x / n).collect()
    }
}

fn columns_to_matrix(cols: &[Vec<f64>], rows: usize) -> RMatrix {
    RMatrix::from_fn(rows, cols.len(), |r, k| cols[k][r])
}

/// Greedy scan in family order: a member joins when its reduced state
/// raises the numerical rank of the reduced set.
///
/// Reordering the family can change which members are picked, never how
/// many.
pub fn select_independent(family: &StateFamily, tol_rank: f64) -> Vec<(CMatrix, CMatrix)> {
    let dims = family.dims();
    let basis = hermitian_basis(dims.d_s);
    let max_m = dims.d_s * dims.d_s;
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut pairs = Vec::new();
    for (joint, reduced) in family.members().iter().zip(family.reduced_states()) {
        if pairs.len() == max_m {
            break;
        }
        let mut trial = cols.clone();
        trial.push(unit(real_coordinates(&reduced, &basis)));
        let sv = singular_values(&columns_to_matrix(&trial, max_m));
        if sv.last().copied().unwrap_or(0.0) > tol_rank {
            cols = trial;
            pairs.push((reduced, joint.clone()));
        }
    }
    pairs
}

/// Expansion of a system operator over the independent reduced states.
#[derive(Debug, Clone)]
pub struct ReducedExpansion {
    pub coefficients: Vec<C64>,
    /// `||x - sum d_i rho_S^(i)||_max`.
    pub residual: f64,
}

/// Decomposition `X = sum d_i rho_SE^(i) + Y_hat` of a joint operator in `V`.
#[derive(Debug, Clone)]
pub struct JointExpansion {
    pub coefficients: Vec<C64>,
    pub kernel_part: CMatrix,
    /// Worst of the reduced-expansion residual and the distance of `X` from `V`.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubspaceV {
    #[serde(flatten)]
    dims: BipartiteDims,
    tol_rank: f64,
    members_sampled: usize,
    #[serde(with = "json::matrix_vec")]
    span_basis: Vec<CMatrix>,
    #[serde(with = "json::matrix_pairs")]
    independent_pairs: Vec<(CMatrix, CMatrix)>,
    #[serde(with = "json::matrix_vec")]
    kernel_basis: Vec<CMatrix>,
    #[serde(skip)]
    reduced_coords: RMatrix,
    #[serde(skip)]
    reduced_pinv: RMatrix,
    #[serde(skip)]
    span_coords: RMatrix,
}

/// Builds `V`, `V_S`, the independent pairs and the traceless kernel.
pub fn build_subspace(family: &StateFamily, tol_rank: f64) -> SubspaceV {
    let dims = family.dims();
    let n = dims.joint();
    let ds2 = dims.d_s * dims.d_s;
    let basis_joint = hermitian_basis(n);
    let basis_sys = hermitian_basis(dims.d_s);

    // orthonormal basis of V from the left singular vectors
    let member_cols: Vec<Vec<f64>> = family
        .members()
        .iter()
        .map(|m| unit(real_coordinates(m, &basis_joint)))
        .collect();
    let a = columns_to_matrix(&member_cols, n * n);
    let svd = SVD::new(a, true, false);
    let u = svd.u.expect("requested U");
    let dim_v = svd
        .singular_values
        .iter()
        .filter(|&&s| s > tol_rank)
        .count();
    let span_coords = u.columns(0, dim_v).into_owned();
    let span_basis: Vec<CMatrix> = (0..dim_v)
        .map(|k| {
            let col: Vec<f64> = span_coords.column(k).iter().copied().collect();
            from_real_coordinates(&col, &basis_joint)
        })
        .collect();

    // kernel of Tr_E restricted to V
    let side = ds2.max(dim_v);
    let mut trace_map = RMatrix::zeros(side, dim_v);
    for (k, b) in span_basis.iter().enumerate() {
        let red = partial_trace_env(b, dims).expect("dims consistent");
        for (r, v) in real_coordinates(&red, &basis_sys).into_iter().enumerate() {
            trace_map[(r, k)] = v;
        }
    }
    let mut kernel_basis = Vec::new();
    if dim_v > 0 {
        let svd = SVD::new(trace_map, false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > tol_rank)
            .count();
        for r in rank..dim_v {
            let null: Vec<f64> = v_t.row(r).iter().copied().collect();
            let coords: Vec<f64> = (span_coords.clone() * nalgebra::DVector::from_vec(null))
                .iter()
                .copied()
                .collect();
            kernel_basis.push(from_real_coordinates(&coords, &basis_joint));
        }
    }

    let independent_pairs = select_independent(family, tol_rank);
    let red_cols: Vec<Vec<f64>> = independent_pairs
        .iter()
        .map(|(r, _)| real_coordinates(r, &basis_sys))
        .collect();
    let reduced_coords = columns_to_matrix(&red_cols, ds2);
    let reduced_pinv = SVD::new(reduced_coords.clone(), true, true)
        .pseudo_inverse(tol_rank)
        .expect("pseudo-inverse with non-negative epsilon");

    SubspaceV {
        dims,
        tol_rank,
        members_sampled: family.len(),
        span_basis,
        independent_pairs,
        kernel_basis,
        reduced_coords,
        reduced_pinv,
        span_coords,
    }
}

impl SubspaceV {
    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    pub fn tol_rank(&self) -> f64 {
        self.tol_rank
    }

    pub fn span_basis(&self) -> &[CMatrix] {
        &self.span_basis
    }

    pub fn independent_pairs(&self) -> &[(CMatrix, CMatrix)] {
        &self.independent_pairs
    }

    pub fn kernel_basis(&self) -> &[CMatrix] {
        &self.kernel_basis
    }

    /// Number of family members the span was built from.
    pub fn members_sampled(&self) -> usize {
        self.members_sampled
    }

    pub fn dim_v(&self) -> usize {
        self.span_basis.len()
    }

    /// `dim V_S = m`.
    pub fn dim_vs(&self) -> usize {
        self.independent_pairs.len()
    }

    pub fn dim_kernel(&self) -> usize {
        self.kernel_basis.len()
    }

    /// Orthogonal projector onto `V_S` in Hermitian-basis coordinates.
    pub fn reduced_projector(&self) -> RMatrix {
        &self.reduced_coords * &self.reduced_pinv
    }

    /// Least-squares expansion of a system operator over the independent
    /// reduced states; fails with `NotInVS` when `x` is not in `V_S`.
    pub fn expand_reduced(&self, x: &CMatrix) -> Result<ReducedExpansion> {
        self.dims.check_system(x)?;
        let basis = hermitian_basis(self.dims.d_s);
        let cx = coordinates(x, &basis);
        let re = nalgebra::DVector::from_iterator(cx.len(), cx.iter().map(|z| z.re));
        let im = nalgebra::DVector::from_iterator(cx.len(), cx.iter().map(|z| z.im));
        let d_re = &self.reduced_pinv * re;
        let d_im = &self.reduced_pinv * im;
        let coefficients: Vec<C64> = d_re
            .iter()
            .zip(d_im.iter())
            .map(|(&a, &b)| c(a, b))
            .collect();
        let recon = self
            .independent_pairs
            .iter()
            .zip(&coefficients)
            .fold(CMatrix::zeros(x.nrows(), x.ncols()), |acc, ((r, _), w)| {
                acc + r * *w
            });
        let residual = max_abs_diff(x, &recon);
        let tolerance = self.tol_rank * max_norm(x).max(1.0);
        if residual > tolerance {
            return Err(RdlError::NotInVS {
                residual,
                tolerance,
            });
        }
        Ok(ReducedExpansion {
            coefficients,
            residual,
        })
    }

    /// `sum d_i rho_SE^(i)`.
    pub fn lift(&self, coefficients: &[C64]) -> CMatrix {
        assert_eq!(coefficients.len(), self.independent_pairs.len());
        let n = self.dims.joint();
        self.independent_pairs
            .iter()
            .zip(coefficients)
            .fold(CMatrix::zeros(n, n), |acc, ((_, j), w)| acc + j * *w)
    }

    /// Distance (max-norm) of a joint operator from its projection onto `V`.
    pub fn distance_from_v(&self, x: &CMatrix) -> Result<f64> {
        self.dims.check_joint(x)?;
        let basis = hermitian_basis(self.dims.joint());
        let cx = coordinates(x, &basis);
        let mut proj = vec![c(0.0, 0.0); cx.len()];
        for k in 0..self.span_coords.ncols() {
            let col = self.span_coords.column(k);
            let w: C64 = col.iter().zip(&cx).map(|(&a, z)| z * a).sum();
            for (p, &a) in proj.iter_mut().zip(col.iter()) {
                *p += w * a;
            }
        }
        Ok(max_abs_diff(x, &from_coordinates(&proj, &basis)))
    }

    /// `X = sum d_i rho_SE^(i) + Y_hat` with `Tr_E Y_hat = 0`, for `X` in `V`.
    pub fn decompose_joint(&self, x: &CMatrix) -> Result<JointExpansion> {
        let off_v = self.distance_from_v(x)?;
        let tolerance = self.tol_rank * max_norm(x).max(1.0);
        if off_v > tolerance {
            return Err(RdlError::NotInVS {
                residual: off_v,
                tolerance,
            });
        }
        let reduced = self.expand_reduced(&partial_trace_env(x, self.dims)?)?;
        let kernel_part = x - self.lift(&reduced.coefficients);
        Ok(JointExpansion {
            coefficients: reduced.coefficients,
            kernel_part,
            residual: off_v.max(reduced.residual),
        })
    }
}

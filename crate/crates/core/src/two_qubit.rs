//! The two-qubit model `H = (w/2) sigma_z (x) sigma_x` and the swap
//! experiments.
//!
//! With `U = exp(-iHt)` the system Bloch vector evolves as
//!
//! ```text
//! a1' = a1 cos(wt) - g21 sin(wt)
//! a2' = a2 cos(wt) + g11 sin(wt)
//! a3' = a3
//! ```
//!
//! so the reduced dynamics on a family is linear exactly when `g11` and
//! `g21` are affine in the Bloch vector (see [`LinearityCoefficients`]).

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::consistency::{check_subspace_consistency, ConsistencyReport};
use crate::error::{RdlError, Result};
use crate::family::{extract_two_qubit, product_family, StateFamily, TwoQubitParams};
use crate::maps::{
    build_assignment, build_dynamical_map, decompose_signed_kraus, verdicts, MapOptions,
    SignedKraus, Superoperator, Verdicts,
};
use crate::operator::{
    c, conjugate, identity, max_abs_diff, partial_trace_env, pauli, swap_unitary, tensor, trace,
    trace_distance, BipartiteDims, CMatrix, Tolerances,
};
use crate::subspace::{build_subspace, SubspaceV};

/// Largest condition number accepted when solving for the coefficients.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega: f64,
    pub t: f64,
}

impl ModelParams {
    pub fn new(omega: f64, t: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(RdlError::InvalidParameter(format!(
                "omega must be positive, got {omega}"
            )));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(RdlError::InvalidParameter(format!(
                "t must be non-negative, got {t}"
            )));
        }
        Ok(ModelParams { omega, t })
    }

    pub fn wt(&self) -> f64 {
        self.omega * self.t
    }
}

/// `gamma_11 = a11 + b11 . alpha`, `gamma_21 = a21 + b21 . alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearityCoefficients {
    pub a11: f64,
    pub a21: f64,
    pub b11: [f64; 3],
    pub b21: [f64; 3],
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearityCoefficients {
    pub fn gamma11(&self, alpha: &[f64; 3]) -> f64 {
        self.a11 + dot(&self.b11, alpha)
    }

    pub fn gamma21(&self, alpha: &[f64; 3]) -> f64 {
        self.a21 + dot(&self.b21, alpha)
    }

    /// Overwrites `gamma_11` and `gamma_21` of `p` from its `alpha`.
    pub fn impose(&self, p: &TwoQubitParams) -> TwoQubitParams {
        let mut q = *p;
        q.gamma[0][0] = self.gamma11(&p.alpha);
        q.gamma[1][0] = self.gamma21(&p.alpha);
        q
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = (self.a11 - other.a11)
            .abs()
            .max((self.a21 - other.a21).abs());
        for i in 0..3 {
            worst = worst
                .max((self.b11[i] - other.b11[i]).abs())
                .max((self.b21[i] - other.b21[i]).abs());
        }
        worst
    }
}

/// `exp(-i (wt/2) sigma_z (x) sigma_x) = cos(wt/2) I - i sin(wt/2) sigma_z (x) sigma_x`,
/// using `(sigma_z (x) sigma_x)^2 = I`.
pub fn model_unitary(p: &ModelParams) -> CMatrix {
    unitary_at(p.wt())
}

pub fn unitary_at(wt: f64) -> CMatrix {
    let half = 0.5 * wt;
    identity(4) * c(half.cos(), 0.0) - tensor(&pauli(3), &pauli(1)) * c(0.0, half.sin())
}

/// Closed-form Bloch-vector update of the system.
pub fn analytic_bloch_step(alpha: [f64; 3], gamma11: f64, gamma21: f64, wt: f64) -> [f64; 3] {
    let (s, co) = wt.sin_cos();
    [
        alpha[0] * co - gamma21 * s,
        alpha[1] * co + gamma11 * s,
        alpha[2],
    ]
}

/// `alpha_i = Tr(sigma_i rho)` of a qubit operator.
pub fn bloch_vector(rho: &CMatrix) -> [f64; 3] {
    [1, 2, 3].map(|k| trace(&(pauli(k) * rho)).re)
}

/// `(1/2)(I + alpha . sigma)`.
pub fn qubit_state(alpha: [f64; 3]) -> CMatrix {
    (1..=3).fold(identity(2), |acc, k| acc + pauli(k) * c(alpha[k - 1], 0.0)) * c(0.5, 0.0)
}

/// The data one family member contributes to the coefficient solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochRecord {
    pub alpha: [f64; 3],
    pub gamma11: f64,
    pub gamma21: f64,
}

impl BlochRecord {
    pub fn from_params(p: &TwoQubitParams) -> Self {
        BlochRecord {
            alpha: p.alpha,
            gamma11: p.gamma[0][0],
            gamma21: p.gamma[1][0],
        }
    }
}

fn augmented(records: &[BlochRecord]) -> Matrix4<f64> {
    Matrix4::from_fn(|r, col| {
        if col == 0 {
            1.0
        } else {
            records[r].alpha[col - 1]
        }
    })
}

/// Solves the two 4x4 systems `[1 alpha^(j)] (a, b) = gamma^(j)` for the
/// `gamma_11` and `gamma_21` coefficients.
pub fn solve_linearity_coefficients(records: &[BlochRecord; 4]) -> Result<LinearityCoefficients> {
    let a = augmented(records);
    let sv = a.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(RdlError::SingularSystem { condition });
    }
    let lu = a.lu();
    let g11 = Vector4::from_fn(|r, _| records[r].gamma11);
    let g21 = Vector4::from_fn(|r, _| records[r].gamma21);
    let x11 = lu
        .solve(&g11)
        .ok_or(RdlError::SingularSystem { condition })?;
    let x21 = lu
        .solve(&g21)
        .ok_or(RdlError::SingularSystem { condition })?;
    Ok(LinearityCoefficients {
        a11: x11[0],
        a21: x21[0],
        b11: [x11[1], x11[2], x11[3]],
        b21: [x21[1], x21[2], x21[3]],
    })
}

/// Indices of the first four records (in order) whose augmented vectors
/// `(1, alpha)` are linearly independent.
pub fn select_independent_records(records: &[BlochRecord]) -> Option<[usize; 4]> {
    let mut picked: Vec<usize> = Vec::with_capacity(4);
    for (k, _) in records.iter().enumerate() {
        let mut trial = picked.clone();
        trial.push(k);
        let m = nalgebra::DMatrix::from_fn(trial.len(), 4, |r, col| {
            if col == 0 {
                1.0
            } else {
                records[trial[r]].alpha[col - 1]
            }
        });
        let sv = m.singular_values();
        if sv.min() / sv.max() > 1.0 / MAX_CONDITION {
            picked = trial;
        }
        if picked.len() == 4 {
            return Some([picked[0], picked[1], picked[2], picked[3]]);
        }
    }
    None
}

/// `(gamma~_11, gamma~_21)` per member: what is left of `gamma_11`, `gamma_21`
/// after subtracting the affine prediction.
pub fn linearity_residuals(
    family: &StateFamily,
    coeffs: &LinearityCoefficients,
) -> Result<Vec<(f64, f64)>> {
    if family.dims() != BipartiteDims::two_qubit() {
        return Err(RdlError::Dimension(format!(
            "linearity residuals need a two-qubit family, got d_s={} d_e={}",
            family.dims().d_s,
            family.dims().d_e
        )));
    }
    family
        .members()
        .iter()
        .map(|m| {
            let p = extract_two_qubit(m)?;
            Ok((
                p.gamma[0][0] - coeffs.gamma11(&p.alpha),
                p.gamma[1][0] - coeffs.gamma21(&p.alpha),
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BlochRow {
    pub alpha: [f64; 3],
    pub gamma11: f64,
    pub gamma21: f64,
    /// Closed-form prediction.
    pub analytic: [f64; 3],
    /// From `Tr_E(U rho U^dag)`.
    pub direct: [f64; 3],
    /// From the dynamical map applied to the reduced state.
    pub mapped: Option<[f64; 3]>,
}

/// Bloch-vector table of a two-qubit family under the model unitary.
pub fn bloch_table(
    family: &StateFamily,
    wt: f64,
    phi: Option<&Superoperator>,
) -> Result<Vec<BlochRow>> {
    let dims = BipartiteDims::two_qubit();
    if family.dims() != dims {
        return Err(RdlError::Dimension(
            "Bloch table needs a two-qubit family".into(),
        ));
    }
    let u = unitary_at(wt);
    family
        .members()
        .iter()
        .map(|m| {
            let p = extract_two_qubit(m)?;
            let direct = bloch_vector(&partial_trace_env(&conjugate(&u, m), dims)?);
            let mapped = match phi {
                Some(phi) => Some(bloch_vector(&phi.apply(&partial_trace_env(m, dims)?)?)),
                None => None,
            };
            Ok(BlochRow {
                alpha: p.alpha,
                gamma11: p.gamma[0][0],
                gamma21: p.gamma[1][0],
                analytic: analytic_bloch_step(p.alpha, p.gamma[0][0], p.gamma[1][0], wt),
                direct,
                mapped,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DistancePair {
    pub i: usize,
    pub j: usize,
    pub before: f64,
    pub after: f64,
    pub increased: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub consistent: bool,
    pub consistency: ConsistencyReport,
    pub verdicts: Verdicts,
    pub pairs: Vec<DistancePair>,
    /// Input and output Bloch vectors of each probe state (qubit systems only).
    pub bloch_table: Vec<[[f64; 3]; 2]>,
    /// `max ||Phi(rho) - omega_E||_max` over inputs, for the swap experiment.
    pub constant_map_deviation: Option<f64>,
    /// Choi distance to the constant map `rho -> Tr(rho) omega_E`.
    pub choi_deviation: Option<f64>,
    pub superoperator: Superoperator,
    pub kraus: SignedKraus,
}

/// Trace distance before and after `phi` for each pair; `increased` marks
/// growth beyond `slack`.
fn distance_pairs(
    phi: &Superoperator,
    pairs: &[(usize, usize, &CMatrix, &CMatrix)],
    tol: &Tolerances,
    slack: f64,
) -> Result<Vec<DistancePair>> {
    pairs
        .iter()
        .map(|&(i, j, rho, sigma)| {
            let before = trace_distance(rho, sigma, tol.herm)?;
            let a = phi.apply(rho)?;
            let b = phi.apply(sigma)?;
            // map outputs are Hermitian up to round-off
            let a = (&a + a.adjoint()) * c(0.5, 0.0);
            let b = (&b + b.adjoint()) * c(0.5, 0.0);
            let after = trace_distance(&a, &b, tol.herm)?;
            Ok(DistancePair {
                i,
                j,
                before,
                after,
                increased: after > before + slack,
            })
        })
        .collect()
}

/// Product family `{rho_S (x) omega_E}` evolved by the swap: the reduced
/// map is the constant map onto `omega_E`.
pub fn swap_experiment(
    states_s: &[CMatrix],
    omega_e: &CMatrix,
    tol: &Tolerances,
) -> Result<ExperimentReport> {
    let family = product_family(states_s, omega_e, tol)?;
    let dims = family.dims();
    if dims.d_s != dims.d_e {
        return Err(RdlError::Dimension(format!(
            "swap needs equal system and environment dimensions, got {} and {}",
            dims.d_s, dims.d_e
        )));
    }
    let u = swap_unitary(dims.d_s);
    let v = build_subspace(&family, tol.rank);
    let consistency = check_subspace_consistency(&v, &u, tol)?;
    let phi = build_dynamical_map(
        &build_assignment(&v),
        &u,
        MapOptions {
            consistency_certified: consistency.consistent,
            ..MapOptions::default()
        },
        tol,
    )?;
    let kraus = decompose_signed_kraus(&phi, tol.herm)?;
    let verdicts = verdicts(&phi, tol)?;

    let mut constant_dev: f64 = 0.0;
    let mut bloch = Vec::new();
    for rho in states_s {
        let out = phi.apply(rho)?;
        constant_dev = constant_dev.max(max_abs_diff(&out, omega_e));
        if dims.d_s == 2 {
            bloch.push([bloch_vector(rho), bloch_vector(&out)]);
        }
    }
    let constant = Superoperator::from_linear_map(dims.d_s, |x| omega_e * trace(x));
    let choi_dev = if v.dim_vs() == dims.d_s * dims.d_s {
        Some(max_abs_diff(&phi.choi, &constant.choi))
    } else {
        None
    };
    let probe: Vec<_> = pair_indices(states_s.len())
        .map(|(i, j)| (i, j, &states_s[i], &states_s[j]))
        .collect();
    let pairs = distance_pairs(&phi, &probe, tol, tol.trace)?;
    Ok(ExperimentReport {
        consistent: consistency.consistent,
        consistency,
        verdicts,
        pairs,
        bloch_table: bloch,
        constant_map_deviation: Some(constant_dev),
        choi_deviation: choi_dev,
        superoperator: phi,
        kraus,
    })
}

fn pair_indices(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
}

/// Dynamical map over a caller-supplied subspace, with trace distances of
/// probe pairs before and after. Pairs whose distance grows are flagged;
/// that can only happen when the map is not completely positive.
pub fn custom_subspace_experiment(
    v: &SubspaceV,
    u: &CMatrix,
    probe_pairs: &[(CMatrix, CMatrix)],
    tol: &Tolerances,
) -> Result<ExperimentReport> {
    let consistency = check_subspace_consistency(v, u, tol)?;
    for (a, b) in probe_pairs {
        v.expand_reduced(a)?;
        v.expand_reduced(b)?;
    }
    let phi = build_dynamical_map(
        &build_assignment(v),
        u,
        MapOptions {
            consistency_certified: consistency.consistent,
            ..MapOptions::default()
        },
        tol,
    )?;
    let kraus = decompose_signed_kraus(&phi, tol.herm)?;
    let verdicts = verdicts(&phi, tol)?;
    let probe: Vec<_> = probe_pairs
        .iter()
        .enumerate()
        .map(|(k, (a, b))| (k, k, a, b))
        .collect();
    let pairs = distance_pairs(&phi, &probe, tol, tol.trace)?;
    let bloch_table = if v.dims().d_s == 2 {
        probe_pairs
            .iter()
            .flat_map(|(a, b)| [a, b])
            .map(|s| Ok([bloch_vector(s), bloch_vector(&phi.apply(s)?)]))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(ExperimentReport {
        consistent: consistency.consistent,
        consistency,
        verdicts,
        pairs,
        bloch_table,
        constant_map_deviation: None,
        choi_deviation: None,
        superoperator: phi,
        kraus,
    })
}

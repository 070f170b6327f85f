//! U-consistency checks.
//!
//! Three routes to the same question, "do joint states with equal system
//! marginals keep equal marginals after `U`?":
//!
//! * [`check_subspace_consistency`] certifies it for all of `V` by checking
//!   `Tr_E(U Y U^dag) = 0` on a basis of the traceless kernel;
//! * [`check_pairwise_consistency`] tests the equal-marginal pairs that are
//!   literally present in the family (it can refute but never certify);
//! * [`check_hull_consistency`] samples equal-marginal pairs of convex
//!   combinations of members.

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::error::{RdlError, Result};
use crate::family::{seeded_rng, StateFamily};
use crate::json;
use crate::operator::{
    c, check_unitary, conjugate, max_abs_diff, max_norm, min_eigenvalue, partial_trace_env,
    BipartiteDims, CMatrix, Tolerances,
};
use crate::subspace::{build_subspace, SubspaceV};

/// Violations in `(tol, MARGINAL_FACTOR * tol]` are reported as marginal.
pub const MARGINAL_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsistencyStatus {
    Consistent,
    /// Fails the threshold but by less than `MARGINAL_FACTOR` times it.
    Marginal,
    Inconsistent,
    /// Nothing was tested; says nothing about linearity.
    Vacuous,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub status: ConsistencyStatus,
    pub max_violation: f64,
    pub tolerance: f64,
    #[serde(with = "json::matrix_opt")]
    pub witness: Option<CMatrix>,
    pub pairs_tested: Option<usize>,
}

impl ConsistencyReport {
    fn from_worst(
        worst: Option<(f64, CMatrix)>,
        tolerance: f64,
        pairs_tested: Option<usize>,
    ) -> Self {
        let vacuous = pairs_tested == Some(0);
        let (max_violation, witness) = match worst {
            Some((v, w)) if v > tolerance => (v, Some(w)),
            Some((v, _)) => (v, None),
            None => (0.0, None),
        };
        let status = if vacuous {
            ConsistencyStatus::Vacuous
        } else if max_violation <= tolerance {
            ConsistencyStatus::Consistent
        } else if max_violation <= MARGINAL_FACTOR * tolerance {
            ConsistencyStatus::Marginal
        } else {
            ConsistencyStatus::Inconsistent
        };
        ConsistencyReport {
            consistent: max_violation <= tolerance,
            status,
            max_violation,
            tolerance,
            witness,
            pairs_tested,
        }
    }
}

fn check_joint_unitary(dims: BipartiteDims, u: &CMatrix, tol: &Tolerances) -> Result<()> {
    dims.check_joint(u)?;
    check_unitary(u, tol.unitary)
}

/// `||Tr_E(U X U^dag)||_max`.
pub fn evolved_marginal_norm(x: &CMatrix, u: &CMatrix, dims: BipartiteDims) -> f64 {
    max_norm(&partial_trace_env(&conjugate(u, x), dims).expect("dims checked"))
}

/// Keeps the first maximum so ties resolve by scan order.
fn keep_worst(worst: &mut Option<(f64, CMatrix)>, v: f64, w: impl FnOnce() -> CMatrix) {
    if worst.as_ref().is_none_or(|(b, _)| v > *b) {
        *worst = Some((v, w()));
    }
}

/// Certifies U-consistency of `V` by checking every kernel basis element;
/// by linearity this covers the whole kernel.
pub fn check_subspace_consistency(
    v: &SubspaceV,
    u: &CMatrix,
    tol: &Tolerances,
) -> Result<ConsistencyReport> {
    let dims = v.dims();
    check_joint_unitary(dims, u, tol)?;
    let mut worst = None;
    for y in v.kernel_basis() {
        let viol = evolved_marginal_norm(y, u, dims);
        keep_worst(&mut worst, viol, || y.clone());
    }
    Ok(ConsistencyReport::from_worst(worst, tol.consistency, None))
}

/// Tests every pair of members whose marginals agree within `tol.rank`.
pub fn check_pairwise_consistency(
    family: &StateFamily,
    u: &CMatrix,
    tol: &Tolerances,
) -> Result<ConsistencyReport> {
    let dims = family.dims();
    check_joint_unitary(dims, u, tol)?;
    let members = family.members();
    let reduced = family.reduced_states();
    let mut worst = None;
    let mut tested = 0;
    for i in 0..members.len() {
        for j in (i + 1)..members.len() {
            if max_abs_diff(&reduced[i], &reduced[j]) > tol.rank {
                continue;
            }
            tested += 1;
            let diff = &members[i] - &members[j];
            let viol = evolved_marginal_norm(&diff, u, dims);
            keep_worst(&mut worst, viol, || diff);
        }
    }
    Ok(ConsistencyReport::from_worst(
        worst,
        tol.consistency,
        Some(tested),
    ))
}

/// An equal-marginal pair of convex combinations of family members.
#[derive(Debug, Clone)]
pub struct HullPair {
    pub sigma_hat: CMatrix,
    pub sigma_tilde: CMatrix,
}

/// Splits a hull element `rho = sum a_i rho_SE^(i) + Y` into
///
/// `sigma_hat = (rho + sum |a_i^-| rho_SE^(i)) / A`,
/// `sigma_tilde = (sum a_i^+ rho_SE^(i)) / A`, `A = sum a_i^+`,
///
/// two convex combinations of members with equal marginals that differ by
/// `Y / A`.
pub fn equal_marginal_pair(v: &SubspaceV, rho: &CMatrix) -> Result<HullPair> {
    let exp = v.decompose_joint(rho)?;
    let n = v.dims().joint();
    let mut hat = rho.clone();
    let mut tilde = CMatrix::zeros(n, n);
    let mut total_positive = 0.0;
    for (w, (_, lift)) in exp.coefficients.iter().zip(v.independent_pairs()) {
        let a = w.re;
        if a > 0.0 {
            tilde += lift * c(a, 0.0);
            total_positive += a;
        } else {
            hat += lift * c(-a, 0.0);
        }
    }
    if total_positive <= 0.0 {
        return Err(RdlError::Numerical(
            "hull element has no positive expansion coefficient".into(),
        ));
    }
    let scale = c(1.0 / total_positive, 0.0);
    Ok(HullPair {
        sigma_hat: hat * scale,
        sigma_tilde: tilde * scale,
    })
}

/// Random convex combination of a random non-empty subset of members.
fn random_hull_element<R: Rng>(rng: &mut R, family: &StateFamily) -> CMatrix {
    let members = family.members();
    let k = rng.gen_range(1..=members.len());
    let picked = sample(rng, members.len(), k);
    let weights: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = weights.iter().sum();
    let n = family.dims().joint();
    picked
        .iter()
        .zip(&weights)
        .fold(CMatrix::zeros(n, n), |acc, (idx, w)| {
            acc + &members[idx] * c(w / total, 0.0)
        })
}

/// Samples `trials` equal-marginal pairs from the convex hull of the family
/// and checks that their evolved marginals agree.
pub fn check_hull_consistency(
    family: &StateFamily,
    u: &CMatrix,
    tol: &Tolerances,
    trials: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    if trials == 0 {
        return Err(RdlError::InvalidParameter(
            "hull check needs at least one trial".into(),
        ));
    }
    let dims = family.dims();
    check_joint_unitary(dims, u, tol)?;
    let v = build_subspace(family, tol.rank);
    let mut rng = seeded_rng(seed);
    let mut worst = None;
    let mut tested = 0;
    for _ in 0..trials {
        let rho = random_hull_element(&mut rng, family);
        let Ok(pair) = equal_marginal_pair(&v, &rho) else {
            continue;
        };
        let positive = [&pair.sigma_hat, &pair.sigma_tilde]
            .iter()
            .all(|s| min_eigenvalue(s).is_ok_and(|m| m >= -tol.psd));
        if !positive {
            continue;
        }
        tested += 1;
        let diff = &pair.sigma_hat - &pair.sigma_tilde;
        let viol = evolved_marginal_norm(&diff, u, dims);
        keep_worst(&mut worst, viol, || diff);
    }
    if tested == 0 {
        return Err(RdlError::SamplingExhausted { trials });
    }
    Ok(ConsistencyReport::from_worst(
        worst,
        tol.consistency,
        Some(tested),
    ))
}

//! Families of initial system-environment states.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RdlError, Result};
use crate::json::{self, JsonMatrix};
use crate::operator::{
    c, check_density, identity, partial_trace_env, pauli, tensor, trace, BipartiteDims, CMatrix,
    Tolerances, C64,
};
use crate::two_qubit::LinearityCoefficients;

/// Deterministic generator used by every sampling path.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A finite, non-empty list of joint density matrices sharing one set of
/// dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyJson")]
pub struct StateFamily {
    #[serde(flatten)]
    dims: BipartiteDims,
    label: String,
    #[serde(with = "json::matrix_vec")]
    members: Vec<CMatrix>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyJson {
    d_s: usize,
    d_e: usize,
    #[serde(default)]
    label: String,
    #[serde(with = "json::matrix_vec")]
    members: Vec<CMatrix>,
}

impl TryFrom<FamilyJson> for StateFamily {
    type Error = RdlError;

    fn try_from(raw: FamilyJson) -> Result<Self> {
        let dims = BipartiteDims::new(raw.d_s, raw.d_e)?;
        StateFamily::new(dims, raw.members, raw.label, &Tolerances::default())
    }
}

impl StateFamily {
    /// Validates every member as a joint density matrix.
    pub fn new(
        dims: BipartiteDims,
        members: Vec<CMatrix>,
        label: impl Into<String>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(RdlError::EmptyFamily(
                "a family needs at least one member".into(),
            ));
        }
        for (k, m) in members.iter().enumerate() {
            dims.check_joint(m).map_err(|e| match e {
                RdlError::Dimension(msg) => RdlError::Dimension(format!("member {k}: {msg}")),
                other => other,
            })?;
            check_density(m, tol).map_err(|e| match e {
                RdlError::NotAState {
                    min_eigenvalue,
                    reason,
                } => RdlError::NotAState {
                    min_eigenvalue,
                    reason: format!("member {k}: {reason}"),
                },
                other => other,
            })?;
        }
        Ok(StateFamily {
            dims,
            label: label.into(),
            members,
        })
    }

    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn members(&self) -> &[CMatrix] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The reduced set `Tr_E S`, in member order.
    pub fn reduced_states(&self) -> Vec<CMatrix> {
        self.members
            .iter()
            .map(|m| partial_trace_env(m, self.dims).expect("members validated"))
            .collect()
    }

    /// Same members in a different order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.members.len(), "permutation length");
        StateFamily {
            dims: self.dims,
            label: self.label.clone(),
            members: order.iter().map(|&k| self.members[k].clone()).collect(),
        }
    }
}

/// Coefficients of a two-qubit state in the product Pauli basis:
/// `rho = (1/4)(I + sum a_i s_i(x)I + sum b_i I(x)s_i + sum g_ij s_i(x)s_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoQubitParams {
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
    pub gamma: [[f64; 3]; 3],
}

impl TwoQubitParams {
    fn all(&self) -> impl Iterator<Item = f64> + '_ {
        self.alpha
            .iter()
            .chain(self.beta.iter())
            .chain(self.gamma.iter().flatten())
            .copied()
    }

    fn check_range(&self) -> Result<()> {
        if let Some(v) = self.all().find(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(RdlError::NotAState {
                min_eigenvalue: f64::NAN,
                reason: format!("parameter {v} outside [-1, 1]"),
            });
        }
        Ok(())
    }
}

fn pauli_product(i: usize, j: usize) -> CMatrix {
    tensor(&pauli(i), &pauli(j))
}

/// Assembles the joint state from its Pauli coefficients. The result is
/// Hermitian with unit trace by construction; positivity is checked.
pub fn assemble_two_qubit(p: &TwoQubitParams, tol: &Tolerances) -> Result<CMatrix> {
    p.check_range()?;
    let rho = assemble_unchecked(p);
    check_density(&rho, tol)?;
    Ok(rho)
}

pub(crate) fn assemble_unchecked(p: &TwoQubitParams) -> CMatrix {
    let mut rho = identity(4);
    for i in 0..3 {
        rho += pauli_product(i + 1, 0) * c(p.alpha[i], 0.0);
        rho += pauli_product(0, i + 1) * c(p.beta[i], 0.0);
        for j in 0..3 {
            rho += pauli_product(i + 1, j + 1) * c(p.gamma[i][j], 0.0);
        }
    }
    rho * c(0.25, 0.0)
}

/// Reads the Pauli coefficients back from a two-qubit operator:
/// `gamma_ij = Tr((s_i (x) s_j) rho)` and likewise for `alpha`, `beta`.
pub fn extract_two_qubit(rho: &CMatrix) -> Result<TwoQubitParams> {
    BipartiteDims::two_qubit().check_joint(rho)?;
    let coeff = |i: usize, j: usize| trace(&(pauli_product(i, j) * rho)).re;
    let mut p = TwoQubitParams::default();
    for i in 0..3 {
        p.alpha[i] = coeff(i + 1, 0);
        p.beta[i] = coeff(0, i + 1);
        for j in 0..3 {
            p.gamma[i][j] = coeff(i + 1, j + 1);
        }
    }
    Ok(p)
}

/// `{rho_S (x) omega_E}` for a fixed environment state.
pub fn product_family(
    states_s: &[CMatrix],
    omega_e: &CMatrix,
    tol: &Tolerances,
) -> Result<StateFamily> {
    if states_s.is_empty() {
        return Err(RdlError::EmptyFamily("no system states given".into()));
    }
    let d_s = states_s[0].nrows();
    let dims = BipartiteDims::new(d_s, omega_e.nrows())?;
    check_density(omega_e, tol).map_err(|e| tag_state_error(e, "environment state"))?;
    let mut members = Vec::with_capacity(states_s.len());
    for (k, rho) in states_s.iter().enumerate() {
        dims.check_system(rho)?;
        check_density(rho, tol).map_err(|e| tag_state_error(e, &format!("system state {k}")))?;
        members.push(tensor(rho, omega_e));
    }
    let omega_json = serde_json::to_string(&JsonMatrix(omega_e.clone()))
        .expect("matrix serialization cannot fail");
    StateFamily::new(
        dims,
        members,
        format!("product; omega_E = {omega_json}"),
        tol,
    )
}

fn tag_state_error(e: RdlError, what: &str) -> RdlError {
    match e {
        RdlError::NotAState {
            min_eigenvalue,
            reason,
        } => RdlError::NotAState {
            min_eigenvalue,
            reason: format!("{what}: {reason}"),
        },
        other => other,
    }
}

/// Why a sample was left out of a constrained family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRejection {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ConstrainedFamily {
    pub family: StateFamily,
    pub accepted: Vec<TwoQubitParams>,
    pub rejected: Vec<SampleRejection>,
}

/// Two-qubit family where `gamma_11` and `gamma_21` are affine functions of
/// the system Bloch vector:
///
/// `gamma_11 = a11 + b11 . alpha`, `gamma_21 = a21 + b21 . alpha`.
///
/// The corresponding entries of each sample are overwritten; samples that
/// then stop being states are reported in `rejected`.
pub fn constrained_two_qubit_family(
    coeffs: &LinearityCoefficients,
    samples: &[TwoQubitParams],
    tol: &Tolerances,
) -> Result<ConstrainedFamily> {
    let mut members = Vec::new();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for (index, sample) in samples.iter().enumerate() {
        let p = coeffs.impose(sample);
        match assemble_two_qubit(&p, tol) {
            Ok(rho) => {
                members.push(rho);
                accepted.push(p);
            }
            Err(e) => rejected.push(SampleRejection {
                index,
                reason: e.to_string(),
            }),
        }
    }
    if members.is_empty() {
        return Err(RdlError::EmptyFamily(format!(
            "all {} samples were rejected",
            samples.len()
        )));
    }
    let family = StateFamily::new(
        BipartiteDims::two_qubit(),
        members,
        format!(
            "two-qubit constrained; a11={} a21={} b11={:?} b21={:?}",
            coeffs.a11, coeffs.a21, coeffs.b11, coeffs.b21
        ),
        tol,
    )?;
    Ok(ConstrainedFamily {
        family,
        accepted,
        rejected,
    })
}

/// Draws Pauli coefficients uniformly from `[-radius, radius]`, redrawing
/// until the assembled matrix is a state.
pub fn sample_two_qubit_params<R: Rng>(rng: &mut R, radius: f64) -> Result<TwoQubitParams> {
    if !(radius > 0.0 && radius <= 1.0) {
        return Err(RdlError::InvalidParameter(format!(
            "sampling radius must lie in (0, 1], got {radius}"
        )));
    }
    let tol = Tolerances::default();
    for _ in 0..10_000 {
        let mut draw = || rng.gen_range(-radius..=radius);
        let mut p = TwoQubitParams::default();
        for i in 0..3 {
            p.alpha[i] = draw();
            p.beta[i] = draw();
            for j in 0..3 {
                p.gamma[i][j] = draw();
            }
        }
        if check_density(&assemble_unchecked(&p), &tol).is_ok() {
            return Ok(p);
        }
    }
    Err(RdlError::SamplingExhausted { trials: 10_000 })
}

/// Random mixed state `G G^dag / Tr(G G^dag)` from a complex Gaussian
/// (Ginibre) matrix.
pub fn random_density<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    let m = &g * g.adjoint();
    let tr = trace(&m);
    m / tr
}

/// Random pure state.
pub fn random_pure<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
    let v: Vec<C64> = (0..n)
        .map(|_| C64::new(gaussian(rng), gaussian(rng)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v: Vec<C64> = v.into_iter().map(|z| z / norm).collect();
    crate::operator::projector(&v)
}

/// Standard normal deviate (Box-Muller).
pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// The six single-qubit Pauli eigenstates `|0>, |1>, |+>, |->, |+i>, |-i>`.
pub fn pauli_eigenstates() -> Vec<CMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = c(0.0, 0.0);
    [
        [c(1.0, 0.0), z],
        [z, c(1.0, 0.0)],
        [c(h, 0.0), c(h, 0.0)],
        [c(h, 0.0), c(-h, 0.0)],
        [c(h, 0.0), c(0.0, h)],
        [c(h, 0.0), c(0.0, -h)],
    ]
    .iter()
    .map(|v| crate::operator::projector(v))
    .collect()
}

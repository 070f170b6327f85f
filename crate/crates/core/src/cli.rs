//! Command-line front end.
//!
//! Machine-readable reports go to stdout (or `--out`), a short human
//! summary goes to stderr. Exit codes: 0 consistent, 3 inconsistent,
//! 1 input error, 2 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::consistency::{
    check_hull_consistency, check_pairwise_consistency, check_subspace_consistency,
    ConsistencyReport,
};
use crate::error::RdlError;
use crate::family::{
    constrained_two_qubit_family, pauli_eigenstates, sample_two_qubit_params, seeded_rng,
    SampleRejection, StateFamily,
};
use crate::json::JsonMatrix;
use crate::maps::{
    build_assignment, build_dynamical_map, decompose_signed_kraus, verdicts, Extension, MapOptions,
    SignedKraus, Superoperator, Verdicts,
};
use crate::operator::{
    c, conjugate, identity, max_abs_diff, partial_trace_env, swap_unitary, CMatrix, Tolerances,
};
use crate::subspace::{build_subspace, SubspaceV};
use crate::two_qubit::{
    bloch_table, linearity_residuals, model_unitary, select_independent_records,
    solve_linearity_coefficients, swap_experiment, BlochRecord, BlochRow, ExperimentReport,
    LinearityCoefficients, ModelParams,
};

pub const SCHEMA: &str = "rdl/1";
pub const TOL_OVERRIDE_ENV: &str = "RDL_TOL_OVERRIDE";

pub const EXIT_CONSISTENT: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_INCONSISTENT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "rdl",
    version,
    about = "Decide linearity of reduced open-system dynamics"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Singular-value threshold for rank and span membership.
    #[arg(long, global = true)]
    pub tol_rank: Option<f64>,
    /// Threshold on the evolved marginal of kernel elements.
    #[arg(long, global = true)]
    pub tol_consistency: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also sample equal-marginal pairs from the convex hull.
    #[arg(long, global = true)]
    pub hull: bool,
    /// Number of hull samples.
    #[arg(long, global = true, default_value_t = 100)]
    pub hull_trials: usize,
    /// Seed for every sampling path.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Extension of the dynamical map outside V_S.
    #[arg(long, global = true, value_enum, default_value_t = ExtensionArg::Zero)]
    pub extension: ExtensionArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExtensionArg {
    Zero,
    None,
}

impl From<ExtensionArg> for Extension {
    fn from(e: ExtensionArg) -> Self {
        match e {
            ExtensionArg::Zero => Extension::Zero,
            ExtensionArg::None => Extension::None,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze a family of initial states under a joint unitary.
    Analyze {
        /// Request file (JSON), or `-` for stdin.
        request: PathBuf,
        /// Include the full subspace (bases and pairs) in the report.
        #[arg(long)]
        dump_subspace: bool,
    },
    /// Two-qubit model with gamma_11, gamma_21 affine in the Bloch vector.
    TwoQubit(TwoQubitArgs),
    /// Product family under the swap unitary.
    SwapDemo {
        /// Environment state (JSON matrix); defaults to I/2.
        #[arg(long)]
        omega_e: Option<PathBuf>,
        /// System states (JSON list of matrices); defaults to the six Pauli eigenstates.
        #[arg(long)]
        states: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct TwoQubitArgs {
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub a11: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub a21: f64,
    /// Comma-separated x,y,z.
    #[arg(long, value_parser = parse_triple, default_value = "0,0,0", allow_hyphen_values = true)]
    pub b11: [f64; 3],
    #[arg(long, value_parser = parse_triple, default_value = "0,0,0", allow_hyphen_values = true)]
    pub b21: [f64; 3],
    #[arg(long, default_value_t = 12)]
    pub samples: usize,
    /// Half-width of the uniform box the free Pauli coefficients are drawn from.
    #[arg(long, default_value_t = 0.2)]
    pub radius: f64,
    /// JSON list of {"alpha", "gamma11", "gamma21"} records to solve for the coefficients.
    #[arg(long)]
    pub members: Option<PathBuf>,
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|e| format!("`{p}`: {e}"))?;
    }
    Ok(out)
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<RdlError> for Failure {
    fn from(e: RdlError) -> Self {
        let code = match e {
            RdlError::Dimension(_)
            | RdlError::Unitarity { .. }
            | RdlError::NotAState { .. }
            | RdlError::NotInVS { .. }
            | RdlError::EmptyFamily(_)
            | RdlError::SingularSystem { .. }
            | RdlError::InvalidParameter(_) => EXIT_INPUT,
            RdlError::Hermiticity { .. }
            | RdlError::SamplingExhausted { .. }
            | RdlError::IncompleteDomain { .. }
            | RdlError::Numerical(_) => EXIT_NUMERICAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Options shared by every pipeline run.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub tol: Tolerances,
    /// `(trials, seed)` when the hull check is requested.
    pub hull: Option<(usize, u64)>,
    pub extension: Extension,
    pub dump_subspace: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            tol: Tolerances::default(),
            hull: None,
            extension: Extension::Zero,
            dump_subspace: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilySummary {
    pub label: String,
    pub d_s: usize,
    pub d_e: usize,
    pub members: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubspaceSummary {
    pub dim_v: usize,
    pub dim_vs: usize,
    pub dim_kernel: usize,
    pub members_sampled: usize,
    /// Verdicts cover the span of the sampled members, not an intended
    /// continuous family.
    pub scope: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub consistent: bool,
    pub family: FamilySummary,
    pub tolerances: Tolerances,
    pub subspace: SubspaceSummary,
    pub consistency: ConsistencyReport,
    pub pairwise: ConsistencyReport,
    pub hull: Option<ConsistencyReport>,
    pub hull_error: Option<String>,
    pub superoperator: Superoperator,
    pub kraus: SignedKraus,
    pub verdicts: Verdicts,
    /// `max ||Phi_S(Tr_E rho) - Tr_E(U rho U^dag)||_max` over the members.
    pub direct_deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subspace_dump: Option<SubspaceV>,
}

/// Subspace, consistency, map, Kraus form and verdicts for one family.
pub fn analyze(
    family: &StateFamily,
    u: &CMatrix,
    opts: &AnalysisOptions,
) -> crate::Result<AnalysisReport> {
    let tol = &opts.tol;
    tol.validate()?;
    let dims = family.dims();
    dims.check_joint(u)?;
    let v = build_subspace(family, tol.rank);
    let consistency = check_subspace_consistency(&v, u, tol)?;
    let pairwise = check_pairwise_consistency(family, u, tol)?;
    let (hull, hull_error) = match opts.hull {
        Some((trials, seed)) => match check_hull_consistency(family, u, tol, trials, seed) {
            Ok(r) => (Some(r), None),
            Err(e @ RdlError::SamplingExhausted { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        },
        None => (None, None),
    };
    let phi = build_dynamical_map(
        &build_assignment(&v),
        u,
        MapOptions {
            extension: opts.extension,
            consistency_certified: consistency.consistent,
        },
        tol,
    )?;
    let kraus = decompose_signed_kraus(&phi, tol.herm)?;
    let verdicts = verdicts(&phi, tol)?;
    let mut direct_deviation: f64 = 0.0;
    for m in family.members() {
        let predicted = phi.apply(&partial_trace_env(m, dims)?)?;
        let direct = partial_trace_env(&conjugate(u, m), dims)?;
        direct_deviation = direct_deviation.max(max_abs_diff(&predicted, &direct));
    }
    Ok(AnalysisReport {
        consistent: consistency.consistent,
        family: FamilySummary {
            label: family.label().to_string(),
            d_s: dims.d_s,
            d_e: dims.d_e,
            members: family.len(),
        },
        tolerances: *tol,
        subspace: SubspaceSummary {
            dim_v: v.dim_v(),
            dim_vs: v.dim_vs(),
            dim_kernel: v.dim_kernel(),
            members_sampled: v.members_sampled(),
            scope: "sampled span",
        },
        consistency,
        pairwise,
        hull,
        hull_error,
        superoperator: phi,
        kraus,
        verdicts,
        direct_deviation,
        subspace_dump: opts.dump_subspace.then_some(v),
    })
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    command: &'a str,
    #[serde(flatten)]
    body: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoQubitSection {
    pub omega: f64,
    pub t: f64,
    pub wt: f64,
    pub coefficients: LinearityCoefficients,
    pub samples_requested: usize,
    pub rejected: Vec<SampleRejection>,
    pub bloch_table: Vec<BlochRow>,
    pub recovered: Option<LinearityCoefficients>,
    /// Indices of the records used for the 4x4 solve.
    pub solve_records: Option<[usize; 4]>,
    /// `(gamma~_11, gamma~_21)` of each supplied record.
    pub record_residuals: Option<Vec<(f64, f64)>>,
    /// `(gamma~_11, gamma~_21)` of each family member under the recovered
    /// (or, without records, the imposed) coefficients.
    pub residuals: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct TwoQubitReport {
    #[serde(flatten)]
    analysis: AnalysisReport,
    two_qubit: TwoQubitSection,
}

/// Tolerances from defaults, the request, flags and the override variable,
/// in increasing precedence.
fn resolve_tolerances(
    base: Tolerances,
    global: &GlobalArgs,
    env_override: Option<&str>,
) -> Result<Tolerances, Failure> {
    let mut tol = base;
    if let Some(r) = global.tol_rank {
        tol.rank = r;
    }
    if let Some(r) = global.tol_consistency {
        tol.consistency = r;
    }
    if let Some(raw) = env_override {
        let v: f64 = raw
            .trim()
            .parse()
            .map_err(|_| Failure::input(format!("{TOL_OVERRIDE_ENV}={raw:?} is not a number")))?;
        tol = Tolerances::uniform(v);
    }
    tol.validate()?;
    Ok(tol)
}

fn read_text(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)
            .map_err(|e| Failure::input(format!("stdin: {e}")))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::input(format!("{origin}: {e}")))
}

fn from_value<T: serde::de::DeserializeOwned>(v: Value, origin: &str) -> Result<T, Failure> {
    serde_json::from_value(v).map_err(|e| Failure::input(format!("{origin}: {e}")))
}

/// Parsed `analyze` request.
pub struct AnalysisRequest {
    pub family: StateFamily,
    pub unitary: CMatrix,
    pub tolerances: Option<Tolerances>,
    pub seed: Option<u64>,
}

/// Reads a request. The family is inline or a path relative to the
/// request file; the unitary is a matrix or a model spec.
pub fn parse_request(
    text: &str,
    origin: &str,
    base_dir: &Path,
) -> Result<AnalysisRequest, Failure> {
    let mut root: serde_json::Map<String, Value> = parse_json(text, origin)?;
    for key in root.keys() {
        if !["family", "unitary", "tolerances", "seed"].contains(&key.as_str()) {
            return Err(Failure::input(format!("{origin}: unknown field `{key}`")));
        }
    }
    let family = match root.remove("family") {
        Some(Value::String(p)) => {
            let path = base_dir.join(&p);
            let text = read_text(&path)?;
            parse_json::<StateFamily>(&text, &path.display().to_string())?
        }
        Some(v) => from_value::<StateFamily>(v, &format!("{origin}: family"))?,
        None => return Err(Failure::input(format!("{origin}: missing field `family`"))),
    };
    let unitary = match root.remove("unitary") {
        Some(Value::Object(obj)) if obj.contains_key("model") => model_from_spec(obj, origin)?,
        Some(v) => from_value::<JsonMatrix>(v, &format!("{origin}: unitary"))?.0,
        None => return Err(Failure::input(format!("{origin}: missing field `unitary`"))),
    };
    let dims = family.dims();
    if unitary.nrows() != dims.joint() || unitary.ncols() != dims.joint() {
        return Err(Failure::input(format!(
            "{origin}: unitary is {}x{} but the family is {}x{}",
            unitary.nrows(),
            unitary.ncols(),
            dims.joint(),
            dims.joint()
        )));
    }
    let tolerances = root
        .remove("tolerances")
        .map(|v| from_value::<Tolerances>(v, &format!("{origin}: tolerances")))
        .transpose()?;
    let seed = root
        .remove("seed")
        .map(|v| from_value::<u64>(v, &format!("{origin}: seed")))
        .transpose()?;
    Ok(AnalysisRequest {
        family,
        unitary,
        tolerances,
        seed,
    })
}

fn model_from_spec(obj: serde_json::Map<String, Value>, origin: &str) -> Result<CMatrix, Failure> {
    let model = obj.get("model").and_then(Value::as_str).unwrap_or_default();
    match model {
        "two-qubit" => {
            let num = |k: &str| {
                obj.get(k).and_then(Value::as_f64).ok_or_else(|| {
                    Failure::input(format!("{origin}: two-qubit model needs numeric `{k}`"))
                })
            };
            let p = ModelParams::new(num("omega")?, num("t")?)?;
            Ok(model_unitary(&p))
        }
        "swap" => {
            let d = obj.get("d").and_then(Value::as_u64).unwrap_or(2) as usize;
            Ok(swap_unitary(d))
        }
        other => Err(Failure::input(format!(
            "{origin}: unknown model `{other}` (expected `two-qubit` or `swap`)"
        ))),
    }
}

fn exit_for(consistent: bool) -> i32 {
    if consistent {
        EXIT_CONSISTENT
    } else {
        EXIT_INCONSISTENT
    }
}

fn emit<T: Serialize>(
    command: &str,
    body: T,
    global: &GlobalArgs,
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    let env = Envelope {
        schema: SCHEMA,
        command,
        body,
    };
    let mut text = serde_json::to_string_pretty(&env).map_err(|e| Failure {
        code: EXIT_NUMERICAL,
        message: format!("report serialization: {e}"),
    })?;
    text.push('\n');
    match &global.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::input(format!("stdout: {e}"))),
    }
}

fn summarize(r: &AnalysisReport, err: &mut dyn Write) {
    let _ = writeln!(
        err,
        "family: {} members, d_S={} d_E={}; dim V={} dim V_S={} kernel={}",
        r.family.members,
        r.family.d_s,
        r.family.d_e,
        r.subspace.dim_v,
        r.subspace.dim_vs,
        r.subspace.dim_kernel
    );
    let _ = writeln!(
        err,
        "subspace consistency: {:?} (max violation {:.3e}, tol {:.1e})",
        r.consistency.status, r.consistency.max_violation, r.consistency.tolerance
    );
    let _ = writeln!(
        err,
        "pairwise: {:?} ({} pairs tested)",
        r.pairwise.status,
        r.pairwise.pairs_tested.unwrap_or(0)
    );
    if let Some(h) = &r.hull {
        let _ = writeln!(
            err,
            "hull: {:?} (max violation {:.3e}, {} pairs)",
            h.status,
            h.max_violation,
            h.pairs_tested.unwrap_or(0)
        );
    }
    if let Some(e) = &r.hull_error {
        let _ = writeln!(err, "hull: {e}");
    }
    let _ = writeln!(
        err,
        "map: hermitian={} trace-preserving={} CP={} (min Choi eigenvalue {:.3e}); {} Kraus terms",
        r.verdicts.hermitian_preserving,
        r.verdicts.trace_preserving,
        r.verdicts.completely_positive,
        r.verdicts.min_choi_eigenvalue,
        r.kraus.terms.len()
    );
    let _ = writeln!(
        err,
        "max deviation from direct evolution on members: {:.3e}",
        r.direct_deviation
    );
    let _ = writeln!(
        err,
        "verdict: reduced dynamics is {}",
        if r.consistent { "linear" } else { "NOT linear" }
    );
}

fn hull_option(global: &GlobalArgs, seed: Option<u64>) -> Result<Option<(usize, u64)>, Failure> {
    if !global.hull {
        return Ok(None);
    }
    let seed = seed.ok_or_else(|| Failure::input("--hull needs a seed (--seed K)"))?;
    Ok(Some((global.hull_trials, seed)))
}

fn cmd_analyze(
    global: &GlobalArgs,
    request: &Path,
    dump_subspace: bool,
    env_override: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let text = read_text(request)?;
    let base = request.parent().unwrap_or_else(|| Path::new("."));
    let req = parse_request(&text, &request.display().to_string(), base)?;
    let tol = resolve_tolerances(req.tolerances.unwrap_or_default(), global, env_override)?;
    let opts = AnalysisOptions {
        tol,
        hull: hull_option(global, global.seed.or(req.seed))?,
        extension: global.extension.into(),
        dump_subspace,
    };
    let report = analyze(&req.family, &req.unitary, &opts)?;
    summarize(&report, stderr);
    let code = exit_for(report.consistent);
    emit("analyze", report, global, stdout)?;
    Ok(code)
}

fn cmd_two_qubit(
    global: &GlobalArgs,
    args: &TwoQubitArgs,
    env_override: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let tol = resolve_tolerances(Tolerances::default(), global, env_override)?;
    let params = ModelParams::new(args.omega, args.t)?;
    if args.samples == 0 {
        return Err(Failure::input("--samples must be at least 1"));
    }
    let seed = global
        .seed
        .ok_or_else(|| Failure::input("two-qubit sampling needs a seed (--seed K)"))?;
    let coeffs = LinearityCoefficients {
        a11: args.a11,
        a21: args.a21,
        b11: args.b11,
        b21: args.b21,
    };
    let mut rng = seeded_rng(seed);
    let samples = (0..args.samples)
        .map(|_| sample_two_qubit_params(&mut rng, args.radius))
        .collect::<crate::Result<Vec<_>>>()?;
    let constrained = constrained_two_qubit_family(&coeffs, &samples, &tol)?;
    let family = &constrained.family;

    let (recovered, solve_records, record_residuals) = match &args.members {
        Some(path) => {
            let text = read_text(path)?;
            let records: Vec<BlochRecord> = parse_json(&text, &path.display().to_string())?;
            let idx = select_independent_records(&records).ok_or_else(|| {
                Failure::from(RdlError::SingularSystem {
                    condition: f64::INFINITY,
                })
            })?;
            let four = idx.map(|k| records[k]);
            let sol = solve_linearity_coefficients(&four)?;
            let res = records
                .iter()
                .map(|r| {
                    (
                        r.gamma11 - sol.gamma11(&r.alpha),
                        r.gamma21 - sol.gamma21(&r.alpha),
                    )
                })
                .collect();
            (Some(sol), Some(idx), Some(res))
        }
        None => (None, None, None),
    };

    let opts = AnalysisOptions {
        tol,
        hull: hull_option(global, Some(seed))?,
        extension: global.extension.into(),
        dump_subspace: false,
    };
    let u = model_unitary(&params);
    let analysis = analyze(family, &u, &opts)?;
    let table = bloch_table(family, params.wt(), Some(&analysis.superoperator))?;
    let residuals = linearity_residuals(family, recovered.as_ref().unwrap_or(&coeffs))?;
    summarize(&analysis, stderr);
    let _ = writeln!(
        stderr,
        "two-qubit: wt={:.6}, {} of {} samples accepted",
        params.wt(),
        family.len(),
        args.samples
    );
    if let Some(sol) = &recovered {
        let _ = writeln!(
            stderr,
            "recovered: a11={:.12} a21={:.12} b11={:?} b21={:?}",
            sol.a11, sol.a21, sol.b11, sol.b21
        );
    }
    let code = exit_for(analysis.consistent);
    let report = TwoQubitReport {
        analysis,
        two_qubit: TwoQubitSection {
            omega: params.omega,
            t: params.t,
            wt: params.wt(),
            coefficients: coeffs,
            samples_requested: args.samples,
            rejected: constrained.rejected,
            bloch_table: table,
            recovered,
            solve_records,
            record_residuals,
            residuals,
        },
    };
    emit("two-qubit", report, global, stdout)?;
    Ok(code)
}

fn cmd_swap_demo(
    global: &GlobalArgs,
    omega_e: Option<&Path>,
    states: Option<&Path>,
    env_override: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    let tol = resolve_tolerances(Tolerances::default(), global, env_override)?;
    let omega = match omega_e {
        Some(p) => parse_json::<JsonMatrix>(&read_text(p)?, &p.display().to_string())?.0,
        None => identity(2) * c(0.5, 0.0),
    };
    let states: Vec<CMatrix> = match states {
        Some(p) => parse_json::<Vec<JsonMatrix>>(&read_text(p)?, &p.display().to_string())?
            .into_iter()
            .map(|m| m.0)
            .collect(),
        None => pauli_eigenstates(),
    };
    let report: ExperimentReport = swap_experiment(&states, &omega, &tol)?;
    let _ = writeln!(stderr, "  i  j     before      after");
    for p in &report.pairs {
        let _ = writeln!(
            stderr,
            "{:>3}{:>3} {:>10.6} {:>10.6}",
            p.i, p.j, p.before, p.after
        );
    }
    let _ = writeln!(
        stderr,
        "consistent={} CP={} (min Choi eigenvalue {:.3e}); max |Phi(rho) - omega_E| = {:.3e}",
        report.consistent,
        report.verdicts.completely_positive,
        report.verdicts.min_choi_eigenvalue,
        report.constant_map_deviation.unwrap_or(f64::NAN)
    );
    let code = exit_for(report.consistent);
    emit("swap-demo", report, global, stdout)?;
    Ok(code)
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_override = std::env::var(TOL_OVERRIDE_ENV).ok();
    run_with_env(args, env_override.as_deref(), stdout, stderr)
}

/// [`run`] with the tolerance override passed explicitly.
pub fn run_with_env<I, T>(
    args: I,
    env_override: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                EXIT_INPUT
            } else {
                let _ = write!(stdout, "{e}");
                EXIT_CONSISTENT
            };
        }
    };
    let result = match &cli.command {
        Command::Analyze {
            request,
            dump_subspace,
        } => cmd_analyze(
            &cli.global,
            request,
            *dump_subspace,
            env_override,
            stdout,
            stderr,
        ),
        Command::TwoQubit(args) => cmd_two_qubit(&cli.global, args, env_override, stdout, stderr),
        Command::SwapDemo { omega_e, states } => cmd_swap_demo(
            &cli.global,
            omega_e.as_deref(),
            states.as_deref(),
            env_override,
            stdout,
            stderr,
        ),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_parsing() {
        assert_eq!(parse_triple("1, -2.5,0").unwrap(), [1.0, -2.5, 0.0]);
        assert!(parse_triple("1,2").is_err());
        assert!(parse_triple("a,b,c").is_err());
    }

    #[test]
    fn override_beats_flags() {
        let cli = Cli::try_parse_from(["rdl", "--tol-rank", "1e-6", "swap-demo"]).unwrap();
        let t = resolve_tolerances(Tolerances::default(), &cli.global, None).unwrap();
        assert_eq!(t.rank, 1e-6);
        assert_eq!(t.consistency, 1e-8);
        let t = resolve_tolerances(Tolerances::default(), &cli.global, Some("1e-5")).unwrap();
        assert_eq!(t, Tolerances::uniform(1e-5));
        assert!(resolve_tolerances(Tolerances::default(), &cli.global, Some("x")).is_err());
    }

    #[test]
    fn unknown_model_rejected() {
        let req = r#"{"family": {"d_s":2,"d_e":1,"members":[{"rows":2,"cols":2,"data":[[1,0],[0,0],[0,0],[0,0]]}]},
                      "unitary": {"model": "ising"}}"#;
        let err = parse_request(req, "req", Path::new(".")).err().unwrap();
        assert_eq!(err.code, EXIT_INPUT);
        assert!(err.message.contains("unknown model"));
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = parse_request("{\n \"family\": [1,\n", "req.json", Path::new("."))
            .err()
            .unwrap();
        assert_eq!(err.code, EXIT_INPUT);
        assert!(err.message.starts_with("req.json:"));
        assert!(err.message.contains("line"));
    }
}

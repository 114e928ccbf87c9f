//! One function per subcommand. Each returns an [`Outcome`] holding the exit
//! status and every rendering of its report; `main` picks one to print.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use epi_core::epi::{
    costa_check, gamma_diagnostic, gamma_path, splitting_identity_residual, GammaDiagnostic,
    GAMMA_MAX,
};
use epi_core::matrix::commutator_norm;
use epi_core::mc::{mc_theorem1_check, Conclusion};
use epi_core::search::{run_restart, select_best, Encoding, SearchConfig};
use epi_core::{fixtures, TWO_PI_E};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::files::{load_instance, load_matrix, load_mixture, InstanceFile};
use crate::report::{digest, matrix_rows, EpiBody, InstanceBody, Real, ReportFile};
use crate::status::Status;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub human: String,
    pub json: String,
    pub csv: Option<String>,
    pub warnings: Vec<String>,
}

fn finish<T: Serialize>(
    status: Status,
    mut report: ReportFile<T>,
    warnings: Vec<String>,
    human: String,
    csv: Option<String>,
) -> Result<Outcome, CliError> {
    report.warnings = warnings.clone();
    Ok(Outcome {
        status,
        human,
        json: report.to_json()?,
        csv,
        warnings,
    })
}

const COMMUTING_NOTE: &str = "A commutes with Sigma_Z: the inequality is a theorem in this case, \
                              so a violation would indicate a numerical problem";

/// Published values for the built-in instance.
pub const PUBLISHED_LHS: (f64, f64) = (19.52, 19.54);
pub const PUBLISHED_RHS: (f64, f64) = (40.27, 40.29);
pub const PUBLISHED_EIGENVALUES: [f64; 2] = [-0.7273, -0.0053];
pub const EIGENVALUE_TOL: f64 = 5e-4;
pub const REPRODUCE_GAMMA: f64 = 0.5;

#[derive(Debug, Serialize)]
struct ReproduceCheck {
    quantity: &'static str,
    computed: Real,
    expected: String,
    ok: bool,
}

#[derive(Debug, Serialize)]
struct ReproduceBody {
    instance: InstanceBody,
    report: EpiBody,
    commutes: bool,
    commutator_norm: Real,
    splitting_residual: Real,
    gamma: Real,
    gamma_eigenvalues: Vec<EigenvalueBody>,
    amgm_holds: bool,
    checks: Vec<ReproduceCheck>,
    all_match: bool,
}

pub fn reproduce(tol: f64) -> Result<Outcome, CliError> {
    let inst = fixtures::counterexample();
    let r = costa_check(&inst, tol).map_err(CliError::core("built-in instance"))?;
    let comm = commutator_norm(inst.a(), inst.sigma_z()).map_err(CliError::core("commutator"))?;
    let commutes = inst.commutes(tol);
    let split = splitting_identity_residual(inst.a(), inst.sigma_z())
        .map_err(CliError::core("splitting identity"))?;
    let g = gamma_diagnostic(&inst, REPRODUCE_GAMMA, tol).map_err(CliError::core("gamma path"))?;

    let lhs = r.lhs / TWO_PI_E;
    let rhs = r.rhs / TWO_PI_E;
    let within = |x: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&x);
    let mut checks = vec![
        ReproduceCheck {
            quantity: "lhs / (2 pi e)",
            computed: Real(lhs),
            expected: format!("[{}, {}]", PUBLISHED_LHS.0, PUBLISHED_LHS.1),
            ok: within(lhs, PUBLISHED_LHS),
        },
        ReproduceCheck {
            quantity: "rhs / (2 pi e)",
            computed: Real(rhs),
            expected: format!("[{}, {}]", PUBLISHED_RHS.0, PUBLISHED_RHS.1),
            ok: within(rhs, PUBLISHED_RHS),
        },
        ReproduceCheck {
            quantity: "gap",
            computed: Real(r.gap),
            expected: "< 0 (violated)".to_string(),
            ok: r.violated,
        },
        ReproduceCheck {
            quantity: "commutator norm",
            computed: Real(comm),
            expected: "> 0 (A and Sigma_Z do not commute)".to_string(),
            ok: !commutes,
        },
        ReproduceCheck {
            quantity: "splitting residual",
            computed: Real(split.norm),
            expected: "> 0.1".to_string(),
            ok: split.norm > 0.1,
        },
    ];
    for (i, want) in PUBLISHED_EIGENVALUES.iter().enumerate() {
        let got = g.eigenvalues.get(i).copied();
        checks.push(ReproduceCheck {
            quantity: if i == 0 {
                "eigenvalue 1 at gamma 0.5"
            } else {
                "eigenvalue 2 at gamma 0.5"
            },
            computed: Real(got.map_or(f64::NAN, |e| e.re)),
            expected: format!("{want} +/- {EIGENVALUE_TOL}"),
            ok: !g.has_complex && got.is_some_and(|e| (e.re - want).abs() <= EIGENVALUE_TOL),
        });
    }
    checks.push(ReproduceCheck {
        quantity: "AM-GM at gamma 0.5",
        computed: Real(if g.amgm_holds { 1.0 } else { 0.0 }),
        expected: "fails".to_string(),
        ok: !g.amgm_holds,
    });
    let all_match = checks.iter().all(|c| c.ok);

    let mut human = String::new();
    let _ = writeln!(
        human,
        "{:<28} {:>16}  {:<36} ok",
        "quantity", "computed", "expected"
    );
    for c in &checks {
        let value = if c.quantity.starts_with("AM-GM") {
            (if g.amgm_holds { "holds" } else { "fails" }).to_string()
        } else {
            format!("{:.6}", c.computed.0)
        };
        let _ = writeln!(
            human,
            "{:<28} {:>16}  {:<36} {}",
            c.quantity,
            value,
            c.expected,
            if c.ok { "yes" } else { "NO" }
        );
    }
    let _ = writeln!(
        human,
        "{}",
        if all_match {
            "all values match"
        } else {
            "MISMATCH"
        }
    );

    let file = InstanceFile::from_instance(&inst, Some("built-in".to_string()));
    let input = serde_json::to_vec(&file)?;
    let body = ReproduceBody {
        instance: InstanceBody::from(&inst),
        report: EpiBody::from(&r),
        commutes,
        commutator_norm: Real(comm),
        splitting_residual: Real(split.norm),
        gamma: Real(REPRODUCE_GAMMA),
        gamma_eigenvalues: g
            .eigenvalues
            .iter()
            .map(|e| EigenvalueBody {
                re: Real(e.re),
                im: Real(e.im),
            })
            .collect(),
        amgm_holds: g.amgm_holds,
        checks,
        all_match,
    };
    let status = if all_match {
        Status::Ok
    } else {
        Status::Mismatch
    };
    let report = ReportFile::new("reproduce", digest(&[&input]), None, tol, body);
    finish(status, report, Vec::new(), human, None)
}

#[derive(Debug, Serialize)]
struct CheckBody {
    label: Option<String>,
    instance: InstanceBody,
    report: EpiBody,
    commutes: bool,
    commutator_norm: Real,
    splitting_residual: Real,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'static str>,
}

pub const CSV_HEADER: [&str; 10] = [
    "label",
    "n",
    "lhs",
    "rhs",
    "gap",
    "relative_gap",
    "violated",
    "commutes",
    "commutator_norm",
    "splitting_residual",
];

pub fn check(path: &Path, tol: f64) -> Result<Outcome, CliError> {
    let loaded = load_instance(path, tol)?;
    let inst = &loaded.value.instance;
    let r = costa_check(inst, tol).map_err(CliError::core(path.display().to_string()))?;
    let comm = commutator_norm(inst.a(), inst.sigma_z()).map_err(CliError::core("commutator"))?;
    let commutes = inst.commutes(tol);
    let split = splitting_identity_residual(inst.a(), inst.sigma_z())
        .map_err(CliError::core("splitting identity"))?;
    let label = loaded.value.label.clone();

    let mut human = String::new();
    if let Some(l) = &label {
        let _ = writeln!(human, "instance      {l}");
    }
    let _ = writeln!(human, "n             {}", inst.n());
    let _ = writeln!(
        human,
        "lhs           {:.10e}  ({:.6} x 2 pi e)",
        r.lhs,
        r.lhs / TWO_PI_E
    );
    let _ = writeln!(
        human,
        "rhs           {:.10e}  ({:.6} x 2 pi e)",
        r.rhs,
        r.rhs / TWO_PI_E
    );
    let _ = writeln!(
        human,
        "gap           {:.10e}  (relative {:.3e})",
        r.gap,
        r.relative_gap()
    );
    let _ = writeln!(
        human,
        "commutes      {commutes}  (commutator norm {comm:.3e})"
    );
    let _ = writeln!(human, "splitting     residual {:.3e}", split.norm);
    let _ = writeln!(
        human,
        "verdict       {}",
        if r.violated { "VIOLATED" } else { "holds" }
    );
    if commutes {
        let _ = writeln!(human, "note          {COMMUTING_NOTE}");
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    let row = [
        label.clone().unwrap_or_default(),
        inst.n().to_string(),
        format!("{:.16e}", r.lhs),
        format!("{:.16e}", r.rhs),
        format!("{:.16e}", r.gap),
        format!("{:.16e}", r.relative_gap()),
        r.violated.to_string(),
        commutes.to_string(),
        format!("{comm:.16e}"),
        format!("{:.16e}", split.norm),
    ];
    let csv_err = |e: csv::Error| CliError::Usage(format!("writing csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    w.write_record(&row).map_err(csv_err)?;
    let csv = String::from_utf8(w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?)
        .expect("csv output is utf-8");

    let body = CheckBody {
        label,
        instance: InstanceBody::from(inst),
        report: EpiBody::from(&r),
        commutes,
        commutator_norm: Real(comm),
        splitting_residual: Real(split.norm),
        note: commutes.then_some(COMMUTING_NOTE),
    };
    let status = if r.violated {
        Status::Violated
    } else {
        Status::Ok
    };
    let report = ReportFile::new("check", digest(&[&loaded.bytes]), None, tol, body);
    finish(status, report, loaded.warnings, human, Some(csv))
}

/// Parses `start:stop:step` (inclusive of `stop` when it lies on the grid)
/// or a comma-separated list.
pub fn parse_gammas(spec: &str) -> Result<Vec<f64>, CliError> {
    let num = |s: &str| -> Result<f64, CliError> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("gammas: `{}` is not a number", s.trim())))
    };
    let values = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(
                "gammas: expected start:stop:step".to_string(),
            ));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0 && step.is_finite() && start.is_finite() && stop.is_finite()) {
            return Err(CliError::Usage(
                "gammas: step must be positive and bounds finite".to_string(),
            ));
        }
        if stop < start {
            return Err(CliError::Usage("gammas: stop is below start".to_string()));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(CliError::Usage("gammas: empty list".to_string()));
    }
    if let Some(g) = values.iter().find(|g| !(0.0..GAMMA_MAX).contains(*g)) {
        return Err(CliError::Usage(format!(
            "gamma = {g} is outside [0, 1): at gamma = 1 the perturbation D_gamma = A^(1/2) may be \
             singular, leaving D_gamma^(-2) undefined"
        )));
    }
    Ok(values)
}

#[derive(Debug, Serialize)]
struct EigenvalueBody {
    re: Real,
    im: Real,
}

#[derive(Debug, Serialize)]
struct GammaRow {
    gamma: Real,
    eigenvalues: Vec<EigenvalueBody>,
    has_complex: bool,
    det_k: Real,
    /// `null` when `det(K) < 0` with even `n`.
    det_side: Option<Real>,
    trace_side: Real,
    amgm_holds: bool,
    k_psd: bool,
    symmetrized_trace_side: Real,
    trace_identity_residual: Real,
    k_matrix: Vec<Vec<Real>>,
}

impl From<&GammaDiagnostic> for GammaRow {
    fn from(d: &GammaDiagnostic) -> Self {
        Self {
            gamma: Real(d.gamma),
            eigenvalues: d
                .eigenvalues
                .iter()
                .map(|e| EigenvalueBody {
                    re: Real(e.re),
                    im: Real(e.im),
                })
                .collect(),
            has_complex: d.has_complex,
            det_k: Real(d.det_k),
            det_side: d.det_side.map(Real),
            trace_side: Real(d.trace_side),
            amgm_holds: d.amgm_holds,
            k_psd: d.k_psd,
            symmetrized_trace_side: Real(d.symmetrized_trace_side),
            trace_identity_residual: Real(d.trace_identity_residual),
            k_matrix: matrix_rows(&d.k_matrix),
        }
    }
}

#[derive(Debug, Serialize)]
struct GammaBody {
    label: Option<String>,
    commutes: bool,
    rows: Vec<GammaRow>,
}

pub fn gamma(path: &Path, gammas: &str, tol: f64) -> Result<Outcome, CliError> {
    let values = parse_gammas(gammas)?;
    let loaded = load_instance(path, tol)?;
    let inst = &loaded.value.instance;
    let rows = gamma_path(inst, &values, tol).map_err(CliError::core("gamma path"))?;

    let mut human = String::new();
    let _ = writeln!(
        human,
        "{:>6}  {:<40} {:>12} {:>12}  {:<6} k psd",
        "gamma", "eigenvalues", "det side", "trace side", "am-gm"
    );
    for d in &rows {
        let eigs: Vec<String> = d
            .eigenvalues
            .iter()
            .map(|e| {
                if e.im == 0.0 {
                    format!("{:.4}", e.re)
                } else {
                    format!("{:.4}{:+.4}i", e.re, e.im)
                }
            })
            .collect();
        let det = d
            .det_side
            .map_or("undefined".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(
            human,
            "{:>6.3}  {:<40} {:>12} {:>12.6}  {:<6} {}",
            d.gamma,
            eigs.join(", "),
            det,
            d.trace_side,
            if d.amgm_holds { "holds" } else { "FAILS" },
            d.k_psd
        );
    }

    let body = GammaBody {
        label: loaded.value.label.clone(),
        commutes: inst.commutes(tol),
        rows: rows.iter().map(GammaRow::from).collect(),
    };
    let report = ReportFile::new(
        "gamma-path",
        digest(&[&loaded.bytes, gammas.as_bytes()]),
        None,
        tol,
        body,
    );
    finish(Status::Ok, report, loaded.warnings, human, None)
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub config: SearchConfig,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Serialize)]
struct ConfigBody {
    n: usize,
    restarts: usize,
    iterations: usize,
    seed: u64,
    step_scale: Real,
    eig_range: [Real; 2],
    objective_tol: Real,
    encoding: &'static str,
}

impl From<&SearchConfig> for ConfigBody {
    fn from(c: &SearchConfig) -> Self {
        Self {
            n: c.n,
            restarts: c.restarts,
            iterations: c.iterations,
            seed: c.seed,
            step_scale: Real(c.step_scale),
            eig_range: [Real(c.eig_range.0), Real(c.eig_range.1)],
            objective_tol: Real(c.objective_tol),
            encoding: match c.encoding {
                Encoding::General => "general",
                Encoding::Commuting => "commuting",
            },
        }
    }
}

#[derive(Debug, Serialize)]
struct RestartBody {
    index: usize,
    best_objective: Real,
    evaluations: usize,
    iterations: usize,
    improvements: usize,
}

#[derive(Debug, Serialize)]
struct SearchBody {
    config: ConfigBody,
    found: bool,
    best_gap: Real,
    best_restart: usize,
    total_evaluations: usize,
    best_instance: InstanceBody,
    best_report: EpiBody,
    #[serde(skip_serializing_if = "Option::is_none")]
    written_to: Option<String>,
    restarts: Vec<RestartBody>,
}

pub fn search(opts: &SearchOptions, tol: f64) -> Result<Outcome, CliError> {
    let cfg = &opts.config;
    cfg.validate().map_err(CliError::core("search"))?;
    let run = || {
        (0..cfg.restarts)
            .into_par_iter()
            .map(|i| run_restart(cfg, i))
            .collect::<Result<Vec<_>, _>>()
    };
    let outcomes = match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()?
            .install(run),
        None => run(),
    }
    .map_err(CliError::core("search"))?;
    let trace = select_best(cfg, outcomes).map_err(CliError::core("search"))?;

    let mut written_to = None;
    if trace.found {
        if let Some(out) = &opts.out {
            let label = format!(
                "search n={} seed={} restart={}",
                cfg.n, cfg.seed, trace.best_restart
            );
            let file = InstanceFile::from_instance(&trace.best_instance, Some(label));
            let text = serde_json::to_string_pretty(&file)?;
            fs::write(out, text + "\n").map_err(|source| CliError::Io {
                path: out.clone(),
                source,
            })?;
            written_to = Some(out.display().to_string());
        }
    }

    let r = &trace.best_report;
    let mut human = String::new();
    let _ = writeln!(
        human,
        "n = {}, {} restarts x {} iterations, seed {}, {} encoding",
        cfg.n,
        cfg.restarts,
        cfg.iterations,
        cfg.seed,
        ConfigBody::from(cfg).encoding
    );
    let _ = writeln!(human, "evaluations   {}", trace.total_evaluations);
    let _ = writeln!(human, "best restart  {}", trace.best_restart);
    let _ = writeln!(
        human,
        "best gap      {:.10e}  (relative {:.6})",
        r.gap,
        r.relative_gap()
    );
    let _ = writeln!(
        human,
        "result        {}",
        if trace.found {
            "violation found"
        } else {
            "not found"
        }
    );
    if let Some(p) = &written_to {
        let _ = writeln!(human, "written to    {p}");
    }

    let body = SearchBody {
        config: ConfigBody::from(cfg),
        found: trace.found,
        best_gap: Real(trace.best_gap),
        best_restart: trace.best_restart,
        total_evaluations: trace.total_evaluations,
        best_instance: InstanceBody::from(&trace.best_instance),
        best_report: EpiBody::from(r),
        written_to,
        restarts: trace
            .restarts
            .iter()
            .map(|o| RestartBody {
                index: o.index,
                best_objective: Real(o.best_objective),
                evaluations: o.evaluations,
                iterations: o.iterations,
                improvements: o.history.len().saturating_sub(1),
            })
            .collect(),
    };
    let config_text = format!("{:?}", cfg);
    let status = if trace.found {
        Status::Ok
    } else {
        Status::NotFound
    };
    let report = ReportFile::new(
        "search",
        digest(&[config_text.as_bytes()]),
        Some(cfg.seed),
        tol,
        body,
    );
    finish(status, report, Vec::new(), human, None)
}

#[derive(Debug, Clone)]
pub struct McOptions {
    pub mixture: PathBuf,
    pub sigma_z: PathBuf,
    pub a: PathBuf,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct EntropyBody {
    nats: Real,
    standard_error: Real,
}

impl From<&epi_core::mc::EntropyEstimate> for EntropyBody {
    fn from(e: &epi_core::mc::EntropyEstimate) -> Self {
        Self {
            nats: Real(e.nats),
            standard_error: Real(e.standard_error),
        }
    }
}

#[derive(Debug, Serialize)]
struct McBody {
    n: usize,
    samples: usize,
    k: usize,
    lhs_estimate: Real,
    lhs_se: Real,
    rhs_estimate: Real,
    rhs_se: Real,
    h_x: EntropyBody,
    h_x_weighted_noise: EntropyBody,
    h_x_noise: EntropyBody,
    conclusion: &'static str,
    note: &'static str,
}

const SUSPICIOUS_NOTE: &str = "the commuting case is a theorem, so a suspicious verdict points at \
                               estimator bias to investigate, not at a counterexample";

pub fn mc(opts: &McOptions, tol: f64) -> Result<Outcome, CliError> {
    let mixture = load_mixture(&opts.mixture)?;
    let sigma_z = load_matrix(&opts.sigma_z)?;
    let a = load_matrix(&opts.a)?;
    let n = mixture.value.n();
    for (what, m) in [("sigma-z", &sigma_z.value), ("a", &a.value)] {
        if m.n() != n {
            return Err(CliError::Usage(format!(
                "--{what} is {}x{}, but the mixture has dimension {n}",
                m.n(),
                m.n()
            )));
        }
    }
    let r = mc_theorem1_check(
        &mixture.value,
        &sigma_z.value,
        &a.value,
        opts.m,
        opts.k,
        opts.seed,
        tol,
    )
    .map_err(|e| match e {
        epi_core::Error::NotCommuting {
            commutator,
            threshold,
        } => CliError::Usage(format!(
            "A and Sigma_Z do not commute (commutator {commutator:e} > {threshold:e}); \
                 use `epicheck check` for general instances"
        )),
        other => CliError::Core {
            context: "mc".to_string(),
            source: other,
        },
    })?;
    let conclusion = match r.conclusion {
        Conclusion::Consistent => "consistent",
        Conclusion::Inconclusive => "inconclusive",
        Conclusion::Suspicious => "suspicious",
    };

    let mut human = String::new();
    let _ = writeln!(
        human,
        "n = {n}, m = {}, k = {}, seed {}",
        r.samples, r.k, r.seed
    );
    let _ = writeln!(
        human,
        "lhs           {:.6e} +/- {:.2e}",
        r.lhs_estimate, r.lhs_se
    );
    let _ = writeln!(
        human,
        "rhs           {:.6e} +/- {:.2e}",
        r.rhs_estimate, r.rhs_se
    );
    let _ = writeln!(human, "conclusion    {conclusion}");
    if r.conclusion == Conclusion::Suspicious {
        let _ = writeln!(human, "note          {SUSPICIOUS_NOTE}");
    }

    let body = McBody {
        n,
        samples: r.samples,
        k: r.k,
        lhs_estimate: Real(r.lhs_estimate),
        lhs_se: Real(r.lhs_se),
        rhs_estimate: Real(r.rhs_estimate),
        rhs_se: Real(r.rhs_se),
        h_x: EntropyBody::from(&r.h_x),
        h_x_weighted_noise: EntropyBody::from(&r.h_x_weighted_noise),
        h_x_noise: EntropyBody::from(&r.h_x_noise),
        conclusion,
        note: SUSPICIOUS_NOTE,
    };
    let mut warnings = mixture.warnings;
    warnings.extend(sigma_z.warnings);
    warnings.extend(a.warnings);
    let params = format!("m={} k={}", opts.m, opts.k);
    let input = digest(&[&mixture.bytes, &sigma_z.bytes, &a.bytes, params.as_bytes()]);
    let status = if r.conclusion == Conclusion::Suspicious {
        Status::Suspicious
    } else {
        Status::Ok
    };
    let report = ReportFile::new("mc", input, Some(opts.seed), tol, body);
    finish(status, report, warnings, human, None)
}

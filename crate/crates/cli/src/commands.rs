use std::io::Write as _;

use nare_sushi::diagnostics::{delta_central, diagnose as run_diagnose, gap_of, DiagnoseOptions, DiagnosticsReport};
use nare_sushi::nare::classify_mmatrix;
use nare_sushi::problems::{random_mnare, transport_problem, Quadrature, RandomMnareSpec, TransportSpec};
use nare_sushi::sda::{sda_solve_with, SdaTraceRecord};
use nare_sushi::shift::sushi_solve_with;
use nare_sushi::{mm, Error, NareProblem, SdaConfig, Spectrum, SushiOptions, SushiReport};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{
    self, key_values, num, record_csv, sci, CliError, Format, EXIT_NO_CONVERGENCE, EXIT_OK, SCHEMA_VERSION,
};
use crate::{BenchArgs, DiagnoseArgs, Family, GenArgs, GenFormat, ProblemArgs, QuadratureArg, SolveArgs, SolverArgs};

type CliResult<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    Error::InvalidArgument(msg.into()).into()
}

fn load_problem(a: &ProblemArgs) -> CliResult<NareProblem> {
    if let Some(path) = &a.input {
        return NareProblem::load(path).map_err(|e| {
            let mut err = CliError::io(e);
            err.message = format!("cannot load {}: {}", path.display(), err.message);
            err
        });
    }
    let family = a.family.ok_or_else(|| CliError::usage("either --input or --family is required"))?;
    let n = a.n.ok_or_else(|| CliError::usage("--n is required with --family"))?;
    match family {
        Family::Transport => {
            if a.seed.is_some() {
                return Err(CliError::usage("--seed applies to the random family only"));
            }
            let quadrature = match a.quadrature {
                QuadratureArg::Composite4 => Quadrature::Composite4,
                QuadratureArg::GaussLegendre => Quadrature::GaussLegendre,
            };
            let spec = match (a.beta, a.alpha, a.c) {
                (Some(beta), _, _) => TransportSpec { quadrature, ..TransportSpec::beta(n, beta) },
                (None, Some(alpha), Some(c)) => TransportSpec { n, alpha, c, quadrature },
                _ => return Err(CliError::usage("transport needs --beta, or both --alpha and --c")),
            };
            Ok(transport_problem(&spec)?)
        }
        Family::Random => {
            if a.beta.is_some() || a.c.is_some() {
                return Err(CliError::usage("--beta and --c apply to the transport family only"));
            }
            let spec = RandomMnareSpec { n, alpha: a.alpha.unwrap_or(1e-3), seed: a.seed.unwrap_or(1) };
            Ok(random_mnare(&spec)?)
        }
    }
}

fn sda_config(s: &SolverArgs) -> CliResult<SdaConfig> {
    if !(s.tol > 0.0 && s.tol.is_finite()) {
        return Err(invalid(format!("--tol must be positive, got {}", s.tol)));
    }
    if s.max_steps == 0 {
        return Err(invalid("--max-steps must be at least 1"));
    }
    if s.breakdown_threshold.is_nan() || s.breakdown_threshold <= 1.0 {
        return Err(invalid(format!("--breakdown-threshold must exceed 1, got {}", s.breakdown_threshold)));
    }
    if let Some(g) = s.gamma {
        if !(g > 0.0 && g.is_finite()) {
            return Err(invalid(format!("--gamma must be positive, got {g}")));
        }
    }
    Ok(SdaConfig { gamma: s.gamma, tol: s.tol, max_steps: s.max_steps, breakdown_threshold: s.breakdown_threshold })
}

/// Checks that need the problem: the M-matrix test and `γ ≥ γ*`, both
/// skipped by `--force`.
fn check_problem(p: &NareProblem, s: &SolverArgs) -> CliResult<()> {
    if s.force {
        return Ok(());
    }
    let class = classify_mmatrix(&p.build_m())?;
    if !class.is_m_matrix() {
        return Err(Error::NotMNare(format!("s - rho(N) = {:e}", class.spectral_abscissa_evidence)).into());
    }
    if let Some(g) = s.gamma {
        let star = p.gamma_star();
        if g < star * (1.0 - 1e-12) {
            return Err(invalid(format!("--gamma {g} is below the admissible minimum {star}")));
        }
    }
    Ok(())
}

fn check_shift_overrides(p: &NareProblem, k: Option<usize>, s: Option<f64>) -> CliResult<()> {
    if let Some(k) = k {
        let dim = p.m() + p.n();
        if k == 0 || k >= dim {
            return Err(invalid(format!("--k must lie in [1, {}], got {k}", dim - 1)));
        }
    }
    if let Some(s) = s {
        if !(s > -1.0 && s.is_finite()) {
            return Err(invalid(format!("--s must be finite and greater than -1, got {s}")));
        }
    }
    Ok(())
}

fn tracer(enabled: bool) -> impl FnMut(&SdaTraceRecord) {
    move |rec| {
        if enabled {
            if let Ok(line) = serde_json::to_string(rec) {
                eprintln!("{line}");
            }
        }
    }
}

#[derive(Serialize)]
struct ProblemSummary {
    family: Option<String>,
    m: usize,
    n: usize,
    parameters: Option<Value>,
    seed: Option<u64>,
}

fn summary(p: &NareProblem) -> ProblemSummary {
    let meta = p.metadata.as_ref();
    ProblemSummary {
        family: meta.map(|m| m.family.clone()),
        m: p.m(),
        n: p.n(),
        parameters: meta.map(|m| m.parameters.clone()),
        seed: meta.and_then(|m| m.seed),
    }
}

fn emit(s: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(s.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn emit_json<S: Serialize>(v: &S) -> CliResult<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| CliError::io(e.into()))?;
    emit(&(s + "\n"))
}

fn emit_record(format: Format, json: &Value, rows: &[(&str, String)]) -> CliResult<()> {
    match format {
        Format::Json => emit_json(json),
        Format::Csv => emit(&record_csv(rows)),
        Format::Table => emit(&key_values(rows)),
    }
}

pub fn gen(a: &GenArgs) -> CliResult<u8> {
    if a.problem.input.is_some() {
        return Err(CliError::usage("gen needs --family, not --input"));
    }
    let p = load_problem(&a.problem)?;
    match (a.format, &a.output) {
        (GenFormat::Json, None) => emit(&(p.to_json()? + "\n"))?,
        (GenFormat::Json, Some(path)) => std::fs::write(path, p.to_json()? + "\n")?,
        (GenFormat::Mm, Some(dir)) => p.write_mm_bundle(dir).map_err(CliError::io)?,
        (GenFormat::Mm, None) => return Err(CliError::usage("--format mm needs --output DIR")),
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SolveReport {
    schema_version: u32,
    command: &'static str,
    problem: ProblemSummary,
    gamma: f64,
    steps: usize,
    steps_performed: usize,
    residual: f64,
    dual_residual: f64,
    converged: bool,
    residual_history: Vec<f64>,
}

pub fn solve(a: &SolveArgs) -> CliResult<u8> {
    if a.k.is_some() || a.s.is_some() {
        return Err(CliError::usage("--k and --s apply to the sushi command only"));
    }
    let cfg = sda_config(&a.solver)?;
    let p = load_problem(&a.problem)?;
    check_problem(&p, &a.solver)?;
    let out = sda_solve_with(&p, &cfg, None, &mut tracer(a.solver.trace))?;
    if let Some(path) = &a.save_x {
        mm::write_file(path, &out.x).map_err(CliError::io)?;
    }
    let report = SolveReport {
        schema_version: SCHEMA_VERSION,
        command: "solve",
        problem: summary(&p),
        gamma: out.gamma,
        steps: out.steps,
        steps_performed: out.steps_performed,
        residual: out.residual,
        dual_residual: out.dual_residual,
        converged: out.converged,
        residual_history: out.residual_history.clone(),
    };
    let rows = [
        ("m", p.m().to_string()),
        ("n", p.n().to_string()),
        ("gamma", num(out.gamma)),
        ("steps", out.steps.to_string()),
        ("steps_performed", out.steps_performed.to_string()),
        ("residual", num(out.residual)),
        ("dual_residual", num(out.dual_residual)),
        ("converged", out.converged.to_string()),
    ];
    emit_record(a.format, &serde_json::to_value(&report).map_err(|e| CliError::io(e.into()))?, &rows)?;
    Ok(if out.converged { EXIT_OK } else { EXIT_NO_CONVERGENCE })
}

#[derive(Serialize)]
struct SushiOut<'a> {
    schema_version: u32,
    command: &'static str,
    problem: ProblemSummary,
    #[serde(flatten)]
    report: &'a SushiReport,
}

fn sushi_options(solver: &SolverArgs, k: Option<usize>, s: Option<f64>) -> CliResult<SushiOptions> {
    Ok(SushiOptions { k, s, sda: sda_config(solver)?, force: solver.force, ..SushiOptions::default() })
}

pub fn sushi(a: &SolveArgs) -> CliResult<u8> {
    let opts = sushi_options(&a.solver, a.k, a.s)?;
    let p = load_problem(&a.problem)?;
    check_problem(&p, &a.solver)?;
    check_shift_overrides(&p, a.k, a.s)?;
    let res = sushi_solve_with(&p, &opts, &mut tracer(a.solver.trace))?;
    if let Some(path) = &a.save_x {
        mm::write_file(path, &res.solution.x).map_err(CliError::io)?;
    }
    let r = &res.report;
    let out = SushiOut { schema_version: SCHEMA_VERSION, command: "sushi", problem: summary(&p), report: r };
    let eigs: Vec<String> = r.central_eigs.iter().map(|z| format!("{}{:+}i", num(z[0]), num(z[1]))).collect();
    let mut rows = vec![
        ("m", p.m().to_string()),
        ("n", p.n().to_string()),
        ("k", r.k.to_string()),
        ("k_max_reached", r.k_max_reached.to_string()),
        ("s", num(r.s)),
        ("s_clamped", r.s_clamped.to_string()),
        ("inv_iter_steps", r.inv_iter_steps.to_string()),
        ("inv_iter_steps_left", r.inv_iter_steps_left.to_string()),
        ("rate_estimate_t", num(r.rate_estimate_t)),
        ("cond_uv", num(r.cond_uv)),
        ("gamma", num(r.gamma)),
        ("sda_steps", r.sda_steps.to_string()),
        ("residual", num(r.residual)),
        ("shifted_residual", num(r.shifted_residual)),
        ("converged", r.converged.to_string()),
    ];
    if a.format == Format::Table {
        rows.insert(4, ("central_eigs", eigs.join(" ")));
        rows.push(("total_ms", format!("{:.1}", r.timings.total_ms)));
    }
    emit_record(a.format, &serde_json::to_value(&out).map_err(|e| CliError::io(e.into()))?, &rows)?;
    Ok(if r.converged { EXIT_OK } else { EXIT_NO_CONVERGENCE })
}

#[derive(Serialize)]
struct DiagnoseOut<'a> {
    schema_version: u32,
    command: &'static str,
    problem: ProblemSummary,
    #[serde(flatten)]
    report: &'a DiagnosticsReport,
}

pub fn diagnose(a: &DiagnoseArgs) -> CliResult<u8> {
    let sda = sda_config(&a.solver)?;
    let p = load_problem(&a.problem)?;
    check_problem(&p, &a.solver)?;
    check_shift_overrides(&p, Some(a.k), None)?;
    let r = run_diagnose(&p, &DiagnoseOptions { k: a.k, sda, ..DiagnoseOptions::default() })?;
    match a.format {
        Format::Json => {
            emit_json(&DiagnoseOut { schema_version: SCHEMA_VERSION, command: "diagnose", problem: summary(&p), report: &r })?
        }
        Format::Table => emit(&r.to_table())?,
        Format::Csv => {
            let opt = |v: Option<f64>| v.map_or_else(String::new, num);
            emit(&record_csv(&[
                ("m", r.m.to_string()),
                ("n", r.n.to_string()),
                ("gamma", num(r.gamma)),
                ("lambda_n", num(r.lambda_n)),
                ("lambda_n1", num(r.lambda_n1)),
                ("gap", num(r.gap)),
                ("cayley_gap", num(r.cayley_gap)),
                ("sep_f_w", opt(r.sep_f_w)),
                ("relsep_w", opt(r.relsep_w)),
                ("relsep_central", opt(r.relsep_central)),
                ("delta", num(r.delta_central)),
                ("cond_uv", opt(r.cond_uv)),
            ]))?
        }
    }
    Ok(EXIT_OK)
}

/// One bench value, or the error code that prevented computing it.
#[derive(Debug, Clone)]
enum Cell {
    Int(usize),
    Float(f64),
    Failed(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => num(*x),
            Cell::Failed(code) => format!("error:{code}"),
        }
    }

    fn table(&self) -> String {
        match self {
            Cell::Float(x) => sci(*x),
            other => other.csv(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Float(x) if x.is_finite() => json!(x),
            Cell::Float(x) => json!(x.to_string()),
            Cell::Failed(code) => json!({ "error": code }),
        }
    }
}

const BENCH_HEADER: [&str; 11] =
    ["n", "param", "seed", "gap", "delta", "sda_its", "sda_res", "sushi_its", "orth_its", "sushi_res", "sushi_shifted_res"];

#[derive(Debug, Clone, Copy)]
struct BenchCell {
    n: usize,
    param: f64,
    seed: Option<u64>,
}

fn bench_cell(family: Family, c: BenchCell, solver: &SolverArgs, opts: &SushiOptions) -> Vec<Cell> {
    let fail = |e: &Error| Cell::Failed(e.code().to_string());
    let mut row = vec![Cell::Int(c.n), Cell::Float(c.param), c.seed.map_or(Cell::Failed("none".into()), |s| Cell::Int(s as usize))];
    let problem = match family {
        Family::Transport => transport_problem(&TransportSpec::beta(c.n, c.param)),
        Family::Random => random_mnare(&RandomMnareSpec { n: c.n, alpha: c.param, seed: c.seed.unwrap_or(1) }),
    };
    let p = match problem.and_then(|p| {
        if !solver.force && !classify_mmatrix(&p.build_m())?.is_m_matrix() {
            return Err(Error::NotMNare("bench cell".into()));
        }
        Ok(p)
    }) {
        Ok(p) => p,
        Err(e) => {
            row.extend(std::iter::repeat_n(fail(&e), BENCH_HEADER.len() - 3));
            return row;
        }
    };
    let h = p.build_h();
    row.push(gap_of(&h).map_or_else(|e| fail(&e), Cell::Float));
    let delta = h.split_spectrum().and_then(|split| {
        delta_central(h.matrix(), &Spectrum { values: split.boundary.to_vec() })
    });
    row.push(delta.map_or_else(|e| fail(&e), Cell::Float));
    match sda_solve_with(&p, &opts.sda, None, &mut |_| {}) {
        Ok(out) if out.converged => row.extend([Cell::Int(out.steps), Cell::Float(out.residual)]),
        Ok(out) => row.extend([Cell::Failed("no_convergence".into()), Cell::Float(out.residual)]),
        Err(e) => row.extend([fail(&e), fail(&e)]),
    }
    match sushi_solve_with(&p, opts, &mut |_| {}) {
        Ok(res) => {
            let r = res.report;
            let its = if r.converged { Cell::Int(r.sda_steps) } else { Cell::Failed("no_convergence".into()) };
            row.extend([its, Cell::Int(r.inv_iter_steps), Cell::Float(r.residual), Cell::Float(r.shifted_residual)]);
        }
        Err(e) => row.extend(std::iter::repeat_n(fail(&e), 4)),
    }
    row
}

pub fn bench(a: &BenchArgs) -> CliResult<u8> {
    if a.solver.trace {
        return Err(CliError::usage("--trace is not supported by bench"));
    }
    if a.n.contains(&0) {
        return Err(invalid("--n values must be positive"));
    }
    if let Some(k) = a.k {
        let min_dim = 2 * a.n.iter().copied().min().unwrap_or(1);
        if k == 0 || k >= min_dim {
            return Err(invalid(format!("--k must lie in [1, {}], got {k}", min_dim - 1)));
        }
    }
    if let Some(s) = a.s {
        if !(s > -1.0 && s.is_finite()) {
            return Err(invalid(format!("--s must be finite and greater than -1, got {s}")));
        }
    }
    let opts = sushi_options(&a.solver, a.k, a.s)?;
    let (name, params) = match a.family {
        Family::Transport => ("beta", &a.beta),
        Family::Random => ("alpha", &a.alpha),
    };
    let mut grid = Vec::new();
    for &n in &a.n {
        for &param in params {
            match a.family {
                Family::Transport => grid.push(BenchCell { n, param, seed: None }),
                Family::Random => grid.extend(a.seeds.iter().map(|&s| BenchCell { n, param, seed: Some(s) })),
            }
        }
    }

    let run = || -> Vec<Vec<Cell>> { grid.par_iter().map(|&c| bench_cell(a.family, c, &a.solver, &opts)).collect() };
    let rows = match a.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| invalid(format!("cannot start {t} worker threads: {e}")))?
            .install(run),
        None => run(),
    };

    let mut header = BENCH_HEADER;
    header[1] = name;
    let text = |f: fn(&Cell) -> String| -> Vec<Vec<String>> {
        rows.iter()
            .map(|r| {
                let mut v: Vec<String> = r.iter().map(f).collect();
                if a.family == Family::Transport {
                    v[2] = String::new();
                }
                v
            })
            .collect()
    };
    match a.format {
        Format::Csv => emit(&output::csv(&header, &text(Cell::csv)))?,
        Format::Table => emit(&output::table(&header, &text(Cell::table)))?,
        Format::Json => {
            let items: Vec<Value> = rows
                .iter()
                .map(|r| {
                    let mut obj = serde_json::Map::new();
                    for (key, cell) in header.iter().zip(r) {
                        let v = if *key == "seed" && a.family == Family::Transport { Value::Null } else { cell.json() };
                        obj.insert((*key).to_string(), v);
                    }
                    Value::Object(obj)
                })
                .collect();
            let family = match a.family {
                Family::Transport => "transport",
                Family::Random => "random",
            };
            emit_json(&json!({ "schema_version": SCHEMA_VERSION, "command": "bench", "family": family, "rows": items }))?
        }
    }
    Ok(EXIT_OK)
}

//! `qbell`: exclusion certificates, face sweeps, self-test checks and XOR
//! game verification from the command line.
//!
//! Exit codes: 0 decided / success, 1 usage or I/O error, 2 undecided.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use qbell::bell::{enumerate_local_deterministic, peek_mode, pr_box, BellBox, DEFAULT_DETERMINISTIC_CAP};
use qbell::faces::{face_box, face_dimension, local_membership, sample_face_weights, FaceSpec};
use qbell::scalar::{format_rational, NumMode, Rational, Scalar};
use qbell::sdp::{exclude_by_sdp, solve_elliptope_bias, DEFAULT_MAX_ITER, DEFAULT_TOL};
use qbell::selftest::{selftest_report, PlanarModel};
use qbell::theta::exclude_by_analytic;
use qbell::xor::{build_game, classical_bias, is_diagonal_in_hadamard_basis, verify_block_structure};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

const NUM_MODE_VAR: &str = "QBT_NUM_MODE";

#[derive(Parser)]
#[command(name = "qbell", version, about = "Theta-body exclusion, self-testing and XOR game checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Analytic,
    Sdp,
    Both,
}

impl Method {
    fn as_str(self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::Sdp => "sdp",
            Method::Both => "both",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Try to exclude a box from the quantum set.
    Exclude {
        /// Box JSON file.
        #[arg(long = "box", conflicts_with_all = ["pr", "face"])]
        box_file: Option<PathBuf>,
        /// Use the PR box with K outcomes.
        #[arg(long, conflicts_with = "face")]
        pr: Option<usize>,
        /// Face JSON file (neighbor ids and weights).
        #[arg(long)]
        face: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "analytic")]
        method: Method,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Trace bound of the SDP.
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample boxes on PR faces of a fixed dimension and try to exclude each.
    FacesSweep {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        dim: usize,
        /// Samples per neighbor subset.
        #[arg(long, default_value_t = 10)]
        grid: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "both")]
        method: Method,
        #[arg(long, default_value_t = 0.05)]
        c_min: f64,
        #[arg(long, default_value_t = 0.95)]
        c_max: f64,
        /// Worker threads (default: logical cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Boundary, self-test and isometry checks for a planar two-qubit model.
    Selftest {
        #[arg(long)]
        m: Option<usize>,
        /// Model JSON file {"m", "thetaA", "thetaB"}.
        #[arg(long, conflicts_with = "canonical_chained")]
        model: Option<PathBuf>,
        /// Use the equal-spacing model.
        #[arg(long)]
        canonical_chained: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the XOR game on 2^K inputs and verify its structure.
    Xorgame {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        verify_hadamard: bool,
        #[arg(long)]
        verify_blocks: bool,
        /// Classical and quantum bias.
        #[arg(long)]
        bias: bool,
        /// Also write the game matrix as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

type CliResult<T> = Result<T, String>;

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let code = run(&args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    ExitCode::from(code)
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Usage errors exit 1 so that 2 stays reserved for undecided.
fn run(args: &[OsString], stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return 1;
            }
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
    };
    let started = Instant::now();
    let outcome = match cli.command {
        Command::Exclude { box_file, pr, face, method, tol, tau, max_iter, out } => {
            cmd_exclude(box_file, pr, face, method, tol, tau, max_iter).map(|r| (r, out))
        }
        Command::FacesSweep { k, dim, grid, seed, method, c_min, c_max, jobs, out } => {
            cmd_faces_sweep(k, dim, grid, seed, method, c_min, c_max, jobs, out.as_deref())
                .map(|r| (r, None))
        }
        Command::Selftest { m, model, canonical_chained, out } => {
            cmd_selftest(m, model, canonical_chained).map(|r| (r, out))
        }
        Command::Xorgame { k, verify_hadamard, verify_blocks, bias, csv, out } => {
            cmd_xorgame(k, verify_hadamard, verify_blocks, bias, csv.as_deref()).map(|r| (r, out))
        }
    };
    match outcome {
        Ok(((mut report, code), out)) => {
            let command: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
            report["command"] = json!(command);
            report["wall_time_s"] = json!(started.elapsed().as_secs_f64());
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            if let Err(e) = emit(&text, out.as_deref(), stdout) {
                let _ = writeln!(stderr, "error: {e}");
                return 1;
            }
            code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| format!("{}: {e}", p.display())),
        None => writeln!(stdout, "{text}").map_err(|e| e.to_string()),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_input(p: &Path) -> CliResult<(Value, Value)> {
    let bytes = fs::read(p).map_err(|e| format!("{}: {e}", p.display()))?;
    let doc: Value = serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", p.display()))?;
    let digest = json!({"path": p.display().to_string(), "sha256": sha256_hex(&bytes)});
    Ok((doc, digest))
}

fn env_mode() -> CliResult<Option<NumMode>> {
    match std::env::var(NUM_MODE_VAR) {
        Ok(s) => s.parse().map(Some).map_err(|e| format!("{NUM_MODE_VAR}: {e}")),
        Err(_) => Ok(None),
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

enum Input {
    Box(Value),
    Pr(usize),
    Face(Value),
}

fn cmd_exclude(
    box_file: Option<PathBuf>,
    pr: Option<usize>,
    face: Option<PathBuf>,
    method: Method,
    tol: f64,
    tau: f64,
    max_iter: usize,
) -> CliResult<(Value, u8)> {
    if !(tol >= 0.0) || !(tau > 0.0) {
        return Err("--tol must be non-negative and --tau positive".into());
    }
    let (input, digest, file_mode) = match (box_file, pr, face) {
        (Some(p), None, None) => {
            let (doc, digest) = read_input(&p)?;
            let mode = peek_mode(&doc).map_err(err)?;
            (Input::Box(doc), digest, Some(mode))
        }
        (None, Some(k), None) => {
            let arg = format!("--pr {k}");
            (Input::Pr(k), json!({"pr": k, "sha256": sha256_hex(arg.as_bytes())}), None)
        }
        (None, None, Some(p)) => {
            let (doc, digest) = read_input(&p)?;
            (Input::Face(doc), digest, None)
        }
        _ => return Err("exactly one of --box, --pr, --face is required".into()),
    };
    let mode = match (env_mode()?, file_mode) {
        (Some(NumMode::Rational), Some(NumMode::Float)) => {
            return Err("float box cannot be evaluated in rational mode".into())
        }
        (Some(m), _) => m,
        (None, Some(m)) => m,
        (None, None) => NumMode::Rational,
    };
    let mut report = match mode {
        NumMode::Rational => exclude_in::<Rational>(&input, file_mode, method, tol, tau, max_iter)?,
        NumMode::Float => exclude_in::<f64>(&input, file_mode, method, tol, tau, max_iter)?,
    };
    report["inputs"] = digest;
    report["mode"] = json!(mode.as_str());
    report["method"] = json!(method.as_str());
    let code = if report["decided"].as_bool() == Some(true) { 0 } else { 2 };
    Ok((report, code))
}

fn load_box<S: Scalar>(input: &Input, file_mode: Option<NumMode>, tol: f64) -> CliResult<(BellBox<S>, Option<S>)> {
    match input {
        Input::Pr(k) => Ok((pr_box::<S>(*k).map_err(err)?, None)),
        Input::Face(doc) => {
            let spec = FaceSpec::<S>::from_json(doc).map_err(err)?;
            let bx = face_box(&spec, tol).map_err(err)?;
            Ok((bx, Some(spec.c_ns().clone())))
        }
        Input::Box(doc) => {
            if file_mode == Some(NumMode::Rational) && !S::is_exact() {
                let exact = BellBox::<Rational>::from_json(doc).map_err(err)?;
                let probs = exact.probs.iter().map(|p| S::from_rational(p)).collect();
                return Ok((BellBox::new(exact.scenario, probs).map_err(err)?, None));
            }
            Ok((BellBox::<S>::from_json(doc).map_err(err)?, None))
        }
    }
}

fn exclude_in<S: Scalar>(
    input: &Input,
    file_mode: Option<NumMode>,
    method: Method,
    tol: f64,
    tau: f64,
    max_iter: usize,
) -> CliResult<Value> {
    let exact_tol = if S::is_exact() { 0.0 } else { tol };
    let (bx, c_hint) = load_box::<S>(input, file_mode, exact_tol)?;
    if !bx.is_normalized(exact_tol) || !bx.is_no_signaling(exact_tol) {
        return Err("box is not a normalized no-signaling box".into());
    }
    let mut report = json!({"box": bx.to_json()});
    let mut excluded = false;
    let mut value = Value::Null;
    let mut undecided = false;
    if matches!(method, Method::Analytic | Method::Both) {
        let r = exclude_by_analytic(&bx, c_hint.as_ref(), exact_tol).map_err(err)?;
        if r.excluded {
            excluded = true;
            value = r.value.as_ref().map(Scalar::to_json).unwrap_or(Value::Null);
        }
        report["analytic"] = r.to_json();
    }
    if matches!(method, Method::Sdp | Method::Both) {
        let r = exclude_by_sdp(&bx, tau, tol, max_iter).map_err(err)?;
        if r.excluded && !excluded {
            excluded = true;
            value = r.verified_value.to_json();
        }
        let v = r.solver.value;
        undecided = !r.excluded && v > -tol;
        report["sdp"] = r.to_json();
    }
    let mut decided = excluded || (method == Method::Analytic) || !undecided;
    if !excluded {
        // A local decomposition settles the question the other way.
        if let Ok(vertices) = enumerate_local_deterministic::<S>(bx.scenario, DEFAULT_DETERMINISTIC_CAP) {
            let inside = local_membership(&bx, &vertices, exact_tol).map_err(err)?.is_inside();
            report["local"] = json!(inside);
            decided = decided || inside;
        }
    }
    report["excluded"] = json!(excluded);
    report["value"] = value;
    report["decided"] = json!(decided);
    Ok(report)
}

#[derive(Serialize)]
struct SweepRow {
    k: usize,
    dim: usize,
    neighbors: String,
    c_ns: String,
    weights: String,
    method: String,
    template: String,
    value: String,
    value_f64: f64,
    excluded: bool,
}

fn combinations(n: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, d, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, d, &mut Vec::new(), &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_faces_sweep(
    k: usize,
    dim: usize,
    grid: usize,
    seed: u64,
    method: Method,
    c_min: f64,
    c_max: f64,
    jobs: Option<usize>,
    out: Option<&Path>,
) -> CliResult<(Value, u8)> {
    if k < 2 || dim < 1 || dim > 4 * k - 4 || grid < 1 {
        return Err(format!("need k ≥ 2, 1 ≤ dim ≤ 4k−4 = {}, grid ≥ 1", 4 * k.max(2) - 4));
    }
    if !(0.0 < c_min && c_min <= c_max && c_max < 1.0) {
        return Err("need 0 < c-min ≤ c-max < 1".into());
    }
    let subsets: Vec<Vec<usize>> = combinations(4 * k, dim)
        .into_iter()
        .filter(|ids| face_dimension(k, ids).map(|d| d == dim).unwrap_or(false))
        .collect();
    let tasks: Vec<(u64, Vec<usize>)> = subsets
        .iter()
        .flat_map(|ids| (0..grid).map(move |_| ids.clone()))
        .enumerate()
        .map(|(i, ids)| (i as u64, ids))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(err)?;
    let rows: Vec<CliResult<SweepRow>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(stream, ids)| sweep_row(k, ids, seed, *stream, method, c_min, c_max))
            .collect()
    });
    let rows: Vec<SweepRow> = rows.into_iter().collect::<CliResult<_>>()?;
    let excluded = rows.iter().filter(|r| r.excluded).count();
    if let Some(p) = out {
        let mut w = csv::Writer::from_path(p).map_err(|e| format!("{}: {e}", p.display()))?;
        for r in &rows {
            w.serialize(r).map_err(err)?;
        }
        w.flush().map_err(err)?;
    }
    let mut by_template = serde_json::Map::new();
    for r in &rows {
        let e = by_template.entry(r.template.clone()).or_insert(json!(0));
        *e = json!(e.as_u64().unwrap_or(0) + 1);
    }
    let report = json!({
        "inputs": {"k": k, "dim": dim, "grid": grid, "seed": seed, "c_range": [c_min, c_max]},
        "subsets": subsets.len(),
        "rows": rows.len(),
        "excluded": excluded,
        "by_template": by_template,
        "csv": out.map(|p| p.display().to_string()),
    });
    let code = if excluded == rows.len() { 0 } else { 2 };
    Ok((report, code))
}

fn sweep_row(
    k: usize,
    ids: &[usize],
    seed: u64,
    stream: u64,
    method: Method,
    c_min: f64,
    c_max: f64,
) -> CliResult<SweepRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let weights = sample_face_weights(&mut rng, ids.len(), c_min, c_max);
    let spec = FaceSpec { k, neighbors: ids.to_vec(), weights };
    let bx = face_box(&spec, 0.0).map_err(err)?;
    let mut row = SweepRow {
        k,
        dim: ids.len(),
        neighbors: ids.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
        c_ns: format_rational(spec.c_ns()),
        weights: spec.weights.iter().map(format_rational).collect::<Vec<_>>().join(" "),
        method: String::new(),
        template: String::new(),
        value: String::new(),
        value_f64: 0.0,
        excluded: false,
    };
    if matches!(method, Method::Analytic | Method::Both) {
        let r = exclude_by_analytic(&bx, Some(spec.c_ns()), 0.0).map_err(err)?;
        if let (true, Some(v)) = (r.excluded, r.value) {
            row.method = "analytic".into();
            row.template = r.template.unwrap_or_default();
            row.value_f64 = v.to_f64();
            row.value = format_rational(&v);
            row.excluded = true;
            return Ok(row);
        }
    }
    if matches!(method, Method::Sdp | Method::Both) {
        let r = exclude_by_sdp(&bx, 1.0, DEFAULT_TOL, DEFAULT_MAX_ITER).map_err(err)?;
        row.method = "sdp".into();
        row.template = "sdp".into();
        row.value_f64 = r.verified_value.to_f64();
        row.value = format_rational(&r.verified_value);
        row.excluded = r.excluded;
    }
    Ok(row)
}

fn cmd_selftest(m: Option<usize>, model: Option<PathBuf>, canonical: bool) -> CliResult<(Value, u8)> {
    let (model, digest) = match (model, canonical) {
        (Some(p), false) => {
            let (doc, digest) = read_input(&p)?;
            let model: PlanarModel = serde_json::from_value(doc).map_err(err)?;
            model.validate().map_err(err)?;
            if let Some(m) = m {
                if m != model.m {
                    return Err(format!("--m {m} but model has m = {}", model.m));
                }
            }
            (model, digest)
        }
        (None, true) => {
            let m = m.ok_or("--canonical-chained needs --m")?;
            let arg = format!("--canonical-chained --m {m}");
            let model = PlanarModel::canonical_chained(m).map_err(err)?;
            (model, json!({"canonical_chained": m, "sha256": sha256_hex(arg.as_bytes())}))
        }
        _ => return Err("exactly one of --model, --canonical-chained is required".into()),
    };
    let mut report = selftest_report(&model).map_err(err)?;
    report["inputs"] = digest;
    Ok((report, 0))
}

fn cmd_xorgame(
    k: usize,
    verify_hadamard: bool,
    verify_blocks: bool,
    bias: bool,
    csv_out: Option<&Path>,
) -> CliResult<(Value, u8)> {
    let game = build_game(k).map_err(err)?;
    let mut report = json!({
        "inputs": {"k": k, "sha256": sha256_hex(format!("--k {k}").as_bytes())},
        "game": game,
    });
    if verify_hadamard {
        report["hadamard_diagonal"] = json!(is_diagonal_in_hadamard_basis(&game).map_err(err)?);
    }
    if verify_blocks {
        report["blocks"] = if k >= 4 {
            serde_json::to_value(verify_block_structure(&game, k).map_err(err)?).map_err(err)?
        } else {
            json!({"skipped": "block layout needs k ≥ 4"})
        };
    }
    if bias {
        let classical = classical_bias(&game).map_err(err)?;
        let quantum = solve_elliptope_bias(&game).map_err(err)?;
        report["classical_bias"] = json!(classical);
        report["quantum_bias"] = json!(quantum.value);
        report["quantum_solver"] = quantum.to_json();
    }
    if let Some(p) = csv_out {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(p)
            .map_err(|e| format!("{}: {e}", p.display()))?;
        for row in &game {
            w.serialize(row).map_err(err)?;
        }
        w.flush().map_err(err)?;
    }
    Ok((report, 0))
}

#[cfg(test)]
mod tests;

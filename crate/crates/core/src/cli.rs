//! Command-line front end.
//!
//! [`run`] executes a [`JobSpec`] and returns the exit code together with
//! the rendered report, so the binary is a thin wrapper and the whole
//! pipeline can be exercised in-process.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use num_traits::FromPrimitive;
use serde_json::{json, Map, Value};

use crate::certify::{certify_overall, certify_third_factor, mode_rotate, Conclusion};
use crate::combinatorics::DEFAULT_CAP;
use crate::compound::compound;
use crate::conditions::{check_cm, check_hm, check_km, check_um, check_wm, h_profile, m_for_c};
use crate::error::Error;
use crate::linalg::{parse_rational, Backend, Field, Matrix, Rational};
use crate::report;
use crate::settings::{Settings, DEFAULT_TOLERANCE};
use crate::tensor::{match_factors, match_single_factor, FactorTriple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Analyze,
    CertifyThird,
    CertifyOverall,
    Compound,
    Krank,
    Hprofile,
    Match,
}

impl Command {
    fn as_str(&self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::CertifyThird => "certify-third",
            Command::CertifyOverall => "certify-overall",
            Command::Compound => "compound",
            Command::Krank => "krank",
            Command::Hprofile => "hprofile",
            Command::Match => "match",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

/// Command-line arguments.
#[derive(Debug, Parser)]
#[command(name = "cpdcert", version, about = "Uniqueness certificates for polyadic decompositions")]
pub struct Args {
    /// JSON file with matrices "A", "B", "C", or one CSV file per matrix.
    /// Repeat the flag for several files.
    #[arg(long)]
    pub input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "analyze")]
    pub command: Command,
    /// Defaults to exact unless the input contains non-integer JSON numbers.
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub target: u8,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Re-run the job recorded in a JSON report and compare results.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long, env = "CPDCERT_CAP", default_value_t = DEFAULT_CAP)]
    pub cap: u64,
}

/// A fully specified job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobSpec {
    pub inputs: Vec<PathBuf>,
    pub command: Command,
    pub backend: Option<Backend>,
    pub tolerance: f64,
    pub seed: u64,
    pub m: Option<usize>,
    pub target: u8,
    pub format: Format,
    pub replay: Option<PathBuf>,
    pub cap: u64,
}

impl Default for JobSpec {
    fn default() -> Self {
        JobSpec {
            inputs: Vec::new(),
            command: Command::Analyze,
            backend: None,
            tolerance: DEFAULT_TOLERANCE,
            seed: 0,
            m: None,
            target: 3,
            format: Format::Json,
            replay: None,
            cap: DEFAULT_CAP,
        }
    }
}

impl From<Args> for JobSpec {
    fn from(a: Args) -> Self {
        JobSpec {
            inputs: a.input,
            command: a.command,
            backend: a.backend.map(|b| match b {
                BackendArg::Exact => Backend::Exact,
                BackendArg::Float => Backend::Float,
            }),
            tolerance: a.tol,
            seed: a.seed,
            m: a.m,
            target: a.target,
            format: a.format,
            replay: a.replay,
            cap: a.cap,
        }
    }
}

/// Failure of a job, with its exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum JobError {
    /// Unreadable or malformed input, invalid arguments: exit 1.
    Input(String),
    /// Combinatorial cap refusal: exit 2.
    Cap(String),
}

impl JobError {
    pub fn exit_code(&self) -> i32 {
        match self {
            JobError::Input(_) => 1,
            JobError::Cap(_) => 2,
        }
    }
}

impl fmt::Display for JobError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JobError::Input(m) | JobError::Cap(m) => f.write_str(m),
        }
    }
}

impl From<Error> for JobError {
    fn from(e: Error) -> Self {
        match e {
            Error::CapExceeded { .. } => JobError::Cap(e.to_string()),
            other => JobError::Input(other.to_string()),
        }
    }
}

type JobResult<T> = std::result::Result<T, JobError>;

/// Entry of a parsed input matrix before a backend is chosen.
#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Exact(Rational),
    Float(f64),
}

impl Cell {
    fn to_field<T: Field>(&self) -> T {
        match self {
            Cell::Exact(q) => T::from_rational(q),
            // finite f64 values are dyadic rationals, so this is lossless
            Cell::Float(x) => T::from_rational(&Rational::from_f64(*x).expect("finite")),
        }
    }
}

type RawMatrix = Vec<Vec<Cell>>;

/// Named matrices of one input source, in name order.
type RawInput = BTreeMap<String, RawMatrix>;

const MATRIX_NAMES: [&str; 3] = ["A", "B", "C"];

fn parse_cell_value(v: &Value, at: &str) -> JobResult<Cell> {
    match v {
        Value::String(s) => parse_rational(s)
            .map(Cell::Exact)
            .ok_or_else(|| JobError::Input(format!("{at}: cannot parse {s:?} as a rational"))),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Cell::Exact(Rational::from_integer(i.into())))
            } else if let Some(u) = n.as_u64() {
                Ok(Cell::Exact(Rational::from_integer(u.into())))
            } else {
                let x = n.as_f64().filter(|x| x.is_finite()).ok_or_else(|| {
                    JobError::Input(format!("{at}: number {n} is not finite"))
                })?;
                Ok(Cell::Float(x))
            }
        }
        other => Err(JobError::Input(format!(
            "{at}: expected a number or a string, found {other}"
        ))),
    }
}

fn parse_matrix_value(v: &Value, name: &str, source: &str) -> JobResult<RawMatrix> {
    let rows = v
        .as_array()
        .ok_or_else(|| JobError::Input(format!("{source}: matrix {name} must be an array of rows")))?;
    if rows.is_empty() {
        return Err(JobError::Input(format!("{source}: matrix {name} has no rows")));
    }
    let mut out = Vec::with_capacity(rows.len());
    let mut width = None;
    for (i, row) in rows.iter().enumerate() {
        let cells = row.as_array().ok_or_else(|| {
            JobError::Input(format!("{source}: matrix {name} row {} is not an array", i + 1))
        })?;
        match width {
            None if cells.is_empty() => {
                return Err(JobError::Input(format!("{source}: matrix {name} row 1 is empty")))
            }
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(JobError::Input(format!(
                    "{source}: matrix {name} row {} has {} entries, expected {w}",
                    i + 1,
                    cells.len()
                )))
            }
            _ => {}
        }
        let parsed = cells
            .iter()
            .enumerate()
            .map(|(j, c)| parse_cell_value(c, &format!("{source}: {name}[{}][{}]", i + 1, j + 1)))
            .collect::<JobResult<Vec<_>>>()?;
        out.push(parsed);
    }
    Ok(out)
}

fn parse_json_input(text: &str, source: &str) -> JobResult<RawInput> {
    let v: Value = serde_json::from_str(text).map_err(|e| {
        JobError::Input(format!(
            "{source}: line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    let obj = v
        .as_object()
        .ok_or_else(|| JobError::Input(format!("{source}: expected a JSON object with keys A, B, C")))?;
    // a report written by this tool carries its matrices under "input"
    let obj = match obj.get("input").and_then(Value::as_object) {
        Some(inner) if !obj.contains_key("A") => inner,
        _ => obj,
    };
    let mut out = RawInput::new();
    for name in MATRIX_NAMES {
        if let Some(m) = obj.get(name) {
            out.insert(name.to_string(), parse_matrix_value(m, name, source)?);
        }
    }
    if out.is_empty() {
        return Err(JobError::Input(format!("{source}: no matrix named A, B or C")));
    }
    Ok(out)
}

fn parse_csv_matrix(text: &str, source: &str) -> JobResult<RawMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out: RawMatrix = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            JobError::Input(format!("{source}: line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                parse_rational(cell).map(Cell::Exact).ok_or_else(|| {
                    JobError::Input(format!(
                        "{source}: line {line}, column {}: cannot parse {cell:?} as a number",
                        j + 1
                    ))
                })
            })
            .collect::<JobResult<Vec<_>>>()?;
        out.push(row);
    }
    if out.is_empty() {
        return Err(JobError::Input(format!("{source}: no rows")));
    }
    Ok(out)
}

fn read(path: &Path) -> JobResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| JobError::Input(format!("{}: {e}", path.display())))
}

fn is_json(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads the job's inputs into one or more named-matrix groups. JSON files
/// each form a group; consecutive CSV files are named A, B, C in order.
fn load_inputs(paths: &[PathBuf]) -> JobResult<Vec<RawInput>> {
    if paths.is_empty() {
        return Err(JobError::Input("no --input given".into()));
    }
    let mut groups = Vec::new();
    let mut csv_group = RawInput::new();
    for path in paths {
        let source = path.display().to_string();
        if is_json(path) {
            groups.push(parse_json_input(&read(path)?, &source)?);
        } else {
            let idx = csv_group.len();
            if idx == 3 {
                groups.push(std::mem::take(&mut csv_group));
            }
            let name = MATRIX_NAMES[csv_group.len()];
            csv_group.insert(name.to_string(), parse_csv_matrix(&read(path)?, &source)?);
        }
    }
    if !csv_group.is_empty() {
        groups.push(csv_group);
    }
    Ok(groups)
}

fn wants_float(groups: &[RawInput]) -> bool {
    groups
        .iter()
        .flat_map(|g| g.values())
        .flatten()
        .flatten()
        .any(|c| matches!(c, Cell::Float(_)))
}

fn to_matrix<T: Field>(raw: &RawMatrix) -> JobResult<Matrix<T>> {
    Matrix::from_rows(raw.iter().map(|r| r.iter().map(Cell::to_field).collect()).collect())
        .map_err(JobError::from)
}

type Group<T> = BTreeMap<String, Matrix<T>>;

fn typed_groups<T: Field>(groups: &[RawInput]) -> JobResult<Vec<Group<T>>> {
    groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|(k, v)| Ok((k.clone(), to_matrix::<T>(v)?)))
                .collect::<JobResult<Group<T>>>()
        })
        .collect()
}

fn triple<T: Field>(g: &Group<T>) -> JobResult<FactorTriple<T>> {
    let get = |n: &str| {
        g.get(n)
            .cloned()
            .ok_or_else(|| JobError::Input(format!("this command needs matrices A, B and C; {n} is missing")))
    };
    Ok(FactorTriple::new(get("A")?, get("B")?, get("C")?)?)
}

fn group_json<T: Field>(g: &Group<T>) -> Value {
    Value::Object(g.iter().map(|(k, m)| (k.clone(), report::matrix(m))).collect())
}

fn settings_of(job: &JobSpec) -> Settings {
    Settings::default()
        .with_tolerance(job.tolerance)
        .with_seed(job.seed)
        .with_cap(job.cap)
}

fn check_m<T: Field>(f: &FactorTriple<T>, m: usize) -> JobResult<()> {
    let (i, j, _) = f.dims();
    let bound = i.min(j).min(f.r());
    if m == 0 || m > bound {
        return Err(JobError::Input(format!(
            "--m {m} outside 1..=min(I, J, R) = {bound}"
        )));
    }
    Ok(())
}

fn factor_summary<T: Field>(f: &FactorTriple<T>, s: &Settings) -> JobResult<Value> {
    let mut out = Map::new();
    for (name, m) in MATRIX_NAMES.iter().zip(f.factors()) {
        out.insert(
            name.to_string(),
            json!({
                "shape": [m.rows(), m.cols()],
                "rank": m.rank(s),
                "k_rank": m.k_rank(s)?,
            }),
        );
    }
    Ok(Value::Object(out))
}

fn execute<T: Field>(job: &JobSpec, groups: &[Group<T>]) -> JobResult<Value> {
    let s = settings_of(job);
    let first = &groups[0];
    match job.command {
        Command::Analyze => {
            let f = triple(first)?;
            let rot = mode_rotate(&f, job.target)?;
            let m = match job.m {
                Some(m) => {
                    check_m(&rot, m)?;
                    m
                }
                None => m_for_c(&rot.c, &s),
            };
            let mut conditions = Map::new();
            let (i, j, _) = rot.dims();
            if m >= 1 && m <= i.min(j).min(rot.r()) {
                let (a, b, c) = (&rot.a, &rot.b, &rot.c);
                conditions.insert("K".into(), report::verdict(&check_km(a, b, m, &s)?));
                conditions.insert("H".into(), report::verdict(&check_hm(a, b, m, &s)?));
                conditions.insert("C".into(), report::verdict(&check_cm(a, b, m, &s)?));
                conditions.insert("U".into(), report::verdict(&check_um(a, b, m, &s)?));
                conditions.insert("W".into(), report::verdict(&check_wm(a, b, c, m, &s)?));
            }
            Ok(json!({
                "R": f.r(),
                "factors": factor_summary(&f, &s)?,
                "target_mode": job.target,
                "m": m,
                "conditions": Value::Object(conditions),
                "h_profile": report::h_profile(&h_profile(&rot.a, &rot.b, &s)?),
                "certify_third": report::certificate(&certify_third_factor(&f, job.target, &s)?),
                "certify_overall": report::certificate(&certify_overall(&f, &s)?),
            }))
        }
        Command::CertifyThird => {
            let f = triple(first)?;
            let cert = certify_third_factor(&f, job.target, &s)?;
            Ok(json!({ "R": f.r(), "certificate": report::certificate(&cert) }))
        }
        Command::CertifyOverall => {
            let f = triple(first)?;
            let cert = certify_overall(&f, &s)?;
            Ok(json!({ "R": f.r(), "certificate": report::certificate(&cert) }))
        }
        Command::Compound => {
            let k = job
                .m
                .ok_or_else(|| JobError::Input("compound needs --m".into()))?;
            let mut out = Map::new();
            for (name, m) in first {
                out.insert(name.clone(), report::compound(&compound(m, k, &s)?));
            }
            Ok(json!({ "compounds": Value::Object(out) }))
        }
        Command::Krank => {
            let mut out = Map::new();
            for (name, m) in first {
                let (k, witness) = m.k_rank_with_witness(&s)?;
                out.insert(
                    name.clone(),
                    json!({
                        "k_rank": k,
                        "rank": m.rank(&s),
                        "shape": [m.rows(), m.cols()],
                        "dependent_columns": witness.map(|w| w.iter().map(|c| c + 1).collect::<Vec<_>>()),
                    }),
                );
            }
            Ok(json!({ "k_ranks": Value::Object(out) }))
        }
        Command::Hprofile => {
            let f = triple(first)?;
            let rot = mode_rotate(&f, job.target)?;
            let profile = h_profile(&rot.a, &rot.b, &s)?;
            let mut out = json!({ "target_mode": job.target, "h_profile": report::h_profile(&profile) });
            if let Some(m) = job.m {
                out["H"] = report::verdict(&crate::conditions::check_hm_with_profile::<T>(&profile, m)?);
            }
            Ok(out)
        }
        Command::Match => {
            if groups.len() != 2 {
                return Err(JobError::Input("match needs exactly two inputs".into()));
            }
            let (g1, g2) = (&groups[0], &groups[1]);
            if g1.len() == 3 && g2.len() == 3 {
                let rep = match_factors(&triple(g1)?, &triple(g2)?, s.tolerance)?;
                Ok(json!({ "mode": "triple", "equivalence": report::equivalence(&rep) }))
            } else if g1.len() == 1 && g2.len() == 1 {
                let m1 = g1.values().next().expect("one matrix");
                let m2 = g2.values().next().expect("one matrix");
                let rep = match_single_factor(m1, m2, s.tolerance)?;
                Ok(json!({ "mode": "single", "equivalence": report::equivalence(&rep) }))
            } else {
                Err(JobError::Input(
                    "match needs two full triples or two single matrices".into(),
                ))
            }
        }
    }
}

fn conclusion_of(result: &Value) -> Option<&str> {
    result
        .pointer("/certificate/conclusion")
        .or_else(|| result.pointer("/certify_third/conclusion"))
        .and_then(Value::as_str)
}

fn report_for<T: Field>(job: &JobSpec, groups: &[Group<T>], backend: Backend) -> JobResult<Value> {
    let result = execute(job, groups)?;
    let inputs: Vec<Value> = groups.iter().map(group_json).collect();
    let input = if inputs.len() == 1 {
        inputs[0].clone()
    } else {
        Value::Array(inputs)
    };
    Ok(json!({
        "command": job.command.as_str(),
        "input": input,
        "job": {
            "backend": backend.to_string(),
            "tolerance": job.tolerance,
            "seed": job.seed,
            "m": job.m,
            "target": job.target,
            "cap": job.cap,
        },
        "result": result,
        "version": crate::VERSION,
    }))
}

fn run_groups(job: &JobSpec, raw: &[RawInput]) -> JobResult<Value> {
    let backend = job
        .backend
        .unwrap_or(if wants_float(raw) { Backend::Float } else { Backend::Exact });
    match backend {
        Backend::Exact => report_for(job, &typed_groups::<Rational>(raw)?, backend),
        Backend::Float => report_for(job, &typed_groups::<f64>(raw)?, backend),
    }
}

fn raw_from_report_input(v: &Value) -> JobResult<Vec<RawInput>> {
    let parse_group = |g: &Value| -> JobResult<RawInput> {
        let obj = g
            .as_object()
            .ok_or_else(|| JobError::Input("replay: input group is not an object".into()))?;
        obj.iter()
            .map(|(k, m)| Ok((k.clone(), parse_matrix_value(m, k, "replay")?)))
            .collect()
    };
    match v {
        Value::Array(groups) => groups.iter().map(parse_group).collect(),
        other => Ok(vec![parse_group(other)?]),
    }
}

fn command_from_str(s: &str) -> Option<Command> {
    Command::value_variants().iter().copied().find(|c| c.as_str() == s)
}

fn replay(job: &JobSpec, path: &Path) -> JobResult<Value> {
    let text = read(path)?;
    let source = path.display().to_string();
    let original: Value = serde_json::from_str(&text).map_err(|e| {
        JobError::Input(format!("{source}: line {}, column {}: {e}", e.line(), e.column()))
    })?;
    let field = |p: &str| {
        original
            .pointer(p)
            .ok_or_else(|| JobError::Input(format!("{source}: report has no {p}")))
    };
    let command = field("/command")?
        .as_str()
        .and_then(command_from_str)
        .ok_or_else(|| JobError::Input(format!("{source}: unknown command")))?;
    let backend = match field("/job/backend")?.as_str() {
        Some("exact") => Backend::Exact,
        Some("float") => Backend::Float,
        _ => return Err(JobError::Input(format!("{source}: unknown backend"))),
    };
    let recorded = JobSpec {
        inputs: Vec::new(),
        command,
        backend: Some(backend),
        tolerance: field("/job/tolerance")?.as_f64().unwrap_or(DEFAULT_TOLERANCE),
        seed: field("/job/seed")?.as_u64().unwrap_or(0),
        m: field("/job/m")?.as_u64().map(|m| m as usize),
        target: field("/job/target")?.as_u64().unwrap_or(3) as u8,
        format: job.format,
        replay: None,
        cap: field("/job/cap")?.as_u64().unwrap_or(DEFAULT_CAP),
    };
    let raw = raw_from_report_input(field("/input")?)?;
    let rerun = run_groups(&recorded, &raw)?;
    let identical = rerun["result"] == original["result"];
    let before = conclusion_of(&original["result"]).map(str::to_string);
    let after = conclusion_of(&rerun["result"]).map(str::to_string);
    if let Some(c) = &before {
        if Conclusion::parse(c).is_none() {
            return Err(JobError::Input(format!("{source}: unknown conclusion {c:?}")));
        }
    }
    Ok(json!({
        "replay": {
            "source": source,
            "command": command.as_str(),
            "identical": identical,
            "original_conclusion": before,
            "replayed_conclusion": after,
            "conclusion_reproduced": before == after,
        },
        "version": crate::VERSION,
    }))
}

/// Runs a job and renders its report. Analyses that end in `not_unique`
/// or `undetermined` are successes (exit 0).
pub fn run(job: &JobSpec) -> (i32, String) {
    let outcome = match &job.replay {
        Some(path) => replay(job, path).and_then(|v| {
            if v["replay"]["identical"] == Value::Bool(true) {
                Ok(v)
            } else {
                Err(JobError::Input(format!(
                    "replay of {} did not reproduce the recorded result: {}",
                    path.display(),
                    serde_json::to_string(&v["replay"]).unwrap_or_default()
                )))
            }
        }),
        None => load_inputs(&job.inputs).and_then(|raw| run_groups(job, &raw)),
    };
    match outcome {
        Ok(v) => (0, render(&v, job.format)),
        Err(e) => (e.exit_code(), format!("error: {e}\n")),
    }
}

pub fn render(v: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(v).expect("values serialize");
            s.push('\n');
            s
        }
        Format::Text => report::to_text(v),
    }
}

/// Parses `std::env::args`, runs the job, and returns the exit code.
pub fn main_with_args() -> i32 {
    // clap reports usage errors with exit 2, which is reserved for cap
    // refusals here
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let job = JobSpec::from(args);
    let (code, out) = run(&job);
    if code == 0 {
        print!("{out}");
    } else {
        eprint!("{out}");
    }
    code
}

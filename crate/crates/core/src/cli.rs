//! Command-line front end: file formats for instances, strategies and
//! variable maps, the `csg` subcommands, and deterministic run reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use crate::cs::{
    Constraint, ConstraintSystem, Distribution, QuestionDistribution, Target, Tuple, Value, VarMap,
};
use crate::error::{Error, Result};
use crate::gadgets::{self, GadgetOutput, Reduction};
use crate::games::{cc_game, classical_value, cv_game, twocs_game, GameSpec};
use crate::quantum::{self, Model, Pvm, SyncStrategy, Transform, C64, CMat};
use crate::schaefer::{classify_boolean, has_wnu_homomorphism_smallarity, Complexity, Polymorphism, WnuSearch};
use crate::tvf::{self, SimTarget};

// Instance files

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    k: u8,
    variables: Vec<String>,
    constraints: Vec<ConstraintFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distribution: Option<DistributionFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstraintFile {
    context: Vec<String>,
    accepted: Vec<Vec<Value>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "RawConstraintFile")]
struct ConstraintFile {
    context: Vec<String>,
    accepted: Vec<Vec<Value>>,
}

impl TryFrom<RawConstraintFile> for ConstraintFile {
    type Error = String;

    fn try_from(raw: RawConstraintFile) -> std::result::Result<Self, String> {
        if let Some(t) = raw.accepted.iter().find(|t| t.len() != raw.context.len()) {
            return Err(format!(
                "tuple {t:?} has length {} but the context has {} variables",
                t.len(),
                raw.context.len()
            ));
        }
        Ok(ConstraintFile { context: raw.context, accepted: raw.accepted })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionFile {
    kind: DistributionKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    weights: Vec<Vec<IntField>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DistributionKind {
    Uniform,
    Explicit,
}

/// An integer given either as a JSON number or as a decimal string.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum IntField {
    Num(i64),
    Str(String),
}

impl IntField {
    fn big(&self) -> Result<BigInt> {
        match self {
            IntField::Num(n) => Ok(BigInt::from(*n)),
            IntField::Str(s) => s.trim().parse().map_err(|_| Error::Parse(format!("{s:?} is not an integer"))),
        }
    }

    fn index(&self) -> Result<usize> {
        let b = self.big()?;
        usize::try_from(&b).map_err(|_| Error::Parse(format!("{b} is not a valid index")))
    }
}

fn json_error(what: &str, e: serde_json::Error) -> Error {
    Error::Parse(format!("{what}: {e}"))
}

fn fraction(num: &IntField, den: &IntField) -> Result<BigRational> {
    let (n, d) = (num.big()?, den.big()?);
    if d == BigInt::from(0) {
        return Err(Error::Parse("zero denominator".into()));
    }
    Ok(BigRational::new(n, d))
}

/// Parses an instance file. Syntax errors and malformed tuples are reported
/// with line and column.
pub fn parse_instance(text: &str) -> Result<ConstraintSystem> {
    let f: InstanceFile = serde_json::from_str(text).map_err(|e| json_error("instance", e))?;
    let ids: BTreeMap<&str, usize> = f.variables.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    if ids.len() != f.variables.len() {
        return Err(Error::Parse("variable names must be distinct".into()));
    }
    let constraints = f
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let ctx = c
                .context
                .iter()
                .map(|n| ids.get(n.as_str()).copied().ok_or_else(|| Error::Parse(format!("constraint {i}: unknown variable {n:?}"))))
                .collect::<Result<Vec<_>>>()?;
            Constraint::new(f.k, ctx, c.accepted.clone()).map_err(|e| Error::Parse(format!("constraint {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let s = ConstraintSystem::new(f.k, f.variables.clone(), constraints)?;
    match f.distribution {
        None => Ok(s),
        Some(DistributionFile { kind: DistributionKind::Uniform, weights }) => {
            if !weights.is_empty() {
                return Err(Error::Parse("a uniform distribution takes no weights".into()));
            }
            Ok(s)
        }
        Some(DistributionFile { kind: DistributionKind::Explicit, weights }) => {
            if weights.is_empty() {
                return Err(Error::Parse("an explicit distribution needs weights".into()));
            }
            let d = if weights.iter().all(|w| w.len() == 4) {
                let entries = weights
                    .iter()
                    .map(|w| Ok(((w[0].index()?, w[1].index()?), fraction(&w[2], &w[3])?)))
                    .collect::<Result<Vec<_>>>()?;
                QuestionDistribution::Pairs(Distribution::new(entries)?)
            } else if weights.iter().all(|w| w.len() == 3) {
                let entries =
                    weights.iter().map(|w| Ok((w[0].index()?, fraction(&w[1], &w[2])?))).collect::<Result<Vec<_>>>()?;
                QuestionDistribution::Constraints(Distribution::new(entries)?)
            } else {
                return Err(Error::Parse("weights must all be [i, j, num, den] or all [i, num, den]".into()));
            };
            s.with_distribution(d)
        }
    }
}

fn big_str(b: &BigInt) -> IntField {
    IntField::Str(b.to_string())
}

fn instance_file(s: &ConstraintSystem) -> InstanceFile {
    let name = |v: usize| s.var_name(v).to_string();
    let distribution = s.distribution().map(|d| DistributionFile {
        kind: DistributionKind::Explicit,
        weights: match d {
            QuestionDistribution::Pairs(p) => p
                .iter()
                .map(|(&(i, j), w)| vec![IntField::Num(i as i64), IntField::Num(j as i64), big_str(w.numer()), big_str(w.denom())])
                .collect(),
            QuestionDistribution::Constraints(p) => p
                .iter()
                .map(|(&i, w)| vec![IntField::Num(i as i64), big_str(w.numer()), big_str(w.denom())])
                .collect(),
        },
    });
    InstanceFile {
        k: s.k(),
        variables: s.variables().iter().map(|v| v.name.clone()).collect(),
        constraints: s
            .constraints()
            .iter()
            .map(|c| ConstraintFile {
                context: c.context().iter().map(|&v| name(v)).collect(),
                accepted: c.accepted().to_vec(),
            })
            .collect(),
        distribution,
    }
}

/// The instance as a JSON value in the file format.
pub fn instance_json(s: &ConstraintSystem) -> Json {
    serde_json::to_value(instance_file(s)).expect("instance serializes")
}

/// Serializes an instance; `parse_instance` inverts it.
pub fn serialize_instance(s: &ConstraintSystem) -> String {
    serde_json::to_string_pretty(&instance_file(s)).expect("instance serializes")
}

// Strategy files

type MatrixFile = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StrategyFile {
    model: Model,
    d: usize,
    #[serde(default)]
    context_pvms: Vec<Vec<MatrixFile>>,
    #[serde(default)]
    variable_pvms: Vec<Vec<MatrixFile>>,
}

fn matrix_from_file(m: &MatrixFile, d: usize) -> Result<CMat> {
    if m.len() != d || m.iter().any(|r| r.len() != d) {
        return Err(Error::Parse(format!("every matrix must be {d} x {d}")));
    }
    Ok(CMat::from_fn(d, d, |i, j| C64::new(m[i][j][0], m[i][j][1])))
}

fn matrix_to_file(m: &CMat) -> MatrixFile {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn pvms_from_file(ps: &[Vec<MatrixFile>], d: usize) -> Result<Vec<Pvm>> {
    ps.iter()
        .map(|p| Pvm::new(p.iter().map(|m| matrix_from_file(m, d)).collect::<Result<Vec<_>>>()?))
        .collect()
}

/// Parses a strategy file. Shapes are checked against the dimension; the
/// PVM conditions are checked by [`SyncStrategy::validate`].
pub fn parse_strategy(text: &str) -> Result<SyncStrategy> {
    let f: StrategyFile = serde_json::from_str(text).map_err(|e| json_error("strategy", e))?;
    if f.d == 0 {
        return Err(Error::Parse("dimension must be positive".into()));
    }
    Ok(SyncStrategy {
        model: f.model,
        d: f.d,
        context_pvms: pvms_from_file(&f.context_pvms, f.d)?,
        variable_pvms: pvms_from_file(&f.variable_pvms, f.d)?,
    })
}

/// Serializes a strategy; `parse_strategy` inverts it exactly.
pub fn serialize_strategy(st: &SyncStrategy) -> String {
    let conv = |ps: &[Pvm]| ps.iter().map(|p| p.projectors.iter().map(matrix_to_file).collect()).collect();
    let f = StrategyFile { model: st.model, d: st.d, context_pvms: conv(&st.context_pvms), variable_pvms: conv(&st.variable_pvms) };
    serde_json::to_string(&f).expect("strategy serializes")
}

// Variable maps

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VarMapFile {
    map: BTreeMap<String, TargetFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum TargetFile {
    Name(String),
    Const {
        #[serde(rename = "const")]
        value: Value,
    },
}

/// Serializes a variable map with the given names for source and target
/// variables.
pub fn serialize_varmap(r: &VarMap, source: &dyn Fn(usize) -> String, target: &dyn Fn(usize) -> String) -> Json {
    let map = r
        .source()
        .iter()
        .zip(r.images())
        .map(|(&v, t)| {
            let img = match *t {
                Target::Var(w) => TargetFile::Name(target(w)),
                Target::Neg(w) => TargetFile::Name(format!("!{}", target(w))),
                Target::Const(a) => TargetFile::Const { value: a },
            };
            (source(v), img)
        })
        .collect();
    serde_json::to_value(VarMapFile { map }).expect("map serializes")
}

/// Parses a variable map; sources are listed in name order.
pub fn parse_varmap(
    text: &str,
    source: &dyn Fn(&str) -> Option<usize>,
    target: &dyn Fn(&str) -> Option<usize>,
) -> Result<VarMap> {
    let f: VarMapFile = serde_json::from_str(text).map_err(|e| json_error("variable map", e))?;
    let mut src = Vec::new();
    let mut images = Vec::new();
    for (name, t) in &f.map {
        src.push(source(name).ok_or_else(|| Error::Parse(format!("unknown source variable {name:?}")))?);
        let look = |n: &str| target(n).ok_or_else(|| Error::Parse(format!("unknown target variable {n:?}")));
        images.push(match t {
            TargetFile::Const { value } => Target::Const(*value),
            TargetFile::Name(n) => match n.strip_prefix('!') {
                Some(rest) => Target::Neg(look(rest)?),
                None => Target::Var(look(n)?),
            },
        });
    }
    VarMap::new(src, images)
}

// Command line

/// Output format of a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

/// Options shared by every subcommand.
#[derive(Clone, Debug, Args)]
pub struct GlobalOpts {
    /// Base seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance for projector residuals.
    #[arg(long, global = true, default_value_t = quantum::TOL_PROJ)]
    pub tol_proj: f64,
    /// Slack allowed in numerical comparisons.
    #[arg(long, global = true, default_value_t = quantum::TOL_NUM)]
    pub tol_num: f64,
    /// Largest Hilbert space dimension.
    #[arg(long, global = true, default_value_t = 8)]
    pub max_dim: usize,
    /// Largest number of candidates any brute-force search may visit.
    #[arg(long, global = true, default_value_t = 1u128 << 24)]
    pub search_bound: u128,
    /// Number of random trials.
    #[arg(long, global = true, default_value_t = 100)]
    pub trials: usize,
    /// Write the report to this file instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

impl Default for GlobalOpts {
    fn default() -> Self {
        GlobalOpts {
            seed: 0,
            tol_proj: quantum::TOL_PROJ,
            tol_num: quantum::TOL_NUM,
            max_dim: 8,
            search_bound: 1 << 24,
            trials: 100,
            out: None,
            format: Format::Text,
        }
    }
}

/// `csg`: constraint-system games toolkit.
#[derive(Debug, Parser)]
#[command(name = "csg", version, about = "Constraint-system games: modeling, gadgets, transformations and values")]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TvfMode {
    Graph,
    Compress,
    Tableau,
    Simulate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GadgetKind {
    Basic,
    Prism,
    General,
    Zero,
    One,
    Negation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Pass {
    Booleanize,
    Subdivide,
    Oracularize,
    ReplaceEmpty,
    CvToTwoCsp,
    CcExpand,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EmptyMethod {
    Nontvf,
    Prism,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ValueModel {
    Classical,
    Cc,
    Cv,
    A,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GameChoice {
    Cc,
    Cv,
    #[value(name = "2cs")]
    TwoCs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Identities,
    Inequalities,
    Chom,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Schaefer classification of the constraint language of a file.
    Classify { file: PathBuf },
    /// TVF graph analysis of every constraint in a file.
    Tvf {
        #[arg(value_enum)]
        mode: TvfMode,
        file: PathBuf,
    },
    /// Builds and certifies a gadget from the constraints of a file.
    Gadget {
        #[arg(value_enum)]
        kind: GadgetKind,
        file: Option<PathBuf>,
    },
    /// Applies a reduction and checks that satisfiability is preserved.
    Transform {
        #[arg(value_enum)]
        pass: Pass,
        file: PathBuf,
        /// Replacement used by replace-empty.
        #[arg(long, value_enum)]
        method: Option<EmptyMethod>,
        /// File whose first constraint is the non-TVF witness for replace-empty
        /// or the anchor for cc-expand.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Classical values, defects of a supplied strategy, random sweeps and seesaw.
    Value {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = ValueModel::Classical)]
        model: ValueModel,
        /// Game for classical values; `2cs` for binary systems, `cc` otherwise.
        #[arg(long, value_enum)]
        game: Option<GameChoice>,
        /// Strategy file to evaluate.
        #[arg(long)]
        strategy: Option<PathBuf>,
        /// Dimension of random strategies.
        #[arg(long, default_value_t = 3)]
        dim: usize,
        /// Number of seesaw sweeps from a random strategy.
        #[arg(long)]
        seesaw: Option<usize>,
    },
    /// Numerical verification suites.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        /// Instance for the chom suite.
        file: Option<PathBuf>,
        /// Transform for the chom suite; all transforms when omitted.
        #[arg(long)]
        transform: Option<String>,
    },
}

// Reports

/// Tolerances recorded in a report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub proj: f64,
    pub num: f64,
}

/// One named pass/fail check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), pass, detail: detail.into() }
}

/// Deterministic report body.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub input_digest: String,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub outputs: Json,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(skip)]
    pub text: Vec<String>,
}

impl RunReport {
    fn new(command: String, inputs: &[Vec<u8>], opts: &GlobalOpts) -> Self {
        let mut h = Sha256::new();
        for i in inputs {
            h.update((i.len() as u64).to_le_bytes());
            h.update(i);
        }
        let digest = h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        RunReport {
            command,
            input_digest: digest,
            seed: opts.seed,
            tolerances: Tolerances { proj: opts.tol_proj, num: opts.tol_num },
            outputs: Json::Null,
            checks: Vec::new(),
            pass: true,
            text: Vec::new(),
        }
    }

    fn add(&mut self, c: Check) {
        self.pass &= c.pass;
        self.checks.push(c);
    }

    fn line(&mut self, s: impl Into<String>) {
        self.text.push(s.into());
    }

    /// The human-readable block.
    pub fn text_block(&self) -> String {
        let mut out = format!("command: {}\ninput digest: {}\nseed: {}\n", self.command, self.input_digest, self.seed);
        for l in &self.text {
            out.push_str(l);
            out.push('\n');
        }
        for c in &self.checks {
            let _ = writeln!(out, "[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let _ = writeln!(out, "result: {}", if self.pass { "PASS" } else { "FAIL" });
        out
    }

    /// The machine block: the deterministic body plus the wall time.
    pub fn machine_block(&self, wall_ms: u128) -> String {
        serde_json::to_string_pretty(&json!({ "report": self, "wall_time_ms": wall_ms })).expect("report serializes")
    }
}

/// Process exit code of an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SearchBoundExceeded { .. } => 3,
        Error::PreconditionViolated(_) | Error::PostconditionFailed(_) => 1,
        _ => 2,
    }
}

fn read(path: &Path) -> Result<(String, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Parse(format!("{}: not UTF-8", path.display())))?;
    Ok((text, bytes))
}

fn read_instance(path: &Path) -> Result<(ConstraintSystem, Vec<u8>)> {
    let (text, bytes) = read(path)?;
    let s = parse_instance(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok((s, bytes))
}

fn rat(r: &BigRational) -> Json {
    json!([r.numer().to_string(), r.denom().to_string()])
}

fn constraint_json(s: &ConstraintSystem, c: &Constraint) -> Json {
    json!({
        "context": c.context().iter().map(|&v| s.var_name(v)).collect::<Vec<_>>(),
        "accepted": c.accepted(),
    })
}

fn sat_check(name: &str, a: &ConstraintSystem, b: &ConstraintSystem, bound: u128) -> Result<Check> {
    let sa = a.is_satisfiable(bound)?.is_some();
    let sb = b.is_satisfiable(bound)?.is_some();
    Ok(check(name, sa == sb, format!("source satisfiable = {sa}, output satisfiable = {sb}")))
}

fn command_name(c: &Command) -> String {
    match c {
        Command::Classify { .. } => "classify".into(),
        Command::Tvf { mode, .. } => format!("tvf {}", value_name(*mode)),
        Command::Gadget { kind, .. } => format!("gadget {}", value_name(*kind)),
        Command::Transform { pass, .. } => format!("transform {}", value_name(*pass)),
        Command::Value { model, .. } => format!("value {}", value_name(*model)),
        Command::Verify { suite, .. } => format!("verify {}", value_name(*suite)),
    }
}

fn value_name<T: ValueEnum>(v: T) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

/// Runs a parsed command line and returns the report.
pub fn run(cli: &Cli) -> Result<RunReport> {
    let o = &cli.opts;
    let name = command_name(&cli.command);
    match &cli.command {
        Command::Classify { file } => {
            let (s, bytes) = read_instance(file)?;
            let mut r = RunReport::new(name, &[bytes], o);
            cmd_classify(&s, &mut r)?;
            Ok(r)
        }
        Command::Tvf { mode, file } => {
            let (s, bytes) = read_instance(file)?;
            let mut r = RunReport::new(name, &[bytes], o);
            cmd_tvf(&s, *mode, &mut r)?;
            Ok(r)
        }
        Command::Gadget { kind, file } => {
            let (s, bytes) = match file {
                Some(f) => {
                    let (s, b) = read_instance(f)?;
                    (Some(s), b)
                }
                None => (None, Vec::new()),
            };
            let mut r = RunReport::new(name, &[bytes], o);
            cmd_gadget(s.as_ref(), *kind, &mut r)?;
            Ok(r)
        }
        Command::Transform { pass, file, method, witness } => {
            let (s, bytes) = read_instance(file)?;
            let mut inputs = vec![bytes];
            let w = match witness {
                Some(p) => {
                    let (ws, wb) = read_instance(p)?;
                    inputs.push(wb);
                    Some(ws)
                }
                None => None,
            };
            let mut r = RunReport::new(name, &inputs, o);
            cmd_transform(&s, *pass, *method, w.as_ref(), o, &mut r)?;
            Ok(r)
        }
        Command::Value { file, model, game, strategy, dim, seesaw } => {
            let (s, bytes) = read_instance(file)?;
            let mut inputs = vec![bytes];
            let st = match strategy {
                Some(p) => {
                    let (text, b) = read(p)?;
                    inputs.push(b);
                    Some(parse_strategy(&text)?)
                }
                None => None,
            };
            let mut r = RunReport::new(name, &inputs, o);
            cmd_value(&s, *model, *game, st.as_ref(), *dim, *seesaw, o, &mut r)?;
            Ok(r)
        }
        Command::Verify { suite, file, transform } => {
            let (s, bytes) = match file {
                Some(f) => {
                    let (s, b) = read_instance(f)?;
                    (Some(s), b)
                }
                None => (None, Vec::new()),
            };
            let mut r = RunReport::new(name, &[bytes, transform.clone().unwrap_or_default().into_bytes()], o);
            cmd_verify(*suite, s.as_ref(), transform.as_deref(), o, &mut r)?;
            Ok(r)
        }
    }
}

/// Schaefer verdict with re-checked certificates.
pub fn cmd_classify(s: &ConstraintSystem, r: &mut RunReport) -> Result<()> {
    let gamma = s.constraints();
    if s.k() == 2 {
        let v = classify_boolean(gamma)?;
        let named = Polymorphism::boolean_named();
        let mut ok = true;
        for p in &v.preserving {
            let f = named.iter().find(|f| f.name() == p).expect("named polymorphism");
            for c in gamma {
                ok &= f.preserves(c)?.holds;
            }
        }
        for viol in &v.violations {
            let f = named.iter().find(|f| f.name() == viol.polymorphism).expect("named polymorphism");
            let c = &gamma[viol.constraint];
            let image = f.apply(&viol.counterexample.rows, c.arity())?;
            ok &= viol.counterexample.rows.iter().all(|t| c.contains(t)) && !c.contains(&image);
        }
        let verdict = match v.verdict {
            Complexity::P => "P",
            Complexity::NpComplete => "NP-complete",
        };
        r.line(format!("verdict: {verdict}"));
        r.line(format!("preserving polymorphisms: {}", v.preserving.join(", ")));
        r.add(check("certificates", ok, format!("{} preserving, {} violations re-checked", v.preserving.len(), v.violations.len())));
        r.outputs = json!({ "verdict": verdict, "certificate": v });
    } else {
        let w = has_wnu_homomorphism_smallarity(gamma, 3)?;
        let (verdict, ok) = match &w {
            WnuSearch::Found(f) => {
                let mut ok = true;
                for c in gamma {
                    ok &= f.preserves(c)?.holds;
                }
                ("P", ok)
            }
            WnuSearch::Inconclusive { .. } => ("inconclusive", true),
        };
        r.line(format!("verdict: {verdict}"));
        r.add(check("certificate", ok, "weak near-unanimity search up to arity 3"));
        r.outputs = json!({ "verdict": verdict, "search": w });
    }
    Ok(())
}

fn edge_list(s: &ConstraintSystem, e: &std::collections::BTreeSet<(usize, usize)>) -> Vec<[String; 2]> {
    e.iter().map(|&(u, v)| [s.var_name(u).to_string(), s.var_name(v).to_string()]).collect()
}

fn target_text(s: &ConstraintSystem, t: Target) -> String {
    match t {
        Target::Var(w) => s.var_name(w).to_string(),
        Target::Neg(w) => format!("!{}", s.var_name(w)),
        Target::Const(a) => a.to_string(),
    }
}

fn sorted(mut v: Vec<Tuple>) -> Vec<Tuple> {
    v.sort();
    v
}

/// TVF graph, compression, tableau, or 1-in-3 simulation of each constraint.
pub fn cmd_tvf(s: &ConstraintSystem, mode: TvfMode, r: &mut RunReport) -> Result<()> {
    if s.k() != 2 {
        return Err(Error::NegationOnNonBoolean(s.k()));
    }
    let mut outs = Vec::new();
    match mode {
        TvfMode::Graph => {
            for (i, c) in s.constraints().iter().enumerate() {
                let g = tvf::tvf_graph(c)?;
                let tvf = tvf::is_tvf(c);
                r.line(format!(
                    "constraint {i}: E00 {:?} E11 {:?} E01 {:?}",
                    edge_list(s, g.e00()),
                    edge_list(s, g.e11()),
                    edge_list(s, g.e01())
                ));
                let generated = sorted(g.assignments());
                let covers = c.accepted().iter().all(|t| generated.contains(t));
                r.add(check(format!("constraint {i} is TVF"), tvf && covers, format!("{} assignments generated", generated.len())));
                outs.push(json!({
                    "e00": edge_list(s, g.e00()),
                    "e11": edge_list(s, g.e11()),
                    "e01": edge_list(s, g.e01()),
                    "tvf": tvf,
                    "complete": g.is_complete(),
                }));
            }
        }
        TvfMode::Compress => {
            let mc = tvf::maximal_compression(s.constraints())?;
            for (i, ch) in mc.chains.iter().enumerate() {
                let res = ch.resolve();
                let resolved: BTreeMap<String, String> =
                    res.iter().map(|(&v, &t)| (s.var_name(v).to_string(), target_text(s, t))).collect();
                let mut ok = ch.original.restrict(ch.kept())? == ch.restricted
                    && ch.original.len() == ch.restricted.len()
                    && tvf::find_compression(&tvf::tvf_graph(&ch.restricted)?).is_none();
                for t in ch.original.accepted() {
                    let val = |v: usize| t[ch.original.position(v).expect("context")];
                    for (&v, &tg) in &res {
                        ok &= match tg {
                            Target::Const(a) => val(v) == a,
                            Target::Var(w) => val(v) == val(w),
                            Target::Neg(w) => val(v) != val(w),
                        };
                    }
                }
                r.line(format!("constraint {i}: kept {:?}, witnesses {resolved:?}", ch.kept().iter().map(|&v| s.var_name(v)).collect::<Vec<_>>()));
                r.add(check(format!("constraint {i} compression"), ok, format!("{} steps", ch.steps.len())));
                outs.push(json!({
                    "kept": ch.kept().iter().map(|&v| s.var_name(v)).collect::<Vec<_>>(),
                    "restricted": constraint_json(s, &ch.restricted),
                    "witnesses": resolved,
                }));
            }
            let aux: Vec<Json> = mc.aux.iter().map(|c| json!({ "arity": c.arity(), "accepted": c.accepted() })).collect();
            r.outputs = json!({ "constraints": outs, "aux": aux });
            return Ok(());
        }
        TvfMode::Tableau => {
            for (i, c) in s.constraints().iter().enumerate() {
                let ch = tvf::compress_constraint(c)?;
                let g = tvf::tvf_graph(&ch.restricted)?;
                if !g.is_complete() {
                    r.add(check(format!("constraint {i} tableau"), false, "the compressed TVF graph is not complete"));
                    outs.push(Json::Null);
                    continue;
                }
                let t = if g.e00().is_empty() { tvf::tableau_no00(&g)? } else { tvf::tableau_negated(&g)? };
                let want = sorted(g.negate_at(&t.negated).assignments());
                let ok = t.is_upper_triangular() && sorted(t.rows.clone()) == want;
                let names = |vs: &[usize]| vs.iter().map(|&v| s.var_name(v).to_string()).collect::<Vec<_>>();
                r.line(format!("constraint {i}: order {:?}, negated {:?}", names(&t.variable_order), names(&t.negated)));
                for row in &t.matrix {
                    r.line(format!("  {}", row.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ")));
                }
                r.add(check(format!("constraint {i} tableau"), ok, "upper triangular with rows equal to the assignments"));
                outs.push(json!({
                    "order": names(&t.variable_order),
                    "negated": names(&t.negated),
                    "matrix": t.matrix,
                }));
            }
        }
        TvfMode::Simulate => {
            let target_names = |v: usize| ["x", "y", "z", "z'"].get(v).map(|n| n.to_string()).unwrap_or_else(|| format!("t{v}"));
            for (i, c) in s.constraints().iter().enumerate() {
                if Polymorphism::maj().preserves(c)?.holds {
                    r.line(format!("constraint {i}: preserved by MAJ, no simulation"));
                    outs.push(json!({ "maj": true }));
                    continue;
                }
                let sim = tvf::simulate_one_in_three_neg(c)?;
                let push = sim.pushforward_xyz()?;
                let want = SimTarget::OneInThree.constraint();
                let ok = sim.verified && push.context() == want.context() && sorted(push.accepted().to_vec()) == sorted(want.accepted().to_vec());
                let map = serialize_varmap(&sim.map, &|v| s.var_name(v).to_string(), &target_names);
                r.line(format!("constraint {i}: case {}, map {map}", sim.case));
                r.add(check(format!("constraint {i} simulation"), ok, format!("pushforward {:?}", push.accepted())));
                outs.push(json!({ "case": sim.case, "map": map, "verified": sim.verified }));
            }
        }
    }
    r.outputs = json!({ "constraints": outs });
    Ok(())
}

fn gadget_json(g: &GadgetOutput, ext: &[gadgets::Extension]) -> Json {
    json!({
        "cs": instance_json(&g.cs),
        "distinguished": g.distinguished_names(),
        "claimed_constant": rat(&g.claimed_constant),
        "constant_note": g.constant_note,
        "provenance": g.provenance,
        "extensions": ext,
    })
}

fn need(s: Option<&ConstraintSystem>, n: usize) -> Result<&[Constraint]> {
    let s = s.ok_or_else(|| Error::Invalid("this gadget needs an instance file".into()))?;
    if s.constraints().len() < n {
        return Err(Error::Invalid(format!("this gadget needs {n} constraints")));
    }
    Ok(s.constraints())
}

/// Builds and certifies a gadget.
pub fn cmd_gadget(s: Option<&ConstraintSystem>, kind: GadgetKind, r: &mut RunReport) -> Result<()> {
    let g = match kind {
        GadgetKind::Basic => gadgets::basic_gadget(&need(s, 1)?[0], None)?,
        GadgetKind::Prism => gadgets::prism_gadget()?,
        GadgetKind::General => {
            let gamma = need(s, 1)?;
            let v = classify_boolean(gamma)?;
            if v.verdict == Complexity::P {
                r.line(format!("refused: the language is in P (preserved by {})", v.preserving.join(", ")));
                r.add(check("language is NP-complete", false, "the general gadget needs an NP-complete language"));
                r.outputs = json!({ "verdict": "P", "certificate": v });
                return Ok(());
            }
            let (g, branch) = gadgets::general_commutativity_gadget_traced(gamma)?;
            r.line(format!("branch: {branch:?}"));
            g
        }
        GadgetKind::Zero => gadgets::zero_gadget(&need(s, 1)?[0])?,
        GadgetKind::One => {
            let c = need(s, 2)?;
            gadgets::one_gadget(&c[0], &c[1])?
        }
        GadgetKind::Negation => {
            let c = need(s, 2)?;
            gadgets::negation_gadget(&c[0], &c[1])?
        }
    };
    let origins = g.check_origins();
    r.add(check("origins", origins.is_ok(), origins.err().map(|e| e.to_string()).unwrap_or_else(|| "every constraint is a recorded pushforward".into())));
    let expected: Option<Vec<Tuple>> = match kind {
        GadgetKind::Zero => Some(vec![vec![0]]),
        GadgetKind::One => Some(vec![vec![1]]),
        GadgetKind::Negation => Some(vec![vec![0, 1], vec![1, 0]]),
        _ => None,
    };
    let certified = match &expected {
        Some(want) => g.certify_exact(want),
        None => g.certify(),
    };
    let ext = match certified {
        Ok(ext) => {
            r.add(check("completeness", true, format!("{} extension witnesses", ext.len())));
            ext
        }
        Err(e) => {
            r.add(check("completeness", false, e.to_string()));
            g.extensions()
        }
    };
    r.line(format!(
        "{}: {} variables, {} constraints, distinguished {:?}, constant {}",
        g.provenance,
        g.cs.num_variables(),
        g.cs.constraints().len(),
        g.distinguished_names(),
        g.claimed_constant
    ));
    for e in &ext {
        r.line(format!("  {:?} -> {:?}", e.values, e.witness));
    }
    r.outputs = gadget_json(&g, &ext);
    Ok(())
}

fn diagonal_pairs(s: &ConstraintSystem) -> Result<Distribution<(usize, usize)>> {
    match s.distribution() {
        Some(QuestionDistribution::Pairs(p)) => Ok(p.clone()),
        _ => Distribution::new(s.constraint_distribution()?.iter().map(|(&i, w)| ((i, i), w.clone()))),
    }
}

fn pair_rows(p: &Distribution<(usize, usize)>) -> Vec<Json> {
    p.iter().map(|(&(i, j), w)| json!([i, j, w.numer().to_string(), w.denom().to_string()])).collect()
}

fn reduction_json(red: &Reduction) -> Json {
    json!({
        "cs": instance_json(&red.cs),
        "claimed_constant": red.claimed_constant.as_ref().map(rat),
        "provenance": red.provenance,
        "pair_distribution": red.pair_distribution.as_ref().map(pair_rows),
    })
}

/// Applies a reduction and compares satisfiability on both sides.
pub fn cmd_transform(
    s: &ConstraintSystem,
    pass: Pass,
    method: Option<EmptyMethod>,
    witness: Option<&ConstraintSystem>,
    o: &GlobalOpts,
    r: &mut RunReport,
) -> Result<()> {
    let bound = o.search_bound;
    match pass {
        Pass::Booleanize => {
            let b = s.boolean_form();
            r.add(sat_check("satisfiability preserved", s, &b, bound)?);
            r.line(format!("B(S): {} variables, {} constraints", b.num_variables(), b.constraints().len()));
            r.outputs = json!({ "cs": instance_json(&b) });
        }
        Pass::Subdivide => {
            let dec = s.constraints().iter().map(gadgets::pairwise_decomposition).collect::<Result<Vec<_>>>()?;
            let red = gadgets::subdivide(s, &dec, &diagonal_pairs(s)?)?;
            r.add(sat_check("satisfiability preserved", s, &red.cs, bound)?);
            r.line(format!("{} clauses", red.cs.constraints().len()));
            r.outputs = reduction_json(&red);
        }
        Pass::Oracularize => {
            let g = cc_game(s, &quantum::pairs_of(s)?)?;
            let orac = gadgets::oracularize(&g)?;
            let total: BigRational = orac.distribution.iter().map(|(_, w)| w.clone()).sum();
            r.add(check("distribution sums to one", total.is_one(), format!("total {total}")));
            let perfect = gadgets::has_perfect_synchronous_assignment(&g, bound)?;
            let sat = orac.cs.is_satisfiable(bound)?.is_some();
            r.add(check(
                "perfect strategies preserved",
                perfect == sat,
                format!("game has perfect synchronous assignment = {perfect}, oracularized system satisfiable = {sat}"),
            ));
            r.line(format!("{} constraints, {} pair questions", orac.cs.constraints().len(), orac.pairs.len()));
            r.outputs = json!({
                "cs": instance_json(&orac.cs),
                "pairs": orac.pairs,
                "distribution": pair_rows(&orac.distribution),
            });
        }
        Pass::ReplaceEmpty => {
            let method = method.unwrap_or(if s.k() == 3 { EmptyMethod::Prism } else { EmptyMethod::Nontvf });
            let red = match method {
                EmptyMethod::Prism => gadgets::replace_empty_3col(s)?,
                EmptyMethod::Nontvf => {
                    let w = match witness {
                        Some(ws) => ws.constraints().first().cloned().ok_or_else(|| Error::Invalid("witness file has no constraint".into()))?,
                        None => quantum::parity_constraint(),
                    };
                    let ctx = w.context();
                    let (u, v) = ctx
                        .iter()
                        .enumerate()
                        .flat_map(|(p, &u)| ctx[p + 1..].iter().map(move |&v| (u, v)))
                        .find(|&(u, v)| w.restrict(&[u, v]).is_ok_and(|c| c.is_full()))
                        .ok_or_else(|| Error::PreconditionViolated("the witness has no pair taking every value".into()))?;
                    gadgets::replace_empty_nontvf(s, &w, u, v)?
                }
            };
            r.add(sat_check("satisfiability preserved", s, &red.cs, bound)?);
            r.outputs = reduction_json(&red);
        }
        Pass::CvToTwoCsp => {
            let red = gadgets::cv_to_2csp(s)?;
            r.add(sat_check("satisfiability preserved", s, &red.cs, bound)?);
            r.outputs = reduction_json(&red);
        }
        Pass::CcExpand => {
            let pool = witness.map(|w| w.constraints()).unwrap_or(s.constraints());
            let (anchor, v) = pool
                .iter()
                .find_map(|c| gadgets::find_free_variable(c).map(|v| (c.clone(), v)))
                .ok_or_else(|| Error::PreconditionViolated("no anchor constraint has a free variable".into()))?;
            let red = gadgets::cc_expand(s, &anchor, v)?;
            r.add(sat_check("satisfiability preserved", s, &red.cs, bound)?);
            r.outputs = reduction_json(&red);
        }
    }
    Ok(())
}

fn quantum_game(s: &ConstraintSystem, model: Model) -> Result<GameSpec> {
    match model {
        Model::Cc => cc_game(s, &quantum::pairs_of(s)?),
        Model::Cv => cv_game(s, &s.constraint_distribution()?),
        Model::A => twocs_game(s, &s.constraint_distribution()?),
    }
}

fn defect_for(st: &SyncStrategy, s: &ConstraintSystem) -> Result<quantum::DefectReport> {
    match st.model {
        Model::Cc => quantum::defect_cc(st, s, &quantum::pairs_of(s)?),
        _ => quantum::defect(st, s),
    }
}

/// Classical values and quantum strategy evaluation.
#[allow(clippy::too_many_arguments)]
pub fn cmd_value(
    s: &ConstraintSystem,
    model: ValueModel,
    game: Option<GameChoice>,
    strategy: Option<&SyncStrategy>,
    dim: usize,
    seesaw: Option<usize>,
    o: &GlobalOpts,
    r: &mut RunReport,
) -> Result<()> {
    let model = match model {
        ValueModel::Classical => {
            let binary = s.constraints().iter().all(|c| c.arity() == 2);
            let game = game.unwrap_or(if binary { GameChoice::TwoCs } else { GameChoice::Cc });
            let g = match game {
                GameChoice::Cc => cc_game(s, &quantum::pairs_of(s)?)?,
                GameChoice::Cv => cv_game(s, &s.constraint_distribution()?)?,
                GameChoice::TwoCs => twocs_game(s, &s.constraint_distribution()?)?,
            };
            let v = classical_value(&g, o.search_bound)?;
            r.line(format!("game: {}", value_name(game)));
            if let Some(sv) = &v.synchronous_value {
                r.line(format!("synchronous classical value: {sv}"));
            }
            r.line(format!("classical value: {}", v.value));
            r.outputs = json!({
                "game": value_name(game),
                "value": rat(&v.value),
                "synchronous_value": v.synchronous_value.as_ref().map(rat),
                "alice": v.alice,
                "bob": v.bob,
                "synchronous_strategy": v.synchronous_strategy,
            });
            return Ok(());
        }
        ValueModel::Cc => Model::Cc,
        ValueModel::Cv => Model::Cv,
        ValueModel::A => Model::A,
    };
    if let Some(st) = strategy {
        if st.model != model {
            return Err(Error::Invalid(format!("strategy file has model {}, requested {model}", st.model)));
        }
        if st.d > o.max_dim {
            return Err(Error::SearchBoundExceeded { needed: st.d as u128, bound: o.max_dim as u128 });
        }
        let diag = st.validate(s, o.tol_proj)?;
        r.add(check("strategy is projective", true, format!("max residual {:.3e}", diag.max_residual)));
        let rep = defect_for(st, s)?;
        if let Some(v) = rep.value {
            let gap = (v + rep.defect - 1.0).abs();
            r.add(check("value + defect = 1", gap <= o.tol_num, format!("|value + defect - 1| = {gap:.3e}")));
        }
        r.line(format!("value {:?}, defect {:.6e}", rep.value, rep.defect));
        r.outputs = serde_json::to_value(&rep).expect("defect report serializes");
        return Ok(());
    }
    if dim > o.max_dim {
        return Err(Error::SearchBoundExceeded { needed: dim as u128, bound: o.max_dim as u128 });
    }
    if let Some(iters) = seesaw {
        let g = quantum_game(s, model)?;
        let st = quantum::random_strategy(model, s, dim, o.seed)?;
        let res = quantum::seesaw(&st, &g, iters)?;
        let monotone = res.values.windows(2).all(|w| w[1] >= w[0]);
        r.add(check("seesaw values are monotone", monotone, format!("{} sweeps", iters)));
        r.line(format!("values: {:?}", res.values));
        r.outputs = json!({ "values": res.values, "strategy": serde_json::from_str::<Json>(&serialize_strategy(&res.strategy)).expect("json") });
        return Ok(());
    }
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for t in 0..o.trials {
        let st = quantum::random_strategy(model, s, dim, o.seed.wrapping_add(t as u64))?;
        let rep = defect_for(&st, s)?;
        if let Some(v) = rep.value {
            worst = worst.max((v + rep.defect - 1.0).abs());
        }
        rows.push(json!({ "seed": o.seed.wrapping_add(t as u64), "value": rep.value, "defect": rep.defect }));
    }
    r.add(check("value + defect = 1", worst <= o.tol_num, format!("worst gap {worst:.3e} over {} strategies", o.trials)));
    r.outputs = json!({ "dimension": dim, "trials": rows });
    Ok(())
}

/// Identity, inequality and pullback verification suites.
pub fn cmd_verify(
    suite: Suite,
    s: Option<&ConstraintSystem>,
    transform: Option<&str>,
    o: &GlobalOpts,
    r: &mut RunReport,
) -> Result<()> {
    match suite {
        Suite::Identities => {
            let res = quantum::identity_suite(o.trials, o.seed, o.max_dim.clamp(2, 8));
            let worst = res.iter().map(|&(_, x)| x).fold(0.0, f64::max);
            r.add(check("3-clique identity", worst <= 1e-9, format!("worst residual {worst:.3e} over {} triples", res.len())));
            r.outputs = json!({ "residuals": res });
        }
        Suite::Inequalities => {
            let fams = quantum::inequality_suite(o.trials, o.seed, o.max_dim.clamp(1, 6), o.tol_num)?;
            for f in &fams {
                r.add(check(
                    f.name.clone(),
                    f.pass(),
                    format!("constant {}, worst slack {:.3e}, worst ratio {:.3}", f.constant, f.worst_slack, f.worst_ratio),
                ));
            }
            r.outputs = serde_json::to_value(&fams).expect("families serialize");
        }
        Suite::Chom => {
            let ts: Vec<Transform> = match transform {
                Some(t) => vec![t.parse()?],
                None => Transform::ALL.to_vec(),
            };
            let mut outs = BTreeMap::new();
            for t in ts {
                let checks = quantum::chom_suite(t, s, o.trials, o.seed, o.max_dim.max(1), o.tol_num)?;
                let fails = checks.iter().filter(|c| !c.pass).count();
                let exact = checks.iter().all(|c| c.exact != Some(false));
                r.add(check(
                    t.name(),
                    fails == 0 && exact,
                    format!(
                        "{} strategies, {fails} failures, constant {}{}",
                        checks.len(),
                        checks.first().map(|c| c.constant).unwrap_or(0.0),
                        if t == Transform::BooleanForm { format!(", exact = {exact}") } else { String::new() }
                    ),
                ));
                outs.insert(t.name().to_string(), serde_json::to_value(&checks).expect("checks serialize"));
            }
            r.outputs = serde_json::to_value(outs).expect("map serializes");
        }
    }
    Ok(())
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp-write");
    std::fs::write(&tmp, contents).map_err(|e| Error::Invalid(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

/// Entry point of the binary: parses arguments, runs, prints, and returns
/// the exit code.
pub fn main_with_args(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let start = Instant::now();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let wall = start.elapsed().as_millis();
    let body = match cli.opts.format {
        Format::Json => report.machine_block(wall),
        Format::Text => format!("{}\n{}\n", report.text_block(), report.machine_block(wall)),
    };
    match &cli.opts.out {
        Some(p) => {
            if let Err(e) = write_atomic(p, &body) {
                eprintln!("error: {e}");
                return 2;
            }
            println!("{}", report.text_block().trim_end());
        }
        None => print!("{body}"),
    }
    if report.pass {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE3: &str = r#"{"k": 2, "variables": ["x", "y", "z"],
        "constraints": [{"context": ["x", "y", "z"], "accepted": [[1,0,0],[0,1,0],[0,0,1]]}]}"#;

    fn report(cmd: &str) -> RunReport {
        RunReport::new(cmd.into(), &[], &GlobalOpts::default())
    }

    #[test]
    fn instance_round_trip() {
        let s = parse_instance(ONE3).unwrap();
        assert_eq!(parse_instance(&serialize_instance(&s)).unwrap(), s);
        let with = r#"{"k": 3, "variables": ["a", "b"], "constraints": [
            {"context": ["a", "b"], "accepted": [[0,1],[1,2]]},
            {"context": ["b", "a"], "accepted": [[0,0]]}],
            "distribution": {"kind": "explicit", "weights": [["0","1","1","3"],[1, 0, 2, 3]]}}"#;
        let s = parse_instance(with).unwrap();
        assert!(matches!(s.distribution(), Some(QuestionDistribution::Pairs(_))));
        assert_eq!(parse_instance(&serialize_instance(&s)).unwrap(), s);
    }

    #[test]
    fn parse_errors_are_positional() {
        let bad = "{\"k\": 2, \"variables\": [\"x\", \"y\"],\n \"constraints\": [{\"context\": [\"x\", \"y\"], \"accepted\": [[1,0,0]]}]}";
        let e = parse_instance(bad).unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        assert!(e.contains("length 3"), "{e}");
        let unknown = r#"{"k": 2, "variables": [], "constraints": [], "extra": 1}"#;
        assert!(parse_instance(unknown).unwrap_err().to_string().contains("column"));
    }

    #[test]
    fn classify_one3_and_neq() {
        let mut r = report("classify");
        cmd_classify(&parse_instance(ONE3).unwrap(), &mut r).unwrap();
        assert_eq!(r.outputs["verdict"], "NP-complete");
        assert!(r.pass);
        let neq = r#"{"k": 2, "variables": ["x", "y"], "constraints": [{"context": ["x", "y"], "accepted": [[0,1],[1,0]]}]}"#;
        let mut r = report("classify");
        cmd_classify(&parse_instance(neq).unwrap(), &mut r).unwrap();
        assert_eq!(r.outputs["verdict"], "P");
    }

    #[test]
    fn tvf_graph_lists_three_e11_edges() {
        let mut r = report("tvf graph");
        cmd_tvf(&parse_instance(ONE3).unwrap(), TvfMode::Graph, &mut r).unwrap();
        assert_eq!(r.outputs["constraints"][0]["e11"].as_array().unwrap().len(), 3);
        assert!(r.pass);
    }

    #[test]
    fn general_gadget_refuses_p_languages() {
        let eq = r#"{"k": 2, "variables": ["x", "y"], "constraints": [{"context": ["x", "y"], "accepted": [[0,0],[1,1]]}]}"#;
        let mut r = report("gadget general");
        cmd_gadget(Some(&parse_instance(eq).unwrap()), GadgetKind::General, &mut r).unwrap();
        assert!(!r.pass);
        assert_eq!(r.outputs["verdict"], "P");
    }

    #[test]
    fn zero_gadget_is_certified_against_its_forced_value() {
        let mut r = report("gadget zero");
        cmd_gadget(Some(&parse_instance(ONE3).unwrap()), GadgetKind::Zero, &mut r).unwrap();
        assert!(r.pass, "{:?}", r.checks);
    }

    #[test]
    fn strategy_round_trip_is_exact() {
        let s = parse_instance(ONE3).unwrap();
        let st = quantum::random_strategy(Model::Cv, &s, 3, 4).unwrap();
        assert_eq!(parse_strategy(&serialize_strategy(&st)).unwrap(), st);
    }

    #[test]
    fn varmap_round_trip() {
        let r = VarMap::new(vec![0, 1, 2], vec![Target::Var(0), Target::Neg(1), Target::Const(1)]).unwrap();
        let names = ["a", "b", "c"];
        let j = serialize_varmap(&r, &|v| names[v].to_string(), &|v| names[v].to_string());
        assert_eq!(j["map"]["b"], "!b");
        let look = |n: &str| names.iter().position(|&m| m == n);
        assert_eq!(parse_varmap(&j.to_string(), &look, &look).unwrap(), r);
    }

    #[test]
    fn reports_are_deterministic() {
        let s = parse_instance(ONE3).unwrap();
        let run = || {
            let mut r = RunReport::new("value cv".into(), &[ONE3.as_bytes().to_vec()], &GlobalOpts { trials: 3, ..GlobalOpts::default() });
            cmd_value(&s, ValueModel::Cv, None, None, 2, None, &GlobalOpts { trials: 3, ..GlobalOpts::default() }, &mut r).unwrap();
            serde_json::to_string(&r).unwrap()
        };
        assert_eq!(run(), run());
    }
}

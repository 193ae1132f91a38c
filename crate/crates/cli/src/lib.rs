//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the exit code together with the JSON report.
//!
//! Exit codes: 0 accept/success, 1 reject/failed check, 2 inconclusive,
//! 3 usage or input error.

pub mod formats;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use hofa_core::algebra::{EmbeddingEnsemble, FieldVec, Space, TorusValue};
use hofa_core::analysis::{gowers_norm, FunctionTable, GowersMode, Norm, TableKind, TableValues};
use hofa_core::factors::{
    atom_distribution_report, embedding_stability_report, factor_rank_search, rank_d_search, validate_decomposition,
    ClauseStatus, DecompositionBounds, PolyFactor,
};
use hofa_core::forms::{dependency_set, enumerate_consistent, equidistribution_report, LinearForm, Sampling};
use hofa_core::instances::{
    instance_distribution, low_degree_family, perturbation_trial, restriction_distribution, small_perturbation_drive,
    tv_distance, DriveConfig, RegularityInstance, RestrictionDistribution, SurrogateConfig,
};
use hofa_core::polynomials::{interpolate_with_shift, NcPolynomial};
use hofa_core::testers::{classical_degree_tester, family_tester, instance_tester, InstanceTest, QueryOracle};
use hofa_core::{Budget, Error};

use report::real;

#[derive(Parser, Debug)]
#[command(name = "hofa", version, about = "Higher-order Fourier analysis toolkit over small prime fields")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Cap on every exponential enumeration, in work units.
    #[arg(long, global = true, default_value_t = Budget::WORK.limit())]
    budget: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Add wall-clock timing to the report.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum GowersModeArg {
    Exact,
    MonteCarlo,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum EnsembleArg {
    Exact,
    #[value(alias = "sampled")]
    Empirical,
}

#[derive(Args, Debug, Clone)]
struct PolyArgs {
    #[arg(long)]
    p: u32,
    #[arg(long)]
    n: usize,
    /// Polynomial in text form, e.g. "1 * x1^1*x2^1 / 2"; repeatable.
    #[arg(long = "poly")]
    polys: Vec<String>,
}

impl PolyArgs {
    fn polys(&self) -> Result<Vec<NcPolynomial>, Error> {
        self.polys.iter().map(|s| NcPolynomial::parse(self.p, self.n, s)).collect()
    }

    fn factor(&self) -> Result<PolyFactor, Error> {
        PolyFactor::new(self.p, self.n, self.polys()?)
    }
}

#[derive(Args, Debug, Clone)]
struct FormArgs {
    /// Linear form as comma-separated coefficients; repeatable.
    #[arg(long = "form", required = true)]
    forms: Vec<String>,
    /// Variables per copy on which dependency identities are verified.
    #[arg(long, default_value_t = 2)]
    n_check: usize,
}

impl FormArgs {
    fn forms(&self, p: u32) -> Result<Vec<LinearForm>, Error> {
        self.forms.iter().map(|s| LinearForm::new(p, formats::parse_list(s)?)).collect()
    }
}

#[derive(Args, Debug, Clone)]
struct SurrogateArgs {
    /// Perturbation rate used by the closeness drive.
    #[arg(long, default_value_t = 0.1)]
    drive_delta: f64,
    #[arg(long, default_value_t = 40)]
    max_rounds: u32,
    #[arg(long, default_value_t = 400)]
    max_samples: u64,
    /// Witnesses handed to the drive, smallest residual first.
    #[arg(long, default_value_t = 4)]
    top_k: usize,
}

impl SurrogateArgs {
    fn config(&self, seed: u64) -> SurrogateConfig {
        SurrogateConfig {
            delta: self.drive_delta,
            max_rounds: self.max_rounds,
            max_samples: self.max_samples,
            top_k: self.top_k,
            seed,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Gowers norm of a function table.
    Gowers {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        order: u32,
        #[arg(long, value_enum, default_value = "exact")]
        mode: GowersModeArg,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// L1, L2 and sup norms and the mean.
    Norms {
        #[arg(long = "fn")]
        function: PathBuf,
    },
    /// Evaluates a polynomial at a point or on the whole space.
    PolyEval {
        #[command(flatten)]
        poly: PolyArgs,
        /// Comma-separated coordinates; omitted means the full table.
        #[arg(long)]
        point: Option<String>,
    },
    /// Canonical form of a torus (or boolean) table.
    PolyFit {
        #[arg(long = "fn")]
        function: PathBuf,
    },
    /// Atom sizes of a polynomial factor.
    Atoms {
        #[command(flatten)]
        poly: PolyArgs,
    },
    /// `rank_d` of one polynomial, or the rank of a factor.
    Rank {
        #[command(flatten)]
        poly: PolyArgs,
        /// Rank of a single polynomial with respect to this degree.
        #[arg(long)]
        degree: Option<u32>,
        #[arg(long, default_value_t = 3)]
        r_max: u32,
    },
    /// `(d, h)`-dependency set of linear forms.
    Depset {
        #[arg(long)]
        p: u32,
        #[command(flatten)]
        forms: FormArgs,
        #[arg(long)]
        degree: u32,
        #[arg(long)]
        depth: u32,
    },
    /// Consistent atom assignments for linear forms.
    Consistent {
        #[arg(long)]
        p: u32,
        #[command(flatten)]
        forms: FormArgs,
        #[arg(long)]
        degrees: String,
        #[arg(long)]
        depths: String,
        /// Assignments listed in the report at most.
        #[arg(long, default_value_t = 4096)]
        list_limit: usize,
    },
    /// Joint atom distribution along linear forms versus the prediction.
    Equidist {
        #[command(flatten)]
        poly: PolyArgs,
        #[command(flatten)]
        forms: FormArgs,
        #[arg(long, value_enum, default_value = "exact")]
        mode: EnsembleArg,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
    },
    /// Restriction distribution of a table.
    Mu {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value = "exact")]
        mode: EnsembleArg,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// Restriction distribution of a regularity-instance.
    MuInstance {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        n_check: usize,
    },
    /// Total variation between two restriction distributions.
    Tv {
        /// `fn:<path>` or `instance:<path>`.
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value = "exact")]
        mode: EnsembleArg,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 2)]
        n_check: usize,
    },
    /// Two-coin perturbation toward a target table, optionally iterated.
    Perturb {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 2)]
        order: u32,
        /// Iterate contraction rounds until the goal norm.
        #[arg(long)]
        drive: bool,
        #[arg(long, default_value_t = 0.0)]
        gamma_goal: f64,
        #[arg(long, default_value_t = 50)]
        max_rounds: u32,
        #[arg(long, default_value_t = 1000)]
        max_samples: u64,
        /// Writes the perturbed table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classical low-degree test.
    TestDegree {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        degree: u32,
        #[arg(long, default_value_t = 100)]
        reps: u64,
        #[arg(long)]
        cap: Option<u64>,
    },
    /// Restricted closeness test against one regularity-instance.
    TestInstance {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[arg(long)]
        cap: Option<u64>,
        #[command(flatten)]
        surrogate: SurrogateArgs,
    },
    /// Tester for a family of regularity-instances.
    TestFamily {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long = "instance")]
        instances: Vec<PathBuf>,
        /// Use the low-degree family `I_0, …, I_k` instead of files.
        #[arg(long)]
        low_degree: Option<u32>,
        #[arg(long, default_value_t = 0.05)]
        gamma: f64,
        #[arg(long)]
        degree_bound: Option<u32>,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        reps: Option<u64>,
        #[arg(long)]
        cap: Option<u64>,
        #[command(flatten)]
        surrogate: SurrogateArgs,
    },
    /// Checks every clause of a decomposition `f = f1 + f2 + f3`.
    ValidateDecomp {
        #[arg(long = "fn")]
        function: PathBuf,
        #[arg(long)]
        f1: PathBuf,
        #[arg(long)]
        f2: PathBuf,
        #[arg(long)]
        f3: PathBuf,
        #[command(flatten)]
        poly: PolyArgs,
        #[arg(long)]
        degree: u32,
        #[arg(long)]
        zeta: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        rank_required: u32,
        #[arg(long, default_value_t = 2)]
        r_max: u32,
    },
    /// Degree, depth and rank drops of a factor under random embeddings.
    ReportEmbeddingStability {
        #[command(flatten)]
        poly: PolyArgs,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum, default_value = "exact")]
        mode: EnsembleArg,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 2)]
        r_max: u32,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gowers { .. } => "gowers",
            Command::Norms { .. } => "norms",
            Command::PolyEval { .. } => "poly-eval",
            Command::PolyFit { .. } => "poly-fit",
            Command::Atoms { .. } => "atoms",
            Command::Rank { .. } => "rank",
            Command::Depset { .. } => "depset",
            Command::Consistent { .. } => "consistent",
            Command::Equidist { .. } => "equidist",
            Command::Mu { .. } => "mu",
            Command::MuInstance { .. } => "mu-instance",
            Command::Tv { .. } => "tv",
            Command::Perturb { .. } => "perturb",
            Command::TestDegree { .. } => "test-degree",
            Command::TestInstance { .. } => "test-instance",
            Command::TestFamily { .. } => "test-family",
            Command::ValidateDecomp { .. } => "validate-decomp",
            Command::ReportEmbeddingStability { .. } => "report-embedding-stability",
        }
    }
}

/// Reads input files and records their digest.
struct Inputs {
    hasher: Sha256,
}

impl Inputs {
    fn new() -> Self {
        Inputs { hasher: Sha256::new() }
    }

    fn text(&mut self, path: &Path) -> Result<String, Error> {
        let bytes = std::fs::read(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(&bytes);
        String::from_utf8(bytes).map_err(|_| Error::Parse(format!("{}: not UTF-8", path.display())))
    }

    fn function(&mut self, path: &Path) -> Result<FunctionTable, Error> {
        formats::read_function(&self.text(path)?)
    }

    fn instance(&mut self, path: &Path) -> Result<RegularityInstance, Error> {
        formats::parse_instance(&self.text(path)?)
    }

    fn digest(self) -> String {
        hex::encode(self.hasher.finalize())
    }
}

/// Result of one subcommand: exit code and the `results` object.
type Outcome = (i32, Value);

/// Runs the CLI; `argv[0]` is the program name.
pub fn run<S: AsRef<str>>(argv: &[S]) -> (i32, String) {
    let args: Vec<String> = argv.iter().map(|s| s.as_ref().to_string()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            return (code, e.to_string());
        }
    };
    let start = Instant::now();
    let mut inputs = Inputs::new();
    let g = cli.global.clone();
    let budget = Budget(g.budget);
    let execute = |inputs: &mut Inputs| execute(&cli.command, g.seed, budget, inputs);
    let outcome = match g.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
            Ok(pool) => pool.install(|| execute(&mut inputs)),
            Err(e) => Err(Error::Precondition(format!("thread pool: {e}"))),
        },
        None => execute(&mut inputs),
    };
    let (code, body) = match outcome {
        Ok((code, results)) => (code, json!({"results": results})),
        Err(e) => (3, json!({"error": error_json(&e)})),
    };
    let mut doc = report::object(vec![
        ("command", Value::String(cli.command.name().into())),
        ("argv", json!(echoed_args(args.get(1..).unwrap_or_default()))),
        ("seed", json!(g.seed)),
        ("budget", json!(g.budget)),
        ("inputs_digest", Value::String(inputs.digest())),
    ]);
    let map = doc.as_object_mut().expect("object");
    for (k, v) in body.as_object().expect("object") {
        map.insert(k.clone(), v.clone());
    }
    map.insert("exit_code".into(), json!(code));
    map.insert(
        "timing".into(),
        if g.timing { json!({"elapsed_ms": real(start.elapsed().as_secs_f64() * 1e3)}) } else { Value::Null },
    );
    let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
    out.push('\n');
    (code, out)
}

/// The arguments minus `--threads`, which must not change the report.
fn echoed_args(args: &[String]) -> Vec<&str> {
    let mut out = Vec::with_capacity(args.len());
    let mut skip = false;
    for a in args {
        if std::mem::take(&mut skip) {
            continue;
        }
        if a == "--threads" {
            skip = true;
        } else if !a.starts_with("--threads=") {
            out.push(a.as_str());
        }
    }
    out
}

fn error_json(e: &Error) -> Value {
    let kind = match e {
        Error::UnsupportedPrime(_) => "unsupported_prime",
        Error::BudgetExceeded { .. } => "budget_exceeded",
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::ModulusMismatch { .. } => "modulus_mismatch",
        Error::OutOfRange(_) => "out_of_range",
        Error::Precondition(_) => "precondition",
        Error::NonzeroShift(_) => "nonzero_shift",
        Error::UnsupportedKind(_) => "unsupported_kind",
        Error::QueryCapExceeded { .. } => "query_cap_exceeded",
        Error::Parse(_) => "parse",
    };
    let mut v = json!({"kind": kind, "message": e.to_string()});
    if let Error::BudgetExceeded { required, limit, .. } = e {
        v["required"] = report::big(*required);
        v["limit"] = json!(limit);
    }
    v
}

fn ensemble(mode: EnsembleArg, trials: u64, seed: u64) -> EmbeddingEnsemble {
    match mode {
        EnsembleArg::Exact => EmbeddingEnsemble::Exact,
        EnsembleArg::Empirical => EmbeddingEnsemble::Sampled { trials, seed },
    }
}

fn source_distribution(
    source: &str,
    m: usize,
    ens: EmbeddingEnsemble,
    n_check: usize,
    inputs: &mut Inputs,
    budget: Budget,
) -> Result<RestrictionDistribution, Error> {
    match source.split_once(':') {
        Some(("fn", path)) => restriction_distribution(&inputs.function(Path::new(path))?, m, ens, budget),
        Some(("instance", path)) => instance_distribution(&inputs.instance(Path::new(path))?, m, n_check, budget),
        _ => Err(Error::Parse(format!("source {source:?} must be fn:<path> or instance:<path>"))),
    }
}

/// Torus view of a table for the polynomial-facing commands.
fn torus_table(f: &FunctionTable) -> Result<Vec<TorusValue>, Error> {
    match (f.kind(), f.values()) {
        (TableKind::Torus, TableValues::Torus(v)) => Ok(v.clone()),
        (TableKind::Boolean, TableValues::Real(v)) => Ok(v.iter().map(|&b| hofa_core::algebra::iota(f.p(), b as u32)).collect()),
        _ => Err(Error::UnsupportedKind(format!("expected a torus or boolean table, got {}", f.kind()))),
    }
}

fn execute(cmd: &Command, seed: u64, budget: Budget, inputs: &mut Inputs) -> Result<Outcome, Error> {
    match cmd {
        Command::Gowers { function, order, mode, samples } => {
            let f = inputs.function(function)?;
            let mode = match mode {
                GowersModeArg::Exact => GowersMode::Exact,
                GowersModeArg::MonteCarlo => GowersMode::MonteCarlo { samples: *samples, seed },
            };
            Ok((0, report::gowers(&gowers_norm(&f, *order, mode, budget)?)))
        }
        Command::Norms { function } => {
            let f = inputs.function(function)?;
            Ok((
                0,
                json!({
                    "kind": f.kind().as_str(),
                    "l1": real(f.norm(Norm::L1)?),
                    "l2": real(f.norm(Norm::L2)?),
                    "linf": real(f.norm(Norm::Linf)?),
                    "mean": f.mean().ok().map(real),
                }),
            ))
        }
        Command::PolyEval { poly, point } => {
            let polys = poly.polys()?;
            let [q] = polys.as_slice() else {
                return Err(Error::Precondition(format!("poly-eval takes one polynomial, got {}", polys.len())));
            };
            let mut out = json!({
                "poly": q.to_string(),
                "degree": q.degree(),
                "depth": q.depth(),
                "classical": q.is_classical(),
            });
            match point {
                Some(pt) => {
                    let x = FieldVec::new(poly.p, formats::parse_list(pt)?)?;
                    out["value"] = report::torus(&q.evaluate(&x)?);
                }
                None => {
                    budget.check("polynomial table", Space::new(poly.p, poly.n)?.size() as u128)?;
                    out["table"] = Value::Array(q.table()?.iter().map(report::torus).collect());
                }
            }
            Ok((0, out))
        }
        Command::PolyFit { function } => {
            let f = inputs.function(function)?;
            let t = torus_table(&f)?;
            let (shift, q) = interpolate_with_shift(f.p(), f.n(), &t)?;
            Ok((
                0,
                json!({
                    "poly": q.to_string(),
                    "shift": report::torus(&shift),
                    "degree": q.degree(),
                    "depth": q.depth(),
                    "classical": q.is_classical(),
                }),
            ))
        }
        Command::Atoms { poly } => {
            let b = poly.factor()?;
            let d = atom_distribution_report(&b, budget)?;
            let ls = b.label_space();
            let atoms: Vec<Value> = d
                .counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(code, &c)| {
                    json!({
                        "label": report::label(&ls.label_of(code as u64)),
                        "count": c,
                        "probability": real(c as f64 / d.total as f64),
                    })
                })
                .collect();
            Ok((
                0,
                json!({
                    "order": d.order,
                    "total": d.total,
                    "nonempty": d.nonempty,
                    "max_deviation": real(d.max_deviation),
                    "atoms": atoms,
                }),
            ))
        }
        Command::Rank { poly, degree, r_max } => {
            let r = match degree {
                Some(d) => {
                    let polys = poly.polys()?;
                    let [q] = polys.as_slice() else {
                        return Err(Error::Precondition("rank --degree takes exactly one polynomial".into()));
                    };
                    rank_d_search(q, *d, *r_max, budget)?
                }
                None => factor_rank_search(&poly.factor()?, *r_max, budget)?,
            };
            Ok((0, report::rank(&r)))
        }
        Command::Depset { p, forms, degree, depth } => {
            let set = dependency_set(&forms.forms(*p)?, *degree, *depth, forms.n_check, budget)?;
            Ok((
                0,
                json!({
                    "degree": set.degree(),
                    "depth": set.depth(),
                    "modulus": set.modulus(),
                    "verification": {"n_check": set.n_check(), "polys_checked": report::big(set.polys_checked())},
                    "size": set.len(),
                    "lambdas": set.lambdas(),
                }),
            ))
        }
        Command::Consistent { p, forms, degrees, depths, list_limit } => {
            let degrees: Vec<u32> = formats::parse_list(degrees)?;
            let depths: Vec<u32> = formats::parse_list(depths)?;
            let c = enumerate_consistent(&forms.forms(*p)?, &degrees, &depths, forms.n_check, budget)?;
            let ls = c.label_space();
            let listed: Vec<Value> = c
                .iter_codes()
                .take(*list_limit)
                .map(|codes| Value::Array(codes.iter().map(|&k| report::label(&ls.label_of(k))).collect()))
                .collect();
            Ok((
                0,
                json!({
                    "count": report::big(c.count()),
                    "lambda_product": report::big(c.lambda_product()),
                    "total": report::big(c.total()),
                    "mass_balance": c.count().saturating_mul(c.lambda_product()) == c.total(),
                    "listed": listed.len(),
                    "assignments": listed,
                }),
            ))
        }
        Command::Equidist { poly, forms, mode, trials } => {
            let b = poly.factor()?;
            let sampling = match mode {
                EnsembleArg::Exact => Sampling::Exact,
                EnsembleArg::Empirical => Sampling::Sampled { trials: *trials, seed },
            };
            let r = equidistribution_report(&b, &forms.forms(poly.p)?, sampling, forms.n_check, budget)?;
            let ls = b.label_space();
            let observed: Vec<Value> = r
                .observed
                .iter()
                .map(|(k, v)| {
                    json!({
                        "labels": k.iter().map(|&c| report::label(&ls.label_of(c))).collect::<Vec<_>>(),
                        "probability": real(*v),
                    })
                })
                .collect();
            Ok((
                0,
                json!({
                    "samples": report::big(r.samples),
                    "predicted": real(r.predicted),
                    "consistent_count": report::big(r.consistent_count),
                    "max_deviation": real(r.max_deviation),
                    "inconsistent_mass": real(r.inconsistent_mass),
                    "observed": observed,
                }),
            ))
        }
        Command::Mu { function, m, mode, samples } => {
            let f = inputs.function(function)?;
            let mu = restriction_distribution(&f, *m, ensemble(*mode, *samples, seed), budget)?;
            Ok((0, report::distribution(&mu)))
        }
        Command::MuInstance { instance, m, n_check } => {
            let inst = inputs.instance(instance)?;
            let mu = instance_distribution(&inst, *m, *n_check, budget)?;
            let mut out = report::distribution(&mu);
            out["lint"] = json!(inst.lint());
            Ok((0, out))
        }
        Command::Tv { left, right, m, mode, samples, n_check } => {
            let ens = ensemble(*mode, *samples, seed);
            let a = source_distribution(left, *m, ens, *n_check, inputs, budget)?;
            let b = source_distribution(right, *m, ens, *n_check, inputs, budget)?;
            Ok((
                0,
                json!({
                    "tv": real(tv_distance(&a, &b)?),
                    "left_support": a.probs.values().filter(|&&v| v != 0.0).count(),
                    "right_support": b.probs.values().filter(|&&v| v != 0.0).count(),
                }),
            ))
        }
        Command::Perturb { function, target, delta, order, drive, gamma_goal, max_rounds, max_samples, out } => {
            let f = inputs.function(function)?;
            let t = inputs.function(target)?;
            let t = match t.kind() {
                TableKind::Boolean => FunctionTable::unit(t.space(), t.real().unwrap_or_default().to_vec())?,
                _ => t,
            };
            let (code, results, g) = if *drive {
                let cfg = DriveConfig {
                    delta: *delta,
                    gamma_goal: *gamma_goal,
                    d: *order,
                    max_rounds: *max_rounds,
                    max_samples: *max_samples,
                };
                let o = small_perturbation_drive(&f, &t, cfg, seed, budget)?;
                let v = json!({
                    "reached": o.reached,
                    "rounds": o.rounds,
                    "samples": o.samples,
                    "trace": report::reals(&o.trace),
                    "l1_from_start": real(o.l1_from_start),
                });
                (if o.reached { 0 } else { 1 }, v, Some(o.g))
            } else {
                let tr = perturbation_trial(&f, &t, *delta, *order, seed, budget)?;
                let g = hofa_core::instances::perturb_toward_structure(&f, &t, *delta, &mut hofa_core::rng::trial_rng(seed, 0))?;
                let v = json!({
                    "l1": real(tr.l1),
                    "norm_before": real(tr.norm_before),
                    "norm_after": real(tr.norm_after),
                    "l1_within_2delta": tr.l1_ok,
                    "contracted": tr.contracted,
                });
                (0, v, Some(g))
            };
            let mut results = results;
            if let (Some(path), Some(g)) = (out, g) {
                std::fs::write(path, formats::write_function(&g))
                    .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                results["out"] = Value::String(path.display().to_string());
            }
            Ok((code, results))
        }
        Command::TestDegree { function, degree, reps, cap } => {
            let o = QueryOracle::new(inputs.function(function)?, *cap)?;
            let v = classical_degree_tester(&o, *degree, *reps, seed)?;
            Ok((v.decision.exit_code(), report::verdict(&v)))
        }
        Command::TestInstance { function, instance, epsilon, delta, m, trials, cap, surrogate } => {
            let o = QueryOracle::new(inputs.function(function)?, *cap)?;
            let inst = inputs.instance(instance)?;
            let cfg = InstanceTest { epsilon: *epsilon, delta: *delta, m: *m, trials: *trials, surrogate: surrogate.config(seed) };
            let v = instance_tester(&o, &inst, cfg, seed, budget)?;
            let mut out = report::verdict(&v);
            out["lint"] = json!(inst.lint());
            Ok((v.decision.exit_code(), out))
        }
        Command::TestFamily { function, instances, low_degree, gamma, degree_bound, epsilon, m, reps, cap, surrogate } => {
            let f = inputs.function(function)?;
            let mut family = Vec::new();
            for path in instances {
                family.push(inputs.instance(path)?);
            }
            if let Some(k) = low_degree {
                family.extend(low_degree_family(f.p(), *k, *gamma, degree_bound.unwrap_or(k + 1))?);
            }
            let o = QueryOracle::new(f, *cap)?;
            let r = family_tester(&o, &family, *epsilon, *m, *reps, surrogate.config(seed), seed, budget)?;
            let mut out = report::verdict(&r.verdict);
            out["delta"] = real(epsilon / 4.0);
            out["accepted_by"] = json!(r.accepted_by);
            out["per_instance"] = Value::Array(r.per_instance.iter().map(report::verdict).collect());
            Ok((r.verdict.decision.exit_code(), out))
        }
        Command::ValidateDecomp { function, f1, f2, f3, poly, degree, zeta, eta, rank_required, r_max } => {
            let f = inputs.function(function)?;
            let parts = [inputs.function(f1)?, inputs.function(f2)?, inputs.function(f3)?];
            let b = poly.factor()?;
            let bounds = DecompositionBounds { d: *degree, zeta: *zeta, eta: *eta, rank_required: *rank_required, rank_r_max: *r_max };
            let r = validate_decomposition(&f, [&parts[0], &parts[1], &parts[2]], &b, bounds, budget)?;
            let clauses: Vec<Value> = r
                .clauses
                .iter()
                .map(|c| json!({"name": c.name, "status": c.status.as_str(), "value": c.value.map(real)}))
                .collect();
            let code = if r.passed() {
                0
            } else if r.clauses.iter().any(|c| c.status == ClauseStatus::Fail) {
                1
            } else {
                2
            };
            Ok((code, json!({"passed": r.passed(), "clauses": clauses})))
        }
        Command::ReportEmbeddingStability { poly, m, mode, trials, r_max } => {
            let b = poly.factor()?;
            let r = embedding_stability_report(&b, *m, ensemble(*mode, *trials, seed), *r_max, budget)?;
            Ok((
                0,
                json!({
                    "m": r.m,
                    "embeddings": r.embeddings,
                    "degree_drops": r.degree_drops,
                    "depth_drops": r.depth_drops,
                    "rank_drops": r.rank_drops,
                    "rank_undecided": r.rank_undecided,
                    "degree_drop_frequency": real(r.degree_drop_frequency()),
                    "depth_drop_frequency": real(r.depth_drop_frequency()),
                    "rank_drop_frequency": real(r.rank_drop_frequency()),
                    "base_rank": report::rank(&r.base_rank),
                }),
            ))
        }
    }
}

//! The `tempfair` command line.
//!
//! Exit codes: 0 success, 1 a check failed or no allocation exists,
//! 2 a search budget ran out, 64 bad usage or input.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::Error;
use crate::fairness::{
    check_temporal_with, check_with, CheckOptions, FairnessReport, Predicate, Scope,
};
use crate::laminar::{complete_family, LaminarFamily};
use crate::model::{prefix_goods, Allocation, GoodSet, TemporalInstance};
use crate::oracle::{
    parse_scope, search, verify_counterexamples, PropertyQuery, SearchConfig, SearchMethod,
};
use crate::{general, identical, io, laminar, two_agents};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

pub const ENV_ENUMERATION_BUDGET: &str = "TEMPFAIR_ENUMERATION_BUDGET";
pub const ENV_NODE_BUDGET: &str = "TEMPFAIR_NODE_BUDGET";
pub const ENV_PO_BUDGET: &str = "TEMPFAIR_PO_BUDGET";

#[derive(Debug, Parser)]
#[command(
    name = "tempfair",
    version,
    about = "Fair allocation of goods that arrive over time"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    General,
    TwoAgents,
    IdenticalOrderings,
    IdenticalDays,
    TwoAgentsIdenticalDays,
    Laminar,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an allocation algorithm and re-check its guarantees.
    Allocate {
        #[arg(long, value_enum)]
        algorithm: Algorithm,
        /// One or more instance documents.
        #[arg(long, num_args = 1.., required = true)]
        instance: Vec<PathBuf>,
        /// Write the allocation document here (single instance only).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Worker threads for multiple instances; output order is fixed.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check one predicate of an allocation over a scope.
    Check {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        allocation: PathBuf,
        #[arg(long)]
        predicate: Predicate,
        /// per-day, overall, up-to-each-day or laminar
        #[arg(long)]
        scope: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Search for an allocation satisfying a conjunction like "EF1@per-day,SD_EF1@overall".
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, default_value = "auto")]
        method: SearchMethod,
        #[arg(long)]
        no_symmetry_breaking: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Confirm the built-in impossibility instances have no fair allocation.
    VerifyCounterexamples {
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Print a random instance document.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a built-in impossibility instance as an instance document.
    Fixture {
        /// four-goods-three-days, eight-goods-three-days or twelve-agents-four-identical-days
        name: String,
    },
}

/// A failure mapped to an exit code and a message for stderr.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ResourceLimit(_) => EXIT_BUDGET,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "tempfair: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    let budgets = Budgets::from_env()?;
    match command {
        Command::Allocate {
            algorithm,
            instance,
            out: out_path,
            format,
            jobs,
        } => allocate_command(
            algorithm,
            &instance,
            out_path.as_deref(),
            format,
            jobs,
            &budgets,
            out,
        ),
        Command::Check {
            instance,
            allocation,
            predicate,
            scope,
            format,
        } => {
            let (inst, family) = read_instance(&instance)?;
            let alloc = io::parse_allocation(&read(&allocation)?, &inst)?;
            let scope = parse_scope(&scope, family.as_ref())?;
            let report = check_temporal_with(&inst, &alloc, predicate, &scope, &budgets.check)?;
            let label = format!("{predicate}@{scope}");
            let passed = report.passed();
            match format {
                Format::Text => write_text_check(out, &inst, &label, &report),
                Format::Json => emit_json(out, &check_json(&inst, &label, &report)),
            }
            Ok(if passed { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Oracle {
            instance,
            query,
            method,
            no_symmetry_breaking,
            format,
        } => {
            let (inst, family) = read_instance(&instance)?;
            let query = PropertyQuery::parse(&query, family.as_ref())?;
            let config = SearchConfig {
                method,
                symmetry_breaking: !no_symmetry_breaking,
                ..budgets.search
            };
            let outcome = search(&inst, &query, &config)?;
            let method = method_name(outcome.method);
            match (&outcome.allocation, format) {
                (Some(a), Format::Text) => {
                    say(
                        out,
                        &format!("found ({})", effort(outcome.method, outcome.nodes)),
                    );
                    say(out, &io::serialize_allocation(&inst, a));
                }
                (None, Format::Text) => say(
                    out,
                    &format!("infeasible ({})", effort(outcome.method, outcome.nodes)),
                ),
                (found, Format::Json) => emit_json(
                    out,
                    &json!({
                        "query": query.to_string(),
                        "result": if found.is_some() { "found" } else { "infeasible" },
                        "allocation": found.as_ref().map(|a| io::allocation_to_document(&inst, a)),
                        "method": method,
                        "nodes": outcome.nodes,
                    }),
                ),
            }
            Ok(if outcome.allocation.is_some() {
                EXIT_OK
            } else {
                EXIT_FAILED
            })
        }
        Command::VerifyCounterexamples { format } => {
            let reports = verify_counterexamples(&budgets.search)?;
            let all = reports.iter().all(|r| r.infeasible);
            match format {
                Format::Text => {
                    for r in &reports {
                        let verdict = if r.infeasible {
                            "infeasible"
                        } else {
                            "FEASIBLE"
                        };
                        say(
                            out,
                            &format!(
                                "{}: {verdict} ({}, {})",
                                r.name,
                                effort(r.method, r.nodes),
                                millis(r.elapsed)
                            ),
                        );
                    }
                }
                Format::Json => emit_json(
                    out,
                    &Value::Array(
                        reports
                            .iter()
                            .map(|r| {
                                json!({
                                    "name": r.name,
                                    "description": r.description,
                                    "infeasible": r.infeasible,
                                    "method": method_name(r.method),
                                    "nodes": r.nodes,
                                    "elapsed_ms": r.elapsed.as_secs_f64() * 1e3,
                                })
                            })
                            .collect(),
                    ),
                ),
            }
            Ok(if all { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Generate { config, seed } => {
            let mut config = io::parse_generator_config(&read(&config)?)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let inst = io::generate_instance(&config)?;
            say(out, &io::serialize_instance(&inst, None));
            Ok(EXIT_OK)
        }
        Command::Fixture { name } => {
            let fixture = crate::oracle::fixtures()
                .into_iter()
                .find(|f| f.name == name)
                .ok_or_else(|| usage(format!("unknown fixture {name:?}")))?;
            say(out, &io::serialize_instance(&fixture.instance, None));
            Ok(EXIT_OK)
        }
    }
}

struct Budgets {
    search: SearchConfig,
    check: CheckOptions,
}

impl Budgets {
    fn from_env() -> Result<Self, Failure> {
        fn var<T: std::str::FromStr>(name: &str) -> Result<Option<T>, Failure> {
            match std::env::var(name) {
                Ok(text) => {
                    text.trim().parse().map(Some).map_err(|_| {
                        usage(format!("{name}={text:?} is not a non-negative integer"))
                    })
                }
                Err(_) => Ok(None),
            }
        }
        let mut search = SearchConfig::default();
        if let Some(b) = var(ENV_ENUMERATION_BUDGET)? {
            search.enumeration_budget = b;
        }
        if let Some(b) = var(ENV_NODE_BUDGET)? {
            search.node_budget = b;
        }
        if let Some(b) = var(ENV_PO_BUDGET)? {
            search.check.po_budget = b;
        }
        Ok(Budgets {
            check: search.check,
            search,
        })
    }
}

/// One advertised property and the sets it is checked on.
pub struct Guarantee {
    pub label: String,
    pub predicate: Predicate,
    pub sets: Vec<GoodSet>,
}

impl Guarantee {
    fn scoped(instance: &TemporalInstance, predicate: Predicate, scope: Scope) -> Self {
        Guarantee {
            label: format!("{predicate}@{scope}"),
            predicate,
            sets: scope.sets(instance),
        }
    }
}

/// Runs `algorithm` and lists the guarantees it promises on `instance`.
pub fn run_algorithm(
    algorithm: Algorithm,
    instance: &TemporalInstance,
    family: Option<&LaminarFamily>,
) -> crate::Result<(Allocation, Vec<Guarantee>)> {
    use Predicate::*;
    let g = |p, s| Guarantee::scoped(instance, p, s);
    Ok(match algorithm {
        Algorithm::General => (
            general::allocate_general(instance),
            vec![g(SdEf1, Scope::PerDay), g(Prop1, Scope::Overall)],
        ),
        Algorithm::TwoAgents => (
            two_agents::allocate_two_agents(instance)?,
            vec![g(SdEf1, Scope::PerDay), g(Ef1, Scope::UpToEachDay)],
        ),
        Algorithm::IdenticalOrderings => (
            identical::allocate_identical_orderings(instance)?,
            vec![g(SdEf1, Scope::PerDay), g(SdEf1, Scope::Overall)],
        ),
        Algorithm::IdenticalDays => (
            general::allocate_identical_days(instance)?,
            vec![g(SdEf1, Scope::PerDay), g(SdProp1, Scope::Overall)],
        ),
        Algorithm::TwoAgentsIdenticalDays => {
            let allocation = two_agents::allocate_two_agents_identical_days(instance)?;
            let even = Guarantee {
                label: "SD_EF@even-prefixes".into(),
                predicate: SdEf,
                sets: (2..=instance.k())
                    .step_by(2)
                    .map(|t| prefix_goods(instance, t))
                    .collect::<crate::Result<_>>()?,
            };
            (
                allocation,
                vec![g(SdEf1, Scope::PerDay), g(SdEf1, Scope::UpToEachDay), even],
            )
        }
        Algorithm::Laminar => {
            let family = match family {
                Some(f) => f.clone(),
                None => LaminarFamily::per_day_and_prefixes(instance),
            };
            let allocation = laminar::allocate_laminar(instance, &family)?;
            let completed = complete_family(&family, &instance.all_goods())?;
            (
                allocation,
                vec![Guarantee {
                    label: "EF1@laminar".into(),
                    predicate: Ef1,
                    sets: completed.sets().to_vec(),
                }],
            )
        }
    })
}

/// Checks every guarantee, returning `(label, report)` per guarantee.
pub fn self_check(
    instance: &TemporalInstance,
    allocation: &Allocation,
    guarantees: &[Guarantee],
    options: &CheckOptions,
) -> crate::Result<Vec<(String, FairnessReport)>> {
    guarantees
        .iter()
        .map(|g| {
            let mut report = FairnessReport::default();
            for set in &g.sets {
                report.merge(check_with(instance, allocation, set, g.predicate, options)?);
            }
            Ok((g.label.clone(), report))
        })
        .collect()
}

struct AllocateRun {
    path: PathBuf,
    instance: TemporalInstance,
    allocation: Allocation,
    checks: Vec<(String, FairnessReport)>,
}

fn allocate_one(
    algorithm: Algorithm,
    path: &Path,
    options: &CheckOptions,
) -> Result<AllocateRun, Failure> {
    let prefix = |f: Failure| Failure {
        code: f.code,
        message: format!("{}: {}", path.display(), f.message),
    };
    let (instance, family) = read_instance(path).map_err(prefix)?;
    let (allocation, guarantees) =
        run_algorithm(algorithm, &instance, family.as_ref()).map_err(|e| prefix(e.into()))?;
    let checks =
        self_check(&instance, &allocation, &guarantees, options).map_err(|e| prefix(e.into()))?;
    Ok(AllocateRun {
        path: path.to_path_buf(),
        instance,
        allocation,
        checks,
    })
}

fn allocate_command(
    algorithm: Algorithm,
    paths: &[PathBuf],
    out_path: Option<&Path>,
    format: Format,
    jobs: usize,
    budgets: &Budgets,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    if out_path.is_some() && paths.len() > 1 {
        return Err(usage("--out takes a single --instance"));
    }
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| usage(format!("cannot start {jobs} workers: {e}")))?;
    let runs: Vec<Result<AllocateRun, Failure>> = pool.install(|| {
        paths
            .par_iter()
            .map(|p| allocate_one(algorithm, p, &budgets.check))
            .collect()
    });

    // A single instance reports its failure directly.
    if paths.len() == 1 {
        let run = runs.into_iter().next().unwrap()?;
        if let Some(target) = out_path {
            std::fs::write(
                target,
                io::serialize_allocation(&run.instance, &run.allocation) + "\n",
            )
            .map_err(|e| usage(format!("cannot write {}: {e}", target.display())))?;
        }
        let passed = run.checks.iter().all(|(_, r)| r.passed());
        match format {
            Format::Text => write_text_run(out, &run),
            Format::Json => emit_json(out, &run_json(&run)),
        }
        return Ok(if passed { EXIT_OK } else { EXIT_FAILED });
    }

    let mut code = EXIT_OK;
    let mut docs = Vec::new();
    for run in &runs {
        match run {
            Ok(run) => {
                if !run.checks.iter().all(|(_, r)| r.passed()) {
                    code = code.max(EXIT_FAILED);
                }
                match format {
                    Format::Text => write_text_run(out, run),
                    Format::Json => docs.push(run_json(run)),
                }
            }
            Err(f) => {
                code = code.max(f.code);
                match format {
                    Format::Text => say(out, &format!("error: {}", f.message)),
                    Format::Json => docs.push(json!({ "error": f.message, "exit_code": f.code })),
                }
            }
        }
    }
    if format == Format::Json {
        emit_json(out, &Value::Array(docs));
    }
    Ok(code)
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn read_instance(path: &Path) -> Result<(TemporalInstance, Option<LaminarFamily>), Failure> {
    Ok(io::parse_instance(&read(path)?)?)
}

fn say(out: &mut dyn Write, line: &str) {
    let _ = writeln!(out, "{line}");
}

fn emit_json(out: &mut dyn Write, value: &Value) {
    say(
        out,
        &serde_json::to_string_pretty(value).expect("json values serialize"),
    );
}

fn method_name(method: SearchMethod) -> &'static str {
    match method {
        SearchMethod::Auto => "auto",
        SearchMethod::Enumerate => "enumerate",
        SearchMethod::Backtrack => "backtrack",
    }
}

fn effort(method: SearchMethod, nodes: u64) -> String {
    match method {
        SearchMethod::Enumerate => format!("{nodes} allocations enumerated"),
        _ => format!("{nodes} partial assignments visited"),
    }
}

fn millis(d: Duration) -> String {
    format!("{:.3} ms", d.as_secs_f64() * 1e3)
}

fn set_labels(instance: &TemporalInstance, set: &GoodSet) -> Vec<String> {
    set.iter().map(|g| instance.label(*g).to_string()).collect()
}

fn write_text_check(
    out: &mut dyn Write,
    instance: &TemporalInstance,
    label: &str,
    report: &FairnessReport,
) {
    if report.passed() {
        say(out, &format!("  {label}: pass"));
        return;
    }
    say(
        out,
        &format!("  {label}: FAIL ({} violations)", report.violations.len()),
    );
    for v in &report.violations {
        let against = v
            .envied
            .map(|j| format!(" towards agent {}", j + 1))
            .unwrap_or_default();
        say(
            out,
            &format!(
                "    agent {}{against} on {{{}}}: {}",
                v.envious + 1,
                set_labels(instance, &v.set).join(", "),
                v.detail
            ),
        );
    }
}

fn write_text_run(out: &mut dyn Write, run: &AllocateRun) {
    say(out, &format!("instance: {}", run.path.display()));
    say(out, "allocation:");
    for agent in 0..run.allocation.n() {
        say(
            out,
            &format!(
                "  agent {}: {{{}}}",
                agent + 1,
                set_labels(&run.instance, &run.allocation.bundle(agent)).join(", ")
            ),
        );
    }
    say(out, "self-check:");
    for (label, report) in &run.checks {
        write_text_check(out, &run.instance, label, report);
    }
}

fn check_json(instance: &TemporalInstance, label: &str, report: &FairnessReport) -> Value {
    json!({
        "property": label,
        "passed": report.passed(),
        "violations": report.violations.iter().map(|v| json!({
            "predicate": v.predicate.name(),
            "set": set_labels(instance, &v.set),
            "agent": v.envious + 1,
            "other": v.envied.map(|j| j + 1),
            "detail": v.detail,
        })).collect::<Vec<_>>(),
    })
}

fn run_json(run: &AllocateRun) -> Value {
    json!({
        "instance": run.path.display().to_string(),
        "allocation": io::allocation_to_document(&run.instance, &run.allocation),
        "passed": run.checks.iter().all(|(_, r)| r.passed()),
        "checks": run.checks.iter().map(|(l, r)| check_json(&run.instance, l, r)).collect::<Vec<_>>(),
    })
}

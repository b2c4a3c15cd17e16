//! Command-line front end: every decider, oracle, generator and dump behind
//! one binary. Each invocation prints a single JSON object
//! `{command, verdict, detail}`; the exit code is 0 for `yes`, 1 for `no`
//! and 2 for errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use thiserror::Error;

use cohcsp::cohomology::{
    avn_check, build_ztest_system, coh_k_consistency, csc_check, extract_theories, ztest, ZtestOracle,
};
use cohcsp::corpus::{planted_linear_system, random_graph, random_linear_system, rng};
use cohcsp::equivalence::{color_refinement, equivalence_fixpoint, Logic};
use cohcsp::fixpoint::{greatest_fixpoint, FixpointReport, UpDown};
use cohcsp::presheaf::{build_base, coflasquify, PresheafFamily};
use cohcsp::structures::{
    brute_force, clique, cycle, disjoint_union, linear_instance, parse_linear_template, parse_structure, path,
    MapKind, Mode, Structure,
};
use cohcsp::{exec, Error as CoreError};

pub const BUDGET_VAR: &str = "COHCSP_BUDGET";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: CoreError },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No,
    Error,
}

impl Verdict {
    fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::Error => "error",
        }
    }
}

/// Result of one invocation.
#[derive(Clone, Debug)]
pub struct CommandOutcome {
    pub command: String,
    pub verdict: Verdict,
    pub detail: Value,
    /// Text for standard error (usage on bad invocations).
    pub stderr: Option<String>,
    /// Plain text for `--help` / `--version`, printed instead of JSON.
    pub help: Option<String>,
}

impl CommandOutcome {
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Yes => 0,
            Verdict::No => 1,
            Verdict::Error => 2,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "command": self.command,
            "verdict": self.verdict.as_str(),
            "detail": self.detail,
        })
    }

    pub fn render(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("outcomes serialize")
    }
}

#[derive(Parser, Debug)]
#[command(name = "cohcsp", version, about = "Local and cohomological consistency deciders for finite structures")]
struct Cli {
    /// Write fixpoint rounds as JSON lines to this file.
    #[arg(long, global = true, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Worker threads for per-section tests (1 = sequential).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Pair {
    a: PathBuf,
    b: PathBuf,
}

#[derive(Args, Debug)]
struct KPair {
    #[arg(long)]
    k: usize,
    a: PathBuf,
    b: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HomMode {
    Hom,
    Embed,
    Iso,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LogicArg {
    El,
    Lk,
    Ck,
    Z,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GenKind {
    Clique,
    Cycle,
    Path,
    Union,
    Linear,
    Random,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DumpWhat {
    Strategy,
    Ztest,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Stage {
    Base,
    Kcon,
    Coh,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyMode {
    Hom,
    Iso,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Brute-force homomorphism / embedding / isomorphism search.
    Hom {
        #[arg(long, value_enum, default_value = "hom")]
        mode: HomMode,
        #[command(flatten)]
        pair: Pair,
    },
    /// Strong k-consistency.
    Kcon(KPair),
    /// Cohomological k-consistency.
    Cohcon {
        #[arg(long)]
        one_step: bool,
        #[command(flatten)]
        pair: KPair,
    },
    /// Cohomological strong contextuality of the k-consistent strategy.
    Csc(KPair),
    /// All-versus-Nothing check against a linear template.
    Avn {
        #[arg(long)]
        k: usize,
        a: PathBuf,
        template: PathBuf,
    },
    /// Logical equivalence (or the existential preorder for `el`).
    Equiv {
        #[arg(long, value_enum)]
        logic: LogicArg,
        #[command(flatten)]
        pair: KPair,
    },
    /// Colour refinement oracle.
    Wl(Pair),
    /// Fixture generator.
    Gen(GenArgs),
    /// Diagnostic dumps.
    Dump(DumpArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    /// Size for clique/cycle/path/random; variables for linear.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Component files for `union`.
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long, default_value_t = 2)]
    p: u32,
    #[arg(long, default_value_t = 4)]
    equations: usize,
    #[arg(long, default_value_t = 3)]
    arity: usize,
    /// Plant a solution so the linear instance is satisfiable.
    #[arg(long)]
    planted: bool,
    /// Write the structure document here.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Write the linear template document here.
    #[arg(long, value_name = "FILE")]
    template_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DumpArgs {
    #[arg(long, value_enum)]
    what: DumpWhat,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "kcon")]
    stage: Stage,
    #[arg(long, value_enum, default_value = "hom")]
    mode: FamilyMode,
    /// Anchor context for `ztest`, comma-separated element names.
    #[arg(long, value_delimiter = ',')]
    context: Option<Vec<String>>,
    /// Anchor section values for `ztest`, comma-separated.
    #[arg(long, value_delimiter = ',')]
    section: Option<Vec<String>>,
    /// Write the family dump / MatrixMarket file here.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    a: PathBuf,
    b: PathBuf,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Hom { .. } => "hom",
            Command::Kcon(_) => "kcon",
            Command::Cohcon { .. } => "cohcon",
            Command::Csc(_) => "csc",
            Command::Avn { .. } => "avn",
            Command::Equiv { .. } => "equiv",
            Command::Wl(_) => "wl",
            Command::Gen(_) => "gen",
            Command::Dump(_) => "dump",
        }
    }
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let guess = args.get(1).and_then(|s| s.to_str()).unwrap_or("").to_string();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return CommandOutcome {
                    command: "help".into(),
                    verdict: Verdict::Yes,
                    detail: json!({}),
                    stderr: None,
                    help: Some(e.to_string()),
                };
            }
            return error_outcome(&guess, &CliError::Usage(e.kind().to_string()), Some(e.to_string()));
        }
    };
    let name = cli.command.name();
    match execute(&cli) {
        Ok((verdict, detail)) => CommandOutcome {
            command: name.into(),
            verdict: Verdict::from_bool(verdict),
            detail,
            stderr: None,
            help: None,
        },
        Err(e) => error_outcome(name, &e, None),
    }
}

fn error_outcome(command: &str, e: &CliError, usage: Option<String>) -> CommandOutcome {
    let message = e.to_string();
    CommandOutcome {
        command: command.into(),
        verdict: Verdict::Error,
        detail: json!({ "error": message }),
        stderr: Some(usage.unwrap_or_else(|| format!("error: {message}\n"))),
        help: None,
    }
}

fn configure(cli: &Cli) -> Result<(), CliError> {
    match std::env::var(BUDGET_VAR) {
        Ok(v) => {
            let b = v
                .trim()
                .parse::<u64>()
                .map_err(|_| CliError::Usage(format!("{BUDGET_VAR} must be a non-negative integer, got `{v}`")))?;
            exec::set_budget(b);
        }
        Err(_) => exec::set_budget(exec::DEFAULT_BUDGET),
    }
    match cli.jobs {
        Some(j) => exec::set_jobs(j)?,
        None => exec::set_parallel(true),
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load(path: &Path) -> Result<Structure, CliError> {
    parse_structure(&read(path)?).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

fn emit_trace(cli: &Cli, report: &FixpointReport, detail: &mut Map<String, Value>) -> Result<(), CliError> {
    if let Some(path) = &cli.trace {
        let mut buf = Vec::new();
        report.write_trace(&mut buf).expect("writing to memory");
        write(path, std::str::from_utf8(&buf).expect("JSON is UTF-8"))?;
        detail.insert("trace".into(), json!(path.display().to_string()));
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(bool, Value), CliError> {
    configure(cli)?;
    match &cli.command {
        Command::Hom { mode, pair } => hom(*mode, pair),
        Command::Kcon(p) => kcon(cli, p),
        Command::Cohcon { one_step, pair } => cohcon(cli, pair, *one_step),
        Command::Csc(p) => csc(p),
        Command::Avn { k, a, template } => avn(*k, a, template),
        Command::Equiv { logic, pair } => equiv(cli, *logic, pair),
        Command::Wl(p) => wl(p),
        Command::Gen(g) => gen(g),
        Command::Dump(d) => dump(d),
    }
}

fn named_map(a: &Structure, b: &Structure, f: &[u32]) -> Value {
    let mut m = Map::new();
    for (x, &y) in f.iter().enumerate() {
        m.insert(a.name(x as u32).to_string(), json!(b.name(y)));
    }
    Value::Object(m)
}

fn hom(mode: HomMode, pair: &Pair) -> Result<(bool, Value), CliError> {
    let (a, b) = (load(&pair.a)?, load(&pair.b)?);
    let (kind, label) = match mode {
        HomMode::Hom => (MapKind::Hom, "hom"),
        HomMode::Embed => (MapKind::Embed, "embed"),
        HomMode::Iso => (MapKind::Iso, "iso"),
    };
    let maps = brute_force(&a, &b, kind)?;
    let witnesses: Vec<Value> = maps.iter().map(|f| named_map(&a, &b, f)).collect();
    Ok((
        !maps.is_empty(),
        json!({ "mode": label, "count": maps.len(), "witnesses": witnesses }),
    ))
}

fn kcon(cli: &Cli, p: &KPair) -> Result<(bool, Value), CliError> {
    let (a, b) = (load(&p.a)?, load(&p.b)?);
    let h = build_base(&a, &b, p.k, Mode::Hom)?;
    let report = greatest_fixpoint(&h, &UpDown)?;
    let mut detail = Map::new();
    detail.insert("k".into(), json!(p.k));
    detail.insert("rounds".into(), json!(report.rounds));
    detail.insert("sections_initial".into(), json!(h.total_sections()));
    detail.insert("sections_final".into(), json!(report.result.total_sections()));
    emit_trace(cli, &report, &mut detail)?;
    Ok((!report.result.is_empty(), Value::Object(detail)))
}

fn cohcon(cli: &Cli, p: &KPair, one_step: bool) -> Result<(bool, Value), CliError> {
    let (a, b) = (load(&p.a)?, load(&p.b)?);
    let rep = coh_k_consistency(&a, &b, p.k, one_step)?;
    let mut detail = Map::new();
    detail.insert("k".into(), json!(p.k));
    detail.insert("one_step".into(), json!(one_step));
    detail.insert("kcon".into(), json!(!rep.initial.is_empty()));
    detail.insert("rounds".into(), json!(rep.report.rounds));
    detail.insert("sections_initial".into(), json!(rep.initial.total_sections()));
    detail.insert("sections_final".into(), json!(rep.result.total_sections()));
    emit_trace(cli, &rep.report, &mut detail)?;
    Ok((rep.verdict, Value::Object(detail)))
}

fn csc(p: &KPair) -> Result<(bool, Value), CliError> {
    let (a, b) = (load(&p.a)?, load(&p.b)?);
    let sbar = coflasquify(&build_base(&a, &b, p.k, Mode::Hom)?);
    let verdict = csc_check(&sbar)?;
    let maximal: usize = sbar.poset().maximal().iter().map(|&c| sbar.sections(c).len()).sum();
    let passing = if sbar.is_empty() {
        0
    } else {
        let oracle = ZtestOracle::new(&sbar)?;
        let mut n = 0;
        for &c in sbar.poset().maximal() {
            for v in sbar.sections(c) {
                n += usize::from(oracle.test(&sbar, c, v)?);
            }
        }
        n
    };
    Ok((
        verdict,
        json!({ "k": p.k, "kcon": !sbar.is_empty(), "maximal_sections": maximal, "ztest_passing": passing }),
    ))
}

fn avn(k: usize, a_path: &Path, t_path: &Path) -> Result<(bool, Value), CliError> {
    let a = load(a_path)?;
    let t = parse_linear_template(&read(t_path)?).map_err(|source| CliError::Input {
        path: t_path.to_path_buf(),
        source,
    })?;
    let b = t.template_structure();
    let sbar = coflasquify(&build_base(&a, &b, k, Mode::Hom)?);
    let th = extract_theories(&a, &t, &sbar)?;
    let verdict = avn_check(&th.sections)?;
    let vacuous: Vec<Vec<&str>> = th
        .vacuous_contexts
        .iter()
        .map(|c| c.iter().map(|&e| a.name(e)).collect())
        .collect();
    Ok((
        verdict,
        json!({
            "k": k,
            "modulus": t.modulus(),
            "instance_theory": th.instance.to_json(&a),
            "instance_unsatisfiable": avn_check(&th.instance)?,
            "section_theory": th.sections.to_json(&a),
            "vacuous_contexts": vacuous,
        }),
    ))
}

fn equiv(cli: &Cli, logic: LogicArg, p: &KPair) -> Result<(bool, Value), CliError> {
    let (a, b) = (load(&p.a)?, load(&p.b)?);
    let logic = match logic {
        LogicArg::El => Logic::El,
        LogicArg::Lk => Logic::Lk,
        LogicArg::Ck => Logic::Ck,
        LogicArg::Z => Logic::Z,
    };
    let report = equivalence_fixpoint(&a, &b, p.k, logic)?;
    let mut detail = Map::new();
    detail.insert("logic".into(), serde_json::to_value(logic).expect("enum serializes"));
    detail.insert("k".into(), json!(p.k));
    detail.insert("rounds".into(), json!(report.rounds));
    detail.insert("sections_initial".into(), json!(report.trace[0]));
    detail.insert("sections_final".into(), json!(report.result.total_sections()));
    emit_trace(cli, &report, &mut detail)?;
    Ok((!report.result.is_empty(), Value::Object(detail)))
}

fn wl(p: &Pair) -> Result<(bool, Value), CliError> {
    let (a, b) = (load(&p.a)?, load(&p.b)?);
    let (ca, cb) = color_refinement(&a, &b)?;
    let (ha, hb) = (ca.histogram(), cb.histogram());
    let hist = |h: &std::collections::BTreeMap<usize, usize>| -> Value {
        h.iter().map(|(c, n)| json!([c, n])).collect()
    };
    Ok((
        ha == hb,
        json!({ "rounds": ca.rounds, "histogram_a": hist(&ha), "histogram_b": hist(&hb) }),
    ))
}

fn gen(g: &GenArgs) -> Result<(bool, Value), CliError> {
    let mut template = None;
    let (kind, s) = match g.kind {
        GenKind::Clique => ("clique", clique(g.n)?),
        GenKind::Cycle => ("cycle", cycle(g.n)?),
        GenKind::Path => ("path", path(g.n)?),
        GenKind::Union => {
            if g.inputs.len() != 2 {
                return Err(CliError::Usage("`gen --kind union` takes exactly two structure files".into()));
            }
            ("union", disjoint_union(&load(&g.inputs[0])?, &load(&g.inputs[1])?)?)
        }
        GenKind::Random => {
            if !(0.0..=1.0).contains(&g.density) {
                return Err(CliError::Usage("--density must lie in [0, 1]".into()));
            }
            ("random", random_graph(&mut rng(g.seed), g.n, g.density))
        }
        GenKind::Linear => {
            if !cohcsp::structures::is_prime(g.p as u64) {
                return Err(CoreError::NotPrime(g.p as u64).into());
            }
            if g.n == 0 || g.arity == 0 {
                return Err(CliError::Usage("linear instances need --n and --arity of at least 1".into()));
            }
            let mut r = rng(g.seed);
            let eqs = if g.planted {
                planted_linear_system(&mut r, g.p, g.n, g.equations, g.arity)
            } else {
                random_linear_system(&mut r, g.p, g.n, g.equations, g.arity)
            };
            let (a, t) = linear_instance(g.p, &eqs)?;
            template = Some(t.to_json());
            ("linear", a)
        }
    };
    let doc = s.to_json();
    let mut detail = Map::new();
    detail.insert("kind".into(), json!(kind));
    if let Some(out) = &g.out {
        write(out, &s.serialize())?;
        detail.insert("out".into(), json!(out.display().to_string()));
    }
    if let (Some(out), Some(t)) = (&g.template_out, &template) {
        write(out, &serde_json::to_string(t).expect("documents serialize"))?;
        detail.insert("template_out".into(), json!(out.display().to_string()));
    }
    detail.insert("structure".into(), doc);
    if let Some(t) = template {
        detail.insert("template".into(), t);
    }
    Ok((true, Value::Object(detail)))
}

fn staged_family(d: &DumpArgs, a: &Structure, b: &Structure) -> Result<(PresheafFamily, usize), CliError> {
    let mode = match d.mode {
        FamilyMode::Hom => Mode::Hom,
        FamilyMode::Iso => Mode::Iso,
    };
    let base = build_base(a, b, d.k, mode)?;
    Ok(match d.stage {
        Stage::Base => (base, 0),
        Stage::Kcon => {
            let rep = greatest_fixpoint(&base, &UpDown)?;
            (rep.result, rep.rounds)
        }
        Stage::Coh => {
            let rep = cohcsp::cohomology::coh_k_consistency_from(&base, false)?;
            (rep.result, rep.report.rounds)
        }
    })
}

fn lookup(s: &Structure, names: &[String], what: &str) -> Result<Vec<u32>, CliError> {
    names
        .iter()
        .map(|n| {
            s.element(n)
                .ok_or_else(|| CliError::Usage(format!("unknown element `{n}` in --{what}")))
        })
        .collect()
}

fn dump(d: &DumpArgs) -> Result<(bool, Value), CliError> {
    let (a, b) = (load(&d.a)?, load(&d.b)?);
    let (f, rounds) = staged_family(d, &a, &b)?;
    match d.what {
        DumpWhat::Strategy => {
            let doc = f.to_dump_json(rounds);
            let mut detail = Map::new();
            detail.insert("what".into(), json!("strategy"));
            match &d.out {
                Some(out) => {
                    write(out, &serde_json::to_string_pretty(&doc).expect("documents serialize"))?;
                    detail.insert("out".into(), json!(out.display().to_string()));
                    detail.insert("total_sections".into(), json!(f.total_sections()));
                }
                None => {
                    detail.insert("family".into(), doc);
                }
            }
            Ok((!f.is_empty(), Value::Object(detail)))
        }
        DumpWhat::Ztest => {
            let poset = f.poset();
            let (c, values) = match (&d.context, &d.section) {
                (Some(ctx), Some(sec)) => {
                    let mut pairs: Vec<(u32, u32)> = lookup(&a, ctx, "context")?
                        .into_iter()
                        .zip(lookup(&b, sec, "section")?)
                        .collect();
                    if pairs.len() != ctx.len() || ctx.len() != sec.len() {
                        return Err(CliError::Usage("--context and --section must have equal length".into()));
                    }
                    pairs.sort_unstable();
                    let ctx: Vec<u32> = pairs.iter().map(|p| p.0).collect();
                    let c = poset
                        .index_of(&ctx)
                        .ok_or_else(|| CliError::Usage("--context is not a context of size at most k".into()))?;
                    (c, pairs.iter().map(|p| p.1).collect::<Vec<u32>>())
                }
                (None, None) => poset
                    .maximal()
                    .iter()
                    .find_map(|&c| f.sections(c).iter().next().map(|v| (c, v.clone())))
                    .ok_or_else(|| CliError::Usage("the family has no maximal sections to anchor".into()))?,
                _ => return Err(CliError::Usage("--context and --section go together".into())),
            };
            let sys = build_ztest_system(&f, c, &values)?;
            let passes = ztest(&f, c, &values)?;
            let mm = sys.matrix.to_matrix_market();
            let mut detail = Map::new();
            detail.insert("what".into(), json!("ztest"));
            detail.insert(
                "context".into(),
                json!(poset.context(c).iter().map(|&e| a.name(e)).collect::<Vec<_>>()),
            );
            detail.insert("section".into(), json!(values.iter().map(|&v| b.name(v)).collect::<Vec<_>>()));
            detail.insert("cols".into(), json!(sys.matrix.cols()));
            detail.insert("nnz".into(), json!(sys.matrix.nnz()));
            detail.insert("index".into(), sys.index_json(&f));
            match &d.out {
                Some(out) => {
                    write(out, &mm)?;
                    detail.insert("out".into(), json!(out.display().to_string()));
                }
                None => {
                    detail.insert("matrix_market".into(), json!(mm));
                }
            }
            Ok((passes, Value::Object(detail)))
        }
    }
}

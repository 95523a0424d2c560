//! Command-line surface: argument parsing, run configuration, and the CSV
//! and JSON writers.

mod verify;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::configspace::{h0_config, ChainParams};
use crate::couplings::{path_coupling_upper_bound, CouplingKind};
use crate::error::{Error, Result};
use crate::mixlab::{
    coupling_times, estimate_from_outcomes, exact_tmix_many, ratio_series, regime_sweep, spread,
    BetaRule, McConfig, SweepConfig, EXACT_STATE_CAP,
};
use crate::spectral::{
    regime_lower_bounds, second_eigenvalue, single_particle_lower_bound, wilson_lower_bound, Regime,
};

pub use verify::{run_verify, CheckResult, VerifyReport};

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "EXLAB_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_CERTIFICATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "exlab", version, about = "Mixing-time laboratory for the biased exclusion process")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads; falls back to EXLAB_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Labelled,
    Monotone,
}

impl From<KindArg> for CouplingKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Labelled => CouplingKind::Labelled,
            KindArg::Monotone => CouplingKind::Monotone,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct ChainArgs {
    #[arg(long)]
    n: usize,
    /// Particle count; defaults to n / 2.
    #[arg(long)]
    k: Option<usize>,
    /// A value or a rule: `v`, `const:v`, `c/n`, `c/n2`, `clogn/n`.
    #[arg(long, default_value = "0")]
    beta: String,
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
}

#[derive(Debug, Clone, Args)]
struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Omit wall time so that equal seeds give byte-identical files.
    #[arg(long)]
    reproducible: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Second eigenvalue, eigenfunction at h0, and lower bounds.
    Spectral {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Exact worst-start total-variation curve.
    Mix {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, default_value_t = 1_000_000)]
        t_max: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Coupling times from the extreme pair and the resulting upper estimate.
    Couple {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, default_value_t = 1_000)]
        trials: u64,
        #[arg(long, default_value_t = 10_000_000)]
        t_cap: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "monotone")]
        coupling: KindArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Regime sweep over (n, beta rule) cells.
    Sweep {
        /// JSON sweep configuration; overrides the grid flags.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        beta: Vec<String>,
        #[arg(long, default_value_t = 0.25)]
        epsilon: f64,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 10_000_000)]
        t_cap: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000)]
        exact_cap: u64,
        #[arg(long, value_enum, default_value = "monotone")]
        coupling: KindArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Small-n certificate suite; exit code 3 if any check fails.
    Verify {
        #[arg(long, default_value_t = 10)]
        max_n: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
}

/// Everything needed to rerun a command; echoed into every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub beta: Option<String>,
    pub beta_value: Option<f64>,
    pub epsilon: Option<f64>,
    pub trials: Option<u64>,
    pub t_cap: Option<u64>,
    pub t_max: Option<u64>,
    pub seed: Option<u64>,
    pub coupling: Option<CouplingKind>,
    pub max_n: Option<usize>,
    pub sweep: Option<SweepConfig>,
    pub output: Option<String>,
    pub format: Format,
}

impl RunConfig {
    fn new(subcommand: &str, out: &OutputArgs, format: Format) -> Self {
        RunConfig {
            subcommand: subcommand.to_string(),
            n: None,
            k: None,
            beta: None,
            beta_value: None,
            epsilon: None,
            trials: None,
            t_cap: None,
            t_max: None,
            seed: None,
            coupling: None,
            max_n: None,
            sweep: None,
            output: out.output.as_ref().map(|p| p.display().to_string()),
            format,
        }
    }

    fn with_chain(mut self, chain: &ChainArgs, params: &ChainParams) -> Self {
        self.n = Some(params.n());
        self.k = Some(params.k());
        self.beta = Some(chain.beta.clone());
        self.beta_value = Some(params.beta());
        self.epsilon = Some(chain.epsilon);
        self
    }
}

fn chain_params(chain: &ChainArgs) -> Result<ChainParams> {
    let rule: BetaRule = chain.beta.parse()?;
    ChainParams::new(chain.n, chain.k.unwrap_or(chain.n / 2), rule.eval(chain.n))
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {eps}")))
    }
}

struct Emitter {
    config: RunConfig,
    started: Instant,
    reproducible: bool,
    output: Option<PathBuf>,
}

impl Emitter {
    fn metadata(&self) -> Value {
        let wall = if self.reproducible {
            Value::Null
        } else {
            json!(self.started.elapsed().as_secs_f64())
        };
        json!({
            "config": self.config,
            "seed": self.config.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "wall_time_s": wall,
            "log_base": "natural",
        })
    }

    fn json(&self, body: Value) -> String {
        let mut doc = Map::new();
        doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
        doc.insert("metadata".into(), self.metadata());
        if let Value::Object(fields) = body {
            doc.extend(fields);
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("serializable");
        s.push('\n');
        s
    }

    fn csv(&self, header: &str, rows: &str, trailer: &[(String, String)]) -> String {
        let meta = self.metadata();
        let mut s = String::new();
        let _ = writeln!(s, "# schema_version: {SCHEMA_VERSION}");
        for key in ["version", "seed", "wall_time_s", "log_base"] {
            let _ = writeln!(s, "# {key}: {}", meta[key]);
        }
        let _ = writeln!(s, "# config: {}", meta["config"]);
        s.push_str(header);
        s.push('\n');
        s.push_str(rows);
        for (k, v) in trailer {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s
    }

    fn write(&self, text: &str) -> Result<()> {
        let res = match &self.output {
            Some(path) => std::fs::write(path, text),
            None => std::io::stdout().write_all(text.as_bytes()),
        };
        res.map_err(|e| Error::Unresolved(format!("cannot write output: {e}")))
    }
}

fn emitter(config: RunConfig, out: &OutputArgs, started: Instant) -> Emitter {
    Emitter {
        config,
        started,
        reproducible: out.reproducible,
        output: out.output.clone(),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn cmd_spectral(chain: &ChainArgs, out: &OutputArgs, started: Instant) -> Result<i32> {
    check_epsilon(chain.epsilon)?;
    let params = chain_params(chain)?;
    let format = out.format.unwrap_or(Format::Json);
    let em = emitter(
        RunConfig::new("spectral", out, format).with_chain(chain, &params),
        out,
        started,
    );
    h0_config(&params)?;
    let w = wilson_lower_bound(&params, chain.epsilon)?;
    let regime = Regime::classify(params.n(), params.beta());
    let regime_formula = regime_lower_bounds(&params, chain.epsilon).ok().map(|r| r.value);
    let pc = path_coupling_upper_bound(&params, chain.epsilon)?;
    let lbu = single_particle_lower_bound(&params, 0.1, 0.5)
        .ok()
        .filter(|_| regime == Regime::Ballistic);
    let body = json!({
        "lambda2": second_eigenvalue(&params),
        "gap": params.gamma(),
        "phi_h0": w.phi_h0,
        "ln_phi_h0": w.ln_phi_h0,
        "R_bound": w.r_bound,
        "wilson_lb": w.lower_bound_steps,
        "regime": regime,
        "regime_formula_lb": regime_formula,
        "regime_formula_is_certificate": false,
        "path_coupling_ub": pc.sharper,
        "path_coupling_ub_displayed": pc.displayed,
        "lbu_t_n": lbu.as_ref().map(|s| s.t_n),
        "lbu_certified": lbu.as_ref().and_then(|s| s.certified(&params, chain.epsilon)),
    });
    let text = match format {
        Format::Json => em.json(body),
        Format::Csv => {
            let fields = body.as_object().expect("object");
            let mut rows = String::new();
            for (k, v) in fields {
                let _ = writeln!(rows, "{k},{v}");
            }
            em.csv("field,value", &rows, &[])
        }
    };
    em.write(&text)?;
    Ok(EXIT_OK)
}

fn cmd_mix(chain: &ChainArgs, t_max: u64, out: &OutputArgs, started: Instant) -> Result<i32> {
    check_epsilon(chain.epsilon)?;
    let params = chain_params(chain)?;
    let format = out.format.unwrap_or(Format::Csv);
    let mut config = RunConfig::new("mix", out, format).with_chain(chain, &params);
    config.t_max = Some(t_max);
    let em = emitter(config, out, started);
    let curve = exact_tmix_many(&params, &[chain.epsilon], t_max)?;
    let tmix = curve.tmix(chain.epsilon);
    let text = match format {
        Format::Json => em.json(json!({
            "epsilon": chain.epsilon,
            "tmix": tmix,
            "worst_start": curve.worst_start,
            "t": curve.times,
            "d_tv": curve.d_values,
        })),
        Format::Csv => {
            let mut rows = String::new();
            for (t, d) in curve.times.iter().zip(&curve.d_values) {
                let _ = writeln!(rows, "{t},{d}");
            }
            let tm = tmix.map(|t| t.to_string()).unwrap_or_else(|| "unresolved".into());
            em.csv("t,d_tv", &rows, &[(format!("tmix({})", chain.epsilon), tm)])
        }
    };
    em.write(&text)?;
    Ok(if tmix.is_some() { EXIT_OK } else { EXIT_RUNTIME })
}

#[allow(clippy::too_many_arguments)]
fn cmd_couple(
    chain: &ChainArgs,
    trials: u64,
    t_cap: u64,
    seed: u64,
    kind: CouplingKind,
    out: &OutputArgs,
    started: Instant,
) -> Result<i32> {
    check_epsilon(chain.epsilon)?;
    let params = chain_params(chain)?;
    let format = out.format.unwrap_or(Format::Json);
    let mut config = RunConfig::new("couple", out, format).with_chain(chain, &params);
    config.trials = Some(trials);
    config.t_cap = Some(t_cap);
    config.seed = Some(seed);
    config.coupling = Some(kind);
    let em = emitter(config, out, started);
    let mc = McConfig {
        epsilon: chain.epsilon,
        trials,
        t_cap,
        kind,
        seed,
        t_grid: None,
    };
    let outcomes = coupling_times(&params, &mc)?;
    let estimate = estimate_from_outcomes(&mc, &outcomes);
    let (est_value, est_error) = match &estimate {
        Ok(e) => (serde_json::to_value(e).expect("serializable"), Value::Null),
        Err(e) => (Value::Null, json!(e.to_string())),
    };
    let text = match format {
        Format::Json => em.json(json!({
            "estimate": est_value,
            "estimate_error": est_error,
            "outcomes": outcomes,
        })),
        Format::Csv => {
            let mut rows = String::new();
            for (i, o) in outcomes.iter().enumerate() {
                let (status, t) = match o.time() {
                    Some(t) => ("coupled", t),
                    None => ("timed_out", t_cap),
                };
                let _ = writeln!(rows, "{i},{status},{t}");
            }
            let tm = match &estimate {
                Ok(e) => e.t_upper.to_string(),
                Err(_) => "unresolved".into(),
            };
            em.csv("trial,status,t", &rows, &[(format!("tmix_upper({})", chain.epsilon), tm)])
        }
    };
    em.write(&text)?;
    Ok(if estimate.is_ok() { EXIT_OK } else { EXIT_RUNTIME })
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    config_path: Option<&PathBuf>,
    ns: &[usize],
    betas: &[String],
    epsilon: f64,
    trials: u64,
    t_cap: u64,
    seed: u64,
    exact_cap: u64,
    kind: CouplingKind,
    out: &OutputArgs,
    started: Instant,
) -> Result<i32> {
    let mut sweep = match config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<SweepConfig>(&text)
                .map_err(|e| Error::InvalidInput(format!("bad sweep config: {e}")))?
        }
        None => {
            if ns.is_empty() || betas.is_empty() {
                return Err(Error::InvalidInput(
                    "sweep needs --config, or both --n and --beta".into(),
                ));
            }
            let rules = betas
                .iter()
                .map(|b| b.parse::<BetaRule>())
                .collect::<Result<Vec<_>>>()?;
            let mut s = SweepConfig::grid(ns, &rules);
            s.epsilon = epsilon;
            s.trials = trials;
            s.t_cap = t_cap;
            s.seed = seed;
            s.exact_cap = exact_cap.min(EXACT_STATE_CAP);
            s.coupling = kind;
            s
        }
    };
    sweep.record_wall_time = !out.reproducible;
    let format = out.format.unwrap_or(Format::Csv);
    let mut config = RunConfig::new("sweep", out, format);
    config.seed = Some(sweep.seed);
    config.sweep = Some(sweep.clone());
    let em = emitter(config, out, started);
    let records = regime_sweep(&sweep)?;
    let text = match format {
        Format::Json => {
            let series: Map<String, Value> = [Regime::Diffusive, Regime::Intermediate, Regime::Ballistic]
                .iter()
                .map(|r| {
                    let s = ratio_series(&records, *r);
                    let spread = (!s.is_empty()).then(|| spread(&s));
                    (r.tag().to_string(), json!({ "points": s, "spread": spread }))
                })
                .collect();
            em.json(json!({ "records": records, "ratio_series": series }))
        }
        Format::Csv => {
            let mut rows = String::new();
            for r in &records {
                let _ = writeln!(
                    rows,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.n,
                    r.k,
                    r.beta,
                    r.regime.tag(),
                    opt(r.tmix),
                    r.tmix_kind.as_str(),
                    opt(r.wilson_lb),
                    opt(r.pc_ub),
                    opt(r.lbu_lb),
                    r.seed
                );
            }
            let errors: Vec<(String, String)> = records
                .iter()
                .filter_map(|r| {
                    r.error
                        .as_ref()
                        .map(|e| (format!("error n={} beta={}", r.n, r.beta_rule), e.clone()))
                })
                .collect();
            em.csv(
                "n,k,beta,regime,tmix,tmix_kind,wilson_lb,pc_ub,lbu_lb,seed",
                &rows,
                &errors,
            )
        }
    };
    em.write(&text)?;
    Ok(EXIT_OK)
}

fn cmd_verify(max_n: usize, out: &OutputArgs, started: Instant) -> Result<i32> {
    if max_n < 2 {
        return Err(Error::InvalidInput("--max-n must be at least 2".into()));
    }
    let format = out.format.unwrap_or(Format::Json);
    let mut config = RunConfig::new("verify", out, format);
    config.max_n = Some(max_n);
    let em = emitter(config, out, started);
    let report = run_verify(max_n);
    for c in &report.checks {
        eprintln!(
            "{} {} ({} cases)",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.cases
        );
        for f in &c.failures {
            eprintln!("    {f}");
        }
    }
    let text = match format {
        Format::Json => em.json(json!({ "passed": report.passed(), "checks": report.checks })),
        Format::Csv => {
            let mut rows = String::new();
            for c in &report.checks {
                let _ = writeln!(rows, "{},{},{}", c.name, c.cases, c.passed);
            }
            em.csv("check,cases,passed", &rows, &[])
        }
    };
    em.write(&text)?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_CERTIFICATE })
}

fn configure_threads(flag: Option<usize>) {
    let threads = flag.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
    });
    if let Some(t) = threads.filter(|&t| t > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) => EXIT_INVALID,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads(cli.threads);
    let started = Instant::now();
    let result = match &cli.command {
        Command::Spectral { chain, out } => cmd_spectral(chain, out, started),
        Command::Mix { chain, t_max, out } => cmd_mix(chain, *t_max, out, started),
        Command::Couple { chain, trials, t_cap, seed, coupling, out } => {
            cmd_couple(chain, *trials, *t_cap, *seed, (*coupling).into(), out, started)
        }
        Command::Sweep {
            config,
            n,
            beta,
            epsilon,
            trials,
            t_cap,
            seed,
            exact_cap,
            coupling,
            out,
        } => cmd_sweep(
            config.as_ref(),
            n,
            beta,
            *epsilon,
            *trials,
            *t_cap,
            *seed,
            *exact_cap,
            (*coupling).into(),
            out,
            started,
        ),
        Command::Verify { max_n, out } => cmd_verify(*max_n, out, started),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

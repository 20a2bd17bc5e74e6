//! Command-line front end: `run`, `sweep`, `verify`, `bench` and a
//! `select` debug command for kernel files.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::error;

use infoselect::functions::{Block, FunctionKind, FunctionParams, InfoFunction, KernelBlocks};
use infoselect::greedy::{greedy_select, partitioned_select, GreedyConfig, Variant};
use infoselect::harness::{run_al, run_to_dir, sweep, Method, RunConfig, SweepConfig};
use infoselect::scenarios::{
    make_blobs, OodConfig, RareConfig, RedundantConfig, ScenarioConfig, StandardConfig,
};
use infoselect::similarity::{cosine_kernel, regularize, EmbeddingMatrix, SimilarityKernel};
use infoselect::{verify, Error};

/// `println!` that ignores a closed stdout.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "infoselect", version, about = "Submodular information measures for batch active learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one active-learning experiment.
    Run(RunArgs),
    /// Run a grid of methods and seeds and write a penalty matrix.
    Sweep(SweepArgs),
    /// Run the brute-force oracle suites.
    Verify {
        /// Fewer trials per suite.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time greedy selection over grids of n, B and p.
    Bench(BenchArgs),
    /// Greedy selection on a single kernel, optionally read from or written
    /// to a kernel file.
    Select(SelectArgs),
}

#[derive(Debug, Args)]
struct Overrides {
    /// JSON file with RunConfig fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["standard", "rare", "redundant", "ood"])]
    scenario: Option<String>,
    /// Imbalance factor of the rare scenario.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_parser = parse_variant)]
    optimizer: Option<Variant>,
    #[arg(long)]
    partitions: Option<usize>,
    #[arg(long = "sg-epsilon")]
    sg_epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add wall-clock seconds to each record.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Overrides,
    /// Function kind or baseline (random, entropy, margin, least_confidence).
    #[arg(long, alias = "method")]
    function: Option<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Overrides,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value = "FLQMI")]
    function: String,
    #[arg(long, value_delimiter = ',', default_values_t = [1000usize, 10000])]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 100])]
    budget: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize])]
    partitions: Vec<usize>,
    #[arg(long, value_parser = parse_variant)]
    optimizer: Option<Variant>,
    #[arg(long = "sg-epsilon", default_value_t = 0.01)]
    sg_epsilon: f64,
    #[arg(long, default_value_t = 50)]
    query: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// A kind needing only the ground kernel (FL, GC, LOGDET) or only the
    /// query kernel (FLQMI, GCMI).
    #[arg(long, default_value = "FL")]
    function: String,
    #[arg(long)]
    budget: usize,
    #[arg(long, value_parser = parse_variant)]
    optimizer: Option<Variant>,
    #[arg(long = "sg-epsilon", default_value_t = 0.01)]
    sg_epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read the kernel from a SIMK file instead of generating one.
    #[arg(long)]
    load_kernel: Option<PathBuf>,
    /// Write the kernel that was used to a SIMK file.
    #[arg(long)]
    dump_kernel: Option<PathBuf>,
    /// Size of the generated ground set.
    #[arg(long, default_value_t = 200)]
    n: usize,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::InvalidConfig(_) | Error::Json(_) | Error::MissingBlock(_) | Error::TooLarge(_) => {
            EXIT_CONFIG
        }
        _ if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_OTHER,
    }
}

fn scenario_default(name: &str) -> ScenarioConfig {
    match name {
        "standard" => ScenarioConfig::Standard(StandardConfig::default()),
        "redundant" => ScenarioConfig::Redundant(RedundantConfig::default()),
        "ood" => ScenarioConfig::Ood(OodConfig::default()),
        _ => ScenarioConfig::Rare(RareConfig::default()),
    }
}

fn apply(o: &Overrides, cfg: &mut RunConfig) -> Result<(), Error> {
    if let Some(s) = &o.scenario {
        if cfg.scenario.kind().to_string() != *s {
            cfg.scenario = scenario_default(s);
        }
    }
    if let Some(rho) = o.rho {
        match &mut cfg.scenario {
            ScenarioConfig::Rare(r) => r.rho = rho,
            _ => return Err(Error::config("--rho applies to the rare scenario only")),
        }
    }
    if let Some(v) = o.rounds {
        cfg.rounds = v;
    }
    if let Some(v) = o.budget {
        cfg.budget = v;
    }
    if let Some(v) = o.optimizer {
        cfg.optimizer.variant = Some(v);
    }
    if let Some(v) = o.partitions {
        cfg.optimizer.partitions = v;
    }
    if let Some(v) = o.sg_epsilon {
        cfg.optimizer.epsilon = v;
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = &o.out {
        cfg.output_dir = Some(v.clone());
    }
    if o.timing {
        cfg.record_timing = true;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<i32, Error> {
    let mut cfg = match &args.common.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    apply(&args.common, &mut cfg)?;
    if let Some(m) = &args.function {
        cfg.method = m.parse::<Method>()?;
    }
    cfg.validate()?;
    let outcome = match cfg.output_dir.clone() {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&cfg)?)?;
            let o = run_to_dir(&cfg, &dir, "records")?;
            std::fs::rename(dir.join("records.summary.json"), dir.join("summary.json"))?;
            o
        }
        None => run_al(&cfg)?,
    };
    if cfg.output_dir.is_none() {
        for r in &outcome.records {
            out!("{}", serde_json::to_string(r)?);
        }
    }
    out!("{}", serde_json::to_string_pretty(&outcome.summary)?);
    Ok(EXIT_OK)
}

fn run_sweep(args: SweepArgs) -> Result<i32, Error> {
    let mut cfg = match &args.common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<SweepConfig>(&text)
                .map_err(|e| Error::config(format!("{}: {e}", path.display())))?
        }
        None => SweepConfig::default(),
    };
    apply(&args.common, &mut cfg.base)?;
    if let Some(ms) = &args.methods {
        cfg.methods = ms.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = s.clone();
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    cfg.base.validate()?;
    for &m in &cfg.methods {
        RunConfig {
            method: m,
            ..cfg.base.clone()
        }
        .validate()?;
    }
    let dir = cfg.base.output_dir.clone();
    let out = sweep(&cfg, dir.as_deref())?;
    let p = &out.penalty;
    out!("{:<12}{}", "", p.methods().iter().map(|m| format!("{m:>12}")).collect::<String>());
    for (i, m) in p.methods().iter().enumerate() {
        let row: String = (0..p.methods().len()).map(|j| format!("{:>12.4}", p.cell(i, j))).collect();
        out!("{m:<12}{row}");
    }
    for (i, m) in p.methods().iter().enumerate() {
        out!("{m}: row sum {:.4}, column sum {:.4}", p.row_sum(i), p.column_sum(i));
    }
    Ok(EXIT_OK)
}

fn run_verify(quick: bool, seed: u64) -> Result<i32, Error> {
    let mut ok = true;
    for r in verify::all_suites(quick, seed)? {
        out!("{r}");
        ok &= r.passed();
    }
    let s = verify::stochastic_quality(2000, 50, 0.01, if quick { 5 } else { 20 })?;
    let pass = s.quality() >= 0.95 && s.speedup() >= 5.0;
    out!(
        "{} stochastic greedy: quality {:.4}, {:.1}x fewer evaluations, {:.2}s",
        if pass { "PASS" } else { "FAIL" },
        s.quality(),
        s.speedup(),
        s.elapsed.as_secs_f64()
    );
    ok &= pass;
    Ok(if ok { EXIT_OK } else { EXIT_VERIFY })
}

fn blob_embeddings(n: usize, seed: u64) -> Result<EmbeddingMatrix, Error> {
    let counts: Vec<usize> = (0..10).map(|c| n / 10 + usize::from(c < n % 10)).collect();
    let (x, _) = make_blobs(&counts, 32, 1.0, seed)?;
    EmbeddingMatrix::from_rows(x)
}

fn run_bench(args: BenchArgs) -> Result<i32, Error> {
    let kind: FunctionKind = args.function.parse()?;
    let query = blob_embeddings(args.query, args.seed.wrapping_add(1))?;
    let params = FunctionParams::default();
    out!("{:<10} {:>8} {:>6} {:>4} {:>11} {:>12} {:>10}", "function", "n", "B", "p", "optimizer", "evaluations", "seconds");
    for &n in &args.n {
        let ground = blob_embeddings(n, args.seed)?;
        for &b in &args.budget {
            for &p in &args.partitions {
                if b > n || p > b {
                    continue;
                }
                let cfg = GreedyConfig {
                    variant: args.optimizer,
                    epsilon: args.sg_epsilon,
                    seed: args.seed,
                    ..GreedyConfig::new(b).with_partitions(p)
                };
                let q = kind.uses_query().then_some(&query);
                let p_set = kind.uses_conditioning().then_some(&query);
                let start = Instant::now();
                let r = if p > 1 {
                    partitioned_select(n, &cfg, |chunk| {
                        InfoFunction::from_embeddings(kind, &ground.select(chunk)?, q, p_set, params)
                    })?
                } else {
                    let f = InfoFunction::from_embeddings(kind, &ground, q, p_set, params)?;
                    greedy_select(&f, &cfg)?
                };
                let chunk = n.div_ceil(p);
                out!(
                    "{:<10} {:>8} {:>6} {:>4} {:>11} {:>12} {:>10.3}",
                    kind.name(),
                    n,
                    b,
                    p,
                    format!("{:?}", cfg.resolved_variant(chunk)).to_lowercase(),
                    r.evaluations,
                    start.elapsed().as_secs_f64()
                );
            }
        }
    }
    Ok(EXIT_OK)
}

fn generated_kernel(kind: FunctionKind, n: usize, seed: u64) -> Result<SimilarityKernel, Error> {
    let ground = blob_embeddings(n, seed)?;
    if kind.required_blocks() == [Block::Query] {
        let q = blob_embeddings(10, seed.wrapping_add(1))?;
        return cosine_kernel(&ground, &q);
    }
    regularize(&cosine_kernel(&ground, &ground)?, FunctionParams::default().epsilon_for(kind))
}

fn run_select(args: SelectArgs) -> Result<i32, Error> {
    let kind: FunctionKind = args.function.parse()?;
    let kernel = match &args.load_kernel {
        Some(path) => SimilarityKernel::load(path)?,
        None => generated_kernel(kind, args.n, args.seed)?,
    };
    if let Some(path) = &args.dump_kernel {
        kernel.save(path)?;
    }
    let kernel = std::sync::Arc::new(kernel);
    let blocks = match kind.required_blocks() {
        [Block::Ground] => KernelBlocks {
            ground: Some(kernel),
            ..Default::default()
        },
        [Block::Query] => KernelBlocks {
            query: Some(kernel),
            ..Default::default()
        },
        _ => {
            return Err(Error::config(format!(
                "{kind} needs more than one kernel block; use `run` instead"
            )))
        }
    };
    let f = InfoFunction::new(kind, blocks, FunctionParams::default())?;
    let cfg = GreedyConfig {
        variant: args.optimizer,
        epsilon: args.sg_epsilon,
        seed: args.seed,
        ..GreedyConfig::new(args.budget)
    };
    let r = greedy_select(&f, &cfg)?;
    out!("{}", serde_json::to_string_pretty(&r)?);
    Ok(EXIT_OK)
}

/// Parses `argv` (program name first) and runs the command, returning the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Verify { quick, seed } => run_verify(quick, seed),
        Command::Bench(a) => run_bench(a),
        Command::Select(a) => run_select(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

//! Command-line front end: configure designs, run experiments, reproduce
//! result tables, and run the acceptance checks.
//!
//! Exit codes: 0 success, 1 check failure, 2 configuration error, 3 I/O
//! failure.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use conformal_re::acceptance::{self, AcceptanceConfig};
use conformal_re::methods::{RandomSetVariant, WithinGroupEstimator};
use conformal_re::models::LogisticFitter;
use conformal_re::simlab::{
    self, derive_seed, run_experiment, DesignSpec, ExperimentSummary, GroupSizes, MethodSpec,
    PathologicalConvention, SupDesign, UnsupDesign, CSV_HEADER,
};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "conformal-re",
    about = "Conformal prediction sets for grouped (random-effects) data",
    version
)]
struct Cli {
    /// Cap on worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run a (design, method) grid of coverage experiments.
    Simulate(SimulateArgs),
    /// Re-run one published coverage table (see --list for the ids).
    ReproduceTable(ReproduceArgs),
    /// Run the acceptance criteria and report pass/fail per criterion.
    Check(CheckArgs),
}

#[derive(Args, Default)]
struct SimulateArgs {
    /// Optional key=value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Method: naive-unsup, subsample-unsup, randomset-unsup, cdf-band,
    /// naive-sup, subsample-sup, randomset-sup, within-group.
    #[arg(long)]
    method: Option<String>,

    /// Variant: mean|kde (random sets), group-mean|james-stein (within-group).
    #[arg(long)]
    variant: Option<String>,

    /// Comma-separated grid of group counts.
    #[arg(long)]
    k: Option<String>,

    /// Comma-separated grid of per-group sample sizes.
    #[arg(long)]
    n: Option<String>,

    /// Nominal miscoverage level.
    #[arg(long)]
    alpha: Option<f64>,

    /// Level-set split level (beta for cdf-band). Defaults to alpha/2.
    #[arg(long)]
    delta: Option<f64>,

    /// Region split level (gamma for cdf-band). Defaults to alpha/2.
    #[arg(long)]
    epsilon: Option<f64>,

    /// Subsampling rounds.
    #[arg(long = "N")]
    n_subsamples: Option<u32>,

    /// Center of the group-parameter distribution.
    #[arg(long)]
    mu: Option<f64>,

    /// Spread (standard deviation) of the group-parameter distribution.
    #[arg(long)]
    tau: Option<f64>,

    /// Within-group standard deviation (unsupervised designs).
    #[arg(long)]
    sigma: Option<f64>,

    /// Logistic fitter for supervised methods: map|mle.
    #[arg(long)]
    fitter: Option<String>,

    /// Use the dominant-group design; the value picks how its dispersion
    /// parameters are read: sd|variance.
    #[arg(long)]
    pathological: Option<String>,

    /// Group to predict for within-group conformal.
    #[arg(long)]
    group_index: Option<usize>,

    /// Monte-Carlo replicates per grid point.
    #[arg(long)]
    trials: Option<usize>,

    /// Master seed (required; there is no wall-clock default).
    #[arg(long)]
    seed: Option<u64>,

    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Output format: csv|json.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Table id, e.g. unsup-naive, sup-randomset-kde-mu1-05.
    table_id: Option<String>,

    /// List the registered table ids and exit.
    #[arg(long)]
    list: bool,

    /// Replicates per table cell.
    #[arg(long, default_value_t = 500)]
    trials: usize,

    /// Master seed (required so published files are regenerable).
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    out: Option<PathBuf>,

    /// Output format: csv|json.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct CheckArgs {
    /// Replicates for the Monte-Carlo criteria; smaller counts widen the
    /// tolerance bands.
    #[arg(long, default_value_t = acceptance::DEFAULT_TRIALS)]
    trials: usize,

    /// Master seed for the suite.
    #[arg(long, default_value_t = acceptance::DEFAULT_SEED)]
    seed: u64,

    /// Comma-separated criterion filter (default: all).
    #[arg(long)]
    criteria: Option<String>,
}

fn config_error(field: &str, message: &str) -> ExitCode {
    eprintln!("error: invalid {field}: {message}");
    ExitCode::from(EXIT_CONFIG)
}

fn io_error(context: &str, err: std::io::Error) -> ExitCode {
    eprintln!("error: {context}: {err}");
    ExitCode::from(EXIT_IO)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return config_error("threads", "must be positive");
        }
        if rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized, --threads ignored");
        }
    }
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::ReproduceTable(args) => reproduce(args),
        Command::Check(args) => check(args),
    }
}

/// Parse `key=value` lines; `#` starts a comment, blank lines are ignored.
fn read_config_file(path: &PathBuf) -> Result<HashMap<String, String>, ExitCode> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_error(&format!("reading {}", path.display()), e))?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((key, value)) => {
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
            None => {
                eprintln!(
                    "error: invalid config: line {} is not key=value: {raw}",
                    lineno + 1
                );
                return Err(ExitCode::from(EXIT_CONFIG));
            }
        }
    }
    Ok(map)
}

struct Merged {
    file: HashMap<String, String>,
}

impl Merged {
    fn get<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, ExitCode> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                eprintln!("error: invalid {key}: cannot parse {raw:?} from config file");
                ExitCode::from(EXIT_CONFIG)
            }),
        }
    }
}

fn parse_grid(raw: &str, field: &str) -> Result<Vec<usize>, ExitCode> {
    let mut out = Vec::new();
    for part in raw.split(',') {
        match part.trim().parse::<usize>() {
            Ok(v) if v > 0 => out.push(v),
            _ => {
                return Err(config_error(field, &format!("bad entry {part:?}")));
            }
        }
    }
    if out.is_empty() {
        return Err(config_error(field, "grid is empty"));
    }
    Ok(out)
}

fn validate_rate(name: &str, value: f64) -> Result<f64, ExitCode> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(config_error(name, &format!("{value} is not in (0, 1)")))
    }
}

fn simulate(args: SimulateArgs) -> ExitCode {
    match simulate_inner(args) {
        Ok(code) => code,
        Err(code) => code,
    }
}

fn simulate_inner(args: SimulateArgs) -> Result<ExitCode, ExitCode> {
    let file = match &args.config {
        Some(path) => read_config_file(path)?,
        None => HashMap::new(),
    };
    let merged = Merged { file };

    let method_name = merged
        .get(args.method, "method")?
        .ok_or_else(|| config_error("method", "missing (flag or config file)"))?;
    let seed = merged
        .get(args.seed, "seed")?
        .ok_or_else(|| config_error("seed", "missing; seeds are mandatory"))?;
    let trials = merged.get(args.trials, "trials")?.unwrap_or(500);
    if trials == 0 {
        return Err(config_error("trials", "must be positive"));
    }
    let k_grid = parse_grid(&merged.get(args.k, "k")?.unwrap_or_else(|| "5".into()), "k")?;
    let n_grid = parse_grid(
        &merged.get(args.n, "n")?.unwrap_or_else(|| "500".into()),
        "n",
    )?;
    let alpha = validate_rate("alpha", merged.get(args.alpha, "alpha")?.unwrap_or(0.1))?;
    let delta = match merged.get(args.delta, "delta")? {
        Some(d) => validate_rate("delta", d)?,
        None => alpha / 2.0,
    };
    let epsilon = match merged.get(args.epsilon, "epsilon")? {
        Some(e) => validate_rate("epsilon", e)?,
        None => alpha / 2.0,
    };
    let n_subsamples = merged.get(args.n_subsamples, "N")?.unwrap_or(1);
    if n_subsamples == 0 {
        return Err(config_error("N", "must be positive"));
    }
    let mu = merged.get(args.mu, "mu")?.unwrap_or(0.0);
    let tau = merged.get(args.tau, "tau")?.unwrap_or(1.0);
    let sigma = merged.get(args.sigma, "sigma")?.unwrap_or(1.0);
    if tau <= 0.0 {
        return Err(config_error("tau", "must be positive"));
    }
    if sigma <= 0.0 {
        return Err(config_error("sigma", "must be positive"));
    }
    let fitter = match merged
        .get(args.fitter, "fitter")?
        .unwrap_or_else(|| "map".into())
        .as_str()
    {
        "map" => LogisticFitter::default_map(),
        "mle" => LogisticFitter::Mle,
        other => return Err(config_error("fitter", &format!("unknown fitter {other:?}"))),
    };
    let variant = merged.get(args.variant, "variant")?;
    let group_index = merged.get(args.group_index, "group-index")?.unwrap_or(0);
    let pathological = match merged.get(args.pathological, "pathological")?.as_deref() {
        None => None,
        Some("sd") => Some(PathologicalConvention::StdDev),
        Some("variance") | Some("var") => Some(PathologicalConvention::Variance),
        Some(other) => {
            return Err(config_error(
                "pathological",
                &format!("expected sd or variance, got {other:?}"),
            ))
        }
    };
    let format = merged
        .get(args.format, "format")?
        .unwrap_or_else(|| "csv".into());
    let out = merged
        .get(args.out.map(path_string), "out")?
        .map(PathBuf::from);

    let randomset_variant = |v: Option<&str>| -> Result<RandomSetVariant, ExitCode> {
        match v.unwrap_or("mean") {
            "mean" => Ok(RandomSetVariant::Mean),
            "kde" => Ok(RandomSetVariant::Kde),
            other => Err(config_error(
                "variant",
                &format!("expected mean or kde, got {other:?}"),
            )),
        }
    };
    let method = match method_name.as_str() {
        "naive-unsup" => MethodSpec::NaiveUnsup { alpha },
        "subsample-unsup" => MethodSpec::SubsampleUnsup {
            alpha,
            n_subsamples,
        },
        "randomset-unsup" => MethodSpec::RandomSetUnsup {
            delta,
            epsilon,
            variant: randomset_variant(variant.as_deref())?,
        },
        "cdf-band" => MethodSpec::CdfBand {
            beta: delta,
            gamma: epsilon,
        },
        "naive-sup" => MethodSpec::NaiveSup { alpha, fitter },
        "subsample-sup" => MethodSpec::SubsampleSup {
            alpha,
            n_subsamples,
            fitter,
        },
        "randomset-sup" => MethodSpec::RandomSetSup {
            delta,
            epsilon,
            variant: randomset_variant(variant.as_deref())?,
            fitter,
        },
        "within-group" => {
            let estimator = match variant.as_deref().unwrap_or("group-mean") {
                "group-mean" => WithinGroupEstimator::GroupMean,
                "james-stein" => WithinGroupEstimator::JamesStein {
                    sigma2: sigma * sigma,
                },
                other => {
                    return Err(config_error(
                        "variant",
                        &format!("expected group-mean or james-stein, got {other:?}"),
                    ))
                }
            };
            MethodSpec::WithinGroup {
                alpha,
                estimator,
                group_index,
            }
        }
        other => return Err(config_error("method", &format!("unknown method {other:?}"))),
    };

    let supervised = matches!(
        method,
        MethodSpec::NaiveSup { .. }
            | MethodSpec::SubsampleSup { .. }
            | MethodSpec::RandomSetSup { .. }
    );
    let mut rows: Vec<ExperimentSummary> = Vec::new();
    for &k in &k_grid {
        for &n in &n_grid {
            let design = if let Some(convention) = pathological {
                if supervised {
                    return Err(config_error(
                        "pathological",
                        "the dominant-group design is unsupervised",
                    ));
                }
                DesignSpec::Unsup(UnsupDesign::pathological(convention))
            } else if supervised {
                DesignSpec::Sup(SupDesign::new(k, n, mu, tau))
            } else {
                DesignSpec::Unsup(UnsupDesign {
                    k,
                    sizes: GroupSizes::Uniform(n),
                    mu,
                    tau,
                    sigma,
                })
            };
            let row_seed = derive_seed(seed, &format!("{method_name}-k{k}-n{n}"));
            match run_experiment(&design, &method, trials, row_seed) {
                Ok(summary) => {
                    eprintln!(
                        "{} k={k} n={n}: coverage {:.3}, mean size {:.3}",
                        method_name, summary.coverage, summary.mean_size
                    );
                    rows.push(summary);
                }
                Err(e) => return Err(config_error("method", &e.to_string())),
            }
            if pathological.is_some() {
                break;
            }
        }
        if pathological.is_some() {
            break;
        }
    }
    write_rows(&rows, &format, out.as_ref()).map(|()| ExitCode::SUCCESS)
}

fn path_string(p: PathBuf) -> String {
    p.to_string_lossy().into_owned()
}

fn write_rows(
    rows: &[ExperimentSummary],
    format: &str,
    out: Option<&PathBuf>,
) -> Result<(), ExitCode> {
    let body = match format {
        "csv" => {
            let mut s = String::from(CSV_HEADER);
            s.push('\n');
            for row in rows {
                s.push_str(&row.csv_row());
                s.push('\n');
            }
            s
        }
        "json" => {
            let mut s = serde_json::to_string_pretty(rows).expect("serializable rows");
            s.push('\n');
            s
        }
        other => {
            return Err(config_error(
                "format",
                &format!("expected csv or json, got {other:?}"),
            ))
        }
    };
    match out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| io_error(&format!("writing {}", path.display()), e)),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| io_error("writing stdout", e)),
    }
}

fn reproduce(args: ReproduceArgs) -> ExitCode {
    if args.list {
        for id in simlab::tables::table_ids() {
            println!("{id}");
        }
        return ExitCode::SUCCESS;
    }
    let Some(table_id) = args.table_id else {
        return config_error("table-id", "missing (or pass --list)");
    };
    let Some(rows_spec) = simlab::tables::table_rows(&table_id) else {
        return config_error("table-id", &format!("unknown table {table_id:?}"));
    };
    let Some(seed) = args.seed else {
        return config_error(
            "seed",
            "missing; seeds are mandatory in reproduce-table mode",
        );
    };
    if args.trials == 0 {
        return config_error("trials", "must be positive");
    }

    let mut rows = Vec::with_capacity(rows_spec.len());
    for (i, (design, method)) in rows_spec.iter().enumerate() {
        let row_seed = derive_seed(seed, &format!("{table_id}-row{i}"));
        match run_experiment(design, method, args.trials, row_seed) {
            Ok(summary) => {
                eprintln!(
                    "{table_id} [{}/{}] k={}: coverage {:.3}",
                    i + 1,
                    rows_spec.len(),
                    summary.k,
                    summary.coverage
                );
                rows.push(summary);
            }
            Err(e) => {
                eprintln!("error: row {i} of {table_id}: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        }
    }
    match write_rows(&rows, &args.format, args.out.as_ref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}

fn check(args: CheckArgs) -> ExitCode {
    if args.trials == 0 {
        return config_error("trials", "must be positive");
    }
    let cfg = AcceptanceConfig {
        trials: args.trials,
        seed: args.seed,
    };
    let ids: Vec<String> = match &args.criteria {
        None => acceptance::CRITERION_IDS
            .iter()
            .map(|s| s.to_string())
            .collect(),
        Some(filter) => {
            let ids: Vec<String> = filter.split(',').map(|s| s.trim().to_string()).collect();
            for id in &ids {
                if !acceptance::CRITERION_IDS.contains(&id.as_str()) {
                    return config_error("criteria", &format!("unknown criterion {id:?}"));
                }
            }
            ids
        }
    };
    let mut all_passed = true;
    for id in &ids {
        let outcome = acceptance::run_criterion(id, &cfg).expect("validated id");
        println!("{}", outcome.report_line());
        all_passed &= outcome.passed;
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

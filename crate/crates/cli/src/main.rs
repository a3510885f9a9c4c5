use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rgpcm::constraints::{static_bounds_from_data, DEFAULT_BETA, DEFAULT_SCHEDULE_LEN};
use rgpcm::experiment::{run_convergence_experiment, ExperimentConfig};
use rgpcm::init::DEFAULT_KMEANS_RESTARTS;
use rgpcm::io::{load_csv, standardize, write_json, Dataset, LABEL_HEADER};
use rgpcm::report::{best_summary, emit_reports, RunMeta, RunResults};
use rgpcm::selection::{configure_threads_from_env, parse_group_range, start_specs, sweep_with_starts};
use rgpcm::simulate::SimSpec;
use rgpcm::{
    Bounds, ConstraintSpec, CovarianceStructure, EmConfig, Error, InitKind, InitSpec, Regime, Result, Schedule,
};

#[derive(Parser)]
#[command(name = "rgpcm", version, about = "Eigenvalue-constrained Gaussian mixture clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a grid of structures and group counts and select by BIC.
    Fit(FitArgs),
    /// Write a shipped simulation design to CSV.
    Sim(SimArgs),
    /// Compare constraint regimes from shared random starts.
    Converge(ConvergeArgs),
}

#[derive(Args)]
struct Source {
    /// Numeric CSV with a header row.
    #[arg(long, conflicts_with = "sim", required_unless_present = "sim")]
    data: Option<PathBuf>,
    /// Shipped simulation: sim1, sim2 or sim2-noise.
    #[arg(long)]
    sim: Option<String>,
    /// Sampling seed for --sim (defaults to the design's own seed).
    #[arg(long, requires = "sim")]
    sim_seed: Option<u64>,
    /// Column holding true class labels; excluded from the features.
    #[arg(long)]
    label_column: Option<String>,
}

#[derive(Args)]
struct EmArgs {
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Relative log-likelihood change treated as converged.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    source: Source,
    /// Center and scale every column before fitting.
    #[arg(long)]
    standardize: bool,
    /// Comma-separated structure tags, or `all`.
    #[arg(long, default_value = "all")]
    models: String,
    /// Group counts, `N` or `A:B`.
    #[arg(long, default_value = "1:6")]
    g: String,
    /// Fixed eigenvalue bounds: `data`, `a,b` or `none`.
    #[arg(long, visible_alias = "static-bounds", default_value = "data")]
    bounds: String,
    /// Relax bounds by schedule under this regime instead of fixed bounds.
    #[arg(long, conflicts_with = "bounds")]
    regime: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SCHEDULE_LEN)]
    schedule_len: usize,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    /// kmeans, random-partition or random-resp.
    #[arg(long, default_value = "kmeans")]
    init: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Initializations per cell; seeds run seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    starts: usize,
    /// Lloyd restarts inside each k-means initialization.
    #[arg(long, default_value_t = DEFAULT_KMEANS_RESTARTS)]
    kmeans_restarts: usize,
    #[command(flatten)]
    em: EmArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    name: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    source: Source,
    /// Use the data as read; by default columns are standardized.
    #[arg(long)]
    no_standardize: bool,
    #[arg(long, default_value = "all")]
    models: String,
    #[arg(long, default_value = "2:6")]
    g: String,
    /// Comma-separated regimes, or `all`.
    #[arg(long, default_value = "all")]
    regimes: String,
    #[arg(long, default_value_t = 50)]
    starts: usize,
    #[arg(long, default_value_t = DEFAULT_SCHEDULE_LEN)]
    schedule_len: usize,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    /// random-partition or random-resp.
    #[arg(long, default_value = "random-partition")]
    init: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    em: EmArgs,
    #[arg(long)]
    out: PathBuf,
}

struct Loaded {
    dataset: Dataset,
    description: String,
}

fn load_source(src: &Source) -> Result<Loaded> {
    if let Some(path) = &src.data {
        let dataset = load_csv(path, src.label_column.as_deref()).map_err(|e| match e {
            Error::Io(e) => Error::Config(format!("cannot read {}: {e}", path.display())),
            e => e,
        })?;
        return Ok(Loaded { dataset, description: format!("csv:{}", path.display()) });
    }
    let name = src.sim.as_deref().expect("clap enforces a source");
    let spec = SimSpec::builtin(name)?;
    let seed = src.sim_seed.unwrap_or(spec.seed);
    Ok(Loaded { dataset: sim_dataset(&spec, seed)?, description: format!("sim:{name}:seed={seed}") })
}

fn sim_dataset(spec: &SimSpec, seed: u64) -> Result<Dataset> {
    let sim = spec.generate(seed)?;
    let names = (1..=spec.dim()).map(|j| format!("x{j}")).collect();
    let mut d = Dataset::new(names, sim.data)?;
    d.truth_labels = Some(
        sim.labels
            .iter()
            .zip(&sim.noise)
            .map(|(&l, &noise)| if noise { "noise".to_string() } else { (l + 1).to_string() })
            .collect(),
    );
    Ok(d)
}

fn parse_bounds(s: &str, data: &rgpcm::Matrix) -> Result<Bounds> {
    match s.trim() {
        "data" => static_bounds_from_data(data),
        "none" => Ok(Bounds::VACUOUS),
        other => {
            let bad = || Error::Config(format!("invalid bounds '{other}' (expected data, none or a,b)"));
            let (a, b) = other.split_once(',').ok_or_else(bad)?;
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            Bounds::new(a, b)
        }
    }
}

fn parse_regimes(s: &str) -> Result<Vec<Regime>> {
    if s.trim().eq_ignore_ascii_case("all") {
        Ok(Regime::ALL.to_vec())
    } else {
        Regime::parse_list(s)
    }
}

fn fit_cmd(args: &FitArgs) -> Result<()> {
    let loaded = load_source(&args.source)?;
    let dataset = if args.standardize { standardize(&loaded.dataset)? } else { loaded.dataset };
    let structures = CovarianceStructure::parse_list(&args.models)?;
    let groups = parse_group_range(&args.g)?;
    let kind: InitKind = args.init.parse()?;
    if kind == InitKind::Given {
        return Err(Error::Config("--init given is not available from the command line".into()));
    }
    let init = InitSpec::new(kind, args.seed, args.kmeans_restarts)?;
    let constraint = match &args.regime {
        Some(r) => ConstraintSpec::dynamic(r.parse()?, Schedule::new(args.schedule_len, args.beta)?),
        None => ConstraintSpec::fixed(parse_bounds(&args.bounds, &dataset.values)?),
    };
    let config = EmConfig { max_iter: args.em.max_iter, tol: args.em.tol, constraint, ..EmConfig::default() };

    let result = sweep_with_starts(&dataset.values, &structures, &groups, &init, args.starts, &config)?;
    let truth = dataset.truth_labels.as_deref();
    let summary = best_summary(&result, truth)?;

    let mut meta = RunMeta::new("fit", &loaded.description, dataset.n(), dataset.p());
    meta.standardized = dataset.is_standardized();
    meta.seeds = start_specs(&init, args.starts).iter().map(|s| s.seed).collect();
    meta.thresholds = config.degeneracy;
    meta.config = json!({
        "structures": structures,
        "groups": groups,
        "constraint": constraint,
        "init": init.kind.as_str(),
        "kmeans_restarts": init.restarts,
        "starts": args.starts,
        "max_iter": config.max_iter,
        "tol": config.tol,
        "inner_m": config.inner_m,
        "label_column": args.source.label_column,
        "standardization": dataset.transform,
    });
    meta.outcome = summary.clone();
    let files = emit_reports(&RunResults::Fit { sweep: &result, truth }, &meta, &args.out)?;

    let mut line = match result.best_cell().and_then(|c| c.report().map(|r| (c, r))) {
        Some((cell, rep)) => {
            format!("selected {} G={} bic={:.4} loglik={:.4}", cell.structure, cell.groups, rep.bic, rep.loglik)
        }
        None => "no model selected".to_string(),
    };
    if let Some(a) = summary["ari"].as_f64() {
        line.push_str(&format!(" ari={a:.4}"));
    }
    say(&line);
    say(&format!("wrote {} files to {}", files.len(), args.out.display()));
    Ok(())
}

fn sim_cmd(args: &SimArgs) -> Result<()> {
    let spec = SimSpec::builtin(&args.name)?;
    let seed = args.seed.unwrap_or(spec.seed);
    let dataset = sim_dataset(&spec, seed)?;
    std::fs::create_dir_all(&args.out)?;
    let data_path = args.out.join("data.csv");
    dataset.write_csv(&data_path)?;
    write_json(&args.out.join("sim_spec.json"), &spec)?;
    let mut meta = RunMeta::new("sim", &format!("sim:{}:seed={seed}", args.name), dataset.n(), dataset.p());
    meta.seeds = vec![seed];
    meta.config = json!({ "name": args.name, "label_column": LABEL_HEADER });
    write_json(&args.out.join(rgpcm::report::RUN_META), &meta)?;
    say(&format!("wrote {} rows to {}", dataset.n(), data_path.display()));
    Ok(())
}

fn converge_cmd(args: &ConvergeArgs) -> Result<()> {
    let loaded = load_source(&args.source)?;
    let dataset = if args.no_standardize { loaded.dataset } else { standardize(&loaded.dataset)? };
    let cfg = ExperimentConfig {
        source: loaded.description.clone(),
        structures: CovarianceStructure::parse_list(&args.models)?,
        groups: parse_group_range(&args.g)?,
        regimes: parse_regimes(&args.regimes)?,
        starts: args.starts,
        seed: args.seed,
        init_kind: args.init.parse()?,
        schedule: Schedule::new(args.schedule_len, args.beta)?,
        max_iter: args.em.max_iter,
        tol: args.em.tol,
    };
    let report = run_convergence_experiment(&dataset.values, &cfg)?;

    let mut meta = RunMeta::new("converge", &loaded.description, dataset.n(), dataset.p());
    meta.standardized = dataset.is_standardized();
    meta.seeds = (0..cfg.starts).map(|k| cfg.start_seed(k)).collect();
    meta.config = json!({ "experiment": cfg, "standardization": dataset.transform });
    let degenerate: serde_json::Map<String, serde_json::Value> = cfg
        .regimes
        .iter()
        .map(|&r| {
            let n: usize = cfg.structures.iter().map(|&s| report.degenerate_count(s, r)).sum();
            (r.label().to_string(), json!(n))
        })
        .collect();
    meta.outcome = json!({
        "runs_per_regime": report.records.len(),
        "degenerate_runs": degenerate,
        "starts_without_winner": report.rows.iter().map(|r| r.starts_without_winner).sum::<usize>(),
    });
    let files = emit_reports(&RunResults::Converge(&report), &meta, &args.out)?;
    say(&format!("{} starts x {} cells, wrote {} files to {}", cfg.starts, report.rows.len(), files.len(), args.out.display()));
    Ok(())
}

/// Prints a status line; a closed stdout is not an error.
fn say(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn run(cli: &Cli) -> Result<()> {
    configure_threads_from_env()?;
    match &cli.command {
        Command::Fit(a) => fit_cmd(a),
        Command::Sim(a) => sim_cmd(a),
        Command::Converge(a) => converge_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

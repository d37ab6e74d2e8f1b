use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

use tadp_rme::experiments::results::{write_rows, CsvTable};
use tadp_rme::experiments::runner::{write_theory_curves, MECHANISM};
use tadp_rme::experiments::{
    paired_t_test, run_ablation, run_baseline_comparison, run_sensitivity, run_tradeoff_sweep, theory_curves,
    write_outputs, DatasetConfig, ExperimentConfig, RunFailure, SweepTable,
};
use tadp_rme::Error;

#[derive(Parser)]
#[command(name = "tadp", version, about = "Trust-adaptive privacy experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Privacy-utility sweep over the trust grid.
    Sweep(RunArgs),
    /// Mechanism against the baselines at matched budgets.
    Compare(RunArgs),
    /// Noise-only, embedding-only, fixed and adaptive variants at one trust level.
    Ablate(RunArgs),
    /// One-at-a-time variation of eps_min, eps_max and the clip norm.
    Sensitivity(RunArgs),
    /// Closed-form curves written to theory_curves.csv.
    Theory(RunArgs),
    /// Paired t-tests between a reference method and every other method of a raw.csv.
    Ttest(TtestArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `mnist`, `blobs`, an IDX directory, a .csv file or a CIFAR .bin batch.
    #[arg(long)]
    dataset: Option<String>,
    /// Number of trials (seeds).
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated trust levels; ablate and sensitivity take a single value.
    #[arg(long, value_delimiter = ',')]
    tau: Option<Vec<f64>>,
}

#[derive(Args)]
struct TtestArgs {
    /// Raw trial table; defaults to `<out>/raw.csv`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = MECHANISM)]
    reference: String,
    /// Metrics to test.
    #[arg(long, value_delimiter = ',', default_value = "accuracy,priv_overall")]
    metric: Vec<String>,
    /// Direct samples instead of a table: `--a 1,2,3 --b 2,3,5`.
    #[arg(long, value_delimiter = ',', requires = "b")]
    a: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', requires = "a")]
    b: Option<Vec<f64>>,
}

fn resolve(args: &RunArgs, single_tau: bool) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &args.dataset {
        cfg.dataset = DatasetConfig::from_cli(d)?;
    }
    if let Some(n) = args.seeds {
        cfg.trials = n;
    }
    if let Some(k) = args.base_seed {
        cfg.base_seed = k;
    }
    if let Some(o) = &args.out {
        cfg.output = o.clone();
    }
    if let Some(t) = &args.tau {
        if single_tau {
            let [tau] = t.as_slice() else {
                return Err(Error::Config(format!("expected a single --tau value, got {t:?}")));
            };
            cfg.ablation.tau = *tau;
            cfg.sensitivity.tau = *tau;
        } else {
            cfg.taus = t.clone();
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

type Runner = fn(&ExperimentConfig) -> Result<SweepTable, RunFailure>;

fn run_experiment(args: &RunArgs, runner: Runner, single_tau: bool) -> Result<(), Error> {
    let cfg = resolve(args, single_tau)?;
    match runner(&cfg) {
        Ok(table) => {
            write_outputs(&table, &cfg.output)?;
            info!("wrote {} trials to {}", table.trials.len(), cfg.output.display());
            Ok(())
        }
        Err(failure) => {
            if !failure.partial.is_empty() {
                warn!(
                    "flushing {} completed trials to {} before aborting",
                    failure.partial.trials.len(),
                    cfg.output.display()
                );
                write_outputs(&failure.partial, &cfg.output)?;
            }
            Err(failure.error)
        }
    }
}

fn run_theory(args: &RunArgs) -> Result<(), Error> {
    let cfg = resolve(args, false)?;
    let points = theory_curves(&cfg.theory, &cfg.budget, &cfg.taus)?;
    let path = cfg.output.join("theory_curves.csv");
    write_theory_curves(&points, &path)?;
    info!("wrote {} curve points to {}", points.len(), path.display());
    Ok(())
}

fn parse_cell(v: &str, what: &str) -> Result<f64, Error> {
    v.parse()
        .map_err(|_| Error::Malformed(format!("{what} value {v:?} is not a number")))
}

fn run_ttest(args: &TtestArgs) -> Result<(), Error> {
    if let (Some(a), Some(b)) = (&args.a, &args.b) {
        let r = paired_t_test(a, b)?;
        println!("t = {}, p = {}, df = {}", r.t, r.p, r.df);
        return Ok(());
    }
    let input = args.input.clone().unwrap_or_else(|| args.out.join("raw.csv"));
    let table = CsvTable::read(&input)?;
    let col = |name: &str| table.column(name);
    let (c_ds, c_method, c_setting, c_eps, c_seed) =
        (col("dataset")?, col("method")?, col("setting")?, col("epsilon")?, col("seed")?);
    let metric_cols = args
        .metric
        .iter()
        .map(|m| col(m).map(|c| (m.clone(), c)))
        .collect::<Result<Vec<_>, _>>()?;

    // (dataset, setting, epsilon) -> seed -> row of the reference method.
    let mut reference: BTreeMap<(String, String, String), BTreeMap<String, &Vec<String>>> = BTreeMap::new();
    for row in table.rows.iter().filter(|r| r[c_method] == args.reference) {
        reference
            .entry((row[c_ds].clone(), row[c_setting].clone(), row[c_eps].clone()))
            .or_default()
            .insert(row[c_seed].clone(), row);
    }
    if reference.is_empty() {
        return Err(Error::InvalidDataset(format!("no rows for reference method {:?}", args.reference)));
    }
    let mut methods: Vec<&String> = table.rows.iter().map(|r| &r[c_method]).filter(|m| **m != args.reference).collect();
    methods.sort();
    methods.dedup();

    let mut out = Vec::new();
    for ((ds, setting, eps), ref_rows) in &reference {
        for &method in &methods {
            // Baselines without a budget are matched against every reference budget.
            let partner: BTreeMap<&String, &Vec<String>> = table
                .rows
                .iter()
                .filter(|r| {
                    &r[c_method] == method
                        && &r[c_ds] == ds
                        && &r[c_setting] == setting
                        && (&r[c_eps] == eps || r[c_eps].is_empty())
                })
                .map(|r| (&r[c_seed], r))
                .collect();
            for (metric, c) in &metric_cols {
                let mut a = Vec::new();
                let mut b = Vec::new();
                for (seed, row) in ref_rows {
                    if let Some(other) = partner.get(seed) {
                        a.push(parse_cell(&row[*c], metric)?);
                        b.push(parse_cell(&other[*c], metric)?);
                    }
                }
                if a.len() < 2 {
                    continue;
                }
                let r = paired_t_test(&a, &b)?;
                let mean_diff = a.iter().zip(&b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64;
                out.push(vec![
                    ds.clone(),
                    setting.clone(),
                    eps.clone(),
                    args.reference.clone(),
                    method.clone(),
                    metric.clone(),
                    a.len().to_string(),
                    mean_diff.to_string(),
                    r.t.to_string(),
                    r.p.to_string(),
                ]);
            }
        }
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let path: &Path = &args.out.join("ttest.csv");
    let file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    write_rows(
        file,
        &["dataset", "setting", "epsilon", "reference", "method", "metric", "n", "mean_diff", "t", "p"],
        &out,
    )?;
    info!("wrote {} tests to {}", out.len(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(a) => run_experiment(a, run_tradeoff_sweep, false),
        Command::Compare(a) => run_experiment(a, run_baseline_comparison, false),
        Command::Ablate(a) => run_experiment(a, run_ablation, true),
        Command::Sensitivity(a) => run_experiment(a, run_sensitivity, true),
        Command::Theory(a) => run_theory(a),
        Command::Ttest(a) => run_ttest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_config_error() => {
            error!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(3)
        }
    }
}

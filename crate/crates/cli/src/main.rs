use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hgfnd::analysis::{
    ablate_hyperedge_types, attention_user_sampling, baseline_clique_gnn, credibility_csv, credibility_table, evaluate,
    parse_credibility_csv, sampling_csv, sweep_label_fraction, ResultTable, RunOptions, SamplingRow,
};
use hgfnd::data::{generate_synthetic, load_dataset, write_dataset, write_matrix, DatasetPaths, FeatureMatrix};
use hgfnd::hypergraph::{build_hypergraph, read_hypergraph, stats, write_hypergraph, HypergraphStats};
use hgfnd::model::{forward, PreparedData};
use hgfnd::train::{grad_check_report, gradcheck_fixture, load_checkpoint, peek_checkpoint, save_checkpoint, train};
use hgfnd::{
    Dataset, HyperedgeKind, Hypergraph, Metrics, ModelParams, ModelShape, Precision, Scalar, Split, SyntheticConfig,
    TimeGranularity, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "hgfnd",
    version,
    about = "Hypergraph attention networks for fake news detection"
)]
struct Cli {
    /// Overrides the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the precision from the config file.
    #[arg(long, global = true, value_parser = parse_precision)]
    precision: Option<Precision>,
    /// Worker threads for parallel kernels and experiment cells.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    s.parse()
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Granularity {
    Day,
    Hour,
}

impl From<Granularity> for TimeGranularity {
    fn from(g: Granularity) -> Self {
        match g {
            Granularity::Day => TimeGranularity::Day,
            Granularity::Hour => TimeGranularity::Hour,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Args)]
struct DatasetArg {
    /// Directory holding features.hgfd, trees.jsonl, labels.csv, splits.csv, ...
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args)]
struct ConfigArg {
    /// `key = value` training config; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    dataset: DatasetArg,
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    #[arg(long, value_enum, default_value = "day")]
    time_granularity: Granularity,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted user credibility.
    SynthGen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        n_news: usize,
        #[arg(long, default_value_t = 100)]
        n_users: usize,
        #[arg(long, default_value_t = 0.5)]
        fake_fraction: f64,
        #[arg(long, default_value_t = 0.95)]
        fidelity: f64,
        #[arg(long, default_value_t = 32)]
        feature_dim: usize,
        #[arg(long, default_value_t = 1.0)]
        signal: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
    },
    /// Build the hypergraph of a dataset.
    BuildHypergraph {
        #[command(flatten)]
        dataset: DatasetArg,
        #[arg(long, value_delimiter = ',', default_value = "user,time,entity")]
        kinds: Vec<HyperedgeKind>,
        #[arg(long, value_enum, default_value = "day")]
        time_granularity: Granularity,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-kind hyperedge counts, sizes and node degrees.
    Stats {
        #[arg(long)]
        hypergraph: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Train a model and save its best-validation parameters.
    Train {
        #[command(flatten)]
        dataset: DatasetArg,
        #[arg(long)]
        hypergraph: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out_checkpoint: PathBuf,
        /// JSON training report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Metrics of a checkpoint on one split.
    Evaluate {
        #[command(flatten)]
        dataset: DatasetArg,
        #[arg(long)]
        hypergraph: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Train and test one model per hyperedge-kind subset and seed.
    Ablate {
        #[command(flatten)]
        experiment: ExperimentArgs,
    },
    /// Train and test with a reduced share of training labels.
    SweepLabels {
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[arg(long, value_delimiter = ',', default_value = "1.0,0.75,0.5,0.25")]
        fractions: Vec<f64>,
    },
    /// Two-layer mean-aggregation network on the clique expansion.
    BaselineClique {
        #[command(flatten)]
        dataset: DatasetArg,
        #[arg(long)]
        hypergraph: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Credibility and mean attention of every user hyperedge.
    Credibility {
        #[command(flatten)]
        dataset: DatasetArg,
        #[arg(long)]
        hypergraph: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Final-layer hyperedge representations as a feature matrix file.
        #[arg(long)]
        edge_states: Option<PathBuf>,
    },
    /// High/low credibility shares among the most and least attended users.
    AttentionSample {
        #[arg(long)]
        credibility: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.15,0.2,0.25")]
        ratios: Vec<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

struct Globals {
    seed: Option<u64>,
    precision: Option<Precision>,
}

impl Globals {
    fn config(&self, arg: &ConfigArg) -> Result<TrainConfig> {
        let mut config = match &arg.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                TrainConfig::parse(&text)?
            }
            None => TrainConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(precision) = self.precision {
            config.precision = precision;
        }
        config.validate()?;
        Ok(config)
    }
}

fn load(arg: &DatasetArg) -> Result<Dataset> {
    load_dataset(&DatasetPaths::in_dir(&arg.dataset))
        .with_context(|| format!("loading dataset from {}", arg.dataset.display()))
}

fn load_graph(path: &Path, dataset: &Dataset) -> Result<Hypergraph> {
    let graph = read_hypergraph(path)?;
    if graph.n_nodes() != dataset.len() {
        bail!(
            "hypergraph {} has {} nodes but the dataset has {} news items",
            path.display(),
            graph.n_nodes(),
            dataset.len()
        );
    }
    Ok(graph)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Rebuilds the parameter template from the checkpoint's own tensor shapes.
fn load_model<T: Scalar>(path: &Path) -> Result<ModelParams<T>> {
    let info = peek_checkpoint(path)?;
    let dims = info
        .dims("encoder.input.w")
        .with_context(|| format!("{} is not a model checkpoint", path.display()))?;
    let template = ModelParams::zeros(ModelShape::new(dims[0], dims[1]));
    Ok(load_checkpoint(path, &template)?)
}

fn table_text(table: &ResultTable, format: Format) -> String {
    match format {
        Format::Csv => table.to_csv(),
        Format::Text => table.to_text(),
    }
}

fn metrics_text(split: &str, m: &Metrics, format: Format) -> String {
    match format {
        Format::Csv => format!("split,{}\n{split},{}\n", Metrics::CSV_HEADER, m.csv_row()),
        Format::Text => format!("{split}: {m}\n"),
    }
}

fn stats_text(s: &HypergraphStats, format: Format) -> String {
    match format {
        Format::Csv => s.to_csv(),
        Format::Text => {
            let mut out = format!(
                "{:<8} {:>10} {:>9} {:>8} {:>10} {:>10}\n",
                "scope", "hyperedges", "mean size", "max size", "mean deg", "max deg"
            );
            for r in &s.rows {
                out.push_str(&format!(
                    "{:<8} {:>10} {:>9.2} {:>8} {:>10.2} {:>10}\n",
                    r.scope, r.hyperedges, r.mean_size, r.max_size, r.mean_degree, r.max_degree
                ));
            }
            out
        }
    }
}

fn sampling_text(rows: &[SamplingRow], format: Format) -> String {
    match format {
        Format::Csv => sampling_csv(rows),
        Format::Text => {
            let mut out = format!(
                "{:>6} {:>6} {:>9} {:>9} {:>12} {:>12}\n",
                "ratio", "count", "top high", "top low", "bottom high", "bottom low"
            );
            for r in rows {
                out.push_str(&format!(
                    "{:>6.2} {:>6} {:>8.1}% {:>8.1}% {:>11.1}% {:>11.1}%\n",
                    r.ratio, r.count, r.top_high, r.top_low, r.bottom_high, r.bottom_low
                ));
            }
            out
        }
    }
}

fn train_to_checkpoint<T: Scalar>(
    config: &TrainConfig,
    dataset: &Dataset,
    graph: &Hypergraph,
    checkpoint: &Path,
    report_path: Option<&Path>,
) -> Result<()> {
    let (params, report) = train::<T>(config, dataset, graph)?;
    save_checkpoint(checkpoint, &params)?;
    if let Some(path) = report_path {
        write_text(path, &serde_json::to_string_pretty(&report)?)?;
    }
    println!(
        "epochs {} (best {}{}), {:.1}s",
        report.epochs.len(),
        report.best_epoch,
        if report.stopped_early { ", stopped early" } else { "" },
        report.wall_seconds
    );
    if let Some(val) = report.val {
        println!("val:  {val}");
    }
    if let Some(test) = report.test {
        println!("test: {test}");
    }
    Ok(())
}

fn evaluate_checkpoint<T: Scalar>(path: &Path, dataset: &Dataset, graph: &Hypergraph, split: Split) -> Result<Metrics> {
    let params = load_model::<T>(path)?;
    Ok(evaluate(
        &params,
        dataset,
        graph,
        split,
        TrainConfig::default().batch_size,
    )?)
}

fn credibility_outputs<T: Scalar>(
    path: &Path,
    dataset: &Dataset,
    graph: &Hypergraph,
    out: &Path,
    edge_states: Option<&Path>,
) -> Result<usize> {
    let params = load_model::<T>(path)?;
    let pass = forward(
        &params,
        &PreparedData::new(dataset, TrainConfig::default().batch_size),
        graph,
        None,
    )?;
    let records = credibility_table(dataset, graph, &pass.snapshot)?;
    write_text(out, &credibility_csv(&records))?;
    if let Some(edge_path) = edge_states {
        let states = &pass.hyperedge_states;
        let matrix = FeatureMatrix {
            rows: states.nrows(),
            cols: states.ncols(),
            data: states.iter().map(|v| v.to_f32().unwrap_or(f32::NAN)).collect(),
        };
        write_matrix(edge_path, &matrix)?;
    }
    Ok(records.len())
}

fn run(cli: Cli) -> Result<bool> {
    let globals = Globals {
        seed: cli.seed,
        precision: cli.precision,
    };
    match cli.command {
        Command::SynthGen {
            out,
            n_news,
            n_users,
            fake_fraction,
            fidelity,
            feature_dim,
            signal,
            noise,
        } => {
            let config = SyntheticConfig {
                n_news,
                n_users,
                fake_fraction,
                user_fidelity: fidelity,
                feature_dim,
                signal_strength: signal,
                noise_scale: noise,
                seed: globals.seed.unwrap_or(0),
            };
            let dataset = generate_synthetic(&config)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_dataset(&dataset, &DatasetPaths::in_dir(&out))?;
            println!(
                "wrote {} news ({} train, {} val, {} test) to {}",
                dataset.len(),
                dataset.splits.train.len(),
                dataset.splits.val.len(),
                dataset.splits.test.len(),
                out.display()
            );
        }
        Command::BuildHypergraph {
            dataset,
            kinds,
            time_granularity,
            out,
        } => {
            let ds = load(&dataset)?;
            let graph = build_hypergraph(&ds, &kinds, time_granularity.into())?;
            write_hypergraph(&out, &graph)?;
            println!(
                "{} nodes, {} hyperedges, {} isolated nodes",
                graph.n_nodes(),
                graph.n_hyperedges(),
                graph.isolated_nodes()
            );
        }
        Command::Stats { hypergraph, format } => {
            print!("{}", stats_text(&stats(&read_hypergraph(&hypergraph)?), format));
        }
        Command::Train {
            dataset,
            hypergraph,
            config,
            out_checkpoint,
            report,
        } => {
            let config = globals.config(&config)?;
            let ds = load(&dataset)?;
            let graph = load_graph(&hypergraph, &ds)?;
            let report = report.as_deref();
            match config.precision {
                Precision::F32 => train_to_checkpoint::<f32>(&config, &ds, &graph, &out_checkpoint, report)?,
                Precision::F64 => train_to_checkpoint::<f64>(&config, &ds, &graph, &out_checkpoint, report)?,
            }
        }
        Command::Gradcheck { d, n, m, tolerance } => {
            let seed = globals.seed.unwrap_or(0);
            let (ds, graph, params) = gradcheck_fixture(n, m, d, seed)?;
            let report = grad_check_report(&params, &ds, &graph, 8, tolerance, seed)?;
            println!("{:<20} {:>8} {:>14}", "tensor", "checked", "max rel error");
            for t in &report.tensors {
                let flag = if t.max_rel_error < tolerance { "" } else { "  FAIL" };
                println!("{:<20} {:>8} {:>14.3e}{flag}", t.name, t.checked, t.max_rel_error);
            }
            println!(
                "max relative error {:.3e} (tolerance {tolerance:e})",
                report.max_rel_error()
            );
            return Ok(report.passed());
        }
        Command::Evaluate {
            dataset,
            hypergraph,
            checkpoint,
            split,
            format,
        } => {
            let ds = load(&dataset)?;
            let graph = load_graph(&hypergraph, &ds)?;
            let split: Split = split.into();
            let metrics = match peek_checkpoint(&checkpoint)?.precision {
                Precision::F32 => evaluate_checkpoint::<f32>(&checkpoint, &ds, &graph, split)?,
                Precision::F64 => evaluate_checkpoint::<f64>(&checkpoint, &ds, &graph, split)?,
            };
            print!("{}", metrics_text(split.as_str(), &metrics, format));
        }
        Command::Ablate { experiment } => {
            let ds = load(&experiment.dataset)?;
            let options = RunOptions {
                train: globals.config(&experiment.config)?,
                granularity: experiment.time_granularity.into(),
                ..Default::default()
            };
            let table = ablate_hyperedge_types(&options, &ds, &experiment.seeds)?;
            print!("{}", table_text(&table, experiment.format));
        }
        Command::SweepLabels { experiment, fractions } => {
            let ds = load(&experiment.dataset)?;
            let options = RunOptions {
                train: globals.config(&experiment.config)?,
                granularity: experiment.time_granularity.into(),
                ..Default::default()
            };
            let table = sweep_label_fraction(&options, &ds, &fractions, &experiment.seeds)?;
            print!("{}", table_text(&table, experiment.format));
        }
        Command::BaselineClique {
            dataset,
            hypergraph,
            config,
            format,
        } => {
            let config = globals.config(&config)?;
            let ds = load(&dataset)?;
            let graph = load_graph(&hypergraph, &ds)?;
            let metrics = baseline_clique_gnn(&config, &ds, &graph)?;
            print!("{}", metrics_text("test", &metrics, format));
        }
        Command::Credibility {
            dataset,
            hypergraph,
            checkpoint,
            out,
            edge_states,
        } => {
            let ds = load(&dataset)?;
            let graph = load_graph(&hypergraph, &ds)?;
            let edge_states = edge_states.as_deref();
            let count = match peek_checkpoint(&checkpoint)?.precision {
                Precision::F32 => credibility_outputs::<f32>(&checkpoint, &ds, &graph, &out, edge_states)?,
                Precision::F64 => credibility_outputs::<f64>(&checkpoint, &ds, &graph, &out, edge_states)?,
            };
            println!("wrote {count} user hyperedges to {}", out.display());
        }
        Command::AttentionSample {
            credibility,
            ratios,
            format,
        } => {
            let text =
                fs::read_to_string(&credibility).with_context(|| format!("reading {}", credibility.display()))?;
            let rows = attention_user_sampling(&parse_credibility_csv(&text)?, &ratios)?;
            print!("{}", sampling_text(&rows, format));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

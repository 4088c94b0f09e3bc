//! `flowsynth` — fit a generative model to a reference netflow CSV, sample
//! synthetic dataset ensembles, and score them against the reference.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/model error, 3 internal
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use flowsynth_core::baselines::BaselineKind;
use flowsynth_core::pipeline::{
    cmd_baseline, cmd_evaluate, cmd_fit, cmd_generate, load_bundle, PipelineConfig,
};
use flowsynth_core::Error;

#[derive(Parser)]
#[command(name = "flowsynth", version, about = "Synthetic netflow dataset generation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the structure, feature, and alignment models to a reference CSV.
    Fit {
        #[command(flatten)]
        common: Box<CommonArgs>,
    },
    /// Sample an ensemble of synthetic datasets from a fitted model.
    Generate {
        #[command(flatten)]
        common: Box<CommonArgs>,
        /// Member count; defaults to the configured ensemble size.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Score an ensemble directory against a reference CSV.
    Evaluate {
        #[command(flatten)]
        common: Box<CommonArgs>,
        /// Reference dataset (same schema settings as `fit`).
        #[arg(long)]
        reference: PathBuf,
        /// Directory holding member CSVs and ensemble.json.
        #[arg(long)]
        ensemble_dir: PathBuf,
        /// Where reports land; defaults to <ensemble-dir>/evaluation.
        #[arg(long)]
        report_dir: Option<PathBuf>,
    },
    /// Generate a comparison baseline ensemble (random feature resampling).
    Baseline {
        #[command(flatten)]
        common: Box<CommonArgs>,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Member count; defaults to the configured ensemble size.
        #[arg(long)]
        count: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Random,
    ScaleFree,
    Rmat2,
}

impl From<KindArg> for BaselineKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Random => BaselineKind::Random,
            KindArg::ScaleFree => BaselineKind::ScaleFree,
            KindArg::Rmat2 => BaselineKind::Rmat2,
        }
    }
}

/// Flag overrides applied on top of the (optional) TOML config file.
#[derive(Args)]
struct CommonArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    model_dir: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    day_length: Option<f64>,
    #[arg(long)]
    ensemble_size: Option<usize>,
    /// Worker threads for ensemble work; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated initiator sizes tried during fitting.
    #[arg(long, value_delimiter = ',')]
    n1_candidates: Option<Vec<usize>>,
    #[arg(long)]
    fit_iterations: Option<usize>,
    #[arg(long)]
    fit_learning_rate: Option<f64>,
    #[arg(long)]
    feature_modes: Option<usize>,
    /// Alignment score threshold; lower scores become probability zero.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    alignment_learning_rate: Option<f64>,
    /// Fraction of (edge, flow) pairs used as scorer training data.
    #[arg(long)]
    sample_fraction: Option<f64>,
    /// Fraction of synthetic edges scored per feature row.
    #[arg(long)]
    score_sample: Option<f64>,
    #[arg(long)]
    target_nodes: Option<usize>,
    #[arg(long)]
    target_edges: Option<usize>,
    #[arg(long)]
    target_flows: Option<usize>,
    /// Input column names for foreign CSVs.
    #[arg(long)]
    col_src: Option<String>,
    #[arg(long)]
    col_dst: Option<String>,
    #[arg(long)]
    col_start: Option<String>,
    #[arg(long)]
    col_end: Option<String>,
    #[arg(long)]
    col_duration: Option<String>,
    #[arg(long)]
    col_port: Option<String>,
    #[arg(long)]
    col_protocol: Option<String>,
    #[arg(long)]
    col_port_protocol: Option<String>,
}

impl CommonArgs {
    fn build_config(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let body = std::fs::read_to_string(path).map_err(|e| {
                    Error::Data(format!("config file {} unreadable: {e}", path.display()))
                })?;
                toml::from_str::<PipelineConfig>(&body)
                    .map_err(|e| Error::Data(format!("config file {}: {e}", path.display())))?
            }
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = &$value {
                    $field = v.clone();
                }
            };
        }
        set!(cfg.input, self.input);
        set!(cfg.model_dir, self.model_dir);
        set!(cfg.output_dir, self.output_dir);
        set!(cfg.seed, self.seed);
        set!(cfg.day_length, self.day_length);
        set!(cfg.ensemble_size, self.ensemble_size);
        set!(cfg.workers, self.workers);
        set!(cfg.n1_candidates, self.n1_candidates);
        set!(cfg.fit_iterations, self.fit_iterations);
        set!(cfg.fit_learning_rate, self.fit_learning_rate);
        set!(cfg.feature_modes, self.feature_modes);
        set!(cfg.alignment.threshold, self.threshold);
        set!(cfg.alignment.trees, self.trees);
        set!(cfg.alignment.depth, self.depth);
        set!(cfg.alignment.learning_rate, self.alignment_learning_rate);
        set!(cfg.alignment.sample_fraction, self.sample_fraction);
        set!(cfg.alignment.score_sample, self.score_sample);
        if self.target_nodes.is_some() {
            cfg.target_nodes = self.target_nodes;
        }
        if self.target_edges.is_some() {
            cfg.target_edges = self.target_edges;
        }
        if self.target_flows.is_some() {
            cfg.target_flows = self.target_flows;
        }
        set!(cfg.schema.src, self.col_src);
        set!(cfg.schema.dst, self.col_dst);
        set!(cfg.schema.start, self.col_start);
        if self.col_end.is_some() {
            cfg.schema.end = self.col_end.clone();
            cfg.schema.duration = None;
        }
        if self.col_duration.is_some() {
            cfg.schema.duration = self.col_duration.clone();
            cfg.schema.end = None;
        }
        if self.col_port.is_some() || self.col_protocol.is_some() {
            cfg.schema.port = self.col_port.clone();
            cfg.schema.protocol = self.col_protocol.clone();
            cfg.schema.port_protocol = None;
        }
        if self.col_port_protocol.is_some() {
            cfg.schema.port_protocol = self.col_port_protocol.clone();
        }
        Ok(cfg)
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Fit { common } => {
            let config = common.build_config()?;
            let bundle = cmd_fit(&config)?;
            println!(
                "fit: model written to {} (N={}, E={}, M={}, n1={}, bic={:.2})",
                config.model_dir.display(),
                bundle.manifest.node_count,
                bundle.manifest.static_edges,
                bundle.manifest.flow_count,
                bundle.initiator.n1(),
                bundle.initiator.bic,
            );
            Ok(())
        }
        Command::Generate { common, count } => {
            let config = common.build_config()?;
            let bundle = load_bundle(&config.model_dir)?;
            let count = count.unwrap_or(config.ensemble_size);
            let manifest = cmd_generate(&config, &bundle, count)?;
            println!(
                "generate: {} members in {} (N={}, E={}, M={})",
                manifest.members.len(),
                config.output_dir.display(),
                manifest.node_count,
                manifest.target_edges,
                manifest.flow_count,
            );
            Ok(())
        }
        Command::Evaluate {
            common,
            reference,
            ensemble_dir,
            report_dir,
        } => {
            let config = common.build_config()?;
            let out_dir = report_dir.unwrap_or_else(|| ensemble_dir.join("evaluation"));
            let output = cmd_evaluate(&config, &reference, &ensemble_dir, &out_dir)?;
            let fmt = |v: Option<f64>| match v {
                Some(x) => format!("{x:.4}"),
                None => "undefined".to_string(),
            };
            println!(
                "evaluate: A={:.4} D={} R={} bias={} variability={} E={} -> {}",
                output.ensemble.accuracy,
                fmt(output.ensemble.diversity),
                fmt(output.ensemble.radius),
                fmt(output.ensemble.bias),
                fmt(output.ensemble.variability),
                fmt(output.ensemble.error),
                out_dir.display(),
            );
            Ok(())
        }
        Command::Baseline {
            common,
            kind,
            count,
        } => {
            let config = common.build_config()?;
            let count = count.unwrap_or(config.ensemble_size);
            let kind: BaselineKind = kind.into();
            let manifest = cmd_baseline(&config, kind, count)?;
            println!(
                "baseline {kind}: {} members in {}",
                manifest.members.len(),
                config.output_dir.display(),
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version through the same path
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Schema(_)
                | Error::Data(_)
                | Error::Infeasible(_)
                | Error::Fit(_)
                | Error::Encoding(_)
                | Error::Io(_)
                | Error::Csv(_) => 2,
                Error::Json(_) => 3,
            };
            ExitCode::from(code)
        }
    }
}

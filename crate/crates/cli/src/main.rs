use std::path::PathBuf;
use std::process::ExitCode;

use affinity_cli::bench::{run_bench, to_csv};
use affinity_cli::commands::{
    cmd_compare, cmd_graph, cmd_ingest, cmd_partition, cmd_plan, cmd_simulate,
};
use affinity_cli::io::{emit, to_json};
use affinity_cli::{CliError, Config, Overrides};
use affinity_core::{AffinityWeights, NodeId, TraceFormat};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "affinity",
    version,
    about = "Service-affinity partitioning and placement"
)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true, env = "SAGA_CONFIG")]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Dot,
}

#[derive(Args, Default)]
struct ModelFlags {
    /// Affinity weights as `data,privacy,coupling,functional,operational`.
    #[arg(long, value_parser = parse_weights)]
    weights: Option<AffinityWeights>,
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated node names.
    #[arg(long, value_delimiter = ',')]
    nodes: Option<Vec<String>>,
    #[arg(long)]
    local_ms: Option<f64>,
    #[arg(long)]
    remote_ms: Option<f64>,
    /// Enables random-restart seeding with this seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a trace and aggregate a time window.
    Ingest {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long)]
        trace_format: Option<TraceFormat>,
        /// Skip malformed lines instead of failing.
        #[arg(long)]
        lenient: bool,
        #[arg(long)]
        window_start: Option<u64>,
        #[arg(long)]
        window_end: Option<u64>,
    },
    /// Build the affinity graph of a window.
    Graph {
        #[arg(long)]
        window: PathBuf,
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Partition a graph into k clusters.
    Partition {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Plan the moves from a current placement to the partition.
    Plan {
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        current: PathBuf,
        /// Also write the target placement here.
        #[arg(long)]
        placement_output: Option<PathBuf>,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Simulate a placement, or compare two simulation reports.
    Simulate {
        #[arg(long, required_unless_present = "compare")]
        placement: Option<PathBuf>,
        #[arg(long, required_unless_present = "compare")]
        window: Option<PathBuf>,
        #[arg(long, required_unless_present = "compare")]
        graph: Option<PathBuf>,
        /// Two SimReport files: BEFORE AFTER.
        #[arg(long, num_args = 2, value_names = ["BEFORE", "AFTER"], conflicts_with_all = ["placement", "window", "graph"])]
        compare: Option<Vec<PathBuf>>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Time partitioning over a grid of graph sizes and cluster counts.
    Bench {
        #[arg(long = "n", value_delimiter = ',', default_values_t = [100, 200, 300, 400, 500])]
        n_list: Vec<usize>,
        #[arg(long = "k", value_delimiter = ',', default_values_t = [10, 20, 30, 40, 50])]
        k_list: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn parse_weights(s: &str) -> Result<AffinityWeights, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    let [d, p, c, f, o] = parts[..] else {
        return Err("expected five comma-separated weights".into());
    };
    AffinityWeights::new(d, p, c, f, o).map_err(|e| e.to_string())
}

impl ModelFlags {
    fn overrides(&self) -> Result<Overrides, CliError> {
        let nodes = match &self.nodes {
            Some(names) => Some(
                names
                    .iter()
                    .map(|n| NodeId::new(n.as_str()))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| CliError::Usage(e.to_string()))?,
            ),
            None => None,
        };
        Ok(Overrides {
            weights: self.weights,
            k: self.k,
            nodes,
            local_ms: self.local_ms,
            remote_ms: self.remote_ms,
            seed: self.seed,
            restarts: self.restarts,
            ..Default::default()
        })
    }
}

fn check_format(format: Format, allowed: &[Format], command: &str) -> Result<(), CliError> {
    if allowed.contains(&format) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "`{command}` does not support this --format"
        )))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli.config.as_deref();
    let out = cli.output.as_deref();
    match cli.command {
        Command::Ingest {
            trace,
            meta,
            trace_format,
            lenient,
            window_start,
            window_end,
        } => {
            let overrides = Overrides {
                trace_format,
                lenient,
                window_start,
                window_end,
                ..Default::default()
            };
            let config = Config::load(config_path, &overrides)?;
            let outcome = cmd_ingest(&trace, meta.as_deref(), &config)?;
            if outcome.skipped > 0 {
                eprintln!("warning: skipped {} malformed line(s)", outcome.skipped);
            }
            if outcome.window.is_empty_window() {
                eprintln!("warning: no records fell inside the window");
            }
            emit(out, &to_json(&outcome.window))
        }
        Command::Graph {
            window,
            meta,
            format,
            model,
        } => {
            check_format(format, &[Format::Json, Format::Dot], "graph")?;
            let config = Config::load(config_path, &model.overrides()?)?;
            let g = cmd_graph(&window, meta.as_deref(), &config)?;
            match format {
                Format::Dot => emit(out, &g.to_dot(None)),
                _ => emit(out, &to_json(&g)),
            }
        }
        Command::Partition {
            graph,
            format,
            model,
        } => {
            check_format(format, &[Format::Json, Format::Dot], "partition")?;
            let config = Config::load(config_path, &model.overrides()?)?;
            let outcome = cmd_partition(&graph, &config)?;
            match format {
                Format::Dot => emit(out, &outcome.graph.to_dot(Some(&outcome.partition))),
                _ => emit(out, &to_json(&outcome.report)),
            }
        }
        Command::Plan {
            partition,
            current,
            placement_output,
            model,
        } => {
            let config = Config::load(config_path, &model.overrides()?)?;
            let outcome = cmd_plan(&partition, &current, &config)?;
            if let Some(p) = placement_output.as_deref() {
                emit(Some(p), &to_json(&outcome.target))?;
            }
            emit(out, &to_json(&outcome.plan))
        }
        Command::Simulate {
            placement,
            window,
            graph,
            compare,
            format,
            model,
        } => {
            if let Some(files) = compare {
                check_format(format, &[Format::Json, Format::Csv], "simulate --compare")?;
                let outcome = cmd_compare(&files[0], &files[1])?;
                return match format {
                    Format::Csv => emit(out, &outcome.csv),
                    _ => emit(out, &to_json(&outcome.improvement)),
                };
            }
            check_format(format, &[Format::Json], "simulate")?;
            let config = Config::load(config_path, &model.overrides()?)?;
            let need = |p: Option<PathBuf>, flag: &str| {
                p.ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
            };
            let report = cmd_simulate(
                &need(placement, "placement")?,
                &need(window, "window")?,
                &need(graph, "graph")?,
                &config,
            )?;
            emit(out, &to_json(&report))
        }
        Command::Bench {
            n_list,
            k_list,
            repeats,
            seed,
        } => {
            let rows = run_bench(&n_list, &k_list, repeats, seed)?;
            emit(out, &to_csv(&rows))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}

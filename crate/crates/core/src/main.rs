use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use tsflow::cli::{self, CliError, CliResult, DemandSource, Hard6Options};
use tsflow::rational::parse_rational;

#[derive(Parser)]
#[command(name = "tsflow", version, about = "Tight spans, flow sparsifiers and the six-terminal hard instance")]
struct Args {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "TSFLOW_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Enumerate the tight-span complex of a metric file.
    Tightspan { metric: PathBuf },
    /// Project a vector into the tight span of a metric.
    Project {
        metric: PathBuf,
        /// Comma-separated rationals, one per terminal.
        #[arg(allow_hyphen_values = true)]
        vector: String,
    },
    /// Sample decompositions of a graph with at most five terminals.
    Sparsify {
        graph: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Compare congestion of two graphs over a set of demands.
    Quality {
        graph_g: PathBuf,
        graph_h: PathBuf,
        /// Demand file.
        #[arg(long, conflicts_with = "random_demands")]
        demand: Option<PathBuf>,
        /// Number of random demands (needs --seed).
        #[arg(long, requires = "seed")]
        random_demands: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
    /// Generate the six-terminal hard instance and its loss diagnostics.
    Hard6 {
        #[arg(long = "L")]
        l: i64,
        #[arg(long)]
        ave: bool,
        #[arg(long, default_value = "1/1000000000000000")]
        gamma: String,
        #[arg(long)]
        snap_grid: Option<i64>,
        /// Directory for the instance graph and its JSON sidecar.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(p: &Path) -> CliResult<String> {
    fs::read_to_string(p).map_err(|e| CliError::Input(format!("cannot read {}: {e}", p.display())))
}

fn run(args: Args) -> CliResult<Value> {
    match args.cmd {
        Cmd::Tightspan { metric } => cli::cmd_tightspan(&read(&metric)?),
        Cmd::Project { metric, vector } => cli::cmd_project(&read(&metric)?, &vector),
        Cmd::Sparsify { graph, seed, samples } => cli::cmd_sparsify(&read(&graph)?, seed, samples),
        Cmd::Quality { graph_g, graph_h, demand, random_demands, seed, epsilon } => {
            let (g, h) = (read(&graph_g)?, read(&graph_h)?);
            match (demand, random_demands) {
                (Some(d), _) => cli::cmd_quality(&g, &h, DemandSource::File(&read(&d)?), epsilon),
                (None, Some(count)) => {
                    let seed = seed.ok_or_else(|| CliError::Input("--random-demands needs --seed".into()))?;
                    cli::cmd_quality(&g, &h, DemandSource::Random { count, seed }, epsilon)
                }
                (None, None) => Err(CliError::Input("give --demand or --random-demands".into())),
            }
        }
        Cmd::Hard6 { l, ave, gamma, snap_grid, out } => {
            let gamma =
                parse_rational(&gamma).ok_or_else(|| CliError::Input(format!("malformed rational `{gamma}`")))?;
            let o = cli::cmd_hard6(&Hard6Options { l, ave, gamma, snap_grid })?;
            if let Some(dir) = out {
                let write = |name: String, text: String| {
                    fs::write(dir.join(&name), text).map_err(|e| CliError::Input(format!("cannot write {name}: {e}")))
                };
                fs::create_dir_all(&dir)
                    .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
                write(format!("hard6_L{l}.graph"), o.graph_text)?;
                write(format!("hard6_L{l}.json"), format!("{}\n", o.sidecar))?;
            }
            Ok(o.report)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let format = args.format;
    match run(args) {
        Ok(v) => {
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&v).expect("serializable")),
                Format::Text => print!("{}", cli::render_text(&v)),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

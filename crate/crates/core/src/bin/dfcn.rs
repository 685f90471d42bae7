use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dfcn::cli::{
    cmd_eval, cmd_prepare, cmd_sweep, cmd_synth, cmd_train, seed_from_env, Ablation, EvalSource, GraphSource,
    SweepArgs, SynthArgs, TrainArgs,
};
use dfcn::graph::Bandwidth;
use dfcn::{DfcnError, Result};

#[derive(Parser)]
#[command(name = "dfcn", version, about = "Deep fusion clustering for attributed graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph bundle from an attribute CSV plus an edge list or a KNN graph.
    Prepare {
        attrs: PathBuf,
        /// Edge list, one "u v" pair per line.
        #[arg(long, conflicts_with = "knn")]
        edges: Option<PathBuf>,
        /// Build a heat-kernel KNN graph with this many neighbors instead.
        #[arg(long)]
        knn: Option<usize>,
        /// Heat-kernel bandwidth, or "auto".
        #[arg(long, default_value = "auto")]
        heat: String,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a stochastic block model into a bundle.
    Synth {
        #[arg(long)]
        blocks: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_out: f64,
        #[arg(long)]
        sep: f64,
        #[arg(long, default_value_t = 10)]
        attr_dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a bundle and write checkpoint, reports, curves, embedding, and labels.
    Train {
        bundle: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// no-fusion, single, lw, or la; repeatable.
        #[arg(long)]
        ablate: Vec<String>,
    },
    /// Score predicted labels, or a checkpoint's clustering, against the bundle's labels.
    Eval {
        bundle: PathBuf,
        #[arg(long, conflicts_with = "checkpoint", required_unless_present = "checkpoint")]
        labels: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train once per value of one config key and tabulate the metrics.
    Sweep {
        bundle: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn train_args(bundle: PathBuf, config: Option<PathBuf>, out: PathBuf, ablate: &[String]) -> Result<TrainArgs> {
    Ok(TrainArgs {
        bundle,
        config,
        out,
        ablations: ablate.iter().map(|a| a.parse()).collect::<Result<Vec<Ablation>>>()?,
        seed_override: seed_from_env()?,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare {
            attrs,
            edges,
            knn,
            heat,
            meta,
            out,
        } => {
            let graph = match (edges, knn) {
                (Some(e), None) => GraphSource::Edges(e),
                (None, Some(k)) => {
                    let bandwidth = if heat == "auto" {
                        Bandwidth::Auto
                    } else {
                        Bandwidth::Fixed(
                            heat.parse()
                                .map_err(|_| DfcnError::Validation(format!("--heat: not a number: {heat:?}")))?,
                        )
                    };
                    GraphSource::Knn { k, bandwidth }
                }
                _ => return Err(DfcnError::Validation("give exactly one of --edges or --knn".into())),
            };
            let m = cmd_prepare(&attrs, &graph, &meta, &out)?;
            println!("wrote {} (n={}, d={}, k={})", out.display(), m.n, m.d, m.k);
        }
        Command::Synth {
            blocks,
            sizes,
            p_in,
            p_out,
            sep,
            attr_dim,
            seed,
            out,
        } => {
            let args = SynthArgs {
                blocks,
                sizes,
                p_in,
                p_out,
                attr_dim,
                sep,
                seed,
            };
            let m = cmd_synth(&args, &out)?;
            println!("wrote {} (n={}, d={}, k={})", out.display(), m.n, m.d, m.k);
        }
        Command::Train {
            bundle,
            config,
            out,
            ablate,
        } => {
            let report = cmd_train(&train_args(bundle, config, out.clone(), &ablate)?)?;
            match &report.metrics {
                Some(m) => println!("acc {:.4} nmi {:.4} ari {:.4} f1 {:.4}", m.acc, m.nmi, m.ari, m.f1),
                None => println!("trained; no ground truth in bundle"),
            }
            println!("outputs in {}", out.display());
        }
        Command::Eval {
            bundle,
            labels,
            checkpoint,
        } => {
            let source = match (labels, checkpoint) {
                (Some(l), _) => EvalSource::Labels(l),
                (None, Some(c)) => EvalSource::Checkpoint(c),
                (None, None) => unreachable!("clap requires one source"),
            };
            let report = cmd_eval(&bundle, &source)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Sweep {
            bundle,
            config,
            param,
            values,
            out,
        } => {
            let args = SweepArgs {
                train: train_args(bundle, config, out, &[])?,
                param,
                values,
            };
            print!("{}", cmd_sweep(&args)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

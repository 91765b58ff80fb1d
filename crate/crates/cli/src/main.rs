//! `evosnn`: search, evaluate and inspect spiking network architectures.

mod config;
mod error;
mod search;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use evosnn_core::data::write_csv;
use evosnn_core::genome::Genome;
use evosnn_core::graph::{decode, graph_stats};
use evosnn_core::motif::Delay;
use evosnn_core::snn::InputEncoding;
use evosnn_core::{Error, Evaluator, KnowledgeSet};

use crate::config::{DatasetSource, RunConfig};
use crate::error::{CliError, CliResult};
use crate::search::{cmd_rerun, cmd_resume, cmd_search, parse_mode, SearchRequest};

#[derive(Parser)]
#[command(name = "evosnn", version, about = "Evolutionary architecture search for spiking neural networks")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// Full-size budget (300 initial genomes, 50 iterations).
    Full,
    /// Small budget for a single machine.
    Desk,
}

#[derive(Subcommand)]
enum Command {
    /// Run a search, an ablation or the random baseline.
    Search {
        /// JSON file with `search` and `evaluator` sections.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Budget used when no config file is given.
        #[arg(long, value_enum, default_value = "desk")]
        profile: Profile,
        /// CSV file, `synthetic` or `synthetic:<n>:<seed>`.
        #[arg(long, default_value = "synthetic")]
        dataset: String,
        /// full, FE, FI, FbI, LI, MI, CL-0 or random.
        #[arg(long, default_value = "full")]
        mode: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: $EVOSNN_OUT/<mode>-seed<seed>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue the run stored in this directory.
        #[arg(long, conflicts_with_all = ["config", "out"])]
        resume: Option<PathBuf>,
        #[arg(long, hide = true)]
        stop_after: Option<usize>,
        /// Force the module chain g[i][i+1] = 1 before decoding.
        #[arg(long)]
        repair: bool,
        /// Rate-code inputs as Bernoulli spikes instead of constant current.
        #[arg(long)]
        poisson: bool,
    },
    /// Repeat a search from its manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one genome and print its evaluation record.
    Eval {
        #[arg(long)]
        genome: PathBuf,
        #[arg(long, default_value = "synthetic")]
        dataset: String,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON file with an `evaluator` section.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also append the record to this knowledge set.
        #[arg(long)]
        append: Option<PathBuf>,
        /// Force the module chain g[i][i+1] = 1 before decoding.
        #[arg(long)]
        repair: bool,
        /// Rate-code inputs as Bernoulli spikes instead of constant current.
        #[arg(long)]
        poisson: bool,
    },
    /// Print the decoded network of a genome.
    Describe {
        #[arg(long)]
        genome: PathBuf,
        /// Write the graph as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic dataset as CSV.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 700)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        pool = pool.num_threads(n);
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(cli.command)),
        Err(e) => Err(CliError::Usage(format!("cannot start {:?} workers: {e}", cli.workers))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Stopped(n)) => {
            eprintln!("stopped after iteration {n}; continue with --resume");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Search {
            config,
            profile,
            dataset,
            mode,
            seed,
            out,
            resume,
            stop_after,
            repair,
            poisson,
        } => {
            if let Some(dir) = resume {
                return cmd_resume(&dir, stop_after);
            }
            let mut cfg = match (config, profile) {
                (Some(p), _) => RunConfig::load(&p)?,
                (None, Profile::Desk) => RunConfig::desk(),
                (None, Profile::Full) => RunConfig::default(),
            };
            if let Some(s) = seed {
                cfg.search.seed = s;
            }
            apply_input_flags(&mut cfg.evaluator, repair, poisson, cfg.search.seed);
            parse_mode(&mode)?;
            let out = out.unwrap_or_else(|| {
                let root = std::env::var_os("EVOSNN_OUT").map_or_else(|| PathBuf::from("runs"), PathBuf::from);
                root.join(format!("{mode}-seed{}", cfg.search.seed))
            });
            cmd_search(SearchRequest {
                config: cfg,
                mode,
                dataset: dataset.parse()?,
                out,
                stop_after,
            })
        }
        Command::Rerun { manifest, out } => cmd_rerun(&manifest, &out),
        Command::Eval {
            genome,
            dataset,
            epochs,
            seed,
            config,
            append,
            repair,
            poisson,
        } => {
            let mut evaluator = match config {
                Some(p) => RunConfig::load(&p)?.evaluator,
                None => Evaluator::default(),
            };
            apply_input_flags(&mut evaluator, repair, poisson, seed);
            cmd_eval(&genome, &dataset, epochs, seed, &evaluator, append.as_deref())
        }
        Command::Describe { genome, out } => cmd_describe(&genome, out.as_deref()),
        Command::GenData { out, n, seed } => {
            let data = DatasetSource::Synthetic { n, seed }.load()?;
            let f = fs::File::create(&out).map_err(|e| Error::file(&out, e))?;
            write_csv(&data, f)?;
            Ok(())
        }
    }
}

fn apply_input_flags(ev: &mut Evaluator, repair: bool, poisson: bool, seed: u64) {
    ev.repair_backbone |= repair;
    if poisson {
        ev.encoding = InputEncoding::Poisson { seed };
    }
}

fn read_genome(path: &Path) -> CliResult<Genome> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let g = Genome::from_json(&text)?;
    let violations = g.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidGenome(violations).into());
    }
    Ok(g)
}

fn cmd_eval(
    genome: &Path,
    dataset: &str,
    epochs: usize,
    seed: u64,
    evaluator: &Evaluator,
    append: Option<&Path>,
) -> CliResult<()> {
    if epochs == 0 {
        return Err(CliError::Usage("--epochs must be at least 1".into()));
    }
    let g = read_genome(genome)?;
    evaluator.check()?;
    let data = dataset.parse::<DatasetSource>()?.load()?;
    let record = evaluator.evaluate(&g, &data, epochs, seed)?;
    if let Some(path) = append {
        KnowledgeSet::open(path)?.append(record.clone())?;
    }
    println!("{}", serde_json::to_string(&record)?);
    Ok(())
}

fn cmd_describe(genome: &Path, out: Option<&Path>) -> CliResult<()> {
    let g = read_genome(genome)?;
    let graph = decode(&g, &Evaluator::default().decode_config([1, 8, 8]))?;
    let st = graph_stats(&graph);
    let cfg = g.config();
    println!("genome: l={} b={} ops={} ({} genes)", cfg.l, cfg.b, cfg.ops, cfg.genome_len());
    println!("populations: {}", st.populations);
    println!("neurons: {}", st.neurons);
    println!("motif edges: {} ({} one-step)", st.motif_edges, st.motif_recurrent_edges);
    println!("global edges: {}", st.global_edges);
    println!("feedback edges: {}", st.feedback_edges);
    println!(
        "motif counts: FE {} FI {} FbI {} LI {} MI {}",
        st.motif_counts[0], st.motif_counts[1], st.motif_counts[2], st.motif_counts[3], st.motif_counts[4]
    );
    println!("modules:");
    for (m, motifs) in graph.modules.iter().enumerate() {
        let row: Vec<String> = motifs
            .iter()
            .map(|mi| {
                let ops: Vec<String> = mi.ops.iter().map(|o| o.to_string()).collect();
                format!("{}[{}]", mi.kind, ops.join(","))
            })
            .collect();
        println!("  {}: {}", m + 1, row.join(" "));
    }
    println!("edge list:");
    for e in &graph.global_edges {
        let delay = match e.delay {
            Delay::SameStep => "same-step",
            Delay::OneStep => "one-step",
        };
        println!("  ({}→{}, {delay})", e.from + 1, e.to + 1);
    }
    println!("output reachable: {}", graph.output_reachable());
    if let Some(path) = out {
        fs::write(path, graph.to_json()).map_err(|e| Error::file(path, e))?;
    }
    Ok(())
}

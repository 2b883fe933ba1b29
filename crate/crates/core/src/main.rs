use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relqa::pipeline::{self, BiasInputs, PipelineConfig};
use relqa::qagen::{self, GenOptions};
use relqa::{graph, model, Error};

#[derive(Parser, Debug)]
#[command(name = "relqa", version, about = "Relation-guided QA pre-training data factory and toy trainer")]
struct Cli {
    /// Seed for every random stream (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parsing and generation.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Pipeline config file (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse corpus and triplets and write the grounded graph.
    BuildGraph {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        triplets: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print graph statistics as key=value lines.
    Stats {
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Generate the masked QA dataset as JSONL.
    GenQa {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// One datapoint per grounded description instead of the first only.
        #[arg(long)]
        all_descriptions: bool,
    },
    /// Dump retrieval batches as JSONL.
    SampleBatches {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Number of batches.
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Pre-train the toy retriever and reader.
    PretrainToy {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out_checkpoint: PathBuf,
        #[arg(long)]
        metrics_out: PathBuf,
        /// Start from this checkpoint instead of a fresh initialisation.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Directory for the per-epoch checkpoint.
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Warmup fraction of all steps.
        #[arg(long)]
        warmup: Option<f64>,
        /// Batches per epoch; 0 derives it from the dataset size.
        #[arg(long)]
        steps_per_epoch: Option<usize>,
        #[arg(long)]
        sim_scale: Option<f64>,
        #[arg(long)]
        distill_unlabeled_only: bool,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Align a QA set to the graph and report relation bias.
    AnalyzeBias {
        #[arg(long)]
        graph: Option<PathBuf>,
        /// TSV question, entity title, answer.
        #[arg(long)]
        qa: Option<PathBuf>,
        /// Evaluation TSV; defaults to --qa.
        #[arg(long)]
        eval_qa: Option<PathBuf>,
        /// TSV question id, EM flag.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Comma-separated lower bin edges.
        #[arg(long, value_delimiter = ',')]
        bins: Option<Vec<u64>>,
    },
    /// Run every stage from a config file.
    RunAll,
}

#[derive(Args, Debug)]
struct SamplingArgs {
    #[arg(long = "b")]
    seeds: Option<usize>,
    #[arg(long = "B")]
    batch: Option<usize>,
    #[arg(long = "K")]
    hard_negatives: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    reader_batch: Option<usize>,
}

impl SamplingArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let s = &mut cfg.sampling;
        if let Some(v) = self.seeds {
            s.b = v;
        }
        if let Some(v) = self.batch {
            s.batch = v;
        }
        if let Some(v) = self.hard_negatives {
            s.hard_negatives = v;
        }
        if let Some(v) = self.m {
            s.m = v;
        }
        if let Some(v) = self.reader_batch {
            s.reader_batch = v;
        }
    }
}

fn pick<'a>(flag: &'a Option<PathBuf>, fallback: &'a Option<PathBuf>, name: &str) -> relqa::Result<&'a Path> {
    flag.as_deref()
        .or(fallback.as_deref())
        .ok_or_else(|| Error::Config(format!("--{name} is required (or set it in the config file)")))
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn run(cli: Cli) -> relqa::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(cfg.verbosity.as_str()))
        .format_timestamp(None)
        .try_init()
        .ok();
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    }
    let paths = cfg.paths.clone();
    match cli.command {
        Command::BuildGraph { corpus, triplets, out } => {
            let g = pipeline::build_graph_file(
                pick(&corpus, &paths.corpus, "corpus")?,
                pick(&triplets, &paths.triplets, "triplets")?,
                pick(&out, &paths.graph, "out")?,
            )?;
            print!("{}", graph::compute_stats(&g).to_kv());
        }
        Command::Stats { graph } => {
            print!("{}", pipeline::stats_file(pick(&graph, &paths.graph, "graph")?)?.to_kv());
        }
        Command::GenQa {
            graph,
            out,
            all_descriptions,
        } => {
            let g = graph::load_graph(pick(&graph, &paths.graph, "graph")?)?;
            let opts = GenOptions {
                all_descriptions: all_descriptions || cfg.generate.all_descriptions,
            };
            let ds = pipeline::gen_qa_file(&g, pick(&out, &paths.dataset, "out")?, opts)?;
            println!("datapoints={}", ds.datapoints.len());
            println!("mutual_pairs={}", ds.mutual_pairs);
            println!("skipped_overlap={}", ds.skipped_overlap);
        }
        Command::SampleBatches {
            graph,
            dataset,
            out,
            n,
            sampling,
        } => {
            sampling.apply(&mut cfg);
            let g = graph::load_graph(pick(&graph, &paths.graph, "graph")?)?;
            let dps = qagen::import_dataset(pick(&dataset, &paths.dataset, "dataset")?)?;
            pipeline::sample_batches_file(&g, &dps, &cfg.sampling, n, &out)?;
        }
        Command::PretrainToy {
            graph,
            dataset,
            out_checkpoint,
            metrics_out,
            checkpoint,
            checkpoint_dir,
            epochs,
            lr,
            warmup,
            steps_per_epoch,
            sim_scale,
            distill_unlabeled_only,
            sampling,
        } => {
            sampling.apply(&mut cfg);
            let t = &mut cfg.train;
            set(&mut t.epochs, epochs);
            set(&mut t.learning_rate, lr);
            set(&mut t.warmup_fraction, warmup);
            set(&mut t.steps_per_epoch, steps_per_epoch);
            set(&mut t.sim_scale, sim_scale);
            t.distill_unlabeled_only |= distill_unlabeled_only;
            let g = graph::load_graph(pick(&graph, &paths.graph, "graph")?)?;
            let dps = qagen::import_dataset(pick(&dataset, &paths.dataset, "dataset")?)?;
            let init = checkpoint
                .as_deref()
                .map(model::load_checkpoint::<f64>)
                .transpose()?;
            pipeline::pretrain_files(
                &g,
                &dps,
                &cfg.sampling,
                &cfg.train,
                init,
                checkpoint_dir.as_deref().or(paths.checkpoints.as_deref()),
                &out_checkpoint,
                &metrics_out,
            )?;
        }
        Command::AnalyzeBias {
            graph,
            qa,
            eval_qa,
            predictions,
            out_dir,
            bins,
        } => {
            let g = graph::load_graph(pick(&graph, &paths.graph, "graph")?)?;
            let edges = bins.unwrap_or(cfg.analysis.bin_edges.clone());
            let written = pipeline::analyze_bias_files(
                &g,
                &BiasInputs {
                    qa: pick(&qa, &paths.qa, "qa")?,
                    eval_qa: eval_qa.as_deref().or(paths.eval_qa.as_deref()),
                    predictions: predictions.as_deref().or(paths.predictions.as_deref()),
                    bin_edges: &edges,
                },
                pick(&out_dir, &paths.reports, "out-dir")?,
            )?;
            for p in written {
                println!("{}", p.display());
            }
        }
        Command::RunAll => {
            if cli.config.is_none() {
                return Err(Error::Config("run-all needs --config".into()));
            }
            for p in pipeline::run_all(&cfg)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

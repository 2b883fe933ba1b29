//! File-level operations behind the CLI subcommands and the end-to-end
//! `run-all` pipeline.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, AnalysisOutputs};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::graph::{self, GraphStats, GroundedGraph};
use crate::losses::{self, LossReport, TrainConfig, TrainObserver};
use crate::model::{save_checkpoint, Checkpoint};
use crate::qagen::{self, GenOptions, QaDatapoint};
use crate::sampling::{assemble_retrieval_batch, DatapointPool, SamplingConfig};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub triplets: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub checkpoints: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    /// Training-side QA set for the bias analysis.
    pub qa: Option<PathBuf>,
    /// Evaluation QA set; its rows are matched to `predictions` by row index.
    pub eval_qa: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub all_descriptions: bool,
    /// Retrieval batches dumped for inspection by `run-all`.
    pub sample_batches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub bin_edges: Vec<u64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            bin_edges: analysis::DEFAULT_BIN_EDGES.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub verbosity: String,
    pub paths: PathsConfig,
    pub generate: GenerateConfig,
    pub sampling: SamplingConfig,
    pub train: TrainConfig,
    pub analysis: AnalysisConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            verbosity: "info".into(),
            paths: PathsConfig::default(),
            generate: GenerateConfig::default(),
            sampling: SamplingConfig::default(),
            train: TrainConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Load a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = String::from_utf8(fsutil::read(path)?)
            .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.paths.resolve_against(base);
        Ok(cfg)
    }

    /// One seed for every random stream.
    pub fn set_seed(&mut self, seed: u64) {
        self.sampling.seed = seed;
        self.train.seed = seed;
    }
}

impl PathsConfig {
    fn resolve_against(&mut self, base: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.triplets,
            &mut self.graph,
            &mut self.dataset,
            &mut self.checkpoints,
            &mut self.reports,
            &mut self.qa,
            &mut self.eval_qa,
            &mut self.predictions,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

fn required<'a>(p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("missing path: {name}")))
}

pub fn build_graph_file(corpus: &Path, triplets: &Path, out: &Path) -> Result<GroundedGraph> {
    let g = graph::build_graph(fsutil::open(corpus)?, fsutil::open(triplets)?)?;
    graph::save_graph(&g, out)?;
    Ok(g)
}

pub fn stats_file(graph_path: &Path) -> Result<GraphStats> {
    Ok(graph::compute_stats(&graph::load_graph(graph_path)?))
}

pub fn gen_qa_file(graph: &GroundedGraph, out: &Path, opts: GenOptions) -> Result<qagen::Dataset> {
    let ds = qagen::generate_dataset(graph, opts)?;
    log::info!(
        "{} datapoints from {} mutual pairs ({} skipped for alias overlap)",
        ds.datapoints.len(),
        ds.mutual_pairs,
        ds.skipped_overlap
    );
    qagen::export_dataset(&ds.datapoints, out)?;
    Ok(ds)
}

/// Dump `n` retrieval batches as JSON lines.
pub fn sample_batches_file(
    graph: &GroundedGraph,
    datapoints: &[QaDatapoint],
    config: &SamplingConfig,
    n: usize,
    out: &Path,
) -> Result<()> {
    config.validate()?;
    let pool = DatapointPool::new(datapoints);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut buf = Vec::new();
    for _ in 0..n {
        let batch = assemble_retrieval_batch(&pool, graph, config, &mut rng)?;
        serde_json::to_writer(&mut buf, &batch)?;
        buf.push(b'\n');
    }
    fsutil::write_atomic(out, &buf)
}

struct CheckpointWriter<'a> {
    dir: Option<&'a Path>,
}

impl TrainObserver<f64> for CheckpointWriter<'_> {
    fn on_report(&mut self, r: &LossReport) {
        log::debug!(
            "epoch {} step {}: L_rel {:.4} L_distill {:.4} L_retr {:.4} L_read {:.4}",
            r.epoch,
            r.step,
            r.l_rel,
            r.l_distill,
            r.l_retr,
            r.l_read()
        );
    }

    fn on_epoch_end(&mut self, ck: &Checkpoint<f64>) -> Result<()> {
        match self.dir {
            Some(dir) => save_checkpoint(ck, &dir.join(LATEST_CHECKPOINT)),
            None => Ok(()),
        }
    }
}

pub const LATEST_CHECKPOINT: &str = "latest.ckpt";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";

/// Train, writing the final checkpoint and the metrics CSV. With
/// `checkpoint_dir` set, the latest epoch is also saved after every epoch.
#[allow(clippy::too_many_arguments)]
pub fn pretrain_files(
    graph: &GroundedGraph,
    datapoints: &[QaDatapoint],
    sampling: &SamplingConfig,
    train: &TrainConfig,
    init: Option<Checkpoint<f64>>,
    checkpoint_dir: Option<&Path>,
    out_checkpoint: &Path,
    metrics_out: &Path,
) -> Result<losses::Pretrained<f64>> {
    let mut obs = CheckpointWriter {
        dir: checkpoint_dir,
    };
    let out = losses::pretrain_from::<f64>(graph, datapoints, sampling, train, init, &mut obs)?;
    save_checkpoint(
        &Checkpoint {
            epoch: train.epochs as u32,
            retriever: out.retriever.clone(),
            reader: out.reader.clone(),
        },
        out_checkpoint,
    )?;
    fsutil::write_atomic(metrics_out, losses::reports_to_csv(&out.reports).as_bytes())?;
    Ok(out)
}

pub struct BiasInputs<'a> {
    pub qa: &'a Path,
    pub eval_qa: Option<&'a Path>,
    pub predictions: Option<&'a Path>,
    pub bin_edges: &'a [u64],
}

pub fn analyze_bias_files(graph: &GroundedGraph, inputs: &BiasInputs<'_>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = analysis::read_qa_tsv(fsutil::open(inputs.qa)?)?;
    let (aligned, coverage) = analysis::align_qa(&rows, graph);
    log::info!(
        "aligned {} of {} QA pairs ({:.1}%)",
        coverage.aligned,
        coverage.total,
        100.0 * coverage.ratio()
    );
    let table = analysis::frequency_cdf(&aligned);
    let freq_rows = table.rows(graph);
    let cdf = table.cdf();
    let accuracy = match inputs.predictions {
        Some(pred) => {
            let eval_rows = match inputs.eval_qa {
                Some(p) => analysis::read_qa_tsv(fsutil::open(p)?)?,
                None => rows.clone(),
            };
            let (eval, _) = analysis::align_qa(&eval_rows, graph);
            let flags = analysis::read_predictions(fsutil::open(pred)?)?;
            let bins = analysis::bins_from_edges(inputs.bin_edges)?;
            Some(analysis::accuracy_by_frequency(&eval, &flags, &table, &bins)?)
        }
        None => None,
    };
    analysis::emit_report(
        &AnalysisOutputs {
            coverage,
            frequencies: &freq_rows,
            cdf: &cdf,
            accuracy: accuracy.as_ref(),
        },
        out_dir,
    )
}

/// Every stage in order: graph, statistics, dataset, optional batch dump,
/// pre-training and, when a QA set is configured, the bias analysis.
pub fn run_all(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let p = &cfg.paths;
    let reports = required(&p.reports, "reports")?;
    let graph_path = required(&p.graph, "graph")?;
    let dataset_path = required(&p.dataset, "dataset")?;
    let mut written = Vec::new();

    let g = build_graph_file(required(&p.corpus, "corpus")?, required(&p.triplets, "triplets")?, graph_path)?;
    written.push(graph_path.to_path_buf());

    let stats_path = reports.join("stats.txt");
    let mut stats = Vec::new();
    write!(stats, "{}", graph::compute_stats(&g).to_kv())?;
    fsutil::write_atomic(&stats_path, &stats)?;
    written.push(stats_path);

    let ds = gen_qa_file(
        &g,
        dataset_path,
        GenOptions {
            all_descriptions: cfg.generate.all_descriptions,
        },
    )?;
    written.push(dataset_path.to_path_buf());

    if cfg.generate.sample_batches > 0 {
        let out = reports.join("batches.jsonl");
        sample_batches_file(&g, &ds.datapoints, &cfg.sampling, cfg.generate.sample_batches, &out)?;
        written.push(out);
    }

    let ck_dir = p.checkpoints.as_deref();
    let final_ck = ck_dir.unwrap_or(reports).join(FINAL_CHECKPOINT);
    let metrics = reports.join(METRICS_FILE);
    pretrain_files(&g, &ds.datapoints, &cfg.sampling, &cfg.train, None, ck_dir, &final_ck, &metrics)?;
    written.push(final_ck);
    written.push(metrics);

    if let Some(qa) = &p.qa {
        written.extend(analyze_bias_files(
            &g,
            &BiasInputs {
                qa,
                eval_qa: p.eval_qa.as_deref(),
                predictions: p.predictions.as_deref(),
                bin_edges: &cfg.analysis.bin_edges,
            },
            reports,
        )?);
    }
    Ok(written)
}

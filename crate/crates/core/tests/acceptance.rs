//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use relqa::analysis;
use relqa::corpus::EntityId;
use relqa::graph::{self, mutual_pairs, GroundedGraph};
use relqa::losses::{
    self, distill_loss, holdout_split, ramp_weight, reader_loss, relation_accuracy, relation_loss,
    retrieval_loss, retrieval_probability, LossReport, Question, TrainConfig, TrainObserver,
};
use relqa::model::{Block, Gradients, ModelConfig, ModelParams};
use relqa::qagen::{self, GenOptions, PassageRef};
use relqa::sampling::{
    assemble_retrieval_batch, BatchPassage, DatapointPool, ReaderBatch, ReaderItem, RetrievalBatch,
    SamplingConfig,
};
use relqa::synth::{self, SynthConfig};
use relqa::text;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixture_graph() -> GroundedGraph {
    graph::build_graph(
        std::fs::read(fixture("mini_wiki.txt")).unwrap().as_slice(),
        std::fs::read(fixture("triplets.tsv")).unwrap().as_slice(),
    )
    .unwrap()
}

fn synth_graph(seed: u64) -> GroundedGraph {
    let s = synth::generate(&SynthConfig {
        seed,
        ..SynthConfig::default()
    })
    .unwrap();
    graph::build_graph(s.wiki.as_bytes(), s.triplets.as_bytes()).unwrap()
}

fn gradient_fidelity() -> Outcome {
    let t0 = Instant::now();
    let r = 12;
    let mut worst: Vec<(String, f64, usize)> = Vec::new();
    let mut check = |name: &str,
                     params: &ModelParams<f64>,
                     g: &Gradients<f64>,
                     blocks: &[Block],
                     f: &dyn Fn(&ModelParams<f64>) -> f64| {
        let mut rg = rng(99);
        for &b in blocks {
            let (e, n) = max_rel_error(params, g, b, &mut rg, f);
            worst.push((format!("{name}/{b:?}"), e, n));
        }
    };
    let question_blocks = [Block::Embeddings, Block::QuestionProj, Block::RelationHead];

    let p = ModelParams::<f64>::init(check_config(r, 1));
    let qs = questions(&mut rng(2), 8, r);
    let q: Vec<Question<'_>> = qs
        .iter()
        .map(|(t, rel)| Question {
            tokens: t,
            relation: *rel,
        })
        .collect();
    let mut g = Gradients::zeros_like(&p);
    relation_loss(&p, &q, Some(&mut g)).unwrap();
    check("L_rel", &p, &g, &question_blocks, &|x| relation_loss(x, &q, None).unwrap().value);

    let teacher = ModelParams::<f64>::init(check_config(r, 3));
    let mut g = Gradients::zeros_like(&p);
    distill_loss(&p, &teacher, &q, Some(&mut g)).unwrap();
    check("L_distill", &p, &g, &question_blocks, &|x| {
        distill_loss(x, &teacher, &q, None).unwrap()
    });

    let rb = retrieval_batch(&mut rng(4), 4, 2);
    let mut g = Gradients::zeros_like(&p);
    retrieval_loss(&p, &rb, 1.0, Some(&mut g)).unwrap();
    check(
        "L_retr",
        &p,
        &g,
        &[Block::Embeddings, Block::QuestionProj, Block::PassageProj],
        &|x| retrieval_loss(x, &rb, 1.0, None).unwrap().value,
    );

    let db = reader_batch(&mut rng(5), 4, 2);
    let mut g = Gradients::zeros_like(&p);
    reader_loss(&p, &db, Some(&mut g)).unwrap();
    check(
        "L_read",
        &p,
        &g,
        &[
            Block::Embeddings,
            Block::PassageProj,
            Block::RankHead,
            Block::StartHead,
            Block::EndHead,
        ],
        &|x| reader_loss(x, &db, None).unwrap().total,
    );

    let elapsed = t0.elapsed();
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let min_coords = worst.iter().map(|w| w.2).min().unwrap();
    let pass = max < TOL && min_coords >= COORDS && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "{} blocks, >= {min_coords} coords each, max rel err {max:.2e} (< {TOL:e}), {:.1}s",
            worst.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn closed_forms() -> Outcome {
    let cfg = ModelConfig {
        vocab_buckets: 64,
        embed_dim: 4,
        hidden_dim: 4,
        relations: 12,
        init_scale: 0.0,
        seed: 0,
    };
    let zero = ModelParams::<f64>::zeros(cfg.clone());
    let toks: Vec<String> = ["who", "is", "<mask>"].iter().map(|s| s.to_string()).collect();
    let q = [Question {
        tokens: &toks,
        relation: Some(relqa::graph::RelationId(5)),
    }];
    let l_rel = relation_loss(&zero, &q, None).unwrap().value;
    let ok_rel = (l_rel - 12f64.ln()).abs() < 1e-9;

    // q = p⁺ = e₀ and an orthogonal negative e₁ under identity projections.
    let mut p = ModelParams::<f64>::zeros(cfg.clone());
    let a = "aligned".to_string();
    let b = (0..)
        .map(|i| format!("other{i}"))
        .find(|w| p.bucket(w) != p.bucket(&a))
        .unwrap();
    let (ba, bb) = (p.bucket(&a), p.bucket(&b));
    p.block_mut(Block::Embeddings)[ba * 4] = 1.0;
    p.block_mut(Block::Embeddings)[bb * 4 + 1] = 1.0;
    for blk in [Block::QuestionProj, Block::PassageProj] {
        for i in 0..4 {
            p.block_mut(blk)[i * 4 + i] = 1.0;
        }
    }
    let origin = PassageRef {
        entity: EntityId(0),
        passage: 0,
    };
    let batch = RetrievalBatch {
        entities: Vec::new(),
        datapoints: vec![0],
        questions: vec![vec![a.clone()]],
        passages: vec![
            BatchPassage {
                origin,
                tokens: vec![a.clone()],
            },
            BatchPassage {
                origin,
                tokens: vec![b.clone()],
            },
        ],
        positive_columns: vec![0],
        hard_negatives: 1,
        fallbacks: 0,
    };
    let l_retr = retrieval_loss(&p, &batch, 1.0, None).unwrap().value;
    let ok_retr = (l_retr - 0.31326).abs() < 1e-5;
    let e = std::f64::consts::E;
    let closed = -(e / (e + 1.0)).ln();

    let rb = ReaderBatch {
        items: vec![ReaderItem {
            datapoint: 0,
            question: toks.clone(),
            passages: (0..3)
                .map(|i| BatchPassage {
                    origin,
                    tokens: vec![format!("w{i}"), "x".into()],
                })
                .collect(),
            answer_span: [0, 1],
        }],
        fallbacks: 0,
    };
    let l_read = reader_loss(&zero, &rb, None).unwrap();
    let ok_rank = (l_read.rank - 1.09861).abs() < 1e-5 && (l_read.rank - 3f64.ln()).abs() < 1e-9;
    let ok_ramp = ramp_weight(0) == 0.0 && (ramp_weight(1) - 0.63212).abs() < 1e-5;
    let eq1 = retrieval_probability(&[1.0f64, 0.0], 0, &[vec![1.0, 0.0], vec![0.0, 1.0]], 1.0).unwrap();
    let ok_eq1 = (eq1 - 0.73106).abs() < 1e-5;
    outcome(
        ok_rel && ok_retr && ok_rank && ok_ramp && ok_eq1 && (l_retr - closed).abs() < 1e-12,
        format!(
            "L_rel={l_rel:.12} (ln12), L_retr={l_retr:.5}, rank={:.5}, ramp(0)={}, ramp(1)={:.5}, P={eq1:.5}",
            l_read.rank,
            ramp_weight(0),
            ramp_weight(1)
        ),
    )
}

#[derive(Default)]
struct FingerprintLog {
    by_epoch: BTreeMap<usize, BTreeSet<u64>>,
    reports: usize,
}

impl TrainObserver<f64> for FingerprintLog {
    fn on_report(&mut self, r: &LossReport) {
        self.by_epoch.entry(r.epoch).or_default().insert(r.teacher_fingerprint);
        self.reports += 1;
    }
}

fn stop_gradient() -> Outcome {
    // Direct: many distill-driven steps on the student leave the teacher intact.
    let mut student = ModelParams::<f64>::init(check_config(6, 21));
    let teacher = student.clone();
    let fp = teacher.fingerprint();
    let qs = questions(&mut rng(22), 8, 6);
    let q: Vec<Question<'_>> = qs
        .iter()
        .map(|(t, r)| Question {
            tokens: t,
            relation: *r,
        })
        .collect();
    for _ in 0..25 {
        let mut g = Gradients::zeros_like(&student);
        losses::combined_relation_loss(&student, &teacher, &q, 3, Default::default(), Some(&mut g)).unwrap();
        student.apply(&g, 0.5);
    }
    let direct = teacher.fingerprint() == fp && student.fingerprint() != fp;

    // Through the trainer: one teacher hash per epoch, refreshed between epochs.
    let g = synth_graph(3);
    let ds = qagen::generate_dataset(&g, GenOptions::default()).unwrap().datapoints;
    let sampling = SamplingConfig {
        batch: 32,
        reader_batch: 16,
        ..SamplingConfig::default()
    };
    let train = TrainConfig {
        epochs: 3,
        steps_per_epoch: 4,
        learning_rate: 0.5,
        vocab_buckets: 4096,
        ..TrainConfig::default()
    };
    let mut log = FingerprintLog::default();
    losses::pretrain::<f64>(&g, &ds, &sampling, &train, &mut log).unwrap();
    let per_epoch_constant = log.by_epoch.values().all(|s| s.len() == 1);
    let distinct: BTreeSet<u64> = log.by_epoch.values().flatten().copied().collect();
    outcome(
        direct && per_epoch_constant && distinct.len() == 3 && log.reports == 12,
        format!(
            "teacher hash fixed over 25 student steps: {direct}; trainer: {} epochs, {} hashes",
            log.by_epoch.len(),
            distinct.len()
        ),
    )
}

fn keys(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| text::match_key(t)).collect()
}

fn masking_soundness() -> Outcome {
    let g = fixture_graph();
    let ds = qagen::generate_dataset(&g, GenOptions { all_descriptions: true })
        .unwrap()
        .datapoints;
    let aliases = g.aliases();
    let mut leaks_q = 0;
    let mut leaks_p = 0;
    let mut scanned = 0;
    for dp in &ds {
        leaks_q += usize::from(!aliases.find(&keys(&dp.question), dp.target).is_empty());
        leaks_p += usize::from(!aliases.find(&keys(&dp.masked_positive), dp.source).is_empty());
        scanned += 1;
    }
    let cfg = SamplingConfig {
        b: 2,
        batch: 8,
        hard_negatives: 1,
        m: 1,
        reader_batch: 8,
        seed: 0,
    };
    let pool = DatapointPool::new(&ds);
    let mut r = rng(0);
    for _ in 0..50 {
        let batch = assemble_retrieval_batch(&pool, &g, &cfg, &mut r).unwrap();
        for i in 0..batch.rows() {
            let source = ds[batch.datapoints[i]].source;
            let cols = std::iter::once(batch.positive_columns[i]).chain(batch.negative_columns(i));
            for c in cols {
                leaks_p += usize::from(!aliases.find(&keys(&batch.passages[c].tokens), source).is_empty());
                scanned += 1;
            }
        }
    }
    outcome(
        leaks_q == 0 && leaks_p == 0 && !ds.is_empty(),
        format!(
            "{} datapoints, {scanned} token sequences scanned: {leaks_q} target leaks in questions, {leaks_p} source leaks in passages",
            ds.len()
        ),
    )
}

fn sampling_contracts() -> Outcome {
    let g = synth_graph(0);
    let ds = qagen::generate_dataset(&g, GenOptions::default()).unwrap().datapoints;
    let cfg = SamplingConfig {
        seed: 11,
        ..SamplingConfig::default()
    };
    let pool = DatapointPool::new(&ds);
    let stream = |seed: u64| -> Vec<u8> {
        let mut r = rng(seed);
        let mut out = Vec::new();
        for _ in 0..4 {
            let b = assemble_retrieval_batch(&pool, &g, &cfg, &mut r).unwrap();
            out.extend(serde_json::to_vec(&b).unwrap());
        }
        out
    };
    let identical = stream(11) == stream(11) && stream(11) != stream(12);
    let mut r = rng(11);
    let mut violations = 0;
    let mut rows = 0;
    for _ in 0..10 {
        let b = assemble_retrieval_batch(&pool, &g, &cfg, &mut r).unwrap();
        let ents: BTreeSet<EntityId> = b.entities.iter().map(|e| e.entity).collect();
        violations += usize::from(ents.len() != cfg.batch || b.rows() != cfg.batch);
        for i in 0..b.rows() {
            rows += 1;
            let pos = b.passages[b.positive_columns[i]].origin;
            let negs: Vec<PassageRef> = b.negative_columns(i).map(|c| b.passages[c].origin).collect();
            let distinct: BTreeSet<PassageRef> = negs.iter().copied().collect();
            if negs.len() != cfg.hard_negatives || negs.contains(&pos) || distinct.len() != negs.len() {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0 && identical,
        format!("10 batches of B=128, K=2 ({rows} rows): {violations} violations; same-seed streams identical: {identical}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for (seed, b) in (0..24u64).zip([1usize, 2, 3, 5, 8, 13, 16].iter().cycle()) {
        let params = ModelParams::<f64>::init(check_config(3, seed));
        let batch = retrieval_batch(&mut rng(seed + 100), *b, 2);
        let loss = retrieval_loss(&params, &batch, 1.0, None).unwrap().value;
        let ps: Vec<Vec<f64>> = batch
            .passages
            .iter()
            .map(|p| params.encode_passage(&p.tokens).unwrap())
            .collect();
        let oracle: f64 = batch
            .questions
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let qe = params.encode_question(q).unwrap();
                -retrieval_probability(&qe, batch.positive_columns[i], &ps, 1.0).unwrap().ln()
            })
            .sum::<f64>()
            / *b as f64;
        worst = worst.max((loss - oracle).abs());
    }
    let mut graphs = 0;
    let mut mismatches = 0;
    for (seed, n) in [(1u64, 10usize), (2, 50), (3, 120), (4, 200), (5, 200)] {
        let s = synth::generate(&SynthConfig {
            entities: n,
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        let g = graph::build_graph(s.wiki.as_bytes(), s.triplets.as_bytes()).unwrap();
        let mut brute = Vec::new();
        for a in 0..n as u32 {
            for b in 0..n as u32 {
                let (a, b) = (EntityId(a), EntityId(b));
                let has = |x: EntityId, y: EntityId| g.edges().iter().any(|e| e.source == x && e.target == y);
                if a != b && has(a, b) && has(b, a) {
                    brute.push((a, b));
                }
            }
        }
        mismatches += usize::from(mutual_pairs(&g) != brute);
        graphs += 1;
    }
    outcome(
        worst < 1e-9 && mismatches == 0,
        format!("max |L_retr − per-row oracle| = {worst:.2e} over 24 batches (B ≤ 16, K = 2); mutual_pairs mismatches {mismatches}/{graphs}"),
    )
}

fn learning_signal() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let t0 = Instant::now();
        let g = synth_graph(0);
        let ds = qagen::generate_dataset(&g, GenOptions::default()).unwrap().datapoints;
        let (train, test) = holdout_split(&ds, 0.2, 0);
        let sampling = SamplingConfig::default();
        let config = TrainConfig {
            epochs: 20,
            learning_rate: 1.0,
            steps_per_epoch: 20,
            ..TrainConfig::default()
        };
        let out = losses::pretrain::<f64>(&g, &train, &sampling, &config, &mut losses::NoObserver).unwrap();

        let dp_pool = DatapointPool::new(&train);
        let mut r = rng(1234);
        let (mut correct, mut rows) = (0, 0);
        for _ in 0..5 {
            let b = assemble_retrieval_batch(&dp_pool, &g, &sampling, &mut r).unwrap();
            let l = retrieval_loss(&out.retriever, &b, 1.0, None).unwrap();
            correct += l.correct;
            rows += l.rows;
        }
        let top1 = correct as f64 / rows as f64;
        let random = 1.0 / sampling.columns() as f64;

        let mut counts: BTreeMap<_, usize> = BTreeMap::new();
        for d in &train {
            if let Some(r) = d.relation {
                *counts.entry(r).or_default() += 1;
            }
        }
        let majority = counts.iter().max_by_key(|(r, c)| (**c, std::cmp::Reverse(**r))).unwrap().0;
        let labeled_test: Vec<_> = test.iter().filter(|d| d.relation.is_some()).collect();
        let baseline =
            labeled_test.iter().filter(|d| d.relation == Some(*majority)).count() as f64 / labeled_test.len() as f64;
        let acc = relation_accuracy(&out.retriever, &test).unwrap();

        let first = &out.reports[0];
        let last = out.reports.last().unwrap();
        let improved = last.l_retr < first.l_retr && last.l_rel < first.l_rel;
        let elapsed = t0.elapsed();
        outcome(
            top1 >= 5.0 * random && acc >= 2.0 * baseline && improved && elapsed < Duration::from_secs(600),
            format!(
                "retrieval top-1 {top1:.4} vs 5×random {:.4}; held-out relation acc {acc:.4} vs 2×majority {:.4} ({} questions); L_retr {:.3}→{:.3}, L_rel {:.3}→{:.3}; {:.1}s on 1 thread",
                5.0 * random,
                2.0 * baseline,
                labeled_test.len(),
                first.l_retr,
                last.l_retr,
                first.l_rel,
                last.l_rel,
                elapsed.as_secs_f64()
            ),
        )
    })
}

fn analysis_fidelity() -> Outcome {
    let g = fixture_graph();
    let rows = analysis::read_qa_tsv(std::fs::File::open(fixture("qa.tsv")).unwrap()).unwrap();
    let (aligned, cov) = analysis::align_qa(&rows, &g);
    let table = analysis::frequency_cdf(&aligned);

    // Hand tally of the 30-question fixture.
    let expected_counts: BTreeMap<&str, u64> = [
        ("P69", 4),
        ("P19", 4),
        ("P54", 3),
        ("P102", 2),
        ("P26", 2),
        ("P17_r", 2),
        ("P22", 1),
        ("P118", 1),
        ("P286", 1),
        ("P108", 1),
        ("P39", 1),
        ("P1346_r", 1),
        ("P127_r", 1),
        ("P131", 1),
        ("P61", 1),
    ]
    .into_iter()
    .collect();
    let got: BTreeMap<String, u64> = table.rows(&g).into_iter().collect();
    let counts_ok = got.len() == expected_counts.len()
        && expected_counts.iter().all(|(k, v)| got.get(*k) == Some(v));
    let cdf_ok = table.cdf() == vec![(1, 9.0 / 15.0), (2, 12.0 / 15.0), (3, 13.0 / 15.0), (4, 1.0)];
    let cov_ok = cov.total == 30
        && cov.aligned == 26
        && cov.skipped_unknown_entity == 1
        && cov.answer_not_entity == 2
        && cov.ratio() == 26.0 / 30.0;

    let flags = analysis::read_predictions(std::fs::File::open(fixture("predictions.tsv")).unwrap()).unwrap();
    let bins = analysis::bins_from_edges(&[1, 2, 4]).unwrap();
    let rep = analysis::accuracy_by_frequency(&aligned, &flags, &table, &bins).unwrap();
    let expect = [(0, None), (9, Some(5.0 / 9.0)), (9, Some(5.0 / 9.0)), (8, Some(6.0 / 8.0))];
    let buckets_ok = rep.buckets.len() == 4
        && rep.buckets.iter().zip(expect).all(|(b, (n, em))| b.n == n && b.em == em)
        && rep.overall_n == 26
        && rep.overall_em == Some(16.0 / 26.0);
    let default_bins = analysis::bins_from_edges(&analysis::DEFAULT_BIN_EDGES).unwrap();
    let rep2 = analysis::accuracy_by_frequency(&aligned, &flags, &table, &default_bins).unwrap();
    let default_ok = rep2.buckets[1].n == 26 && rep2.buckets[1].em == Some(16.0 / 26.0) && rep2.buckets[0].n == 0;
    outcome(
        counts_ok && cdf_ok && cov_ok && buckets_ok && default_ok,
        format!(
            "coverage {}/{} = {:.4}; 15 relation counts match: {counts_ok}; CDF match: {cdf_ok}; buckets match: {buckets_ok}",
            cov.aligned,
            cov.total,
            cov.ratio()
        ),
    )
}

fn copy_inputs(dir: &Path) {
    for f in ["mini_wiki.txt", "triplets.tsv", "qa.tsv", "predictions.tsv", "e2e.toml"] {
        std::fs::copy(fixture(f), dir.join(f)).unwrap();
    }
}

fn collect(dir: &Path, root: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            collect(&p, root, out);
        } else {
            out.insert(
                p.strip_prefix(root).unwrap().display().to_string(),
                std::fs::read(&p).unwrap(),
            );
        }
    }
}

fn determinism() -> Outcome {
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        copy_inputs(dir.path());
        let status = Command::new(env!("CARGO_BIN_EXE_relqa"))
            .args(["run-all", "--seed", "7", "--config"])
            .arg(dir.path().join("e2e.toml"))
            .output()
            .unwrap();
        if !status.status.success() {
            return outcome(false, format!("run-all failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        let mut files = BTreeMap::new();
        collect(&dir.path().join("out"), dir.path(), &mut files);
        runs.push(files);
    }
    let names: Vec<&String> = runs[0].keys().collect();
    let required = ["graph.bin", "dataset.jsonl", "metrics.csv", "relation_frequency.csv", "accuracy_by_frequency.csv"];
    let all_present = required.iter().all(|r| names.iter().any(|n| n.ends_with(r)));
    outcome(
        runs[0] == runs[1] && all_present,
        format!("{} artifacts, byte-identical across two runs: {}", names.len(), runs[0] == runs[1]),
    )
}

fn statistics_pipeline() -> Outcome {
    let g = fixture_graph();
    let got = graph::compute_stats(&g).to_kv();
    let expected = std::fs::read_to_string(fixture("expected_stats.txt")).unwrap();
    outcome(got == expected, got.trim().replace('\n', ", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient fidelity", gradient_fidelity),
        ("closed-form loss values", closed_forms),
        ("stop-gradient", stop_gradient),
        ("masking soundness", masking_soundness),
        ("sampling contracts", sampling_contracts),
        ("oracle equivalence", oracle_equivalence),
        ("desk-scale learning signal", learning_signal),
        ("analysis fidelity", analysis_fidelity),
        ("determinism", determinism),
        ("statistics pipeline", statistics_pipeline),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!(
            "{} criterion {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::Variant;
use crate::numeric::Mode;
use crate::splits::{make_split, TaskKind};
use crate::synth::{generate_corpus, DriftWorldConfig, DriftWorldSpec};

fn doc(author: usize, time: usize, tokens: &[usize]) -> Document {
    Document {
        author,
        time,
        tokens: tokens.to_vec(),
        labels: vec![],
    }
}

fn dims(a: usize, t: usize, v: usize) -> ModelDims {
    ModelDims {
        num_authors: a,
        num_timesteps: t,
        vocab_size: v,
    }
}

fn solo_nll(m: &Model<f64>, d: &Document) -> (f64, usize) {
    m.sequence_nll(d, None, Mode::Eval, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
}

fn small_corpus() -> Corpus {
    let cfg = DriftWorldConfig {
        num_authors: 3,
        num_timesteps: 4,
        vocab_size: 12,
        docs_per_cell: 4,
        doc_length: 3,
        ..Default::default()
    };
    generate_corpus(&DriftWorldSpec::from_config(&cfg).unwrap()).unwrap()
}

fn quick(iters: usize) -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        eval_every: 5,
        deterministic: true,
        precision: Precision::F64,
        ..Default::default()
    }
    .with_schedule(iters / 2, iters - iters / 2)
}

fn tiny(variant: Variant) -> ModelConfig {
    ModelConfig {
        num_layers: 1,
        ..ModelConfig::tiny(variant)
    }
}

#[test]
fn schedule_examples() {
    let c = TrainConfig::default().with_schedule(50_000, 20_000);
    assert_eq!(lr_at(0, &c), 0.003);
    assert_eq!(lr_at(49_999, &c), 0.003);
    assert_eq!(lr_at(50_000, &c), 0.003);
    assert!((lr_at(60_000, &c) - 0.0015).abs() < 1e-15);
    assert_eq!(lr_at(70_000, &c), 0.0);
    assert_eq!(lr_at(90_000, &c), 0.0);
}

#[test]
fn config_checks() {
    assert!(TrainConfig::default().validate().is_ok());
    let bad = TrainConfig {
        max_iters: 10,
        ..Default::default()
    };
    assert!(matches!(bad.validate(), Err(Error::Config(_))));
    let bad = TrainConfig {
        batch_size: 0,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    let parsed: TrainConfig = toml::from_str("batch_size = 3\nprecision = \"f64\"").unwrap();
    assert_eq!(parsed.batch_size, 3);
    assert_eq!(parsed.precision, Precision::F64);
    assert!(toml::from_str::<TrainConfig>("batchsize = 3").is_err());
    assert_eq!("f32".parse::<Precision>().unwrap(), Precision::F32);
    assert!("f16".parse::<Precision>().is_err());
}

proptest! {
    #[test]
    fn buckets_partition_the_items(lengths in prop::collection::vec(1usize..30, 0..300), bs in 1usize..20, seed: u64) {
        let batches = bucket_batches(&lengths, bs, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut seen: Vec<usize> = batches.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..lengths.len()).collect::<Vec<_>>());
        prop_assert!(batches.iter().all(|b| !b.is_empty() && b.len() <= bs));
    }
}

#[test]
fn buckets_group_similar_lengths() {
    let lengths: Vec<usize> = (0..64).map(|i| 1 + i % 8).collect();
    let batches = bucket_batches(&lengths, 8, &mut ChaCha8Rng::seed_from_u64(0));
    let padded: usize = batches
        .iter()
        .map(|b| {
            let m = b.iter().map(|&i| lengths[i]).max().unwrap();
            b.iter().map(|&i| m - lengths[i]).sum::<usize>()
        })
        .sum();
    // One pool of 64 sorted by length: every batch is a single length.
    assert_eq!(padded, 0);
}

#[test]
fn minibatch_loss_examples() {
    let d = dims(2, 3, 6);
    let m: Model<f64> = Model::new(tiny(Variant::Ours).without_dropout(), d, vec![true; 6], 3).unwrap();
    let x = doc(1, 2, &[2, 4, 5]);
    let one = minibatch_loss(&m, &[&x]).unwrap();
    let many = minibatch_loss(&m, &[&x, &x, &x]).unwrap();
    assert!((one - many).abs() < 1e-12, "{one} vs {many}");

    let u: Model<f64> = Model::uniform(tiny(Variant::Lstm), dims(1, 1, 4)).unwrap();
    let batch = [doc(0, 1, &[2]), doc(0, 1, &[3, 2, 2, 3])];
    let loss = minibatch_loss(&u, &batch.iter().collect::<Vec<_>>()).unwrap();
    assert!((loss - 4f64.ln()).abs() < 1e-12);

    // Lengths 1 and 3 give 2 + 4 predictions; the reference scores each
    // document alone and weights by its prediction count.
    let m: Model<f64> = Model::new(tiny(Variant::Lstm).without_dropout(), dims(1, 1, 6), vec![true], 9).unwrap();
    let (a, b) = (doc(0, 1, &[3]), doc(0, 1, &[5, 2, 4]));
    let (na, ca) = solo_nll(&m, &a);
    let (nb, cb) = solo_nll(&m, &b);
    assert_eq!((ca, cb), (2, 4));
    let want = (na + nb) / 6.0;
    let got = minibatch_loss(&m, &[&a, &b]).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");

    assert!(minibatch_loss(&m, &[&doc(0, 1, &[])]).is_err());
}

#[test]
fn zero_iterations_return_the_initialization() {
    let corpus = small_corpus();
    let split = make_split(TaskKind::Modeling, &corpus, 0);
    let out = fit::<f64>(&corpus, &split, &tiny(Variant::LstmA), &quick(0)).unwrap();
    let init: Model<f64> = Model::new(tiny(Variant::LstmA), out.best.model.dims, out.best.model.presence.clone(), 0).unwrap();
    assert_eq!(out.best.iteration, 0);
    assert_eq!(out.log.rows.len(), 1);
    for (a, b) in out.best.model.params.entries().iter().zip(init.params.entries()) {
        assert_eq!(a.value.data(), b.value.data(), "{}", a.name);
    }
}

#[test]
fn zero_learning_rate_leaves_parameters() {
    let corpus = small_corpus();
    let split = make_split(TaskKind::Modeling, &corpus, 0);
    let cfg = TrainConfig { lr: 0.0, ..quick(6) };
    let out = fit::<f64>(&corpus, &split, &tiny(Variant::Ours), &cfg).unwrap();
    let init: Model<f64> = Model::new(tiny(Variant::Ours), out.last.dims, out.last.presence.clone(), 0).unwrap();
    for (a, b) in out.last.params.entries().iter().zip(init.params.entries()) {
        assert_eq!(a.value.data(), b.value.data(), "{}", a.name);
    }
}

#[test]
fn best_checkpoint_has_lowest_logged_validation() {
    let corpus = small_corpus();
    let split = make_split(TaskKind::Modeling, &corpus, 1);
    let cfg = TrainConfig { eval_every: 2, ..quick(20) };
    let out = fit::<f64>(&corpus, &split, &tiny(Variant::LstmAt), &cfg).unwrap();
    assert_eq!(out.log.rows.len(), 11);
    let row = out.log.rows.iter().find(|r| r.iter == out.best.iteration).unwrap();
    assert!(out.log.rows.iter().all(|r| row.val_micro_ppl <= r.val_micro_ppl));
    let again = crate::eval::evaluate(&out.best.model, &corpus, &split, SplitTag::Val, false).unwrap();
    assert!((again.micro_ppl - row.val_micro_ppl).abs() < 1e-9 * row.val_micro_ppl);
}

#[test]
fn training_is_reproducible() {
    let corpus = small_corpus();
    let split = make_split(TaskKind::Prediction, &corpus, 2);
    let run = || fit::<f32>(&corpus, &split, &tiny(Variant::Ours), &quick(8)).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.log, b.log);
    assert_eq!(a.log.to_tsv().lines().next(), Some("iter\ttrain_nll\tval_micro_ppl\tlr"));
}

#[test]
fn checkpoint_round_trip() {
    let corpus = small_corpus();
    let split = make_split(TaskKind::Modeling, &corpus, 0);
    let out = fit::<f32>(&corpus, &split, &tiny(Variant::Ours), &quick(4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
    out.best.save(&p1).unwrap();
    let back = Checkpoint::<f32>::load(&p1).unwrap();
    back.save(&p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(peek_precision(&p1).unwrap(), Precision::F32);
    assert!(Checkpoint::<f64>::load(&p1).is_err());

    let before = crate::eval::evaluate(&out.best.model, &corpus, &split, SplitTag::Test, false).unwrap();
    let after = crate::eval::evaluate(&back.model, &corpus, &split, SplitTag::Test, false).unwrap();
    assert_eq!(before, after);
    assert_eq!(back.iteration, out.best.iteration);
    assert_eq!(back.adam.step, out.best.adam.step);

    assert!(Checkpoint::<f32>::load_for(&p1, &corpus.vocab, Some(&split)).is_ok());
    let other = crate::corpus::Vocab::with_words(&["x", "y"]).unwrap();
    assert!(matches!(
        Checkpoint::<f32>::load_for(&p1, &other, None),
        Err(Error::HashMismatch { what: "vocabulary", .. })
    ));
    let other_split = make_split(TaskKind::Modeling, &corpus, 7);
    assert!(matches!(back.verify(&corpus.vocab, Some(&other_split)), Err(Error::HashMismatch { what: "split", .. })));

    let bytes = std::fs::read(&p1).unwrap();
    assert!(Checkpoint::<f32>::from_bytes(&bytes[..bytes.len() / 2]).is_err());
}

#[test]
fn divergence_names_the_iteration() {
    let corpus = small_corpus();
    let split = make_split(TaskKind::Modeling, &corpus, 0);
    let cfg = ModelConfig {
        init_range: 1e38,
        ..tiny(Variant::Lstm)
    };
    match fit::<f32>(&corpus, &split, &cfg, &quick(4)) {
        Err(Error::Diverged { iter, .. }) => assert_eq!(iter, 0),
        other => panic!("expected divergence, got {:?}", other.map(|o| o.log)),
    }
}

#[test]
fn mismatched_split_is_rejected() {
    let corpus = small_corpus();
    let mut split = make_split(TaskKind::Modeling, &corpus, 0);
    split.doc_split.pop();
    assert!(fit::<f32>(&corpus, &split, &tiny(Variant::Lstm), &quick(1)).is_err());
}

mod common;

use common::small_corpus;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stc_core::features::FEATURE_DIM;
use stc_core::trainer::{
    read_metrics, train, Corpus, Manifest, RunDir, Split, TrainConfig, TrainState, MANIFEST_FILE, METRICS_HEADER,
    NORM_FILE,
};
use stc_core::Technique;

fn config(iters: u64, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::desk(2, iters).unwrap();
    cfg.seed = seed;
    cfg
}

#[test]
fn identical_runs_log_identical_metrics() {
    let corpus = small_corpus();
    let run = || {
        let state = TrainState::new(config(10, 3), corpus.norm.clone()).unwrap();
        train(state, corpus, None).unwrap()
    };
    let ((sa, ma), (sb, mb)) = (run(), run());
    assert_eq!(ma, mb);
    assert_eq!(sa.gen.params, sb.gen.params);
    assert_eq!(sa.disc.params, sb.disc.params);
    let other = train(TrainState::new(config(10, 4), corpus.norm.clone()).unwrap(), corpus, None).unwrap();
    assert_ne!(other.1, ma);
}

#[test]
fn resuming_from_a_snapshot_matches_an_uninterrupted_run() {
    let corpus = small_corpus();
    let dir = tempfile::tempdir().unwrap();
    let run = RunDir(dir.path().join("full"));
    let mut cfg = config(6, 8);
    cfg.snapshot_every = 3;
    let (full, full_rows) = train(TrainState::new(cfg, corpus.norm.clone()).unwrap(), corpus, Some(&run)).unwrap();

    let resumed = TrainState::load(run.snapshot(3)).unwrap();
    assert_eq!((resumed.iteration, resumed.g_updates, resumed.d_updates), (3, 3, 1));
    let second = RunDir(dir.path().join("resumed"));
    let (done, rows) = train(resumed, corpus, Some(&second)).unwrap();
    assert_eq!(rows, full_rows[3..]);
    assert_eq!(done.gen.params, full.gen.params);
    assert_eq!(done.disc.params, full.disc.params);

    let logged = read_metrics(run.metrics()).unwrap();
    assert_eq!(logged, full_rows);
    let text = std::fs::read_to_string(run.metrics()).unwrap();
    assert_eq!(text.lines().next(), Some(METRICS_HEADER));
}

#[test]
fn finished_runs_write_model_manifest_and_norm() {
    let corpus = small_corpus();
    let dir = tempfile::tempdir().unwrap();
    let run = RunDir(dir.path().to_path_buf());
    let (state, _) = train(TrainState::new(config(2, 0), corpus.norm.clone()).unwrap(), corpus, Some(&run)).unwrap();
    let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest, state.manifest());
    assert_eq!(manifest.depth, 2);
    assert_eq!(manifest.channels, vec![4, 8, 16]);
    assert_eq!((manifest.num_domains, manifest.lambda_cls, manifest.lambda_rec), (4, 1.0, 10.0));
    assert!(dir.path().join(NORM_FILE).exists());
    let loaded = TrainState::load(run.model()).unwrap();
    assert_eq!(loaded.gen.params, state.gen.params);
    assert_eq!(loaded.iteration, 2);
}

#[test]
fn empty_or_missing_corpus_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(Corpus::load(dir.path()).is_err());

    let corpus = small_corpus();
    let mut index = corpus.index.clone();
    index.clips.retain(|c| c.domain != Technique::Raspy);
    assert!(index.validate().is_err());
    let mut hollow = corpus.clone();
    hollow.index.clips.clear();
    hollow.clips.clear();
    let state = TrainState::new(config(1, 0), corpus.norm.clone()).unwrap();
    assert!(train(state, &hollow, None).is_err());
}

#[test]
fn crops_cover_domains_uniformly_and_never_target_their_source() {
    let corpus = small_corpus();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let draws = 4000;
    let mut src = [0usize; 4];
    let mut tgt = [0usize; 4];
    for _ in 0..draws {
        let crop = corpus.sample_crop(&mut rng, 400, Split::Train).unwrap();
        assert_ne!(crop.src, crop.tgt);
        assert_eq!(crop.data.len(), FEATURE_DIM * 400);
        assert_eq!(corpus.clips[crop.clip].domain, crop.src);
        assert_eq!(corpus.clips[crop.clip].split, Split::Train);
        src[crop.src.index()] += 1;
        tgt[crop.tgt.index()] += 1;
    }
    for d in 0..4 {
        let fs = src[d] as f64 / draws as f64;
        let ft = tgt[d] as f64 / draws as f64;
        assert!((fs - 0.25).abs() <= 0.03, "source frequency of domain {d}: {fs}");
        assert!((ft - 0.25).abs() <= 0.03, "target frequency of domain {d}: {ft}");
    }
}

#[test]
fn update_counters_follow_the_three_to_one_cycle() {
    let corpus = small_corpus();
    let (_, rows) = train(TrainState::new(config(9, 1), corpus.norm.clone()).unwrap(), corpus, None).unwrap();
    let counts: Vec<(u64, u64)> = rows.iter().map(|m| (m.g_updates, m.d_updates)).collect();
    assert_eq!(
        counts,
        vec![(1, 0), (2, 0), (3, 1), (4, 1), (5, 1), (6, 2), (7, 2), (8, 2), (9, 3)]
    );
    assert!(rows.iter().all(|m| m.lr > 0.0 && m.g_rec.is_finite()));
}

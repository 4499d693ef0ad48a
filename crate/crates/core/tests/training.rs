use ccmt_core::baselines::{Fuser, FuserKind, FuserSpec};
use ccmt_core::ccmt::{CcmtConfig, Initializer};
use ccmt_core::synthgen::{generate_dataset, SynthConfig, SynthDataset};
use ccmt_core::tokenstore::{Modality, Rng};
use ccmt_core::trainer::{
    evaluate, load_checkpoint, save_checkpoint, train, EpochRecord, TrainConfig, EVAL_SEED,
};

fn small_data(seed: u64) -> SynthDataset {
    generate_dataset(&SynthConfig {
        n_train: 96,
        n_dev: 48,
        dim: 8,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn small_fuser(kind: FuserKind) -> Fuser {
    let cfg = CcmtConfig {
        k: 12,
        ..CcmtConfig::with_dim(8)
    };
    Fuser::new(FuserSpec::new(kind, &Modality::FUSED), cfg).unwrap()
}

fn small_train_cfg() -> TrainConfig {
    TrainConfig {
        lr: 1e-3,
        epochs: 3,
        batch_size: 16,
        k: 12,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn same_seed_gives_identical_history_and_params() {
    let data = small_data(1);
    for kind in [
        FuserKind::Ccmt,
        FuserKind::Transformer,
        FuserKind::Mlp,
        FuserKind::Voting,
    ] {
        let fuser = small_fuser(kind);
        let a = train(&fuser, &data.train, &data.dev, &small_train_cfg()).unwrap();
        let b = train(&fuser, &data.train, &data.dev, &small_train_cfg()).unwrap();
        let bits = |h: &[EpochRecord]| -> Vec<[u64; 4]> {
            h.iter()
                .map(|r| {
                    [
                        r.train_loss,
                        r.dev_uar_request,
                        r.dev_uar_complaint,
                        r.dev_uar_mean,
                    ]
                    .map(f64::to_bits)
                })
                .collect()
        };
        assert_eq!(bits(&a.history), bits(&b.history), "{kind}");
        assert_eq!(a.params, b.params, "{kind}");
        assert_eq!(a.best_epoch, b.best_epoch);
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let data = small_data(2);
    let fuser = small_fuser(FuserKind::Ccmt);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| train(&fuser, &data.train, &data.dev, &small_train_cfg()).unwrap())
    };
    let (one, three) = (run(1), run(3));
    assert_eq!(one.history, three.history);
    assert_eq!(one.params, three.params);
}

#[test]
fn best_epoch_is_the_first_maximum_of_dev_uar() {
    let data = small_data(3);
    let cfg = TrainConfig {
        epochs: 4,
        ..small_train_cfg()
    };
    let out = train(&small_fuser(FuserKind::Mlp), &data.train, &data.dev, &cfg).unwrap();
    assert_eq!(out.history.len(), 4);
    let best = out
        .history
        .iter()
        .map(|r| r.dev_uar_mean)
        .fold(f64::MIN, f64::max);
    let first = out.history.iter().find(|r| r.dev_uar_mean == best).unwrap();
    assert_eq!(out.best_epoch, first.epoch);
    assert_eq!(out.best_dev.mean_uar, best);
}

#[test]
fn checkpoint_reload_reproduces_dev_metrics_exactly() {
    let data = small_data(4);
    let dir = tempfile::tempdir().unwrap();
    for kind in [FuserKind::Ccmt, FuserKind::Voting] {
        let fuser = small_fuser(kind);
        let cfg = small_train_cfg();
        let out = train(&fuser, &data.train, &data.dev, &cfg).unwrap();
        let path = dir.path().join(format!("{kind}.ckpt"));
        save_checkpoint(&path, &fuser, Some(&cfg), &out.params).unwrap();
        let (loaded, meta, params) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, fuser);
        assert_eq!(meta.train, Some(cfg));
        assert_eq!(params, out.params);
        let again = evaluate(&loaded, &params, &data.dev, EVAL_SEED).unwrap();
        assert_eq!(again, out.best_dev);
    }
}

#[test]
fn evaluation_ignores_sample_order() {
    let data = small_data(5);
    let fuser = small_fuser(FuserKind::Ccmt);
    let params = fuser.init_params(&mut Rng::new(9)).unwrap();
    let forward = evaluate(&fuser, &params, &data.dev, EVAL_SEED).unwrap();
    let mut reversed = data.dev.clone();
    reversed.reverse();
    assert_eq!(
        evaluate(&fuser, &params, &reversed, EVAL_SEED).unwrap(),
        forward
    );
}

#[test]
fn invalid_runs_are_rejected() {
    let data = small_data(6);
    let fuser = small_fuser(FuserKind::Mlp);
    assert!(train(&fuser, &data.train, &[], &small_train_cfg()).is_err());
    assert!(train(&fuser, &[], &data.dev, &small_train_cfg()).is_err());
    let wrong_k = TrainConfig {
        k: 13,
        ..small_train_cfg()
    };
    assert!(train(&fuser, &data.train, &data.dev, &wrong_k).is_err());
    let no_epochs = TrainConfig {
        epochs: 0,
        ..small_train_cfg()
    };
    assert!(train(&fuser, &data.train, &data.dev, &no_epochs).is_err());
}

// Default data and default optimizer settings; five epochs of the full model.
#[test]
fn ccmt_loss_falls_over_the_first_five_epochs() {
    let data = generate_dataset(&SynthConfig::default()).unwrap();
    let fuser = Fuser::new(
        FuserSpec::new(FuserKind::Ccmt, &Modality::FUSED),
        CcmtConfig::with_dim(32),
    )
    .unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let out = train(&fuser, &data.train, &data.dev, &cfg).unwrap();
    let loss: Vec<f64> = out.history.iter().map(|r| r.train_loss).collect();
    assert!(loss[4] < loss[0], "{loss:?}");
}

#[test]
fn initialization_is_seeded() {
    let fuser = small_fuser(FuserKind::Ccmt);
    let a = fuser.init_params(&mut Rng::new(11)).unwrap();
    assert_eq!(a, fuser.init_params(&mut Rng::new(11)).unwrap());
    assert_ne!(a, fuser.init_params(&mut Rng::new(12)).unwrap());
}

#[test]
fn gains_start_at_one_and_biases_at_zero() {
    for kind in [
        FuserKind::Ccmt,
        FuserKind::Transformer,
        FuserKind::Mlp,
        FuserKind::Voting,
    ] {
        let params = small_fuser(kind).init_params(&mut Rng::new(0)).unwrap();
        let mut seen = (0, 0);
        for (name, t) in params.iter() {
            if name.ends_with(".gain") {
                seen.0 += 1;
                assert!(t.data().iter().all(|&x| x == 1.0), "{name}");
            }
            if name.ends_with(".bias") || name.ends_with(".b1") || name.ends_with(".b2") {
                seen.1 += 1;
                assert!(t.data().iter().all(|&x| x == 0.0), "{name}");
            }
        }
        assert!(seen.1 > 0, "{kind} has no biases");
        if kind != FuserKind::Mlp && kind != FuserKind::Voting {
            assert!(seen.0 > 0, "{kind} has no gains");
        }
    }
}

#[test]
fn weight_variance_matches_fan_average() {
    for (fan_in, fan_out) in [(25, 40), (40, 25), (10, 100)] {
        let mut rng = Rng::new(fan_in as u64);
        let mut init = Initializer::new(&mut rng);
        init.weight("w", fan_in, fan_out).unwrap();
        let store = init.finish();
        let w = store.get("w").unwrap();
        assert_eq!(w.numel(), 1000);
        let n = w.numel() as f64;
        let mean = w.data().iter().map(|&x| x as f64).sum::<f64>() / n;
        let var = w
            .data()
            .iter()
            .map(|&x| (x as f64 - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        let expected = 2.0 / (fan_in + fan_out) as f64;
        assert!((var / expected - 1.0).abs() < 0.2, "{var} vs {expected}");
    }
}

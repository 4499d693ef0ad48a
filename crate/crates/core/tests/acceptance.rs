//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any of them fails.

mod common;

use std::time::{Duration, Instant};

use ccmt_core::baselines::{Fuser, FuserKind, FuserSpec};
use ccmt_core::ccmt::{cross_attention_block, init_block, BlockVars, CcmtConfig, Initializer};
use ccmt_core::numerics::{kernels, Graph, ParamStore, Tensor};
use ccmt_core::synthgen::{
    compute_meta, generate_dataset, ModalityAmplitudes, SynthConfig, SynthDataset,
    DEFAULT_ORACLE_SAMPLES, FUSION_MARGIN,
};
use ccmt_core::tokenstore::{
    decode_embeddings, encode_embeddings, read_embedding_file, write_embedding_file, Modality, Rng,
};
use ccmt_core::trainer::{
    evaluate, fuser_grad_check, load_checkpoint, save_checkpoint, train, TrainConfig, TrainOutcome,
    EVAL_SEED,
};
use common::*;

const SEEDS: [u64; 3] = [0, 1, 2];
const CASES: u64 = 1000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn ccmt_fuser(modalities: &[Modality]) -> Fuser {
    Fuser::new(
        FuserSpec::new(FuserKind::Ccmt, modalities),
        CcmtConfig::with_dim(32),
    )
    .unwrap()
}

fn run(fuser: &Fuser, data: &SynthDataset, seed: u64) -> TrainOutcome {
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let started = Instant::now();
    let out = train(fuser, &data.train, &data.dev, &cfg).unwrap();
    eprintln!(
        "  trained {} {:?} seed {seed}: best epoch {}, dev uar request {:.4} complaint {:.4} ({:.0}s)",
        fuser.spec.kind,
        fuser.spec.modalities,
        out.best_epoch,
        out.best_dev.request.uar,
        out.best_dev.complaint.uar,
        started.elapsed().as_secs_f64()
    );
    out
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn gradient_correctness() -> Outcome {
    let started = Instant::now();
    let fuser = Fuser::new(
        FuserSpec::new(FuserKind::Ccmt, &Modality::FUSED),
        CcmtConfig::tiny(),
    )
    .unwrap();
    let report = fuser_grad_check(&fuser, 0, 1e-5).unwrap();
    let elapsed = started.elapsed();
    let covers = ["pos.text_fr", "pos.text_en", "pos.audio", "class.audio"]
        .iter()
        .all(|n| report.per_param.iter().any(|p| p.name == *n));
    let worst = report.worst.clone().unwrap_or_default();
    outcome(
        report.max_rel_error < 1e-4 && covers && elapsed < Duration::from_secs(60),
        format!(
            "max relative error {:.3e} at {}[{}] over {} scalars (limit 1e-4), {:.1}s (limit 60s)",
            report.max_rel_error,
            worst.0,
            worst.1,
            report.scalars_checked,
            elapsed.as_secs_f64()
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let worst = |f: fn(u64) -> f64| (0..100).map(f).fold(0.0, f64::max);
    let (b, t, c) = (
        worst(block_oracle_gap),
        worst(transformer_oracle_gap),
        worst(ccmt_oracle_gap),
    );
    outcome(
        b < 1e-10 && t < 1e-10 && c < 1e-10,
        format!("100 instances each; max gap block {b:.2e}, transformer {t:.2e}, ccmt {c:.2e} (limit 1e-10)"),
    )
}

fn normals(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.normal()).collect()
}

fn kv_permutation_gap(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let cfg = random_tiny_config(&mut rng);
    let mut init = Initializer::new(&mut rng);
    init_block(&mut init, "b", &cfg).unwrap();
    let params: ParamStore<f64> = init.finish().cast();
    let rows = rng.range_inclusive(1, 6);
    let q = random_matrix(&mut rng, cfg.k, cfg.d);
    let k = random_matrix(&mut rng, rows, cfg.d);
    let v = random_matrix(&mut rng, rows, cfg.d);
    let mut perm: Vec<usize> = (0..rows).collect();
    rng.shuffle(&mut perm);
    let block = |k: &Tensor<f64>, v: &Tensor<f64>| {
        let mut g = Graph::new();
        let bound = params.bind(&mut g);
        let p = BlockVars::bind(&bound, "b", cfg.heads).unwrap();
        let (qv, kv, vv) = (
            g.constant(q.clone()),
            g.constant(k.clone()),
            g.constant(v.clone()),
        );
        let out = cross_attention_block(&mut g, qv, kv, vv, &p, &cfg).unwrap();
        g.value(out).clone()
    };
    let (a, b) = (
        block(&k, &v),
        block(&k.gather_rows(&perm), &v.gather_rows(&perm)),
    );
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn numeric_invariants() -> Outcome {
    let (mut row_sum, mut shift, mut ln_mean, mut kv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in 0..CASES {
        let mut rng = Rng::new(seed);
        let (rows, cols) = (rng.range_inclusive(1, 5), rng.range_inclusive(1, 11));
        let scale = 0.01 + 30.0 * rng.next_f64();
        let x = normals(&mut rng, rows * cols, scale);
        let y = kernels::row_softmax(&x, rows, cols);
        for r in y.chunks(cols) {
            row_sum = row_sum.max((r.iter().sum::<f64>() - 1.0).abs());
        }
        let c = 100.0 * rng.next_f64() - 50.0;
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let z = kernels::row_softmax(&shifted, rows, cols);
        shift = y
            .iter()
            .zip(&z)
            .map(|(a, b)| (a - b).abs())
            .fold(shift, f64::max);

        let cols = rng.range_inclusive(2, 39);
        let offset = 200.0 * rng.next_f64() - 100.0;
        let x: Vec<f64> = normals(&mut rng, rows * cols, 5.0)
            .iter()
            .map(|v| v + offset)
            .collect();
        let (y, _) = kernels::layer_norm(&x, &vec![1.0; cols], &vec![0.0; cols], rows, cols, 1e-5);
        for r in y.chunks(cols) {
            ln_mean = ln_mean.max((r.iter().sum::<f64>() / cols as f64).abs());
        }
        kv = kv.max(kv_permutation_gap(seed));
    }
    outcome(
        row_sum <= 1e-6 && shift <= 1e-9 && ln_mean <= 1e-7 && kv <= 1e-9,
        format!(
            "{CASES} cases each; softmax row sum {row_sum:.1e} (1e-6), shift {shift:.1e} (1e-9), \
             layer-norm mean {ln_mean:.1e} (1e-7), kv permutation {kv:.1e} (1e-9)"
        ),
    )
}

struct Experiment {
    full: Vec<TrainOutcome>,
    outcome: Outcome,
}

fn fusion_experiment(data: &SynthDataset) -> Experiment {
    let started = Instant::now();
    let meta = compute_meta(&SynthConfig::default(), DEFAULT_ORACLE_SAMPLES).unwrap();
    let full: Vec<TrainOutcome> = SEEDS
        .iter()
        .map(|&s| run(&ccmt_fuser(&Modality::FUSED), data, s))
        .collect();
    let ccmt = mean(full.iter().map(|o| o.best_dev.complaint.uar));

    let mut trained_unimodal = Vec::new();
    for m in Modality::FUSED {
        let fuser = Fuser::new(FuserSpec::unimodal(m), CcmtConfig::with_dim(32)).unwrap();
        let uar = mean(
            SEEDS
                .iter()
                .map(|&s| run(&fuser, data, s).best_dev.complaint.uar),
        );
        trained_unimodal.push((m, uar));
    }
    let (best_m, best_trained) =
        trained_unimodal
            .iter()
            .copied()
            .fold(
                (Modality::Audio, f64::MIN),
                |a, b| if b.1 > a.1 { b } else { a },
            );
    let ceiling = meta.complaint.best_unimodal().max(best_trained);
    let threshold = ceiling + FUSION_MARGIN;
    let elapsed = started.elapsed();
    let detail = format!(
        "mean dev complaint UAR over 3 seeds {ccmt:.4}; needs >= {threshold:.4} \
         (oracle unimodal ceiling {:.4}, best trained unimodal {best_m} {best_trained:.4}, margin {FUSION_MARGIN}); \
         {:.0}s (limit 900s)",
        meta.complaint.best_unimodal(),
        elapsed.as_secs_f64()
    );
    Experiment {
        outcome: outcome(
            ccmt >= threshold && elapsed < Duration::from_secs(900),
            detail,
        ),
        full,
    }
}

fn ablation_ordering(data: &SynthDataset, full: &[TrainOutcome]) -> Outcome {
    let score = |outs: &[TrainOutcome]| mean(outs.iter().map(|o| o.best_dev.mean_uar));
    let all = score(full);
    let fr_audio: Vec<TrainOutcome> = SEEDS
        .iter()
        .map(|&s| run(&ccmt_fuser(&[Modality::TextFr, Modality::Audio]), data, s))
        .collect();
    let fr_en: Vec<TrainOutcome> = SEEDS
        .iter()
        .map(|&s| run(&ccmt_fuser(&[Modality::TextFr, Modality::TextEn]), data, s))
        .collect();
    let (fa, fe) = (score(&fr_audio), score(&fr_en));
    outcome(
        all >= fa - 0.01 && all >= fe - 0.01,
        format!("mean dev UAR over 3 seeds: fr+en+audio {all:.4}, fr+audio {fa:.4}, fr+en {fe:.4} (slack 0.01)"),
    )
}

fn determinism() -> Outcome {
    let data = generate_dataset(&SynthConfig {
        n_train: 64,
        n_dev: 32,
        dim: 16,
        seed: 7,
        ..SynthConfig::default()
    })
    .unwrap();
    let fuser = Fuser::new(
        FuserSpec::new(FuserKind::Ccmt, &Modality::FUSED),
        CcmtConfig {
            k: 20,
            ..CcmtConfig::with_dim(16)
        },
    )
    .unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        k: 20,
        lr: 1e-3,
        seed: 3,
        ..TrainConfig::default()
    };
    let a = train(&fuser, &data.train, &data.dev, &cfg).unwrap();
    let b = train(&fuser, &data.train, &data.dev, &cfg).unwrap();
    let bits = |o: &TrainOutcome| -> Vec<u64> {
        o.history
            .iter()
            .flat_map(|r| {
                [
                    r.train_loss,
                    r.dev_uar_request,
                    r.dev_uar_complaint,
                    r.dev_uar_mean,
                ]
            })
            .map(f64::to_bits)
            .collect()
    };
    let history_same = bits(&a) == bits(&b) && a.params == b.params;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&path, &fuser, Some(&cfg), &a.params).unwrap();
    let (loaded, _, params) = load_checkpoint(&path).unwrap();
    let metrics_same = evaluate(&loaded, &params, &data.dev, EVAL_SEED).unwrap() == a.best_dev;

    let mut files_same = true;
    for (i, s) in data.train.iter().chain(&data.dev).enumerate() {
        let bytes = encode_embeddings(&s.token_sets).unwrap();
        let path = dir.path().join(format!("{i}.bin"));
        write_embedding_file(&path, &s.token_sets).unwrap();
        let back = read_embedding_file(&path).unwrap();
        files_same &= back == s.token_sets
            && std::fs::read(&path).unwrap() == bytes
            && encode_embeddings(&decode_embeddings(&bytes).unwrap()).unwrap() == bytes;
    }
    outcome(
        history_same && metrics_same && files_same,
        format!(
            "history bit-exact {history_same}, checkpoint dev metrics bit-exact {metrics_same}, \
             {} embedding files round-trip {files_same}",
            data.train.len() + data.dev.len()
        ),
    )
}

fn chance_level() -> Outcome {
    let mut cfg = SynthConfig::default();
    cfg.amplitudes.request = ModalityAmplitudes::ZERO;
    cfg.amplitudes.complaint = ModalityAmplitudes::ZERO;
    cfg.label_flip_prob = 0.0;
    let data = generate_dataset(&cfg).unwrap();
    let mut parts = Vec::new();
    let mut passed = true;
    for kind in [
        FuserKind::Ccmt,
        FuserKind::Transformer,
        FuserKind::Mlp,
        FuserKind::Voting,
    ] {
        let fuser = Fuser::new(
            FuserSpec::new(kind, &Modality::FUSED),
            CcmtConfig::with_dim(32),
        )
        .unwrap();
        let uar = run(&fuser, &data, 0).best_dev.mean_uar;
        passed &= (0.44..=0.56).contains(&uar);
        parts.push(format!("{kind} {uar:.4}"));
    }
    outcome(
        passed,
        format!(
            "best dev mean UAR on zero-amplitude data: {} (band [0.44, 0.56])",
            parts.join(", ")
        ),
    )
}

fn report(name: &str, o: &Outcome) {
    println!(
        "{} {name}: {}",
        if o.passed { "PASS" } else { "FAIL" },
        o.detail
    );
}

fn main() {
    let started = Instant::now();
    let mut results = Vec::new();
    let mut check = |name: &'static str, o: Outcome| {
        report(name, &o);
        results.push((name, o));
    };
    check("gradient correctness", gradient_correctness());
    check("oracle equivalence", oracle_equivalence());
    check("numeric invariants", numeric_invariants());
    check("determinism", determinism());

    let data = generate_dataset(&SynthConfig::default()).unwrap();
    let experiment = fusion_experiment(&data);
    check("fusion experiment", experiment.outcome);
    check(
        "ablation ordering",
        ablation_ordering(&data, &experiment.full),
    );
    check("chance-level control", chance_level());

    println!();
    println!(
        "acceptance summary ({:.0}s):",
        started.elapsed().as_secs_f64()
    );
    for (name, o) in &results {
        report(name, o);
    }
    let failed = results.iter().filter(|(_, o)| !o.passed).count();
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

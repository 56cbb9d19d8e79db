use std::path::Path;

use relmimic::core::env::record_demos;
use relmimic::report::{self, curves_svg, learning_curve, read_ccdf, read_curve, read_metrics, MetricsRow};
use relmimic::run::run_training;
use relmimic::train::{evaluate_policy, eval_seeds, Trainer};
use relmimic::{Error, TrainConfig, Variant};

fn tiny(variant: Variant) -> TrainConfig {
    TrainConfig {
        iterations: 2,
        steps: 12,
        rounds: 1,
        disc_updates: 1,
        ppo_updates: 1,
        minibatch: 6,
        learners: 2,
        seeds: vec![0],
        variant,
        n_demos: 1,
        eval_every: 1,
        eval_episodes: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn trainer_iterations_produce_finite_logs() {
    let cfg = tiny(Variant::RewardOnly);
    let (demos, _) = record_demos(1, 0, 32).unwrap();
    let mut t = Trainer::new(&cfg, 0, &demos).unwrap();
    let before = t.disc.params.values().to_vec();
    let row = t.iterate(true).unwrap();
    assert_eq!(row.iteration, 1);
    assert!(row.disc_accuracy.is_some_and(|a| (0.0..=1.0).contains(&a)));
    assert!(row.eval_progress.is_some_and(f64::is_finite));
    assert!(row.policy_entropy.is_finite());
    assert_ne!(t.disc.params.values(), &before[..]);
    assert_eq!(t.iterate(false).unwrap().eval_progress, None);
}

#[test]
fn frozen_discriminator_ablation_leaves_reward_network_untouched() {
    let cfg = TrainConfig {
        disc_updates: 0,
        ..tiny(Variant::RewardOnly)
    };
    let (demos, _) = record_demos(1, 0, 32).unwrap();
    let mut t = Trainer::new(&cfg, 0, &demos).unwrap();
    let before = t.disc.params.values().to_vec();
    let row = t.iterate(false).unwrap();
    assert_eq!(row.disc_accuracy, None);
    assert_eq!(t.disc.params.values(), &before[..]);
}

#[test]
fn mismatched_demo_resolution_is_rejected() {
    let (demos, _) = record_demos(1, 0, 40).unwrap();
    match Trainer::new(&tiny(Variant::Baseline), 0, &demos) {
        Err(Error::Resolution { expected: 32, found: 40 }) => {}
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("accepted 40 px demonstrations"),
    }
}

#[test]
fn evaluation_is_deterministic() {
    let cfg = tiny(Variant::Baseline);
    let (demos, _) = record_demos(1, 0, 32).unwrap();
    let t = Trainer::new(&cfg, 0, &demos).unwrap();
    let a = evaluate_policy(&t.policy, &cfg, &eval_seeds(3)).unwrap();
    let b = evaluate_policy(&t.policy, &cfg, &eval_seeds(3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 3);
}

fn files_equal(a: &Path, b: &Path) {
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), "{} differs", a.display());
}

#[test]
fn identical_runs_write_identical_metrics() {
    let cfg = TrainConfig {
        seeds: vec![0, 1],
        ..tiny(Variant::RewardOnly)
    };
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_training(&cfg, &a, |_, _| {}).unwrap();
    run_training(&cfg, &b, |_, _| {}).unwrap();
    for seed in ["seed_0", "seed_1"] {
        for f in ["metrics.csv", "eval.csv", "checkpoint.bin"] {
            files_equal(&a.join(seed).join(f), &b.join(seed).join(f));
        }
    }
    for f in ["config.txt", "curve.csv", "ccdf.csv", "summary.csv"] {
        files_equal(&a.join(f), &b.join(f));
    }
    assert_eq!(TrainConfig::load(&a.join("config.txt")).unwrap(), cfg);
}

#[test]
fn run_reports_parse_back() {
    let cfg = tiny(Variant::Baseline);
    let dir = tempfile::tempdir().unwrap();
    let out = run_training(&cfg, dir.path(), |_, _| {}).unwrap();
    let rows = read_metrics(&dir.path().join("seed_0/metrics.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].eval_progress, out.seeds[0].log[1].eval_progress);
    assert_eq!(read_curve(&dir.path().join("curve.csv")).unwrap(), out.report.curve);
    let ccdf = read_ccdf(&dir.path().join("ccdf.csv")).unwrap();
    assert_eq!(ccdf.len(), out.report.ccdf.thresholds.len());
    assert!(ccdf.windows(2).all(|w| w[0].1 >= w[1].1));
    assert!(out.report.ccdf.area >= 0.0);
    let progress = std::fs::read_to_string(dir.path().join("seed_0/progress.csv")).unwrap();
    assert!(progress.starts_with("iteration,wall_time,"));
    let svg = curves_svg(&[("baseline".into(), out.report.curve.clone())]);
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    assert!(report::report_run(&dir.path().join("seed_0"), "x", None).is_err());
}

#[test]
fn learning_curve_statistics() {
    let row = |iteration, eval| MetricsRow {
        iteration,
        surrogate_return: None,
        train_progress: None,
        eval_progress: eval,
        disc_accuracy: None,
        policy_entropy: None,
    };
    let runs = vec![
        vec![row(1, None), row(2, Some(1.0)), row(4, Some(3.0))],
        vec![row(2, Some(3.0)), row(4, None)],
    ];
    let c = learning_curve(&runs);
    assert_eq!(c.len(), 2);
    assert_eq!((c[0].iteration, c[0].seeds, c[0].mean, c[0].std), (2, 2, 2.0, 1.0));
    assert_eq!((c[1].iteration, c[1].seeds, c[1].mean, c[1].std), (4, 1, 3.0, 0.0));
}

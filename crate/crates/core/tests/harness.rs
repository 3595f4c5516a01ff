use std::time::Instant;

use shrinkmean::estimators::{wang_estimator, EstimatorKind};
use shrinkmean::harness::{
    run_study, run_study_with_threads, write_intensities_csv, write_losses_csv, McConfig, TargetMode,
};
use shrinkmean::linalg::standard_normal_matrix;
use shrinkmean::seeding::substream;

fn small_config() -> McConfig {
    McConfig {
        p_grid: vec![50, 100],
        c_grid: vec![0.5, 2.0],
        replications: 200,
        estimators: vec![
            EstimatorKind::SampleMean,
            EstimatorKind::Olse,
            EstimatorKind::OlseOracle,
            EstimatorKind::OlseAsymptotic,
            EstimatorKind::Js,
            EstimatorKind::JsHighDim,
            EstimatorKind::JsPositivePart,
            EstimatorKind::Wang,
        ],
        ..McConfig::default()
    }
}

#[test]
fn reports_are_bit_identical_across_thread_counts() {
    let config = McConfig {
        replications: 30,
        ..small_config()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for threads in [1, 4] {
        let report = run_study_with_threads(&config, threads).unwrap();
        let losses = dir.path().join(format!("losses{threads}.csv"));
        let intensities = dir.path().join(format!("intensities{threads}.csv"));
        write_losses_csv(&losses, &report).unwrap();
        write_intensities_csv(&intensities, &report).unwrap();
        files.push((std::fs::read(losses).unwrap(), std::fs::read(intensities).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn shrinkage_dominates_and_oracle_is_best() {
    let report = run_study(&small_config()).unwrap();
    for cell in &report.cells {
        let mean = cell.estimator(EstimatorKind::SampleMean).unwrap();
        let bona_fide = cell.estimator(EstimatorKind::Olse).unwrap();
        let oracle = cell.estimator(EstimatorKind::OlseOracle).unwrap();
        let (diff, se) = bona_fide.paired_difference(mean);
        assert!(diff <= 2.0 * se, "p = {}, c = {}: olse - mean = {diff} (se {se})", cell.p, cell.c);
        let (diff, se) = oracle.paired_difference(bona_fide);
        assert!(diff <= 2.0 * se, "p = {}, c = {}: oracle - olse = {diff} (se {se})", cell.p, cell.c);
        // Sample-mean loss concentrates around p / n.
        assert!((mean.mean_loss / cell.c_hat - 1.0).abs() < 0.15, "p = {}, c = {}", cell.p, cell.c);
    }
}

#[test]
fn exact_target_drives_shrinkage_loss_towards_zero() {
    let config = McConfig {
        p_grid: vec![100],
        c_grid: vec![0.5],
        replications: 50,
        estimators: vec![EstimatorKind::SampleMean, EstimatorKind::Olse],
        target: TargetMode::EqualToMuN,
        ..McConfig::default()
    };
    let report = run_study(&config).unwrap();
    let cell = &report.cells[0];
    let olse = cell.estimator(EstimatorKind::Olse).unwrap().mean_loss;
    let mean = cell.estimator(EstimatorKind::SampleMean).unwrap().mean_loss;
    assert!(olse < 0.1 * mean, "olse {olse}, sample mean {mean}");
}

#[test]
fn unbounded_mean_norm_reverts_to_sample_mean() {
    let config = McConfig {
        p_grid: vec![200],
        c_grid: vec![0.5],
        gamma: 1.0,
        replications: 50,
        estimators: vec![EstimatorKind::SampleMean, EstimatorKind::Olse],
        ..McConfig::default()
    };
    let report = run_study(&config).unwrap();
    let cell = &report.cells[0];
    let alphas = cell.samples(shrinkmean::harness::Quantity::AlphaBonaFide);
    let dev: Vec<f64> = alphas.iter().map(|a| (a - 1.0).abs()).collect();
    assert!(shrinkmean::harness::median(&dev) < 0.1);
    let olse = cell.estimator(EstimatorKind::Olse).unwrap().mean_loss;
    let mean = cell.estimator(EstimatorKind::SampleMean).unwrap().mean_loss;
    assert!((olse / mean - 1.0).abs() < 0.05, "olse {olse}, sample mean {mean}");
}

#[test]
fn runtimes_are_recorded_only_on_request() {
    let config = McConfig {
        replications: 5,
        ..small_config()
    };
    let report = run_study(&config).unwrap();
    assert!(report.cells.iter().flat_map(|c| &c.estimators).all(|e| e.mean_runtime_s.is_none()));
    let timed = run_study(&McConfig { timing: true, ..config }).unwrap();
    assert!(timed
        .cells
        .iter()
        .flat_map(|c| &c.estimators)
        .all(|e| e.mean_runtime_s.is_some_and(|t| t >= 0.0)));
}

#[test]
fn fast_unit_target_sums_beat_the_pairwise_loops() {
    let mut rng = substream(9, 0);
    let y = standard_normal_matrix(200, 100, &mut rng);
    let time = |fast: bool| {
        let started = Instant::now();
        for _ in 0..3 {
            wang_estimator(&y, fast).unwrap();
        }
        started.elapsed()
    };
    // Warm up, then compare.
    time(true);
    let fast = time(true);
    let naive = time(false);
    assert!(fast < naive, "fast {fast:?}, naive {naive:?}");
}

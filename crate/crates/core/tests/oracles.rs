//! Checks against closed forms and independent simulations.

use graph_denoise::classify::{accuracy, ncm_fit, ClassifierConfig, ClassifierKind, Metric};
use graph_denoise::denoise::{denoise_class, DenoiseConfig, GraphKind};
use graph_denoise::episodes::{
    confidence_interval, run_fewshot_eval, sample_episode, EpisodePool, EpisodeSpec, EvalReport, FewShotConfig,
    PairedEval,
};
use graph_denoise::graph::complete_graph;
use graph_denoise::io::config::{Mode, RunConfig};
use graph_denoise::io::format::{load_features, save_features, FileFormat};
use graph_denoise::io::report::{Report, ResultEntry};
use graph_denoise::spectral::{eigendecompose, normalized_laplacian, AdjacencyMatrix};
use graph_denoise::synth::{gaussian_pool, SynthConfig};
use graph_denoise::theory::{
    centroid, corollary1_factors, filtered_centroid, lemma1_cov_ratio, lemma1_mean_weight, sample_gaussian_class,
    verify_theory, GaussianClassSpec, TheoryConfig,
};
use graph_denoise::LabeledFeatures;
use nalgebra::{dmatrix, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn within_class_spread(f: &DMatrix<f64>) -> f64 {
    let c = centroid(f);
    f.row_iter().map(|r| (r.transpose() - &c).norm_squared()).sum::<f64>() / f.nrows() as f64
}

#[test]
fn path_graph_spectrum() {
    let w = AdjacencyMatrix::new(dmatrix![0.0, 1.0, 0.0; 1.0, 0.0, 1.0; 0.0, 1.0, 0.0]).unwrap();
    let basis = eigendecompose(&normalized_laplacian(&w).unwrap()).unwrap();
    for (got, want) in basis.eigenvalues().iter().zip([0.0, 1.0, 2.0]) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    // null vector is proportional to sqrt(degree) = (1, √2, 1)
    let u0 = basis.eigenvectors().column(0);
    let want = [0.5, std::f64::consts::FRAC_1_SQRT_2, 0.5];
    for (got, want) in u0.iter().zip(want) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn complete_graph_spectrum() {
    for m in [2usize, 5, 17, 60] {
        let basis = eigendecompose(&normalized_laplacian(&complete_graph(m).unwrap()).unwrap()).unwrap();
        let lambda = basis.eigenvalues();
        assert!(lambda[0].abs() < 1e-12);
        let high = m as f64 / (m as f64 - 1.0);
        assert!(lambda.iter().skip(1).all(|v| (v - high).abs() < 1e-12));
        let inv_sqrt_m = 1.0 / (m as f64).sqrt();
        assert!(basis.eigenvectors().column(0).iter().all(|v| (v - inv_sqrt_m).abs() < 1e-12));
        assert!((lemma1_mean_weight(&basis, 1, m).unwrap() - 1.0).abs() < 1e-12);
        assert!((lemma1_cov_ratio(&basis, 1, m).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn published_factor_arithmetic() {
    let (mean, cov) = corollary1_factors(5).unwrap();
    assert_eq!(mean, 1.25);
    assert!((cov - 0.3125).abs() < 1e-15);
    let (mean, cov) = corollary1_factors(100).unwrap();
    assert!((mean - 100.0 / 99.0).abs() < 1e-15);
    assert!((cov - 100.0 / (99.0 * 99.0)).abs() < 1e-15);
}

#[test]
fn step_filter_reduces_within_class_spread() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = DenoiseConfig { knn_k: 4, k1: 1, k2: 4, mid_gain: 0.6, graph_kind: GraphKind::Knn };
    let (mut before, mut after) = (0.0, 0.0);
    for _ in 0..100 {
        let f = DMatrix::from_fn(5, 16, |_, j| 2.0 * (j % 3) as f64 + rng.sample::<f64, _>(StandardNormal));
        before += within_class_spread(&f);
        after += within_class_spread(&denoise_class(&f, &cfg).unwrap());
    }
    assert!(after < before, "{after} >= {before}");
}

#[test]
fn fixed_graph_covariance_matches_closed_form() {
    // independent simulation on a weighted path graph, compared with ‖Pᵀ1‖²σ²/m²
    let (m, d, k, sigma, trials) = (6usize, 4usize, 2usize, 1.5, 20_000usize);
    let w = AdjacencyMatrix::new(DMatrix::from_fn(
        m,
        m,
        |i, j| {
            if i.abs_diff(j) == 1 {
                1.0 + i.min(j) as f64
            } else {
                0.0
            }
        },
    ))
    .unwrap();
    let basis = eigendecompose(&normalized_laplacian(&w).unwrap()).unwrap();
    let spec = GaussianClassSpec { mu: vec![0.0; d], sigma, m };
    let mut sum_sq = 0.0;
    for t in 0..trials {
        let f = sample_gaussian_class(&spec, 1000 + t as u64).unwrap();
        sum_sq += filtered_centroid(&f, &basis, k).unwrap().norm_squared();
    }
    let simulated = sum_sq / trials as f64;
    let predicted = lemma1_cov_ratio(&basis, k, m).unwrap() * d as f64 * sigma * sigma / m as f64;
    // trace estimate is a sum of d scaled χ²₁ terms; relative SE ≈ sqrt(2/(d·trials))
    let tol = 4.0 * (2.0 / (d * trials) as f64).sqrt();
    assert!((simulated / predicted - 1.0).abs() < tol, "{simulated} vs {predicted}");
    assert!(predicted < d as f64 * sigma * sigma / m as f64);
}

#[test]
fn gaussian_sampler_moments() {
    let spec = GaussianClassSpec { mu: vec![1.0, -2.0, 0.5], sigma: 2.0, m: 20_000 };
    let f = sample_gaussian_class(&spec, 5).unwrap();
    let n = spec.m as f64;
    for (j, &mu) in spec.mu.iter().enumerate() {
        let col = f.column(j);
        let mean = col.sum() / n;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - mu).abs() < 4.0 * spec.sigma / n.sqrt(), "mean {mean}");
        // Var(s²) = 2σ⁴/(n-1)
        assert!((var - 4.0).abs() < 4.0 * (2.0 * 16.0 / (n - 1.0)).sqrt(), "var {var}");
    }
    assert_eq!(sample_gaussian_class(&spec, 5).unwrap(), f);
}

#[test]
fn ncm_centroids_estimate_class_means() {
    let cfg = SynthConfig { classes: 4, per_class: 100, d: 6, separation: 5.0, sigma: 1.0, offset: 2.0, seed: 3 };
    let data = gaussian_pool(&cfg).unwrap();
    let model = ncm_fit(&data, Metric::Euclidean).unwrap();
    let radius = cfg.separation / std::f64::consts::SQRT_2;
    for (c, label) in model.class_ids().iter().enumerate() {
        assert_eq!(label, &format!("class{c:02}"));
        for j in 0..cfg.d {
            let mean = cfg.offset + if j == c { radius } else { 0.0 };
            assert!((model.centroids()[(c, j)] - mean).abs() < 4.0 * cfg.sigma / 10.0);
        }
    }
}

#[test]
fn well_separated_blobs_are_classified() {
    let base = SynthConfig { classes: 5, d: 8, separation: 6.0, ..Default::default() };
    let train = gaussian_pool(&SynthConfig { per_class: 50, seed: 1, ..base }).unwrap();
    let test = gaussian_pool(&SynthConfig { per_class: 200, seed: 2, ..base }).unwrap();
    for kind in [ClassifierKind::Ncm, ClassifierKind::Nn1] {
        let clf = ClassifierConfig { kind, metric: Metric::Euclidean };
        let acc = accuracy(&clf.predict(&train, test.features()).unwrap(), test.labels());
        assert!(acc >= 0.95, "{kind:?}: {acc}");
    }
}

#[test]
fn episode_classes_are_uniform() {
    let pool = EpisodePool::new(gaussian_pool(&SynthConfig { per_class: 25, d: 20, ..Default::default() }).unwrap());
    let spec = EpisodeSpec { n_way: 5, m_shot: 5, q_query: 15 };
    let episodes = 2000;
    let mut counts = std::collections::HashMap::new();
    for seed in 0..episodes {
        let ep = sample_episode(&pool, &spec, seed).unwrap();
        assert_eq!(ep.support.n(), 25);
        assert_eq!(ep.query.n(), 75);
        assert!(ep.support_rows.iter().all(|r| !ep.query_rows.contains(r)));
        for class in ep.classes {
            *counts.entry(class).or_insert(0usize) += 1;
        }
    }
    assert_eq!(counts.len(), 20);
    let expected = (episodes as usize * spec.n_way) as f64 / 20.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9% quantile of χ² with 19 degrees of freedom
    assert!(chi2 < 43.82, "chi2 = {chi2}");
}

#[test]
fn indistinguishable_classes_give_chance_accuracy() {
    // all class means coincide; a large pool keeps the empirical means of the
    // finite classes from carrying signal
    let pool = EpisodePool::new(
        gaussian_pool(&SynthConfig { classes: 10, per_class: 5000, d: 16, separation: 0.0, ..Default::default() })
            .unwrap(),
    );
    let cfg = FewShotConfig {
        episode: EpisodeSpec { n_way: 5, m_shot: 5, q_query: 15 },
        denoise: DenoiseConfig::default(),
        classifier: ClassifierConfig { kind: ClassifierKind::Ncm, metric: Metric::Euclidean },
        iterations: 1000,
        seed: 9,
    };
    let paired = run_fewshot_eval(&pool, &cfg).unwrap();
    for arm in [&paired.without_filter, &paired.with_filter] {
        let sigmas = (arm.mean_accuracy - 0.2).abs() / (arm.ci95_halfwidth / 1.96);
        assert!(sigmas < 4.0, "accuracy {} ± {}", arm.mean_accuracy, arm.ci95_halfwidth);
    }
}

#[test]
fn confidence_interval_closed_form() {
    let (mean, hw) = confidence_interval(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(mean, 2.5);
    assert!((hw - 1.96 * (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    assert!(confidence_interval(&[1.0]).is_err());
}

#[test]
fn filtered_mean_is_preserved_on_complete_graphs() {
    let cfg = TheoryConfig { m_values: vec![5, 20, 100], trials: 4000, ..Default::default() };
    let report = verify_theory(&cfg).unwrap();
    for row in &report.rows {
        for j in 0..cfg.d {
            let se = row.filtered.standard_error(j);
            assert!((row.filtered.mean_est[j] - cfg.mu).abs() < 4.0 * se, "m={} coord {j}", row.m);
        }
        assert!((row.lemma_mean_weight - 1.0).abs() < 1e-12);
        assert!((row.mc_mean_factor.unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn text_and_binary_loaders_agree() {
    let dir = tempfile::tempdir().unwrap();
    let data = gaussian_pool(&SynthConfig { classes: 3, per_class: 7, d: 5, ..Default::default() }).unwrap();
    let txt = dir.path().join("f.csv");
    let bin = dir.path().join("f.bin");
    assert_eq!(FileFormat::from_extension(&bin), FileFormat::Bin);
    save_features(&txt, &data, FileFormat::from_extension(&txt)).unwrap();
    save_features(&bin, &data, FileFormat::from_extension(&bin)).unwrap();
    let a = load_features(&txt, FileFormat::Text).unwrap();
    let b = load_features(&bin, FileFormat::Bin).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, data);
}

#[test]
fn report_json_round_trip() {
    let echo = serde_json::json!({ "k1": 1 });
    let arm = EvalReport { mean_accuracy: 0.9399, ci95_halfwidth: 0.011, iterations: 2000, config_echo: echo.clone() };
    let paired = PairedEval { without_filter: arm.clone(), with_filter: arm, delta_mean: 0.0, delta_ci95: 0.0 };
    let mut report = Report::new(RunConfig::defaults_for(Mode::EvalFewshot));
    report.results.push(ResultEntry { name: "m_shot=5".into(), paired });
    let text = report.to_json().unwrap();
    assert!(text.contains("0.9399") && text.contains("0.011"));
    assert_eq!(Report::from_json(&text).unwrap(), report);

    let empty = Report::new(RunConfig::defaults_for(Mode::EvalFewshot));
    let value: serde_json::Value = serde_json::from_str(&empty.to_json().unwrap()).unwrap();
    assert_eq!(value["results"], serde_json::json!([]));
    assert_eq!(Report::from_json(&empty.to_json().unwrap()).unwrap(), empty);
}

#[test]
fn loaders_reject_damaged_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = LabeledFeatures::new(dmatrix![1.0, 2.0; 3.0, 4.0], vec!["a".into(), "b".into()]).unwrap();
    let bin = dir.path().join("f.bin");
    save_features(&bin, &data, FileFormat::Bin).unwrap();
    let bytes = std::fs::read(&bin).unwrap();
    std::fs::write(&bin, &bytes[..bytes.len() - 3]).unwrap();
    assert!(load_features(&bin, FileFormat::Bin).is_err());
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    std::fs::write(&bin, &bad_magic).unwrap();
    assert!(load_features(&bin, FileFormat::Bin).is_err());

    let txt = dir.path().join("f.txt");
    std::fs::write(&txt, "a,1.0,2.0\nb,3.0\n").unwrap();
    assert!(load_features(&txt, FileFormat::Text).is_err());
    std::fs::write(&txt, "a,1.0,nope\n").unwrap();
    assert!(load_features(&txt, FileFormat::Text).is_err());
}

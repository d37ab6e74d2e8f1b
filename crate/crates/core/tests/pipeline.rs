use std::path::Path;
use std::process::Command;

use ndarray::{s, Array2};

use tadp_rme::attacks::{membership_inference, reconstruction_attack, AttackConfig};
use tadp_rme::baselines::BaselineKind;
use tadp_rme::dataset::{synthesize_blobs, ClipConfig};
use tadp_rme::experiments::config::{DatasetConfig, DatasetKind};
use tadp_rme::experiments::results::{mean_std, CsvTable};
use tadp_rme::experiments::runner::{run_cells, CellPlan, Transform, ADAPTIVE, EMBEDDING_ONLY, MECHANISM, NOISE_ONLY};
use tadp_rme::experiments::{
    run_ablation, run_baseline_comparison, run_sensitivity, run_tradeoff_sweep, write_outputs, ExperimentConfig,
};
use tadp_rme::experiments::results::CellKey;
use tadp_rme::metrics::spearman_rho;
use tadp_rme::{gaussian_perturb, rng, BaselineParams, BaselineSpec, Dataset};

fn blobs(n: usize, d: usize, classes: usize) -> DatasetConfig {
    DatasetConfig {
        kind: DatasetKind::Blobs,
        path: None,
        n,
        d,
        classes,
        ..DatasetConfig::default()
    }
}

fn config(taus: Vec<f64>, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        dataset: blobs(500, 10, 4),
        taus,
        trials,
        ..ExperimentConfig::default()
    }
}

fn gaussian_rows(n: usize, d: usize, mean: f64, sd: f64, seed: u64) -> Array2<f64> {
    let mut r = rng::seeded(seed);
    Array2::from_shape_simple_fn((n, d), || mean + sd * rng::standard_normal::<f64, _>(&mut r))
}

#[test]
fn mia_same_distribution_is_private() {
    let z = gaussian_rows(800, 5, 0.0, 1.0, 1);
    let (p, auc) = membership_inference(
        z.slice(s![..400, ..]),
        z.slice(s![400.., ..]),
        &AttackConfig::default(),
        &mut rng::seeded(2),
    )
    .unwrap();
    assert!((auc - 0.5).abs() < 0.05, "auc {auc}");
    assert!(p > 0.9, "priv {p}");
}

#[test]
fn mia_separable_is_not_private() {
    let members = gaussian_rows(200, 5, 0.0, 1.0, 1);
    let others = gaussian_rows(300, 5, 10.0, 1.0, 2);
    let (p, auc) = membership_inference(members.view(), others.view(), &AttackConfig::default(), &mut rng::seeded(3))
        .unwrap();
    assert!(!(1e-3..=1.0 - 1e-3).contains(&auc), "auc {auc}");
    assert!(p < 1e-2, "priv {p}");
}

#[test]
fn reconstruction_of_identity_release() {
    let x = synthesize_blobs::<f64>(400, 6, 3, 0.1, 0).unwrap().features;
    let (p, err) = reconstruction_attack(x.view(), x.view(), &AttackConfig::default()).unwrap();
    assert!(err <= 0.01, "err {err}");
    assert!(p <= 0.01, "priv {p}");
}

#[test]
fn reconstruction_from_independent_noise() {
    let x = gaussian_rows(1000, 4, 0.0, 1.0, 5);
    let z = gaussian_rows(1000, 6, 0.0, 1.0, 6);
    let (p, err) = reconstruction_attack(z.view(), x.view(), &AttackConfig::default()).unwrap();
    assert!((err - 1.0).abs() < 0.05, "err {err}");
    assert!(p > 0.95, "priv {p}");
}

fn noise_only_cells(cfg: &ExperimentConfig, sigmas: &[f64]) -> Vec<CellPlan> {
    let mut plans = Vec::new();
    for &sigma in sigmas {
        for seed in cfg.seeds() {
            let params = BaselineParams {
                additive_noise: sigma,
                ..BaselineParams::default()
            };
            plans.push(CellPlan {
                key: CellKey {
                    dataset: "blobs".into(),
                    method: "noise".into(),
                    setting: String::new(),
                    tau: None,
                    epsilon: None,
                    sigma: Some(sigma),
                    seed,
                },
                transform: Transform::Baseline(BaselineSpec::new(BaselineKind::AdditiveNoise, params).unwrap()),
            });
        }
    }
    plans
}

#[test]
fn noise_raises_recon_privacy_and_lowers_overlap() {
    let cfg = config(vec![0.0], 5);
    let raw = cfg.dataset.load().unwrap();
    let sigmas = [0.0, 0.05, 0.1, 0.2, 0.5, 1.0];
    let table = run_cells(&raw, &noise_only_cells(&cfg, &sigmas), &cfg).unwrap();
    let mut recon = Vec::new();
    let mut overlap = Vec::new();
    for &sigma in &sigmas {
        let rows: Vec<_> = table.trials.iter().filter(|t| t.sigma == Some(sigma)).collect();
        recon.push(rows.iter().map(|t| t.priv_recon).sum::<f64>() / rows.len() as f64);
        overlap.push(rows.iter().map(|t| t.knn_overlap[&10]).sum::<f64>() / rows.len() as f64);
    }
    // Non-decreasing within a small statistical tolerance.
    for w in recon.windows(2) {
        assert!(w[1] >= w[0] - 0.02, "priv_recon {recon:?}");
    }
    assert!(recon.last().unwrap() > recon.first().unwrap());
    for w in overlap.windows(2) {
        assert!(w[1] <= w[0] + 0.02, "overlap {overlap:?}");
    }
}

#[test]
fn sweep_trend_on_blobs() {
    let cfg = config(tadp_rme::experiments::config::DEFAULT_TAUS.to_vec(), 5);
    let table = run_tradeoff_sweep(&cfg).unwrap();
    assert_eq!(table.trials.len(), 40);
    let rows = table.rows_for(MECHANISM);
    let taus: Vec<f64> = rows.iter().map(|r| r.tau.unwrap()).collect();
    let privacy: Vec<f64> = rows.iter().map(|r| r.mean("priv_overall").unwrap()).collect();
    let rho = spearman_rho(&taus, &privacy).unwrap().rho;
    assert!(rho >= 0.8, "rho {rho}, privacy {privacy:?}");
    let acc = |i: usize| rows[i].mean("accuracy").unwrap();
    assert!(acc(0) > acc(rows.len() - 1));
    for t in &table.trials {
        let eps = 80.0 - 65.0 * t.tau.unwrap();
        assert!((t.epsilon.unwrap() - eps).abs() < 1e-12);
    }
}

#[test]
fn aggregation_matches_raw_rows() {
    let cfg = config(vec![0.0, 0.5], 3);
    let table = run_tradeoff_sweep(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&table, dir.path()).unwrap();
    let raw = CsvTable::read(&dir.path().join("raw.csv")).unwrap();
    let agg = CsvTable::read(&dir.path().join("aggregated.csv")).unwrap();
    assert_eq!(agg.rows.len(), 2);
    let tau_raw = raw.column("tau").unwrap();
    let tau_agg = agg.column("tau").unwrap();
    for metric in ["accuracy", "priv_overall", "knn_overlap@5", "spearman_rho"] {
        let (cr, cm, cs) = (
            raw.column(metric).unwrap(),
            agg.column(&format!("{metric}_mean")).unwrap(),
            agg.column(&format!("{metric}_std")).unwrap(),
        );
        for row in &agg.rows {
            let values: Vec<f64> = raw
                .rows
                .iter()
                .filter(|r| r[tau_raw] == row[tau_agg])
                .map(|r| r[cr].parse().unwrap())
                .collect();
            assert_eq!(values.len(), 3);
            let (mean, std) = mean_std(&values);
            assert_eq!(row[cm].parse::<f64>().unwrap(), mean, "{metric}");
            assert_eq!(row[cs].parse::<f64>().unwrap(), std, "{metric}");
        }
    }
    let pareto = CsvTable::read(&dir.path().join("pareto.csv")).unwrap();
    assert_eq!(pareto.rows.len(), 2);
}

#[test]
fn comparison_expectations() {
    let cfg = config(vec![0.0], 2);
    let table = run_baseline_comparison(&cfg).unwrap();
    let pick = |method: &str, eps: Option<f64>, seed: u64| {
        table
            .trials
            .iter()
            .find(|t| t.method == method && t.epsilon == eps && t.seed == seed)
            .unwrap_or_else(|| panic!("{method} {eps:?}"))
    };
    for seed in cfg.seeds() {
        assert_eq!(pick(MECHANISM, Some(15.0), seed).sigma, pick("gaussian_dp", Some(15.0), seed).sigma);
        let lo = pick("personalized_dp", Some(15.0), seed);
        let hi = pick("personalized_dp", Some(80.0), seed);
        assert_eq!(lo.accuracy, hi.accuracy);
        assert_eq!(lo.priv_overall, hi.priv_overall);
    }
    let mean_acc = |method: &str, eps: Option<f64>| {
        let v: Vec<f64> = cfg.seeds().map(|s| pick(method, eps, s).accuracy).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean_acc("additive_noise", None) > mean_acc("gaussian_dp", Some(15.0)));
    for kind in BaselineKind::ALL {
        assert!(table.trials.iter().any(|t| t.method == kind.name()), "{kind} missing");
    }
}

#[test]
fn ablation_on_blobs() {
    let cfg = config(vec![0.5], 5);
    let table = run_ablation(&cfg).unwrap();
    let mean = |method: &str, metric: &str| {
        table
            .rows_for(method)
            .first()
            .and_then(|r| r.mean(metric))
            .unwrap_or_else(|| panic!("{method}"))
    };
    assert!(mean(ADAPTIVE, "priv_overall") - mean(NOISE_ONLY, "priv_overall") >= 0.0);
    assert!(mean(EMBEDDING_ONLY, "accuracy") > mean(NOISE_ONLY, "accuracy"));
}

#[test]
fn sensitivity_rows() {
    let cfg = config(vec![0.5], 1);
    let table = run_sensitivity(&cfg).unwrap();
    let rows = table.aggregate();
    assert_eq!(rows.len(), 11);
    let eps: Vec<f64> = rows
        .iter()
        .filter(|r| r.setting.starts_with("eps_min="))
        .map(|r| r.epsilon.unwrap())
        .collect();
    let mut sorted = eps.clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(sorted, vec![45.0, 47.5, 50.0, 55.0]);
}

#[test]
fn gaussian_baseline_matches_mechanism_noise() {
    let ds: Dataset = synthesize_blobs(50, 4, 2, 0.1, 0).unwrap().clipped(ClipConfig::new(1.0).unwrap());
    let spec = BaselineSpec::new(BaselineKind::GaussianDp, BaselineParams::default()).unwrap();
    let sigma = spec.sigma().unwrap();
    let a = tadp_rme::apply_baseline(&spec, ds.features.view(), &mut rng::seeded(4)).unwrap();
    let b = gaussian_perturb(ds.features.view(), sigma, &mut rng::seeded(4));
    assert_eq!(a, b);
}

fn strip_wall_time(path: &Path) -> CsvTable {
    CsvTable::read(path).unwrap().without("wall_time_seconds")
}

#[test]
fn cli_sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg_path,
        "version = 1\ntaus = [0.0, 1.0]\ntrials = 2\nbase_seed = 11\n[dataset]\nkind = \"blobs\"\nn = 300\nd = 8\nclasses = 3\n",
    )
    .unwrap();
    let run = |out: &Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_tadp"))
            .args(["sweep", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(out)
            .env("RUST_LOG", "warn")
            .status()
            .unwrap();
        assert!(status.success());
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a);
    run(&b);
    let ra = strip_wall_time(&a.join("raw.csv"));
    assert_eq!(ra.rows.len(), 4);
    assert_eq!(ra, strip_wall_time(&b.join("raw.csv")));
    let seeds: Vec<&str> = ra.rows.iter().map(|r| r[ra.column("seed").unwrap()].as_str()).collect();
    assert_eq!(seeds, vec!["11", "12", "11", "12"]);
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_tadp");
    let code = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .env("RUST_LOG", "off")
            .status()
            .unwrap()
            .code()
            .unwrap()
    };
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "version = 1\nmystery = true\n").unwrap();
    assert_eq!(code(&["sweep", "--config", bad.to_str().unwrap()]), 2);
    assert_eq!(code(&["sweep", "--dataset", "blobs", "--tau", "1.5"]), 2);
    assert_eq!(code(&["ablate", "--dataset", "blobs", "--tau", "0.1,0.2"]), 2);
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(code(&["sweep", "--dataset", empty.to_str().unwrap()]), 3);
    let garbage = dir.path().join("garbage.csv");
    std::fs::write(&garbage, "a,b\n1,2\n").unwrap();
    assert_eq!(code(&["sweep", "--dataset", garbage.to_str().unwrap()]), 3);
    let out = dir.path().join("theory");
    assert_eq!(code(&["theory", "--out", out.to_str().unwrap()]), 0);
    let curves = CsvTable::read(&out.join("theory_curves.csv")).unwrap();
    assert_eq!(curves.header, vec!["curve", "parameter", "x", "y"]);
}

#[test]
fn cli_ttest_over_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_tadp");
    let out = dir.path().join("cmp");
    let status = Command::new(bin)
        .args(["compare", "--dataset", "blobs", "--seeds", "3", "--out"])
        .arg(&out)
        .env("RUST_LOG", "warn")
        .status()
        .unwrap();
    assert!(status.success());
    let status = Command::new(bin)
        .args(["ttest", "--out"])
        .arg(&out)
        .env("RUST_LOG", "warn")
        .status()
        .unwrap();
    assert!(status.success());
    let t = CsvTable::read(&out.join("ttest.csv")).unwrap();
    let (cm, cp) = (t.column("method").unwrap(), t.column("p").unwrap());
    assert!(t.rows.iter().any(|r| r[cm] == "gaussian_dp"));
    for r in &t.rows {
        let p: f64 = r[cp].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn member_split_uses_whole_dataset() {
    // Rows sorted by class must not leak into the membership attack.
    let ds = synthesize_blobs::<f64>(400, 6, 2, 0.05, 1).unwrap();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by_key(|&i| ds.labels[i]);
    let sorted = ds.select(&order);
    let cfg = ExperimentConfig {
        dataset: blobs(400, 6, 2),
        trials: 1,
        ..ExperimentConfig::default()
    };
    let plans = vec![CellPlan {
        key: CellKey {
            dataset: "sorted".into(),
            method: "embed".into(),
            setting: String::new(),
            tau: Some(0.0),
            epsilon: None,
            sigma: Some(0.0),
            seed: 0,
        },
        transform: Transform::EmbeddingOnly {
            tau: 0.0,
            budget: cfg.budget,
        },
    }];
    let t = run_cells(&sorted, &plans, &cfg).unwrap();
    assert!(t.trials[0].priv_mia > 0.8, "{}", t.trials[0].priv_mia);
}

#[test]
fn sample_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.to_toml().unwrap(), ExperimentConfig::default().to_toml().unwrap());
}

//! Orchestration of the sweep, comparison, ablation and sensitivity runs.
//!
//! Every (variant, seed) cell is evaluated independently from its own seed,
//! so cells run in parallel and the merged table is identical regardless of
//! scheduling.

use std::path::Path;
use std::time::Instant;

use log::info;
use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, TheoryConfig};
use super::pareto::emit_pareto;
use super::results::{write_aggregated, write_raw, write_rows, CellKey, SweepTable, TrialResult};
use crate::attacks::full_attack_suite;
use crate::baselines::{apply_baseline, BaselineSpec};
use crate::dataset::{ClipConfig, RawDataset};
use crate::error::{Error, Result};
use crate::learners::FitConfig;
use crate::mechanism::{
    gaussian_perturb, noise_sigma, protect, protect_per_record, rme_embed, trust_budget, BudgetConfig, TrustScore,
};
use crate::metrics::{utility_report, ProbeConfig, StructureConfig};
use crate::rng;
use crate::theory;

/// Method label of the full mechanism in result tables.
pub const MECHANISM: &str = "tadp_rme";

const MECHANISM_STREAM: u64 = 1;
const MEMBER_STREAM: u64 = 2;
const ATTACK_STREAM: u64 = 3;
const TAU_STREAM: u64 = 4;

/// How a cell turns clipped data into released rows.
#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    /// Noise at the trust budget, then the embedding.
    Mechanism { tau: f64, budget: BudgetConfig<f64> },
    /// Mechanism with per-record trust drawn from `[tau - spread, tau + spread]`.
    Adaptive {
        tau: f64,
        spread: f64,
        budget: BudgetConfig<f64>,
    },
    /// Calibrated noise without the embedding.
    NoiseOnly { tau: f64, budget: BudgetConfig<f64> },
    /// Embedding without noise.
    EmbeddingOnly { tau: f64, budget: BudgetConfig<f64> },
    Baseline(BaselineSpec<f64>),
}

impl Transform {
    pub fn apply<R: Rng + ?Sized>(&self, x: ArrayView2<'_, f64>, rng: &mut R, tau_rng: &mut R) -> Result<Array2<f64>> {
        let trust = |t: f64| TrustScore::new(t);
        Ok(match self {
            Transform::Mechanism { tau, budget } => protect(x, trust(*tau)?, budget, rng)?.z,
            Transform::Adaptive { tau, spread, budget } => {
                let (lo, hi) = ((tau - spread).max(0.0), (tau + spread).min(1.0));
                let taus = (0..x.nrows())
                    .map(|_| trust(if hi > lo { tau_rng.random_range(lo..=hi) } else { lo }))
                    .collect::<Result<Vec<_>>>()?;
                protect_per_record(x, &taus, budget, rng)?.z
            }
            Transform::NoiseOnly { tau, budget } => {
                let eps = trust_budget(trust(*tau)?, budget);
                gaussian_perturb(x, noise_sigma(eps, budget.delta, budget.delta2)?, rng)
            }
            Transform::EmbeddingOnly { tau, budget } => rme_embed(x, budget.alpha_for(trust(*tau)?)),
            Transform::Baseline(spec) => apply_baseline(spec, x, rng)?,
        })
    }

    fn clip_radius(&self) -> f64 {
        match self {
            Transform::Mechanism { budget, .. }
            | Transform::Adaptive { budget, .. }
            | Transform::NoiseOnly { budget, .. }
            | Transform::EmbeddingOnly { budget, .. } => budget.delta2,
            Transform::Baseline(spec) => spec.params.delta2,
        }
    }
}

/// A cell to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPlan {
    pub key: CellKey,
    pub transform: Transform,
}

/// A run that stopped early, with the trials completed before the failure.
#[derive(Debug, thiserror::Error)]
#[error("{error} (after {} completed trials)", partial.trials.len())]
pub struct RunFailure {
    pub partial: SweepTable,
    #[source]
    pub error: Error,
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        RunFailure {
            partial: SweepTable::default(),
            error,
        }
    }
}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Self {
        f.error
    }
}

/// Evaluates one cell on data already clipped to the transform's radius.
pub fn evaluate_cell(x: &RawDataset<f64>, plan: &CellPlan, cfg: &ExperimentConfig) -> Result<TrialResult> {
    let seed = plan.key.seed;
    let eval = &cfg.eval;
    let start = Instant::now();
    let mut mech_rng = rng::stream(seed, MECHANISM_STREAM);
    let mut tau_rng = rng::stream(seed, TAU_STREAM);
    let z = plan.transform.apply(x.features.view(), &mut mech_rng, &mut tau_rng)?;
    let mechanism_time = start.elapsed();

    let probe = ProbeConfig {
        fit: FitConfig { seed, ..eval.probe },
        test_fraction: 0.2,
        seed,
    };
    let structure = StructureConfig {
        seed,
        ..eval.structure.clone()
    };
    let utility = utility_report(x.features.view(), z.view(), &x.labels, &probe, &structure)?;

    let attack_start = Instant::now();
    let n = x.len();
    if n < 4 {
        return Err(Error::InvalidDataset(format!("{n} rows are too few for the attack split")));
    }
    // Members and non-members are a random halving; row order in the source
    // files is not assumed to be exchangeable.
    let mut perm = index::sample(&mut rng::stream(seed, MEMBER_STREAM), n, n).into_vec();
    let (members, nonmembers) = perm.split_at_mut(n / 2);
    members.sort_unstable();
    nonmembers.sort_unstable();
    let z_members = z.select(Axis(0), members);
    let z_nonmembers = z.select(Axis(0), nonmembers);
    let x_members = x.features.select(Axis(0), members);
    let y_members: Vec<usize> = members.iter().map(|&i| x.labels[i]).collect();
    let attack_cfg = crate::attacks::AttackConfig {
        fit: FitConfig { seed, ..eval.attack.fit },
        seed,
        ..eval.attack
    };
    let report = full_attack_suite(
        z_members.view(),
        z_nonmembers.view(),
        x_members.view(),
        &y_members,
        x.classes,
        &attack_cfg,
        &mut rng::stream(seed, ATTACK_STREAM),
    )?;
    let wall = (mechanism_time + attack_start.elapsed()).as_secs_f64();
    Ok(TrialResult::assemble(plan.key.clone(), utility, report, wall))
}

/// Clips once per distinct radius and evaluates all cells in parallel.
/// Results come back in canonical order; on failure the successful cells
/// are returned alongside the first error.
pub fn run_cells(raw: &RawDataset<f64>, plans: &[CellPlan], cfg: &ExperimentConfig) -> Result<SweepTable, RunFailure> {
    let mut radii: Vec<f64> = plans.iter().map(|p| p.transform.clip_radius()).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let clipped = radii
        .iter()
        .map(|&c| Ok((c, raw.clipped(ClipConfig::new(c)?))))
        .collect::<Result<Vec<_>>>()?;
    info!("evaluating {} cells on {} ({} rows)", plans.len(), raw.name, raw.len());
    let outcomes: Vec<Result<TrialResult>> = plans
        .par_iter()
        .map(|plan| {
            let c = plan.transform.clip_radius();
            let (_, x) = clipped.iter().find(|(r, _)| *r == c).expect("radius was clipped");
            let out = evaluate_cell(x, plan, cfg);
            if let Ok(t) = &out {
                info!(
                    "{} {} tau={:?} seed={} acc={:.4} priv={:.4}",
                    t.method, t.setting, t.tau, t.seed, t.accuracy, t.priv_overall
                );
            }
            out
        })
        .collect();
    let mut done = Vec::with_capacity(outcomes.len());
    let mut first_error = None;
    for o in outcomes {
        match o {
            Ok(t) => done.push(t),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    let table = SweepTable::new(done);
    match first_error {
        None => Ok(table),
        Some(error) => Err(RunFailure { partial: table, error }),
    }
}

fn mechanism_key(ds: &str, method: &str, setting: String, tau: f64, budget: &BudgetConfig<f64>, seed: u64) -> Result<CellKey> {
    let eps = trust_budget(TrustScore::new(tau)?, budget);
    Ok(CellKey {
        dataset: ds.to_string(),
        method: method.to_string(),
        setting,
        tau: Some(tau),
        epsilon: Some(eps),
        sigma: Some(noise_sigma(eps, budget.delta, budget.delta2)?),
        seed,
    })
}

/// Sweep cells: the mechanism at every grid tau for every seed.
pub fn plan_sweep(cfg: &ExperimentConfig, dataset: &str) -> Result<Vec<CellPlan>> {
    let mut plans = Vec::new();
    for &tau in &cfg.taus {
        for seed in cfg.seeds() {
            plans.push(CellPlan {
                key: mechanism_key(dataset, MECHANISM, String::new(), tau, &cfg.budget, seed)?,
                transform: Transform::Mechanism { tau, budget: cfg.budget },
            });
        }
    }
    Ok(plans)
}

/// Trust level whose budget equals `epsilon`, clamped to `[0, 1]`.
pub fn tau_for_epsilon(epsilon: f64, budget: &BudgetConfig<f64>) -> f64 {
    let span = budget.eps_max - budget.eps_min;
    if span == 0.0 {
        return 0.0;
    }
    ((budget.eps_max - epsilon) / span).clamp(0.0, 1.0)
}

/// Baseline cells: DP families at every budget, the mechanism at the
/// matching trust levels, and the remaining baselines once at defaults.
pub fn plan_comparison(cfg: &ExperimentConfig, dataset: &str) -> Result<Vec<CellPlan>> {
    let cmp = &cfg.compare;
    let mut plans = Vec::new();
    for seed in cfg.seeds() {
        for &eps in &cmp.epsilons {
            let tau = tau_for_epsilon(eps, &cfg.budget);
            plans.push(CellPlan {
                key: mechanism_key(dataset, MECHANISM, String::new(), tau, &cfg.budget, seed)?,
                transform: Transform::Mechanism { tau, budget: cfg.budget },
            });
        }
        for &kind in &cmp.methods {
            let budgets: Vec<Option<f64>> = if kind.is_dp() {
                cmp.epsilons.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            for eps in budgets {
                let mut params = cmp.params;
                params.delta = cfg.budget.delta;
                params.delta2 = cfg.budget.delta2;
                if let Some(e) = eps {
                    params.epsilon = e;
                }
                let spec = BaselineSpec::new(kind, params)?;
                plans.push(CellPlan {
                    key: CellKey {
                        dataset: dataset.to_string(),
                        method: kind.name().to_string(),
                        setting: String::new(),
                        tau: None,
                        epsilon: eps,
                        sigma: spec.sigma(),
                        seed,
                    },
                    transform: Transform::Baseline(spec),
                });
            }
        }
    }
    Ok(plans)
}

/// Ablation method labels.
pub const NOISE_ONLY: &str = "noise_only";
pub const EMBEDDING_ONLY: &str = "embedding_only";
pub const FIXED_TAU: &str = "fixed_tau";
pub const ADAPTIVE: &str = "adaptive";

/// The four ablation variants at the configured tau.
pub fn plan_ablation(cfg: &ExperimentConfig, dataset: &str) -> Result<Vec<CellPlan>> {
    let tau = cfg.ablation.tau;
    let budget = cfg.budget;
    let mut plans = Vec::new();
    for seed in cfg.seeds() {
        let key = |method: &str| mechanism_key(dataset, method, String::new(), tau, &budget, seed);
        let mut embed_key = key(EMBEDDING_ONLY)?;
        embed_key.sigma = Some(0.0);
        let mut adaptive_key = key(ADAPTIVE)?;
        if cfg.ablation.spread > 0.0 {
            adaptive_key.sigma = None;
        }
        plans.push(CellPlan {
            key: key(NOISE_ONLY)?,
            transform: Transform::NoiseOnly { tau, budget },
        });
        plans.push(CellPlan {
            key: embed_key,
            transform: Transform::EmbeddingOnly { tau, budget },
        });
        plans.push(CellPlan {
            key: key(FIXED_TAU)?,
            transform: Transform::Mechanism { tau, budget },
        });
        plans.push(CellPlan {
            key: adaptive_key,
            transform: Transform::Adaptive {
                tau,
                spread: cfg.ablation.spread,
                budget,
            },
        });
    }
    Ok(plans)
}

/// One-at-a-time variation of eps_min, eps_max and the clip radius.
pub fn plan_sensitivity(cfg: &ExperimentConfig, dataset: &str) -> Result<Vec<CellPlan>> {
    let s = &cfg.sensitivity;
    let mut variants: Vec<(String, BudgetConfig<f64>)> = Vec::new();
    for &v in &s.eps_min {
        variants.push((format!("eps_min={v}"), BudgetConfig { eps_min: v, ..cfg.budget }));
    }
    for &v in &s.eps_max {
        variants.push((format!("eps_max={v}"), BudgetConfig { eps_max: v, ..cfg.budget }));
    }
    for &v in &s.clip {
        variants.push((format!("clip={v}"), BudgetConfig { delta2: v, ..cfg.budget }));
    }
    let mut plans = Vec::new();
    for (setting, budget) in variants {
        budget
            .validate()
            .map_err(|e| Error::Config(format!("sensitivity variant {setting}: {e}")))?;
        for seed in cfg.seeds() {
            plans.push(CellPlan {
                key: mechanism_key(dataset, MECHANISM, setting.clone(), s.tau, &budget, seed)?,
                transform: Transform::Mechanism { tau: s.tau, budget },
            });
        }
    }
    Ok(plans)
}

fn run_planned(
    cfg: &ExperimentConfig,
    planner: fn(&ExperimentConfig, &str) -> Result<Vec<CellPlan>>,
) -> Result<SweepTable, RunFailure> {
    cfg.validate()?;
    let raw = cfg.dataset.load()?;
    let plans = planner(cfg, &raw.name)?;
    run_cells(&raw, &plans, cfg)
}

pub fn run_tradeoff_sweep(cfg: &ExperimentConfig) -> Result<SweepTable, RunFailure> {
    run_planned(cfg, plan_sweep)
}

pub fn run_baseline_comparison(cfg: &ExperimentConfig) -> Result<SweepTable, RunFailure> {
    run_planned(cfg, plan_comparison)
}

pub fn run_ablation(cfg: &ExperimentConfig) -> Result<SweepTable, RunFailure> {
    run_planned(cfg, plan_ablation)
}

pub fn run_sensitivity(cfg: &ExperimentConfig) -> Result<SweepTable, RunFailure> {
    run_planned(cfg, plan_sensitivity)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `raw.csv`, `aggregated.csv` and `pareto.csv` under `dir`.
pub fn write_outputs(table: &SweepTable, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_raw(table, &dir.join("raw.csv"))?;
    let rows = table.aggregate();
    write_aggregated(&rows, &dir.join("aggregated.csv"))?;
    let pareto: Vec<Vec<String>> = emit_pareto(&rows)
        .into_iter()
        .map(|p| {
            vec![
                p.dataset,
                p.method,
                opt(p.tau),
                opt(p.epsilon),
                p.accuracy.to_string(),
                p.priv_overall.to_string(),
                p.dominated.to_string(),
            ]
        })
        .collect();
    let path = dir.join("pareto.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_rows(
        file,
        &["dataset", "method", "tau", "epsilon", "accuracy", "priv_overall", "dominated"],
        &pareto,
    )
}

/// One point of a theory curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub curve: &'static str,
    pub parameter: String,
    pub x: f64,
    pub y: f64,
}

fn log10_big(n: &num_bigint::BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        num_traits::ToPrimitive::to_f64(n).map_or(f64::INFINITY, f64::log10)
    } else {
        let shift = bits - 64;
        let top = num_traits::ToPrimitive::to_f64(&(n >> shift)).unwrap_or(f64::MAX);
        top.log10() + shift as f64 * std::f64::consts::LOG10_2
    }
}

/// Recovery-probability, search-space, KL and mutual-information curves.
pub fn theory_curves(cfg: &TheoryConfig, budget: &BudgetConfig<f64>, taus: &[f64]) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::new();
    for &f in &cfg.fractions {
        for d in 1..=cfg.max_d {
            out.push(CurvePoint {
                curve: "recovery_probability",
                parameter: format!("fraction={f};R={}", cfg.r),
                x: f64::from(d),
                y: theory::recovery_probability(d, f, cfg.r)?,
            });
        }
    }
    for d in 1..=cfg.max_d {
        out.push(CurvePoint {
            curve: "log10_search_space",
            parameter: format!("R={}", cfg.r),
            x: f64::from(d),
            y: log10_big(&theory::search_space(d, cfg.r)),
        });
    }
    for &d in &cfg.kl_dims {
        for i in 1..=cfg.kl_points {
            let r = i as f64 / cfg.kl_points as f64;
            out.push(CurvePoint {
                curve: "kl_lower_bound",
                parameter: format!("d={d}"),
                x: r,
                y: theory::kl_lower_bound(r, d)?,
            });
        }
    }
    for &tau in taus {
        let eps = trust_budget(TrustScore::new(tau)?, budget);
        let sigma = noise_sigma(eps, budget.delta, budget.delta2)?;
        for &d in &cfg.kl_dims {
            out.push(CurvePoint {
                curve: "mi_upper_bound",
                parameter: format!("d={d};mean_sq_norm={}", budget.delta2 * budget.delta2),
                x: sigma,
                y: theory::mi_upper_bound(d, budget.delta2 * budget.delta2, sigma)?,
            });
        }
    }
    Ok(out)
}

pub fn write_theory_curves(points: &[CurvePoint], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![p.curve.to_string(), p.parameter.clone(), p.x.to_string(), p.y.to_string()])
        .collect();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_rows(file, &["curve", "parameter", "x", "y"], &rows)
}

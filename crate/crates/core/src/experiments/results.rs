//! Per-trial rows, their aggregation and CSV serialization.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::attacks::AttackReport;
use crate::error::{Error, Result};
use crate::metrics::UtilityReport;

/// One evaluated cell. `tau` is absent for baselines and `epsilon`/`sigma`
/// for mechanisms without a single budget or noise scale.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub dataset: String,
    pub method: String,
    /// Free-form variant label, e.g. `eps_min=10`; empty when unused.
    pub setting: String,
    pub tau: Option<f64>,
    pub epsilon: Option<f64>,
    pub sigma: Option<f64>,
    pub seed: u64,
    pub accuracy: f64,
    pub f1: f64,
    pub priv_mia: f64,
    pub priv_aia: f64,
    pub priv_recon: f64,
    pub priv_overall: f64,
    pub reliability: f64,
    pub mia_auc: f64,
    pub aia_accuracy: f64,
    pub recon_error: f64,
    pub knn_overlap: BTreeMap<usize, f64>,
    pub spearman_rho: f64,
    pub wall_time_seconds: f64,
}

/// Identity of a trial before evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub dataset: String,
    pub method: String,
    pub setting: String,
    pub tau: Option<f64>,
    pub epsilon: Option<f64>,
    pub sigma: Option<f64>,
    pub seed: u64,
}

impl TrialResult {
    pub fn assemble(key: CellKey, utility: UtilityReport, attacks: AttackReport, wall_time_seconds: f64) -> Self {
        Self {
            dataset: key.dataset,
            method: key.method,
            setting: key.setting,
            tau: key.tau,
            epsilon: key.epsilon,
            sigma: key.sigma,
            seed: key.seed,
            accuracy: utility.accuracy,
            f1: utility.f1_weighted,
            priv_mia: attacks.priv_mia,
            priv_aia: attacks.priv_aia,
            priv_recon: attacks.priv_recon,
            priv_overall: attacks.overall,
            reliability: attacks.reliability,
            mia_auc: attacks.raw.mia_auc,
            aia_accuracy: attacks.raw.aia_accuracy,
            recon_error: attacks.raw.recon_relative_error,
            knn_overlap: utility.knn_overlap,
            spearman_rho: utility.spearman_rho,
            wall_time_seconds,
        }
    }

    /// Named numeric columns in CSV order, wall time last.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("accuracy".to_string(), self.accuracy),
            ("f1".to_string(), self.f1),
            ("priv_mia".to_string(), self.priv_mia),
            ("priv_aia".to_string(), self.priv_aia),
            ("priv_recon".to_string(), self.priv_recon),
            ("priv_overall".to_string(), self.priv_overall),
            ("reliability".to_string(), self.reliability),
            ("mia_auc".to_string(), self.mia_auc),
            ("aia_accuracy".to_string(), self.aia_accuracy),
            ("recon_error".to_string(), self.recon_error),
        ];
        out.extend(self.knn_overlap.iter().map(|(k, v)| (format!("knn_overlap@{k}"), *v)));
        out.push(("spearman_rho".to_string(), self.spearman_rho));
        out.push(("wall_time_seconds".to_string(), self.wall_time_seconds));
        out
    }

    fn group_key(&self) -> (&str, &str, &str, Option<f64>, Option<f64>) {
        (&self.dataset, &self.method, &self.setting, self.tau, self.epsilon)
    }
}

fn cmp_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
    }
}

/// Canonical order: dataset, method, setting, tau, epsilon, seed.
pub fn canonical_cmp(a: &TrialResult, b: &TrialResult) -> Ordering {
    a.dataset
        .cmp(&b.dataset)
        .then_with(|| a.method.cmp(&b.method))
        .then_with(|| a.setting.cmp(&b.setting))
        .then_with(|| cmp_opt(a.tau, b.tau))
        .then_with(|| cmp_opt(a.epsilon, b.epsilon))
        .then_with(|| a.seed.cmp(&b.seed))
}

/// Mean and sample standard deviation (`n - 1`; zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Mean/std of every metric over the trials of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub dataset: String,
    pub method: String,
    pub setting: String,
    pub tau: Option<f64>,
    pub epsilon: Option<f64>,
    pub sigma: Option<f64>,
    pub n: usize,
    pub stats: Vec<(String, f64, f64)>,
}

impl AggregateRow {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.stats.iter().find(|(m, _, _)| m == metric).map(|s| s.1)
    }

    pub fn std(&self, metric: &str) -> Option<f64> {
        self.stats.iter().find(|(m, _, _)| m == metric).map(|s| s.2)
    }
}

/// Trials in canonical order plus their per-cell aggregation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub trials: Vec<TrialResult>,
}

impl SweepTable {
    pub fn new(mut trials: Vec<TrialResult>) -> Self {
        trials.sort_by(canonical_cmp);
        Self { trials }
    }

    pub fn extend(&mut self, other: SweepTable) {
        self.trials.extend(other.trials);
        self.trials.sort_by(canonical_cmp);
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Groups consecutive trials sharing (dataset, method, setting, tau,
    /// epsilon); relies on the canonical order.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut rows = Vec::new();
        for group in self.trials.chunk_by(|a, b| a.group_key() == b.group_key()) {
            let first = &group[0];
            let names: Vec<String> = first.metrics().into_iter().map(|(k, _)| k).collect();
            let per_trial: Vec<Vec<(String, f64)>> = group.iter().map(TrialResult::metrics).collect();
            let stats = names
                .iter()
                .enumerate()
                .map(|(j, name)| {
                    let values: Vec<f64> = per_trial.iter().map(|m| m[j].1).collect();
                    let (mean, std) = mean_std(&values);
                    (name.clone(), mean, std)
                })
                .collect();
            rows.push(AggregateRow {
                dataset: first.dataset.clone(),
                method: first.method.clone(),
                setting: first.setting.clone(),
                tau: first.tau,
                epsilon: first.epsilon,
                sigma: first.sigma,
                n: group.len(),
                stats,
            });
        }
        rows
    }

    /// Aggregated rows of one method, in tau order.
    pub fn rows_for(&self, method: &str) -> Vec<AggregateRow> {
        self.aggregate().into_iter().filter(|r| r.method == method).collect()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const KEY_COLUMNS: [&str; 7] = ["dataset", "method", "setting", "tau", "epsilon", "sigma", "seed"];

fn create(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes `raw.csv`: one row per trial, columns fixed by the first trial.
pub fn write_raw(table: &SweepTable, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let Some(first) = table.trials.first() else {
        w.write_record(KEY_COLUMNS)?;
        return w.flush().map_err(|e| Error::io(path, e));
    };
    let mut header: Vec<String> = KEY_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(first.metrics().into_iter().map(|(k, _)| k));
    w.write_record(&header)?;
    for t in &table.trials {
        let mut rec = vec![
            t.dataset.clone(),
            t.method.clone(),
            t.setting.clone(),
            fmt_opt(t.tau),
            fmt_opt(t.epsilon),
            fmt_opt(t.sigma),
            t.seed.to_string(),
        ];
        rec.extend(t.metrics().into_iter().map(|(_, v)| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `aggregated.csv`: `<metric>_mean` and `<metric>_std` per cell.
pub fn write_aggregated(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let mut header: Vec<String> = ["dataset", "method", "setting", "tau", "epsilon", "sigma", "n"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if let Some(first) = rows.first() {
        for (name, _, _) in &first.stats {
            header.push(format!("{name}_mean"));
            header.push(format!("{name}_std"));
        }
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.dataset.clone(),
            r.method.clone(),
            r.setting.clone(),
            fmt_opt(r.tau),
            fmt_opt(r.epsilon),
            fmt_opt(r.sigma),
            r.n.to_string(),
        ];
        for (_, mean, std) in &r.stats {
            rec.push(mean.to_string());
            rec.push(std.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A raw CSV read back as string columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Malformed(format!("missing column {name:?}")))
    }

    /// Same table without the named column, for comparisons that must ignore it.
    pub fn without(&self, name: &str) -> Self {
        let Ok(j) = self.column(name) else {
            return self.clone();
        };
        let drop = |row: &Vec<String>| {
            row.iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, v)| v.clone())
                .collect()
        };
        Self {
            header: drop(&self.header),
            rows: self.rows.iter().map(drop).collect(),
        }
    }
}

/// Writes rows of displayable cells with a header.
pub fn write_rows<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

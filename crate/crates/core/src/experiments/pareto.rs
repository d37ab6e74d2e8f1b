//! Privacy-utility frontier over aggregated sweep rows.

use super::results::AggregateRow;

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub dataset: String,
    pub method: String,
    pub tau: Option<f64>,
    pub epsilon: Option<f64>,
    pub accuracy: f64,
    pub priv_overall: f64,
    pub dominated: bool,
}

/// `a` dominates `b` when it is no worse in both coordinates and better in one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 >= b.1 && (a.0 > b.0 || a.1 > b.1)
}

/// Flags each point dominated by any other point of the same slice.
pub fn mark_dominated(points: &[(f64, f64)]) -> Vec<bool> {
    points
        .iter()
        .map(|&p| points.iter().any(|&q| dominates(q, p)))
        .collect()
}

/// Frontier per (dataset, method, setting), each slice sorted by tau.
pub fn emit_pareto(rows: &[AggregateRow]) -> Vec<ParetoPoint> {
    let mut slices: Vec<Vec<&AggregateRow>> = Vec::new();
    for r in rows {
        match slices
            .iter_mut()
            .find(|s| s[0].dataset == r.dataset && s[0].method == r.method && s[0].setting == r.setting)
        {
            Some(s) => s.push(r),
            None => slices.push(vec![r]),
        }
    }
    let mut out = Vec::new();
    for mut slice in slices {
        slice.sort_by(|a, b| {
            a.tau
                .unwrap_or(f64::NEG_INFINITY)
                .total_cmp(&b.tau.unwrap_or(f64::NEG_INFINITY))
                .then_with(|| a.epsilon.unwrap_or(0.0).total_cmp(&b.epsilon.unwrap_or(0.0)))
        });
        let coords: Vec<(f64, f64)> = slice
            .iter()
            .map(|r| {
                (
                    r.mean("accuracy").unwrap_or(f64::NAN),
                    r.mean("priv_overall").unwrap_or(f64::NAN),
                )
            })
            .collect();
        let flags = mark_dominated(&coords);
        for ((r, (acc, pr)), dominated) in slice.iter().zip(coords).zip(flags) {
            out.push(ParetoPoint {
                dataset: r.dataset.clone(),
                method: r.method.clone(),
                tau: r.tau,
                epsilon: r.epsilon,
                accuracy: acc,
                priv_overall: pr,
                dominated,
            });
        }
    }
    out
}

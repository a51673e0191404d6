//! Nearest-neighbour regimen recommendation and its evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cluster::{nearest_neighbor, BitCode, ClusterAssignment, CodeMatrix};
use crate::regimen::RegimenNode;
use crate::{Error, Result};

/// Trees keyed by (cluster, period). A present key with `None` is a cell
/// whose tree came out empty; an absent key is a missing tree.
pub type TreeTable = BTreeMap<(usize, usize), Option<RegimenNode>>;

/// Per patient, one drug set per period.
pub type PeriodDrugs = BTreeMap<String, Vec<BTreeSet<String>>>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recommendation {
    pub patient_id: String,
    pub neighbor_id: String,
    pub cluster: usize,
    pub per_period: Vec<BTreeSet<String>>,
    /// Periods whose (cluster, period) tree was missing.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_trees: Vec<usize>,
}

/// Drugs of the deepest cotreatment path whose every drug is in `drugs`, in
/// path order. Equally deep paths resolve to the one met first in a
/// node, cotreatment subtree, sibling traversal.
pub fn best_path(tree: &RegimenNode, drugs: &BTreeSet<String>) -> Vec<String> {
    let mut best = Vec::new();
    let mut path = Vec::new();
    search(tree, drugs, &mut path, &mut best);
    best
}

fn search(level: &RegimenNode, drugs: &BTreeSet<String>, path: &mut Vec<String>, best: &mut Vec<String>) {
    for n in level.siblings() {
        if !drugs.contains(&n.drug) {
            continue;
        }
        path.push(n.drug.clone());
        if path.len() > best.len() {
            best.clone_from(path);
        }
        if let Some(c) = &n.cotreat_child {
            search(c, drugs, path, best);
        }
        path.pop();
    }
}

/// Recommends one drug set per period for a held-out patient from the trees
/// of its nearest training neighbour's cluster.
#[allow(clippy::too_many_arguments)]
pub fn recommend(
    patient_id: &str,
    query: &BitCode,
    train_codes: &CodeMatrix,
    assignment: &ClusterAssignment,
    trees: &TreeTable,
    neighbor_presc: &PeriodDrugs,
    n_periods: usize,
) -> Result<Recommendation> {
    if assignment.labels.len() != train_codes.len() {
        return Err(Error::InvalidArgument(format!(
            "assignment covers {} patients, code matrix has {}",
            assignment.labels.len(),
            train_codes.len()
        )));
    }
    let row = nearest_neighbor(query, train_codes)?;
    let neighbor_id = train_codes.patient_ids()[row].clone();
    let cluster = assignment.labels[row];
    let empty = vec![BTreeSet::new(); n_periods];
    let presc = neighbor_presc.get(&neighbor_id).unwrap_or(&empty);
    if presc.len() != n_periods {
        return Err(Error::InvalidArgument(format!(
            "neighbour `{neighbor_id}` has {} periods, expected {n_periods}",
            presc.len()
        )));
    }
    let mut per_period = Vec::with_capacity(n_periods);
    let mut missing_trees = Vec::new();
    for (period, drugs) in presc.iter().enumerate() {
        let set = match trees.get(&(cluster, period)) {
            None => {
                missing_trees.push(period);
                BTreeSet::new()
            }
            Some(None) => BTreeSet::new(),
            Some(Some(t)) => best_path(t, drugs).into_iter().collect(),
        };
        per_period.push(set);
    }
    Ok(Recommendation {
        patient_id: patient_id.to_string(),
        neighbor_id,
        cluster,
        per_period,
        missing_trees,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStatus {
    Correct,
    ApproximatelyCorrect,
    Incorrect,
    Empty,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub patient_id: String,
    pub period: usize,
    pub recommended: BTreeSet<String>,
    pub actual: BTreeSet<String>,
    pub status: MatchStatus,
    /// |recommended ∩ actual| / |recommended|, 0 when nothing was recommended.
    pub precision: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub m_cor: f64,
    pub m_app: f64,
    /// Mean precision over correct and approximately correct terms only.
    pub m_app_matched: Option<f64>,
    pub counts: BTreeMap<MatchStatus, usize>,
    pub rows: Vec<EvalRow>,
}

pub fn classify(recommended: &BTreeSet<String>, actual: &BTreeSet<String>) -> MatchStatus {
    if recommended.is_empty() {
        MatchStatus::Empty
    } else if recommended.is_subset(actual) {
        MatchStatus::Correct
    } else if !recommended.is_disjoint(actual) {
        MatchStatus::ApproximatelyCorrect
    } else {
        MatchStatus::Incorrect
    }
}

/// Scores recommendations against the drugs actually prescribed.
pub fn evaluate(recs: &[Recommendation], actual: &PeriodDrugs) -> Result<EvalReport> {
    if recs.is_empty() {
        return Err(Error::InvalidArgument("no recommendations to evaluate".into()));
    }
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    let n_periods = recs[0].per_period.len();
    for r in recs {
        if !seen.insert(r.patient_id.as_str()) {
            return Err(Error::InvalidArgument(format!("patient `{}` recommended twice", r.patient_id)));
        }
        let truth = actual
            .get(&r.patient_id)
            .ok_or_else(|| Error::InvalidArgument(format!("no prescriptions for `{}`", r.patient_id)))?;
        if r.per_period.len() != n_periods || truth.len() != n_periods {
            return Err(Error::InvalidArgument(format!(
                "patient `{}` has {} recommended and {} actual periods, expected {n_periods}",
                r.patient_id,
                r.per_period.len(),
                truth.len()
            )));
        }
        for (period, (rec, act)) in r.per_period.iter().zip(truth).enumerate() {
            let hits = rec.intersection(act).count();
            rows.push(EvalRow {
                patient_id: r.patient_id.clone(),
                period,
                recommended: rec.clone(),
                actual: act.clone(),
                status: classify(rec, act),
                precision: if rec.is_empty() { 0.0 } else { hits as f64 / rec.len() as f64 },
            });
        }
    }
    let total = rows.len() as f64;
    let mut counts = BTreeMap::new();
    for s in [
        MatchStatus::Correct,
        MatchStatus::ApproximatelyCorrect,
        MatchStatus::Incorrect,
        MatchStatus::Empty,
    ] {
        counts.insert(s, rows.iter().filter(|r| r.status == s).count());
    }
    let m_cor = counts[&MatchStatus::Correct] as f64 / total;
    let m_app = rows.iter().map(|r| r.precision).sum::<f64>() / total;
    let matched: Vec<f64> = rows
        .iter()
        .filter(|r| matches!(r.status, MatchStatus::Correct | MatchStatus::ApproximatelyCorrect))
        .map(|r| r.precision)
        .collect();
    let m_app_matched = (!matched.is_empty()).then(|| matched.iter().sum::<f64>() / matched.len() as f64);
    Ok(EvalReport {
        m_cor,
        m_app,
        m_app_matched,
        counts,
        rows,
    })
}

fn join(s: &BTreeSet<String>) -> String {
    if s.is_empty() {
        "-".into()
    } else {
        s.iter().cloned().collect::<Vec<_>>().join(", ")
    }
}

/// Plain-text report for a terminal.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let w = report.rows.iter().map(|r| r.patient_id.len()).max().unwrap_or(7).max(7);
    let _ = writeln!(out, "{:<w$}  period  status                 precision  recommended | actual", "patient");
    for r in &report.rows {
        let status = match r.status {
            MatchStatus::Correct => "correct",
            MatchStatus::ApproximatelyCorrect => "approximately correct",
            MatchStatus::Incorrect => "incorrect",
            MatchStatus::Empty => "empty",
        };
        let _ = writeln!(
            out,
            "{:<w$}  {:>6}  {:<21}  {:>9.3}  {} | {}",
            r.patient_id,
            r.period + 1,
            status,
            r.precision,
            join(&r.recommended),
            join(&r.actual)
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "m_cor = {:.3}", report.m_cor);
    let _ = writeln!(out, "m_app = {:.3}", report.m_app);
    if let Some(m) = report.m_app_matched {
        let _ = writeln!(out, "m_app over correct and approximately correct = {m:.3}");
    }
    out
}

pub fn recommendations_to_json(recs: &[Recommendation]) -> String {
    serde_json::to_string_pretty(recs).expect("recommendations serialise")
}

pub fn recommendations_from_json(text: &str) -> Result<Vec<Recommendation>> {
    serde_json::from_str(text).map_err(|e| Error::json("recommendations", e))
}

//! Regimen trees: for one (cluster, period) cell, the most frequently
//! prescribed drug, the drugs co-prescribed with it, and recursively the
//! regimens of the patients who did not receive it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cluster::escape;
use crate::drugkb::{DrugClass, DrugKnowledgeBase};
use crate::{Error, Result};

/// Drug sets per patient within one (cluster, period) scope.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodPrescriptions {
    pub rows: BTreeMap<String, BTreeSet<String>>,
}

impl PeriodPrescriptions {
    /// Adds a patient row; empty sets are not stored.
    pub fn insert(&mut self, patient_id: impl Into<String>, drugs: BTreeSet<String>) {
        if !drugs.is_empty() {
            self.rows.insert(patient_id.into(), drugs);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }
}

impl<P: Into<String>, I: IntoIterator<Item = S>, S: Into<String>> FromIterator<(P, I)> for PeriodPrescriptions {
    fn from_iter<T: IntoIterator<Item = (P, I)>>(iter: T) -> Self {
        let mut out = PeriodPrescriptions::default();
        for (p, drugs) in iter {
            out.insert(p, drugs.into_iter().map(Into::into).collect());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimenNode {
    pub drug: String,
    #[serde(rename = "class")]
    pub drug_class: DrugClass,
    #[serde(rename = "count")]
    pub n_patients: usize,
    #[serde(rename = "cotreat", default, skip_serializing_if = "Option::is_none")]
    pub cotreat_child: Option<Box<RegimenNode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sibling: Option<Box<RegimenNode>>,
}

impl RegimenNode {
    pub fn leaf(drug: &str, drug_class: DrugClass, n_patients: usize) -> Self {
        RegimenNode {
            drug: drug.to_string(),
            drug_class,
            n_patients,
            cotreat_child: None,
            sibling: None,
        }
    }

    /// This node followed by its sibling chain.
    pub fn siblings(&self) -> impl Iterator<Item = &RegimenNode> {
        std::iter::successors(Some(self), |n| n.sibling.as_deref())
    }

    pub fn node_count(&self) -> usize {
        self.siblings()
            .map(|n| 1 + n.cotreat_child.as_ref().map_or(0, |c| c.node_count()))
            .sum()
    }

    /// Longest cotreatment chain, counting this level as 1.
    pub fn depth(&self) -> usize {
        self.siblings()
            .map(|n| 1 + n.cotreat_child.as_ref().map_or(0, |c| c.depth()))
            .max()
            .unwrap_or(0)
    }

    fn check(&self, ancestors: &mut Vec<String>) -> Result<()> {
        for n in self.siblings() {
            if n.n_patients == 0 {
                return Err(Error::Schema(format!("node `{}` has no patients", n.drug)));
            }
            if ancestors.contains(&n.drug) {
                return Err(Error::Schema(format!("drug `{}` repeats along a cotreatment chain", n.drug)));
            }
            if let Some(c) = &n.cotreat_child {
                ancestors.push(n.drug.clone());
                c.check(ancestors)?;
                ancestors.pop();
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub threshold: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 4,
            threshold: 10,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::InvalidArgument("tree max_depth must be positive".into()));
        }
        if self.threshold == 0 {
            return Err(Error::InvalidArgument("tree threshold must be positive".into()));
        }
        Ok(())
    }
}

type Rows<'a> = Vec<BTreeSet<&'a str>>;

/// Builds the regimen tree of one cell. Returns `None` when no drug reaches
/// the threshold.
pub fn build_tree(p: &PeriodPrescriptions, cfg: &TreeConfig, kb: &DrugKnowledgeBase) -> Option<RegimenNode> {
    let rows: Rows = p
        .rows
        .values()
        .filter(|s| !s.is_empty())
        .map(|s| s.iter().map(String::as_str).collect())
        .collect();
    grow(rows, 0, cfg, kb)
}

fn most_frequent<'a>(rows: &Rows<'a>) -> (&'a str, usize) {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for row in rows {
        for &d in row {
            *counts.entry(d).or_default() += 1;
        }
    }
    // BTreeMap iterates names ascending, so the first maximum is the smallest name
    let mut best = ("", 0);
    for (d, c) in counts {
        if c > best.1 {
            best = (d, c);
        }
    }
    best
}

fn grow<'a>(mut rows: Rows<'a>, depth: usize, cfg: &TreeConfig, kb: &DrugKnowledgeBase) -> Option<RegimenNode> {
    loop {
        if rows.is_empty() || depth >= cfg.max_depth {
            return None;
        }
        let (d, n) = most_frequent(&rows);
        let (mut treated, untreated): (Rows, Rows) = rows.into_iter().partition(|r| r.contains(d));
        if n < cfg.threshold {
            rows = untreated;
            continue;
        }
        for r in &mut treated {
            r.remove(d);
        }
        treated.retain(|r| !r.is_empty());
        return Some(RegimenNode {
            drug: d.to_string(),
            drug_class: kb.class_of(d),
            n_patients: n,
            cotreat_child: grow(treated, depth + 1, cfg, kb).map(Box::new),
            sibling: grow(untreated, depth, cfg, kb).map(Box::new),
        });
    }
}

/// Every maximal cotreatment chain: pick any node of the top sibling chain,
/// then any node of its child's sibling chain, and so on until a node has no
/// cotreatment child.
pub fn paths(t: &RegimenNode) -> Vec<Vec<(String, usize)>> {
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    collect_paths(t, &mut prefix, &mut out);
    out
}

fn collect_paths(level: &RegimenNode, prefix: &mut Vec<(String, usize)>, out: &mut Vec<Vec<(String, usize)>>) {
    for n in level.siblings() {
        prefix.push((n.drug.clone(), n.n_patients));
        match &n.cotreat_child {
            Some(c) => collect_paths(c, prefix, out),
            None => out.push(prefix.clone()),
        }
        prefix.pop();
    }
}

/// Display label: `m ` prefix for main drugs, patient count in parentheses.
pub fn node_label(n: &RegimenNode) -> String {
    let prefix = if n.drug_class == DrugClass::Main { "m " } else { "" };
    format!("{prefix}{} ({})", n.drug, n.n_patients)
}

/// DOT text with solid cotreatment edges and dashed sibling edges.
pub fn emit_dot(t: Option<&RegimenNode>) -> String {
    let mut out = String::from("digraph regimen {\n");
    if let Some(root) = t {
        let mut next = 0;
        dot_node(root, &mut next, &mut out);
    }
    out.push_str("}\n");
    out
}

fn dot_node(n: &RegimenNode, next: &mut usize, out: &mut String) -> usize {
    let id = *next;
    *next += 1;
    let _ = writeln!(out, "  n{id} [label=\"{}\"];", escape(&node_label(n)));
    if let Some(c) = &n.cotreat_child {
        let cid = dot_node(c, next, out);
        let _ = writeln!(out, "  n{id} -> n{cid};");
    }
    if let Some(s) = &n.sibling {
        let sid = dot_node(s, next, out);
        let _ = writeln!(out, "  n{id} -> n{sid} [style=dashed];");
    }
    id
}

pub fn tree_to_json(t: Option<&RegimenNode>) -> String {
    serde_json::to_string_pretty(&t).expect("tree serialises")
}

/// Parses a tree written by [`tree_to_json`]; `null` is the empty tree.
pub fn tree_from_json(text: &str) -> Result<Option<RegimenNode>> {
    let t: Option<RegimenNode> = serde_json::from_str(text).map_err(|e| Error::json("regimen tree", e))?;
    if let Some(root) = &t {
        root.check(&mut Vec::new())?;
    }
    Ok(t)
}

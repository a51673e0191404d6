//! Complete-linkage agglomerative clustering of binary codes under the
//! Hamming distance, dendrogram cutting and nearest-neighbour lookup.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fixed-length bit vector packed into 64-bit words.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitCode {
    words: Vec<u64>,
    len: usize,
}

impl BitCode {
    pub fn from_bools(bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        BitCode { words, len: bits.len() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    /// `'0'`/`'1'` string, bit 0 first.
    pub fn to_bit_string(&self) -> String {
        (0..self.len).map(|i| if self.get(i) { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Schema(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bools(&bits))
    }

    /// Number of differing positions; equal lengths required.
    pub fn hamming(&self, other: &BitCode) -> Result<u32> {
        if self.len != other.len {
            return Err(Error::Schema(format!(
                "cannot compare codes of length {} and {}",
                self.len, other.len
            )));
        }
        Ok(self.hamming_unchecked(other))
    }

    fn hamming_unchecked(&self, other: &BitCode) -> u32 {
        self.words.iter().zip(&other.words).map(|(a, b)| (a ^ b).count_ones()).sum()
    }
}

/// Hamming distance between two bit vectors.
pub fn hamming(u: &[bool], v: &[bool]) -> Result<u32> {
    if u.len() != v.len() {
        return Err(Error::Schema(format!("cannot compare vectors of length {} and {}", u.len(), v.len())));
    }
    Ok(u.iter().zip(v).filter(|(a, b)| a != b).count() as u32)
}

/// Patient ids with one code each, all of the same length.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeMatrix {
    patient_ids: Vec<String>,
    codes: Vec<BitCode>,
    width: usize,
}

impl CodeMatrix {
    pub fn new(patient_ids: Vec<String>, codes: Vec<BitCode>) -> Result<Self> {
        if patient_ids.len() != codes.len() {
            return Err(Error::Schema(format!(
                "{} ids for {} codes",
                patient_ids.len(),
                codes.len()
            )));
        }
        let width = codes.first().map_or(0, BitCode::len);
        if let Some(c) = codes.iter().find(|c| c.len() != width) {
            return Err(Error::Schema(format!("code of length {} in a matrix of width {width}", c.len())));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = patient_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::Schema(format!("duplicate patient id `{dup}`")));
        }
        Ok(CodeMatrix {
            patient_ids,
            codes,
            width,
        })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn patient_ids(&self) -> &[String] {
        &self.patient_ids
    }

    pub fn codes(&self) -> &[BitCode] {
        &self.codes
    }

    pub fn row_of(&self, patient_id: &str) -> Option<usize> {
        self.patient_ids.iter().position(|p| p == patient_id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub node: usize,
}

/// Merge history: leaves are `0..n`, merge `i` creates node `n + i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
}

/// Complete-linkage agglomeration. At each step the closest pair of active
/// clusters merges; ties go to the lexicographically smallest `(left, right)`
/// pair of node ids, with `left < right`.
///
/// Each active cluster caches its nearest partner among clusters with larger
/// node ids; only caches pointing at a merged cluster are rebuilt after a
/// merge. Complete-linkage distances never shrink, so the remaining caches
/// stay exact.
pub fn agglomerate(m: &CodeMatrix) -> Result<Dendrogram> {
    let n = m.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 rows to cluster, got {n}")));
    }
    let mut dist = vec![0u32; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = m.codes[i].hamming_unchecked(&m.codes[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    // slot s currently holds node id[s]
    let mut id: Vec<usize> = (0..n).collect();
    let mut active = vec![true; n];
    let mut nearest: Vec<Option<(u32, usize)>> = vec![None; n];

    let best_partner = |s: usize, id: &[usize], active: &[bool], dist: &[u32]| -> Option<(u32, usize)> {
        (0..n)
            .filter(|&t| active[t] && id[t] > id[s])
            .map(|t| (dist[s * n + t], t))
            .min_by_key(|&(d, t)| (d, id[t]))
    };
    for s in 0..n {
        nearest[s] = best_partner(s, &id, &active, &dist);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let (a, b, d) = (0..n)
            .filter(|&s| active[s])
            .filter_map(|s| nearest[s].map(|(d, t)| (s, t, d)))
            .min_by_key(|&(s, t, d)| (d, id[s], id[t]))
            .expect("at least two active clusters");
        let node = n + step;
        merges.push(Merge {
            left: id[a],
            right: id[b],
            height: f64::from(d),
            node,
        });

        // new cluster lives in slot a
        active[b] = false;
        for t in 0..n {
            if active[t] && t != a {
                let dd = dist[a * n + t].max(dist[b * n + t]);
                dist[a * n + t] = dd;
                dist[t * n + a] = dd;
            }
        }
        id[a] = node;
        nearest[a] = None;
        nearest[b] = None;
        for s in 0..n {
            if !active[s] || s == a {
                continue;
            }
            match nearest[s] {
                Some((_, t)) if t == a || t == b => nearest[s] = best_partner(s, &id, &active, &dist),
                Some((d0, t)) => {
                    // the new node has the largest id, so it only wins on strictly smaller distance
                    let dn = dist[s * n + a];
                    if (dn, node) < (d0, id[t]) {
                        nearest[s] = Some((dn, a));
                    }
                }
                None => nearest[s] = Some((dist[s * n + a], a)),
            }
        }
    }
    Ok(Dendrogram { n_leaves: n, merges })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub k: usize,
    pub labels: Vec<usize>,
}

impl ClusterAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Cuts the dendrogram into `k` clusters by undoing its last `k - 1` merges.
/// Labels are numbered by the smallest leaf index each cluster contains.
pub fn cut(d: &Dendrogram, k: usize) -> Result<ClusterAssignment> {
    let n = d.n_leaves;
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cluster count {k} outside 1..={n}")));
    }
    if d.merges.len() + 1 != n {
        return Err(Error::Schema(format!(
            "dendrogram over {n} leaves must have {} merges, has {}",
            n - 1,
            d.merges.len()
        )));
    }
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    for m in &d.merges[..n - k] {
        parent[m.left] = m.node;
        parent[m.right] = m.node;
    }
    let mut label_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let labels = (0..n)
        .map(|leaf| {
            let root = find(&mut parent, leaf);
            let next = label_of_root.len();
            *label_of_root.entry(root).or_insert(next)
        })
        .collect();
    Ok(ClusterAssignment { k, labels })
}

/// Row with the smallest Hamming distance to `query`; ties to the lowest row.
pub fn nearest_neighbor(query: &BitCode, m: &CodeMatrix) -> Result<usize> {
    if m.is_empty() {
        return Err(Error::InvalidArgument("nearest neighbour in an empty matrix".into()));
    }
    if query.len() != m.width {
        return Err(Error::Schema(format!(
            "query has {} bits, matrix rows have {}",
            query.len(),
            m.width
        )));
    }
    Ok(m.codes
        .iter()
        .enumerate()
        .min_by_key(|(i, c)| (query.hamming_unchecked(c), *i))
        .map(|(i, _)| i)
        .expect("nonempty"))
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("labelings differ in length".into()));
    }
    let n = a.len() as f64;
    let comb2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut table: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let index: f64 = table.values().map(|&c| comb2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| comb2(c)).sum();
    let expected = sum_a * sum_b / comb2(n);
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

pub const CODES_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodesDocument {
    format_version: u32,
    hidden_units: usize,
    codes: Vec<CodeRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodeRow {
    patient_id: String,
    bits: String,
}

impl CodeMatrix {
    pub fn to_json(&self) -> String {
        let doc = CodesDocument {
            format_version: CODES_FORMAT_VERSION,
            hidden_units: self.width,
            codes: self
                .patient_ids
                .iter()
                .zip(&self.codes)
                .map(|(p, c)| CodeRow {
                    patient_id: p.clone(),
                    bits: c.to_bit_string(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("codes serialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CodesDocument = serde_json::from_str(text).map_err(|e| Error::json("codes", e))?;
        if doc.format_version != CODES_FORMAT_VERSION {
            return Err(Error::Schema(format!("unsupported codes version {}", doc.format_version)));
        }
        let mut ids = Vec::with_capacity(doc.codes.len());
        let mut codes = Vec::with_capacity(doc.codes.len());
        for row in doc.codes {
            let code = BitCode::from_bit_string(&row.bits)?;
            if code.len() != doc.hidden_units {
                return Err(Error::Schema(format!(
                    "code of `{}` has {} bits, expected {}",
                    row.patient_id,
                    code.len(),
                    doc.hidden_units
                )));
            }
            ids.push(row.patient_id);
            codes.push(code);
        }
        let mut m = CodeMatrix::new(ids, codes)?;
        m.width = doc.hidden_units;
        Ok(m)
    }
}

impl Dendrogram {
    /// `step,left,right,height,node` rows.
    pub fn merges_csv(&self) -> String {
        let mut out = String::from("step,left,right,height,node\n");
        for (i, m) in self.merges.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{}", i + 1, m.left, m.right, m.height, m.node);
        }
        out
    }

    /// DOT rendering: leaves labelled with patient ids, internal nodes with merge heights.
    pub fn to_dot(&self, patient_ids: &[String]) -> String {
        let mut out = String::from("digraph dendrogram {\n");
        for (i, pid) in patient_ids.iter().enumerate().take(self.n_leaves) {
            let _ = writeln!(out, "  n{i} [label=\"{}\", shape=plaintext];", escape(pid));
        }
        for m in &self.merges {
            let _ = writeln!(out, "  n{} [label=\"h={}\", shape=point, xlabel=\"{}\"];", m.node, m.height, m.height);
            let _ = writeln!(out, "  n{} -> n{};", m.node, m.left);
            let _ = writeln!(out, "  n{} -> n{};", m.node, m.right);
        }
        out.push_str("}\n");
        out
    }
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// `patient_id,cluster` rows.
pub fn assignment_csv(patient_ids: &[String], a: &ClusterAssignment) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["patient_id", "cluster"]).expect("in-memory write");
    for (p, l) in patient_ids.iter().zip(&a.labels) {
        w.write_record([p.as_str(), &l.to_string()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Parses `patient_id,cluster` rows back into ids and an assignment.
pub fn parse_assignment_csv(text: &str) -> Result<(Vec<String>, ClusterAssignment)> {
    const SRC: &str = "cluster assignment";
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::parse(SRC, Some(1), e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["patient_id", "cluster"] {
        return Err(Error::parse(SRC, Some(1), "expected header `patient_id,cluster`"));
    }
    let (mut ids, mut labels) = (Vec::new(), Vec::new());
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::parse(SRC, e.position().map(|p| p.line()), e.to_string()))?;
        let line = row.position().map(|p| p.line());
        if row.len() != 2 {
            return Err(Error::parse(SRC, line, "expected 2 fields"));
        }
        if !seen.insert(row[0].to_string()) {
            return Err(Error::parse(SRC, line, format!("duplicate patient `{}`", &row[0])));
        }
        let label: usize = row[1]
            .parse()
            .map_err(|_| Error::parse(SRC, line, format!("bad cluster index `{}`", &row[1])))?;
        ids.push(row[0].to_string());
        labels.push(label);
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let a = ClusterAssignment { k, labels };
    if a.sizes().contains(&0) {
        return Err(Error::parse(SRC, None, "cluster indices must be contiguous from 0"));
    }
    Ok((ids, a))
}

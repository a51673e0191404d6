//! File-backed pipeline: one run configuration, one output directory, one
//! function per stage. Each stage reads what earlier stages wrote.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::cluster::{agglomerate, assignment_csv, cut, parse_assignment_csv, BitCode, CodeMatrix};
use crate::cohort::{build_schema, encode_patient, load_cohort, split_cohort, EncodedMatrix, FeatureStats};
use crate::drugkb::{classify_drugs, load_kb, DiseaseSpec, DrugKnowledgeBase};
use crate::mvrbm::{train_cd, MvRbmParams, TrainConfig};
use crate::periods::{
    curves_to_csv, drugs_by_period, load_prescriptions, parse_curves_csv, score_prescriptions, split_periods,
    PeriodSplit, PrescriptionHistory, ScoreCurve, ScoreWeights,
};
use crate::recommend::{evaluate, recommend, recommendations_from_json, recommendations_to_json, render_table, PeriodDrugs, TreeTable};
use crate::regimen::{build_tree, emit_dot, PeriodPrescriptions, RegimenNode, TreeConfig};
use crate::synthgen::{generate, SynthSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Synth,
    Train,
    Encode,
    Cluster,
    Score,
    Split,
    Trees,
    Recommend,
    Evaluate,
}

impl Stage {
    /// Stages chained by `run-all`, in order.
    pub const RUN_ALL: [Stage; 8] = [
        Stage::Train,
        Stage::Encode,
        Stage::Cluster,
        Stage::Score,
        Stage::Split,
        Stage::Trees,
        Stage::Recommend,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Train => "train",
            Stage::Encode => "encode",
            Stage::Cluster => "cluster",
            Stage::Score => "score",
            Stage::Split => "split",
            Stage::Trees => "trees",
            Stage::Recommend => "recommend",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A failure tagged with the stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("[{stage}] {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

fn default_clusters() -> usize {
    6
}
fn default_periods() -> usize {
    3
}
fn default_test_count() -> usize {
    20
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_disease() -> DiseaseSpec {
    DiseaseSpec {
        disease_name: crate::synthgen::DISEASE_NAME.into(),
        symptoms: crate::synthgen::SYMPTOMS.iter().map(|s| s.to_string()).collect(),
    }
}

/// Run configuration. Every field except `seed` has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub cohort: PathBuf,
    /// Optional `patient_id,concept` symptom sidecar for CSV cohorts.
    #[serde(default)]
    pub symptoms: Option<PathBuf>,
    /// Phrases matched against note text and added as symptoms.
    #[serde(default)]
    pub lexicon: Vec<String>,
    #[serde(default)]
    pub prescriptions: PathBuf,
    #[serde(default)]
    pub drug_kb: PathBuf,
    #[serde(default = "default_disease")]
    pub disease: DiseaseSpec,
    /// `train.seed` is ignored; training uses `seed`.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_clusters")]
    pub clusters: usize,
    #[serde(default = "default_periods")]
    pub periods: usize,
    #[serde(default)]
    pub weights: ScoreWeights,
    #[serde(default)]
    pub tree: TreeConfig,
    #[serde(default = "default_test_count")]
    pub test_count: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Settings for the `synth` stage; its seed is replaced by `seed`.
    #[serde(default)]
    pub synth: SynthSpec,
    pub seed: u64,
}

impl RunConfig {
    /// Defaults everywhere, with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        serde_json::from_value(serde_json::json!({ "seed": seed })).expect("defaults deserialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("run config", e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Checks values and, for stages that read them, that input files exist.
    pub fn validate(&self, stage: Stage) -> Result<()> {
        self.train.validate()?;
        self.weights.validate()?;
        self.tree.validate()?;
        self.disease.validate()?;
        if self.clusters == 0 {
            return Err(Error::InvalidArgument("clusters must be positive".into()));
        }
        if self.periods == 0 {
            return Err(Error::InvalidArgument("periods must be positive".into()));
        }
        let inputs: Vec<(&str, &Path)> = match stage {
            Stage::Synth => vec![],
            Stage::Train => {
                let mut v = vec![("cohort", self.cohort.as_path())];
                if let Some(s) = &self.symptoms {
                    v.push(("symptoms", s.as_path()));
                }
                v
            }
            Stage::Score => vec![("prescriptions", &self.prescriptions), ("drug_kb", &self.drug_kb)],
            Stage::Trees | Stage::Recommend | Stage::Evaluate => vec![("prescriptions", &self.prescriptions)],
            _ => vec![],
        };
        for (what, path) in inputs {
            if path.as_os_str().is_empty() {
                return Err(Error::InvalidArgument(format!("config field `{what}` is not set")));
            }
            if !path.is_file() {
                return Err(Error::InvalidArgument(format!("{what} file {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

pub mod artifacts {
    pub const COHORT_SPLIT: &str = "cohort_split.json";
    pub const FEATURES: &str = "features.json";
    pub const ENCODED_TRAIN: &str = "encoded_train.json";
    pub const ENCODED_TEST: &str = "encoded_test.json";
    pub const MODEL: &str = "model.json";
    pub const TRAIN_TRACE: &str = "train_trace.csv";
    pub const CODES_TRAIN: &str = "codes_train.json";
    pub const CODES_TEST: &str = "codes_test.json";
    pub const DENDROGRAM: &str = "dendrogram.dot";
    pub const MERGES: &str = "merges.csv";
    pub const CLUSTERS: &str = "clusters.csv";
    pub const DRUG_CLASSES: &str = "drug_classes.json";
    pub const SCORES: &str = "scores.csv";
    pub const PERIODS: &str = "periods.json";
    pub const TREES_DIR: &str = "trees";
    pub const TREES: &str = "trees.json";
    pub const RECOMMENDATIONS: &str = "recommendations.json";
    pub const EVAL: &str = "eval.json";
    pub const TRUTH: &str = "truth.json";
}
use artifacts as a;

fn read_artifact(cfg: &RunConfig, stage: Stage, required: Stage, name: &str) -> Result<String> {
    let path = cfg.out(name);
    if !path.is_file() {
        return Err(Error::MissingArtifact {
            stage: stage.name().into(),
            required: required.name().into(),
            path,
        });
    }
    std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
}

fn write_artifact(cfg: &RunConfig, name: &str, text: &str) -> Result<()> {
    let path = cfg.out(name);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("artifact serialises")
}

fn from_json<T: for<'de> Deserialize<'de>>(name: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::json(name, e))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortSplit {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Per-patient period boundaries as written by the `split` stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodTable {
    pub n_periods: usize,
    pub patients: BTreeMap<String, Vec<NaiveDate>>,
}

impl PeriodTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let t: PeriodTable = from_json(a::PERIODS, text)?;
        if t.n_periods == 0 {
            return Err(Error::Schema("n_periods must be positive".into()));
        }
        for (pid, b) in &t.patients {
            if b.len() >= t.n_periods || b.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Schema(format!(
                    "patient `{pid}` needs at most {} strictly increasing boundaries",
                    t.n_periods - 1
                )));
            }
        }
        Ok(t)
    }

    pub fn split_of(&self, patient_id: &str) -> Option<PeriodSplit> {
        self.patients.get(patient_id).map(|b| PeriodSplit {
            n_periods: self.n_periods,
            boundaries: b.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeCell {
    pub cluster: usize,
    pub period: usize,
    pub tree: Option<RegimenNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeIndex {
    pub n_clusters: usize,
    pub n_periods: usize,
    pub cells: Vec<TreeCell>,
}

impl TreeIndex {
    pub fn from_json(text: &str) -> Result<Self> {
        let idx: TreeIndex = from_json(a::TREES, text)?;
        for c in &idx.cells {
            if c.cluster >= idx.n_clusters || c.period >= idx.n_periods {
                return Err(Error::Schema(format!("tree cell ({}, {}) out of range", c.cluster, c.period)));
            }
            crate::regimen::tree_from_json(&serde_json::to_string(&c.tree).expect("tree serialises"))?;
        }
        Ok(idx)
    }

    pub fn table(&self) -> TreeTable {
        self.cells.iter().map(|c| ((c.cluster, c.period), c.tree.clone())).collect()
    }
}

fn load_inputs_prescriptions(cfg: &RunConfig) -> Result<BTreeMap<String, PrescriptionHistory>> {
    Ok(load_prescriptions(&cfg.prescriptions)?
        .into_iter()
        .map(|h| (h.patient_id.clone(), h))
        .collect())
}

/// Per patient drug sets by period; patients without a split get empty sets.
fn period_drugs(
    ids: &[String],
    histories: &BTreeMap<String, PrescriptionHistory>,
    table: &PeriodTable,
) -> PeriodDrugs {
    ids.iter()
        .map(|pid| {
            let sets = match (histories.get(pid), table.split_of(pid)) {
                (Some(h), Some(split)) => drugs_by_period(h, &split),
                _ => vec![BTreeSet::new(); table.n_periods],
            };
            (pid.clone(), sets)
        })
        .collect()
}

/// Writes synthetic inputs to the configured input paths and the planted
/// truth to the output directory.
pub fn run_synth(cfg: &RunConfig) -> Result<String> {
    let spec = SynthSpec {
        seed: cfg.seed,
        n_periods: cfg.periods,
        ..cfg.synth.clone()
    };
    let c = generate(&spec)?;
    for p in [&cfg.cohort, &cfg.prescriptions, &cfg.drug_kb] {
        if p.as_os_str().is_empty() {
            return Err(Error::InvalidArgument("synth needs cohort, prescriptions and drug_kb paths".into()));
        }
    }
    let write = |path: &Path, text: String| -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    };
    write(&cfg.cohort, crate::cohort::cohort_to_json(&c.records))?;
    write(&cfg.prescriptions, crate::periods::prescriptions_to_csv(&c.histories))?;
    write(&cfg.drug_kb, crate::drugkb::kb_to_tsv(&c.kb))?;
    write_artifact(cfg, a::TRUTH, &c.truth.to_json())?;
    Ok(format!("generated {} patients in {} groups", spec.n_patients, spec.n_groups))
}

pub fn run_train(cfg: &RunConfig) -> Result<String> {
    let mut records = load_cohort(&cfg.cohort, cfg.symptoms.as_deref())?;
    if !cfg.lexicon.is_empty() {
        for r in &mut records {
            r.add_note_symptoms(&cfg.lexicon);
        }
    }
    let (train, test) = split_cohort(&records, cfg.test_count, cfg.seed)?;
    let (schema, stats) = build_schema(&train)?;
    let encode = |rs: &[crate::cohort::RawPatientRecord]| EncodedMatrix {
        schema: schema.clone(),
        patients: rs.iter().map(|r| encode_patient(r, &stats)).collect(),
    };
    let enc_train = encode(&train);
    let enc_test = encode(&test);
    let split = CohortSplit {
        train: train.iter().map(|r| r.patient_id.clone()).collect(),
        test: test.iter().map(|r| r.patient_id.clone()).collect(),
    };
    let tcfg = TrainConfig {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    let data: Vec<_> = enc_train.patients.iter().map(|p| p.state.clone()).collect();
    log::info!("[train] {} visible units, {} training patients", schema.len(), data.len());
    let outcome = train_cd(&schema, &data, &tcfg)?;
    let mut trace = String::from("epoch,reconstruction_error\n");
    for (i, e) in outcome.trace.iter().enumerate() {
        trace.push_str(&format!("{},{e}\n", i + 1));
    }
    write_artifact(cfg, a::COHORT_SPLIT, &to_json(&split))?;
    write_artifact(cfg, a::FEATURES, &to_json(&stats))?;
    write_artifact(cfg, a::ENCODED_TRAIN, &enc_train.to_json())?;
    write_artifact(cfg, a::ENCODED_TEST, &enc_test.to_json())?;
    write_artifact(cfg, a::MODEL, &outcome.params.to_json())?;
    write_artifact(cfg, a::TRAIN_TRACE, &trace)?;
    let last = outcome.trace.last().copied().unwrap_or(f64::NAN);
    Ok(format!(
        "trained {} epochs on {} patients; final reconstruction error {last:.4}",
        outcome.trace.len(),
        data.len()
    ))
}

fn codes_of(params: &MvRbmParams, m: &EncodedMatrix) -> Result<CodeMatrix> {
    let codes = m
        .patients
        .iter()
        .map(|p| Ok(BitCode::from_bools(&params.encode(&p.state)?.states)))
        .collect::<Result<Vec<_>>>()?;
    CodeMatrix::new(m.patients.iter().map(|p| p.patient_id.clone()).collect(), codes)
}

pub fn run_encode(cfg: &RunConfig) -> Result<String> {
    let s = Stage::Encode;
    let params = MvRbmParams::from_json(&read_artifact(cfg, s, Stage::Train, a::MODEL)?)?;
    let train = EncodedMatrix::from_json(&read_artifact(cfg, s, Stage::Train, a::ENCODED_TRAIN)?)?;
    let test = EncodedMatrix::from_json(&read_artifact(cfg, s, Stage::Train, a::ENCODED_TEST)?)?;
    if train.schema != *params.schema() {
        return Err(Error::Schema("encoded cohort does not match the model schema".into()));
    }
    let ct = codes_of(&params, &train)?;
    let cs = codes_of(&params, &test)?;
    write_artifact(cfg, a::CODES_TRAIN, &ct.to_json())?;
    write_artifact(cfg, a::CODES_TEST, &cs.to_json())?;
    Ok(format!("encoded {} training and {} test patients", ct.len(), cs.len()))
}

pub fn run_cluster(cfg: &RunConfig) -> Result<String> {
    let m = CodeMatrix::from_json(&read_artifact(cfg, Stage::Cluster, Stage::Encode, a::CODES_TRAIN)?)?;
    let d = agglomerate(&m)?;
    let assignment = cut(&d, cfg.clusters)?;
    write_artifact(cfg, a::DENDROGRAM, &d.to_dot(m.patient_ids()))?;
    write_artifact(cfg, a::MERGES, &d.merges_csv())?;
    write_artifact(cfg, a::CLUSTERS, &assignment_csv(m.patient_ids(), &assignment))?;
    Ok(format!("cluster sizes {:?}", assignment.sizes()))
}

pub fn run_score(cfg: &RunConfig) -> Result<String> {
    let kb = classify_drugs(&load_kb(&cfg.drug_kb)?, &cfg.disease);
    let histories = load_prescriptions(&cfg.prescriptions)?;
    let curves: Vec<(String, ScoreCurve)> = histories
        .iter()
        .map(|h| (h.patient_id.clone(), score_prescriptions(h, &kb, &cfg.weights)))
        .collect();
    write_artifact(cfg, a::DRUG_CLASSES, &to_json(&kb))?;
    write_artifact(cfg, a::SCORES, &curves_to_csv(&curves))?;
    Ok(format!(
        "{} main and {} symptom-healing drugs; scored {} histories",
        kb.mdb.len(),
        kb.sdb.len(),
        curves.len()
    ))
}

pub fn run_split(cfg: &RunConfig) -> Result<String> {
    let curves = parse_curves_csv(&read_artifact(cfg, Stage::Split, Stage::Score, a::SCORES)?)?;
    let mut patients = BTreeMap::new();
    let mut short = 0;
    for (pid, curve) in &curves {
        let boundaries = if curve.points.len() >= cfg.periods {
            split_periods(curve, cfg.periods)?.boundaries
        } else {
            // every later date opens its own period; the trailing periods stay empty
            short += 1;
            curve.points.iter().skip(1).map(|(d, _)| *d).collect()
        };
        patients.insert(pid.clone(), boundaries);
    }
    if short > 0 {
        log::warn!("[split] {short} patients have fewer than {} prescription dates", cfg.periods);
    }
    let table = PeriodTable {
        n_periods: cfg.periods,
        patients,
    };
    write_artifact(cfg, a::PERIODS, &to_json(&table))?;
    Ok(format!("split {} histories into {} periods", curves.len(), cfg.periods))
}

pub fn run_trees(cfg: &RunConfig) -> Result<String> {
    let s = Stage::Trees;
    let (ids, assignment) = parse_assignment_csv(&read_artifact(cfg, s, Stage::Cluster, a::CLUSTERS)?)?;
    let table = PeriodTable::from_json(&read_artifact(cfg, s, Stage::Split, a::PERIODS)?)?;
    let kb: DrugKnowledgeBase = from_json(a::DRUG_CLASSES, &read_artifact(cfg, s, Stage::Score, a::DRUG_CLASSES)?)?;
    let histories = load_inputs_prescriptions(cfg)?;
    let drugs = period_drugs(&ids, &histories, &table);
    let mut cells = Vec::new();
    let mut nodes = 0;
    for cluster in 0..assignment.k {
        for period in 0..table.n_periods {
            let scope: PeriodPrescriptions = ids
                .iter()
                .zip(&assignment.labels)
                .filter(|(_, l)| **l == cluster)
                .map(|(pid, _)| (pid.clone(), drugs[pid][period].clone()))
                .collect();
            let tree = build_tree(&scope, &cfg.tree, &kb);
            nodes += tree.as_ref().map_or(0, RegimenNode::node_count);
            let stem = format!("{}/cluster{cluster}_period{period}", a::TREES_DIR);
            write_artifact(cfg, &format!("{stem}.dot"), &emit_dot(tree.as_ref()))?;
            write_artifact(cfg, &format!("{stem}.json"), &crate::regimen::tree_to_json(tree.as_ref()))?;
            cells.push(TreeCell { cluster, period, tree });
        }
    }
    let index = TreeIndex {
        n_clusters: assignment.k,
        n_periods: table.n_periods,
        cells,
    };
    write_artifact(cfg, a::TREES, &to_json(&index))?;
    Ok(format!("built {} trees with {nodes} nodes", index.cells.len()))
}

pub fn run_recommend(cfg: &RunConfig) -> Result<String> {
    let s = Stage::Recommend;
    let train = CodeMatrix::from_json(&read_artifact(cfg, s, Stage::Encode, a::CODES_TRAIN)?)?;
    let test = CodeMatrix::from_json(&read_artifact(cfg, s, Stage::Encode, a::CODES_TEST)?)?;
    let (ids, assignment) = parse_assignment_csv(&read_artifact(cfg, s, Stage::Cluster, a::CLUSTERS)?)?;
    if ids != train.patient_ids() {
        return Err(Error::Schema("cluster assignment does not match the training codes".into()));
    }
    let index = TreeIndex::from_json(&read_artifact(cfg, s, Stage::Trees, a::TREES)?)?;
    let table = PeriodTable::from_json(&read_artifact(cfg, s, Stage::Split, a::PERIODS)?)?;
    let histories = load_inputs_prescriptions(cfg)?;
    let neighbor_presc = period_drugs(&ids, &histories, &table);
    let trees = index.table();
    let recs = test
        .patient_ids()
        .iter()
        .zip(test.codes())
        .map(|(pid, code)| recommend(pid, code, &train, &assignment, &trees, &neighbor_presc, table.n_periods))
        .collect::<Result<Vec<_>>>()?;
    let flagged = recs.iter().filter(|r| !r.missing_trees.is_empty()).count();
    if flagged > 0 {
        log::warn!("[recommend] {flagged} patients hit a missing tree");
    }
    write_artifact(cfg, a::RECOMMENDATIONS, &recommendations_to_json(&recs))?;
    Ok(format!("recommended regimens for {} test patients", recs.len()))
}

/// Returns the evaluation table.
pub fn run_evaluate(cfg: &RunConfig) -> Result<String> {
    let s = Stage::Evaluate;
    let recs = recommendations_from_json(&read_artifact(cfg, s, Stage::Recommend, a::RECOMMENDATIONS)?)?;
    let table = PeriodTable::from_json(&read_artifact(cfg, s, Stage::Split, a::PERIODS)?)?;
    let histories = load_inputs_prescriptions(cfg)?;
    let ids: Vec<String> = recs.iter().map(|r| r.patient_id.clone()).collect();
    let actual = period_drugs(&ids, &histories, &table);
    let report = evaluate(&recs, &actual)?;
    write_artifact(cfg, a::EVAL, &to_json(&report))?;
    Ok(render_table(&report))
}

pub fn run_stage(stage: Stage, cfg: &RunConfig) -> Result<String, StageError> {
    let tag = |source| StageError { stage, source };
    cfg.validate(stage).map_err(tag)?;
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Error::io(&cfg.output_dir, e))
        .map_err(tag)?;
    let out = match stage {
        Stage::Synth => run_synth(cfg),
        Stage::Train => run_train(cfg),
        Stage::Encode => run_encode(cfg),
        Stage::Cluster => run_cluster(cfg),
        Stage::Score => run_score(cfg),
        Stage::Split => run_split(cfg),
        Stage::Trees => run_trees(cfg),
        Stage::Recommend => run_recommend(cfg),
        Stage::Evaluate => run_evaluate(cfg),
    }
    .map_err(tag)?;
    Ok(out)
}

/// Runs every stage from `train` to `evaluate`; returns the evaluation table.
pub fn run_all(cfg: &RunConfig) -> Result<String, StageError> {
    let mut last = String::new();
    for stage in Stage::RUN_ALL {
        last = run_stage(stage, cfg)?;
        if stage != Stage::Evaluate {
            log::info!("[{stage}] {last}");
        }
    }
    Ok(last)
}

/// Reads the evaluation report written by the `evaluate` stage.
pub fn read_eval(cfg: &RunConfig) -> Result<crate::recommend::EvalReport> {
    from_json(a::EVAL, &read_artifact(cfg, Stage::Evaluate, Stage::Evaluate, a::EVAL)?)
}

/// Feature statistics written by the `train` stage.
pub fn read_features(cfg: &RunConfig) -> Result<FeatureStats> {
    from_json(a::FEATURES, &read_artifact(cfg, Stage::Encode, Stage::Train, a::FEATURES)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth_config(dir: &Path, seed: u64) -> RunConfig {
        let mut cfg = RunConfig::with_seed(seed);
        cfg.cohort = dir.join("in/cohort.json");
        cfg.prescriptions = dir.join("in/prescriptions.csv");
        cfg.drug_kb = dir.join("in/drug_kb.tsv");
        cfg.output_dir = dir.join("out");
        cfg.synth.n_patients = 90;
        cfg.train.hidden_units = 8;
        cfg.train.epochs = 5;
        cfg.clusters = 3;
        cfg.test_count = 6;
        cfg.tree.threshold = 3;
        cfg
    }

    #[test]
    fn config_requires_seed_and_rejects_unknown_fields() {
        assert!(RunConfig::from_json("{}").is_err());
        assert!(RunConfig::from_json(r#"{"seed": 1, "bogus": 2}"#).is_err());
        let cfg = RunConfig::from_json(r#"{"seed": 1, "train": {"epochs": 3}}"#).unwrap();
        assert_eq!((cfg.train.epochs, cfg.train.hidden_units, cfg.clusters, cfg.periods), (3, 200, 6, 3));
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn stages_chain_and_report_missing_predecessors() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = synth_config(dir.path(), 3);
        match run_stage(Stage::Evaluate, &cfg) {
            Err(StageError {
                stage: Stage::Evaluate,
                source: Error::InvalidArgument(_),
            }) => {}
            other => panic!("{other:?}"),
        }
        run_stage(Stage::Synth, &cfg).unwrap();
        match run_stage(Stage::Evaluate, &cfg) {
            Err(StageError {
                source: Error::MissingArtifact { required, .. },
                ..
            }) => assert_eq!(required, "recommend"),
            other => panic!("{other:?}"),
        }
        let table = run_all(&cfg).unwrap();
        assert!(table.contains("m_cor"));
        let report = read_eval(&cfg).unwrap();
        assert_eq!(report.rows.len(), 6 * 3);
        assert!(cfg.out("trees/cluster2_period2.dot").is_file());
        assert_eq!(read_features(&cfg).unwrap().features.len(), 25);
    }
}

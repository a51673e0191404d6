//! Patient-record ingestion: raw features to typed visible states.
//!
//! Numeric features become Gaussian units standardised with training
//! statistics, flags and symptom concepts become binary units, and category
//! strings become categorical units whose vocabulary carries an extra
//! `"unknown"` entry for values never seen in training.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::mvrbm::{UnitType, UnitValue, VisibleSchema, VisibleState, VisibleUnit};
use crate::rng::seeded;
use crate::{Error, Result};

pub const UNKNOWN_CATEGORY: &str = "unknown";
pub const SYMPTOM_PREFIX: &str = "symptom:";
const MIN_SD: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Flag(bool),
    Numeric(f64),
    Category(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPatientRecord {
    pub patient_id: String,
    /// Kept as ordered pairs so that duplicate names survive parsing and can be rejected.
    #[serde(default, with = "ordered_pairs")]
    pub demographics: Vec<(String, FeatureValue)>,
    #[serde(default, with = "ordered_pairs")]
    pub labs: Vec<(String, f64)>,
    #[serde(default)]
    pub symptoms: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note_text: Option<String>,
}

impl RawPatientRecord {
    pub fn new(patient_id: impl Into<String>) -> Self {
        RawPatientRecord {
            patient_id: patient_id.into(),
            demographics: Vec::new(),
            labs: Vec::new(),
            symptoms: BTreeSet::new(),
            note_text: None,
        }
    }

    /// Every (name, value) pair, demographics first, labs as numerics.
    fn features(&self) -> impl Iterator<Item = (&str, FeatureValue)> + '_ {
        self.demographics
            .iter()
            .map(|(n, v)| (n.as_str(), v.clone()))
            .chain(self.labs.iter().map(|(n, v)| (n.as_str(), FeatureValue::Numeric(*v))))
    }

    fn feature(&self, name: &str) -> Option<FeatureValue> {
        self.features().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    /// Adds every lexicon phrase found in the note to the symptom set.
    pub fn add_note_symptoms(&mut self, lexicon: &[String]) {
        if let Some(note) = &self.note_text {
            let found = extract_symptoms(note, lexicon);
            self.symptoms.extend(found);
        }
    }
}

mod ordered_pairs {
    use super::*;

    pub fn serialize<S, T>(pairs: &[(String, T)], ser: S) -> std::result::Result<S::Ok, S::Error>
    where
        S: Serializer,
        T: Serialize,
    {
        let mut map = ser.serialize_map(Some(pairs.len()))?;
        for (k, v) in pairs {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }

    pub fn deserialize<'de, D, T>(de: D) -> std::result::Result<Vec<(String, T)>, D::Error>
    where
        D: Deserializer<'de>,
        T: Deserialize<'de>,
    {
        struct PairVisitor<T>(std::marker::PhantomData<T>);

        impl<'de, T: Deserialize<'de>> Visitor<'de> for PairVisitor<T> {
            type Value = Vec<(String, T)>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of feature names to values")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry()? {
                    out.push((k, v));
                }
                Ok(out)
            }
        }

        de.deserialize_map(PairVisitor(std::marker::PhantomData))
    }
}

/// Encoding rule and training statistics for one non-symptom feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureEncoding {
    Numeric { name: String, mean: f64, sd: f64 },
    Flag { name: String },
    Category { name: String, vocabulary: Vec<String> },
}

impl FeatureEncoding {
    pub fn name(&self) -> &str {
        match self {
            FeatureEncoding::Numeric { name, .. }
            | FeatureEncoding::Flag { name }
            | FeatureEncoding::Category { name, .. } => name,
        }
    }
}

/// Everything learned from the training records that encoding needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub features: Vec<FeatureEncoding>,
    pub symptoms: Vec<String>,
}

impl FeatureStats {
    /// Schema implied by these statistics: features in order, then one binary unit per symptom.
    pub fn schema(&self) -> Result<VisibleSchema> {
        let mut units: Vec<VisibleUnit> = self
            .features
            .iter()
            .map(|f| match f {
                FeatureEncoding::Numeric { name, .. } => VisibleUnit::new(name.clone(), UnitType::Gaussian),
                FeatureEncoding::Flag { name } => VisibleUnit::new(name.clone(), UnitType::Binary),
                FeatureEncoding::Category { name, vocabulary } => VisibleUnit::new(
                    name.clone(),
                    UnitType::Categorical {
                        cardinality: vocabulary.len(),
                    },
                ),
            })
            .collect();
        units.extend(
            self.symptoms
                .iter()
                .map(|s| VisibleUnit::new(format!("{SYMPTOM_PREFIX}{s}"), UnitType::Binary)),
        );
        VisibleSchema::new(units)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedPatient {
    pub patient_id: String,
    pub state: VisibleState,
    /// One flag per unit; set where the raw value was absent and imputed.
    pub missing_mask: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Numeric,
    Flag,
    Category,
}

fn kind_of(v: &FeatureValue) -> Kind {
    match v {
        FeatureValue::Flag(_) => Kind::Flag,
        FeatureValue::Numeric(_) => Kind::Numeric,
        FeatureValue::Category(_) => Kind::Category,
    }
}

/// Derives the visible schema and feature statistics from training records.
pub fn build_schema(records: &[RawPatientRecord]) -> Result<(VisibleSchema, FeatureStats)> {
    if records.is_empty() {
        return Err(Error::Ingestion("cannot build a schema from zero records".into()));
    }
    struct Seen<'a> {
        kind: Kind,
        first: &'a str,
        numbers: Vec<f64>,
        categories: BTreeSet<String>,
    }
    let mut seen: IndexMap<&str, Seen> = IndexMap::new();
    let mut symptoms = BTreeSet::new();
    for r in records {
        let mut names = HashSet::new();
        for (name, value) in r.features() {
            if !names.insert(name) {
                return Err(Error::Ingestion(format!(
                    "record `{}` lists feature `{name}` more than once",
                    r.patient_id
                )));
            }
            if let FeatureValue::Numeric(x) = value {
                if !x.is_finite() {
                    return Err(Error::Ingestion(format!(
                        "record `{}` has non-finite value for `{name}`",
                        r.patient_id
                    )));
                }
            }
            let kind = kind_of(&value);
            let entry = seen.entry(name).or_insert_with(|| Seen {
                kind,
                first: &r.patient_id,
                numbers: Vec::new(),
                categories: BTreeSet::new(),
            });
            if entry.kind != kind {
                return Err(Error::Ingestion(format!(
                    "feature `{name}` is {:?} in record `{}` but {kind:?} in record `{}`",
                    entry.kind, entry.first, r.patient_id
                )));
            }
            match value {
                FeatureValue::Numeric(x) => entry.numbers.push(x),
                FeatureValue::Category(c) => {
                    entry.categories.insert(c);
                }
                FeatureValue::Flag(_) => {}
            }
        }
        symptoms.extend(r.symptoms.iter().cloned());
    }

    let features = seen
        .into_iter()
        .map(|(name, s)| match s.kind {
            Kind::Numeric => {
                let n = s.numbers.len() as f64;
                let mean = s.numbers.iter().sum::<f64>() / n;
                let var = s.numbers.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                FeatureEncoding::Numeric {
                    name: name.to_string(),
                    mean,
                    sd: var.sqrt().max(MIN_SD),
                }
            }
            Kind::Flag => FeatureEncoding::Flag { name: name.to_string() },
            Kind::Category => {
                let mut vocabulary: Vec<String> = s.categories.into_iter().filter(|c| c != UNKNOWN_CATEGORY).collect();
                vocabulary.push(UNKNOWN_CATEGORY.to_string());
                if vocabulary.len() < 2 {
                    // only "unknown" was observed; keep a second slot so the unit stays categorical
                    vocabulary.insert(0, String::new());
                }
                FeatureEncoding::Category {
                    name: name.to_string(),
                    vocabulary,
                }
            }
        })
        .collect();
    let stats = FeatureStats {
        features,
        symptoms: symptoms.into_iter().collect(),
    };
    if stats.features.is_empty() && stats.symptoms.is_empty() {
        return Err(Error::Ingestion("records carry no features".into()));
    }
    let schema = stats.schema()?;
    Ok((schema, stats))
}

/// Encodes one record with training statistics. Total: absent or
/// mistyped values are imputed (0 after standardisation, `false`, or
/// `"unknown"`) and flagged in the missing mask.
pub fn encode_patient(record: &RawPatientRecord, stats: &FeatureStats) -> EncodedPatient {
    let mut values = Vec::with_capacity(stats.features.len() + stats.symptoms.len());
    let mut missing_mask = Vec::with_capacity(values.capacity());
    for f in &stats.features {
        let raw = record.feature(f.name());
        let (value, missing) = match (f, raw) {
            (FeatureEncoding::Numeric { mean, sd, .. }, Some(FeatureValue::Numeric(x))) if x.is_finite() => {
                (UnitValue::Real((x - mean) / sd), false)
            }
            (FeatureEncoding::Numeric { .. }, _) => (UnitValue::Real(0.0), true),
            (FeatureEncoding::Flag { .. }, Some(FeatureValue::Flag(b))) => (UnitValue::Binary(b), false),
            (FeatureEncoding::Flag { .. }, _) => (UnitValue::Binary(false), true),
            (FeatureEncoding::Category { vocabulary, .. }, raw) => {
                let unknown = vocabulary.len() - 1;
                match raw {
                    Some(FeatureValue::Category(c)) => {
                        (UnitValue::Category(vocabulary.iter().position(|v| *v == c).unwrap_or(unknown)), false)
                    }
                    _ => (UnitValue::Category(unknown), true),
                }
            }
        };
        values.push(value);
        missing_mask.push(missing);
    }
    for s in &stats.symptoms {
        values.push(UnitValue::Binary(record.symptoms.contains(s)));
        missing_mask.push(false);
    }
    EncodedPatient {
        patient_id: record.patient_id.clone(),
        state: VisibleState(values),
        missing_mask,
    }
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Case-insensitive whole-phrase lexicon matching over word tokens, so line
/// breaks, repeated whitespace and punctuation between words do not matter.
pub fn extract_symptoms(note_text: &str, lexicon: &[String]) -> BTreeSet<String> {
    let tokens = words(note_text);
    lexicon
        .iter()
        .filter(|phrase| {
            let needle = words(phrase);
            !needle.is_empty() && tokens.windows(needle.len()).any(|w| w == needle.as_slice())
        })
        .cloned()
        .collect()
}

/// Seeded split without replacement into (train, test); both keep input order.
pub fn split_cohort<T: Clone>(records: &[T], test_count: usize, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if test_count >= records.len() {
        return Err(Error::InvalidArgument(format!(
            "test_count {test_count} must be smaller than the cohort size {}",
            records.len()
        )));
    }
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.shuffle(&mut seeded(seed));
    let test: BTreeSet<usize> = idx[..test_count].iter().copied().collect();
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for (i, r) in records.iter().enumerate() {
        if test.contains(&i) {
            held.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok((train, held))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CohortDocument {
    records: Vec<RawPatientRecord>,
}

fn check_ids(records: &[RawPatientRecord]) -> Result<()> {
    let mut ids = HashSet::new();
    for r in records {
        if r.patient_id.trim().is_empty() {
            return Err(Error::Ingestion("empty patient_id".into()));
        }
        if !ids.insert(r.patient_id.as_str()) {
            return Err(Error::Ingestion(format!("duplicate patient_id `{}`", r.patient_id)));
        }
    }
    Ok(())
}

/// Parses a cohort document `{"records": [...]}`.
pub fn parse_cohort_json(text: &str) -> Result<Vec<RawPatientRecord>> {
    let doc: CohortDocument = serde_json::from_str(text).map_err(|e| Error::json("cohort", e))?;
    check_ids(&doc.records)?;
    Ok(doc.records)
}

pub fn cohort_to_json(records: &[RawPatientRecord]) -> String {
    let doc = CohortDocument {
        records: records.to_vec(),
    };
    serde_json::to_string_pretty(&doc).expect("cohort serialises")
}

/// Prefix marking a flat-CSV column as a laboratory value.
pub const LAB_COLUMN_PREFIX: &str = "lab:";

/// Parses the flat CSV variant: a `patient_id` column followed by one column
/// per feature (`lab:`-prefixed columns are laboratory values), plus an
/// optional header-less sidecar of `patient_id,concept` symptom lines.
///
/// Empty cells are missing; `true`/`false` are flags; finite numbers are
/// numeric; anything else is a category.
pub fn parse_cohort_csv(table: &str, symptoms: Option<&str>) -> Result<Vec<RawPatientRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(table.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse("cohort csv", Some(1), e.to_string()))?
        .clone();
    if headers.get(0) != Some("patient_id") {
        return Err(Error::parse("cohort csv", Some(1), "first column must be `patient_id`"));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line());
            Error::parse("cohort csv", line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line());
        let mut rec = RawPatientRecord::new(row.get(0).unwrap_or_default());
        if rec.patient_id.is_empty() {
            return Err(Error::parse("cohort csv", line, "empty patient_id"));
        }
        for (col, cell) in headers.iter().zip(row.iter()).skip(1) {
            if cell.is_empty() {
                continue;
            }
            if let Some(lab) = col.strip_prefix(LAB_COLUMN_PREFIX) {
                let x: f64 = cell
                    .parse()
                    .ok()
                    .filter(|x: &f64| x.is_finite())
                    .ok_or_else(|| Error::parse("cohort csv", line, format!("lab `{lab}` value `{cell}` is not a number")))?;
                rec.labs.push((lab.to_string(), x));
            } else {
                let value = match cell {
                    "true" => FeatureValue::Flag(true),
                    "false" => FeatureValue::Flag(false),
                    _ => match cell.parse::<f64>() {
                        Ok(x) if x.is_finite() => FeatureValue::Numeric(x),
                        _ => FeatureValue::Category(cell.to_string()),
                    },
                };
                rec.demographics.push((col.to_string(), value));
            }
        }
        records.push(rec);
    }
    check_ids(&records)?;

    if let Some(side) = symptoms {
        let index: BTreeMap<String, usize> = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.patient_id.clone(), i))
            .collect();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(side.as_bytes());
        for row in reader.records() {
            let row = row.map_err(|e| Error::parse("symptom file", e.position().map(|p| p.line()), e.to_string()))?;
            let line = row.position().map(|p| p.line());
            if row.len() != 2 {
                return Err(Error::parse("symptom file", line, "expected `patient_id,concept`"));
            }
            let (pid, concept) = (&row[0], &row[1]);
            if concept.is_empty() {
                return Err(Error::parse("symptom file", line, "empty concept"));
            }
            let i = *index
                .get(pid)
                .ok_or_else(|| Error::parse("symptom file", line, format!("unknown patient `{pid}`")))?;
            records[i].symptoms.insert(concept.to_string());
        }
    }
    Ok(records)
}

/// Reads a cohort from a `.json` document or a `.csv` table with an optional symptom sidecar.
pub fn load_cohort(path: &Path, symptoms: Option<&Path>) -> Result<Vec<RawPatientRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let side = symptoms
            .map(|p| std::fs::read_to_string(p).map_err(|e| Error::io(p, e)))
            .transpose()?;
        parse_cohort_csv(&text, side.as_deref())
    } else {
        parse_cohort_json(&text)
    }
}

pub const ENCODED_FORMAT_VERSION: u32 = 1;

/// Encoded cohort as written to disk: the schema header followed by one
/// numeric row per patient (0/1, standardised value, or category index).
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedMatrix {
    pub schema: VisibleSchema,
    pub patients: Vec<EncodedPatient>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EncodedDocument {
    format_version: u32,
    schema: VisibleSchema,
    records: Vec<EncodedRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EncodedRow {
    patient_id: String,
    values: Vec<f64>,
    /// Indices of imputed units.
    #[serde(default)]
    missing: Vec<usize>,
}

impl EncodedMatrix {
    pub fn to_json(&self) -> String {
        let doc = EncodedDocument {
            format_version: ENCODED_FORMAT_VERSION,
            schema: self.schema.clone(),
            records: self
                .patients
                .iter()
                .map(|p| EncodedRow {
                    patient_id: p.patient_id.clone(),
                    values: p.state.to_numbers(),
                    missing: p.missing_mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("encoded matrix serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: EncodedDocument = serde_json::from_str(text).map_err(|e| Error::json("encoded matrix", e))?;
        if doc.format_version != ENCODED_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported encoded-matrix version {}",
                doc.format_version
            )));
        }
        let n = doc.schema.len();
        let mut ids = HashSet::new();
        let patients = doc
            .records
            .into_iter()
            .map(|row| {
                if !ids.insert(row.patient_id.clone()) {
                    return Err(Error::Ingestion(format!("duplicate patient_id `{}`", row.patient_id)));
                }
                let state = VisibleState::from_numbers(&doc.schema, &row.values)
                    .map_err(|e| Error::Schema(format!("patient `{}`: {e}", row.patient_id)))?;
                let mut missing_mask = vec![false; n];
                for i in row.missing {
                    *missing_mask
                        .get_mut(i)
                        .ok_or_else(|| Error::Schema(format!("missing index {i} out of range")))? = true;
                }
                Ok(EncodedPatient {
                    patient_id: row.patient_id,
                    state,
                    missing_mask,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EncodedMatrix {
            schema: doc.schema,
            patients,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, age: Option<f64>, male: Option<bool>, adm: Option<&str>, symptoms: &[&str]) -> RawPatientRecord {
        let mut r = RawPatientRecord::new(id);
        if let Some(a) = age {
            r.demographics.push(("age".into(), FeatureValue::Numeric(a)));
        }
        if let Some(m) = male {
            r.demographics.push(("gender".into(), FeatureValue::Flag(m)));
        }
        if let Some(c) = adm {
            r.demographics.push(("admission_type".into(), FeatureValue::Category(c.into())));
        }
        r.symptoms = symptoms.iter().map(|s| s.to_string()).collect();
        r
    }

    fn fixture() -> Vec<RawPatientRecord> {
        vec![
            rec("p1", Some(50.0), Some(true), Some("emergency"), &["chest pain"]),
            rec("p2", Some(60.0), Some(false), Some("elective"), &[]),
            rec("p3", Some(70.0), Some(true), Some("urgent"), &["nausea"]),
        ]
    }

    #[test]
    fn schema_from_mixed_fixture() {
        let (schema, stats) = build_schema(&fixture()).unwrap();
        let types: Vec<_> = schema.units().iter().map(|u| (u.name.as_str(), u.unit_type)).collect();
        assert_eq!(
            types,
            vec![
                ("age", UnitType::Gaussian),
                ("gender", UnitType::Binary),
                ("admission_type", UnitType::Categorical { cardinality: 4 }),
                ("symptom:chest pain", UnitType::Binary),
                ("symptom:nausea", UnitType::Binary),
            ]
        );
        assert_eq!(stats.schema().unwrap(), schema);
    }

    #[test]
    fn no_symptoms_no_symptom_units() {
        let records: Vec<_> = fixture()
            .into_iter()
            .map(|mut r| {
                r.symptoms.clear();
                r
            })
            .collect();
        let (schema, _) = build_schema(&records).unwrap();
        assert_eq!(schema.len(), 3);
    }

    #[test]
    fn duplicate_and_conflicting_features_are_rejected() {
        let mut r = rec("p1", Some(50.0), None, None, &[]);
        r.labs.push(("age".into(), 3.0));
        assert!(matches!(build_schema(&[r]), Err(Error::Ingestion(_))));

        let json = r#"{"records":[{"patient_id":"p1","demographics":{"age":1,"age":2}}]}"#;
        let records = parse_cohort_json(json).unwrap();
        assert!(build_schema(&records).is_err());

        let a = rec("a", Some(1.0), None, None, &[]);
        let mut b = RawPatientRecord::new("b");
        b.demographics.push(("age".into(), FeatureValue::Category("old".into())));
        match build_schema(&[a, b]) {
            Err(Error::Ingestion(msg)) => {
                assert!(msg.contains("`age`") && msg.contains("`a`") && msg.contains("`b`"), "{msg}")
            }
            other => panic!("{other:?}"),
        }
        assert!(build_schema(&[]).is_err());
    }

    #[test]
    fn encoding_rules() {
        let records = vec![
            rec("p1", Some(50.0), Some(true), Some("emergency"), &[]),
            rec("p2", Some(70.0), Some(true), Some("elective"), &[]),
        ];
        let (_, stats) = build_schema(&records).unwrap();
        assert_eq!(
            stats.features[0],
            FeatureEncoding::Numeric {
                name: "age".into(),
                mean: 60.0,
                sd: 10.0
            }
        );
        let e = encode_patient(&rec("t", Some(70.0), None, Some("transfer"), &[]), &stats);
        assert_eq!(e.state.0[0], UnitValue::Real(1.0));
        assert_eq!(e.state.0[1], UnitValue::Binary(false));
        assert_eq!(e.state.0[2], UnitValue::Category(2));
        assert_eq!(e.missing_mask, vec![false, true, false]);

        let mut lab = RawPatientRecord::new("l1");
        lab.labs.push(("troponin".into(), 0.4));
        let (_, stats) = build_schema(&[lab.clone(), RawPatientRecord { labs: vec![("troponin".into(), 0.2)], ..lab }]).unwrap();
        let e = encode_patient(&RawPatientRecord::new("t"), &stats);
        assert_eq!(e.state.0, vec![UnitValue::Real(0.0)]);
        assert_eq!(e.missing_mask, vec![true]);
    }

    #[test]
    fn training_set_is_standardised() {
        let records: Vec<_> = (0..40)
            .map(|i| {
                let mut r = RawPatientRecord::new(format!("p{i}"));
                if i % 7 != 0 {
                    r.labs.push(("x".into(), (i * i) as f64 * 0.37 - 11.0));
                }
                r.labs.push(("y".into(), (i as f64).sin() * 1e3));
                r
            })
            .collect();
        let (_, stats) = build_schema(&records).unwrap();
        for unit in 0..2 {
            let xs: Vec<f64> = records
                .iter()
                .map(|r| encode_patient(r, &stats))
                .filter(|e| !e.missing_mask[unit])
                .map(|e| e.state.0[unit].as_number())
                .collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 1e-9, "{mean}");
            assert!((sd - 1.0).abs() < 1e-9, "{sd}");
        }
    }

    #[test]
    fn symptom_extraction() {
        let lexicon = vec!["chest pain".to_string(), "shortness of breath".to_string()];
        let found = extract_symptoms("complains of chest pain and nausea", &lexicon);
        assert_eq!(found, BTreeSet::from(["chest pain".to_string()]));
        assert!(extract_symptoms("", &lexicon).is_empty());
        let found = extract_symptoms("Reports SHORTNESS of\nbreath overnight.", &lexicon);
        assert_eq!(found, BTreeSet::from(["shortness of breath".to_string()]));
        assert!(extract_symptoms("chest painful", &lexicon).is_empty());
    }

    #[test]
    fn split_rules() {
        let ids: Vec<usize> = (0..707).collect();
        let (train, test) = split_cohort(&ids, 20, 4).unwrap();
        assert_eq!((train.len(), test.len()), (687, 20));
        let mut all: Vec<_> = train.iter().chain(&test).copied().collect();
        all.sort();
        assert_eq!(all, ids);
        assert_eq!(split_cohort(&ids, 20, 4).unwrap(), (train, test));
        let (train, test) = split_cohort(&ids, 0, 4).unwrap();
        assert_eq!((train.len(), test.len()), (707, 0));
        assert!(split_cohort(&ids, 707, 4).is_err());
    }

    #[test]
    fn csv_variant() {
        let table = "patient_id,age,gender,admission_type,lab:troponin\n\
                     p1,63,true,emergency,0.4\n\
                     p2,71,false,,\n";
        let side = "p1,chest pain\np2,nausea\np1,nausea\n";
        let records = parse_cohort_csv(table, Some(side)).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].labs, vec![("troponin".to_string(), 0.4)]);
        assert_eq!(records[0].symptoms.len(), 2);
        assert_eq!(records[1].demographics.len(), 2);
        assert!(parse_cohort_csv(table, Some("p9,cough\n")).is_err());
        assert!(parse_cohort_csv("id,age\np1,3\n", None).is_err());
        match parse_cohort_csv("patient_id,lab:x\np1,1\np2,high\n", None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, Some(3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_and_matrix_files() {
        let records = fixture();
        let back = parse_cohort_json(&cohort_to_json(&records)).unwrap();
        assert_eq!(back, records);
        assert!(parse_cohort_json(r#"{"records":[{"patient_id":"a"},{"patient_id":"a"}]}"#).is_err());
        assert!(parse_cohort_json(r#"{"records":[{"patient_id":""}]}"#).is_err());

        let (schema, stats) = build_schema(&records).unwrap();
        let m = EncodedMatrix {
            schema,
            patients: records.iter().map(|r| encode_patient(r, &stats)).collect(),
        };
        assert_eq!(EncodedMatrix::from_json(&m.to_json()).unwrap(), m);
    }

    fn arb_record() -> impl Strategy<Value = RawPatientRecord> {
        (
            "[a-z]{1,4}",
            prop::option::of(-100.0f64..100.0),
            prop::option::of(prop::sample::select(vec!["a", "b", "c", "zz", "unknown"])),
            prop::collection::btree_set("[a-c]{1,2}", 0..3),
        )
            .prop_map(|(id, x, c, s)| {
                let mut r = RawPatientRecord::new(id);
                r.demographics.push(("male".into(), FeatureValue::Flag(x.is_some())));
                if let Some(x) = x {
                    r.labs.push(("x".into(), x));
                }
                if let Some(c) = c {
                    r.demographics.push(("cat".into(), FeatureValue::Category(c.into())));
                }
                r.symptoms = s;
                r
            })
    }

    proptest! {
        #[test]
        fn encoding_is_total_idempotent_and_in_bounds(
            train in prop::collection::vec(arb_record(), 1..12),
            probe in arb_record(),
        ) {
            let (schema, stats) = build_schema(&train).unwrap();
            for r in train.iter().chain(std::iter::once(&probe)) {
                let e = encode_patient(r, &stats);
                prop_assert!(schema.check(&e.state).is_ok());
                prop_assert_eq!(encode_patient(r, &stats), e);
            }
        }
    }
}

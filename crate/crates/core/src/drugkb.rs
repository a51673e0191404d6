//! Drug classification by indication text: main drugs name the target
//! disease, symptom-healing drugs name one of its symptoms.

use std::collections::BTreeSet;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lowercases and collapses runs of whitespace.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Canonical drug-name form shared by the knowledge base and prescriptions.
pub fn normalize_drug_name(s: &str) -> String {
    normalize_text(s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiseaseSpec {
    pub disease_name: String,
    #[serde(default)]
    pub symptoms: Vec<String>,
}

impl DiseaseSpec {
    pub fn new(disease_name: impl Into<String>, symptoms: &[&str]) -> Result<Self> {
        let spec = DiseaseSpec {
            disease_name: disease_name.into(),
            symptoms: symptoms.iter().map(|s| s.to_string()).collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.disease_name.trim().is_empty() {
            return Err(Error::InvalidArgument("disease name must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DrugIndicationEntry {
    pub drug_name: String,
    pub indication_text: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrugClass {
    Main,
    SymptomHealing,
    Unclassified,
}

/// Main and symptom-healing drug sets; disjoint.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrugKnowledgeBase {
    pub mdb: BTreeSet<String>,
    pub sdb: BTreeSet<String>,
}

impl DrugKnowledgeBase {
    pub fn class_of(&self, drug: &str) -> DrugClass {
        if self.mdb.contains(drug) {
            DrugClass::Main
        } else if self.sdb.contains(drug) {
            DrugClass::SymptomHealing
        } else {
            DrugClass::Unclassified
        }
    }
}

/// A drug is main if its normalised indication contains the disease name,
/// otherwise symptom-healing if it contains any symptom phrase.
pub fn classify_drugs(entries: &[DrugIndicationEntry], spec: &DiseaseSpec) -> DrugKnowledgeBase {
    let disease = normalize_text(&spec.disease_name);
    let symptoms: Vec<String> = spec
        .symptoms
        .iter()
        .map(|s| normalize_text(s))
        .filter(|s| !s.is_empty())
        .collect();
    let mut kb = DrugKnowledgeBase::default();
    for e in entries {
        let text = normalize_text(&e.indication_text);
        let name = normalize_drug_name(&e.drug_name);
        if !disease.is_empty() && text.contains(&disease) {
            kb.mdb.insert(name);
        } else if symptoms.iter().any(|s| text.contains(s)) {
            kb.sdb.insert(name);
        }
    }
    // a name listed twice can match both ways; main wins
    let overlap: Vec<String> = kb.sdb.intersection(&kb.mdb).cloned().collect();
    for name in overlap {
        kb.sdb.remove(&name);
    }
    kb
}

pub const KB_HEADER: &str = "drug_name\tindication_text";

/// Parses the two-column TSV knowledge base. A header row is required
/// unless the file is empty. Names are normalised; repeated names are merged
/// by joining their indication texts with a space.
pub fn parse_kb_tsv(text: &str) -> Result<Vec<DrugIndicationEntry>> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    if header.trim_start_matches('\u{feff}').trim_end() != KB_HEADER {
        return Err(Error::parse(
            "drug knowledge base",
            Some(1),
            format!("expected header `drug_name<TAB>indication_text`, found `{header}`"),
        ));
    }
    let mut merged: IndexMap<String, String> = IndexMap::new();
    for (i, line) in lines {
        let line_no = Some(i as u64 + 1);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                "drug knowledge base",
                line_no,
                format!("expected 2 tab-separated fields, found {}", fields.len()),
            ));
        }
        let name = normalize_drug_name(fields[0]);
        if name.is_empty() {
            return Err(Error::parse("drug knowledge base", line_no, "empty drug name"));
        }
        let indication = fields[1].trim();
        merged
            .entry(name)
            .and_modify(|t| {
                t.push(' ');
                t.push_str(indication);
            })
            .or_insert_with(|| indication.to_string());
    }
    Ok(merged
        .into_iter()
        .map(|(drug_name, indication_text)| DrugIndicationEntry {
            drug_name,
            indication_text,
        })
        .collect())
}

pub fn load_kb(path: &Path) -> Result<Vec<DrugIndicationEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kb_tsv(&text)
}

pub fn kb_to_tsv(entries: &[DrugIndicationEntry]) -> String {
    let mut out = String::from(KB_HEADER);
    out.push('\n');
    for e in entries {
        out.push_str(&e.drug_name);
        out.push('\t');
        out.push_str(&e.indication_text);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(name: &str, text: &str) -> DrugIndicationEntry {
        DrugIndicationEntry {
            drug_name: name.into(),
            indication_text: text.into(),
        }
    }

    fn cad() -> DiseaseSpec {
        DiseaseSpec::new(
            "coronary artery disease",
            &["heart attack", "shortness of breath", "chest pain"],
        )
        .unwrap()
    }

    #[test]
    fn classification_fixtures() {
        let entries = vec![
            entry("aspirin", "For the management of coronary artery disease and stroke."),
            entry("morphine", "Used for relief of chest pain in acute settings."),
            entry("heparin", "Prevents heart attack in  Coronary   Artery Disease."),
            entry("insulin", "Glycemic control in diabetes."),
        ];
        let kb = classify_drugs(&entries, &cad());
        assert_eq!(kb.class_of("aspirin"), DrugClass::Main);
        assert_eq!(kb.class_of("morphine"), DrugClass::SymptomHealing);
        assert_eq!(kb.class_of("heparin"), DrugClass::Main);
        assert!(!kb.sdb.contains("heparin"));
        assert_eq!(kb.class_of("insulin"), DrugClass::Unclassified);
    }

    #[test]
    fn empty_disease_name_is_invalid() {
        assert!(DiseaseSpec::new("  ", &[]).is_err());
    }

    #[test]
    fn tsv_parsing() {
        assert!(parse_kb_tsv("").unwrap().is_empty());
        let text = "drug_name\tindication_text\nAspirin \tpain\naspirin\tfever\nmorphine\tchest pain\n";
        let entries = parse_kb_tsv(text).unwrap();
        assert_eq!(entries, vec![entry("aspirin", "pain fever"), entry("morphine", "chest pain")]);
        match parse_kb_tsv("drug_name\tindication_text\nok\tfine\nbroken row\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, Some(3)),
            other => panic!("{other:?}"),
        }
        assert!(parse_kb_tsv("name\ttext\n").is_err());
        assert!(parse_kb_tsv("drug_name\tindication_text\n\tx\n").is_err());
        assert_eq!(parse_kb_tsv(&kb_to_tsv(&entries)).unwrap(), entries);
    }

    proptest! {
        #[test]
        fn case_insensitive_and_disjoint(
            rows in prop::collection::vec(("[a-d]{1,3}", prop::sample::select(vec![
                "treats coronary artery disease", "for chest pain", "chest pain and coronary artery disease",
                "unrelated", "Heart Attack prevention", ""])), 0..12)
        ) {
            let entries: Vec<_> = rows.iter().map(|(n, t)| entry(n, t)).collect();
            let upper: Vec<_> = rows.iter().map(|(n, t)| entry(&n.to_uppercase(), &t.to_uppercase())).collect();
            let spec = cad();
            let spec_upper = DiseaseSpec {
                disease_name: spec.disease_name.to_uppercase(),
                symptoms: spec.symptoms.iter().map(|s| s.to_uppercase()).collect(),
            };
            let kb = classify_drugs(&entries, &spec);
            prop_assert!(kb.mdb.is_disjoint(&kb.sdb));
            prop_assert_eq!(classify_drugs(&upper, &spec_upper), kb);
        }
    }
}

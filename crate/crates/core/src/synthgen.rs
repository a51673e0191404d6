//! Seeded synthetic cohorts with planted patient groups and planted
//! per-period regimens.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cohort::{cohort_to_json, FeatureValue, RawPatientRecord};
use crate::drugkb::{kb_to_tsv, DiseaseSpec, DrugIndicationEntry};
use crate::periods::{prescriptions_to_csv, DrugOrder, PrescriptionHistory};
use crate::rng::{seeded, SeededRng};
use crate::{Error, Result};

pub const DISEASE_NAME: &str = "coronary artery disease";
pub const SYMPTOMS: [&str; 3] = ["heart attack", "shortness of breath", "chest pain"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_groups: usize,
    /// Split as evenly as possible across groups.
    pub n_patients: usize,
    pub n_numeric: usize,
    pub n_binary: usize,
    pub n_categorical: usize,
    pub cardinality: usize,
    pub n_symptoms: usize,
    /// 0 gives every group the same feature distributions.
    pub separation: f64,
    pub n_periods: usize,
    /// Drugs planted per (group, period); the first `main_per_period` are main drugs.
    pub planted_per_period: usize,
    pub main_per_period: usize,
    pub delivery_prob: f64,
    pub noise_pool: usize,
    pub noise_prob: f64,
    pub min_period_days: u64,
    pub max_period_days: u64,
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_groups: 3,
            n_patients: 300,
            n_numeric: 10,
            n_binary: 10,
            n_categorical: 5,
            cardinality: 4,
            n_symptoms: 5,
            separation: 0.9,
            n_periods: 3,
            planted_per_period: 4,
            main_per_period: 2,
            delivery_prob: 0.9,
            noise_pool: 20,
            noise_prob: 0.1,
            min_period_days: 14,
            max_period_days: 28,
            start_date: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_groups == 0 || self.n_patients < self.n_groups {
            return bad(format!("{} patients cannot fill {} groups", self.n_patients, self.n_groups));
        }
        if self.n_numeric + self.n_binary + self.n_categorical + self.n_symptoms == 0 {
            return bad("no features requested".into());
        }
        if self.n_categorical > 0 && self.cardinality < 2 {
            return bad("categorical cardinality must be at least 2".into());
        }
        if !(0.0..=1.0).contains(&self.separation) {
            return bad(format!("separation {} outside [0, 1]", self.separation));
        }
        if self.n_periods == 0 || self.planted_per_period == 0 {
            return bad("need at least one period and one planted drug".into());
        }
        if self.main_per_period == 0 || self.main_per_period > self.planted_per_period {
            return bad("main_per_period must be in 1..=planted_per_period".into());
        }
        for (name, p) in [("delivery_prob", self.delivery_prob), ("noise_prob", self.noise_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} outside [0, 1]"));
            }
        }
        if self.min_period_days < 3 || self.max_period_days < self.min_period_days {
            return bad("period lengths need 3 <= min_period_days <= max_period_days".into());
        }
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        self.n_numeric + self.n_binary + self.n_categorical + self.n_symptoms
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruePatient {
    pub patient_id: String,
    pub group: usize,
    /// First date of every period after the first.
    pub boundaries: Vec<NaiveDate>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub patients: Vec<TruePatient>,
    /// Planted drug names per group, per period.
    pub planted: Vec<Vec<Vec<String>>>,
    pub noise_drugs: Vec<String>,
}

impl GroundTruth {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("ground truth", e))
    }

    pub fn group_of(&self, patient_id: &str) -> Option<usize> {
        self.patients.iter().find(|p| p.patient_id == patient_id).map(|p| p.group)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCohort {
    pub records: Vec<RawPatientRecord>,
    pub histories: Vec<PrescriptionHistory>,
    pub kb: Vec<DrugIndicationEntry>,
    pub disease: DiseaseSpec,
    pub truth: GroundTruth,
}

/// Group-level feature parameters.
struct Profile {
    /// Per numeric feature, per group: mean in standard deviations.
    numeric_means: Vec<Vec<f64>>,
    /// Per binary or symptom feature, per group.
    binary_p: Vec<Vec<f64>>,
    /// Per categorical feature, per group: category weights.
    category_w: Vec<Vec<Vec<f64>>>,
}

fn draw_profile(spec: &SynthSpec, rng: &mut SeededRng) -> Profile {
    let g = spec.n_groups;
    let s = spec.separation;
    let numeric_means = (0..spec.n_numeric)
        .map(|_| {
            let mut ranks: Vec<usize> = (0..g).collect();
            ranks.shuffle(rng);
            ranks.iter().map(|&r| s * 4.0 * r as f64).collect()
        })
        .collect();
    let binary_p = (0..spec.n_binary + spec.n_symptoms)
        .map(|_| {
            (0..g)
                .map(|_| {
                    let q = if rng.random::<bool>() { 0.9 } else { 0.1 };
                    0.5 + s * (q - 0.5)
                })
                .collect()
        })
        .collect();
    let m = spec.cardinality;
    let category_w = (0..spec.n_categorical)
        .map(|_| {
            (0..g)
                .map(|_| {
                    let favoured = rng.random_range(0..m);
                    (0..m)
                        .map(|c| (1.0 - s) / m as f64 + if c == favoured { s } else { 0.0 })
                        .collect()
                })
                .collect()
        })
        .collect();
    Profile {
        numeric_means,
        binary_p,
        category_w,
    }
}

fn pick_weighted(weights: &[f64], rng: &mut SeededRng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn category_name(c: usize) -> String {
    format!("c{}", c + 1)
}

fn patient_record(id: &str, group: usize, spec: &SynthSpec, prof: &Profile, rng: &mut SeededRng) -> RawPatientRecord {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut r = RawPatientRecord::new(id);
    for (f, means) in prof.numeric_means.iter().enumerate() {
        let z = means[group] + normal.sample(rng);
        if f == 0 {
            r.demographics.push(("age".into(), FeatureValue::Numeric(55.0 + 8.0 * z)));
        } else {
            r.labs.push((format!("lab_{f:02}"), 100.0 + 15.0 * z));
        }
    }
    for f in 0..spec.n_binary {
        let flag = rng.random::<f64>() < prof.binary_p[f][group];
        r.demographics.push((format!("flag_{:02}", f + 1), FeatureValue::Flag(flag)));
    }
    for (f, weights) in prof.category_w.iter().enumerate() {
        let c = pick_weighted(&weights[group], rng);
        r.demographics.push((format!("cat_{:02}", f + 1), FeatureValue::Category(category_name(c))));
    }
    for f in 0..spec.n_symptoms {
        if rng.random::<f64>() < prof.binary_p[spec.n_binary + f][group] {
            r.symptoms.insert(format!("symptom_{:02}", f + 1));
        }
    }
    r
}

const DOSAGES: [&str; 4] = ["5 mg", "10 mg", "20 mg", "40 mg"];

fn add_days(d: NaiveDate, n: u64) -> NaiveDate {
    d.checked_add_days(Days::new(n)).expect("date in range")
}

/// Planted orders start together on the first day of each period (the burst)
/// and are redelivered unchanged on a few later days. Noise drugs are short
/// orders on random days.
fn patient_history(
    id: &str,
    group: usize,
    spec: &SynthSpec,
    planted: &[Vec<Vec<String>>],
    noise: &[String],
    rng: &mut SeededRng,
) -> Result<(PrescriptionHistory, Vec<NaiveDate>)> {
    let mut start = add_days(spec.start_date, rng.random_range(0..365));
    let mut orders = Vec::new();
    let mut boundaries = Vec::new();
    for period in 0..spec.n_periods {
        let len = rng.random_range(spec.min_period_days..=spec.max_period_days);
        let end = add_days(start, len - 1);
        if period > 0 {
            boundaries.push(start);
        }
        let set = &planted[group][period];
        let mut delivered: Vec<&String> = set.iter().filter(|_| rng.random::<f64>() < spec.delivery_prob).collect();
        if delivered.is_empty() {
            delivered.push(&set[0]);
        }
        let redeliveries: BTreeSet<u64> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..len)).collect();
        for drug in delivered {
            let dosage = DOSAGES[rng.random_range(0..DOSAGES.len())];
            orders.push(DrugOrder::new(drug, start, end, dosage)?);
            for &day in &redeliveries {
                if rng.random::<f64>() < 0.5 {
                    orders.push(DrugOrder::new(drug, add_days(start, day), end, dosage)?);
                }
            }
        }
        for drug in noise {
            if rng.random::<f64>() < spec.noise_prob {
                let day = rng.random_range(0..len);
                let s = add_days(start, day);
                let e = add_days(s, rng.random_range(0..3)).min(end);
                orders.push(DrugOrder::new(drug, s, e, DOSAGES[0])?);
            }
        }
        start = add_days(end, 1);
    }
    Ok((PrescriptionHistory::new(id, orders)?, boundaries))
}

fn indication(class: &str, rng: &mut SeededRng) -> String {
    const OTHER: [&str; 4] = [
        "seasonal allergic rhinitis",
        "gastro-oesophageal reflux",
        "type 2 diabetes mellitus",
        "insomnia",
    ];
    match class {
        "main" => format!("Indicated to reduce the risk of events in {DISEASE_NAME}."),
        "symptom" => format!("Relief of {}.", SYMPTOMS[rng.random_range(0..SYMPTOMS.len())]),
        _ => format!("Treatment of {}.", OTHER[rng.random_range(0..OTHER.len())]),
    }
}

/// Generates a cohort, prescriptions, a drug knowledge base and the planted truth.
pub fn generate(spec: &SynthSpec) -> Result<SynthCohort> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let profile = draw_profile(spec, &mut rng);

    let mut kb = Vec::new();
    let mut planted = Vec::with_capacity(spec.n_groups);
    for g in 0..spec.n_groups {
        let mut periods = Vec::with_capacity(spec.n_periods);
        for p in 0..spec.n_periods {
            let mut set = Vec::with_capacity(spec.planted_per_period);
            for i in 0..spec.planted_per_period {
                let class = if i < spec.main_per_period {
                    "main"
                } else if i == spec.main_per_period {
                    "symptom"
                } else {
                    "other"
                };
                let name = format!("rx-g{}p{}-{}", g + 1, p + 1, (b'a' + i as u8) as char);
                kb.push(DrugIndicationEntry {
                    indication_text: indication(class, &mut rng),
                    drug_name: name.clone(),
                });
                set.push(name);
            }
            periods.push(set);
        }
        planted.push(periods);
    }
    let noise: Vec<String> = (0..spec.noise_pool).map(|i| format!("noise-{:02}", i + 1)).collect();
    for n in &noise {
        kb.push(DrugIndicationEntry {
            drug_name: n.clone(),
            indication_text: indication("other", &mut rng),
        });
    }

    let mut groups: Vec<usize> = (0..spec.n_patients).map(|i| i % spec.n_groups).collect();
    groups.shuffle(&mut rng);
    let width = spec.n_patients.to_string().len().max(4);
    let mut records = Vec::with_capacity(spec.n_patients);
    let mut histories = Vec::with_capacity(spec.n_patients);
    let mut truth = Vec::with_capacity(spec.n_patients);
    for (i, &group) in groups.iter().enumerate() {
        let id = format!("P{:0width$}", i + 1);
        records.push(patient_record(&id, group, spec, &profile, &mut rng));
        let (h, boundaries) = patient_history(&id, group, spec, &planted, &noise, &mut rng)?;
        histories.push(h);
        truth.push(TruePatient {
            patient_id: id,
            group,
            boundaries,
        });
    }
    Ok(SynthCohort {
        records,
        histories,
        kb,
        disease: DiseaseSpec {
            disease_name: DISEASE_NAME.into(),
            symptoms: SYMPTOMS.iter().map(|s| s.to_string()).collect(),
        },
        truth: GroundTruth {
            patients: truth,
            planted,
            noise_drugs: noise,
        },
    })
}

pub const COHORT_FILE: &str = "cohort.json";
pub const PRESCRIPTIONS_FILE: &str = "prescriptions.csv";
pub const KB_FILE: &str = "drug_kb.tsv";
pub const DISEASE_FILE: &str = "disease.json";
pub const TRUTH_FILE: &str = "truth.json";

impl SynthCohort {
    /// Writes the cohort, prescription, knowledge-base, disease and truth files into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let disease = serde_json::to_string_pretty(&self.disease).expect("disease serialises");
        for (name, text) in [
            (COHORT_FILE, cohort_to_json(&self.records)),
            (PRESCRIPTIONS_FILE, prescriptions_to_csv(&self.histories)),
            (KB_FILE, kb_to_tsv(&self.kb)),
            (DISEASE_FILE, disease),
            (TRUTH_FILE, self.truth.to_json()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{build_schema, parse_cohort_json};
    use crate::drugkb::{classify_drugs, parse_kb_tsv, DrugClass};
    use crate::periods::parse_prescriptions_csv;

    fn small(seed: u64) -> SynthSpec {
        SynthSpec {
            n_patients: 30,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_and_parseable() {
        let a = generate(&small(7)).unwrap();
        let b = generate(&small(7)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate(&small(8)).unwrap());
        let back = parse_cohort_json(&cohort_to_json(&a.records)).unwrap();
        assert_eq!(back, a.records);
        let (schema, _) = build_schema(&back).unwrap();
        assert_eq!(schema.len(), 30);
        assert_eq!(parse_prescriptions_csv(&prescriptions_to_csv(&a.histories)).unwrap(), a.histories);
        assert_eq!(parse_kb_tsv(&kb_to_tsv(&a.kb)).unwrap(), a.kb);
    }

    #[test]
    fn labels_partition_and_periods_are_dated() {
        let c = generate(&small(1)).unwrap();
        let mut sizes = vec![0; 3];
        for t in &c.truth.patients {
            sizes[t.group] += 1;
            assert_eq!(t.boundaries.len(), 2);
        }
        assert_eq!(sizes, vec![10, 10, 10]);
        for h in &c.histories {
            assert!(h.dates().len() >= 3);
        }
    }

    #[test]
    fn planted_classes_match_the_kb() {
        let c = generate(&small(2)).unwrap();
        let kb = classify_drugs(&c.kb, &c.disease);
        for periods in &c.truth.planted {
            for set in periods {
                assert_eq!(kb.class_of(&set[0]), DrugClass::Main);
                assert_eq!(kb.class_of(&set[1]), DrugClass::Main);
                assert_eq!(kb.class_of(&set[2]), DrugClass::SymptomHealing);
                assert_eq!(kb.class_of(&set[3]), DrugClass::Unclassified);
            }
        }
        assert!(c.truth.noise_drugs.iter().all(|n| kb.class_of(n) == DrugClass::Unclassified));
    }

    fn group_means(spec: &SynthSpec) -> Vec<Vec<f64>> {
        let c = generate(spec).unwrap();
        let mut sums = vec![vec![0.0; spec.n_numeric - 1]; spec.n_groups];
        let mut counts = vec![0.0; spec.n_groups];
        for (r, t) in c.records.iter().zip(&c.truth.patients) {
            counts[t.group] += 1.0;
            for (f, (_, v)) in r.labs.iter().enumerate() {
                sums[t.group][f] += (v - 100.0) / 15.0;
            }
        }
        sums.iter().zip(&counts).map(|(s, n)| s.iter().map(|x| x / n).collect()).collect()
    }

    #[test]
    fn separation_controls_numeric_means() {
        let spec = SynthSpec {
            n_patients: 3000,
            separation: 1.0,
            ..Default::default()
        };
        let means = group_means(&spec);
        for f in 0..spec.n_numeric - 1 {
            let mut col: Vec<f64> = means.iter().map(|m| m[f]).collect();
            col.sort_by(f64::total_cmp);
            for w in col.windows(2) {
                assert!(w[1] - w[0] > 3.8, "{col:?}");
            }
        }
        let flat = group_means(&SynthSpec {
            separation: 0.0,
            ..spec
        });
        for f in 0..9 {
            let col: Vec<f64> = flat.iter().map(|m| m[f]).collect();
            assert!(col.iter().all(|m| m.abs() < 0.15), "{col:?}");
        }
    }

    #[test]
    fn invalid_specs() {
        for s in [
            SynthSpec {
                separation: 1.5,
                ..Default::default()
            },
            SynthSpec {
                n_patients: 2,
                ..Default::default()
            },
            SynthSpec {
                main_per_period: 5,
                ..Default::default()
            },
            SynthSpec {
                min_period_days: 2,
                ..Default::default()
            },
        ] {
            assert!(generate(&s).is_err());
        }
    }
}

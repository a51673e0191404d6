//! Accumulated indication-change scoring of prescription histories and the
//! treatment-period split derived from it.
//!
//! For every prescription date `d` the scorer looks at the orders starting on
//! `d` and counts three kinds of change against the set `U` of recently
//! delivered drugs: newly delivered drugs (name not in `U`), redelivered
//! drugs whose dosage differs from the entry in `U`, and drugs in `U` that are
//! not redelivered on `d` and whose end date lies before `d`. Each changed
//! drug adds the weight of its class (main, symptom-healing, unclassified).
//!
//! A drug redelivered after its end date with an unchanged dosage, while still
//! in `U`, scores nothing; drugs whose end date passes after the last
//! prescription date are never counted as stopped.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::drugkb::{normalize_drug_name, DrugClass, DrugKnowledgeBase};
use crate::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DrugOrder {
    pub name: String,
    pub startdate: NaiveDate,
    pub enddate: NaiveDate,
    /// Opaque; compared for equality only.
    pub dosage: String,
}

impl DrugOrder {
    pub fn new(name: &str, startdate: NaiveDate, enddate: NaiveDate, dosage: &str) -> Result<Self> {
        if startdate > enddate {
            return Err(Error::InvalidArgument(format!(
                "order for `{name}` ends ({enddate}) before it starts ({startdate})"
            )));
        }
        Ok(DrugOrder {
            name: normalize_drug_name(name),
            startdate,
            enddate,
            dosage: dosage.to_string(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrescriptionHistory {
    pub patient_id: String,
    orders: Vec<DrugOrder>,
    dates: Vec<NaiveDate>,
}

impl PrescriptionHistory {
    pub fn new(patient_id: impl Into<String>, orders: Vec<DrugOrder>) -> Result<Self> {
        let patient_id = patient_id.into();
        if orders.is_empty() {
            return Err(Error::InvalidArgument(format!("patient `{patient_id}` has no orders")));
        }
        if let Some(o) = orders.iter().find(|o| o.startdate > o.enddate) {
            return Err(Error::InvalidArgument(format!(
                "patient `{patient_id}`: order for `{}` ends before it starts",
                o.name
            )));
        }
        let dates: BTreeSet<NaiveDate> = orders.iter().map(|o| o.startdate).collect();
        Ok(PrescriptionHistory {
            patient_id,
            orders,
            dates: dates.into_iter().collect(),
        })
    }

    pub fn orders(&self) -> &[DrugOrder] {
        &self.orders
    }

    /// Sorted distinct start dates.
    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreWeights {
    pub w_main: f64,
    pub w_symp: f64,
    pub w_unk: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            w_main: 1.0,
            w_symp: 0.5,
            w_unk: 0.1,
        }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.w_main, self.w_symp, self.w_unk].iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("score weights must be nonnegative: {self:?}")))
        }
    }

    fn of(&self, class: DrugClass) -> f64 {
        match class {
            DrugClass::Main => self.w_main,
            DrugClass::SymptomHealing => self.w_symp,
            DrugClass::Unclassified => self.w_unk,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreCurve {
    /// `(date, accumulated score)` for every prescription date, in order.
    pub points: Vec<(NaiveDate, f64)>,
}

impl ScoreCurve {
    /// Per-date score increments; the first is the first accumulated score.
    pub fn increments(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.points
            .iter()
            .map(|&(_, s)| {
                let inc = s - prev;
                prev = s;
                inc
            })
            .collect()
    }
}

/// Names that changed on one date, split by kind of change.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DateChanges {
    pub new: BTreeSet<String>,
    pub dosage_changed: BTreeSet<String>,
    pub stopped: BTreeSet<String>,
}

/// Among orders for the same drug on one date, the one kept in `U`. Fixed
/// by content so that the order of same-date orders does not matter.
fn representative<'a>(candidates: impl Iterator<Item = &'a DrugOrder>) -> &'a DrugOrder {
    candidates.max().expect("at least one candidate")
}

/// Runs the scoring pass and reports, for each date, which drugs changed.
pub fn score_changes(h: &PrescriptionHistory) -> Vec<(NaiveDate, DateChanges)> {
    // U keyed by name
    let mut recent: BTreeMap<String, DrugOrder> = BTreeMap::new();
    let mut out = Vec::with_capacity(h.dates.len());
    for &d in &h.dates {
        let delivered: Vec<&DrugOrder> = h.orders.iter().filter(|o| o.startdate == d).collect();
        let delivered_names: BTreeSet<&str> = delivered.iter().map(|o| o.name.as_str()).collect();

        let new: BTreeSet<String> = delivered_names
            .iter()
            .filter(|n| !recent.contains_key(**n))
            .map(|n| n.to_string())
            .collect();
        let dosage_changed: BTreeSet<String> = delivered
            .iter()
            .filter(|o| recent.get(&o.name).is_some_and(|u| u.dosage != o.dosage))
            .map(|o| o.name.clone())
            .collect();
        let stopped: BTreeSet<String> = recent
            .values()
            .filter(|u| !delivered_names.contains(u.name.as_str()) && u.enddate < d)
            .map(|u| u.name.clone())
            .collect();

        for (name, entry) in recent.iter_mut() {
            if delivered_names.contains(name.as_str()) {
                *entry = representative(delivered.iter().copied().filter(|o| &o.name == name)).clone();
            }
        }
        for name in &stopped {
            recent.remove(name);
        }
        for name in &new {
            let o = representative(delivered.iter().copied().filter(|o| &o.name == name));
            recent.insert(name.clone(), o.clone());
        }

        out.push((
            d,
            DateChanges {
                new,
                dosage_changed,
                stopped,
            },
        ));
    }
    out
}

/// Accumulated weighted indication-change score at each prescription date.
pub fn score_prescriptions(h: &PrescriptionHistory, kb: &DrugKnowledgeBase, w: &ScoreWeights) -> ScoreCurve {
    let mut total = 0.0;
    let points = score_changes(h)
        .into_iter()
        .map(|(d, changes)| {
            let considered: BTreeSet<&String> = changes
                .new
                .iter()
                .chain(&changes.dosage_changed)
                .chain(&changes.stopped)
                .collect();
            let (mut main, mut symp, mut unk) = (0usize, 0usize, 0usize);
            for name in considered {
                match kb.class_of(name) {
                    DrugClass::Main => main += 1,
                    DrugClass::SymptomHealing => symp += 1,
                    DrugClass::Unclassified => unk += 1,
                }
            }
            total += main as f64 * w.of(DrugClass::Main)
                + symp as f64 * w.of(DrugClass::SymptomHealing)
                + unk as f64 * w.of(DrugClass::Unclassified);
            (d, total)
        })
        .collect();
    ScoreCurve { points }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSplit {
    pub n_periods: usize,
    /// `n_periods - 1` strictly increasing dates; each opens a new period.
    pub boundaries: Vec<NaiveDate>,
}

/// Increments are compared on a 1e-9 grid so that accumulated rounding noise
/// does not decide ties.
fn quantize(x: f64) -> i64 {
    (x * 1e9).round() as i64
}

/// Picks the `n_periods - 1` dates with the largest score increments (ties
/// to the earlier date). The first date always opens period 1 and is never
/// a boundary.
pub fn split_periods(curve: &ScoreCurve, n_periods: usize) -> Result<PeriodSplit> {
    if n_periods == 0 {
        return Err(Error::InvalidArgument("need at least one period".into()));
    }
    if curve.points.len() < n_periods {
        return Err(Error::InvalidArgument(format!(
            "{} prescription dates cannot be split into {n_periods} periods",
            curve.points.len()
        )));
    }
    let inc = curve.increments();
    let mut candidates: Vec<usize> = (1..inc.len()).collect();
    candidates.sort_by_key(|&j| (std::cmp::Reverse(quantize(inc[j])), j));
    let mut chosen: Vec<usize> = candidates.into_iter().take(n_periods - 1).collect();
    chosen.sort_unstable();
    Ok(PeriodSplit {
        n_periods,
        boundaries: chosen.into_iter().map(|j| curve.points[j].0).collect(),
    })
}

/// 1-based period of a date: boundaries open the following period.
pub fn period_of(date: NaiveDate, split: &PeriodSplit) -> usize {
    1 + split.boundaries.iter().filter(|&&b| b <= date).count()
}

pub fn assign_period(order: &DrugOrder, split: &PeriodSplit) -> usize {
    period_of(order.startdate, split)
}

/// Drug names started in each period, indexed 0..n_periods.
pub fn drugs_by_period(h: &PrescriptionHistory, split: &PeriodSplit) -> Vec<BTreeSet<String>> {
    let mut out = vec![BTreeSet::new(); split.n_periods];
    for o in h.orders() {
        out[assign_period(o, split) - 1].insert(o.name.clone());
    }
    out
}

#[derive(Deserialize)]
struct PrescriptionRow {
    patient_id: String,
    drug_name: String,
    startdate: String,
    enddate: String,
    dosage: String,
}

pub const PRESCRIPTION_HEADER: [&str; 5] = ["patient_id", "drug_name", "startdate", "enddate", "dosage"];

/// Parses the prescription CSV into per-patient histories sorted by patient id.
pub fn parse_prescriptions_csv(text: &str) -> Result<Vec<PrescriptionHistory>> {
    const SRC: &str = "prescriptions";
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(SRC, Some(1), e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != PRESCRIPTION_HEADER {
        return Err(Error::parse(
            SRC,
            Some(1),
            format!("expected header `{}`", PRESCRIPTION_HEADER.join(",")),
        ));
    }
    let mut by_patient: BTreeMap<String, Vec<DrugOrder>> = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::parse(SRC, e.position().map(|p| p.line()), e.to_string()))?;
        let line = row.position().map(|p| p.line());
        let r: PrescriptionRow = row
            .deserialize(Some(&headers))
            .map_err(|e| Error::parse(SRC, line, e.to_string()))?;
        if r.patient_id.is_empty() {
            return Err(Error::parse(SRC, line, "empty patient_id"));
        }
        let name = normalize_drug_name(&r.drug_name);
        if name.is_empty() {
            return Err(Error::parse(SRC, line, "empty drug_name"));
        }
        let date = |s: &str| {
            NaiveDate::parse_from_str(s, DATE_FORMAT)
                .map_err(|e| Error::parse(SRC, line, format!("bad date `{s}`: {e}")))
        };
        let order = DrugOrder::new(&name, date(&r.startdate)?, date(&r.enddate)?, &r.dosage)
            .map_err(|e| Error::parse(SRC, line, e.to_string()))?;
        by_patient.entry(r.patient_id).or_default().push(order);
    }
    by_patient
        .into_iter()
        .map(|(pid, orders)| PrescriptionHistory::new(pid, orders))
        .collect()
}

pub fn load_prescriptions(path: &Path) -> Result<Vec<PrescriptionHistory>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_prescriptions_csv(&text)
}

pub fn prescriptions_to_csv(histories: &[PrescriptionHistory]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PRESCRIPTION_HEADER).expect("in-memory write");
    for h in histories {
        for o in h.orders() {
            w.write_record([
                h.patient_id.as_str(),
                o.name.as_str(),
                &o.startdate.format(DATE_FORMAT).to_string(),
                &o.enddate.format(DATE_FORMAT).to_string(),
                o.dosage.as_str(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// `patient_id,date,ascore` rows for plotting.
pub fn curves_to_csv(curves: &[(String, ScoreCurve)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["patient_id", "date", "ascore"]).expect("in-memory write");
    for (pid, curve) in curves {
        for (d, s) in &curve.points {
            w.write_record([pid.as_str(), &d.format(DATE_FORMAT).to_string(), &s.to_string()])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Inverse of [`curves_to_csv`]; patients keep first-appearance order.
pub fn parse_curves_csv(text: &str) -> Result<Vec<(String, ScoreCurve)>> {
    const SRC: &str = "score curves";
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::parse(SRC, Some(1), e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["patient_id", "date", "ascore"] {
        return Err(Error::parse(SRC, Some(1), "expected header `patient_id,date,ascore`"));
    }
    let mut out: Vec<(String, ScoreCurve)> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::parse(SRC, e.position().map(|p| p.line()), e.to_string()))?;
        let line = row.position().map(|p| p.line());
        if row.len() != 3 {
            return Err(Error::parse(SRC, line, "expected 3 fields"));
        }
        let date = NaiveDate::parse_from_str(&row[1], DATE_FORMAT)
            .map_err(|e| Error::parse(SRC, line, format!("bad date `{}`: {e}", &row[1])))?;
        let score: f64 = row[2]
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite())
            .ok_or_else(|| Error::parse(SRC, line, format!("bad score `{}`", &row[2])))?;
        match out.last_mut() {
            Some((pid, curve)) if pid == &row[0] => {
                if curve.points.last().is_some_and(|(d, _)| *d >= date) {
                    return Err(Error::parse(SRC, line, "dates must increase within a patient"));
                }
                curve.points.push((date, score));
            }
            _ => {
                if out.iter().any(|(pid, _)| pid == &row[0]) {
                    return Err(Error::parse(SRC, line, format!("rows of patient `{}` are not contiguous", &row[0])));
                }
                out.push((row[0].to_string(), ScoreCurve { points: vec![(date, score)] }));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(n: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, n).unwrap()
    }

    fn order(name: &str, s: u32, e: u32, dose: &str) -> DrugOrder {
        DrugOrder::new(name, day(s), day(e), dose).unwrap()
    }

    fn kb(main: &[&str], symp: &[&str]) -> DrugKnowledgeBase {
        DrugKnowledgeBase {
            mdb: main.iter().map(|s| s.to_string()).collect(),
            sdb: symp.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn scores(curve: &ScoreCurve) -> Vec<f64> {
        curve.points.iter().map(|p| p.1).collect()
    }

    #[test]
    fn dosage_change_and_stop_fixture() {
        let h = PrescriptionHistory::new(
            "p",
            vec![
                order("A", 1, 1, "10mg"),
                order("B", 1, 2, "5mg"),
                order("A", 2, 2, "20mg"),
                order("A", 3, 3, "20mg"),
            ],
        )
        .unwrap();
        let curve = score_prescriptions(&h, &kb(&["a"], &[]), &ScoreWeights::default());
        let got = scores(&curve);
        let want = [1.1, 2.1, 2.2];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{got:?}");
        }
        let changes = score_changes(&h);
        assert_eq!(changes[1].1.dosage_changed, BTreeSet::from(["a".to_string()]));
        assert_eq!(changes[2].1.stopped, BTreeSet::from(["b".to_string()]));
    }

    #[test]
    fn single_date_unclassified() {
        let h = PrescriptionHistory::new("p", (0..7).map(|i| order(&format!("d{i}"), 4, 5, "x")).collect()).unwrap();
        let curve = score_prescriptions(&h, &kb(&[], &[]), &ScoreWeights::default());
        assert_eq!(curve.points.len(), 1);
        assert!((curve.points[0].1 - 0.7).abs() < 1e-12);
        let zero = ScoreWeights {
            w_main: 0.0,
            w_symp: 0.0,
            w_unk: 0.0,
        };
        assert!(scores(&score_prescriptions(&h, &kb(&[], &[]), &zero)).iter().all(|s| *s == 0.0));
    }

    #[test]
    fn history_validation() {
        assert!(PrescriptionHistory::new("p", vec![]).is_err());
        assert!(DrugOrder::new("a", day(3), day(2), "").is_err());
        let h = PrescriptionHistory::new("p", vec![order("a", 3, 4, ""), order("b", 1, 1, ""), order("c", 3, 3, "")]).unwrap();
        assert_eq!(h.dates(), &[day(1), day(3)]);
    }

    fn curve_from_increments(inc: &[f64]) -> ScoreCurve {
        let mut s = 0.0;
        ScoreCurve {
            points: inc
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    s += x;
                    (day(i as u32 + 1), s)
                })
                .collect(),
        }
    }

    #[test]
    fn split_fixtures() {
        let c = curve_from_increments(&[1.0, 0.1, 3.0, 0.2, 2.0]);
        assert_eq!(split_periods(&c, 3).unwrap().boundaries, vec![day(3), day(5)]);
        assert!(split_periods(&c, 1).unwrap().boundaries.is_empty());
        let flat = curve_from_increments(&[1.0; 4]);
        assert_eq!(split_periods(&flat, 2).unwrap().boundaries, vec![day(2)]);
        assert!(split_periods(&c, 6).is_err());
        assert!(split_periods(&c, 0).is_err());
        // 0.1-steps accumulate rounding noise; still a tie
        let noisy = curve_from_increments(&[0.1; 10]);
        assert_eq!(split_periods(&noisy, 3).unwrap().boundaries, vec![day(2), day(3)]);
    }

    #[test]
    fn period_assignment() {
        let split = PeriodSplit {
            n_periods: 3,
            boundaries: vec![day(5), day(9)],
        };
        assert_eq!(assign_period(&order("a", 1, 2, ""), &split), 1);
        assert_eq!(assign_period(&order("a", 5, 6, ""), &split), 2);
        assert_eq!(assign_period(&order("a", 9, 9, ""), &split), 3);
        assert_eq!(assign_period(&order("a", 20, 20, ""), &split), 3);
        let one = PeriodSplit {
            n_periods: 1,
            boundaries: vec![],
        };
        assert_eq!(assign_period(&order("a", 20, 20, ""), &one), 1);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let text = "patient_id,drug_name,startdate,enddate,dosage\n\
                    p2,Aspirin,2020-01-01,2020-01-03,81 mg\n\
                    p1,heparin,2020-01-02,2020-01-02,5000 units\n";
        let hs = parse_prescriptions_csv(text).unwrap();
        assert_eq!(hs.len(), 2);
        assert_eq!(hs[0].patient_id, "p1");
        assert_eq!(hs[1].orders()[0].name, "aspirin");
        assert_eq!(parse_prescriptions_csv(&prescriptions_to_csv(&hs)).unwrap(), hs);

        let bad = "patient_id,drug_name,startdate,enddate,dosage\np1,a,2020-01-05,2020-01-01,x\n";
        match parse_prescriptions_csv(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, Some(2)),
            other => panic!("{other:?}"),
        }
        assert!(parse_prescriptions_csv("a,b\n").is_err());
        assert!(parse_prescriptions_csv("patient_id,drug_name,startdate,enddate,dosage\np,a,2020-13-01,2020-01-01,x\n").is_err());

        let curves: Vec<_> = hs
            .iter()
            .map(|h| (h.patient_id.clone(), score_prescriptions(h, &kb(&[], &[]), &ScoreWeights::default())))
            .collect();
        assert_eq!(parse_curves_csv(&curves_to_csv(&curves)).unwrap(), curves);
    }
}

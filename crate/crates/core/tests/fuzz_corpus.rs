//! Every checked-in fuzz seed must parse with the decoder its target drives.

use std::fs;
use std::path::PathBuf;

use emr_regimens::cluster::{parse_assignment_csv, BitCode, CodeMatrix};
use emr_regimens::cohort::{parse_cohort_csv, parse_cohort_json, EncodedMatrix};
use emr_regimens::drugkb::parse_kb_tsv;
use emr_regimens::mvrbm::MvRbmParams;
use emr_regimens::periods::{parse_curves_csv, parse_prescriptions_csv};
use emr_regimens::pipeline::{PeriodTable, RunConfig, TreeIndex};
use emr_regimens::recommend::recommendations_from_json;
use emr_regimens::regimen::tree_from_json;
use emr_regimens::synthgen::GroundTruth;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn check(target: &str, parse: impl Fn(&str) -> Result<(), String>) {
    for (name, text) in seeds(target) {
        if let Err(e) = parse(&text) {
            panic!("{target}/{name}: {e}");
        }
    }
}

fn ok<T, E: ToString>(r: Result<T, E>) -> Result<(), String> {
    r.map(|_| ()).map_err(|e| e.to_string())
}

#[test]
fn every_seed_parses() {
    check("cohort_json", |s| ok(parse_cohort_json(s)));
    check("cohort_csv", |s| match s.split_once('\0') {
        Some((t, sym)) => ok(parse_cohort_csv(t, Some(sym))),
        None => ok(parse_cohort_csv(s, None)),
    });
    check("drug_kb_tsv", |s| ok(parse_kb_tsv(s)));
    check("prescriptions_csv", |s| ok(parse_prescriptions_csv(s)));
    check("score_curves_csv", |s| ok(parse_curves_csv(s)));
    check("model_json", |s| ok(MvRbmParams::from_json(s)));
    check("encoded_matrix_json", |s| ok(EncodedMatrix::from_json(s)));
    check("codes_json", |s| ok(CodeMatrix::from_json(s)));
    check("bit_string", |s| ok(BitCode::from_bit_string(s)));
    check("assignment_csv", |s| ok(parse_assignment_csv(s)));
    check("regimen_tree_json", |s| ok(tree_from_json(s)));
    check("run_config_json", |s| ok(RunConfig::from_json(s)));
    check("periods_json", |s| ok(PeriodTable::from_json(s)));
    check("trees_json", |s| ok(TreeIndex::from_json(s)));
    check("recommendations_json", |s| ok(recommendations_from_json(s)));
    check("truth_json", |s| ok(GroundTruth::from_json(s)));
}

#[test]
fn every_target_has_seeds() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz");
    for entry in fs::read_dir(root.join("fuzz_targets")).unwrap() {
        let name = entry.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned();
        seeds(&name);
    }
}

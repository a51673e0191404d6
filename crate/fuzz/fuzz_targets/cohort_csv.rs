#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::cohort::parse_cohort_csv;

// table and symptom sidecar separated by a NUL byte
fuzz_target!(|data: &str| {
    match data.split_once('\0') {
        Some((table, symptoms)) => {
            let _ = parse_cohort_csv(table, Some(symptoms));
        }
        None => {
            let _ = parse_cohort_csv(data, None);
        }
    }
});

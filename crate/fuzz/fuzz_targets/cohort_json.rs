#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::cohort::parse_cohort_json;

fuzz_target!(|data: &str| {
    let _ = parse_cohort_json(data);
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::cluster::parse_assignment_csv;

fuzz_target!(|data: &str| {
    if let Ok((ids, a)) = parse_assignment_csv(data) {
        assert_eq!(ids.len(), a.labels.len());
        assert!(a.labels.iter().all(|&l| l < a.k));
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::periods::parse_prescriptions_csv;

fuzz_target!(|data: &str| {
    if let Ok(histories) = parse_prescriptions_csv(data) {
        for h in &histories {
            assert!(!h.dates().is_empty());
        }
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::periods::parse_curves_csv;

fuzz_target!(|data: &str| {
    let _ = parse_curves_csv(data);
});

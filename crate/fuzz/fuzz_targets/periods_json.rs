#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::pipeline::PeriodTable;

fuzz_target!(|data: &str| {
    let _ = PeriodTable::from_json(data);
});

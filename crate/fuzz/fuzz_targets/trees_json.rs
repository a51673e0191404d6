#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::pipeline::TreeIndex;

fuzz_target!(|data: &str| {
    if let Ok(index) = TreeIndex::from_json(data) {
        let _ = index.table();
    }
});

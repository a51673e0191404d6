#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::recommend::recommendations_from_json;

fuzz_target!(|data: &str| {
    let _ = recommendations_from_json(data);
});

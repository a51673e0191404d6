#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::synthgen::GroundTruth;

fuzz_target!(|data: &str| {
    let _ = GroundTruth::from_json(data);
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::cohort::EncodedMatrix;

fuzz_target!(|data: &str| {
    let _ = EncodedMatrix::from_json(data);
});

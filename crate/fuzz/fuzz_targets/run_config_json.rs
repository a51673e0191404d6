#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::pipeline::RunConfig;

fuzz_target!(|data: &str| {
    let _ = RunConfig::from_json(data);
});

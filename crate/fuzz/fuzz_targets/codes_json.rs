#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::cluster::CodeMatrix;

fuzz_target!(|data: &str| {
    if let Ok(m) = CodeMatrix::from_json(data) {
        assert_eq!(CodeMatrix::from_json(&m.to_json()).unwrap(), m);
    }
});

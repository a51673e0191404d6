#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::cluster::BitCode;

fuzz_target!(|data: &str| {
    if let Ok(c) = BitCode::from_bit_string(data) {
        assert_eq!(c.to_bit_string(), data);
    }
});

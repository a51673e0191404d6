#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::mvrbm::MvRbmParams;

fuzz_target!(|data: &str| {
    if let Ok(p) = MvRbmParams::from_json(data) {
        let again = MvRbmParams::from_json(&p.to_json()).unwrap();
        assert_eq!(again.to_json(), p.to_json());
    }
});

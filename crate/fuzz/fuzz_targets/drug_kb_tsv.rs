#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::drugkb::parse_kb_tsv;

fuzz_target!(|data: &str| {
    let _ = parse_kb_tsv(data);
});

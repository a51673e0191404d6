#![no_main]

use libfuzzer_sys::fuzz_target;
use emr_regimens::regimen::{emit_dot, tree_from_json, tree_to_json};

fuzz_target!(|data: &str| {
    if let Ok(tree) = tree_from_json(data) {
        let _ = emit_dot(tree.as_ref());
        assert_eq!(tree_from_json(&tree_to_json(tree.as_ref())).unwrap(), tree);
    }
});

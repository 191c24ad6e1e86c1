#![no_main]

use libfuzzer_sys::fuzz_target;
use pinnlab::tapenet::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = Checkpoint::from_json(data) {
        let net = ck.net().expect("validated on load");
        assert_eq!(net.len(), ck.params.len());
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use pinnlab_cli::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = ExperimentConfig::from_json(data) {
        // anything accepted must survive a round trip
        let again = ExperimentConfig::from_json(cfg.to_json().as_bytes()).expect("re-parse");
        assert_eq!(again, cfg);
    }
});

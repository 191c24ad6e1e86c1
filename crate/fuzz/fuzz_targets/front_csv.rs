#![no_main]

use libfuzzer_sys::fuzz_target;
use pinnlab_cli::artifacts::parse_front_csv;

fuzz_target!(|data: &[u8]| {
    let _ = parse_front_csv(data);
});

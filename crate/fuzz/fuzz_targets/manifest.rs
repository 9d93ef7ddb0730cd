#![no_main]

use lfrelay_cli::RunManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = RunManifest::from_slice(data);
});

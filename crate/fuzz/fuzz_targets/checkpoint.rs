#![no_main]

use lfrelay_rl::checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(state) = checkpoint::from_slice(data) {
        let bytes = checkpoint::to_bytes(&state).expect("encodes");
        checkpoint::from_slice(&bytes).expect("decodes again");
    }
});

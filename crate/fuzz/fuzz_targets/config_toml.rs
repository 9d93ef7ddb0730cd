#![no_main]

use lfrelay_cli::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        // anything accepted must survive its own serialization
        let again = cfg.to_toml_string().expect("serializes");
        let back = ExperimentConfig::from_toml_str(&again).expect("reparses");
        assert_eq!(back.hash(), cfg.hash());
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use twisted_eisenstein::config::RunConfig;

// Whole-document parse and validation; accepted configs must round-trip.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml_str(text) {
        let again = toml::to_string(&cfg).expect("validated configs serialize");
        assert_eq!(RunConfig::from_toml_str(&again).expect("round trip"), cfg);
    }
});

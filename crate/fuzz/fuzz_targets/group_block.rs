#![no_main]

use libfuzzer_sys::fuzz_target;
use twisted_eisenstein::config::RunConfig;

// A `[group]` table under a fixed trivial command: exercises vertex and
// cusp decoding and group construction.
fuzz_target!(|data: &[u8]| {
    let Ok(body) = std::str::from_utf8(data) else { return };
    let text = format!("[group]\n{body}\n[output]\npath = \"f.json\"\n[command]\nkind = \"group_info\"\n");
    if let Ok(cfg) = RunConfig::from_toml_str(&text) {
        let g = cfg.build_group().expect("validated groups build");
        assert!(!g.cusps().is_empty());
    }
});

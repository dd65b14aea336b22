#![no_main]

use libfuzzer_sys::fuzz_target;
use twisted_eisenstein::config::RunConfig;

// A `[representation]` table over Γ(2): matrix decoding and the inverse and
// relation checks.
fuzz_target!(|data: &[u8]| {
    let Ok(body) = std::str::from_utf8(data) else { return };
    let text = format!(
        "[group]\nbuiltin = \"gamma2\"\n[representation]\n{body}\n[output]\npath = \"f.json\"\n[command]\nkind = \"group_info\"\n"
    );
    if let Ok(cfg) = RunConfig::from_toml_str(&text) {
        let g = cfg.build_group().expect("builtin group");
        let rep = cfg.build_representation(&g).expect("validated representations build");
        assert!(rep.dim() > 0);
    }
});

#![no_main]

use std::path::Path;

use biphoton::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml(src, Path::new("fuzz.cfg")) {
        // a config that parsed must survive its own dump
        let again = RunConfig::from_toml(&cfg.dump(), Path::new("dump.cfg")).unwrap();
        assert_eq!(again, cfg);
    }
});

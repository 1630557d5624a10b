//! Replays the checked-in fuzz seeds through the same checks as the fuzz targets.

use std::path::{Path, PathBuf};

use biphoton::config::RunConfig;
use biphoton::export::decode_map;

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "no seeds in {}", dir.display());
    files.into_iter().map(|p| (p.clone(), std::fs::read(p).unwrap())).collect()
}

#[test]
fn config_seeds_parse_and_round_trip() {
    for (path, data) in corpus("config_parse") {
        let src = std::str::from_utf8(&data).unwrap();
        let cfg = RunConfig::from_toml(src, &path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(RunConfig::from_toml(&cfg.dump(), &path).unwrap(), cfg);
    }
}

#[test]
fn map_seeds_decode_or_fail_cleanly() {
    let mut decoded = 0;
    for (path, data) in corpus("map_decode") {
        let n = u32::from_le_bytes(data[..4].try_into().unwrap()) as usize;
        let (sidecar, binary) = data[4..].split_at(n);
        match decode_map(sidecar, binary) {
            Ok(map) => {
                assert_eq!(map.psi.len(), map.header.n_x * map.header.n_t);
                assert_eq!(map.intensity[1], map.psi[1].norm_sqr());
                decoded += 1;
            }
            Err(e) => assert!(path.ends_with("map_truncated"), "{}: {e}", path.display()),
        }
    }
    assert_eq!(decoded, 2);
}

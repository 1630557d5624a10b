#![no_main]

use biphoton::export::decode_map;
use libfuzzer_sys::fuzz_target;

// Input: u32 LE sidecar length, sidecar JSON, then the binary planes.
fuzz_target!(|data: &[u8]| {
    if data.len() < 4 {
        return;
    }
    let n = u32::from_le_bytes(data[..4].try_into().unwrap()) as usize;
    let rest = &data[4..];
    if n > rest.len() {
        return;
    }
    let (sidecar, binary) = rest.split_at(n);
    if let Ok(map) = decode_map(sidecar, binary) {
        assert_eq!(map.psi.len(), map.header.n_x * map.header.n_t);
        assert_eq!(map.delta_x.len(), map.header.n_x);
    }
});

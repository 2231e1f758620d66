#![no_main]

use doamap::formats::{parse_snapshots, write_snapshots};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(snap) = parse_snapshots(text) else {
        return;
    };
    // Printing is lossy once, then stable.
    let once = write_snapshots(&snap);
    let again = parse_snapshots(&once).expect("writer output must parse");
    assert_eq!(write_snapshots(&again), once);
});

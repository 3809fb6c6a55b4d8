#![no_main]

use libfuzzer_sys::fuzz_target;
use topofilter::io::{ingest_str, IngestOptions};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ingest_str(text, None, IngestOptions::default());
        let _ = ingest_str(text, None, IngestOptions { improper: true });
    }
});

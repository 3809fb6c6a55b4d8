#![no_main]

use libfuzzer_sys::fuzz_target;
use topofilter::report::SuiteReport;

// Anything that parses must survive a second round trip unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = SuiteReport::from_json(text) {
        let once = report.to_json().expect("parsed reports serialize");
        let again = SuiteReport::from_json(&once).expect("serialized reports parse");
        assert_eq!(again.to_json().unwrap(), once);
    }
});

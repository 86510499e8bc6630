#![no_main]
use gridcf::dataset::SolveDataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ds) = SolveDataset::from_jsonl(text) {
        let back = SolveDataset::from_jsonl(&ds.to_jsonl()).expect("re-encoded dataset parses");
        assert_eq!(back.len(), ds.len());
    }
});

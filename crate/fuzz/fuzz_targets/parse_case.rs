#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(case) = gridcf::case::parse_case(text) {
        // Anything accepted must survive a canonical round trip.
        let again = gridcf::case::parse_case(&gridcf::case::serialize_case(&case)).expect("canonical form parses");
        assert_eq!(case.content_id(), again.content_id());
    }
});

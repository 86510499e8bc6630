#![no_main]
use gridcf_service::decode::{decode_case, MATPOWER_TYPES, NATIVE_TYPES};
use libfuzzer_sys::fuzz_target;

// First byte picks the content type, the rest is the request body.
fuzz_target!(|data: &[u8]| {
    let Some((&pick, body)) = data.split_first() else { return };
    let types: Vec<&str> = NATIVE_TYPES.iter().chain(MATPOWER_TYPES.iter()).copied().chain(["application/json"]).collect();
    let content_type = types[pick as usize % types.len()];
    let _ = decode_case(content_type, body, "fuzz");
});

#![no_main]
use gridcf_service::decode::decode_json;
use gridcf_service::model::{ExplainRequest, SolveRequest};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = decode_json::<ExplainRequest>(data);
    let _ = decode_json::<SolveRequest>(data);
});

#![no_main]

use confinv::catalog::{parse_metric_unchecked, render_metric};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = parse_metric_unchecked(text) else {
        return;
    };
    let rendered = render_metric(&spec);
    let back = parse_metric_unchecked(&rendered)
        .unwrap_or_else(|err| panic!("{rendered:?} does not reparse: {err}"));
    assert_eq!(back, spec);
    let _ = spec.validate(4, 1);
});

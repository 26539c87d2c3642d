#![no_main]

use confinv::expr::parse;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(e) = parse(text) else { return };
    let printed = e.to_string();
    let back = parse(&printed).unwrap_or_else(|err| panic!("{printed:?} does not reparse: {err}"));
    assert_eq!(back, e, "{printed:?}");
});

//! Replays the fuzzing corpus through the same checks as the fuzz targets.

use std::path::PathBuf;

use confinv::catalog::{parse_metric_unchecked, render_metric};
use confinv::expr::parse;

fn corpus(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|f| f.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty());
    files
        .into_iter()
        .map(|p| {
            (
                p.clone(),
                String::from_utf8_lossy(&std::fs::read(&p).unwrap()).into_owned(),
            )
        })
        .collect()
}

#[test]
fn expression_corpus() {
    for (path, text) in corpus("parse_expr") {
        if let Ok(e) = parse(&text) {
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{}", path.display());
        }
    }
}

#[test]
fn metric_corpus() {
    let mut accepted = 0;
    for (path, text) in corpus("parse_metric") {
        if let Ok(spec) = parse_metric_unchecked(&text) {
            accepted += 1;
            let back = parse_metric_unchecked(&render_metric(&spec)).unwrap();
            assert_eq!(back, spec, "{}", path.display());
            let _ = spec.validate(4, 1);
        }
    }
    assert!(accepted >= 5);
}

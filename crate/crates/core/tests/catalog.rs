use confinv::catalog::*;
use confinv::conformal::{weyl_square, ConformalError};
use confinv::expr::*;
use confinv::geometry::GeometryError;

const SCHWARZSCHILD: &str = r#"
# Schwarzschild exterior
name = "schwarzschild"
coords = t, r, theta, phi
params = M
signature = -+++
g[0][0] = -(1 - 2*M/r)
g[1][1] = 1/(1 - 2*M/r)
g[2][2] = r^2
g[3][3] = r^2*sin(theta)^2
domain t = 0..0
domain r = 3..10
domain theta = 0.3..2.8
domain phi = 0.1..6
default M = 1
exclude positive 1 - 2*M/r
exclude positive sin(theta)
"#;

#[test]
fn builtin_examples() {
    let s = builtin("schwarzschild").unwrap();
    assert_eq!(s.g[2][2], parse("r^2").unwrap());
    let g = builtin("godel").unwrap();
    assert_eq!(g.g[0][2], parse("-sqrt(2)*r^2/(2*a)").unwrap());
    assert_eq!(g.g[2][0], g.g[0][2]);
    let m = builtin("minkowski").unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let want = if i != j {
                0
            } else if i == 0 {
                -1
            } else {
                1
            };
            assert_eq!(m.g[i][j], Expr::int(want));
        }
    }
    assert!(matches!(
        builtin("kerr"),
        Err(CatalogError::UnknownMetric(_))
    ));
}

#[test]
fn default_domains() {
    let s = builtin("reissner-nordstrom").unwrap().sample_domain();
    assert_eq!(s.interval("r"), Some(Interval::new(3.0, 10.0)));
    assert_eq!(s.interval("q"), Some(Interval::point(0.5)));
    assert_eq!(s.interval("t"), Some(Interval::point(0.0)));
    let g = builtin("godel").unwrap().sample_domain();
    assert_eq!(g.interval("r"), Some(Interval::new(0.2, 1.5)));
    assert_eq!(g.interval("a"), Some(Interval::point(1.0)));
    let bv = builtin("barriola-vilenkin").unwrap().sample_domain();
    assert_eq!(bv.interval("k"), Some(Interval::point(0.5)));
    assert_eq!(bv.interval("theta"), Some(Interval::new(0.3, 2.8)));
}

#[test]
fn handwritten_file_matches_builtin() {
    let spec = parse_metric(SCHWARZSCHILD).unwrap();
    assert_eq!(spec, builtin("schwarzschild").unwrap());
}

#[test]
fn save_then_load_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let path = dir.path().join(format!("{name}.metric"));
        save_metric(&spec, &path).unwrap();
        assert_eq!(load_metric(&path).unwrap(), spec, "{name}");
    }
}

#[test]
fn symmetry_conflicts_and_duplicates() {
    let text = "name = \"x\"\ncoords = t, x, y, z\nsignature = -+++\ng[0][0] = -1\ng[0][1] = x\ng[1][0] = y\n";
    match parse_metric_unchecked(text) {
        Err(CatalogError::SymmetryConflict {
            line: 6, first: 5, ..
        }) => {}
        other => panic!("{other:?}"),
    }
    let text = "name = \"x\"\ncoords = t, x, y, z\nsignature = -+++\ng[0][1] = x\ng[1][0] = x\n";
    assert!(matches!(
        parse_metric_unchecked(text),
        Err(CatalogError::Duplicate { line: 5, .. })
    ));
}

#[test]
fn malformed_files() {
    let base = "name = \"x\"\ncoords = t, x\nsignature = -+\n";
    let cases = [
        ("g[2][0] = 1\n", 4),
        ("g[0][0] = (1 +\n", 4),
        ("domain x = 2..1\n", 4),
        ("default M = big\n", 4),
        ("wibble = 3\n", 4),
        ("\n\nexclude sometimes x\n", 6),
    ];
    for (extra, line) in cases {
        let err = parse_metric_unchecked(&format!("{base}{extra}")).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.starts_with(&format!("line {line}:")),
            "{extra:?}: {msg}"
        );
    }
    assert!(matches!(
        parse_metric_unchecked("coords = t\nsignature = -\n"),
        Err(CatalogError::Missing("name"))
    ));
    assert!(matches!(
        parse_metric_unchecked("name = \"x\"\ncoords = t, x\nsignature = -++\n"),
        Err(CatalogError::Invalid(GeometryError::SignatureLength { .. }))
    ));
}

#[test]
fn degenerate_or_mis_signed_metrics_are_rejected() {
    let degenerate = "name = \"x\"\ncoords = t, x\nsignature = -+\ng[0][0] = -1\ndomain t = 0..1\ndomain x = 0..1\n";
    assert!(matches!(
        parse_metric(degenerate),
        Err(CatalogError::Invalid(GeometryError::Degenerate(_)))
    ));
    let wrong = "name = \"x\"\ncoords = t, x\nsignature = ++\ng[0][0] = -1\ng[1][1] = 1\ndomain t = 0..1\ndomain x = 0..1\n";
    assert!(matches!(
        parse_metric(wrong),
        Err(CatalogError::Invalid(
            GeometryError::SignatureMismatch { .. }
        ))
    ));
}

#[test]
fn three_coordinates_load_but_have_no_weyl_square() {
    let text = "name = \"cone\"\ncoords = t, r, phi\nparams = k\nsignature = -++\n\
                g[0][0] = -1\ng[1][1] = 1\ng[2][2] = k^2*r^2\n\
                domain t = 0..1\ndomain r = 1..2\ndomain phi = 0..6\ndefault k = 0.5\n";
    let spec = parse_metric(text).unwrap();
    assert_eq!(spec.dim(), 3);
    assert!(matches!(
        weyl_square(&spec),
        Err(ConformalError::Geometry(GeometryError::Dimension {
            needed: 4,
            found: 3
        }))
    ));
}

#[test]
fn line_elements_halve_cross_terms() {
    let g = LineElement::new(&["u", "v"])
        .term("u", "v", "-2")
        .term("v", "u", "4*v")
        .components();
    assert_eq!(g[0][1], parse("-1 + 2*v").unwrap());
    assert_eq!(g[1][0], g[0][1]);
    assert!(g[0][0].is_zero());
}

#[test]
fn reference_rows() {
    for name in TABLE {
        let row = reference_row(name).unwrap();
        assert_eq!(row.name, name);
    }
    assert!(reference_row("minkowski").is_none());
}

use confinv::catalog::{builtin, LineElement, BUILTINS};
use confinv::expr::*;
use confinv::geometry::*;

const TOL: f64 = 1e-8;

fn p(s: &str) -> Expr {
    parse(s).unwrap()
}

/// Checks `|a - b| <= tol * (1 + |a| + |b|)` for every pair at `n` domain points.
fn agree(spec: &MetricSpec, pairs: &[(Expr, Expr)], n: usize, tol: f64) -> Result<(), String> {
    let exprs: Vec<Expr> = pairs
        .iter()
        .flat_map(|(a, b)| [a.clone(), b.clone()])
        .collect();
    let prog = Program::compile(&exprs);
    let mut sampler = spec.sampler(11);
    for b in sampler.points_for(&exprs, n).map_err(|e| e.to_string())? {
        let v = prog.eval(&b).map_err(|e| e.to_string())?;
        for (k, pair) in v.chunks(2).enumerate() {
            let (x, y) = (pair[0], pair[1]);
            let close = (x - y).abs() <= tol * (1.0 + x.abs() + y.abs());
            if !close {
                return Err(format!(
                    "{} vs {} at {b:?}: {x} != {y}",
                    pairs[k].0, pairs[k].1
                ));
            }
        }
    }
    Ok(())
}

fn vanishes(spec: &MetricSpec, exprs: &[Expr], n: usize, tol: f64) -> Result<(), String> {
    let pairs: Vec<_> = exprs.iter().map(|e| (e.clone(), Expr::zero())).collect();
    agree(spec, &pairs, n, tol)
}

fn quad(n: usize) -> impl Iterator<Item = [usize; 4]> {
    (0..n * n * n * n).map(move |k| [k / (n * n * n), k / (n * n) % n, k / n % n, k % n])
}

fn sphere() -> MetricSpec {
    MetricSpec {
        name: "sphere".into(),
        coords: vec!["theta".into(), "phi".into(), "x".into()],
        params: vec![],
        signature: "+++".into(),
        g: LineElement::new(&["theta", "phi", "x"])
            .term("theta", "theta", "1")
            .term("phi", "phi", "sin(theta)^2")
            .term("x", "x", "1")
            .components(),
        domain: SampleDomain::new()
            .with("theta", 0.3, 2.8)
            .with("phi", 0.1, 6.0)
            .with("x", 0.1, 1.0)
            .exclude(Exclusion::Positive(p("sin(theta)"))),
        defaults: Default::default(),
        jet_order: 0,
    }
}

#[test]
fn inverse_examples() {
    let flat = builtin("minkowski").unwrap();
    let inv = inverse_metric(&flat).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(inv.get(&[i, j]), flat.component(i, j));
        }
    }
    let s = builtin("schwarzschild").unwrap();
    let inv = inverse_metric(&s).unwrap();
    assert_eq!(
        simplify(&(inv.get(&[0, 0]) * (Expr::one() - p("2*M/r")))),
        Expr::int(-1)
    );
}

#[test]
fn inverse_times_metric_is_identity() {
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let mut geo = Geometry::new(&spec).unwrap();
        let inv = geo.inverse().unwrap();
        let n = spec.dim();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let prod = Expr::add_all((0..n).map(|k| inv.get(&[i, k]) * spec.component(k, j)));
                pairs.push((prod, Expr::int((i == j) as i64)));
            }
        }
        agree(&spec, &pairs, 8, 1e-10).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn determinant_examples() {
    assert_eq!(
        metric_det(&builtin("minkowski").unwrap()).unwrap(),
        Expr::int(-1)
    );
    let cases = [
        ("schwarzschild", "-r^4*sin(theta)^2"),
        ("barriola-vilenkin", "-k^4*r^4*sin(theta)^2"),
    ];
    for (name, expected) in cases {
        let spec = builtin(name).unwrap();
        let det = metric_det(&spec).unwrap();
        let mut sampler = spec.sampler(3);
        for b in sampler.points(8).unwrap() {
            let n = spec.dim();
            let a: Vec<f64> = spec
                .g
                .iter()
                .flatten()
                .map(|c| evaluate(c, &b).unwrap())
                .collect();
            let numeric = numeric_det(&a, n);
            let got = evaluate(&det, &b).unwrap();
            let want = evaluate(&p(expected), &b).unwrap();
            assert!(
                (got - numeric).abs() <= 1e-10 * numeric.abs(),
                "{name}: {got} vs {numeric}"
            );
            assert!(
                (got - want).abs() <= 1e-10 * want.abs(),
                "{name}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn christoffel_examples() {
    let flat = builtin("minkowski").unwrap();
    assert!(christoffel(&flat).unwrap().is_zero());

    let s = builtin("schwarzschild").unwrap();
    let gamma = christoffel(&s).unwrap();
    assert_eq!(
        simplify(&(gamma.get(&[1, 0, 0]) - p("M*(r - 2*M)/r^3"))),
        Expr::zero()
    );

    let sph = christoffel(&sphere()).unwrap();
    assert_eq!(
        simplify(&(sph.get(&[0, 1, 1]) + p("sin(theta)*cos(theta)"))),
        Expr::zero()
    );
    assert_eq!(
        simplify(&(sph.get(&[1, 0, 1]) - p("cos(theta)/sin(theta)"))),
        Expr::zero()
    );
}

#[test]
fn christoffel_is_symmetric() {
    for name in BUILTINS {
        let gamma = christoffel(&builtin(name).unwrap()).unwrap();
        for idx in gamma.indices() {
            assert_eq!(
                gamma.get(&idx),
                gamma.get(&[idx[0], idx[2], idx[1]]),
                "{name} {idx:?}"
            );
        }
    }
}

#[test]
fn schwarzschild_riemann_component() {
    let s = builtin("schwarzschild").unwrap();
    let mut geo = Geometry::new(&s).unwrap();
    let low = geo.riemann_lower().unwrap();
    assert_eq!(
        simplify(&(low.get(&[0, 1, 0, 1]) - p("-2*M/r^3"))),
        Expr::zero()
    );
    let mixed = geo.riemann().unwrap();
    assert_eq!(
        simplify(&(mixed.get(&[1, 0, 1, 0]) - p("-2*M*(r - 2*M)/r^4"))),
        Expr::zero()
    );
    assert!(riemann(&builtin("minkowski").unwrap()).unwrap().is_zero());
}

#[test]
fn riemann_symmetries_and_bianchi() {
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let n = spec.dim();
        let mut geo = Geometry::new(&spec).unwrap();
        let r = geo.riemann().unwrap();
        let mut low = r.clone();
        low = geo.raise_lower(&low, 0).unwrap();
        assert_eq!(low.variance()[0], Variance::Lower);

        let mut pairs = Vec::new();
        let mut bianchi = Vec::new();
        for [i, j, k, l] in quad(n) {
            pairs.push((r.get(&[i, j, k, l]).clone(), -r.get(&[i, j, l, k])));
            pairs.push((low.get(&[i, j, k, l]).clone(), -low.get(&[j, i, k, l])));
            pairs.push((
                low.get(&[i, j, k, l]).clone(),
                low.get(&[k, l, i, j]).clone(),
            ));
            bianchi.push(r.get(&[i, j, k, l]) + r.get(&[i, k, l, j]) + r.get(&[i, l, j, k]));
        }
        agree(&spec, &pairs, 8, TOL).unwrap_or_else(|e| panic!("{name}: {e}"));
        vanishes(&spec, &bianchi, 8, TOL).unwrap_or_else(|e| panic!("{name} bianchi: {e}"));
    }
}

#[test]
fn weyl_is_traceless() {
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let mut geo = Geometry::new(&spec).unwrap();
        let c = geo.weyl().unwrap();
        let raised = geo.raise_lower(&c, 0).unwrap();
        let trace = contract(&raised, 0, 2).unwrap();
        assert_eq!(trace.rank(), 2);
        vanishes(&spec, trace.components(), 8, TOL).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn ricci_flat_weyl_is_riemann() {
    for name in ["schwarzschild", "minkowski"] {
        let spec = builtin(name).unwrap();
        let mut geo = Geometry::new(&spec).unwrap();
        assert!(geo.ricci().unwrap().is_zero());
        let c = geo.weyl().unwrap();
        let low = geo.riemann_lower().unwrap();
        let pairs: Vec<_> = c
            .indices()
            .map(|i| (c.get(&i).clone(), low.get(&i).clone()))
            .collect();
        agree(&spec, &pairs, 8, TOL).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn conformally_flat_weyl_vanishes() {
    let coords = ["t", "x", "y", "z"];
    let f = "exp(x^2/5)";
    let spec = MetricSpec {
        name: "conformally flat".into(),
        coords: coords.iter().map(|c| c.to_string()).collect(),
        params: vec![],
        signature: "-+++".into(),
        g: LineElement::new(&coords)
            .term("t", "t", &format!("-{f}"))
            .term("x", "x", f)
            .term("y", "y", f)
            .term("z", "z", f)
            .components(),
        domain: coords
            .iter()
            .fold(SampleDomain::new(), |d, c| d.with(c, -1.0, 1.0)),
        defaults: Default::default(),
        jet_order: 0,
    };
    spec.validate(8, 1).unwrap();
    let c = weyl(&spec).unwrap();
    vanishes(&spec, c.components(), 8, 1e-8).unwrap();
}

#[test]
fn ricci_scalar_examples() {
    let cases = [
        ("schwarzschild", "0"),
        ("godel", "-1/a^2"),
        ("barriola-vilenkin", "2*(1 - k^2)/(k^2*r^2)"),
    ];
    for (name, expected) in cases {
        let spec = builtin(name).unwrap();
        let r = ricci_scalar(&spec).unwrap();
        let mut sampler = spec.sampler(5);
        assert!(
            equivalent(&r, &p(expected), &mut sampler, 16, 1e-10).unwrap(),
            "{name}: {r}"
        );
    }
}

#[test]
fn kretschmann_examples() {
    let cases = [
        ("schwarzschild", "48*M^2/r^6"),
        (
            "reissner-nordstrom",
            "8*(7*q^4 - 12*M*q^2*r + 6*M^2*r^2)/r^8",
        ),
        ("minkowski", "0"),
    ];
    for (name, expected) in cases {
        let spec = builtin(name).unwrap();
        let k = kretschmann(&spec).unwrap();
        let mut sampler = spec.sampler(5);
        assert!(
            equivalent(&k, &p(expected), &mut sampler, 16, 1e-10).unwrap(),
            "{name}: {k}"
        );
    }
}

#[test]
fn ricci_is_contracted_riemann() {
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let mut geo = Geometry::new(&spec).unwrap();
        let r = geo.riemann().unwrap();
        let ric = geo.ricci().unwrap();
        let c = contract(&r, 0, 2).unwrap();
        let pairs: Vec<_> = ric
            .indices()
            .map(|i| (ric.get(&i).clone(), c.get(&i).clone()))
            .collect();
        agree(&spec, &pairs, 8, TOL).unwrap_or_else(|e| panic!("{name}: {e}"));
        for i in ric.indices() {
            assert_eq!(ric.get(&i), ric.get(&[i[1], i[0]]));
        }
    }
}

#[test]
fn raise_then_lower_and_delta_trace() {
    let spec = builtin("godel").unwrap();
    let mut geo = Geometry::new(&spec).unwrap();
    let ric = geo.ricci().unwrap();
    let up = geo.raise_lower(&ric, 1).unwrap();
    assert_eq!(up.variance(), &[Variance::Lower, Variance::Upper]);
    let back = geo.raise_lower(&up, 1).unwrap();
    let pairs: Vec<_> = ric
        .indices()
        .map(|i| (ric.get(&i).clone(), back.get(&i).clone()))
        .collect();
    agree(&spec, &pairs, 8, 1e-10).unwrap();

    let n = 4;
    let delta: Vec<Expr> = (0..n * n)
        .map(|k| Expr::int((k / n == k % n) as i64))
        .collect();
    let delta = ComponentTensor::new(
        spec.coords.clone(),
        vec![Variance::Upper, Variance::Lower],
        delta,
    );
    let tr = contract(&delta, 0, 1).unwrap();
    assert_eq!(tr.rank(), 0);
    assert_eq!(tr.components()[0], Expr::int(4));

    let lower = ComponentTensor::zeros(spec.coords.clone(), vec![Variance::Lower, Variance::Lower]);
    assert!(matches!(
        contract(&lower, 0, 1),
        Err(GeometryError::VarianceMismatch { .. })
    ));
}

#[test]
fn weyl_needs_four_dimensions() {
    assert!(matches!(
        weyl(&sphere()),
        Err(GeometryError::Dimension { .. })
    ));
    assert!(ricci_scalar(&sphere()).is_ok());
}

#[test]
fn symbolic_matches_finite_differences() {
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let mut geo = Geometry::new(&spec).unwrap();
        let values = [
            (Scalar::R, geo.ricci_scalar().unwrap()),
            (Scalar::K, geo.kretschmann().unwrap()),
        ];
        let mut sampler = spec.sampler(21);
        for at in sampler.points(3).unwrap() {
            for (scalar, e) in &values {
                let exact = evaluate(e, &at).unwrap();
                let fd = fd_oracle(&spec, *scalar, &at, 1e-3).unwrap();
                assert!(
                    (exact - fd).abs() <= 1e-4 * exact.abs().max(1e-8),
                    "{name} {scalar}: {exact} vs {fd}"
                );
            }
        }
    }
}

#[test]
fn finite_difference_examples() {
    let s = builtin("schwarzschild").unwrap();
    let at = Bindings::new()
        .with("M", 1.0)
        .with("r", 3.0)
        .with("theta", 1.2)
        .with("phi", 0.5)
        .with("t", 0.0);
    let k = fd_oracle(&s, Scalar::K, &at, 1e-3).unwrap();
    assert!((k - 48.0 / 729.0).abs() <= 1e-4 * 48.0 / 729.0);

    let flat = builtin("minkowski").unwrap();
    let at = Bindings::new()
        .with("t", 0.3)
        .with("x", 0.4)
        .with("y", 0.5)
        .with("z", 0.6);
    assert!(fd_oracle(&flat, Scalar::R, &at, 1e-3).unwrap().abs() <= 1e-8);

    let g = builtin("godel").unwrap();
    let at = Bindings::new()
        .with("a", 1.0)
        .with("r", 0.7)
        .with("t", 0.5)
        .with("phi", 0.2)
        .with("z", 0.5);
    let s = fd_oracle(&g, Scalar::S, &at, 1e-3).unwrap();
    let want = -(3f64.sqrt()) / 2.0;
    assert!((s - want).abs() <= 1e-3 * want.abs(), "{s}");
}

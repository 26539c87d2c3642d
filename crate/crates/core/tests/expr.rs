use confinv::expr::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn p(s: &str) -> Expr {
    parse(s).unwrap()
}

fn gen(seed: u64, depth: u32) -> Expr {
    ExprGen::new(&["x", "y", "z"], depth).generate(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn smooth(seed: u64, depth: u32) -> Expr {
    ExprGen::new(&["x", "y"], depth)
        .smooth()
        .generate(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn xyz(seed: u64) -> Sampler {
    Sampler::new(
        SampleDomain::new()
            .with("x", 0.1, 2.0)
            .with("y", -2.0, 2.0)
            .with("z", 0.5, 3.0),
        seed,
    )
}

#[test]
fn parse_examples() {
    assert_eq!(p("-(1-2*M/r)"), p("2*M/r - 1"));
    assert!(p("0").is_zero());
    let err = parse("sin(").unwrap_err();
    assert_eq!(err.offset, 4);
    assert!(matches!(err.kind, ParseErrorKind::Syntax { .. }));
    assert!(matches!(
        parse("foo(x)").unwrap_err().kind,
        ParseErrorKind::UnknownFunction(_)
    ));
}

#[test]
fn differentiate_examples() {
    assert_eq!(differentiate(&p("r^2"), "r"), p("2*r"));
    assert_eq!(simplify(&differentiate(&p("1 - 2*M/r"), "r")), p("2*M/r^2"));
    let d = differentiate(&p("sqrt(abs(h))"), "h");
    assert_eq!(simplify(&(d - p("sign(h)/(2*sqrt(abs(h)))"))), Expr::zero());
}

#[test]
fn simplify_examples() {
    assert!(simplify(&p("(1 - 2*M/r) + (2*M/r - 1)")).is_zero());
    assert_eq!(simplify(&p("x*x^3")), p("x^4"));
    let s = simplify(&p("sin(theta)^2 + cos(theta)^2"));
    let mut sampler = Sampler::new(SampleDomain::new().with("theta", 0.1, 3.0), 1);
    assert!(equivalent(&s, &Expr::one(), &mut sampler, 16, 1e-10).unwrap());
}

#[test]
fn evaluate_examples() {
    let b = Bindings::new().with("M", 1.0).with("r", 2.0);
    assert_eq!(evaluate(&p("2*M/r"), &b).unwrap(), 1.0);
    assert_eq!(evaluate(&p("48*M^2/r^6"), &b).unwrap(), 0.75);
    assert!(matches!(
        evaluate(&p("1/x"), &Bindings::new().with("x", 0.0)),
        Err(EvalError::Domain { .. })
    ));
    assert!(matches!(
        evaluate(&p("x"), &Bindings::new()),
        Err(EvalError::MissingBinding(_))
    ));
}

#[test]
fn equivalent_examples() {
    let mut s = Sampler::new(SampleDomain::new().with("x", 0.0, 1.0), 2);
    assert!(!equivalent(&p("x"), &p("x + 0.001"), &mut s, 16, 1e-10).unwrap());
    let mut s = Sampler::new(
        SampleDomain::new().with("r", 3.0, 10.0).with("M", 0.5, 2.0),
        3,
    );
    let computed = p("3*3^(1/2)*(6*M - r)/8/M");
    assert!(equivalent(&computed, &p("9*sqrt(3)/4*(1 - r/(6*M))"), &mut s, 16, 1e-7).unwrap());
}

#[test]
fn exact_constants_survive() {
    assert_eq!(p("0.25"), Expr::rational(1, 4));
    assert_eq!(simplify(&p("sqrt(3)*sqrt(3)")), Expr::int(3));
    assert_eq!(simplify(&p("9/4*sqrt(48)")), p("9*sqrt(3)"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn print_parse_round_trip(seed in any::<u64>()) {
        let e = gen(seed, 6);
        let text = e.to_string();
        prop_assert_eq!(parse(&text).unwrap(), e, "{}", text);
    }

    #[test]
    fn differentiation_is_linear(seed in any::<u64>(), a in -7i64..8, b in 1i64..5) {
        let e1 = gen(seed, 6);
        let e2 = gen(seed ^ 0x9e37_79b9, 6);
        let a = Expr::rational(a, b);
        let x = Expr::sym("x");
        let mut d = Differentiator::new();
        let lhs = d.diff(&(&a * &e1 + &e2), &x);
        let rhs = &a * d.diff(&e1, &x) + d.diff(&e2, &x);
        prop_assert!(simplify(&(lhs - rhs)).is_zero());
    }

    #[test]
    fn simplify_preserves_value(seed in any::<u64>()) {
        let e = gen(seed, 5);
        let s = simplify(&e);
        match equivalent(&e, &s, &mut xyz(seed), 16, 1e-10) {
            Ok(ok) => prop_assert!(ok, "{} vs {}", e, s),
            Err(SamplingError::Exhausted { .. }) => {}
            Err(err) => prop_assert!(false, "{}", err),
        }
    }

    #[test]
    fn derivative_matches_central_difference(seed in any::<u64>(), x in 0.2f64..1.5, y in 0.2f64..1.5) {
        let e = smooth(seed, 4);
        let d = differentiate(&e, "x");
        let h = 1e-5;
        let at = |x: f64| evaluate(&e, &Bindings::new().with("x", x).with("y", y));
        let f0 = at(x);
        prop_assume!(f0.as_ref().is_ok_and(|v| v.abs() < 1e3));
        let at = |x: f64| at(x).unwrap();
        let fd = (at(x + h) - at(x - h)) / (2.0 * h);
        let exact = evaluate(&d, &Bindings::new().with("x", x).with("y", y)).unwrap();
        prop_assert!((exact - fd).abs() <= 1e-6 * (1.0 + exact.abs()), "{}: {} vs {}", e, exact, fd);
    }
}

//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Cells listed in `KNOWN_DISCREPANCIES` are computed and compared like every
//! other cell. They are expected to disagree with the published table; the
//! criterion still reports FAIL for them, but the run only aborts on failures
//! outside that list, or when a listed cell unexpectedly agrees.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use confinv::catalog::{builtin, load_metric, reference_row, save_metric, BUILTINS, TABLE};
use confinv::conformal::{
    relative_deviation, verify_invariance, Conformal, ConformalError, InvariantReport, Points,
};
use confinv::expr::{evaluate, parse, Expr, ExprGen, Program};
use confinv::geometry::{contract, fd_oracle, Geometry, MetricSpec, Scalar};

const SEED: u64 = 20_240_601;

/// Table cells whose published closed form the pipeline does not reproduce.
const KNOWN_DISCREPANCIES: [(&str, Scalar, &str); 2] = [
    (
        "reissner-nordstrom",
        Scalar::S,
        "published form is not the Ricci scalar of J g; it does not even reduce to the Schwarzschild row at q = 0",
    ),
    (
        "barriola-vilenkin",
        Scalar::S,
        "S = sign(1 - k^2) sqrt(3): the published -sqrt(3) is the k > 1 branch, the catalog uses k = 1/2",
    ),
];

struct Outcome {
    passed: bool,
    /// Failures that are not listed as known discrepancies.
    unexpected: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn from_failures(failures: Vec<String>) -> Outcome {
        Outcome {
            passed: failures.is_empty(),
            unexpected: failures,
            notes: Vec::new(),
        }
    }
}

fn p(s: &str) -> Expr {
    parse(s).unwrap()
}

fn table_reproduction() -> Outcome {
    let start = Instant::now();
    let mut unexpected = Vec::new();
    let mut notes = Vec::new();
    let mut passed = true;
    for name in TABLE {
        let spec = builtin(name).unwrap();
        let reference = reference_row(name).unwrap();
        let mut pipe = Conformal::with_seed(&spec, SEED).unwrap();
        for (scalar, want) in [
            (Scalar::R, reference.r),
            (Scalar::K, reference.k),
            (Scalar::S, reference.s),
        ] {
            let got = pipe.scalar(scalar).unwrap();
            let pair = [got.clone(), want.clone()];
            let points = spec.sampler(SEED).points_for(&pair, 16).unwrap();
            let prog = Program::compile(&pair);
            let dev = points
                .iter()
                .map(|b| {
                    let v = prog.eval(b).unwrap();
                    relative_deviation(v[0], v[1])
                })
                .fold(0.0, f64::max);
            let agree = dev <= 1e-7;
            let known = KNOWN_DISCREPANCIES
                .iter()
                .find(|(n, s, _)| *n == name && *s == scalar);
            passed &= agree;
            match (agree, known) {
                (true, None) => {}
                (false, Some((_, _, why))) => notes.push(format!("{name} {scalar}: known discrepancy, max deviation {dev:.3e} ({why}); computed {got}")),
                (false, None) => unexpected.push(format!("{name} {scalar}: max deviation {dev:.3e}; computed {got}, expected {want}")),
                (true, Some(_)) => unexpected.push(format!("{name} {scalar}: listed as a known discrepancy but agrees")),
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs > 60.0 {
        unexpected.push(format!("took {secs:.1} s"));
        passed = false;
    }
    notes.push(format!("all four rows in {secs:.2} s"));
    Outcome {
        passed: passed && unexpected.is_empty(),
        unexpected,
        notes,
    }
}

fn normalization() -> Outcome {
    let mut failures = Vec::new();
    for name in TABLE {
        let spec = builtin(name).unwrap();
        let mut pipe = Conformal::with_seed(&spec, SEED).unwrap();
        let sign = pipe.genericity().unwrap().sign().unwrap() as f64;
        let prime = pipe.preferred_metric().unwrap();
        let h = Geometry::new(&prime).unwrap().weyl_square().unwrap();
        for b in spec
            .sampler(SEED)
            .points_for(std::slice::from_ref(&h), 16)
            .unwrap()
        {
            let v = evaluate(&h, &b).unwrap();
            let close = (v - sign).abs() <= 1e-6;
            if !close {
                failures.push(format!("{name}: H(g') = {v} at {b:?}"));
            }
        }
    }
    Outcome::from_failures(failures)
}

fn invariance(factors: &dyn Fn(&MetricSpec) -> Vec<String>, checks: &[&str]) -> Outcome {
    let mut failures = Vec::new();
    for name in TABLE {
        let spec = builtin(name).unwrap();
        for alpha in factors(&spec) {
            let report = verify_invariance(&spec, &p(&alpha), 8, 1e-6).unwrap();
            for c in report.checks.iter().filter(|c| checks.contains(&c.name)) {
                if !c.passed {
                    failures.push(format!(
                        "{name}, alpha = {alpha}: {} deviates by {:.3e}",
                        c.name, c.max_deviation
                    ));
                }
            }
        }
    }
    Outcome::from_failures(failures)
}

fn scaling_laws() -> Outcome {
    invariance(&|_| vec!["2".into(), "1 + r^2/100".into()], &["H", "J"])
}

fn weight_zero() -> Outcome {
    invariance(
        &|spec| {
            vec![
                "2".into(),
                "1 + r^2/100".into(),
                format!("exp({}/10)", spec.coords.last().unwrap()),
            ]
        },
        &["S"],
    )
}

fn oracle_agreement() -> Outcome {
    let mut failures = Vec::new();
    for name in TABLE {
        let spec = builtin(name).unwrap();
        let report = InvariantReport::build(&spec, &Scalar::ALL, Points::Sample(1), SEED).unwrap();
        let (at, values) = &report.samples[0];
        for (scalar, v) in values {
            let exact = v.unwrap();
            let fd = fd_oracle(&spec, *scalar, at, 1e-3).unwrap();
            // an exactly vanishing scalar is compared on an absolute scale
            let ok = if exact == 0.0 {
                fd.abs() <= 1e-6
            } else {
                relative_deviation(exact, fd) <= 1e-3
            };
            if !ok {
                failures.push(format!(
                    "{name} {scalar}: symbolic {exact}, finite differences {fd}"
                ));
            }
        }
    }
    Outcome::from_failures(failures)
}

fn degeneracy() -> Outcome {
    let mut failures = Vec::new();
    let cases: [&[&str]; 2] = [
        &["invariants", "--builtin", "minkowski", "--scalars", "H,J,S"],
        &[
            "invariants",
            "--builtin",
            "barriola-vilenkin",
            "--param",
            "k=1",
            "--scalars",
            "H,J,S",
        ],
    ];
    for args in cases {
        let out = Command::new(env!("CARGO_BIN_EXE_confinv"))
            .args(args)
            .output()
            .unwrap();
        let text = String::from_utf8_lossy(&out.stdout);
        if out.status.code() != Some(2) || !text.contains("non-generic") {
            failures.push(format!("{args:?}: exit {:?}", out.status.code()));
        }
        if text.contains("NaN") || text.contains("inf") {
            failures.push(format!("{args:?}: non-finite output"));
        }
    }
    let flat = builtin("minkowski").unwrap();
    match Conformal::new(&flat).unwrap().scalar_curvature() {
        Err(ConformalError::NonGeneric(_)) => {}
        other => failures.push(format!("minkowski S: {other:?}")),
    }
    Outcome::from_failures(failures)
}

fn tensor_symmetries() -> Outcome {
    let mut failures = Vec::new();
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let n = spec.dim();
        let mut geo = Geometry::new(&spec).unwrap();
        let r = geo.riemann().unwrap();
        let low = geo.raise_lower(&r, 0).unwrap();
        let c = geo.weyl().unwrap();
        let trace = contract(&geo.raise_lower(&c, 0).unwrap(), 0, 2).unwrap();

        let mut pairs: Vec<(&str, Expr, Expr)> = Vec::new();
        for k in 0..n.pow(4) {
            let [i, j, a, b] = [k / (n * n * n), k / (n * n) % n, k / n % n, k % n];
            pairs.push((
                "R^i_jkl = -R^i_jlk",
                r.get(&[i, j, a, b]).clone(),
                -r.get(&[i, j, b, a]),
            ));
            pairs.push((
                "R_ijkl = -R_jikl",
                low.get(&[i, j, a, b]).clone(),
                -low.get(&[j, i, a, b]),
            ));
            pairs.push((
                "R_ijkl = R_klij",
                low.get(&[i, j, a, b]).clone(),
                low.get(&[a, b, i, j]).clone(),
            ));
            let cyclic = r.get(&[i, j, a, b]) + r.get(&[i, a, b, j]) + r.get(&[i, b, j, a]);
            pairs.push(("first Bianchi", cyclic, Expr::zero()));
        }
        for e in trace.components() {
            pairs.push(("Weyl trace", e.clone(), Expr::zero()));
        }
        let exprs: Vec<Expr> = pairs
            .iter()
            .flat_map(|(_, a, b)| [a.clone(), b.clone()])
            .collect();
        let prog = Program::compile(&exprs);
        for b in spec.sampler(SEED).points_for(&exprs, 8).unwrap() {
            let v = prog.eval(&b).unwrap();
            for (k, (what, ..)) in pairs.iter().enumerate() {
                let (x, y) = (v[2 * k], v[2 * k + 1]);
                let close = (x - y).abs() <= 1e-8 * (1.0 + x.abs() + y.abs());
                if !close {
                    failures.push(format!("{name}: {what} fails by {:.3e}", (x - y).abs()));
                    break;
                }
            }
        }
    }
    failures.dedup();
    Outcome::from_failures(failures)
}

fn round_trips() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let gen = ExprGen::new(&["x", "y", "z", "theta"], 6);
    for _ in 0..1000 {
        let e = gen.generate(&mut rng);
        let printed = e.to_string();
        match parse(&printed) {
            Ok(back) if back == e && back.to_string() == printed => {}
            Ok(back) => failures.push(format!("{printed} reparsed as {back}")),
            Err(err) => failures.push(format!("{printed}: {err}")),
        }
    }
    let dir = std::env::temp_dir().join(format!("confinv-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for name in BUILTINS {
        let spec = builtin(name).unwrap();
        let path = dir.join(format!("{name}.metric"));
        save_metric(&spec, &path).unwrap();
        if load_metric(&path).unwrap() != spec {
            failures.push(format!("{name}: load(save(m)) differs"));
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    Outcome::from_failures(failures)
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("published curvature table", table_reproduction),
        ("normalization of H on g'", normalization),
        ("scaling laws for H and J", scaling_laws),
        ("weight-zero invariance of S", weight_zero),
        (
            "agreement with the finite-difference oracle",
            oracle_agreement,
        ),
        ("degenerate metrics", degeneracy),
        ("tensor symmetries", tensor_symmetries),
        ("parser and file round trips", round_trips),
    ];
    let mut unexpected = 0;
    for (k, (title, run)) in criteria.iter().enumerate() {
        let out = run();
        let verdict = match (out.passed, out.unexpected.is_empty()) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known discrepancy)",
            (false, false) => "FAIL",
        };
        println!("criterion {}: {title}: {verdict}", k + 1);
        for line in out.notes.iter().chain(&out.unexpected) {
            println!("    {line}");
        }
        unexpected += out.unexpected.len();
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

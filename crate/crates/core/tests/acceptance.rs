//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use dtflow_core::continuation::{trace, Termination, TraceOptions};
use dtflow_core::dt::{assemble_system, conv_at, delta, expand, lemma_coeffs, rhs_at_order};
use dtflow_core::evaluator::{eval_series, mismatch};
use dtflow_core::load::{ConstantPower, LoadModel, ZipLoad};
use dtflow_core::netmodel::{parse_case, BusKind, DirectionVector, Network, ZipConfig, ZipEntry};
use dtflow_core::numerics::norm_inf;
use dtflow_core::oracle::{bracket_nose, fd_jacobian, newton_solve, NoseBracket};
use dtflow_core::verify::{identity_trials, random_case, random_series, Suite, VerifyOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{load_case, load_network, FIXTURES};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn models() -> [&'static dyn LoadModel; 2] {
    [&ConstantPower, &ZipLoad]
}

/// Base solution at zero loading and the Newton-bracketed nose.
fn base_and_nose(net: &Network, model: &dyn LoadModel) -> Result<(Vec<f64>, NoseBracket), String> {
    let base = newton_solve(net, model, 0.0, &net.flat_start());
    if !base.converged {
        return Err(format!("base case did not converge: {:?}", base.residual));
    }
    let nose = bracket_nose(net, model, 0.0, &base.y, 0.05, 100.0, 1e-7)
        .ok_or("no nose below loading 100")?;
    Ok((base.y, nose))
}

fn identity(suite: Suite) -> Outcome {
    let start = Instant::now();
    let opts = VerifyOptions {
        trials: 1000,
        seed: 7,
        max_order: 8,
        tolerance: 1e-12,
    };
    let r = identity_trials(None, suite, &opts).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let detail = format!(
        "{} trials, {} comparisons, max deviation {:?}, {:.2?}",
        r.trials, r.comparisons, r.max_deviation, elapsed
    );
    if !r.passed {
        return Err(format!("{detail}; worst {:?}", r.worst));
    }
    if elapsed > Duration::from_secs(10) {
        return Err(format!("{detail}; slower than 10 s"));
    }
    Ok(detail)
}

fn criterion_1() -> Outcome {
    identity(Suite::ConstantPower)
}

fn criterion_2() -> Outcome {
    identity(Suite::Zip)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for name in FIXTURES {
        let net = load_network(name);
        for model in models() {
            for _ in 0..20 {
                let y: Vec<f64> = (0..net.dim())
                    .map(|s| {
                        if s % 2 == 0 {
                            rng.gen_range(0.9..1.1)
                        } else {
                            rng.gen_range(-0.3..0.3)
                        }
                    })
                    .collect();
                let lambda = rng.gen_range(0.0..1.0);
                let a = assemble_system(&net, model, &y)
                    .map_err(|e| e.to_string())?
                    .a_gy;
                let fd = fd_jacobian(&net, model, &y, lambda, 1e-6);
                let diff_norm = (0..a.rows())
                    .map(|r| {
                        a.row(r)
                            .iter()
                            .zip(fd.row(r))
                            .map(|(x, z)| (x - z).abs())
                            .sum::<f64>()
                    })
                    .fold(0.0, f64::max);
                let rel = diff_norm / a.norm_inf();
                worst = worst.max(rel);
            }
        }
    }
    let detail = format!("worst relative difference {worst:.2e}");
    if worst <= 1e-5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_4() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for name in FIXTURES {
        let net = load_network(name);
        for model in models() {
            let (y0, nose) = base_and_nose(&net, model)?;
            let lambda = 0.5 * nose.estimate();

            let start = Instant::now();
            let s = expand(&net, model, &y0, 0.0, 30).map_err(|e| e.to_string())?;
            let y = eval_series(&s, lambda);
            let elapsed = start.elapsed();

            let res = norm_inf(&mismatch(&net, model, &y, lambda));
            let newton = newton_solve(&net, model, lambda, &y0);
            let diff = y
                .iter()
                .zip(&newton.y)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let pass =
                res <= 1e-8 && newton.converged && diff <= 1e-6 && elapsed < Duration::from_secs(1);
            ok &= pass;
            lines.push(format!(
                "{name}/{}: nose {:.6}, mismatch {res:.1e}, vs Newton {diff:.1e}, {elapsed:.1?}{}",
                model.name(),
                nose.estimate(),
                if pass { "" } else { " FAIL" }
            ));
        }
    }
    let detail = lines.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut cases: Vec<_> = FIXTURES.iter().map(|n| load_case(n)).collect();
    for n in 2..=6 {
        cases.push(random_case(&mut rng, n));
    }
    for case in &cases {
        let mut zip = ZipConfig::new();
        for b in case.buses.iter().filter(|b| b.kind == BusKind::PQ) {
            zip.insert(case, b.id, ZipEntry::CONSTANT_POWER)
                .map_err(|e| e.to_string())?;
        }
        let mut dir = DirectionVector::new();
        for b in case.buses.iter().filter(|b| b.kind != BusKind::REF) {
            let dq = if b.kind == BusKind::PQ { -0.3 } else { 0.0 };
            dir.insert(
                case,
                b.id,
                dtflow_core::netmodel::Direction { dp: -0.5, dq },
            )
            .map_err(|e| e.to_string())?;
        }
        let net = Network::new(case, &zip, &dir).map_err(|e| e.to_string())?;
        let (coeffs, _) = random_series(&mut rng, net.dim(), 10);
        let sz = assemble_system(&net, &ZipLoad, &coeffs[0]).map_err(|e| e.to_string())?;
        let sc = assemble_system(&net, &ConstantPower, &coeffs[0]).map_err(|e| e.to_string())?;
        worst = worst.max(sz.a_gy.max_abs_diff(&sc.a_gy));
        for (a, b) in sz.a_glam.iter().zip(&sc.a_glam) {
            worst = worst.max((a - b).abs());
        }
        for k in 1..=10 {
            let bz = rhs_at_order(&net, &ZipLoad, &coeffs, k).map_err(|e| e.to_string())?;
            let bc = rhs_at_order(&net, &ConstantPower, &coeffs, k).map_err(|e| e.to_string())?;
            for (a, b) in bz.iter().zip(&bc) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    let detail = format!(
        "{} networks, worst elementwise difference {worst:.1e}",
        cases.len()
    );
    if worst <= 1e-14 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_6() -> Outcome {
    let mut points = 0;
    let mut worst_pv = 0.0f64;
    for name in FIXTURES {
        let net = load_network(name);
        let r = net.ordering().ref_index();
        for model in models() {
            let (y0, nose) = base_and_nose(&net, model)?;

            let s = expand(&net, model, &y0, 0.0, 30).map_err(|e| e.to_string())?;
            for k in 1..=s.order() {
                let c = s.coeff(k);
                if c[2 * r] != 0.0 || c[2 * r + 1] != 0.0 {
                    return Err(format!("{name}: slack coefficient nonzero at order {k}"));
                }
            }
            let b1 = rhs_at_order(&net, model, &s.coeffs()[..1], 1).map_err(|e| e.to_string())?;
            if b1.iter().any(|v| *v != 0.0) {
                return Err(format!("{name}: first-order constants {b1:?}"));
            }

            let opts = TraceOptions {
                lambda_max: 0.9 * nose.lower,
                ..TraceOptions::default()
            };
            let curve = trace(&net, model, &y0, 0.0, &opts).map_err(|e| e.to_string())?;
            for p in &curve.points {
                points += 1;
                let spec = net.bus(r);
                if p.y[2 * r] != spec.e || p.y[2 * r + 1] != spec.f {
                    return Err(format!("{name}: slack voltage moved at {}", p.lambda));
                }
                for i in 0..net.n() {
                    if net.kind(i) == BusKind::PV {
                        let v = p.y[2 * i].hypot(p.y[2 * i + 1]);
                        worst_pv = worst_pv.max((v - net.bus(i).v).abs());
                    }
                }
            }
        }
    }
    let detail = format!(
        "slack coefficients exactly zero, first-order constants exactly zero, \
         {points} trace points, worst PV magnitude deviation {worst_pv:.1e}"
    );
    if worst_pv <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tol = 1e-13;
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let len = rng.gen_range(2..=8);
        let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let k = rng.gen_range(1..len);
        let e = |r: Result<f64, _>| r.map_err(|e: dtflow_core::Error| e.to_string());

        // symmetry
        worst = worst.max((e(conv_at(&x, &y, k))? - e(conv_at(&y, &x, k))?).abs());
        // product with a constant picks out the coefficient
        let one: Vec<f64> = (0..len).map(delta).collect();
        worst = worst.max((e(conv_at(&one, &y, k))? - y[k]).abs());
        // linear split reconstructs the product
        let (a, b, c) = lemma_coeffs(&x, &y, k).map_err(|e| e.to_string())?;
        worst = worst.max((a * x[k] + b * y[k] + c - e(conv_at(&x, &y, k))?).abs());
        // self-product: 2 x0 x(k) + history
        let (a, b, c) = lemma_coeffs(&x, &x, k).map_err(|e| e.to_string())?;
        if a != b {
            return Err("self-product coefficients differ".into());
        }
        let hist: f64 = (1..k).map(|m| x[m] * x[k - m]).sum();
        worst = worst.max((2.0 * x[0] * x[k] + hist - e(conv_at(&x, &x, k))?).abs());
        worst = worst.max((c - hist).abs());
    }
    let detail = format!("10000 series, worst deviation {worst:.1e}");
    if worst <= tol {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_8() -> Outcome {
    let net = load_network("case2");
    let (y0, nose) = base_and_nose(&net, &ConstantPower)?;
    let opts = TraceOptions {
        lambda_max: 2.0 * nose.upper,
        ..TraceOptions::default()
    };
    let curve = trace(&net, &ConstantPower, &y0, 0.0, &opts).map_err(|e| e.to_string())?;
    let last = curve.last().unwrap().lambda;
    let rel = (nose.estimate() - last).abs() / nose.estimate();
    let worst_res = curve.points.iter().fold(0.0f64, |m, p| m.max(p.residual));
    let detail = format!(
        "{:?} at {last:.6} after {} points, nose {:.6} ({:.2}% away), worst residual {worst_res:.1e}",
        curve.termination,
        curve.points.len(),
        nose.estimate(),
        100.0 * rel
    );
    if curve.termination == Termination::SingularAtExpansionPoint
        && rel <= 0.02
        && worst_res <= 1e-8
    {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// Keeps the fixture parser honest: the suite is meaningless on a bad parse.
fn fixtures_parse() -> bool {
    FIXTURES.iter().all(|n| {
        let text = std::fs::read_to_string(common::fixture_path(&format!("{n}.m"))).unwrap();
        parse_case(&text).is_ok()
    })
}

fn main() {
    assert!(fixtures_parse(), "fixture cases failed to parse");
    let criteria: [Criterion; 8] = [
        (
            "linear forms match direct transform, constant power",
            criterion_1,
        ),
        ("linear forms match direct transform, ZIP", criterion_2),
        (
            "order matrix equals finite-difference Jacobian",
            criterion_3,
        ),
        (
            "series solution agrees with Newton at half the nose",
            criterion_4,
        ),
        (
            "all-power ZIP reproduces the constant-power system",
            criterion_5,
        ),
        ("slack, PV magnitude and first-order structure", criterion_6),
        ("scalar series lemmas", criterion_7),
        ("trace stops at the nose", criterion_8),
    ];
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} PASS: {title} ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL: {title} ({detail})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}

//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

mod support;

use std::process::Command;
use std::time::Instant;

use hdlss_energy::angular::{rho_hat, AnchorPool};
use hdlss_energy::classifiers::{fit_binary, Rule};
use hdlss_energy::distributions::example_spec;
use hdlss_energy::experiments::{run_simulation, theorem5_report, ClassifierKind, ExperimentConfig, ExperimentResult, Regime};
use hdlss_energy::stats::{
    compute_train_stats, point_discriminants, point_stats_delta0, tau_psi_from_t, StatsEngine, TrainingSet,
};
use hdlss_energy::theory::{separation_is_zero, theta_constants, TheoryParams};
use ndarray::array;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::normal_matrix;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const SEED: u64 = 1;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn simulate(example: u8, dims: &[usize], reps: usize, classifiers: &[ClassifierKind]) -> ExperimentResult {
    let mut cfg = ExperimentConfig::protocol_defaults(example_spec(example).unwrap(), SEED);
    cfg.dims = dims.to_vec();
    cfg.reps = reps;
    cfg.classifiers = classifiers.to_vec();
    run_simulation(&cfg).unwrap()
}

/// Mean error in percent.
fn pct(res: &ExperimentResult, k: ClassifierKind, d: usize) -> f64 {
    100.0 * res.cell(k, d).unwrap().mean_error
}

const RULES3: [ClassifierKind; 3] = [ClassifierKind::Delta1, ClassifierKind::Delta2, ClassifierKind::Delta3];

fn hand_example() -> Outcome {
    let ts = TrainingSet::new(array![[0.0], [2.0]], array![[1.0], [3.0]]).unwrap();
    let st = compute_train_stats(&ts);
    let d = point_discriminants(&[0.0], &ts, &st).unwrap();
    let got = [st.tbar_ff, st.tbar_gg, st.tbar_fg, st.w_bar_star, st.s_fg, d.d1, d.s_z, d.d2, d.d3];
    let want = [0.25, 0.25, 0.125, -0.25, 0.0, 0.125, 0.0, -0.015625, -0.125];
    let worst = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(worst <= 1e-15, format!("max deviation {worst:e}"))
}

fn convex_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let (ff, gg, fg): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let lhs = (fg - ff).powi(2) + (fg - gg).powi(2);
        worst = worst.max((lhs - tau_psi_from_t(ff, gg, fg).tau_bar).abs());
    }
    check(worst <= 1e-12, format!("max deviation {worst:e} over 10^4 triples"))
}

fn scalar_collapse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut points = 0;
    for set in 0..200 {
        let (m, n) = (rng.random_range(2..=20), rng.random_range(2..=20));
        let x = normal_matrix(&mut rng, m, 1, 0.0, 1.0);
        let y = normal_matrix(&mut rng, n, 1, 0.0, 2f64.sqrt());
        let z = normal_matrix(&mut rng, 20, 1, 0.0, 1.3);
        let ts = TrainingSet::new(x.clone(), y.clone()).unwrap();
        let st = compute_train_stats(&ts);
        let d0 = fit_binary(Rule::Delta0, x.clone(), y.clone()).unwrap();
        let d1 = fit_binary(Rule::Delta1, x, y).unwrap();
        let engine = StatsEngine::new(ts.clone());
        for zi in z.outer_iter() {
            let zi = zi.to_vec();
            let literal = point_stats_delta0(&zi, &ts, &st).unwrap() == point_discriminants(&zi, &ts, &st).unwrap().d1;
            let pooled = engine.delta0_score(&zi).unwrap() == engine.discriminants(&zi).unwrap().d1;
            if !literal || !pooled || d0.predict(&zi).unwrap() != d1.predict(&zi).unwrap() {
                return Err(format!("mismatch in set {set} at z = {}", zi[0]));
            }
            points += 1;
        }
    }
    Ok(format!("200 sets, {points} test points, bit-identical"))
}

fn monotone_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let cube = |a: &ndarray::Array2<f64>| a.mapv(|v| v * v * v);
    for p in 0..50 {
        let d = rng.random_range(1..=60);
        let (m, n) = (rng.random_range(2..=20), rng.random_range(2..=20));
        let x = normal_matrix(&mut rng, m, d, 0.0, 1.0);
        let y = normal_matrix(&mut rng, n, d, 0.3, 1.5);
        let z = normal_matrix(&mut rng, 40, d, 0.15, 1.2);
        for rule in [Rule::Delta1, Rule::Delta2, Rule::Delta3] {
            let a = fit_binary(rule, x.clone(), y.clone()).unwrap().predict_batch(z.view()).unwrap();
            let b = fit_binary(rule, cube(&x), cube(&y)).unwrap().predict_batch(cube(&z).view()).unwrap();
            if a != b {
                return Err(format!("problem {p}, rule {rule}: predictions changed"));
            }
        }
    }
    Ok("50 problems, all predictions unchanged".into())
}

fn theory_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let s2 = rng.random_range(0.01..100.0);
        let t = theta_constants(&TheoryParams::new(0.0, s2, s2, 20, 20).unwrap()).unwrap();
        worst = worst.max(t.theta_star.abs());
    }
    if worst > 1e-14 {
        return Err(format!("theta*(0, s, s) reached {worst:e}"));
    }
    let stars: Vec<f64> = [(20, 20), (5, 35), (1, 99)]
        .iter()
        .map(|&(m, n)| theta_constants(&TheoryParams::new(0.0, 1.0, 2.0, m, n).unwrap()).unwrap().theta_star)
        .collect();
    if (stars[0] - 0.00712).abs() > 1e-5 || stars.iter().any(|&s| s != stars[0]) {
        return Err(format!("theta*(0, 1, 2) = {stars:?}"));
    }
    let grid = [0.0, 0.25, 1.0, 4.0];
    let vars = [0.5, 1.0, 2.0, 3.0];
    let mut cells = 0;
    for &dmu2 in &grid {
        for &sf in &vars {
            for &sg in &vars {
                let p = TheoryParams::new(dmu2, sf, sg, 20, 20).unwrap();
                let star = theta_constants(&p).unwrap().theta_star;
                let zero = dmu2 == 0.0 && sf == sg;
                if separation_is_zero(&p) != zero || (zero != (star.abs() < 1e-12)) {
                    return Err(format!("grid point ({dmu2}, {sf}, {sg}): theta* = {star:e}"));
                }
                cells += 1;
            }
        }
    }
    check(
        true,
        format!("max |theta*| {worst:e}; theta*(0,1,2) = {:.6}; {cells} grid points agree", stars[0]),
    )
}

fn convergence() -> Outcome {
    let d = 2000;
    let mut inside = 0;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED.wrapping_mul(1000) + trial);
        let u = normal_matrix(&mut rng, 1, d, 0.0, 1.0).row(0).to_vec();
        let v = normal_matrix(&mut rng, 1, d, 0.0, 1.0).row(0).to_vec();
        let x = normal_matrix(&mut rng, 20, d, 0.0, 1.0);
        let y = normal_matrix(&mut rng, 20, d, 0.0, 1.0);
        let r = rho_hat(&u, &v, &AnchorPool::new(x.view(), y.view()).unwrap()).unwrap();
        inside += ((r - 1.0 / 3.0).abs() <= 0.03) as usize;
    }
    check(inside >= 95, format!("{inside}/100 trials within 0.03 of 1/3"))
}

fn table_example1() -> Outcome {
    let t0 = Instant::now();
    let res = simulate(1, &[100, 1000], 50, &RULES3);
    let secs = t0.elapsed().as_secs_f64();
    let (d2, d3) = (pct(&res, ClassifierKind::Delta2, 100), pct(&res, ClassifierKind::Delta3, 100));
    let (d1k, d2k, d3k) = (
        pct(&res, ClassifierKind::Delta1, 1000),
        pct(&res, ClassifierKind::Delta2, 1000),
        pct(&res, ClassifierKind::Delta3, 1000),
    );
    let ok = (d2 - 2.38).abs() <= 2.0
        && (d3 - 2.40).abs() <= 2.0
        && d2k == 0.0
        && d3k == 0.0
        && (3.0..=9.0).contains(&d1k);
    check(
        ok,
        format!(
            "d=100: D2 {d2:.2}% D3 {d3:.2}%; d=1000: D1 {d1k:.2}% D2 {d2k:.2}% D3 {d3k:.2}% ({secs:.1}s)"
        ),
    )
}

fn table_example3() -> Outcome {
    let res = simulate(3, &[100, 1000], 50, &RULES3);
    let d1 = pct(&res, ClassifierKind::Delta1, 100);
    let big: Vec<f64> = RULES3.iter().map(|&k| pct(&res, k, 1000)).collect();
    let report = theorem5_report(&res).map_err(|e| e.to_string())?;
    let regime_b = report.iter().all(|v| v.regime == Regime::B);
    let ok = (d1 - 0.69).abs() <= 1.0 && big.iter().all(|&e| e <= 0.5) && regime_b;
    check(
        ok,
        format!(
            "d=100: D1 {d1:.2}%; d=1000: D1/D2/D3 {:.2}/{:.2}/{:.2}%; regime (b) at every d: {regime_b}",
            big[0], big[1], big[2]
        ),
    )
}

fn heavy_tails() -> Outcome {
    let ex2 = simulate(2, &[1000], 50, &RULES3);
    let ex5 = simulate(5, &[500], 50, &RULES3);
    let e2: Vec<f64> = RULES3[1..].iter().map(|&k| pct(&ex2, k, 1000)).collect();
    let e5: Vec<f64> = RULES3.iter().map(|&k| pct(&ex5, k, 500)).collect();
    let ok = e2.iter().all(|&e| e <= 1.0) && e5.iter().all(|&e| e <= 1.5);
    check(
        ok,
        format!(
            "example 2 d=1000: D2/D3 {:.2}/{:.2}%; example 5 d=500: D1/D2/D3 {:.2}/{:.2}/{:.2}%",
            e2[0], e2[1], e5[0], e5[1], e5[2]
        ),
    )
}

fn golden_t() -> Outcome {
    let res = simulate(1, &[1000], 20, &[ClassifierKind::Delta1]);
    let s = res.dim_summary(1000).unwrap();
    let got = [s.t_ff, s.t_fg, s.t_gg];
    let want = [0.28362, 0.31839, 0.3461];
    let worst = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(
        worst <= 0.01,
        format!("(T_FF, T_FG, T_GG) = ({:.5}, {:.5}, {:.5}), max deviation {worst:.5}", got[0], got[1], got[2]),
    )
}

fn bayes() -> Outcome {
    let ex1 = pct(&simulate(1, &[5], 100, &[ClassifierKind::Bayes]), ClassifierKind::Bayes, 5);
    let ex3 = pct(&simulate(3, &[25], 100, &[ClassifierKind::Bayes]), ClassifierKind::Bayes, 25);
    check(
        (ex1 - 30.36).abs() <= 2.0 && (ex3 - 4.64).abs() <= 1.5,
        format!("example 1 d=5: {ex1:.2}%; example 3 d=25: {ex3:.2}%"),
    )
}

fn thread_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |threads: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(format!("t{threads}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_hdlss"))
            .args(["--threads", threads, "simulate", "--example", "5", "--dims", "5,100,250", "--reps", "8"])
            .args(["--seed", "12", "--out", out.to_str().unwrap()])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        std::fs::read(out).map_err(|e| e.to_string())
    };
    let (a, b) = (run("1")?, run("8")?);
    check(a == b, format!("{} bytes at 1 thread, {} at 8, identical: {}", a.len(), b.len(), a == b))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("hand-enumerated oracle", hand_example),
        ("convex-combination identity", convex_identity),
        ("d=1 collapse of delta0 to delta1", scalar_collapse),
        ("monotone-transform invariance", monotone_invariance),
        ("theory oracle", theory_oracle),
        ("rho_hat convergence to 1/3", convergence),
        ("example 1 error rates", table_example1),
        ("example 3 error rates and regime", table_example3),
        ("heavy-tailed examples 2 and 5", heavy_tails),
        ("example 1 T golden values", golden_t),
        ("Bayes benchmark", bayes),
        ("thread-count determinism", thread_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}: {name}: {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Acceptance criteria, one line each.
//!
//! Runs without the libtest harness. Some checks are known to fail (see
//! `EXPECTED_FAILURES` and the README); they are reported as FAIL but only an
//! unexpected result makes the process exit non-zero.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bellstrength::bell::{cglmp_functional, local_bound, log_ratio_operator};
use bellstrength::experiment::{empirical_strength, sample_trials};
use bellstrength::local::{enumerate_vertices, model_behavior, vertex_behavior, LocalModel};
use bellstrength::optimizer::{
    additivity_comparison, conjectured_optimum, figure1_sweep, optimize_cglmp_exact, verify_uniform_settings,
    ConjecturedOptions, ExactOptions, OptimizationReport, SweepMode,
};
use bellstrength::quantum::{
    cglmp_behavior, cglmp_measurements, entropy_of_entanglement, maximally_entangled, quantum_behavior,
    three_level_state, Behavior, Party, PureState, SchmidtState, SettingsDistribution,
};
use bellstrength::strength::{min_kl_local, min_kl_local_with, FitOptions};
use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const TOL: f64 = 1e-10;

/// `(criterion, check)` pairs that fail for reasons recorded in the README.
const EXPECTED_FAILURES: &[(u32, &str)] = &[(2, "optimal d=3 E"), (2, "optimal d=3 delta")];

type Criterion = (u32, &'static str, fn() -> Vec<Check>);

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        pass,
        detail,
    }
}

fn within(name: &str, value: f64, target: f64, tol: f64) -> Check {
    check(
        name,
        (value - target).abs() <= tol,
        format!("{value:.6} vs {target} +- {tol}"),
    )
}

fn in_time(name: &str, elapsed: Duration, limit: Duration) -> Check {
    check(
        name,
        elapsed <= limit,
        format!("{:.2}s <= {}s", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn cglmp_q(state: &PureState, settings: &SettingsDistribution) -> Behavior {
    let d = state.dim();
    quantum_behavior(
        state,
        &cglmp_measurements(d, Party::Alice).unwrap(),
        &cglmp_measurements(d, Party::Bob).unwrap(),
        settings,
    )
    .unwrap()
}

fn strength(state: &SchmidtState) -> f64 {
    min_kl_local(&cglmp_behavior(state).unwrap(), TOL).unwrap().divergence_bits
}

fn exact(d: usize) -> OptimizationReport {
    optimize_cglmp_exact(d, &ExactOptions::default()).unwrap()
}

fn chsh_baseline() -> Vec<Check> {
    let t = Instant::now();
    let v = strength(&maximally_entangled(2).unwrap());
    vec![
        within("Phi_2 D", v, 0.046, 0.001),
        in_time("runtime", t.elapsed(), Duration::from_secs(1)),
    ]
}

fn table1() -> Vec<Check> {
    let t = Instant::now();
    let phi = maximally_entangled(3).unwrap();
    let mv = three_level_state(0.617).unwrap();
    let opt = exact(3);
    let delta = opt.best_state.coeffs()[0];
    vec![
        within("Phi_3 D", strength(&phi), 0.058, 0.001),
        within("Phi_3 E", entropy_of_entanglement(&phi), 1.585, 0.001),
        within("Psi_mv D", strength(&mv), 0.072, 0.001),
        within("Psi_mv E", entropy_of_entanglement(&mv), 1.554, 0.001),
        within("optimal d=3 D", opt.divergence_bits, 0.077, 0.001),
        within("optimal d=3 E", opt.entanglement_bits, 1.495, 0.001),
        within("optimal d=3 delta", delta, 0.642, 0.005),
        in_time("runtime", t.elapsed(), Duration::from_secs(60)),
    ]
}

fn d4_optimum() -> Vec<Check> {
    let t = Instant::now();
    let r = exact(4);
    vec![
        within("D", r.divergence_bits, 0.098, 0.001),
        check(
            "E < 2",
            r.entanglement_bits < 2.0,
            format!("{:.6}", r.entanglement_bits),
        ),
        in_time("runtime", t.elapsed(), Duration::from_secs(600)),
    ]
}

/// `[x] mod d` evaluated straight from a strategy's outcomes.
fn modular_sum(a: &[usize], b: &[usize], d: usize) -> i64 {
    let br = |x: i64| x.rem_euclid(d as i64);
    let (a1, a2, b1, b2) = (a[1] as i64, a[0] as i64, b[1] as i64, b[0] as i64);
    br(a1 - b1) + br(b1 - a2) + br(a2 - b2) + br(b2 - a1 - 1)
}

fn local_bounds() -> Vec<Check> {
    let t = Instant::now();
    let mut out = Vec::new();
    let uniform = SettingsDistribution::uniform(2);
    for d in 2..=5 {
        let f = cglmp_functional(d).unwrap();
        let bound = local_bound(&f).unwrap();
        out.push(within(&format!("d={d} bound"), bound, (d - 1) as f64, 0.0));
        let mut bad = 0;
        let vertices = enumerate_vertices(2, d).unwrap();
        for v in &vertices {
            let s = modular_sum(&v.alice, &v.bob, d);
            let value = f.evaluate(&vertex_behavior(v, &uniform).unwrap()).unwrap();
            if s.rem_euclid(d as i64) != (d - 1) as i64 || (value - s as f64).abs() > 1e-12 {
                bad += 1;
            }
        }
        out.push(check(
            &format!("d={d} modular identity"),
            bad == 0,
            format!("{bad} of {} vertices off", vertices.len()),
        ));
    }
    out.push(in_time("runtime", t.elapsed(), Duration::from_secs(30)));
    out
}

fn exact_vs_conjectured() -> Vec<Check> {
    (3..=6)
        .map(|d| {
            let c = conjectured_optimum(d, &ConjecturedOptions::default()).unwrap();
            let e = exact(d);
            within(&format!("d={d}"), c.divergence_bits, e.divergence_bits, 1e-3)
        })
        .collect()
}

fn additivity() -> Vec<Check> {
    let two = additivity_comparison(2, 2, TOL).unwrap();
    let four = additivity_comparison(4, 2, 1e-9).unwrap();
    let verified = two.verified_bits.unwrap_or(f64::NAN);
    let four_bits = four.verified_bits.unwrap_or(f64::NAN);
    let single = four.comparison_bits.unwrap_or(f64::NAN);
    vec![
        within("d=2 k=2 product", verified, 2.0 * 0.046, 2e-3),
        within("d=2 k=2 equals 2 D", verified, two.product_bits, 1e-6),
        check(
            "d=2 k=2 unrestricted (info)",
            true,
            format!("{:.6}", two.unrestricted_bits.unwrap_or(f64::NAN)),
        ),
        within("d=4 k=2 product", four_bits, 0.196, 2e-3),
        check(
            "d=4 k=2 beats d=16",
            four_bits > single && four.product_wins == Some(true),
            format!("{four_bits:.6} > {single:.6}"),
        ),
    ]
}

fn uniform_settings() -> Vec<Check> {
    [2, 3]
        .into_iter()
        .map(|d| {
            let opt = exact(d);
            let r = verify_uniform_settings(
                &opt.state,
                &cglmp_measurements(d, Party::Alice).unwrap(),
                &cglmp_measurements(d, Party::Bob).unwrap(),
                &[0.005, 0.02, 0.05, 0.1, 0.2],
                1e-6,
            )
            .unwrap();
            check(
                &format!("d={d} local max"),
                r.is_local_max,
                format!("{} probes, worst excess {:.2e}", r.samples.len(), r.worst_excess),
            )
        })
        .collect()
}

fn random_weights(rng: &mut ChaCha20Rng, len: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| -rng.random::<f64>().ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn random_state(rng: &mut ChaCha20Rng, d: usize) -> PureState {
    let amps = DVector::from_fn(d * d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    PureState::normalized(d, amps).unwrap()
}

/// Largest of the eight CHSH expressions; the 2 x 2 local polytope is where
/// all of them are at most 2.
fn max_chsh(q: &Behavior) -> f64 {
    let e = |x: usize, y: usize| {
        let mut v = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let sign = if a == b { 1.0 } else { -1.0 };
                v += sign * q.conditional(x, y, a, b);
            }
        }
        v
    };
    let total = e(0, 0) + e(0, 1) + e(1, 0) + e(1, 1);
    let mut best = f64::NEG_INFINITY;
    for x in 0..2 {
        for y in 0..2 {
            best = best.max((total - 2.0 * e(x, y)).abs());
        }
    }
    best
}

fn properties() -> Vec<Check> {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let uniform = SettingsDistribution::uniform(2);
    let vertices = enumerate_vertices(2, 2).unwrap();

    // Local mixtures have zero strength; the optimal fit reproduces them.
    let mut worst_local = 0.0f64;
    for _ in 0..20 {
        let model = LocalModel::new(random_weights(&mut rng, vertices.len())).unwrap();
        let p = model_behavior(&model, &vertices, &uniform).unwrap();
        worst_local = worst_local.max(min_kl_local(&p, TOL).unwrap().divergence_bits.abs());
    }
    // Entangled quantum behaviors: D >= 0, and > 0 exactly when CHSH is violated.
    let mut kl_ok = true;
    let mut mono_ok = true;
    let mut ns_worst = 0.0f64;
    for _ in 0..20 {
        let q = cglmp_q(&random_state(&mut rng, 2), &uniform);
        ns_worst = ns_worst.max(q.no_signaling_violation());
        let opts = FitOptions {
            record_trace: true,
            ..FitOptions::with_tol(TOL)
        };
        let fit = min_kl_local_with(&q, &opts).unwrap();
        let violates = max_chsh(&q) > 2.0 + 1e-6;
        kl_ok &= fit.divergence_bits >= -1e-12 && (fit.divergence_bits > 1e-7) == violates;
        mono_ok &= fit.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    }

    // Log-ratio operator at the d = 3 optimum.
    let opt = exact(3);
    let q = cglmp_q(&opt.state, &uniform);
    let fit = min_kl_local(&q, TOL).unwrap();
    let op = log_ratio_operator(
        &q,
        &fit.local_behavior,
        &cglmp_measurements(3, Party::Alice).unwrap(),
        &cglmp_measurements(3, Party::Bob).unwrap(),
    )
    .unwrap();
    let identity = (op.expectation(opt.state.amplitudes()) - fit.divergence_bits).abs();

    // Certificate at every reported optimum, and the large-d entanglement trend.
    let sweep = figure1_sweep(2, 20, SweepMode::Conjectured, 1e-9).unwrap();
    let mut gap_worst = fit.certificate_gap;
    let mut ratios = Vec::new();
    for row in &sweep {
        let r = row.result.as_ref().unwrap();
        if let Some(g) = r.certificate_gap {
            gap_worst = gap_worst.max(g);
        }
        ratios.push((row.d, r.entanglement_bits / (row.d as f64).log2()));
    }
    for d in 2..=4 {
        if let Some(g) = exact(d).certificate_gap {
            gap_worst = gap_worst.max(g);
        }
    }
    let tail: Vec<f64> = ratios.iter().filter(|(d, _)| *d >= 8).map(|(_, r)| *r).collect();
    let decreasing = ratios.windows(2).all(|w| w[1].1 < w[0].1);

    vec![
        check("local mixtures give 0", worst_local < 1e-7, format!("max {worst_local:.2e}")),
        check("D >= 0 and > 0 iff CHSH violated", kl_ok, String::new()),
        check("EM monotone", mono_ok, String::new()),
        check("KKT <= 1 + 1e-8", gap_worst <= 1e-8, format!("max gap {gap_worst:.2e}")),
        check("no-signaling", ns_worst < 1e-12, format!("max {ns_worst:.2e}")),
        check(
            "operator Hermitian",
            op.hermiticity_defect() < 1e-9,
            format!("{:.2e}", op.hermiticity_defect()),
        ),
        check("expectation identity", identity < 1e-9, format!("{identity:.2e}")),
        check(
            "E/log2 d decreasing, < 0.85 from d=8",
            decreasing && tail.iter().all(|r| *r < 0.85),
            format!("d=8 {:.4}, d=20 {:.4}", tail[0], tail[tail.len() - 1]),
        ),
    ]
}

fn empirical() -> Vec<Check> {
    let q = cglmp_behavior(&maximally_entangled(2).unwrap()).unwrap();
    let mut values: Vec<f64> = (0..20)
        .map(|seed| {
            let counts = sample_trials(&q, 1_000_000, seed).unwrap();
            empirical_strength(&counts, 1e-9).unwrap().divergence_bits
        })
        .collect();
    values.sort_by(f64::total_cmp);
    let median = 0.5 * (values[9] + values[10]);
    vec![within("median of 20 at N=1e6", median, 0.046, 0.005)]
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "CHSH baseline", chsh_baseline),
        (2, "d=3 states", table1),
        (3, "d=4 optimum", d4_optimum),
        (4, "CGLMP local bound", local_bounds),
        (5, "exact vs conjectured", exact_vs_conjectured),
        (6, "additivity", additivity),
        (7, "uniform settings", uniform_settings),
        (8, "properties", properties),
        (9, "empirical convergence", empirical),
    ];
    let mut unexpected = 0;
    for (id, title, run) in criteria {
        let checks = run();
        let pass = checks.iter().all(|c| c.pass);
        let parts: Vec<String> = checks
            .iter()
            .map(|c| {
                let mark = if c.pass { "ok" } else { "FAIL" };
                if c.detail.is_empty() {
                    format!("{} {mark}", c.name)
                } else {
                    format!("{} {mark} ({})", c.name, c.detail)
                }
            })
            .collect();
        for c in &checks {
            let expected = EXPECTED_FAILURES.contains(&(id, c.name.as_str()));
            if c.pass == expected {
                unexpected += 1;
            }
        }
        println!(
            "criterion {id} {title}: {}; {}",
            if pass { "PASS" } else { "FAIL" },
            parts.join("; ")
        );
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected result(s)");
        ExitCode::FAILURE
    } else {
        println!("all results as expected");
        ExitCode::SUCCESS
    }
}

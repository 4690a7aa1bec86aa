use std::f64::consts::{PI, SQRT_2};

use approx::assert_abs_diff_eq;
use bellstrength::bell::{
    cglmp_functional, log_ratio_operator, tilted_cglmp_max_b, tilted_cglmp_ratios,
};
use bellstrength::local::{enumerate_vertices, model_behavior, vertex_behavior, LocalModel};
use bellstrength::quantum::{
    cglmp_measurements, entropy_of_entanglement, maximally_entangled, quantum_behavior, schmidt_decompose,
    Behavior, Party, PureState, SchmidtState, SettingsDistribution,
};
use bellstrength::strength::{kl_divergence, min_kl_local, min_kl_local_with, FitOptions};
use nalgebra::DVector;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn state_from(d: usize, re: &[f64], im: &[f64]) -> PureState {
    let amps = DVector::from_fn(d * d, |i, _| C64::new(re[i], im[i]));
    PureState::normalized(d, amps).unwrap()
}

fn arb_state(d: usize) -> impl Strategy<Value = PureState> {
    (
        prop::collection::vec(-1.0f64..1.0, d * d),
        prop::collection::vec(-1.0f64..1.0, d * d),
    )
        .prop_filter("nonzero", |(re, im)| re.iter().chain(im).any(|x| x.abs() > 1e-3))
        .prop_map(move |(re, im)| state_from(d, &re, &im))
}

fn arb_weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

fn cglmp_q(state: &PureState, pm: &SettingsDistribution) -> Behavior {
    let d = state.dim();
    quantum_behavior(
        state,
        &cglmp_measurements(d, Party::Alice).unwrap(),
        &cglmp_measurements(d, Party::Bob).unwrap(),
        pm,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quantum_behaviors_do_not_signal(
        (state, pm) in (2usize..=4).prop_flat_map(|d| (arb_state(d), arb_weights(4)))
    ) {
        let q = cglmp_q(&state, &SettingsDistribution::new(2, pm).unwrap());
        prop_assert!(q.no_signaling_violation() < 1e-12);
        prop_assert!((q.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn global_phase_is_invisible(state in (2usize..=4).prop_flat_map(arb_state), theta in 0.0..(2.0 * PI)) {
        let pm = SettingsDistribution::uniform(2);
        let a = cglmp_q(&state, &pm);
        let b = cglmp_q(&state.with_global_phase(theta), &pm);
        for (x, y) in a.probs().iter().zip(b.probs()) {
            prop_assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn schmidt_round_trip(state in (2usize..=5).prop_flat_map(arb_state)) {
        let dec = schmidt_decompose(&state).unwrap();
        let back = dec.reconstruct();
        prop_assert!((back - state.amplitudes()).norm() < 1e-10);
        prop_assert!(dec.state.coeffs().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn entropy_is_at_most_log_d(w in (2usize..=6).prop_flat_map(arb_weights)) {
        let d = w.len();
        let s = SchmidtState::from_squared(&w).unwrap();
        let e = entropy_of_entanglement(&s);
        prop_assert!(e >= 0.0);
        prop_assert!(e <= (d as f64).log2() + 1e-12);
    }

    #[test]
    fn kl_is_nonnegative(
        (q, p) in (2usize..=12).prop_flat_map(|n| (arb_weights(n), arb_weights(n)))
    ) {
        prop_assert!(kl_divergence(&q, &p) >= -1e-15);
        prop_assert!(kl_divergence(&q, &q).abs() < 1e-15);
    }

    #[test]
    fn model_behavior_is_linear(a in arb_weights(16), b in arb_weights(16), t in 0.0f64..1.0) {
        let v = enumerate_vertices(2, 2).unwrap();
        let pm = SettingsDistribution::uniform(2);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let pa = model_behavior(&LocalModel::new(a).unwrap(), &v, &pm).unwrap();
        let pb = model_behavior(&LocalModel::new(b).unwrap(), &v, &pm).unwrap();
        let pmix = model_behavior(&LocalModel::new(mix).unwrap(), &v, &pm).unwrap();
        for i in 0..pmix.len() {
            prop_assert!((pmix.probs()[i] - t * pa.probs()[i] - (1.0 - t) * pb.probs()[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn local_mixtures_have_zero_strength(w in arb_weights(16)) {
        let v = enumerate_vertices(2, 2).unwrap();
        let p = model_behavior(&LocalModel::new(w).unwrap(), &v, &SettingsDistribution::uniform(2)).unwrap();
        let fit = min_kl_local(&p, 1e-10).unwrap();
        prop_assert!(fit.divergence_bits.abs() < 1e-8);
        prop_assert!(fit.certificate_gap <= 1e-10);
    }

    #[test]
    fn em_never_increases_divergence(state in arb_state(2)) {
        let q = cglmp_q(&state, &SettingsDistribution::uniform(2));
        let opts = FitOptions { record_trace: true, ..FitOptions::with_tol(1e-9) };
        let fit = min_kl_local_with(&q, &opts).unwrap();
        prop_assert!(fit.trace.windows(2).all(|w| w[1] <= w[0] + 1e-13));
        prop_assert!(fit.divergence_bits >= fit.lower_bound());
    }

    #[test]
    fn log_ratio_operator_identity(state in (2usize..=3).prop_flat_map(arb_state)) {
        let d = state.dim();
        let pm = SettingsDistribution::uniform(2);
        let q = cglmp_q(&state, &pm);
        let v = enumerate_vertices(2, d).unwrap();
        let p = model_behavior(&LocalModel::uniform(v.len()), &v, &pm).unwrap();
        let op = log_ratio_operator(
            &q,
            &p,
            &cglmp_measurements(d, Party::Alice).unwrap(),
            &cglmp_measurements(d, Party::Bob).unwrap(),
        )
        .unwrap();
        prop_assert!(op.hermiticity_defect() < 1e-9);
        let direct = kl_divergence(q.probs(), p.probs());
        prop_assert!((op.expectation(state.amplitudes()) - direct).abs() < 1e-9);
    }

    #[test]
    fn tilted_ratios_touch_one(d in 2usize..=5, frac in 0.01f64..0.99) {
        let b = frac * tilted_cglmp_max_b(d);
        let r = tilted_cglmp_ratios(d, b).unwrap();
        let pm = SettingsDistribution::uniform(2);
        let best = enumerate_vertices(2, d)
            .unwrap()
            .iter()
            .map(|v| {
                let p = vertex_behavior(v, &pm).unwrap();
                r.iter().zip(p.probs()).map(|(ri, pi)| ri * pi).sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((best - 1.0).abs() < 1e-12);
        prop_assert!(r.iter().all(|x| *x > 0.0));
    }
}

#[test]
fn maximally_entangled_has_full_entropy() {
    for d in 2..=8 {
        assert_abs_diff_eq!(
            entropy_of_entanglement(&maximally_entangled(d).unwrap()),
            (d as f64).log2(),
            epsilon = 1e-12
        );
    }
}

/// CGLMP value of |Phi_2> computed by hand: amplitude
/// `<a_j b_k|Phi+> = sum_x conj(a[x, j]) conj(b[x, k]) / sqrt 2`.
#[test]
fn chsh_value_matches_tsirelson() {
    let alice = cglmp_measurements(2, Party::Alice).unwrap();
    let bob = cglmp_measurements(2, Party::Bob).unwrap();
    let f = cglmp_functional(2).unwrap();
    let mut value = 0.0;
    for ia in 0..2 {
        for ib in 0..2 {
            let (a, b) = (alice.basis(ia), bob.basis(ib));
            for j in 0..2 {
                for k in 0..2 {
                    let amp: C64 = (0..2).map(|x| a[(x, j)].conj() * b[(x, k)].conj()).sum::<C64>() / SQRT_2;
                    value += f.coeff(ia, ib, j, k) * amp.norm_sqr();
                }
            }
        }
    }
    assert_abs_diff_eq!(value, 2.0 - SQRT_2, epsilon = 1e-12);
    let q = cglmp_q(&maximally_entangled(2).unwrap().to_pure(), &SettingsDistribution::uniform(2));
    assert_abs_diff_eq!(f.evaluate(&q).unwrap(), 2.0 - SQRT_2, epsilon = 1e-12);
}

#[test]
fn cglmp_behavior_is_nonlocal_for_every_d() {
    for d in 2..=5 {
        let q = cglmp_q(&maximally_entangled(d).unwrap().to_pure(), &SettingsDistribution::uniform(2));
        let f = cglmp_functional(d).unwrap();
        assert!(f.violated_by(f.evaluate(&q).unwrap(), 1e-9), "d = {d}");
        assert!(min_kl_local(&q, 1e-9).unwrap().divergence_bits > 0.01);
    }
}

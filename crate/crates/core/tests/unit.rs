use proptest::prelude::*;
mod common;

use common::{spec, worst_gradient_error};
use pvm_core::unit::{forward, init_weights, train_step};
use pvm_core::{LearningConfig, UnitSpec, UnitState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gradients_match_finite_differences() {
    for shape in [spec(1, 2, 0), spec(4, 2, 0), spec(4, 2, 4), spec(3, 5, 7)] {
        for seed in 0..10 {
            let e = worst_gradient_error(&shape, seed);
            assert!(e < 1e-4, "{shape:?} seed {seed}: relative error {e}");
        }
    }
}

#[test]
fn init_is_bounded_and_deterministic() {
    let s = UnitSpec { unit_id: 17, ..spec(12, 8, 24) };
    let a = init_weights(&s, 5);
    assert_eq!(a, init_weights(&s, 5));
    assert_ne!(a, init_weights(&s, 6));
    assert_ne!(a, init_weights(&UnitSpec { unit_id: 18, ..s.clone() }, 5));
    let hb = 1.0 / (s.input_dim() as f64).sqrt();
    let ob = 1.0 / (s.hidden_dim as f64).sqrt();
    assert!(a.hidden_weights.iter().all(|v| v.abs() <= hb));
    assert!(a.output_weights.iter().all(|v| v.abs() <= ob));
}

#[test]
fn first_step_seeds_features() {
    let s = spec(3, 2, 0);
    let mut st = UnitState::new(&s);
    st.precompute_features(&[0.1, 0.5, 0.9], 0.99).unwrap();
    assert_eq!(st.derivative, vec![0.5; 3]);
    assert_eq!(st.error, vec![0.5; 3]);
    for (a, b) in st.integral.iter().zip([0.1, 0.5, 0.9]) {
        assert!((a - b).abs() < 1e-15);
    }
    st.precompute_features(&[0.3, 0.5, 0.1], 0.5).unwrap();
    let want_d = [0.6, 0.5, 0.1];
    for (a, b) in st.derivative.iter().zip(want_d) {
        assert!((a - b).abs() < 1e-12);
    }
    let want_i = [0.2, 0.5, 0.5];
    for (a, b) in st.integral.iter().zip(want_i) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn wrong_signal_length_is_rejected() {
    let s = spec(3, 2, 0);
    let mut st = UnitState::new(&s);
    assert!(st.precompute_features(&[0.1, 0.2], 0.9).is_err());
}

/// Runs a unit on an alternating pattern with its own hidden state as context
/// and returns (mean error over first 100 steps, error at the final step).
fn alternation_errors(dim: usize, steps: usize) -> (f64, f64) {
    let s = spec(dim, 8, 8);
    let mut w = init_weights(&s, 0);
    let mut st = UnitState::new(&s);
    let a: Vec<f64> = (0..dim).map(|k| if k % 2 == 0 { 0.2 } else { 0.8 }).collect();
    let b: Vec<f64> = a.iter().map(|v| 1.0 - v).collect();
    let cfg = LearningConfig::default();
    let mut early = 0.0;
    let mut last = 0.0;
    for t in 0..steps {
        let sig = if t % 2 == 0 { &a } else { &b };
        let err: f64 = st.prediction.iter().zip(sig.iter()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / dim as f64;
        if t > 0 && t <= 100 {
            early += err / 100.0;
        }
        last = err;
        st.precompute_features(sig, cfg.tau_integral).unwrap();
        let hidden = st.hidden.clone();
        st.context.copy_from_slice(&hidden);
        train_step(&s, &mut w, &st, sig, cfg.learning_rate).unwrap();
        forward(&s, &w, &mut st).unwrap();
    }
    (early, last)
}

#[test]
fn unit_learns_alternation() {
    let (early, last) = alternation_errors(32, 2000);
    assert!(last < 0.25 * early, "early {early} last {last}");
}

#[test]
fn zero_learning_rate_leaves_weights() {
    let s = spec(4, 3, 2);
    let mut w = init_weights(&s, 1);
    let before = w.clone();
    let mut st = UnitState::new(&s);
    st.precompute_features(&[0.1; 4], 0.9).unwrap();
    forward(&s, &w, &mut st).unwrap();
    train_step(&s, &mut w, &st, &[0.9; 4], 0.0).unwrap();
    assert_eq!(w, before);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outputs_and_features_stay_in_unit_interval(
        seed in any::<u64>(),
        signal in 1usize..6,
        hidden in 1usize..6,
        context in 0usize..6,
        steps in 1usize..40,
    ) {
        let s = spec(signal, hidden, context);
        let mut w = init_weights(&s, seed);
        let mut st = UnitState::new(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..steps {
            let sig: Vec<f64> = (0..signal).map(|_| rng.gen()).collect();
            st.precompute_features(&sig, 0.95).unwrap();
            for c in st.context.iter_mut() {
                *c = rng.gen();
            }
            train_step(&s, &mut w, &st, &sig, 0.5).unwrap();
            forward(&s, &w, &mut st).unwrap();
            let feats = st.derivative.iter().chain(&st.integral).chain(&st.error);
            for v in feats.chain(&st.hidden).chain(&st.prediction) {
                prop_assert!((0.0..=1.0).contains(v), "{v}");
            }
        }
    }
}

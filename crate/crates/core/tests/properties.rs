//! Property tests over random qubit states and beliefs.

use proptest::prelude::*;
use qhmm::linalg::{relative_entropy, DensityOperator};
use qhmm::planner::{belief_update, Belief};
use qhmm::workx::{expected_work_arbitrary, protocol_expected_work, CaseStudyConfig};

fn bloch() -> impl Strategy<Value = [f64; 3]> {
    (0.0..1.0f64, 0.0..std::f64::consts::PI, 0.0..2.0 * std::f64::consts::PI)
        .prop_map(|(r, t, p)| [r * t.sin() * p.cos(), r * t.sin() * p.sin(), r * t.cos()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Extracted work never beats the free-energy difference D(ρ‖I/2)/β.
    #[test]
    fn work_is_bounded_by_free_energy(r in bloch(), s in bloch()) {
        let s = [s[0] * 0.95, s[1] * 0.95, s[2] * 0.95];
        let rho = DensityOperator::from_bloch(r).unwrap();
        let target = DensityOperator::from_bloch(s).unwrap();
        let w = expected_work_arbitrary(&rho, &target, 1.0);
        let bound = relative_entropy(&rho, &DensityOperator::maximally_mixed(2));
        prop_assert!(w <= bound + 1e-12);
        // A full-rank input matched by its own target reaches the bound.
        prop_assert!((expected_work_arbitrary(&target, &target, 1.0) - relative_entropy(&target, &DensityOperator::maximally_mixed(2))).abs() < 1e-9);
    }

    #[test]
    fn beliefs_stay_normalized(p in 0.0..1.0f64, phi in 0.0..std::f64::consts::PI, theta in 0.05..0.95f64, o in 0usize..2) {
        let model = CaseStudyConfig::default().model(theta).unwrap();
        if let Ok(b) = belief_update(&Belief::new(p).unwrap(), phi, o, &model) {
            prop_assert!((b.probs[0] + b.probs[1] - 1.0).abs() < 1e-12);
            prop_assert!(b.probs.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    /// No finite-M protocol beats the second law.
    #[test]
    fn protocol_obeys_second_law(r in bloch(), z in 0.05..0.9f64, m in 1usize..200) {
        let rho = DensityOperator::from_bloch(r).unwrap();
        let target = DensityOperator::diagonal(&[(1.0 + z) / 2.0, (1.0 - z) / 2.0]).unwrap();
        let exact = protocol_expected_work(&rho, &target, m, 1.0, 0.0).unwrap();
        prop_assert!(exact <= relative_entropy(&rho, &DensityOperator::maximally_mixed(2)) + 1e-12);
    }
}

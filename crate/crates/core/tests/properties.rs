use std::f64::consts::PI;

use approx::assert_relative_eq;
use otflow::energy::{self, EnergySpec};
use otflow::jko::jko_step;
use otflow::transport::{geodesic, pushforward, w2_distance};
use otflow::{Grid, PeriodicDensity, PeriodicField, Samples};
use proptest::prelude::*;

const N: usize = 128;

/// 1 + sum a_k cos(2 pi k x) + b_k sin(2 pi k x) for k = 1..4, min >= 1/2.
fn density() -> impl Strategy<Value = PeriodicDensity> {
    prop::collection::vec(-0.06..0.06f64, 8).prop_map(|c| {
        PeriodicDensity::from_fn(Grid::new(N).unwrap(), |x| {
            1.0 + (0..4)
                .map(|k| {
                    let w = 2.0 * PI * (k + 1) as f64 * x;
                    c[2 * k] * w.cos() + c[2 * k + 1] * w.sin()
                })
                .sum::<f64>()
        })
        .unwrap()
    })
}

fn spec() -> impl Strategy<Value = EnergySpec> {
    prop_oneof![
        Just(EnergySpec::Dirichlet),
        Just(EnergySpec::HigherOrder(2)),
        (0.3..2.0f64).prop_map(EnergySpec::Power),
        Just(EnergySpec::LogDirichlet),
        Just(EnergySpec::Fisher),
        (1e-3..1e-1f64).prop_map(EnergySpec::PerturbedDirichlet),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn w2_is_a_metric(a in density(), b in density(), c in density()) {
        let ab = w2_distance(&a, &b).unwrap();
        let ba = w2_distance(&b, &a).unwrap();
        let ac = w2_distance(&a, &c).unwrap();
        let bc = w2_distance(&b, &c).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-9 + 1e-6 * ab);
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!(w2_distance(&a, &a).unwrap() <= 1e-9);
    }

    #[test]
    fn geodesics_have_constant_speed(a in density(), b in density(), s in 0.1..0.9f64) {
        let d = w2_distance(&a, &b).unwrap();
        prop_assume!(d > 1e-3);
        let mid = geodesic(&a, &b, s).unwrap();
        prop_assert!((mid.mass() - 1.0).abs() < 1e-10);
        assert_relative_eq!(w2_distance(&a, &mid).unwrap(), s * d, max_relative = 2e-3);
        assert_relative_eq!(w2_distance(&mid, &b).unwrap(), (1.0 - s) * d, max_relative = 2e-3);
    }

    #[test]
    fn pushforward_keeps_mass_and_positivity(a in density(), amp in -0.02..0.02f64, k in 1u32..4) {
        let f = PeriodicField::from_fn(a.grid(), |x| amp * (2.0 * PI * k as f64 * x).sin()).unwrap();
        let v = pushforward(&a, &f).unwrap();
        prop_assert!((v.mass() - 1.0).abs() < 1e-10);
        prop_assert!(v.min() > 0.0);
    }

    #[test]
    fn energy_is_shift_invariant_and_nonnegative(a in density(), spec in spec(), shift in 0usize..N) {
        let mut rotated = a.values().to_vec();
        rotated.rotate_left(shift);
        let b = PeriodicDensity::new(rotated).unwrap();
        let (ea, eb) = (energy::evaluate(&spec, &a), energy::evaluate(&spec, &b));
        prop_assert!(ea >= 0.0);
        assert_relative_eq!(ea, eb, max_relative = 1e-10, epsilon = 1e-14);
    }

    #[test]
    fn first_variation_is_the_derivative(a in density(), spec in spec(), k in 1u32..4) {
        // v has zero mass, so u + eps v stays a probability density
        let v = PeriodicField::from_fn(a.grid(), |x| 0.1 * (2.0 * PI * k as f64 * x).cos()).unwrap();
        let phi = energy::first_variation(&spec, &a).unwrap();
        let along = |eps: f64| {
            let w: Vec<f64> = a.values().iter().zip(v.values()).map(|(u, v)| u + eps * v).collect();
            energy::evaluate(&spec, &PeriodicDensity::new(w).unwrap())
        };
        let h = 1e-4;
        let numeric = (along(h) - along(-h)) / (2.0 * h);
        let exact = phi.values().iter().zip(v.values()).map(|(p, v)| p * v).sum::<f64>() / N as f64;
        prop_assert!((numeric - exact).abs() <= 1e-5 * (1.0 + exact.abs()), "{numeric} vs {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn jko_steps_dissipate(a in density(), spec in prop_oneof![Just(EnergySpec::Dirichlet), Just(EnergySpec::Fisher)]) {
        let step = jko_step(&spec, &a, 1e-6).unwrap();
        prop_assert!((step.result.mass() - 1.0).abs() < 1e-10);
        prop_assert!(step.energy <= energy::evaluate(&spec, &a) + 1e-12);
        // the minimizer beats staying put: E(M1) + W2^2/(2 tau) <= E(M0)
        prop_assert!(step.energy + step.w2 * step.w2 / 2e-6 <= energy::evaluate(&spec, &a) + 1e-10);
    }
}

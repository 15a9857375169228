use proptest::prelude::*;
use tvflow::tv1d::evolve_with_trace;
use tvflow::{decompose, evolve, subgradient, Signal};

fn signal() -> impl Strategy<Value = Signal> {
    prop::collection::vec(0.0f64..1.0, 1..64).prop_map(|v| Signal::new(v).unwrap())
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

proptest! {
    #[test]
    fn subgradient_has_zero_mean(f in signal()) {
        let p = subgradient(&f, 0.0);
        let sum: f64 = p.values().iter().sum();
        prop_assert!(sum.abs() <= 1e-10 * f.len() as f64, "sum {}", sum);
    }

    #[test]
    fn flow_conserves_mass(f in signal(), frac in 0.0f64..1.2) {
        let flow = evolve(&f, 0.0).unwrap();
        let psi = flow.sample(frac * flow.extinction_time()).unwrap();
        prop_assert!((psi.mean() - f.mean()).abs() <= 1e-12);
    }

    #[test]
    fn plateaus_only_coarsen(f in signal()) {
        let (_, trace) = evolve_with_trace(&f, 0.0).unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[0].refines(&w[1]));
            prop_assert!(w[1].len() < w[0].len());
        }
    }

    #[test]
    fn velocity_is_the_subgradient_mid_segment(f in signal()) {
        let flow = evolve(&f, 0.0).unwrap();
        let mut start = 0.0;
        for (k, &end) in flow.times().iter().enumerate() {
            if end - start > 1e-6 {
                let psi = flow.sample(0.5 * (start + end)).unwrap();
                let p = subgradient(&psi, 1e-12);
                for (a, b) in p.values().iter().zip(flow.subgradients()[k].values()) {
                    prop_assert!((a - b).abs() <= 1e-8, "segment {}: {} vs {}", k, a, b);
                }
            }
            start = end;
        }
    }

    #[test]
    fn components_rebuild_the_signal(f in signal()) {
        let set = decompose(&evolve(&f, 0.0).unwrap());
        let rebuilt = set.reconstruct(f.len());
        let err: Vec<f64> = rebuilt.iter().zip(f.values()).map(|(a, b)| a - b).collect();
        prop_assert!(sq(&err).sqrt() <= 1e-10 * f.norm().max(1.0));
    }

    #[test]
    fn energy_splits_over_components(f in signal()) {
        let set = decompose(&evolve(&f, 0.0).unwrap());
        let m = f.mean();
        let centred: Vec<f64> = f.values().iter().map(|v| v - m).collect();
        let parts: f64 = set.components.iter().map(|c| sq(&c.phi)).sum();
        prop_assert!((parts - sq(&centred)).abs() <= 1e-10 * sq(&centred).max(1e-300));
    }

    #[test]
    fn transition_times_scale_with_amplitude(f in signal(), c in 0.1f64..10.0) {
        let scaled = Signal::new(f.values().iter().map(|v| c * v).collect()).unwrap();
        let a = evolve(&f, 0.0).unwrap();
        let b = evolve(&scaled, 0.0).unwrap();
        prop_assert_eq!(a.num_events(), b.num_events());
        for (s, t) in a.times().iter().zip(b.times()) {
            prop_assert!((c * s - t).abs() <= 1e-9 * t.max(1.0));
        }
    }
}

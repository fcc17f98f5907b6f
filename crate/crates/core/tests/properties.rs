//! Property tests for the structural invariants: round trips, partition of
//! unity, slab-lookup linearity and the jet product against a direct
//! convolution oracle.

use std::sync::OnceLock;

use proptest::prelude::*;
use resodrift_core::gevrey::{profile_a, profile_b};
use resodrift_core::jet::Jet;
use resodrift_core::path::FrequencyPath;
use resodrift_core::perturbation::{
    cos_sin_multi, polar_map, polar_map_inverse, AssemblyOptions, Chart, PerturbedSystem,
};
use resodrift_core::IntegrableModel;

fn torus_model() -> &'static IntegrableModel {
    static MODEL: OnceLock<IntegrableModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let path = FrequencyPath::on_unit_interval(vec![0.0, -1.0], vec![1.0]).unwrap();
        IntegrableModel::build(&path).unwrap()
    })
}

fn elliptic_model() -> &'static IntegrableModel {
    static MODEL: OnceLock<IntegrableModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let path = FrequencyPath::new(vec![-1.0], vec![1.0, 1.0], -0.5, 0.5).unwrap();
        IntegrableModel::build(&path).unwrap()
    })
}

fn torus_system() -> &'static PerturbedSystem {
    static SYS: OnceLock<PerturbedSystem> = OnceLock::new();
    SYS.get_or_init(|| {
        let path = FrequencyPath::on_unit_interval(vec![0.0, -1.0], vec![1.0]).unwrap();
        PerturbedSystem::assemble(&path, AssemblyOptions::new(Chart::ActionAngle, 3, 1.0, 1.0))
            .unwrap()
    })
}

proptest! {
    #[test]
    fn chart_round_trip(xs in -0.97f64..0.97, ys in 0.01f64..0.99) {
        for m in [torus_model(), elliptic_model()] {
            let (lo, hi) = m.path().domain();
            let x = xs * m.delta();
            let y = lo + (hi - lo) * ys;
            let r = m.forward_chart(x, y).unwrap();
            let back = m.inverse_chart(r[0], r[1]).unwrap();
            prop_assert!((back[1] - y).abs() < 1e-12);
        }
    }

    #[test]
    fn h_is_constant_on_lines(t in 0.02f64..0.45, xs in -0.95f64..0.95) {
        for m in [torus_model(), elliptic_model()] {
            let x = xs * m.delta();
            let base = m.eval_h([0.0, t]).unwrap();
            let on_line = m.line_point(t, x);
            prop_assert!((m.eval_h(on_line).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn polar_round_trip(t1 in -3.1f64..3.1, t2 in -3.1f64..3.1,
                        r1 in 0.01f64..2.0, r2 in 0.01f64..2.0) {
        let z = polar_map([t1, t2], [r1, r2]).unwrap();
        let (theta, r) = polar_map_inverse(z).unwrap();
        let z2 = polar_map(theta, r).unwrap();
        for i in 0..4 {
            prop_assert!((z[i] - z2[i]).abs() < 1e-12);
        }
        prop_assert!((r[0] - r1).abs() < 1e-14 * (1.0 + r1));
        prop_assert!((r[1] - r2).abs() < 1e-14 * (1.0 + r2));
    }

    #[test]
    fn ramp_partition_of_unity(gamma in 0.2f64..3.0, u in 0.001f64..0.999) {
        let s = profile_b(gamma, u) + profile_b(gamma, 1.0 - u);
        prop_assert!((s - 1.0).abs() < 1e-13);
    }

    #[test]
    fn bump_profile_is_even_and_bounded(gamma in 0.2f64..3.0, u in -0.6f64..0.6) {
        let a = profile_a(gamma, u);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - profile_a(gamma, -u)).abs() < 1e-14);
    }

    #[test]
    fn multi_angle_recurrence_matches_trig(
        t1 in -3.0f64..3.0, t2 in -3.0f64..3.0,
        m1 in -64i64..=64, m2 in -64i64..=64,
    ) {
        let (c, s) = cos_sin_multi([m1, m2], (t1.cos(), t1.sin()), (t2.cos(), t2.sin()));
        let phase = m1 as f64 * t1 + m2 as f64 * t2;
        prop_assert!((c - phase.cos()).abs() < 1e-12);
        prop_assert!((s - phase.sin()).abs() < 1e-12);
    }

    #[test]
    fn slab_lookup_matches_series_sum(t1 in 0.0f64..6.3, t2 in 0.0f64..6.3,
                                      xs in -0.99f64..0.99, y in 0.0f64..0.5) {
        let sys = torus_system();
        let r = [xs * sys.model().delta(), y];
        let naive: f64 = sys
            .channels()
            .iter()
            .filter(|c| c.active)
            .map(|c| {
                let a = resodrift_core::gevrey::bump_a(c, r);
                let kp = c.k_perp();
                c.eps * a * (t1 * kp[0] + t2 * kp[1]).cos()
            })
            .sum();
        let fast = sys.eval_f([t1, t2], r);
        prop_assert!((naive - fast).abs() <= f64::EPSILON * naive.abs().max(1e-300));
    }

    #[test]
    fn jet_product_matches_convolution_oracle(
        a in proptest::collection::vec(-2.0f64..2.0, 7),
        b in proptest::collection::vec(-2.0f64..2.0, 7),
    ) {
        let ja = Jet::from_coeffs(a.clone()).unwrap();
        let jb = Jet::from_coeffs(b.clone()).unwrap();
        let prod = ja.mul(&jb);
        for k in 0..7 {
            let direct: f64 = (0..=k).map(|j| a[j] * b[k - j]).sum();
            prop_assert!((prod.coeff(k) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn jet_exp_matches_scaled_series(c1 in -1.5f64..1.5) {
        // exp(c1·u) has coefficients c1^k / k!.
        let mut coeffs = vec![0.0; 9];
        coeffs[1] = c1;
        let e = Jet::from_coeffs(coeffs).unwrap().exp();
        let mut expect = 1.0;
        for k in 0..9 {
            if k > 0 {
                expect *= c1 / k as f64;
            }
            prop_assert!((e.coeff(k) - expect).abs() < 1e-12);
        }
    }
}

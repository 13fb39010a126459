use nalgebra::Vector3;
use proptest::prelude::*;

use sicspin::io::{read_couplings_csv, write_couplings_csv};
use sicspin::lattice::{Lattice, LatticeParams, SiteIndex};
use sicspin::placement::{CouplingMeasurement, SymmetryGroup};
use sicspin::sequences::{ddrf_phase_update, ddrf_resonance_condition, effective_rabi, wrap_angle};
use sicspin::spinphys::*;

fn vector(r: std::ops::Range<f64>) -> impl Strategy<Value = Vector3<f64>> {
    (r, 0.0..std::f64::consts::TAU, -1.0f64..1.0).prop_map(|(r, phi, ct)| {
        let st = (1.0 - ct * ct).sqrt();
        Vector3::new(st * phi.cos(), st * phi.sin(), ct) * r
    })
}

proptest! {
    #[test]
    fn dipolar_is_even_and_scales_as_inverse_cube(d in vector(1.0..25.0), lam in 0.2f64..5.0) {
        let k = Constants::default();
        let alpha = dipolar_prefactor(k.gamma_si29, k.gamma_c13);
        let c = dipolar_coupling_alpha(&d, alpha).unwrap();
        prop_assert_eq!(c, dipolar_coupling_alpha(&-d, alpha).unwrap());
        let scaled = dipolar_coupling_alpha(&(d * lam), alpha).unwrap() * lam.powi(3);
        prop_assert!((scaled - c).abs() <= 1e-12 * alpha.abs() / d.norm().powi(3));
        prop_assert!(c.abs() <= 2.0 * alpha.abs() / d.norm().powi(3) * (1.0 + 1e-12));
    }

    #[test]
    fn hyperfine_inversion_round_trips(
        a_zz in prop_oneof![-300e3f64..-1e3, 1e3f64..300e3],
        a_perp in 0.0f64..150e3,
        phi in 0.0..std::f64::consts::TAU,
        carbon in any::<bool>(),
    ) {
        let k = Constants::default();
        let sp = if carbon { k.c13() } else { k.si29() };
        let field = FieldConfig::aligned(1960.9);
        let hf = HyperfineTensor::from_parallel_perp(a_zz, a_perp, phi);
        let m = (Ms::PlusThreeHalves, Ms::MinusThreeHalves);
        let fa = nuclear_transition_frequency(&field, &sp, &hf, m.0);
        let fb = nuclear_transition_frequency(&field, &sp, &hf, m.1);
        let est = invert_hyperfine(fa, fb, &field, &sp, m).unwrap();
        prop_assert!((est.a_zz - a_zz).abs() <= 1e-6 * a_zz.abs());
        prop_assert!((est.a_perp - a_perp).abs() <= 1e-6 * a_perp.max(1e3));
    }

    #[test]
    fn wrap_angle_lands_in_half_open_interval(x in -1e4f64..1e4) {
        let w = wrap_angle(x);
        prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        prop_assert!((w.sin() - x.sin()).abs() < 1e-9 && (w.cos() - x.cos()).abs() < 1e-9);
    }

    #[test]
    fn ddrf_update_is_resonant_up_to_pi(
        f0 in 0.1e6f64..5e6, df in -300e3f64..300e3, dr in -100e3f64..100e3, tau in 1e-7f64..1e-4,
    ) {
        let f1 = f0 + df;
        let f_rf = f0 + dr;
        let upd = ddrf_phase_update(f0, f1, f_rf, tau);
        let mismatch = ddrf_resonance_condition(upd - std::f64::consts::PI, f0, f1, f_rf, tau);
        prop_assert!(mismatch.abs() < 1e-8);
        let a = effective_rabi(1.0, f0, f1, f_rf, tau);
        prop_assert_eq!(a, -effective_rabi(1.0, f1, f0, f_rf, tau));
    }

    #[test]
    fn coupling_csv_round_trips_bit_exactly(rows in prop::collection::vec((1u32..40, 1u32..40, 0.0f64..500.0, 0.01f64..2.0), 0..30)) {
        let ms: Vec<CouplingMeasurement> = rows
            .into_iter()
            .filter(|(a, b, _, _)| a != b)
            .map(|(a, b, f, s)| CouplingMeasurement::new(&format!("Si{a}"), &format!("C{b}"), f, s))
            .collect();
        let mut buf = Vec::new();
        write_couplings_csv(&mut buf, &ms).unwrap();
        let back = read_couplings_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, ms);
    }
}

proptest! {
    // Building the group dominates; fewer cases keep the debug run short.
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn point_group_preserves_vacancy_distance_and_couplings(i in -3i32..3, j in -3i32..3, k in -2i32..2, basis in 0u8..8) {
        let lattice = Lattice::new(LatticeParams::default()).unwrap();
        let group = SymmetryGroup::find(&lattice, &lattice.origin(), &[sicspin::lattice::Species::Si, sicspin::lattice::Species::C].into_iter().collect());
        prop_assert_eq!(group.order(), 6);
        let s = SiteIndex::new(i, j, k, basis);
        prop_assume!(s != lattice.origin());
        let si1 = lattice.si1();
        let p = lattice.position(&s);
        let alpha = dipolar_prefactor(1e7, 1e7);
        let c = dipolar_coupling_alpha(&(p - si1.position), alpha).unwrap();
        for op in &group.ops {
            let img = op.apply_site(&lattice, &s).expect("lattice maps to itself");
            prop_assert_eq!(img.species(), s.species());
            let q = lattice.position(&img);
            prop_assert!((q.norm() - p.norm()).abs() < 1e-9);
            // Si1 sits on the axis, so its couplings are invariant too.
            let ci = dipolar_coupling_alpha(&(q - si1.position), alpha).unwrap();
            prop_assert!((ci - c).abs() <= 1e-9 * c.abs().max(1.0));
        }
    }
}

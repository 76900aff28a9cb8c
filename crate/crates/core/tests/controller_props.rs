use nalgebra::DVector;
use proptest::prelude::*;
use softblend::controller::{alpha, blend_forces, distribute, BlendConfig, Pid, PidConfig};

proptest! {
    #[test]
    fn alpha_is_monotone_in_variance(
        c1 in 1e-3f64..1e6,
        c2 in -50.0f64..50.0,
        v1 in 0.0f64..1.0,
        dv in 0.0f64..1.0,
    ) {
        let cfg = BlendConfig::new(c1, c2).unwrap();
        let a = alpha(&DVector::from_element(1, v1), &cfg);
        let b = alpha(&DVector::from_element(1, v1 + dv), &cfg);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a);
    }

    #[test]
    fn blended_force_lies_between_components(
        a in 0.0f64..=1.0,
        ff in prop::collection::vec(-10.0f64..10.0, 3),
        fb in prop::collection::vec(-10.0f64..10.0, 3),
    ) {
        let (ff, fb) = (DVector::from_vec(ff), DVector::from_vec(fb));
        let p = blend_forces(a, &ff, &fb);
        for i in 0..3 {
            let (lo, hi) = (ff[i].min(fb[i]), ff[i].max(fb[i]));
            prop_assert!(p[i] >= lo - 1e-12 && p[i] <= hi + 1e-12);
        }
        prop_assert_eq!(blend_forces(0.0, &ff, &fb), ff.clone());
        prop_assert_eq!(blend_forces(1.0, &ff, &fb), fb.clone());
    }

    #[test]
    fn distribution_preserves_the_total(cmd in -5.0f64..5.0, dof in 1usize..6) {
        let d = distribute(&DVector::from_element(1, cmd), dof);
        prop_assert!((d.sum() - cmd).abs() <= 1e-12);
        prop_assert!(d.iter().all(|v| *v == d[0]));
    }

    #[test]
    fn pid_is_deterministic_and_saturates(errors in prop::collection::vec(-2.0f64..2.0, 1..50)) {
        let cfg = PidConfig::default();
        let mut a = Pid::new(cfg, 1).unwrap();
        let mut b = Pid::new(cfg, 1).unwrap();
        for e in &errors {
            let e = DVector::from_element(1, *e);
            let ua = a.update(&e, cfg.dt).unwrap();
            let ub = b.update(&e, cfg.dt).unwrap();
            prop_assert_eq!(&ua, &ub);
            prop_assert!(ua[0].abs() <= cfg.output_limit);
            prop_assert!(a.state.integral[0].abs() <= cfg.integral_limit);
        }
    }
}

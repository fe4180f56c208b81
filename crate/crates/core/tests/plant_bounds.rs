use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use zoh_funnel::plant::{
    bibs_state_bound, decay_estimate, worst_case_bounds, LinearIOPlant, OperatingSet, PlantModel,
};

fn stable(entries: &[f64], shift: f64) -> DMatrix<f64> {
    let mut q = DMatrix::from_row_slice(3, 3, entries);
    for i in 0..3 {
        q[(i, i)] -= shift;
    }
    q
}

fn unit_direction(v: &[f64]) -> DVector<f64> {
    let v = DVector::from_column_slice(v);
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        DVector::zeros(v.len())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matrix_exponential_respects_decay_estimate(
        entries in prop::collection::vec(-1.0f64..1.0, 9),
        shift in 2.5f64..4.0,
        t in 0.0f64..5.0,
    ) {
        let q = stable(&entries, shift);
        let est = decay_estimate(&q).unwrap();
        let exp = (&q * t).exp();
        let lhs = exp.clone().svd(false, false).singular_values.max();
        prop_assert!(lhs <= est.overshoot * (-est.rate * t).exp() * (1.0 + 1e-9));
    }

    #[test]
    fn internal_state_stays_within_bibs_bound(
        entries in prop::collection::vec(-1.0f64..1.0, 9),
        shift in 2.5f64..4.0,
        p in prop::collection::vec(-1.0f64..1.0, 3),
        eta0 in prop::collection::vec(-1.0f64..1.0, 3),
        amp in 0.0f64..2.0,
        w in 0.1f64..5.0,
    ) {
        let q = stable(&entries, shift);
        let p = DMatrix::from_column_slice(3, 1, &p);
        let eta0 = DVector::from_column_slice(&eta0);
        let bound = bibs_state_bound(&q, &p, &eta0, amp).unwrap();
        // square wave of amplitude `amp` drives the internal dynamics hardest
        let y = |t: f64| if (w * t).sin() >= 0.0 { amp } else { -amp };
        let h = 1e-3;
        let mut eta = eta0.clone();
        let mut worst = eta.norm();
        for i in 0..10_000 {
            let t = i as f64 * h;
            let f = |t: f64, e: &DVector<f64>| &q * e + &p * y(t);
            let k1 = f(t, &eta);
            let k2 = f(t + h / 2.0, &(&eta + &k1 * (h / 2.0)));
            let k3 = f(t + h / 2.0, &(&eta + &k2 * (h / 2.0)));
            let k4 = f(t + h, &(&eta + &k3 * h));
            eta += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            worst = worst.max(eta.norm());
        }
        prop_assert!(worst <= bound * (1.0 + 1e-9), "{worst} > {bound}");
    }

    #[test]
    fn worst_case_constants_dominate_operating_set(
        r0 in prop::collection::vec(-2.0f64..2.0, 4),
        r1 in prop::collection::vec(-2.0f64..2.0, 4),
        s in prop::collection::vec(-2.0f64..2.0, 6),
        g in prop::collection::vec(-0.3f64..0.3, 4),
        y in prop::collection::vec(-1.0f64..1.0, 2),
        yd in prop::collection::vec(-1.0f64..1.0, 2),
        eta in prop::collection::vec(-1.0f64..1.0, 3),
        radii in prop::collection::vec(0.0f64..3.0, 3),
        u in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let mut gamma = DMatrix::from_row_slice(2, 2, &g);
        gamma[(0, 0)] += 1.0;
        gamma[(1, 1)] += 1.0;
        let plant = LinearIOPlant::new(
            DMatrix::from_row_slice(2, 2, &r0),
            DMatrix::from_row_slice(2, 2, &r1),
            DMatrix::from_row_slice(2, 3, &s),
            gamma.clone(),
            -DMatrix::identity(3, 3),
            DMatrix::zeros(3, 2),
            DVector::zeros(3),
        ).unwrap();
        let set = OperatingSet { output: radii[0], output_rate: radii[1], internal: radii[2] };
        let b = worst_case_bounds(&plant, &set).unwrap();
        // points on the boundary of the operating set
        let y = unit_direction(&y) * set.output;
        let yd = unit_direction(&yd) * set.output_rate;
        let eta = unit_direction(&eta) * set.internal;
        let d = DVector::zeros(0);
        let f = plant.drift(&d, &y, &yd, &eta).norm();
        prop_assert!(f <= b.f_max * (1.0 + 1e-12) + 1e-12);
        let u = unit_direction(&u);
        if u.norm() > 0.0 {
            let gu = plant.gain(&d, &y, &yd, &eta) * &u;
            prop_assert!(gu.norm() <= b.g_max * (1.0 + 1e-12));
            prop_assert!(u.dot(&gu) >= b.g_min * (1.0 - 1e-12));
        }
        prop_assert!(b.g_min <= b.g_max);
    }
}

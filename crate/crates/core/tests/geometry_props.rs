use std::f64::consts::PI;

use proptest::prelude::*;
use volform_core::algebra::Basis;
use volform_core::geometry::{ComplexForm, HermitianMetricField};
use volform_core::grid::{DiffScheme, GridDomain, C64};

fn domain(res: usize) -> GridDomain {
    GridDomain::uniform(3, 2.0 * PI, res, vec![0, 2], DiffScheme::Spectral).unwrap()
}

fn trig(d: &GridDomain, c: &[f64]) -> Vec<f64> {
    d.sample(|x| {
        c[0] * x[0].cos() + c[1] * x[2].sin() + c[2] * (x[0] + x[2]).cos() + c[3] * (2.0 * x[0] - x[2]).sin()
    })
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.3f64..0.3, 4)
}

fn random_form(d: &GridDomain, p: usize, q: usize, seeds: &[f64]) -> ComplexForm {
    let len = Basis::new(d.n(), p, q).len();
    let fields = (0..len)
        .map(|k| {
            let c: Vec<f64> = (0..4).map(|j| seeds[(k * 4 + j) % seeds.len()] * (1.0 + 0.1 * k as f64)).collect();
            let re = trig(d, &c);
            let phase = C64::from_polar(1.0, seeds[k % seeds.len()] * 7.0 + k as f64);
            re.into_iter().map(|v| phase * v).collect()
        })
        .collect();
    ComplexForm::from_coeffs(d, p, q, fields)
}

fn rel_diff(a: &ComplexForm, b: &ComplexForm) -> f64 {
    (a - b).sup_norm() / a.sup_norm().max(b.sup_norm()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wedge_is_graded_commutative_and_associative(s in prop::collection::vec(-1.0f64..1.0, 12)) {
        let d = domain(6);
        let a = random_form(&d, 1, 0, &s[..4]);
        let b = random_form(&d, 1, 1, &s[4..8]);
        let c = random_form(&d, 0, 1, &s[8..]);
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap();
        // deg a = 1, deg b = 2: a∧b = b∧a
        prop_assert!(rel_diff(&ab, &ba) < 1e-13);
        let ac = a.wedge(&c).unwrap();
        let ca = c.wedge(&a).unwrap();
        prop_assert!((&ac + &ca).sup_norm() <= 1e-13 * ac.sup_norm().max(1.0));
        let left = ab.wedge(&c).unwrap();
        let right = a.wedge(&b.wedge(&c).unwrap()).unwrap();
        prop_assert!(rel_diff(&left, &right) < 1e-13);
    }

    #[test]
    fn exterior_derivatives_square_to_zero(s in prop::collection::vec(-1.0f64..1.0, 8)) {
        let d = domain(12);
        for (p, q) in [(0, 0), (1, 0), (1, 1)] {
            let f = random_form(&d, p, q, &s);
            let scale = f.sup_norm().max(1.0);
            prop_assert!(f.del().del().sup_norm() < 1e-11 * scale);
            prop_assert!(f.dbar().dbar().sup_norm() < 1e-11 * scale);
            prop_assert!((&f.del().dbar() + &f.dbar().del()).sup_norm() < 1e-11 * scale);
        }
    }

    #[test]
    fn michelsohn_root_inverts_the_power(c in coeffs(), scale in 0.5f64..2.0) {
        let d = domain(8);
        let rho = trig(&d, &c);
        let g = HermitianMetricField::kahler_perturbed(&d, &rho.iter().map(|v| 0.5 * v).collect::<Vec<_>>());
        prop_assume!(g.is_ok());
        let g = g.unwrap();
        let conformal = HermitianMetricField::conformal(&d, &rho);
        for metric in [g, conformal] {
            let q = metric.kahler_form().wedge_power(2).unwrap().scale(C64::new(scale, 0.0));
            let root = HermitianMetricField::michelsohn_root(&q).unwrap();
            prop_assert!(rel_diff(&root.kahler_form().wedge_power(2).unwrap(), &q) < 1e-12);
        }
    }

    #[test]
    fn torsion_is_exactly_antisymmetric(c in coeffs()) {
        let d = domain(8);
        let g = HermitianMetricField::balanced_root(&d, &trig(&d, &c)).unwrap();
        prop_assert_eq!(g.chern_torsion().antisymmetry_residual(), 0.0);
    }

    #[test]
    fn x_routes_agree_and_x_is_order_symmetric(c in coeffs()) {
        let d = domain(64);
        let g = HermitianMetricField::balanced_root(&d, &trig(&d, &c)).unwrap();
        let x2 = g.compute_x(2).unwrap();
        let x3 = g.compute_x(3).unwrap();
        prop_assert!(x2.discrepancy.unwrap() < 1e-9, "{:?}", x2.discrepancy);
        prop_assert!(x2.min() > -1e-9);
        // X(p) = X(n - p + 1); for n = 3 the pair (2, 2) is trivial and X(3) = X(1) = 0
        prop_assert!(x3.direct.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn derivative_commutes_with_translation(c in coeffs(), shift in 1isize..7) {
        let d = domain(8);
        let f = trig(&d, &c);
        for coord in [0, 2] {
            let df = d.d_real_r(&f, coord);
            let shifted: Vec<f64> = (0..f.len()).map(|i| f[d.translate_index(i, coord, shift)]).collect();
            let dshift = d.d_real_r(&shifted, coord);
            for i in 0..f.len() {
                prop_assert!((dshift[i] - df[d.translate_index(i, coord, shift)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scalar_and_wedge_positivity_agree(c in coeffs(), amp in 0.1f64..1.0) {
        let d = domain(24);
        let g = HermitianMetricField::balanced_root(&d, &trig(&d, &[0.3, 0.1, 0.2, 0.0])).unwrap();
        let x = g.compute_x(2).unwrap().direct;
        let phi: Vec<f64> = trig(&d, &c).iter().map(|v| amp * v).collect();
        let rep = g.mixed_volume_positivity(&phi, &x, 2).unwrap();
        prop_assert!(rep.discrepancy < 1e-10, "{}", rep.discrepancy);
    }
}

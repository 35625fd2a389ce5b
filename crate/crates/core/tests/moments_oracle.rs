mod common;

use common::*;
use proptest::prelude::*;

fn assert_close(got: Moments5, want: Moments5, tol: f64, case: &MomentCase) {
    // covariance entries are compared on the scale of v11 * max(1, y1)^k
    let s = want[2].abs().max(1e-300);
    let y1 = case.y1_s.abs().max(1.0);
    let scales = [0.0, 0.0, s * 1e-12, s * y1 * 1e-12, s * y1 * y1 * 1e-12];
    for i in 0..5 {
        let g = rel_gap(got[i], want[i], scales[i]);
        assert!(g < tol, "entry {i}: got {:e}, want {:e}, gap {g:e}, case {case:?}", got[i], want[i]);
    }
}

#[test]
fn quad_model_state_matches_ode() {
    let k = MomentCase { x_s: 0.1, y_s: 6.25e-4, y1_s: 0.08, alpha_s: 0.0073, a: -0.1409, c: 0.25, dt: 1.0 / 16000.0 };
    assert_close(closed_form(&k), moments_by_ode(&k), 1e-9, &k);
}

#[test]
fn degenerate_and_generic_regions_match_ode() {
    for &(a, c) in
        &[(0.3, 0.3), (0.3, 0.3 + 1e-9), (-2.0, -2.0), (0.0, 1e-6), (1.0, 0.5), (-1.0, 1.0), (2.0, 1.0), (0.5, 1.0)]
    {
        let k = MomentCase { x_s: 0.7, y_s: 0.2, y1_s: 1.3, alpha_s: 0.4, a, c, dt: 0.5 };
        assert_close(closed_form(&k), moments_by_ode(&k), 1e-9, &k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn closed_form_matches_ode_everywhere(
        x_s in -1.0f64..2.0,
        y_s in 1e-4f64..1.0,
        y1_s in -3.0f64..3.0,
        alpha_s in -1.0f64..1.0,
        a in -5.0f64..5.0,
        c_sign in prop::bool::ANY,
        c_mag in 1e-3f64..5.0,
        near in 0u8..4,
        dt_exp in -5.0f64..0.0,
    ) {
        let mut c = if c_sign { c_mag } else { -c_mag };
        // put a quarter of the cases on or next to the a = c locus
        if near == 0 { c = a * (1.0 + 1e-7); if c.abs() < 1e-3 { c = 1e-3; } }
        let dt = 10f64.powf(dt_exp);
        let k = MomentCase { x_s, y_s, y1_s, alpha_s, a, c, dt };
        let got = closed_form(&k);
        let want = moments_by_ode(&k);
        let s = want[2].abs();
        let y1 = y1_s.abs().max(1.0);
        let scales = [1e-12, 1e-12, s * 1e-10, s * y1 * 1e-10, s * y1 * y1 * 1e-10];
        for i in 0..5 {
            let g = rel_gap(got[i], want[i], scales[i]);
            prop_assert!(g < 1e-8, "entry {} got {:e} want {:e} gap {:e}", i, got[i], want[i], g);
        }
    }
}

use cusplab::asymptotics::{
    ansatz_energy, ansatz_value, lower_bound, residual_weighted_norms, sine_ratio, AnsatzEnergy,
};
use cusplab::geometry::{CuspProfile, StripMap};
use proptest::prelude::*;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn grad_sq(w: &impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> f64 {
    let gx = (w(x + h, y) - w(x - h, y)) / (2.0 * h);
    let gy = (w(x, y + h) - w(x, y - h)) / (2.0 * h);
    gx * gx + gy * gy
}

/// The four lower-bound terms by direct quadrature of their integral definitions.
/// `kappa = 0` is the flat solid with `z = |δ′|`.
fn lower_bound_oracle(kappa: f64, alpha: f64, eps: f64, z: f64) -> [f64; 4] {
    let height = |s: f64| kappa * s.abs().powf(1.0 + alpha) + eps;
    let zeta1 = -z;
    let zeta1p = zeta1 - eps;
    let hz = height(zeta1);
    let w1 = |x: f64, y: f64| -(x * x - y * y) / (2.0 * eps);
    let h_lin = |x: f64| hz * (x - zeta1p) / (zeta1 - zeta1p);
    let w2 = |x: f64, y: f64| (y + hz) * (y - h_lin(x)) / (2.0 * eps) + w1(zeta1, hz);
    let n = 4000;
    let boundary = -simpson(|s| s * s - height(s).powi(2), 0.0, z, n) / (2.0 * eps);
    let correction = -w1(zeta1, hz) * z;
    let fd = 1e-3 * eps;
    let grad1 = simpson(
        |s| simpson(|t| grad_sq(&w1, s, t, fd), 0.0, height(s), 64),
        0.0,
        z,
        n,
    );
    let grad2 = simpson(
        |s| simpson(|t| grad_sq(&w2, s, t, fd), 0.0, h_lin(s), 64),
        zeta1p,
        zeta1,
        400,
    );
    [boundary, correction, grad1, grad2]
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

#[test]
fn lower_bound_terms_match_their_integral_definitions() {
    for (kappa, alpha, eps) in [(1.0, 3.0, 1e-4), (2.0, 2.5, 1e-3), (0.7, 4.0, 1e-5)] {
        let r = lower_bound(&CuspProfile::power(kappa, alpha, eps, -1.0).unwrap()).unwrap();
        let z = -r.zeta1;
        assert!(close(kappa * z.powf(1.0 + alpha) + eps, 2.0 * eps, 1e-12));
        let o = lower_bound_oracle(kappa, alpha, eps, z);
        let got = [
            r.boundary_term,
            r.correction_term,
            r.gradient_o1,
            r.gradient_o2,
        ];
        for (g, o) in got.iter().zip(&o) {
            assert!(close(*g, *o, 1e-7), "alpha {alpha}: {got:?} vs {o:?}");
        }
        let combo = o[0] + o[1] - 0.5 * (o[2] + o[3]);
        assert!(close(r.value, combo, 1e-6));
    }
    let flat = lower_bound(&CuspProfile::flat(1.0, 3.0, 1e-3, -1.0, -0.5).unwrap()).unwrap();
    let o = lower_bound_oracle(0.0, 3.0, 1e-3, 0.5);
    let got = [
        flat.boundary_term,
        flat.correction_term,
        flat.gradient_o1,
        flat.gradient_o2,
    ];
    for (g, o) in got.iter().zip(&o) {
        assert!(close(*g, *o, 1e-7), "flat: {got:?} vs {o:?}");
    }
}

#[test]
fn lower_bound_leading_behaviour() {
    let r = lower_bound(&CuspProfile::power(1.0, 3.0, 1e-6, -1.0).unwrap()).unwrap();
    assert!(close(
        r.leading_term * 1e-6f64.powf(0.25),
        2.0 / 21.0,
        1e-14
    ));
    for alpha in [3.0, 4.0] {
        let r = lower_bound(&CuspProfile::power(1.0, alpha, 1e-6, -1.0).unwrap()).unwrap();
        let ratio = r.value / r.leading_term;
        assert!((0.9..=1.1).contains(&ratio), "{alpha}: {ratio}");
    }
    let f = lower_bound(&CuspProfile::flat(1.0, 3.0, 1e-6, -1.0, -0.5).unwrap()).unwrap();
    assert!(close(f.value, f.leading_term, 1e-5));
    // the test function must fit inside the cusp window
    assert!(lower_bound(&CuspProfile::power(1.0, 3.0, 1e-2, -0.2).unwrap()).is_err());
}

#[test]
fn sine_ratio_tends_to_one() {
    let mut prev = f64::INFINITY;
    for alpha in [0.5, 1.0, 2.0, 5.0, 10.0, 100.0] {
        let r = sine_ratio(alpha, 1.0).unwrap();
        assert!(r > 1.0 && r < prev);
        prev = r;
    }
    assert!(sine_ratio(10.0, 1.0).unwrap() - 1.0 < 0.02);
    assert!(sine_ratio(100.0, 1.0).unwrap() - 1.0 < 2e-4);
}

#[test]
fn ansatz_energy_grows_as_the_gap_closes() {
    for alpha in [2.0, 2.5, 3.0, 4.0] {
        let mut prev = 0.0;
        for eps in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
            let e =
                ansatz_energy(&CuspProfile::power(1.0, alpha, eps, -1.0).unwrap(), 1e-10).unwrap();
            assert!(e.total >= prev, "alpha {alpha} eps {eps}");
            prev = e.total;
        }
    }
}

#[test]
fn subcritical_ansatz_energy_is_bounded() {
    let e = |eps: f64| {
        ansatz_energy(&CuspProfile::power(1.0, 1.0, eps, -1.0).unwrap(), 1e-10)
            .unwrap()
            .total
    };
    let ratio = e(1e-6) / e(1e-8);
    assert!((0.99..=1.01).contains(&ratio), "{ratio}");
}

#[test]
fn dominant_term_carries_the_bulk() {
    let AnsatzEnergy { bulk, dominant, .. } =
        ansatz_energy(&CuspProfile::power(1.0, 3.0, 1e-8, -1.0).unwrap(), 1e-10).unwrap();
    assert!(close(bulk, dominant, 1e-2), "{bulk} vs {dominant}");
}

#[test]
fn residual_norms_are_finite_and_converge() {
    let norms: Vec<(f64, f64)> = [1e-2, 1e-4, 1e-6, 1e-8]
        .iter()
        .map(|&e| {
            residual_weighted_norms(&CuspProfile::power(1.0, 3.0, e, -1.0).unwrap(), None, 1e-9)
                .unwrap()
        })
        .collect();
    let limit = residual_weighted_norms(
        &CuspProfile::power(1.0, 3.0, 0.0, -1.0).unwrap(),
        Some(1e12),
        1e-9,
    )
    .unwrap();
    assert!(limit.0.is_finite() && limit.1.is_finite() && limit.0 > 0.0);
    let gaps: Vec<f64> = norms.iter().map(|n| (n.0 - limit.0).abs()).collect();
    assert!(
        gaps.windows(2).all(|w| w[1] <= w[0]),
        "{norms:?} vs {limit:?}"
    );
    assert!(gaps[3] <= 1e-2 * limit.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ansatz_gradient_matches_differences(
        alpha in 2.0f64..4.0,
        eps in prop::sample::select(vec![1e-2, 1e-4, 1e-6]),
        s in 0.0f64..1.0,
        x2 in 0.05f64..0.95,
    ) {
        let map = StripMap::new(&CuspProfile::power(1.0, alpha, eps, -1.0).unwrap()).unwrap();
        let ell = map.ell().finite().unwrap();
        let x1 = 1.0 + (ell - 2.0) * s * s;
        let p = ansatz_value(&map, [x1, x2]).unwrap();
        // u is quadratic in x₂, so a wide x₂ step is exact up to rounding
        let h1 = 1e-4 * (1.0 + x1);
        let h2 = 0.04;
        let f = |x: [f64; 2]| ansatz_value(&map, x).unwrap().value;
        let g1 = (f([x1 + h1, x2]) - f([x1 - h1, x2])) / (2.0 * h1);
        let g2 = (f([x1, x2 + h2]) - f([x1, x2 - h2])) / (2.0 * h2);
        let norm = p.gradient[0].hypot(p.gradient[1]);
        // differences of u cannot resolve below a few ulps of u per step
        let floor = |h: f64| 8.0 * f64::EPSILON * p.value.abs() / (2.0 * h);
        prop_assert!((g1 - p.gradient[0]).abs() <= 1e-6 * norm + floor(h1), "{} vs {}", g1, p.gradient[0]);
        prop_assert!((g2 - p.gradient[1]).abs() <= 1e-6 * norm + floor(h2), "{} vs {}", g2, p.gradient[1]);
    }
}

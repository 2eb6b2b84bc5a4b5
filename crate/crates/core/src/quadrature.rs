//! Numerical integration.
//!
//! Globally adaptive Gauss–Kronrod (7/15) integration on finite intervals, an
//! algebraic substitution for semi-infinite intervals, and fixed
//! Gauss–Legendre rules used by the finite element code.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the embedded 7-point rule (nodes XGK[1], XGK[3], XGK[5], XGK[7]).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances for adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_subdivisions: 4000,
        }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Single 15-point Kronrod panel; returns (integral, error estimate).
pub fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_with_breakpoints(f, &[a, b], opts)
}

/// Adaptive integration over consecutive panels `points[0]..points[1]..`.
///
/// Breakpoints let the caller seed the refinement where the integrand has a
/// known feature (a boundary layer, a kink).
pub fn integrate_with_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if points.len() < 2 {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let (value, error) = gauss_kronrod_15(&f, w[0], w[1]);
        evaluations += 15;
        total += value;
        total_err += error;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    let mut subdivisions = heap.len();
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if subdivisions >= opts.max_subdivisions {
            return Err(Error::Quadrature {
                value: total,
                error: total_err,
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine precision; keep its estimate.
            if worst.error > opts.abs_tol.max(opts.rel_tol * total.abs()) {
                return Err(Error::Quadrature {
                    value: total,
                    error: total_err,
                });
            }
            heap.push(worst);
            break;
        }
        let (v1, e1) = gauss_kronrod_15(&f, worst.a, mid);
        let (v2, e2) = gauss_kronrod_15(&f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }
    // Re-sum to shed the drift of the running updates.
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult {
        value,
        error,
        evaluations,
    })
}

/// Integral of `f` over `[a, +inf)` for integrands decaying like `x^-decay`
/// (`decay > 1`).
///
/// Uses `x = a + (1-t)^-q - 1` with `q = 2/(decay-1)`, which turns the tail
/// into a smooth integrand on `[0, 1)`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    decay: f64,
    opts: QuadOptions,
) -> Result<QuadResult> {
    assert!(decay > 1.0, "tail must be integrable");
    let q = 2.0 / (decay - 1.0);
    let g = |t: f64| {
        let s = 1.0 - t;
        if s <= 0.0 {
            return 0.0;
        }
        let x = a + s.powf(-q) - 1.0;
        let jac = q * s.powf(-q - 1.0);
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_with_breakpoints(g, &[0.0, 0.5, 0.9, 0.99, 1.0], opts)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Two-point Gauss abscissae on the reference interval `[-1, 1]`.
pub const GAUSS2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(
            |x| x.powi(5) - 3.0 * x * x,
            -1.0,
            2.0,
            QuadOptions::default(),
        )
        .unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand() {
        let eps: f64 = 1e-8;
        let r = integrate(|s| 1.0 / (s * s + eps), -1.0, 0.0, QuadOptions::rel(1e-12)).unwrap();
        let exact = eps.sqrt().recip() * (1.0 / eps.sqrt()).atan();
        assert!(
            (r.value / exact - 1.0).abs() < 1e-11,
            "{} vs {exact}",
            r.value
        );
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, QuadOptions::rel(1e-10)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn semi_infinite_tail() {
        let r = integrate_semi_infinite(
            |x| 1.0 / (1.0 + x).powi(3),
            0.0,
            3.0,
            QuadOptions::rel(1e-12),
        )
        .unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
        let r = integrate_semi_infinite(
            |x: f64| (1.0 + x).powf(-4.0 / 3.0),
            0.0,
            4.0 / 3.0,
            QuadOptions::rel(1e-11),
        )
        .unwrap();
        assert!((r.value - 3.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn legendre_rules() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            let sum: f64 = w.iter().sum();
            assert!((sum - 2.0).abs() < 1e-14);
            // exact for degree 2n-1
            let deg = 2 * n - 2;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((q - 2.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
        let (x, _) = gauss_legendre(2);
        assert!((x[1] - GAUSS2[1]).abs() < 1e-15);
    }

    #[test]
    fn non_convergence_reported() {
        let opts = QuadOptions {
            rel_tol: 1e-15,
            abs_tol: 0.0,
            max_subdivisions: 3,
        };
        let err = integrate(|x: f64| x.abs().sqrt(), -1.0, 1.3, opts).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }
}

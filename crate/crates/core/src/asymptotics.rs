//! Closed-form asymptotics: strip length and energy laws, the singular ansatz,
//! its energy and residuals, the Dirichlet-principle lower bound, and fits of
//! sampled energy curves.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bottom, CuspProfile, HeightJet, StripLength, StripMap};
use crate::mesh::{Mesh, Region, TransformedDomain};
use crate::quadrature::{gauss_legendre, integrate_with_breakpoints, QuadOptions, GAUSS2};
use crate::solver::FieldSolution;

/// `(pπ/(α+1)) / sin(pπ/(α+1))`.
pub fn sine_ratio(alpha: f64, p: f64) -> Result<f64> {
    let theta = p * PI / (alpha + 1.0);
    if !(alpha > 0.0 && p > 0.0) {
        return Err(Error::Parameter(format!(
            "sine_ratio needs alpha, p > 0 (got {alpha}, {p})"
        )));
    }
    if theta >= PI {
        return Err(Error::Parameter(format!(
            "sine_ratio pole: p·π/(α+1) = {theta} ≥ π"
        )));
    }
    Ok(theta / theta.sin())
}

/// Leading term `ε^{-α/(α+1)} κ^{-1/(α+1)} sine_ratio(α, 1)` of `ℓ_ε`.
pub fn ell_leading(profile: &CuspProfile) -> Result<f64> {
    profile.validate()?;
    let (k, a, e) = (profile.kappa, profile.alpha, profile.epsilon);
    if e == 0.0 {
        return Err(Error::Parameter(
            "the strip length diverges at epsilon = 0".into(),
        ));
    }
    Ok(e.powf(-a / (a + 1.0)) * k.powf(-1.0 / (a + 1.0)) * sine_ratio(a, 1.0)?)
}

/// Constants `C₁, C₂, C₃` with, for `0 ≤ x₁ < ℓ_ε` and `ε ≤ 1`,
/// `|μ_ε| ≤ C₁(1+x₁)^{-1/α}`, `H_ε(μ_ε) ≤ C₂(1+x₁)^{-1-1/α}`, `H₀′(μ_ε) ≤ C₃(1+x₁)^{-1}`.
///
/// `C₁` follows from `|μ_ε| ≤ |μ₀|`; the `ε` part of `C₂` uses `ℓ_ε < ell_leading`.
pub fn decay_constants(profile: &CuspProfile) -> Result<[f64; 3]> {
    profile.validate()?;
    if profile.is_flat() {
        return Err(Error::Parameter(
            "decay constants are stated for the power cusp".into(),
        ));
    }
    if profile.epsilon > 1.0 {
        return Err(Error::domain("epsilon", profile.epsilon, "[0, 1]"));
    }
    let (k, a) = (profile.kappa, profile.alpha);
    let x_hat = profile.delta.abs().powf(-a) / (a * k);
    let c1 = (a * k).powf(-1.0 / a) * x_hat.powf(-1.0 / a).max(1.0);
    let lead = k.powf(-1.0 / (a + 1.0)) * sine_ratio(a, 1.0)?;
    let c2 = k * c1.powf(1.0 + a) + (1.0 + lead).powf((1.0 + a) / a);
    let c3 = (1.0 + a) * k * c1.powf(a);
    Ok([c1, c2, c3])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum AsymptoticModel {
    /// `E ≈ coefficient · ε^exponent`.
    PowerLaw { coefficient: f64, exponent: f64 },
    /// `E ≈ coefficient · |ln ε|`.
    LogLaw { coefficient: f64 },
    /// `E → limit` (`None` when only boundedness is known).
    Bounded { limit: Option<f64> },
}

impl AsymptoticModel {
    /// Model energy at `epsilon`; `None` for a bounded law without a limit.
    pub fn value(&self, epsilon: f64) -> Option<f64> {
        match *self {
            AsymptoticModel::PowerLaw {
                coefficient,
                exponent,
            } => Some(coefficient * epsilon.powf(exponent)),
            AsymptoticModel::LogLaw { coefficient } => Some(coefficient * epsilon.ln().abs()),
            AsymptoticModel::Bounded { limit } => limit,
        }
    }

    /// Derivative of [`Self::value`] in `epsilon`.
    pub fn derivative(&self, epsilon: f64) -> Option<f64> {
        match *self {
            AsymptoticModel::PowerLaw {
                coefficient,
                exponent,
            } => Some(coefficient * exponent * epsilon.powf(exponent - 1.0)),
            AsymptoticModel::LogLaw { coefficient } => Some(-coefficient / epsilon),
            AsymptoticModel::Bounded { limit } => limit.map(|_| 0.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AsymptoticModel::PowerLaw { .. } => "power",
            AsymptoticModel::LogLaw { .. } => "log",
            AsymptoticModel::Bounded { .. } => "bounded",
        }
    }
}

/// Leading-order law of the Dirichlet energy as `ε → 0`.
pub fn energy_leading(profile: &CuspProfile) -> Result<AsymptoticModel> {
    profile.validate()?;
    if let Bottom::FlatBand { delta_prime } = profile.bottom {
        return Ok(AsymptoticModel::PowerLaw {
            coefficient: delta_prime.abs().powi(3) / 3.0,
            exponent: -1.0,
        });
    }
    let (k, a) = (profile.kappa, profile.alpha);
    Ok(if a < 2.0 {
        AsymptoticModel::Bounded { limit: None }
    } else if a == 2.0 {
        AsymptoticModel::LogLaw {
            coefficient: 1.0 / (3.0 * k),
        }
    } else {
        AsymptoticModel::PowerLaw {
            coefficient: k.powf(-3.0 / (1.0 + a)) * sine_ratio(a, 3.0)? / 3.0,
            exponent: 3.0 / (1.0 + a) - 1.0,
        }
    })
}

/// `C²` quintic ramp `χ(t) = 10t³ - 15t⁴ + 6t⁵` on `[0, 1]` and its derivative.
pub fn cutoff(x1: f64) -> (f64, f64) {
    if x1 <= 0.0 {
        (0.0, 0.0)
    } else if x1 >= 1.0 {
        (1.0, 0.0)
    } else {
        let t = x1;
        (
            t * t * t * (10.0 + t * (-15.0 + 6.0 * t)),
            30.0 * t * t * (1.0 - t) * (1.0 - t),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzPoint {
    pub value: f64,
    pub gradient: [f64; 2],
}

/// Ansatz gradient from the jet at `μ`, at height `x₂`.
fn ansatz_gradient(mu: f64, j: &HeightJet, x2: f64) -> [f64; 2] {
    [
        -mu * (1.0 + 0.5 * x2 * x2 * j.d2 * j.h),
        x2 * (j.h - mu * j.d1),
    ]
}

fn check_strip(map: &StripMap, x: [f64; 2]) -> Result<()> {
    let inside = x[0] >= 0.0
        && match map.ell() {
            StripLength::Finite(l) => x[0] <= l,
            StripLength::Infinite => x[0].is_finite(),
        };
    if !inside {
        return Err(Error::domain("x1", x[0], "the strip [0, ℓ]"));
    }
    if !(0.0..=1.0).contains(&x[1]) {
        return Err(Error::domain("x2", x[1], "[0, 1]"));
    }
    Ok(())
}

/// Ansatz `û = -∫₀^{x₁} μ_ε + ½x₂²[H_ε(μ_ε) - μ_ε H₀′(μ_ε)]` (no cut-off) and its gradient.
pub fn ansatz_value(map: &StripMap, x: [f64; 2]) -> Result<AnsatzPoint> {
    check_strip(map, x)?;
    let mu = map.mu(x[0])?;
    let j = map.profile().jet(mu);
    let value = -map.mu_integral(x[0])? + 0.5 * x[1] * x[1] * (j.h - mu * j.d1);
    Ok(AnsatzPoint {
        value,
        gradient: ansatz_gradient(mu, &j, x[1]),
    })
}

/// `χ(x₁)·û(x)`; zero on the block.
pub fn ansatz_with_cutoff(map: &StripMap, x: [f64; 2]) -> Result<AnsatzPoint> {
    if x[0] < 0.0 {
        if !(0.0..=1.0).contains(&x[1]) {
            return Err(Error::domain("x2", x[1], "[0, 1]"));
        }
        return Ok(AnsatzPoint {
            value: 0.0,
            gradient: [0.0; 2],
        });
    }
    let p = ansatz_value(map, x)?;
    let (c, dc) = cutoff(x[0]);
    Ok(AnsatzPoint {
        value: c * p.value,
        gradient: [c * p.gradient[0] + dc * p.value, c * p.gradient[1]],
    })
}

/// `𝔸∇v·∇v` with `t = x₂ H₀′`.
fn energy_density(t: f64, g: [f64; 2]) -> f64 {
    g[0] * g[0] - 2.0 * t * g[0] * g[1] + (1.0 + t * t) * g[1] * g[1]
}

/// Abscissae accumulating geometrically toward `0` from `lo < 0`, refined around `scale`.
fn tip_breakpoints(lo: f64, hi: f64, scale: f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    let mut t = scale * 1e-3;
    while t < -lo {
        if -t > lo && -t < hi {
            pts.push(-t);
        }
        t *= 4.0;
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnsatzEnergy {
    pub total: f64,
    /// Contribution of the cut-off band `0 ≤ x₁ ≤ 1`.
    pub band: f64,
    /// Contribution of `x₁ ≥ 1`.
    pub bulk: f64,
    /// `∫_{μ_ε(1)}^{0} ξ²/H_ε(ξ) dξ`, the dominant part of `bulk`.
    pub dominant: f64,
}

/// Energy `∫ 𝔸_ε∇u^s·∇u^s` of the cut-off ansatz over the whole strip.
pub fn ansatz_energy(profile: &CuspProfile, tol: f64) -> Result<AnsatzEnergy> {
    if profile.epsilon == 0.0 {
        return Err(Error::Parameter(
            "a gap-free profile needs a truncation; use ansatz_energy_truncated".into(),
        ));
    }
    let map = StripMap::new(profile)?;
    ansatz_energy_on(&map, None, tol)
}

/// Ansatz energy over `[0, min(L, ℓ_ε)] × [0, 1]`.
pub fn ansatz_energy_truncated(
    profile: &CuspProfile,
    truncation: f64,
    tol: f64,
) -> Result<AnsatzEnergy> {
    let map = StripMap::new(profile)?;
    ansatz_energy_on(&map, Some(truncation), tol)
}

fn ansatz_energy_on(map: &StripMap, truncation: Option<f64>, tol: f64) -> Result<AnsatzEnergy> {
    let p = *map.profile();
    let end = match (map.ell(), truncation) {
        (StripLength::Finite(l), Some(t)) => l.min(t),
        (StripLength::Finite(l), None) => l,
        (StripLength::Infinite, Some(t)) => t,
        (StripLength::Infinite, None) => {
            return Err(Error::Parameter(
                "a gap-free profile needs a truncation".into(),
            ))
        }
    };
    if !(end > 0.0) {
        return Err(Error::Parameter(format!(
            "strip end must be positive, got {end}"
        )));
    }
    let (gx, gw) = gauss_legendre(3);
    let x2_nodes: Vec<(f64, f64)> = gx
        .iter()
        .zip(&gw)
        .map(|(x, w)| (0.5 * (1.0 + x), 0.5 * w))
        .collect();
    let opts = QuadOptions::rel(tol);

    // Band: x₁ ∈ [0, min(1, end)] in strip coordinates.
    let band_end = end.min(1.0);
    let band_fn = |x1: f64| -> f64 {
        let eval = || -> Result<f64> {
            let mu = map.mu(x1)?;
            let j = p.jet(mu);
            let iu = map.mu_integral(x1)?;
            let (c, dc) = cutoff(x1);
            let mut s = 0.0;
            for &(x2, w) in &x2_nodes {
                let g = ansatz_gradient(mu, &j, x2);
                let v = -iu + 0.5 * x2 * x2 * (j.h - mu * j.d1);
                s += w * energy_density(x2 * j.d1, [c * g[0] + dc * v, c * g[1]]);
            }
            Ok(s)
        };
        eval().unwrap_or(f64::NAN)
    };
    let band = integrate_with_breakpoints(
        band_fn,
        &[0.0, 0.25 * band_end, 0.5 * band_end, band_end],
        opts,
    )?
    .value;
    if band.is_nan() {
        return Err(Error::Quadrature {
            value: band,
            error: f64::NAN,
        });
    }
    if end <= 1.0 {
        return Ok(AnsatzEnergy {
            total: band,
            band,
            bulk: 0.0,
            dominant: 0.0,
        });
    }

    // Bulk: x₁ ∈ [1, end], integrated in ξ = μ_ε(x₁) with dx₁ = dξ / H_ε(ξ).
    let lo = map.mu(1.0)?;
    let hi = map.mu(end)?;
    let bulk_fn = |xi: f64| -> f64 {
        let j = p.jet(xi);
        let mut s = 0.0;
        for &(x2, w) in &x2_nodes {
            s += w * energy_density(x2 * j.d1, ansatz_gradient(xi, &j, x2));
        }
        s / j.h
    };
    let mut pts = tip_breakpoints(lo, hi, p.inner_scale().max(1e-300));
    if let Bottom::FlatBand { delta_prime } = p.bottom {
        if delta_prime > lo && delta_prime < hi {
            pts.push(delta_prime);
            // the cusp part is tip-like near δ′
            let s = p.inner_scale();
            let mut t = s * 1e-3;
            while delta_prime - t > lo {
                pts.push(delta_prime - t);
                t *= 4.0;
            }
            pts.sort_by(f64::total_cmp);
            pts.dedup();
        }
    }
    let bulk = integrate_with_breakpoints(bulk_fn, &pts, opts)?.value;
    let dominant = integrate_with_breakpoints(|xi: f64| xi * xi / p.height(xi), &pts, opts)?.value;
    Ok(AnsatzEnergy {
        total: band + bulk,
        band,
        bulk,
        dominant,
    })
}

/// Interior and boundary residuals of the ansatz on the strip:
/// `f̂ = -div(𝔸_ε∇û)` at `x` and `r̂ = 𝔸_ε∇û·e₂ - H_ε(μ_ε)` on the top side above `x₁`.
pub fn ansatz_residuals(map: &StripMap, x: [f64; 2]) -> Result<(f64, f64)> {
    check_strip(map, x)?;
    let mu = map.mu(x[0])?;
    Ok(residuals_at(mu, &map.profile().jet(mu), x[1]))
}

fn residuals_at(mu: f64, j: &HeightJet, x2: f64) -> (f64, f64) {
    let (h, d1, d2, d3) = (j.h, j.d1, j.d2, j.d3);
    let f = x2
        * x2
        * (1.5 * h * h * d2 + 0.5 * mu * h * h * d3 - 3.0 * mu * h * d1 * d2 - 3.0 * h * d1 * d1
            + 3.0 * mu * d1 * d1 * d1);
    let r = 0.5 * mu * h * d1 * d2 + h * d1 * d1 - mu * d1 * d1 * d1;
    (f, r)
}

/// `∫_{x₁ ≥ 1} |f̂|² (1+x₁)² dx` and `∫_{x₁ ≥ 1} |r̂|² (1+x₁)² dx₁`.
pub fn residual_weighted_norms(
    profile: &CuspProfile,
    truncation: Option<f64>,
    tol: f64,
) -> Result<(f64, f64)> {
    let map = StripMap::new(profile)?;
    let end = match (map.ell(), truncation) {
        (StripLength::Finite(l), t) => t.map_or(l, |t| t.min(l)),
        (StripLength::Infinite, Some(t)) => t,
        (StripLength::Infinite, None) => {
            return Err(Error::Parameter(
                "a gap-free profile needs a truncation".into(),
            ))
        }
    };
    if end <= 1.0 {
        return Ok((0.0, 0.0));
    }
    let lo = map.mu(1.0)?;
    let hi = map.mu(end)?;
    let pts = tip_breakpoints(lo, hi, profile.inner_scale().max(1e-300));
    let opts = QuadOptions::rel(tol);
    let weight = |xi: f64| -> f64 {
        map.forward(xi.min(-f64::MIN_POSITIVE))
            .map(|x| (1.0 + x).powi(2))
            .unwrap_or(f64::NAN)
    };
    // f̂ is x₂² times a bracket; ∫₀¹ x₂⁴ dx₂ = 1/5.
    let f_norm = integrate_with_breakpoints(
        |xi: f64| {
            let j = profile.jet(xi);
            let (f, _) = residuals_at(xi, &j, 1.0);
            f * f / 5.0 * weight(xi) / j.h
        },
        &pts,
        opts,
    )?
    .value;
    let r_norm = integrate_with_breakpoints(
        |xi: f64| {
            let j = profile.jet(xi);
            let (_, r) = residuals_at(xi, &j, 1.0);
            r * r * weight(xi) / j.h
        },
        &pts,
        opts,
    )?
    .value;
    Ok((f_norm, r_norm))
}

/// `(∫ 𝔸_ε∇(u_h - u^s)·∇(u_h - u^s))^{1/2}` over the meshed domain, 2×2 Gauss per element.
pub fn regular_part_norm(
    mesh: &Mesh,
    domain: &TransformedDomain,
    solution: &FieldSolution,
) -> Result<f64> {
    let map = &domain.map;
    let p = *map.profile();
    let g = [0.5 * (1.0 + GAUSS2[0]), 0.5 * (1.0 + GAUSS2[1])];
    let ncols = mesh.columns.len() - 1;
    let per_column: Vec<f64> = (0..ncols)
        .into_par_iter()
        .map(|c| -> Result<f64> {
            let (xa, xb) = (mesh.columns[c], mesh.columns[c + 1]);
            let hx = xb - xa;
            let strip = xa >= 0.0;
            let mut col_data = Vec::with_capacity(2);
            for &s in &g {
                let x1 = xa + s * hx;
                if strip {
                    let mu = map.mu(x1)?;
                    col_data.push(Some((x1, mu, p.jet(mu), map.mu_integral(x1)?)));
                } else {
                    col_data.push(None);
                }
            }
            let mut sum = 0.0;
            for row in 0..mesh.n_across {
                let e = c * mesh.n_across + row;
                debug_assert_eq!(mesh.regions[e] == Region::Strip, strip);
                let q = mesh.quads[e];
                let (_, y) = mesh.element_box(e);
                let hy = y[1] - y[0];
                let u: Vec<f64> = q.iter().map(|&i| solution.values[i]).collect();
                for (a, &s) in g.iter().enumerate() {
                    for &t in &g {
                        let grad_h = [
                            ((1.0 - t) * (u[1] - u[0]) + t * (u[2] - u[3])) / hx,
                            ((1.0 - s) * (u[3] - u[0]) + s * (u[2] - u[1])) / hy,
                        ];
                        let x2 = y[0] + t * hy;
                        let (gs, slope) = match col_data[a] {
                            Some((x1, mu, j, iu)) => {
                                let (cv, dc) = cutoff(x1);
                                let gr = ansatz_gradient(mu, &j, x2);
                                let v = -iu + 0.5 * x2 * x2 * (j.h - mu * j.d1);
                                ([cv * gr[0] + dc * v, cv * gr[1]], x2 * j.d1)
                            }
                            None => ([0.0; 2], 0.0),
                        };
                        let d = [grad_h[0] - gs[0], grad_h[1] - gs[1]];
                        sum += 0.25 * hx * hy * energy_density(slope, d);
                    }
                }
            }
            Ok(sum)
        })
        .collect::<Result<_>>()?;
    Ok(per_column.iter().sum::<f64>().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub zeta1: f64,
    pub zeta1_prime: f64,
    /// Boundary term of `W₁` on the solid over `𝒪₁`.
    pub boundary_term: f64,
    /// `-W₁(ζ) ∫ n₂` over the same boundary piece.
    pub correction_term: f64,
    /// `∫_{𝒪₁} |∇W₁|²`.
    pub gradient_o1: f64,
    /// `∫_{𝒪₂} |∇W₂|²`.
    pub gradient_o2: f64,
    /// `boundary + correction - ½(gradient_o1 + gradient_o2)`.
    pub value: f64,
    pub leading_term: f64,
}

/// Closed-form terms of the piecewise-polynomial test function with
/// `z = |ζ₁|`, `H = H_ε(ζ₁)`, `L = ζ₁ - ζ₁′`; `kappa = 0` encodes a flat solid.
pub(crate) fn lower_bound_terms(
    kappa: f64,
    alpha: f64,
    epsilon: f64,
    z: f64,
    h: f64,
    l: f64,
) -> [f64; 4] {
    let (k, a, e) = (kappa, alpha, epsilon);
    let k2z = k * k * z.powf(3.0 + 2.0 * a);
    let kz = k * z.powf(2.0 + a);
    let z3 = z * z * z;
    let boundary = (k2z / (6.0 + 4.0 * a) - z3 / 6.0) / e + kz / (2.0 + a) + e * z / 2.0;
    let correction = (z3 - k2z) / (2.0 * e) - kz - e * z / 2.0;
    let grad1 = (k * z.powf(4.0 + a) / (4.0 + a)
        + k * k * k * z.powf(4.0 + 3.0 * a) / (12.0 + 9.0 * a))
        / (e * e)
        + (k2z / (3.0 + 2.0 * a) + z3 / 3.0) / e
        + kz / (2.0 + a)
        + e * z / 3.0;
    let grad2 = 11.0 / 48.0 * h.powi(5) / (e * e * l) + 7.0 / 48.0 * h.powi(3) * l / (e * e);
    [boundary, correction, grad1, grad2]
}

/// Dirichlet-principle lower bound from the explicit piecewise-polynomial test function.
///
/// Power cusp: `ζ₁ = -(ε/κ)^{1/(α+1)}` (so `H_ε(ζ₁) = 2ε`), `ζ₁′ = ζ₁ - ε`.
/// Flat band: `ζ₁ = δ′`, `H₀ = 0` on `(ζ₁, 0)`, `ζ₁′ = ζ₁ - ε`.
pub fn lower_bound(profile: &CuspProfile) -> Result<LowerBoundReport> {
    profile.validate()?;
    let (k, a, e) = (profile.kappa, profile.alpha, profile.epsilon);
    if e == 0.0 {
        return Err(Error::Parameter("the lower bound needs epsilon > 0".into()));
    }
    let (zeta1, terms, leading) = match profile.bottom {
        Bottom::PowerCusp => {
            if a <= 2.0 {
                return Err(Error::Parameter(format!(
                    "the lower bound is stated for alpha > 2, got {a}"
                )));
            }
            let zeta1 = -(e / k).powf(1.0 / (a + 1.0));
            let leading = (a + 1.0) / (6.0 * a + 24.0)
                * k.powf(-3.0 / (a + 1.0))
                * e.powf(3.0 / (a + 1.0) - 1.0);
            (
                zeta1,
                lower_bound_terms(k, a, e, -zeta1, 2.0 * e, e),
                leading,
            )
        }
        Bottom::FlatBand { delta_prime } => {
            let z = -delta_prime;
            (
                delta_prime,
                lower_bound_terms(0.0, a, e, z, e, e),
                z * z * z / (6.0 * e),
            )
        }
    };
    let zeta1_prime = zeta1 - e;
    let window_start = match profile.bottom {
        Bottom::PowerCusp => profile.delta,
        Bottom::FlatBand { .. } => profile.delta,
    };
    if zeta1_prime <= window_start {
        return Err(Error::Parameter(format!(
            "test-function support [{zeta1_prime}, 0] leaves the cusp window [{window_start}, 0)"
        )));
    }
    let [boundary_term, correction_term, gradient_o1, gradient_o2] = terms;
    Ok(LowerBoundReport {
        zeta1,
        zeta1_prime,
        boundary_term,
        correction_term,
        gradient_o1,
        gradient_o2,
        value: boundary_term + correction_term - 0.5 * (gradient_o1 + gradient_o2),
        leading_term: leading,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyPoint {
    pub epsilon: f64,
    pub energy: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Sampled `ε ↦ E_ε` with strictly decreasing `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCurve {
    pub points: Vec<EnergyPoint>,
}

impl EnergyCurve {
    pub fn new(points: Vec<EnergyPoint>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1].epsilon < w[0].epsilon)) {
            return Err(Error::Parameter(
                "energy curve epsilons must be strictly decreasing".into(),
            ));
        }
        if points
            .iter()
            .any(|p| !(p.energy >= 0.0) || !(p.epsilon > 0.0))
        {
            return Err(Error::Parameter(
                "energy curve needs positive epsilons and nonnegative energies".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(epsilon, energy)| EnergyPoint {
                    epsilon,
                    energy,
                    iterations: 0,
                    residual: 0.0,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawFamily {
    Log,
    Power,
    Bounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub family: LawFamily,
    /// `dE/d|ln ε|` (log) or `d ln E / d ln ε` (power); zero for bounded.
    pub slope: f64,
    pub intercept: f64,
    /// Log: the slope. Power: `exp(intercept)`. Bounded: the last energy.
    pub coefficient: f64,
    pub rms_residual: f64,
    /// Relative increments `|E_{k+1} - E_k| / E_k`.
    pub increments: Vec<f64>,
}

fn least_squares(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 1e-300) {
        return Err(Error::DegenerateFit("abscissae have zero variance".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((slope, intercept, rms))
}

pub fn fit_model(curve: &EnergyCurve, family: LawFamily) -> Result<FitResult> {
    if curve.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "need at least 4 points, got {}",
            curve.len()
        )));
    }
    let eps: Vec<f64> = curve.points.iter().map(|p| p.epsilon).collect();
    let en: Vec<f64> = curve.points.iter().map(|p| p.energy).collect();
    let increments = en.windows(2).map(|w| (w[1] - w[0]).abs() / w[0]).collect();
    match family {
        LawFamily::Log => {
            let x: Vec<f64> = eps.iter().map(|e| e.ln().abs()).collect();
            let (slope, intercept, rms) = least_squares(&x, &en)?;
            Ok(FitResult {
                family,
                slope,
                intercept,
                coefficient: slope,
                rms_residual: rms,
                increments,
            })
        }
        LawFamily::Power => {
            if en.iter().any(|&e| e <= 0.0) {
                return Err(Error::DegenerateFit(
                    "power fit needs positive energies".into(),
                ));
            }
            let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
            let y: Vec<f64> = en.iter().map(|e| e.ln()).collect();
            let (slope, intercept, rms) = least_squares(&x, &y)?;
            Ok(FitResult {
                family,
                slope,
                intercept,
                coefficient: intercept.exp(),
                rms_residual: rms,
                increments,
            })
        }
        LawFamily::Bounded => Ok(FitResult {
            family,
            slope: 0.0,
            intercept: *en.last().unwrap(),
            coefficient: *en.last().unwrap(),
            rms_residual: 0.0,
            increments,
        }),
    }
}

/// Least-squares coefficient `C` of `E ≈ C ε^p` with the exponent `p` held fixed.
pub fn fit_coefficient(curve: &EnergyCurve, exponent: f64) -> Result<f64> {
    if curve.is_empty() || curve.points.iter().any(|p| p.energy <= 0.0) {
        return Err(Error::DegenerateFit(
            "coefficient fit needs positive energies".into(),
        ));
    }
    let n = curve.len() as f64;
    let mean = curve
        .points
        .iter()
        .map(|p| p.energy.ln() - exponent * p.epsilon.ln())
        .sum::<f64>()
        / n;
    Ok(mean.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_ratio_examples() {
        assert!((sine_ratio(1.0, 1.0).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((sine_ratio(2.0, 1.0).unwrap() - 2.0 * PI / (3.0 * 3f64.sqrt())).abs() < 1e-15);
        assert!((sine_ratio(5.0, 3.0).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!(sine_ratio(2.0, 3.0).is_err());
        assert!(sine_ratio(1.0, 2.5).is_err());
    }

    #[test]
    fn ell_leading_examples() {
        let p = CuspProfile::power(1.0, 1.0, 1e-4, -1.0).unwrap();
        assert!((ell_leading(&p).unwrap() - 50.0 * PI).abs() < 1e-10);
        let p = CuspProfile::power(2.0, 2.0, 1e-6, -1.0).unwrap();
        let expect = 1e4 * 2f64.powf(-1.0 / 3.0) * sine_ratio(2.0, 1.0).unwrap();
        assert!((ell_leading(&p).unwrap() / expect - 1.0).abs() < 1e-14);
        assert!(ell_leading(&p.with_epsilon(0.0).unwrap()).is_err());
    }

    #[test]
    fn energy_laws() {
        let p = CuspProfile::power(1.0, 2.0, 1e-4, -1.0).unwrap();
        let m = energy_leading(&p).unwrap();
        assert!((m.value(1e-4).unwrap() - 3.0701).abs() < 1e-4);
        let m = energy_leading(&CuspProfile::power(1.0, 5.0, 0.0, -1.0).unwrap()).unwrap();
        match m {
            AsymptoticModel::PowerLaw {
                coefficient,
                exponent,
            } => {
                assert!((coefficient - PI / 6.0).abs() < 1e-14);
                assert!((exponent + 0.5).abs() < 1e-15);
            }
            _ => panic!(),
        }
        let f = CuspProfile::flat(1.0, 3.0, 1e-3, -1.0, -0.5).unwrap();
        assert!((energy_leading(&f).unwrap().value(1e-3).unwrap() - 41.6667).abs() < 1e-3);
        assert_eq!(
            energy_leading(&CuspProfile::power(1.0, 1.5, 0.0, -1.0).unwrap()).unwrap(),
            AsymptoticModel::Bounded { limit: None }
        );
    }

    #[test]
    fn cutoff_is_c2_ramp() {
        assert_eq!(cutoff(0.0), (0.0, 0.0));
        assert_eq!(cutoff(1.0), (1.0, 0.0));
        assert!((cutoff(0.5).0 - 0.5).abs() < 1e-15);
        let h = 1e-6;
        for t in [0.1, 0.37, 0.8] {
            let fd = (cutoff(t + h).0 - cutoff(t - h).0) / (2.0 * h);
            assert!((fd - cutoff(t).1).abs() < 1e-8);
        }
    }

    #[test]
    fn ansatz_examples() {
        let map = StripMap::new(&CuspProfile::power(1.0, 1.0, 0.0, -1.0).unwrap()).unwrap();
        let p = ansatz_value(&map, [1.0, 1.0]).unwrap();
        assert!((p.gradient[1] + 0.25).abs() < 1e-14);
        assert_eq!(ansatz_value(&map, [2.0, 0.0]).unwrap().gradient[1], 0.0);
        // -∫₀¹ -1/(1+s) ds = ln 2, plus ½(0.25 - 0.5)
        assert!((p.value - (2f64.ln() - 0.125)).abs() < 1e-13);
        assert!(ansatz_value(&map, [-0.5, 0.5]).is_err());
    }

    #[test]
    fn residual_sign_convention() {
        // f̂ = -div(𝔸∇û) by central differences of the flux.
        let p = CuspProfile::power(1.3, 3.7, 1e-2, -1.0).unwrap();
        let map = StripMap::new(&p).unwrap();
        let flux = |x: [f64; 2]| {
            let g = ansatz_value(&map, x).unwrap().gradient;
            map.coefficient_matrix(x).unwrap().apply(g)
        };
        let x = [1.7, 0.6];
        let h = 1e-5;
        let div = (flux([x[0] + h, x[1]])[0] - flux([x[0] - h, x[1]])[0]) / (2.0 * h)
            + (flux([x[0], x[1] + h])[1] - flux([x[0], x[1] - h])[1]) / (2.0 * h);
        let (f, r) = ansatz_residuals(&map, x).unwrap();
        assert!(
            (f + div).abs() < 1e-6 * (1.0 + div.abs()),
            "{f} vs {}",
            -div
        );
        let top = flux([x[0], 1.0])[1] - map.strip_flux(x[0]).unwrap();
        assert!((r - top).abs() < 1e-12);
        assert_eq!(ansatz_residuals(&map, [x[0], 0.0]).unwrap().0, 0.0);
    }

    #[test]
    fn lower_bound_leading() {
        let p = CuspProfile::power(1.0, 3.0, 1e-6, -1.0).unwrap();
        let r = lower_bound(&p).unwrap();
        assert!((r.zeta1 + 1e-6f64.powf(0.25)).abs() < 1e-15);
        assert!((r.zeta1_prime - r.zeta1 + 1e-6).abs() < 1e-16);
        let coeff = r.leading_term / 1e-6f64.powf(-0.25);
        assert!((coeff - 2.0 / 21.0).abs() < 1e-14);
        assert!((r.value / r.leading_term - 1.0).abs() < 0.1);
        assert!(lower_bound(&CuspProfile::power(1.0, 2.0, 1e-6, -1.0).unwrap()).is_err());
        assert!(lower_bound(&CuspProfile::power(1.0, 3.0, 0.5, -0.1).unwrap()).is_err());
    }

    #[test]
    fn fits_are_exact_on_synthetic_laws() {
        let eps = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
        let log: Vec<(f64, f64)> = eps.iter().map(|&e: &f64| (e, 2.0 * e.ln().abs())).collect();
        let f = fit_model(&EnergyCurve::from_pairs(&log).unwrap(), LawFamily::Log).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        let pow: Vec<(f64, f64)> = eps
            .iter()
            .map(|&e: &f64| (e, 5.0 * e.powf(-0.25)))
            .collect();
        let c = EnergyCurve::from_pairs(&pow).unwrap();
        let f = fit_model(&c, LawFamily::Power).unwrap();
        assert!((f.slope + 0.25).abs() < 1e-12);
        assert!((f.coefficient - 5.0).abs() < 1e-10);
        assert!((fit_coefficient(&c, -0.25).unwrap() - 5.0).abs() < 1e-10);
        let b = fit_model(&c, LawFamily::Bounded).unwrap();
        assert_eq!(b.increments.len(), 4);
        assert!(fit_model(
            &EnergyCurve::from_pairs(&pow[..3]).unwrap(),
            LawFamily::Power
        )
        .is_err());
        assert!(EnergyCurve::from_pairs(&[(1e-3, 1.0), (1e-2, 2.0)]).is_err());
    }
}

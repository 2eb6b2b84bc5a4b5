//! Cusp profile and the strip change of variables.
//!
//! Near the contact point the fluid domain is `{δ < ξ₁ < 0, 0 < ξ₂ < H_ε(ξ₁)}`
//! with `H_ε(ξ₁) = κ|ξ₁|^{1+α} + ε`. The map
//! `x = (ρ_ε(ξ₁), ξ₂ / H_ε(ξ₁))` with `ρ_ε(ξ₁) = ∫_δ^{ξ₁} ds / H_ε(s)` sends
//! this region onto the rectangle `R_ε = (0, ℓ_ε) × (0, 1)`; `μ_ε` is the
//! inverse of `ρ_ε`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_kronrod_15, integrate_with_breakpoints, QuadOptions};

/// Number of nodes in the cached monotone `ρ_ε` table.
pub const TABLE_NODES: usize = 1024;

const ROUND_TRIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bottom {
    PowerCusp,
    /// The solid is flat on `[δ′, 0)`; the power cusp is shifted to start at `δ′`.
    FlatBand {
        delta_prime: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuspProfile {
    pub kappa: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub bottom: Bottom,
}

/// Gap height and derivatives of the gap-free profile `H₀` at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightJet {
    pub h: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl HeightJet {
    /// `H₀` itself, i.e. `h - ε`.
    pub fn h0(&self, epsilon: f64) -> f64 {
        self.h - epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StripLength {
    Finite(f64),
    Infinite,
}

impl StripLength {
    pub fn finite(self) -> Option<f64> {
        match self {
            StripLength::Finite(l) => Some(l),
            StripLength::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, StripLength::Infinite)
    }
}

impl CuspProfile {
    pub fn new(kappa: f64, alpha: f64, epsilon: f64, delta: f64, bottom: Bottom) -> Result<Self> {
        let p = Self {
            kappa,
            alpha,
            epsilon,
            delta,
            bottom,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn power(kappa: f64, alpha: f64, epsilon: f64, delta: f64) -> Result<Self> {
        Self::new(kappa, alpha, epsilon, delta, Bottom::PowerCusp)
    }

    pub fn flat(
        kappa: f64,
        alpha: f64,
        epsilon: f64,
        delta: f64,
        delta_prime: f64,
    ) -> Result<Self> {
        Self::new(
            kappa,
            alpha,
            epsilon,
            delta,
            Bottom::FlatBand { delta_prime },
        )
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.kappa, self.alpha, epsilon, self.delta, self.bottom)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidProfile(m));
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if !(self.delta < 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be negative, got {}", self.delta));
        }
        if let Bottom::FlatBand { delta_prime } = self.bottom {
            if !(self.delta < delta_prime && delta_prime < 0.0) {
                return bad(format!(
                    "flat band needs delta < delta_prime < 0, got delta = {}, delta_prime = {delta_prime}",
                    self.delta
                ));
            }
            if self.alpha <= 2.0 {
                return bad(format!("flat band needs alpha > 2, got {}", self.alpha));
            }
        }
        Ok(())
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.bottom, Bottom::FlatBand { .. })
    }

    /// Gap height and `H₀′, H₀″, H₀‴` at `xi1 ∈ [δ, 0)`.
    pub fn height_jet(&self, xi1: f64) -> Result<HeightJet> {
        if !(xi1 >= self.delta && xi1 < 0.0) {
            return Err(Error::domain("xi1", xi1, format!("[{}, 0)", self.delta)));
        }
        Ok(self.jet(xi1))
    }

    /// Unchecked jet; also valid at the tip `xi1 = 0`.
    pub(crate) fn jet(&self, xi1: f64) -> HeightJet {
        match self.bottom {
            Bottom::PowerCusp => power_jet(self.kappa, self.alpha, self.epsilon, xi1),
            Bottom::FlatBand { delta_prime } => {
                if xi1 < delta_prime {
                    power_jet(self.kappa, self.alpha, self.epsilon, xi1 - delta_prime)
                } else {
                    HeightJet {
                        h: self.epsilon,
                        d1: 0.0,
                        d2: 0.0,
                        d3: 0.0,
                    }
                }
            }
        }
    }

    pub(crate) fn height(&self, xi1: f64) -> f64 {
        match self.bottom {
            Bottom::PowerCusp => self.kappa * (-xi1).max(0.0).powf(1.0 + self.alpha) + self.epsilon,
            Bottom::FlatBand { delta_prime } => {
                let s = (delta_prime - xi1).max(0.0);
                self.kappa * s.powf(1.0 + self.alpha) + self.epsilon
            }
        }
    }

    /// Half-width `(ε/κ)^{1/(1+α)}` of the region where the gap is dominated by `ε`.
    pub fn inner_scale(&self) -> f64 {
        (self.epsilon / self.kappa).powf(1.0 / (1.0 + self.alpha))
    }
}

fn power_jet(kappa: f64, alpha: f64, epsilon: f64, s: f64) -> HeightJet {
    let a = (-s).max(0.0);
    HeightJet {
        h: kappa * a.powf(1.0 + alpha) + epsilon,
        d1: -(1.0 + alpha) * kappa * a.powf(alpha),
        d2: (1.0 + alpha) * alpha * kappa * a.powf(alpha - 1.0),
        d3: -(1.0 + alpha) * alpha * (alpha - 1.0) * kappa * a.powf(alpha - 2.0),
    }
}

/// `ℓ_ε = ∫_δ^0 ds / H_ε(s)` by adaptive quadrature; infinite when `ε = 0`.
pub fn strip_length(profile: &CuspProfile) -> Result<StripLength> {
    profile.validate()?;
    if profile.epsilon == 0.0 {
        return Ok(StripLength::Infinite);
    }
    let (window, flat_part) = match profile.bottom {
        Bottom::PowerCusp => (profile.delta, 0.0),
        Bottom::FlatBand { delta_prime } => {
            (profile.delta - delta_prime, -delta_prime / profile.epsilon)
        }
    };
    let (k, a, e) = (profile.kappa, profile.alpha, profile.epsilon);
    let z = profile.inner_scale();
    let mut points = vec![window];
    let mut t = z * 64.0;
    while t < -window {
        points.push(-t);
        t *= 4.0;
    }
    points.sort_by(f64::total_cmp);
    for m in [16.0, 4.0, 1.0, 0.25] {
        if z * m < -window {
            points.push(-z * m);
        }
    }
    points.push(0.0);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let r = integrate_with_breakpoints(
        |s: f64| 1.0 / (k * (-s).powf(1.0 + a) + e),
        &points,
        QuadOptions::rel(1e-10),
    )?;
    Ok(StripLength::Finite(r.value + flat_part))
}

/// Lookup table for a power cusp `H(s) = κ|s|^{1+α} + ε` on `[window, 0)`.
#[derive(Debug, Clone)]
struct CuspTable {
    kappa: f64,
    alpha: f64,
    epsilon: f64,
    window: f64,
    /// Increasing abscissae from `window` to `0`, with `ρ` and `∫ s/H(s) ds` at each.
    xi: Vec<f64>,
    rho: Vec<f64>,
    first_moment: Vec<f64>,
}

impl CuspTable {
    fn new(kappa: f64, alpha: f64, epsilon: f64, window: f64) -> Result<Self> {
        let mut table = Self {
            kappa,
            alpha,
            epsilon,
            window,
            xi: Vec::new(),
            rho: Vec::new(),
            first_moment: Vec::new(),
        };
        if epsilon == 0.0 {
            return Ok(table);
        }
        let z = (epsilon / kappa).powf(1.0 / (1.0 + alpha));
        let a_max = -window;
        let a_min = a_max.min(z) * 1e-6;
        let n = TABLE_NODES - 1;
        let ratio = (a_min / a_max).powf(1.0 / (n - 1) as f64);
        let mut xi: Vec<f64> = (0..n).map(|i| -a_max * ratio.powi(i as i32)).collect();
        xi[0] = window;
        xi[n - 1] = -a_min;
        xi.push(0.0);
        let mut rho = Vec::with_capacity(xi.len());
        let mut moment = Vec::with_capacity(xi.len());
        rho.push(0.0);
        moment.push(0.0);
        for w in xi.windows(2) {
            let dr = table.piece(|s| 1.0 / table.h(s), w[0], w[1])?;
            let dm = table.piece(|s| s / table.h(s), w[0], w[1])?;
            rho.push(rho.last().unwrap() + dr);
            moment.push(moment.last().unwrap() + dm);
        }
        table.xi = xi;
        table.rho = rho;
        table.first_moment = moment;
        Ok(table)
    }

    fn h(&self, s: f64) -> f64 {
        self.kappa * (-s).max(0.0).powf(1.0 + self.alpha) + self.epsilon
    }

    fn piece<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        let opts = QuadOptions {
            rel_tol: 1e-14,
            abs_tol: 1e-300,
            max_subdivisions: 200,
        };
        let (v, e) = gauss_kronrod_15(&f, a, b);
        if e <= 1e-14 * v.abs() {
            return Ok(v);
        }
        Ok(integrate_with_breakpoints(f, &[a, b], opts)?.value)
    }

    fn ell(&self) -> StripLength {
        if self.epsilon == 0.0 {
            StripLength::Infinite
        } else {
            StripLength::Finite(*self.rho.last().unwrap())
        }
    }

    /// `x̂₁ = (ακ)^{-1} |window|^{-α}`.
    fn x_hat(&self) -> f64 {
        (-self.window).powf(-self.alpha) / (self.alpha * self.kappa)
    }

    /// Closed-form inverse for `ε = 0`.
    fn mu_zero(&self, x1: f64) -> f64 {
        -(self.alpha * self.kappa).powf(-1.0 / self.alpha)
            * (x1 + self.x_hat()).powf(-1.0 / self.alpha)
    }

    fn locate(nodes: &[f64], v: f64) -> usize {
        match nodes.binary_search_by(|p| p.total_cmp(&v)) {
            Ok(i) => i.min(nodes.len() - 2),
            Err(i) => i.saturating_sub(1).min(nodes.len() - 2),
        }
    }

    /// `ρ(ξ)` for `ξ ∈ [window, 0]`.
    fn rho(&self, xi: f64) -> Result<f64> {
        if self.epsilon == 0.0 {
            return Ok(((-xi).powf(-self.alpha) - (-self.window).powf(-self.alpha))
                / (self.alpha * self.kappa));
        }
        let k = Self::locate(&self.xi, xi);
        if xi == self.xi[k] {
            return Ok(self.rho[k]);
        }
        Ok(self.rho[k] + self.piece(|s| 1.0 / self.h(s), self.xi[k], xi)?)
    }

    /// `∫_window^ξ s/H(s) ds`.
    fn moment(&self, xi: f64) -> Result<f64> {
        if self.epsilon == 0.0 {
            // ∫ s/(κ|s|^{1+α}) ds = -(1/κ) ∫ a^{-α} da over a ∈ [|ξ|, |w|].
            let (a, w) = (-xi, -self.window);
            let v = if (self.alpha - 1.0).abs() < 1e-15 {
                (w / a).ln()
            } else {
                (w.powf(1.0 - self.alpha) - a.powf(1.0 - self.alpha)) / (1.0 - self.alpha)
            };
            return Ok(-v / self.kappa);
        }
        let k = Self::locate(&self.xi, xi);
        if xi == self.xi[k] {
            return Ok(self.first_moment[k]);
        }
        Ok(self.first_moment[k] + self.piece(|s| s / self.h(s), self.xi[k], xi)?)
    }

    /// `μ(x₁)` for `x₁ ∈ [0, ℓ]`.
    fn mu(&self, x1: f64) -> Result<f64> {
        if self.epsilon == 0.0 {
            return Ok(self.mu_zero(x1));
        }
        let ell = *self.rho.last().unwrap();
        if x1 >= ell {
            return Ok(0.0);
        }
        let k = Self::locate(&self.rho, x1);
        let (mut lo, mut hi) = (self.xi[k], self.xi[k + 1]);
        if x1 == self.rho[k] {
            return Ok(lo);
        }
        let tol = ROUND_TRIP_TOL * (1.0 + x1);
        let mut xi = self.mu_zero(x1).clamp(lo, hi);
        if !(xi > lo && xi < hi) {
            xi = 0.5 * (lo + hi);
        }
        for _ in 0..100 {
            let f = self.rho(xi)? - x1;
            if f.abs() <= tol {
                return Ok(xi);
            }
            if f > 0.0 {
                hi = xi;
            } else {
                lo = xi;
            }
            let newton = xi - f * self.h(xi);
            xi = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()) {
                return Ok(xi);
            }
        }
        Ok(xi)
    }
}

/// Change of variables between the cusp window and the strip.
#[derive(Debug, Clone)]
pub struct StripMap {
    profile: CuspProfile,
    cusp: CuspTable,
    /// Offset of the cusp part (`δ′` for a flat band, `0` otherwise).
    shift: f64,
    ell_cusp: StripLength,
    ell: StripLength,
}

impl StripMap {
    pub fn new(profile: &CuspProfile) -> Result<Self> {
        profile.validate()?;
        let shift = match profile.bottom {
            Bottom::PowerCusp => 0.0,
            Bottom::FlatBand { delta_prime } => delta_prime,
        };
        let cusp = CuspTable::new(
            profile.kappa,
            profile.alpha,
            profile.epsilon,
            profile.delta - shift,
        )?;
        let ell_cusp = cusp.ell();
        let ell = match ell_cusp {
            StripLength::Finite(l) => StripLength::Finite(l - shift / profile.epsilon),
            StripLength::Infinite => StripLength::Infinite,
        };
        Ok(Self {
            profile: *profile,
            cusp,
            shift,
            ell_cusp,
            ell,
        })
    }

    pub fn profile(&self) -> &CuspProfile {
        &self.profile
    }

    pub fn ell(&self) -> StripLength {
        self.ell
    }

    /// Length of the cusp part of the strip (`ℓ̂_ε` for a flat band, `ℓ_ε` otherwise).
    pub fn ell_cusp(&self) -> StripLength {
        self.ell_cusp
    }

    /// `x̂₁` of the closed-form `μ₀`.
    pub fn x_hat(&self) -> f64 {
        self.cusp.x_hat()
    }

    /// Closed-form `μ₀(x₁)` of the gap-free profile (cusp part).
    pub fn mu_zero(&self, x1: f64) -> f64 {
        self.cusp.mu_zero(x1) + self.shift
    }

    fn check_x1(&self, x1: f64, allow_end: bool) -> Result<()> {
        let ok = match self.ell {
            StripLength::Finite(l) => x1 >= 0.0 && (x1 < l || (allow_end && x1 == l)),
            StripLength::Infinite => x1 >= 0.0 && x1.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            let domain = match self.ell {
                StripLength::Finite(l) => format!("[0, {l})"),
                StripLength::Infinite => "[0, inf)".to_string(),
            };
            Err(Error::domain("x1", x1, domain))
        }
    }

    /// `ρ_ε(ξ₁)` for `ξ₁ ∈ [δ, 0)`.
    pub fn forward(&self, xi1: f64) -> Result<f64> {
        let p = &self.profile;
        if !(xi1 >= p.delta && xi1 < 0.0) {
            return Err(Error::domain("xi1", xi1, format!("[{}, 0)", p.delta)));
        }
        if xi1 < self.shift || self.shift == 0.0 {
            return self.cusp.rho(xi1 - self.shift);
        }
        match self.ell_cusp {
            StripLength::Finite(l) => Ok(l + (xi1 - self.shift) / p.epsilon),
            StripLength::Infinite => Err(Error::domain(
                "xi1",
                xi1,
                format!("[{}, {}) for a gap-free flat band", p.delta, self.shift),
            )),
        }
    }

    /// `μ_ε(x₁)` for `x₁ ∈ [0, ℓ_ε)`.
    pub fn inverse(&self, x1: f64) -> Result<f64> {
        self.check_x1(x1, false)?;
        self.mu(x1)
    }

    /// Like [`Self::inverse`] but also accepts the tip `x₁ = ℓ_ε`.
    pub(crate) fn mu(&self, x1: f64) -> Result<f64> {
        match self.ell_cusp {
            StripLength::Finite(l) if x1 >= l => Ok(self.profile.epsilon * (x1 - l) + self.shift),
            _ => Ok(self.cusp.mu(x1)? + self.shift),
        }
    }

    /// `∫₀^{x₁} μ_ε(s) ds`.
    pub fn mu_integral(&self, x1: f64) -> Result<f64> {
        self.check_x1(x1, true)?;
        let shift = self.shift;
        match self.ell_cusp {
            StripLength::Finite(l) if x1 >= l => {
                let head = self.cusp.moment(0.0)? + shift * l;
                let t = x1 - l;
                Ok(head + 0.5 * self.profile.epsilon * t * t + shift * t)
            }
            _ => {
                let mu_hat = self.cusp.mu(x1)?;
                Ok(self.cusp.moment(mu_hat)? + shift * x1)
            }
        }
    }

    /// Height jet at `μ_ε(x₁)`.
    pub fn jet_at(&self, x1: f64) -> Result<HeightJet> {
        self.check_x1(x1, true)?;
        Ok(self.profile.jet(self.mu(x1)?))
    }

    /// Neumann datum `H_ε(μ_ε(x₁))` on the top side of the strip.
    pub fn strip_flux(&self, x1: f64) -> Result<f64> {
        self.check_x1(x1, true)?;
        Ok(self.profile.height(self.mu(x1)?))
    }

    /// `𝔸_ε(x)`: identity on the block `x₁ < 0`, explicit formula on the strip.
    pub fn coefficient_matrix(&self, x: [f64; 2]) -> Result<SymmetricMatrix2> {
        if !(0.0..=1.0).contains(&x[1]) {
            return Err(Error::domain("x2", x[1], "[0, 1]"));
        }
        if x[0] < 0.0 {
            return Ok(SymmetricMatrix2::identity());
        }
        self.check_x1(x[0], true)?;
        let d1 = self.profile.jet(self.mu(x[0])?).d1;
        Ok(SymmetricMatrix2::strip(x[1] * d1))
    }
}

/// Symmetric 2×2 matrix `[[a11, a12], [a12, a22]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricMatrix2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymmetricMatrix2 {
    pub fn identity() -> Self {
        Self {
            a11: 1.0,
            a12: 0.0,
            a22: 1.0,
        }
    }

    /// `Id + t·[[0, -1], [-1, t]]` with `t = x₂ H₀′(μ_ε(x₁))`.
    pub fn strip(t: f64) -> Self {
        Self {
            a11: 1.0,
            a12: -t,
            a22: 1.0 + t * t,
        }
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a12 * v[0] + self.a22 * v[1],
        ]
    }

    pub fn quadratic_form(&self, v: [f64; 2]) -> f64 {
        let w = self.apply(v);
        w[0] * v[0] + w[1] * v[1]
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let r = (0.25 * (self.a11 - self.a22).powi(2) + self.a12 * self.a12).sqrt();
        let hi = mean + r;
        // the product is the determinant; avoids cancellation in mean - r
        let lo = if hi > 0.0 { self.det() / hi } else { mean - r };
        (lo, hi)
    }
}

/// `F₂(X) = 1 + X(X + √(X²+4))/2`.
pub fn ellipticity_upper(x: f64) -> f64 {
    1.0 + 0.5 * x * (x + (x * x + 4.0).sqrt())
}

/// `F₁(X) = 1 + X(X - √(X²+4))/2`, evaluated as `1/F₂(X)` (`F₁F₂ = 1`).
pub fn ellipticity_lower(x: f64) -> f64 {
    1.0 / ellipticity_upper(x)
}

/// Uniform ellipticity constants `(λ₁, λ₂) = (F₁(M), F₂(M))`, `M = (α+1)κ|δ|^α`.
pub fn eigen_bounds(profile: &CuspProfile) -> (f64, f64) {
    let m = (profile.alpha + 1.0) * profile.kappa * (-profile.delta).powf(profile.alpha);
    (ellipticity_lower(m), ellipticity_upper(m))
}

/// Compensating datum on the top edge of the block: `-2·flux·sin²(πx₁)` on
/// `[-1, 0]`, zero further left. Integrates to `-flux`.
pub fn block_flux(x1: f64, flux: f64) -> f64 {
    if (-1.0..=0.0).contains(&x1) {
        let s = (PI * x1).sin();
        -2.0 * flux * s * s
    } else {
        0.0
    }
}

/// Primitive of [`block_flux`] from `-1`.
pub(crate) fn block_flux_primitive(x1: f64, flux: f64) -> f64 {
    let t = x1.clamp(-1.0, 0.0);
    let p = |t: f64| t / 2.0 - (2.0 * PI * t).sin() / (4.0 * PI);
    -2.0 * flux * (p(t) - p(-1.0))
}

//! Vertical approach of a rigid body driven by the added mass `m_f(ε) = ϱ_f E(ε)`.
//!
//! Energy conservation `(m_s + m_f(ε)) ε′² = (m_s + m_f(ε*)) ε₀′²` gives the
//! first-order law for `ε′`; the integrator instead advances the pair `(ε, ε′)`
//! with `ε″ = -m_f′(ε) ε′² / (2(m_s + m_f(ε)))`, so the conserved quantity is an
//! independent accuracy check rather than an identity.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{energy_leading, AsymptoticModel, EnergyCurve};
use crate::error::{Error, Result};
use crate::geometry::CuspProfile;

/// Tabulated energies whose growth rate `dE/d ln(1/ε) ~ ε^q` decays with `q`
/// above this count as bounded. A logarithmic law has `q = 0`, a converging
/// sub-critical cusp `q = (2-α)/(1+α)`.
const BOUNDED_GROWTH_DECAY: f64 = 0.02;

/// Monotone piecewise-linear interpolation of `ln E` against `ln ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassTable {
    /// Ascending.
    log_eps: Vec<f64>,
    log_energy: Vec<f64>,
}

impl MassTable {
    pub fn from_curve(curve: &EnergyCurve) -> Result<Self> {
        if curve.len() < 2 {
            return Err(Error::Parameter(
                "a mass table needs at least two points".into(),
            ));
        }
        let mut pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.epsilon, p.energy)).collect();
        pts.reverse();
        if pts.iter().any(|&(_, e)| !(e > 0.0)) {
            return Err(Error::Parameter(
                "a mass table needs positive energies".into(),
            ));
        }
        // m_f must be nonincreasing in ε.
        if pts.windows(2).any(|w| w[1].1 > w[0].1) {
            return Err(Error::Parameter(
                "tabulated energy must be nonincreasing in epsilon".into(),
            ));
        }
        Ok(Self {
            log_eps: pts.iter().map(|p| p.0.ln()).collect(),
            log_energy: pts.iter().map(|p| p.1.ln()).collect(),
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.log_eps[0].exp(), self.log_eps.last().unwrap().exp())
    }

    fn segment(&self, epsilon: f64) -> Result<(usize, f64)> {
        let (lo, hi) = self.range();
        // one ulp of slack at both ends so tabulated endpoints round-trip
        if !(epsilon >= lo * (1.0 - 1e-14) && epsilon <= hi * (1.0 + 1e-14)) {
            return Err(Error::Extrapolation { epsilon, lo, hi });
        }
        let x = epsilon
            .ln()
            .clamp(self.log_eps[0], *self.log_eps.last().unwrap());
        let i = self
            .log_eps
            .partition_point(|&v| v <= x)
            .clamp(1, self.log_eps.len() - 1)
            - 1;
        Ok((i, x))
    }

    /// Interpolated energy and its derivative in `ε`.
    pub fn eval(&self, epsilon: f64) -> Result<(f64, f64)> {
        let (i, x) = self.segment(epsilon)?;
        let slope =
            (self.log_energy[i + 1] - self.log_energy[i]) / (self.log_eps[i + 1] - self.log_eps[i]);
        let e = (self.log_energy[i] + slope * (x - self.log_eps[i])).exp();
        Ok((e, slope * e / epsilon))
    }

    /// Exponent `q` of `dE/d ln(1/ε) ~ ε^q` from the last two segments;
    /// `+∞` when the energy stops growing, `None` below three points.
    pub fn growth_decay(&self) -> Option<f64> {
        if self.log_eps.len() < 3 {
            return None;
        }
        let rate = |i: usize| {
            let de = self.log_energy[i + 1].exp() - self.log_energy[i].exp();
            (
                de / (self.log_eps[i + 1] - self.log_eps[i]),
                0.5 * (self.log_eps[i] + self.log_eps[i + 1]),
            )
        };
        // ascending ε: segment 0 is the tail
        let (tail, m_tail) = rate(0);
        let (prev, m_prev) = rate(1);
        if tail >= 0.0 {
            return Some(f64::INFINITY);
        }
        if prev >= 0.0 {
            return Some(f64::NEG_INFINITY);
        }
        Some((tail / prev).ln() / (m_tail - m_prev))
    }

    /// `d ln E / d ln ε` on the smallest-ε segment.
    pub fn tail_slope(&self) -> f64 {
        (self.log_energy[1] - self.log_energy[0]) / (self.log_eps[1] - self.log_eps[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum MassModel {
    FromModel { model: AsymptoticModel },
    FromCurve { table: MassTable },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionSetup {
    pub m_s: f64,
    pub rho_f: f64,
    pub eps_star: f64,
    /// Initial velocity `ε′(0)`, negative.
    pub v0: f64,
    pub mass_model: MassModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    RealShock,
    SmoothLanding,
    Unresolved,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::RealShock => "RealShock",
            Regime::SmoothLanding => "SmoothLanding",
            Regime::Unresolved => "Unresolved",
        }
    }
}

impl CollisionSetup {
    pub fn new(
        m_s: f64,
        rho_f: f64,
        eps_star: f64,
        v0: f64,
        mass_model: MassModel,
    ) -> Result<Self> {
        let s = Self {
            m_s,
            rho_f,
            eps_star,
            v0,
            mass_model,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_s > 0.0 && self.m_s.is_finite()) {
            return Err(Error::domain("m_s", self.m_s, "(0, ∞)"));
        }
        if !(self.rho_f > 0.0 && self.rho_f.is_finite()) {
            return Err(Error::domain("rho_f", self.rho_f, "(0, ∞)"));
        }
        if !(self.eps_star > 0.0 && self.eps_star.is_finite()) {
            return Err(Error::domain("eps_star", self.eps_star, "(0, ∞)"));
        }
        if !(self.v0 < 0.0 && self.v0.is_finite()) {
            return Err(Error::domain("v0", self.v0, "(-∞, 0)"));
        }
        if let MassModel::FromModel {
            model: AsymptoticModel::Bounded { limit: None },
        } = self.mass_model
        {
            return Err(Error::Parameter(
                "a bounded mass model needs its limit value".into(),
            ));
        }
        Ok(())
    }

    /// `m_f` and `dm_f/dε`.
    fn mass_jet(&self, epsilon: f64) -> Result<(f64, f64)> {
        if !(epsilon > 0.0) {
            return Err(Error::domain("epsilon", epsilon, "(0, ∞)"));
        }
        let (e, de) = match &self.mass_model {
            MassModel::FromModel { model } => {
                match (model.value(epsilon), model.derivative(epsilon)) {
                    (Some(v), Some(d)) => (v, d),
                    _ => {
                        return Err(Error::Parameter(
                            "a bounded mass model needs its limit value".into(),
                        ))
                    }
                }
            }
            MassModel::FromCurve { table } => table.eval(epsilon)?,
        };
        Ok((self.rho_f * e, self.rho_f * de))
    }

    /// Conserved quantity `(m_s + m_f(ε)) ε′²`.
    pub fn invariant(&self, epsilon: f64, v: f64) -> Result<f64> {
        Ok((self.m_s + added_mass(self, epsilon)?) * v * v)
    }

    /// Exponent `p` of `m_f ~ ε^p` used for the landing threshold.
    fn effective_exponent(&self) -> f64 {
        match &self.mass_model {
            MassModel::FromModel {
                model: AsymptoticModel::PowerLaw { exponent, .. },
            } => *exponent,
            MassModel::FromModel { .. } => 0.0,
            MassModel::FromCurve { table } => table.tail_slope(),
        }
    }
}

pub fn added_mass(setup: &CollisionSetup, epsilon: f64) -> Result<f64> {
    Ok(setup.mass_jet(epsilon)?.0)
}

/// `ε′ = ε₀′ √((m_s + m_f(ε*)) / (m_s + m_f(ε)))`.
pub fn velocity_rhs(setup: &CollisionSetup, epsilon: f64) -> Result<f64> {
    let top = setup.m_s + added_mass(setup, setup.eps_star)?;
    let here = setup.m_s + added_mass(setup, epsilon)?;
    Ok(setup.v0 * (top / here).sqrt())
}

/// Contact regime predicted from the energy law.
pub fn classify_model(model: &AsymptoticModel) -> Regime {
    match *model {
        AsymptoticModel::Bounded { .. } => Regime::RealShock,
        AsymptoticModel::LogLaw { .. } => Regime::SmoothLanding,
        AsymptoticModel::PowerLaw { exponent, .. } if exponent > -2.0 => Regime::SmoothLanding,
        AsymptoticModel::PowerLaw { .. } => Regime::Unresolved,
    }
}

pub fn classify(profile: &CuspProfile) -> Result<Regime> {
    Ok(classify_model(&energy_leading(profile)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub epsilon: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Touchdown {
    pub time: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionTrajectory {
    pub samples: Vec<TrajectorySample>,
    pub touchdown: Option<Touchdown>,
    pub regime: Regime,
    /// Largest `|I(t)/I(0) - 1|` of the conserved quantity over accepted steps.
    pub invariant_drift: f64,
    /// `|ε′|` never increased along accepted steps.
    pub speed_monotone: bool,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Set when the step size underflowed.
    pub diagnostic: Option<String>,
}

impl CollisionTrajectory {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,eps,v")?;
        for s in &self.samples {
            writeln!(w, "{:.12e},{:.12e},{:.12e}", s.t, s.epsilon, s.v)?;
        }
        Ok(())
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

type State = [f64; 2];

fn rhs(setup: &CollisionSetup, y: State) -> Result<State> {
    let (m, dm) = setup.mass_jet(y[0])?;
    Ok([y[1], -dm * y[1] * y[1] / (2.0 * (setup.m_s + m))])
}

/// One embedded step: fifth-order state and error estimate.
fn dp_step(setup: &CollisionSetup, y: State, h: f64) -> Result<(State, State)> {
    let mut k = [[0.0; 2]; 7];
    k[0] = rhs(setup, y)?;
    for s in 1..7 {
        let mut ys = y;
        for (j, kj) in k.iter().enumerate().take(s) {
            ys[0] += h * A[s][j] * kj[0];
            ys[1] += h * A[s][j] * kj[1];
        }
        debug_assert!(C[s] >= 0.0);
        k[s] = rhs(setup, ys)?;
    }
    let mut y5 = y;
    let mut err = [0.0; 2];
    for s in 0..7 {
        for i in 0..2 {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    Ok((y5, err))
}

fn error_norm(y: State, y_new: State, err: State, rtol: f64) -> f64 {
    (0..2)
        .map(|i| {
            let sc = rtol * y[i].abs().max(y_new[i].abs()) + f64::MIN_POSITIVE;
            (err[i] / sc).powi(2)
        })
        .sum::<f64>()
        .sqrt()
        / std::f64::consts::SQRT_2
}

/// Adaptive Dormand–Prince integration from `ε*` down to `eps_stop`, with the
/// crossing time refined by bisection of the last step.
pub fn integrate_collision(
    setup: &CollisionSetup,
    eps_stop: f64,
    rtol: f64,
) -> Result<CollisionTrajectory> {
    setup.validate()?;
    if !(eps_stop > 0.0 && eps_stop < setup.eps_star) {
        return Err(Error::domain(
            "eps_stop",
            eps_stop,
            format!("(0, {})", setup.eps_star),
        ));
    }
    if !(rtol > 0.0 && rtol < 1.0) {
        return Err(Error::domain("rtol", rtol, "(0, 1)"));
    }
    // range checks up front so tabulated models fail before integrating
    added_mass(setup, setup.eps_star)?;
    added_mass(setup, eps_stop)?;
    let i0 = setup.invariant(setup.eps_star, setup.v0)?;

    let mut t = 0.0;
    let mut y: State = [setup.eps_star, setup.v0];
    let mut h = 0.01 * setup.eps_star / setup.v0.abs();
    let mut traj = CollisionTrajectory {
        samples: vec![TrajectorySample {
            t,
            epsilon: y[0],
            v: y[1],
        }],
        touchdown: None,
        regime: Regime::Unresolved,
        invariant_drift: 0.0,
        speed_monotone: true,
        accepted_steps: 0,
        rejected_steps: 0,
        diagnostic: None,
    };
    let accept = |traj: &mut CollisionTrajectory, t: f64, y_old: State, y: State| -> Result<()> {
        let drift = (setup.invariant(y[0], y[1])? / i0 - 1.0).abs();
        traj.invariant_drift = traj.invariant_drift.max(drift);
        if y[1].abs() > y_old[1].abs() * (1.0 + 1e-12) {
            traj.speed_monotone = false;
        }
        traj.samples.push(TrajectorySample {
            t,
            epsilon: y[0],
            v: y[1],
        });
        traj.accepted_steps += 1;
        Ok(())
    };

    loop {
        if h < 1e-14 * t.max(f64::MIN_POSITIVE) || h < f64::MIN_POSITIVE {
            traj.diagnostic = Some(format!(
                "step size underflow at t = {t:e}, eps = {:e}",
                y[0]
            ));
            return Ok(traj);
        }
        let (mut y_hit, mut t_hit) = match dp_step(setup, y, h) {
            Ok((y_new, err)) => {
                let en = error_norm(y, y_new, err, rtol);
                if !(en <= 1.0) || y_new[1] >= 0.0 {
                    traj.rejected_steps += 1;
                    h *= if en.is_finite() {
                        (0.9 * en.powf(-0.2)).clamp(0.1, 0.5)
                    } else {
                        0.25
                    };
                    continue;
                }
                if y_new[0] > eps_stop {
                    t += h;
                    let y_old = y;
                    y = y_new;
                    accept(&mut traj, t, y_old, y)?;
                    h *= (0.9 * en.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                    continue;
                }
                (y_new, h)
            }
            // a stage left the admissible range of m_f on a step that crosses eps_stop
            Err(_) if y[0] + h * y[1] <= eps_stop => (y, 0.0),
            Err(_) => {
                traj.rejected_steps += 1;
                h *= 0.25;
                continue;
            }
        };
        // The step crosses ε = eps_stop: bisect its length. A failed stage
        // counts as crossing, and the closest accepted point on either side wins.
        let (mut lo, mut hi) = (0.0, h);
        let gap = |v: State| (v[0] - eps_stop).abs();
        for _ in 0..200 {
            if gap(y_hit) <= rtol * eps_stop || hi - lo <= 1e-15 * (t + hi) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let trial = dp_step(setup, y, mid);
            match trial {
                Ok((ym, _)) if ym[0] > eps_stop => lo = mid,
                _ => hi = mid,
            }
            if let Ok((ym, _)) = trial {
                if gap(ym) < gap(y_hit) {
                    y_hit = ym;
                    t_hit = mid;
                }
            }
        }
        if gap(y_hit) > 1e-6 * eps_stop {
            traj.diagnostic = Some(format!(
                "crossing not resolved at t = {t:e}, eps = {:e}",
                y[0]
            ));
            return Ok(traj);
        }
        t += t_hit;
        let y_old = y;
        y = y_hit;
        accept(&mut traj, t, y_old, y)?;
        traj.touchdown = Some(Touchdown {
            time: t,
            speed: y[1].abs(),
        });
        traj.regime = terminal_regime(setup, eps_stop, y[1]);
        return Ok(traj);
    }
}

/// Landing test `|ε′(eps_stop)| / |ε₀′| ≤ 2 √(1 + m_s/m_f(ε*)) (eps_stop/ε*)^{|p|/2}` for `m_f ~ ε^p`.
///
/// The square-root factor is the exact `m_s` correction of the speed law; it
/// is 1 when the added mass dominates at `ε*`.
fn terminal_regime(setup: &CollisionSetup, eps_stop: f64, v: f64) -> Regime {
    let ratio = v.abs() / setup.v0.abs();
    let p = setup.effective_exponent();
    let predicted = match &setup.mass_model {
        MassModel::FromModel { model } => classify_model(model),
        MassModel::FromCurve { table } => match table.growth_decay() {
            Some(q) if q > BOUNDED_GROWTH_DECAY => Regime::RealShock,
            Some(_) if p > -2.0 => Regime::SmoothLanding,
            _ => Regime::Unresolved,
        },
    };
    match predicted {
        Regime::SmoothLanding => {
            let m_top = added_mass(setup, setup.eps_star).unwrap_or(0.0);
            let solid = if m_top > 0.0 {
                (1.0 + setup.m_s / m_top).sqrt()
            } else {
                f64::INFINITY
            };
            let threshold = 2.0 * solid * (eps_stop / setup.eps_star).powf(p.abs() / 2.0);
            // a logarithmic law only needs the speed to have dropped
            let ok = if p == 0.0 {
                ratio < 1.0
            } else {
                ratio <= threshold
            };
            if ok {
                Regime::SmoothLanding
            } else {
                Regime::Unresolved
            }
        }
        other => other,
    }
}

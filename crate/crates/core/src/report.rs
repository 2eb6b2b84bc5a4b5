//! Sweep summaries and their CSV, JSON and gnuplot-data renderings.
//!
//! CSV schema (version 1): `epsilon,energy,model,ratio,iterations,residual`,
//! one row per sweep point, `model` the leading-order law at that `ε` and
//! `ratio = energy / model` (`nan` when the law has no value).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::asymptotics::{
    energy_leading, fit_coefficient, fit_model, lower_bound, AsymptoticModel, EnergyCurve,
    FitResult, LawFamily,
};
use crate::config::{AcceptanceConfig, ProfileConfig};
use crate::error::{Error, Result};
use crate::geometry::{Bottom, CuspProfile};

pub const CSV_HEADER: &str = "epsilon,energy,model,ratio,iterations,residual";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    GnuplotData,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::GnuplotData => "dat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

impl Check {
    pub fn band(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo,
            hi,
            pass: value >= lo && value <= hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub profile: CuspProfile,
    pub law: AsymptoticModel,
    pub curve: EnergyCurve,
    pub fit: Option<FitResult>,
    /// `C` of `E ≈ C ε^p` with `p` fixed at the law's exponent.
    pub fixed_exponent_coefficient: Option<f64>,
    /// Closed-form lower bound per point where it applies.
    pub lower_bounds: Vec<Option<f64>>,
    pub acceptance: AcceptanceConfig,
    pub checks: Vec<Check>,
}

impl SweepReport {
    /// Fit the curve against the leading law and evaluate the configured bands.
    pub fn evaluate(
        profile: &ProfileConfig,
        curve: EnergyCurve,
        acceptance: &AcceptanceConfig,
    ) -> Result<Self> {
        if curve.is_empty() {
            return Err(Error::Parameter(
                "a report needs at least one result".into(),
            ));
        }
        let base = profile.profile(curve.points[0].epsilon)?;
        let law = energy_leading(&base)?;
        let family = match law {
            AsymptoticModel::LogLaw { .. } => LawFamily::Log,
            AsymptoticModel::PowerLaw { .. } => LawFamily::Power,
            AsymptoticModel::Bounded { .. } => LawFamily::Bounded,
        };
        let fit = if curve.len() >= 4 {
            Some(fit_model(&curve, family)?)
        } else {
            None
        };
        let fixed_exponent_coefficient = match law {
            AsymptoticModel::PowerLaw { exponent, .. } => Some(fit_coefficient(&curve, exponent)?),
            _ => None,
        };
        let lower_bounds = curve
            .points
            .iter()
            .map(|p| -> Result<Option<f64>> {
                let prof = base.with_epsilon(p.epsilon)?;
                let applies = prof.is_flat() || prof.alpha > 2.0;
                Ok(if applies {
                    lower_bound(&prof).ok().map(|r| r.value)
                } else {
                    None
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let a = acceptance;
        let mut checks = Vec::new();
        let flat = matches!(base.bottom, Bottom::FlatBand { .. });
        if let Some(f) = &fit {
            match (law, flat) {
                (AsymptoticModel::LogLaw { .. }, _) => checks.push(Check::band(
                    "log_slope",
                    f.slope,
                    a.log_slope[0],
                    a.log_slope[1],
                )),
                (AsymptoticModel::PowerLaw { exponent, .. }, true) => checks.push(Check::band(
                    "flat_slope",
                    f.slope,
                    exponent - a.flat_slope_tol,
                    exponent + a.flat_slope_tol,
                )),
                (AsymptoticModel::PowerLaw { .. }, false) => checks.push(Check::band(
                    "power_slope",
                    f.slope,
                    a.power_slope[0],
                    a.power_slope[1],
                )),
                (AsymptoticModel::Bounded { .. }, _) => {
                    let last = *f.increments.last().unwrap();
                    checks.push(Check::band(
                        "bounded_rel_change",
                        last,
                        0.0,
                        a.bounded_rel_change,
                    ));
                }
            }
        }
        if let (true, Some(c), AsymptoticModel::PowerLaw { coefficient, .. }) =
            (flat, fixed_exponent_coefficient, law)
        {
            checks.push(Check::band(
                "flat_coefficient",
                c / coefficient,
                1.0 - a.flat_coefficient_tol,
                1.0 + a.flat_coefficient_tol,
            ));
        }
        for (p, lb) in curve.points.iter().zip(&lower_bounds) {
            if let Some(lb) = lb {
                // value / (E (1 + slack)) must not exceed 1
                let scaled = lb / (p.energy * (1.0 + a.lower_bound_slack));
                checks.push(Check::band(
                    &format!("lower_bound@{:e}", p.epsilon),
                    scaled,
                    f64::NEG_INFINITY,
                    1.0,
                ));
            }
        }
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            profile: base,
            law,
            curve,
            fit,
            fixed_exponent_coefficient,
            lower_bounds,
            acceptance: acceptance.clone(),
            checks,
        })
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn write<W: Write>(&self, format: ReportFormat, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Io {
            path: PathBuf::from("<writer>"),
            source: e,
        };
        match format {
            ReportFormat::Csv => {
                writeln!(w, "{CSV_HEADER}").map_err(io)?;
                for p in &self.curve.points {
                    let m = self.law.value(p.epsilon).unwrap_or(f64::NAN);
                    writeln!(
                        w,
                        "{:.6e},{:.10e},{:.10e},{:.8},{},{:.3e}",
                        p.epsilon,
                        p.energy,
                        m,
                        p.energy / m,
                        p.iterations,
                        p.residual
                    )
                    .map_err(io)?;
                }
            }
            ReportFormat::Json => {
                serde_json::to_writer_pretty(&mut w, self).map_err(|e| Error::Io {
                    path: PathBuf::from("<writer>"),
                    source: e.into(),
                })?;
                writeln!(w).map_err(io)?;
            }
            ReportFormat::GnuplotData => {
                writeln!(w, "# epsilon energy model").map_err(io)?;
                for p in &self.curve.points {
                    let m = self.law.value(p.epsilon).unwrap_or(f64::NAN);
                    writeln!(w, "{:.6e} {:.10e} {:.10e}", p.epsilon, p.energy, m).map_err(io)?;
                }
            }
        }
        Ok(())
    }
}

/// Write `report` as `<dir>/<stem>.<ext>` for each format; returns the paths.
pub fn write_report(
    report: &SweepReport,
    formats: &[ReportFormat],
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for &f in formats {
        let path = dir.join(format!("{stem}.{}", f.extension()));
        let file = File::create(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        let mut w = BufWriter::new(file);
        report.write(f, &mut w).map_err(|e| match e {
            Error::Io { source, .. } => Error::Io {
                path: path.clone(),
                source,
            },
            other => other,
        })?;
        w.flush().map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn synthetic() -> (RunConfig, EnergyCurve) {
        let cfg = RunConfig::with_profile(1.0, 2.0);
        let eps = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
        let pairs: Vec<(f64, f64)> = eps
            .iter()
            .map(|&e: &f64| (e, 1.0 + e.ln().abs() / 3.0))
            .collect();
        (cfg, EnergyCurve::from_pairs(&pairs).unwrap())
    }

    #[test]
    fn csv_has_header_and_one_row_per_point() {
        let (cfg, curve) = synthetic();
        let r = SweepReport::evaluate(&cfg.profile, curve, &cfg.acceptance).unwrap();
        let mut buf = Vec::new();
        r.write(ReportFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(r.passed());
    }

    #[test]
    fn json_echoes_thresholds() {
        let (mut cfg, curve) = synthetic();
        cfg.acceptance.log_slope = [0.311, 0.355];
        let r = SweepReport::evaluate(&cfg.profile, curve, &cfg.acceptance).unwrap();
        let mut buf = Vec::new();
        r.write(ReportFormat::Json, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["acceptance"]["log_slope"][0], 0.311);
        assert_eq!(v["checks"][0]["name"], "log_slope");
        assert_eq!(v["checks"][0]["pass"], true);
    }

    #[test]
    fn empty_results_are_rejected() {
        let (cfg, _) = synthetic();
        let empty = EnergyCurve::new(vec![]).unwrap();
        assert!(SweepReport::evaluate(&cfg.profile, empty, &cfg.acceptance).is_err());
    }
}

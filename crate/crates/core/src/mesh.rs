//! Computational domain `ω_ε = D ∪ R_ε` and its structured quadrilateral mesh.
//!
//! `D = [-d_width, 0] × [0, 1]` is a fixed block with identity coefficients;
//! `R_ε = [0, ℓ] × [0, 1]` is the (possibly truncated) strip. Nodes are
//! numbered column by column, so node `(i, j)` (column `i`, row `j`) has index
//! `i * (n_across + 1) + j`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{block_flux, block_flux_primitive, CuspProfile, StripLength, StripMap};

pub const MAX_ASPECT_RATIO: f64 = 1e4;
pub const MAX_COLUMNS: usize = 1 << 22;

#[derive(Debug, Clone)]
pub struct TransformedDomain {
    pub profile: CuspProfile,
    pub map: StripMap,
    pub d_width: f64,
    pub ell: f64,
    /// `∫_0^ℓ H_ε(μ_ε) dx₁ = μ_ε(ℓ) - δ`; equals `|δ|` unless truncated.
    pub strip_flux: f64,
    pub truncated: bool,
}

/// Strip truncated at `truncation` when that is shorter than `ℓ_ε`.
pub fn build_domain(profile: &CuspProfile, truncation: Option<f64>) -> Result<TransformedDomain> {
    build_domain_with_width(profile, truncation, 1.0)
}

pub fn build_domain_with_width(
    profile: &CuspProfile,
    truncation: Option<f64>,
    d_width: f64,
) -> Result<TransformedDomain> {
    if !(d_width > 0.0 && d_width.is_finite()) {
        return Err(Error::Parameter(format!(
            "d_width must be positive, got {d_width}"
        )));
    }
    if let Some(t) = truncation {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Parameter(format!(
                "truncation must be positive, got {t}"
            )));
        }
    }
    let map = StripMap::new(profile)?;
    let (ell, truncated) = match (map.ell(), truncation) {
        (StripLength::Infinite, None) => {
            return Err(Error::Parameter(
                "a gap-free profile needs a truncation length".into(),
            ))
        }
        (StripLength::Infinite, Some(t)) => (t, true),
        (StripLength::Finite(l), Some(t)) if t < l => (t, true),
        (StripLength::Finite(l), _) => (l, false),
    };
    let strip_flux = if truncated {
        map.mu(ell)? - profile.delta
    } else {
        -profile.delta
    };
    Ok(TransformedDomain {
        profile: *profile,
        map,
        d_width,
        ell,
        strip_flux,
        truncated,
    })
}

impl TransformedDomain {
    pub fn with_d_width(&self, d_width: f64) -> Result<Self> {
        if !(d_width > 0.0 && d_width.is_finite()) {
            return Err(Error::Parameter(format!(
                "d_width must be positive, got {d_width}"
            )));
        }
        Ok(Self {
            d_width,
            ..self.clone()
        })
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.d_width + self.ell) + 2.0
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        (-self.d_width..=self.ell).contains(&x[0]) && (0.0..=1.0).contains(&x[1])
    }

    /// Neumann datum at a point of the top boundary `x₂ = 1`.
    ///
    /// Over the strip it is `H_ε(μ_ε(x₁))`; over the block it is the
    /// compensating bump whose integral is `-strip_flux`. Other boundary
    /// pieces carry homogeneous data and are rejected here.
    pub fn neumann_data(&self, s: [f64; 2]) -> Result<f64> {
        if s[1] != 1.0 || !self.contains(s) {
            return Err(Error::domain(
                "s.x1",
                s[0],
                format!("top boundary [{}, {}] x {{1}}", -self.d_width, self.ell),
            ));
        }
        if s[0] < 0.0 {
            Ok(block_flux(s[0], self.strip_flux))
        } else {
            self.map.strip_flux(s[0])
        }
    }

    /// Exact integral of the top datum over `[a, b]` (both on the same side of 0).
    pub(crate) fn top_flux_integral(&self, a: f64, b: f64) -> Result<f64> {
        if b <= 0.0 {
            Ok(block_flux_primitive(b, self.strip_flux) - block_flux_primitive(a, self.strip_flux))
        } else {
            Ok(self.map.mu(b)? - self.map.mu(a)?)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Top of the strip.
    GammaR,
    /// Top of the block.
    GammaD,
    /// Bottom of the strip.
    Bottom,
    /// End of the strip at `x₁ = ℓ`.
    RightCap,
    /// Left side and bottom of the block.
    OuterD,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::GammaR => "gamma_r",
            BoundaryTag::GammaD => "gamma_d",
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::RightCap => "right_cap",
            BoundaryTag::OuterD => "outer_d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Block,
    Strip,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise: `(i,j), (i+1,j), (i+1,j+1), (i,j+1)`.
    pub quads: Vec<[usize; 4]>,
    pub regions: Vec<Region>,
    pub boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    /// Abscissae of the node columns, increasing.
    pub columns: Vec<f64>,
    pub n_across: usize,
}

/// Strip abscissae `x(t) = (e^{(g-1)t} - 1)/(g - 1)` sampled at `t = k/n`.
///
/// Cells start at `1/n` and grow like `(1 + (g-1)x)/n ≤ g(1+x)/n`; `g = 1`
/// gives a uniform grid. Sampling a fixed curve keeps meshes nested under
/// doubling of `n`.
fn strip_columns(ell: f64, n: usize, grading: f64) -> Result<Vec<f64>> {
    let c = grading - 1.0;
    let x_of = |t: f64| if c == 0.0 { t } else { (c * t).exp_m1() / c };
    let t_end = if c == 0.0 { ell } else { (c * ell).ln_1p() / c };
    let steps = t_end * n as f64;
    if steps > MAX_COLUMNS as f64 {
        return Err(Error::Mesh(format!(
            "strip would need {steps:.3e} columns (limit {MAX_COLUMNS})"
        )));
    }
    let mut k_max = steps.ceil() as usize;
    if k_max as f64 - steps > 1.0 - 1e-9 {
        k_max -= 1;
    }
    let mut cols: Vec<f64> = (0..k_max).map(|k| x_of(k as f64 / n as f64)).collect();
    // Merge a sliver last cell into its neighbour.
    if cols.len() > 1 {
        let last = *cols.last().unwrap();
        let nominal = x_of(cols.len() as f64 / n as f64) - last;
        if ell - last < 0.5 * nominal {
            cols.pop();
        }
    }
    cols.push(ell);
    Ok(cols)
}

pub fn build_mesh(domain: &TransformedDomain, n_across: usize, grading: f64) -> Result<Mesh> {
    if n_across < 4 {
        return Err(Error::Parameter(format!(
            "n_across must be at least 4, got {n_across}"
        )));
    }
    if !(grading >= 1.0 && grading.is_finite()) {
        return Err(Error::Parameter(format!(
            "grading must be at least 1, got {grading}"
        )));
    }
    let h0 = 1.0 / n_across as f64;
    let d_cells = ((domain.d_width / h0) - 1e-9).ceil().max(1.0) as usize;
    let mut columns: Vec<f64> = (0..d_cells)
        .map(|k| -domain.d_width + domain.d_width * k as f64 / d_cells as f64)
        .collect();
    let first_strip = columns.len();
    columns.extend(strip_columns(domain.ell, n_across, grading)?);
    let mesh = Mesh::tensor(&columns, n_across, first_strip)?;
    mesh.check_aspect_ratio()?;
    Ok(mesh)
}

impl Mesh {
    /// Tensor mesh on `columns × [0, 1]` with `n_across` uniform rows.
    /// Columns before `first_strip` belong to the block.
    pub fn tensor(columns: &[f64], n_across: usize, first_strip: usize) -> Result<Mesh> {
        if columns.len() < 2 || columns.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Mesh(
                "column abscissae must be strictly increasing".into(),
            ));
        }
        let rows = n_across + 1;
        let nc = columns.len();
        let mut nodes = Vec::with_capacity(nc * rows);
        for &x in columns {
            for j in 0..rows {
                nodes.push([x, j as f64 / n_across as f64]);
            }
        }
        let id = |i: usize, j: usize| i * rows + j;
        let mut quads = Vec::with_capacity((nc - 1) * n_across);
        let mut regions = Vec::with_capacity((nc - 1) * n_across);
        for i in 0..nc - 1 {
            let region = if i < first_strip {
                Region::Block
            } else {
                Region::Strip
            };
            for j in 0..n_across {
                quads.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
                regions.push(region);
            }
        }
        let mut boundary_edges = Vec::new();
        for i in 0..nc - 1 {
            let block = i < first_strip;
            boundary_edges.push((
                [id(i, 0), id(i + 1, 0)],
                if block {
                    BoundaryTag::OuterD
                } else {
                    BoundaryTag::Bottom
                },
            ));
            boundary_edges.push((
                [id(i + 1, n_across), id(i, n_across)],
                if block {
                    BoundaryTag::GammaD
                } else {
                    BoundaryTag::GammaR
                },
            ));
        }
        let left_tag = if first_strip > 0 {
            BoundaryTag::OuterD
        } else {
            BoundaryTag::RightCap
        };
        for j in 0..n_across {
            boundary_edges.push(([id(0, j + 1), id(0, j)], left_tag));
            boundary_edges.push(([id(nc - 1, j), id(nc - 1, j + 1)], BoundaryTag::RightCap));
        }
        Ok(Mesh {
            nodes,
            quads,
            regions,
            boundary_edges,
            columns: columns.to_vec(),
            n_across,
        })
    }

    /// Identity-coefficient unit-square style mesh on `[x0,x1] × [0,1]` with `nx × n_across` cells.
    pub fn rectangle(x0: f64, x1: f64, nx: usize, n_across: usize) -> Result<Mesh> {
        if nx == 0 || n_across == 0 {
            return Err(Error::Parameter(
                "rectangle needs at least one cell per direction".into(),
            ));
        }
        let cols: Vec<f64> = (0..=nx)
            .map(|k| x0 + (x1 - x0) * k as f64 / nx as f64)
            .collect();
        Mesh::tensor(&cols, n_across, nx)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.quads.len()
    }

    pub fn rows(&self) -> usize {
        self.n_across + 1
    }

    pub fn node_index(&self, column: usize, row: usize) -> usize {
        column * self.rows() + row
    }

    /// Column index of element `e`.
    pub fn element_column(&self, e: usize) -> usize {
        e / self.n_across
    }

    /// `([x_a, x_b], [y_a, y_b])` of element `e`.
    pub fn element_box(&self, e: usize) -> ([f64; 2], [f64; 2]) {
        let q = self.quads[e];
        let (p0, p2) = (self.nodes[q[0]], self.nodes[q[2]]);
        ([p0[0], p2[0]], [p0[1], p2[1]])
    }

    pub fn max_aspect_ratio(&self) -> f64 {
        let dy = 1.0 / self.n_across as f64;
        self.columns
            .windows(2)
            .map(|w| {
                let dx = w[1] - w[0];
                (dx / dy).max(dy / dx)
            })
            .fold(1.0, f64::max)
    }

    pub fn check_aspect_ratio(&self) -> Result<()> {
        let r = self.max_aspect_ratio();
        if r > MAX_ASPECT_RATIO {
            return Err(Error::Mesh(format!(
                "element aspect ratio {r:.3e} exceeds {MAX_ASPECT_RATIO:e}"
            )));
        }
        Ok(())
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges
            .iter()
            .map(|(e, _)| {
                let (a, b) = (self.nodes[e[0]], self.nodes[e[1]]);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .sum()
    }

    /// Lumped area of each node (quarter of every adjacent element).
    pub fn lumped_area(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.node_count()];
        for (e, q) in self.quads.iter().enumerate() {
            let (x, y) = self.element_box(e);
            let a = 0.25 * (x[1] - x[0]) * (y[1] - y[0]);
            for &n in q {
                w[n] += a;
            }
        }
        w
    }

    /// Plain-text export.
    ///
    /// Layout, one record per line, `#` lines are section headers:
    /// `# nodes <N>` then `<id> <x1> <x2>`; `# quads <M>` then
    /// `<id> <n0> <n1> <n2> <n3> <block|strip>`; `# boundary <K>` then
    /// `<n0> <n1> <tag>`.
    pub fn write_plain_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# nodes {}", self.node_count())?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(w, "{i} {:.17e} {:.17e}", p[0], p[1])?;
        }
        writeln!(w, "# quads {}", self.element_count())?;
        for (i, (q, r)) in self.quads.iter().zip(&self.regions).enumerate() {
            let r = match r {
                Region::Block => "block",
                Region::Strip => "strip",
            };
            writeln!(w, "{i} {} {} {} {} {r}", q[0], q[1], q[2], q[3])?;
        }
        writeln!(w, "# boundary {}", self.boundary_edges.len())?;
        for (e, t) in &self.boundary_edges {
            writeln!(w, "{} {} {}", e[0], e[1], t.name())?;
        }
        Ok(())
    }
}

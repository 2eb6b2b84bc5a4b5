//! Bilinear finite elements for `∫ 𝔸_ε ∇u·∇v = ∫ f v + ∫ g v ds` with a
//! zero-mean constraint.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{StripMap, SymmetricMatrix2};
use crate::mesh::{build_mesh, BoundaryTag, Mesh, Region, TransformedDomain};
use crate::quadrature::GAUSS2;

/// Compatibility is checked against this multiple of the data scale.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

/// Symmetric sparse matrix in compressed row layout.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    /// Lumped nodal areas; the weights of the zero-mean constraint.
    pub lumped_area: Vec<f64>,
    /// Nodes per mesh column; consecutive blocks of this size form the line preconditioner.
    pub column_size: usize,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .binary_search(&j)
            .map(|k| self.values[r.start + k])
            .unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// `y = Kx`, evaluated as `Σ_j K_ij (x_j - x_i)`.
    ///
    /// Rows sum to zero exactly, so the difference form is the same operator
    /// and avoids cancelling large multiples of a nearly constant `x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut()
            .enumerate()
            .with_min_len(256)
            .for_each(|(i, yi)| {
                let r = self.row_ptr[i]..self.row_ptr[i + 1];
                let xi = x[i];
                *yi = self.col_idx[r.clone()]
                    .iter()
                    .zip(&self.values[r])
                    .filter(|(&j, _)| j != i)
                    .map(|(&j, v)| v * (x[j] - xi))
                    .sum();
            });
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.matvec(x, &mut y);
        y
    }

    /// `xᵀ K x = -½ Σ_{i≠j} K_ij (x_i - x_j)²`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.dim() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if j > i {
                    let d = x[i] - x[j];
                    sum -= self.values[k] * d * d;
                }
            }
        }
        sum
    }

    /// Norm of the rounding error committed when forming `Ku` in double
    /// precision: `ε Σ_j |K_ij| (|x_i| + |x_j|)` per row. Residuals below this
    /// are not attainable.
    pub fn rounding_floor(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.dim() {
            let mut f = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if j != i {
                    f += self.values[k].abs() * (x[i].abs() + x[j].abs());
                }
            }
            sum += (f64::EPSILON * f).powi(2);
        }
        sum.sqrt()
    }

    /// Largest `|K_ij - K_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reference bilinear shape gradients at `(s, t) ∈ [0,1]²`, nodes ordered counter-clockwise.
fn shape_gradients(s: f64, t: f64, hx: f64, hy: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - t) / hx, -(1.0 - s) / hy],
        [(1.0 - t) / hx, -s / hy],
        [t / hx, s / hy],
        [-t / hx, (1.0 - s) / hy],
    ]
}

fn shape_values(s: f64, t: f64) -> [f64; 4] {
    [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t]
}

/// Gauss points on `[0, 1]`.
fn gauss01() -> [f64; 2] {
    [0.5 * (1.0 + GAUSS2[0]), 0.5 * (1.0 + GAUSS2[1])]
}

fn element_matrix(
    hx: f64,
    hy: f64,
    coeff: impl Fn(usize, usize) -> SymmetricMatrix2,
) -> [[f64; 4]; 4] {
    let g = gauss01();
    let w = 0.25 * hx * hy;
    let mut k = [[0.0; 4]; 4];
    for (a, &s) in g.iter().enumerate() {
        for (b, &t) in g.iter().enumerate() {
            let grads = shape_gradients(s, t, hx, hy);
            let m = coeff(a, b);
            for i in 0..4 {
                let ai = m.apply(grads[i]);
                for j in 0..4 {
                    k[i][j] += w * (ai[0] * grads[j][0] + ai[1] * grads[j][1]);
                }
            }
        }
    }
    k
}

/// `x₂ H₀′(μ_ε)` factors at the two Gauss abscissae of every column.
fn column_slopes(mesh: &Mesh, map: Option<&StripMap>) -> Result<Vec<[f64; 2]>> {
    let g = gauss01();
    (0..mesh.columns.len() - 1)
        .into_par_iter()
        .map(|i| {
            let (xa, xb) = (mesh.columns[i], mesh.columns[i + 1]);
            match map {
                Some(map) if xa >= 0.0 => {
                    let mut d = [0.0; 2];
                    for (k, &s) in g.iter().enumerate() {
                        d[k] = map.jet_at(xa + s * (xb - xa))?.d1;
                    }
                    Ok(d)
                }
                _ => Ok([0.0; 2]),
            }
        })
        .collect()
}

fn assemble_with(mesh: &Mesh, map: Option<&StripMap>) -> Result<SparseOperator> {
    let slopes = column_slopes(mesh, map)?;
    let g = gauss01();
    let locals: Vec<[[f64; 4]; 4]> = (0..mesh.element_count())
        .into_par_iter()
        .with_min_len(64)
        .map(|e| {
            let (x, y) = mesh.element_box(e);
            let (hx, hy) = (x[1] - x[0], y[1] - y[0]);
            if !(hx > 0.0 && hy > 0.0) {
                return Err(Error::SingularElement {
                    element: e,
                    jacobian: hx * hy,
                });
            }
            let d1 = slopes[mesh.element_column(e)];
            let strip = mesh.regions[e] == Region::Strip;
            Ok(element_matrix(hx, hy, |a, b| {
                if strip {
                    SymmetricMatrix2::strip((y[0] + g[b] * hy) * d1[a])
                } else {
                    SymmetricMatrix2::identity()
                }
            }))
        })
        .collect::<Result<_>>()?;

    let n = mesh.node_count();
    let rows = mesh.rows();
    let ncols = mesh.columns.len();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(9 * n);
    row_ptr.push(0);
    for i in 0..ncols {
        for j in 0..rows {
            for ci in i.saturating_sub(1)..=(i + 1).min(ncols - 1) {
                for cj in j.saturating_sub(1)..=(j + 1).min(rows - 1) {
                    col_idx.push(ci * rows + cj);
                }
            }
            row_ptr.push(col_idx.len());
        }
    }
    let mut values = vec![0.0; col_idx.len()];
    for (q, k) in mesh.quads.iter().zip(&locals) {
        for a in 0..4 {
            let r = row_ptr[q[a]]..row_ptr[q[a] + 1];
            for b in 0..4 {
                let pos = col_idx[r.clone()]
                    .binary_search(&q[b])
                    .expect("structured pattern");
                values[r.start + pos] += k[a][b];
            }
        }
    }
    // Diagonal from the off-diagonals so that rows sum to zero exactly.
    for i in 0..n {
        let r = row_ptr[i]..row_ptr[i + 1];
        let mut off = 0.0;
        let mut diag_pos = 0;
        for k in r {
            if col_idx[k] == i {
                diag_pos = k;
            } else {
                off += values[k];
            }
        }
        values[diag_pos] = -off;
    }
    Ok(SparseOperator {
        row_ptr,
        col_idx,
        values,
        lumped_area: mesh.lumped_area(),
        column_size: rows,
    })
}

/// Stiffness matrix of `𝔸_ε` (identity on the block).
pub fn assemble_stiffness(mesh: &Mesh, map: &StripMap) -> Result<SparseOperator> {
    assemble_with(mesh, Some(map))
}

/// Stiffness matrix with identity coefficients everywhere.
pub fn assemble_identity(mesh: &Mesh) -> Result<SparseOperator> {
    assemble_with(mesh, None)
}

#[derive(Debug, Clone)]
pub struct LoadVector {
    pub values: Vec<f64>,
    /// `∫ f + ∫ g`.
    pub data_integral: f64,
    /// `∫ |f| + ∫ |g|`.
    pub data_scale: f64,
}

/// Load vector of the volume source `f` and, when `domain` is given, of its top Neumann data.
///
/// Each top edge receives the exact integral of `g` over it, split between its
/// two nodes in the proportions of two-point Gauss quadrature; this keeps the
/// discrete data compatible to rounding.
pub fn assemble_load(
    mesh: &Mesh,
    volume_source: Option<&(dyn Fn([f64; 2]) -> f64 + Sync)>,
    domain: Option<&TransformedDomain>,
) -> Result<LoadVector> {
    let mut b = vec![0.0; mesh.node_count()];
    let mut integral = 0.0;
    let mut scale = 0.0;
    if let Some(f) = volume_source {
        let g = gauss01();
        for (e, q) in mesh.quads.iter().enumerate() {
            let (x, y) = mesh.element_box(e);
            let w = 0.25 * (x[1] - x[0]) * (y[1] - y[0]);
            for &s in &g {
                for &t in &g {
                    let v = f([x[0] + s * (x[1] - x[0]), y[0] + t * (y[1] - y[0])]);
                    let phi = shape_values(s, t);
                    for k in 0..4 {
                        b[q[k]] += w * v * phi[k];
                    }
                    integral += w * v;
                    scale += w * v.abs();
                }
            }
        }
    }
    if let Some(domain) = domain {
        let g = gauss01();
        for (edge, tag) in &mesh.boundary_edges {
            if !matches!(tag, BoundaryTag::GammaR | BoundaryTag::GammaD) {
                continue;
            }
            let (mut ia, mut ib) = (edge[0], edge[1]);
            if mesh.nodes[ia][0] > mesh.nodes[ib][0] {
                std::mem::swap(&mut ia, &mut ib);
            }
            let (xa, xb) = (mesh.nodes[ia][0], mesh.nodes[ib][0]);
            let total = domain.top_flux_integral(xa, xb)?;
            if total == 0.0 {
                continue;
            }
            let mut wa = 0.0;
            let mut wb = 0.0;
            for &s in &g {
                let v = domain.neumann_data([xa + s * (xb - xa), 1.0])?;
                wa += v * (1.0 - s);
                wb += v * s;
            }
            let split = if wa + wb != 0.0 { wa / (wa + wb) } else { 0.5 };
            b[ia] += total * split;
            b[ib] += total * (1.0 - split);
            integral += total;
            scale += total.abs();
        }
    }
    check_compatibility(integral, scale)?;
    Ok(LoadVector {
        values: b,
        data_integral: integral,
        data_scale: scale,
    })
}

fn check_compatibility(defect: f64, scale: f64) -> Result<()> {
    if defect.abs() > COMPATIBILITY_TOL * scale.max(f64::MIN_POSITIVE) && defect != 0.0 {
        return Err(Error::Compatibility { defect, scale });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    None,
    Jacobi,
    /// Exact tridiagonal solves on each mesh column.
    #[default]
    ColumnLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    /// Defaults to `50·√n`.
    pub max_iterations: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: None,
            preconditioner: Preconditioner::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldSolution {
    pub values: Vec<f64>,
    pub dirichlet_energy: f64,
    /// `bᵀu`, i.e. `∫ g u ds` (plus `∫ f u` if a source is present).
    pub boundary_work: f64,
    /// Final `‖b - Ku‖ / ‖b‖`.
    pub residual_norm: f64,
    /// Attainable relative residual in double precision; convergence is
    /// declared at `max(tol, residual_floor)`.
    pub residual_floor: f64,
    pub iterations: usize,
    /// Area-weighted mean of `u`.
    pub mean: f64,
}

struct LineFactor {
    size: usize,
    /// Per column: (lower, diag', upper) of the LU factors of its tridiagonal block.
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl LineFactor {
    fn new(k: &SparseOperator) -> Self {
        let n = k.dim();
        let size = k.column_size;
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for start in (0..n).step_by(size) {
            for r in 0..size {
                let i = start + r;
                let a = if r > 0 { k.get(i, i - 1) } else { 0.0 };
                let c = if r + 1 < size { k.get(i, i + 1) } else { 0.0 };
                let mut d = k.get(i, i);
                if r > 0 {
                    let l = a / diag[i - 1];
                    d -= l * sup[i - 1];
                    sub[i] = l;
                }
                diag[i] = d;
                sup[i] = c;
            }
        }
        Self {
            size,
            sub,
            diag,
            sup,
        }
    }

    fn solve(&self, r: &[f64], z: &mut [f64]) {
        z.par_chunks_mut(self.size).enumerate().for_each(|(c, zc)| {
            let s = c * self.size;
            for i in 0..zc.len() {
                zc[i] = r[s + i]
                    - if i > 0 {
                        self.sub[s + i] * zc[i - 1]
                    } else {
                        0.0
                    };
            }
            for i in (0..zc.len()).rev() {
                let next = if i + 1 < zc.len() {
                    self.sup[s + i] * zc[i + 1]
                } else {
                    0.0
                };
                zc[i] = (zc[i] - next) / self.diag[s + i];
            }
        });
    }
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn weighted_mean(u: &[f64], w: &[f64]) -> f64 {
    dot(u, w) / w.iter().sum::<f64>()
}

/// Preconditioned conjugate gradients on the consistent singular system `Ku = b`.
///
/// Residuals and preconditioned residuals are kept orthogonal to the
/// constants (the range of `K`), and each iterate is shifted to zero
/// area-weighted mean.
pub fn solve_zero_mean(
    k: &SparseOperator,
    b: &LoadVector,
    opts: &SolveOptions,
) -> Result<FieldSolution> {
    let n = k.dim();
    let bsum: f64 = b.values.iter().sum();
    let babs: f64 = b.values.iter().map(|x| x.abs()).sum();
    check_compatibility(bsum, babs)?;
    let bnorm = dot(&b.values, &b.values).sqrt();
    let max_iter = opts
        .max_iterations
        .unwrap_or_else(|| (50.0 * (n as f64).sqrt()).ceil() as usize);
    let mut u = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(FieldSolution {
            values: u,
            dirichlet_energy: 0.0,
            boundary_work: 0.0,
            residual_norm: 0.0,
            residual_floor: 0.0,
            iterations: 0,
            mean: 0.0,
        });
    }
    let jacobi: Vec<f64> = k
        .diagonal()
        .iter()
        .map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let line = (opts.preconditioner == Preconditioner::ColumnLine).then(|| LineFactor::new(k));
    let precondition = |r: &[f64], z: &mut [f64]| {
        match opts.preconditioner {
            Preconditioner::None => z.copy_from_slice(r),
            Preconditioner::Jacobi => z
                .iter_mut()
                .zip(r)
                .zip(&jacobi)
                .for_each(|((z, r), d)| *z = r * d),
            Preconditioner::ColumnLine => line.as_ref().unwrap().solve(r, z),
        }
        remove_mean(z);
    };
    let mut r = b.values.clone();
    remove_mean(&mut r);
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut kp = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut floor = 0.0f64;
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    while rel > opts.tol {
        if iterations >= max_iter {
            return Err(Error::NonConvergence {
                iterations,
                history,
            });
        }
        k.matvec(&p, &mut kp);
        let pkp = dot(&p, &kp);
        if pkp <= 0.0 {
            return Err(Error::NonConvergence {
                iterations,
                history,
            });
        }
        let a = rz / pkp;
        u.iter_mut().zip(&p).for_each(|(u, p)| *u += a * p);
        r.iter_mut().zip(&kp).for_each(|(r, kp)| *r -= a * kp);
        remove_mean(&mut r);
        let shift = weighted_mean(&u, &k.lumped_area);
        u.iter_mut().for_each(|x| *x -= shift);
        iterations += 1;
        rel = dot(&r, &r).sqrt() / bnorm;
        history.push(rel);
        if rel <= opts.tol {
            // confirm against the true residual to shed recurrence drift
            let ku = k.apply(&u);
            let true_rel = b
                .values
                .iter()
                .zip(&ku)
                .map(|(b, k)| (b - k).powi(2))
                .sum::<f64>()
                .sqrt()
                / bnorm;
            floor = k.rounding_floor(&u) / bnorm;
            if true_rel <= opts.tol.max(floor) {
                rel = true_rel;
                break;
            }
            r = b.values.iter().zip(&ku).map(|(b, k)| b - k).collect();
            remove_mean(&mut r);
            precondition(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            rel = true_rel;
            continue;
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    let energy = dirichlet_energy(k, &u);
    let work = dot(&b.values, &u);
    let mean = weighted_mean(&u, &k.lumped_area);
    Ok(FieldSolution {
        values: u,
        dirichlet_energy: energy,
        boundary_work: work,
        residual_norm: rel,
        residual_floor: floor,
        iterations,
        mean,
    })
}

/// `uᵀ K u`.
pub fn dirichlet_energy(k: &SparseOperator, u: &[f64]) -> f64 {
    k.quadratic_form(u).max(0.0)
}

/// Discretization and solver settings for a cusp solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub n_across: usize,
    pub grading: f64,
    pub solve: SolveOptions,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            n_across: 16,
            grading: 1.2,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CuspSolve {
    pub mesh: Mesh,
    pub solution: FieldSolution,
}

/// Mesh, assemble and solve the Kirchhoff problem on `domain`.
pub fn solve_domain(domain: &TransformedDomain, disc: &Discretization) -> Result<CuspSolve> {
    let mesh = build_mesh(domain, disc.n_across, disc.grading)?;
    let k = assemble_stiffness(&mesh, &domain.map)?;
    let b = assemble_load(&mesh, None, Some(domain))?;
    let solution = solve_zero_mean(&k, &b, &disc.solve)?;
    Ok(CuspSolve { mesh, solution })
}

#[derive(Debug, Clone, Serialize)]
pub struct ManufacturedLevel {
    pub n: usize,
    pub energy: f64,
    pub energy_error: f64,
    pub nodal_max_error: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManufacturedReport {
    pub exact_energy: f64,
    pub levels: Vec<ManufacturedLevel>,
    /// Ratios of consecutive energy errors (coarse / fine).
    pub energy_ratios: Vec<f64>,
    pub nodal_ratios: Vec<f64>,
}

/// `u* = cos(πx₁)cos(πx₂)` on the unit square with `f = 2π²u*` and zero flux,
/// solved at `n, 2n, …` (`levels` resolutions).
pub fn manufactured_case(n: usize, levels: usize) -> Result<ManufacturedReport> {
    if n == 0 || levels == 0 {
        return Err(Error::Parameter(
            "manufactured case needs n >= 1 and at least one level".into(),
        ));
    }
    let exact = |x: [f64; 2]| (PI * x[0]).cos() * (PI * x[1]).cos();
    let source = move |x: [f64; 2]| 2.0 * PI * PI * exact(x);
    let exact_energy = 0.5 * PI * PI;
    let mut out = Vec::with_capacity(levels);
    for l in 0..levels {
        let m = n << l;
        let mesh = Mesh::rectangle(0.0, 1.0, m, m)?;
        let k = assemble_identity(&mesh)?;
        let b = assemble_load(&mesh, Some(&source), None)?;
        let opts = SolveOptions {
            tol: 1e-12,
            max_iterations: Some(20 * mesh.node_count()),
            ..SolveOptions::default()
        };
        let sol = solve_zero_mean(&k, &b, &opts)?;
        let star: Vec<f64> = mesh.nodes.iter().map(|&p| exact(p)).collect();
        let shift = weighted_mean(&star, &k.lumped_area);
        let nodal = sol
            .values
            .iter()
            .zip(&star)
            .map(|(u, s)| (u - (s - shift)).abs())
            .fold(0.0, f64::max);
        out.push(ManufacturedLevel {
            n: m,
            energy: sol.dirichlet_energy,
            energy_error: (sol.dirichlet_energy - exact_energy).abs(),
            nodal_max_error: nodal,
            iterations: sol.iterations,
        });
    }
    let ratios = |f: fn(&ManufacturedLevel) -> f64| {
        out.windows(2)
            .map(|w| f(&w[0]) / f(&w[1]))
            .collect::<Vec<_>>()
    };
    Ok(ManufacturedReport {
        exact_energy,
        energy_ratios: ratios(|l| l.energy_error),
        nodal_ratios: ratios(|l| l.nodal_max_error),
        levels: out,
    })
}

/// Nodal table `x1 x2 u`, one node per line.
pub fn write_solution<W: Write>(mesh: &Mesh, sol: &FieldSolution, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# x1 x2 u")?;
    for (p, u) in mesh.nodes.iter().zip(&sol.values) {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", p[0], p[1], u)?;
    }
    Ok(())
}

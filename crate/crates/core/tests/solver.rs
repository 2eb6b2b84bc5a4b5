use cusplab::asymptotics::ansatz_with_cutoff;
use cusplab::geometry::{eigen_bounds, CuspProfile};
use cusplab::mesh::{build_domain, build_domain_with_width, build_mesh};
use cusplab::solver::{
    assemble_identity, assemble_load, assemble_stiffness, dirichlet_energy, solve_domain,
    solve_zero_mean, Discretization, SolveOptions,
};
use proptest::prelude::*;

struct Case {
    mesh: cusplab::mesh::Mesh,
    domain: cusplab::mesh::TransformedDomain,
    k: cusplab::solver::SparseOperator,
    b: cusplab::solver::LoadVector,
}

fn case(alpha: f64, eps: f64) -> Case {
    let p = CuspProfile::power(1.0, alpha, eps, -1.0).unwrap();
    let domain = build_domain(&p, None).unwrap();
    let mesh = build_mesh(&domain, 8, 1.3).unwrap();
    let k = assemble_stiffness(&mesh, &domain.map).unwrap();
    let b = assemble_load(&mesh, None, Some(&domain)).unwrap();
    Case { mesh, domain, k, b }
}

fn tight() -> SolveOptions {
    SolveOptions {
        tol: 1e-12,
        max_iterations: Some(100_000),
        ..SolveOptions::default()
    }
}

#[test]
fn operator_symmetry_and_nullspace() {
    let c = case(2.5, 1e-3);
    assert!(c.k.asymmetry() <= 1e-14);
    let ones = vec![1.0; c.k.dim()];
    let k1 = c.k.apply(&ones);
    let scale = c.k.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    assert!(k1.iter().all(|v| v.abs() <= 1e-12 * scale));
    assert!(c.b.values.iter().sum::<f64>().abs() <= 1e-8 * c.b.data_scale);
}

#[test]
fn energy_identity_and_zero_mean() {
    for (alpha, eps) in [(1.0, 1e-2), (2.0, 1e-3), (3.0, 1e-4)] {
        let c = case(alpha, eps);
        let s = solve_zero_mean(&c.k, &c.b, &tight()).unwrap();
        let e = s.dirichlet_energy;
        assert!(
            (e - s.boundary_work).abs() <= 1e-8 * e,
            "{alpha}: {e} vs {}",
            s.boundary_work
        );
        let area = &c.k.lumped_area;
        let mean =
            s.values.iter().zip(area).map(|(u, a)| u * a).sum::<f64>() / area.iter().sum::<f64>();
        let umax = s.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(mean.abs() <= 1e-10 * umax, "{mean}");
    }
}

/// `J(v) = b·v - ½ vᵀKv`.
fn functional(c: &Case, v: &[f64]) -> f64 {
    let bv: f64 = c.b.values.iter().zip(v).map(|(b, v)| b * v).sum();
    bv - 0.5 * c.k.quadratic_form(v)
}

#[test]
fn interpolated_ansatz_respects_the_dirichlet_principle() {
    for alpha in [2.0, 3.0] {
        let c = case(alpha, 1e-4);
        let s = solve_zero_mean(&c.k, &c.b, &tight()).unwrap();
        let w: Vec<f64> = c
            .mesh
            .nodes
            .iter()
            .map(|&x| ansatz_with_cutoff(&c.domain.map, x).unwrap().value)
            .collect();
        let j = functional(&c, &w);
        let half = 0.5 * s.dirichlet_energy;
        assert!(j <= half + 1e-8 * half, "{j} vs {half}");
        // the ansatz captures most of the energy
        assert!(j > 0.5 * half, "{j} vs {half}");
    }
}

#[test]
fn enlarging_the_block_lowers_the_energy() {
    for eps in [1e-2, 1e-3] {
        let p = CuspProfile::power(1.0, 2.0, eps, -1.0).unwrap();
        let e = |w: f64| {
            solve_domain(
                &build_domain_with_width(&p, None, w).unwrap(),
                &Discretization::default(),
            )
            .unwrap()
            .solution
            .dirichlet_energy
        };
        let (narrow, wide) = (e(1.0), e(2.0));
        assert!(wide <= narrow, "{eps}: {wide} > {narrow}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_fields_never_beat_the_solution(seed in prop::collection::vec(-1.0f64..1.0, 64)) {
        let c = case(2.5, 1e-3);
        let s = solve_zero_mean(&c.k, &c.b, &tight()).unwrap();
        let n = c.k.dim();
        let v: Vec<f64> = (0..n).map(|i| s.values[i] + seed[i % 64] * (1.0 + (i / 64) as f64).recip()).collect();
        let half = 0.5 * s.dirichlet_energy;
        prop_assert!(functional(&c, &v) <= half + 1e-8 * half);
    }

    #[test]
    fn ellipticity_sandwich(
        alpha in 0.5f64..4.0,
        eps in prop::sample::select(vec![1e-1, 1e-2, 1e-3]),
        seed in prop::collection::vec(-1.0f64..1.0, 97),
    ) {
        let p = CuspProfile::power(1.0, alpha, eps, -1.0).unwrap();
        let domain = build_domain(&p, None).unwrap();
        let mesh = build_mesh(&domain, 4, 1.5).unwrap();
        let k = assemble_stiffness(&mesh, &domain.map).unwrap();
        let k_id = assemble_identity(&mesh).unwrap();
        let u: Vec<f64> = (0..k.dim()).map(|i| seed[i % 97] + 0.1 * seed[(7 * i) % 97] * (i as f64).sqrt()).collect();
        let (l1, l2) = eigen_bounds(&p);
        let e = dirichlet_energy(&k, &u);
        let e_id = dirichlet_energy(&k_id, &u);
        prop_assert!(e >= l1 * e_id * (1.0 - 1e-12));
        prop_assert!(e <= l2 * e_id * (1.0 + 1e-12));
    }
}

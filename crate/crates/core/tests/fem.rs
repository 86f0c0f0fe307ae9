use std::sync::Arc;

use helmsweep::adaptive::{adaptive_solve, AdaptiveConfig, NMaxPolicy};
use helmsweep::analytic::triangle_energy_error;
use helmsweep::fem::assembly::element_matrices;
use helmsweep::fem::{assemble_system, solve, triangle_problem, Snapshot, SnapshotStatus, WaveProblem};
use helmsweep::mesh::Mesh;
use helmsweep::C64;

fn discrete_snapshot(mesh: Arc<Mesh>, problem: &WaveProblem, z: C64) -> Snapshot {
    let sys = assemble_system(&mesh, problem, z).unwrap();
    let u = solve(&sys).unwrap();
    Snapshot::new(mesh, u, z, 0.0, SnapshotStatus::Converged).unwrap()
}

fn refined(levels: usize) -> Arc<Mesh> {
    let mut m = (*triangle_problem().initial_mesh).clone();
    for _ in 0..levels {
        m = m.refine_uniform().unwrap();
    }
    Arc::new(m)
}

// a(u_h, φ_i) − F(φ_i) summed element by element, independent of the
// sparse assembly and solver
#[test]
fn galerkin_residual_vanishes_at_every_free_hat_function() {
    let problem = triangle_problem();
    let mesh = refined(3);
    for z in [C64::new(7.0, 0.0), C64::new(51.0, 0.0), C64::new(30.0, 2.0)] {
        let s = discrete_snapshot(mesh.clone(), &problem, z);
        let u = s.nodal_values();
        let k2 = problem.wavenumber_squared(z);
        let mut r = vec![C64::new(0.0, 0.0); mesh.num_vertices()];
        let mut scale = vec![0.0f64; mesh.num_vertices()];
        for t in 0..mesh.num_triangles() {
            let p = mesh.triangle_points(t);
            let tri = mesh.triangles()[t];
            let (k, m) = element_matrices(p);
            let area = mesh.area(t);
            for i in 0..3 {
                let vi = tri[i] as usize;
                for j in 0..3 {
                    let a = k[i][j] - k2 * m[i][j];
                    r[vi] += a * u[tri[j] as usize];
                    scale[vi] += a.norm() * u[tri[j] as usize].norm();
                }
                r[vi] -= problem.source(z, p[i]) * area / 3.0;
                scale[vi] += area / 3.0;
            }
        }
        let dirichlet = mesh.dirichlet_vertices();
        for v in 0..mesh.num_vertices() {
            if !dirichlet[v] {
                assert!(r[v].norm() <= 1e-10 * scale[v], "z={z} vertex {v}: {}", r[v].norm());
            }
        }
    }
}

#[test]
fn solution_is_linear_in_the_data() {
    let problem = triangle_problem();
    let mesh = refined(2);
    let z = C64::new(23.0, 0.0);
    let u = discrete_snapshot(mesh.clone(), &problem, z).coefficients;
    for alpha in [C64::new(-3.5, 0.0), C64::new(0.25, 2.0)] {
        let v = discrete_snapshot(mesh.clone(), &problem.scaled(alpha), z).coefficients;
        let err: f64 = u.iter().zip(&v).map(|(a, b)| (alpha * a - b).norm()).fold(0.0, f64::max);
        let size = u.iter().map(|a| (alpha * a).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-12 * size, "alpha={alpha}: {err}");
    }
}

#[test]
fn energy_error_decreases_under_uniform_refinement() {
    let problem = triangle_problem();
    for z in [C64::new(6.0, 0.0), C64::new(14.0, 0.0)] {
        let errors: Vec<f64> = (1..5)
            .map(|l| triangle_energy_error(&discrete_snapshot(refined(l), &problem, z), 2001).unwrap())
            .collect();
        for w in errors.windows(2) {
            assert!(w[1] < w[0], "z={z}: {errors:?}");
        }
    }
}

#[test]
fn adaptive_run_meets_its_tolerance_away_from_resonance() {
    let problem = triangle_problem();
    let config = AdaptiveConfig {
        theta: 0.3,
        tol_h: 0.1,
        n_max: NMaxPolicy::Explicit(2e4),
        ..AdaptiveConfig::default()
    };
    let s = adaptive_solve(&problem, C64::new(5.0, 0.0), &config).unwrap();
    assert_eq!(s.status, SnapshotStatus::Converged);
    assert!(s.estimator <= 0.1);
    let last = s.history.last().unwrap();
    assert_eq!((last.dofs, last.eta), (s.dofs(), s.estimator));
    for w in s.history.windows(2) {
        assert!(w[1].dofs >= w[0].dofs && w[1].level == w[0].level + 1);
    }
    // the estimator is reliable up to a moderate constant
    let e = triangle_energy_error(&s, 2001).unwrap();
    assert!(e <= 10.0 * s.estimator && s.estimator <= 10.0 * e, "error {e}, eta {}", s.estimator);
}

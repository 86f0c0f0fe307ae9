//! Sparse direct solution with a conditioning guard.

use faer::linalg::solvers::SolveCore;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Conj, Mat};
use num_complex::Complex64 as C64;

use crate::error::FemError;

use super::assembly::{AssembledSystem, SparseMatrix};

/// Systems whose estimated reciprocal 1-norm condition number falls below
/// this are treated as singular.
pub const RCOND_THRESHOLD: f64 = 1e-14;
const RESIDUAL_TOL: f64 = 1e-10;

struct Factored {
    lu: faer::sparse::linalg::solvers::Lu<usize, C64>,
    n: usize,
}

impl Factored {
    fn solve(&self, b: &[C64], adjoint: bool) -> Vec<C64> {
        let mut rhs = Mat::<C64>::from_fn(self.n, 1, |i, _| b[i]);
        if adjoint {
            self.lu.solve_transpose_in_place_with_conj(Conj::Yes, rhs.as_mut());
        } else {
            self.lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
        }
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

fn factor(a: &SparseMatrix) -> Result<Factored, FemError> {
    let n = a.dim();
    let symbolic = SymbolicSparseColMat::new_checked(n, n, a.col_ptr().to_vec(), None, a.row_idx().to_vec());
    let mat = SparseColMat::new(symbolic, a.values().to_vec());
    let lu = mat.sp_lu().map_err(|_| FemError::SingularOrIllPosed { rcond: 0.0 })?;
    Ok(Factored { lu, n })
}

fn norm1(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm()).sum()
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Hager–Higham estimate of ‖A⁻¹‖₁.
fn inverse_norm1_estimate(f: &Factored) -> f64 {
    let n = f.n;
    let mut x = vec![C64::new(1.0 / n as f64, 0.0); n];
    let mut est = 0.0;
    for it in 0..5 {
        let y = f.solve(&x, false);
        let new_est = norm1(&y);
        if !new_est.is_finite() {
            return f64::INFINITY;
        }
        if it > 0 && new_est <= est {
            break;
        }
        est = new_est;
        let xi: Vec<C64> = y
            .iter()
            .map(|v| if v.norm() > 0.0 { v / v.norm() } else { C64::new(1.0, 0.0) })
            .collect();
        let w = f.solve(&xi, true);
        let (j, wmax) = w
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        let wx: f64 = w.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
        if it > 0 && wmax <= wx {
            break;
        }
        x = vec![C64::new(0.0, 0.0); n];
        x[j] = C64::new(1.0, 0.0);
    }
    // alternating test vector guards against unlucky starts
    let alt: Vec<C64> = (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            C64::new(s * (1.0 + i as f64 / (n.max(2) - 1) as f64), 0.0)
        })
        .collect();
    let y = f.solve(&alt, false);
    est.max(2.0 * norm1(&y) / (3.0 * n as f64))
}

/// Outcome of a guarded solve.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: Vec<C64>,
    pub rcond: f64,
    pub relative_residual: f64,
}

/// Solves the assembled system by sparse LU, then checks the conditioning
/// estimate and the residual (with up to three steps of iterative
/// refinement).
pub fn solve_with_report(system: &AssembledSystem) -> Result<SolveReport, FemError> {
    let a = &system.matrix;
    let b = &system.rhs;
    let n = a.dim();
    if n == 0 {
        return Ok(SolveReport {
            solution: Vec::new(),
            rcond: 1.0,
            relative_residual: 0.0,
        });
    }
    let f = factor(a)?;
    let mut x = f.solve(b, false);
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(FemError::SingularOrIllPosed { rcond: 0.0 });
    }
    let rcond = 1.0 / (a.norm_one().max(system.pencil_norm) * inverse_norm1_estimate(&f));
    if !(rcond >= RCOND_THRESHOLD) {
        return Err(FemError::SingularOrIllPosed { rcond });
    }
    let scale = |x: &[C64]| a.norm_fro() * norm2(x) + norm2(b);
    let residual = |x: &[C64]| {
        let ax = a.matvec(x);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>()
    };
    let mut r = residual(&x);
    let mut rel = norm2(&r) / scale(&x).max(f64::MIN_POSITIVE);
    for _ in 0..3 {
        if rel <= RESIDUAL_TOL {
            break;
        }
        let d = f.solve(&r, false);
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
        r = residual(&x);
        rel = norm2(&r) / scale(&x).max(f64::MIN_POSITIVE);
    }
    if rel > RESIDUAL_TOL {
        return Err(FemError::SingularOrIllPosed { rcond });
    }
    Ok(SolveReport {
        solution: x,
        rcond,
        relative_residual: rel,
    })
}

/// Solves the assembled system; see [`solve_with_report`].
pub fn solve(system: &AssembledSystem) -> Result<Vec<C64>, FemError> {
    solve_with_report(system).map(|r| r.solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::assemble_system;
    use crate::fem::problem::{triangle_problem, FrequencyConvention, WaveProblem};
    use crate::mesh::{BoundaryKind, Geometry, PolygonGeometry};

    fn one_by_one(v: C64, b: C64) -> AssembledSystem {
        let mut m = SparseMatrix::from_pattern(1, vec![vec![0]]);
        m.add(0, 0, v);
        AssembledSystem {
            matrix: m,
            rhs: vec![b],
            dof_map: vec![Some(0)],
            free_vertices: vec![0],
            pencil_norm: 0.0,
        }
    }

    #[test]
    fn scalar_system() {
        let x = solve(&one_by_one(C64::new(2.0, 0.0), C64::new(4.0, 0.0))).unwrap();
        assert_eq!(x, vec![C64::new(2.0, 0.0)]);
    }

    #[test]
    fn zero_matrix_is_singular() {
        let r = solve(&one_by_one(C64::new(0.0, 0.0), C64::new(1.0, 0.0)));
        assert!(matches!(r, Err(FemError::SingularOrIllPosed { .. })));
    }

    /// Square (0,2)² with Dirichlet boundary, refined once: a single free
    /// vertex at the centre. Its 1×1 system is K − zM with K = 4 and
    /// M = |patch|/6 = 4/6, so z = 6 is a discrete eigenvalue.
    #[test]
    fn discrete_eigenvalue_is_singular() {
        let g = PolygonGeometry {
            outer: vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]],
            outer_segments: vec![0; 4],
            holes: vec![],
            hole_segments: vec![],
            segment_kinds: vec![BoundaryKind::Dirichlet],
        };
        let p = WaveProblem::new("box", Geometry::Polygon(g), FrequencyConvention::SquaredWavenumber)
            .unwrap()
            .with_source(|_, _| C64::new(1.0, 0.0));
        let mesh = p.initial_mesh.refine_uniform().unwrap();
        assert_eq!(mesh.num_free_vertices(), 1);
        let sys = assemble_system(&mesh, &p, C64::new(0.0, 0.0)).unwrap();
        let k = sys.matrix.get(0, 0).re;
        let sys1 = assemble_system(&mesh, &p, C64::new(1.0, 0.0)).unwrap();
        let m = k - sys1.matrix.get(0, 0).re;
        assert!((k - 4.0).abs() < 1e-14 && (m - 4.0 / 6.0).abs() < 1e-14);
        let singular = assemble_system(&mesh, &p, C64::new(k / m, 0.0)).unwrap();
        assert!(matches!(solve(&singular), Err(FemError::SingularOrIllPosed { .. })));
        let fine = assemble_system(&mesh, &p, C64::new(k / m + 0.5, 0.0)).unwrap();
        assert!(solve(&fine).is_ok());
    }

    #[test]
    fn residual_is_small_on_preset() {
        let p = triangle_problem();
        let mut mesh = (*p.initial_mesh).clone();
        for _ in 0..8 {
            mesh = mesh.refine_uniform().unwrap();
        }
        let sys = assemble_system(&mesh, &p, C64::new(51.0, 0.0)).unwrap();
        let rep = solve_with_report(&sys).unwrap();
        assert!(rep.relative_residual <= 1e-10);
        assert!(rep.rcond > 1e-14 && rep.rcond < 1.0);
    }
}

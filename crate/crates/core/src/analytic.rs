//! Closed-form reference solution of the triangle benchmark.
//!
//! On {0 < x2 < x1 < π/2} with f = 1, u = 0 on x2 = 0 and homogeneous
//! Neumann data elsewhere,
//!
//! u(z, x) = Σ_{m,n odd} 16 / (π² m n (m² + n² − z)) sin(m x1) sin(n x2).
//!
//! The inner sum over n is the sine series of a 1D two-point problem, which
//! gives a resummed single series used for fast evaluation and energy errors.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::AnalyticError;
use crate::fem::assembly::p1_gradients;
use crate::fem::Snapshot;
use crate::mesh::Point;

/// Default truncation index.
pub const DEFAULT_M: usize = 201;

/// Keep all odd m, n ≤ M.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeriesTruncation {
    m: usize,
}

impl Default for SeriesTruncation {
    fn default() -> Self {
        SeriesTruncation { m: DEFAULT_M }
    }
}

impl SeriesTruncation {
    pub fn new(m: usize) -> Result<Self, AnalyticError> {
        if m % 2 == 0 {
            return Err(AnalyticError::BadTruncation(m));
        }
        Ok(SeriesTruncation { m })
    }

    pub fn max_index(&self) -> usize {
        self.m
    }

    /// Bound on Σ 16 / (π² m n |m² + n² − z|) over the dropped terms, from
    /// integral comparison; infinite when the dropped terms can resonate.
    pub fn tail_bound(&self, z: C64) -> f64 {
        let m = self.m as f64;
        let first = (m + 2.0) * (m + 2.0);
        if first <= 2.0 * z.norm() {
            return f64::INFINITY;
        }
        let outer = 0.5 * (1.0 / (m * m) + (2.0 * m.ln() + 1.0) / (8.0 * m * m));
        2.0 * 16.0 / (PI * PI) * outer / (1.0 - z.norm() / first)
    }
}

/// Distinct Laplace eigenvalues m² + n² (m ≤ n odd) with multiplicities,
/// ascending.
pub fn triangle_eigenvalues(count: usize) -> Vec<(f64, usize)> {
    let mut bound = 4 * count.max(1) as u64 + 2;
    loop {
        let mut vals = Vec::new();
        let mut n = 1u64;
        while n * n < bound {
            let mut m = 1;
            while m <= n && m * m + n * n <= bound {
                vals.push(m * m + n * n);
                m += 2;
            }
            n += 2;
        }
        vals.sort_unstable();
        let mut out: Vec<(f64, usize)> = Vec::new();
        for v in vals {
            match out.last_mut() {
                Some(last) if last.0 == v as f64 => last.1 += 1,
                _ => out.push((v as f64, 1)),
            }
        }
        if out.len() >= count {
            out.truncate(count);
            return out;
        }
        bound *= 2;
    }
}

/// Distance from z to the nearest eigenvalue m² + n² (m, n odd).
fn nearest_eigenvalue(z: C64) -> (f64, f64) {
    let r = z.re.max(0.0);
    let top = (r.sqrt() as u64 + 3) | 1;
    let mut best = (2.0, (z - 2.0).norm());
    let mut n = 1;
    while n <= top {
        let mut m = 1;
        while m <= n {
            let l = (m * m + n * n) as f64;
            let d = (z - l).norm();
            if d < best.1 {
                best = (l, d);
            }
            m += 2;
        }
        n += 2;
    }
    best
}

fn check_spectrum(z: C64) -> Result<(), AnalyticError> {
    let (eigenvalue, distance) = nearest_eigenvalue(z);
    if distance < 1e-8 {
        return Err(AnalyticError::NearEigenvalue {
            z: z.to_string(),
            eigenvalue,
            distance,
        });
    }
    Ok(())
}

fn odd(m: usize) -> impl Iterator<Item = f64> {
    (1..=m).step_by(2).map(|k| k as f64)
}

/// Truncated double series for u(z, x).
pub fn triangle_exact_solution(z: C64, x: Point, trunc: SeriesTruncation) -> Result<C64, AnalyticError> {
    check_spectrum(z)?;
    let s2: Vec<f64> = odd(trunc.m).map(|n| (n * x[1]).sin() / n).collect();
    let mut acc = C64::new(0.0, 0.0);
    for m in odd(trunc.m) {
        let s1 = (m * x[0]).sin() / m;
        let mut inner = C64::new(0.0, 0.0);
        for (k, n) in odd(trunc.m).enumerate() {
            inner += s2[k] / (m * m + n * n - z);
        }
        acc += s1 * inner;
    }
    Ok(acc * (16.0 / (PI * PI)))
}

/// Truncated series for y(z) = ∫ u over the side x1 = π/2.
pub fn triangle_exact_qoi(z: C64, trunc: SeriesTruncation) -> Result<C64, AnalyticError> {
    check_spectrum(z)?;
    let mut acc = C64::new(0.0, 0.0);
    for m in odd(trunc.m) {
        let sign = (m * PI / 2.0).sin().round();
        let mut inner = C64::new(0.0, 0.0);
        for n in odd(trunc.m) {
            inner += 1.0 / (n * n * (m * m + n * n - z));
        }
        acc += sign / m * inner;
    }
    Ok(acc * (16.0 / (PI * PI)))
}

/// Solution of −h'' + κ² h = 1 on (0, π/2) with h(0) = 0, h'(π/2) = 0.
fn two_point(kappa2: C64, t: f64) -> C64 {
    let kappa = kappa2.sqrt();
    if kappa.norm() < 1e-5 {
        return C64::new(t * (PI - t) / 2.0, 0.0) - kappa2 * (t * t * t * t / 24.0 - PI * t * t * t / 12.0 + PI * PI * PI * t / 24.0);
    }
    let e = |s: f64| (-kappa * s).exp();
    (1.0 - (e(t) + e(PI - t)) / (1.0 + e(PI))) / kappa2
}

/// ∫₀^{π/2} of the two-point solution.
fn two_point_integral(kappa2: C64) -> C64 {
    let kappa = kappa2.sqrt();
    if kappa.norm() < 1e-5 {
        return C64::new(PI * PI * PI / 24.0, 0.0);
    }
    let th = (1.0 - (-kappa * PI).exp()) / (1.0 + (-kappa * PI).exp());
    (PI / 2.0 - th / kappa) / kappa2
}

/// u(z, x) = Σ_{m odd ≤ M} 4/(π m) sin(m x1) h_m(x2), where h_m solves the
/// two-point problem with κ² = m² − z. Converges like M⁻².
pub fn triangle_solution_resummed(z: C64, x: Point, m_max: usize) -> Result<C64, AnalyticError> {
    check_spectrum(z)?;
    Ok(odd(m_max)
        .map(|m| 4.0 / (PI * m) * (m * x[0]).sin() * two_point(m * m - z, x[1]))
        .sum())
}

/// y(z) from the resummed series.
pub fn triangle_qoi_resummed(z: C64, m_max: usize) -> Result<C64, AnalyticError> {
    check_spectrum(z)?;
    Ok(odd(m_max)
        .map(|m| 4.0 / (PI * m) * (m * PI / 2.0).sin().round() * two_point_integral(m * m - z))
        .sum())
}

const STRANG6: [(f64, f64, f64); 2] = [
    (0.445_948_490_915_965, 0.108_103_018_168_070, 0.223_381_589_678_011),
    (0.091_576_213_509_771, 0.816_847_572_980_459, 0.109_951_743_655_322),
];

/// ‖∇(u − u_h)‖_{L²(Ω)} for a triangle-benchmark snapshot at real or
/// complex z.
///
/// Integration by parts with −Δu = 1 + z u and the boundary conditions gives
/// ∫∇u·∇v̄ = ∫(1 + z u) v̄ for v = u and v = u_h, so only values of u are
/// needed; they come from the resummed series, integrated by a degree-4
/// rule on every element.
pub fn triangle_energy_error(snapshot: &Snapshot, m_max: usize) -> Result<f64, AnalyticError> {
    let z = snapshot.z;
    check_spectrum(z)?;
    let mesh = &*snapshot.mesh;
    let uh = snapshot.nodal_values();
    let (mut uu, mut uv, mut vv) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0.0);
    let coeff: Vec<f64> = odd(m_max).map(|m| 4.0 / (PI * m)).collect();
    let kappa2: Vec<C64> = odd(m_max).map(|m| m * m - z).collect();
    for t in 0..mesh.num_triangles() {
        let p = mesh.triangle_points(t);
        let tri = mesh.triangles()[t];
        let ut = tri.map(|v| uh[v as usize]);
        let (g, area) = p1_gradients(p);
        let mut grad = [C64::new(0.0, 0.0); 2];
        for i in 0..3 {
            grad[0] += ut[i] * g[i][0];
            grad[1] += ut[i] * g[i][1];
        }
        vv += area * (grad[0].norm_sqr() + grad[1].norm_sqr());
        for &(a, b, w) in &STRANG6 {
            for l in [[a, a, b], [a, b, a], [b, a, a]] {
                let x = [
                    l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                    l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                ];
                let v = l[0] * ut[0] + l[1] * ut[1] + l[2] * ut[2];
                let u: C64 = odd(m_max)
                    .enumerate()
                    .map(|(k, m)| coeff[k] * (m * x[0]).sin() * two_point(kappa2[k], x[1]))
                    .sum();
                let rhs = 1.0 + z * u;
                uu += w * area * rhs * u.conj();
                uv += w * area * rhs * v.conj();
            }
        }
    }
    let e2 = uu.re - 2.0 * uv.re + vv;
    Ok(e2.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues() {
        assert_eq!(
            triangle_eigenvalues(6),
            vec![(2.0, 1), (10.0, 1), (18.0, 1), (26.0, 1), (34.0, 1), (50.0, 2)]
        );
        assert_eq!(triangle_eigenvalues(1), vec![(2.0, 1)]);
        let below: Vec<f64> = triangle_eigenvalues(40)
            .into_iter()
            .map(|e| e.0)
            .filter(|&l| l <= 100.0)
            .collect();
        assert_eq!(below, vec![2.0, 10.0, 18.0, 26.0, 34.0, 50.0, 58.0, 74.0, 82.0, 90.0, 98.0]);
    }

    #[test]
    fn eigenvalue_enumeration_matches_brute_force() {
        let got = triangle_eigenvalues(60);
        let top = got.last().unwrap().0 as u64;
        let mut brute = std::collections::BTreeMap::new();
        for n in (1..=top).step_by(2) {
            for m in (1..=n).step_by(2) {
                if m * m + n * n <= top {
                    *brute.entry(m * m + n * n).or_insert(0) += 1;
                }
            }
        }
        let brute: Vec<(f64, usize)> = brute.into_iter().map(|(k, v)| (k as f64, v)).collect();
        assert_eq!(got, brute);
    }

    #[test]
    fn dirichlet_side_vanishes() {
        let tr = SeriesTruncation::new(31).unwrap();
        for x1 in [0.1, 0.7, 1.5] {
            assert_eq!(triangle_exact_solution(C64::new(7.0, 0.0), [x1, 0.0], tr).unwrap(), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn double_series_matches_brute_force_at_higher_m() {
        // z = 0 at the corner (π/2, π/2)
        let x = [PI / 2.0, PI / 2.0];
        let lo = triangle_exact_solution(C64::new(0.0, 0.0), x, SeriesTruncation::new(501).unwrap()).unwrap();
        let hi = triangle_solution_resummed(C64::new(0.0, 0.0), x, 20001).unwrap();
        let bound = SeriesTruncation::new(501).unwrap().tail_bound(C64::new(0.0, 0.0));
        assert!((lo - hi).norm() < 1e-10_f64.max(bound), "{lo} {hi} {bound}");
        // brute-force direct summation in a different order
        let mut brute = 0.0;
        for n in (1..=501).rev().step_by(2) {
            for m in (1..=501).rev().step_by(2) {
                let (m, n) = (m as f64, n as f64);
                brute += 16.0 / (PI * PI * m * n * (m * m + n * n)) * (m * x[0]).sin() * (n * x[1]).sin();
            }
        }
        assert!((lo.re - brute).abs() < 1e-12);
    }

    #[test]
    fn resummed_agrees_with_double_series() {
        let tr = SeriesTruncation::new(401).unwrap();
        for (z, x) in [(51.0, [1.2, 0.4]), (3.0, [0.9, 0.8]), (77.7, [1.5, 1.0])] {
            let z = C64::new(z, 0.0);
            let a = triangle_exact_solution(z, x, tr).unwrap();
            let b = triangle_solution_resummed(z, x, 40001).unwrap();
            assert!((a - b).norm() <= tr.tail_bound(z), "{a} {b}");
            assert!((a - b).norm() < 1e-5);
        }
    }

    #[test]
    fn qoi_value_at_51() {
        let y = triangle_exact_qoi(C64::new(51.0, 0.0), SeriesTruncation::default()).unwrap();
        let yr = triangle_qoi_resummed(C64::new(51.0, 0.0), 200001).unwrap();
        assert!((y - yr).norm() < 1e-6);
        assert!((y.norm() - 0.147).abs() < 5e-4);
    }

    #[test]
    fn qoi_matches_quadrature_of_solution() {
        let z = C64::new(20.5, 0.0);
        let y = triangle_qoi_resummed(z, 100001).unwrap();
        // composite Gauss on the side x1 = π/2
        let (panels, g) = (400, [0.5 - 0.288_675_134_594_812_9, 0.5 + 0.288_675_134_594_812_9]);
        let h = PI / 2.0 / panels as f64;
        let mut q = C64::new(0.0, 0.0);
        for k in 0..panels {
            for s in g {
                q += 0.5 * h * triangle_solution_resummed(z, [PI / 2.0, (k as f64 + s) * h], 2001).unwrap();
            }
        }
        assert!((q - y).norm() < 1e-6 * y.norm(), "{q} {y}");
    }

    #[test]
    fn qoi_decays_for_large_negative_z() {
        let tr = SeriesTruncation::new(101).unwrap();
        let a = triangle_exact_qoi(C64::new(-1e4, 0.0), tr).unwrap().norm();
        let b = triangle_exact_qoi(C64::new(-1e6, 0.0), tr).unwrap().norm();
        assert!(b < a && b < 1e-5);
    }

    #[test]
    fn near_eigenvalue_rejected() {
        assert!(matches!(
            triangle_exact_qoi(C64::new(26.0, 0.0), SeriesTruncation::default()),
            Err(AnalyticError::NearEigenvalue { .. })
        ));
        assert!(triangle_exact_qoi(C64::new(26.0 + 1e-6, 0.0), SeriesTruncation::default()).is_ok());
        assert!(SeriesTruncation::new(10).is_err());
    }

    #[test]
    fn tail_bound_decreases() {
        let z = C64::new(51.0, 0.0);
        let b: Vec<f64> = [11, 21, 51, 101, 201, 401]
            .iter()
            .map(|&m| SeriesTruncation::new(m).unwrap().tail_bound(z))
            .collect();
        assert!(b.windows(2).all(|w| w[1] < w[0]));
        assert!(SeriesTruncation::new(3).unwrap().tail_bound(z).is_infinite());
    }

    #[test]
    fn truncation_convergence_within_tail_bound() {
        let z = C64::new(40.0, 0.0);
        let (a, b) = (SeriesTruncation::new(101).unwrap(), SeriesTruncation::new(203).unwrap());
        for k in 0..10 {
            let x1 = 0.1 + 1.4 * (k as f64 * 0.618).fract();
            let x = [x1, x1 * (0.05 + 0.9 * (k as f64 * 0.377).fract())];
            let d = (triangle_exact_solution(z, x, a).unwrap() - triangle_exact_solution(z, x, b).unwrap()).norm();
            assert!(d <= a.tail_bound(z));
        }
    }

    #[test]
    fn neumann_side_has_zero_normal_derivative() {
        // ∂/∂x1 of each term carries cos(mπ/2) = 0
        for m in odd(99) {
            assert!((m * PI / 2.0).cos().abs() < 1e-13);
        }
        let z = C64::new(12.0, 0.0);
        let (h, x2) = (1e-5, 0.6);
        let f = |x1: f64| triangle_solution_resummed(z, [x1, x2], 4001).unwrap();
        let d = (f(PI / 2.0) - f(PI / 2.0 - h)) / h;
        assert!(d.norm() < 1e-4);
    }

    #[test]
    fn poles_are_simple() {
        // (λ − z) y(z) has the same finite limit from both sides of λ = 10;
        // one Richardson step removes the linear term
        let l = 10.0;
        let y = |z: f64| triangle_qoi_resummed(C64::new(z, 0.0), 20001).unwrap().re;
        let below = |d: f64| d * y(l - d);
        let above = |d: f64| -d * y(l + d);
        let (r1, r2) = (2.0 * below(1e-4) - below(2e-4), 2.0 * above(1e-4) - above(2e-4));
        assert!((r1 - r2).abs() < 1e-6 * r1.abs(), "{r1} {r2}");
        // residue 16/π² (1/9 − 1/3)
        assert!((r1 - 16.0 / (PI * PI) * (1.0 / 9.0 - 1.0 / 3.0)).abs() < 1e-6);
    }

    #[test]
    fn eigenfunction_is_normalized() {
        // φ_{1,3} ∝ sin x1 sin 3x2 + sin 3x1 sin x2 on the triangle
        let c = 4.0 / PI;
        let phi = |x: Point| c * ((x[0]).sin() * (3.0 * x[1]).sin() + (3.0 * x[0]).sin() * (x[1]).sin());
        let mesh = crate::fem::triangle_problem().initial_mesh;
        let mut mesh = (*mesh).clone();
        for _ in 0..10 {
            mesh = mesh.refine_uniform().unwrap();
        }
        let mut s = 0.0;
        for t in 0..mesh.num_triangles() {
            let p = mesh.triangle_points(t);
            let area = mesh.area(t);
            for &(a, b, w) in &STRANG6 {
                for l in [[a, a, b], [a, b, a], [b, a, a]] {
                    let x = [
                        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                    ];
                    s += w * area * phi(x).powi(2);
                }
            }
        }
        assert!((s - 1.0).abs() < 1e-6, "{s}");
    }
}

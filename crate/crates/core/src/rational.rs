//! Barycentric rational surrogates: standard rational interpolation of
//! scalar and function-valued samples, minimal rational interpolation,
//! poles, and surrogates of quadratic outputs.
//!
//! A function-valued surrogate stores its numerator coefficients p_i over
//! the snapshot basis, p_i = Σ_j P̊_{ji} v(z_j), so that
//!
//! r(z) = Σ_j v(z_j) Σ_i P̊_{ji}/(z − ζ_i) / Σ_i q_i/(z − ζ_i).

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::RationalError;
use crate::fem::{apply_linear_functional, Curve, LinearFunctional, Snapshot};
use crate::linalg::{self, fix_phase, min_right_singular_vector, pivoted_cholesky, CMat, PivotedCholesky};
use crate::overlay::{Gramian, InnerProductSpec, TraceGrid};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Pivot threshold of the rank-revealing Cholesky, relative to the largest
/// diagonal entry.
pub const CHOLESKY_THRESHOLD: f64 = 1e-12;
/// Tolerated negative diagonal of a Gramian, relative to its trace.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Eigenvalues of the pole pencil with |β| below this (relative to |α|)
/// are infinite.
pub const INFINITE_EIGENVALUE: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub enum Numerator {
    /// p_i of a scalar surrogate.
    Scalar(Vec<C64>),
    /// P̊, S × (N+1), over the snapshot basis.
    Snapshots(CMat),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarycentricRational {
    pub support: Vec<C64>,
    /// Unit-norm denominator weights.
    pub q: Vec<C64>,
    pub numerator: Numerator,
    /// Frequencies of the snapshot basis (empty for scalar surrogates).
    pub sample_points: Vec<C64>,
    /// Snapshot ids of the basis.
    pub ids: Vec<usize>,
    /// Space V of the function-valued samples.
    pub spec: Option<InnerProductSpec>,
}

/// Value of a surrogate at one point.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Scalar(C64),
    /// Weights w_j with r(z) = Σ_j w_j v(z_j).
    Coefficients(Vec<C64>),
}

enum Kernel {
    /// z coincides with support point i.
    Support(usize),
    /// c_i = 1/(z − ζ_i) and the denominator Σ q_i c_i.
    Generic(Vec<C64>, C64),
}

fn distinct(a: C64, b: C64) -> bool {
    (a - b).norm() > 1e-14 * (1.0 + a.norm().max(b.norm()))
}

fn check_distinct(points: &[C64]) -> Result<(), RationalError> {
    for (k, &a) in points.iter().enumerate() {
        if let Some(&b) = points[k + 1..].iter().find(|&&b| !distinct(a, b)) {
            return Err(RationalError::DuplicatePoints(format!("{a} and {b}")));
        }
    }
    Ok(())
}

/// Indices of `points` in ascending order of real part, then imaginary part.
fn ascending(points: &[C64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .re
            .total_cmp(&points[b].re)
            .then(points[a].im.total_cmp(&points[b].im))
    });
    order
}

impl BarycentricRational {
    pub fn degree(&self) -> usize {
        self.support.len() - 1
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self.numerator, Numerator::Scalar(_))
    }

    /// p_i over the snapshot basis, or the scalar p_i as a 1 × (N+1) row.
    fn p_column(&self, i: usize) -> Vec<C64> {
        match &self.numerator {
            Numerator::Scalar(p) => vec![p[i]],
            Numerator::Snapshots(m) => m.col(i),
        }
    }

    fn kernel(&self, z: C64) -> Result<Kernel, RationalError> {
        for (i, &zeta) in self.support.iter().enumerate() {
            if (z - zeta).norm() < 1e-13 * (1.0 + zeta.norm()) {
                if self.q[i] == ZERO {
                    return Err(RationalError::PoleEvaluation(z.to_string()));
                }
                return Ok(Kernel::Support(i));
            }
        }
        let c: Vec<C64> = self.support.iter().map(|&zeta| ONE / (z - zeta)).collect();
        let d: C64 = c.iter().zip(&self.q).map(|(c, q)| c * q).sum();
        let scale: f64 = c.iter().zip(&self.q).map(|(c, q)| (c * q).norm()).sum();
        if d.norm() <= 1e-14 * scale {
            return Err(RationalError::PoleEvaluation(z.to_string()));
        }
        Ok(Kernel::Generic(c, d))
    }

    /// Σ_i p_i c_i / d, or p_i/q_i at a support point.
    fn combine(&self, z: C64) -> Result<Vec<C64>, RationalError> {
        match self.kernel(z)? {
            Kernel::Support(i) => Ok(self.p_column(i).into_iter().map(|p| p / self.q[i]).collect()),
            Kernel::Generic(c, d) => {
                let rows = match &self.numerator {
                    Numerator::Scalar(_) => 1,
                    Numerator::Snapshots(m) => m.rows(),
                };
                let mut out = vec![ZERO; rows];
                for (i, ci) in c.iter().enumerate() {
                    for (o, p) in out.iter_mut().zip(self.p_column(i)) {
                        *o += p * ci;
                    }
                }
                Ok(out.into_iter().map(|v| v / d).collect())
            }
        }
    }

    pub fn evaluate(&self, z: C64) -> Result<Value, RationalError> {
        let v = self.combine(z)?;
        Ok(if self.is_scalar() { Value::Scalar(v[0]) } else { Value::Coefficients(v) })
    }

    /// Value of a scalar surrogate.
    pub fn evaluate_scalar(&self, z: C64) -> Result<C64, RationalError> {
        if !self.is_scalar() {
            return Err(RationalError::Dimension("surrogate is function-valued".into()));
        }
        Ok(self.combine(z)?[0])
    }

    /// Snapshot weights of a function-valued surrogate.
    pub fn evaluate_weights(&self, z: C64) -> Result<Vec<C64>, RationalError> {
        if self.is_scalar() {
            return Err(RationalError::Dimension("surrogate is scalar".into()));
        }
        self.combine(z)
    }

    /// Trace of the surrogate on a common grid built from its snapshots.
    pub fn evaluate_on_grid(&self, z: C64, grid: &TraceGrid) -> Result<Vec<C64>, RationalError> {
        let w = self.evaluate_weights(z)?;
        if grid.coefficients.rows() != w.len() {
            return Err(RationalError::Dimension(format!(
                "grid holds {} snapshots, surrogate {}",
                grid.coefficients.rows(),
                w.len()
            )));
        }
        Ok(grid.combine(&w))
    }

    /// Finite roots of π(z) Σ q_i/(z − ζ_i), from the arrowhead pencil
    /// [[0, qᵀ], [1, diag ζ]] − λ diag(0, 1, …, 1).
    pub fn poles(&self) -> Vec<C64> {
        let n = self.support.len() + 1;
        let a = faer::Mat::<C64>::from_fn(n, n, |i, j| match (i, j) {
            (0, 0) => ZERO,
            (0, j) => self.q[j - 1],
            (_, 0) => ONE,
            (i, j) if i == j => self.support[i - 1],
            _ => ZERO,
        });
        let b = faer::Mat::<C64>::from_fn(n, n, |i, j| if i == j && i > 0 { ONE } else { ZERO });
        let Ok(e) = a.generalized_eigen(&b) else {
            return Vec::new();
        };
        let (sa, sb) = (e.S_a(), e.S_b());
        let mut poles: Vec<C64> = (0..n)
            .filter_map(|k| {
                let (alpha, beta) = (sa[k], sb[k]);
                (beta.norm() > INFINITE_EIGENVALUE * alpha.norm()).then(|| alpha / beta)
            })
            .collect();
        poles.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        poles.truncate(self.degree());
        poles
    }
}

/// Rank-revealing Cholesky G = R^H R of a snapshot Gramian.
pub fn orthonormalize(g: &Gramian) -> Result<PivotedCholesky, RationalError> {
    pivoted_cholesky(&g.matrix, CHOLESKY_THRESHOLD, PSD_TOLERANCE)
}

fn degree_guard(samples: usize, n: usize) -> Result<(), RationalError> {
    if samples < 2 * n + 1 {
        return Err(RationalError::TooFewSamples {
            samples,
            degree: n,
            needed: 2 * n + 1,
        });
    }
    Ok(())
}

/// Vectorized Loewner matrix for collocation at the first N+1 points of
/// `order`: rows (j, j') with entries (R_{j'j} − R_{j'ζ_i})/(z_j − ζ_i).
fn loewner(points: &[C64], r: &CMat, order: &[usize], n: usize) -> CMat {
    let t = r.rows();
    let rest = &order[n + 1..];
    CMat::from_fn(t * rest.len(), n + 1, |row, i| {
        let (j, jp) = (rest[row / t], row % t);
        let s = order[i];
        (r[(jp, j)] - r[(jp, s)]) / (points[j] - points[s])
    })
}

fn collocation(points: &[C64], r: &CMat, n: usize, spec: Option<InnerProductSpec>, ids: Vec<usize>) -> BarycentricRational {
    let order = ascending(points);
    let (q, _) = min_right_singular_vector(&loewner(points, r, &order, n));
    let support: Vec<C64> = order[..=n].iter().map(|&j| points[j]).collect();
    let numerator = if spec.is_none() {
        Numerator::Scalar((0..=n).map(|i| q[i] * r[(0, order[i])]).collect())
    } else {
        let mut p = CMat::zeros(points.len(), n + 1);
        for i in 0..=n {
            p[(order[i], i)] = q[i];
        }
        Numerator::Snapshots(p)
    };
    BarycentricRational {
        support,
        q,
        numerator,
        sample_points: if spec.is_some() { points.to_vec() } else { Vec::new() },
        ids,
        spec,
    }
}

/// Scalar standard rational interpolant of type [N] with supports at the
/// N+1 smallest sample points.
pub fn build_sri(samples: &[(C64, C64)], n: usize) -> Result<BarycentricRational, RationalError> {
    degree_guard(samples.len(), n)?;
    let points: Vec<C64> = samples.iter().map(|s| s.0).collect();
    check_distinct(&points)?;
    let r = CMat::from_fn(1, samples.len(), |_, j| samples[j].1);
    Ok(collocation(&points, &r, n, None, Vec::new()))
}

/// Function-valued standard rational interpolant from the Gramian of the
/// samples, with supports at the N+1 smallest sample points.
pub fn build_vsri(points: &[C64], g: &Gramian, n: usize) -> Result<BarycentricRational, RationalError> {
    degree_guard(points.len(), n)?;
    check_gramian(points, g)?;
    check_distinct(points)?;
    let chol = orthonormalize(g)?;
    Ok(collocation(points, &chol.r, n, Some(g.spec.clone()), g.ids.clone()))
}

fn check_gramian(points: &[C64], g: &Gramian) -> Result<(), RationalError> {
    if g.size() != points.len() {
        return Err(RationalError::Dimension(format!(
            "{} sample points, Gramian of size {}",
            points.len(),
            g.size()
        )));
    }
    if points.is_empty() {
        return Err(RationalError::Empty);
    }
    Ok(())
}

/// Function-valued standard rational interpolant for arbitrary support
/// points. Samples that coincide with supports are interpolated; the rest
/// enter the least-squares fit.
pub fn build_vsri_general(points: &[C64], support: &[C64], g: &Gramian) -> Result<BarycentricRational, RationalError> {
    if support.is_empty() {
        return Err(RationalError::Empty);
    }
    let n = support.len() - 1;
    degree_guard(points.len(), n)?;
    check_gramian(points, g)?;
    check_distinct(points)?;
    check_distinct(support)?;
    let big_s = points.len();
    let r0 = orthonormalize(g)?.r;
    let t = r0.rows();

    // canonical order: matched supports and samples first
    let mut sup_order = Vec::with_capacity(n + 1);
    let mut smp_order = Vec::with_capacity(big_s);
    for (i, &zeta) in support.iter().enumerate() {
        if let Some(j) = points.iter().position(|&z| !distinct(z, zeta)) {
            sup_order.push(i);
            smp_order.push(j);
        }
    }
    let s = sup_order.len();
    let rest_sup: Vec<usize> = (0..=n).filter(|i| !sup_order.contains(i)).collect();
    let rest_smp: Vec<usize> = (0..big_s).filter(|j| !smp_order.contains(j)).collect();
    sup_order.extend(rest_sup);
    smp_order.extend(rest_smp);
    let z: Vec<C64> = smp_order.iter().map(|&j| points[j]).collect();
    let zeta: Vec<C64> = sup_order.iter().map(|&i| support[i]).collect();
    let r = CMat::from_fn(t, big_s, |a, j| r0[(a, smp_order[j])]);

    let c = CMat::from_fn(big_s - s, n + 1, |j, i| ONE / (z[s + j] - zeta[i]));
    let chc = c.adjoint().matmul(&c);
    let d = if s <= n {
        let cr: Vec<usize> = (s..=n).collect();
        linalg::hpd_inverse(&chc.select(&cr, &cr))?
    } else {
        CMat::zeros(0, 0)
    };

    // H_i, S × (N+1)
    let h: Vec<CMat> = (0..=n)
        .map(|i| {
            let mut hi = CMat::zeros(big_s, n + 1);
            if i < s {
                hi[(i, i)] = ONE;
                return hi;
            }
            let di = d.row(i - s);
            for jp in 0..big_s {
                if jp < s {
                    let v: C64 = (s..=n).map(|k| di[k - s] * chc[(k, jp)]).sum();
                    hi[(jp, jp)] = -v;
                } else {
                    let crow = c.row(jp - s);
                    let f: C64 = (s..=n).map(|k| di[k - s] * crow[k].conj()).sum();
                    for ip in 0..=n {
                        hi[(jp, ip)] = f * crow[ip];
                    }
                }
            }
            hi
        })
        .collect();
    let rh: Vec<CMat> = h.iter().map(|hi| r.matmul(hi)).collect();

    let mut gmat = CMat::zeros(t * (big_s - s), n + 1);
    for j in s..big_s {
        let crow = c.row(j - s);
        for a in 0..t {
            for i in 0..=n {
                let mut v = r[(a, j)] * crow[i];
                for (ip, rhi) in rh.iter().enumerate() {
                    v -= crow[ip] * rhi[(a, i)];
                }
                gmat[((j - s) * t + a, i)] = v;
            }
        }
    }
    let (qr, _) = min_right_singular_vector(&gmat);

    // back to the caller's ordering of supports and samples
    let mut q = vec![ZERO; n + 1];
    let mut p = CMat::zeros(big_s, n + 1);
    for (ii, &i) in sup_order.iter().enumerate() {
        q[i] = qr[ii];
        let col = h[ii].mul_vec(&qr);
        for (jj, &j) in smp_order.iter().enumerate() {
            p[(j, i)] = col[jj];
        }
    }
    let before = q.clone();
    fix_phase(&mut q);
    let k = before.iter().zip(&q).find(|(b, _)| b.norm() > 0.0).map_or(ONE, |(b, a)| a / b);
    let p = p.scale(k);
    Ok(BarycentricRational {
        support: support.to_vec(),
        q,
        numerator: Numerator::Snapshots(p),
        sample_points: points.to_vec(),
        ids: g.ids.clone(),
        spec: Some(g.spec.clone()),
    })
}

/// Minimal rational interpolant of type [S−1]: q is the minimal
/// eigenvector of the Gramian and every sample is a support point.
pub fn build_mri(points: &[C64], g: &Gramian) -> Result<BarycentricRational, RationalError> {
    check_gramian(points, g)?;
    check_distinct(points)?;
    if g.matrix.hermitian_defect() > 1e-10 {
        return Err(RationalError::Dimension("Gramian is not Hermitian".into()));
    }
    let s = points.len();
    let (q, _) = min_right_singular_vector(&g.matrix);
    let mut p = CMat::zeros(s, s);
    for i in 0..s {
        p[(i, i)] = q[i];
    }
    Ok(BarycentricRational {
        support: points.to_vec(),
        q,
        numerator: Numerator::Snapshots(p),
        sample_points: points.to_vec(),
        ids: g.ids.clone(),
        spec: Some(g.spec.clone()),
    })
}

/// Relative energy of the part of each numerator coefficient p_i that lies
/// outside the snapshot span, ‖p_i − Π p_i‖²/‖p_i‖², computed from the
/// Gramian alone.
pub fn numerator_span_residuals(r: &BarycentricRational, g: &CMat) -> Result<Vec<f64>, RationalError> {
    let Numerator::Snapshots(p) = &r.numerator else {
        return Err(RationalError::Dimension("surrogate is scalar".into()));
    };
    if p.rows() != g.rows() {
        return Err(RationalError::Dimension("Gramian does not match the numerator".into()));
    }
    // pseudo-inverse of the Hermitian G from its singular value decomposition
    let svd = linalg::svd(g);
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..g.rows()).filter(|&k| svd.singular_values[k] > 1e-14 * smax).collect();
    Ok((0..p.cols())
        .map(|i| {
            let c = p.col(i);
            let gc = g.mul_vec(&c);
            let norm = linalg::dot(&c, &gc).re;
            if norm <= 0.0 {
                return 0.0;
            }
            let proj: f64 = keep
                .iter()
                .map(|&k| linalg::dot(&svd.v.col(k), &gc).norm_sqr() / svd.singular_values[k])
                .sum();
            ((norm - proj) / norm).abs()
        })
        .collect())
}

fn curve_within(inner: &Curve, outer: &Curve) -> bool {
    match (inner, outer) {
        (Curve::Segments(a), Curve::Segments(b)) => a.iter().all(|s| b.contains(s)),
        _ => inner == outer,
    }
}

/// Scalar surrogate of F(r(z)), obtained by applying F to the snapshots.
pub fn extract_functional_surrogate(
    r: &BarycentricRational,
    snaps: &[Snapshot],
    functional: &LinearFunctional,
) -> Result<BarycentricRational, RationalError> {
    let Numerator::Snapshots(p) = &r.numerator else {
        return Err(RationalError::Dimension("surrogate is already scalar".into()));
    };
    if snaps.len() != p.rows() {
        return Err(RationalError::Dimension(format!("{} snapshots for {} basis functions", snaps.len(), p.rows())));
    }
    if let Some(InnerProductSpec::L2Curve { curve }) = &r.spec {
        if !curve_within(&functional.curve, curve) {
            return Err(RationalError::UnsupportedFunctional(format!("{:?} is not part of {:?}", functional.curve, curve)));
        }
    }
    let y: Vec<C64> = snaps
        .iter()
        .map(|s| apply_linear_functional(s, functional))
        .collect::<Result<_, _>>()?;
    let scalar = p.transpose().mul_vec(&y);
    Ok(BarycentricRational {
        support: r.support.clone(),
        q: r.q.clone(),
        numerator: Numerator::Scalar(scalar),
        sample_points: Vec::new(),
        ids: Vec::new(),
        spec: None,
    })
}

/// Surrogate of the real quadratic output ∫_ω |r(z)|².
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticSurrogate {
    pub rational: BarycentricRational,
    /// G^{[y]}[j'][j] = ∫_ω v(z_j) conj(v(z_j')).
    pub gy: CMat,
}

pub fn build_quadratic_surrogate(r: &BarycentricRational, gy: &Gramian) -> Result<QuadraticSurrogate, RationalError> {
    let Numerator::Snapshots(p) = &r.numerator else {
        return Err(RationalError::Dimension("quadratic surrogates need a function-valued numerator".into()));
    };
    if gy.size() != p.rows() || (!r.ids.is_empty() && gy.ids != r.ids) {
        return Err(RationalError::Dimension("output Gramian is indexed differently from the surrogate".into()));
    }
    Ok(QuadraticSurrogate {
        rational: r.clone(),
        gy: gy.matrix.clone(),
    })
}

impl QuadraticSurrogate {
    /// w^H G^{[y]} w with the snapshot weights w of the surrogate, clamped
    /// at zero.
    pub fn evaluate(&self, z: C64) -> Result<f64, RationalError> {
        let w = self.rational.evaluate_weights(z)?;
        let v = linalg::dot(&w, &self.gy.mul_vec(&w)).re;
        Ok(v.max(0.0))
    }
}

#[derive(Serialize, Deserialize)]
struct SurrogateDocument {
    support: Vec<[f64; 2]>,
    q: Vec<[f64; 2]>,
    /// Scalar p_i, or P̊ row-major with re/im interleaved.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    p: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    p_matrix: Option<Vec<f64>>,
    sample_points: Vec<[f64; 2]>,
    ids: Vec<usize>,
    spec: Option<InnerProductSpec>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    gy: Option<Vec<f64>>,
}

fn pair(c: &C64) -> [f64; 2] {
    [c.re, c.im]
}

fn unpair(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|a| C64::new(a[0], a[1])).collect()
}

fn interleave(m: &CMat) -> Vec<f64> {
    m.data().iter().flat_map(|c| [c.re, c.im]).collect()
}

fn deinterleave(v: &[f64], rows: usize, cols: usize) -> Result<CMat, RationalError> {
    if v.len() != 2 * rows * cols {
        return Err(RationalError::Dimension(format!("expected {} numbers, got {}", 2 * rows * cols, v.len())));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| C64::new(v[2 * (i * cols + j)], v[2 * (i * cols + j) + 1])))
}

impl BarycentricRational {
    fn document(&self) -> SurrogateDocument {
        let (p, p_matrix) = match &self.numerator {
            Numerator::Scalar(p) => (Some(p.iter().map(pair).collect()), None),
            Numerator::Snapshots(m) => (None, Some(interleave(m))),
        };
        SurrogateDocument {
            support: self.support.iter().map(pair).collect(),
            q: self.q.iter().map(pair).collect(),
            p,
            p_matrix,
            sample_points: self.sample_points.iter().map(pair).collect(),
            ids: self.ids.clone(),
            spec: self.spec.clone(),
            gy: None,
        }
    }

    fn from_document(doc: &SurrogateDocument) -> Result<Self, RationalError> {
        let support = unpair(&doc.support);
        let q = unpair(&doc.q);
        let n1 = support.len();
        if q.len() != n1 || n1 == 0 {
            return Err(RationalError::Dimension("support and denominator lengths differ".into()));
        }
        let sample_points = unpair(&doc.sample_points);
        let numerator = match (&doc.p, &doc.p_matrix) {
            (Some(p), None) if p.len() == n1 => Numerator::Scalar(unpair(p)),
            (None, Some(m)) => Numerator::Snapshots(deinterleave(m, sample_points.len(), n1)?),
            _ => return Err(RationalError::Dimension("surrogate needs exactly one numerator".into())),
        };
        Ok(BarycentricRational {
            support,
            q,
            numerator,
            sample_points,
            ids: doc.ids.clone(),
            spec: doc.spec.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.document()).expect("surrogate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, RationalError> {
        let doc: SurrogateDocument =
            serde_json::from_str(s).map_err(|e| RationalError::Dimension(format!("malformed surrogate: {e}")))?;
        Self::from_document(&doc)
    }
}

impl QuadraticSurrogate {
    pub fn to_json(&self) -> String {
        let mut doc = self.rational.document();
        doc.gy = Some(interleave(&self.gy));
        serde_json::to_string_pretty(&doc).expect("surrogate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, RationalError> {
        let doc: SurrogateDocument =
            serde_json::from_str(s).map_err(|e| RationalError::Dimension(format!("malformed surrogate: {e}")))?;
        let rational = BarycentricRational::from_document(&doc)?;
        let n = rational.sample_points.len();
        let gy = deinterleave(doc.gy.as_deref().unwrap_or(&[]), n, n)?;
        Ok(QuadraticSurrogate { rational, gy })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn crand(rng: &mut ChaCha8Rng) -> C64 {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    /// Gramian of v(z_j) = Σ_k φ_k a_k(z_j) for orthonormal φ_k.
    fn manufactured_gramian(points: &[C64], coeffs: impl Fn(C64) -> Vec<C64>) -> Gramian {
        let a: Vec<Vec<C64>> = points.iter().map(|&z| coeffs(z)).collect();
        let s = points.len();
        Gramian {
            matrix: CMat::from_fn(s, s, |i, j| linalg::dot(&a[i], &a[j])),
            spec: InnerProductSpec::L2Domain,
            ids: (0..s).collect(),
        }
    }

    /// Coefficients of r(z) in the φ basis, given the snapshot coefficients.
    fn in_basis(r: &BarycentricRational, z: C64, points: &[C64], coeffs: &impl Fn(C64) -> Vec<C64>) -> Vec<C64> {
        let w = r.evaluate_weights(z).unwrap();
        let mut out = vec![ZERO; coeffs(points[0]).len()];
        for (wj, &zj) in w.iter().zip(points) {
            for (o, a) in out.iter_mut().zip(coeffs(zj)) {
                *o += wj * a;
            }
        }
        out
    }

    fn two_poles(z: C64) -> Vec<C64> {
        vec![ONE / (c(2.0) - z), ONE / (c(10.0) - z)]
    }

    fn close_set(got: &[C64], want: &[f64], tol: f64) -> bool {
        got.len() == want.len() && want.iter().all(|&w| got.iter().any(|g| (g - c(w)).norm() < tol))
    }

    #[test]
    fn sri_of_constant() {
        let samples: Vec<(C64, C64)> = (0..7).map(|k| (c(k as f64), C64::new(3.0, -1.0))).collect();
        let r = build_sri(&samples, 3).unwrap();
        for z in [c(0.5), C64::new(2.0, 1.0), c(17.0)] {
            assert!((r.evaluate_scalar(z).unwrap() - C64::new(3.0, -1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn sri_of_simple_pole() {
        let f = |z: C64| ONE / (c(2.0) - z);
        let samples: Vec<(C64, C64)> = [0.0, 1.0, 3.0].iter().map(|&x| (c(x), f(c(x)))).collect();
        let r = build_sri(&samples, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let z = C64::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            assert!((r.evaluate_scalar(z).unwrap() - f(z)).norm() <= 1e-10 * f(z).norm());
        }
        let p = r.poles();
        assert!(p.len() == 1 && (p[0] - c(2.0)).norm() < 1e-10, "{p:?}");
    }

    #[test]
    fn degree_guard_and_duplicates() {
        let samples: Vec<(C64, C64)> = (0..4).map(|k| (c(k as f64), ONE)).collect();
        assert!(matches!(build_sri(&samples, 2), Err(RationalError::TooFewSamples { needed: 5, .. })));
        let dup = vec![(c(1.0), ONE), (c(1.0), ONE), (c(2.0), ONE)];
        assert!(matches!(build_sri(&dup, 1), Err(RationalError::DuplicatePoints(_))));
        let g = manufactured_gramian(&[c(0.0), c(1.0)], two_poles);
        assert!(matches!(build_vsri(&[c(0.0), c(1.0)], &g, 1), Err(RationalError::TooFewSamples { .. })));
    }

    #[test]
    fn evaluation_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = BarycentricRational {
            support: vec![c(0.0), c(1.0)],
            q: vec![c(h), c(h)],
            numerator: Numerator::Scalar(vec![c(0.0), c(1.0)]),
            sample_points: vec![],
            ids: vec![],
            spec: None,
        };
        assert_eq!(r.evaluate_scalar(c(1.0)).unwrap(), c(1.0 / h));
        let p = r.poles();
        assert!(p.len() == 1 && (p[0] - c(0.5)).norm() < 1e-14);
        assert!(matches!(r.evaluate_scalar(c(0.5)), Err(RationalError::PoleEvaluation(_))));
        let flat = BarycentricRational {
            q: vec![c(h), c(-h)],
            numerator: Numerator::Scalar(vec![c(2.0 * h), c(-2.0 * h)]),
            ..r.clone()
        };
        assert!(flat.poles().is_empty());
        assert!((flat.evaluate_scalar(C64::new(3.0, 4.0)).unwrap() - c(2.0)).norm() < 1e-14);
    }

    #[test]
    fn vsri_scalar_embedding_matches_sri() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points: Vec<C64> = (0..9).map(|k| c(1.0 + k as f64 * 1.3)).collect();
        let y: Vec<C64> = points.iter().map(|&z| ONE / (c(4.1) - z) + crand(&mut rng) * 0.01).collect();
        let sri = build_sri(&points.iter().copied().zip(y.iter().copied()).collect::<Vec<_>>(), 3).unwrap();
        let g = manufactured_gramian(&points, |z| vec![y[points.iter().position(|&p| p == z).unwrap()]]);
        let vsri = build_vsri(&points, &g, 3).unwrap();
        assert!(linalg::dot(&sri.q, &vsri.q).norm() > 1.0 - 1e-10);
    }

    #[test]
    fn vsri_exact_recovery() {
        let points: Vec<C64> = [0.0, 3.0, 5.0, 7.0, 12.0].iter().map(|&x| c(x)).collect();
        let g = manufactured_gramian(&points, two_poles);
        let r = build_vsri(&points, &g, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let z = C64::new(rng.random_range(-2.0..15.0), rng.random_range(-3.0..3.0));
            let got = in_basis(&r, z, &points, &two_poles);
            let want = two_poles(z);
            assert!(linalg::norm2(&got.iter().zip(&want).map(|(a, b)| a - b).collect::<Vec<_>>()) <= 1e-9 * linalg::norm2(&want));
        }
        assert!(close_set(&r.poles(), &[2.0, 10.0], 1e-8), "{:?}", r.poles());
    }

    #[test]
    fn vsri_identical_snapshots_is_constant() {
        let points: Vec<C64> = (0..5).map(|k| c(k as f64)).collect();
        let g = manufactured_gramian(&points, |_| vec![c(1.0), c(-2.0)]);
        let r = build_vsri(&points, &g, 2).unwrap();
        for z in [c(0.5), C64::new(1.5, 2.0)] {
            let got = in_basis(&r, z, &points, &|_| vec![c(1.0), c(-2.0)]);
            assert!((got[0] - c(1.0)).norm() < 1e-10 && (got[1] + c(2.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn general_matches_collocation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let points: Vec<C64> = (0..11).map(|k| c(1.0 + 2.0 * k as f64)).collect();
        let coeffs = |z: C64| vec![ONE / (c(4.0) - z), ONE / (c(9.5) - z) + 0.3, z * 0.01];
        let mut g = manufactured_gramian(&points, coeffs);
        // small noise keeps the fit non-trivial
        for i in 0..11 {
            g.matrix[(i, i)] += c(1e-6 * rng.random_range(0.0..1.0));
        }
        for n in [2, 3, 5] {
            let a = build_vsri(&points, &g, n).unwrap();
            let b = build_vsri_general(&points, &points[..=n], &g).unwrap();
            assert!(linalg::dot(&a.q, &b.q).norm() >= 1.0 - 1e-8, "n = {n}");
        }
    }

    #[test]
    fn general_without_interpolation() {
        let points: Vec<C64> = [0.0, 1.0, 3.0, 5.0, 7.0, 12.0, 15.0].iter().map(|&x| c(x)).collect();
        let g = manufactured_gramian(&points, two_poles);
        let support = [c(-1.0), c(0.5), c(20.0)];
        let r = build_vsri_general(&points, &support, &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let z = C64::new(rng.random_range(-2.0..15.0), rng.random_range(0.5..3.0));
            let got = in_basis(&r, z, &points, &two_poles);
            let want = two_poles(z);
            let err = linalg::norm2(&got.iter().zip(&want).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(err <= 1e-8 * linalg::norm2(&want), "{err}");
        }
        let res = numerator_span_residuals(&r, &g.matrix).unwrap();
        assert!(res.iter().all(|&x| x <= 1e-10), "{res:?}");
    }

    #[test]
    fn general_with_partial_overlap_interpolates() {
        let points: Vec<C64> = [0.0, 1.0, 3.0, 5.0, 7.0, 12.0, 15.0].iter().map(|&x| c(x)).collect();
        let coeffs = |z: C64| vec![ONE / (c(2.5) - z), (z * 0.1).exp()];
        let g = manufactured_gramian(&points, coeffs);
        let support = [c(7.0), c(-0.5), c(1.0)];
        let r = build_vsri_general(&points, &support, &g).unwrap();
        // at matched supports the surrogate returns the sample itself
        for (i, &zeta) in support.iter().enumerate() {
            if let Some(j) = points.iter().position(|&p| p == zeta) {
                let w = r.evaluate_weights(zeta).unwrap();
                assert!(r.q[i].norm() > 1e-10);
                for (k, wk) in w.iter().enumerate() {
                    let want = if k == j { ONE } else { ZERO };
                    assert!((wk - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mri_examples() {
        let g1 = manufactured_gramian(&[c(3.0)], |_| vec![c(2.0)]);
        let r = build_mri(&[c(3.0)], &g1).unwrap();
        assert_eq!(r.q, vec![ONE]);
        assert_eq!(r.evaluate_weights(c(7.0)).unwrap(), vec![ONE]);
        let pts = [c(1.0), c(2.0)];
        let g2 = manufactured_gramian(&pts, |_| vec![c(1.0), c(1.0)]);
        let r = build_mri(&pts, &g2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r.q[0] - c(h)).norm() < 1e-14 && (r.q[1] + c(h)).norm() < 1e-14);
        for (k, &z) in pts.iter().enumerate() {
            let w = r.evaluate_weights(z).unwrap();
            assert!((w[k] - ONE).norm() < 1e-14);
        }
    }

    #[test]
    fn mri_exact_recovery_and_minimality() {
        let pts = [c(0.0), c(5.0), c(12.0)];
        let g = manufactured_gramian(&pts, two_poles);
        let r = build_mri(&pts, &g).unwrap();
        assert!(close_set(&r.poles(), &[2.0, 10.0], 1e-8), "{:?}", r.poles());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let z = C64::new(rng.random_range(-2.0..15.0), rng.random_range(-3.0..3.0));
            let got = in_basis(&r, z, &pts, &two_poles);
            let want = two_poles(z);
            let err = linalg::norm2(&got.iter().zip(&want).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(err <= 1e-8 * linalg::norm2(&want));
        }
        // q^H G q against an independent Hermitian eigensolver
        let m = faer::Mat::<C64>::from_fn(3, 3, |i, j| g.matrix[(i, j)]);
        let lmin = m
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .unwrap()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let qgq = linalg::dot(&r.q, &g.matrix.mul_vec(&r.q)).re;
        let scale = g.matrix.norm_fro();
        assert!((qgq - lmin).abs() <= 1e-10 * scale, "{qgq} {lmin}");
    }

    #[test]
    fn quadratic_surrogate_of_constant() {
        let pts: Vec<C64> = (0..5).map(|k| c(k as f64)).collect();
        let g = manufactured_gramian(&pts, |_| vec![c(2.0)]);
        let r = build_vsri(&pts, &g, 2).unwrap();
        // on a curve of length 3 with v ≡ 2: G^{[y]} = 12 everywhere
        let gy = Gramian {
            matrix: CMat::from_fn(5, 5, |_, _| c(12.0)),
            spec: InnerProductSpec::L2Domain,
            ids: (0..5).collect(),
        };
        let qs = build_quadratic_surrogate(&r, &gy).unwrap();
        for z in [c(0.3), C64::new(4.0, 1.0)] {
            assert!((qs.evaluate(z).unwrap() - 12.0).abs() < 1e-10);
        }
        let bad = Gramian {
            matrix: CMat::zeros(4, 4),
            ids: (0..4).collect(),
            ..gy
        };
        assert!(build_quadratic_surrogate(&r, &bad).is_err());
    }

    #[test]
    fn json_round_trip() {
        let pts = [c(0.0), c(5.0), c(12.0)];
        let g = manufactured_gramian(&pts, two_poles);
        let r = build_mri(&pts, &g).unwrap();
        assert_eq!(BarycentricRational::from_json(&r.to_json()).unwrap(), r);
        let qs = build_quadratic_surrogate(&r, &g).unwrap();
        assert_eq!(QuadraticSurrogate::from_json(&qs.to_json()).unwrap(), qs);
        let samples: Vec<(C64, C64)> = (0..5).map(|k| (c(k as f64), c(1.0 / (k as f64 + 0.5)))).collect();
        let s = build_sri(&samples, 2).unwrap();
        assert_eq!(BarycentricRational::from_json(&s.to_json()).unwrap(), s);
        assert!(BarycentricRational::from_json("{}").is_err());
    }

    #[test]
    fn orthonormalize_examples() {
        let id = Gramian {
            matrix: CMat::identity(3),
            spec: InnerProductSpec::L2Domain,
            ids: vec![0, 1, 2],
        };
        let o = orthonormalize(&id).unwrap();
        assert_eq!(o.rank(), 3);
        assert_eq!(o.r, CMat::identity(3));
    }

    /// Σ_{j ∉ supports} ‖Σ_i (q_i v_j − p_i)/(z_j − ζ_i)‖² for collocation
    /// numerators, through the Cholesky factor.
    fn ls_objective(points: &[C64], r: &CMat, order: &[usize], q: &[C64]) -> f64 {
        let n = q.len() - 1;
        let l = loewner(points, r, order, n);
        linalg::norm2(&l.mul_vec(q)).powi(2)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sri_recovers_rationals(seed in any::<u64>(), n in 1usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let poles: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..11.0), rng.random_range(0.2..2.0))).collect();
            let res: Vec<C64> = (0..n).map(|_| crand(&mut rng)).collect();
            let shift = crand(&mut rng);
            let f = |z: C64| shift + poles.iter().zip(&res).map(|(p, a)| a / (z - p)).sum::<C64>();
            let s = 2 * n + 1;
            let samples: Vec<(C64, C64)> = (0..s).map(|k| {
                let z = c(10.0 * k as f64 / (s - 1) as f64);
                (z, f(z))
            }).collect();
            let r = build_sri(&samples, n).unwrap();
            prop_assert!((linalg::norm2(&r.q) - 1.0).abs() < 1e-13);
            let mut worst: f64 = 0.0;
            for _ in 0..20 {
                let z = C64::new(rng.random_range(0.0..10.0), rng.random_range(-3.0..-0.5));
                worst = worst.max((r.evaluate_scalar(z).unwrap() - f(z)).norm() / f(z).norm());
            }
            prop_assert!(worst <= 1e-9, "{worst}");
            // interpolation at supports
            for (i, &zeta) in r.support.iter().enumerate() {
                if r.q[i].norm() > 1e-10 {
                    let y = samples.iter().find(|s| s.0 == zeta).unwrap().1;
                    prop_assert!((r.evaluate_scalar(zeta).unwrap() - y).norm() <= 4.0 * f64::EPSILON * y.norm());
                }
            }
        }

        #[test]
        fn mri_recovers_orthonormal_residues(seed in any::<u64>(), s in 2usize..=8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // type [S−1]: S − 1 simple poles
            let lambdas: Vec<f64> = {
                let mut l: Vec<f64> = (0..s - 1).map(|k| 3.0 * k as f64 + rng.random_range(0.0..2.0)).collect();
                l.sort_by(f64::total_cmp);
                l
            };
            let coeffs = |z: C64| lambdas.iter().map(|&l| ONE / (c(l) - z)).collect::<Vec<_>>();
            let pts: Vec<C64> = (0..s).map(|k| C64::new(3.0 * k as f64 + 1.0, rng.random_range(0.3..1.0))).collect();
            let g = manufactured_gramian(&pts, coeffs);
            let r = build_mri(&pts, &g).unwrap();
            for _ in 0..10 {
                let z = C64::new(rng.random_range(0.0..3.0 * s as f64), rng.random_range(-2.0..-0.5));
                let got = in_basis(&r, z, &pts, &coeffs);
                let want = coeffs(z);
                let err = linalg::norm2(&got.iter().zip(&want).map(|(a, b)| a - b).collect::<Vec<_>>());
                prop_assert!(err <= 1e-8 * linalg::norm2(&want), "{}", err / linalg::norm2(&want));
            }
        }

        #[test]
        fn vsri_is_locally_optimal(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<C64> = (0..9).map(|k| c(1.0 + 1.5 * k as f64)).collect();
            let coeffs = |z: C64| vec![ONE / (c(4.2) - z), (z * 0.2).sin(), z.sqrt()];
            let g = manufactured_gramian(&pts, coeffs);
            let r = build_vsri(&pts, &g, 3).unwrap();
            let chol = orthonormalize(&g).unwrap();
            let order = ascending(&pts);
            let j0 = ls_objective(&pts, &chol.r, &order, &r.q);
            for _ in 0..50 {
                let d: Vec<C64> = (0..4).map(|_| crand(&mut rng)).collect();
                let dn = linalg::norm2(&d);
                let mut q: Vec<C64> = r.q.iter().zip(&d).map(|(a, b)| a + b * (1e-3 / dn)).collect();
                let qn = linalg::norm2(&q);
                q.iter_mut().for_each(|x| *x /= qn);
                prop_assert!(ls_objective(&pts, &chol.r, &order, &q) >= j0 * (1.0 - 1e-12));
            }
        }

        #[test]
        fn collocation_span_residual_vanishes(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<C64> = (0..7).map(|k| c(k as f64 + rng.random_range(0.0..0.5))).collect();
            let g = manufactured_gramian(&pts, |z| vec![ONE / (c(2.7) - z), z, ONE]);
            let r = build_vsri(&pts, &g, 3).unwrap();
            let res = numerator_span_residuals(&r, &g.matrix).unwrap();
            prop_assert!(res.iter().all(|&x| x <= 1e-10));
        }
    }
}

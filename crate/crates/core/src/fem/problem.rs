//! Parametric Helmholtz problems and the benchmark presets.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::MeshError;
use crate::mesh::{
    create_initial_mesh, BoundaryKind, Geometry, Mesh, Point, CAVITY_OMEGA_SEGMENT, PLATE_BOTTOM_SEGMENT,
    TRIANGLE_GAMMA2,
};

use super::functional::Curve;

/// Volume source f(z, x).
pub type VolumeData = Arc<dyn Fn(C64, Point) -> C64 + Send + Sync>;
/// Boundary datum g(z, x, outward normal, segment).
pub type BoundaryData = Arc<dyn Fn(C64, Point, [f64; 2], u32) -> C64 + Send + Sync>;

/// How the frequency parameter z relates to the wavenumber k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyConvention {
    /// z = k^2 (interior problems).
    SquaredWavenumber,
    /// z = k (scattering).
    Wavenumber,
}

impl FrequencyConvention {
    pub fn wavenumber(self, z: C64) -> C64 {
        match self {
            FrequencyConvention::SquaredWavenumber => z.sqrt(),
            FrequencyConvention::Wavenumber => z,
        }
    }

    pub fn wavenumber_squared(self, z: C64) -> C64 {
        match self {
            FrequencyConvention::SquaredWavenumber => z,
            FrequencyConvention::Wavenumber => z * z,
        }
    }
}

/// The quantity of interest attached to a preset.
#[derive(Clone, Debug, PartialEq)]
pub enum QoiKind {
    /// y = ∫_ω u.
    Linear(Curve),
    /// y = ∫_ω |u|^2.
    Quadratic(Curve),
}

impl QoiKind {
    pub fn curve(&self) -> &Curve {
        match self {
            QoiKind::Linear(c) | QoiKind::Quadratic(c) => c,
        }
    }
}

/// −Δu − k²u = f in Ω with Dirichlet, Neumann and Robin data on the labeled
/// boundary segments.
#[derive(Clone)]
pub struct WaveProblem {
    pub name: String,
    pub geometry: Geometry,
    pub initial_mesh: Arc<Mesh>,
    pub segment_kinds: Vec<BoundaryKind>,
    pub f: Option<VolumeData>,
    pub g_neumann: Option<BoundaryData>,
    pub g_robin: Option<BoundaryData>,
    pub convention: FrequencyConvention,
    pub qoi: Option<QoiKind>,
}

impl fmt::Debug for WaveProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaveProblem")
            .field("name", &self.name)
            .field("segment_kinds", &self.segment_kinds)
            .field("convention", &self.convention)
            .field("qoi", &self.qoi)
            .finish_non_exhaustive()
    }
}

impl WaveProblem {
    pub fn new(name: &str, geometry: Geometry, convention: FrequencyConvention) -> Result<Self, MeshError> {
        let mesh = create_initial_mesh(&geometry)?;
        Ok(WaveProblem {
            name: name.to_string(),
            segment_kinds: mesh.segment_kinds().to_vec(),
            initial_mesh: Arc::new(mesh),
            geometry,
            f: None,
            g_neumann: None,
            g_robin: None,
            convention,
            qoi: None,
        })
    }

    pub fn with_source(mut self, f: impl Fn(C64, Point) -> C64 + Send + Sync + 'static) -> Self {
        self.f = Some(Arc::new(f));
        self
    }

    pub fn with_neumann(mut self, g: impl Fn(C64, Point, [f64; 2], u32) -> C64 + Send + Sync + 'static) -> Self {
        self.g_neumann = Some(Arc::new(g));
        self
    }

    pub fn with_robin(mut self, g: impl Fn(C64, Point, [f64; 2], u32) -> C64 + Send + Sync + 'static) -> Self {
        self.g_robin = Some(Arc::new(g));
        self
    }

    pub fn with_qoi(mut self, qoi: QoiKind) -> Self {
        self.qoi = Some(qoi);
        self
    }

    /// Same problem with all data multiplied by `alpha`.
    pub fn scaled(&self, alpha: C64) -> Self {
        let mut p = self.clone();
        p.f = self.f.clone().map(|f| Arc::new(move |z, x| alpha * f(z, x)) as VolumeData);
        p.g_neumann = self
            .g_neumann
            .clone()
            .map(|g| Arc::new(move |z, x, n, s| alpha * g(z, x, n, s)) as BoundaryData);
        p.g_robin = self
            .g_robin
            .clone()
            .map(|g| Arc::new(move |z, x, n, s| alpha * g(z, x, n, s)) as BoundaryData);
        p
    }

    pub fn wavenumber(&self, z: C64) -> C64 {
        self.convention.wavenumber(z)
    }

    pub fn wavenumber_squared(&self, z: C64) -> C64 {
        self.convention.wavenumber_squared(z)
    }

    pub fn source(&self, z: C64, x: Point) -> C64 {
        self.f.as_ref().map_or(C64::new(0.0, 0.0), |f| f(z, x))
    }

    pub fn neumann(&self, z: C64, x: Point, n: [f64; 2], seg: u32) -> C64 {
        self.g_neumann.as_ref().map_or(C64::new(0.0, 0.0), |g| g(z, x, n, seg))
    }

    pub fn robin(&self, z: C64, x: Point, n: [f64; 2], seg: u32) -> C64 {
        self.g_robin.as_ref().map_or(C64::new(0.0, 0.0), |g| g(z, x, n, seg))
    }

    pub fn domain_area(&self) -> f64 {
        self.initial_mesh.total_area()
    }
}

/// Triangle benchmark: f = 1, u = 0 on the bottom side, homogeneous Neumann
/// elsewhere, z = k²; QoI y = ∫ u over the right side.
pub fn triangle_problem() -> WaveProblem {
    WaveProblem::new("triangle", Geometry::Triangle, FrequencyConvention::SquaredWavenumber)
        .expect("triangle preset")
        .with_source(|_, _| C64::new(1.0, 0.0))
        .with_qoi(QoiKind::Linear(Curve::Segments(vec![TRIANGLE_GAMMA2])))
}

/// Load on the bottom side of the plate.
pub fn plate_load(z: C64, x: Point) -> C64 {
    let i = C64::new(0.0, 1.0);
    let sz = z.sqrt();
    -0.15 * i * sz * (i * (1.5 * 3f64.sqrt()) * sz * x[0]).exp()
}

/// Plate benchmark: f = 0, clamped top side, loaded bottom side, z = k²;
/// QoI y = ∫ |u|² over the bottom side.
pub fn plate_problem() -> WaveProblem {
    WaveProblem::new("plate", Geometry::Plate, FrequencyConvention::SquaredWavenumber)
        .expect("plate preset")
        .with_neumann(|z, x, _, seg| {
            if seg == PLATE_BOTTOM_SEGMENT {
                plate_load(z, x)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .with_qoi(QoiKind::Quadratic(Curve::Segments(vec![PLATE_BOTTOM_SEGMENT])))
}

/// Cavity benchmark: sound-hard scatterer hit by e^{ιzx₁}, first-order
/// absorbing condition on the outer square, z = k; QoI y = ∫ |u|² over the
/// trapping part of the scatterer boundary.
pub fn cavity_problem() -> WaveProblem {
    WaveProblem::new("cavity", Geometry::Cavity, FrequencyConvention::Wavenumber)
        .expect("cavity preset")
        .with_neumann(|z, x, n, seg| {
            if seg == 0 {
                return C64::new(0.0, 0.0);
            }
            let i = C64::new(0.0, 1.0);
            -i * z * n[0] * (i * z * x[0]).exp()
        })
        .with_robin(|_, _, _, _| C64::new(0.0, 0.0))
        .with_qoi(QoiKind::Quadratic(Curve::Segments(vec![CAVITY_OMEGA_SEGMENT])))
}

/// Preset by name: "triangle", "plate" or "cavity".
pub fn preset(name: &str) -> Option<WaveProblem> {
    match name {
        "triangle" => Some(triangle_problem()),
        "plate" => Some(plate_problem()),
        "cavity" => Some(cavity_problem()),
        _ => None,
    }
}

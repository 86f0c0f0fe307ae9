//! The adaptive loop solve, estimate, mark, refine, and frequency sweeps.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FemError, SweepError};
use crate::estimator::{doerfler_mark, local_indicators};
use crate::fem::{assemble_system, solve, IterationRecord, Snapshot, SnapshotStatus, WaveProblem};
use crate::mesh::{MarkSet, Mesh};

/// How the DoF budget N_max is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NMaxPolicy {
    Explicit(f64),
    /// |Ω| k⁴ / (4 tol_h²).
    Formula,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub theta: f64,
    pub tol_h: f64,
    pub n_max: NMaxPolicy,
    pub retry_factor: u32,
    pub retry_enabled: bool,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            theta: 0.1,
            tol_h: 5e-2,
            n_max: NMaxPolicy::Formula,
            retry_factor: 10,
            retry_enabled: true,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<(), SweepError> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(SweepError::Config(format!("theta = {} is not in (0, 1]", self.theta)));
        }
        if !(self.tol_h > 0.0) {
            return Err(SweepError::Config(format!("tol_h = {} is not positive", self.tol_h)));
        }
        if let NMaxPolicy::Explicit(n) = self.n_max {
            if !(n > 1.0) {
                return Err(SweepError::Config(format!("N_max = {n} must exceed 1")));
            }
        }
        if self.retry_factor == 0 {
            return Err(SweepError::Config("retry factor must be positive".into()));
        }
        Ok(())
    }

    /// N_max for `problem` at `z`. With the formula, k⁴ = |k²|², so it reads
    /// |z|² for z = k² and |z|⁴ for z = k.
    pub fn n_max(&self, problem: &WaveProblem, z: C64) -> f64 {
        match self.n_max {
            NMaxPolicy::Explicit(n) => n,
            NMaxPolicy::Formula => {
                let k4 = problem.wavenumber_squared(z).norm_sqr();
                (problem.domain_area() * k4 / (4.0 * self.tol_h * self.tol_h)).max(1.0 + f64::EPSILON)
            }
        }
    }
}

/// Runs the adaptive loop at `z` from the problem's initial mesh.
pub fn adaptive_solve(problem: &WaveProblem, z: C64, config: &AdaptiveConfig) -> Result<Snapshot, FemError> {
    adaptive_solve_with_budget(problem, z, config, config.n_max(problem, z))
}

/// Runs the adaptive loop with an explicit DoF budget.
///
/// When the discrete problem is singular the iterate is set to zero with
/// η = 1 and every element is marked. If that happens with the space
/// already above budget, the loop stops as budget-exhausted as well.
pub fn adaptive_solve_with_budget(
    problem: &WaveProblem,
    z: C64,
    config: &AdaptiveConfig,
    n_max: f64,
) -> Result<Snapshot, FemError> {
    let mut mesh: Arc<Mesh> = problem.initial_mesh.clone();
    let mut history = Vec::new();
    let start = Instant::now();
    for level in 0.. {
        let dofs = mesh.num_free_vertices();
        let system = assemble_system(&mesh, problem, z)?;
        let (snapshot, marks, singular) = match solve(&system) {
            Ok(x) => {
                let mut snap = Snapshot::new(mesh.clone(), x, z, 0.0, SnapshotStatus::Converged)?;
                let ind = local_indicators(&snap, problem, z)?;
                snap.estimator = ind.eta();
                let marks = doerfler_mark(&ind, config.theta);
                (snap, marks, false)
            }
            Err(FemError::SingularOrIllPosed { rcond }) => {
                warn!("z = {z}: level {level} with {dofs} DoFs is singular (rcond {rcond:.3e})");
                let snap = Snapshot::new(mesh.clone(), vec![C64::new(0.0, 0.0); dofs], z, 1.0, SnapshotStatus::Converged)?;
                (snap, MarkSet::all(&mesh), true)
            }
            Err(e) => return Err(e),
        };
        let eta = snapshot.estimator;
        let wallclock_ms = start.elapsed().as_secs_f64() * 1e3;
        info!("{level}, {dofs}, {eta:.6e}, {wallclock_ms:.1}");
        history.push(IterationRecord {
            level,
            dofs,
            eta,
            wallclock_ms,
            singular,
        });
        let status = if !singular && eta <= config.tol_h {
            Some(SnapshotStatus::Converged)
        } else if dofs as f64 > n_max {
            Some(SnapshotStatus::BudgetExhausted)
        } else {
            None
        };
        if let Some(status) = status {
            let mut snapshot = snapshot;
            snapshot.status = status;
            snapshot.history = history;
            return Ok(snapshot);
        }
        if marks.is_empty() {
            // η > 0 guarantees a nonempty Dörfler set; this is a zero
            // indicator field above a negative tolerance, which validation
            // excludes.
            return Err(FemError::Solver("empty marking with positive estimator".into()));
        }
        mesh = Arc::new(mesh.refine(&marks)?);
    }
    unreachable!()
}

/// Adaptive solve with one retry at `retry_factor` times the budget. A
/// snapshot that exhausts both budgets is marked discarded.
pub fn snapshot_with_retry(problem: &WaveProblem, z: C64, config: &AdaptiveConfig) -> Result<Snapshot, FemError> {
    let n_max = config.n_max(problem, z);
    let first = adaptive_solve_with_budget(problem, z, config, n_max)?;
    if first.status != SnapshotStatus::BudgetExhausted || !config.retry_enabled {
        return Ok(first);
    }
    let bigger = n_max * config.retry_factor as f64;
    info!("z = {z}: budget {n_max:.0} exhausted, retrying with {bigger:.0}");
    let mut second = adaptive_solve_with_budget(problem, z, config, bigger)?;
    if second.status == SnapshotStatus::BudgetExhausted {
        warn!("z = {z}: budget exhausted twice, discarding");
        second.status = SnapshotStatus::Discarded;
    }
    let mut history = first.history;
    history.extend(second.history);
    second.history = history;
    Ok(second)
}

/// One snapshot per point, in order. Discarded snapshots stay in the list
/// and are skipped by [`usable`].
pub fn sample_sweep(problem: &WaveProblem, points: &[C64], config: &AdaptiveConfig) -> Result<Vec<Snapshot>, SweepError> {
    config.validate()?;
    if points.is_empty() {
        return Err(SweepError::NoPoints);
    }
    let snaps = points
        .par_iter()
        .map(|&z| snapshot_with_retry(problem, z, config))
        .collect::<Result<Vec<_>, _>>()?;
    let n = snaps.iter().filter(|s| s.is_usable()).count();
    if n < 2 && points.len() > 1 {
        return Err(SweepError::TooFewSnapshots { usable: n });
    }
    if n == 0 {
        return Err(SweepError::TooFewSnapshots { usable: 0 });
    }
    Ok(snaps)
}

/// The snapshots that may enter model order reduction.
pub fn usable(snaps: &[Snapshot]) -> Vec<Snapshot> {
    snaps.iter().filter(|s| s.is_usable()).cloned().collect()
}

/// `count` uniformly spaced real points in [a, b].
pub fn uniform_points(a: f64, b: f64, count: usize) -> Vec<C64> {
    match count {
        0 => vec![],
        1 => vec![C64::new(a, 0.0)],
        _ => (0..count)
            .map(|k| C64::new(a + (b - a) * k as f64 / (count - 1) as f64, 0.0))
            .collect(),
    }
}

/// "dofs,estimator[,error]" rows of an adaptive history.
pub fn convergence_csv(history: &[IterationRecord], errors: Option<&[f64]>) -> String {
    let mut out = String::from(if errors.is_some() { "dofs,estimator,error\n" } else { "dofs,estimator\n" });
    for (i, r) in history.iter().enumerate() {
        let _ = write!(out, "{},{:.16e}", r.dofs, r.eta);
        if let Some(e) = errors {
            let _ = write!(out, ",{:.16e}", e[i]);
        }
        out.push('\n');
    }
    out
}

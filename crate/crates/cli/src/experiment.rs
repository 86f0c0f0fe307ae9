//! The experiment driver: sweep, surrogates, validation grid, report files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use helmsweep::adaptive::{sample_sweep, uniform_points};
use helmsweep::analytic::triangle_qoi_resummed;
use helmsweep::fem::{
    apply_linear_functional, apply_quadratic_functional, LinearFunctional, QoiKind, Snapshot, SnapshotStatus,
    WaveProblem,
};
use helmsweep::overlay::{assemble_gramian, assemble_qoi_gramian, Gramian, InnerProductSpec};
use helmsweep::rational::{
    build_mri, build_quadratic_surrogate, build_sri, build_vsri, extract_functional_surrogate,
    numerator_span_residuals, BarycentricRational, QuadraticSurrogate,
};
use helmsweep::C64;
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, Method};
use crate::error::CliError;
use crate::output::{fmt_num, CsvTable, OutputSet};

/// Terms of the resummed series used for the triangle reference.
pub const ANALYTIC_TERMS: usize = 20001;

/// A surrogate of the scalar quantity of interest.
#[derive(Clone, Debug)]
pub enum Surrogate {
    Linear(BarycentricRational),
    Quadratic(QuadraticSurrogate),
}

impl Surrogate {
    pub fn evaluate(&self, z: C64) -> Result<C64, CliError> {
        Ok(match self {
            Surrogate::Linear(r) => r.evaluate_scalar(z)?,
            Surrogate::Quadratic(q) => C64::new(q.evaluate(z)?, 0.0),
        })
    }

    pub fn rational(&self) -> &BarycentricRational {
        match self {
            Surrogate::Linear(r) => r,
            Surrogate::Quadratic(q) => &q.rational,
        }
    }

    pub fn poles(&self) -> Vec<C64> {
        self.rational().poles()
    }

    pub fn to_json(&self) -> String {
        match self {
            Surrogate::Linear(r) => r.to_json(),
            Surrogate::Quadratic(q) => q.to_json(),
        }
    }

    /// Reads either kind; a stored output Gramian marks a quadratic one.
    pub fn from_json(s: &str) -> Result<Self, CliError> {
        let v: serde_json::Value =
            serde_json::from_str(s).map_err(|e| CliError::Config(format!("malformed surrogate: {e}")))?;
        if v.get("gy").is_some() {
            Ok(Surrogate::Quadratic(QuadraticSurrogate::from_json(s)?))
        } else {
            Ok(Surrogate::Linear(BarycentricRational::from_json(s)?))
        }
    }
}

/// Quantity of interest of one snapshot.
pub fn snapshot_qoi(problem: &WaveProblem, s: &Snapshot) -> Result<C64, CliError> {
    Ok(match problem.qoi.as_ref() {
        Some(QoiKind::Linear(c)) => apply_linear_functional(s, &LinearFunctional::new(c.clone()))?,
        Some(QoiKind::Quadratic(c)) => C64::new(apply_quadratic_functional(s, c)?, 0.0),
        None => return Err(CliError::Config(format!("preset {} defines no quantity of interest", problem.name))),
    })
}

/// Wall-clock seconds spent on a snapshot, over all adaptive runs.
pub fn snapshot_seconds(s: &Snapshot) -> f64 {
    let h = &s.history;
    let mut total = 0.0;
    for (i, r) in h.iter().enumerate() {
        if h.get(i + 1).is_none_or(|next| next.level == 0) {
            total += r.wallclock_ms;
        }
    }
    total / 1e3
}

#[derive(Clone, Debug)]
pub struct SurrogateRow {
    pub z: f64,
    pub value: C64,
    pub reference: Option<C64>,
}

impl SurrogateRow {
    pub fn relative_error(&self) -> Option<f64> {
        self.reference.map(|r| (self.value - r).norm() / r.norm())
    }
}

#[derive(Clone, Debug)]
pub struct MethodOutcome {
    pub method: Method,
    pub surrogate: Surrogate,
    /// Sweep indices of the snapshots that entered the surrogate.
    pub used: Vec<usize>,
    pub degree: usize,
    pub poles: Vec<C64>,
    pub rows: Vec<SurrogateRow>,
    /// Largest numerator span residual (function-valued surrogates).
    pub span_residual: Option<f64>,
    /// (phase, seconds)
    pub timings: Vec<(&'static str, f64)>,
}

#[derive(Clone, Debug)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub snapshots: Vec<Snapshot>,
    pub methods: Vec<MethodOutcome>,
    pub validation: Vec<Snapshot>,
}

/// Validation grid: uniform with optional seeded jitter, minus points
/// within 1e-3 of the range of a training sample.
pub fn validation_grid(config: &ExperimentConfig, training: &[f64]) -> Vec<f64> {
    let (a, b) = (config.z_min, config.z_max);
    let n = config.validation_points;
    let h = if n > 1 { (b - a) / (n - 1) as f64 } else { 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let gap = 1e-3 * (b - a);
    uniform_points(a, b, n)
        .into_iter()
        .map(|z| {
            let shift: f64 = rng.random_range(-0.5..0.5);
            (z.re + config.jitter * h * shift).clamp(a, b)
        })
        .filter(|z| training.iter().all(|t| (z - t).abs() > gap))
        .collect()
}

/// Sample points of the high-fidelity validation solves: cell midpoints
/// of a uniform partition, jittered like the grid.
pub fn validation_sample_points(config: &ExperimentConfig) -> Vec<f64> {
    let m = config.validation_snapshots;
    let (a, b) = (config.z_min, config.z_max);
    let h = (b - a) / m.max(1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..m)
        .map(|i| {
            let shift: f64 = rng.random_range(-0.5..0.5);
            a + (i as f64 + 0.5 + config.jitter * shift) * h
        })
        .collect()
}

fn snapshots_at(snaps: &[Snapshot], idx: &[usize]) -> Vec<Snapshot> {
    idx.iter().map(|&i| snaps[i].clone()).collect()
}

fn gramian_for(
    snaps: &[Snapshot],
    spec: &InnerProductSpec,
    cache: &mut Vec<(Vec<usize>, InnerProductSpec, Gramian)>,
    idx: &[usize],
) -> Result<(Gramian, f64), CliError> {
    if let Some((_, _, g)) = cache.iter().find(|(i, s, _)| i == idx && s == spec) {
        return Ok((g.clone(), 0.0));
    }
    let t = Instant::now();
    let g = assemble_gramian(&snapshots_at(snaps, idx), spec)?;
    let dt = t.elapsed().as_secs_f64();
    cache.push((idx.to_vec(), spec.clone(), g.clone()));
    Ok((g, dt))
}

fn reduced_degree(method: Method, wanted: usize, usable: usize) -> Result<usize, CliError> {
    let n = match method {
        Method::Mri => wanted.min(usable.saturating_sub(1)),
        _ => wanted.min(usable.saturating_sub(1) / 2),
    };
    if n == 0 {
        return Err(CliError::Insufficient(format!(
            "{} has {usable} usable snapshots, too few for any rational type",
            method.name()
        )));
    }
    if n < wanted {
        warn!("{}: {usable} usable snapshots, type lowered from [{wanted}] to [{n}]", method.name());
    }
    Ok(n)
}

/// Surrogate for `method` from the usable snapshots among `idx`.
fn build_method(
    method: Method,
    config: &ExperimentConfig,
    problem: &WaveProblem,
    snaps: &[Snapshot],
    idx: &[usize],
    cache: &mut Vec<(Vec<usize>, InnerProductSpec, Gramian)>,
) -> Result<MethodOutcome, CliError> {
    let used: Vec<usize> = idx.iter().copied().filter(|&i| snaps[i].is_usable()).collect();
    let snapshot_time: f64 = idx.iter().map(|&i| snapshot_seconds(&snaps[i])).sum();
    let points: Vec<C64> = used.iter().map(|&i| snaps[i].z).collect();
    let wanted = match method {
        Method::Mri => idx.len() - 1,
        _ => config.degree(),
    };
    let degree = reduced_degree(method, wanted, used.len())?;
    let qoi = problem.qoi.clone().expect("validated");
    let mut gramian_time = 0.0;
    let t = Instant::now();
    let mut span_residual = None;
    let surrogate = match method {
        Method::Sri => {
            let samples = used
                .iter()
                .map(|&i| Ok((snaps[i].z, snapshot_qoi(problem, &snaps[i])?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            let mut r = build_sri(&samples, degree)?;
            r.sample_points = points.clone();
            Surrogate::Linear(r)
        }
        Method::Vsri | Method::Mri => {
            let spec = if method == Method::Vsri {
                config.vsri_spec(problem)
            } else {
                config.mri_spec(problem)
            };
            let (g, dt) = gramian_for(snaps, &spec, cache, &used)?;
            gramian_time += dt;
            let r = if method == Method::Vsri {
                build_vsri(&points, &g, degree)?
            } else {
                build_mri(&points, &g)?
            };
            if method == Method::Vsri {
                span_residual = Some(numerator_span_residuals(&r, &g.matrix)?.into_iter().fold(0.0, f64::max));
            }
            let used_snaps = snapshots_at(snaps, &used);
            let s = match &qoi {
                QoiKind::Linear(c) => {
                    let mut scalar = extract_functional_surrogate(&r, &used_snaps, &LinearFunctional::new(c.clone()))?;
                    scalar.sample_points = points.clone();
                    Surrogate::Linear(scalar)
                }
                QoiKind::Quadratic(c) => {
                    let curve_spec = InnerProductSpec::L2Curve { curve: c.clone() };
                    let gy = if spec == curve_spec {
                        g.clone()
                    } else {
                        let t_gy = Instant::now();
                        let gy = assemble_qoi_gramian(&used_snaps, c)?;
                        gramian_time += t_gy.elapsed().as_secs_f64();
                        gy
                    };
                    Surrogate::Quadratic(build_quadratic_surrogate(&r, &gy)?)
                }
            };
            s
        }
    };
    let surrogate_time = (t.elapsed().as_secs_f64() - gramian_time).max(0.0);
    let poles = surrogate.poles();
    info!(
        "{}: type [{degree}] from {} snapshots, {} finite poles",
        method.name(),
        used.len(),
        poles.len()
    );
    Ok(MethodOutcome {
        method,
        surrogate,
        used,
        degree,
        poles,
        rows: Vec::new(),
        span_residual,
        timings: vec![
            ("snapshots", snapshot_time),
            ("gramian", gramian_time),
            ("surrogate", surrogate_time),
            ("total", snapshot_time + gramian_time + surrogate_time),
        ],
    })
}

/// Runs the sweep and builds every requested surrogate, without writing
/// anything.
pub fn compute_experiment(config: &ExperimentConfig) -> Result<ExperimentResults, CliError> {
    config.validate()?;
    let problem = config.problem()?;
    let mut z: Vec<C64> = uniform_points(config.z_min, config.z_max, config.samples);
    let wants_mri = config.methods.contains(&Method::Mri);
    let main_count = z.len();
    let mri_idx: Vec<usize> = match config.mri_stride() {
        Some(stride) => (0..=config.degree()).map(|k| k * stride).collect(),
        None => {
            let extra = if wants_mri {
                uniform_points(config.z_min, config.z_max, config.degree() + 1)
            } else {
                Vec::new()
            };
            z.extend(&extra);
            (main_count..main_count + extra.len()).collect()
        }
    };
    info!("sweeping {} points of preset {}", z.len(), config.preset);
    let snapshots = sample_sweep(&problem, &z, &config.adaptive)?;
    let usable = snapshots.iter().filter(|s| s.is_usable()).count();
    info!("{usable} of {} snapshots usable", snapshots.len());

    let training: Vec<f64> = z.iter().map(|p| p.re).collect();
    let grid = validation_grid(config, &training);
    let validation = if config.validation_snapshots > 0 {
        let pts: Vec<C64> = validation_sample_points(config)
            .into_iter()
            .map(|x| C64::new(x, 0.0))
            .collect();
        let vs = sample_sweep(&problem, &pts, &config.adaptive)?;
        vs.into_iter().filter(|s| s.is_usable()).collect()
    } else {
        Vec::new()
    };
    let analytic = problem.name == "triangle";
    let fem_refs = validation
        .iter()
        .map(|s| Ok((s.z.re, snapshot_qoi(&problem, s)?)))
        .collect::<Result<Vec<_>, CliError>>()?;

    let main_idx: Vec<usize> = (0..main_count).collect();
    let mut cache = Vec::new();
    let mut methods = Vec::new();
    for &m in &config.methods {
        let idx = if m == Method::Mri { &mri_idx } else { &main_idx };
        let mut outcome = build_method(m, config, &problem, &snapshots, idx, &mut cache)?;
        let mut rows = Vec::with_capacity(grid.len() + fem_refs.len());
        for &x in &grid {
            let zc = C64::new(x, 0.0);
            let reference = if analytic {
                triangle_qoi_resummed(zc, ANALYTIC_TERMS).ok()
            } else {
                None
            };
            rows.push(SurrogateRow {
                z: x,
                value: outcome.surrogate.evaluate(zc)?,
                reference,
            });
        }
        for &(x, y) in &fem_refs {
            rows.push(SurrogateRow {
                z: x,
                value: outcome.surrogate.evaluate(C64::new(x, 0.0))?,
                reference: Some(y),
            });
        }
        rows.sort_by(|a, b| a.z.total_cmp(&b.z));
        outcome.rows = rows;
        methods.push(outcome);
    }
    Ok(ExperimentResults {
        config: config.clone(),
        snapshots,
        methods,
        validation,
    })
}

fn status_name(s: SnapshotStatus) -> &'static str {
    match s {
        SnapshotStatus::Converged => "converged",
        SnapshotStatus::BudgetExhausted => "budget_exhausted",
        SnapshotStatus::Discarded => "discarded",
    }
}

pub fn sweep_table(snaps: &[Snapshot]) -> CsvTable {
    let mut t = CsvTable::new(&["z", "dofs", "eta", "status", "wallclock"]);
    let mut order: Vec<usize> = (0..snaps.len()).collect();
    order.sort_by(|&a, &b| snaps[a].z.re.total_cmp(&snaps[b].z.re));
    let mut seen = BTreeSet::new();
    for i in order {
        let s = &snaps[i];
        if !seen.insert(s.z.re.to_bits()) {
            continue;
        }
        t.push(vec![
            fmt_num(s.z.re),
            s.dofs().to_string(),
            fmt_num(s.estimator),
            status_name(s.status).to_string(),
            fmt_num(snapshot_seconds(s)),
        ]);
    }
    t
}

pub fn surrogate_table(rows: &[SurrogateRow]) -> CsvTable {
    let mut t = CsvTable::new(&["z", "abs_y", "abs_y_ref", "rel_err"]);
    for r in rows {
        t.push(vec![
            fmt_num(r.z),
            fmt_num(r.value.norm()),
            r.reference.map_or(String::new(), |y| fmt_num(y.norm())),
            r.relative_error().map_or(String::new(), fmt_num),
        ]);
    }
    t
}

pub fn poles_table(poles: &[C64]) -> CsvTable {
    let mut t = CsvTable::new(&["re", "im"]);
    for p in poles {
        t.push(vec![fmt_num(p.re), fmt_num(p.im)]);
    }
    t
}

pub fn timings_table(methods: &[MethodOutcome]) -> CsvTable {
    let mut t = CsvTable::new(&["method", "phase", "seconds"]);
    for m in methods {
        for (phase, s) in &m.timings {
            t.push(vec![m.method.name().to_string(), phase.to_string(), fmt_num(*s)]);
        }
    }
    t
}

/// Writes every report file of `results` into `dir`.
pub fn write_results(results: &ExperimentResults, dir: &Path, out: &mut OutputSet) -> Result<(), CliError> {
    out.create_dir(dir)?;
    out.write(&dir.join("config.json"), &results.config.to_json())?;
    out.write(&dir.join("sweep.csv"), &sweep_table(&results.snapshots).render())?;
    for m in &results.methods {
        let name = m.method.name();
        out.write(&dir.join(format!("surrogate_{name}.csv")), &surrogate_table(&m.rows).render())?;
        out.write(&dir.join(format!("poles_{name}.csv")), &poles_table(&m.poles).render())?;
        out.write(&dir.join(format!("surrogate_{name}.json")), &m.surrogate.to_json())?;
    }
    out.write(&dir.join("timings.csv"), &timings_table(&results.methods).render())?;
    if !results.validation.is_empty() {
        let vdir = dir.join("validation");
        out.create_dir(&vdir)?;
        for (i, s) in results.validation.iter().enumerate() {
            let mesh_name = format!("mesh_{i:03}.json");
            out.write(&vdir.join(&mesh_name), &s.mesh.to_json())?;
            let doc = serde_json::to_string(&s.to_document(&mesh_name)).expect("snapshot serializes");
            out.write(&vdir.join(format!("snapshot_{i:03}.json")), &doc)?;
        }
    }
    Ok(())
}

/// Reads the validation snapshots written by [`write_results`].
pub fn read_validation_snapshots(dir: &Path) -> Result<Vec<Snapshot>, CliError> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("snapshot_") && n.ends_with(".json"))
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::Config(format!("no snapshot_*.json files in {}", dir.display())));
    }
    names
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            let doc: helmsweep::fem::SnapshotDocument = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let mesh_path = dir.join(&doc.mesh);
            let mesh_text = std::fs::read_to_string(&mesh_path).map_err(|e| CliError::io(&mesh_path, e))?;
            let mesh = helmsweep::mesh::Mesh::from_json(&mesh_text)
                .map_err(|e| CliError::Config(format!("{}: {e}", mesh_path.display())))?;
            Ok(Snapshot::from_document(&doc, Arc::new(mesh))?)
        })
        .collect()
}

/// Computes and writes an experiment. On failure every file created so far
/// is removed again.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults, CliError> {
    let mut out = OutputSet::default();
    let result = compute_experiment(config).and_then(|r| {
        let t = Instant::now();
        write_results(&r, &config.out_dir, &mut out)?;
        info!("wrote {} files in {:.2} s", out.len(), t.elapsed().as_secs_f64());
        Ok(r)
    });
    if result.is_err() {
        out.rollback();
    }
    result
}

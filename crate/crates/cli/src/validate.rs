//! Validation of a saved surrogate against a reference.

use std::path::Path;

use helmsweep::analytic::triangle_qoi_resummed;
use helmsweep::error::AnalyticError;
use helmsweep::fem::WaveProblem;
use helmsweep::C64;

use crate::error::CliError;
use crate::experiment::{read_validation_snapshots, snapshot_qoi, Surrogate, ANALYTIC_TERMS};
use crate::output::{fmt_num, CsvTable};

/// Where reference values come from.
#[derive(Clone, Debug)]
pub enum Reference<'a> {
    /// The series solution of the triangle benchmark at the given points.
    Analytic(Vec<f64>),
    /// High-fidelity snapshots written by an experiment run.
    Snapshots(&'a Path),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationRow {
    pub z: f64,
    pub value: C64,
    pub reference: C64,
}

impl ValidationRow {
    pub fn relative_error(&self) -> f64 {
        (self.value - self.reference).norm() / self.reference.norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSummary {
    pub count: usize,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q90: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(rows: &[ValidationRow]) -> Option<ErrorSummary> {
    let mut e: Vec<f64> = rows.iter().map(|r| r.relative_error()).filter(|x| !x.is_nan()).collect();
    if e.is_empty() {
        return None;
    }
    e.sort_by(f64::total_cmp);
    Some(ErrorSummary {
        count: e.len(),
        min: e[0],
        q25: quantile(&e, 0.25),
        median: quantile(&e, 0.5),
        q75: quantile(&e, 0.75),
        q90: quantile(&e, 0.9),
        max: e[e.len() - 1],
    })
}

/// Evaluates `surrogate` at every reference point.
pub fn compare<F>(surrogate: F, references: &[(f64, C64)]) -> Result<Vec<ValidationRow>, CliError>
where
    F: Fn(C64) -> Result<C64, CliError>,
{
    references
        .iter()
        .map(|&(z, reference)| {
            Ok(ValidationRow {
                z,
                value: surrogate(C64::new(z, 0.0))?,
                reference,
            })
        })
        .collect()
}

pub fn reference_values(problem: &WaveProblem, reference: &Reference) -> Result<Vec<(f64, C64)>, CliError> {
    match reference {
        Reference::Analytic(points) => {
            if problem.name != "triangle" {
                return Err(CliError::Config(format!(
                    "no analytic reference for preset {}; pass a snapshot directory",
                    problem.name
                )));
            }
            let mut refs = Vec::with_capacity(points.len());
            for &z in points {
                match triangle_qoi_resummed(C64::new(z, 0.0), ANALYTIC_TERMS) {
                    Ok(y) => refs.push((z, y)),
                    Err(e @ AnalyticError::NearEigenvalue { .. }) => log::warn!("skipping {z}: {e}"),
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(refs)
        }
        Reference::Snapshots(dir) => read_validation_snapshots(dir)?
            .iter()
            .map(|s| Ok((s.z.re, snapshot_qoi(problem, s)?)))
            .collect(),
    }
}

pub fn error_table(rows: &[ValidationRow]) -> CsvTable {
    let mut t = CsvTable::new(&["z", "abs_y", "abs_y_ref", "rel_err"]);
    for r in rows {
        t.push(vec![
            fmt_num(r.z),
            fmt_num(r.value.norm()),
            fmt_num(r.reference.norm()),
            fmt_num(r.relative_error()),
        ]);
    }
    t
}

pub fn summary_table(s: &ErrorSummary) -> CsvTable {
    let mut t = CsvTable::new(&["statistic", "rel_err"]);
    for (name, v) in [
        ("min", s.min),
        ("q25", s.q25),
        ("median", s.median),
        ("q75", s.q75),
        ("q90", s.q90),
        ("max", s.max),
    ] {
        t.push(vec![name.to_string(), fmt_num(v)]);
    }
    t.push(vec!["count".to_string(), s.count.to_string()]);
    t
}

/// Evaluation points for an analytic comparison: the training samples of
/// the surrogate, or `count` uniform points in the given range (by default
/// the span of the training samples).
pub fn analytic_points(
    surrogate: &Surrogate,
    at_samples: bool,
    count: usize,
    range: (Option<f64>, Option<f64>),
) -> Result<Vec<f64>, CliError> {
    let r = surrogate.rational();
    let mut samples: Vec<f64> = if r.sample_points.is_empty() { &r.support } else { &r.sample_points }
        .iter()
        .map(|z| z.re)
        .collect();
    samples.sort_by(f64::total_cmp);
    if at_samples {
        return Ok(samples);
    }
    let a = range.0.unwrap_or(samples[0]);
    let b = range.1.unwrap_or(samples[samples.len() - 1]);
    if !(a < b) || count < 2 {
        return Err(CliError::Config(format!("cannot place {count} points in [{a}, {b}]")));
    }
    Ok(helmsweep::adaptive::uniform_points(a, b, count).into_iter().map(|z| z.re).collect())
}

pub fn load_surrogate(path: &Path) -> Result<Surrogate, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Surrogate::from_json(&text)
}

/// Loads a surrogate file and compares it with `reference`.
pub fn validate_surrogate(
    surrogate_path: &Path,
    problem: &WaveProblem,
    reference: &Reference,
) -> Result<(Vec<ValidationRow>, ErrorSummary), CliError> {
    let surrogate = load_surrogate(surrogate_path)?;
    let refs = reference_values(problem, reference)?;
    let rows = compare(|z| surrogate.evaluate(z), &refs)?;
    let summary = summarize(&rows).ok_or_else(|| CliError::Config("reference is empty".into()))?;
    Ok((rows, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_surrogate_against_constant_reference() {
        let refs: Vec<(f64, C64)> = (0..7).map(|i| (i as f64, C64::new(2.5, -1.0))).collect();
        let rows = compare(|_| Ok(C64::new(2.5, -1.0)), &refs).unwrap();
        let s = summarize(&rows).unwrap();
        assert_eq!(s.max, 0.0);
        assert_eq!(s.count, 7);
    }

    #[test]
    fn quantiles_interpolate() {
        let rows: Vec<ValidationRow> = (0..5)
            .map(|i| ValidationRow {
                z: i as f64,
                value: C64::new(1.0 + i as f64, 0.0),
                reference: C64::new(1.0, 0.0),
            })
            .collect();
        let s = summarize(&rows).unwrap();
        assert_eq!((s.min, s.q25, s.median, s.q75, s.max), (0.0, 1.0, 2.0, 3.0, 4.0));
        assert!((s.q90 - 3.6).abs() < 1e-15);
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn analytic_reference_is_triangle_only() {
        let plate = helmsweep::fem::plate_problem();
        assert!(matches!(
            reference_values(&plate, &Reference::Analytic(vec![3.0])),
            Err(CliError::Config(_))
        ));
        let tri = helmsweep::fem::triangle_problem();
        let r = reference_values(&tri, &Reference::Analytic(vec![51.0, 50.0])).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0].1.norm() - 0.147).abs() < 1e-3);
    }
}

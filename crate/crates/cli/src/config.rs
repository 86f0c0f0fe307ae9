//! Experiment configuration: a JSON document plus command-line overrides.

use std::path::{Path, PathBuf};

use helmsweep::adaptive::AdaptiveConfig;
use helmsweep::fem::{preset, QoiKind, WaveProblem};
use helmsweep::mesh::BoundaryKind;
use helmsweep::overlay::InnerProductSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sri,
    Vsri,
    Mri,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sri => "sri",
            Method::Vsri => "vsri",
            Method::Mri => "mri",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sri" => Ok(Method::Sri),
            "vsri" => Ok(Method::Vsri),
            "mri" => Ok(Method::Mri),
            other => Err(CliError::Config(format!("unknown method {other:?}"))),
        }
    }
}

fn default_validation_points() -> usize {
    500
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: String,
    pub methods: Vec<Method>,
    /// Number of uniformly spaced sweep samples.
    pub samples: usize,
    /// Rational type N. Defaults to (S − 1)/2 with SRI or V-SRI requested,
    /// S − 1 otherwise.
    #[serde(default)]
    pub degree: Option<usize>,
    pub z_min: f64,
    pub z_max: f64,
    #[serde(default)]
    pub adaptive: AdaptiveConfig,
    #[serde(default = "default_validation_points")]
    pub validation_points: usize,
    /// High-fidelity FEM reference solves on a uniform grid, used where no
    /// analytic reference exists.
    #[serde(default)]
    pub validation_snapshots: usize,
    /// Inner product for V-SRI; L² on the QoI curve by default.
    #[serde(default)]
    pub vsri_inner_product: Option<InnerProductSpec>,
    /// Inner product for MRI; the H¹ seminorm when the problem has a
    /// Dirichlet part, the full H¹ norm otherwise.
    #[serde(default)]
    pub mri_inner_product: Option<InnerProductSpec>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Validation points are moved by up to ±jitter/2 grid spacings.
    #[serde(default)]
    pub jitter: f64,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line values that replace fields of the configuration file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub methods: Option<Vec<Method>>,
    pub samples: Option<usize>,
    pub degree: Option<usize>,
    pub z_min: Option<f64>,
    pub z_max: Option<f64>,
    pub theta: Option<f64>,
    pub tol_h: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, CliError> {
        serde_json::from_str(s).map_err(|e| CliError::Config(format!("malformed configuration: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let s = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Builds a configuration from overrides alone. Preset, methods, sample
    /// count and range are then required.
    pub fn from_overrides(o: &Overrides) -> Result<Self, CliError> {
        let missing = |what: &str| CliError::Config(format!("no configuration file and no --{what}"));
        let mut c = ExperimentConfig {
            preset: o.preset.clone().ok_or_else(|| missing("preset"))?,
            methods: o.methods.clone().ok_or_else(|| missing("method"))?,
            samples: o.samples.ok_or_else(|| missing("samples"))?,
            degree: None,
            z_min: o.z_min.ok_or_else(|| missing("zmin"))?,
            z_max: o.z_max.ok_or_else(|| missing("zmax"))?,
            adaptive: AdaptiveConfig::default(),
            validation_points: default_validation_points(),
            validation_snapshots: 0,
            vsri_inner_product: None,
            mri_inner_product: None,
            out_dir: default_out_dir(),
            seed: 0,
            jitter: 0.0,
        };
        c.apply(o);
        Ok(c)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = &o.preset {
            self.preset = p.clone();
        }
        if let Some(m) = &o.methods {
            self.methods = m.clone();
        }
        if let Some(s) = o.samples {
            self.samples = s;
        }
        if let Some(n) = o.degree {
            self.degree = Some(n);
        }
        if let Some(z) = o.z_min {
            self.z_min = z;
        }
        if let Some(z) = o.z_max {
            self.z_max = z;
        }
        if let Some(t) = o.theta {
            self.adaptive.theta = t;
        }
        if let Some(t) = o.tol_h {
            self.adaptive.tol_h = t;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
    }

    pub fn problem(&self) -> Result<WaveProblem, CliError> {
        preset(&self.preset).ok_or_else(|| CliError::Config(format!("unknown preset {:?}", self.preset)))
    }

    fn wants_interpolation(&self) -> bool {
        self.methods.iter().any(|m| matches!(m, Method::Sri | Method::Vsri))
    }

    /// The rational type N.
    pub fn degree(&self) -> usize {
        self.degree.unwrap_or(if self.wants_interpolation() {
            self.samples.saturating_sub(1) / 2
        } else {
            self.samples.saturating_sub(1)
        })
    }

    /// Index stride of the MRI samples inside the sweep, when they are a
    /// subset of it.
    pub fn mri_stride(&self) -> Option<usize> {
        let n = self.degree();
        if n == 0 {
            return None;
        }
        let span = self.samples - 1;
        (span % n == 0).then_some(span / n)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let problem = self.problem()?;
        if self.methods.is_empty() {
            return Err(CliError::Config("no surrogate method requested".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(CliError::Config("a method is listed twice".into()));
        }
        if !(self.z_min.is_finite() && self.z_max.is_finite() && self.z_min < self.z_max) {
            return Err(CliError::Config(format!("empty frequency range [{}, {}]", self.z_min, self.z_max)));
        }
        if self.samples < 2 {
            return Err(CliError::Config("at least two samples are needed".into()));
        }
        let n = self.degree();
        if n == 0 {
            return Err(CliError::Config("rational type must be at least 1".into()));
        }
        if self.wants_interpolation() && self.samples < 2 * n + 1 {
            return Err(CliError::Config(format!(
                "sri/vsri of type [{n}] need at least {} samples, got {}",
                2 * n + 1,
                self.samples
            )));
        }
        if !self.wants_interpolation() && n + 1 != self.samples {
            return Err(CliError::Config(format!(
                "mri uses type [S - 1]; got S = {} and N = {n}",
                self.samples
            )));
        }
        if self.methods.contains(&Method::Sri) && !matches!(problem.qoi, Some(QoiKind::Linear(_))) {
            return Err(CliError::Config(format!(
                "sri interpolates scalar samples and needs a linear quantity of interest; preset {} has none",
                self.preset
            )));
        }
        if problem.qoi.is_none() {
            return Err(CliError::Config(format!("preset {} defines no quantity of interest", self.preset)));
        }
        if !(self.jitter >= 0.0 && self.jitter <= 1.0) {
            return Err(CliError::Config(format!("jitter {} is not in [0, 1]", self.jitter)));
        }
        self.adaptive.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn vsri_spec(&self, problem: &WaveProblem) -> InnerProductSpec {
        self.vsri_inner_product.clone().unwrap_or_else(|| InnerProductSpec::L2Curve {
            curve: problem.qoi.as_ref().expect("validated").curve().clone(),
        })
    }

    pub fn mri_spec(&self, problem: &WaveProblem) -> InnerProductSpec {
        self.mri_inner_product.clone().unwrap_or_else(|| {
            if problem.segment_kinds.contains(&BoundaryKind::Dirichlet) {
                InnerProductSpec::H1Semi
            } else {
                InnerProductSpec::H1Full
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"preset": "triangle", "methods": ["sri", "mri"], "samples": 29, "z_min": 1, "z_max": 100}"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = base();
        assert_eq!(c.degree(), 14);
        assert_eq!(c.mri_stride(), Some(2));
        assert_eq!(c.validation_points, 500);
        assert_eq!(c.adaptive, AdaptiveConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn mri_only_uses_all_samples() {
        let mut c = base();
        c.methods = vec![Method::Mri];
        c.samples = 15;
        assert_eq!(c.degree(), 14);
        assert_eq!(c.mri_stride(), Some(1));
        c.validate().unwrap();
        c.degree = Some(10);
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn degree_must_fit_samples() {
        let mut c = base();
        c.degree = Some(15);
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn sri_needs_linear_output() {
        let mut c = base();
        c.preset = "plate".into();
        assert!(c.validate().is_err());
        c.methods = vec![Method::Vsri, Method::Mri];
        c.validate().unwrap();
    }

    #[test]
    fn overrides_replace_fields() {
        let mut c = base();
        c.apply(&Overrides {
            tol_h: Some(0.2),
            samples: Some(9),
            ..Default::default()
        });
        assert_eq!(c.adaptive.tol_h, 0.2);
        assert_eq!(c.degree(), 4);
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"preset": "triangle", "bogus": 1}"#).is_err());
        assert!(Method::parse("pod").is_err());
    }

    #[test]
    fn mri_product_follows_boundary_conditions() {
        let c = base();
        assert_eq!(c.mri_spec(&c.problem().unwrap()), InnerProductSpec::H1Semi);
        let mut c = base();
        c.preset = "cavity".into();
        assert_eq!(c.mri_spec(&c.problem().unwrap()), InnerProductSpec::H1Full);
    }
}

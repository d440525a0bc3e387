use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tri_ident_core::experiments::{
    Distortion, HedonicModelSpec, HedonicOptions, QConstancyOptions, TriangularModelSpec,
};
use tri_ident_core::measure::{AnalyticDensity, Axis, DensityFamily, Grid};
use tri_ident_core::transport::CostFunction;

use crate::error::CliError;

/// One JSON document per run. Every field is optional at parse time; the
/// fields a command needs are checked by [`RunConfig::require`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<AxisSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub densities: Option<DensityPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<SamplePaths>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_coverage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<Dims>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<PointSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<PointSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostFunction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_starts: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<TriangularModelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distortion: Option<Distortion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbit_batch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_options: Option<QConstancyOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hedonic: Option<HedonicModelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hedonic_options: Option<HedonicOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityPair {
    pub z: DensitySpec,
    pub zprime: DensitySpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Gaussian,
    StudentT,
    Uniform,
}

/// `{"family": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub family: FamilyName,
    pub params: DensityParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cov: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dof: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
}

impl DensitySpec {
    pub fn family(&self) -> Result<DensityFamily, CliError> {
        let p = &self.params;
        let need = |v: &Option<Vec<f64>>, name: &str| {
            v.clone().ok_or_else(|| CliError::Config(format!("{:?} density needs `{name}`", self.family)))
        };
        let stray = |names: &[(&str, bool)]| -> Result<(), CliError> {
            match names.iter().find(|(_, present)| *present) {
                Some((n, _)) => {
                    Err(CliError::Config(format!("parameter `{n}` does not apply to the {:?} family", self.family)))
                }
                None => Ok(()),
            }
        };
        match self.family {
            FamilyName::Gaussian => {
                stray(&[
                    ("dof", p.dof.is_some()),
                    ("location", p.location.is_some()),
                    ("scale", p.scale.is_some()),
                    ("lower", p.lower.is_some()),
                    ("upper", p.upper.is_some()),
                ])?;
                let cov = p.cov.clone().ok_or_else(|| CliError::Config("Gaussian density needs `cov`".into()))?;
                Ok(DensityFamily::Gaussian { mean: need(&p.mean, "mean")?, cov })
            }
            FamilyName::StudentT => {
                stray(&[
                    ("mean", p.mean.is_some()),
                    ("cov", p.cov.is_some()),
                    ("lower", p.lower.is_some()),
                    ("upper", p.upper.is_some()),
                ])?;
                let scale = p.scale.clone().ok_or_else(|| CliError::Config("StudentT density needs `scale`".into()))?;
                let dof = p.dof.ok_or_else(|| CliError::Config("StudentT density needs `dof`".into()))?;
                let location = p.location.clone().unwrap_or_else(|| vec![0.0; scale.len()]);
                Ok(DensityFamily::StudentT { dof, location, scale })
            }
            FamilyName::Uniform => {
                stray(&[
                    ("mean", p.mean.is_some()),
                    ("cov", p.cov.is_some()),
                    ("dof", p.dof.is_some()),
                    ("location", p.location.is_some()),
                    ("scale", p.scale.is_some()),
                ])?;
                Ok(DensityFamily::Uniform { lower: need(&p.lower, "lower")?, upper: need(&p.upper, "upper")? })
            }
        }
    }

    pub fn density(&self) -> Result<AnalyticDensity, CliError> {
        Ok(AnalyticDensity::new(self.family()?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplePaths {
    pub z: PathBuf,
    pub zprime: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub d: usize,
    pub k: usize,
    pub m: usize,
}

/// Inline points (with optional weights) or a CSV file of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSet {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverSpec {
    Exact,
    Entropic { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// `|F_z − F_z'|` at which an orbit has reached the manifold.
    pub orbit_tol: f64,
    pub max_steps: usize,
    /// Accepted negative margin of the Brenier checks.
    pub brenier_tol: f64,
    /// Accepted cyclical-monotonicity violation.
    pub cyclical_tol: f64,
    /// Accepted marginal residual of a transport plan.
    pub marginal_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            orbit_tol: tri_ident_core::dynamics::DEFAULT_ORBIT_TOL,
            max_steps: tri_ident_core::dynamics::DEFAULT_MAX_STEPS,
            brenier_tol: -1e-6,
            cyclical_tol: 1e-6,
            marginal_tol: 1e-6,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks that the config names this command (when it names one) and
    /// carries every input the command needs.
    pub fn require(&self, command: &str) -> Result<(), CliError> {
        if let Some(c) = &self.command {
            if c != command {
                return Err(CliError::Config(format!("config is for `{c}`, not `{command}`")));
            }
        }
        let missing = |what: &str| Err(CliError::Config(format!("`{command}` needs `{what}` in the config")));
        match command {
            "check-assumptions" | "iterate" => {
                if self.grid.is_none() {
                    return missing("grid");
                }
                match (&self.densities, &self.samples) {
                    (None, None) => return missing("densities or samples"),
                    (Some(_), Some(_)) => {
                        return Err(CliError::Config("give either `densities` or `samples`, not both".into()))
                    }
                    _ => {}
                }
            }
            "solve-transport" => {
                if self.source.is_none() {
                    return missing("source");
                }
                if self.target.is_none() {
                    return missing("target");
                }
            }
            "counterexample" if self.beta.is_none() => {
                return missing("beta");
            }
            _ => {}
        }
        if let Some(g) = &self.grid {
            if g.is_empty() || g.len() > 3 {
                return Err(CliError::Config(format!("grid needs 1 to 3 axes, got {}", g.len())));
            }
            for a in g {
                if !(a.min < a.max) || a.n < 2 {
                    return Err(CliError::Config(format!("bad axis {a:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Option<Grid>, CliError> {
        match &self.grid {
            None => Ok(None),
            Some(axes) => {
                let axes: Vec<Axis> = axes.iter().map(|a| Axis::new(a.min, a.max, a.n)).collect();
                Ok(Some(Grid::new(axes)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig, serde_json::Error> {
        serde_json::from_str(s)
    }

    #[test]
    fn stray_density_parameter_is_rejected() {
        let spec = DensitySpec {
            family: FamilyName::Gaussian,
            params: DensityParams {
                mean: Some(vec![0.0]),
                cov: Some(vec![vec![1.0]]),
                dof: Some(3.0),
                ..Default::default()
            },
        };
        assert!(matches!(spec.family(), Err(CliError::Config(m)) if m.contains("dof")));
    }

    #[test]
    fn student_t_location_defaults_to_origin() {
        let spec = DensitySpec {
            family: FamilyName::StudentT,
            params: DensityParams {
                dof: Some(4.0),
                scale: Some(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
                ..Default::default()
            },
        };
        match spec.family().unwrap() {
            DensityFamily::StudentT { location, .. } => assert_eq!(location, vec![0.0, 0.0]),
            f => panic!("{f:?}"),
        }
    }

    #[test]
    fn unknown_keys_fail_at_every_level() {
        assert!(parse(r#"{"sede": 1}"#).is_err());
        assert!(parse(r#"{"tolerances": {"orbit_tol": 1e-3, "extra": 1}}"#).is_err());
        assert!(parse(r#"{"grid": [{"min": 0, "max": 1, "n": 4, "step": 1}]}"#).is_err());
        let c = parse(r#"{"tolerances": {"orbit_tol": 1e-3}}"#).unwrap();
        assert_eq!(c.tolerances.orbit_tol, 1e-3);
        assert_eq!(c.tolerances.max_steps, Tolerances::default().max_steps);
    }

    #[test]
    fn require_checks_command_inputs() {
        let c = parse(r#"{"command": "iterate"}"#).unwrap();
        assert!(c.require("iterate").is_err());
        assert!(c.require("reproduce-figure").is_err());
        let c = parse(r#"{"grid": [{"min": 1, "max": 0, "n": 4}]}"#).unwrap();
        assert!(c.require("hedonic").is_err());
        let c = parse(r#"{"beta": 0.5}"#).unwrap();
        assert!(c.require("counterexample").is_ok());
    }
}

//! Run configuration read from TOML.
//!
//! ```toml
//! [domain]
//! vertices = [[1.0, 1.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0]]
//!
//! [grid]
//! h = 0.015625
//!
//! [cone]
//! directions = 8
//! ```
//!
//! Every other table is optional; unset tolerances scale with `h`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Polygon, DEFAULT_CORNER_ANGLE};
use crate::rays::FanConfig;
use crate::regions::default_tolerances;
use crate::solver::{ConvexityCone, SolverConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("domain: {0}")]
    Domain(#[from] GeometryError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub vertices: Vec<[f64; 2]>,
    #[serde(default)]
    pub corner_angle_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeConfig {
    /// 8 (axes and diagonals) or 16 (adds knight moves).
    pub directions: usize,
}

impl Default for ConeConfig {
    fn default() -> Self {
        Self { directions: 8 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionsConfig {
    pub u_tol: Option<f64>,
    pub lambda_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RaysConfig {
    pub smoothing_window: Option<usize>,
    pub min_distortion: Option<f64>,
    /// Counterclockwise boundary-chart sample range `[start, end)`; chosen
    /// automatically when absent.
    pub arc: Option<[usize; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub stages: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub domain: DomainConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub cone: ConeConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub regions: RegionsConfig,
    #[serde(default)]
    pub rays: RaysConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Ok((Self::parse(&text)?, text))
    }

    /// The `(1, 2)²` square at spacing `h`.
    pub fn square(h: f64) -> Self {
        Self {
            domain: DomainConfig {
                vertices: vec![[1.0, 1.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0]],
                corner_angle_threshold: None,
            },
            grid: GridConfig { h },
            cone: ConeConfig::default(),
            solver: SolverConfig::default(),
            regions: RegionsConfig::default(),
            rays: RaysConfig::default(),
            pipeline: PipelineConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let poly = self.polygon()?;
        let h = self.grid.h;
        if !(h > 0.0 && h.is_finite()) {
            return Err(ConfigError::Invalid(format!("grid.h must be positive, got {h}")));
        }
        if h >= 0.5 * poly.shortest_edge() {
            return Err(ConfigError::Invalid(format!(
                "grid.h = {h} must be below half the shortest edge ({})",
                poly.shortest_edge()
            )));
        }
        self.cone()?;
        let s = &self.solver;
        if !(s.kkt_tol > 0.0) || !(s.feas_tol >= 0.0) || s.max_iters == 0 || !(s.mu_factor > 0.0 && s.mu_factor < 1.0) {
            return Err(ConfigError::Invalid(
                "solver: kkt_tol > 0, feas_tol ≥ 0, max_iters ≥ 1 and 0 < mu_factor < 1 are required".into(),
            ));
        }
        for (name, v) in [("regions.u_tol", self.regions.u_tol), ("regions.lambda_tol", self.regions.lambda_tol)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(w) = self.rays.smoothing_window {
            if w < 3 || w % 2 == 0 {
                return Err(ConfigError::Invalid(format!("rays.smoothing_window must be odd and ≥ 3, got {w}")));
            }
        }
        if let Some([a, b]) = self.rays.arc {
            if a >= b {
                return Err(ConfigError::Invalid(format!("rays.arc [{a}, {b}] is empty")));
            }
        }
        if let Some(stages) = &self.pipeline.stages {
            for s in stages {
                crate::pipeline::Stage::parse(s).ok_or_else(|| ConfigError::Invalid(format!("unknown stage `{s}`")))?;
            }
        }
        Ok(())
    }

    pub fn polygon(&self) -> Result<Polygon, ConfigError> {
        let th = self.domain.corner_angle_threshold.unwrap_or(DEFAULT_CORNER_ANGLE);
        Ok(Polygon::with_threshold(self.domain.vertices.clone(), th)?)
    }

    pub fn cone(&self) -> Result<ConvexityCone, ConfigError> {
        match self.cone.directions {
            8 => Ok(ConvexityCone::eight()),
            16 => Ok(ConvexityCone::sixteen()),
            n => Err(ConfigError::Invalid(format!("cone.directions must be 8 or 16, got {n}"))),
        }
    }

    /// `(u_tol, λ_tol)`, defaulting to `(h², h)`.
    pub fn tolerances(&self) -> (f64, f64) {
        let (u, l) = default_tolerances(self.grid.h);
        (self.regions.u_tol.unwrap_or(u), self.regions.lambda_tol.unwrap_or(l))
    }

    pub fn fan_config(&self) -> FanConfig {
        let mut f = FanConfig::for_spacing(self.grid.h);
        f.lambda_tol = self.tolerances().1;
        if let Some(w) = self.rays.smoothing_window {
            f.smoothing_window = w;
        }
        if let Some(d) = self.rays.min_distortion {
            f.min_distortion = d;
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = r#"
        [domain]
        vertices = [[1.0, 1.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0]]
        [grid]
        h = 0.0625
    "#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = Config::parse(SQUARE).unwrap();
        assert_eq!(c.cone.directions, 8);
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.tolerances(), (0.0625 * 0.0625, 0.0625));
        assert_eq!(c, Config::square(0.0625));
    }

    #[test]
    fn invalid_polygon_names_the_vertex() {
        let text = SQUARE.replace("[2.0, 2.0]", "[1.5, 1.2]");
        let err = Config::parse(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Domain(GeometryError::NotConvex { index: 2, .. })), "{err}");
        assert!(err.to_string().contains("vertex 2"));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(Config::parse(&SQUARE.replace("0.0625", "0.6")), Err(ConfigError::Invalid(_))));
        assert!(matches!(Config::parse(&format!("{SQUARE}\n[cone]\ndirections = 12\n")), Err(ConfigError::Invalid(_))));
        assert!(matches!(Config::parse(&format!("{SQUARE}\n[solver]\nkkt_tol = -1.0\n")), Err(ConfigError::Invalid(_))));
        assert!(matches!(Config::parse(&format!("{SQUARE}\n[pipeline]\nstages = [\"bake\"]\n")), Err(ConfigError::Invalid(_))));
        assert!(matches!(Config::parse(&format!("{SQUARE}\n[grid2]\nh = 1\n")), Err(ConfigError::Syntax(_))));
        assert!(matches!(Config::parse("not toml ["), Err(ConfigError::Syntax(_))));
    }
}

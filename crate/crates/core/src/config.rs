//! Experiment configuration and the initial-shape grammar.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::body::{curvature, pinching_status, PinchingStatus, SupportFunction};
use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::snapshot::Snapshot;
use crate::spectral::SphereGrid;
use crate::speeds::SpeedSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Pinching level for `Z_σ` and Tso's constant; defaults to 1.05 × the
    /// initial `max ‖Å‖²/H²`.
    pub sigma: Option<f64>,
    /// Pinching constant for the improved-pinching form; defaults to `sigma`.
    pub sigma0: Option<f64>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_rhos")]
    pub rhos: Vec<f64>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            sigma: None,
            sigma0: None,
            epsilons: default_epsilons(),
            rhos: default_rhos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dimension: usize,
    /// `sphere r`, `ellipsoid a b [c]`, optionally `+ Y(l,m)*amp` terms, or a
    /// snapshot path.
    pub shape: String,
    pub speed: String,
    pub degree: usize,
    #[serde(default = "default_c_safe")]
    pub c_safe: f64,
    #[serde(default = "yes")]
    pub dealias: bool,
    #[serde(default = "default_stop_fraction")]
    pub stop_fraction: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    pub fixed_dt: Option<f64>,
    pub end_time: Option<f64>,
    #[serde(default)]
    pub monitors: MonitorConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}
fn default_epsilons() -> Vec<f64> {
    vec![0.01, 0.1, 0.5]
}
fn default_rhos() -> Vec<f64> {
    vec![0.01, 0.05, 0.1]
}
fn default_c_safe() -> f64 {
    0.2
}
fn default_stop_fraction() -> f64 {
    0.1
}
fn default_max_steps() -> usize {
    1_000_000
}
fn default_cadence() -> usize {
    10
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    fn check(&self) -> Result<()> {
        if !(self.c_safe > 0.0 && self.c_safe < 1.0) {
            return Err(Error::Precondition(format!("c_safe = {} must lie in (0, 1)", self.c_safe)));
        }
        if self.cadence == 0 {
            return Err(Error::Precondition("cadence must be at least 1".into()));
        }
        SpeedSpec::parse(&self.speed)?.validate_for(self.dimension)?;
        Ok(())
    }

    pub fn speed_spec(&self) -> Result<SpeedSpec> {
        SpeedSpec::parse(&self.speed)
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        let mut cfg = FlowConfig::new(self.speed_spec()?, self.degree);
        cfg.c_safe = self.c_safe;
        cfg.dealias = self.dealias;
        cfg.stop_fraction = self.stop_fraction;
        cfg.max_steps = self.max_steps;
        cfg.cadence = self.cadence;
        cfg.fixed_dt = self.fixed_dt;
        cfg.end_time = self.end_time;
        Ok(cfg)
    }

    /// The initial body at the configured degree; relative snapshot paths
    /// resolve against `base`.
    pub fn initial_body(&self, base: &Path) -> Result<SupportFunction> {
        let grid = Arc::new(SphereGrid::new(self.dimension, self.degree)?);
        build_shape(&self.shape, grid, base)
    }
}

/// One `+ Y(l,m)*amp` term; the amplitude multiplies the orthonormal basis
/// function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub degree: usize,
    pub order: i64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeSpec {
    Sphere(f64),
    Ellipsoid(Vec<f64>),
    Snapshot(PathBuf),
}

fn number(token: &str) -> Result<f64> {
    token
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("expected a number, found '{token}'")))
}

fn harmonic(term: &str) -> Result<Harmonic> {
    let bad = || Error::Parse(format!("expected Y(l,m)*amplitude, found '{term}'"));
    let compact: String = term.chars().filter(|c| !c.is_whitespace()).collect();
    let rest = compact.strip_prefix("Y(").ok_or_else(bad)?;
    let (inside, tail) = rest.split_once(')').ok_or_else(bad)?;
    let (l, m) = inside.split_once(',').ok_or_else(bad)?;
    let amp = tail.strip_prefix('*').ok_or_else(bad)?;
    Ok(Harmonic {
        degree: l.parse().map_err(|_| bad())?,
        order: m.parse().map_err(|_| bad())?,
        amplitude: number(amp)?,
    })
}

/// Parse `base [+ Y(l,m)*amp]…`.
pub fn parse_shape(text: &str) -> Result<(ShapeSpec, Vec<Harmonic>)> {
    let mut parts = text.split('+');
    let head = parts.next().unwrap_or_default().trim();
    let words: Vec<&str> = head.split_whitespace().collect();
    let base = match words.as_slice() {
        ["sphere", r] => ShapeSpec::Sphere(number(r)?),
        ["ellipsoid", axes @ ..] if !axes.is_empty() => {
            ShapeSpec::Ellipsoid(axes.iter().map(|a| number(a)).collect::<Result<_>>()?)
        }
        [path] if !matches!(*path, "sphere" | "ellipsoid") => ShapeSpec::Snapshot(PathBuf::from(path)),
        _ => return Err(Error::Parse(format!("unrecognised shape '{head}'"))),
    };
    let terms = parts.map(harmonic).collect::<Result<_>>()?;
    Ok((base, terms))
}

pub fn build_shape(text: &str, grid: Arc<SphereGrid>, base: &Path) -> Result<SupportFunction> {
    let (spec, terms) = parse_shape(text)?;
    let mut body = match spec {
        ShapeSpec::Sphere(r) => {
            if !(r > 0.0) {
                return Err(Error::Precondition(format!("sphere radius {r} must be positive")));
            }
            SupportFunction::sphere(grid.clone(), r)?
        }
        ShapeSpec::Ellipsoid(axes) => SupportFunction::ellipsoid(grid.clone(), &axes)?,
        ShapeSpec::Snapshot(path) => {
            let snap = Snapshot::load(base.join(path))?;
            let loaded = snap.body(None)?;
            if loaded.dim() != grid.dim() {
                return Err(Error::Dimension {
                    expected: grid.dim(),
                    found: loaded.dim(),
                });
            }
            let mut c = loaded.coefficients().to_vec();
            c.resize(grid.coefficient_count(), 0.0);
            SupportFunction::from_coefficients(&c, grid.clone())?
        }
    };
    for h in terms {
        body = body.add_harmonic(h.degree, h.order, h.amplitude)?;
    }
    Ok(body)
}

/// Convexity and cone membership of a candidate initial body.
pub fn check_initial(body: &SupportFunction, speed: &SpeedSpec) -> Result<PinchingStatus> {
    body.validate()?;
    let curv = curvature(body)?;
    let n = body.dim();
    let status = pinching_status(&curv, speed.delta0(n))?;
    if !status.inside {
        return Err(Error::Precondition(format!(
            "initial body leaves the speed cone: max |A°|^2/H^2 = {} at node {} (delta0 = {})",
            status.max_ratio,
            status.worst_node,
            speed.delta0(n)
        )));
    }
    Ok(status)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_grammar() {
        let (s, t) = parse_shape("sphere 1.0 + Y(4,0)*0.2 + Y(2, -1) * -0.01").unwrap();
        assert_eq!(s, ShapeSpec::Sphere(1.0));
        assert_eq!(t.len(), 2);
        assert_eq!(t[1], Harmonic { degree: 2, order: -1, amplitude: -0.01 });
        let (s, _) = parse_shape("ellipsoid 1 1 1.1").unwrap();
        assert_eq!(s, ShapeSpec::Ellipsoid(vec![1.0, 1.0, 1.1]));
        assert_eq!(parse_shape("start.json").unwrap().0, ShapeSpec::Snapshot("start.json".into()));
        assert!(parse_shape("cube 1").is_err());
        assert!(parse_shape("sphere 1 + Y(2,0)").is_err());
        assert!(parse_shape("sphere").is_err());
    }

    #[test]
    fn out_of_cone_shape_is_rejected() {
        let grid = Arc::new(SphereGrid::sphere(12));
        let speed = SpeedSpec::parse("pow_mean,alpha=2,delta0=0.01").unwrap();
        let body = build_shape("sphere 1.0 + Y(4,0)*0.2", grid.clone(), Path::new(".")).unwrap();
        assert!(matches!(check_initial(&body, &speed), Err(Error::ConvexityLost { .. })));
        let body = build_shape("sphere 1.0 + Y(4,0)*0.05", grid, Path::new(".")).unwrap();
        assert!(matches!(check_initial(&body, &speed), Err(Error::Precondition(_))));
        let loose = SpeedSpec::parse("pow_mean,alpha=2").unwrap();
        assert!(check_initial(&build_shape("ellipsoid 1 1 1.1", Arc::new(SphereGrid::sphere(12)), Path::new(".")).unwrap(), &loose).is_ok());
    }

    #[test]
    fn config_round_trip_and_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "dimension = 2\nshape = \"ellipsoid 1 1 1.1\"\nspeed = \"pow_mean,alpha=2\"\ndegree = 12\n",
        )
        .unwrap();
        assert_eq!(cfg.c_safe, 0.2);
        assert!(cfg.dealias && cfg.monitors.enabled);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
        assert!(ExperimentConfig::from_toml("dimension = 2\nshape = \"sphere 1\"\nspeed = \"nope\"\ndegree = 4\n").is_err());
        assert!(ExperimentConfig::from_toml("dimension = 2\nshape = \"sphere 1\"\nspeed = \"pow_mean\"\ndegree = 4\nbogus = 1\n").is_err());
    }
}

//! Experiment configuration: a JSON file, validated strictly, with command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use pblab::levelset::Rect;
use pblab::partition::Objective;

pub const DEFAULT_RESOLUTION: usize = 256;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<SurfaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover: Option<CoverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Output directory; left out of reports so they do not depend on where they are written.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    Torus { lx: f64, ly: f64 },
    Sphere { radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoverSpec {
    /// `k x k` discs of radius `0.9 / k` on the torus.
    SharpLattice {
        k: usize,
        #[serde(default)]
        offset: bool,
    },
    /// Jittered `k x k` lattice of discs with an explicit radius.
    DiscLattice {
        k: usize,
        radius: f64,
        #[serde(default)]
        jitter: f64,
        #[serde(default = "one")]
        copies: usize,
    },
    /// Overlapping latitude bands on the sphere.
    HeightBands { bands: usize, overlap: f64 },
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionSpec {
    /// The lattice profile; requires a `sharp_lattice` cover.
    Sharp,
    /// Normalized distance bumps rising over `margin` of each set's inscribed diameter.
    Bump { margin: f64 },
}

/// Values set on the command line, taking precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub resolution: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.resolution.is_some() {
            self.resolution = o.resolution;
        }
        if o.out.is_some() {
            self.output = o.out.clone();
        }
    }

    pub fn resolution(&self) -> Result<usize, ConfigError> {
        match self.resolution.unwrap_or(DEFAULT_RESOLUTION) {
            n if n < 8 => Err(ConfigError(format!("resolution {n} is below the minimum of 8"))),
            n => Ok(n),
        }
    }

    pub fn require_seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| ConfigError(format!("experiment {} is randomized and needs a seed", self.experiment)))
    }

    pub fn tolerance(&self, default: f64) -> Result<f64, ConfigError> {
        match self.tolerance.unwrap_or(default) {
            t if (0.0..1.0).contains(&t) => Ok(t),
            t => Err(ConfigError(format!("tolerance {t} must lie in [0, 1)"))),
        }
    }

    pub fn surface(&self) -> SurfaceSpec {
        self.surface.clone().unwrap_or(SurfaceSpec::Torus { lx: 1.0, ly: 1.0 })
    }

    /// Experiment parameters, rejecting unknown keys.
    pub fn params<P: DeserializeOwned>(&self) -> Result<P, ConfigError> {
        serde_json::from_value(self.params.clone()).map_err(|e| ConfigError(format!("params: {e}")))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoareaParams {
    /// `trig` (cos 2πx, cos 2πy, closed form 16 on (-1,1)²) or `bumps` (two lattice profile fields).
    #[serde(default = "trig")]
    pub pair: String,
    #[serde(default)]
    pub rects: Option<Vec<Rect>>,
    #[serde(default = "quad")]
    pub quad: usize,
}

fn trig() -> String {
    "trig".into()
}

fn quad() -> usize {
    pblab::levelset::DEFAULT_QUAD
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmptyParams {}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegreeParams {
    #[serde(default = "duplications")]
    pub duplications: Vec<usize>,
}

fn duplications() -> Vec<usize> {
    vec![1, 2, 4]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingParams {
    #[serde(default = "lattice_sizes")]
    pub lattice_sizes: Vec<usize>,
}

fn lattice_sizes() -> Vec<usize> {
    vec![4, 8, 16]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivisionParams {
    #[serde(default = "pairs")]
    pub pairs: usize,
    /// Area bound as a fraction of the total area.
    #[serde(default = "area_fraction")]
    pub area_fraction: f64,
    #[serde(default = "multiplicities")]
    pub multiplicities: Vec<usize>,
    #[serde(default = "permutations")]
    pub permutations: usize,
    /// Allowed fraction of pairs that stay non-generic after jittering.
    #[serde(default = "failure_rate")]
    pub max_failure_rate: f64,
}

fn pairs() -> usize {
    40
}
fn area_fraction() -> f64 {
    0.125
}
fn multiplicities() -> Vec<usize> {
    vec![4, 8]
}
fn permutations() -> usize {
    200
}
fn failure_rate() -> f64 {
    0.05
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinalgParams {
    #[serde(default = "half_dims")]
    pub half_dims: Vec<usize>,
    #[serde(default = "instances")]
    pub instances: usize,
    #[serde(default = "max_vectors")]
    pub max_vectors: usize,
    #[serde(default = "cube_instances")]
    pub cube_instances: usize,
    #[serde(default = "shear_vectors")]
    pub shear_vectors: usize,
    #[serde(default = "chain_instances")]
    pub chain_instances: usize,
}

fn half_dims() -> Vec<usize> {
    vec![1]
}
fn instances() -> usize {
    10_000
}
fn max_vectors() -> usize {
    10
}
fn cube_instances() -> usize {
    500
}
fn shear_vectors() -> usize {
    100_000
}
fn chain_instances() -> usize {
    200
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeParams {
    #[serde(default = "objective")]
    pub objective: Objective,
    #[serde(default = "steps")]
    pub steps: usize,
    #[serde(default = "step")]
    pub step: f64,
    #[serde(default = "probe")]
    pub probe: f64,
    #[serde(default = "modes")]
    pub modes: usize,
}

fn objective() -> Objective {
    Objective::Supsum
}
fn steps() -> usize {
    40
}
fn step() -> f64 {
    0.5
}
fn probe() -> f64 {
    0.1
}
fn modes() -> usize {
    2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> Result<Config, serde_json::Error> {
        serde_json::from_str(json)
    }

    #[test]
    fn defaults_and_overrides() {
        let mut c = parse(r#"{"experiment": "optimize", "seed": 1, "resolution": 64}"#).unwrap();
        assert_eq!(c.surface(), SurfaceSpec::Torus { lx: 1.0, ly: 1.0 });
        assert_eq!(c.tolerance(0.05).unwrap(), 0.05);
        c.apply(&Overrides { seed: Some(9), resolution: None, out: Some("x".into()) });
        assert_eq!((c.seed, c.resolution().unwrap()), (Some(9), 64));
        assert_eq!(c.output.as_deref(), Some(Path::new("x")));
        let p: OptimizeParams = c.params().unwrap();
        assert_eq!((p.steps, p.modes), (40, 2));
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(parse(r#"{"experiment": "x", "sed": 1}"#).is_err());
        assert!(parse(r#"{"experiment": "x", "cover": {"kind": "sharp_lattice", "k": 4, "r": 1}}"#).is_err());
        assert!(parse(r#"{"experiment": "x", "cover": {"kind": "hexagons"}}"#).is_err());
        let c = parse(r#"{"experiment": "x", "params": {"step": 1, "stpes": 3}}"#).unwrap();
        assert!(c.params::<OptimizeParams>().is_err());
        assert!(c.require_seed().is_err());
        let c = parse(r#"{"experiment": "x", "resolution": 7, "tolerance": -0.1}"#).unwrap();
        assert!(c.resolution().is_err());
        assert!(c.tolerance(0.05).is_err());
    }

    #[test]
    fn output_is_not_serialized() {
        let c = parse(r#"{"experiment": "x", "output": "somewhere"}"#).unwrap();
        assert!(!serde_json::to_string(&c).unwrap().contains("somewhere"));
    }
}

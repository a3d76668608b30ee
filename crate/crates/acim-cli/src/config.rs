//! Experiment configuration: one JSON document, optionally overridden by
//! dotted-path flags, hashed for provenance once fully resolved.

use acim_core::{builtin, Error, KernelProfile, PiecewiseMap, Result, SolveMethod, SolveOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercepts: Option<Vec<f64>>,
}

impl MapSpec {
    pub fn build(&self) -> Result<PiecewiseMap> {
        match self.name.as_str() {
            "doubling" | "markov3" => {
                if self.eta.is_some() || self.breakpoints.is_some() {
                    return Err(Error::Parameter(format!(
                        "map '{}' takes no parameters",
                        self.name
                    )));
                }
                builtin(&self.name, &[])
            }
            "sine" => {
                let eta = self.eta.ok_or_else(|| {
                    Error::Parameter("map 'sine' needs an 'eta' parameter".into())
                })?;
                builtin("sine", &[eta])
            }
            "piecewise_linear" => {
                let missing = || {
                    Error::Parameter(
                        "map 'piecewise_linear' needs 'breakpoints', 'slopes' and 'intercepts'"
                            .into(),
                    )
                };
                let breakpoints = self.breakpoints.clone().ok_or_else(missing)?;
                let slopes = self.slopes.clone().ok_or_else(missing)?;
                let intercepts = self.intercepts.clone().ok_or_else(missing)?;
                PiecewiseMap::piecewise_linear(breakpoints, slopes, intercepts)
            }
            other => Err(Error::Parameter(format!("unknown map '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub profile: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl NoiseSpec {
    pub fn profile(&self) -> Result<KernelProfile> {
        KernelProfile::parse(&self.profile)
    }

    pub fn delta(&self) -> Result<f64> {
        self.delta.ok_or_else(|| {
            Error::Parameter("this command needs 'noise.delta' in the config".into())
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_method() -> String {
    "power".into()
}
fn default_tol() -> f64 {
    1e-12
}
fn default_max_iter() -> usize {
    100_000
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self { method: default_method(), tol: default_tol(), max_iter: default_max_iter() }
    }
}

impl SolverSpec {
    pub fn build(&self) -> Result<SolveOptions> {
        Ok(SolveOptions {
            method: SolveMethod::parse(&self.method)?,
            tol: self.tol,
            max_iter: self.max_iter,
            seed_density: None,
        })
    }
}

fn default_delta_list() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.02, 0.01]
}
fn default_num_test_functions() -> usize {
    100
}
fn default_num_samples() -> usize {
    1_000_000
}
fn default_domain() -> String {
    "interval".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapSpec,
    pub noise: NoiseSpec,
    pub n: usize,
    pub p: f64,
    #[serde(default = "default_delta_list")]
    pub delta_list: Vec<f64>,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Oscillation radii; the geometric default grid for n cells when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_num_test_functions")]
    pub num_test_functions: usize,
    #[serde(default = "default_num_samples")]
    pub num_samples: usize,
    /// Input for the `osc` command: a density CSV as written by `density`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_file: Option<String>,
    /// Domain for the `osc` command: "interval" or "torus".
    #[serde(default = "default_domain")]
    pub domain: String,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Parameter(format!("n must be >= 2, got {}", self.n)));
        }
        if !(self.p >= 1.0) {
            return Err(Error::Parameter(format!("p must be >= 1, got {}", self.p)));
        }
        if let Some(d) = self.noise.delta {
            if !(d > 0.0 && d < 0.25) {
                return Err(Error::Parameter(format!("noise.delta {d} outside (0, 1/4)")));
            }
        }
        if self.delta_list.is_empty() {
            return Err(Error::Parameter("delta_list must be nonempty".into()));
        }
        for d in &self.delta_list {
            if !(*d > 0.0 && *d < 0.25) {
                return Err(Error::Parameter(format!("delta_list entry {d} outside (0, 1/4)")));
            }
        }
        if self.delta_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Parameter("delta_list must be strictly decreasing".into()));
        }
        if let Some(grid) = &self.r_grid {
            if grid.is_empty() {
                return Err(Error::Parameter("r_grid must be nonempty when given".into()));
            }
            for r in grid {
                if !(*r > 0.0 && *r <= 1.0) {
                    return Err(Error::Parameter(format!("r_grid entry {r} outside (0, 1]")));
                }
            }
        }
        match self.domain.as_str() {
            "interval" | "torus" => {}
            other => {
                return Err(Error::Parameter(format!(
                    "domain must be 'interval' or 'torus', got '{other}'"
                )))
            }
        }
        self.noise.profile()?;
        self.solver.build()?;
        Ok(())
    }

    /// SHA-256 of the resolved config in canonical (sorted-key) JSON form.
    pub fn sha256(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Applies `--a.b.c value` onto the JSON document, creating intermediate
/// objects as needed. Values parse as JSON when possible and fall back to
/// strings, so `--n 128`, `--map.name sine` and `--delta_list [0.1,0.05]`
/// all do the expected thing.
pub fn apply_override(doc: &mut serde_json::Value, path: &str, raw: &str) -> Result<()> {
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(Error::Parameter(format!("malformed option path '{path}'")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.into()));
    let mut node = doc;
    let mut parts = path.split('.').peekable();
    while let Some(key) = parts.next() {
        let obj = node.as_object_mut().ok_or_else(|| {
            Error::Parameter(format!("option path '{path}' descends into a non-object"))
        })?;
        if parts.peek().is_none() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| serde_json::Value::Object(serde_json::Map::new()));
    }
    unreachable!("loop returns on the last path segment");
}

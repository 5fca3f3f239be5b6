//! JSON run configuration with dotted-path overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::damping::DampingModel;
use crate::diagnostics::{EnergyNorm, Table1Config, Table1Method, TrainingOptions};
use crate::error::{Error, Result};
use crate::galerkin::Discretization;
use crate::netgraph::{paper_network, BoundaryRamp, Network, NetworkOptions};
use crate::solvers::{NewtonOptions, SolverOptions, TimeOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorConfig {
    pub n_sv: usize,
    pub training_h: f64,
    pub training_samples: usize,
    pub reduced_quadrature: bool,
    /// Point budget of the reduced quadrature; defaults to `dim V_H (dim V_H + 1) / 2`.
    pub quadrature_points: Option<usize>,
    pub basis_file: Option<PathBuf>,
}

impl Default for MorConfig {
    fn default() -> Self {
        Self {
            n_sv: 10,
            training_h: 0.005,
            training_samples: 501,
            reduced_quadrature: false,
            quadrature_points: None,
            basis_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table1Fragment {
    pub methods: Vec<Table1Method>,
    pub fit_window: (f64, f64),
}

impl Default for Table1Fragment {
    fn default() -> Self {
        Self {
            methods: Table1Config::paper_defaults(paper_network()).methods,
            fit_window: (10.0, 50.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Builtin network name (`"paper"`, the default when no file is given).
    pub network: Option<String>,
    /// Network JSON file, relative to the working directory.
    pub network_file: Option<PathBuf>,
    pub allow_dead_ends: bool,
    /// Replaces the boundary ramps of the network, in boundary-vertex order.
    pub boundary: Option<Vec<BoundaryRamp>>,
    pub damping: DampingModel,
    pub discretization: Discretization,
    pub time: TimeOptions,
    pub newton: NewtonOptions,
    pub energy_norm: EnergyNorm,
    pub mor: Option<MorConfig>,
    pub table1: Table1Fragment,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            network: None,
            network_file: None,
            allow_dead_ends: false,
            boundary: None,
            damping: DampingModel::quadratic(),
            discretization: Discretization::Fem { h: 0.2 },
            time: TimeOptions::default(),
            newton: NewtonOptions::default(),
            energy_norm: EnergyNorm::Exact,
            mor: None,
            table1: Table1Fragment::default(),
            output: None,
        }
    }
}

/// Sets `path` (dot separated) in a JSON object tree. The value is parsed as
/// JSON when possible and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override key `{path}` is malformed")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        if !node.is_object() {
            return Err(Error::Config(format!("override `{path}`: `{key}` is not inside an object")));
        }
        let map = node.as_object_mut().expect("checked above");
        let child = map.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
        if child.is_null() {
            *child = Value::Object(Default::default());
        }
        node = child;
    }
    match node.as_object_mut() {
        Some(map) => {
            map.insert(keys[keys.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(Error::Config(format!("override `{path}` does not address an object field"))),
    }
}

impl RunConfig {
    /// Reads `path` (or the defaults when `None`), applies the overrides and
    /// validates every fragment.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| Error::Io { path: p.display().to_string(), source })?;
                serde_json::from_str::<Value>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let config: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.network, &self.network_file) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `network` or `network_file`, not both".into())),
            (Some(name), None) if name != "paper" => {
                return Err(Error::Config(format!("unknown builtin network `{name}` (available: paper)")))
            }
            _ => {}
        }
        self.damping.validate()?;
        self.time.validate()?;
        self.newton.validate()?;
        if let Some(m) = &self.mor {
            if m.n_sv == 0 || m.training_samples < 2 || !(m.training_h > 0.0) {
                return Err(Error::Config("mor: n_sv >= 1, training_samples >= 2 and training_h > 0 are required".into()));
            }
        }
        let (lo, hi) = self.table1.fit_window;
        if !(lo < hi) {
            return Err(Error::Config(format!("table1.fit_window ({lo}, {hi}) is empty")));
        }
        Ok(())
    }

    pub fn network(&self) -> Result<Network> {
        let net = match &self.network_file {
            Some(p) => Network::from_json_file(p, NetworkOptions { allow_dead_ends: self.allow_dead_ends })?,
            None => paper_network(),
        };
        match &self.boundary {
            Some(ramps) => net.with_ramps(ramps),
            None => Ok(net),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { newton: self.newton.clone(), time: self.time.clone() }
    }

    pub fn table1_config(&self, threads: Option<usize>) -> Result<Table1Config> {
        let mor = self.mor.clone().unwrap_or_default();
        Ok(Table1Config {
            network: self.network()?,
            damping: self.damping,
            methods: self.table1.methods.clone(),
            options: self.solver_options(),
            fit_window: self.table1.fit_window,
            norm: self.energy_norm,
            training: TrainingOptions {
                discretization: Discretization::Fem { h: mor.training_h },
                samples: mor.training_samples,
            },
            threads,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RunConfig::load(None, &[]).unwrap();
        assert_eq!(c.discretization, Discretization::Fem { h: 0.2 });
        assert_eq!(c.network().unwrap().edges().len(), 7);
    }

    #[test]
    fn dotted_overrides() {
        let c = RunConfig::load(
            None,
            &[r#"discretization={"method":"spectral","order":4}"#.into(), "time.dt=0.02".into(), "mor.n_sv=2".into()],
        )
        .unwrap();
        assert_eq!(c.discretization, Discretization::Spectral { order: 4 });
        assert_eq!(c.time.dt, 0.02);
        assert_eq!(c.mor.unwrap().n_sv, 2);
        let mut v = serde_json::json!({"discretization": {"method": "fem", "h": 0.2}});
        apply_override(&mut v, "discretization.h=0.05").unwrap();
        assert_eq!(v["discretization"]["h"], 0.05);
        assert!(apply_override(&mut v, "discretization.h.x=1").is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(matches!(RunConfig::load(None, &["time.dt=0".into()]), Err(Error::InvalidOptions(_))));
        assert!(RunConfig::load(None, &["network=ring".into()]).is_err());
        assert!(RunConfig::load(None, &["nonsense".into()]).is_err());
        assert!(RunConfig::load(None, &["unknown_key=1".into()]).is_err());
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = RunConfig::load(Some(Path::new("/no/such/config.json")), &[]).unwrap_err();
        assert!(err.to_string().contains("/no/such/config.json"));
    }
}

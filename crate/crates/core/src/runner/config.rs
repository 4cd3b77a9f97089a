//! Run configuration: a flat TOML table of keys, each overridable from the
//! command line.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::afo::AfoConfig;
use crate::hyper::MapConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Additive kernel with slice-sampled hyper-parameters.
    Hybo,
    /// Additive kernel with a single MAP estimate.
    HyboNoMarg,
    /// Uniform random search.
    Random,
    /// Discrete variables relaxed to continuous ones, product RBF kernel,
    /// CMA-ES over everything, proposals rounded for evaluation.
    ContBo,
    /// Product kernel over all dimensions with the alternating optimizer.
    VanillaBo,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Hybo,
        Method::HyboNoMarg,
        Method::Random,
        Method::ContBo,
        Method::VanillaBo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Hybo => "hybo",
            Method::HyboNoMarg => "hybo_no_marg",
            Method::Random => "random",
            Method::ContBo => "cont_bo",
            Method::VanillaBo => "vanilla_bo",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.as_str()).collect();
                Error::Config(format!("unknown method `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

/// Highest interaction order of the additive kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaxOrder {
    #[default]
    Full,
    Order(usize),
}

impl MaxOrder {
    /// The order for a space of `dims` dimensions.
    pub fn resolve(self, dims: usize) -> Result<usize> {
        match self {
            MaxOrder::Full => Ok(dims),
            MaxOrder::Order(p) if (1..=dims).contains(&p) => Ok(p),
            MaxOrder::Order(p) => Err(Error::Config(format!(
                "max_order must be in [1, {dims}] or \"full\", got {p}"
            ))),
        }
    }
}

impl fmt::Display for MaxOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxOrder::Full => f.write_str("full"),
            MaxOrder::Order(p) => write!(f, "{p}"),
        }
    }
}

impl Serialize for MaxOrder {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MaxOrder::Full => s.serialize_str("full"),
            MaxOrder::Order(p) => s.serialize_u64(*p as u64),
        }
    }
}

impl<'de> Deserialize<'de> for MaxOrder {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(p) => Ok(MaxOrder::Order(p as usize)),
            Repr::Str(s) if s == "full" => Ok(MaxOrder::Full),
            Repr::Str(s) => s
                .parse()
                .map(MaxOrder::Order)
                .map_err(|_| serde::de::Error::custom(format!("invalid max_order `{s}`"))),
        }
    }
}

/// Everything a single run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub benchmark: String,
    pub method: Method,
    /// Number of evaluations after the initial design.
    pub budget: usize,
    /// Number of uniform initial designs.
    pub n_init: usize,
    pub seed: u64,
    pub max_order: MaxOrder,
    /// Posterior draws kept per iteration.
    pub hyper_samples: usize,
    /// Sweeps discarded before the kept draws.
    pub hyper_burn_in: usize,
    /// Starting points of the MAP search.
    pub map_starts: usize,
    pub cma_population: usize,
    pub cma_sigma0: f64,
    pub cma_budget: usize,
    pub ls_restarts: usize,
    pub alternations: usize,
    /// Destination CSV; standard output when absent.
    pub output: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let afo = AfoConfig::default();
        Self {
            benchmark: "mixint_sphere".into(),
            method: Method::Hybo,
            budget: 50,
            n_init: 5,
            seed: 0,
            max_order: MaxOrder::Full,
            hyper_samples: 10,
            hyper_burn_in: 50,
            map_starts: MapConfig::default().n_starts,
            cma_population: afo.cma_population,
            cma_sigma0: afo.cma_sigma0,
            cma_budget: afo.cma_budget,
            ls_restarts: afo.ls_restarts,
            alternations: afo.alternations,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn afo(&self) -> AfoConfig {
        AfoConfig {
            cma_population: self.cma_population,
            cma_sigma0: self.cma_sigma0,
            cma_budget: self.cma_budget,
            ls_restarts: self.ls_restarts,
            alternations: self.alternations,
        }
    }

    pub fn map(&self) -> MapConfig {
        MapConfig {
            n_starts: self.map_starts,
            ..MapConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if self.n_init == 0 {
            return Err(Error::Config("n_init must be at least 1".into()));
        }
        if self.hyper_samples == 0 {
            return Err(Error::Config("hyper_samples must be at least 1".into()));
        }
        if self.map_starts == 0 {
            return Err(Error::Config("map_starts must be at least 1".into()));
        }
        self.afo().validate()
    }

    /// Parses a TOML document and applies `key=value` overrides on top.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for (key, raw) in overrides {
            table.insert(key.clone(), parse_override_value(raw));
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_with_overrides(&text, overrides)
    }

    /// The configuration as TOML lines, in a fixed order.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes to TOML")
    }
}

/// Interprets a command-line value as a TOML scalar when it parses as one
/// and as a bare string otherwise.
fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected key=value, got `{s}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

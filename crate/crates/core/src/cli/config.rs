//! Line-based experiment configuration: `section.key = value`, `#` comments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{build_cubic_box, build_slab, GraphError, LatticeGraph, LatticeKind};
use crate::sampler::{Boundary, ModelParams, SamplerError};
use crate::stats::{DEFAULT_BATCH_SIZE, DEFAULT_K_SIGMA};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `section.key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("`{key}`: cannot parse `{value}` as {expected}")]
    Type {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error("check {check} requires {requirement}")]
    Inapplicable { check: Check, requirement: &'static str },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] SamplerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Check {
    Thm31,
    Thm32i,
    Prop21,
    Onsager,
    LowTemp,
    Thm51,
    Prop43,
    ImplNpiani,
    Eq4,
    Rotation,
}

impl Check {
    pub const ALL: [Check; 10] = [
        Check::Thm31,
        Check::Thm32i,
        Check::Prop21,
        Check::Onsager,
        Check::LowTemp,
        Check::Thm51,
        Check::Prop43,
        Check::ImplNpiani,
        Check::Eq4,
        Check::Rotation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Thm31 => "thm31",
            Check::Thm32i => "thm32i",
            Check::Prop21 => "prop21",
            Check::Onsager => "onsager",
            Check::LowTemp => "lowtemp",
            Check::Thm51 => "thm51",
            Check::Prop43 => "prop43",
            Check::ImplNpiani => "impl_npiani",
            Check::Eq4 => "eq4",
            Check::Rotation => "rotation",
        }
    }

    /// Checks that only make sense by enumeration.
    pub fn is_exact_only(self) -> bool {
        matches!(self, Check::ImplNpiani | Check::Eq4 | Check::Rotation)
    }

    /// Checks the `exact` subcommand knows how to run.
    pub fn has_exact_form(self) -> bool {
        self.is_exact_only() || self == Check::Prop21
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown check `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphSpec {
    Cubic { dim: usize, side: usize },
    Slab { layers: usize, side: usize, periodic: bool },
}

impl GraphSpec {
    pub fn build(&self) -> Result<LatticeGraph, GraphError> {
        match *self {
            GraphSpec::Cubic { dim, side } => build_cubic_box(dim, side, true),
            GraphSpec::Slab { layers, side, periodic } => build_slab(layers, side, periodic),
        }
    }

    pub fn side(&self) -> usize {
        match *self {
            GraphSpec::Cubic { side, .. } | GraphSpec::Slab { side, .. } => side,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub betas: Vec<f64>,
    pub j_horizontal: f64,
    pub j_vertical: f64,
    pub boundary: Boundary,
    pub burn_in: u64,
    pub sweeps: u64,
    pub thin: u64,
    pub chains: u64,
    pub base_seed: u64,
    pub batch_size: usize,
    pub checks: Vec<Check>,
    pub k_sigma: f64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn params(&self, beta: f64) -> Result<ModelParams, SamplerError> {
        ModelParams::with_couplings(beta, self.j_horizontal, self.j_vertical, self.boundary)
    }

    /// Canonical `key = value` listing of every effective setting, sorted by key.
    pub fn canonical(&self) -> String {
        let mut map = BTreeMap::new();
        match self.graph {
            GraphSpec::Cubic { dim, side } => {
                map.insert("graph.kind", "cubic".to_string());
                map.insert("graph.d", dim.to_string());
                map.insert("graph.side", side.to_string());
            }
            GraphSpec::Slab { layers, side, periodic } => {
                map.insert("graph.kind", "slab".to_string());
                map.insert("graph.N", layers.to_string());
                map.insert("graph.side", side.to_string());
                map.insert("graph.periodic", periodic.to_string());
            }
        }
        let betas: Vec<String> = self.betas.iter().map(|b| b.to_string()).collect();
        map.insert("model.beta_grid", betas.join(","));
        map.insert("model.j_horizontal", self.j_horizontal.to_string());
        map.insert("model.j_vertical", self.j_vertical.to_string());
        map.insert("model.boundary", self.boundary.name().to_string());
        map.insert("schedule.burn_in", self.burn_in.to_string());
        map.insert("schedule.sweeps", self.sweeps.to_string());
        map.insert("schedule.thin", self.thin.to_string());
        map.insert("schedule.chains", self.chains.to_string());
        map.insert("schedule.base_seed", self.base_seed.to_string());
        map.insert("schedule.batch_size", self.batch_size.to_string());
        let checks: Vec<&str> = self.checks.iter().map(|c| c.name()).collect();
        map.insert("checks.list", checks.join(","));
        map.insert("checks.k_sigma", self.k_sigma.to_string());
        map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of [`ExperimentConfig::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.chains).map(|i| self.base_seed.wrapping_add(i)).collect()
    }
}

const KEYS: &[&str] = &[
    "graph.kind",
    "graph.d",
    "graph.N",
    "graph.layers",
    "graph.side",
    "graph.periodic",
    "model.beta",
    "model.beta_grid",
    "model.j_horizontal",
    "model.j_vertical",
    "model.boundary",
    "schedule.burn_in",
    "schedule.sweeps",
    "schedule.thin",
    "schedule.chains",
    "schedule.base_seed",
    "schedule.batch_size",
    "checks",
    "checks.list",
    "checks.k_sigma",
    "output.dir",
];

struct Raw {
    entries: BTreeMap<&'static str, String>,
}

impl Raw {
    fn get<T: FromStr>(&self, key: &'static str, expected: &'static str) -> Result<Option<T>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| ConfigError::Type {
                key: key.to_string(),
                value: v.clone(),
                expected,
            }),
        }
    }

    fn require<T: FromStr>(&self, key: &'static str, expected: &'static str) -> Result<T, ConfigError> {
        self.get(key, expected)?.ok_or(ConfigError::Missing(key))
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut raw = Raw { entries: BTreeMap::new() };
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: line_no })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line: line_no });
        }
        let known = KEYS.iter().find(|&&k| k == key).ok_or_else(|| ConfigError::UnknownKey {
            line: line_no,
            key: key.to_string(),
        })?;
        // aliases share one slot
        let slot: &'static str = match *known {
            "graph.layers" => "graph.N",
            "checks" => "checks.list",
            k => k,
        };
        if raw.entries.insert(slot, value.to_string()).is_some() {
            return Err(ConfigError::DuplicateKey {
                line: line_no,
                key: key.to_string(),
            });
        }
    }

    let kind: String = raw.require("graph.kind", "cubic or slab")?;
    let side: usize = raw.require("graph.side", "positive integer")?;
    let graph = match kind.as_str() {
        "cubic" => {
            for k in ["graph.N", "graph.periodic"] {
                if raw.entries.contains_key(k) {
                    return Err(ConfigError::Invalid(format!("`{k}` does not apply to cubic graphs")));
                }
            }
            GraphSpec::Cubic {
                dim: raw.require("graph.d", "positive integer")?,
                side,
            }
        }
        "slab" | "slab_periodic" => {
            if raw.entries.contains_key("graph.d") {
                return Err(ConfigError::Invalid("`graph.d` does not apply to slabs".into()));
            }
            GraphSpec::Slab {
                layers: raw.require("graph.N", "positive integer")?,
                side,
                periodic: raw.get("graph.periodic", "true or false")?.unwrap_or(kind == "slab_periodic"),
            }
        }
        other => return Err(ConfigError::Invalid(format!("unknown graph kind `{other}`"))),
    };
    // surfaces degenerate shapes (zero sizes, periodic N < 3) at parse time
    let built = graph.build()?;

    let betas: Vec<f64> = match (raw.entries.get("model.beta"), raw.entries.get("model.beta_grid")) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invalid("give either model.beta or model.beta_grid".into()))
        }
        (Some(_), None) => vec![raw.require("model.beta", "number")?],
        (None, Some(list)) => list
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| ConfigError::Type {
                    key: "model.beta_grid".into(),
                    value: s.trim().to_string(),
                    expected: "comma-separated numbers",
                })
            })
            .collect::<Result<_, _>>()?,
        (None, None) => return Err(ConfigError::Missing("model.beta")),
    };
    if betas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConfigError::Invalid("beta grid must be strictly increasing".into()));
    }
    let boundary = match raw.entries.get("model.boundary") {
        None => Boundary::Plus,
        Some(b) => Boundary::parse(b).ok_or_else(|| ConfigError::Type {
            key: "model.boundary".into(),
            value: b.clone(),
            expected: "plus, minus, free or wired-bond",
        })?,
    };
    let j_horizontal = raw.get("model.j_horizontal", "number")?.unwrap_or(1.0);
    let j_vertical = raw.get("model.j_vertical", "number")?.unwrap_or(1.0);
    for &beta in &betas {
        ModelParams::with_couplings(beta, j_horizontal, j_vertical, boundary)?;
    }

    let default_burn_in = 10 * graph.side() as u64;
    let chains = raw.get("schedule.chains", "positive integer")?.unwrap_or(1);
    let sweeps = raw.get("schedule.sweeps", "positive integer")?.unwrap_or(1000);
    let thin = raw.get("schedule.thin", "positive integer")?.unwrap_or(1);
    let batch_size = raw.get("schedule.batch_size", "positive integer")?.unwrap_or(DEFAULT_BATCH_SIZE);
    if chains == 0 {
        return Err(ConfigError::Invalid("schedule.chains must be at least 1".into()));
    }
    if sweeps == 0 || thin == 0 || batch_size == 0 {
        return Err(ConfigError::Invalid("sweeps, thin and batch_size must be positive".into()));
    }

    let checks: Vec<Check> = match raw.entries.get("checks.list") {
        None => Vec::new(),
        Some(list) => {
            let mut out = Vec::new();
            for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let c: Check = item.parse().map_err(ConfigError::Invalid)?;
                if !out.contains(&c) {
                    out.push(c);
                }
            }
            out
        }
    };

    let config = ExperimentConfig {
        graph,
        betas,
        j_horizontal,
        j_vertical,
        boundary,
        burn_in: raw.get("schedule.burn_in", "non-negative integer")?.unwrap_or(default_burn_in),
        sweeps,
        thin,
        chains,
        base_seed: raw.get("schedule.base_seed", "non-negative integer")?.unwrap_or(0),
        batch_size,
        checks,
        k_sigma: raw.get("checks.k_sigma", "number")?.unwrap_or(DEFAULT_K_SIGMA),
        output_dir: raw
            .entries
            .get("output.dir")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("fkslab-out")),
    };
    if !(config.k_sigma > 0.0) {
        return Err(ConfigError::Invalid("checks.k_sigma must be positive".into()));
    }
    let statistical = config.checks.iter().any(|c| !c.is_exact_only());
    if statistical && ((config.sweeps / config.thin) as usize) < 2 * config.batch_size {
        return Err(ConfigError::Invalid(format!(
            "each chain retains {} samples, fewer than 2 x batch_size = {}",
            config.sweeps / config.thin,
            2 * config.batch_size
        )));
    }
    for &check in &config.checks {
        check_applicable(check, &built, boundary)?;
    }
    Ok(config)
}

fn check_applicable(check: Check, g: &LatticeGraph, boundary: Boundary) -> Result<(), ConfigError> {
    let fixed = boundary.fixed_sign().is_some();
    let fail = |requirement| Err(ConfigError::Inapplicable { check, requirement });
    match (check, g.kind()) {
        (Check::Onsager | Check::LowTemp, LatticeKind::Cubic { dim: 2 }) => {}
        (Check::Onsager | Check::LowTemp, _) => return fail("a cubic graph with d=2"),
        (Check::Thm32i, LatticeKind::Cubic { dim }) if dim >= 2 => {}
        (Check::Thm32i, _) => return fail("a cubic graph with d>=2"),
        (Check::Thm51 | Check::ImplNpiani, LatticeKind::Slab { layers: 2 } | LatticeKind::SlabPeriodic { layers: 3 }) => {}
        (Check::Thm51 | Check::ImplNpiani, _) => return fail("slab N=2 (or periodic slab N=3)"),
        (Check::Prop43, k) if k.is_slab() => {}
        (Check::Prop43, _) => return fail("a slab graph"),
        (Check::Rotation, LatticeKind::Slab { layers: 3 } | LatticeKind::SlabPeriodic { layers: 3 }) => {}
        (Check::Rotation, _) => return fail("a slab graph with N=3"),
        _ => {}
    }
    let needs_fixed = matches!(
        check,
        Check::Thm31 | Check::Thm32i | Check::Prop21 | Check::LowTemp | Check::Thm51 | Check::Prop43
    );
    if needs_fixed && !fixed {
        return fail("plus or minus boundary");
    }
    if matches!(check, Check::Rotation | Check::Onsager) && boundary == Boundary::WiredBond {
        return fail("plus, minus or free boundary");
    }
    Ok(())
}

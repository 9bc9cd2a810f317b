//! Run configuration: a TOML key tree with documented defaults. Unknown
//! keys are rejected so typos never pass silently.
//!
//! ```toml
//! group = { product = [ { free = 2 }, { cyclic = 2 } ] }
//! mode = "rational"            # or "float:<digits>"
//! threads = 1
//!
//! [measure]
//! preset = "example-f2c2"      # simple | lazy-simple | example-f2c2
//! laziness = "1/2"             # lazy-simple
//! alpha = "1/2"                # example-f2c2
//! # atoms = [ { element = "(a,0)", weight = "1/6" }, … ]  instead of a preset
//!
//! [truncation]
//! ball_radius = 4
//! max_level = 8
//! k_max = 10000
//! eps = 1e-12
//! tol = 1e-3
//! n_max = 200
//! max_atoms = 50000000
//!
//! [output]
//! dir = "walkbound-out"
//!
//! [cache]
//! dir = "/path/to/cache"       # or WALKBOUND_CACHE_DIR
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use walkbound::group::{FiniteGroup, GroupModel};
use walkbound::measure::Measure;
use walkbound::scalar::{parse_rational, Mode};

use crate::CliError;

/// Environment variable naming the power-cache directory.
pub const CACHE_ENV: &str = "WALKBOUND_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum GroupSpec {
    Abelian(usize),
    Free(usize),
    Cyclic(u32),
    Symmetric(usize),
    Product(Vec<GroupSpec>),
}

impl GroupSpec {
    pub fn build(&self) -> Result<GroupModel, CliError> {
        Ok(match self {
            GroupSpec::Abelian(d) => GroupModel::free_abelian(*d)?,
            GroupSpec::Free(d) => GroupModel::free(*d)?,
            GroupSpec::Cyclic(k) => GroupModel::cyclic(*k)?,
            GroupSpec::Symmetric(k) => GroupModel::finite(FiniteGroup::symmetric(*k)?),
            GroupSpec::Product(parts) => {
                let (last, init) = parts
                    .split_last()
                    .filter(|(_, init)| !init.is_empty())
                    .ok_or_else(|| CliError::Config("a product needs at least two factors".into()))?;
                init.iter()
                    .rev()
                    .try_fold(last.build()?, |acc, g| Ok::<_, CliError>(GroupModel::product(g.build()?, acc)))?
            }
        })
    }

    pub fn f2c2() -> Self {
        GroupSpec::Product(vec![GroupSpec::Free(2), GroupSpec::Cyclic(2)])
    }
}

/// Flag syntax: `abelian:1`, `free:2`, `cyclic:5`, `symmetric:3`,
/// `product(free:2;cyclic:2)`.
impl FromStr for GroupSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let s = s.trim();
        let bad = || CliError::Config(format!("cannot parse group descriptor {s:?}"));
        if let Some(inner) = s.strip_prefix("product(").and_then(|t| t.strip_suffix(')')) {
            let mut parts = Vec::new();
            let mut depth = 0;
            let mut start = 0;
            for (i, c) in inner.char_indices() {
                match c {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    ';' if depth == 0 => {
                        parts.push(inner[start..i].parse()?);
                        start = i + 1;
                    }
                    _ => {}
                }
            }
            parts.push(inner[start..].parse()?);
            return Ok(GroupSpec::Product(parts));
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let arg = arg.trim();
        Ok(match kind.trim() {
            "abelian" => GroupSpec::Abelian(arg.parse().map_err(|_| bad())?),
            "free" => GroupSpec::Free(arg.parse().map_err(|_| bad())?),
            "cyclic" => GroupSpec::Cyclic(arg.parse().map_err(|_| bad())?),
            "symmetric" => GroupSpec::Symmetric(arg.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        })
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::Abelian(d) => write!(f, "abelian:{d}"),
            GroupSpec::Free(d) => write!(f, "free:{d}"),
            GroupSpec::Cyclic(k) => write!(f, "cyclic:{k}"),
            GroupSpec::Symmetric(k) => write!(f, "symmetric:{k}"),
            GroupSpec::Product(parts) => {
                let inner: Vec<String> = parts.iter().map(ToString::to_string).collect();
                write!(f, "product({})", inner.join(";"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub element: String,
    pub weight: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureSpec {
    /// `simple`, `lazy-simple` or `example-f2c2`; ignored when `atoms` is set.
    pub preset: Option<String>,
    pub laziness: String,
    pub alpha: String,
    pub atoms: Vec<AtomSpec>,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        MeasureSpec {
            preset: None,
            laziness: "1/2".into(),
            alpha: "1/2".into(),
            atoms: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Truncation {
    /// Ball radius for element scans and harmonic checks.
    pub ball_radius: u32,
    /// Space-time level cap `M`.
    pub max_level: u64,
    /// Series cap for Green and Martin kernels.
    pub k_max: u64,
    pub eps: f64,
    pub tol: f64,
    /// Horizon for ratio limits, spectral radius and Gerl ratios.
    pub n_max: u64,
    /// Atom budget of a single convolution power.
    pub max_atoms: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            ball_radius: 4,
            max_level: 8,
            k_max: 10_000,
            eps: 1e-12,
            tol: 1e-3,
            n_max: 200,
            max_atoms: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("walkbound-out"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheSpec {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Defaults to `abelian:1`, or `product(free:2;cyclic:2)` for the
    /// `example-f2c2` preset.
    pub group: Option<GroupSpec>,
    pub measure: MeasureSpec,
    pub mode: String,
    /// Worker count. Every computation currently runs on one thread, so
    /// results do not depend on it.
    pub threads: usize,
    pub truncation: Truncation,
    pub output: OutputSpec,
    pub cache: CacheSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            group: None,
            measure: MeasureSpec::default(),
            mode: "rational".into(),
            threads: 1,
            truncation: Truncation::default(),
            output: OutputSpec::default(),
            cache: CacheSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn mode(&self) -> Result<Mode, CliError> {
        self.mode.parse().map_err(CliError::Config)
    }

    pub fn group_spec(&self) -> GroupSpec {
        match (&self.group, self.measure.preset.as_deref()) {
            (Some(g), _) => g.clone(),
            (None, Some("example-f2c2")) if self.measure.atoms.is_empty() => GroupSpec::f2c2(),
            (None, _) => GroupSpec::Abelian(1),
        }
    }

    pub fn alpha(&self) -> Result<BigRational, CliError> {
        rational("alpha", &self.measure.alpha)
    }

    pub fn build_measure(&self) -> Result<Measure, CliError> {
        let spec = self.group_spec();
        let model = spec.build()?;
        if !self.measure.atoms.is_empty() {
            let atoms: Vec<(&str, &str)> = self
                .measure
                .atoms
                .iter()
                .map(|a| (a.element.as_str(), a.weight.as_str()))
                .collect();
            return Ok(Measure::from_text(model, &atoms)?);
        }
        match self.measure.preset.as_deref().unwrap_or("lazy-simple") {
            "simple" => Ok(Measure::simple(model)?),
            "lazy-simple" => Ok(Measure::lazy_simple(model, rational("laziness", &self.measure.laziness)?)?),
            "example-f2c2" => {
                if spec != GroupSpec::f2c2() {
                    return Err(CliError::Config(format!(
                        "preset example-f2c2 lives on {}, not {spec}",
                        GroupSpec::f2c2()
                    )));
                }
                Ok(Measure::example_f2c2(self.alpha()?)?)
            }
            other => Err(CliError::Config(format!(
                "unknown preset {other:?}; expected simple, lazy-simple or example-f2c2"
            ))),
        }
    }

    /// Config key, then the environment variable.
    pub fn cache_dir(&self) -> Option<PathBuf> {
        self.cache
            .dir
            .clone()
            .or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.mode()?;
        if self.threads == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        let t = &self.truncation;
        if !(t.eps > 0.0 && t.eps.is_finite()) || !(t.tol > 0.0 && t.tol.is_finite()) {
            return Err(CliError::Config("eps and tol must be positive and finite".into()));
        }
        if t.k_max == 0 || t.max_atoms == 0 {
            return Err(CliError::Config("k_max and max_atoms must be positive".into()));
        }
        Ok(())
    }
}

/// An exact rational config value; decimals are rejected.
pub fn rational(key: &str, text: &str) -> Result<BigRational, CliError> {
    parse_rational(text).ok_or_else(|| CliError::Config(format!("{key} must be an exact rational p/q, got {text:?}")))
}

//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! lambda1 = 100
//! lambda2 = 0.01
//! eta = 0.05
//! steps = 10000
//! init = x          # explicit | x | x_tilde | x_balanced | y | m_dagger
//! seed = 7
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use eos_core::dynamics::ClipVariant;
use eos_core::{regions, ModelConfig, Params};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required keys: {}", .0.join(", "))]
    MissingKeys(Vec<&'static str>),
    #[error("invalid value for `{key}`: {value:?} ({reason})")]
    InvalidValue {
        key: &'static str,
        value: String,
        reason: String,
    },
    #[error("{0}")]
    Domain(String),
    #[error("unknown preset `{0}` (expected one of figure1, figure2, figure3, figure4, figure5, figure7)")]
    UnknownPreset(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

const REQUIRED: [&str; 5] = ["lambda1", "lambda2", "eta", "steps", "init"];
const OPTIONAL: [&str; 16] = [
    "alpha",
    "beta1",
    "beta2",
    "seed",
    "mode",
    "outputs",
    "allow_out_of_theory",
    "clip_variant",
    "profile",
    "product_bound",
    "figure",
    "name",
    "sweep_eta",
    "sweep_seed",
    "gf_every",
    "threads",
];

/// Where the initial point comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Explicit(Params),
    Sample { sampler: Sampler, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    X,
    XTilde,
    XBalanced,
    Y,
    MDagger,
}

impl Sampler {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "x" => Self::X,
            "x_tilde" => Self::XTilde,
            "x_balanced" => Self::XBalanced,
            "y" => Self::Y,
            "m_dagger" => Self::MDagger,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::X => "x",
            Self::XTilde => "x_tilde",
            Self::XBalanced => "x_balanced",
            Self::Y => "y",
            Self::MDagger => "m_dagger",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Gd,
    GdUnclipped,
    Gf,
    Constrained,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gd => "gd",
            Self::GdUnclipped => "gd-unclipped",
            Self::Gf => "gf",
            Self::Constrained => "constrained",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Output {
    Csv,
    Svg,
    Report,
}

/// Membership predicate the initial point is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    X,
    XTilde,
    Y,
    MDagger,
    None,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Self::X => "x",
            Self::XTilde => "x_tilde",
            Self::Y => "y",
            Self::MDagger => "m_dagger",
            Self::None => "none",
        }
    }
}

/// Extra plots reproduced by a preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Loss and sharpness.
    LossSharpness,
    /// `L`, `L2`, `L̂` with the reference slope; `L1` against `L2`.
    Decomposition,
    /// Gradient-flow-solution sharpness between its bounds.
    GfsBounds,
    /// Gradient flows started along the GD path.
    GfFromPath,
    /// GD, GF and constrained trajectories from one start.
    ThreeTrajectories,
    /// One start, several learning rates.
    LearningRates,
}

impl Figure {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "figure1" => Self::LossSharpness,
            "figure2" => Self::Decomposition,
            "figure3" => Self::GfsBounds,
            "figure4" => Self::GfFromPath,
            "figure5" => Self::ThreeTrajectories,
            "figure7" => Self::LearningRates,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub lambda1: f64,
    pub lambda2: f64,
    pub eta: f64,
    pub steps: usize,
    pub init: Init,
    pub mode: Mode,
    pub outputs: Vec<Output>,
    pub allow_out_of_theory: bool,
    pub clip_variant: ClipVariant,
    pub profile: Profile,
    pub product_bound: f64,
    pub figure: Option<Figure>,
    pub sweep_eta: Vec<f64>,
    pub sweep_seed: Vec<u64>,
    /// Keep every `gf_every`-th RK4 state in gradient-flow output.
    pub gf_every: u64,
    /// Worker threads for sweeps (0: one per available core).
    pub threads: usize,
}

pub const PRESETS: [(&str, &str); 6] = [
    ("figure1", include_str!("../presets/figure1.cfg")),
    ("figure2", include_str!("../presets/figure2.cfg")),
    ("figure3", include_str!("../presets/figure3.cfg")),
    ("figure4", include_str!("../presets/figure4.cfg")),
    ("figure5", include_str!("../presets/figure5.cfg")),
    ("figure7", include_str!("../presets/figure7.cfg")),
];

pub fn preset_text(name: &str) -> Result<&'static str, ConfigError> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))
}

pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = parse_config(preset_text(name)?)?;
    if cfg.name.is_empty() {
        cfg.name = name.to_string();
    }
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if cfg.name.is_empty() {
        cfg.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
    }
    Ok(cfg)
}

struct Entries(BTreeMap<&'static str, String>);

impl Entries {
    fn get(&self, key: &'static str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::InvalidValue {
                    key,
                    value: v.to_string(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    fn list<T: std::str::FromStr>(&self, key: &'static str) -> Result<Vec<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let Some(v) = self.get(key) else {
            return Ok(Vec::new());
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>().map_err(|e| ConfigError::InvalidValue {
                    key,
                    value: s.to_string(),
                    reason: e.to_string(),
                })
            })
            .collect()
    }
}

fn invalid(key: &'static str, value: &str, reason: &str) -> ConfigError {
    ConfigError::InvalidValue {
        key,
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

/// Reads a float that may be written as a fraction such as `1/12`.
fn parse_real(key: &'static str, v: &str) -> Result<f64, ConfigError> {
    let parsed = match v.split_once('/') {
        Some((n, d)) => n
            .trim()
            .parse::<f64>()
            .and_then(|n| d.trim().parse::<f64>().map(|d| n / d)),
        None => v.parse::<f64>(),
    };
    parsed.map_err(|e| invalid(key, v, &e.to_string()))
}

fn real(e: &Entries, key: &'static str) -> Result<Option<f64>, ConfigError> {
    e.get(key).map(|v| parse_real(key, v)).transpose()
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        };
        let k = k.trim();
        let key = REQUIRED
            .iter()
            .chain(OPTIONAL.iter())
            .find(|known| **known == k)
            .copied()
            .ok_or_else(|| ConfigError::UnknownKey {
                line: i + 1,
                key: k.to_string(),
            })?;
        if map.insert(key, v.trim().to_string()).is_some() {
            return Err(ConfigError::DuplicateKey {
                line: i + 1,
                key: k.to_string(),
            });
        }
    }
    let missing: Vec<_> = REQUIRED.iter().copied().filter(|k| !map.contains_key(k)).collect();
    if !missing.is_empty() {
        return Err(ConfigError::MissingKeys(missing));
    }
    let e = Entries(map);

    let lambda1 = real(&e, "lambda1")?.unwrap_or_default();
    let lambda2 = real(&e, "lambda2")?.unwrap_or_default();
    let eta = real(&e, "eta")?.unwrap_or_default();
    let steps: usize = e.parse("steps")?.unwrap_or_default();
    if steps == 0 {
        return Err(invalid("steps", e.get("steps").unwrap_or(""), "must be positive"));
    }
    let seed: u64 = e.parse("seed")?.unwrap_or(0);

    let init_name = e.get("init").unwrap_or("");
    let explicit = [real(&e, "alpha")?, real(&e, "beta1")?, real(&e, "beta2")?];
    let init = if init_name == "explicit" {
        match explicit {
            [Some(a), Some(b1), Some(b2)] => Init::Explicit(Params::new(a, b1, b2)),
            _ => {
                let missing = ["alpha", "beta1", "beta2"]
                    .into_iter()
                    .zip(explicit)
                    .filter(|(_, v)| v.is_none())
                    .map(|(k, _)| k)
                    .collect();
                return Err(ConfigError::MissingKeys(missing));
            }
        }
    } else {
        let sampler = Sampler::parse(init_name).ok_or_else(|| {
            invalid(
                "init",
                init_name,
                "expected explicit, x, x_tilde, x_balanced, y or m_dagger",
            )
        })?;
        if explicit.iter().any(Option::is_some) {
            return Err(invalid("init", init_name, "alpha/beta1/beta2 need `init = explicit`"));
        }
        Init::Sample { sampler, seed }
    };

    let mode = match e.get("mode").unwrap_or("gd") {
        "gd" => Mode::Gd,
        "gd-unclipped" => Mode::GdUnclipped,
        "gf" => Mode::Gf,
        "constrained" => Mode::Constrained,
        other => return Err(invalid("mode", other, "expected gd, gd-unclipped, gf or constrained")),
    };

    let mut outputs = Vec::new();
    for o in e.get("outputs").unwrap_or("csv, svg, report").split(',') {
        let o = o.trim();
        let out = match o {
            "csv" => Output::Csv,
            "svg" => Output::Svg,
            "report" => Output::Report,
            "" => continue,
            other => return Err(invalid("outputs", other, "expected csv, svg or report")),
        };
        if !outputs.contains(&out) {
            outputs.push(out);
        }
    }
    outputs.sort();

    let allow_out_of_theory = match e.get("allow_out_of_theory").unwrap_or("false") {
        "true" => true,
        "false" => false,
        other => return Err(invalid("allow_out_of_theory", other, "expected true or false")),
    };
    let clip_variant = parse_clip_variant(e.get("clip_variant").unwrap_or("cap"))
        .map_err(|v| invalid("clip_variant", &v, "expected cap or printed-max"))?;

    let default_profile = match (mode, init) {
        (Mode::Constrained, _) => Profile::MDagger,
        (_, Init::Sample { sampler, .. }) => match sampler {
            Sampler::X | Sampler::XBalanced => Profile::X,
            Sampler::XTilde => Profile::XTilde,
            Sampler::Y => Profile::Y,
            Sampler::MDagger => Profile::MDagger,
        },
        (_, Init::Explicit(_)) => Profile::X,
    };
    let profile = match e.get("profile") {
        None => default_profile,
        Some("x") => Profile::X,
        Some("x_tilde") => Profile::XTilde,
        Some("y") => Profile::Y,
        Some("m_dagger") => Profile::MDagger,
        Some("none") => Profile::None,
        Some(other) => return Err(invalid("profile", other, "expected x, x_tilde, y, m_dagger or none")),
    };

    let product_bound = real(&e, "product_bound")?.unwrap_or(regions::DEFAULT_PRODUCT_BOUND);
    if !(product_bound > 0.0 && product_bound.is_finite()) {
        return Err(invalid(
            "product_bound",
            e.get("product_bound").unwrap_or(""),
            "must be positive",
        ));
    }
    let figure = e
        .get("figure")
        .map(|f| Figure::parse(f).ok_or_else(|| invalid("figure", f, "expected figure1..figure5 or figure7")))
        .transpose()?;
    let sweep_eta = e
        .get("sweep_eta")
        .map(|v| {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| parse_real("sweep_eta", s))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?
        .unwrap_or_default();
    let sweep_seed = e.list("sweep_seed")?;

    let cfg = RunConfig {
        name: e.get("name").unwrap_or("").to_string(),
        lambda1,
        lambda2,
        eta,
        steps,
        init,
        mode,
        outputs,
        allow_out_of_theory,
        clip_variant,
        profile,
        product_bound,
        figure,
        sweep_eta,
        sweep_seed,
        gf_every: e.parse("gf_every")?.unwrap_or(100),
        threads: e.parse("threads")?.unwrap_or(0),
    };
    cfg.model()?;
    for &eta in &cfg.sweep_eta {
        cfg.model_at(eta)?;
    }
    Ok(cfg)
}

pub fn parse_clip_variant(s: &str) -> Result<ClipVariant, String> {
    match s {
        "cap" => Ok(ClipVariant::Cap),
        "printed-max" => Ok(ClipVariant::PrintedMax),
        other => Err(other.to_string()),
    }
}

impl RunConfig {
    /// Validated model constants at the configured learning rate.
    pub fn model(&self) -> Result<ModelConfig, ConfigError> {
        self.model_at(self.eta)
    }

    pub fn model_at(&self, eta: f64) -> Result<ModelConfig, ConfigError> {
        let built = if self.allow_out_of_theory {
            ModelConfig::out_of_theory(self.lambda1, self.lambda2, eta)
        } else {
            ModelConfig::new(self.lambda1, self.lambda2, eta)
        };
        built.map_err(|e| {
            let hint = if self.allow_out_of_theory {
                ""
            } else {
                " (set allow_out_of_theory = true to override)"
            };
            ConfigError::Domain(format!("eta = {eta}: {e}{hint}"))
        })
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self, ConfigError> {
        let cfg = Self { eta, ..self.clone() };
        cfg.model()?;
        Ok(cfg)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let init = match self.init {
            Init::Sample { sampler, .. } => Init::Sample { sampler, seed },
            explicit => explicit,
        };
        Self { init, ..self.clone() }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.init {
            Init::Sample { seed, .. } => Some(seed),
            Init::Explicit(_) => None,
        }
    }

    pub fn wants(&self, out: Output) -> bool {
        self.outputs.contains(&out)
    }

    /// The `key = value` text that parses back to this configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        if !self.name.is_empty() {
            put("name", self.name.clone());
        }
        put("lambda1", format!("{:?}", self.lambda1));
        put("lambda2", format!("{:?}", self.lambda2));
        put("eta", format!("{:?}", self.eta));
        put("steps", self.steps.to_string());
        match self.init {
            Init::Explicit(p) => {
                put("init", "explicit".into());
                put("alpha", format!("{:?}", p.alpha));
                put("beta1", format!("{:?}", p.beta1));
                put("beta2", format!("{:?}", p.beta2));
            }
            Init::Sample { sampler, seed } => {
                put("init", sampler.name().into());
                put("seed", seed.to_string());
            }
        }
        put("mode", self.mode.name().into());
        let outs: Vec<&str> = self
            .outputs
            .iter()
            .map(|o| match o {
                Output::Csv => "csv",
                Output::Svg => "svg",
                Output::Report => "report",
            })
            .collect();
        put("outputs", outs.join(", "));
        put("allow_out_of_theory", self.allow_out_of_theory.to_string());
        put(
            "clip_variant",
            match self.clip_variant {
                ClipVariant::Cap => "cap",
                ClipVariant::PrintedMax => "printed-max",
            }
            .into(),
        );
        put("profile", self.profile.name().into());
        put("product_bound", format!("{:?}", self.product_bound));
        put("gf_every", self.gf_every.to_string());
        put("threads", self.threads.to_string());
        s
    }
}

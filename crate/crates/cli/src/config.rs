//! `key = value` run configuration: parsing with full error accumulation,
//! typed extraction with range checks, and the shared model/domain builders.
//!
//! Every diagnostic carries the source line number, and a file is processed
//! to the end so one pass reports every problem, not just the first.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use clk_core::geometry::{Domain, Shape, WallTemperature};
use clk_core::wall::{AccommodationPair, BoundaryModel};

/// All problems found in one configuration, each pre-formatted with its
/// line number.
#[derive(Debug)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Raw `key = value` entries with their line numbers. Line 0 marks values
/// injected from the command line.
#[derive(Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
    /// Raw file text, hashed into the manifest.
    pub source: String,
}

impl RawConfig {
    /// Parses configuration text. Syntax problems (malformed lines,
    /// duplicate keys) are collected; well-formed entries are kept so typed
    /// extraction can continue and report further errors in the same run.
    pub fn parse(text: &str) -> (RawConfig, Vec<String>) {
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {line_no}: expected `key = value`, got `{line}`"));
                continue;
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                errors.push(format!("line {line_no}: empty key"));
                continue;
            }
            if let Some((_, first)) = entries.get(&key) {
                errors.push(format!(
                    "line {line_no}: duplicate key `{key}` (first set at line {first})"
                ));
                continue;
            }
            entries.insert(key, (value, line_no));
        }
        (RawConfig { entries, source: text.to_string() }, errors)
    }

    pub fn load(path: &Path) -> Result<(RawConfig, Vec<String>), std::io::Error> {
        let text = fs::read_to_string(path)?;
        Ok(RawConfig::parse(&text))
    }

    pub fn empty() -> RawConfig {
        RawConfig::default()
    }

    /// Lenient numeric peek used before typed extraction (seed resolution
    /// and the manifest); a malformed value is reported by the typed pass.
    pub fn peek_u64(&self, key: &str) -> Option<u64> {
        self.entries.get(key).and_then(|(v, _)| v.parse().ok())
    }
}

/// Typed view over a [`RawConfig`]. Each getter falls back to the default on
/// a malformed value after recording the error, so a single pass surfaces
/// every diagnostic. `finish` rejects keys no getter asked for.
pub struct Extractor<'a> {
    raw: &'a RawConfig,
    used: Vec<String>,
    errors: Vec<String>,
}

impl<'a> Extractor<'a> {
    pub fn new(raw: &'a RawConfig, prior_errors: Vec<String>) -> Self {
        Extractor { raw, used: Vec::new(), errors: prior_errors }
    }

    fn entry(&mut self, key: &str) -> Option<(&'a str, usize)> {
        self.used.push(key.to_string());
        self.raw.entries.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    pub fn has(&self, key: &str) -> bool {
        self.raw.entries.contains_key(key)
    }

    pub fn error(&mut self, message: String) {
        self.errors.push(message);
    }

    pub fn f64(&mut self, key: &str, default: f64) -> f64 {
        match self.entry(key) {
            None => default,
            Some((v, line)) => match v.parse::<f64>() {
                Ok(x) => x,
                Err(_) => {
                    self.errors.push(format!("line {line}: key `{key}`: expected a number, got `{v}`"));
                    default
                }
            },
        }
    }

    /// Float with an interval check; `bound` describes the admissible range
    /// in the diagnostic (for example "the open interval (0, 2)").
    pub fn f64_in(&mut self, key: &str, default: f64, ok: impl Fn(f64) -> bool, bound: &str) -> f64 {
        match self.entry(key) {
            None => default,
            Some((v, line)) => match v.parse::<f64>() {
                Ok(x) if ok(x) => x,
                Ok(x) => {
                    self.errors.push(format!("line {line}: key `{key}` = {x} must lie in {bound}"));
                    default
                }
                Err(_) => {
                    self.errors.push(format!("line {line}: key `{key}`: expected a number, got `{v}`"));
                    default
                }
            },
        }
    }

    pub fn u64(&mut self, key: &str, default: u64) -> u64 {
        match self.entry(key) {
            None => default,
            Some((v, line)) => match v.parse::<u64>() {
                Ok(x) => x,
                Err(_) => {
                    self.errors.push(format!(
                        "line {line}: key `{key}`: expected a non-negative integer, got `{v}`"
                    ));
                    default
                }
            },
        }
    }

    pub fn usize(&mut self, key: &str, default: usize) -> usize {
        self.u64(key, default as u64) as usize
    }

    /// Word from a closed vocabulary.
    pub fn word(&mut self, key: &str, default: &str, allowed: &[&str]) -> String {
        match self.entry(key) {
            None => default.to_string(),
            Some((v, line)) => {
                if allowed.contains(&v) {
                    v.to_string()
                } else {
                    self.errors.push(format!(
                        "line {line}: key `{key}`: `{v}` is not one of {}",
                        allowed.join(", ")
                    ));
                    default.to_string()
                }
            }
        }
    }

    /// Boundary model from the shared key vocabulary: `model`, `r_perp`,
    /// `r_par`, `c`. Defaults reproduce `fallback` when no keys are present.
    pub fn model(&mut self, fallback: ModelKind) -> BoundaryModel {
        let kind = self.word(
            "model",
            fallback.name(),
            &["cl", "diffuse", "specular", "bounce-back", "maxwell"],
        );
        let (def_perp, def_par, def_c) = fallback.defaults();
        let r_perp = self.f64_in("r_perp", def_perp, |x| x > 0.0 && x <= 1.0, "the half-open interval (0, 1]");
        let r_par = self.f64_in("r_par", def_par, |x| x > 0.0 && x < 2.0, "the open interval (0, 2)");
        let c = self.f64_in("c", def_c, |x| (0.0..=1.0).contains(&x), "the closed interval [0, 1]");
        match kind.as_str() {
            "cl" => match AccommodationPair::new(r_perp, r_par) {
                Ok(pair) => BoundaryModel::Cl(pair),
                Err(e) => {
                    self.errors.push(format!("accommodation pair rejected: {e}"));
                    BoundaryModel::Diffuse
                }
            },
            "diffuse" => BoundaryModel::Diffuse,
            "specular" => BoundaryModel::Specular,
            "bounce-back" => BoundaryModel::BounceBack,
            _ => match BoundaryModel::maxwell(c) {
                Ok(m) => m,
                Err(e) => {
                    self.errors.push(format!("mixture weight rejected: {e}"));
                    BoundaryModel::Diffuse
                }
            },
        }
    }

    /// Domain from `domain`, `radius`, `width`, `wrap` and the wall
    /// temperature keys: constant `Tw`, slab faces `Tw_lower`/`Tw_upper`, or
    /// angular `Tw_base`/`Tw_amplitude`. The three temperature styles are
    /// mutually exclusive.
    pub fn domain(&mut self) -> Domain {
        let kind = self.word("domain", "ball", &["ball", "disk", "slab"]);
        let radius = self.f64_in("radius", 1.0, |x| x > 0.0, "positive reals");
        let width = self.f64_in("width", 1.0, |x| x > 0.0, "positive reals");
        let wrap = self.f64_in("wrap", 1.0, |x| x > 0.0, "positive reals");

        let constant = self.has("Tw");
        let faces = self.has("Tw_lower") || self.has("Tw_upper");
        let angular = self.has("Tw_base") || self.has("Tw_amplitude");
        let tw = self.f64_in("Tw", 1.0, |x| x > 0.0, "positive reals");
        let lower = self.f64_in("Tw_lower", 1.0, |x| x > 0.0, "positive reals");
        let upper = self.f64_in("Tw_upper", 1.0, |x| x > 0.0, "positive reals");
        let base = self.f64_in("Tw_base", 1.0, |x| x > 0.0, "positive reals");
        let amplitude = self.f64("Tw_amplitude", 0.0);
        if (constant && (faces || angular)) || (faces && angular) {
            self.error(
                "wall temperature over-specified: use only one of `Tw`, `Tw_lower`/`Tw_upper`, \
                 `Tw_base`/`Tw_amplitude`"
                    .to_string(),
            );
        }
        let temperature = if faces {
            WallTemperature::Faces { lower, upper }
        } else if angular {
            WallTemperature::Angular { base, amplitude }
        } else {
            WallTemperature::Constant(tw)
        };
        let shape = match kind.as_str() {
            "ball" => Shape::Ball { radius },
            "disk" => Shape::Disk { radius },
            _ => Shape::Slab { width, wrap },
        };
        match Domain::new(shape, temperature) {
            Ok(d) => d,
            Err(e) => {
                self.error(format!("domain rejected: {e}"));
                Domain::ball(1.0, 1.0).expect("unit ball")
            }
        }
    }

    /// Rejects unread keys and returns every accumulated diagnostic.
    pub fn finish(mut self, command: &str) -> Result<(), ConfigErrors> {
        for (key, (_, line)) in &self.raw.entries {
            if !self.used.iter().any(|u| u == key) {
                self.errors.push(format!("line {line}: unknown key `{key}` for {command}"));
            }
        }
        if self.errors.is_empty() {
            Ok(())
        } else {
            self.errors.sort_by_key(|e| {
                e.strip_prefix("line ")
                    .and_then(|r| r.split(':').next())
                    .and_then(|n| n.parse::<usize>().ok())
                    .unwrap_or(0)
            });
            Err(ConfigErrors(self.errors))
        }
    }
}

/// Fallback boundary model when the config names none.
#[derive(Debug, Clone, Copy)]
pub enum ModelKind {
    Diffuse,
    Cl { r_perp: f64, r_par: f64 },
    Maxwell { c: f64 },
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Diffuse => "diffuse",
            ModelKind::Cl { .. } => "cl",
            ModelKind::Maxwell { .. } => "maxwell",
        }
    }

    fn defaults(self) -> (f64, f64, f64) {
        match self {
            ModelKind::Diffuse => (1.0, 1.0, 1.0),
            ModelKind::Cl { r_perp, r_par } => (r_perp, r_par, 1.0),
            ModelKind::Maxwell { c } => (1.0, 1.0, c),
        }
    }
}

/// Resolved seed: the `CLK_SEED` environment variable wins over the
/// `--seed` flag, which wins over the config key, which wins over the
/// built-in default.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, String> {
    if let Ok(text) = std::env::var("CLK_SEED") {
        let parsed = if let Some(hex) = text.strip_prefix("0x") {
            u64::from_str_radix(hex, 16)
        } else {
            text.parse::<u64>()
        };
        return parsed.map_err(|_| format!("CLK_SEED: expected an unsigned integer, got `{text}`"));
    }
    Ok(flag.or(config).unwrap_or(DEFAULT_SEED))
}

pub const DEFAULT_SEED: u64 = 0x5EED_C0DE;

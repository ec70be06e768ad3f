//! Flat sectioned run configuration: `[section]` headers with
//! `key = value` lines, `#` comments, no nesting. Hand-editable and
//! diff-friendly; every numeric field is validated against the solver
//! preconditions before any solve starts.
//!
//! ```text
//! [domain]
//! shape = disk
//! radius = 0.78
//!
//! [curvature]
//! k = 1
//! l = 0
//!
//! [solve]
//! sigma = 0.6
//! epsilon_ladder = 0.04, 0.02, 0.01
//! grid_h = 0.015625
//! coupling = 1.0        # a fixed M, or `inverse_epsilon` for M = 1/epsilon
//!
//! [output]
//! dir = out/disk
//! ```

use hypcurv::grid::Shape;
use hypcurv::solver::{Coupling, SolveSchedule, SolverError};
use hypcurv::symfunc::CurvatureFunctionSpec;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse { line: usize, message: String },
    Field { section: String, key: String, message: String },
    MissingSection { section: String },
    MissingKey { section: String, key: String },
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigError::Parse { line, message } => {
                write!(f, "config line {line}: {message}")
            }
            ConfigError::Field { section, key, message } => {
                write!(f, "config field [{section}] {key}: {message}")
            }
            ConfigError::MissingSection { section } => {
                write!(f, "config is missing the [{section}] section")
            }
            ConfigError::MissingKey { section, key } => {
                write!(f, "config is missing [{section}] {key}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

struct Sections {
    map: BTreeMap<String, BTreeMap<String, String>>,
}

impl Sections {
    fn section(&self, name: &str) -> Result<&BTreeMap<String, String>, ConfigError> {
        self.map
            .get(name)
            .ok_or_else(|| ConfigError::MissingSection { section: name.to_string() })
    }

    fn required(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.section(section)?
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| ConfigError::MissingKey {
                section: section.to_string(),
                key: key.to_string(),
            })
    }

    fn optional(&self, section: &str, key: &str) -> Option<&str> {
        self.map.get(section).and_then(|s| s.get(key)).map(|s| s.as_str())
    }
}

fn parse_sections(text: &str) -> Result<Sections, ConfigError> {
    let mut map: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        if let Some(name) = stripped.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(ConfigError::Parse {
                line,
                message: "unterminated section header".to_string(),
            })?;
            current = Some(name.trim().to_string());
            map.entry(name.trim().to_string()).or_default();
            continue;
        }
        let (key, value) = stripped.split_once('=').ok_or(ConfigError::Parse {
            line,
            message: format!("expected `key = value`, got `{stripped}`"),
        })?;
        let section = current.clone().ok_or(ConfigError::Parse {
            line,
            message: "key outside of any [section]".to_string(),
        })?;
        let key = key.trim().to_string();
        let entry = map.entry(section.clone()).or_default();
        if entry.contains_key(&key) {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key `{key}` in [{section}]"),
            });
        }
        entry.insert(key, value.trim().to_string());
    }
    Ok(Sections { map })
}

fn field_err(section: &str, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        section: section.to_string(),
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_f64(s: &Sections, section: &str, key: &str) -> Result<f64, ConfigError> {
    let raw = s.required(section, key)?;
    raw.parse::<f64>()
        .map_err(|_| field_err(section, key, format!("`{raw}` is not a number")))
}

fn parse_f64_opt(
    s: &Sections,
    section: &str,
    key: &str,
    default: f64,
) -> Result<f64, ConfigError> {
    match s.optional(section, key) {
        None => Ok(default),
        Some(raw) => raw
            .parse::<f64>()
            .map_err(|_| field_err(section, key, format!("`{raw}` is not a number"))),
    }
}

fn parse_usize_opt(
    s: &Sections,
    section: &str,
    key: &str,
    default: usize,
) -> Result<usize, ConfigError> {
    match s.optional(section, key) {
        None => Ok(default),
        Some(raw) => raw
            .parse::<usize>()
            .map_err(|_| field_err(section, key, format!("`{raw}` is not an integer"))),
    }
}

fn parse_bool_opt(
    s: &Sections,
    section: &str,
    key: &str,
    default: bool,
) -> Result<bool, ConfigError> {
    match s.optional(section, key) {
        None => Ok(default),
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(raw) => Err(field_err(section, key, format!("`{raw}` is not true/false"))),
    }
}

/// A validated run configuration.
#[derive(Debug)]
pub struct RunConfig {
    pub shape: Shape,
    pub schedule: SolveSchedule,
    pub grid_h: f64,
    pub out_dir: PathBuf,
    pub write_solutions: bool,
    pub write_svg: bool,
    pub config_hash: String,
}

/// FNV-1a over the raw config bytes; embedded in reports so exports can
/// be traced back to their exact configuration.
pub fn fnv1a_hash(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut s = String::new();
    let _ = write!(s, "{h:016x}");
    s
}

fn map_schedule_err(e: SolverError) -> ConfigError {
    field_err("solve", "schedule", e.to_string())
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
    let config_hash = fnv1a_hash(text.as_bytes());
    let s = parse_sections(&text)?;

    // [domain]
    let shape = match s.required("domain", "shape")? {
        "disk" => Shape::Disk { r: parse_f64(&s, "domain", "radius")? },
        "annulus" => Shape::Annulus {
            r_inner: parse_f64(&s, "domain", "r_inner")?,
            r_outer: parse_f64(&s, "domain", "r_outer")?,
        },
        "ellipse" => Shape::Ellipse {
            a: parse_f64(&s, "domain", "semi_a")?,
            b: parse_f64(&s, "domain", "semi_b")?,
        },
        "blob" => Shape::Blob {
            r0: parse_f64(&s, "domain", "r0")?,
            amplitude: parse_f64(&s, "domain", "amplitude")?,
            lobes: parse_usize_opt(&s, "domain", "lobes", 3)? as u32,
            phase: parse_f64_opt(&s, "domain", "phase", 0.0)?,
        },
        other => {
            return Err(field_err(
                "domain",
                "shape",
                format!("unknown shape `{other}` (disk | annulus | ellipse | blob)"),
            ))
        }
    };

    // [curvature]
    let k = parse_usize_opt(&s, "curvature", "k", usize::MAX)?;
    let l = parse_usize_opt(&s, "curvature", "l", usize::MAX)?;
    if k == usize::MAX {
        return Err(ConfigError::MissingKey {
            section: "curvature".into(),
            key: "k".into(),
        });
    }
    if l == usize::MAX {
        return Err(ConfigError::MissingKey {
            section: "curvature".into(),
            key: "l".into(),
        });
    }
    let spec = CurvatureFunctionSpec::new(2, k, l)
        .map_err(|e| field_err("curvature", "k/l", e.to_string()))?;

    // [solve]
    let sigma = parse_f64(&s, "solve", "sigma")?;
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(field_err(
            "solve",
            "sigma",
            format!("sigma must lie in (0, 1), got {sigma}"),
        ));
    }
    let grid_h = parse_f64(&s, "solve", "grid_h")?;
    if !(grid_h > 0.0) {
        return Err(field_err("solve", "grid_h", "grid spacing must be positive"));
    }
    let ladder_raw = s.required("solve", "epsilon_ladder")?;
    let mut epsilon_ladder = Vec::new();
    for tok in ladder_raw.split(|c: char| c == ',' || c.is_whitespace()) {
        if tok.is_empty() {
            continue;
        }
        let v: f64 = tok.parse().map_err(|_| {
            field_err("solve", "epsilon_ladder", format!("`{tok}` is not a number"))
        })?;
        epsilon_ladder.push(v);
    }
    if epsilon_ladder.is_empty() {
        return Err(field_err("solve", "epsilon_ladder", "must list at least one epsilon"));
    }

    let mut schedule = SolveSchedule::new(sigma, spec).map_err(map_schedule_err)?;
    schedule.epsilon_ladder = epsilon_ladder;
    schedule.newton_tol = parse_f64_opt(&s, "solve", "newton_tol", schedule.newton_tol)?;
    schedule.monotone_tol =
        parse_f64_opt(&s, "solve", "monotone_tol", schedule.monotone_tol)?;
    schedule.continuity_steps =
        parse_usize_opt(&s, "solve", "continuity_steps", schedule.continuity_steps)?;
    schedule.max_newton = parse_usize_opt(&s, "solve", "max_newton", schedule.max_newton)?;
    schedule.max_outer = parse_usize_opt(&s, "solve", "max_outer", schedule.max_outer)?;
    schedule.damping = parse_f64_opt(&s, "solve", "damping", schedule.damping)?;
    schedule.coupling = match s.optional("solve", "coupling") {
        None => Coupling::Fixed(1.0),
        Some("inverse_epsilon") => Coupling::InverseEpsilon,
        Some(raw) => {
            let m: f64 = raw.parse().map_err(|_| {
                field_err(
                    "solve",
                    "coupling",
                    format!("`{raw}` is neither a number nor `inverse_epsilon`"),
                )
            })?;
            Coupling::Fixed(m)
        }
    };
    schedule.validate().map_err(map_schedule_err)?;

    // [output]
    let out_dir = PathBuf::from(
        s.optional("output", "dir").unwrap_or("out").to_string(),
    );
    let write_solutions = parse_bool_opt(&s, "output", "solutions", true)?;
    let write_svg = parse_bool_opt(&s, "output", "svg", true)?;

    Ok(RunConfig {
        shape,
        schedule,
        grid_h,
        out_dir,
        write_solutions,
        write_svg,
        config_hash,
    })
}

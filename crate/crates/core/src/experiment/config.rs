//! Flat typed key-value experiment configuration.
//!
//! Recognized keys, all optional except `kind`:
//!
//! ```text
//! kind            passivity | scaling | green_kubo | measure | drude
//! dimension       1..3                     (default 1)
//! sites           per-axis site count ≥ 2; odd when dimension > 1
//!                                          (default 32)
//! boundary        open | periodic          (default open)
//! field_lo        first-axis coordinate, 0-based  (default full span)
//! field_hi        first-axis coordinate, 0-based  (default full span)
//! lambda          disorder amplitude ≥ 0   (default 1.0)
//! seed_base       u64                      (default 1)
//! n_realizations  ≥ 1                      (default 1)
//! beta            > 0                      (default 1.0)
//! mu              chemical potential       (default 0.0)
//! waveform        bump_sin | poly_sin      (default bump_sin)
//! smoothness      poly envelope order ≥ 2  (default 3)
//! process_start   s                        (default 0.0)
//! process_length  T > 0                    (default 10.0)
//! omega           carrier frequency > 0    (default 1.0)
//! eta             drive strength ≥ 0       (default 0.05)
//! eta_list        comma list of strengths  (scaling; default 8 points
//!                                           log-spaced in [1e-3, 1e-1])
//! omega_min/_max  passivity draw range     (default 0.1 / 3.0)
//! eta_min/_max    passivity draw range     (default 0.01 / 0.2)
//! length_min/_max passivity draw range     (default 5.0 / 20.0)
//! dt              integrator step > 0      (default from step rule)
//! dt_refinement   step-rule divisor ≥ 1    (default 8.0)
//! dnu             histogram bin width > 0  (default level spacing / 4)
//! eps0            zero-frequency radius > 0 (default 1e-3·‖h‖)
//! out_dir         output directory         (default "runs")
//! ```

use crate::dynamics::WaveformFamily;
use crate::lattice::BoundaryCondition;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Passivity,
    Scaling,
    GreenKubo,
    Measure,
    Drude,
}

impl ExperimentKind {
    pub fn id(&self) -> &'static str {
        match self {
            ExperimentKind::Passivity => "passivity",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::GreenKubo => "green_kubo",
            ExperimentKind::Measure => "measure",
            ExperimentKind::Drude => "drude",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxConfig {
    pub dimension: usize,
    pub sites: usize,
    pub boundary: BoundaryCondition,
    pub field_span: Option<(i64, i64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessConfig {
    pub family: WaveformFamily,
    pub smoothness: u32,
    pub start: f64,
    pub length: f64,
    pub omega: f64,
    pub eta: f64,
    pub eta_list: Vec<f64>,
    pub omega_range: (f64, f64),
    pub eta_range: (f64, f64),
    pub length_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub box_: BoxConfig,
    pub lambda: f64,
    pub seed_base: u64,
    pub n_realizations: usize,
    pub beta: f64,
    pub mu: f64,
    pub process: ProcessConfig,
    pub dt: Option<f64>,
    pub dt_refinement: f64,
    pub dnu: Option<f64>,
    pub eps0: Option<f64>,
    pub out_dir: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    UnknownKey { line: usize, key: String },
    DuplicateKey { key: String, first_line: usize, second_line: usize },
    BadValue { line: usize, key: String, value: String, expected: String },
    OutOfRange { line: usize, key: String, value: String, range: String },
    MissingKey { key: String },
    MalformedLine { line: usize, text: String },
    Inconsistent { message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnknownKey { line, key } => {
                write!(f, "line {line}: unknown key {key:?}")
            }
            ConfigError::DuplicateKey {
                key,
                first_line,
                second_line,
            } => write!(
                f,
                "key {key:?} given twice, lines {first_line} and {second_line}"
            ),
            ConfigError::BadValue {
                line,
                key,
                value,
                expected,
            } => write!(
                f,
                "line {line}: {key} = {value:?} is not {expected}"
            ),
            ConfigError::OutOfRange {
                line,
                key,
                value,
                range,
            } => write!(f, "line {line}: {key} = {value} outside {range}"),
            ConfigError::MissingKey { key } => write!(f, "required key {key:?} missing"),
            ConfigError::MalformedLine { line, text } => {
                write!(f, "line {line}: expected `key = value`, got {text:?}")
            }
            ConfigError::Inconsistent { message } => write!(f, "{message}"),
        }
    }
}

/// All problems found in a config, not just the first.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors {
    pub errors: Vec<ConfigError>,
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const KNOWN_KEYS: &[&str] = &[
    "kind",
    "dimension",
    "sites",
    "boundary",
    "field_lo",
    "field_hi",
    "lambda",
    "seed_base",
    "n_realizations",
    "beta",
    "mu",
    "waveform",
    "smoothness",
    "process_start",
    "process_length",
    "omega",
    "eta",
    "eta_list",
    "omega_min",
    "omega_max",
    "eta_min",
    "eta_max",
    "length_min",
    "length_max",
    "dt",
    "dt_refinement",
    "dnu",
    "eps0",
    "out_dir",
];

struct Parser {
    values: BTreeMap<String, (usize, String)>,
    errors: Vec<ConfigError>,
}

impl Parser {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.values.remove(key)
    }

    fn typed<T: std::str::FromStr>(&mut self, key: &str, expected: &str) -> Option<(usize, T)> {
        let (line, raw) = self.take(key)?;
        match raw.parse::<T>() {
            Ok(v) => Some((line, v)),
            Err(_) => {
                self.errors.push(ConfigError::BadValue {
                    line,
                    key: key.into(),
                    value: raw,
                    expected: expected.into(),
                });
                None
            }
        }
    }

    fn ranged_f64(
        &mut self,
        key: &str,
        default: f64,
        range: &str,
        ok: impl Fn(f64) -> bool,
    ) -> f64 {
        match self.typed::<f64>(key, "a real number") {
            Some((line, v)) => {
                if ok(v) {
                    v
                } else {
                    self.errors.push(ConfigError::OutOfRange {
                        line,
                        key: key.into(),
                        value: v.to_string(),
                        range: range.into(),
                    });
                    default
                }
            }
            None => default,
        }
    }

    fn optional_f64(&mut self, key: &str, range: &str, ok: impl Fn(f64) -> bool) -> Option<f64> {
        match self.typed::<f64>(key, "a real number") {
            Some((line, v)) => {
                if ok(v) {
                    Some(v)
                } else {
                    self.errors.push(ConfigError::OutOfRange {
                        line,
                        key: key.into(),
                        value: v.to_string(),
                        range: range.into(),
                    });
                    None
                }
            }
            None => None,
        }
    }
}

/// Parses and validates the flat key-value format, collecting every
/// error. On success the returned config has all defaults filled.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let mut values: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut errors = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(ConfigError::MalformedLine {
                line: line_no,
                text: raw_line.trim().into(),
            });
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            errors.push(ConfigError::UnknownKey {
                line: line_no,
                key,
            });
            continue;
        }
        if let Some(&(first_line, _)) = values.get(&key) {
            errors.push(ConfigError::DuplicateKey {
                key,
                first_line,
                second_line: line_no,
            });
            continue;
        }
        values.insert(key, (line_no, value));
    }

    let mut p = Parser { values, errors };

    let kind = match p.take("kind") {
        Some((line, raw)) => match raw.as_str() {
            "passivity" => Some(ExperimentKind::Passivity),
            "scaling" => Some(ExperimentKind::Scaling),
            "green_kubo" => Some(ExperimentKind::GreenKubo),
            "measure" => Some(ExperimentKind::Measure),
            "drude" => Some(ExperimentKind::Drude),
            _ => {
                p.errors.push(ConfigError::BadValue {
                    line,
                    key: "kind".into(),
                    value: raw,
                    expected: "one of passivity, scaling, green_kubo, measure, drude".into(),
                });
                None
            }
        },
        None => {
            p.errors.push(ConfigError::MissingKey { key: "kind".into() });
            None
        }
    };

    let dimension = match p.typed::<usize>("dimension", "an integer") {
        Some((line, d)) if !(1..=3).contains(&d) => {
            p.errors.push(ConfigError::OutOfRange {
                line,
                key: "dimension".into(),
                value: d.to_string(),
                range: "[1, 3]".into(),
            });
            1
        }
        Some((_, d)) => d,
        None => 1,
    };

    let sites = match p.typed::<usize>("sites", "an integer") {
        Some((line, s)) if s < 2 => {
            p.errors.push(ConfigError::OutOfRange {
                line,
                key: "sites".into(),
                value: s.to_string(),
                range: "[2, ∞)".into(),
            });
            32
        }
        Some((_, s)) => s,
        None => 32,
    };
    if dimension > 1 && sites % 2 == 0 {
        p.errors.push(ConfigError::Inconsistent {
            message: format!(
                "sites = {sites} must be odd when dimension = {dimension} (cube side 2·L+1)"
            ),
        });
    }

    let boundary = match p.take("boundary") {
        Some((line, raw)) => match raw.as_str() {
            "open" => BoundaryCondition::Open,
            "periodic" => BoundaryCondition::Periodic,
            _ => {
                p.errors.push(ConfigError::BadValue {
                    line,
                    key: "boundary".into(),
                    value: raw,
                    expected: "open or periodic".into(),
                });
                BoundaryCondition::Open
            }
        },
        None => BoundaryCondition::Open,
    };

    let field_lo = p.typed::<i64>("field_lo", "an integer").map(|(_, v)| v);
    let field_hi = p.typed::<i64>("field_hi", "an integer").map(|(_, v)| v);
    let field_span = match (field_lo, field_hi) {
        (None, None) => None,
        (Some(lo), Some(hi)) => {
            if lo > hi || lo < 0 || hi >= sites as i64 {
                p.errors.push(ConfigError::Inconsistent {
                    message: format!(
                        "field span [{lo}, {hi}] must satisfy 0 <= lo <= hi < sites"
                    ),
                });
                None
            } else {
                Some((lo, hi))
            }
        }
        _ => {
            p.errors.push(ConfigError::Inconsistent {
                message: "field_lo and field_hi must be given together".into(),
            });
            None
        }
    };

    let lambda = p.ranged_f64("lambda", 1.0, "[0, ∞)", |v| v >= 0.0 && v.is_finite());
    let seed_base = p
        .typed::<u64>("seed_base", "an unsigned integer")
        .map(|(_, v)| v)
        .unwrap_or(1);
    let n_realizations = match p.typed::<usize>("n_realizations", "an integer") {
        Some((line, 0)) => {
            p.errors.push(ConfigError::OutOfRange {
                line,
                key: "n_realizations".into(),
                value: "0".into(),
                range: "[1, ∞)".into(),
            });
            1
        }
        Some((_, n)) => n,
        None => 1,
    };
    let beta = p.ranged_f64("beta", 1.0, "(0, ∞)", |v| v > 0.0 && v.is_finite());
    let mu = p.ranged_f64("mu", 0.0, "finite", |v| v.is_finite());

    let family = match p.take("waveform") {
        Some((line, raw)) => match raw.as_str() {
            "bump_sin" => WaveformFamily::BumpSin,
            "poly_sin" => WaveformFamily::PolySin,
            _ => {
                p.errors.push(ConfigError::BadValue {
                    line,
                    key: "waveform".into(),
                    value: raw,
                    expected: "bump_sin or poly_sin".into(),
                });
                WaveformFamily::BumpSin
            }
        },
        None => WaveformFamily::BumpSin,
    };
    let smoothness = match p.typed::<u32>("smoothness", "an integer") {
        Some((line, k)) if k < 2 => {
            p.errors.push(ConfigError::OutOfRange {
                line,
                key: "smoothness".into(),
                value: k.to_string(),
                range: "[2, ∞)".into(),
            });
            3
        }
        Some((_, k)) => k,
        None => 3,
    };
    let start = p.ranged_f64("process_start", 0.0, "finite", |v| v.is_finite());
    let length = p.ranged_f64("process_length", 10.0, "(0, ∞)", |v| v > 0.0 && v.is_finite());
    let omega = p.ranged_f64("omega", 1.0, "(0, ∞)", |v| v > 0.0 && v.is_finite());
    let eta = p.ranged_f64("eta", 0.05, "[0, ∞)", |v| v >= 0.0 && v.is_finite());

    let eta_list = match p.take("eta_list") {
        Some((line, raw)) => {
            let mut list = Vec::new();
            let mut bad = false;
            for piece in raw.split(',') {
                match piece.trim().parse::<f64>() {
                    Ok(v) if v > 0.0 && v.is_finite() => list.push(v),
                    _ => bad = true,
                }
            }
            if bad || list.len() < 2 {
                p.errors.push(ConfigError::BadValue {
                    line,
                    key: "eta_list".into(),
                    value: raw,
                    expected: "a comma-separated list of at least two positive strengths".into(),
                });
                default_eta_list()
            } else {
                list
            }
        }
        None => default_eta_list(),
    };

    let omega_min = p.ranged_f64("omega_min", 0.1, "(0, ∞)", |v| v > 0.0);
    let omega_max = p.ranged_f64("omega_max", 3.0, "(0, ∞)", |v| v > 0.0);
    let eta_min = p.ranged_f64("eta_min", 0.01, "(0, ∞)", |v| v > 0.0);
    let eta_max = p.ranged_f64("eta_max", 0.2, "(0, ∞)", |v| v > 0.0);
    let length_min = p.ranged_f64("length_min", 5.0, "(0, ∞)", |v| v > 0.0);
    let length_max = p.ranged_f64("length_max", 20.0, "(0, ∞)", |v| v > 0.0);
    for (name, lo, hi) in [
        ("omega", omega_min, omega_max),
        ("eta", eta_min, eta_max),
        ("length", length_min, length_max),
    ] {
        if lo > hi {
            p.errors.push(ConfigError::Inconsistent {
                message: format!("{name}_min = {lo} exceeds {name}_max = {hi}"),
            });
        }
    }

    let dt = p.optional_f64("dt", "(0, ∞)", |v| v > 0.0 && v.is_finite());
    let dt_refinement = p.ranged_f64("dt_refinement", 8.0, "[1, ∞)", |v| v >= 1.0);
    let dnu = p.optional_f64("dnu", "(0, ∞)", |v| v > 0.0 && v.is_finite());
    let eps0 = p.optional_f64("eps0", "(0, ∞)", |v| v > 0.0 && v.is_finite());
    let out_dir = p
        .take("out_dir")
        .map(|(_, v)| v)
        .unwrap_or_else(|| "runs".into());

    if !p.errors.is_empty() {
        return Err(ConfigErrors { errors: p.errors });
    }

    Ok(ExperimentConfig {
        kind: kind.expect("kind validated above"),
        box_: BoxConfig {
            dimension,
            sites,
            boundary,
            field_span,
        },
        lambda,
        seed_base,
        n_realizations,
        beta,
        mu,
        process: ProcessConfig {
            family,
            smoothness,
            start,
            length,
            omega,
            eta,
            eta_list,
            omega_range: (omega_min, omega_max),
            eta_range: (eta_min, eta_max),
            length_range: (length_min, length_max),
        },
        dt,
        dt_refinement,
        dnu,
        eps0,
        out_dir,
    })
}

fn default_eta_list() -> Vec<f64> {
    // 8 log-spaced points in [1e-3, 1e-1]
    (0..8)
        .map(|k| 1e-3 * 100f64.powf(k as f64 / 7.0))
        .collect()
}

impl ExperimentConfig {
    /// Canonical text: every effective key sorted, one per line. The
    /// config hash is derived from exactly this string.
    pub fn canonical_text(&self) -> String {
        let family = match self.process.family {
            WaveformFamily::BumpSin => "bump_sin",
            WaveformFamily::PolySin => "poly_sin",
        };
        let boundary = match self.box_.boundary {
            BoundaryCondition::Open => "open",
            BoundaryCondition::Periodic => "periodic",
        };
        let mut lines: Vec<String> = vec![
            format!("beta = {}", self.beta),
            format!("boundary = {boundary}"),
            format!("dimension = {}", self.box_.dimension),
            format!(
                "dnu = {}",
                self.dnu.map_or("auto".into(), |v: f64| v.to_string())
            ),
            format!(
                "dt = {}",
                self.dt.map_or("auto".into(), |v: f64| v.to_string())
            ),
            format!("dt_refinement = {}", self.dt_refinement),
            format!(
                "eps0 = {}",
                self.eps0.map_or("auto".into(), |v: f64| v.to_string())
            ),
            format!("eta = {}", self.process.eta),
            format!(
                "eta_list = {}",
                self.process
                    .eta_list
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            format!("eta_max = {}", self.process.eta_range.1),
            format!("eta_min = {}", self.process.eta_range.0),
            format!(
                "field_span = {}",
                self.box_
                    .field_span
                    .map_or("full".into(), |(lo, hi)| format!("{lo}:{hi}"))
            ),
            format!("kind = {}", self.kind.id()),
            format!("lambda = {}", self.lambda),
            format!("length_max = {}", self.process.length_range.1),
            format!("length_min = {}", self.process.length_range.0),
            format!("mu = {}", self.mu),
            format!("n_realizations = {}", self.n_realizations),
            format!("omega = {}", self.process.omega),
            format!("omega_max = {}", self.process.omega_range.1),
            format!("omega_min = {}", self.process.omega_range.0),
            format!("process_length = {}", self.process.length),
            format!("process_start = {}", self.process.start),
            format!("seed_base = {}", self.seed_base),
            format!("sites = {}", self.box_.sites),
            format!("smoothness = {}", self.process.smoothness),
            format!("waveform = {family}"),
        ];
        lines.sort();
        lines.join("\n") + "\n"
    }

    /// FNV-1a 64-bit hash of the canonical text, in hex.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.canonical_text().bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("kind = passivity\n").unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Passivity);
        assert_eq!(cfg.box_.sites, 32);
        assert_eq!(cfg.beta, 1.0);
        assert_eq!(cfg.n_realizations, 1);
        assert_eq!(cfg.process.eta_list.len(), 8);
    }

    #[test]
    fn negative_lambda_names_the_key() {
        let err = parse_config("kind = measure\nlambda = -1\n").unwrap_err();
        assert_eq!(err.errors.len(), 1);
        assert!(matches!(
            &err.errors[0],
            ConfigError::OutOfRange { key, .. } if key == "lambda"
        ));
    }

    #[test]
    fn duplicate_key_reports_both_lines() {
        let err = parse_config("kind = measure\nbeta = 1\nbeta = 2\n").unwrap_err();
        assert!(err.errors.iter().any(|e| matches!(
            e,
            ConfigError::DuplicateKey { key, first_line: 2, second_line: 3 } if key == "beta"
        )));
    }

    #[test]
    fn all_errors_are_collected() {
        let err =
            parse_config("kind = nonsense\nlambda = -2\nbeta = 0\nwhatever = 3\n").unwrap_err();
        assert!(err.errors.len() >= 4, "got {:?}", err.errors);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config("kind = measure\ncolor = blue\n").unwrap_err();
        assert!(matches!(
            &err.errors[0],
            ConfigError::UnknownKey { key, .. } if key == "color"
        ));
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = parse_config("# a comment\n\nkind = drude # trailing comment\nsites = 64\n")
            .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Drude);
        assert_eq!(cfg.box_.sites, 64);
    }

    #[test]
    fn even_sites_rejected_in_higher_dimension() {
        let err = parse_config("kind = measure\ndimension = 2\nsites = 4\n").unwrap_err();
        assert!(matches!(&err.errors[0], ConfigError::Inconsistent { .. }));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = parse_config("kind = passivity\n").unwrap();
        let b = parse_config("kind = passivity\n# different text, same meaning\n").unwrap();
        let c = parse_config("kind = passivity\nsites = 16\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn eta_list_parses() {
        let cfg = parse_config("kind = scaling\neta_list = 0.001, 0.01, 0.1\n").unwrap();
        assert_eq!(cfg.process.eta_list, vec![0.001, 0.01, 0.1]);
        let err = parse_config("kind = scaling\neta_list = 0.1, zebra\n").unwrap_err();
        assert!(matches!(&err.errors[0], ConfigError::BadValue { key, .. } if key == "eta_list"));
    }
}

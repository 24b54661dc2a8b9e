//! File formats.
//!
//! Inputs are JSON documents wrapped in `{"schema_version": 1, ...}`; unknown
//! or missing fields are rejected with the JSON path of the offending value.
//! Outputs are CSV tables plus a `metadata.json` describing the run. See
//! `docs/schema.md` for every field and unit.

mod report;

pub use report::{format_sig, save_report, RunMetadata, SUMMARY_COLUMNS};

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dispatch::{DispatchCase, DispatchError, DispatchSolution, Mode, Window};
use crate::horizon::{HorizonConfig, HorizonError, ScenarioTimeline};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: line {line}, column {column}: {msg}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("{origin}: at `{path}`: {msg} (line {line}, column {column})")]
    Schema {
        origin: String,
        path: String,
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("{origin}: unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    Version { origin: String, found: u32 },
    #[error("{origin}: {source}")]
    Case {
        origin: String,
        #[source]
        source: DispatchError,
    },
    #[error("{origin}: {source}")]
    Scenario {
        origin: String,
        #[source]
        source: HorizonError,
    },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub schema_version: u32,
    pub case: DispatchCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub scenario: ScenarioTimeline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub config: HorizonConfig,
}

/// A solved window together with the inputs needed to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub schema_version: u32,
    pub case_name: String,
    pub mode: Mode,
    pub window: Window,
    pub solution: DispatchSolution,
}

/// A validated case and the warnings raised while loading it.
#[derive(Debug, Clone)]
pub struct LoadedCase {
    pub case: DispatchCase,
    pub warnings: Vec<String>,
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Deserializes with path-addressed errors. Syntax errors keep their
/// line/column; type and field errors also carry the JSON path.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = (inner.line(), inner.column());
        if inner.is_syntax() || inner.is_eof() || path == "." {
            IoError::Parse {
                origin: origin.into(),
                line,
                column,
                msg: inner.to_string(),
            }
        } else {
            IoError::Schema {
                origin: origin.into(),
                path,
                line,
                column,
                msg: strip_position(&inner.to_string()),
            }
        }
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// Pretty JSON with keys sorted at every level and a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, IoError> {
    // serde_json's default map is ordered by key, so a detour through
    // `Value` sorts struct fields too.
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn check_version(found: u32, origin: &str) -> Result<(), IoError> {
    if found != SCHEMA_VERSION {
        return Err(IoError::Version {
            origin: origin.into(),
            found,
        });
    }
    Ok(())
}

/// Validates a case, rescaling participation factors that do not sum to
/// one (with a warning).
pub fn validate_case(mut case: DispatchCase, origin: &str) -> Result<LoadedCase, IoError> {
    let wrap = |source| IoError::Case {
        origin: origin.into(),
        source,
    };
    let mut warnings = case.validate().map_err(wrap)?;
    if !warnings.is_empty() {
        case.normalize_beta();
        let rest = case.validate().map_err(wrap)?;
        warnings.extend(rest);
    }
    Ok(LoadedCase { case, warnings })
}

pub fn parse_case(text: &str, origin: &str) -> Result<LoadedCase, IoError> {
    let file: CaseFile = parse_json(text, origin)?;
    check_version(file.schema_version, origin)?;
    validate_case(file.case, origin)
}

pub fn load_case(path: impl AsRef<Path>) -> Result<LoadedCase, IoError> {
    let path = path.as_ref();
    parse_case(&read(path)?, &path.display().to_string())
}

pub fn case_to_string(case: &DispatchCase) -> Result<String, IoError> {
    to_canonical_json(&CaseFile {
        schema_version: SCHEMA_VERSION,
        case: case.clone(),
    })
}

pub fn save_case(case: &DispatchCase, path: impl AsRef<Path>) -> Result<(), IoError> {
    write(path.as_ref(), &case_to_string(case)?)
}

/// Parses a scenario and checks it against the case and configuration.
pub fn parse_scenario(
    text: &str,
    origin: &str,
    case: &DispatchCase,
    cfg: &HorizonConfig,
) -> Result<ScenarioTimeline, IoError> {
    let file: ScenarioFile = parse_json(text, origin)?;
    check_version(file.schema_version, origin)?;
    file.scenario.validate(case, cfg).map_err(|source| IoError::Scenario {
        origin: origin.into(),
        source,
    })?;
    Ok(file.scenario)
}

pub fn load_scenario(
    path: impl AsRef<Path>,
    case: &DispatchCase,
    cfg: &HorizonConfig,
) -> Result<ScenarioTimeline, IoError> {
    let path = path.as_ref();
    parse_scenario(&read(path)?, &path.display().to_string(), case, cfg)
}

pub fn scenario_to_string(scenario: &ScenarioTimeline) -> Result<String, IoError> {
    to_canonical_json(&ScenarioFile {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.clone(),
    })
}

pub fn save_scenario(scenario: &ScenarioTimeline, path: impl AsRef<Path>) -> Result<(), IoError> {
    write(path.as_ref(), &scenario_to_string(scenario)?)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<HorizonConfig, IoError> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let file: ConfigFile = parse_json(&read(path)?, &origin)?;
    check_version(file.schema_version, &origin)?;
    file.config.validate().map_err(|source| IoError::Scenario { origin, source })?;
    Ok(file.config)
}

pub fn save_solution(file: &SolutionFile, path: impl AsRef<Path>) -> Result<(), IoError> {
    write(path.as_ref(), &to_canonical_json(file)?)
}

pub fn load_solution(path: impl AsRef<Path>) -> Result<SolutionFile, IoError> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let file: SolutionFile = parse_json(&read(path)?, &origin)?;
    check_version(file.schema_version, &origin)?;
    Ok(file)
}

/// SHA-256 over the canonical JSON of everything that determines a run.
pub fn config_hash(case: &DispatchCase, scenario: &ScenarioTimeline, cfg: &HorizonConfig) -> Result<String, IoError> {
    #[derive(Serialize)]
    struct Inputs<'a> {
        case: &'a DispatchCase,
        scenario: &'a ScenarioTimeline,
        config: &'a HorizonConfig,
    }
    let text = to_canonical_json(&Inputs {
        case,
        scenario,
        config: cfg,
    })?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::desk;

    fn desk_text() -> String {
        case_to_string(&desk::case24()).unwrap()
    }

    #[test]
    fn case_round_trip_is_byte_identical() {
        let text = desk_text();
        let loaded = parse_case(&text, "case").unwrap();
        assert!(loaded.warnings.is_empty());
        assert_eq!(case_to_string(&loaded.case).unwrap(), text);
    }

    #[test]
    fn keys_are_sorted() {
        let text = desk_text();
        let a = text.find("\"case\"").unwrap();
        let b = text.find("\"schema_version\"").unwrap();
        assert!(a < b);
        let d0 = text.find("\"d0\"").unwrap();
        let gens = text.find("\"generators\"").unwrap();
        assert!(d0 < gens);
    }

    #[test]
    fn unknown_field_reports_path() {
        let text = desk_text().replacen("\"rgc\"", "\"rgc_typo\"", 1);
        match parse_case(&text, "case") {
            Err(IoError::Schema { path, msg, .. }) => {
                assert_eq!(path, "case.generators[0].rgc_typo");
                assert!(msg.contains("unknown field"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_field_is_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&desk_text()).unwrap();
        v["case"]["ess"][1].as_object_mut().unwrap().remove("dt_pfr");
        let err = parse_case(&v.to_string(), "case").unwrap_err();
        assert!(err.to_string().contains("missing field `dt_pfr`"), "{err}");
    }

    #[test]
    fn syntax_error_has_line_and_column() {
        let text = "{\n  \"schema_version\": 1,\n  \"case\": [,\n}";
        match parse_case(text, "case") {
            Err(IoError::Parse { line, column, .. }) => assert_eq!((line, column), (3, 12)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_numbers_are_rejected() {
        for bad in ["NaN", "Infinity", "1e999"] {
            let text = desk_text().replacen("\"d0\": 1.0", &format!("\"d0\": {bad}"), 1);
            assert!(parse_case(&text, "case").is_err(), "{bad} accepted");
        }
    }

    #[test]
    fn cost_ordering_violation_is_a_validation_error() {
        let mut c = desk::case24();
        c.costs.rec = 1e4;
        let err = parse_case(&case_to_string(&c).unwrap(), "case").unwrap_err();
        assert!(matches!(err, IoError::Case { source: DispatchError::Validation { .. }, .. }), "{err}");
    }

    #[test]
    fn beta_is_renormalized_with_warning() {
        let mut c = desk::case24();
        for g in &mut c.generators {
            g.beta *= 2.0;
        }
        let loaded = parse_case(&case_to_string(&c).unwrap(), "case").unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        let s: f64 = loaded.case.generators.iter().map(|g| g.beta).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_schema_version() {
        let text = desk_text().replace("\"schema_version\": 1", "\"schema_version\": 7");
        assert!(matches!(parse_case(&text, "case"), Err(IoError::Version { found: 7, .. })));
    }

    #[test]
    fn empty_timeline_is_rejected() {
        let case = desk::case24();
        let cfg = HorizonConfig::default();
        let text = scenario_to_string(&ScenarioTimeline {
            name: "empty".into(),
            seed: 1,
            solves: vec![],
        })
        .unwrap();
        let err = parse_scenario(&text, "scenario", &case, &cfg).unwrap_err();
        assert!(err.to_string().contains("no solves"), "{err}");
    }

    #[test]
    fn scenario_round_trip_and_psd_check() {
        let case = desk::case24();
        let cfg = HorizonConfig::default();
        let sc = desk::day1(&case, &cfg).unwrap();
        let text = scenario_to_string(&sc).unwrap();
        let back = parse_scenario(&text, "scenario", &case, &cfg).unwrap();
        assert_eq!(scenario_to_string(&back).unwrap(), text);

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["scenario"]["solves"][0]["steps"][0]["gmm"]["covariances"][0][0][0] = serde_json::json!(-1.0);
        let err = parse_scenario(&v.to_string(), "scenario", &case, &cfg).unwrap_err();
        assert!(matches!(err, IoError::Schema { .. }), "{err}");
        assert!(err.to_string().contains("solves[0].steps[0].gmm"), "{err}");
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let case = desk::case24();
        let cfg = HorizonConfig::default();
        let sc = desk::day1(&case, &cfg).unwrap();
        let h1 = config_hash(&case, &sc, &cfg).unwrap();
        assert_eq!(h1.len(), 64);
        assert_eq!(h1, config_hash(&case, &sc, &cfg).unwrap());
        let mut cfg2 = cfg;
        cfg2.cha_samples += 1;
        assert_ne!(h1, config_hash(&case, &sc, &cfg2).unwrap());
    }
}

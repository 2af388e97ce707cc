use std::path::{Path, PathBuf};

use akvf_core::fields::DegeneracyPolicy;
use akvf_core::kernel::DEFAULT_TAU;
use akvf_core::problems::{ProblemSpec, PROBLEM_NAMES};
use akvf_core::tracking::{SolveRegion, DEFAULT_BAND_WIDTH};
use akvf_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// JSON schema of [`RunConfig`], shipped with the binary.
pub const SCHEMA: &str = include_str!("../config.schema.json");

/// Everything a run needs. Loaded from JSON, then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: String,
    pub k: usize,
    pub boost: usize,
    /// Refinement levels of the base mesh. Single-level commands use the finest.
    pub levels: Vec<usize>,
    pub tau: f64,
    pub degeneracy: DegeneracyPolicy,
    pub out: PathBuf,
    /// Evaluation time; the problem's default when absent.
    pub time: Option<f64>,
    pub converge: ConvergeConfig,
    pub track: TrackConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeConfig {
    /// Compare against a solve this many levels above the finest level.
    pub reference_levels_finer: Option<usize>,
    pub modulo_kernel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackConfig {
    pub steps: usize,
    /// End time; the end of the problem's time interval when absent.
    pub t_end: Option<f64>,
    /// Number of rays from the origin whose points seed the particles.
    pub seeds: usize,
    pub seed_radius: f64,
    pub region: SolveRegion,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: "synthetic".into(),
            k: 2,
            boost: 0,
            levels: vec![0, 1, 2, 3],
            tau: DEFAULT_TAU,
            degeneracy: DegeneracyPolicy::Fail,
            out: PathBuf::from("akvf-out"),
            time: None,
            converge: ConvergeConfig::default(),
            track: TrackConfig::default(),
        }
    }
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self { reference_levels_finer: None, modulo_kernel: true }
    }
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            steps: 60,
            t_end: None,
            seeds: 24,
            seed_radius: 1.0,
            region: SolveRegion::Band { width: DEFAULT_BAND_WIDTH },
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn finest_level(&self) -> usize {
        self.levels.iter().copied().max().unwrap_or(0)
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        ProblemSpec::by_name(&self.problem, self.degeneracy)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !PROBLEM_NAMES.contains(&self.problem.as_str()) {
            return bad(format!("unknown problem `{}`; expected one of {}", self.problem, PROBLEM_NAMES.join(", ")));
        }
        if !(1..=3).contains(&self.k) {
            return bad(format!("k must be 1, 2 or 3, got {}", self.k));
        }
        if self.levels.is_empty() {
            return bad("levels must not be empty".into());
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if self.time.is_some_and(|t| !t.is_finite()) {
            return bad("time must be finite".into());
        }
        if self.converge.reference_levels_finer.is_some_and(|n| n < 2) {
            return bad("converge.reference_levels_finer must be at least 2".into());
        }
        let t = &self.track;
        if t.steps == 0 || t.seeds == 0 || !(t.seed_radius > 0.0) {
            return bad("track.steps, track.seeds and track.seed_radius must be positive".into());
        }
        if t.t_end.is_some_and(|e| !(e > 0.0 && e.is_finite())) {
            return bad("track.t_end must be positive".into());
        }
        if let SolveRegion::Band { width } = t.region {
            if !(width > 0.0 && width.is_finite()) {
                return bad(format!("track.region.width must be positive, got {width}"));
            }
        }
        Ok(())
    }
}

/// Parses `3`, `0,1,2` or `0..4` (inclusive).
pub fn parse_levels(s: &str) -> std::result::Result<Vec<usize>, String> {
    let num = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("bad level `{x}`: {e}"));
    let levels = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if a > b {
            return Err(format!("empty level range `{s}`"));
        }
        (a..=b).collect()
    } else {
        s.split(',').map(num).collect::<std::result::Result<Vec<_>, _>>()?
    };
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"problem": "synthetic", "kk": 2}"#).is_err());
        assert!(RunConfig::from_json(r#"{"track": {"stepz": 3}}"#).is_err());
    }

    #[test]
    fn partial_config_uses_defaults() {
        let c = RunConfig::from_json(r#"{"k": 1, "track": {"region": {"kind": "full"}}}"#).unwrap();
        assert_eq!(c.k, 1);
        assert_eq!(c.track.region, SolveRegion::Full);
        assert_eq!(c.levels, RunConfig::default().levels);
    }

    #[test]
    fn level_syntax() {
        assert_eq!(parse_levels("3").unwrap(), vec![3]);
        assert_eq!(parse_levels("0,2").unwrap(), vec![0, 2]);
        assert_eq!(parse_levels("1..3").unwrap(), vec![1, 2, 3]);
        assert!(parse_levels("3..1").is_err());
    }

    #[test]
    fn schema_lists_every_key() {
        let schema: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
        let value = serde_json::to_value(RunConfig::default()).unwrap();
        let keys = |v: &serde_json::Value| {
            let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
            k.sort();
            k
        };
        assert_eq!(keys(&schema["properties"]), keys(&value));
        for block in ["converge", "track"] {
            assert_eq!(keys(&schema["properties"][block]["properties"]), keys(&value[block]));
        }
    }
}

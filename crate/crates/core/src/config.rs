//! Run configuration: TOML file, then command-line flags, then environment.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentConfig, ExtractionBackend, RateLimited, RemoteBackend, RemoteConfig, RuleBackend};
use crate::doc::TextOptions;
use crate::figures::FigureConfig;
use crate::ingest::{OcrGateConfig, SectionCues, DECODER_ENV};
use crate::tables::TableConfig;

pub const ENV_BACKEND: &str = "CHEMMINER_BACKEND";
pub const ENV_WORKERS: &str = "CHEMMINER_WORKERS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Rule,
    Remote,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_lowercase().as_str() {
            "rule" => Ok(BackendKind::Rule),
            "remote" => Ok(BackendKind::Remote),
            other => Err(format!("unknown backend {other:?} (expected rule or remote)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleSettings {
    pub context_limit: usize,
}

impl Default for RuleSettings {
    fn default() -> Self {
        Self { context_limit: 128_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub backend: BackendKind,
    /// Upper bound on concurrent workers. Results do not depend on it.
    pub workers: usize,
    /// Minimum spacing between backend calls, in milliseconds.
    pub rate_limit_ms: u64,
    pub output_dir: PathBuf,
    /// Directory of prompt template overrides.
    pub templates_dir: Option<PathBuf>,
    /// External PDF decoder program.
    pub decoder: Option<PathBuf>,
    pub rule: RuleSettings,
    pub remote: RemoteConfig,
    pub agents: AgentConfig,
    pub text: TextOptions,
    pub ocr: OcrGateConfig,
    pub sections: SectionCues,
    pub tables: TableConfig,
    pub figures: FigureConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Rule,
            workers: 4,
            rate_limit_ms: 0,
            output_dir: PathBuf::from("out"),
            templates_dir: None,
            decoder: None,
            rule: RuleSettings::default(),
            remote: RemoteConfig::default(),
            agents: AgentConfig::default(),
            text: TextOptions::default(),
            ocr: OcrGateConfig::default(),
            sections: SectionCues::default(),
            tables: TableConfig::default(),
            figures: FigureConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Applies environment overrides: backend, workers, decoder and the
    /// remote backend's url, model and key.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        if let Some(v) = var(ENV_BACKEND) {
            self.backend = v.parse().map_err(|e| ConfigError::Invalid(vec![e]))?;
        }
        if let Some(v) = var(ENV_WORKERS) {
            self.workers = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid(vec![format!("{ENV_WORKERS} must be a positive integer")]))?;
        }
        if let Some(v) = var(DECODER_ENV) {
            self.decoder = Some(PathBuf::from(v));
        }
        self.remote.apply_env();
        Ok(())
    }

    /// Every violated constraint, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} must be positive"));
            }
        };
        let t = &self.tables;
        for (name, v) in [
            ("tables.axis_tol", t.axis_tol),
            ("tables.clustering_tol", t.clustering_tol),
            ("tables.merge_gap", t.merge_gap),
            ("tables.snap_tol", t.snap_tol),
            ("tables.bottom_margin", t.bottom_margin),
            ("tables.top_margin", t.top_margin),
            ("tables.col_match_tol", t.col_match_tol),
            ("tables.iou_threshold", t.iou_threshold),
            ("tables.phrase_gap_em", t.phrase_gap_em),
            ("tables.baseline_tol", t.baseline_tol),
            ("figures.min_figure_area", self.figures.min_figure_area),
            ("figures.target_dpi", self.figures.target_dpi),
            ("figures.adjacency", self.figures.adjacency),
            ("figures.iou_threshold", self.figures.iou_threshold),
            ("text.row_tol", self.text.row_tol),
            ("text.word_gap_em", self.text.word_gap_em),
        ] {
            positive(name, v);
        }
        let mut at_least_one = |name: &str, v: usize| {
            if v == 0 {
                out.push(format!("{name} must be at least 1"));
            }
        };
        at_least_one("workers", self.workers);
        at_least_one("tables.min_group_lines", self.tables.min_group_lines);
        at_least_one("agents.chars_per_token", self.agents.chars_per_token);
        at_least_one("rule.context_limit", self.rule.context_limit);
        if self.ocr.fuzzy_max == 0 {
            out.push("ocr.fuzzy_max must be at least 1".into());
        }
        if self.backend == BackendKind::Remote {
            for m in self.remote.missing() {
                out.push(format!("backend remote requires {m}"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(p))
        }
    }

    /// The configuration as written next to run outputs. The worker count,
    /// the output directory and the API key are left out: none of them may
    /// change what a run produces.
    pub fn snapshot(&self) -> String {
        let mut v = toml::Value::try_from(self).expect("config serializes");
        if let Some(t) = v.as_table_mut() {
            t.remove("workers");
            t.remove("output_dir");
        }
        toml::to_string_pretty(&v).expect("config serializes")
    }

    pub fn build_backend(&self) -> Result<Arc<dyn ExtractionBackend>, ConfigError> {
        let base: Arc<dyn ExtractionBackend> = match self.backend {
            BackendKind::Rule => Arc::new(RuleBackend::new(self.rule.context_limit, self.agents.chars_per_token)),
            BackendKind::Remote => Arc::new(RemoteBackend::new(&self.remote).map_err(|missing| {
                ConfigError::Invalid(missing.iter().map(|m| format!("backend remote requires {m}")).collect())
            })?),
        };
        Ok(if self.rate_limit_ms > 0 {
            Arc::new(RateLimited::new(base, Duration::from_millis(self.rate_limit_ms)))
        } else {
            base
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c = PipelineConfig::from_toml_str("workers = 2\n[tables]\nclustering_tol = 5.0\n").unwrap();
        assert_eq!(c.workers, 2);
        assert_eq!(c.tables.clustering_tol, 5.0);
        assert_eq!(c.tables.snap_tol, TableConfig::default().snap_tol);
        assert_eq!(c.backend, BackendKind::Rule);
    }

    #[test]
    fn snapshot_round_trips_without_workers_or_key() {
        let mut c = PipelineConfig {
            workers: 8,
            ..Default::default()
        };
        c.remote.key = Some("secret".into());
        let snap = c.snapshot();
        assert!(!snap.contains("workers"));
        assert!(!snap.contains("secret"));
        let back = PipelineConfig::from_toml_str(&snap).unwrap();
        assert_eq!(back.tables, c.tables);
        assert_eq!(back.agents, c.agents);
        let other = PipelineConfig {
            workers: 1,
            output_dir: PathBuf::from("elsewhere"),
            ..Default::default()
        };
        assert_eq!(other.snapshot(), snap);
    }

    #[test]
    fn non_positive_tolerance_is_reported() {
        let mut c = PipelineConfig::default();
        c.tables.snap_tol = 0.0;
        c.workers = 0;
        let p = c.problems();
        assert!(p.iter().any(|m| m.contains("tables.snap_tol")));
        assert!(p.iter().any(|m| m.contains("workers")));
    }

    #[test]
    fn remote_without_url_is_invalid() {
        let c = PipelineConfig {
            backend: BackendKind::Remote,
            ..Default::default()
        };
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("CHEMMINER_LLM_URL"), "{err}");
    }

    #[test]
    fn unknown_key_type_is_a_parse_error() {
        assert!(matches!(PipelineConfig::from_toml_str("workers = \"many\""), Err(ConfigError::Parse(_))));
    }
}

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::corpus::{load_tables, BlockingConfig, SchemaAlignment};
use crate::session::SessionConfig;
use crate::synthetic::SyntheticSpec;
use crate::{MatchingTask, Result};

/// Environment variable naming the directory relative dataset paths resolve against.
pub const DATA_DIR_ENV: &str = "EMAL_DATA_DIR";

/// A config problem, located in the source text when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    /// 1-based line and column.
    pub position: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.path {
            write!(f, "{}:", p.display())?;
        }
        if let Some((line, col)) = self.position {
            write!(f, "{line}:{col}:")?;
        }
        if self.path.is_some() || self.position.is_some() {
            f.write_str(" ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

/// One aligned attribute: a shared name or a `[left, right]` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlignedAttribute {
    Same(String),
    Pair(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDataset {
    #[serde(default)]
    pub name: Option<String>,
    pub left: PathBuf,
    pub right: PathBuf,
    pub gold: PathBuf,
    #[serde(default = "default_id")]
    pub left_id: String,
    #[serde(default = "default_id")]
    pub right_id: String,
    pub alignment: Vec<AlignedAttribute>,
    #[serde(default = "default_threshold")]
    pub blocking_threshold: f64,
}

fn default_id() -> String {
    "id".into()
}

fn default_threshold() -> f64 {
    BlockingConfig::default().threshold
}

impl FileDataset {
    pub fn schema_alignment(&self) -> SchemaAlignment {
        SchemaAlignment::new(
            self.alignment
                .iter()
                .map(|a| match a {
                    AlignedAttribute::Same(n) => (n.clone(), n.clone()),
                    AlignedAttribute::Pair(l, r) => (l.clone(), r.clone()),
                })
                .collect(),
        )
    }

    pub fn files(&self) -> [(&'static str, &Path); 3] {
        [("left", &self.left), ("right", &self.right), ("gold", &self.gold)]
    }

    fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.left
                .file_stem()
                .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    Files(FileDataset),
    Synthetic(SyntheticSpec),
}

impl DatasetConfig {
    pub fn load(&self) -> Result<MatchingTask> {
        match self {
            DatasetConfig::Synthetic(spec) => spec.generate(),
            DatasetConfig::Files(d) => {
                let (left, right, alignment) =
                    load_tables(&d.left, &d.right, &d.left_id, &d.right_id, d.schema_alignment())?;
                let blocking = BlockingConfig::new(d.blocking_threshold)?;
                MatchingTask::load(d.display_name(), left, right, &alignment, &d.gold, &blocking)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetConfig,
    /// Where run artifacts go; `--out` overrides it.
    pub output: PathBuf,
    /// Runs per session, each with its own derived seed.
    pub repeats: usize,
    pub convergence_epsilon: f64,
    pub convergence_window: usize,
    pub sessions: Vec<SessionConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    name: Option<String>,
    dataset: Spanned<DatasetConfig>,
    #[serde(default)]
    output: Option<PathBuf>,
    #[serde(default = "default_repeats")]
    repeats: Spanned<usize>,
    #[serde(default = "default_epsilon")]
    convergence_epsilon: f64,
    #[serde(default = "default_window")]
    convergence_window: usize,
    #[serde(default)]
    session: Vec<Spanned<SessionConfig>>,
}

fn default_repeats() -> Spanned<usize> {
    Spanned::new(0..0, 1)
}

fn default_epsilon() -> f64 {
    0.01
}

fn default_window() -> usize {
    3
}

/// 1-based line and column of a byte offset.
fn position(source: &str, offset: usize) -> (usize, usize) {
    let before = &source[..offset.min(source.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

impl ExperimentConfig {
    /// Parses and validates a config file. Relative dataset paths resolve
    /// against `data_dir` when given, else against the config's directory.
    pub fn load(path: &Path, data_dir: Option<&Path>) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            position: None,
            message: e.to_string(),
        })?;
        let base = match data_dir {
            Some(d) => d.to_path_buf(),
            None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        Self::parse(&source, &base, stem.as_deref()).map_err(|mut e| {
            e.path = Some(path.to_path_buf());
            e
        })
    }

    pub fn parse(source: &str, base: &Path, default_name: Option<&str>) -> Result<Self, ConfigError> {
        let at = |span: Range<usize>, message: String| ConfigError {
            path: None,
            position: (span != (0..0)).then(|| position(source, span.start)),
            message,
        };
        let raw: RawConfig = toml::from_str(source).map_err(|e| {
            at(e.span().unwrap_or(0..0), e.message().to_string())
        })?;

        let dataset_span = raw.dataset.span();
        let mut dataset = raw.dataset.into_inner();
        if let DatasetConfig::Files(d) = &mut dataset {
            for p in [&mut d.left, &mut d.right, &mut d.gold] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            for (role, p) in d.files() {
                if !p.is_file() {
                    return Err(at(dataset_span.clone(), format!("{role} file {} does not exist", p.display())));
                }
            }
            if d.alignment.is_empty() {
                return Err(at(dataset_span, "alignment must name at least one attribute".into()));
            }
            BlockingConfig::new(d.blocking_threshold).map_err(|e| at(dataset_span.clone(), e.to_string()))?;
        } else if let DatasetConfig::Synthetic(spec) = &dataset {
            spec.validate().map_err(|e| at(dataset_span.clone(), e.to_string()))?;
        }

        if *raw.repeats.get_ref() == 0 {
            return Err(at(raw.repeats.span(), "repeats must be at least 1".into()));
        }
        if raw.session.is_empty() {
            return Err(at(0..0, "config lists no [[session]]".into()));
        }
        let mut names = HashSet::new();
        let mut sessions = Vec::with_capacity(raw.session.len());
        for s in raw.session {
            let span = s.span();
            let cfg = s.into_inner();
            cfg.validate().map_err(|e| at(span.clone(), e.to_string()))?;
            let name = cfg.display_name();
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                return Err(at(span, format!("session name `{name}` is not usable as a directory name")));
            }
            if !names.insert(name.clone()) {
                return Err(at(span, format!("duplicate session name `{name}`")));
            }
            sessions.push(cfg);
        }

        let name = raw
            .name
            .or_else(|| default_name.map(str::to_string))
            .unwrap_or_else(|| "experiment".into());
        Ok(Self {
            output: raw.output.unwrap_or_else(|| Path::new("runs").join(&name)),
            name,
            dataset,
            repeats: raw.repeats.into_inner(),
            convergence_epsilon: raw.convergence_epsilon,
            convergence_window: raw.convergence_window,
            sessions,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYNTH: &str = r#"
name = "demo"

[dataset]
kind = "synthetic"
n_pairs = 300

[[session]]
selector = "forest_qbc"
learner = { kind = "forest", n_trees = 5 }

[[session]]
name = "rand"
selector = "random"
learner = { kind = "linear" }
"#;

    #[test]
    fn parses_synthetic_config_with_defaults() {
        let c = ExperimentConfig::parse(SYNTH, Path::new("."), None).unwrap();
        assert_eq!(c.name, "demo");
        assert_eq!(c.repeats, 1);
        assert_eq!(c.output, Path::new("runs/demo"));
        assert_eq!(c.sessions.len(), 2);
        assert_eq!(c.sessions[0].display_name(), "forest_qbc-forest");
        assert!(matches!(c.dataset, DatasetConfig::Synthetic(ref s) if s.n_pairs == 300));
    }

    #[test]
    fn unknown_key_is_rejected_with_its_line() {
        let src = SYNTH.replace("n_pairs = 300", "n_pairs = 300\nbogus = 1");
        let e = ExperimentConfig::parse(&src, Path::new("."), None).unwrap_err();
        assert!(e.message.contains("bogus"), "{e}");
        assert!(e.position.is_some());
    }

    #[test]
    fn incompatible_pair_points_at_its_session() {
        let src = SYNTH.replace("selector = \"random\"", "selector = \"margin\"").replace("kind = \"linear\"", "kind = \"forest\"");
        let e = ExperimentConfig::parse(&src, Path::new("."), None).unwrap_err();
        let line = src.lines().position(|l| l.contains("name = \"rand\"")).unwrap();
        assert_eq!(src.lines().nth(line - 1), Some("[[session]]"));
        assert_eq!(e.position.map(|p| p.0), Some(line), "{e}");
        assert!(e.message.contains("incompatible"), "{e}");
    }

    #[test]
    fn missing_files_are_reported() {
        let src = r#"
[dataset]
kind = "files"
left = "a.csv"
right = "b.csv"
gold = "g.csv"
alignment = ["name", ["desc", "description"]]

[[session]]
selector = "random"
learner = { kind = "linear" }
"#;
        let e = ExperimentConfig::parse(src, Path::new("/nonexistent"), None).unwrap_err();
        assert!(e.message.contains("left file"), "{e}");
        assert_eq!(e.position.map(|p| p.0), Some(2));
    }

    #[test]
    fn duplicate_names_and_zero_repeats_are_rejected() {
        let dup = SYNTH.replace("name = \"rand\"", "name = \"forest_qbc-forest\"");
        assert!(ExperimentConfig::parse(&dup, Path::new("."), None).unwrap_err().message.contains("duplicate"));
        let zero = SYNTH.replace("name = \"demo\"", "name = \"demo\"\nrepeats = 0");
        let e = ExperimentConfig::parse(&zero, Path::new("."), None).unwrap_err();
        assert_eq!(e.position.map(|p| p.0), Some(3));
    }

    #[test]
    fn position_counts_lines_and_columns() {
        assert_eq!(position("ab\ncd", 4), (2, 2));
        assert_eq!(position("ab", 0), (1, 1));
    }
}

//! Run configuration: defaults, then the TOML file, then command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::Args;
use kedit_core::bench::BatchSize;
use kedit_core::SearchLimits;
use serde::Deserialize;

pub const GENERATOR_KEY_VAR: &str = "GENERATOR_API_KEY";
pub const EMBEDDING_KEY_VAR: &str = "EMBEDDING_API_KEY";

/// A usage or configuration problem; the process exits with status 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(message.into()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Oracle { graph: Option<PathBuf> },
    Remote { url: String, model: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbedderSpec {
    Hashing,
    Remote { url: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifierSpec {
    Rules,
    Judge {
        demos: PathBuf,
        seed: u64,
        positives: usize,
        negatives: usize,
    },
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub backend: BackendSpec,
    pub embedder: EmbedderSpec,
    pub verifier: VerifierSpec,
    pub limits: SearchLimits,
    pub batch: BatchSize,
    pub parallelism: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub stable: bool,
    /// Serve generator responses from this log instead of the network.
    pub replay: Option<PathBuf>,
    /// Append generator exchanges to this log.
    pub record: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    batch_size: Option<toml::Value>,
    parallelism: Option<usize>,
    stable: Option<bool>,
    #[serde(default)]
    backend: FileBackend,
    #[serde(default)]
    embedder: FileEmbedder,
    #[serde(default)]
    verifier: FileVerifier,
    #[serde(default)]
    limits: FileLimits,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBackend {
    kind: Option<String>,
    url: Option<String>,
    model: Option<String>,
    graph: Option<PathBuf>,
    replay: Option<PathBuf>,
    record: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEmbedder {
    kind: Option<String>,
    url: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileVerifier {
    kind: Option<String>,
    demos: Option<PathBuf>,
    seed: Option<u64>,
    positives: Option<usize>,
    negatives: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileLimits {
    retrieval_n: Option<i64>,
    d_max: Option<i64>,
    node_budget: Option<i64>,
}

/// Flags shared by the commands that run searches.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Generator backend: oracle or remote.
    #[arg(long)]
    pub backend: Option<String>,
    /// Fact graph for the oracle backend.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub generator_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Serve generator responses from a recorded log.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Append generator exchanges to a log.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Embedding provider: hashing or remote.
    #[arg(long)]
    pub embedder: Option<String>,
    #[arg(long)]
    pub embedder_url: Option<String>,
    /// Constraint verifiers: rules or judge.
    #[arg(long)]
    pub verifier: Option<String>,
    /// Judge demonstrations (JSON list).
    #[arg(long)]
    pub demos: Option<PathBuf>,
    #[arg(long)]
    pub retrieval_n: Option<i64>,
    #[arg(long)]
    pub d_max: Option<i64>,
    #[arg(long)]
    pub node_budget: Option<i64>,
    /// Instances per retrieval store, or "full".
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Zero wall-clock fields so reports are byte-reproducible.
    #[arg(long)]
    pub stable: bool,
}

fn find_secret(table: &toml::Table, prefix: &str) -> Option<String> {
    for (k, v) in table {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        let lower = k.to_ascii_lowercase();
        if lower.contains("key") || lower.contains("token") || lower.contains("secret") {
            return Some(path);
        }
        if let toml::Value::Table(inner) = v {
            if let Some(found) = find_secret(inner, &path) {
                return Some(found);
            }
        }
    }
    None
}

fn read_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config `{}`: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| ConfigError(format!("config `{}`: {e}", path.display())))?;
    if let Some(field) = find_secret(&table, "") {
        return bad(format!(
            "`{field}`: credentials are not accepted in the config file; set {GENERATOR_KEY_VAR} or {EMBEDDING_KEY_VAR}"
        ));
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| ConfigError(format!("config `{}`: {e}", path.display())))
}

fn positive(field: &str, value: Option<i64>, default: usize) -> Result<usize, ConfigError> {
    match value {
        None => Ok(default),
        Some(v) if v > 0 => Ok(v as usize),
        Some(v) => bad(format!("{field} must be positive, got {v}")),
    }
}

fn batch_from(value: &toml::Value) -> Result<BatchSize, ConfigError> {
    let parsed = match value {
        toml::Value::Integer(n) if *n > 0 => Some(BatchSize::Count(*n as usize)),
        toml::Value::String(s) => BatchSize::parse(s),
        _ => None,
    };
    parsed.ok_or_else(|| {
        ConfigError(format!(
            "batch_size must be a positive integer or \"full\", got {value}"
        ))
    })
}

impl Settings {
    /// Merges defaults, the optional config file and `flags`, then checks
    /// every constraint.
    pub fn resolve(flags: &RunFlags) -> Result<Self, ConfigError> {
        let file = match &flags.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let defaults = SearchLimits::default();
        let limits = SearchLimits {
            retrieval_n: positive(
                "limits.retrieval_n",
                flags.retrieval_n.or(file.limits.retrieval_n),
                defaults.retrieval_n,
            )?,
            d_max: positive("limits.d_max", flags.d_max.or(file.limits.d_max), defaults.d_max)?,
            node_budget: positive(
                "limits.node_budget",
                flags.node_budget.or(file.limits.node_budget),
                defaults.node_budget,
            )?,
        };

        let batch = match (&flags.batch_size, &file.batch_size) {
            (Some(s), _) => BatchSize::parse(s)
                .ok_or_else(|| ConfigError(format!("batch_size must be a positive integer or \"full\", got `{s}`")))?,
            (None, Some(v)) => batch_from(v)?,
            (None, None) => BatchSize::Count(100),
        };

        let parallelism = flags.parallelism.or(file.parallelism).unwrap_or(4);
        if parallelism == 0 {
            return bad("parallelism must be positive");
        }

        let backend_kind = flags
            .backend
            .clone()
            .or(file.backend.kind)
            .unwrap_or_else(|| "oracle".into());
        let backend = match backend_kind.as_str() {
            "oracle" => BackendSpec::Oracle {
                graph: flags.graph.clone().or(file.backend.graph),
            },
            "remote" => {
                let url = flags.generator_url.clone().or(file.backend.url);
                let model = flags.model.clone().or(file.backend.model);
                match (url, model) {
                    (Some(url), Some(model)) => BackendSpec::Remote { url, model },
                    (None, _) => return bad("backend.url is required when backend.kind = \"remote\""),
                    (_, None) => return bad("backend.model is required when backend.kind = \"remote\""),
                }
            }
            other => return bad(format!("backend.kind must be \"oracle\" or \"remote\", got `{other}`")),
        };

        let embedder_kind = flags
            .embedder
            .clone()
            .or(file.embedder.kind)
            .unwrap_or_else(|| "hashing".into());
        let embedder = match embedder_kind.as_str() {
            "hashing" => EmbedderSpec::Hashing,
            "remote" => match flags.embedder_url.clone().or(file.embedder.url) {
                Some(url) => EmbedderSpec::Remote { url },
                None => return bad("embedder.url is required when embedder.kind = \"remote\""),
            },
            other => {
                return bad(format!(
                    "embedder.kind must be \"hashing\" or \"remote\", got `{other}`"
                ))
            }
        };

        let verifier_kind = flags
            .verifier
            .clone()
            .or(file.verifier.kind)
            .unwrap_or_else(|| "rules".into());
        let verifier = match verifier_kind.as_str() {
            "rules" => VerifierSpec::Rules,
            "judge" => {
                let demos =
                    flags.demos.clone().or(file.verifier.demos).ok_or_else(|| {
                        ConfigError("verifier.demos is required when verifier.kind = \"judge\"".into())
                    })?;
                VerifierSpec::Judge {
                    demos,
                    seed: file.verifier.seed.unwrap_or(0),
                    positives: file.verifier.positives.unwrap_or(2),
                    negatives: file.verifier.negatives.unwrap_or(2),
                }
            }
            other => return bad(format!("verifier.kind must be \"rules\" or \"judge\", got `{other}`")),
        };
        if let (VerifierSpec::Judge { .. }, BackendSpec::Oracle { .. }) = (&verifier, &backend) {
            return bad("verifier.kind = \"judge\" needs backend.kind = \"remote\"");
        }

        let replay = flags.replay.clone().or(file.backend.replay);
        let record = flags.record.clone().or(file.backend.record);
        if (replay.is_some() || record.is_some()) && matches!(backend, BackendSpec::Oracle { .. }) {
            return bad("backend.replay and backend.record apply only to backend.kind = \"remote\"");
        }

        Ok(Settings {
            backend,
            embedder,
            verifier,
            limits,
            batch,
            parallelism,
            output_dir: flags.out.clone().or(file.output_dir).unwrap_or_else(|| "runs".into()),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            stable: flags.stable || file.stable.unwrap_or(false),
            replay,
            record,
        })
    }

    /// Reads the API keys the selected providers need. Replayed runs need no
    /// generator key.
    pub fn keys(&self) -> Result<(Option<String>, Option<String>), ConfigError> {
        let read = |var: &str| std::env::var(var).ok().filter(|v| !v.trim().is_empty());
        let generator = match (&self.backend, &self.replay) {
            (BackendSpec::Remote { .. }, None) => Some(read(GENERATOR_KEY_VAR).ok_or_else(|| {
                ConfigError(format!("{GENERATOR_KEY_VAR} must be set for backend.kind = \"remote\""))
            })?),
            _ => None,
        };
        let embedding = match &self.embedder {
            EmbedderSpec::Remote { .. } => Some(read(EMBEDDING_KEY_VAR).ok_or_else(|| {
                ConfigError(format!(
                    "{EMBEDDING_KEY_VAR} must be set for embedder.kind = \"remote\""
                ))
            })?),
            EmbedderSpec::Hashing => None,
        };
        Ok((generator, embedding))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn defaults() {
        let s = Settings::resolve(&RunFlags::default()).unwrap();
        assert_eq!(s.limits, SearchLimits::default());
        assert_eq!(s.batch, BatchSize::Count(100));
        assert_eq!(s.backend, BackendSpec::Oracle { graph: None });
        assert_eq!(s.verifier, VerifierSpec::Rules);
    }

    #[test]
    fn flags_override_file() {
        let f = write("batch_size = \"full\"\n[limits]\nd_max = 3\nnode_budget = 10\n");
        let flags = RunFlags {
            config: Some(f.path().into()),
            d_max: Some(6),
            ..Default::default()
        };
        let s = Settings::resolve(&flags).unwrap();
        assert_eq!(s.limits.d_max, 6);
        assert_eq!(s.limits.node_budget, 10);
        assert_eq!(s.batch, BatchSize::Full);
    }

    #[test]
    fn errors_name_the_field() {
        let f = write("[limits]\nretrieval_n = 0\n");
        let err = Settings::resolve(&RunFlags {
            config: Some(f.path().into()),
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.0.contains("limits.retrieval_n"), "{err}");

        let err = Settings::resolve(&RunFlags {
            backend: Some("remote".into()),
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.0.contains("backend.url"), "{err}");

        let err = Settings::resolve(&RunFlags {
            batch_size: Some("0".into()),
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.0.contains("batch_size"), "{err}");
    }

    #[test]
    fn keys_in_file_are_rejected() {
        let f = write("[backend]\nkind = \"remote\"\napi_key = \"sk-123\"\n");
        let err = Settings::resolve(&RunFlags {
            config: Some(f.path().into()),
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.0.contains("backend.api_key"), "{err}");
        assert!(!err.0.contains("sk-123"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let f = write("[limits]\ndepth = 3\n");
        let err = Settings::resolve(&RunFlags {
            config: Some(f.path().into()),
            ..Default::default()
        })
        .unwrap_err();
        assert!(err.0.contains("depth"), "{err}");
    }
}

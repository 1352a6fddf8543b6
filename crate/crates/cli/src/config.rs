//! The JSON pipeline config and its resolution against command-line flags.
//!
//! Every key is optional in the file. Keys a subcommand cannot run without
//! (`query` for `search`, `fetch_command`, `decoder_command`) are checked
//! when that subcommand starts and reported by name.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use flukefinder::acquisition::{API_KEY_ENV, DEFAULT_BASE_URL, MAX_RESULTS_PER_PAGE};
use flukefinder::backbone::BackboneSpec;
use flukefinder::evaluation::DEFAULT_FOLDS;
use flukefinder::framepipe::{PreprocessSpec, SamplePolicy};
use flukefinder::seed::derive_seed;
use flukefinder::seqclassifier::TrainConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_FILE: &str = flukefinder_annotate::MANIFEST_FILE;
pub const PRIVATE_MAP_FILE: &str = "private_map.tsv";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config key `{key}` is required by `{subcommand}`")]
    Missing { key: &'static str, subcommand: &'static str },
    #[error("config key `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Base for every relative path below. `--out` replaces it.
    pub root: Option<PathBuf>,
    pub corpus_dir: Option<PathBuf>,
    pub frame_cache: Option<PathBuf>,
    pub videos: Option<PathBuf>,
    pub tensor_dir: Option<PathBuf>,
    pub feature_cache: Option<PathBuf>,
    pub checkpoints: Option<PathBuf>,
    pub reports: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Unique videos to collect across pages.
    pub limit: usize,
    pub max_results: u32,
    pub rate_per_s: f64,
    pub burst: u32,
    pub base_url: String,
    pub api_key_env: String,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            limit: 500,
            max_results: MAX_RESULTS_PER_PAGE,
            rate_per_s: 1.0,
            burst: 5,
            base_url: DEFAULT_BASE_URL.into(),
            api_key_env: API_KEY_ENV.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldConfig {
    pub k: usize,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self { k: DEFAULT_FOLDS }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub query: Option<String>,
    pub search: SearchConfig,
    /// Template with `{platform_id}`, `{local_id}` and `{output}`.
    pub fetch_command: Option<String>,
    /// Template with `{input}`, `{start}`, `{end}` and `{out_dir}`.
    pub decoder_command: Option<String>,
    pub sample_policy: SamplePolicy,
    pub preprocess: PreprocessSpec,
    /// Absent selects the built-in backbone at the preprocess side.
    pub backbone: Option<BackboneSpec>,
    /// `train.seed` is ignored; training seeds derive from `seed`.
    pub train: TrainConfig,
    pub folds: FoldConfig,
    pub seed: u64,
    pub bind: String,
    /// Frames kept per unlabeled video for the annotation strip.
    pub strip_frames: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: PathsConfig::default(),
            query: None,
            search: SearchConfig::default(),
            fetch_command: None,
            decoder_command: None,
            sample_policy: SamplePolicy::default(),
            preprocess: PreprocessSpec::default(),
            backbone: None,
            train: TrainConfig::default(),
            folds: FoldConfig::default(),
            seed: 0,
            bind: "127.0.0.1:8080".into(),
            strip_frames: 64,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub backbone: Option<String>,
    pub frames: Option<usize>,
    pub folds: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Concrete on-disk locations.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub corpus_dir: PathBuf,
    pub manifest: PathBuf,
    pub private_map: PathBuf,
    pub frame_cache: PathBuf,
    pub videos: PathBuf,
    pub tensors: PathBuf,
    pub features: PathBuf,
    pub checkpoints: PathBuf,
    pub reports: PathBuf,
}

/// A validated config with flags applied and seeds expanded.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: PipelineConfig,
    pub layout: Layout,
    pub backbone: BackboneSpec,
    pub train: TrainConfig,
    pub fold_seed: u64,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: match e.path().to_string().as_str() {
                "." => e.inner().to_string(),
                p => format!("at `{p}`: {}", e.inner()),
            },
        })
    }

    pub fn resolve(mut self, flags: &Overrides) -> Result<Resolved, ConfigError> {
        if let Some(seed) = flags.seed {
            self.seed = seed;
        }
        if let Some(t) = flags.frames {
            self.sample_policy.target_count = t;
        }
        if let Some(k) = flags.folds {
            self.folds.k = k;
        }
        if let Some(out) = &flags.out {
            self.paths.root = Some(out.clone());
        }
        if self.sample_policy.target_count < 1 {
            return Err(invalid("sample_policy.target_count", "must be at least 1"));
        }
        if self.folds.k < 2 {
            return Err(invalid("folds.k", "must be at least 2"));
        }
        if self.preprocess.side_px == 0 {
            return Err(invalid("preprocess.side_px", "must be positive"));
        }
        self.bind
            .parse::<SocketAddr>()
            .map_err(|e| invalid("bind", format!("{:?}: {e}", self.bind)))?;

        let backbone = self.backbone_spec(flags.backbone.as_deref())?;
        let mut train = self.train.clone();
        train.seed = derive_seed(self.seed, "train");
        train.validate().map_err(|e| invalid("train", e.to_string()))?;

        Ok(Resolved {
            layout: self.layout(),
            backbone,
            train,
            fold_seed: derive_seed(self.seed, "folds"),
            config: self,
        })
    }

    fn backbone_spec(&self, flag: Option<&str>) -> Result<BackboneSpec, ConfigError> {
        let side = self.preprocess.side_px as usize;
        let default_builtin = || {
            let mut b = BackboneSpec::builtin(derive_seed(self.seed, "backbone"));
            b.input_side_px = side;
            b.pixel_scale = self.preprocess.pixel_scale;
            b
        };
        let mut spec = match (flag, &self.backbone) {
            (Some("builtin"), _) | (None, None) => default_builtin(),
            (None, Some(b)) => b.clone(),
            (Some(path), from_file) => {
                let path = PathBuf::from(path);
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "model".into());
                let mut b = from_file.clone().unwrap_or_else(default_builtin);
                b.name = name;
                b.model_path = Some(path);
                b.seed = None;
                b
            }
        };
        if spec.is_builtin() && spec.seed.is_none() {
            spec.seed = Some(derive_seed(self.seed, "backbone"));
        }
        if spec.input_side_px != side {
            return Err(invalid(
                "backbone.input_side_px",
                format!("{} differs from preprocess.side_px {side}", spec.input_side_px),
            ));
        }
        if spec.pixel_scale != self.preprocess.pixel_scale {
            return Err(invalid("backbone.pixel_scale", "differs from preprocess.pixel_scale"));
        }
        if spec.name.is_empty() || spec.name.contains(['/', '\\']) || spec.name.starts_with('.') {
            return Err(invalid("backbone.name", format!("{:?} is not usable as a directory name", spec.name)));
        }
        Ok(spec)
    }

    fn layout(&self) -> Layout {
        let root = self.paths.root.clone().unwrap_or_else(|| PathBuf::from("."));
        let at = |p: &Option<PathBuf>, default: &str| match p {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => root.join(p),
            None => root.join(default),
        };
        let corpus_dir = at(&self.paths.corpus_dir, "corpus");
        Layout {
            manifest: corpus_dir.join(MANIFEST_FILE),
            private_map: corpus_dir.join(PRIVATE_MAP_FILE),
            frame_cache: match &self.paths.frame_cache {
                None => corpus_dir.join("frames"),
                p => at(p, "frames"),
            },
            corpus_dir,
            videos: at(&self.paths.videos, "videos"),
            tensors: at(&self.paths.tensor_dir, "tensors"),
            features: at(&self.paths.feature_cache, "features"),
            checkpoints: at(&self.paths.checkpoints, "checkpoints"),
            reports: at(&self.paths.reports, "reports"),
        }
    }
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

impl Resolved {
    pub fn require_query(&self, subcommand: &'static str) -> Result<&str, ConfigError> {
        match self.config.query.as_deref() {
            Some(q) if !q.trim().is_empty() => Ok(q),
            _ => Err(ConfigError::Missing { key: "query", subcommand }),
        }
    }

    pub fn require_fetch_command(&self, subcommand: &'static str) -> Result<&str, ConfigError> {
        self.config.fetch_command.as_deref().ok_or(ConfigError::Missing {
            key: "fetch_command",
            subcommand,
        })
    }

    pub fn require_decoder_command(&self, subcommand: &'static str) -> Result<&str, ConfigError> {
        self.config.decoder_command.as_deref().ok_or(ConfigError::Missing {
            key: "decoder_command",
            subcommand,
        })
    }

    pub fn bind_addr(&self, flag: Option<&str>) -> Result<SocketAddr, ConfigError> {
        let text = flag.unwrap_or(&self.config.bind);
        text.parse()
            .map_err(|e| invalid("bind", format!("{text:?}: {e}")))
    }

    /// Seed for the machine-placed interval of one irrelevant video.
    pub fn interval_seed(&self, id: &flukefinder::LocalId) -> u64 {
        derive_seed(self.config.seed, &format!("interval/{id}"))
    }
}

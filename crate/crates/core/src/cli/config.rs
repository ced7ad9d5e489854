//! Run configuration file (TOML). Relative paths resolve against the
//! directory holding the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::classifier::{BackendKind, ClassifierRef, PromptStyle};
use crate::pipeline::StageSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    #[default]
    Tagged,
    Tabular,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkspaceCfg {
    /// Directory holding stored corpora.
    pub root: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: usize,
}

impl Default for WorkspaceCfg {
    fn default() -> Self {
        WorkspaceCfg {
            root: "store".into(),
            out: "out".into(),
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusCfg {
    pub name: String,
    pub files: Vec<PathBuf>,
    pub format: InputFormat,
    /// Optional `ut,topic` side file applied on ingest.
    pub topics: Option<PathBuf>,
}

impl Default for CorpusCfg {
    fn default() -> Self {
        CorpusCfg {
            name: "main".into(),
            files: Vec::new(),
            format: InputFormat::Tagged,
            topics: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchCfg {
    /// Strategies whose union forms the initial corpus.
    pub preliminary: Vec<String>,
}

impl Default for SearchCfg {
    fn default() -> Self {
        SearchCfg {
            preliminary: [
                "bundled:ai_lexical",
                "bundled:liu_core",
                "bundled:citation_topics",
                "bundled:category",
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineCfg {
    pub stages: StageSpec,
    pub batch_size: usize,
}

impl Default for PipelineCfg {
    fn default() -> Self {
        PipelineCfg {
            stages: StageSpec::default(),
            batch_size: 100,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelingCfg {
    /// Training-set store (one JSON example per line).
    pub training: PathBuf,
    pub sample_size: usize,
    pub per_example: usize,
    pub prompt_style: PromptStyle,
}

impl Default for LabelingCfg {
    fn default() -> Self {
        LabelingCfg {
            training: "training.jsonl".into(),
            sample_size: 200,
            per_example: 1,
            prompt_style: PromptStyle::Title,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalCfg {
    pub gold: Option<PathBuf>,
    /// `ut,label` resolutions for tied expert votes.
    pub resolutions: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticsCfg {
    pub subfield_aliases: Option<PathBuf>,
    pub subfield_sample: usize,
    pub cooccur_threshold: u64,
    pub keyword_min_count: u64,
}

impl Default for AnalyticsCfg {
    fn default() -> Self {
        AnalyticsCfg {
            subfield_aliases: None,
            subfield_sample: 10_000,
            cooccur_threshold: 50,
            keyword_min_count: 200,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub workspace: WorkspaceCfg,
    pub corpus: CorpusCfg,
    pub search: SearchCfg,
    pub pipeline: PipelineCfg,
    pub classifier: Option<ClassifierRef>,
    pub subfields: Option<ClassifierRef>,
    pub labeling: LabelingCfg,
    pub eval: EvalCfg,
    pub analytics: AnalyticsCfg,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base: PathBuf,
    /// SHA-256 of the config file bytes, `none` without a file.
    #[serde(skip)]
    pub hash: String,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn resolve_opt(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(p) = p {
        resolve(base, p);
    }
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> anyhow::Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).context("invalid config")?;
        cfg.base = base.to_path_buf();
        cfg.hash = hex::encode(Sha256::digest(text.as_bytes()));
        let b = cfg.base.clone();
        resolve(&b, &mut cfg.workspace.root);
        resolve(&b, &mut cfg.workspace.out);
        cfg.corpus.files.iter_mut().for_each(|f| resolve(&b, f));
        resolve_opt(&b, &mut cfg.corpus.topics);
        resolve(&b, &mut cfg.labeling.training);
        resolve_opt(&b, &mut cfg.eval.gold);
        resolve_opt(&b, &mut cfg.eval.resolutions);
        resolve_opt(&b, &mut cfg.analytics.subfield_aliases);
        for c in [&mut cfg.classifier, &mut cfg.subfields].into_iter().flatten() {
            resolve_opt(&b, &mut c.path);
        }
        if cfg.workspace.workers == 0 {
            bail!("workspace.workers must be at least 1");
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let cfg = Self::parse(&text, base)?;
        cfg.check_inputs()?;
        Ok(cfg)
    }

    /// Defaults relative to the working directory.
    pub fn default_here() -> Self {
        let mut cfg = RunConfig {
            hash: "none".into(),
            ..Default::default()
        };
        cfg.base = PathBuf::from(".");
        cfg
    }

    /// Input files named by the config must exist.
    pub fn check_inputs(&self) -> anyhow::Result<()> {
        let mut inputs: Vec<&Path> = self.corpus.files.iter().map(PathBuf::as_path).collect();
        inputs.extend(self.corpus.topics.as_deref());
        inputs.extend(self.eval.gold.as_deref());
        inputs.extend(self.eval.resolutions.as_deref());
        inputs.extend(self.analytics.subfield_aliases.as_deref());
        for c in [&self.classifier, &self.subfields].into_iter().flatten() {
            if c.kind == BackendKind::Replay {
                inputs.extend(c.path.as_deref());
            }
        }
        for s in self
            .search
            .preliminary
            .iter()
            .chain([
                &self.pipeline.stages.citation_topic,
                &self.pipeline.stages.core_lexical,
                &self.pipeline.stages.category,
            ])
            .filter(|s| !s.starts_with("bundled:"))
        {
            let p = self.base.join(s);
            if !p.exists() {
                bail!("strategy file {} does not exist", p.display());
            }
        }
        for p in inputs {
            if !p.exists() {
                bail!("referenced file {} does not exist", p.display());
            }
        }
        Ok(())
    }
}

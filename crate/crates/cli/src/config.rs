//! Optional TOML defaults for `decode`. Command-line flags take precedence.

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub grammar: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub scorer: Option<String>,
    pub mode: Option<String>,
    pub beam: Option<usize>,
    pub max_len: Option<usize>,
    pub max_depth: Option<usize>,
    pub n_best: Option<usize>,
    pub renormalize: Option<bool>,
    pub rerank: Option<bool>,
    pub align_model: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub trace: Option<bool>,
    pub bigram_smoothing: Option<f64>,
    pub bigram_eos: Option<bool>,
    pub source_bonus: Option<f64>,
    pub weight_gen: Option<f64>,
    pub weight_rec: Option<f64>,
    pub weight_asso: Option<f64>,
}

impl FileConfig {
    /// Relative paths in the file are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, Box<dyn std::error::Error>> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: FileConfig = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.grammar, &mut cfg.schema, &mut cfg.align_model].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(path) = cfg.scorer.as_deref().and_then(|s| s.strip_prefix("bigram:")) {
            if Path::new(path).is_relative() {
                cfg.scorer = Some(format!("bigram:{}", base.join(path).display()));
            }
        }
        Ok(cfg)
    }
}

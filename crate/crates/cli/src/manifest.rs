use std::path::{Path, PathBuf};

use gfmfr_core::ExperimentConfig;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Everything needed to repeat a run: merged config, input digests, code
/// version, seed and output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub code_version: String,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub interactions_sha256: String,
    pub features_sha256: String,
    pub config: ExperimentConfig,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn code_version() -> String {
    format!("gfmfr {}", env!("CARGO_PKG_VERSION"))
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        format!(
            "manifest_version = {MANIFEST_VERSION}\n\
             code_version = {}\n\
             output_dir = {}\n\
             seed = {}\n\
             sha256.interactions = {}\n\
             sha256.features = {}\n\
             [config]\n{}",
            self.code_version,
            self.output_dir.display(),
            self.seed,
            self.interactions_sha256,
            self.features_sha256,
            self.config.to_text()
        )
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let (head, config) = text
            .split_once("[config]\n")
            .ok_or_else(|| CliError::config("manifest has no [config] section"))?;
        let mut fields = std::collections::BTreeMap::new();
        for line in head.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("bad manifest line `{line}`")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let field = |k: &str| {
            fields
                .get(k)
                .cloned()
                .ok_or_else(|| CliError::config(format!("manifest is missing `{k}`")))
        };
        if field("manifest_version")? != MANIFEST_VERSION.to_string() {
            return Err(CliError::config("unsupported manifest_version"));
        }
        let config = ExperimentConfig::from_text(config)?;
        Ok(Self {
            code_version: field("code_version")?,
            output_dir: field("output_dir")?.into(),
            seed: field("seed")?
                .parse()
                .map_err(|_| CliError::config("manifest seed is not an integer"))?,
            interactions_sha256: field("sha256.interactions")?,
            features_sha256: field("sha256.features")?,
            config,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read manifest {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let p = dir.join(MANIFEST_FILE);
        std::fs::write(&p, self.to_text()).map_err(|e| CliError::data(format!("cannot write {}: {e}", p.display())))
    }
}

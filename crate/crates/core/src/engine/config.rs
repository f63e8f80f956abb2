use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::client::{ClientConfig, DistillScope, KlDirection, UserInit};
use crate::error::{Error, Result};
use crate::server::KMeansParams;

pub const CONFIG_VERSION: u32 = 1;

macro_rules! keyword_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::Config(format!(
                        "unknown {} `{s}` (expected one of: {})",
                        stringify!($name),
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

keyword_enum!(
    /// Full protocol, or plain federated training of the backbone.
    Method { Gfmfr => "gfmfr", Backbone => "backbone" }
);
keyword_enum!(
    Schedule { ScaleAlign => "scale-align", Smooth => "smooth", Progressive => "progressive", Ours => "ours" }
);
keyword_enum!(
    Grouping { KMeans => "kmeans", Random => "random", Single => "single", MultipleAgg => "kmeans+multiple-agg" }
);
keyword_enum!(
    /// Which parameters score a user at evaluation time.
    EvalModel { Local => "local", Shared => "shared" }
);
keyword_enum!(UserInitKind { Ones => "ones", Xavier => "xavier" });
keyword_enum!(KlDir { GroupToLocal => "group-to-local", LocalToGroup => "local-to-group" });
keyword_enum!(Scope { Batch => "batch", Catalog => "catalog" });

/// Every knob of an experiment. Serialized as flat `key = value` text.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub method: Method,
    pub rounds: usize,
    pub groups: usize,
    pub local_epochs: usize,
    pub sample_ratio: f64,
    pub lambda_base: f64,
    pub schedule: Schedule,
    pub grouping: Grouping,
    pub ldp_delta: f64,
    pub n_neg: usize,
    pub dim: usize,
    pub hidden: usize,
    pub group_dim: usize,
    pub client_lr: f64,
    pub batch_size: usize,
    pub kl_direction: KlDir,
    pub distill_scope: Scope,
    pub fusion_steps: usize,
    pub fusion_lr: f64,
    pub smoothing: f64,
    pub warmup: f64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    pub seed: u64,
    pub eval_every: usize,
    pub top_k: usize,
    pub exclude_train: bool,
    pub eval_model: EvalModel,
    pub user_init: UserInitKind,
    pub interactions: Option<String>,
    pub features: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::Gfmfr,
            rounds: 100,
            groups: 4,
            local_epochs: 5,
            sample_ratio: 0.1,
            lambda_base: 0.1,
            schedule: Schedule::Ours,
            grouping: Grouping::KMeans,
            ldp_delta: 0.0,
            n_neg: 4,
            dim: 32,
            hidden: 16,
            group_dim: 8,
            client_lr: 0.01,
            batch_size: 0,
            kl_direction: KlDir::GroupToLocal,
            distill_scope: Scope::Batch,
            fusion_steps: 100,
            fusion_lr: 1e-2,
            smoothing: 0.9,
            warmup: 0.2,
            kmeans_restarts: 10,
            kmeans_max_iters: 50,
            seed: 1,
            eval_every: 1,
            top_k: 50,
            exclude_train: true,
            eval_model: EvalModel::Local,
            user_init: UserInitKind::Ones,
            interactions: None,
            features: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl ExperimentConfig {
    /// Config keys in serialization order.
    pub const KEYS: &'static [&'static str] = &[
        "method", "rounds", "groups", "local_epochs", "sample_ratio", "lambda_base", "schedule",
        "grouping", "ldp_delta", "n_neg", "dim", "hidden", "group_dim", "client_lr", "batch_size",
        "kl_direction", "distill_scope", "fusion_steps", "fusion_lr", "smoothing", "warmup",
        "kmeans_restarts", "kmeans_max_iters", "seed", "eval_every", "top_k", "exclude_train",
        "eval_model", "user_init", "interactions", "features",
    ];

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "config_version" => {
                let version: u32 = parse(key, v)?;
                if version != CONFIG_VERSION {
                    return Err(Error::Config(format!("unsupported config_version {version}")));
                }
            }
            "method" => self.method = v.parse()?,
            "rounds" => self.rounds = parse(key, v)?,
            "groups" => self.groups = parse(key, v)?,
            "local_epochs" => self.local_epochs = parse(key, v)?,
            "sample_ratio" => self.sample_ratio = parse(key, v)?,
            "lambda_base" => self.lambda_base = parse(key, v)?,
            "schedule" => self.schedule = v.parse()?,
            "grouping" => self.grouping = v.parse()?,
            "ldp_delta" => self.ldp_delta = parse(key, v)?,
            "n_neg" => self.n_neg = parse(key, v)?,
            "dim" => self.dim = parse(key, v)?,
            "hidden" => self.hidden = parse(key, v)?,
            "group_dim" => self.group_dim = parse(key, v)?,
            "client_lr" => self.client_lr = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "kl_direction" => self.kl_direction = v.parse()?,
            "distill_scope" => self.distill_scope = v.parse()?,
            "fusion_steps" => self.fusion_steps = parse(key, v)?,
            "fusion_lr" => self.fusion_lr = parse(key, v)?,
            "smoothing" => self.smoothing = parse(key, v)?,
            "warmup" => self.warmup = parse(key, v)?,
            "kmeans_restarts" => self.kmeans_restarts = parse(key, v)?,
            "kmeans_max_iters" => self.kmeans_max_iters = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "eval_every" => self.eval_every = parse(key, v)?,
            "top_k" => self.top_k = parse(key, v)?,
            "exclude_train" => self.exclude_train = parse(key, v)?,
            "eval_model" => self.eval_model = v.parse()?,
            "user_init" => self.user_init = v.parse()?,
            "interactions" => self.interactions = (!v.is_empty()).then(|| v.to_string()),
            "features" => self.features = (!v.is_empty()).then(|| v.to_string()),
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Text value of `key`, as written by [`ExperimentConfig::to_text`].
    pub fn get(&self, key: &str) -> Option<String> {
        let s = match key {
            "method" => self.method.to_string(),
            "rounds" => self.rounds.to_string(),
            "groups" => self.groups.to_string(),
            "local_epochs" => self.local_epochs.to_string(),
            "sample_ratio" => self.sample_ratio.to_string(),
            "lambda_base" => self.lambda_base.to_string(),
            "schedule" => self.schedule.to_string(),
            "grouping" => self.grouping.to_string(),
            "ldp_delta" => self.ldp_delta.to_string(),
            "n_neg" => self.n_neg.to_string(),
            "dim" => self.dim.to_string(),
            "hidden" => self.hidden.to_string(),
            "group_dim" => self.group_dim.to_string(),
            "client_lr" => self.client_lr.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "kl_direction" => self.kl_direction.to_string(),
            "distill_scope" => self.distill_scope.to_string(),
            "fusion_steps" => self.fusion_steps.to_string(),
            "fusion_lr" => self.fusion_lr.to_string(),
            "smoothing" => self.smoothing.to_string(),
            "warmup" => self.warmup.to_string(),
            "kmeans_restarts" => self.kmeans_restarts.to_string(),
            "kmeans_max_iters" => self.kmeans_max_iters.to_string(),
            "seed" => self.seed.to_string(),
            "eval_every" => self.eval_every.to_string(),
            "top_k" => self.top_k.to_string(),
            "exclude_train" => self.exclude_train.to_string(),
            "eval_model" => self.eval_model.to_string(),
            "user_init" => self.user_init.to_string(),
            "interactions" => self.interactions.clone().unwrap_or_default(),
            "features" => self.features.clone().unwrap_or_default(),
            _ => return None,
        };
        Some(s)
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped;
    /// keys not present keep their defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut saw_version = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            saw_version |= k.trim() == "config_version";
            cfg.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, e.root())))?;
        }
        if !saw_version {
            return Err(Error::Config("missing `config_version = 1`".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Full serialization; `from_text(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut out = format!("config_version = {CONFIG_VERSION}\n");
        for key in Self::KEYS {
            out.push_str(&format!("{key} = {}\n", self.get(key).expect("known key")));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("rounds", self.rounds),
            ("groups", self.groups),
            ("local_epochs", self.local_epochs),
            ("n_neg", self.n_neg),
            ("dim", self.dim),
            ("hidden", self.hidden),
            ("group_dim", self.group_dim),
            ("fusion_steps", self.fusion_steps),
            ("kmeans_restarts", self.kmeans_restarts),
            ("kmeans_max_iters", self.kmeans_max_iters),
            ("eval_every", self.eval_every),
            ("top_k", self.top_k),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("`{name}` must be >= 1")));
            }
        }
        if !(self.sample_ratio > 0.0 && self.sample_ratio <= 1.0) {
            return Err(Error::Config("`sample_ratio` must be in (0, 1]".into()));
        }
        let non_negative = [
            ("lambda_base", self.lambda_base),
            ("ldp_delta", self.ldp_delta),
            ("client_lr", self.client_lr),
            ("fusion_lr", self.fusion_lr),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("`{name}` must be finite and >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.smoothing) {
            return Err(Error::Config("`smoothing` must be in [0, 1]".into()));
        }
        if !(self.warmup > 0.0 && self.warmup <= 1.0) {
            return Err(Error::Config("`warmup` must be in (0, 1]".into()));
        }
        Ok(())
    }

    /// Group count actually used: one under single grouping.
    pub fn effective_groups(&self) -> usize {
        match self.grouping {
            Grouping::Single => 1,
            _ => self.groups,
        }
    }

    pub fn client_config(&self) -> ClientConfig {
        ClientConfig {
            lr: self.client_lr,
            n_neg: self.n_neg,
            batch_size: self.batch_size,
            kl_direction: match self.kl_direction {
                KlDir::GroupToLocal => KlDirection::GroupToLocal,
                KlDir::LocalToGroup => KlDirection::LocalToGroup,
            },
            distill_scope: match self.distill_scope {
                Scope::Batch => DistillScope::Batch,
                Scope::Catalog => DistillScope::Catalog,
            },
        }
    }

    pub fn user_init(&self) -> UserInit {
        match self.user_init {
            UserInitKind::Ones => UserInit::Ones,
            UserInitKind::Xavier => UserInit::Xavier,
        }
    }

    pub fn kmeans_params(&self) -> KMeansParams {
        KMeansParams {
            max_iters: self.kmeans_max_iters,
            restarts: self.kmeans_restarts,
            ..KMeansParams::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let cfg = ExperimentConfig {
            sample_ratio: 0.2,
            lambda_base: 0.1 + 0.2,
            grouping: Grouping::MultipleAgg,
            features: Some("f.bin".into()),
            ..Default::default()
        };
        assert_eq!(ExperimentConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn comments_defaults_and_errors() {
        let cfg = ExperimentConfig::from_text("config_version=1\n# note\nrounds = 7 # inline\n").unwrap();
        assert_eq!(cfg.rounds, 7);
        assert_eq!(cfg.top_k, 50);
        assert!(matches!(ExperimentConfig::from_text("rounds=7"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_text("config_version=2"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_text("config_version=1\nbogus=1"), Err(Error::Config(_))));
        assert!(matches!(
            ExperimentConfig::from_text("config_version=1\nschedule=fast"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let bad = [
            ExperimentConfig { sample_ratio: 0.0, ..Default::default() },
            ExperimentConfig { rounds: 0, ..Default::default() },
            ExperimentConfig { lambda_base: -1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }
}

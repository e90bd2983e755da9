//! Resolved run settings and their `key=value` manifest form.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gnodeformer::autodiff::AdamConfig;
use gnodeformer::fed::FedConfig;
use gnodeformer::graph::{SbmSpec, SplitFractions};
use gnodeformer::model::{Activation, ModelConfig, RkOrder};
use gnodeformer::train::TrainConfig;

use crate::args::{ModelArgs, SourceArgs, TrainArgs};
use crate::error::{CliError, CliResult};

pub const MANIFEST_SCHEMA: u32 = 1;
pub const METRICS_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Centralized,
    Federated,
}

impl Mode {
    pub fn command(self) -> &'static str {
        match self {
            Mode::Centralized => "train-centralized",
            Mode::Federated => "train-federated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Dir(PathBuf),
    Sbm(SbmSpec),
}

impl DataSource {
    pub fn from_args(args: &SourceArgs) -> CliResult<Self> {
        match (&args.dataset, &args.sbm) {
            (Some(dir), None) => Ok(DataSource::Dir(
                std::fs::canonicalize(dir).unwrap_or_else(|_| dir.clone()),
            )),
            (None, Some(spec)) => Ok(DataSource::Sbm(spec.clone())),
            _ => Err(CliError::Usage(
                "give exactly one of --dataset and --sbm".into(),
            )),
        }
    }
}

/// Model hyperparameters apart from the dataset-dependent input and output sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub width: usize,
    pub heads: usize,
    pub layers: usize,
    pub rk: RkOrder,
    pub epsilon: f64,
    pub hidden: usize,
    pub channels: usize,
    pub dropout: f64,
    pub activation: Activation,
    pub learn_rk_weights: bool,
}

impl ModelSettings {
    pub fn from_args(a: &ModelArgs) -> Self {
        ModelSettings {
            width: a.width,
            heads: a.heads,
            layers: a.layers,
            rk: a.rk,
            epsilon: a.epsilon,
            hidden: a.hidden,
            channels: a.channels.unwrap_or(a.heads + 1),
            dropout: a.dropout,
            activation: a.activation,
            learn_rk_weights: !a.freeze_rk_weights,
        }
    }

    pub fn resolve(
        &self,
        num_features: usize,
        num_classes: usize,
    ) -> gnodeformer::Result<ModelConfig> {
        let config = ModelConfig {
            width: self.width,
            heads: self.heads,
            layers: self.layers,
            rk_order: self.rk,
            epsilon: self.epsilon,
            hidden: self.hidden,
            channels: self.channels,
            num_features,
            num_classes,
            dropout: self.dropout,
            activation: self.activation,
            learn_rk_weights: self.learn_rk_weights,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Everything a training command needs; the output directory is kept out of
/// the manifest so a rerun can write elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub source: DataSource,
    pub symmetrize: bool,
    pub model: ModelSettings,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub split: SplitFractions,
    pub federated_split: bool,
    pub clients: usize,
    pub alpha: f64,
    pub rounds: usize,
    pub local_epochs: usize,
    pub fraction_fit: f64,
    pub threads: usize,
    pub checkpoint_every: usize,
    pub cache_dir: Option<PathBuf>,
}

fn parse_split(s: &str) -> CliResult<SplitFractions> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            CliError::Usage(format!("split {s:?} is not three comma-separated numbers"))
        })?;
    match parts[..] {
        [train, val, test] => Ok(SplitFractions::new(train, val, test)?),
        _ => Err(CliError::Usage(format!(
            "split {s:?} needs three fractions"
        ))),
    }
}

impl RunConfig {
    pub fn from_args(mode: Mode, a: &TrainArgs) -> CliResult<Self> {
        let config = RunConfig {
            mode,
            source: DataSource::from_args(&a.source)?,
            symmetrize: a.symmetrize,
            model: ModelSettings::from_args(&a.model),
            lr: a.lr,
            weight_decay: a.weight_decay,
            epochs: a.epochs,
            patience: a.patience,
            seed: a.seed,
            split: parse_split(&a.split)?,
            federated_split: a.federated_split,
            clients: a.clients,
            alpha: a.alpha,
            rounds: a.rounds,
            local_epochs: a.local_epochs,
            fraction_fit: a.fraction_fit,
            threads: a.threads,
            checkpoint_every: a.checkpoint_every,
            cache_dir: a.cache_dir.clone(),
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks everything that does not depend on the dataset.
    pub fn validate(&self) -> CliResult<()> {
        self.adam().validate()?;
        self.split.validate()?;
        // A placeholder input size lets the model checks run before loading.
        self.model.resolve(1, 1)?;
        if self.mode == Mode::Federated || self.federated_split {
            self.fed_config(self.model.resolve(1, 1)?).validate()?;
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            patience: (self.patience > 0).then_some(self.patience),
            restore_best: true,
            adam: self.adam(),
            seed: self.seed,
        }
    }

    pub fn fed_config(&self, model: ModelConfig) -> FedConfig {
        FedConfig {
            clients: self.clients,
            alpha: self.alpha,
            fraction_fit: self.fraction_fit,
            rounds: self.rounds,
            local_epochs: self.local_epochs,
            seed: self.seed,
            model,
            adam: self.adam(),
            split: self.split,
            threads: self.threads,
            cache_dir: self.cache_dir.clone(),
        }
    }

    pub fn to_manifest(&self) -> String {
        let m = &self.model;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k}={v}").expect("writing to a string");
        kv("schema", MANIFEST_SCHEMA.to_string());
        kv("metrics_schema", METRICS_SCHEMA.to_string());
        kv("command", self.mode.command().into());
        match &self.source {
            DataSource::Dir(p) => kv("dataset", p.display().to_string()),
            DataSource::Sbm(spec) => kv("sbm", spec.to_string()),
        }
        kv("symmetrize", self.symmetrize.to_string());
        kv("seed", self.seed.to_string());
        kv("width", m.width.to_string());
        kv("heads", m.heads.to_string());
        kv("layers", m.layers.to_string());
        kv("rk", m.rk.to_string());
        kv("epsilon", format!("{:?}", m.epsilon));
        kv("hidden", m.hidden.to_string());
        kv("channels", m.channels.to_string());
        kv("dropout", format!("{:?}", m.dropout));
        kv("activation", m.activation.to_string());
        kv("learn_rk_weights", m.learn_rk_weights.to_string());
        kv("lr", format!("{:?}", self.lr));
        kv("weight_decay", format!("{:?}", self.weight_decay));
        kv("epochs", self.epochs.to_string());
        kv("patience", self.patience.to_string());
        kv(
            "split",
            format!(
                "{:?},{:?},{:?}",
                self.split.train, self.split.val, self.split.test
            ),
        );
        kv("federated_split", self.federated_split.to_string());
        kv("clients", self.clients.to_string());
        kv("alpha", format!("{:?}", self.alpha));
        kv("rounds", self.rounds.to_string());
        kv("local_epochs", self.local_epochs.to_string());
        kv("fraction_fit", format!("{:?}", self.fraction_fit));
        kv("threads", self.threads.to_string());
        kv("checkpoint_every", self.checkpoint_every.to_string());
        if let Some(dir) = &self.cache_dir {
            kv("cache_dir", dir.display().to_string());
        }
        s
    }

    pub fn from_manifest(text: &str, path: &Path) -> CliResult<Self> {
        let bad = |msg: String| CliError::Manifest {
            path: path.to_path_buf(),
            msg,
        };
        let mut entries: Vec<(String, String)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {} has no '='", i + 1)))?;
            if entries.iter().any(|(seen, _)| seen == k.trim()) {
                return Err(bad(format!("duplicate key {}", k.trim())));
            }
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut take = |key: &str| -> Option<String> {
            let i = entries.iter().position(|(k, _)| k == key)?;
            Some(entries.remove(i).1)
        };
        fn parse<T: FromStr>(key: &str, v: Option<String>, path: &Path) -> CliResult<T> {
            let v = v.ok_or_else(|| CliError::Manifest {
                path: path.to_path_buf(),
                msg: format!("missing key {key}"),
            })?;
            v.parse().map_err(|_| CliError::Manifest {
                path: path.to_path_buf(),
                msg: format!("bad value {v:?} for {key}"),
            })
        }
        let schema: u32 = parse("schema", take("schema"), path)?;
        let metrics_schema: u32 = parse("metrics_schema", take("metrics_schema"), path)?;
        if schema != MANIFEST_SCHEMA || metrics_schema != METRICS_SCHEMA {
            return Err(bad(format!(
                "unsupported schema {schema}/{metrics_schema}, expected {MANIFEST_SCHEMA}/{METRICS_SCHEMA}"
            )));
        }
        let mode = match take("command").as_deref() {
            Some("train-centralized") => Mode::Centralized,
            Some("train-federated") => Mode::Federated,
            other => return Err(bad(format!("unknown command {other:?}"))),
        };
        let source = match (take("dataset"), take("sbm")) {
            (Some(d), None) => DataSource::Dir(PathBuf::from(d)),
            (None, Some(spec)) => DataSource::Sbm(spec.parse::<SbmSpec>()?),
            _ => return Err(bad("exactly one of dataset and sbm is required".into())),
        };
        let symmetrize = parse("symmetrize", take("symmetrize"), path)?;
        let seed = parse("seed", take("seed"), path)?;
        let model = ModelSettings {
            width: parse("width", take("width"), path)?,
            heads: parse("heads", take("heads"), path)?,
            layers: parse("layers", take("layers"), path)?,
            rk: parse("rk", take("rk"), path)?,
            epsilon: parse("epsilon", take("epsilon"), path)?,
            hidden: parse("hidden", take("hidden"), path)?,
            channels: parse("channels", take("channels"), path)?,
            dropout: parse("dropout", take("dropout"), path)?,
            activation: parse("activation", take("activation"), path)?,
            learn_rk_weights: parse("learn_rk_weights", take("learn_rk_weights"), path)?,
        };
        let config = RunConfig {
            mode,
            source,
            symmetrize,
            model,
            lr: parse("lr", take("lr"), path)?,
            weight_decay: parse("weight_decay", take("weight_decay"), path)?,
            epochs: parse("epochs", take("epochs"), path)?,
            patience: parse("patience", take("patience"), path)?,
            seed,
            split: parse_split(&take("split").ok_or_else(|| bad("missing key split".into()))?)?,
            federated_split: parse("federated_split", take("federated_split"), path)?,
            clients: parse("clients", take("clients"), path)?,
            alpha: parse("alpha", take("alpha"), path)?,
            rounds: parse("rounds", take("rounds"), path)?,
            local_epochs: parse("local_epochs", take("local_epochs"), path)?,
            fraction_fit: parse("fraction_fit", take("fraction_fit"), path)?,
            threads: parse("threads", take("threads"), path)?,
            checkpoint_every: parse("checkpoint_every", take("checkpoint_every"), path)?,
            cache_dir: take("cache_dir").map(PathBuf::from),
        };
        if let Some((k, _)) = entries.first() {
            return Err(bad(format!("unknown key {k}")));
        }
        config.validate()?;
        Ok(config)
    }
}

//! Effective run configuration: defaults, then a `key = value` file, then
//! command-line flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use recos::layers::PoolKind;
use recos::lenet::{DumpStage, TrainConfig};
use recos::Activation;

use crate::error::CliError;

pub const DATA_DIR_ENV: &str = "RECOS_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "data/mnist";

/// Which test set `eval` scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalSet {
    Clean,
    Reversed,
    Background,
}

impl fmt::Display for EvalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalSet::Clean => "clean",
            EvalSet::Reversed => "reversed",
            EvalSet::Background => "background",
        })
    }
}

impl FromStr for EvalSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "clean" => Ok(EvalSet::Clean),
            "reversed" => Ok(EvalSet::Reversed),
            "background" => Ok(EvalSet::Background),
            other => Err(format!("unknown eval set {other:?} (clean, reversed, background)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub seed: u64,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub momentum: f64,
    pub activation: Activation,
    pub pooling: PoolKind,
    pub deterministic: bool,
    /// First `n` training images only; `None` uses all of them.
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub eval_set: EvalSet,
    pub image_index: usize,
    pub stage: DumpStage,
    pub synthetic: bool,
    /// `N,K,L` of the synthetic anchor matrices.
    pub dims: [usize; 3],
    pub identity_a: bool,
    pub cascade_samples: usize,
    pub textures: usize,
    pub background_seed: u64,
}

/// Every key accepted in a config file, in echo order.
pub const KEYS: &[&str] = &[
    "data_dir",
    "out_dir",
    "checkpoint",
    "seed",
    "epochs",
    "batch",
    "lr",
    "momentum",
    "activation",
    "pooling",
    "deterministic",
    "train_limit",
    "test_limit",
    "eval_set",
    "image_index",
    "stage",
    "synthetic",
    "dims",
    "identity_a",
    "cascade_samples",
    "textures",
    "background_seed",
];

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        RunConfig {
            data_dir: PathBuf::from(DEFAULT_DATA_DIR),
            out_dir: PathBuf::from("out"),
            checkpoint: None,
            seed: t.seed,
            epochs: t.epochs,
            batch: t.batch,
            lr: t.lr,
            momentum: t.momentum,
            activation: t.activation,
            pooling: t.pooling,
            deterministic: t.deterministic,
            train_limit: None,
            test_limit: None,
            eval_set: EvalSet::Clean,
            image_index: 0,
            stage: DumpStage::PostPool,
            synthetic: false,
            dims: [25, 6, 16],
            identity_a: false,
            cascade_samples: 100,
            textures: 10,
            background_seed: 7,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_limit(key: &str, value: &str) -> Result<Option<usize>, CliError> {
    match value {
        "" | "all" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(CliError::Config(format!(
            "{key}: expected true or false, got {other:?}"
        ))),
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl RunConfig {
    /// Defaults with `RECOS_DATA_DIR` applied when set.
    pub fn from_env() -> Self {
        let mut cfg = RunConfig::default();
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV).filter(|d| !d.is_empty()) {
            cfg.data_dir = PathBuf::from(dir);
        }
        cfg
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = normalize_key(key);
        let v = value.trim();
        match key.as_str() {
            "data_dir" => self.data_dir = PathBuf::from(v),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "checkpoint" => self.checkpoint = (!v.is_empty()).then(|| PathBuf::from(v)),
            "seed" => self.seed = parse(&key, v)?,
            "epochs" => self.epochs = parse(&key, v)?,
            "batch" => self.batch = parse(&key, v)?,
            "lr" => self.lr = parse(&key, v)?,
            "momentum" => self.momentum = parse(&key, v)?,
            "activation" => self.activation = parse(&key, v)?,
            "pooling" => self.pooling = parse(&key, v)?,
            "deterministic" => self.deterministic = parse_bool(&key, v)?,
            "train_limit" => self.train_limit = parse_limit(&key, v)?,
            "test_limit" => self.test_limit = parse_limit(&key, v)?,
            "eval_set" => self.eval_set = parse(&key, v)?,
            "image_index" => self.image_index = parse(&key, v)?,
            "stage" => {
                self.stage = match v {
                    "prepool" => DumpStage::PrePool,
                    "postpool" => DumpStage::PostPool,
                    other => {
                        return Err(CliError::Config(format!(
                            "stage: expected prepool or postpool, got {other:?}"
                        )))
                    }
                }
            }
            "synthetic" => self.synthetic = parse_bool(&key, v)?,
            "dims" => {
                let parts: Vec<usize> = v
                    .split(',')
                    .map(|p| parse::<usize>(&key, p.trim()))
                    .collect::<Result<_, _>>()?;
                match parts[..] {
                    [n, k, l] if n > 0 && k > 0 && l > 0 => self.dims = [n, k, l],
                    _ => {
                        return Err(CliError::Config(format!(
                            "dims: expected three positive N,K,L, got {v:?}"
                        )))
                    }
                }
            }
            "identity_a" => self.identity_a = parse_bool(&key, v)?,
            "cascade_samples" => self.cascade_samples = parse(&key, v)?,
            "textures" => self.textures = parse(&key, v)?,
            "background_seed" => self.background_seed = parse(&key, v)?,
            other => return Err(CliError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are
    /// skipped; unknown and repeated keys are errors.
    pub fn apply_file_text(&mut self, text: &str, origin: &Path) -> Result<(), CliError> {
        let mut seen = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{}:{}: expected key = value", origin.display(), n + 1)))?;
            let key = normalize_key(k);
            if seen.contains(&key) {
                return Err(CliError::Config(format!(
                    "{}:{}: key {key:?} given twice",
                    origin.display(),
                    n + 1
                )));
            }
            self.set(&key, v)
                .map_err(|e| CliError::Config(format!("{}:{}: {}", origin.display(), n + 1, e.message())))?;
            seen.push(key);
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_file_text(&text, path)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            momentum: self.momentum,
            batch: self.batch,
            epochs: self.epochs,
            seed: self.seed,
            pooling: self.pooling,
            activation: self.activation,
            deterministic: self.deterministic,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train_config().validate()?;
        if self.textures > 10 {
            return Err(CliError::Config(format!("textures: at most 10, got {}", self.textures)));
        }
        Ok(())
    }

    /// Every key with its effective value, in [`KEYS`] order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let limit = |l: Option<usize>| l.map_or_else(|| "all".to_owned(), |n| n.to_string());
        let values = [
            self.data_dir.display().to_string(),
            self.out_dir.display().to_string(),
            self.checkpoint
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            self.seed.to_string(),
            self.epochs.to_string(),
            self.batch.to_string(),
            self.lr.to_string(),
            self.momentum.to_string(),
            self.activation.to_string(),
            self.pooling.to_string(),
            self.deterministic.to_string(),
            limit(self.train_limit),
            limit(self.test_limit),
            self.eval_set.to_string(),
            self.image_index.to_string(),
            match self.stage {
                DumpStage::PrePool => "prepool".into(),
                DumpStage::PostPool => "postpool".into(),
            },
            self.synthetic.to_string(),
            format!("{},{},{}", self.dims[0], self.dims[1], self.dims[2]),
            self.identity_a.to_string(),
            self.cascade_samples.to_string(),
            self.textures.to_string(),
            self.background_seed.to_string(),
        ];
        KEYS.iter().map(|k| k.to_string()).zip(values).collect()
    }
}

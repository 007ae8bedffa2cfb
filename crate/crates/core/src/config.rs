//! Run configuration and its flat `key = value` text format.
//!
//! Grammar: one `key = value` per line; `#` starts a comment; blank lines
//! are ignored; values may be wrapped in double quotes. Keys are dotted
//! (`section.name`). Every key is optional and falls back to the default
//! listed in [`KEYS`].

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::ConfigError;
use crate::optim::{OptimizerConfig, OptimizerName, StableSpamConfig, TransformKind};
use crate::quant::{QuantFormat, QuantSpec};

/// Every accepted key with its default, in canonical order.
pub const KEYS: &[(&str, &str)] = &[
    ("run.seed", "0"),
    ("run.total_steps", "2000"),
    ("run.divergence_loss", "1e10"),
    ("schedule.lr", "0.001"),
    ("schedule.warmup_steps", "10% of run.total_steps"),
    ("schedule.min_lr_ratio", "0.1"),
    ("model.kind", "mlp"),
    ("model.input_dim", "16"),
    ("model.hidden", "32"),
    ("model.depth", "2"),
    ("model.classes", "4"),
    ("model.train_size", "2048"),
    ("model.val_size", "512"),
    ("model.batch_size", "32"),
    ("model.separation", "1.0"),
    ("model.dim", "8"),
    ("quant.format", "none"),
    ("spikes.probability", "0"),
    ("spikes.severity", "0"),
    ("optimizer.name", "adam"),
    ("optimizer.profile", "low_precision"),
    ("optimizer.beta1", "0.9"),
    ("optimizer.beta2", "0.999"),
    ("optimizer.eps", "1e-6"),
    ("optimizer.gamma1", "0.7 (0.85 full_precision)"),
    ("optimizer.gamma2", "0.9 (0.99999 full_precision)"),
    ("optimizer.gamma3", "0.999"),
    ("optimizer.reset_interval", "1000 stable_spam, 500 spam, none otherwise"),
    ("optimizer.warmup_steps", "150"),
    ("optimizer.spike_threshold", "5000"),
    ("optimizer.grad_clip", "1.0"),
    ("optimizer.transforms", "(empty)"),
    ("optimizer.adafactor.eps1", "1e-30"),
    ("optimizer.adafactor.eps2", "1e-3"),
    ("optimizer.adafactor.clip_threshold", "1.0"),
    ("optimizer.adafactor.decay_rate", "0.8"),
    ("optimizer.adafactor.scale_parameter", "false"),
    ("optimizer.lion.beta1", "0.9"),
    ("optimizer.lion.beta2", "0.99"),
    ("optimizer.lion.weight_decay", "0"),
    ("sweep.lr_grid", "narrow"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mlp,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub hidden: usize,
    pub depth: usize,
    pub classes: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub batch_size: usize,
    pub separation: f64,
    /// Dimension of the quadratic testbed.
    pub dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Mlp,
            input_dim: 16,
            hidden: 32,
            depth: 2,
            classes: 4,
            train_size: 2048,
            val_size: 512,
            batch_size: 32,
            separation: 1.0,
            dim: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    pub lr_peak: f64,
    pub warmup_steps: u64,
    /// Final LR as a fraction of the peak.
    pub min_lr_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpikeConfig {
    pub probability: f64,
    pub severity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub total_steps: u64,
    /// Losses above this (or non-finite) count as divergence.
    pub divergence_loss: f64,
    pub schedule: ScheduleConfig,
    pub model: ModelConfig,
    pub quant: QuantSpec,
    pub spikes: SpikeConfig,
    pub optimizer: OptimizerConfig,
    pub lr_grid: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config_str("").expect("defaults are valid")
    }
}

/// Named learning-rate grids.
pub fn lr_grid_preset(name: &str) -> Option<Vec<f64>> {
    match name {
        // 1e-4 to 1e-3 in steps of 2e-4
        "narrow" => Some(vec![1e-4, 3e-4, 5e-4, 7e-4, 9e-4]),
        // 1e-4 to 3e-3
        "wide" => Some(vec![1e-4, 3e-4, 5e-4, 1e-3, 3e-3]),
        _ => None,
    }
}

/// Parses `a:b:step` (inclusive of `b` up to rounding), a preset name, or a
/// comma-separated list.
pub fn parse_lr_grid(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if let Some(g) = lr_grid_preset(s) {
        return Ok(g);
    }
    let parts: Vec<&str> = s.split(':').collect();
    let grid = if parts.len() == 3 {
        let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
        let nums = nums.map_err(|e| format!("bad number in `{s}`: {e}"))?;
        let (a, b, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || !(b >= a) {
            return Err(format!("range `{s}` needs step > 0 and end >= start"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| a + i as f64 * step).collect()
    } else {
        let nums: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
        nums.map_err(|e| format!("bad learning-rate list `{s}`: {e}"))?
    };
    if grid.is_empty() || grid.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(format!("learning rates in `{s}` must be positive and finite"));
    }
    Ok(grid)
}

struct Entry {
    value: String,
    line: usize,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
}

impl Reader {
    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| ConfigError::InvalidValue {
                key: key.to_string(),
                line: e.line,
                message: format!("`{}`: {err}", e.value),
            }),
        }
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn with<T>(&self, key: &str, default: T, f: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(e) => f(&e.value).map_err(|message| ConfigError::InvalidValue {
                key: key.to_string(),
                line: e.line,
                message,
            }),
        }
    }

    fn constraint(&self, key: &str, ok: bool, message: &str) -> Result<(), ConfigError> {
        if ok {
            return Ok(());
        }
        match self.entries.get(key) {
            Some(e) => Err(ConfigError::InvalidValue {
                key: key.to_string(),
                line: e.line,
                message: message.to_string(),
            }),
            None => Err(ConfigError::Constraint {
                key: key.to_string(),
                message: message.to_string(),
            }),
        }
    }
}

fn parse_interval(s: &str) -> Result<Option<u64>, String> {
    match s {
        "none" | "inf" | "never" => Ok(None),
        _ => match s.parse::<u64>() {
            Ok(0) => Err("reset interval must be >= 1 (or `none`)".into()),
            Ok(n) => Ok(Some(n)),
            Err(e) => Err(format!("`{s}`: {e}")),
        },
    }
}

fn parse_transforms(s: &str) -> Result<Vec<TransformKind>, String> {
    let list: Vec<TransformKind> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    for (i, t) in list.iter().enumerate() {
        if list[..i].contains(t) {
            return Err(format!("transform `{t}` listed more than once"));
        }
    }
    Ok(list)
}

fn tokenize(text: &str) -> Result<BTreeMap<String, Entry>, ConfigError> {
    let mut entries = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Malformed { line });
        };
        let key = key.trim().to_string();
        let mut value = value.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if key.is_empty() {
            return Err(ConfigError::Malformed { line });
        }
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(ConfigError::UnknownKey { key, line });
        }
        if entries.contains_key(&key) {
            return Err(ConfigError::DuplicateKey { key, line });
        }
        entries.insert(
            key,
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    Ok(entries)
}

/// Parses and validates config text.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let r = Reader {
        entries: tokenize(text)?,
    };

    let seed = r.get("run.seed", 0u64)?;
    let total_steps = r.get("run.total_steps", 2000u64)?;
    let divergence_loss = r.get("run.divergence_loss", 1e10f64)?;
    r.constraint("run.divergence_loss", divergence_loss > 0.0, "must be > 0")?;

    let lr_peak = r.get("schedule.lr", 1e-3f64)?;
    r.constraint("schedule.lr", lr_peak > 0.0 && lr_peak.is_finite(), "must be > 0")?;
    let warmup_steps = r.get("schedule.warmup_steps", total_steps / 10)?;
    r.constraint(
        "schedule.warmup_steps",
        warmup_steps <= total_steps,
        "must not exceed run.total_steps",
    )?;
    let min_lr_ratio = r.get("schedule.min_lr_ratio", 0.1f64)?;
    r.constraint(
        "schedule.min_lr_ratio",
        (0.0..=1.0).contains(&min_lr_ratio),
        "must be in [0, 1]",
    )?;

    let d = ModelConfig::default();
    let kind = r.with("model.kind", d.kind, |s| match s {
        "mlp" => Ok(ModelKind::Mlp),
        "quadratic" => Ok(ModelKind::Quadratic),
        other => Err(format!("unknown model `{other}` (expected mlp|quadratic)")),
    })?;
    let model = ModelConfig {
        kind,
        input_dim: r.get("model.input_dim", d.input_dim)?,
        hidden: r.get("model.hidden", d.hidden)?,
        depth: r.get("model.depth", d.depth)?,
        classes: r.get("model.classes", d.classes)?,
        train_size: r.get("model.train_size", d.train_size)?,
        val_size: r.get("model.val_size", d.val_size)?,
        batch_size: r.get("model.batch_size", d.batch_size)?,
        separation: r.get("model.separation", d.separation)?,
        dim: r.get("model.dim", d.dim)?,
    };
    for (key, v) in [
        ("model.input_dim", model.input_dim),
        ("model.hidden", model.hidden),
        ("model.classes", model.classes),
        ("model.train_size", model.train_size),
        ("model.val_size", model.val_size),
        ("model.batch_size", model.batch_size),
        ("model.dim", model.dim),
    ] {
        r.constraint(key, v > 0, "must be > 0")?;
    }
    r.constraint("model.classes", model.classes >= 2, "need at least 2 classes")?;

    let format = r.get("quant.format", QuantFormat::None)?;

    let spikes = SpikeConfig {
        probability: r.get("spikes.probability", 0.0)?,
        severity: r.get("spikes.severity", 0.0)?,
    };
    r.constraint(
        "spikes.probability",
        (0.0..=1.0).contains(&spikes.probability),
        "must be in [0, 1]",
    )?;
    r.constraint("spikes.severity", spikes.severity >= 0.0, "must be >= 0")?;

    let optimizer = parse_optimizer(&r)?;
    let lr_grid = r.with("sweep.lr_grid", lr_grid_preset("narrow").unwrap(), parse_lr_grid)?;

    Ok(RunConfig {
        seed,
        total_steps,
        divergence_loss,
        schedule: ScheduleConfig {
            lr_peak,
            warmup_steps,
            min_lr_ratio,
        },
        model,
        quant: QuantSpec::new(format),
        spikes,
        optimizer,
        lr_grid,
    })
}

fn parse_optimizer(r: &Reader) -> Result<OptimizerConfig, ConfigError> {
    let name: OptimizerName = r.get("optimizer.name", OptimizerName::Adam)?;
    let mut cfg = OptimizerConfig::named(name);

    let full = r.with("optimizer.profile", false, |s| match s {
        "low_precision" => Ok(false),
        "full_precision" => Ok(true),
        other => Err(format!("unknown profile `{other}` (expected low_precision|full_precision)")),
    })?;
    let ss = if full {
        StableSpamConfig::full_precision()
    } else {
        StableSpamConfig::low_precision()
    };

    cfg.adam.beta1 = r.get("optimizer.beta1", cfg.adam.beta1)?;
    cfg.adam.beta2 = r.get("optimizer.beta2", cfg.adam.beta2)?;
    cfg.adam.eps = r.get("optimizer.eps", cfg.adam.eps)?;
    for key in ["optimizer.beta1", "optimizer.beta2"] {
        let v = if key.ends_with('1') { cfg.adam.beta1 } else { cfg.adam.beta2 };
        r.constraint(key, (0.0..1.0).contains(&v), "must be in [0, 1)")?;
    }
    r.constraint("optimizer.eps", cfg.adam.eps > 0.0, "must be > 0")?;

    cfg.stable_spam.gamma1 = r.get("optimizer.gamma1", ss.gamma1)?;
    cfg.stable_spam.gamma2 = r.get("optimizer.gamma2", ss.gamma2)?;
    cfg.stable_spam.gamma3 = r.get("optimizer.gamma3", ss.gamma3)?;
    for (key, v) in [
        ("optimizer.gamma1", cfg.stable_spam.gamma1),
        ("optimizer.gamma2", cfg.stable_spam.gamma2),
        ("optimizer.gamma3", cfg.stable_spam.gamma3),
    ] {
        r.constraint(key, v > 0.0 && v < 1.0, "must be in (0, 1)")?;
    }

    let interval_default = match name {
        OptimizerName::StableSpam => Some(ss.reset_interval),
        OptimizerName::Spam => cfg.spam.reset_interval,
        _ => None,
    };
    let interval = r.with("optimizer.reset_interval", interval_default, parse_interval)?;
    match name {
        OptimizerName::StableSpam => {
            let Some(dt) = interval else {
                return Err(ConfigError::Constraint {
                    key: "optimizer.reset_interval".into(),
                    message: "stable_spam needs a finite reset interval".into(),
                });
            };
            cfg.stable_spam.reset_interval = dt;
        }
        OptimizerName::Spam => cfg.spam.reset_interval = interval,
        _ => cfg.moret_interval = interval,
    }
    if interval.is_some() && !matches!(name, OptimizerName::StableSpam | OptimizerName::Spam | OptimizerName::Adam | OptimizerName::AdamGradClip) {
        r.constraint("optimizer.reset_interval", false, "only adam, adam_gradclip, spam and stable_spam reset moments")?;
    }

    cfg.spam.warmup_steps = r.get("optimizer.warmup_steps", cfg.spam.warmup_steps)?;
    cfg.spam.threshold = r.get("optimizer.spike_threshold", cfg.spam.threshold)?;
    r.constraint("optimizer.spike_threshold", cfg.spam.threshold > 0.0, "must be > 0")?;
    cfg.grad_clip_threshold = r.get("optimizer.grad_clip", cfg.grad_clip_threshold)?;
    r.constraint("optimizer.grad_clip", cfg.grad_clip_threshold > 0.0, "must be > 0")?;
    cfg.transforms = r.with("optimizer.transforms", Vec::new(), parse_transforms)?;
    if cfg.transforms.contains(&TransformKind::SpikeClip) {
        r.constraint(
            "optimizer.transforms",
            matches!(name, OptimizerName::Adam | OptimizerName::AdamGradClip | OptimizerName::Spam | OptimizerName::StableSpam),
            "spikeclip needs a base optimizer with a second moment",
        )?;
    }

    let af = &mut cfg.adafactor;
    af.eps1 = r.get("optimizer.adafactor.eps1", af.eps1)?;
    af.eps2 = r.get("optimizer.adafactor.eps2", af.eps2)?;
    af.clip_threshold = r.get("optimizer.adafactor.clip_threshold", af.clip_threshold)?;
    af.decay_rate = r.get("optimizer.adafactor.decay_rate", af.decay_rate)?;
    af.scale_parameter = r.get("optimizer.adafactor.scale_parameter", af.scale_parameter)?;
    r.constraint("optimizer.adafactor.clip_threshold", af.clip_threshold > 0.0, "must be > 0")?;

    cfg.lion.beta1 = r.get("optimizer.lion.beta1", cfg.lion.beta1)?;
    cfg.lion.beta2 = r.get("optimizer.lion.beta2", cfg.lion.beta2)?;
    cfg.lion.weight_decay = r.get("optimizer.lion.weight_decay", cfg.lion.weight_decay)?;
    Ok(cfg)
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

fn fmt_interval(i: Option<u64>) -> String {
    i.map_or_else(|| "none".to_string(), |n| n.to_string())
}

impl RunConfig {
    /// Every key with its resolved value, in canonical order. Feeding the
    /// rendered lines back through the parser reproduces this config.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let o = &self.optimizer;
        let interval = match o.name {
            OptimizerName::StableSpam => Some(o.stable_spam.reset_interval),
            OptimizerName::Spam => o.spam.reset_interval,
            _ => o.moret_interval,
        };
        let transforms: Vec<&str> = o.transforms.iter().map(|t| t.as_str()).collect();
        let grid: Vec<String> = self.lr_grid.iter().map(|x| x.to_string()).collect();
        vec![
            ("run.seed", self.seed.to_string()),
            ("run.total_steps", self.total_steps.to_string()),
            ("run.divergence_loss", self.divergence_loss.to_string()),
            ("schedule.lr", self.schedule.lr_peak.to_string()),
            ("schedule.warmup_steps", self.schedule.warmup_steps.to_string()),
            ("schedule.min_lr_ratio", self.schedule.min_lr_ratio.to_string()),
            (
                "model.kind",
                match self.model.kind {
                    ModelKind::Mlp => "mlp".into(),
                    ModelKind::Quadratic => "quadratic".into(),
                },
            ),
            ("model.input_dim", self.model.input_dim.to_string()),
            ("model.hidden", self.model.hidden.to_string()),
            ("model.depth", self.model.depth.to_string()),
            ("model.classes", self.model.classes.to_string()),
            ("model.train_size", self.model.train_size.to_string()),
            ("model.val_size", self.model.val_size.to_string()),
            ("model.batch_size", self.model.batch_size.to_string()),
            ("model.separation", self.model.separation.to_string()),
            ("model.dim", self.model.dim.to_string()),
            ("quant.format", self.quant.format.to_string()),
            ("spikes.probability", self.spikes.probability.to_string()),
            ("spikes.severity", self.spikes.severity.to_string()),
            ("optimizer.name", o.name.to_string()),
            ("optimizer.beta1", o.adam.beta1.to_string()),
            ("optimizer.beta2", o.adam.beta2.to_string()),
            ("optimizer.eps", o.adam.eps.to_string()),
            ("optimizer.gamma1", o.stable_spam.gamma1.to_string()),
            ("optimizer.gamma2", o.stable_spam.gamma2.to_string()),
            ("optimizer.gamma3", o.stable_spam.gamma3.to_string()),
            ("optimizer.reset_interval", fmt_interval(interval)),
            ("optimizer.warmup_steps", o.spam.warmup_steps.to_string()),
            ("optimizer.spike_threshold", o.spam.threshold.to_string()),
            ("optimizer.grad_clip", o.grad_clip_threshold.to_string()),
            ("optimizer.transforms", transforms.join(",")),
            ("optimizer.adafactor.eps1", o.adafactor.eps1.to_string()),
            ("optimizer.adafactor.eps2", o.adafactor.eps2.to_string()),
            ("optimizer.adafactor.clip_threshold", o.adafactor.clip_threshold.to_string()),
            ("optimizer.adafactor.decay_rate", o.adafactor.decay_rate.to_string()),
            ("optimizer.adafactor.scale_parameter", o.adafactor.scale_parameter.to_string()),
            ("optimizer.lion.beta1", o.lion.beta1.to_string()),
            ("optimizer.lion.beta2", o.lion.beta2.to_string()),
            ("optimizer.lion.weight_decay", o.lion.weight_decay.to_string()),
            ("sweep.lr_grid", grid.join(",")),
        ]
    }

    pub fn to_config_string(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Keys outside the `optimizer.` block (and the sweep grid) whose values
    /// differ between two configs.
    pub fn non_optimizer_differences(&self, other: &RunConfig) -> Vec<&'static str> {
        self.entries()
            .into_iter()
            .zip(other.entries())
            .filter(|((k, a), (_, b))| !k.starts_with("optimizer.") && *k != "sweep.lr_grid" && a != b)
            .map(|((k, _), _)| k)
            .collect()
    }
}

//! Hyperparameters and the line-oriented `key = value` config format.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    Standard,
    /// Required by finite-difference gradient checks.
    High,
}

/// Which aggregation branches feed the fused representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ablation {
    Full,
    LocalOnly,
    GlobalOnly,
}

impl FromStr for Ablation {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "local-only" => Ok(Self::LocalOnly),
            "global-only" => Ok(Self::GlobalOnly),
            other => Err(invalid(format!("unknown ablation {other:?}"))),
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::LocalOnly => "local-only",
            Self::GlobalOnly => "global-only",
        })
    }
}

impl FromStr for Precision {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "high" => Ok(Self::High),
            other => Err(invalid(format!("unknown precision {other:?}"))),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Standard => "standard",
            Self::High => "high",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Multiplicative learning-rate decay applied every `decay_every` iterations.
    pub decay: f64,
    pub decay_every: usize,
    pub iters: usize,
    pub batch: usize,
    /// Weight of the contrastive term in the total loss.
    pub gamma: f64,
    /// Contrastive softmax temperature.
    pub tau: f64,
    /// Neighbors per node in the k-NN relations.
    pub k: usize,
    /// Node feature dimension.
    pub d: usize,
    /// Linear GCN layers per branch.
    pub layers: usize,
    pub patch: usize,
    pub stride: usize,
    pub seed: u64,
    pub precision: Precision,
    pub ablation: Ablation,
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            decay: 0.85,
            decay_every: 3000,
            iters: 30_000,
            batch: 4,
            gamma: 0.01,
            tau: 0.5,
            k: 8,
            d: 64,
            layers: 2,
            patch: 8,
            stride: 4,
            seed: 0,
            precision: Precision::Standard,
            ablation: Ablation::Full,
            checkpoint_every: 1000,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| invalid(format!("bad value {value:?} for {key}")))
}

impl TrainConfig {
    /// Sets one field by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "lr0" => self.lr0 = parse(key, v)?,
            "adam_beta1" => self.adam_beta1 = parse(key, v)?,
            "adam_beta2" => self.adam_beta2 = parse(key, v)?,
            "adam_eps" => self.adam_eps = parse(key, v)?,
            "decay" => self.decay = parse(key, v)?,
            "decay_every" => self.decay_every = parse(key, v)?,
            "iters" => self.iters = parse(key, v)?,
            "batch" => self.batch = parse(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "tau" => self.tau = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "d" => self.d = parse(key, v)?,
            "layers" | "l" => self.layers = parse(key, v)?,
            "patch" => self.patch = parse(key, v)?,
            "stride" => self.stride = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "precision" => self.precision = v.parse()?,
            "ablation" => self.ablation = v.parse()?,
            "checkpoint_every" => self.checkpoint_every = parse(key, v)?,
            other => return Err(invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of a config file. `#` starts a
    /// comment; blank lines are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("line {}: expected key = value", no + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr0", self.lr0),
            ("adam_eps", self.adam_eps),
            ("tau", self.tau),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(invalid("decay must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(invalid("Adam betas must lie in [0, 1)"));
        }
        if !(self.gamma >= 0.0) {
            return Err(invalid("gamma must be non-negative"));
        }
        for (name, v) in [
            ("batch", self.batch),
            ("k", self.k),
            ("d", self.d),
            ("layers", self.layers),
            ("patch", self.patch),
            ("stride", self.stride),
            ("decay_every", self.decay_every),
        ] {
            if v == 0 {
                return Err(invalid(format!("{name} must be at least 1")));
            }
        }
        if self.stride > self.patch {
            return Err(invalid("stride must not exceed the patch size"));
        }
        Ok(())
    }

    /// `key = value` rendering that [`apply_text`](Self::apply_text) reads back.
    pub fn to_text(&self) -> String {
        format!(
            "lr0 = {}\nadam_beta1 = {}\nadam_beta2 = {}\nadam_eps = {}\ndecay = {}\n\
             decay_every = {}\niters = {}\nbatch = {}\ngamma = {}\ntau = {}\nk = {}\nd = {}\n\
             layers = {}\npatch = {}\nstride = {}\nseed = {}\nprecision = {}\nablation = {}\n\
             checkpoint_every = {}\n",
            self.lr0,
            self.adam_beta1,
            self.adam_beta2,
            self.adam_eps,
            self.decay,
            self.decay_every,
            self.iters,
            self.batch,
            self.gamma,
            self.tau,
            self.k,
            self.d,
            self.layers,
            self.patch,
            self.stride,
            self.seed,
            self.precision,
            self.ablation,
            self.checkpoint_every,
        )
    }
}

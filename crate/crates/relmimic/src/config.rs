//! Run configuration and its flat `key = value` text format.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use relmimic_core::nn::Variant as Stack;

use crate::error::{Error, Result};

/// Which networks carry relational blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// No relational block anywhere.
    Baseline,
    /// Relational blocks in the reward network only.
    RewardOnly,
    /// Reward and value networks.
    RewardValue,
    /// Reward, value and policy networks.
    All,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Baseline, Variant::RewardOnly, Variant::RewardValue, Variant::All];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "local",
            Variant::RewardOnly => "non-local-reward",
            Variant::RewardValue => "non-local-value",
            Variant::All => "non-local-all",
        }
    }

    /// Short label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::RewardOnly => "rm-l-l",
            Variant::RewardValue => "rm-l-nl",
            Variant::All => "rm-nl-nl",
        }
    }

    pub fn relational_reward(self) -> bool {
        self != Variant::Baseline
    }

    pub fn value_stack(self) -> Stack {
        match self {
            Variant::RewardValue | Variant::All => Stack::NonLocal,
            _ => Stack::Local,
        }
    }

    pub fn policy_stack(self) -> Stack {
        match self {
            Variant::All => Stack::NonLocal,
            _ => Stack::Local,
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "local" | "baseline" => Variant::Baseline,
            "non-local-reward" | "rm-l-l" => Variant::RewardOnly,
            "non-local-value" | "rm-l-nl" => Variant::RewardValue,
            "non-local-all" | "rm-nl-nl" => Variant::All,
            other => {
                return Err(Error::Config(format!(
                    "unknown variant `{other}` (expected local, non-local-reward, non-local-value or non-local-all)"
                )))
            }
        })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything that determines a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Outer iterations.
    pub iterations: usize,
    /// Transitions collected per learner per iteration.
    pub steps: usize,
    /// Alternations of discriminator and policy updates per iteration.
    pub rounds: usize,
    /// Discriminator updates per round.
    pub disc_updates: usize,
    /// Policy/value updates per round.
    pub ppo_updates: usize,
    /// Per-learner minibatch size for both kinds of update.
    pub minibatch: usize,
    pub k: usize,
    pub resolution: usize,
    pub learners: usize,
    pub seeds: Vec<u64>,
    pub variant: Variant,
    /// Gradient-penalty weight.
    pub nu: f64,
    pub disc_lr: f64,
    pub policy_lr: f64,
    pub value_lr: f64,
    /// Anneal the policy and value learning rates linearly to zero over the
    /// run.
    pub lr_decay: bool,
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// `None` disables clipping.
    pub max_grad_norm: Option<f64>,
    pub normalize_advantages: bool,
    /// Demonstration file; recorded on the fly when absent.
    pub demos: Option<PathBuf>,
    pub n_demos: usize,
    pub demo_seed: u64,
    /// Evaluate every this many iterations (and after the last one).
    pub eval_every: usize,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 300,
            steps: 1024,
            rounds: 4,
            disc_updates: 1,
            ppo_updates: 4,
            minibatch: 64,
            k: 4,
            resolution: 32,
            learners: 4,
            seeds: (0..10).collect(),
            variant: Variant::RewardOnly,
            nu: 10.0,
            disc_lr: 3e-4,
            policy_lr: 3e-4,
            value_lr: 3e-4,
            lr_decay: false,
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            entropy_coef: 0.003,
            value_coef: 0.5,
            max_grad_norm: Some(0.5),
            normalize_advantages: true,
            demos: None,
            n_demos: 8,
            demo_seed: 10_000,
            eval_every: 10,
            eval_episodes: 10,
        }
    }
}

impl TrainConfig {
    /// Scaled-down schedule for a single CPU core: fewer transitions per
    /// iteration, fewer update rounds and smaller minibatches than the
    /// default, two learners and three seeds.
    pub fn desk() -> TrainConfig {
        TrainConfig {
            steps: 128,
            rounds: 2,
            minibatch: 32,
            learners: 2,
            seeds: vec![0, 1, 2],
            disc_lr: 1e-3,
            lr_decay: true,
            ..TrainConfig::default()
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid value `{v}` for `{key}`"))),
    }
}

/// `3` means seeds `0, 1, 2`; anything with a comma is a literal list
/// (`5,` is the single seed 5).
pub fn parse_seeds(v: &str) -> Result<Vec<u64>> {
    let v = v.trim();
    if v.contains(',') {
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| parse("seeds", s))
            .collect()
    } else {
        let n: u64 = parse("seeds", v)?;
        Ok((0..n).collect())
    }
}

impl TrainConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "iterations" => self.iterations = parse(key, v)?,
            "steps" => self.steps = parse(key, v)?,
            "rounds" => self.rounds = parse(key, v)?,
            "disc_updates" => self.disc_updates = parse(key, v)?,
            "ppo_updates" => self.ppo_updates = parse(key, v)?,
            "minibatch" => self.minibatch = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "resolution" => self.resolution = parse(key, v)?,
            "learners" => self.learners = parse(key, v)?,
            "seeds" => self.seeds = parse_seeds(v)?,
            "variant" => self.variant = v.parse()?,
            "nu" => self.nu = parse(key, v)?,
            "disc_lr" => self.disc_lr = parse(key, v)?,
            "policy_lr" => self.policy_lr = parse(key, v)?,
            "value_lr" => self.value_lr = parse(key, v)?,
            "lr_decay" => self.lr_decay = parse_bool(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "lambda" => self.lambda = parse(key, v)?,
            "clip" => self.clip = parse(key, v)?,
            "entropy_coef" => self.entropy_coef = parse(key, v)?,
            "value_coef" => self.value_coef = parse(key, v)?,
            "max_grad_norm" => {
                self.max_grad_norm = match v {
                    "none" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "normalize_advantages" => self.normalize_advantages = parse_bool(key, v)?,
            "demos" => self.demos = (!v.is_empty()).then(|| PathBuf::from(v)),
            "n_demos" => self.n_demos = parse(key, v)?,
            "demo_seed" => self.demo_seed = parse(key, v)?,
            "eval_every" => self.eval_every = parse(key, v)?,
            "eval_episodes" => self.eval_episodes = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parse a flat `key = value` file body; `#` starts a comment.
    pub fn parse_text(text: &str) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<TrainConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainConfig::parse_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("iterations", self.iterations),
            ("steps", self.steps),
            ("rounds", self.rounds),
            ("ppo_updates", self.ppo_updates),
            ("minibatch", self.minibatch),
            ("k", self.k),
            ("learners", self.learners),
            ("n_demos", self.n_demos),
            ("eval_every", self.eval_every),
            ("eval_episodes", self.eval_episodes),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("`{name}` must be at least 1")));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.resolution < 32 {
            return Err(Error::Config("resolution must be at least 32".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config("gamma and lambda must lie in [0, 1]".into()));
        }
        if self.nu < 0.0 || self.clip <= 0.0 {
            return Err(Error::Config("nu must be non-negative and clip positive".into()));
        }
        Ok(())
    }

    /// Canonical text form; `parse_text` reads it back unchanged.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("iterations", self.iterations.to_string());
        kv("steps", self.steps.to_string());
        kv("rounds", self.rounds.to_string());
        kv("disc_updates", self.disc_updates.to_string());
        kv("ppo_updates", self.ppo_updates.to_string());
        kv("minibatch", self.minibatch.to_string());
        kv("k", self.k.to_string());
        kv("resolution", self.resolution.to_string());
        kv("learners", self.learners.to_string());
        kv("seeds", format!("{},", seeds.join(",")));
        kv("variant", self.variant.name().into());
        kv("nu", self.nu.to_string());
        kv("disc_lr", self.disc_lr.to_string());
        kv("policy_lr", self.policy_lr.to_string());
        kv("value_lr", self.value_lr.to_string());
        kv("lr_decay", self.lr_decay.to_string());
        kv("gamma", self.gamma.to_string());
        kv("lambda", self.lambda.to_string());
        kv("clip", self.clip.to_string());
        kv("entropy_coef", self.entropy_coef.to_string());
        kv("value_coef", self.value_coef.to_string());
        kv(
            "max_grad_norm",
            self.max_grad_norm.map_or("none".into(), |m| m.to_string()),
        );
        kv("normalize_advantages", self.normalize_advantages.to_string());
        kv(
            "demos",
            self.demos.as_ref().map_or(String::new(), |p| p.display().to_string()),
        );
        kv("n_demos", self.n_demos.to_string());
        kv("demo_seed", self.demo_seed.to_string());
        kv("eval_every", self.eval_every.to_string());
        kv("eval_episodes", self.eval_episodes.to_string());
        s
    }

    /// FNV-1a hash of the canonical text.
    pub fn hash(&self) -> u64 {
        self.to_text().bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}

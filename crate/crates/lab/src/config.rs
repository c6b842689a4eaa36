//! Experiment configuration: a plain `key = value` file, overridable from
//! the command line.

use std::fmt;
use std::path::{Path, PathBuf};

use sofic_bayes::conjugate::MAX_CONJUGATE_ORDER;
use sofic_bayes::PriorSpec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            message: message.into(),
        }
    }

    pub fn plain(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceChoice {
    Even,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorFamily {
    Geometric,
    DoublyExponential,
}

/// Which verification protocol(s) to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Theorems 1 and 2 share the density-growth protocol.
    Theorem(u8),
    Sieve,
    Diversity,
    Exact,
    All,
}

impl Protocol {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s.trim() {
            "sieve" => Ok(Protocol::Sieve),
            "diversity" => Ok(Protocol::Diversity),
            "exact" => Ok(Protocol::Exact),
            "all" => Ok(Protocol::All),
            other => match other.parse::<u8>() {
                Ok(n @ 1..=6) => Ok(Protocol::Theorem(n)),
                _ => Err(format!(
                    "unknown theorem {other:?}; expected 1-6, sieve, diversity, exact or all"
                )),
            },
        }
    }

    pub fn name(&self) -> String {
        match self {
            Protocol::Theorem(n) => n.to_string(),
            Protocol::Sieve => "sieve".into(),
            Protocol::Diversity => "diversity".into(),
            Protocol::Exact => "exact".into(),
            Protocol::All => "all".into(),
        }
    }
}

/// ε_t = c·t^(−a) with a ∈ (0, 1), so that ε_t → 0 and t·ε_t → ∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSchedule {
    pub a: f64,
    pub c: f64,
}

impl RateSchedule {
    pub fn new(a: f64, c: f64) -> Result<Self, String> {
        if !(a > 0.0 && a < 1.0) {
            return Err(format!(
                "rate exponent a = {a} must lie in (0, 1) so that t·ε_t → ∞"
            ));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(format!("rate constant c = {c} must be positive"));
        }
        Ok(RateSchedule { a, c })
    }

    pub fn epsilon(&self, t: usize) -> f64 {
        self.c * (t as f64).powf(-self.a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub density: f64,
    pub density_best: f64,
    pub mass: f64,
    pub ldp_relative: f64,
    pub hellinger: f64,
    pub rate_mass: f64,
    pub identity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            density: 0.05,
            density_best: 0.02,
            mass: 1e-3,
            ldp_relative: 0.3,
            hellinger: 0.02,
            rate_mass: 0.9,
            identity: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: SourceChoice,
    pub prior: PriorFamily,
    pub prior_lambda: f64,
    pub prior_c: f64,
    pub prior_max_order: Option<usize>,
    pub prior_alpha: f64,
    pub members: usize,
    pub horizon: usize,
    pub seed: u64,
    pub replicates: usize,
    pub protocol: Protocol,
    pub output: PathBuf,
    pub h_inf: f64,
    pub rate_a: f64,
    pub rate_c: f64,
    pub conjugate_k_max: usize,
    pub conjugate_alpha: f64,
    pub sieve_epsilon: f64,
    pub sieve_c: f64,
    /// `None` selects 80% of the admissible upper limit.
    pub sieve_gamma: Option<f64>,
    pub sieve_tail_alpha: f64,
    pub sieve_tail_beta: f64,
    pub sieve_prior_c: f64,
    pub sieve_members: usize,
    pub delta: f64,
    pub set_threshold: f64,
    pub ball_radius: f64,
    pub tol: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source: SourceChoice::Even,
            prior: PriorFamily::Geometric,
            prior_lambda: 0.5,
            prior_c: 1.0,
            prior_max_order: Some(6),
            prior_alpha: 1.0,
            members: 10_000,
            horizon: 10_000,
            seed: 1,
            replicates: 1,
            protocol: Protocol::All,
            output: PathBuf::from("out"),
            h_inf: 0.0,
            rate_a: 0.5,
            rate_c: 1.0,
            conjugate_k_max: 8,
            conjugate_alpha: 0.5,
            sieve_epsilon: 0.1,
            sieve_c: 4.0,
            sieve_gamma: None,
            sieve_tail_alpha: 10.0,
            sieve_tail_beta: 0.01,
            sieve_prior_c: 1.0,
            sieve_members: 2000,
            delta: 0.1,
            set_threshold: 0.3,
            ball_radius: 0.1,
            tol: Tolerances::default(),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for {key}"))
}

fn optional_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>, String> {
    match value {
        "none" | "auto" => Ok(None),
        v => num(key, v).map(Some),
    }
}

impl ExperimentConfig {
    /// Parse a configuration file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::at(
                    i + 1,
                    format!("expected `key = value`, got {line:?}"),
                ));
            };
            cfg.set(key.trim(), value.trim())
                .map_err(|m| ConfigError::at(i + 1, m))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::plain(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "source" => {
                self.source = match value {
                    "even" => SourceChoice::Even,
                    path => SourceChoice::File(PathBuf::from(path)),
                }
            }
            "prior" => {
                self.prior = match value {
                    "geometric" => PriorFamily::Geometric,
                    "doubly-exponential" => PriorFamily::DoublyExponential,
                    v => return Err(format!("unknown prior family {v:?}")),
                }
            }
            "prior_lambda" => self.prior_lambda = num(key, value)?,
            "prior_c" => self.prior_c = num(key, value)?,
            "prior_max_order" => self.prior_max_order = optional_num(key, value)?,
            "prior_alpha" => self.prior_alpha = num(key, value)?,
            "members" => self.members = num(key, value)?,
            "horizon" => self.horizon = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "replicates" => self.replicates = num(key, value)?,
            "theorem" => self.protocol = Protocol::parse(value)?,
            "output" => self.output = PathBuf::from(value),
            "h_inf" => self.h_inf = num(key, value)?,
            "rate_a" => self.rate_a = num(key, value)?,
            "rate_c" => self.rate_c = num(key, value)?,
            "conjugate_k_max" => self.conjugate_k_max = num(key, value)?,
            "conjugate_alpha" => self.conjugate_alpha = num(key, value)?,
            "sieve_epsilon" => self.sieve_epsilon = num(key, value)?,
            "sieve_c" => self.sieve_c = num(key, value)?,
            "sieve_gamma" => self.sieve_gamma = optional_num(key, value)?,
            "sieve_tail_alpha" => self.sieve_tail_alpha = num(key, value)?,
            "sieve_tail_beta" => self.sieve_tail_beta = num(key, value)?,
            "sieve_prior_c" => self.sieve_prior_c = num(key, value)?,
            "sieve_members" => self.sieve_members = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "set_threshold" => self.set_threshold = num(key, value)?,
            "ball_radius" => self.ball_radius = num(key, value)?,
            "tol_density" => self.tol.density = num(key, value)?,
            "tol_density_best" => self.tol.density_best = num(key, value)?,
            "tol_mass" => self.tol.mass = num(key, value)?,
            "tol_ldp" => self.tol.ldp_relative = num(key, value)?,
            "tol_hellinger" => self.tol.hellinger = num(key, value)?,
            "tol_rate_mass" => self.tol.rate_mass = num(key, value)?,
            "tol_identity" => self.tol.identity = num(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Apply a `key=value` override from the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            ConfigError::plain(format!("override {assignment:?} is not key=value"))
        })?;
        self.set(key.trim(), value.trim())
            .map_err(|m| ConfigError::plain(format!("override {assignment:?}: {m}")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError::plain(m));
        if self.horizon < 10 {
            return err(format!("horizon must be at least 10, got {}", self.horizon));
        }
        if self.members < 1 || self.sieve_members < 1 {
            return err("ensemble sizes must be at least 1".into());
        }
        if self.replicates < 1 {
            return err("replicates must be at least 1".into());
        }
        if let SourceChoice::File(p) = &self.source {
            if !p.exists() {
                return err(format!("source file {} does not exist", p.display()));
            }
        }
        self.rate_schedule().map_err(ConfigError::plain)?;
        self.prior_spec(0.0).map_err(ConfigError::plain)?;
        if self.conjugate_k_max > MAX_CONJUGATE_ORDER {
            return err(format!(
                "conjugate_k_max {} exceeds {MAX_CONJUGATE_ORDER}",
                self.conjugate_k_max
            ));
        }
        if !(self.conjugate_alpha > 0.0) {
            return err("conjugate_alpha must be positive".into());
        }
        if !(self.delta > 0.0) {
            return err("delta must be positive".into());
        }
        Ok(())
    }

    pub fn rate_schedule(&self) -> Result<RateSchedule, String> {
        RateSchedule::new(self.rate_a, self.rate_c)
    }

    /// Prior of the ensemble experiments; the doubly-exponential family
    /// uses rate h_P + ε.
    pub fn prior_spec(&self, h_p: f64) -> Result<PriorSpec, String> {
        let p = match self.prior {
            PriorFamily::Geometric => {
                PriorSpec::geometric(self.prior_lambda, self.prior_max_order, self.prior_alpha)
            }
            PriorFamily::DoublyExponential => PriorSpec::doubly_exponential(
                self.prior_c,
                h_p + self.sieve_epsilon,
                self.prior_max_order,
                self.prior_alpha,
            ),
        };
        p.map_err(|e| e.to_string())
    }

    /// Canonical `key = value` rendering, used for the config echo.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("auto".to_string(), |x| x.to_string());
        let source = match &self.source {
            SourceChoice::Even => "even".to_string(),
            SourceChoice::File(p) => p.display().to_string(),
        };
        let prior = match self.prior {
            PriorFamily::Geometric => "geometric",
            PriorFamily::DoublyExponential => "doubly-exponential",
        };
        let t = &self.tol;
        let pairs: Vec<(&str, String)> = vec![
            ("source", source),
            ("prior", prior.into()),
            ("prior_lambda", self.prior_lambda.to_string()),
            ("prior_c", self.prior_c.to_string()),
            (
                "prior_max_order",
                self.prior_max_order
                    .map_or("none".into(), |k| k.to_string()),
            ),
            ("prior_alpha", self.prior_alpha.to_string()),
            ("members", self.members.to_string()),
            ("horizon", self.horizon.to_string()),
            ("seed", self.seed.to_string()),
            ("replicates", self.replicates.to_string()),
            ("theorem", self.protocol.name()),
            ("output", self.output.display().to_string()),
            ("h_inf", self.h_inf.to_string()),
            ("rate_a", self.rate_a.to_string()),
            ("rate_c", self.rate_c.to_string()),
            ("conjugate_k_max", self.conjugate_k_max.to_string()),
            ("conjugate_alpha", self.conjugate_alpha.to_string()),
            ("sieve_epsilon", self.sieve_epsilon.to_string()),
            ("sieve_c", self.sieve_c.to_string()),
            ("sieve_gamma", opt(self.sieve_gamma)),
            ("sieve_tail_alpha", self.sieve_tail_alpha.to_string()),
            ("sieve_tail_beta", self.sieve_tail_beta.to_string()),
            ("sieve_prior_c", self.sieve_prior_c.to_string()),
            ("sieve_members", self.sieve_members.to_string()),
            ("delta", self.delta.to_string()),
            ("set_threshold", self.set_threshold.to_string()),
            ("ball_radius", self.ball_radius.to_string()),
            ("tol_density", t.density.to_string()),
            ("tol_density_best", t.density_best.to_string()),
            ("tol_mass", t.mass.to_string()),
            ("tol_ldp", t.ldp_relative.to_string()),
            ("tol_hellinger", t.hellinger.to_string()),
            ("tol_rate_mass", t.rate_mass.to_string()),
            ("tol_identity", t.identity.to_string()),
        ];
        pairs
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

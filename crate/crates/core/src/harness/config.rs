use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::{PlanConfig, SarsaConfig};
use crate::env::Domain;
use crate::error::{HipError, Result};
use crate::gibbs::GibbsConfig;
use crate::gp::HyperFitConfig;

/// Sarsa data collection on each training instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub repetitions: usize,
    pub episodes: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            repetitions: 5,
            episodes: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Support budget `m`.
    pub support_points: usize,
    /// Tuples per (instance, action) used for projection and support selection.
    pub max_points_per_action: usize,
    /// Cap on the pooled points per action behind the projection's prior mean.
    pub pooled_points_per_action: usize,
    pub hyper: HyperFitConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            support_points: 200,
            max_points_per_action: 300,
            pooled_points_per_action: 2500,
            hyper: HyperFitConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    /// Online points used to identify each held-out instance; as many test points.
    pub points: usize,
    /// Repeated draws per held-out setting.
    pub runs: usize,
    /// Sarsa episodes run on a held-out instance to source its points.
    pub source_episodes: usize,
    /// Pooled-GP training points per (training instance, action).
    pub pooled_points_per_action: usize,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            points: 50,
            runs: 5,
            source_episodes: 30,
            pooled_points_per_action: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub trials: usize,
    /// Fraction of the way from the worst possible return to the true-model
    /// agent's asymptotic return that counts as reaching the target.
    pub threshold_fraction: f64,
    /// Trailing episodes of the true-model agent averaged for its asymptote.
    pub asymptote_episodes: usize,
    pub plan: PlanConfig,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            trials: 10,
            threshold_fraction: 0.8,
            asymptote_episodes: 5,
            plan: PlanConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: Domain,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Verbatim list; a repeated setting yields a second instance.
    #[serde(default)]
    pub training_settings: Option<Vec<[f64; 2]>>,
    /// Held-out settings for regression and control.
    #[serde(default)]
    pub evaluation_settings: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub gibbs: GibbsConfig,
    #[serde(default)]
    pub sarsa: Option<SarsaConfig>,
    #[serde(default)]
    pub regression: RegressionConfig,
    #[serde(default)]
    pub control: ControlConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Held-out acrobot settings used at desk scale, spread over the grid.
const ACROBOT_DESK_EVAL: [[f64; 2]; 4] = [[0.7, 0.9], [0.9, 1.3], [1.1, 0.7], [1.3, 1.1]];

impl ExperimentConfig {
    pub fn new(domain: Domain) -> Self {
        ExperimentConfig {
            domain,
            output_dir: default_output(),
            training_settings: None,
            evaluation_settings: None,
            data: DataConfig::default(),
            fit: FitConfig::default(),
            gibbs: GibbsConfig::default(),
            sarsa: None,
            regression: RegressionConfig::default(),
            control: ControlConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| HipError::Config(e.to_string()))?;
        let cfg: ExperimentConfig =
            serde_path_to_error::deserialize(de).map_err(|e| HipError::Config(format!("{}: {}", e.path(), e.inner())))?;
        cfg.resolved()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HipError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            HipError::Config(msg) => HipError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Fill domain defaults so the hash covers every effective value.
    pub fn resolved(mut self) -> Result<Self> {
        let d = self.domain;
        self.training_settings.get_or_insert_with(|| d.training_settings());
        self.evaluation_settings.get_or_insert_with(|| default_evaluation(d));
        self.sarsa.get_or_insert_with(|| SarsaConfig::for_domain(d));
        self.validate()?;
        Ok(self)
    }

    /// Paper-scale budgets: larger support set, longer and more chains, more
    /// control trials and the full acrobot grid.
    pub fn paper_scale(mut self) -> Result<Self> {
        self.fit.support_points = match self.domain {
            Domain::Cartpole => 750,
            Domain::Acrobot => 1000,
        };
        self.gibbs.iterations = 250;
        self.gibbs.chains = 5;
        self.control.trials = 30;
        if self.domain == Domain::Acrobot {
            self.evaluation_settings = Some(Domain::Acrobot.evaluation_grid());
        }
        self.resolved()
    }

    pub fn training(&self) -> &[[f64; 2]] {
        self.training_settings.as_deref().unwrap_or(&[])
    }

    pub fn evaluation(&self) -> &[[f64; 2]] {
        self.evaluation_settings.as_deref().unwrap_or(&[])
    }

    pub fn sarsa(&self) -> SarsaConfig {
        self.sarsa.clone().unwrap_or_else(|| SarsaConfig::for_domain(self.domain))
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.domain.evaluation_grid();
        let on_grid = |p: &[f64; 2]| grid.iter().any(|g| (g[0] - p[0]).abs() < 1e-9 && (g[1] - p[1]).abs() < 1e-9);
        let training = self.training();
        if training.len() < 2 {
            return Err(HipError::Config("training_settings needs at least two entries".into()));
        }
        if let Some(bad) = training.iter().chain(self.evaluation()).find(|p| !on_grid(p)) {
            return Err(HipError::Config(format!("setting {bad:?} is not on the {} grid", self.domain)));
        }
        if self.evaluation().is_empty() {
            return Err(HipError::Config("evaluation_settings is empty".into()));
        }
        if self.fit.support_points == 0 {
            return Err(HipError::Config("fit.support_points must be at least 1".into()));
        }
        if self.fit.max_points_per_action == 0 || self.fit.pooled_points_per_action == 0 {
            return Err(HipError::Config("fit.max_points_per_action and fit.pooled_points_per_action must be positive".into()));
        }
        if self.data.repetitions == 0 || self.data.episodes == 0 {
            return Err(HipError::Config("data.repetitions and data.episodes must be positive".into()));
        }
        if self.regression.points == 0 || self.regression.runs == 0 || self.regression.source_episodes == 0 {
            return Err(HipError::Config("regression.points, runs and source_episodes must be positive".into()));
        }
        if self.control.trials == 0 || self.control.asymptote_episodes == 0 {
            return Err(HipError::Config("control.trials and asymptote_episodes must be positive".into()));
        }
        if !(self.control.threshold_fraction > 0.0 && self.control.threshold_fraction <= 1.0) {
            return Err(HipError::Config("control.threshold_fraction must lie in (0, 1]".into()));
        }
        self.gibbs.validate()?;
        self.sarsa().validate()?;
        self.control.plan.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the resolved config.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

fn default_evaluation(domain: Domain) -> Vec<[f64; 2]> {
    match domain {
        Domain::Cartpole => {
            let training = domain.training_settings();
            domain
                .evaluation_grid()
                .into_iter()
                .filter(|g| !training.iter().any(|t| t == g))
                .collect()
        }
        Domain::Acrobot => ACROBOT_DESK_EVAL.to_vec(),
    }
}

/// Independent generator for one stage of an experiment, so stages do not
/// perturb each other's random streams.
pub fn stage_rng(seed: u64, stage: Stage, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stage as u64) << 40) | index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Data = 1,
    Fit = 2,
    Regression = 3,
    Control = 4,
    Demo = 5,
}

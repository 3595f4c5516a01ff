use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::asymptotics::VarianceForm;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, EstimatorOptions};
use crate::model::{EigenRecipe, InnovationLaw, SignPattern};

/// How the target vector of each cell is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TargetMode {
    /// Drawn together with the population mean.
    #[default]
    Drawn,
    /// The true mean itself.
    EqualToMuN,
    /// `p^{(gamma - 1)/2} 1`.
    Naive,
    /// Every entry equal to the given value.
    Constant(f64),
}

impl fmt::Display for TargetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetMode::Drawn => write!(f, "drawn"),
            TargetMode::EqualToMuN => write!(f, "equal-to-mu_n"),
            TargetMode::Naive => write!(f, "naive"),
            TargetMode::Constant(v) => write!(f, "constant:{v}"),
        }
    }
}

impl FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "drawn" => Ok(TargetMode::Drawn),
            "equal-to-mu_n" | "equal-to-mu-n" => Ok(TargetMode::EqualToMuN),
            "naive" => Ok(TargetMode::Naive),
            other => other
                .strip_prefix("constant:")
                .and_then(|v| v.parse().ok())
                .map(TargetMode::Constant)
                .ok_or_else(|| Error::Config(format!("unknown target mode {other:?}"))),
        }
    }
}

impl TryFrom<String> for TargetMode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TargetMode> for String {
    fn from(t: TargetMode) -> String {
        t.to_string()
    }
}

/// Monte Carlo study over a `p x c` grid. Field names double as the keys of
/// the TOML configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub p_grid: Vec<usize>,
    pub c_grid: Vec<f64>,
    pub gamma: f64,
    pub replications: usize,
    pub estimators: Vec<EstimatorKind>,
    pub target: TargetMode,
    pub seed: u64,
    /// `(fraction, eigenvalue)` groups of the population spectrum.
    pub eigen_recipe: Vec<(f64, f64)>,
    /// Replaces the largest eigenvalue.
    pub lambda_max: Option<f64>,
    /// Replaces the largest eigenvalue by `p` (overrides `lambda_max`).
    pub lambda_max_equals_p: bool,
    pub law: InnovationLaw,
    pub sign_pattern: SignPattern,
    pub as_printed_jsplus: bool,
    pub wang_fast_path: bool,
    /// Clamp bona fide `alpha` to `[0, 1]`.
    pub clamp: bool,
    /// Record per-estimator wall-clock time. Off by default so that output
    /// files are reproducible byte for byte.
    pub timing: bool,
    pub variance_form: VarianceFormSetting,
}

/// Serializable mirror of [`VarianceForm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceFormSetting {
    #[default]
    Corrected,
    AsPrinted,
}

impl From<VarianceFormSetting> for VarianceForm {
    fn from(v: VarianceFormSetting) -> Self {
        match v {
            VarianceFormSetting::Corrected => VarianceForm::Corrected,
            VarianceFormSetting::AsPrinted => VarianceForm::AsPrinted,
        }
    }
}

/// Seed used when none is configured.
pub const DEFAULT_SEED: u64 = 12345;

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            p_grid: vec![20, 100, 250, 500],
            c_grid: vec![0.5, 0.9, 2.0],
            gamma: 0.0,
            replications: 1000,
            estimators: vec![
                EstimatorKind::SampleMean,
                EstimatorKind::Olse,
                EstimatorKind::OlseOracle,
            ],
            target: TargetMode::Drawn,
            seed: DEFAULT_SEED,
            eigen_recipe: EigenRecipe::standard().proportions,
            lambda_max: None,
            lambda_max_equals_p: false,
            law: InnovationLaw::StandardNormal,
            sign_pattern: SignPattern::Random,
            as_printed_jsplus: true,
            wang_fast_path: true,
            clamp: false,
            timing: false,
            variance_form: VarianceFormSetting::Corrected,
        }
    }
}

/// `round(p / c)`.
pub fn sample_size(p: usize, c: f64) -> usize {
    (p as f64 / c).round() as usize
}

impl McConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: McConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        McConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    pub fn recipe_for(&self, p: usize) -> EigenRecipe {
        let override_lambda_max = if self.lambda_max_equals_p {
            Some(p as f64)
        } else {
            self.lambda_max
        };
        EigenRecipe {
            proportions: self.eigen_recipe.clone(),
            override_lambda_max,
        }
    }

    pub fn estimator_options(&self) -> EstimatorOptions {
        EstimatorOptions {
            as_printed_jsplus: self.as_printed_jsplus,
            wang_fast_path: self.wang_fast_path,
            clamp: self.clamp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.p_grid.is_empty() || self.c_grid.is_empty() {
            return Err(Error::Config("p_grid and c_grid must be non-empty".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators requested".into()));
        }
        if self.gamma != 0.0 && self.gamma != 1.0 {
            return Err(Error::UnsupportedGamma(self.gamma));
        }
        for &c in &self.c_grid {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Config(format!("concentration {c} is not positive")));
            }
        }
        for &p in &self.p_grid {
            if p < 2 {
                return Err(Error::Config(format!("dimension {p} is below 2")));
            }
            for &c in &self.c_grid {
                if sample_size(p, c) < 2 {
                    return Err(Error::Config(format!(
                        "p = {p}, c = {c} gives fewer than two observations"
                    )));
                }
            }
            self.recipe_for(p).validate()?;
        }
        self.law.validate()
    }
}

//! Mean-vector estimators and a dispatcher over [`EstimatorKind`].

mod benchmarks;
mod shrinkage;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use benchmarks::{
    james_stein, james_stein_factor, js_high_dim, js_positive_part, wang_estimator, wang_sums,
    WangSums,
};
pub use shrinkage::{
    bona_fide_intensities, bona_fide_intensities_with, generalized_inverse_s, limit_intensities,
    olse, oracle_intensities, BonaFideOptions, OracleContext, ShrinkageWeights, WeightKind,
};

pub use crate::model::{SampleInverse, SampleStats};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DenseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EstimatorKind {
    SampleMean,
    /// Bona fide intensities.
    Olse,
    /// Limiting intensities at `c = p / n` (needs the population).
    OlseAsymptotic,
    /// Oracle intensities (needs the population).
    OlseOracle,
    Js,
    JsHighDim,
    JsPositivePart,
    Wang,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 8] = [
        EstimatorKind::SampleMean,
        EstimatorKind::Olse,
        EstimatorKind::OlseAsymptotic,
        EstimatorKind::OlseOracle,
        EstimatorKind::Js,
        EstimatorKind::JsHighDim,
        EstimatorKind::JsPositivePart,
        EstimatorKind::Wang,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::SampleMean => "sample-mean",
            EstimatorKind::Olse => "olse",
            EstimatorKind::OlseAsymptotic => "olse-asymptotic",
            EstimatorKind::OlseOracle => "olse-oracle",
            EstimatorKind::Js => "js",
            EstimatorKind::JsHighDim => "js-high-dim",
            EstimatorKind::JsPositivePart => "js-positive-part",
            EstimatorKind::Wang => "wang",
        }
    }

    /// Whether the estimator is defined for `p` variables and `n` observations.
    pub fn is_valid_for(self, p: usize, n: usize) -> bool {
        match self {
            EstimatorKind::SampleMean | EstimatorKind::OlseAsymptotic | EstimatorKind::OlseOracle => {
                true
            }
            EstimatorKind::Olse => p != n,
            EstimatorKind::Js => benchmarks::check_low_dim(p, n).is_ok(),
            EstimatorKind::JsHighDim | EstimatorKind::JsPositivePart => {
                benchmarks::check_high_dim(p, n).is_ok()
            }
            EstimatorKind::Wang => p > n && n >= 2,
        }
    }

    /// Whether the estimator needs the true covariance and mean.
    pub fn needs_population(self) -> bool {
        matches!(self, EstimatorKind::OlseAsymptotic | EstimatorKind::OlseOracle)
    }

    /// Whether the estimator needs the sample covariance matrix.
    pub fn needs_covariance(self) -> bool {
        !matches!(
            self,
            EstimatorKind::SampleMean | EstimatorKind::OlseAsymptotic | EstimatorKind::OlseOracle
        )
    }

    /// Whether the output depends on the target vector.
    pub fn uses_target(self) -> bool {
        matches!(
            self,
            EstimatorKind::Olse | EstimatorKind::OlseAsymptotic | EstimatorKind::OlseOracle
        )
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown estimator {s:?}")))
    }
}

impl TryFrom<String> for EstimatorKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EstimatorKind> for String {
    fn from(k: EstimatorKind) -> String {
        k.as_str().to_string()
    }
}

/// Comma-separated list of estimator names.
pub fn parse_estimator_list(s: &str) -> Result<Vec<EstimatorKind>> {
    let kinds = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<_>>>()?;
    if kinds.is_empty() {
        return Err(Error::Config("empty estimator list".into()));
    }
    Ok(kinds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorOptions {
    /// Use the positive-part James-Stein first term `(I + P) y_bar` as printed
    /// instead of `(I - P) y_bar`.
    pub as_printed_jsplus: bool,
    pub wang_fast_path: bool,
    pub clamp: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            as_printed_jsplus: true,
            wang_fast_path: true,
            clamp: false,
        }
    }
}

/// Everything an estimator may look at for one data set.
#[derive(Debug, Clone, Copy)]
pub struct EstimationContext<'a> {
    pub stats: &'a SampleStats,
    /// Raw `p x n` observations; only the unit-target shrinkage needs them.
    pub y: Option<&'a DenseMatrix>,
    pub mu_0: &'a DenseVector,
    pub oracle: Option<&'a OracleContext>,
    /// Precomputed limiting intensities; derived from `oracle` when absent.
    pub limit: Option<ShrinkageWeights>,
    pub options: EstimatorOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub mu_hat: DenseVector,
    /// Intensities of the linear shrinkage estimators.
    pub weights: Option<ShrinkageWeights>,
}

fn plain(mu_hat: DenseVector) -> Estimate {
    Estimate {
        mu_hat,
        weights: None,
    }
}

fn shrunk(weights: ShrinkageWeights, ctx: &EstimationContext<'_>) -> Estimate {
    Estimate {
        mu_hat: weights.apply(&ctx.stats.y_bar, ctx.mu_0),
        weights: Some(weights),
    }
}

/// Evaluates one estimator, reusing the cached (pseudo-)inverse of `S`.
pub fn estimate(kind: EstimatorKind, ctx: &EstimationContext<'_>) -> Result<Estimate> {
    let stats = ctx.stats;
    let (p, n) = (stats.p, stats.n);
    if !kind.is_valid_for(p, n) {
        return Err(Error::InvalidDimensions(format!(
            "{kind} is not defined for p = {p}, n = {n}"
        )));
    }
    let need_oracle = || {
        ctx.oracle.ok_or_else(|| {
            Error::InvalidArgument(format!("{kind} needs the population covariance"))
        })
    };
    match kind {
        EstimatorKind::SampleMean => Ok(plain(stats.y_bar.clone())),
        EstimatorKind::Olse => {
            let options = BonaFideOptions {
                clamp: ctx.options.clamp,
            };
            Ok(shrunk(bona_fide_intensities_with(stats, ctx.mu_0, options)?, ctx))
        }
        EstimatorKind::OlseOracle => Ok(shrunk(need_oracle()?.intensities(&stats.y_bar)?, ctx)),
        EstimatorKind::OlseAsymptotic => {
            let weights = match ctx.limit {
                Some(w) => w,
                None => need_oracle()?.limit(stats.c_hat())?,
            };
            Ok(shrunk(weights, ctx))
        }
        EstimatorKind::Js => {
            let (form, _, _) = stats.inverse()?.forms(&stats.y_bar, &stats.y_bar);
            let factor = james_stein_factor(form / n as f64, p, n);
            Ok(plain(&stats.y_bar * factor))
        }
        EstimatorKind::JsHighDim | EstimatorKind::JsPositivePart => {
            let pinv_y = stats.inverse()?.apply(&stats.y_bar);
            let projected = &stats.s * &pinv_y;
            let form = stats.y_bar.dot(&pinv_y) / n as f64;
            let out = if kind == EstimatorKind::JsHighDim {
                benchmarks::js_high_dim_core(&stats.y_bar, &projected, form, p, n)?
            } else {
                benchmarks::js_positive_core(
                    &stats.y_bar,
                    &projected,
                    form,
                    p,
                    n,
                    ctx.options.as_printed_jsplus,
                )?
            };
            Ok(plain(out))
        }
        EstimatorKind::Wang => {
            let y = ctx.y.ok_or_else(|| {
                Error::InvalidArgument("unit-target shrinkage needs the observations".into())
            })?;
            let scatter_pinv = stats.inverse()?.matrix() / n as f64;
            Ok(plain(benchmarks::wang_core(
                y,
                &stats.y_bar,
                &scatter_pinv,
                ctx.options.wang_fast_path,
            )?))
        }
    }
}

//! Rolling-window evaluation of mean estimators on asset return panels.
//!
//! For a window of `n` periods ending just before period `t`, every
//! estimator predicts the return of the equally weighted portfolio as
//! `1' mu_hat / p`; the loss is `1e4` times the mean squared deviation from
//! the realized `1' y_t / p` over all evaluated windows.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimationContext, EstimatorKind, EstimatorOptions};
use crate::harness::mean_and_se;
use crate::linalg::{DenseMatrix, DenseVector};
use crate::model::{generate_sample, sample_stats, EigenRecipe, InnovationLaw, PopulationSpec, SignPattern};
use crate::seeding::{mix, substream};

/// Returns of `p` assets over `T` periods, stored assets x periods.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    pub values: DenseMatrix,
    pub asset_labels: Option<Vec<String>>,
}

impl ReturnsPanel {
    pub fn new(values: DenseMatrix) -> Result<Self> {
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            let (rows, _) = values.shape();
            return Err(Error::Parse {
                row: bad / rows + 1,
                column: bad % rows + 1,
                message: "non-finite value".into(),
            });
        }
        Ok(ReturnsPanel {
            values,
            asset_labels: None,
        })
    }

    pub fn assets(&self) -> usize {
        self.values.nrows()
    }

    pub fn periods(&self) -> usize {
        self.values.ncols()
    }
}

/// Reads a CSV with one row per period and one column per asset.
pub fn load_returns_csv(path: &Path, has_header: bool) -> Result<ReturnsPanel> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let labels = if has_header {
        Some(reader.headers()?.iter().map(str::to_string).collect::<Vec<_>>())
    } else {
        None
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = labels.as_ref().map(Vec::len);
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRows {
                row,
                expected,
                got: record.len(),
            });
        }
        let parsed = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        row,
                        column: j + 1,
                        message: format!("not a finite number: {field:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(parsed);
    }
    let p = width.unwrap_or(0);
    if rows.is_empty() || p == 0 {
        return Err(Error::InvalidDimensions(format!(
            "{} contains no data",
            path.display()
        )));
    }
    let values = DenseMatrix::from_fn(p, rows.len(), |i, t| rows[t][i]);
    Ok(ReturnsPanel {
        values,
        asset_labels: labels,
    })
}

/// Writes a panel in the layout read by [`load_returns_csv`].
pub fn write_returns_csv(path: &Path, panel: &ReturnsPanel) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if let Some(labels) = &panel.asset_labels {
        w.write_record(labels)?;
    }
    for t in 0..panel.periods() {
        w.write_record(panel.values.column(t).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Construction of the target vector from a window of returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TargetStrategy {
    /// Each entry uniform between the smallest and largest per-asset mean
    /// of the window.
    UniformRangeDraw,
    /// I.i.d. `+-1` entries.
    Signs,
    /// All ones.
    Ones,
}

impl TargetStrategy {
    pub const ALL: [TargetStrategy; 3] = [
        TargetStrategy::UniformRangeDraw,
        TargetStrategy::Signs,
        TargetStrategy::Ones,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetStrategy::UniformRangeDraw => "uniform-range-draw",
            TargetStrategy::Signs => "signs",
            TargetStrategy::Ones => "ones",
        }
    }
}

impl fmt::Display for TargetStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TargetStrategy::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown target strategy {s:?}")))
    }
}

impl TryFrom<String> for TargetStrategy {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TargetStrategy> for String {
    fn from(t: TargetStrategy) -> String {
        t.as_str().to_string()
    }
}

/// Target vector for a window given as a `p x n` block of returns.
pub fn target_vector<R: Rng + ?Sized>(
    strategy: TargetStrategy,
    window: &DenseMatrix,
    rng: &mut R,
) -> DenseVector {
    let p = window.nrows();
    match strategy {
        TargetStrategy::Ones => DenseVector::from_element(p, 1.0),
        TargetStrategy::Signs => {
            DenseVector::from_fn(p, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
        }
        TargetStrategy::UniformRangeDraw => {
            let means = window.column_mean();
            let (lo, hi) = (means.min(), means.max());
            DenseVector::from_fn(p, |_, _| if hi > lo { rng.random_range(lo..=hi) } else { lo })
        }
    }
}

fn default_windows() -> Vec<usize> {
    vec![25, 50, 75, 100]
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![
        EstimatorKind::SampleMean,
        EstimatorKind::Olse,
        EstimatorKind::JsHighDim,
        EstimatorKind::JsPositivePart,
        EstimatorKind::Wang,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub windows: Vec<usize>,
    pub estimators: Vec<EstimatorKind>,
    pub targets: Vec<TargetStrategy>,
    pub seed: u64,
    /// Start every window size at the largest window instead of its own.
    pub align_start: bool,
    /// Draw random targets once per window size instead of once per window.
    pub fixed_targets: bool,
    pub as_printed_jsplus: bool,
    pub wang_fast_path: bool,
    pub clamp: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            windows: default_windows(),
            estimators: default_estimators(),
            targets: TargetStrategy::ALL.to_vec(),
            seed: crate::harness::DEFAULT_SEED,
            align_start: false,
            fixed_targets: false,
            as_printed_jsplus: true,
            wang_fast_path: true,
            clamp: false,
        }
    }
}

impl BacktestConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        BacktestConfig::from_toml(&text)
    }

    fn validate(&self, periods: usize) -> Result<()> {
        if self.windows.is_empty() || self.estimators.is_empty() || self.targets.is_empty() {
            return Err(Error::Config(
                "windows, estimators and targets must be non-empty".into(),
            ));
        }
        for &n in &self.windows {
            if n < 2 || n >= periods {
                return Err(Error::Config(format!(
                    "window {n} must lie in [2, {periods})"
                )));
            }
        }
        for &kind in &self.estimators {
            if kind.needs_population() {
                return Err(Error::Config(format!(
                    "{kind} needs the population and cannot be backtested"
                )));
            }
        }
        Ok(())
    }
}

/// Result for one window size, estimator and target.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestRow {
    pub window_n: usize,
    pub c_hat: f64,
    pub estimator: EstimatorKind,
    pub target: TargetStrategy,
    pub loss_x1e4: f64,
    pub se_x1e4: f64,
    pub windows_evaluated: usize,
    /// Windows where this estimator failed.
    pub failures: usize,
    /// Squared prediction errors over the evaluated windows.
    pub squared_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub rows: Vec<BacktestRow>,
}

impl BacktestReport {
    pub fn row(&self, window_n: usize, estimator: EstimatorKind, target: TargetStrategy) -> Option<&BacktestRow> {
        self.rows
            .iter()
            .find(|r| r.window_n == window_n && r.estimator == estimator && r.target == target)
    }

    /// `backtest.csv`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "window_n",
            "c_hat",
            "estimator",
            "target",
            "loss_x1e4",
            "windows_evaluated",
            "failures",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.window_n.to_string(),
                r.c_hat.to_string(),
                r.estimator.to_string(),
                r.target.to_string(),
                r.loss_x1e4.to_string(),
                r.windows_evaluated.to_string(),
                r.failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Prediction errors of every `(estimator, target)` pair in one window,
/// indexed `[estimator][target]`.
type WindowErrors = Vec<Vec<Option<f64>>>;

fn draw_targets(config: &BacktestConfig, window: &DenseMatrix, seed: u64, stream: u64) -> Vec<DenseVector> {
    let mut rng = substream(seed, stream);
    config
        .targets
        .iter()
        .map(|&s| target_vector(s, window, &mut rng))
        .collect()
}

fn evaluate_window(
    config: &BacktestConfig,
    panel: &ReturnsPanel,
    kinds: &[EstimatorKind],
    n: usize,
    t: usize,
    targets: &[DenseVector],
) -> Result<WindowErrors> {
    let p = panel.assets();
    let window = panel.values.columns(t - n, n).into_owned();
    let realized = panel.values.column(t).sum() / p as f64;
    let stats = sample_stats(&window)?;
    let options = EstimatorOptions {
        as_printed_jsplus: config.as_printed_jsplus,
        wang_fast_path: config.wang_fast_path,
        clamp: config.clamp,
    };
    let errors = kinds
        .iter()
        .map(|&kind| {
            let mut shared: Option<Option<f64>> = None;
            targets
                .iter()
                .map(|mu_0| {
                    if !kind.uses_target() {
                        if let Some(done) = shared {
                            return done;
                        }
                    }
                    let ctx = EstimationContext {
                        stats: &stats,
                        y: Some(&window),
                        mu_0,
                        oracle: None,
                        limit: None,
                        options,
                    };
                    let err = estimate(kind, &ctx)
                        .ok()
                        .map(|est| (est.mu_hat.sum() / p as f64 - realized).powi(2))
                        .filter(|e| e.is_finite());
                    shared = Some(err);
                    err
                })
                .collect()
        })
        .collect();
    Ok(errors)
}

/// Evaluates every estimator and target over all rolling windows of every
/// configured size. Estimators undefined for a window size's `(p, n)` are
/// skipped for that size. A window enters the averages only if all
/// `(estimator, target)` pairs succeeded on it.
pub fn rolling_backtest(panel: &ReturnsPanel, config: &BacktestConfig) -> Result<BacktestReport> {
    let total = panel.periods();
    config.validate(total)?;
    let largest = *config.windows.iter().max().expect("validated non-empty");
    let mut rows = Vec::new();
    for &n in &config.windows {
        let start = if config.align_start { largest } else { n };
        let seed = mix(config.seed, n as u64);
        let kinds: Vec<EstimatorKind> = config
            .estimators
            .iter()
            .copied()
            .filter(|k| k.is_valid_for(panel.assets(), n))
            .collect();
        let fixed = config
            .fixed_targets
            .then(|| draw_targets(config, &panel.values.columns(start - n, n).into_owned(), seed, u64::MAX));
        let per_window: Vec<WindowErrors> = (start..total)
            .into_par_iter()
            .map(|t| {
                let targets = match &fixed {
                    Some(f) => f.clone(),
                    None => draw_targets(config, &panel.values.columns(t - n, n).into_owned(), seed, t as u64),
                };
                evaluate_window(config, panel, &kinds, n, t, &targets)
            })
            .collect::<Result<_>>()?;
        let complete: Vec<&WindowErrors> = per_window
            .iter()
            .filter(|w| w.iter().flatten().all(Option::is_some))
            .collect();
        for (j, &estimator) in kinds.iter().enumerate() {
            for (k, &target) in config.targets.iter().enumerate() {
                let squared_errors: Vec<f64> = complete
                    .iter()
                    .map(|w| w[j][k].expect("complete window"))
                    .collect();
                let (mean, se) = mean_and_se(&squared_errors);
                rows.push(BacktestRow {
                    window_n: n,
                    c_hat: panel.assets() as f64 / n as f64,
                    estimator,
                    target,
                    loss_x1e4: 1e4 * mean,
                    se_x1e4: 1e4 * se,
                    windows_evaluated: complete.len(),
                    failures: per_window.iter().filter(|w| w[j][k].is_none()).count(),
                    squared_errors,
                });
            }
        }
    }
    Ok(BacktestReport { rows })
}

/// I.i.d. normal returns with small means: a population drawn from the
/// standard spectrum with bounded mean norm, scaled by `scale`.
pub fn synthetic_panel(p: usize, periods: usize, scale: f64, seed: u64) -> Result<ReturnsPanel> {
    let mut rng = substream(seed, 0);
    let pop = PopulationSpec::draw(p, 0.0, &EigenRecipe::standard(), SignPattern::Random, &mut rng)?;
    let y = generate_sample(&pop, periods, InnovationLaw::StandardNormal, &mut rng)? * scale;
    ReturnsPanel::new(y)
}

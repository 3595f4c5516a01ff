//! Monte Carlo studies: loss comparisons, sign frequencies of the shrinkage
//! intensities, and normalized intensity samples for normality checks.
//!
//! Each `(p, c)` cell draws one population and `N` independent samples from
//! it. Random streams follow [`crate::seeding`], so a report depends only on
//! the configuration and never on the number of worker threads.

mod config;
mod output;
mod stats;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{sample_size, McConfig, TargetMode, VarianceFormSetting, DEFAULT_SEED};
pub use output::{
    write_intensities_csv, write_losses_csv, write_qq_csv, write_table1_csv, QqRow,
};
pub use stats::{ks_critical_value, ks_statistic, mean_and_se, median, qq_data, quadratic_loss};

use crate::asymptotics::{asymptotic_moments, standardize, AsymptoticMoments, VarianceForm};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate, EstimationContext, EstimatorKind, OracleContext, ShrinkageWeights,
};
use crate::linalg::DenseVector;
use crate::model::{generate_sample, sample_stats, PopulationSpec, ValidationReport};
use crate::seeding::{cell_seed, substream, POPULATION_STREAM};

/// Per-estimator results of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub kind: EstimatorKind,
    /// Loss of every replication; `None` where the estimator failed.
    pub losses: Vec<Option<f64>>,
    pub failures: usize,
    pub mean_loss: f64,
    pub se: f64,
    /// Only recorded when timing is enabled.
    pub mean_runtime_s: Option<f64>,
}

impl EstimatorSummary {
    /// Losses of the successful replications.
    pub fn successful_losses(&self) -> Vec<f64> {
        self.losses.iter().flatten().copied().collect()
    }

    /// Mean and standard error of `self - other` over replications where
    /// both succeeded.
    pub fn paired_difference(&self, other: &EstimatorSummary) -> (f64, f64) {
        let diffs: Vec<f64> = self
            .losses
            .iter()
            .zip(&other.losses)
            .filter_map(|(a, b)| Some((*a)? - (*b)?))
            .collect();
        mean_and_se(&diffs)
    }
}

/// Results of one `(p, c)` cell.
#[derive(Debug, Clone)]
pub struct CellReport {
    pub p: usize,
    pub n: usize,
    /// Nominal concentration from the grid.
    pub c: f64,
    /// `p / n`.
    pub c_hat: f64,
    pub gamma: f64,
    pub population: ValidationReport,
    /// Limiting intensities at `c_hat`.
    pub limit: ShrinkageWeights,
    /// Asymptotic moments at `c_hat`.
    pub moments: AsymptoticMoments,
    pub estimators: Vec<EstimatorSummary>,
    /// Oracle intensities per replication.
    pub oracle: Vec<Option<ShrinkageWeights>>,
    /// Bona fide intensities per replication; empty unless `olse` ran.
    pub bona_fide: Vec<Option<ShrinkageWeights>>,
}

/// Intensity series whose z-scores can be checked against `N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    AlphaOracle,
    BetaOracle,
    AlphaBonaFide,
    BetaBonaFide,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [
        Quantity::AlphaOracle,
        Quantity::BetaOracle,
        Quantity::AlphaBonaFide,
        Quantity::BetaBonaFide,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::AlphaOracle => "alpha-oracle",
            Quantity::BetaOracle => "beta-oracle",
            Quantity::AlphaBonaFide => "alpha-bf",
            Quantity::BetaBonaFide => "beta-bf",
        }
    }

    pub fn is_bona_fide(self) -> bool {
        matches!(self, Quantity::AlphaBonaFide | Quantity::BetaBonaFide)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Quantity::ALL
            .iter()
            .copied()
            .find(|q| q.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown quantity {s:?}")))
    }
}

fn fraction_negative_alpha(weights: &[Option<ShrinkageWeights>]) -> f64 {
    let valid: Vec<f64> = weights.iter().flatten().map(|w| w.alpha).collect();
    if valid.is_empty() {
        return f64::NAN;
    }
    valid.iter().filter(|&&a| a < 0.0).count() as f64 / valid.len() as f64
}

impl CellReport {
    pub fn estimator(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.kind == kind)
    }

    /// Fraction of replications with a negative oracle `alpha`.
    pub fn oracle_negative_frequency(&self) -> f64 {
        fraction_negative_alpha(&self.oracle)
    }

    /// Fraction of replications with a negative bona fide `alpha`.
    pub fn bona_fide_negative_frequency(&self) -> f64 {
        fraction_negative_alpha(&self.bona_fide)
    }

    /// Raw samples of a quantity (successful replications only).
    pub fn samples(&self, quantity: Quantity) -> Vec<f64> {
        let source = if quantity.is_bona_fide() {
            &self.bona_fide
        } else {
            &self.oracle
        };
        let alpha = matches!(quantity, Quantity::AlphaOracle | Quantity::AlphaBonaFide);
        source
            .iter()
            .flatten()
            .map(|w| if alpha { w.alpha } else { w.beta })
            .collect()
    }

    /// Samples centered at their limit and scaled by the asymptotic standard
    /// deviation: rate `sqrt(p^gamma n)` for oracle intensities, `sqrt(n)`
    /// for bona fide ones (which need `p < n`).
    pub fn standardized(&self, quantity: Quantity) -> Result<Vec<f64>> {
        let samples = self.samples(quantity);
        let (center, variance, rate) = match quantity {
            Quantity::AlphaOracle | Quantity::BetaOracle => {
                let rate = ((self.p as f64).powf(self.gamma) * self.n as f64).sqrt();
                if quantity == Quantity::AlphaOracle {
                    (self.limit.alpha, self.moments.sigma2_alpha, rate)
                } else {
                    (self.limit.beta, self.moments.sigma2_beta, rate)
                }
            }
            Quantity::AlphaBonaFide | Quantity::BetaBonaFide => {
                let cov = self
                    .moments
                    .bona_fide
                    .ok_or(Error::UnsupportedConcentration(self.c_hat))?;
                let rate = (self.n as f64).sqrt();
                if quantity == Quantity::AlphaBonaFide {
                    (self.limit.alpha, cov.omega[0][0], rate)
                } else {
                    (self.limit.beta, cov.omega[1][1], rate)
                }
            }
        };
        if !(variance > 0.0) {
            return Err(Error::DegenerateDenominator("asymptotic variance"));
        }
        Ok(standardize(&samples, center, variance, rate))
    }
}

#[derive(Debug, Clone)]
pub struct McReport {
    pub config: McConfig,
    pub cells: Vec<CellReport>,
}

/// One row of the negative-intensity frequency table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeFrequencyRow {
    pub p: usize,
    pub c: f64,
    pub n: usize,
    pub oracle: f64,
    pub bona_fide: f64,
    pub replications: usize,
}

impl McReport {
    pub fn cell(&self, p: usize, c: f64) -> Option<&CellReport> {
        self.cells.iter().find(|cell| cell.p == p && cell.c == c)
    }

    pub fn negative_frequency_table(&self) -> Vec<NegativeFrequencyRow> {
        self.cells
            .iter()
            .map(|cell| NegativeFrequencyRow {
                p: cell.p,
                c: cell.c,
                n: cell.n,
                oracle: cell.oracle_negative_frequency(),
                bona_fide: cell.bona_fide_negative_frequency(),
                replications: cell.oracle.len(),
            })
            .collect()
    }
}

/// Population, target and oracle quantities shared by a cell's replications.
struct Cell {
    p: usize,
    n: usize,
    c: f64,
    seed: u64,
    population: PopulationSpec,
    oracle: OracleContext,
    limit: ShrinkageWeights,
}

fn build_cell(config: &McConfig, p: usize, c: f64) -> Result<Cell> {
    let seed = cell_seed(config.seed, p, c);
    let mut rng = substream(seed, POPULATION_STREAM);
    let drawn = PopulationSpec::draw(
        p,
        config.gamma,
        &config.recipe_for(p),
        config.sign_pattern,
        &mut rng,
    )?;
    let population = match config.target {
        TargetMode::Drawn => drawn,
        TargetMode::EqualToMuN => {
            let mu_n = drawn.mu_n.clone();
            drawn.with_target(mu_n)?
        }
        TargetMode::Naive => {
            let v = (p as f64).powf((config.gamma - 1.0) / 2.0);
            drawn.with_target(DenseVector::from_element(p, v))?
        }
        TargetMode::Constant(v) => drawn.with_target(DenseVector::from_element(p, v))?,
    };
    let n = sample_size(p, c);
    let oracle = OracleContext::from_population(&population)?;
    let limit = oracle.limit(p as f64 / n as f64)?;
    Ok(Cell {
        p,
        n,
        c,
        seed,
        population,
        oracle,
        limit,
    })
}

struct Replication {
    losses: Vec<Option<f64>>,
    runtimes: Vec<f64>,
    oracle: Option<ShrinkageWeights>,
    bona_fide: Option<ShrinkageWeights>,
}

fn replicate(config: &McConfig, cell: &Cell, kinds: &[EstimatorKind], k: usize) -> Result<Replication> {
    let mut rng = substream(cell.seed, k as u64);
    let y = generate_sample(&cell.population, cell.n, config.law, &mut rng)?;
    let stats = sample_stats(&y)?;
    let mu_0 = &cell.population.mu_0;
    let options = config.estimator_options();
    let mut out = Replication {
        losses: Vec::with_capacity(kinds.len()),
        runtimes: Vec::with_capacity(kinds.len()),
        oracle: cell.oracle.intensities(&stats.y_bar).ok(),
        bona_fide: None,
    };
    for &kind in kinds {
        let started = Instant::now();
        // With timing on, every estimator pays for its own covariance work.
        let fresh;
        let stats_ref = if config.timing && kind.needs_covariance() {
            fresh = sample_stats(&y)?;
            &fresh
        } else {
            &stats
        };
        let ctx = EstimationContext {
            stats: stats_ref,
            y: Some(&y),
            mu_0,
            oracle: Some(&cell.oracle),
            limit: Some(cell.limit),
            options,
        };
        let result = estimate(kind, &ctx);
        out.runtimes.push(started.elapsed().as_secs_f64());
        match result {
            Ok(est) => {
                if kind == EstimatorKind::Olse {
                    out.bona_fide = est.weights;
                }
                out.losses.push(Some(cell.oracle.loss(&est.mu_hat)?));
            }
            Err(_) => out.losses.push(None),
        }
    }
    Ok(out)
}

fn run_cell(config: &McConfig, p: usize, c: f64) -> Result<CellReport> {
    let cell = build_cell(config, p, c)?;
    let kinds: Vec<EstimatorKind> = config
        .estimators
        .iter()
        .copied()
        .filter(|k| k.is_valid_for(cell.p, cell.n))
        .collect();
    let reps: Vec<Replication> = (0..config.replications)
        .into_par_iter()
        .map(|k| replicate(config, &cell, &kinds, k))
        .collect::<Result<_>>()?;

    let estimators = kinds
        .iter()
        .enumerate()
        .map(|(j, &kind)| {
            let losses: Vec<Option<f64>> = reps.iter().map(|r| r.losses[j]).collect();
            let ok: Vec<f64> = losses.iter().flatten().copied().collect();
            let (mean_loss, se) = mean_and_se(&ok);
            let mean_runtime_s = config
                .timing
                .then(|| reps.iter().map(|r| r.runtimes[j]).sum::<f64>() / reps.len() as f64);
            EstimatorSummary {
                kind,
                failures: losses.len() - ok.len(),
                losses,
                mean_loss,
                se,
                mean_runtime_s,
            }
        })
        .collect();
    let bona_fide = if kinds.contains(&EstimatorKind::Olse) {
        reps.iter().map(|r| r.bona_fide).collect()
    } else {
        Vec::new()
    };
    let c_hat = cell.p as f64 / cell.n as f64;
    let moments = asymptotic_moments(
        cell.population.sigma_factor(),
        &cell.population.mu_n,
        &cell.population.mu_0,
        config.gamma,
        c_hat,
        VarianceForm::from(config.variance_form),
    )?;
    Ok(CellReport {
        p: cell.p,
        n: cell.n,
        c: cell.c,
        c_hat,
        gamma: config.gamma,
        population: cell.population.validation().clone(),
        limit: cell.limit,
        moments,
        estimators,
        oracle: reps.iter().map(|r| r.oracle).collect(),
        bona_fide,
    })
}

/// Runs every cell of the grid on the current rayon pool.
pub fn run_study(config: &McConfig) -> Result<McReport> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.p_grid.len() * config.c_grid.len());
    for &p in &config.p_grid {
        for &c in &config.c_grid {
            cells.push(run_cell(config, p, c)?);
        }
    }
    Ok(McReport {
        config: config.clone(),
        cells,
    })
}

/// [`run_study`] on a dedicated pool with `threads` workers.
pub fn run_study_with_threads(config: &McConfig, threads: usize) -> Result<McReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| run_study(config))
}

/// Frequencies of negative oracle and bona fide `alpha` per cell.
pub fn negative_frequency_table(config: &McConfig) -> Result<Vec<NegativeFrequencyRow>> {
    for needed in [EstimatorKind::OlseOracle, EstimatorKind::Olse] {
        if !config.estimators.contains(&needed) {
            return Err(Error::Config(format!(
                "negative frequency table needs estimator {needed}"
            )));
        }
    }
    Ok(run_study(config)?.negative_frequency_table())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorKind as K;

    fn small(estimators: Vec<K>) -> McConfig {
        McConfig {
            p_grid: vec![6],
            c_grid: vec![0.5, 2.0],
            replications: 8,
            estimators,
            ..McConfig::default()
        }
    }

    #[test]
    fn single_replication_identity() {
        let config = McConfig {
            p_grid: vec![2],
            c_grid: vec![0.5],
            replications: 1,
            estimators: vec![K::SampleMean],
            ..McConfig::default()
        };
        let report = run_study(&config).unwrap();
        let cell = &report.cells[0];
        assert_eq!(cell.n, 4);
        let cell_inputs = build_cell(&config, 2, 0.5).unwrap();
        let mut rng = substream(cell_inputs.seed, 0);
        let y = generate_sample(&cell_inputs.population, 4, config.law, &mut rng).unwrap();
        let want = quadratic_loss(
            &y.column_mean(),
            &cell_inputs.population.mu_n,
            cell_inputs.population.sigma_factor(),
        )
        .unwrap();
        assert_eq!(cell.estimators[0].losses, vec![Some(want)]);
        assert_eq!(cell.estimators[0].se, 0.0);
    }

    #[test]
    fn reports_are_thread_count_independent() {
        let config = small(vec![K::SampleMean, K::Olse, K::OlseOracle, K::Wang]);
        let one = run_study_with_threads(&config, 1).unwrap();
        let three = run_study_with_threads(&config, 3).unwrap();
        for (a, b) in one.cells.iter().zip(&three.cells) {
            assert_eq!(a.estimators, b.estimators);
            assert_eq!(a.oracle, b.oracle);
            assert_eq!(a.bona_fide, b.bona_fide);
        }
    }

    #[test]
    fn invalid_estimators_are_skipped_per_cell() {
        let report = run_study(&small(vec![K::Js, K::JsHighDim])).unwrap();
        // p = 6: n = 12 admits only the p < n variant, n = 3 only the p > n one.
        assert_eq!(report.cells[0].estimators.len(), 1);
        assert_eq!(report.cells[0].estimators[0].kind, K::Js);
        assert_eq!(report.cells[1].estimators.len(), 1);
        assert_eq!(report.cells[1].estimators[0].kind, K::JsHighDim);
    }

    #[test]
    fn frequency_table_requires_both_intensities() {
        assert!(negative_frequency_table(&small(vec![K::Olse])).is_err());
        let rows = negative_frequency_table(&small(vec![K::Olse, K::OlseOracle])).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.oracle)));
    }

    #[test]
    fn bona_fide_standardization_needs_small_concentration() {
        let report = run_study(&small(vec![K::Olse, K::OlseOracle])).unwrap();
        assert!(report.cells[0].standardized(Quantity::AlphaBonaFide).is_ok());
        assert_eq!(
            report.cells[1].standardized(Quantity::AlphaBonaFide).unwrap_err(),
            Error::UnsupportedConcentration(2.0)
        );
        assert_eq!(report.cells[1].standardized(Quantity::AlphaOracle).unwrap().len(), 8);
    }
}

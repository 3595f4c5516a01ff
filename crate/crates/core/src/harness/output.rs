use std::path::Path;

use super::{McReport, NegativeFrequencyRow};
use crate::error::Result;

/// One point of a QQ plot.
#[derive(Debug, Clone, PartialEq)]
pub struct QqRow {
    pub quantity: String,
    pub p: usize,
    pub c: f64,
    pub theoretical: f64,
    pub empirical: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `losses.csv`: one row per cell and estimator.
pub fn write_losses_csv(path: &Path, report: &McReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["p", "c", "estimator", "mean_loss", "se", "mean_runtime_s"])?;
    for cell in &report.cells {
        for e in &cell.estimators {
            w.write_record([
                cell.p.to_string(),
                cell.c.to_string(),
                e.kind.to_string(),
                e.mean_loss.to_string(),
                e.se.to_string(),
                opt(e.mean_runtime_s),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `intensities.csv`: oracle and bona fide intensities per replication.
pub fn write_intensities_csv(path: &Path, report: &McReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["p", "c", "kind", "replication", "alpha", "beta"])?;
    for cell in &report.cells {
        for (kind, series) in [("oracle", &cell.oracle), ("bona-fide", &cell.bona_fide)] {
            for (k, weights) in series.iter().enumerate() {
                if let Some(wt) = weights {
                    w.write_record([
                        cell.p.to_string(),
                        cell.c.to_string(),
                        kind.to_string(),
                        k.to_string(),
                        wt.alpha.to_string(),
                        wt.beta.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_qq_csv(path: &Path, rows: &[QqRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["quantity", "p", "c", "theoretical", "empirical"])?;
    for r in rows {
        w.write_record([
            r.quantity.clone(),
            r.p.to_string(),
            r.c.to_string(),
            r.theoretical.to_string(),
            r.empirical.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `table1.csv`: frequencies of negative oracle and bona fide `alpha`.
pub fn write_table1_csv(path: &Path, rows: &[NegativeFrequencyRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "p",
        "c",
        "n",
        "oracle_negative_freq",
        "bona_fide_negative_freq",
        "replications",
    ])?;
    for r in rows {
        w.write_record([
            r.p.to_string(),
            r.c.to_string(),
            r.n.to_string(),
            r.oracle.to_string(),
            r.bona_fide.to_string(),
            r.replications.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

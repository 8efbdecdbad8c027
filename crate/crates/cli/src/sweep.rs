//! Per-episode aggregation over seeds: mean and 95% confidence half-width.

use std::io::Write;

use pporpe::trainer::TrainRecord;

use crate::error::CliError;
use crate::logs::fmt_f64;

/// Mean and `1.96 * sd / sqrt(n)` over the finite values, with the sample
/// standard deviation. One value gives a zero half-width; none gives NaN.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let n = finite.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = finite.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub episode: usize,
    /// `(mean, ci)` per metric, in [`METRICS`] order.
    pub stats: [(f64, f64); 5],
}

pub const METRICS: [&str; 5] = [
    "return",
    "epsilon_mean",
    "pearson_divergence",
    "actor_loss",
    "critic_loss",
];

fn metrics(r: &TrainRecord) -> [f64; 5] {
    [
        r.episode_return,
        r.epsilon_mean,
        r.pearson_divergence,
        r.actor_loss,
        r.critic_loss,
    ]
}

/// Aggregates runs episode by episode. Callers pass runs in a canonical
/// (seed-sorted) order so the float sums do not depend on invocation order.
pub fn aggregate(runs: &[Vec<TrainRecord>]) -> Result<Vec<AggregateRow>, CliError> {
    let Some(first) = runs.first() else {
        return Err(CliError::Usage("sweep needs at least one seed".into()));
    };
    if runs.iter().any(|r| r.len() != first.len()) {
        return Err(CliError::Usage("runs have different episode counts".into()));
    }
    Ok((0..first.len())
        .map(|e| {
            let per_run: Vec<[f64; 5]> = runs.iter().map(|r| metrics(&r[e])).collect();
            let stats = std::array::from_fn(|m| {
                let column: Vec<f64> = per_run.iter().map(|v| v[m]).collect();
                mean_ci(&column)
            });
            AggregateRow {
                episode: first[e].episode,
                stats,
            }
        })
        .collect())
}

pub fn write_aggregate<W: Write>(out: W, rows: &[AggregateRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["episode".to_string()];
    for m in METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_ci95"));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.episode.to_string()];
        for (mean, ci) in r.stats {
            rec.push(fmt_f64(mean));
            rec.push(fmt_f64(ci));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

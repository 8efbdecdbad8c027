//! CSV writers. Every file starts with a header row; floats are written in
//! scientific notation with 13 significant digits.

use std::io::Write;
use std::path::Path;

use pporpe::trainer::{EvalStats, TrainRecord};

use crate::error::CliError;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub const TRAIN_HEADER: [&str; 6] = [
    "episode",
    "return",
    "epsilon_mean",
    "pearson_divergence",
    "actor_loss",
    "critic_loss",
];

/// Training log without wall times, so that reruns are byte-identical.
pub fn write_train_log<W: Write>(out: W, records: &[TrainRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAIN_HEADER)?;
    for r in records {
        w.write_record([
            r.episode.to_string(),
            fmt_f64(r.episode_return),
            fmt_f64(r.epsilon_mean),
            fmt_f64(r.pearson_divergence),
            fmt_f64(r.actor_loss),
            fmt_f64(r.critic_loss),
        ])?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

pub fn write_timing<W: Write>(out: W, records: &[TrainRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode", "wall_ms"])?;
    for r in records {
        w.write_record([r.episode.to_string(), r.wall_ms.to_string()])?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

/// Per-episode evaluation returns followed by summary rows.
pub fn write_eval<W: Write>(out: W, stats: &EvalStats) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "return"])?;
    for (i, r) in stats.returns.iter().enumerate() {
        w.write_record([i.to_string(), fmt_f64(*r)])?;
    }
    for (name, v) in [
        ("lower_quartile", stats.lower_quartile),
        ("median", stats.median),
        ("upper_quartile", stats.upper_quartile),
    ] {
        w.write_record([name.to_string(), fmt_f64(v)])?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

pub fn write_file(
    path: &Path,
    body: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    body(&mut buf)?;
    std::fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

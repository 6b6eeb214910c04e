//! Result files: JSON-lines round records, CSV aggregate tables, and a run
//! manifest for provenance.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::harness::{AggregateRow, ExperimentConfig, ExperimentResult, RoundRecord};
use crate::seed::{derive_seed, Stream};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_records_jsonl<W: Write>(mut out: W, records: &[RoundRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_aggregate_csv<W: Write>(out: W, rows: &[AggregateRow]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["strategy", "round", "metric", "mean", "std"])?;
    for r in rows {
        w.write_record([
            r.strategy.clone(),
            r.round.to_string(),
            r.metric.name().to_string(),
            r.mean.to_string(),
            r.std.to_string(),
        ])?;
    }
    w.flush()
}

#[derive(Debug, Serialize)]
pub struct UserSeeds {
    pub user: usize,
    pub environment: u64,
    pub true_preferences: u64,
    pub robot_prior: u64,
    pub human_candidates: u64,
    pub answers: u64,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub version: &'static str,
    pub config: &'a ExperimentConfig,
    pub user_seeds: Vec<UserSeeds>,
    pub failures: usize,
    pub records: usize,
}

impl<'a> Manifest<'a> {
    pub fn new(config: &'a ExperimentConfig, result: &ExperimentResult) -> Self {
        let seed = |user: usize, s: Stream| derive_seed(config.seed, &[user as u64, s as u64]);
        Self {
            version: env!("CARGO_PKG_VERSION"),
            config,
            user_seeds: (0..config.users)
                .map(|u| UserSeeds {
                    user: u,
                    environment: seed(u, Stream::Environment),
                    true_preferences: seed(u, Stream::TruePreferences),
                    robot_prior: seed(u, Stream::RobotPrior),
                    human_candidates: seed(u, Stream::HumanCandidates),
                    answers: seed(u, Stream::Answers),
                })
                .collect(),
            failures: result.failures.len(),
            records: result.records.len(),
        }
    }
}

/// Paths of the three files written for one experiment.
#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub records: PathBuf,
    pub aggregate: PathBuf,
    pub manifest: PathBuf,
}

/// Writes records, aggregate and manifest into `dir`, creating it.
pub fn write_experiment(dir: &Path, config: &ExperimentConfig, result: &ExperimentResult) -> io::Result<OutputPaths> {
    fs::create_dir_all(dir)?;
    let paths = OutputPaths {
        records: dir.join(RECORDS_FILE),
        aggregate: dir.join(AGGREGATE_FILE),
        manifest: dir.join(MANIFEST_FILE),
    };
    write_records_jsonl(BufWriter::new(File::create(&paths.records)?), &result.records)?;
    write_aggregate_csv(BufWriter::new(File::create(&paths.aggregate)?), &result.aggregate)?;
    let mut m = BufWriter::new(File::create(&paths.manifest)?);
    serde_json::to_writer_pretty(&mut m, &Manifest::new(config, result))?;
    m.write_all(b"\n")?;
    m.flush()?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Metric;

    #[test]
    fn csv_header_and_rows() {
        let rows = vec![AggregateRow {
            strategy: "random".into(),
            round: 1,
            metric: Metric::Regret,
            mean: 0.5,
            std: 0.25,
        }];
        let mut buf = Vec::new();
        write_aggregate_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "strategy,round,metric,mean,std\nrandom,1,regret,0.5,0.25\n"
        );
    }

    #[test]
    fn jsonl_one_line_per_record() {
        let r = RoundRecord {
            user: 0,
            round: 1,
            strategy: "informative".into(),
            human_error: 0.1,
            regret: 0.2,
            answered_idk: false,
            info_gain: 0.3,
            convergence: 0.4,
            reveal_score: None,
        };
        let mut buf = Vec::new();
        write_records_jsonl(&mut buf, &[r.clone(), r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(r#"{"user":0,"round":1,"strategy":"informative""#));
    }
}

//! CSV encoding of experiment results.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back reproduces the in-memory values exactly.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::experiment::{Aggregate, BaselineRatio, StepRatio};
use crate::strategies::StrategyKind;

pub const RESULT_HEADER: [&str; 8] = [
    "n",
    "mean_fidelity",
    "stderr",
    "error",
    "strategy",
    "alpha",
    "runs",
    "seed",
];

/// An aggregate together with the labels written next to it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledAggregate {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub aggregate: Aggregate,
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidConfig(e.to_string())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes result rows for every group, in the given order.
pub fn write_results<W: Write>(out: W, groups: &[LabeledAggregate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_HEADER).map_err(csv_err)?;
    for g in groups {
        let a = &g.aggregate;
        for k in 0..a.steps.len() {
            w.write_record([
                a.steps[k].to_string(),
                a.mean_fidelity[k].to_string(),
                a.stderr[k].to_string(),
                a.error[k].to_string(),
                g.strategy.name().to_string(),
                a.alpha.to_string(),
                a.n_runs.to_string(),
                g.seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Reads a file written by [`write_results`], grouping rows by
/// `(strategy, alpha, runs, seed)` in order of first appearance.
pub fn read_results<R: Read>(input: R) -> Result<Vec<LabeledAggregate>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(RESULT_HEADER) {
        return Err(Error::InvalidConfig(format!(
            "expected header {}, got {}",
            RESULT_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut groups: Vec<LabeledAggregate> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let bad = |col: &str| Error::InvalidConfig(format!("row {}: invalid {col}", line + 1));
        let f = |i: usize, col: &str| record[i].parse::<f64>().map_err(|_| bad(col));
        let n: usize = record[0].parse().map_err(|_| bad("n"))?;
        let mean = f(1, "mean_fidelity")?;
        let stderr = f(2, "stderr")?;
        let error = f(3, "error")?;
        let strategy: StrategyKind = record[4].parse().map_err(|_| bad("strategy"))?;
        let alpha = f(5, "alpha")?;
        let runs: usize = record[6].parse().map_err(|_| bad("runs"))?;
        let seed: u64 = record[7].parse().map_err(|_| bad("seed"))?;

        let same = |g: &LabeledAggregate| {
            g.strategy == strategy
                && g.seed == seed
                && g.aggregate.alpha == alpha
                && g.aggregate.n_runs == runs
        };
        let idx = match groups.iter().position(same) {
            Some(i) => i,
            None => {
                groups.push(LabeledAggregate {
                    strategy,
                    seed,
                    aggregate: Aggregate {
                        alpha,
                        n_runs: runs,
                        aborted: 0,
                        steps: Vec::new(),
                        mean_fidelity: Vec::new(),
                        stderr: Vec::new(),
                        error: Vec::new(),
                    },
                });
                groups.len() - 1
            }
        };
        let a = &mut groups[idx].aggregate;
        a.steps.push(n);
        a.mean_fidelity.push(mean);
        a.stderr.push(stderr);
        a.error.push(error);
    }
    if groups.is_empty() {
        return Err(Error::InvalidConfig("no result rows".into()));
    }
    Ok(groups)
}

pub fn write_gamma<W: Write>(
    out: W,
    gamma: &[StepRatio],
    scheme: StrategyKind,
    reference: StrategyKind,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "gamma", "scheme", "reference"])
        .map_err(csv_err)?;
    for g in gamma {
        w.write_record([
            g.n.to_string(),
            opt(g.value),
            scheme.name().to_string(),
            reference.name().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Writes `n,error_ratio` when `errors` is set, else `n,fidelity_ratio`.
/// Steps without a baseline entry get an empty value.
pub fn write_baseline_ratios<W: Write>(
    out: W,
    ratios: &[BaselineRatio],
    errors: bool,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let column = if errors {
        "error_ratio"
    } else {
        "fidelity_ratio"
    };
    w.write_record(["n", column]).map_err(csv_err)?;
    for r in ratios {
        let v = if errors {
            r.error_ratio
        } else {
            r.fidelity_ratio
        };
        w.write_record([r.n.to_string(), opt(v)]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidConfig(e.to_string()))
}

//! The trace CSV schema: header `algo,seed,k,queries,f_mu,cov_error,eta1,eta2`,
//! rows sorted by `(algo, seed, k)`, floats at 17 significant digits so every
//! `f64` round-trips bit-exact. `cov_error` is empty when not applicable.

use std::fmt;

use mines::optimizers::RunTrace;

pub const HEADER: &str = "algo,seed,k,queries,f_mu,cov_error,eta1,eta2";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub algo: String,
    pub seed: u64,
    pub k: u64,
    pub queries: u64,
    pub f_mu: f64,
    pub cov_error: Option<f64>,
    pub eta1: f64,
    pub eta2: f64,
}

#[derive(Debug)]
pub struct CsvError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for CsvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "csv error at line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for CsvError {}

/// 17 significant digits; enough for exact `f64` round trips.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serializes traces; the caller passes them already sorted by `(algo, seed)`
/// and records are dense in `k`, which yields the schema's row order.
pub fn write_csv(traces: &[RunTrace]) -> String {
    let mut out = String::with_capacity(64 * traces.iter().map(|t| t.records.len()).sum::<usize>());
    out.push_str(HEADER);
    out.push('\n');
    let mut sorted: Vec<&RunTrace> = traces.iter().collect();
    sorted.sort_by_key(|t| (t.algo, t.seed));
    for trace in sorted {
        for r in &trace.records {
            out.push_str(trace.algo.as_str());
            out.push(',');
            out.push_str(&trace.seed.to_string());
            out.push(',');
            out.push_str(&r.k.to_string());
            out.push(',');
            out.push_str(&r.queries.to_string());
            out.push(',');
            out.push_str(&fmt_f64(r.f_mu));
            out.push(',');
            if let Some(c) = r.cov_error {
                out.push_str(&fmt_f64(c));
            }
            out.push(',');
            out.push_str(&fmt_f64(r.eta1));
            out.push(',');
            out.push_str(&fmt_f64(r.eta2));
            out.push('\n');
        }
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<TraceRow>, CsvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        Some((_, h)) => {
            return Err(CsvError {
                line: 1,
                message: format!("schema mismatch: header '{h}' (expected '{HEADER}')"),
            })
        }
        None => {
            return Err(CsvError {
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(CsvError {
                line: line_no,
                message: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        let bad = |what: &str| CsvError {
            line: line_no,
            message: format!("cannot parse {what}"),
        };
        rows.push(TraceRow {
            algo: fields[0].to_string(),
            seed: fields[1].parse().map_err(|_| bad("seed"))?,
            k: fields[2].parse().map_err(|_| bad("k"))?,
            queries: fields[3].parse().map_err(|_| bad("queries"))?,
            f_mu: fields[4].parse().map_err(|_| bad("f_mu"))?,
            cov_error: if fields[5].is_empty() {
                None
            } else {
                Some(fields[5].parse().map_err(|_| bad("cov_error"))?)
            },
            eta1: fields[6].parse().map_err(|_| bad("eta1"))?,
            eta2: fields[7].parse().map_err(|_| bad("eta2"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mines::optimizers::{Algo, IterRecord};
    use std::time::Duration;

    fn sample_trace(algo: Algo, seed: u64) -> RunTrace {
        RunTrace {
            algo,
            seed,
            records: vec![
                IterRecord {
                    k: 1,
                    queries: 3,
                    f_mu: 0.1 + seed as f64,
                    cov_error: Some(1.25e-3),
                    eta1: 1.0 / 24.0,
                    eta2: 1.0,
                    pd_clamped: false,
                },
                IterRecord {
                    k: 2,
                    queries: 6,
                    f_mu: f64::from_bits(0x3FF123456789ABCD),
                    cov_error: None,
                    eta1: 1.0 / 24.0,
                    eta2: 0.5,
                    pd_clamped: false,
                },
            ],
            best_f: 0.1,
            final_f: 0.05,
            total_queries: 6,
            wall_time: Duration::from_millis(1),
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let traces = vec![sample_trace(Algo::Mines, 2), sample_trace(Algo::Df, 1)];
        let csv = write_csv(&traces);
        let rows = parse_csv(&csv).unwrap();
        assert_eq!(rows.len(), 4);
        // sorted by (algo, seed, k): df first
        assert_eq!(rows[0].algo, "df");
        assert_eq!(rows[2].algo, "mines");
        let awkward = f64::from_bits(0x3FF123456789ABCD);
        assert_eq!(rows[1].f_mu.to_bits(), awkward.to_bits());
        assert_eq!(rows[0].cov_error, Some(1.25e-3));
        assert_eq!(rows[1].cov_error, None);
    }

    #[test]
    fn header_is_exact() {
        let csv = write_csv(&[]);
        assert_eq!(csv, "algo,seed,k,queries,f_mu,cov_error,eta1,eta2\n");
    }

    #[test]
    fn rejects_schema_mismatch() {
        assert!(parse_csv("foo,bar\n1,2\n").is_err());
        let err = parse_csv("algo,seed,k,queries,f_mu,cov_error,eta1,eta2\nmines,1,1\n")
            .unwrap_err();
        assert_eq!(err.line, 2);
    }
}

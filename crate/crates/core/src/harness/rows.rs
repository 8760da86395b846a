use std::cmp::Ordering;
use std::io::{Read, Write};
use std::str::FromStr;

use super::HarnessError;

pub const HEADER: [&str; 8] = ["experiment", "env", "algorithm", "seed", "metric", "x", "y", "flag"];

/// Fixed registry of metric names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    /// Fixed-point value at (start, action 0), x = depth.
    QStartUp,
    /// Fixed-point value at (start, action 1), x = depth.
    QStartDown,
    /// Greedy action at the start state, x = depth.
    GreedyStartAction,
    /// Sup distance to the optimal table, x = depth.
    SupError,
    /// Sup distance to the averaged policy values, x = depth.
    TargetError,
    /// One table entry, x = flat `(s, a)` index.
    QEntry,
    Iterations,
    Residual,
    Samples,
    /// Sup distance of the planner's values to the oracle, x = rooms.
    ValueError,
    /// Sup distance to the optimal table after iteration x.
    ErrorCurve,
    /// Depth picked by the gate at iteration x.
    GateChoice,
    /// x = delay; y = episodes, or infinity when unsolved.
    EpisodesToSolve,
    /// Cumulative trace weight after x steps.
    TraceWeight,
    Violations,
    Cases,
    MaxError,
    /// y = 1 when the acceptance criterion x passed.
    Criterion,
}

impl Metric {
    pub const ALL: [Metric; 18] = [
        Self::QStartUp,
        Self::QStartDown,
        Self::GreedyStartAction,
        Self::SupError,
        Self::TargetError,
        Self::QEntry,
        Self::Iterations,
        Self::Residual,
        Self::Samples,
        Self::ValueError,
        Self::ErrorCurve,
        Self::GateChoice,
        Self::EpisodesToSolve,
        Self::TraceWeight,
        Self::Violations,
        Self::Cases,
        Self::MaxError,
        Self::Criterion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::QStartUp => "q_start_up",
            Self::QStartDown => "q_start_down",
            Self::GreedyStartAction => "greedy_start_action",
            Self::SupError => "sup_error",
            Self::TargetError => "target_error",
            Self::QEntry => "q_entry",
            Self::Iterations => "iterations",
            Self::Residual => "residual",
            Self::Samples => "samples",
            Self::ValueError => "value_error",
            Self::ErrorCurve => "error_curve",
            Self::GateChoice => "gate_choice",
            Self::EpisodesToSolve => "episodes_to_solve",
            Self::TraceWeight => "trace_weight",
            Self::Violations => "violations",
            Self::Cases => "cases",
            Self::MaxError => "max_error",
            Self::Criterion => "criterion",
        }
    }
}

impl FromStr for Metric {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HarnessError::Schema(format!("unknown metric {s:?}")))
    }
}

/// One CSV record.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub env: String,
    pub algorithm: String,
    pub seed: u64,
    pub metric: Metric,
    pub x: f64,
    pub y: f64,
    /// Whether the value is within its tolerance (converged, solved, passed).
    pub flag: bool,
}

impl ResultRow {
    /// Sort key: every column in schema order.
    pub fn cmp_key(&self, other: &Self) -> Ordering {
        (&self.experiment, &self.env, &self.algorithm, self.seed, self.metric)
            .cmp(&(&other.experiment, &other.env, &other.algorithm, other.seed, other.metric))
            .then(self.x.total_cmp(&other.x))
            .then(self.y.total_cmp(&other.y))
            .then(self.flag.cmp(&other.flag))
    }
}

/// Seventeen significant digits in scientific notation.
pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.as_str(),
            r.env.as_str(),
            r.algorithm.as_str(),
            &r.seed.to_string(),
            r.metric.name(),
            &format_real(r.x),
            &format_real(r.y),
            if r.flag { "1" } else { "0" },
        ])?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.to_string()))?;
    Ok(())
}

pub fn rows_to_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

/// Parses a CSV that must carry exactly the schema header.
pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>, HarnessError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(HarnessError::Schema(format!("header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |col: &str| HarnessError::Schema(format!("line {line}: bad {col}"));
        let real = |j: usize, col: &str| rec[j].parse::<f64>().map_err(|_| bad(col));
        rows.push(ResultRow {
            experiment: rec[0].to_string(),
            env: rec[1].to_string(),
            algorithm: rec[2].to_string(),
            seed: rec[3].parse().map_err(|_| bad("seed"))?,
            metric: rec[4].parse()?,
            x: real(5, "x")?,
            y: real(6, "y")?,
            flag: match &rec[7] {
                "1" => true,
                "0" => false,
                _ => return Err(bad("flag")),
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(y: f64) -> ResultRow {
        ResultRow {
            experiment: "e".into(),
            env: "three_fork".into(),
            algorithm: "a b".into(),
            seed: 7,
            metric: Metric::SupError,
            x: 3.0,
            y,
            flag: true,
        }
    }

    #[test]
    fn reals_round_trip_bit_exact() {
        let ys = [0.1 + 0.2, 1.0 / 3.0, -2.5e-310, f64::MAX, f64::INFINITY, 0.0];
        let rows: Vec<_> = ys.iter().map(|&y| row(y)).collect();
        let text = rows_to_string(&rows);
        assert!(text.starts_with("experiment,env,algorithm,seed,metric,x,y,flag\n"));
        assert!(text.contains(",3.0000000000000000e0,"));
        let back = read_rows(text.as_bytes()).unwrap();
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
        assert_eq!(back, rows);
    }

    #[test]
    fn rejects_foreign_header_and_metric() {
        assert!(read_rows("a,b\n1,2\n".as_bytes()).is_err());
        let text = rows_to_string(&[row(1.0)]).replace("sup_error", "made_up");
        assert!(read_rows(text.as_bytes()).is_err());
    }
}

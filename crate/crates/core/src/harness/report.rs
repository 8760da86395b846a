use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::rows::{format_real, read_rows, ResultRow};
use super::HarnessError;

/// Seed aggregate of one `(experiment, env, algorithm, metric, x)` group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub env: String,
    pub algorithm: String,
    pub metric: String,
    pub x: f64,
    pub median: f64,
    /// 16th percentile.
    pub lo: f64,
    /// 84th percentile.
    pub hi: f64,
    pub seeds: usize,
}

pub const SUMMARY_HEADER: &str = "experiment,env,algorithm,metric,x,median,lo,hi,seeds";

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if frac == 0.0 || i + 1 >= sorted.len() || sorted[i] == sorted[i + 1] {
        sorted[i]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

/// Median and central 68% band across seeds.
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Validation { path: "input".into(), message: "no result rows".into() });
    }
    type Key = (String, String, String, &'static str, u64);
    let mut groups: BTreeMap<Key, (f64, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let key = (r.experiment.clone(), r.env.clone(), r.algorithm.clone(), r.metric.name(), r.x.to_bits());
        groups.entry(key).or_insert_with(|| (r.x, Vec::new())).1.push(r.y);
    }
    let mut out: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((experiment, env, algorithm, metric, _), (x, mut ys))| {
            ys.sort_by(f64::total_cmp);
            SummaryRow {
                experiment,
                env,
                algorithm,
                metric: metric.into(),
                x,
                median: quantile(&ys, 0.5),
                lo: quantile(&ys, 0.16),
                hi: quantile(&ys, 0.84),
                seeds: ys.len(),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (&a.experiment, &a.env, &a.algorithm, &a.metric)
            .cmp(&(&b.experiment, &b.env, &b.algorithm, &b.metric))
            .then(a.x.total_cmp(&b.x))
    });
    Ok(out)
}

pub fn summary_csv(summary: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in summary {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.experiment,
            r.env,
            r.algorithm,
            r.metric,
            format_real(r.x),
            format_real(r.median),
            format_real(r.lo),
            format_real(r.hi),
            r.seeds
        ));
    }
    s
}

fn file_stem(parts: &[&str]) -> String {
    parts
        .iter()
        .map(|p| {
            p.chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join("__")
}

/// Two-column `x median` data per `(experiment, env, algorithm, metric)`.
pub fn plot_data(summary: &[SummaryRow]) -> BTreeMap<String, String> {
    let mut files: BTreeMap<String, String> = BTreeMap::new();
    for r in summary {
        let name = format!("{}.dat", file_stem(&[&r.experiment, &r.env, &r.algorithm, &r.metric]));
        let body = files.entry(name).or_default();
        body.push_str(&format!("{} {}\n", format_real(r.x), format_real(r.median)));
    }
    files
}

/// Reads CSVs, writes `summary.csv` and plot data into `out_dir`; returns
/// the summary. Nothing is written when any input fails validation.
pub fn report(paths: &[PathBuf], out_dir: &Path) -> Result<Vec<SummaryRow>, HarnessError> {
    let mut rows = Vec::new();
    for p in paths {
        let file = fs::File::open(p).map_err(|e| HarnessError::Io(p.clone(), e))?;
        let part = read_rows(file).map_err(|e| match e {
            HarnessError::Schema(m) => HarnessError::Schema(format!("{}: {m}", p.display())),
            other => other,
        })?;
        rows.extend(part);
    }
    let summary = summarize(&rows)?;
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::Io(out_dir.to_path_buf(), e))?;
    let write = |name: &str, body: &str| {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| HarnessError::Io(path, e))
    };
    write("summary.csv", &summary_csv(&summary))?;
    for (name, body) in plot_data(&summary) {
        write(&name, &body)?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::rows::Metric;

    fn row(seed: u64, y: f64) -> ResultRow {
        ResultRow {
            experiment: "toy".into(),
            env: "choice".into(),
            algorithm: "q_lambda".into(),
            seed,
            metric: Metric::EpisodesToSolve,
            x: 6.0,
            y,
            flag: y.is_finite(),
        }
    }

    #[test]
    fn single_seed_band_collapses() {
        let s = summarize(&[row(0, 4.0)]).unwrap();
        assert_eq!((s[0].median, s[0].lo, s[0].hi), (4.0, 4.0, 4.0));
    }

    #[test]
    fn median_and_band() {
        let rows: Vec<_> = (0..5).map(|i| row(i, [5.0, 1.0, 4.0, 2.0, 3.0][i as usize])).collect();
        let s = summarize(&rows).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].median, 3.0);
        assert!((s[0].lo - 1.64).abs() < 1e-12 && (s[0].hi - 4.36).abs() < 1e-12);
        let mut unsolved = rows.clone();
        unsolved.push(row(9, f64::INFINITY));
        assert_eq!(summarize(&unsolved).unwrap()[0].median, 3.5);
    }

    #[test]
    fn empty_input_is_rejected_without_output() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("empty.csv");
        std::fs::write(&csv, "experiment,env,algorithm,seed,metric,x,y,flag\n").unwrap();
        let out = dir.path().join("out");
        assert!(matches!(report(&[csv], &out), Err(HarnessError::Validation { .. })));
        assert!(!out.exists());
    }
}

//! Offline aggregation of sweep CSVs into summary tables.
//!
//! `summarize_dir` scans a directory for `*.csv` files (skipping files
//! it produced itself, `*_summary.csv`), detects each file's layout
//! from its header, and renders one summary CSV per input:
//!
//! * **fusion layout** (`subset` + `moda_percent` columns) — grouped by
//!   `(subset, rate)` with mean detection accuracy and mean ± sample
//!   std of the freshness metric, mirroring a per-subset accuracy /
//!   freshness table;
//! * **latency layout** (`detection_ms` … `total_ms` columns) — one row
//!   per pipeline stage with mean ± sample std across all points,
//!   mirroring a per-stage latency table;
//! * **generic sweep layout** (`axis,repetition,status,…,error`) —
//!   grouped by axis value with per-metric mean and sample std.
//!
//! Failed rows are counted per group but excluded from every statistic.
//! Scanning order, grouping order (first appearance) and float
//! rendering are all deterministic, so summaries inherit the
//! byte-reproducibility of the sweeps.

use std::path::{Path, PathBuf};

use crate::error::CliError;

/// A parsed CSV: header plus body rows.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| crate::error::arg_error("empty CSV: no header row"))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(crate::error::arg_error(format!(
                    "CSV row {} has {} fields, header has {}",
                    i + 2,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Sample mean; 0 for an empty slice.
fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Sample standard deviation (n − 1 denominator); 0 below two samples.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Key-preserving grouping in first-appearance order.
struct Groups<K: PartialEq, V> {
    entries: Vec<(K, Vec<V>)>,
}

impl<K: PartialEq, V> Groups<K, V> {
    fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    fn push(&mut self, key: K, value: V) {
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some((_, vs)) => vs.push(value),
            None => self.entries.push((key, vec![value])),
        }
    }
}

fn is_ok_row(table: &Table, row: &[String]) -> bool {
    match table.col("status") {
        Some(c) => row[c] == "ok",
        None => true,
    }
}

/// Fusion layout: group by `(subset, rate)`, average accuracy and
/// freshness.
fn summarize_fusion(table: &Table) -> String {
    let subset_c = table.col("subset").expect("caller checked");
    let rate_c = table.col("rate_kb").expect("caller checked");
    let moda_c = table.col("moda_percent").expect("caller checked");
    let aopt_c = table.col("aopt");
    let det_c = table.col("detected");
    let gt_c = table.col("ground_truth");

    let mut groups: Groups<(String, String), &Vec<String>> = Groups::new();
    for row in &table.rows {
        if is_ok_row(table, row) {
            groups.push((row[subset_c].clone(), row[rate_c].clone()), row);
        }
    }

    let mut out = String::from(
        "subset,rate_kb,samples,moda_mean_pct,aopt_mean,aopt_std,detected_mean,ground_truth_mean\n",
    );
    for ((subset, rate), rows) in &groups.entries {
        let take = |c: Option<usize>| -> Vec<f64> {
            c.map_or_else(Vec::new, |c| {
                rows.iter().filter_map(|r| r[c].parse().ok()).collect()
            })
        };
        let moda = take(Some(moda_c));
        let aopt = take(aopt_c);
        let det = take(det_c);
        let gt = take(gt_c);
        out.push_str(&format!(
            "{subset},{rate},{},{},{},{},{},{}\n",
            rows.len(),
            mean(&moda),
            mean(&aopt),
            std_dev(&aopt),
            mean(&det),
            mean(&gt),
        ));
    }
    out
}

/// Latency layout: one row per pipeline stage, mean ± std across points.
fn summarize_latency(table: &Table) -> String {
    const STAGES: [(&str, &str, &str); 5] = [
        ("detection_ms", "pedestrian detection", "object detector inference per frame"),
        ("extraction_ms", "feature extraction", "descriptor computation per detection set"),
        ("matching_ms", "feature matching", "descriptor matching per camera pair"),
        ("transmission_ms", "payload transmission", "feature payload transfer at link capacity"),
        ("total_ms", "total", "end-to-end calibration pipeline"),
    ];
    let mut out = String::from("operation,description,mean_ms,std_ms\n");
    for (col, operation, description) in STAGES {
        let Some(c) = table.col(col) else { continue };
        let xs: Vec<f64> = table
            .rows
            .iter()
            .filter(|r| is_ok_row(table, r))
            .filter_map(|r| r[c].parse().ok())
            .collect();
        out.push_str(&format!(
            "{operation},{description},{},{}\n",
            mean(&xs),
            std_dev(&xs)
        ));
    }
    out
}

/// Generic layout: group by the first column; mean and std for every
/// column whose `ok` values are all numeric.
fn summarize_generic(table: &Table) -> String {
    let sweep_layout = table.header.len() >= 4
        && table.header.get(1).map(String::as_str) == Some("repetition")
        && table.header.get(2).map(String::as_str) == Some("status")
        && table.header.last().map(String::as_str) == Some("error");
    let metric_range = if sweep_layout {
        3..table.header.len() - 1
    } else {
        1..table.header.len()
    };

    let mut groups: Groups<String, &Vec<String>> = Groups::new();
    let mut failed: Groups<String, ()> = Groups::new();
    for row in &table.rows {
        let key = if sweep_layout {
            row[0].clone()
        } else {
            "all".to_string()
        };
        if is_ok_row(table, row) {
            groups.push(key, row);
        } else {
            failed.push(key, ());
        }
    }

    // A column is numeric when every ok row parses.
    let numeric: Vec<usize> = metric_range
        .filter(|&c| {
            let mut any = false;
            for (_, rows) in &groups.entries {
                for r in rows {
                    if r[c].parse::<f64>().is_err() {
                        return false;
                    }
                    any = true;
                }
            }
            any
        })
        .collect();

    let key_name = if sweep_layout { &table.header[0] } else { "group" };
    let mut out = String::new();
    out.push_str(key_name);
    out.push_str(",samples,failures");
    for &c in &numeric {
        out.push_str(&format!(",{0}_mean,{0}_std", table.header[c]));
    }
    out.push('\n');
    let mut keys: Vec<&String> = groups.entries.iter().map(|(k, _)| k).collect();
    for (k, _) in &failed.entries {
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    for key in keys {
        let rows: &[&Vec<String>] = groups
            .entries
            .iter()
            .find(|(k, _)| k == key)
            .map_or(&[], |(_, v)| v.as_slice());
        let n_failed = failed
            .entries
            .iter()
            .find(|(k, _)| k == key)
            .map_or(0, |(_, v)| v.len());
        out.push_str(&format!("{key},{},{n_failed}", rows.len()));
        for &c in &numeric {
            let xs: Vec<f64> = rows.iter().filter_map(|r| r[c].parse().ok()).collect();
            out.push_str(&format!(",{},{}", mean(&xs), std_dev(&xs)));
        }
        out.push('\n');
    }
    out
}

/// Summarizes one CSV according to its detected layout.
pub fn summarize_csv(text: &str) -> Result<String, CliError> {
    let table = Table::parse(text)?;
    if table.col("subset").is_some() && table.col("moda_percent").is_some() {
        Ok(summarize_fusion(&table))
    } else if table.col("detection_ms").is_some() && table.col("total_ms").is_some() {
        Ok(summarize_latency(&table))
    } else {
        Ok(summarize_generic(&table))
    }
}

/// One produced summary.
pub struct Summary {
    /// The input CSV.
    pub source: PathBuf,
    /// The summary file name (`<stem>_summary.csv`).
    pub file_name: String,
    /// The summary CSV body.
    pub csv: String,
}

/// Summarizes every `*.csv` in `dir` (deterministic name order),
/// skipping prior `*_summary.csv` outputs.
pub fn summarize_dir(dir: &Path) -> Result<Vec<Summary>, CliError> {
    let io_err = |source: std::io::Error| CliError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err)?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err)?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.extension().map_or(false, |x| x == "csv")
                && !p
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .map_or(false, |s| s.ends_with("_summary"))
        })
        .collect();
    paths.sort();

    let mut summaries = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("report");
        summaries.push(Summary {
            file_name: format!("{stem}_summary.csv"),
            csv: summarize_csv(&text)?,
            source: path,
        });
    }
    Ok(summaries)
}

/// Summarizes a directory and writes the summary files next to their
/// sources. Returns the written paths.
pub fn write_summaries(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for s in summarize_dir(dir)? {
        let path = dir.join(&s.file_name);
        std::fs::write(&path, &s.csv).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

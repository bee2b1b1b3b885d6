//! Groups run results by learner and reports the spread of final accuracy
//! across datasets.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use driftbench::io::{read_trace, TraceFormat};

use crate::runner::{RunSummary, SUMMARY_FORMAT_VERSION};
use crate::CliError;

/// One run's headline number.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub learner: String,
    pub dataset: String,
    pub final_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub learner: String,
    /// Per-dataset final accuracy, averaged over repeated runs.
    pub datasets: BTreeMap<String, f64>,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

fn has_suffix(p: &Path, suffix: &str) -> bool {
    p.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.ends_with(suffix))
}

fn read_entry(path: &Path) -> Result<Entry, CliError> {
    let fail = |e: String| CliError::Failed(format!("{}: {e}", path.display()));
    if has_suffix(path, ".summary.json") {
        let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
        let version = serde_json::from_str::<serde_json::Value>(&text)
            .map_err(|e| fail(e.to_string()))?
            .get("format_version")
            .and_then(|v| v.as_u64());
        if version != Some(u64::from(SUMMARY_FORMAT_VERSION)) {
            return Err(fail(format!("incompatible summary version {version:?}")));
        }
        let s: RunSummary = serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;
        return Ok(Entry {
            learner: s.learner,
            dataset: s.dataset,
            final_accuracy: s.metrics.final_cum_accuracy,
        });
    }
    let format = TraceFormat::from_path(path).ok_or_else(|| fail("not a trace or summary file".into()))?;
    let trace = read_trace(path, format).map_err(|e| fail(e.to_string()))?;
    let last = trace.last().ok_or_else(|| fail("empty trace".into()))?;
    let stem = || {
        path.file_name()
            .and_then(|n| n.to_str())
            .map(|n| n.split('.').next().unwrap_or(n).to_string())
            .unwrap_or_default()
    };
    // CSV traces carry no descriptor; fall back to the file name
    let (learner, dataset) = if trace.meta.learner.is_empty() {
        ("unknown".to_string(), stem())
    } else {
        (trace.meta.learner.clone(), trace.meta.dataset.clone())
    };
    Ok(Entry {
        learner,
        dataset,
        final_accuracy: last.cum_accuracy,
    })
}

/// Expands directories and reads every result. A directory contributes its
/// run summaries, or its trace files when it holds no summaries.
pub fn collect_entries(paths: &[PathBuf]) -> Result<Vec<Entry>, CliError> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut listing: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file())
                .collect();
            listing.sort();
            let summaries: Vec<PathBuf> = listing
                .iter()
                .filter(|f| has_suffix(f, ".summary.json"))
                .cloned()
                .collect();
            if summaries.is_empty() {
                files.extend(
                    listing
                        .into_iter()
                        .filter(|f| has_suffix(f, ".trace.csv") || has_suffix(f, ".trace.json")),
                );
            } else {
                files.extend(summaries);
            }
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::Failed("no traces found".into()));
    }
    files.iter().map(|f| read_entry(f)).collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn summarize(entries: &[Entry]) -> Vec<GroupStats> {
    let mut groups: BTreeMap<&str, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for e in entries {
        groups
            .entry(&e.learner)
            .or_default()
            .entry(&e.dataset)
            .or_default()
            .push(e.final_accuracy);
    }
    groups
        .into_iter()
        .map(|(learner, runs)| {
            let datasets: BTreeMap<String, f64> = runs
                .into_iter()
                .map(|(d, v)| (d.to_string(), v.iter().sum::<f64>() / v.len() as f64))
                .collect();
            let values: Vec<f64> = datasets.values().copied().collect();
            GroupStats {
                learner: learner.to_string(),
                mean: values.iter().sum::<f64>() / values.len() as f64,
                median: median(&values),
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                datasets,
            }
        })
        .collect()
}

fn dataset_columns(groups: &[GroupStats]) -> Vec<String> {
    let mut cols: Vec<String> = groups.iter().flat_map(|g| g.datasets.keys().cloned()).collect();
    cols.sort();
    cols.dedup();
    cols
}

fn rows(groups: &[GroupStats]) -> Vec<Vec<String>> {
    let cols = dataset_columns(groups);
    let mut header: Vec<String> = ["learner", "n", "mean", "median", "min", "max"]
        .map(String::from)
        .to_vec();
    header.extend(cols.iter().cloned());
    let mut out = vec![header];
    for g in groups {
        let mut row = vec![
            g.learner.clone(),
            g.datasets.len().to_string(),
            format!("{:.4}", g.mean),
            format!("{:.4}", g.median),
            format!("{:.4}", g.min),
            format!("{:.4}", g.max),
        ];
        row.extend(
            cols.iter()
                .map(|c| g.datasets.get(c).map_or(String::new(), |v| format!("{v:.4}"))),
        );
        out.push(row);
    }
    out
}

pub fn render_csv(groups: &[GroupStats]) -> Result<String, CliError> {
    let mut w = csv_writer();
    for r in rows(groups) {
        w.write_record(&r).map_err(driftbench::Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Failed(e.to_string()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}


/// Left-aligned text columns separated by two spaces.
pub fn render_text(groups: &[GroupStats]) -> String {
    let rows = rows(groups);
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &rows {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

//! CSV emission: one summary row per run, the wealth curve, the oracle
//! trace, and bar-chart data for the risk/return measures. Identical runs
//! produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::backtest::BacktestReport;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no summary.csv files found under {0}")]
    NothingToAggregate(String),
}

pub const SUMMARY_HEADER: &str = "name,dataset,hindsight,seed,CW,APY,ann_std,MDD,Sharpe,Calmar,t,p";

const PLOT_MEASURES: [&str; 5] = ["APY", "ann_std", "MDD", "Sharpe", "Calmar"];

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| ReportError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    let mut f = fs::File::create(path).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    f.write_all(contents.as_bytes()).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Shortest-roundtrip float formatting; keeps CSVs byte-stable across runs.
fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn summary_row(report: &BacktestReport) -> String {
    let s = &report.summary;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        report.name,
        report.dataset_name,
        report.hindsight,
        report.seed,
        fmt(s.cumulative_wealth),
        fmt(s.apy),
        fmt(s.ann_std),
        fmt(s.max_drawdown),
        fmt(s.sharpe),
        fmt(s.calmar),
        fmt(s.t_stat),
        fmt(s.p_value),
    )
}

/// Writes `summary.csv`, `wealth.csv`, `plot_data.csv` and, for oracle runs,
/// `oracle_trace.csv` into `outdir`. Returns the paths written.
pub fn emit_report(report: &BacktestReport, outdir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();

    let summary_path = outdir.join("summary.csv");
    write_file(
        &summary_path,
        &format!("{SUMMARY_HEADER}\n{}\n", summary_row(report)),
    )?;
    written.push(summary_path);

    let mut wealth = String::from("period,wealth\n");
    for (t, w) in report.wealth.iter().enumerate() {
        wealth.push_str(&format!("{t},{}\n", fmt(*w)));
    }
    let wealth_path = outdir.join("wealth.csv");
    write_file(&wealth_path, &wealth)?;
    written.push(wealth_path);

    let mut plot = String::from("measure,strategy,value\n");
    let s = &report.summary;
    for (measure, value) in PLOT_MEASURES.iter().zip([
        s.apy,
        s.ann_std,
        s.max_drawdown,
        s.sharpe,
        s.calmar,
    ]) {
        plot.push_str(&format!("{measure},{},{}\n", report.name, fmt(value)));
    }
    let plot_path = outdir.join("plot_data.csv");
    write_file(&plot_path, &plot)?;
    written.push(plot_path);

    // Static runs have no trace; the file is omitted entirely.
    if !report.oracle_trace.is_empty() {
        let d = report.oracle_trace[0].theta.len();
        let mut header = String::from("period");
        for i in 0..d {
            header.push_str(&format!(",theta{i}"));
        }
        header.push_str(",acquisition,realized_return,temporal_lengthscale,fallback");
        let hyper_dim = report
            .oracle_trace
            .iter()
            .find_map(|r| r.hyperparams.as_ref())
            .map(|h| h.to_log_vector().len());
        if hyper_dim.is_some() {
            header.push_str(",sigma_f");
            for i in 0..d {
                header.push_str(&format!(",lengthscale{i}"));
            }
            for i in 0..d {
                header.push_str(&format!(",alpha{i}"));
            }
            header.push_str(",temporal_l,temporal_alpha,noise_sigma");
        }
        header.push('\n');

        let mut trace = header;
        for rec in &report.oracle_trace {
            trace.push_str(&format!("{}", rec.t));
            for v in &rec.theta {
                trace.push_str(&format!(",{}", fmt(*v)));
            }
            trace.push_str(&format!(
                ",{},{},{},{}",
                rec.acquisition.map(fmt).unwrap_or_default(),
                fmt(rec.realized_return),
                rec.temporal_lengthscale.map(fmt).unwrap_or_default(),
                rec.fallback,
            ));
            if hyper_dim.is_some() {
                match &rec.hyperparams {
                    Some(h) => {
                        trace.push_str(&format!(",{}", fmt(h.sigma_f)));
                        for l in &h.lengthscales {
                            trace.push_str(&format!(",{}", fmt(*l)));
                        }
                        for a in &h.alphas {
                            trace.push_str(&format!(",{}", fmt(*a)));
                        }
                        trace.push_str(&format!(
                            ",{},{},{}",
                            fmt(h.temporal_l),
                            fmt(h.temporal_alpha),
                            fmt(h.noise_sigma),
                        ));
                    }
                    None => trace.push_str(&",".repeat(2 * d + 4)),
                }
            }
            trace.push('\n');
        }
        let trace_path = outdir.join("oracle_trace.csv");
        write_file(&trace_path, &trace)?;
        written.push(trace_path);
    }
    Ok(written)
}

/// Merges every `summary.csv` under `in_dir` (recursively) into one combined
/// summary plus per-measure bar-chart data, sorted for stable output.
pub fn aggregate_reports(in_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut rows = Vec::new();
    collect_summary_rows(in_dir, &mut rows)?;
    if rows.is_empty() {
        return Err(ReportError::NothingToAggregate(
            in_dir.display().to_string(),
        ));
    }
    rows.sort();
    rows.dedup();

    let mut combined = String::from(SUMMARY_HEADER);
    combined.push('\n');
    for row in &rows {
        combined.push_str(row);
        combined.push('\n');
    }
    let summary_path = out_dir.join("summary.csv");
    write_file(&summary_path, &combined)?;

    // Bar-chart layout: measure,dataset,strategy,value.
    let mut plot = String::from("measure,dataset,strategy,value\n");
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 12 {
            continue;
        }
        let (name, dataset) = (fields[0], fields[1]);
        for (i, measure) in PLOT_MEASURES.iter().enumerate() {
            plot.push_str(&format!("{measure},{dataset},{name},{}\n", fields[5 + i]));
        }
    }
    let plot_path = out_dir.join("plot_data.csv");
    write_file(&plot_path, &plot)?;
    Ok(vec![summary_path, plot_path])
}

fn collect_summary_rows(dir: &Path, rows: &mut Vec<String>) -> Result<(), ReportError> {
    let entries = fs::read_dir(dir).map_err(|source| ReportError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    for path in paths {
        if path.is_dir() {
            collect_summary_rows(&path, rows)?;
        } else if path.file_name().is_some_and(|n| n == "summary.csv") {
            let text = fs::read_to_string(&path).map_err(|source| ReportError::Io {
                path: path.display().to_string(),
                source,
            })?;
            for line in text.lines().skip(1) {
                if !line.trim().is_empty() {
                    rows.push(line.to_string());
                }
            }
        }
    }
    Ok(())
}

//! Report rows and rendering (text table + JSON).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use taa_core::error::Result;

/// One evaluated (case, architecture) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub case: u8,
    pub arch: String,
    pub n_train: usize,
    pub n_test: usize,
    pub params: usize,
    pub err_clean_mean: f64,
    pub err_clean_std: f64,
    pub err_noisy_mean: f64,
    pub err_noisy_std: f64,
    pub noise_level: f64,
    pub trials: usize,
}

impl ReportRow {
    pub fn render_line(&self) -> String {
        format!(
            "case {} | {:<8} | N={} N*={} | params={} | clean {:.3} +/- {:.3} % | noisy({:.0}%) {:.3} +/- {:.3} %",
            self.case,
            self.arch,
            self.n_train,
            self.n_test,
            self.params,
            100.0 * self.err_clean_mean,
            100.0 * self.err_clean_std,
            100.0 * self.noise_level,
            100.0 * self.err_noisy_mean,
            100.0 * self.err_noisy_std,
        )
    }
}

/// Read accumulated rows; a missing file is an empty report.
pub fn read_rows(path: &Path) -> Result<Vec<ReportRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let bytes = fs::read(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Insert or replace the row with the same (case, arch) key, keeping the
/// file sorted; reruns are idempotent.
pub fn merge_row(path: &Path, row: ReportRow) -> Result<()> {
    let mut rows = read_rows(path)?;
    rows.retain(|r| !(r.case == row.case && r.arch == row.arch));
    rows.push(row);
    rows.sort_by(|a, b| (a.case, &a.arch).cmp(&(b.case, &b.arch)));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_vec_pretty(&rows)?)?;
    Ok(())
}

/// Render `report.txt` and `report.json` under `out`.
pub fn write_report(rows: &[ReportRow], out: &Path) -> Result<()> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| (a.case, &a.arch).cmp(&(b.case, &b.arch)));

    let mut text = String::new();
    text.push_str(
        "case | arch     |    N |  N* |   params | clean err %        | noisy err %\n",
    );
    text.push_str(
        "-----+----------+------+-----+----------+--------------------+--------------------\n",
    );
    for r in &sorted {
        text.push_str(&format!(
            "{:>4} | {:<8} | {:>4} | {:>3} | {:>8} | {:>7.3} +/- {:>6.3} | {:>7.3} +/- {:>6.3}\n",
            r.case,
            r.arch,
            r.n_train,
            r.n_test,
            r.params,
            100.0 * r.err_clean_mean,
            100.0 * r.err_clean_std,
            100.0 * r.err_noisy_mean,
            100.0 * r.err_noisy_std,
        ));
    }

    fs::create_dir_all(out)?;
    fs::write(out.join("report.txt"), &text)?;
    fs::write(out.join("report.json"), serde_json::to_vec_pretty(&sorted)?)?;
    print!("{text}");
    Ok(())
}

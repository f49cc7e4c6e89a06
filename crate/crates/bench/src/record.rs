//! Per-trial CSV rows and their aggregation.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::Result;

/// One trial. Failed trials are kept with `status = "error"` and NaN metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub experiment: String,
    pub trial: usize,
    pub seed: u64,
    pub variant: String,
    pub mode: String,
    pub n_points: usize,
    pub n_lines: usize,
    pub noise_std: f64,
    pub outlier_fraction: f64,
    /// Initial-value deviation or rotation perturbation, degrees.
    pub deviation_deg: f64,
    pub e_rot_deg: f64,
    pub e_t_deg: f64,
    pub ransac_ms: f64,
    pub rotation_ms: f64,
    pub translation_ms: f64,
    pub total_ms: f64,
    pub converged: bool,
    pub pure_rotation: bool,
    pub point_precision: f64,
    pub point_recall: f64,
    pub line_precision: f64,
    pub line_recall: f64,
    pub status: String,
    pub message: String,
    /// Full scenario configuration as JSON, for replaying the trial.
    pub config: String,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub fn write_csv<W: Write>(w: W, records: &[TrialRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<TrialRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Mean and standard error of the finite values; NaN for an empty set.
pub fn mean_and_stderr(values: impl IntoIterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN, 1);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt(), n)
}

pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Aggregate of the trials sharing one grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub variant: String,
    pub mode: String,
    pub noise_std: f64,
    pub outlier_fraction: f64,
    pub deviation_deg: f64,
    pub trials: usize,
    pub failures: usize,
    pub mean_e_rot_deg: f64,
    pub stderr_e_rot_deg: f64,
    pub median_e_rot_deg: f64,
    pub mean_e_t_deg: f64,
    pub stderr_e_t_deg: f64,
    pub median_e_t_deg: f64,
    pub success_rate: f64,
    pub median_total_ms: f64,
    pub mean_point_precision: f64,
    pub mean_point_recall: f64,
    pub mean_line_precision: f64,
    pub mean_line_recall: f64,
}

type NodeKey = (String, String, String, u64, u64, u64);

fn node_key(r: &TrialRecord) -> NodeKey {
    (
        r.experiment.clone(),
        r.variant.clone(),
        r.mode.clone(),
        r.noise_std.to_bits(),
        r.outlier_fraction.to_bits(),
        r.deviation_deg.to_bits(),
    )
}

/// Groups by (experiment, variant, mode, noise, outliers, deviation), in
/// first-appearance order.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<NodeKey> = Vec::new();
    let mut groups: BTreeMap<NodeKey, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        let key = node_key(r);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let ok: Vec<&&TrialRecord> = rows.iter().filter(|r| r.is_ok()).collect();
            let (mean_rot, se_rot, _) = mean_and_stderr(ok.iter().map(|r| r.e_rot_deg));
            let (mean_t, se_t, _) = mean_and_stderr(ok.iter().map(|r| r.e_t_deg));
            let first = rows[0];
            SummaryRow {
                experiment: first.experiment.clone(),
                variant: first.variant.clone(),
                mode: first.mode.clone(),
                noise_std: first.noise_std,
                outlier_fraction: first.outlier_fraction,
                deviation_deg: first.deviation_deg,
                trials: rows.len(),
                failures: rows.len() - ok.len(),
                mean_e_rot_deg: mean_rot,
                stderr_e_rot_deg: se_rot,
                median_e_rot_deg: median(ok.iter().map(|r| r.e_rot_deg)),
                mean_e_t_deg: mean_t,
                stderr_e_t_deg: se_t,
                median_e_t_deg: median(ok.iter().map(|r| r.e_t_deg)),
                success_rate: rows.iter().filter(|r| r.converged).count() as f64 / rows.len() as f64,
                median_total_ms: median(ok.iter().map(|r| r.total_ms)),
                mean_point_precision: mean_and_stderr(ok.iter().map(|r| r.point_precision)).0,
                mean_point_recall: mean_and_stderr(ok.iter().map(|r| r.point_recall)).0,
                mean_line_precision: mean_and_stderr(ok.iter().map(|r| r.line_precision)).0,
                mean_line_recall: mean_and_stderr(ok.iter().map(|r| r.line_recall)).0,
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Whitespace-separated table with a `#` header line, one block per
/// `(variant, mode)` separated by two blank lines (gnuplot `index` blocks).
pub fn gnuplot_blocks(rows: &[SummaryRow], x: impl Fn(&SummaryRow) -> f64) -> String {
    let mut blocks: Vec<((String, String), Vec<&SummaryRow>)> = Vec::new();
    for r in rows {
        let key = (r.variant.clone(), r.mode.clone());
        match blocks.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => blocks.push((key, vec![r])),
        }
    }
    let mut s = String::new();
    for (i, ((variant, mode), rows)) in blocks.iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        s.push_str(&format!("# {variant} {mode}\n# x mean_e_rot stderr_e_rot mean_e_t stderr_e_t success_rate\n"));
        for r in rows {
            s.push_str(&format!(
                "{} {} {} {} {} {}\n",
                x(r),
                r.mean_e_rot_deg,
                r.stderr_e_rot_deg,
                r.mean_e_t_deg,
                r.stderr_e_t_deg,
                r.success_rate
            ));
        }
    }
    s
}

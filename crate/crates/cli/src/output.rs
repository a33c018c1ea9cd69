//! On-disk formats: `checkpoints.json`, `metrics.csv`, `timing.json`,
//! `verify.csv` and `conditions.json`.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use krr_sketch::evaluation::CheckpointMetrics;

use crate::config::RunConfig;

pub const SPEC_VERSION: &str = "1";

pub const CHECKPOINTS_FILE: &str = "checkpoints.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.json";
pub const VERIFY_FILE: &str = "verify.csv";
pub const CONDITIONS_FILE: &str = "conditions.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub t: usize,
    #[serde(rename = "Q_t")]
    pub q: usize,
    pub deff_tilde: f64,
    /// 1-based, ascending.
    pub dictionary_indices: Vec<usize>,
    /// Multiplicities: `b_i` for the streaming algorithms, draw counts for batch-exact.
    pub weights: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointsFile {
    pub spec_version: String,
    pub config_echo: RunConfig,
    pub checkpoints: Vec<CheckpointRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckpointTiming {
    pub t: usize,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub spec_version: &'static str,
    pub total_secs: f64,
    pub checkpoints: Vec<CheckpointTiming>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionEntry {
    pub step: usize,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub spectral_gap: f64,
    pub psi_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionsFile {
    pub spec_version: &'static str,
    pub gamma: f64,
    pub epsilon: f64,
    pub all_hold: bool,
    pub reports: Vec<ConditionEntry>,
}

/// 17 significant digits, `.` separator.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_checkpoints(dir: &Path) -> Result<CheckpointsFile> {
    let path = dir.join(CHECKPOINTS_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let file: CheckpointsFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if file.spec_version != SPEC_VERSION {
        anyhow::bail!(
            "{} has spec_version {}, expected {SPEC_VERSION}",
            path.display(),
            file.spec_version
        );
    }
    Ok(file)
}

pub fn write_metrics(path: &Path, records: &[CheckpointRecord]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["t", "Q_t", "deff_tilde"])?;
    for r in records {
        w.write_record([r.t.to_string(), r.q.to_string(), num(r.deff_tilde)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_verify(path: &Path, metrics: &[CheckpointMetrics]) -> Result<()> {
    let with_risk = metrics.iter().any(|m| m.risk_exact.is_some());
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header = vec![
        "t",
        "Q_t",
        "deff_exact",
        "deff_tilde",
        "spectral_gap",
        "psi_gap",
        "lower_ok",
        "upper_ok",
    ];
    if with_risk {
        header.extend(["risk_exact", "risk_approx", "risk_ratio_bound"]);
    }
    w.write_record(&header)?;
    for m in metrics {
        let mut row = vec![
            m.t.to_string(),
            m.q.to_string(),
            num(m.deff_exact),
            num(m.deff_tilde),
            num(m.spectral_gap),
            num(m.psi_gap),
            m.lower_ok.to_string(),
            m.upper_ok.to_string(),
        ];
        if with_risk {
            for v in [m.risk_exact, m.risk_approx, m.risk_ratio_bound] {
                row.push(v.map(num).unwrap_or_default());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn conditions(gamma: f64, epsilon: f64, metrics: &[CheckpointMetrics]) -> ConditionsFile {
    ConditionsFile {
        spec_version: SPEC_VERSION,
        gamma,
        epsilon,
        all_hold: metrics.iter().all(|m| m.lower_ok && m.upper_ok),
        reports: metrics
            .iter()
            .map(|m| ConditionEntry {
                step: m.t,
                lower_ok: m.lower_ok,
                upper_ok: m.upper_ok,
                spectral_gap: m.spectral_gap,
                psi_gap: m.psi_gap,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_roundtrip_with_17_digits() {
        for x in [0.1, 1.0 / 3.0, 123456.789, -2.5e-300, 0.0] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17, "{s}");
        }
    }
}

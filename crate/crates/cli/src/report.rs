//! Convergence reports: per-level rows, rate fits, and pass/fail criteria,
//! with CSV / JSON / SVG emitters. Reports are deterministic functions of the
//! config (wall-clock is never stored).

use crate::config::ExperimentConfig;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SigmaError {
    pub sigma: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct LevelRow {
    pub level: u32,
    pub seed: u64,
    pub n: usize,
    pub q: f64,
    pub h: f64,
    pub rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition_estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<SigmaError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub native_error: Option<f64>,
    /// None = indeterminate ratio (missing datum, not a failure).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repro_residual_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lpr_locality: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lpr_degree: Option<i64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quad_panels: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bernstein_max_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spline_oracle_diff: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FitRow {
    /// What was fitted, e.g. "w-error" or "lambda-min".
    pub quantity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Abscissa of the log-log fit ("h" or "q").
    pub abscissa: String,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub points_used: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    AtLeast,
    AtMost,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CriterionRow {
    /// Acceptance criterion id this check realizes.
    pub id: String,
    pub description: String,
    pub observed: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
}

impl CriterionRow {
    pub fn new(
        id: &str,
        description: &str,
        observed: f64,
        comparison: Comparison,
        threshold: f64,
    ) -> Self {
        let passed = match comparison {
            Comparison::AtLeast => observed >= threshold,
            Comparison::AtMost => observed <= threshold,
        };
        CriterionRow {
            id: id.to_string(),
            description: description.to_string(),
            observed,
            comparison,
            threshold,
            passed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nodes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConvergenceReport {
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_region: Option<EvalRegion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub levels: Vec<LevelRow>,
    pub fits: Vec<FitRow>,
    pub criteria: Vec<CriterionRow>,
    pub passed: bool,
    /// Levels that failed and were excluded, with reasons.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub level_failures: Vec<String>,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> Result<String, ReportError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Per-level CSV table. The sigma columns follow the config's sigma list;
    /// an empty list still yields a valid header.
    pub fn to_csv(&self) -> String {
        let mut cols = vec![
            "level".to_string(),
            "n".to_string(),
            "q".to_string(),
            "h".to_string(),
            "rho".to_string(),
            "cond".to_string(),
        ];
        for s in &self.config.sigmas {
            cols.push(format!("err_sigma_{s}"));
        }
        cols.extend(
            [
                "lambda_min",
                "power_max",
                "l2_error",
                "native_error",
                "e_ratio",
                "gamma",
                "repro_residual_max",
                "bernstein_max_ratio",
                "spline_oracle_diff",
            ]
            .map(String::from),
        );
        let mut out = cols.join(",");
        out.push('\n');
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        for row in &self.levels {
            let mut fields = vec![
                row.level.to_string(),
                row.n.to_string(),
                format!("{:.12e}", row.q),
                format!("{:.12e}", row.h),
                format!("{:.12e}", row.rho),
                fmt(row.condition_estimate),
            ];
            for s in &self.config.sigmas {
                let v = row.errors.iter().find(|e| e.sigma == *s).map(|e| e.value);
                fields.push(fmt(v));
            }
            fields.push(fmt(row.lambda_min));
            fields.push(fmt(row.power_max));
            fields.push(fmt(row.l2_error));
            fields.push(fmt(row.native_error));
            fields.push(fmt(row.e_ratio));
            fields.push(fmt(row.gamma));
            fields.push(fmt(row.repro_residual_max));
            fields.push(fmt(row.bernstein_max_ratio));
            fields.push(fmt(row.spline_oracle_diff));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Write the requested formats into `dir` with the given stem; returns the
    /// written paths.
    pub fn emit(&self, dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>, ReportError> {
        let wrap = |path: &Path, source: std::io::Error| ReportError::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| wrap(dir, e))?;
        let mut written = Vec::new();
        for format in &self.config.output.formats {
            let path = dir.join(format!("{stem}.{format}"));
            let body = match format.as_str() {
                "csv" => self.to_csv(),
                "json" => self.to_json()?,
                "svg" => crate::svg::render_loglog(self),
                other => {
                    // config validation rejects unknown formats already
                    return Err(ReportError::Io {
                        path: path.display().to_string(),
                        source: std::io::Error::new(
                            std::io::ErrorKind::InvalidInput,
                            format!("unknown format {other}"),
                        ),
                    });
                }
            };
            let mut f = std::fs::File::create(&path).map_err(|e| wrap(&path, e))?;
            f.write_all(body.as_bytes()).map_err(|e| wrap(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }

    /// One line per criterion, for terminal output.
    pub fn summary_lines(&self) -> Vec<String> {
        self.criteria
            .iter()
            .map(|c| {
                let op = match c.comparison {
                    Comparison::AtLeast => ">=",
                    Comparison::AtMost => "<=",
                };
                format!(
                    "[{}] {} {}: observed {:.4} {} {:.4}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.id,
                    c.description,
                    c.observed,
                    op,
                    c.threshold
                )
            })
            .collect()
    }
}

//! Experiment configuration: flat TOML with one experiment per file.
//! Unknown keys are rejected so research configs cannot silently drift.

use rbf_core::geometry::Domain;
use rbf_core::kernels::KernelSpec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(
        "inadmissible smoothness order sigma={sigma}: the convergence window requires \
         ceil(sigma) < 2*tau - d/2 = {bound} for this kernel"
    )]
    InadmissibleSigma { sigma: f64, bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    InterpolationRates,
    QuasiRates,
    Bernstein,
    Eigmin,
    PowerFunction,
    PolyreproAudit,
    ERatio,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::InterpolationRates => "interpolation-rates",
            ExperimentKind::QuasiRates => "quasi-rates",
            ExperimentKind::Bernstein => "bernstein",
            ExperimentKind::Eigmin => "eigmin",
            ExperimentKind::PowerFunction => "power-function",
            ExperimentKind::PolyreproAudit => "polyrepro-audit",
            ExperimentKind::ERatio => "e-ratio",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
    pub power: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LprConfig {
    /// Reproduction degree; None = ceil(s) + d + 1 from the kernel.
    pub degree: Option<i64>,
    /// Locality factor K; None = auto-select from the candidate ladder.
    pub locality: Option<f64>,
    /// Probes used for auto-selection and audits.
    pub probes: usize,
}

impl Default for LprConfig {
    fn default() -> Self {
        LprConfig { degree: None, locality: None, probes: 500 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Evaluation nodes per axis.
    pub nodes: usize,
    /// Shrink of the measurement box, in multiples of the widest
    /// finite-difference stencil half-width (3 grid spacings each).
    pub margin_stencils: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nodes: 513, margin_stencils: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QuadConfig {
    /// Gauss–Legendre order per axis per panel.
    pub order: usize,
    /// Minimum panels per axis for generic quadratures.
    pub min_panels: usize,
    /// Panels per axis for the native-energy pair integral.
    pub energy_panels: usize,
    /// Diagonal refinement depth of the pair integral.
    pub energy_depth: u32,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { order: 12, min_panels: 4, energy_panels: 24, energy_depth: 6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    pub max_points: usize,
    pub max_grid_nodes: usize,
    pub max_runtime_s: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig { max_points: 5000, max_grid_nodes: 2_000_000, max_runtime_s: 300.0 }
    }
}

/// Pass/fail thresholds. Stored in the config so acceptance criteria are
/// explicit data.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExpectConfig {
    /// Minimum fitted slope per sigma (aligned with `sigmas`).
    pub min_slopes: Option<Vec<f64>>,
    /// Minimum fitted slope for scalar-quantity experiments.
    pub min_slope: Option<f64>,
    /// Maximum fitted growth exponent (Bernstein ratio vs q).
    pub max_growth: Option<f64>,
    /// Window for the eigenvalue decay exponent.
    pub slope_window: Option<[f64; 2]>,
    /// Enforce the calibrated lower bound λ(q) >= c q^{2τ-d}.
    pub calibrated_lower_bound: Option<bool>,
    /// Stability-constant cap for polyrepro audits.
    pub gamma_max: Option<f64>,
    /// Reproduction residual cap for polyrepro audits.
    pub residual_max: Option<f64>,
    /// Natural-cubic-spline oracle agreement cap (surface spline d=1, m=2).
    pub spline_oracle_max_diff: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, formats: vec!["csv".into(), "json".into(), "svg".into()] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Acceptance criterion this experiment realizes (free-form id).
    #[serde(default)]
    pub criterion: Option<String>,
    /// Kernel spec fragment, e.g. "matern d=1 tau=2".
    pub kernel: String,
    /// Refinement levels (tensor grids with 2^level + 1 nodes per axis).
    pub levels: Vec<u32>,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
    /// Sobolev orders to measure (rate experiments).
    #[serde(default)]
    pub sigmas: Vec<f64>,
    /// Bernstein smoothness offset s'.
    #[serde(default)]
    pub s_prime: Option<f64>,
    /// Random trial-space draws per level (Bernstein).
    #[serde(default)]
    pub draws: Option<usize>,
    /// Probe count for power-function experiments.
    #[serde(default)]
    pub probes: Option<usize>,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    #[serde(default)]
    pub bump: Option<BumpConfig>,
    #[serde(default)]
    pub lpr: LprConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub quad: QuadConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub expect: ExpectConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, ConfigError> {
        self.kernel
            .parse::<KernelSpec>()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn domain(&self) -> Result<Domain, ConfigError> {
        let spec = self.kernel_spec()?;
        match &self.domain {
            Some(d) => Domain::new(d.lower.clone(), d.upper.clone())
                .map_err(|e| ConfigError::Invalid(e.to_string())),
            None => Ok(Domain::unit_cube(spec.d)),
        }
    }

    /// Full validation: kernel parameters, dimensions, admissibility of the
    /// requested smoothness orders, budgets.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let spec = self.kernel_spec()?;
        let domain = self.domain()?;
        if domain.dim() != spec.d {
            return Err(ConfigError::Invalid(format!(
                "domain dimension {} does not match kernel dimension {}",
                domain.dim(),
                spec.d
            )));
        }
        if self.levels.is_empty() {
            return Err(ConfigError::Invalid("levels must be nonempty".into()));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err(ConfigError::Invalid(format!(
                "jitter {} must lie in [0, 0.5)",
                self.jitter
            )));
        }
        let props = spec.properties();
        let bound = 2.0 * props.native_exponent - spec.d as f64 / 2.0;

        let needs_sigmas = matches!(
            self.kind,
            ExperimentKind::InterpolationRates | ExperimentKind::QuasiRates
        );
        if needs_sigmas {
            if self.sigmas.is_empty() {
                return Err(ConfigError::Invalid(
                    "rate experiments need a nonempty sigma list".into(),
                ));
            }
            if self.bump.is_none() {
                return Err(ConfigError::Invalid("rate experiments need a [bump] table".into()));
            }
        }
        for &sigma in &self.sigmas {
            if sigma < 0.0 {
                return Err(ConfigError::Invalid(format!("sigma {sigma} must be nonnegative")));
            }
            if needs_sigmas && sigma.ceil() >= bound {
                return Err(ConfigError::InadmissibleSigma { sigma, bound });
            }
        }
        if self.kind == ExperimentKind::Bernstein {
            let sp = self.s_prime.ok_or_else(|| {
                ConfigError::Invalid("bernstein experiments need s_prime".into())
            })?;
            let window = props.native_exponent - spec.d as f64 / 2.0;
            if !(sp > 0.0 && sp < window) {
                return Err(ConfigError::Invalid(format!(
                    "bernstein offset s_prime={sp} must lie in (0, tau - d/2) = (0, {window})"
                )));
            }
            if props.native_exponent.fract() != 0.0 || sp.fract() != 0.0 {
                return Err(ConfigError::Invalid(
                    "bernstein grid norms need integer tau and s_prime".into(),
                ));
            }
        }
        if self.kind == ExperimentKind::ERatio && self.bump.is_none() {
            return Err(ConfigError::Invalid("e-ratio experiments need a [bump] table".into()));
        }
        if let Some(b) = &self.bump {
            if b.center.len() != spec.d || b.half_width.len() != spec.d {
                return Err(ConfigError::Invalid("bump dimensions must match the kernel".into()));
            }
        }
        let grid_total = self
            .grid
            .nodes
            .checked_pow(spec.d as u32)
            .ok_or_else(|| ConfigError::Invalid("grid size overflow".into()))?;
        if grid_total > self.budget.max_grid_nodes {
            return Err(ConfigError::Invalid(format!(
                "evaluation grid has {grid_total} nodes, budget is {}",
                self.budget.max_grid_nodes
            )));
        }
        if self.grid.nodes < 9 {
            return Err(ConfigError::Invalid("grid nodes per axis must be at least 9".into()));
        }
        for f in &self.output.formats {
            if !matches!(f.as_str(), "csv" | "json" | "svg") {
                return Err(ConfigError::Invalid(format!("unknown output format '{f}'")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
kind = "interpolation-rates"
criterion = "AC1"
kernel = "matern d=1 tau=2"
levels = [5, 6, 7]
sigmas = [0.0, 1.0]

[bump]
center = [0.5]
half_width = [0.25]
power = 12
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::InterpolationRates);
        assert_eq!(cfg.grid.nodes, 513);
        assert_eq!(cfg.budget.max_points, 5000);
        assert!(cfg.kernel_spec().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{BASE}\ntypo_key = 3\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = BASE.replace("[bump]", "[bump]\nwidht = 3");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn admissibility_window_is_enforced() {
        // for tau=2, d=1: ceil(sigma) < 3.5, so sigma = 4 is rejected
        let text = BASE.replace("sigmas = [0.0, 1.0]", "sigmas = [0.0, 4.0]");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        match err {
            ConfigError::InadmissibleSigma { sigma, bound } => {
                assert_eq!(sigma, 4.0);
                assert!((bound - 3.5).abs() < 1e-12);
            }
            other => panic!("unexpected error {other}"),
        }
        // sigma = 3 is inside the window
        let text = BASE.replace("sigmas = [0.0, 1.0]", "sigmas = [3.0]");
        assert!(ExperimentConfig::from_toml(&text).is_ok());
    }

    #[test]
    fn bernstein_needs_valid_offset() {
        let text = r#"
kind = "bernstein"
kernel = "matern d=1 tau=2"
levels = [4, 5, 6]
s_prime = 2.0
"#;
        assert!(ExperimentConfig::from_toml(text).is_err());
        let ok = text.replace("s_prime = 2.0", "s_prime = 1.0");
        assert!(ExperimentConfig::from_toml(&ok).is_ok());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }
}

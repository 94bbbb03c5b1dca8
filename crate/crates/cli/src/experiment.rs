//! Experiment drivers: run a refinement ladder, measure errors or spectral
//! quantities per level, fit rates, and evaluate the pass/fail criteria
//! declared in the config.

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::report::{
    Comparison, ConvergenceReport, CriterionRow, EvalRegion, FitRow, LevelRow, SigmaError,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rbf_core::geometry::{Domain, GeometryError, PointSet};
use rbf_core::interpolate::{
    assemble_system, e_ratio, native_error_from_energy, InterpolateError,
};
use rbf_core::kernels::KernelSpec;
use rbf_core::norms::{fit_convergence_rate, sobolev_norm_grid, GridFunction, NormsError, RateFit};
use rbf_core::oracles::NaturalCubicSpline;
use rbf_core::poly::Polynomial;
use rbf_core::polyrepro::{
    build_local_weights, check_reproduction, select_locality, ReproConfig, ReproError,
    LOCALITY_CANDIDATES,
};
use rbf_core::quad::QuadratureRule;
use rbf_core::quasiinterp::{
    evaluate_quasi_interpolant, make_target, native_energy, quasi_coefficients, CosineBump,
    QuasiError, TargetFunction,
};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Interpolate(#[from] InterpolateError),
    #[error(transparent)]
    Norms(#[from] NormsError),
    #[error(transparent)]
    Quasi(#[from] QuasiError),
    #[error(transparent)]
    Repro(#[from] ReproError),
    #[error("runtime budget exceeded: {elapsed:.1}s > {budget:.1}s")]
    RuntimeBudget { elapsed: f64, budget: f64 },
    #[error("only {surviving} levels produced data ({required} needed for a rate fit); failures: {failures:?}")]
    TooFewLevels { surviving: usize, required: usize, failures: Vec<String> },
    #[error("{0}")]
    Invalid(String),
}

/// Report plus auxiliary artifacts (per-probe audit sweeps etc.).
pub struct ExperimentOutput {
    pub report: ConvergenceReport,
    /// (file name, contents) pairs emitted next to the report.
    pub attachments: Vec<(String, String)>,
}

struct Clock {
    start: Instant,
    budget: f64,
}

impl Clock {
    fn new(budget: f64) -> Self {
        Clock { start: Instant::now(), budget }
    }

    fn check(&self) -> Result<(), ExperimentError> {
        let elapsed = self.start.elapsed().as_secs_f64();
        if elapsed > self.budget {
            Err(ExperimentError::RuntimeBudget { elapsed, budget: self.budget })
        } else {
            Ok(())
        }
    }
}

/// Measurement region: the domain shrunk by `margin_stencils` stencil widths
/// of the evaluation grid, fixed across the ladder.
fn eval_region(cfg: &ExperimentConfig, domain: &Domain) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let d = domain.dim();
    let nodes = cfg.grid.nodes;
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    for i in 0..d {
        let spacing = domain.side(i) / (nodes - 1) as f64;
        let margin = cfg.grid.margin_stencils as f64 * 3.0 * spacing;
        lower.push(domain.lower()[i] + margin);
        upper.push(domain.upper()[i] - margin);
    }
    (lower, upper, vec![nodes; d])
}

fn grid_coords(lower: &[f64], upper: &[f64], nodes: &[usize]) -> Vec<Vec<f64>> {
    let d = lower.len();
    let total: usize = nodes.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    loop {
        let x: Vec<f64> = (0..d)
            .map(|i| lower[i] + idx[i] as f64 * (upper[i] - lower[i]) / (nodes[i] - 1) as f64)
            .collect();
        out.push(x);
        let mut carry = true;
        for i in (0..d).rev() {
            if carry {
                idx[i] += 1;
                if idx[i] == nodes[i] {
                    idx[i] = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            return out;
        }
    }
}

fn probe_points(domain: &Domain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..domain.dim())
                .map(|i| rng.random_range(domain.lower()[i]..domain.upper()[i]))
                .collect()
        })
        .collect()
}

fn generate_level(cfg: &ExperimentConfig, domain: &Domain, level: u32) -> Result<PointSet, GeometryError> {
    let probe_level = (level + 3).clamp(6, 12);
    PointSet::generate(domain, level, cfg.jitter, cfg.seed, cfg.budget.max_points, probe_level)
}

fn quad_rule(cfg: &ExperimentConfig) -> QuadratureRule {
    QuadratureRule::new(cfg.quad.order, cfg.quad.min_panels)
}

fn lpr_degree(cfg: &ExperimentConfig, spec: &KernelSpec) -> i64 {
    cfg.lpr.degree.unwrap_or_else(|| {
        let s = spec.properties().homogeneity;
        s.ceil() as i64 + spec.d as i64 + 1
    })
}

fn criterion_id(cfg: &ExperimentConfig) -> String {
    cfg.criterion.clone().unwrap_or_else(|| cfg.kind.as_str().to_string())
}

fn push_slope_criteria(
    cfg: &ExperimentConfig,
    fits: &[FitRow],
    criteria: &mut Vec<CriterionRow>,
) {
    let id = criterion_id(cfg);
    if let Some(mins) = &cfg.expect.min_slopes {
        for (sigma, min) in cfg.sigmas.iter().zip(mins) {
            if let Some(fit) = fits.iter().find(|f| f.sigma == Some(*sigma)) {
                criteria.push(CriterionRow::new(
                    &id,
                    &format!("fitted slope of W^{sigma} error vs {}", fit.abscissa),
                    fit.slope,
                    Comparison::AtLeast,
                    *min,
                ));
            }
        }
    }
}

fn fit_sigma_errors(cfg: &ExperimentConfig, rows: &[LevelRow]) -> Result<Vec<FitRow>, ExperimentError> {
    let mut fits = Vec::new();
    for &sigma in &cfg.sigmas {
        let pairs: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| {
                r.errors.iter().find(|e| e.sigma == sigma).map(|e| (r.h, e.value))
            })
            .collect();
        let fit = fit_convergence_rate(&pairs).map_err(|e| match e {
            NormsError::InsufficientData { actual, .. } => ExperimentError::TooFewLevels {
                surviving: actual,
                required: 3,
                failures: vec![format!("sigma={sigma}: nonpositive errors excluded")],
            },
            other => ExperimentError::Norms(other),
        })?;
        fits.push(fit_row("w-error", Some(sigma), "h", &fit));
    }
    Ok(fits)
}

fn fit_row(quantity: &str, sigma: Option<f64>, abscissa: &str, fit: &RateFit) -> FitRow {
    FitRow {
        quantity: quantity.to_string(),
        sigma,
        abscissa: abscissa.to_string(),
        slope: fit.slope,
        intercept: fit.intercept,
        residual: fit.residual,
        points_used: fit.pairs.len(),
        excluded: fit.excluded,
    }
}

fn base_row(cfg: &ExperimentConfig, level: u32, ps: &PointSet) -> Result<LevelRow, ExperimentError> {
    Ok(LevelRow {
        level,
        seed: cfg.seed,
        n: ps.n(),
        q: ps.separation_radius()?,
        h: ps.fill_distance(),
        rho: ps.mesh_ratio()?,
        ..LevelRow::default()
    })
}

/// Run the experiment described by the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    cfg.validate()?;
    let clock = Clock::new(cfg.budget.max_runtime_s);
    match cfg.kind {
        ExperimentKind::InterpolationRates => run_interpolation_rates(cfg, &clock, false),
        ExperimentKind::ERatio => run_interpolation_rates(cfg, &clock, true),
        ExperimentKind::QuasiRates => run_quasi_rates(cfg, &clock),
        ExperimentKind::Bernstein => run_bernstein(cfg, &clock),
        ExperimentKind::Eigmin => run_eigmin(cfg, &clock),
        ExperimentKind::PowerFunction => run_power_function(cfg, &clock),
        ExperimentKind::PolyreproAudit => run_polyrepro_audit(cfg, &clock),
    }
}

fn build_target(
    cfg: &ExperimentConfig,
    spec: &KernelSpec,
    domain: &Domain,
) -> Result<TargetFunction, ExperimentError> {
    let b = cfg.bump.as_ref().ok_or_else(|| {
        ExperimentError::Invalid("this experiment kind needs a [bump] table".into())
    })?;
    let bump = CosineBump::new(b.center.clone(), b.half_width.clone(), b.power)?;
    Ok(make_target(spec, &bump, domain, quad_rule(cfg))?)
}

fn sample_target_grid(
    target: &TargetFunction,
    coords: &[Vec<f64>],
    clock: &Clock,
) -> Result<Vec<f64>, ExperimentError> {
    let mut vals = Vec::with_capacity(coords.len());
    for (i, x) in coords.iter().enumerate() {
        if i % 4096 == 0 {
            clock.check()?;
        }
        vals.push(target.eval(x)?);
    }
    Ok(vals)
}

fn run_interpolation_rates(
    cfg: &ExperimentConfig,
    clock: &Clock,
    with_ratio: bool,
) -> Result<ExperimentOutput, ExperimentError> {
    let spec = cfg.kernel_spec()?;
    let domain = cfg.domain()?;
    let target = build_target(cfg, &spec, &domain)?;
    let (lo, hi, nodes) = eval_region(cfg, &domain);
    let coords = grid_coords(&lo, &hi, &nodes);
    let f_vals = sample_target_grid(&target, &coords, clock)?;

    // the squared native energy of f is level-independent
    let energy_sq = if with_ratio {
        Some(native_energy(
            &spec,
            &target.density,
            quad_rule(cfg),
            cfg.quad.energy_panels,
            cfg.quad.energy_depth,
        ))
    } else {
        None
    };

    let spline_check = cfg.expect.spline_oracle_max_diff.is_some();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &level in &cfg.levels {
        clock.check()?;
        let outcome = (|| -> Result<LevelRow, ExperimentError> {
            let ps = generate_level(cfg, &domain, level)?;
            let mut data = Vec::with_capacity(ps.n());
            for i in 0..ps.n() {
                data.push(target.eval(ps.point(i))?);
            }
            let factored = assemble_system(&spec, &ps)?.factorize()?;
            let interp = factored.solve_interpolant(&data)?;

            let mut row = base_row(cfg, level, &ps)?;
            row.condition_estimate = Some(factored.condition_estimate());

            let err_vals: Vec<f64> =
                coords.iter().zip(&f_vals).map(|(x, f)| f - interp.evaluate(x)).collect();
            let err_grid = GridFunction::from_values(lo.clone(), hi.clone(), nodes.clone(), err_vals);
            for &sigma in &cfg.sigmas {
                let value = sobolev_norm_grid(&err_grid, sigma)?;
                row.errors.push(SigmaError { sigma, value });
            }

            if with_ratio {
                let l2 = sobolev_norm_grid(&err_grid, 0.0)?;
                let native = native_error_from_energy(energy_sq.unwrap(), &interp)?;
                row.l2_error = Some(l2);
                row.native_error = Some(native);
                row.e_ratio = e_ratio(l2, native);
            }

            if spline_check && spec.d == 1 {
                let xs: Vec<f64> = (0..ps.n()).map(|i| ps.point(i)[0]).collect();
                let oracle = NaturalCubicSpline::fit(&xs, &data);
                let mut worst = 0.0f64;
                for i in 0..=100 {
                    let x = domain.lower()[0] + domain.side(0) * i as f64 / 100.0;
                    worst = worst.max((interp.evaluate(&[x]) - oracle.eval(x)).abs());
                }
                row.spline_oracle_diff = Some(worst);
            }
            Ok(row)
        })();
        match outcome {
            Ok(row) => rows.push(row),
            Err(e @ ExperimentError::RuntimeBudget { .. }) => return Err(e),
            Err(e) => failures.push(format!("level {level}: {e}")),
        }
    }
    require_levels(&rows, &failures)?;

    let mut fits = fit_sigma_errors(cfg, &rows)?;
    let mut criteria = Vec::new();
    push_slope_criteria(cfg, &fits, &mut criteria);
    let id = criterion_id(cfg);

    if with_ratio {
        let pairs: Vec<(f64, f64)> =
            rows.iter().filter_map(|r| r.e_ratio.map(|v| (r.h, v))).collect();
        let fit = fit_convergence_rate(&pairs).map_err(ExperimentError::Norms)?;
        fits.push(fit_row("e-ratio", None, "h", &fit));
        if let Some(min) = cfg.expect.min_slope {
            criteria.push(CriterionRow::new(
                &id,
                "fitted exponent of the L2/native error ratio vs h",
                fit.slope,
                Comparison::AtLeast,
                min,
            ));
        }
    }
    if let Some(max_diff) = cfg.expect.spline_oracle_max_diff {
        let worst = rows
            .iter()
            .filter_map(|r| r.spline_oracle_diff)
            .fold(0.0f64, f64::max);
        criteria.push(CriterionRow::new(
            &id,
            "max deviation from the natural-cubic-spline oracle",
            worst,
            Comparison::AtMost,
            max_diff,
        ));
    }

    let passed = criteria.iter().all(|c| c.passed);
    Ok(ExperimentOutput {
        report: ConvergenceReport {
            config: cfg.clone(),
            eval_region: Some(EvalRegion { lower: lo, upper: hi, nodes: cfg.grid.nodes }),
            target: Some(target.describe()),
            levels: rows,
            fits,
            criteria,
            passed,
            level_failures: failures,
        },
        attachments: Vec::new(),
    })
}

fn run_quasi_rates(cfg: &ExperimentConfig, clock: &Clock) -> Result<ExperimentOutput, ExperimentError> {
    let spec = cfg.kernel_spec()?;
    let domain = cfg.domain()?;
    let target = build_target(cfg, &spec, &domain)?;
    let (lo, hi, nodes) = eval_region(cfg, &domain);
    let coords = grid_coords(&lo, &hi, &nodes);
    let f_vals = sample_target_grid(&target, &coords, clock)?;
    let degree = lpr_degree(cfg, &spec);
    let rule = quad_rule(cfg);

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &level in &cfg.levels {
        clock.check()?;
        let outcome = (|| -> Result<LevelRow, ExperimentError> {
            let ps = generate_level(cfg, &domain, level)?;
            let h = ps.fill_distance();
            let locality = match cfg.lpr.locality {
                Some(k) => k,
                None => {
                    let probes = probe_points(&domain, 60, cfg.seed ^ 0x5eed_0001);
                    select_locality(&ps, degree, h, &probes, &LOCALITY_CANDIDATES, 1e8)?
                }
            };
            let lpr_cfg = ReproConfig::new(degree, locality, h);
            let qc = quasi_coefficients(&target, &ps, &lpr_cfg, rule)?;

            let mut row = base_row(cfg, level, &ps)?;
            row.lpr_locality = Some(locality);
            row.lpr_degree = Some(degree);
            row.quad_panels = qc.panels.clone();

            let err_vals: Vec<f64> = coords
                .iter()
                .zip(&f_vals)
                .map(|(x, f)| {
                    f - evaluate_quasi_interpolant(&spec, &ps, &qc.values, &target.poly, x)
                })
                .collect();
            let err_grid = GridFunction::from_values(lo.clone(), hi.clone(), nodes.clone(), err_vals);
            for &sigma in &cfg.sigmas {
                let value = sobolev_norm_grid(&err_grid, sigma)?;
                row.errors.push(SigmaError { sigma, value });
            }
            Ok(row)
        })();
        match outcome {
            Ok(row) => rows.push(row),
            Err(e @ ExperimentError::RuntimeBudget { .. }) => return Err(e),
            Err(e) => failures.push(format!("level {level}: {e}")),
        }
    }
    require_levels(&rows, &failures)?;

    let fits = fit_sigma_errors(cfg, &rows)?;
    let mut criteria = Vec::new();
    push_slope_criteria(cfg, &fits, &mut criteria);
    let passed = criteria.iter().all(|c| c.passed);
    Ok(ExperimentOutput {
        report: ConvergenceReport {
            config: cfg.clone(),
            eval_region: Some(EvalRegion { lower: lo, upper: hi, nodes: cfg.grid.nodes }),
            target: Some(target.describe()),
            levels: rows,
            fits,
            criteria,
            passed,
            level_failures: failures,
        },
        attachments: Vec::new(),
    })
}

fn run_bernstein(cfg: &ExperimentConfig, clock: &Clock) -> Result<ExperimentOutput, ExperimentError> {
    let spec = cfg.kernel_spec()?;
    let domain = cfg.domain()?;
    let props = spec.properties();
    let tau = props.native_exponent;
    let s_prime = cfg.s_prime.expect("validated");
    let draws = cfg.draws.unwrap_or(20);
    let (lo, hi, nodes) = eval_region(cfg, &domain);
    let coords = grid_coords(&lo, &hi, &nodes);
    let zero_poly = Polynomial::zero(spec.d);

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &level in &cfg.levels {
        clock.check()?;
        let outcome = (|| -> Result<LevelRow, ExperimentError> {
            let ps = generate_level(cfg, &domain, level)?;
            let n = ps.n();
            let sys = assemble_system(&spec, &ps)?;
            // side-condition projector for CPD kernels
            let projector = if sys.basis_size() > 0 {
                let qr = rbf_core::linalg::householder_qr(sys.poly_matrix(), false);
                Some(qr.null_space_basis())
            } else {
                None
            };
            let mut rng =
                ChaCha8Rng::seed_from_u64(cfg.seed ^ (level as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut max_ratio = 0.0f64;
            for _ in 0..draws {
                clock.check()?;
                let mut c: Vec<f64> =
                    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                if let Some(z) = &projector {
                    let v = nalgebra::DVector::from_column_slice(&c);
                    let proj = z * (z.transpose() * v);
                    c.copy_from_slice(proj.as_slice());
                }
                let u_vals: Vec<f64> = coords
                    .iter()
                    .map(|x| evaluate_quasi_interpolant(&spec, &ps, &c, &zero_poly, x))
                    .collect();
                let grid = GridFunction::from_values(lo.clone(), hi.clone(), nodes.clone(), u_vals);
                let lo_norm = sobolev_norm_grid(&grid, tau)?;
                let hi_norm = sobolev_norm_grid(&grid, tau + s_prime)?;
                if lo_norm > 0.0 {
                    max_ratio = max_ratio.max(hi_norm / lo_norm);
                }
            }
            let mut row = base_row(cfg, level, &ps)?;
            row.bernstein_max_ratio = Some(max_ratio);
            Ok(row)
        })();
        match outcome {
            Ok(row) => rows.push(row),
            Err(e @ ExperimentError::RuntimeBudget { .. }) => return Err(e),
            Err(e) => failures.push(format!("level {level}: {e}")),
        }
    }
    require_levels(&rows, &failures)?;

    let pairs: Vec<(f64, f64)> =
        rows.iter().filter_map(|r| r.bernstein_max_ratio.map(|v| (r.q, v))).collect();
    let fit = fit_convergence_rate(&pairs).map_err(ExperimentError::Norms)?;
    let growth = -fit.slope;
    let fits = vec![fit_row("bernstein-ratio", None, "q", &fit)];
    let mut criteria = Vec::new();
    if let Some(max_growth) = cfg.expect.max_growth {
        criteria.push(CriterionRow::new(
            &criterion_id(cfg),
            &format!("growth exponent of the H^{}/H^{} grid-norm ratio vs 1/q", tau + s_prime, tau),
            growth,
            Comparison::AtMost,
            max_growth,
        ));
    }
    let passed = criteria.iter().all(|c| c.passed);
    Ok(ExperimentOutput {
        report: ConvergenceReport {
            config: cfg.clone(),
            eval_region: Some(EvalRegion { lower: lo, upper: hi, nodes: cfg.grid.nodes }),
            target: None,
            levels: rows,
            fits,
            criteria,
            passed,
            level_failures: failures,
        },
        attachments: Vec::new(),
    })
}

fn run_eigmin(cfg: &ExperimentConfig, clock: &Clock) -> Result<ExperimentOutput, ExperimentError> {
    let spec = cfg.kernel_spec()?;
    let domain = cfg.domain()?;
    let props = spec.properties();
    let decay = 2.0 * props.native_exponent - spec.d as f64;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &level in &cfg.levels {
        clock.check()?;
        let outcome = (|| -> Result<LevelRow, ExperimentError> {
            let ps = generate_level(cfg, &domain, level)?;
            let sys = assemble_system(&spec, &ps)?;
            let lambda = sys.constrained_min_eigenvalue()?;
            let mut row = base_row(cfg, level, &ps)?;
            row.lambda_min = Some(lambda);
            Ok(row)
        })();
        match outcome {
            Ok(row) => rows.push(row),
            Err(e @ ExperimentError::RuntimeBudget { .. }) => return Err(e),
            Err(e) => failures.push(format!("level {level}: {e}")),
        }
    }
    require_levels(&rows, &failures)?;

    let pairs: Vec<(f64, f64)> =
        rows.iter().filter_map(|r| r.lambda_min.map(|v| (r.q, v))).collect();
    let fit = fit_convergence_rate(&pairs).map_err(ExperimentError::Norms)?;
    let fits = vec![fit_row("lambda-min", None, "q", &fit)];
    let id = criterion_id(cfg);
    let mut criteria = Vec::new();
    if let Some([lo_s, hi_s]) = cfg.expect.slope_window {
        criteria.push(CriterionRow::new(
            &id,
            "fitted exponent of lambda_min vs q (lower edge)",
            fit.slope,
            Comparison::AtLeast,
            lo_s,
        ));
        criteria.push(CriterionRow::new(
            &id,
            "fitted exponent of lambda_min vs q (upper edge)",
            fit.slope,
            Comparison::AtMost,
            hi_s,
        ));
    }
    if cfg.expect.calibrated_lower_bound.unwrap_or(false) {
        // c calibrated at the coarsest level; check λ >= c q^{2τ-d} downstream
        let c = pairs[0].1 / pairs[0].0.powf(decay);
        let worst =
            pairs.iter().map(|(q, l)| l / (c * q.powf(decay))).fold(f64::INFINITY, f64::min);
        criteria.push(CriterionRow::new(
            &id,
            &format!("min of lambda_min / (c q^{decay}) with c from the coarsest level"),
            worst,
            Comparison::AtLeast,
            1.0 - 1e-9,
        ));
    }
    let passed = criteria.iter().all(|c| c.passed);
    Ok(ExperimentOutput {
        report: ConvergenceReport {
            config: cfg.clone(),
            eval_region: None,
            target: None,
            levels: rows,
            fits,
            criteria,
            passed,
            level_failures: failures,
        },
        attachments: Vec::new(),
    })
}

fn run_power_function(cfg: &ExperimentConfig, clock: &Clock) -> Result<ExperimentOutput, ExperimentError> {
    let spec = cfg.kernel_spec()?;
    let domain = cfg.domain()?;
    let probes = probe_points(&domain, cfg.probes.unwrap_or(200), cfg.seed ^ 0x5eed_0002);

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &level in &cfg.levels {
        clock.check()?;
        let outcome = (|| -> Result<LevelRow, ExperimentError> {
            let ps = generate_level(cfg, &domain, level)?;
            let factored = assemble_system(&spec, &ps)?.factorize()?;
            let mut p_max = 0.0f64;
            for z in &probes {
                p_max = p_max.max(factored.power_function(z)?);
            }
            let mut row = base_row(cfg, level, &ps)?;
            row.condition_estimate = Some(factored.condition_estimate());
            row.power_max = Some(p_max);
            Ok(row)
        })();
        match outcome {
            Ok(row) => rows.push(row),
            Err(e @ ExperimentError::RuntimeBudget { .. }) => return Err(e),
            Err(e) => failures.push(format!("level {level}: {e}")),
        }
    }
    require_levels(&rows, &failures)?;

    let pairs: Vec<(f64, f64)> =
        rows.iter().filter_map(|r| r.power_max.map(|v| (r.h, v))).collect();
    let fit = fit_convergence_rate(&pairs).map_err(ExperimentError::Norms)?;
    let fits = vec![fit_row("power-max", None, "h", &fit)];
    let mut criteria = Vec::new();
    if let Some(min) = cfg.expect.min_slope {
        criteria.push(CriterionRow::new(
            &criterion_id(cfg),
            "fitted exponent of the max power function vs h",
            fit.slope,
            Comparison::AtLeast,
            min,
        ));
    }
    let passed = criteria.iter().all(|c| c.passed);
    Ok(ExperimentOutput {
        report: ConvergenceReport {
            config: cfg.clone(),
            eval_region: None,
            target: None,
            levels: rows,
            fits,
            criteria,
            passed,
            level_failures: failures,
        },
        attachments: Vec::new(),
    })
}

fn run_polyrepro_audit(cfg: &ExperimentConfig, clock: &Clock) -> Result<ExperimentOutput, ExperimentError> {
    let spec = cfg.kernel_spec()?;
    let domain = cfg.domain()?;
    let degree = cfg.lpr.degree.unwrap_or(2);
    let probes = probe_points(&domain, cfg.lpr.probes, cfg.seed ^ 0x5eed_0003);

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut attachments = Vec::new();
    for &level in &cfg.levels {
        clock.check()?;
        let outcome = (|| -> Result<LevelRow, ExperimentError> {
            let ps = generate_level(cfg, &domain, level)?;
            let h = ps.fill_distance();
            let locality = match cfg.lpr.locality {
                Some(k) => k,
                None => select_locality(&ps, degree, h, &probes, &LOCALITY_CANDIDATES, 1e8)?,
            };
            let lpr_cfg = ReproConfig::new(degree, locality, h);
            let mut gamma = 0.0f64;
            let mut worst_res = 0.0f64;
            let mut sweep = String::from("z,stencil_size,sum_abs,residual\n");
            for z in &probes {
                let rep = build_local_weights(&ps, &lpr_cfg, z)?;
                let res = check_reproduction(&rep, &ps, degree);
                gamma = gamma.max(rep.sum_abs());
                worst_res = worst_res.max(res);
                let zstr: Vec<String> = z.iter().map(|v| format!("{v:.12e}")).collect();
                sweep.push_str(&format!(
                    "{},{},{:.12e},{:.12e}\n",
                    zstr.join(" "),
                    rep.indices.len(),
                    rep.sum_abs(),
                    res
                ));
            }
            attachments.push((format!("audit_level{level}.csv"), sweep));
            let mut row = base_row(cfg, level, &ps)?;
            row.gamma = Some(gamma);
            row.repro_residual_max = Some(worst_res);
            row.lpr_locality = Some(locality);
            row.lpr_degree = Some(degree);
            Ok(row)
        })();
        match outcome {
            Ok(row) => rows.push(row),
            Err(e @ ExperimentError::RuntimeBudget { .. }) => return Err(e),
            Err(e) => failures.push(format!("level {level}: {e}")),
        }
    }
    if rows.is_empty() {
        return Err(ExperimentError::TooFewLevels {
            surviving: 0,
            required: 1,
            failures,
        });
    }

    let id = criterion_id(cfg);
    let mut criteria = Vec::new();
    let worst_res = rows.iter().filter_map(|r| r.repro_residual_max).fold(0.0f64, f64::max);
    criteria.push(CriterionRow::new(
        &id,
        "max polynomial-reproduction residual over all probes",
        worst_res,
        Comparison::AtMost,
        cfg.expect.residual_max.unwrap_or(1e-9),
    ));
    let worst_gamma = rows.iter().filter_map(|r| r.gamma).fold(0.0f64, f64::max);
    criteria.push(CriterionRow::new(
        &id,
        "max stability constant over all probes",
        worst_gamma,
        Comparison::AtMost,
        cfg.expect.gamma_max.unwrap_or(5.0),
    ));
    let passed = criteria.iter().all(|c| c.passed);
    Ok(ExperimentOutput {
        report: ConvergenceReport {
            config: cfg.clone(),
            eval_region: None,
            target: None,
            levels: rows,
            fits: Vec::new(),
            criteria,
            passed,
            level_failures: failures,
        },
        attachments,
    })
}

fn require_levels(rows: &[LevelRow], failures: &[String]) -> Result<(), ExperimentError> {
    if rows.len() < 3 {
        return Err(ExperimentError::TooFewLevels {
            surviving: rows.len(),
            required: 3,
            failures: failures.to_vec(),
        });
    }
    Ok(())
}

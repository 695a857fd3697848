//! Runs one configured experiment and collects its report rows.

use btlab_core::mc::terminal_samples;
use btlab_core::{
    ks_critical_value, ks_two_sample, make_uniform_grid, mc_feynman_kac, mc_theorem1, mc_theorem2, pde_residual,
    picard_v, quad_u1, quad_u2, quad_u_fk, spectral_mode_amplitudes, ClockSpec, McEstimate, PdeSpec, PeriodicGrid,
    SpaceTimeField, Theorem, Variant,
};

use crate::acceptance;
use crate::config::{ExperimentConfig, Kind};
use crate::error::{CliError, CliResult, Context};
use crate::report::{fmt_point, ComparisonRecord, ReportRow, Verdict};

/// Monte Carlo agreement band in standard errors.
pub const MC_SIGMAS: f64 = 3.0;
/// Box half-width for non-periodic data.
pub const WIDE_HALF_WIDTH: f64 = 16.0;

pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<ComparisonRecord> {
    match cfg.kind {
        Kind::Estimate => compare_routes(cfg, false),
        Kind::Compare => compare_routes(cfg, true),
        Kind::Residual => residual(cfg),
        Kind::MarginalTest => marginal_test(cfg),
        Kind::Acceptance => Ok(acceptance::suite_record(&acceptance::run_all())),
    }
}

fn spec_of(cfg: &ExperimentConfig) -> CliResult<PdeSpec> {
    match cfg.theorem {
        Theorem::T1Btbm => Ok(PdeSpec::btbm(cfg.f.clone(), cfg.g.clone())),
        Theorem::T2Eps => PdeSpec::scaled(cfg.f.clone(), cfg.epsilon).context("theorem 2 data"),
        Theorem::T3Fk => PdeSpec::feynman_kac(cfg.f.clone(), cfg.c.clone()).context("theorem 3 data"),
    }
}

fn base_row(cfg: &ExperimentConfig, route: &str, value: f64, verdict: Verdict) -> ReportRow {
    let mut row = ReportRow::new(&cfg.experiment_id, cfg.theorem.label(), route, value, verdict);
    row.t = Some(cfg.t);
    row.x = fmt_point(&cfg.x);
    row.epsilon = Some(match cfg.theorem {
        Theorem::T2Eps => cfg.epsilon,
        _ => 1.0,
    });
    row
}

/// The periodic box used for spatial work on `cfg`'s data.
pub fn spatial_grid(cfg: &ExperimentConfig, periodic: bool) -> CliResult<PeriodicGrid> {
    match (cfg.half_width, periodic) {
        (Some(l), _) => PeriodicGrid::new(l, cfg.grid_points),
        (None, true) => PeriodicGrid::trig(cfg.grid_points),
        (None, false) => PeriodicGrid::new(WIDE_HALF_WIDTH, cfg.grid_points),
    }
    .context("spatial grid")
}

/// Inner Feynman–Kac function covering clock values up to the rule's
/// truncation at `t_max`.
fn picard_field(cfg: &ExperimentConfig, t_max: f64) -> CliResult<SpaceTimeField> {
    let grid = spatial_grid(cfg, cfg.f.is_periodic() && cfg.c.is_periodic())?;
    let s_grid = make_uniform_grid(cfg.rule.s_max(t_max), cfg.s_steps).context("clock grid")?;
    let sol = picard_v(&cfg.f, &cfg.c, &s_grid, grid, cfg.picard_max_iter, cfg.picard_tol).context("picard_v")?;
    Ok(sol.v)
}

fn quad_value(cfg: &ExperimentConfig) -> CliResult<f64> {
    match cfg.theorem {
        Theorem::T1Btbm => quad_u1(&cfg.f, &cfg.g, cfg.t, &cfg.x, &cfg.rule).context("quad_u1"),
        Theorem::T2Eps => quad_u2(&cfg.f, cfg.epsilon, cfg.t, &cfg.x, &cfg.rule).context("quad_u2"),
        Theorem::T3Fk => {
            if cfg.x.len() != 1 {
                return Err(CliError::InvalidArgument(
                    "the Feynman–Kac quadrature route is one-dimensional".into(),
                ));
            }
            let v = picard_field(cfg, cfg.t)?;
            quad_u_fk(cfg.t, cfg.x[0], &v, &cfg.rule).context("quad_u_fk")
        }
    }
}

fn mc_value(cfg: &ExperimentConfig) -> CliResult<McEstimate> {
    let clock = ClockSpec::new(
        if cfg.theorem == Theorem::T2Eps {
            cfg.epsilon
        } else {
            1.0
        },
        cfg.t,
        cfg.clock_steps,
    )
    .context("clock")?;
    match cfg.theorem {
        Theorem::T1Btbm => mc_theorem1(&cfg.f, &cfg.g, cfg.t, &cfg.x, cfg.variant, &clock, cfg.n, cfg.seed),
        Theorem::T2Eps => mc_theorem2(&cfg.f, cfg.t, &cfg.x, cfg.variant, &clock, cfg.n, cfg.seed),
        Theorem::T3Fk => {
            if cfg.variant != Variant::Btp {
                return Err(CliError::InvalidArgument(
                    "the Feynman–Kac estimator uses the plain BTP".into(),
                ));
            }
            mc_feynman_kac(&cfg.f, &cfg.c, cfg.t, &cfg.x, cfg.n, cfg.seed, None)
        }
    }
    .context("monte carlo")
}

/// Whether the spectral route applies: one dimension and finite cosine data.
fn spectral_applicable(cfg: &ExperimentConfig) -> bool {
    let trig = |f: &btlab_core::ScalarField| f.cosine_modes().is_some();
    cfg.x.len() == 1
        && trig(&cfg.f)
        && match cfg.theorem {
            Theorem::T1Btbm => trig(&cfg.g),
            Theorem::T2Eps => true,
            Theorem::T3Fk => cfg.c.as_constant().is_some(),
        }
}

fn spectral_value(cfg: &ExperimentConfig, spec: &PdeSpec) -> CliResult<f64> {
    let mut modes: Vec<usize> = cfg
        .f
        .cosine_modes()
        .unwrap_or_default()
        .into_iter()
        .map(|m| m.0)
        .collect();
    if cfg.theorem == Theorem::T1Btbm {
        modes.extend(cfg.g.cosine_modes().unwrap_or_default().into_iter().map(|m| m.0));
    }
    modes.sort_unstable();
    modes.dedup();
    if modes.is_empty() {
        modes.push(0);
    }
    let traj = spectral_mode_amplitudes(spec, &modes, cfg.t, cfg.spectral_steps).context("spectral mode solve")?;
    let x = cfg.x[0];
    Ok(traj
        .iter()
        .map(|m| m.amplitude.last().copied().unwrap_or(0.0) * (m.k as f64 * x).cos())
        .sum())
}

fn compare_routes(cfg: &ExperimentConfig, with_spectral: bool) -> CliResult<ComparisonRecord> {
    let spec = spec_of(cfg)?;
    let quad = quad_value(cfg)?;
    let mc = mc_value(cfg)?;
    let mut rows = vec![base_row(cfg, "quad", quad, Verdict::Reference)];

    let tol = MC_SIGMAS * mc.stderr;
    let mut mc_row = base_row(cfg, "mc", mc.mean, Verdict::from_bool((mc.mean - quad).abs() <= tol));
    mc_row.variant = cfg.variant.to_string();
    mc_row.k = cfg.variant.k();
    mc_row.n = Some(mc.n);
    mc_row.seed = Some(mc.seed);
    mc_row.stderr = Some(mc.stderr);
    mc_row.tolerance = Some(tol);
    rows.push(mc_row);

    if with_spectral && spectral_applicable(cfg) {
        let sv = spectral_value(cfg, &spec)?;
        let mut row = base_row(
            cfg,
            "spectral",
            sv,
            Verdict::from_bool((sv - quad).abs() <= cfg.spectral_tol),
        );
        row.n = Some(cfg.spectral_steps);
        row.tolerance = Some(cfg.spectral_tol);
        rows.push(row);
    }
    Ok(ComparisonRecord { rows })
}

/// Samples the quadrature field around the check times and reports its PDE
/// residual.
fn residual(cfg: &ExperimentConfig) -> CliResult<ComparisonRecord> {
    let spec = spec_of(cfg)?;
    let periodic = cfg.f.is_periodic()
        && match cfg.theorem {
            Theorem::T1Btbm => cfg.g.is_periodic(),
            Theorem::T2Eps => true,
            Theorem::T3Fk => cfg.c.is_periodic(),
        };
    let grid = spatial_grid(cfg, periodic)?;
    let t_max = cfg.check_times.iter().fold(0.0f64, |m, t| m.max(*t)) * (1.0 + cfg.rel_step);
    let v = match cfg.theorem {
        Theorem::T3Fk => Some(picard_field(cfg, t_max)?),
        _ => None,
    };
    let mut failure = None;
    let u = SpaceTimeField::at_check_times(grid, &cfg.check_times, cfg.rel_step, |t, x| {
        let r = match cfg.theorem {
            Theorem::T1Btbm => quad_u1(&cfg.f, &cfg.g, t, &[x], &cfg.rule),
            Theorem::T2Eps => quad_u2(&cfg.f, cfg.epsilon, t, &[x], &cfg.rule),
            Theorem::T3Fk => quad_u_fk(t, x, v.as_ref().expect("picard field"), &cfg.rule),
        };
        r.unwrap_or_else(|e| {
            failure.get_or_insert(e);
            0.0
        })
    })
    .context("residual field")?;
    if let Some(e) = failure {
        return Err(CliError::from_core("quadrature field", e));
    }
    let report = pde_residual(&u, &spec).context("pde_residual")?;
    let rows = report
        .profile
        .iter()
        .map(|&(t, r)| {
            let mut row = base_row(cfg, "residual", r, Verdict::from_bool(r <= cfg.residual_tol));
            row.t = Some(t);
            row.x = String::new();
            row.n = Some(report.grid_points);
            row.tolerance = Some(cfg.residual_tol);
            row
        })
        .collect();
    Ok(ComparisonRecord { rows })
}

/// Pairwise two-sample KS tests of the variants' terminal laws.
fn marginal_test(cfg: &ExperimentConfig) -> CliResult<ComparisonRecord> {
    let clock = ClockSpec::new(1.0, cfg.t, cfg.clock_steps).context("clock")?;
    let samples = cfg
        .variants
        .iter()
        .enumerate()
        .map(|(i, v)| {
            // Distinct seeds keep the variants' samples independent.
            terminal_samples(&cfg.x, cfg.t, *v, &clock, cfg.n, cfg.seed.wrapping_add(i as u64))
                .context("terminal samples")
        })
        .collect::<CliResult<Vec<_>>>()?;
    let crit = ks_critical_value(cfg.alpha, cfg.n, cfg.n);
    let mut rows = Vec::new();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let d = ks_two_sample(&samples[i], &samples[j]).context("ks statistic")?;
            let mut row = base_row(cfg, "ks", d, Verdict::from_bool(d <= crit));
            row.theorem = String::new();
            row.variant = format!("{} vs {}", cfg.variants[i], cfg.variants[j]);
            row.n = Some(cfg.n);
            row.seed = Some(cfg.seed);
            row.tolerance = Some(crit);
            rows.push(row);
        }
    }
    Ok(ComparisonRecord { rows })
}

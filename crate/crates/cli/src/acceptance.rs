//! The acceptance suite: nine criteria, each a list of numeric checks.
//!
//! A check passes when `value <= tolerance`. Reference values come from
//! closed forms or from a route independent of the one being checked.

use std::f64::consts::PI;

use btlab_core::pde::{initial_limit_check, LimitCheckOptions, Route};
use btlab_core::quad::normal_cdf;
use btlab_core::{
    commutation_check, halfnormal_exp_moment, heat_kernel, make_uniform_grid, mc_feynman_kac, mc_theorem1, mc_theorem2,
    pde_residual, picard_v, quad_u1, quad_u2, quad_u_fk, spectral_mode_amplitudes, ClockSpec, Error, McEstimate,
    PdeSpec, PeriodicGrid, QuadratureRule, ScalarField, SpaceTimeField, Variant,
};
use btlab_core::{ks_critical_value, ks_two_sample};

use crate::config::{ExperimentConfig, RawConfig};
use crate::error::{CliError, CliResult, Context};
use crate::experiment::run_experiment;
use crate::report::{ComparisonRecord, ReportRow, Verdict};

/// Seed shared by every stochastic check of the suite.
pub const SUITE_SEED: u64 = 20_240_601;
const SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(label: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            label: label.into(),
            value,
            tolerance,
        }
    }

    /// A boolean property expressed as a check (`0 <= 0` or `1 > 0`).
    pub fn holds(label: impl Into<String>, ok: bool) -> Self {
        Self::new(label, if ok { 0.0 } else { 1.0 }, 0.0)
    }

    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
    /// Set when the criterion could not be evaluated at all.
    pub error: Option<String>,
}

impl CriterionOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && !self.checks.is_empty() && self.checks.iter().all(Check::passed)
    }

    /// Largest `value / tolerance` over the checks (infinite for a failed
    /// zero-tolerance check).
    pub fn worst_ratio(&self) -> f64 {
        self.checks.iter().fold(0.0, |m, c| {
            let r = if c.tolerance > 0.0 {
                c.value / c.tolerance
            } else if c.value > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            m.max(r)
        })
    }

    /// One summary line, e.g. `criterion 3 PASS  theorem 2 ...`.
    pub fn summary(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        match &self.error {
            Some(e) => format!("criterion {} {status}  {}  error: {e}", self.id, self.title),
            None => format!(
                "criterion {} {status}  {}  ({} checks, worst value/tolerance {:.3})",
                self.id,
                self.title,
                self.checks.len(),
                self.worst_ratio()
            ),
        }
    }
}

pub const TITLES: [&str; 9] = [
    "first functional: MC, quadrature and mode solve agree",
    "mode-ODE identity of the first PDE",
    "scaled-clock functional and its PDE",
    "Feynman-Kac consistency",
    "Picard iteration against the closed form",
    "variant marginal equality",
    "semigroup/bi-Laplacian commutation",
    "initial limits",
    "infrastructure properties",
];

/// Evaluates criterion `id` (1 to 9).
pub fn run_criterion(id: u8) -> CriterionOutcome {
    let result = match id {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(),
        8 => criterion_8(),
        9 => criterion_9(),
        _ => Err(CliError::InvalidArgument(format!("no acceptance criterion {id}"))),
    };
    let title = TITLES
        .get(usize::from(id).wrapping_sub(1))
        .copied()
        .unwrap_or("unknown");
    match result {
        Ok(checks) => CriterionOutcome {
            id,
            title,
            checks,
            error: None,
        },
        Err(e) => CriterionOutcome {
            id,
            title,
            checks: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

pub fn run_all() -> Vec<CriterionOutcome> {
    (1..=9).map(run_criterion).collect()
}

/// One report row per check, routed as `acceptance:<id>`.
pub fn suite_record(outcomes: &[CriterionOutcome]) -> ComparisonRecord {
    let mut rows = Vec::new();
    for o in outcomes {
        let route = format!("acceptance:{}", o.id);
        if let Some(e) = &o.error {
            let mut row = ReportRow::new("acceptance", "", &route, f64::NAN, Verdict::Fail);
            row.variant = e.clone();
            rows.push(row);
        }
        for c in &o.checks {
            let mut row = ReportRow::new("acceptance", "", &route, c.value, Verdict::from_bool(c.passed()));
            row.variant = c.label.clone();
            row.tolerance = Some(c.tolerance);
            rows.push(row);
        }
    }
    ComparisonRecord { rows }
}

fn mc_check(label: &str, est: &McEstimate, reference: f64) -> Check {
    Check::new(
        format!(
            "{label}: |mc - ref| vs 3 stderr (mean {:.6}, ref {reference:.6})",
            est.mean
        ),
        (est.mean - reference).abs(),
        SIGMAS * est.stderr,
    )
}

/// `2 e^{a^2 t / 2} Phi(-a sqrt t)` straight from the normal CDF.
fn exp_moment_closed_form(a: f64, t: f64) -> f64 {
    2.0 * (0.5 * a * a * t).exp() * normal_cdf(-a * t.sqrt())
}

/// Composite Simpson for `int_0^{12 sqrt t} 2 e^{-a s} p_t(0,s) ds`.
fn exp_moment_brute_force(a: f64, t: f64) -> CliResult<f64> {
    let s_max = 12.0 * t.sqrt();
    let m = 200_000;
    let h = s_max / m as f64;
    let g = |s: f64| heat_kernel(t, s).map(|p| 2.0 * (-a * s).exp() * p);
    let mut acc = g(0.0).context("heat kernel")? + g(s_max).context("heat kernel")?;
    for i in 1..m {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h).context("heat kernel")?;
    }
    Ok(acc * h / 3.0)
}

fn cos_spec() -> PdeSpec {
    PdeSpec::btbm(ScalarField::cos(), ScalarField::zero())
}

fn criterion_1() -> CliResult<Vec<Check>> {
    let rule = QuadratureRule::default();
    let exact = exp_moment_closed_form(0.5, 1.0);
    let brute = exp_moment_brute_force(0.5, 1.0)?;
    let library = halfnormal_exp_moment(0.5, 1.0).context("halfnormal_exp_moment")?;
    let quad = quad_u1(&ScalarField::cos(), &ScalarField::zero(), 1.0, &[0.0], &rule).context("quad_u1")?;
    let mc = mc_theorem1(
        &ScalarField::cos(),
        &ScalarField::zero(),
        1.0,
        &[0.0],
        Variant::Btp,
        &ClockSpec::unit(1.0).context("clock")?,
        1_000_000,
        SUITE_SEED,
    )
    .context("mc_theorem1")?;
    let traj = spectral_mode_amplitudes(&cos_spec(), &[1], 1.0, 10_000).context("mode solve")?;
    let h1 = *traj[0].amplitude.last().expect("nonempty trajectory");
    Ok(vec![
        Check::new("closed form vs brute-force quadrature", (exact - brute).abs(), 1e-10),
        Check::new("halfnormal_exp_moment vs closed form", (library - exact).abs(), 1e-12),
        Check::new(
            format!("quad_u1 = {quad:.10} vs 2e^(1/8)Phi(-1/2)"),
            (quad - exact).abs(),
            1e-6,
        ),
        mc_check("mc_theorem1 vs quad_u1", &mc, quad),
        Check::new(
            format!("mode solve h(1) = {h1:.10} vs closed form"),
            (h1 - exact).abs(),
            1e-6,
        ),
    ])
}

fn criterion_2() -> CliResult<Vec<Check>> {
    let rule = QuadratureRule::default();
    let h = |t: f64| quad_u1(&ScalarField::cos(), &ScalarField::zero(), t, &[0.0], &rule).context("quad_u1");
    let mut checks = Vec::new();
    for t in [0.1, 0.5, 1.0, 2.0] {
        let dt = 1e-3 * t;
        let deriv = (h(t + dt)? - h(t - dt)?) / (2.0 * dt);
        let defect = deriv + 1.0 / (8.0 * PI * t).sqrt() - h(t)? / 8.0;
        checks.push(Check::new(
            format!("|h' + 1/sqrt(8 pi t) - h/8| at t={t}"),
            defect.abs(),
            1e-4,
        ));
    }
    Ok(checks)
}

fn criterion_3() -> CliResult<Vec<Check>> {
    let one = ScalarField::constant(1.0);
    let reference = exp_moment_closed_form(1.0, 1.0);
    let clock = ClockSpec::new(1.0, 1.0, 1000).context("clock")?;
    let mc = mc_theorem2(&one, 1.0, &[0.0], Variant::Btp, &clock, 1_000_000, SUITE_SEED).context("mc_theorem2")?;

    let grid = PeriodicGrid::trig(16).context("grid")?;
    let field = SpaceTimeField::at_check_times(grid, &[0.25, 1.0, 2.0], 1e-3, |t, _| exp_moment_closed_form(1.0, t))
        .context("closed-form field")?;
    let spec = PdeSpec::scaled(one, 1.0).context("spec")?;
    let residual = pde_residual(&field, &spec).context("pde_residual")?;

    let rule = QuadratureRule::default();
    let (f, x) = (ScalarField::cos(), [0.3]);
    let half = ClockSpec::new(0.5, 1.0, 1000).context("clock")?;
    let quad = quad_u2(&f, 0.5, 1.0, &x, &rule).context("quad_u2")?;
    let mc_half = mc_theorem2(&f, 1.0, &x, Variant::Btp, &half, 1_000_000, SUITE_SEED).context("mc_theorem2")?;
    Ok(vec![
        mc_check("mc_theorem2 (f=1, eps=1) vs 2e^(1/2)Phi(-1)", &mc, reference),
        Check::new("residual of the closed-form field", residual.sup_residual, 1e-3),
        mc_check("mc_theorem2 (f=cos, eps=0.5, x=0.3) vs quad_u2", &mc_half, quad),
    ])
}

fn criterion_4() -> CliResult<Vec<Check>> {
    let one = ScalarField::constant(1.0);
    let minus_one = ScalarField::neg_constant(1.0).context("potential")?;
    let reference = exp_moment_closed_form(1.0, 1.0);
    let n = 1_000_000;
    let fk = mc_feynman_kac(&one, &minus_one, 1.0, &[0.0], n, SUITE_SEED, None).context("mc_feynman_kac")?;
    let clock = ClockSpec::new(1.0, 1.0, 1000).context("clock")?;
    // A different seed keeps the two estimators independent.
    let t2 = mc_theorem2(&one, 1.0, &[0.0], Variant::Btp, &clock, n, SUITE_SEED + 1).context("mc_theorem2")?;
    let combined = fk.stderr.hypot(t2.stderr);

    let (f, c) = (ScalarField::gauss(), ScalarField::neg_cauchy());
    let rule = QuadratureRule::default();
    let grid = PeriodicGrid::new(16.0, 256).context("grid")?;
    let s_grid = make_uniform_grid(rule.s_max(1.0), 512).context("clock grid")?;
    let sol = picard_v(&f, &c, &s_grid, grid, 50, 1e-10).context("picard_v")?;
    let quad = quad_u_fk(1.0, 0.0, &sol.v, &rule).context("quad_u_fk")?;
    let mc = mc_feynman_kac(&f, &c, 1.0, &[0.0], n, SUITE_SEED, None).context("mc_feynman_kac")?;
    Ok(vec![
        Check::new(
            "|mc_feynman_kac - mc_theorem2| vs 3 combined stderr (c=-1, f=1)",
            (fk.mean - t2.mean).abs(),
            SIGMAS * combined,
        ),
        mc_check("mc_feynman_kac (c=-1, f=1) vs 0.5232", &fk, reference),
        mc_check("mc_theorem2 (eps=1, f=1) vs 0.5232", &t2, reference),
        mc_check("mc_feynman_kac (c=neg-cauchy, f=gauss) vs quad_u_fk", &mc, quad),
    ])
}

fn criterion_5() -> CliResult<Vec<Check>> {
    let grid = PeriodicGrid::trig(32).context("grid")?;
    let s_grid = make_uniform_grid(2.0, 512).context("clock grid")?;
    let mut checks = Vec::new();
    for lambda in [0.5, 1.0] {
        let c = ScalarField::neg_constant(lambda).context("potential")?;
        let sol = picard_v(&ScalarField::cos(), &c, &s_grid, grid, 50, 1e-10).context("picard_v")?;
        let mut err: f64 = 0.0;
        for (i, &s) in sol.v.times().iter().enumerate() {
            for (j, x) in grid.points().iter().enumerate() {
                err = err.max((sol.v.value(i, j) - (-(lambda + 0.5) * s).exp() * x.cos()).abs());
            }
        }
        checks.push(Check::new(format!("sup error, lambda={lambda}"), err, 1e-4));
        checks.push(Check::new(
            format!("sweeps used, lambda={lambda} (last change {:.1e})", sol.last_change),
            sol.sweeps as f64,
            50.0,
        ));
    }
    Ok(checks)
}

fn criterion_6() -> CliResult<Vec<Check>> {
    let variants = [Variant::Btp, Variant::Kebtp(2), Variant::Kebtp(5), Variant::Ebtp];
    let n = 100_000;
    let mut checks = Vec::new();
    for (ti, t) in [0.25, 1.0].into_iter().enumerate() {
        let clock = ClockSpec::new(1.0, t, 200).context("clock")?;
        let samples = variants
            .iter()
            .enumerate()
            .map(|(i, v)| {
                btlab_core::mc::terminal_samples(&[0.0], t, *v, &clock, n, SUITE_SEED + 100 + 10 * ti as u64 + i as u64)
                    .context("terminal samples")
            })
            .collect::<CliResult<Vec<_>>>()?;
        let crit = ks_critical_value(0.01, n, n);
        for i in 0..variants.len() {
            for j in i + 1..variants.len() {
                let d = ks_two_sample(&samples[i], &samples[j]).context("ks")?;
                checks.push(Check::new(
                    format!("KS {} vs {} at t={t}", variants[i], variants[j]),
                    d,
                    crit,
                ));
            }
        }
    }
    let clock = ClockSpec::new(1.0, 1.0, 100).context("clock")?;
    let (f, g) = (ScalarField::cos(), ScalarField::gauss());
    let means = variants
        .iter()
        .enumerate()
        .map(|(i, v)| {
            mc_theorem1(&f, &g, 1.0, &[0.0], *v, &clock, n, SUITE_SEED + 200 + i as u64).context("mc_theorem1")
        })
        .collect::<CliResult<Vec<_>>>()?;
    for i in 0..variants.len() {
        for j in i + 1..variants.len() {
            let (a, b) = (&means[i], &means[j]);
            checks.push(Check::new(
                format!("mc_theorem1 (f=cos, g=gauss) {} vs {}", variants[i], variants[j]),
                (a.mean - b.mean).abs(),
                SIGMAS * a.stderr.hypot(b.stderr),
            ));
        }
    }
    Ok(checks)
}

fn criterion_7() -> CliResult<Vec<Check>> {
    let rule = QuadratureRule::default();
    let cos = commutation_check(
        &ScalarField::cos(),
        1.0,
        PeriodicGrid::trig(256).context("grid")?,
        &rule,
    )
    .context("commutation_check")?;
    // The Gaussian field has variance up to 1 + 8 at t = 1; a half-width of
    // 24 keeps its periodic wrap-around negligible.
    let gauss = commutation_check(
        &ScalarField::gauss(),
        1.0,
        PeriodicGrid::new(24.0, 256).context("grid")?,
        &rule,
    )
    .context("commutation_check")?;
    Ok(vec![
        Check::new("f=cos on 256 points of [-pi, pi)", cos, 1e-4),
        Check::new("f=gauss on 256 points of [-24, 24)", gauss, 1e-3),
    ])
}

pub const REGISTRY: [&str; 6] = ["const:2.5", "neg-const:0.5", "cos", "gauss", "neg-gauss", "neg-cauchy"];

fn criterion_8() -> CliResult<Vec<Check>> {
    let opts = LimitCheckOptions {
        seed: SUITE_SEED,
        ..LimitCheckOptions::default()
    };
    let t_min = opts.times.iter().copied().fold(f64::INFINITY, f64::min);
    let x_set = [0.0, 0.5, 1.0];
    let mut checks = Vec::new();
    for name in REGISTRY {
        let f = ScalarField::from_name(name).context("registry")?;
        let bound = 2.0 * (t_min / (2.0 * PI)).sqrt() * f.sup_laplacian(1) + 1e-4;
        let spec = PdeSpec::btbm(f.clone(), ScalarField::zero());
        let mut routes = vec![Route::Quad, Route::Mc];
        if f.cosine_modes().is_some() {
            routes.push(Route::Spectral);
        }
        for route in routes {
            let report = initial_limit_check(route, &spec, &x_set, &opts).context("initial_limit_check")?;
            checks.push(Check::new(
                format!("{name} via {}: gap at t={t_min}", route.label()),
                report.max_gap(),
                bound,
            ));
            checks.push(Check::holds(
                format!("{name} via {}: gap shrinks with t", route.label()),
                report.monotone,
            ));
        }
    }
    Ok(checks)
}

fn estimate_config(pairs: &[(&str, &str)]) -> CliResult<ExperimentConfig> {
    let mut raw = RawConfig::default();
    for (k, v) in pairs {
        raw.set(k, v);
    }
    ExperimentConfig::from_raw(&raw)
}

/// Runs `cfg` inside a dedicated pool of `threads` workers.
pub fn run_with_threads(cfg: &ExperimentConfig, threads: usize) -> CliResult<ComparisonRecord> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

fn criterion_9() -> CliResult<Vec<Check>> {
    let rule = QuadratureRule::default();
    let mut checks = Vec::new();

    let norm = [0.1, 0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&t| (rule.halfnormal_expectation(t, |_| 1.0) - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new("half-normal normalisation, t in [0.1, 4]", norm, 1e-10));

    let mut ck: f64 = 0.0;
    for name in REGISTRY {
        let f = ScalarField::from_name(name).context("registry")?;
        for (s1, s2) in [(0.2, 0.3), (0.5, 0.5), (0.1, 0.9), (1.0, 1.5)] {
            let x = [0.4];
            let nested = rule.gaussian_expectation(|y| rule.gaussian_expectation(|z| f.value(z), s1, y), s2, &x);
            let direct = rule.gaussian_expectation(|z| f.value(z), s1 + s2, &x);
            ck = ck.max((nested - direct).abs());
        }
    }
    checks.push(Check::new("Chapman-Kolmogorov on the registry", ck, 1e-8));

    let clock = ClockSpec::unit(1.0).context("clock")?;
    let se = |n| {
        mc_theorem1(
            &ScalarField::cos(),
            &ScalarField::zero(),
            1.0,
            &[0.3],
            Variant::Btp,
            &clock,
            n,
            SUITE_SEED,
        )
        .context("mc_theorem1")
        .map(|e| e.stderr)
    };
    let ratio = se(40_000)? / se(10_000)?;
    checks.push(Check::new(
        format!("stderr ratio for 4x replicates = {ratio:.4} (target 0.5 +- 20%)"),
        (ratio - 0.5).abs(),
        0.1,
    ));

    let cfg = estimate_config(&[
        ("kind", "compare"),
        ("theorem", "T1"),
        ("f", "cos"),
        ("g", "gauss"),
        ("variant", "kebtp:3"),
        ("clock_steps", "50"),
        ("n", "20000"),
        ("seed", "7"),
    ])?;
    let one = run_with_threads(&cfg, 1)?;
    let four = run_with_threads(&cfg, 4)?;
    let identical = one.to_csv()? == four.to_csv()? && one.to_json()? == four.to_json()?;
    checks.push(Check::holds("byte-identical reports on 1 and 4 threads", identical));

    let guard = spectral_mode_amplitudes(&cos_spec(), &[1, 4], 2.0, 100);
    checks.push(Check::holds(
        "mode solve refuses k=4, t=2",
        matches!(guard, Err(Error::IllPosed { mode: 4, .. })),
    ));
    Ok(checks)
}

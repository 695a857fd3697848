//! Checks that the computed fields solve the fourth-order, initially
//! perturbed PDEs (one space dimension, periodic box).
//!
//! The `+Delta^2` term makes forward time-stepping exponentially unstable in
//! high modes, so fields are verified rather than solved: `pde_residual`
//! differentiates a given field, and `spectral_mode_solve` integrates only
//! finitely many Fourier modes and refuses any mode whose growth over the
//! horizon exceeds `e^30`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::mc::{mc_feynman_kac, mc_theorem1, mc_theorem2};
use crate::paths::make_uniform_grid;
use crate::processes::{ClockSpec, Variant};
use crate::semigroup::{picard_v, quad_u1, quad_u2, quad_u_fk, QuadratureRule};
use crate::spacetime::{PeriodicGrid, SpaceTimeField, Spectral};

/// Largest admissible `growth_rate * t_end` for a forward mode solve.
pub const GROWTH_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theorem {
    /// `u = E[f(X) + int g(X)]`, Brownian-time Brownian motion.
    T1Btbm,
    /// `u = E[f(X_eps) exp(-|B|/eps)]`, scaled clock.
    T2Eps,
    /// Brownian-time Feynman–Kac.
    T3Fk,
}

impl Theorem {
    pub fn label(&self) -> &'static str {
        match self {
            Theorem::T1Btbm => "T1",
            Theorem::T2Eps => "T2",
            Theorem::T3Fk => "T3",
        }
    }
}

impl std::str::FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "T1" | "T1_BTBM" => Ok(Theorem::T1Btbm),
            "T2" | "T2_EPS" => Ok(Theorem::T2Eps),
            "T3" | "T3_FK" => Ok(Theorem::T3Fk),
            _ => Err(Error::invalid(format!("unknown theorem {s:?}"))),
        }
    }
}

/// The data of one of the three PDEs.
#[derive(Debug, Clone, PartialEq)]
pub enum PdeSpec {
    Btbm { f: ScalarField, g: ScalarField },
    Scaled { f: ScalarField, epsilon: f64 },
    FeynmanKac { f: ScalarField, c: ScalarField },
}

impl PdeSpec {
    pub fn btbm(f: ScalarField, g: ScalarField) -> Self {
        PdeSpec::Btbm { f, g }
    }

    pub fn scaled(f: ScalarField, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(PdeSpec::Scaled { f, epsilon })
    }

    pub fn feynman_kac(f: ScalarField, c: ScalarField) -> Result<Self> {
        if !c.is_nonpositive() {
            return Err(Error::ContractViolation(format!("potential {} must be <= 0", c.name())));
        }
        Ok(PdeSpec::FeynmanKac { f, c })
    }

    pub fn theorem(&self) -> Theorem {
        match self {
            PdeSpec::Btbm { .. } => Theorem::T1Btbm,
            PdeSpec::Scaled { .. } => Theorem::T2Eps,
            PdeSpec::FeynmanKac { .. } => Theorem::T3Fk,
        }
    }

    pub fn f(&self) -> &ScalarField {
        match self {
            PdeSpec::Btbm { f, .. } | PdeSpec::Scaled { f, .. } | PdeSpec::FeynmanKac { f, .. } => f,
        }
    }
}

/// The forcing contributed by the initial function at `(t, x)`; it decays
/// like `t^{-1/2}`.
pub fn initial_forcing(spec: &PdeSpec, t: f64, x: f64) -> f64 {
    let p = [x];
    let p0 = 1.0 / (2.0 * PI * t).sqrt();
    match spec {
        PdeSpec::Btbm { f, .. } => f.laplacian(&p) / (8.0 * PI * t).sqrt(),
        PdeSpec::Scaled { f, epsilon } => p0 * (0.5 * epsilon * f.laplacian(&p) - f.value(&p) / epsilon),
        PdeSpec::FeynmanKac { f, c } => p0 * (0.5 * f.laplacian(&p) + c.value(&p) * f.value(&p)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub sup_residual: f64,
    /// `(check time, sup over x of |residual|)`
    pub profile: Vec<(f64, f64)>,
    pub grid_points: usize,
    pub half_width: f64,
}

/// Residual `du/dt - RHS` of the PDE on a field sampled at triples
/// `t - dt, t, t + dt` (see [`SpaceTimeField::at_check_times`]).
///
/// Time derivatives are three-point central differences; spatial
/// derivatives are spectral; forcing terms use the closed-form evaluators.
pub fn pde_residual(u: &SpaceTimeField, spec: &PdeSpec) -> Result<ResidualReport> {
    let times = u.times();
    if times.len() < 3 || !times.len().is_multiple_of(3) {
        return Err(Error::invalid(format!(
            "residual needs time slices in triples around each check time, got {}",
            times.len()
        )));
    }
    let grid = *u.grid();
    let sp = Spectral::new(grid);
    let xs = grid.points();
    let mut profile = Vec::with_capacity(times.len() / 3);
    for k in 0..times.len() / 3 {
        let (ta, tb, tc) = (times[3 * k], times[3 * k + 1], times[3 * k + 2]);
        if !(ta < tb && tb < tc) || !(ta > 0.0) {
            return Err(Error::invalid(format!("bad check-time triple ({ta}, {tb}, {tc})")));
        }
        let (h1, h2) = (tb - ta, tc - tb);
        let (wa, wb, wc) = (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)));
        let (ra, rb, rc) = (u.row(3 * k), u.row(3 * k + 1), u.row(3 * k + 2));
        let lap = sp.laplacian(rb);
        let bilap = sp.bilaplacian(rb);
        let grad = match spec {
            PdeSpec::FeynmanKac { .. } => sp.derivative(rb),
            _ => Vec::new(),
        };
        let t = tb;
        let mut sup: f64 = 0.0;
        for (j, &x) in xs.iter().enumerate() {
            let p = [x];
            let du = wa * ra[j] + wb * rb[j] + wc * rc[j];
            let rhs = initial_forcing(spec, t, x)
                + match spec {
                    PdeSpec::Btbm { g, .. } => {
                        g.value(&p) + (2.0 * t / PI).sqrt() * 0.5 * g.laplacian(&p) + bilap[j] / 8.0
                    }
                    PdeSpec::Scaled { epsilon, .. } => {
                        let e2 = epsilon * epsilon;
                        rb[j] / (2.0 * e2) - 0.5 * lap[j] + e2 / 8.0 * bilap[j]
                    }
                    PdeSpec::FeynmanKac { c, .. } => {
                        let cv = c.value(&p);
                        (0.25 * c.laplacian(&p) + 0.5 * cv * cv) * rb[j]
                            + 0.5 * c.gradient(&p)[0] * grad[j]
                            + 0.5 * cv * lap[j]
                            + bilap[j] / 8.0
                    }
                };
            sup = sup.max((du - rhs).abs());
        }
        profile.push((t, sup));
    }
    let sup_residual = profile.iter().fold(0.0_f64, |m, &(_, r)| m.max(r));
    Ok(ResidualReport {
        sup_residual,
        profile,
        grid_points: grid.len(),
        half_width: grid.half_width(),
    })
}

/// Amplitude of `cos(k x)` over time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTrajectory {
    pub k: usize,
    pub times: Vec<f64>,
    pub amplitude: Vec<f64>,
}

/// Linear ODE `a' = rate a + alpha t^{-1/2} + beta + gamma t^{1/2}` of one
/// cosine mode.
#[derive(Debug, Clone, Copy)]
struct ModeOde {
    rate: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    initial: f64,
}

fn mode_odes(spec: &PdeSpec, modes: &[usize]) -> Result<Vec<(usize, ModeOde)>> {
    let trig = |h: &ScalarField| {
        h.cosine_modes()
            .ok_or_else(|| Error::invalid(format!("{} is not a finite cosine combination", h.name())))
    };
    let amp = |content: &[(usize, f64)], k: usize| content.iter().filter(|(m, _)| *m == k).map(|(_, a)| a).sum();
    let f_modes = trig(spec.f())?;
    let g_modes = match spec {
        PdeSpec::Btbm { g, .. } => trig(g)?,
        _ => Vec::new(),
    };
    for (k, _) in f_modes.iter().chain(&g_modes) {
        if !modes.contains(k) {
            return Err(Error::invalid(format!(
                "data has mode {k}, which is not in the mode set"
            )));
        }
    }
    let sqrt_2pi = (2.0 * PI).sqrt();
    modes
        .iter()
        .map(|&k| {
            let k2 = (k * k) as f64;
            let fk: f64 = amp(&f_modes, k);
            let ode = match spec {
                PdeSpec::Btbm { .. } => {
                    let gk: f64 = amp(&g_modes, k);
                    ModeOde {
                        rate: k2 * k2 / 8.0,
                        alpha: -k2 * fk / (8.0 * PI).sqrt(),
                        beta: gk,
                        gamma: -0.5 * k2 * gk * (2.0 / PI).sqrt(),
                        initial: fk,
                    }
                }
                PdeSpec::Scaled { epsilon, .. } => {
                    let e = *epsilon;
                    ModeOde {
                        rate: e * e * k2 * k2 / 8.0 + 0.5 * k2 + 0.5 / (e * e),
                        alpha: (-0.5 * e * k2 - 1.0 / e) * fk / sqrt_2pi,
                        beta: 0.0,
                        gamma: 0.0,
                        initial: fk,
                    }
                }
                PdeSpec::FeynmanKac { c, .. } => {
                    let c0 = c.as_constant().ok_or_else(|| {
                        Error::invalid(format!("mode solve needs a constant potential, got {}", c.name()))
                    })?;
                    ModeOde {
                        rate: k2 * k2 / 8.0 - 0.5 * c0 * k2 + 0.5 * c0 * c0,
                        alpha: (-0.5 * k2 + c0) * fk / sqrt_2pi,
                        beta: 0.0,
                        gamma: 0.0,
                        initial: fk,
                    }
                }
            };
            Ok((k, ode))
        })
        .collect()
}

/// Integrates the cosine-mode amplitude ODEs on `[0, t_end]`.
///
/// Each step is exact for the forcing terms `t^{-1/2}, 1, t^{1/2}` against a
/// linear interpolant of the propagator `exp(rate (t_{n+1} - s))`, so the
/// `t^{-1/2}` singularity at 0 is integrated in closed form.
pub fn spectral_mode_amplitudes(
    spec: &PdeSpec,
    modes: &[usize],
    t_end: f64,
    n_steps: usize,
) -> Result<Vec<ModeTrajectory>> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::invalid(format!("t_end must be positive, got {t_end}")));
    }
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be at least 1"));
    }
    if modes.is_empty() {
        return Err(Error::invalid("mode set must be nonempty"));
    }
    let odes = mode_odes(spec, modes)?;
    for (k, ode) in &odes {
        let exponent = ode.rate * t_end;
        if exponent > GROWTH_LIMIT {
            return Err(Error::IllPosed {
                mode: *k,
                exponent,
                limit: GROWTH_LIMIT,
            });
        }
    }
    let grid = make_uniform_grid(t_end, n_steps)?;
    let times = grid.times();
    Ok(odes
        .into_iter()
        .map(|(k, ode)| {
            let mut amplitude = Vec::with_capacity(times.len());
            let mut a = ode.initial;
            amplitude.push(a);
            for w in times.windows(2) {
                a = exp_integrator_step(&ode, a, w[0], w[1]);
                amplitude.push(a);
            }
            ModeTrajectory {
                k,
                times: times.to_vec(),
                amplitude,
            }
        })
        .collect())
}

fn exp_integrator_step(ode: &ModeOde, a: f64, t0: f64, t1: f64) -> f64 {
    let h = t1 - t0;
    let e = (ode.rate * h).exp();
    // Moments int_{t0}^{t1} s^p ds.
    let pow_diff = |q: f64| t1.powf(q) - t0.powf(q);
    let m_neg_half = 2.0 * (t1.sqrt() - t0.sqrt());
    let m_zero = h;
    let m_half = 2.0 / 3.0 * pow_diff(1.5);
    let m_one = 0.5 * (t1 * t1 - t0 * t0);
    let m_three_half = 0.4 * pow_diff(2.5);
    // int L(s) s^p ds with L(s) = (e (t1 - s) + (s - t0)) / h.
    let weighted = |mp: f64, mp1: f64| (e * (t1 * mp - mp1) + (mp1 - t0 * mp)) / h;
    e * a
        + ode.alpha * weighted(m_neg_half, m_half)
        + ode.beta * weighted(m_zero, m_one)
        + ode.gamma * weighted(m_half, m_three_half)
}

/// Mode solve reconstructed on a periodic grid at every step time.
pub fn spectral_mode_solve(
    spec: &PdeSpec,
    modes: &[usize],
    t_end: f64,
    n_steps: usize,
    grid: PeriodicGrid,
) -> Result<SpaceTimeField> {
    if (grid.half_width() - PI).abs() > 1e-12 {
        return Err(Error::invalid("mode solves live on the [-pi, pi) box"));
    }
    let trajectories = spectral_mode_amplitudes(spec, modes, t_end, n_steps)?;
    let times = trajectories[0].times.clone();
    let xs = grid.points();
    let mut values = Vec::with_capacity(times.len() * xs.len());
    for i in 0..times.len() {
        values.extend(xs.iter().map(|&x| {
            trajectories
                .iter()
                .map(|tr| tr.amplitude[i] * (tr.k as f64 * x).cos())
                .sum::<f64>()
        }));
    }
    SpaceTimeField::new(grid, times, values)
}

/// Which computational route evaluates `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    Quad,
    Mc,
    Spectral,
}

impl Route {
    pub fn label(&self) -> &'static str {
        match self {
            Route::Quad => "quad",
            Route::Mc => "mc",
            Route::Spectral => "spectral",
        }
    }
}

/// Settings for [`initial_limit_check`].
#[derive(Debug, Clone)]
pub struct LimitCheckOptions {
    pub times: Vec<f64>,
    pub mc_replicates: usize,
    pub seed: u64,
    pub rule: QuadratureRule,
    pub spectral_steps: usize,
}

impl Default for LimitCheckOptions {
    fn default() -> Self {
        Self {
            times: vec![1e-2, 1e-3, 1e-4],
            mc_replicates: 100_000,
            seed: 0,
            rule: QuadratureRule::default(),
            spectral_steps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialLimitReport {
    /// `(t, max over x of |u(t,x) - f(x)|)` in the order the times were given.
    pub gaps: Vec<(f64, f64)>,
    /// Whether the gap never grows as `t` decreases.
    pub monotone: bool,
}

impl InitialLimitReport {
    /// Gap at the smallest time checked.
    pub fn max_gap(&self) -> f64 {
        self.gaps
            .iter()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map_or(0.0, |&(_, g)| g)
    }
}

/// Evaluates `u(t, x)` by one route.
pub fn evaluate_route(route: Route, spec: &PdeSpec, t: f64, x: f64, opts: &LimitCheckOptions) -> Result<f64> {
    match (route, spec) {
        (Route::Quad, PdeSpec::Btbm { f, g }) => quad_u1(f, g, t, &[x], &opts.rule),
        (Route::Quad, PdeSpec::Scaled { f, epsilon }) => quad_u2(f, *epsilon, t, &[x], &opts.rule),
        (Route::Quad, PdeSpec::FeynmanKac { f, c }) => {
            let s_max = opts.rule.s_max(t);
            let s_grid = make_uniform_grid(s_max, 256)?;
            let x_grid = if f.is_periodic() && c.is_periodic() {
                PeriodicGrid::trig(64)?
            } else {
                PeriodicGrid::new(16.0, 256)?
            };
            let sol = picard_v(f, c, &s_grid, x_grid, 50, 1e-12)?;
            quad_u_fk(t, x, &sol.v, &opts.rule)
        }
        (Route::Mc, PdeSpec::Btbm { f, g }) => {
            let clock = ClockSpec::new(1.0, t, 16)?;
            Ok(mc_theorem1(f, g, t, &[x], Variant::Btp, &clock, opts.mc_replicates, opts.seed)?.mean)
        }
        (Route::Mc, PdeSpec::Scaled { f, epsilon }) => {
            let clock = ClockSpec::new(*epsilon, t, 16)?;
            Ok(mc_theorem2(f, t, &[x], Variant::Btp, &clock, opts.mc_replicates, opts.seed)?.mean)
        }
        (Route::Mc, PdeSpec::FeynmanKac { f, c }) => {
            Ok(mc_feynman_kac(f, c, t, &[x], opts.mc_replicates, opts.seed, None)?.mean)
        }
        (Route::Spectral, _) => {
            let mut modes: Vec<usize> = spec
                .f()
                .cosine_modes()
                .unwrap_or_default()
                .iter()
                .map(|m| m.0)
                .collect();
            if let PdeSpec::Btbm { g, .. } = spec {
                modes.extend(g.cosine_modes().unwrap_or_default().iter().map(|m| m.0));
            }
            modes.sort_unstable();
            modes.dedup();
            if modes.is_empty() {
                modes.push(0);
            }
            let tr = spectral_mode_amplitudes(spec, &modes, t, opts.spectral_steps)?;
            Ok(tr
                .iter()
                .map(|m| m.amplitude.last().unwrap() * (m.k as f64 * x).cos())
                .sum())
        }
    }
}

/// Measures how fast `u(t, .)` approaches `f` on `x_set` as `t` decreases.
pub fn initial_limit_check(
    route: Route,
    spec: &PdeSpec,
    x_set: &[f64],
    opts: &LimitCheckOptions,
) -> Result<InitialLimitReport> {
    if x_set.is_empty() || opts.times.is_empty() {
        return Err(Error::invalid("initial-limit check needs points and times"));
    }
    let f = spec.f();
    let mut gaps = Vec::with_capacity(opts.times.len());
    for &t in &opts.times {
        let mut gap: f64 = 0.0;
        for &x in x_set {
            let u = evaluate_route(route, spec, t, x, opts)?;
            gap = gap.max((u - f.value(&[x])).abs());
        }
        gaps.push((t, gap));
    }
    let mut by_time = gaps.clone();
    by_time.sort_by(|a, b| b.0.total_cmp(&a.0));
    // Absolute slack for gaps that are pure rounding noise.
    let monotone = by_time.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    Ok(InitialLimitReport { gaps, monotone })
}

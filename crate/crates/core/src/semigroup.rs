//! Deterministic evaluation of the Brownian-time functionals through their
//! subordination representations: the Gaussian semigroup is integrated
//! against the half-normal law of the clock `|B(t)|`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::paths::{heat_density, TimeGrid};
use crate::quad::{composite_gauss_legendre, gauss_hermite, mills_scaled_tail, GaussRule};
use crate::spacetime::{PeriodicGrid, SpaceTimeField, Spectral};

const PANEL_ORDER: usize = 16;
/// Largest variance handled by plain Gauss–Hermite.
const HERMITE_MAX_VARIANCE: f64 = 0.25;
/// Standard deviations kept by the panelled normal rule.
const NORMAL_CUTOFF: f64 = 9.0;

/// Truncation and node counts for the half-normal and Gaussian integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    s_max_multiplier: f64,
    n_points: usize,
    hermite_order: usize,
    hermite: GaussRule,
    unit_panels: GaussRule,
}

impl QuadratureRule {
    /// `s_max_multiplier`: the clock integral is truncated at
    /// `multiplier * sqrt(t)`. `n_points` (a multiple of 16, at least 64)
    /// Gauss–Legendre nodes cover `[0, s_max]`. `hermite_order` is the
    /// per-coordinate Gauss–Hermite order of the semigroup.
    pub fn new(s_max_multiplier: f64, n_points: usize, hermite_order: usize) -> Result<Self> {
        if !(s_max_multiplier > 0.0) || !s_max_multiplier.is_finite() {
            return Err(Error::invalid(format!(
                "s_max multiplier must be positive, got {s_max_multiplier}"
            )));
        }
        if n_points < 64 || !n_points.is_multiple_of(PANEL_ORDER) {
            return Err(Error::invalid(format!(
                "n_points must be a multiple of {PANEL_ORDER} and at least 64, got {n_points}"
            )));
        }
        if hermite_order == 0 {
            return Err(Error::invalid("hermite order must be positive"));
        }
        Ok(Self {
            s_max_multiplier,
            n_points,
            hermite_order,
            hermite: gauss_hermite(hermite_order),
            unit_panels: composite_gauss_legendre(0.0, 1.0, n_points / PANEL_ORDER, PANEL_ORDER),
        })
    }

    pub fn s_max_multiplier(&self) -> f64 {
        self.s_max_multiplier
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn hermite_order(&self) -> usize {
        self.hermite_order
    }

    pub fn s_max(&self, t: f64) -> f64 {
        self.s_max_multiplier * t.sqrt()
    }

    /// `2 * int_0^{s_max} F(s) p_t(0,s) ds`, the expectation of `F(|B(t)|)`.
    pub fn halfnormal_expectation(&self, t: f64, mut integrand: impl FnMut(f64) -> f64) -> f64 {
        let s_max = self.s_max(t);
        let mut acc = 0.0;
        for (u, w) in self.unit_panels.nodes.iter().zip(&self.unit_panels.weights) {
            let s = u * s_max;
            acc += w * 2.0 * heat_density(t, s) * integrand(s);
        }
        acc * s_max
    }

    /// `2 * int_0^{s_max} F(s) K_t(s) ds` with the occupation kernel
    /// `K_t(s) = int_0^t p_r(0,s) dr`, i.e. `E int_0^t F(|B(r)|) dr`.
    pub fn occupation_expectation(&self, t: f64, mut integrand: impl FnMut(f64) -> f64) -> f64 {
        let s_max = self.s_max(t);
        let mut acc = 0.0;
        for (u, w) in self.unit_panels.nodes.iter().zip(&self.unit_panels.weights) {
            let s = u * s_max;
            acc += w * 2.0 * occupation_kernel(t, s) * integrand(s);
        }
        acc * s_max
    }

    /// One-dimensional nodes `z` and weights with `E h(W_s) ~ sum w h(z)`.
    ///
    /// Gauss–Hermite is used while `s <= HERMITE_MAX_VARIANCE`. Beyond that a
    /// fixed Hermite rule samples unit-scale features of `f` too coarsely, so
    /// the normal density on `[-9 sqrt(s), 9 sqrt(s)]` is integrated with
    /// Gauss–Legendre panels of roughly unit width in `x`.
    fn normal_rule(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        if s <= HERMITE_MAX_VARIANCE {
            let scale = (2.0 * s).sqrt();
            let norm = PI.powf(-0.5);
            return (
                self.hermite.nodes.iter().map(|z| scale * z).collect(),
                self.hermite.weights.iter().map(|w| norm * w).collect(),
            );
        }
        let half = NORMAL_CUTOFF * s.sqrt();
        let panels = (2.0 * half).ceil() as usize;
        let rule = composite_gauss_legendre(-half, half, panels, PANEL_ORDER);
        let mut weights: Vec<f64> = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&z, w)| w * heat_density(s, z))
            .collect();
        // Renormalise so constants are reproduced exactly.
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        (rule.nodes, weights)
    }

    /// `E f(x + W_s)` for a d-dimensional Brownian increment `W_s`.
    pub fn gaussian_expectation(&self, f: impl Fn(&[f64]) -> f64, s: f64, x: &[f64]) -> f64 {
        if s == 0.0 {
            return f(x);
        }
        let d = x.len();
        let (nodes, weights) = self.normal_rule(s);
        let n = nodes.len();
        let mut idx = vec![0usize; d];
        let mut y = x.to_vec();
        let mut acc = 0.0;
        loop {
            let mut w = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                y[k] = x[k] + nodes[i];
                w *= weights[i];
            }
            acc += w * f(&y);
            // Odometer increment over the tensor grid.
            let mut k = 0;
            loop {
                if k == d {
                    return acc;
                }
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::new(8.0, 256, 40).expect("default rule is valid")
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be positive, got {t}")));
    }
    Ok(())
}

/// `int_0^t p_r(0,s) dr = sqrt(2t/pi) e^{-s^2/(2t)} - s erfc(s / sqrt(2t))`.
pub(crate) fn occupation_kernel(t: f64, s: f64) -> f64 {
    let z = s / (2.0 * t).sqrt();
    (2.0 * t / PI).sqrt() * (-z * z).exp() - s * libm::erfc(z)
}

/// `T_s f(x) = E f(X^x(s))` for Brownian `X`, by Gauss–Hermite quadrature.
pub fn semigroup_apply(f: &ScalarField, s: f64, x: &[f64], rule: &QuadratureRule) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::invalid(format!("semigroup time must be >= 0, got {s}")));
    }
    Ok(rule.gaussian_expectation(|y| f.value(y), s, x))
}

/// `u(t,x) = E[f(X(|B(t)|)) + int_0^t g(X(|B(r)|)) dr]` by quadrature:
/// `2 int T_s f(x) p_t(0,s) ds + 2 int T_s g(x) K_t(s) ds`, where the time
/// integral of the clock density has been done in closed form (`K_t`).
pub fn quad_u1(f: &ScalarField, g: &ScalarField, t: f64, x: &[f64], rule: &QuadratureRule) -> Result<f64> {
    check_time(t)?;
    let f_part = rule.halfnormal_expectation(t, |s| rule.gaussian_expectation(|y| f.value(y), s, x));
    let g_part = if g.is_zero() {
        0.0
    } else if let Some(k) = g.as_constant() {
        k * t
    } else {
        rule.occupation_expectation(t, |s| rule.gaussian_expectation(|y| g.value(y), s, x))
    };
    Ok(f_part + g_part)
}

/// `u_eps(t,x) = 2 int exp(-s/eps) T_{eps s} f(x) p_t(0,s) ds`.
pub fn quad_u2(f: &ScalarField, epsilon: f64, t: f64, x: &[f64], rule: &QuadratureRule) -> Result<f64> {
    check_time(t)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(rule.halfnormal_expectation(t, |s| {
        (-s / epsilon).exp() * rule.gaussian_expectation(|y| f.value(y), epsilon * s, x)
    }))
}

/// `E exp(-a |B(t)|) = 2 exp(a^2 t / 2) Phi(-a sqrt t)`.
pub fn halfnormal_exp_moment(a: f64, t: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::invalid(format!("exponential rate must be positive, got {a}")));
    }
    check_time(t)?;
    Ok(2.0 * mills_scaled_tail(a * t.sqrt()))
}

/// Result of the Duhamel fixed-point iteration.
#[derive(Debug, Clone)]
pub struct PicardSolution {
    /// `v(s, x)` on the s-grid (rows) and the periodic x-grid.
    pub v: SpaceTimeField,
    pub sweeps: usize,
    pub last_change: f64,
}

/// Solves `v(s,x) = T_s f(x) + int_0^s T_r(c v(s-r, .))(x) dr` by Picard
/// iteration on a uniform s-grid and a periodic x-grid.
///
/// The r-integral uses the trapezoid rule on the s-grid. The semigroup acts
/// spectrally on the periodic box, so the box must be wide enough that
/// periodisation of `f` and `c v` is negligible where `v` is read.
pub fn picard_v(
    f: &ScalarField,
    c: &ScalarField,
    s_grid: &TimeGrid,
    x_grid: PeriodicGrid,
    max_iter: usize,
    tol: f64,
) -> Result<PicardSolution> {
    if !c.is_nonpositive() {
        return Err(Error::ContractViolation(format!("potential {} must be <= 0", c.name())));
    }
    let s = s_grid.times();
    let ds = if s.len() > 1 { s[1] - s[0] } else { 0.0 };
    if s.windows(2).any(|w| ((w[1] - w[0]) - ds).abs() > 1e-9 * ds.max(1.0)) {
        return Err(Error::invalid("picard s-grid must be uniform"));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    let n = x_grid.len();
    let n_s = s.len();
    let sp = Spectral::new(x_grid);
    let xs = x_grid.points();
    let c_vals: Vec<f64> = xs.iter().map(|&x| c.value(&[x])).collect();
    let f_hat = sp.forward(&xs.iter().map(|&x| f.value(&[x])).collect::<Vec<_>>());
    let kappa2: Vec<f64> = (0..n).map(|m| x_grid.wavenumber(m).powi(2)).collect();

    // decay[i][m] = exp(-kappa_m^2 * i * ds / 2)
    let mut decay = vec![1.0; n_s * n];
    for i in 1..n_s {
        for m in 0..n {
            decay[i * n + m] = decay[(i - 1) * n + m] * (-0.5 * kappa2[m] * ds).exp();
        }
    }
    let base_hat: Vec<Complex64> = (0..n_s)
        .flat_map(|j| {
            let row = &decay[j * n..(j + 1) * n];
            f_hat.iter().zip(row).map(|(fh, e)| fh * e).collect::<Vec<_>>()
        })
        .collect();
    let mut v: Vec<f64> = (0..n_s)
        .flat_map(|j| sp.inverse(base_hat[j * n..(j + 1) * n].to_vec()))
        .collect();

    let mut w_hat = vec![Complex64::new(0.0, 0.0); n_s * n];
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    let mut last_change = f64::INFINITY;
    for sweep in 1..=max_iter {
        for j in 0..n_s {
            let row: Vec<f64> = v[j * n..(j + 1) * n].iter().zip(&c_vals).map(|(a, b)| a * b).collect();
            w_hat[j * n..(j + 1) * n].copy_from_slice(&sp.forward(&row));
        }
        let mut change: f64 = 0.0;
        let mut next = Vec::with_capacity(n_s * n);
        for j in 0..n_s {
            acc.copy_from_slice(&base_hat[j * n..(j + 1) * n]);
            if j > 0 {
                for i in 0..=j {
                    let weight = if i == 0 || i == j { 0.5 * ds } else { ds };
                    let e = &decay[i * n..(i + 1) * n];
                    let w = &w_hat[(j - i) * n..(j - i + 1) * n];
                    for m in 0..n {
                        acc[m] += w[m] * (weight * e[m]);
                    }
                }
            }
            let row = sp.inverse(acc.clone());
            for (k, val) in row.iter().enumerate() {
                change = change.max((val - v[j * n + k]).abs());
            }
            next.extend(row);
        }
        v = next;
        last_change = change;
        if change <= tol {
            return Ok(PicardSolution {
                v: SpaceTimeField::new(x_grid, s.to_vec(), v)?,
                sweeps: sweep,
                last_change,
            });
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: max_iter,
        residual: last_change,
    })
}

/// `u(t,x) = 2 int p_t(0,s) v(s,x) ds` from a tabulated `v`, interpolated
/// spectrally in x and linearly in s.
pub fn quad_u_fk(t: f64, x: f64, v: &SpaceTimeField, rule: &QuadratureRule) -> Result<f64> {
    check_time(t)?;
    let s = v.times();
    let s_max = rule.s_max(t);
    let covered = *s.last().unwrap_or(&0.0);
    if s.len() < 2 || s_max > covered * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "v covers s up to {covered}, but the quadrature needs {s_max}"
        )));
    }
    if !v.grid().contains(x) {
        return Err(Error::invalid(format!("x = {x} lies outside the field's grid")));
    }
    let sp = Spectral::new(*v.grid());
    let column: Vec<f64> = (0..s.len()).map(|j| sp.interpolate(&sp.forward(v.row(j)), x)).collect();
    let ds = s[1] - s[0];
    Ok(rule.halfnormal_expectation(t, |si| {
        let pos = (si / ds).floor() as usize;
        let j = pos.min(s.len() - 2);
        let frac = (si - s[j]) / ds;
        column[j] * (1.0 - frac) + column[j + 1] * frac
    }))
}

/// Largest `|d^2 v / dx^2|` of a tabulated field, computed spectrally.
pub fn second_derivative_bound(v: &SpaceTimeField) -> f64 {
    let sp = Spectral::new(*v.grid());
    (0..v.times().len())
        .map(|j| sp.laplacian(v.row(j)).iter().fold(0.0f64, |m, d| m.max(d.abs())))
        .fold(0.0, f64::max)
}

/// Sup over the grid of the difference between the spectral bi-Laplacian
/// of `u1(t,.) = 2 int T_s f p_t ds` and the quadrature of `T_s` applied to
/// the closed-form bi-Laplacian of `f`.
pub fn commutation_check(f: &ScalarField, t: f64, x_grid: PeriodicGrid, rule: &QuadratureRule) -> Result<f64> {
    check_time(t)?;
    let xs = x_grid.points();
    let u: Vec<f64> = xs
        .iter()
        .map(|&x| rule.halfnormal_expectation(t, |s| rule.gaussian_expectation(|y| f.value(y), s, &[x])))
        .collect();
    let left = Spectral::new(x_grid).bilaplacian(&u);
    let right: Vec<f64> = xs
        .iter()
        .map(|&x| rule.halfnormal_expectation(t, |s| rule.gaussian_expectation(|y| f.bilaplacian(y), s, &[x])))
        .collect();
    Ok(left.iter().zip(&right).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

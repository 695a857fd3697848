//! Monte Carlo estimators of the Brownian-time functionals.
//!
//! Replicate `r` always draws from `RngStream::new(seed, r)`, replicate
//! values are collected in index order and reduced sequentially with
//! compensated summation, so an estimate depends only on its inputs and
//! never on the number of worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::paths::{make_uniform_grid, sample_bm, TimeGrid};
use crate::processes::{btp_path_values, default_fk_steps, fk_weight_with, terminal_draw, ClockSpec, Variant};
use crate::rng::{normal, RngStream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero when `n < 2`.
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }

    /// `|a - b| <= k * sqrt(se_a^2 + se_b^2)`.
    pub fn agrees_with_estimate(&self, other: &McEstimate, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.stderr.hypot(other.stderr)
    }
}

/// Neumaier-compensated sum in slice order.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Runs `replicate` for `r = 0..n` and summarises the values.
pub fn estimate<F>(n: usize, seed: u64, replicate: F) -> Result<McEstimate>
where
    F: Fn(RngStream) -> Result<f64> + Sync,
{
    if n == 0 {
        return Err(Error::invalid("replicate count must be positive"));
    }
    let values: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|r| replicate(RngStream::new(seed, r)))
        .collect::<Result<_>>()?;
    let nf = n as f64;
    let mean = compensated_sum(values.iter().copied()) / nf;
    let stderr = if n < 2 {
        0.0
    } else {
        let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
        (ss / (nf - 1.0)).sqrt() / nf.sqrt()
    };
    Ok(McEstimate { mean, stderr, n, seed })
}

const INNER_TAG: u64 = 0x1;
const OUTER_TAG: u64 = 0x2;

/// Grid of the inner clock restricted to `[0, t]`.
fn clock_grid(t: f64, clock: &ClockSpec) -> Result<TimeGrid> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be positive, got {t}")));
    }
    let grid = make_uniform_grid(clock.t_end, clock.n_steps)?;
    let idx = grid.node_index(t).ok_or_else(|| {
        Error::invalid(format!(
            "t = {t} is not a node of the clock grid on [0, {}] with {} steps",
            clock.t_end, clock.n_steps
        ))
    })?;
    Ok(grid.truncated(idx + 1))
}

fn check_dim(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::invalid("start point must have positive dimension"));
    }
    Ok(())
}

/// `E[f(X(t)) + int_0^t g(X(r)) dr]` for the chosen variant with unit clock.
///
/// Each replicate draws an inner path on the clock grid, builds the variant
/// path, and integrates `g` along it by the trapezoid rule. When `g` is zero
/// and the variant is the plain BTP only the terminal value matters, and it
/// is drawn exactly without a path.
#[allow(clippy::too_many_arguments)]
pub fn mc_theorem1(
    f: &ScalarField,
    g: &ScalarField,
    t: f64,
    x: &[f64],
    variant: Variant,
    clock: &ClockSpec,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_dim(x)?;
    if clock.epsilon != 1.0 {
        return Err(Error::invalid(
            "the first functional uses the unscaled clock (epsilon = 1)",
        ));
    }
    let grid = clock_grid(t, clock)?;
    if variant == Variant::Btp && g.is_zero() {
        return estimate(n, seed, |s| {
            let (p, _) = terminal_draw(x, t, 1.0, &mut s.rng());
            Ok(f.value(&p))
        });
    }
    let last = grid.len() - 1;
    estimate(n, seed, |s| {
        let inner = sample_bm(&grid, 1, &[0.0], s.derive(INNER_TAG))?;
        let path = btp_path_values(x, &inner, 1.0, variant, s.derive(OUTER_TAG))?;
        let mut value = f.value(path.value(last));
        if !g.is_zero() {
            let times = grid.times();
            let mut integral = 0.0;
            let mut prev = g.value(path.value(0));
            for i in 1..=last {
                let cur = g.value(path.value(i));
                integral += 0.5 * (times[i] - times[i - 1]) * (prev + cur);
                prev = cur;
            }
            value += integral;
        }
        Ok(value)
    })
}

/// `E[f(X(eps |B(t)|)) exp(-|B(t)|/eps)]` for the chosen variant, with
/// `eps = clock.epsilon`.
pub fn mc_theorem2(
    f: &ScalarField,
    t: f64,
    x: &[f64],
    variant: Variant,
    clock: &ClockSpec,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_dim(x)?;
    let eps = clock.epsilon;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("epsilon must be positive, got {eps}")));
    }
    let grid = clock_grid(t, clock)?;
    if variant == Variant::Btp {
        return estimate(n, seed, |s| {
            let (p, clock_value) = terminal_draw(x, t, eps, &mut s.rng());
            Ok(f.value(&p) * (-clock_value / (eps * eps)).exp())
        });
    }
    let last = grid.len() - 1;
    estimate(n, seed, |s| {
        let inner = sample_bm(&grid, 1, &[0.0], s.derive(INNER_TAG))?;
        let path = btp_path_values(x, &inner, eps, variant, s.derive(OUTER_TAG))?;
        let b_abs = inner.value(last)[0].abs();
        Ok(f.value(path.value(last)) * (-b_abs / eps).exp())
    })
}

/// `E[f(X(|B(t)|)) exp(int_0^{|B(t)|} c(X(r)) dr)]` for the plain BTP.
///
/// The weight and `f` are read off the same outer path. `m_steps` fixes the
/// number of trapezoid steps on `[0, |B(t)|]`; by default it adapts to the
/// sampled clock.
pub fn mc_feynman_kac(
    f: &ScalarField,
    c: &ScalarField,
    t: f64,
    x: &[f64],
    n: usize,
    seed: u64,
    m_steps: Option<usize>,
) -> Result<McEstimate> {
    check_dim(x)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be positive, got {t}")));
    }
    if !c.is_nonpositive() {
        return Err(Error::ContractViolation(format!("potential {} must be <= 0", c.name())));
    }
    if m_steps == Some(0) {
        return Err(Error::invalid("m_steps must be at least 1"));
    }
    let sd = t.sqrt();
    estimate(n, seed, |s| {
        let mut rng = s.rng();
        let clock = (sd * normal(&mut rng)).abs();
        let m = m_steps.unwrap_or_else(|| default_fk_steps(clock));
        let (w, terminal) = fk_weight_with(c, x, clock, m, &mut rng)?;
        Ok(f.value(&terminal) * w)
    })
}

/// First coordinate of the variant at time `t`, one value per replicate.
///
/// Every variant, the plain BTP included, is built from a full inner path on
/// the clock grid so that the excursion machinery is what gets compared.
pub fn terminal_samples(
    x: &[f64],
    t: f64,
    variant: Variant,
    clock: &ClockSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_dim(x)?;
    if n == 0 {
        return Err(Error::invalid("replicate count must be positive"));
    }
    let grid = clock_grid(t, clock)?;
    let last = grid.len() - 1;
    (0..n as u64)
        .into_par_iter()
        .map(|r| {
            let s = RngStream::new(seed, r);
            let inner = sample_bm(&grid, 1, &[0.0], s.derive(INNER_TAG))?;
            let path = btp_path_values(x, &inner, clock.epsilon, variant, s.derive(OUTER_TAG))?;
            Ok(path.value(last)[0])
        })
        .collect()
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS samples must be nonempty"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::invalid("KS samples must not contain NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Asymptotic critical value `c(alpha) sqrt((n+m)/(n m))` of the two-sample
/// statistic, with `c(alpha) = sqrt(-ln(alpha/2)/2)`.
pub fn ks_critical_value(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::normal_cdf;

    fn one() -> ScalarField {
        ScalarField::constant(1.0)
    }

    #[test]
    fn constant_functionals_are_exact() {
        let clock = ClockSpec::unit(1.0).unwrap();
        let est = mc_theorem1(&one(), &ScalarField::zero(), 1.0, &[0.0], Variant::Btp, &clock, 1000, 1).unwrap();
        assert_eq!((est.mean, est.stderr), (1.0, 0.0));
        let clock = ClockSpec::new(1.0, 1.0, 50).unwrap();
        let est = mc_theorem1(&ScalarField::zero(), &one(), 0.6, &[0.0], Variant::Ebtp, &clock, 200, 1).unwrap();
        assert!((est.mean - 0.6).abs() < 1e-12 && est.stderr < 1e-12);
        let est = mc_theorem2(&ScalarField::zero(), 1.0, &[0.0], Variant::Btp, &clock, 100, 1).unwrap();
        assert_eq!((est.mean, est.stderr), (0.0, 0.0));
    }

    #[test]
    fn theorem1_rejects_bad_times() {
        let clock = ClockSpec::new(1.0, 1.0, 10).unwrap();
        let f = ScalarField::cos();
        let z = ScalarField::zero();
        assert!(mc_theorem1(&f, &z, 1.5, &[0.0], Variant::Btp, &clock, 10, 1).is_err());
        assert!(mc_theorem1(&f, &z, 0.35, &[0.0], Variant::Btp, &clock, 10, 1).is_err());
        assert!(mc_theorem1(&f, &z, 0.3, &[0.0], Variant::Btp, &clock, 0, 1).is_err());
        let scaled = ClockSpec::new(0.5, 1.0, 10).unwrap();
        assert!(mc_theorem1(&f, &z, 0.3, &[0.0], Variant::Btp, &scaled, 10, 1).is_err());
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let clock = ClockSpec::new(1.0, 1.0, 20).unwrap();
        let run = |seed| {
            mc_theorem1(
                &ScalarField::cos(),
                &ScalarField::gauss(),
                1.0,
                &[0.1],
                Variant::Kebtp(2),
                &clock,
                500,
                seed,
            )
            .unwrap()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3).mean, run(4).mean);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        assert_eq!(pool.install(|| run(3)), run(3));
    }

    #[test]
    fn theorem1_cosine_matches_closed_form() {
        let clock = ClockSpec::unit(1.0).unwrap();
        let est = mc_theorem1(
            &ScalarField::cos(),
            &ScalarField::zero(),
            1.0,
            &[0.0],
            Variant::Btp,
            &clock,
            1_000_000,
            42,
        )
        .unwrap();
        let want = 2.0 * (0.125f64).exp() * normal_cdf(-0.5);
        assert!(est.agrees_with(want, 3.0), "{est:?} vs {want}");
    }

    #[test]
    fn theorem2_examples() {
        let clock = ClockSpec::unit(1.0).unwrap();
        let est = mc_theorem2(&one(), 1.0, &[0.0], Variant::Btp, &clock, 1_000_000, 7).unwrap();
        let want = 2.0 * 0.5f64.exp() * normal_cdf(-1.0);
        assert!(est.agrees_with(want, 3.0), "{est:?} vs {want}");
        let est = mc_theorem2(&ScalarField::cos(), 1.0, &[0.0], Variant::Btp, &clock, 1_000_000, 8).unwrap();
        let want = 2.0 * (9.0f64 / 8.0).exp() * normal_cdf(-1.5);
        assert!(est.agrees_with(want, 3.0), "{est:?} vs {want}");
    }

    #[test]
    fn feynman_kac_examples() {
        let c = ScalarField::neg_constant(1.0).unwrap();
        let est = mc_feynman_kac(&one(), &c, 1.0, &[0.0], 200_000, 9, None).unwrap();
        let want = 2.0 * 0.5f64.exp() * normal_cdf(-1.0);
        assert!(est.agrees_with(want, 3.0), "{est:?}");
        assert!(matches!(
            mc_feynman_kac(&one(), &ScalarField::cos(), 1.0, &[0.0], 10, 1, None),
            Err(Error::ContractViolation(_))
        ));
        // c = 0 estimates the same quantity as the first functional.
        let fk = mc_feynman_kac(
            &ScalarField::cos(),
            &ScalarField::zero(),
            1.0,
            &[0.0],
            100_000,
            10,
            Some(4),
        )
        .unwrap();
        let clock = ClockSpec::unit(1.0).unwrap();
        let t1 = mc_theorem1(
            &ScalarField::cos(),
            &ScalarField::zero(),
            1.0,
            &[0.0],
            Variant::Btp,
            &clock,
            100_000,
            11,
        )
        .unwrap();
        assert!(fk.agrees_with_estimate(&t1, 3.0));
    }

    #[test]
    fn stderr_halves_when_n_quadruples() {
        let clock = ClockSpec::unit(1.0).unwrap();
        let z = ScalarField::zero();
        let small = mc_theorem1(&ScalarField::cos(), &z, 1.0, &[0.0], Variant::Btp, &clock, 50_000, 100).unwrap();
        let big = mc_theorem1(&ScalarField::cos(), &z, 1.0, &[0.0], Variant::Btp, &clock, 200_000, 101).unwrap();
        let ratio = small.stderr / big.stderr;
        assert!((ratio / 2.0 - 1.0).abs() <= 0.2, "ratio {ratio}");
    }

    #[test]
    fn estimates_respect_sup_bounds() {
        let clock = ClockSpec::new(1.0, 2.0, 40).unwrap();
        let f = ScalarField::gauss();
        let g = ScalarField::neg_cauchy();
        let e = mc_theorem1(&f, &g, 2.0, &[0.5], Variant::Ebtp, &clock, 2000, 5).unwrap();
        assert!(e.mean.abs() <= f.sup_norm() + 2.0 * g.sup_norm());
        let e = mc_theorem2(&f, 2.0, &[0.5], Variant::Kebtp(3), &clock, 2000, 5).unwrap();
        assert!(e.mean.abs() <= f.sup_norm());
        let e = mc_feynman_kac(&f, &g, 2.0, &[0.5], 2000, 5, None).unwrap();
        assert!(e.mean.abs() <= f.sup_norm());
    }

    #[test]
    fn ks_examples() {
        let a = [0.3, 1.2, -0.4, 2.2];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[1.0]).unwrap(), 0.5);
        assert!(ks_two_sample(&[], &[1.0]).is_err());
        assert!(ks_two_sample(&[f64::NAN], &[1.0]).is_err());
        assert!((ks_critical_value(0.01, 100_000, 100_000) - 1.6276 * (2e-5f64).sqrt()).abs() < 1e-5);
    }

    /// Kolmogorov survival function `Q(l) = 2 sum (-1)^{j-1} exp(-2 j^2 l^2)`.
    fn kolmogorov_q(l: f64) -> f64 {
        (1..100)
            .map(|j| {
                let j = j as f64;
                2.0 * if j as i64 % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * j * j * l * l).exp()
            })
            .sum()
    }

    #[test]
    fn ks_critical_value_matches_kolmogorov_series() {
        let n = 100_000;
        let crit = ks_critical_value(0.01, n, n);
        let lambda = crit * ((n * n) as f64 / (2 * n) as f64).sqrt();
        assert!((kolmogorov_q(lambda) - 0.01).abs() < 1e-5);
    }

    #[test]
    fn ks_rejection_rate_under_null() {
        // Independent equal-law samples exceed the 0.01 critical value rarely.
        let (m, reps) = (2_000usize, 300u64);
        let crit = ks_critical_value(0.01, m, m);
        let draw = |seed: u64, r: u64| -> Vec<f64> {
            let mut rng = RngStream::new(seed, r).rng();
            (0..m).map(|_| normal(&mut rng)).collect()
        };
        let rejections = (0..reps)
            .filter(|&r| ks_two_sample(&draw(1, r), &draw(2, r)).unwrap() >= crit)
            .count();
        // Binomial(300, 0.01): P(X >= 9) < 0.001.
        assert!(rejections <= 8, "{rejections} rejections");
    }

    #[test]
    fn ks_large_null_samples() {
        let n = 100_000;
        let draw = |seed: u64| -> Vec<f64> { (0..n).map(|r| normal(&mut RngStream::new(seed, r).rng())).collect() };
        let d = ks_two_sample(&draw(5), &draw(6)).unwrap();
        assert!(d < ks_critical_value(0.01, n as usize, n as usize));
    }
}

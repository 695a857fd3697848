//! Brownian-time processes and their excursion variants.
//!
//! All variants evaluate an outer Brownian motion from `x` at the clock
//! `eps * |B(r)|`. They differ only in which outer copy is read on each
//! excursion of `|B|`:
//!
//! * `Btp`: one copy for the whole path.
//! * `Kebtp(k)`: `k` copies; each excursion picks one uniformly at random.
//! * `Ebtp`: a fresh copy for every excursion.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::paths::{bm_at_sorted_times, excursion_decompose, SamplePath};
use crate::rng::{normal, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Btp,
    Kebtp(usize),
    Ebtp,
}

impl Variant {
    pub fn kebtp(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("kEBTP needs k >= 1"));
        }
        Ok(Variant::Kebtp(k))
    }

    pub fn k(&self) -> Option<usize> {
        match self {
            Variant::Kebtp(k) => Some(*k),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Variant::Btp => "BTP",
            Variant::Kebtp(_) => "KEBTP",
            Variant::Ebtp => "EBTP",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Kebtp(k) => write!(f, "KEBTP({k})"),
            v => f.write_str(v.kind()),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    /// Accepts `btp`, `ebtp`, `kebtp:K` and `KEBTP(K)`, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "btp" => Ok(Variant::Btp),
            "ebtp" => Ok(Variant::Ebtp),
            _ => {
                let k = lower
                    .strip_prefix("kebtp:")
                    .or_else(|| lower.strip_prefix("kebtp(").and_then(|r| r.strip_suffix(')')))
                    .ok_or_else(|| Error::invalid(format!("unknown variant {s:?}")))?;
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad k in variant {s:?}")))?;
                Variant::kebtp(k)
            }
        }
    }
}

/// Clock scale and the inner-path discretisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockSpec {
    pub epsilon: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl ClockSpec {
    pub fn new(epsilon: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::invalid(format!("t_end must be positive, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(Error::invalid("n_steps must be at least 1"));
        }
        Ok(Self {
            epsilon,
            t_end,
            n_steps,
        })
    }

    /// Unit clock on `[0, t_end]` with the default of 1000 steps.
    pub fn unit(t_end: f64) -> Result<Self> {
        Self::new(1.0, t_end, 1000)
    }
}

/// Exact draw of the BTP at a single time: returns the point
/// `X^x(eps |B(t)|)` and the clock value `eps |B(t)|`.
pub fn btp_terminal_sample(x: &[f64], t: f64, epsilon: f64, stream: RngStream) -> Result<(Vec<f64>, f64)> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be >= 0, got {t}")));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if x.is_empty() {
        return Err(Error::invalid("start point must have positive dimension"));
    }
    let mut rng = stream.rng();
    Ok(terminal_draw(x, t, epsilon, &mut rng))
}

pub(crate) fn terminal_draw<R: Rng + ?Sized>(x: &[f64], t: f64, epsilon: f64, rng: &mut R) -> (Vec<f64>, f64) {
    let clock = epsilon * (t.sqrt() * normal(rng)).abs();
    let sd = clock.sqrt();
    let point = x.iter().map(|&xi| xi + sd * normal(rng)).collect();
    (point, clock)
}

const CHOICE_TAG: u64 = 0;
const COPY_TAG_BASE: u64 = 1;

/// Values of the chosen variant at every node of the inner path's grid.
///
/// `inner_bm` must be the unreflected inner Brownian path; excursions are
/// read off its sign changes. Nodes where the inner path is zero carry `x`.
pub fn btp_path_values(
    x: &[f64],
    inner_bm: &SamplePath,
    epsilon: f64,
    variant: Variant,
    stream: RngStream,
) -> Result<SamplePath> {
    if inner_bm.dim() != 1 {
        return Err(Error::invalid(format!(
            "inner clock path must be one-dimensional, got dim {}",
            inner_bm.dim()
        )));
    }
    if x.is_empty() {
        return Err(Error::invalid("start point must have positive dimension"));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if let Variant::Kebtp(0) = variant {
        return Err(Error::invalid("kEBTP needs k >= 1"));
    }
    let n = inner_bm.len();
    let dim = x.len();
    let excursions = excursion_decompose(inner_bm)?;

    // Copy index per excursion.
    let copies: Vec<usize> = match variant {
        Variant::Btp => vec![0; excursions.len()],
        Variant::Kebtp(k) => {
            let mut rng = stream.derive(CHOICE_TAG).rng();
            (0..excursions.len()).map(|_| rng.random_range(0..k)).collect()
        }
        Variant::Ebtp => (0..excursions.len()).collect(),
    };
    let n_groups = copies.iter().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_groups];
    for (range, &g) in excursions.intervals().iter().zip(&copies) {
        groups[g].extend(range.clone());
    }

    let clock: Vec<f64> = inner_bm.values().iter().map(|b| epsilon * b.abs()).collect();
    let mut values: Vec<f64> = x.iter().copied().cycle().take(n * dim).collect();
    let mut times = Vec::new();
    let mut buf = Vec::new();
    for (g, mut nodes) in groups.into_iter().enumerate() {
        if nodes.is_empty() {
            continue;
        }
        // Sample the copy jointly at its sorted clock values, then scatter
        // back to node order.
        nodes.sort_by(|&a, &b| clock[a].total_cmp(&clock[b]).then(a.cmp(&b)));
        times.clear();
        times.extend(nodes.iter().map(|&i| clock[i]));
        buf.resize(nodes.len() * dim, 0.0);
        let mut rng = stream.derive(COPY_TAG_BASE + g as u64).rng();
        bm_at_sorted_times(&times, x, &mut rng, &mut buf);
        for (pos, &node) in nodes.iter().enumerate() {
            values[node * dim..(node + 1) * dim].copy_from_slice(&buf[pos * dim..(pos + 1) * dim]);
        }
    }
    SamplePath::new(inner_bm.grid().clone(), dim, values)
}

/// Default number of steps for the Feynman–Kac integral on `[0, s_max]`.
pub fn default_fk_steps(s_max: f64) -> usize {
    ((s_max / 0.01).ceil() as usize).max(64)
}

/// Samples one outer Brownian path from `x` on a uniform `m_steps` grid of
/// `[0, s_max]` and returns `exp(int_0^{s_max} c(X(r)) dr)` (trapezoid rule)
/// together with the path's terminal point.
pub fn fk_weight(c: &ScalarField, x: &[f64], s_max: f64, m_steps: usize, stream: RngStream) -> Result<(f64, Vec<f64>)> {
    if !(s_max >= 0.0) || !s_max.is_finite() {
        return Err(Error::invalid(format!("s_max must be >= 0, got {s_max}")));
    }
    if m_steps == 0 {
        return Err(Error::invalid("m_steps must be at least 1"));
    }
    if x.is_empty() {
        return Err(Error::invalid("start point must have positive dimension"));
    }
    fk_weight_with(c, x, s_max, m_steps, &mut stream.rng())
}

pub(crate) fn fk_weight_with<R: Rng + ?Sized>(
    c: &ScalarField,
    x: &[f64],
    s_max: f64,
    m_steps: usize,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    let check = |v: f64, at: &[f64]| {
        if v > 0.0 {
            Err(Error::ContractViolation(format!(
                "potential {} is positive ({v}) at {at:?}",
                c.name()
            )))
        } else {
            Ok(v)
        }
    };
    let mut pos = x.to_vec();
    let c0 = check(c.value(&pos), &pos)?;
    if s_max == 0.0 {
        return Ok((1.0, pos));
    }
    let h = s_max / m_steps as f64;
    let sd = h.sqrt();
    let mut integral = 0.5 * c0;
    for step in 1..=m_steps {
        for p in pos.iter_mut() {
            *p += sd * normal(rng);
        }
        let cv = check(c.value(&pos), &pos)?;
        integral += if step == m_steps { 0.5 * cv } else { cv };
    }
    Ok(((integral * h).exp(), pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{ks_critical_value, ks_two_sample};
    use crate::paths::{make_uniform_grid, sample_bm, TimeGrid};
    use crate::semigroup::halfnormal_exp_moment;

    #[test]
    fn variant_parsing() {
        assert_eq!("btp".parse::<Variant>().unwrap(), Variant::Btp);
        assert_eq!("EBTP".parse::<Variant>().unwrap(), Variant::Ebtp);
        assert_eq!("kebtp:5".parse::<Variant>().unwrap(), Variant::Kebtp(5));
        assert_eq!("KEBTP(2)".parse::<Variant>().unwrap(), Variant::Kebtp(2));
        assert!("kebtp:0".parse::<Variant>().is_err());
        assert!("snake".parse::<Variant>().is_err());
        assert_eq!(Variant::Kebtp(3).to_string(), "KEBTP(3)");
    }

    #[test]
    fn clock_validation() {
        assert!(ClockSpec::new(0.0, 1.0, 10).is_err());
        assert!(ClockSpec::new(1.0, 0.0, 10).is_err());
        assert!(ClockSpec::new(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn terminal_sample_small_time() {
        let (p, clock) = btp_terminal_sample(&[0.5, -1.0], 1e-14, 1.0, RngStream::new(1, 1)).unwrap();
        assert!(clock < 1e-5);
        assert!((p[0] - 0.5).abs() < 1e-2 && (p[1] + 1.0).abs() < 1e-2);
        let (p, clock) = btp_terminal_sample(&[0.5], 0.0, 1.0, RngStream::new(1, 1)).unwrap();
        assert_eq!((p[0], clock), (0.5, 0.0));
    }

    #[test]
    fn terminal_sample_second_moment() {
        let n = 1_000_000u64;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for r in 0..n {
            let (p, _) = btp_terminal_sample(&[0.0], 1.0, 1.0, RngStream::new(17, r)).unwrap();
            let v = p[0] * p[0];
            sum += v;
            sum2 += v * v;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let se = ((sum2 / nf - mean * mean) / nf).sqrt();
        let want = (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean - want).abs() < 3.0 * se, "{mean} vs {want} (se {se})");
    }

    #[test]
    fn epsilon_scales_clock_linearly() {
        for r in 0..100 {
            let s = RngStream::new(5, r);
            let (_, c1) = btp_terminal_sample(&[0.0], 1.0, 1.0, s).unwrap();
            let (_, c2) = btp_terminal_sample(&[0.0], 1.0, 2.0, s).unwrap();
            assert!((c2 - 2.0 * c1).abs() <= 1e-15 * c2.max(1.0));
        }
    }

    #[test]
    fn eps_scaled_terminal_law() {
        // Gaussian(x, eps |N(0,t)|): check E X^2 = eps sqrt(2t/pi) via KS
        // against an independent construction.
        let (eps, t, n) = (0.5, 2.0, 50_000u64);
        let a: Vec<f64> = (0..n)
            .map(|r| btp_terminal_sample(&[0.0], t, eps, RngStream::new(1, r)).unwrap().0[0])
            .collect();
        let b: Vec<f64> = (0..n)
            .map(|r| {
                let mut rng = RngStream::new(2, r).rng();
                let clock = eps * t.sqrt() * normal(&mut rng).abs();
                clock.sqrt() * normal(&mut rng)
            })
            .collect();
        let d = ks_two_sample(&a, &b).unwrap();
        assert!(d < ks_critical_value(0.01, a.len(), b.len()));
    }

    fn inner(values: &[f64]) -> SamplePath {
        let grid = make_uniform_grid(1.0, values.len() - 1).unwrap();
        SamplePath::scalar(grid, values.to_vec()).unwrap()
    }

    #[test]
    fn frozen_clock_gives_constant_path() {
        let p = inner(&[0.0; 6]);
        for v in [Variant::Btp, Variant::Kebtp(3), Variant::Ebtp] {
            let out = btp_path_values(&[1.0, 2.0], &p, 1.0, v, RngStream::new(0, 0)).unwrap();
            for i in 0..6 {
                assert_eq!(out.value(i), &[1.0, 2.0]);
            }
        }
    }

    #[test]
    fn kebtp_one_equals_btp() {
        let grid = make_uniform_grid(1.0, 200).unwrap();
        for r in 0..20 {
            let b = sample_bm(&grid, 1, &[0.0], RngStream::new(9, r)).unwrap();
            let s = RngStream::new(10, r);
            let btp = btp_path_values(&[0.3], &b, 1.0, Variant::Btp, s).unwrap();
            let k1 = btp_path_values(&[0.3], &b, 1.0, Variant::Kebtp(1), s).unwrap();
            assert_eq!(btp, k1);
        }
    }

    #[test]
    fn zero_nodes_carry_start_point() {
        let p = inner(&[0.0, 0.4, -0.2, 0.0, 0.5, 0.0]);
        for v in [Variant::Btp, Variant::Kebtp(2), Variant::Ebtp] {
            let out = btp_path_values(&[-0.7], &p, 1.0, v, RngStream::new(3, 3)).unwrap();
            for i in [0, 3, 5] {
                assert_eq!(out.value(i), &[-0.7]);
            }
            for i in [1, 2, 4] {
                assert_ne!(out.value(i), &[-0.7]);
            }
        }
    }

    #[test]
    fn btp_reads_one_copy_at_repeated_clock_values() {
        // |B| takes the same value on different excursions: BTP must return
        // the same point, EBTP generally does not.
        let p = inner(&[0.0, 0.5, -0.5]);
        let btp = btp_path_values(&[0.0], &p, 1.0, Variant::Btp, RngStream::new(4, 4)).unwrap();
        assert_eq!(btp.value(1), btp.value(2));
        let ebtp = btp_path_values(&[0.0], &p, 1.0, Variant::Ebtp, RngStream::new(4, 4)).unwrap();
        assert_ne!(ebtp.value(1), ebtp.value(2));
    }

    #[test]
    fn path_values_reject_bad_inner_path() {
        let g = make_uniform_grid(1.0, 4).unwrap();
        let two_d = sample_bm(&g, 2, &[0.0, 0.0], RngStream::new(0, 0)).unwrap();
        assert!(btp_path_values(&[0.0], &two_d, 1.0, Variant::Btp, RngStream::new(0, 0)).is_err());
        let single = SamplePath::scalar(TimeGrid::new(vec![0.0]).unwrap(), vec![0.0]).unwrap();
        assert!(btp_path_values(&[], &single, 1.0, Variant::Btp, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn variants_share_terminal_marginal() {
        let grid = make_uniform_grid(1.0, 100).unwrap();
        let n = 20_000u64;
        let terminal = |v: Variant, seed: u64| -> Vec<f64> {
            (0..n)
                .map(|r| {
                    let b = sample_bm(&grid, 1, &[0.0], RngStream::new(seed, r)).unwrap();
                    let out = btp_path_values(&[0.0], &b, 1.0, v, RngStream::new(seed + 1000, r)).unwrap();
                    out.value(100)[0]
                })
                .collect()
        };
        let btp = terminal(Variant::Btp, 1);
        let ebtp = terminal(Variant::Ebtp, 2);
        let crit = ks_critical_value(0.01, btp.len(), ebtp.len());
        assert!(ks_two_sample(&btp, &ebtp).unwrap() < crit);
    }

    #[test]
    fn fk_weight_examples() {
        let minus_one = ScalarField::neg_constant(1.0).unwrap();
        let (w, term) = fk_weight(&minus_one, &[0.2], 0.0, 10, RngStream::new(0, 0)).unwrap();
        assert_eq!((w, term[0]), (1.0, 0.2));
        for r in 0..10 {
            let (w, _) = fk_weight(&minus_one, &[0.0, 1.0], 0.7, 33, RngStream::new(1, r)).unwrap();
            assert!((w - (-0.7f64).exp()).abs() < 1e-14);
        }
        assert!(matches!(
            fk_weight(&ScalarField::cos(), &[0.0], 1.0, 10, RngStream::new(0, 0)),
            Err(Error::ContractViolation(_))
        ));
        assert_eq!(default_fk_steps(0.1), 64);
        assert_eq!(default_fk_steps(2.0), 200);
    }

    #[test]
    fn fk_weight_mean_with_random_clock() {
        let c = ScalarField::neg_constant(1.0).unwrap();
        let n = 1_000_000u64;
        let (mut s, mut s2) = (0.0, 0.0);
        for r in 0..n {
            let mut rng = RngStream::new(23, r).rng();
            let clock = normal(&mut rng).abs();
            let (w, _) = fk_weight_with(&c, &[0.0], clock, 1, &mut rng).unwrap();
            s += w;
            s2 += w * w;
        }
        let nf = n as f64;
        let mean = s / nf;
        let se = ((s2 / nf - mean * mean) / nf).sqrt();
        let want = halfnormal_exp_moment(1.0, 1.0).unwrap();
        assert!((mean - want).abs() < 3.0 * se);
        assert!((want - 0.5232).abs() < 1e-4);
    }

    #[test]
    fn fk_weight_is_in_unit_interval() {
        for r in 0..200 {
            let (w, _) = fk_weight(&ScalarField::neg_cauchy(), &[0.1], 1.5, 64, RngStream::new(7, r)).unwrap();
            assert!(w > 0.0 && w <= 1.0);
        }
    }
}

//! One-dimensional quadrature building blocks.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Nodes and weights of an n-point Gauss rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> GaussRule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    GaussRule { nodes, weights }
}

/// Gauss–Hermite rule for the weight `exp(-x^2)` on the real line.
pub fn gauss_hermite(n: usize) -> GaussRule {
    assert!(n >= 1);
    let pim4 = PI.powf(-0.25);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        // Initial guesses for the largest roots first.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        let w = 2.0 / (pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    nodes.reverse();
    weights.reverse();
    GaussRule { nodes, weights }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]` to an
/// absolute tolerance. Subintervals are bisected until each meets its share
/// of the tolerance or a depth of 40 is reached.
pub fn integrate_adaptive(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (val, err) = gk15(f, a, b);
        if err <= tol || depth >= 40 {
            return val;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    rec(&mut f, a, b, tol, 0)
}

/// Composite Gauss–Legendre nodes and weights on `[a, b]` with `panels`
/// equal panels of `order` points each.
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> GaussRule {
    let base = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(lo + 0.5 * h * (x + 1.0));
            weights.push(0.5 * h * w);
        }
    }
    GaussRule { nodes, weights }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// `exp(z^2/2) * Phi(-z)` for `z >= 0`, stable for large `z`.
pub fn mills_scaled_tail(z: f64) -> f64 {
    if z < 26.0 {
        (0.5 * z * z).exp() * normal_cdf(-z)
    } else {
        // Asymptotic Mills ratio: phi(z)/z * (1 - 1/z^2 + 3/z^4 - 15/z^6).
        let z2 = z * z;
        (1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)) / (z * (2.0 * PI).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let r = gauss_legendre(8);
        let total: f64 = r.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        // x^14 integrates to 2/15 exactly with 8 points.
        let v: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(14)).sum();
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_moments() {
        for n in [10, 20, 40, 60] {
            let r = gauss_hermite(n);
            let sp = PI.sqrt();
            let m0: f64 = r.weights.iter().sum();
            let m2: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x * x).sum();
            let m4: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(4)).sum();
            assert!((m0 - sp).abs() < 1e-13, "n={n} m0={m0}");
            assert!((m2 - sp / 2.0).abs() < 1e-13);
            assert!((m4 - 0.75 * sp).abs() < 1e-12);
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn adaptive_handles_sqrt_singularity() {
        // Bisection cannot fully resolve the endpoint; the depth cap leaves
        // an error of order sqrt(2^-40).
        let v = integrate_adaptive(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12);
        assert!((v - 2.0).abs() < 1e-5, "{v}");
        let v = integrate_adaptive(|x| x.exp(), 0.0, 1.0, 1e-13);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
    }

    #[test]
    fn mills_branches_agree() {
        let z: f64 = 25.999;
        let direct = (0.5 * z * z).exp() * normal_cdf(-z);
        let z2 = z * z;
        let asym = (1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)) / (z * (2.0 * PI).sqrt());
        assert!((direct / asym - 1.0).abs() < 1e-8);
    }
}

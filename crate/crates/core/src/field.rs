//! Named test functions with closed-form derivatives.
//!
//! Registry names:
//!
//! | name           | value                      |
//! |----------------|----------------------------|
//! | `const:K`      | `K`                        |
//! | `neg-const:L`  | `-L` (requires `L >= 0`)   |
//! | `cos`          | `prod_i cos(x_i)`          |
//! | `gauss`        | `exp(-|x|^2/2)`            |
//! | `neg-gauss`    | `-exp(-|x|^2/2)`           |
//! | `neg-cauchy`   | `-1/(1+|x|^2)`             |
//!
//! All entries are bounded with bounded, Hölder second derivatives, and are
//! defined on `R^d` for any `d`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Radial {
    /// `F(rho) = exp(-rho/2)`
    Gauss,
    /// `F(rho) = 1/(1+rho)`
    Cauchy,
}

impl Radial {
    /// `F` and its first four derivatives in `rho = |x|^2`.
    fn derivatives(self, rho: f64) -> [f64; 5] {
        match self {
            Radial::Gauss => {
                let e = (-0.5 * rho).exp();
                [e, -0.5 * e, 0.25 * e, -0.125 * e, 0.0625 * e]
            }
            Radial::Cauchy => {
                let q = 1.0 / (1.0 + rho);
                let q2 = q * q;
                [q, -q2, 2.0 * q2 * q, -6.0 * q2 * q2, 24.0 * q2 * q2 * q]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Const(f64),
    Cos,
    Radial { shape: Radial, sign: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    name: String,
    kind: Kind,
}

impl ScalarField {
    pub fn constant(k: f64) -> Self {
        Self {
            name: format!("const:{k}"),
            kind: Kind::Const(k),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn neg_constant(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "neg-const needs a finite lambda >= 0, got {lambda}"
            )));
        }
        Ok(Self {
            name: format!("neg-const:{lambda}"),
            kind: Kind::Const(-lambda),
        })
    }

    pub fn cos() -> Self {
        Self {
            name: "cos".into(),
            kind: Kind::Cos,
        }
    }

    pub fn gauss() -> Self {
        Self::radial("gauss", Radial::Gauss, 1.0)
    }

    pub fn neg_gauss() -> Self {
        Self::radial("neg-gauss", Radial::Gauss, -1.0)
    }

    pub fn neg_cauchy() -> Self {
        Self::radial("neg-cauchy", Radial::Cauchy, -1.0)
    }

    fn radial(name: &str, shape: Radial, sign: f64) -> Self {
        Self {
            name: name.into(),
            kind: Kind::Radial { shape, sign },
        }
    }

    /// Looks a function up by registry name.
    pub fn from_name(name: &str) -> Result<Self> {
        let parse_num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::invalid(format!("bad numeric parameter in function name {name:?}")))
        };
        match name.trim() {
            "cos" => Ok(Self::cos()),
            "gauss" => Ok(Self::gauss()),
            "neg-gauss" => Ok(Self::neg_gauss()),
            "neg-cauchy" => Ok(Self::neg_cauchy()),
            n => {
                if let Some(k) = n.strip_prefix("const:") {
                    Ok(Self::constant(parse_num(k)?))
                } else if let Some(l) = n.strip_prefix("neg-const:") {
                    Self::neg_constant(parse_num(l)?)
                } else {
                    Err(Error::invalid(format!("unknown registry function {name:?}")))
                }
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self.kind {
            Kind::Const(k) => k,
            Kind::Cos => x.iter().map(|v| v.cos()).product(),
            Kind::Radial { shape, sign } => sign * shape.derivatives(norm_sq(x))[0],
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            Kind::Const(_) => vec![0.0; x.len()],
            Kind::Cos => (0..x.len())
                .map(|i| {
                    x.iter()
                        .enumerate()
                        .map(|(j, v)| if i == j { -v.sin() } else { v.cos() })
                        .product()
                })
                .collect(),
            Kind::Radial { shape, sign } => {
                let d1 = shape.derivatives(norm_sq(x))[1];
                x.iter().map(|v| sign * 2.0 * d1 * v).collect()
            }
        }
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        match self.kind {
            Kind::Const(_) => 0.0,
            Kind::Cos => -d * self.value(x),
            Kind::Radial { shape, sign } => {
                // For F(|x|^2): Laplacian = 4 rho F'' + 2 d F'.
                let rho = norm_sq(x);
                let f = shape.derivatives(rho);
                sign * (4.0 * rho * f[2] + 2.0 * d * f[1])
            }
        }
    }

    pub fn bilaplacian(&self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        match self.kind {
            Kind::Const(_) => 0.0,
            Kind::Cos => d * d * self.value(x),
            Kind::Radial { shape, sign } => {
                let rho = norm_sq(x);
                let f = shape.derivatives(rho);
                sign * (4.0 * rho * ((8.0 + 2.0 * d) * f[3] + 4.0 * rho * f[4])
                    + 2.0 * d * ((4.0 + 2.0 * d) * f[2] + 4.0 * rho * f[3]))
            }
        }
    }

    /// `sup |f|` over `R^d`.
    pub fn sup_norm(&self) -> f64 {
        match self.kind {
            Kind::Const(k) => k.abs(),
            _ => 1.0,
        }
    }

    /// `sup |Laplacian f|` over `R^dim`, for `dim <= 4`.
    pub fn sup_laplacian(&self, dim: usize) -> f64 {
        let d = dim as f64;
        match self.kind {
            Kind::Const(_) => 0.0,
            Kind::Cos => d,
            // Both attain their extreme Laplacian at the origin for d <= 4.
            Kind::Radial {
                shape: Radial::Gauss, ..
            } => d,
            Kind::Radial {
                shape: Radial::Cauchy, ..
            } => 2.0 * d,
        }
    }

    /// Whether the function is `<= 0` everywhere.
    pub fn is_nonpositive(&self) -> bool {
        match self.kind {
            Kind::Const(k) => k <= 0.0,
            Kind::Cos => false,
            Kind::Radial { sign, .. } => sign < 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Const(k) if k == 0.0)
    }

    /// The constant value, if the function is constant.
    pub fn as_constant(&self) -> Option<f64> {
        match self.kind {
            Kind::Const(k) => Some(k),
            _ => None,
        }
    }

    /// One-dimensional cosine-mode content `[(k, amplitude)]` when the
    /// function is a finite combination of `cos(k x)`.
    pub fn cosine_modes(&self) -> Option<Vec<(usize, f64)>> {
        match self.kind {
            Kind::Const(0.0) => Some(vec![]),
            Kind::Const(k) => Some(vec![(0, k)]),
            Kind::Cos => Some(vec![(1, 1.0)]),
            Kind::Radial { .. } => None,
        }
    }

    /// Whether the function is `2 pi`-periodic in every coordinate.
    pub fn is_periodic(&self) -> bool {
        !matches!(self.kind, Kind::Radial { .. })
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for ScalarField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_name(s)
    }
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all() -> Vec<ScalarField> {
        ["const:2.5", "neg-const:0.5", "cos", "gauss", "neg-gauss", "neg-cauchy"]
            .iter()
            .map(|n| ScalarField::from_name(n).unwrap())
            .collect()
    }

    fn fd_laplacian(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> f64 {
        let mut y = x.to_vec();
        let mut lap = 0.0;
        for i in 0..x.len() {
            y[i] = x[i] + h;
            let p = f(&y);
            y[i] = x[i] - h;
            let m = f(&y);
            y[i] = x[i];
            lap += (p - 2.0 * f(x) + m) / (h * h);
        }
        lap
    }

    #[test]
    fn registry_parsing() {
        assert_eq!(ScalarField::from_name("const:3").unwrap().value(&[1.0]), 3.0);
        assert_eq!(ScalarField::from_name("neg-const:2").unwrap().value(&[1.0]), -2.0);
        assert!(ScalarField::from_name("neg-const:-1").is_err());
        assert!(ScalarField::from_name("sin").is_err());
        assert!(ScalarField::from_name("const:abc").is_err());
        assert_eq!("neg-cauchy".parse::<ScalarField>().unwrap().name(), "neg-cauchy");
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let points: [&[f64]; 4] = [&[0.0], &[0.7], &[-1.3, 0.4], &[0.2, -0.5, 1.1]];
        for f in all() {
            for x in points {
                let h = 1e-4;
                let mut g = f.gradient(x);
                for (i, gi) in g.iter_mut().enumerate() {
                    let mut y = x.to_vec();
                    y[i] += h;
                    let p = f.value(&y);
                    y[i] -= 2.0 * h;
                    let m = f.value(&y);
                    assert!((*gi - (p - m) / (2.0 * h)).abs() < 1e-7, "{} grad at {x:?}", f.name());
                }
                let lap_fd = fd_laplacian(|y| f.value(y), x, 1e-4);
                assert!((f.laplacian(x) - lap_fd).abs() < 1e-5, "{} lap at {x:?}", f.name());
                let bilap_fd = fd_laplacian(|y| f.laplacian(y), x, 1e-3);
                assert!(
                    (f.bilaplacian(x) - bilap_fd).abs() < 1e-4,
                    "{} bilap at {x:?}",
                    f.name()
                );
            }
        }
    }

    #[test]
    fn gauss_fourth_derivative_is_hermite() {
        for x in [0.0_f64, 0.5, 1.7, -2.2] {
            let he4 = x.powi(4) - 6.0 * x * x + 3.0;
            assert!((ScalarField::gauss().bilaplacian(&[x]) - he4 * (-0.5 * x * x).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn sup_bounds_hold_on_samples() {
        for f in all() {
            for d in 1..=3 {
                for i in -40..=40 {
                    let x: Vec<f64> = (0..d).map(|j| 0.1 * i as f64 + 0.37 * j as f64).collect();
                    assert!(f.value(&x).abs() <= f.sup_norm() + 1e-15);
                    assert!(
                        f.laplacian(&x).abs() <= f.sup_laplacian(d) + 1e-12,
                        "{} d={d}",
                        f.name()
                    );
                }
            }
        }
    }

    #[test]
    fn sign_metadata() {
        assert!(ScalarField::neg_cauchy().is_nonpositive());
        assert!(ScalarField::neg_gauss().is_nonpositive());
        assert!(ScalarField::zero().is_nonpositive());
        assert!(!ScalarField::cos().is_nonpositive());
        assert!(!ScalarField::constant(1.0).is_nonpositive());
        assert!(ScalarField::zero().is_zero());
    }
}

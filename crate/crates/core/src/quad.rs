//! Gauss–Legendre panel quadrature on finite and semi-infinite intervals.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const ORDER: usize = 16;

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for k in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> Result<f64>>(&self, mut f: F, a: f64, b: f64) -> Result<f64> {
        let mut sum = 0.0;
        for (x, w) in self.mapped(a, b) {
            sum += w * f(x)?;
        }
        Ok(sum)
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(ORDER))
}

const MAX_DEPTH: usize = 40;

/// Adaptive bisection with a 16-point rule on each panel.
pub fn adaptive<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = gl16();
    let whole = rule.integrate(&mut f, a, b)?;
    refine(&mut f, rule, a, b, whole, tol.max(f64::MIN_POSITIVE), 0)
}

fn refine<F: FnMut(f64) -> Result<f64>>(
    f: &mut F,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(&mut *f, a, mid)?;
    let right = rule.integrate(&mut *f, mid, b)?;
    let both = left + right;
    let noise = 64.0 * f64::EPSILON * (left.abs() + right.abs());
    if (both - whole).abs() <= tol.max(noise) || depth >= MAX_DEPTH {
        if !both.is_finite() {
            return Err(Error::NonFinite("quadrature".to_string()));
        }
        return Ok(both);
    }
    Ok(refine(f, rule, a, mid, left, 0.5 * tol, depth + 1)?
        + refine(f, rule, mid, b, right, 0.5 * tol, depth + 1)?)
}

/// `∫_a^∞ f`, marching geometrically growing panels of initial width `width`
/// until two consecutive panels contribute less than `tol / 4`.
pub fn semi_infinite<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    width: f64,
    tol: f64,
    s_max: f64,
) -> Result<f64> {
    let mut total = 0.0;
    let mut lo = a;
    let mut w = width.max(1e-3);
    let mut quiet = 0;
    while lo < s_max {
        let hi = lo + w;
        let piece = adaptive(&mut f, lo, hi, 0.25 * tol)?;
        total += piece;
        if piece.abs() <= 0.25 * tol {
            quiet += 1;
            if quiet >= 2 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        w *= 1.5;
    }
    Err(Error::TailNotConvergent { s_max })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_polynomials_of_degree_31() {
        let rule = gl16();
        let weight_sum: f64 = rule.weights.iter().sum();
        assert!((weight_sum - 2.0).abs() < 1e-14);
        for k in 0..32 {
            let got = rule.integrate(|x| Ok(x.powi(k)), 0.0, 1.0).unwrap();
            let want = 1.0 / (k as f64 + 1.0);
            assert!((got - want).abs() < 1e-14, "degree {k}: {got} vs {want}");
        }
    }

    #[test]
    fn adaptive_handles_a_kink() {
        let got = adaptive(|x| Ok((x - 0.3).abs()), 0.0, 1.0, 1e-13).unwrap();
        assert!((got - (0.045 + 0.245)).abs() < 1e-12);
    }

    #[test]
    fn semi_infinite_exponential() {
        let got = semi_infinite(|s| Ok((-2.0 * s).exp()), 1.0, 1.0, 1e-14, 1e4).unwrap();
        assert!((got - (-2.0f64).exp() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn semi_infinite_rejects_non_decaying() {
        let err = semi_infinite(|_| Ok(1.0), 0.0, 1.0, 1e-12, 500.0).unwrap_err();
        assert!(matches!(err, Error::TailNotConvergent { .. }));
    }
}

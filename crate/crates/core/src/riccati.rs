//! The third-order Riccati equation satisfied by `z = y′/y − λᵢ`:
//!
//! ```text
//! z‴ + b₂z″ + b₁z′ + b₀z = Ω(t) + F(t, z, z′, z″)
//! F = Λ₁·(z, z′, z″) + Λ₂·(zz′, z², z³) + C·(z′², zz′, zz″, z², z²z′, z³, z⁴)
//! ```

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exprlang::FunctionExpr;
use crate::greens::{GreenKernel, Orientation};
use crate::grid::GridFunction;
use crate::quad;
use crate::spectra::{CharacteristicData, RootIndex};

/// The perturbations `r₀, r₁, r₂, r₃`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbations {
    pub r: [FunctionExpr; 4],
}

impl Perturbations {
    pub fn new(r: [FunctionExpr; 4]) -> Self {
        Perturbations { r }
    }

    pub fn zero() -> Self {
        Perturbations {
            r: std::array::from_fn(|_| FunctionExpr::zero()),
        }
    }

    /// `[r₀(t), r₁(t), r₂(t), r₃(t)]`.
    pub fn eval(&self, t: f64) -> Result<[f64; 4]> {
        Ok([
            self.r[0].eval(t)?,
            self.r[1].eval(t)?,
            self.r[2].eval(t)?,
            self.r[3].eval(t)?,
        ])
    }

    pub fn all_zero(&self) -> bool {
        self.r.iter().all(FunctionExpr::is_identically_zero)
    }
}

/// Time-dependent coefficients at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Pointwise {
    pub omega: f64,
    /// `(b, f, h)`.
    pub lambda1: [f64; 3],
    /// `(p, f, h)`.
    pub lambda2: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct RiccatiSystem {
    pub index: RootIndex,
    pub lambda: f64,
    /// `[a₃, a₂, a₁, a₀]`.
    pub a: [f64; 4],
    /// `(b₂, b₁, b₀)`.
    pub b: [f64; 3],
    pub c: [f64; 7],
    pub kernel: GreenKernel,
    pub t0: f64,
    perturbations: Arc<Perturbations>,
}

impl RiccatiSystem {
    pub fn build(
        cd: &CharacteristicData,
        r: Arc<Perturbations>,
        i: RootIndex,
        t0: f64,
    ) -> Result<Self> {
        Self::with_orientation(cd, r, i, t0, Orientation::Characteristic)
    }

    pub fn with_orientation(
        cd: &CharacteristicData,
        r: Arc<Perturbations>,
        i: RootIndex,
        t0: f64,
        orientation: Orientation,
    ) -> Result<Self> {
        let lambda = cd.root(i);
        let (a3, a2) = (cd.a3(), cd.a2());
        let l = lambda;
        let c = [
            -3.0,
            -(12.0 * l + 3.0 * a3),
            -4.0,
            -(6.0 * l * l + 3.0 * l * a3 + a2),
            -6.0,
            -(4.0 * l + a3),
            -1.0,
        ];
        let gap_tol = 1e-8;
        Ok(RiccatiSystem {
            index: i,
            lambda,
            a: cd.coefficients,
            b: cd.shifted_cubic_coeffs(i),
            c,
            kernel: GreenKernel::new(cd.shifted_roots(i), orientation, gap_tol)?,
            t0,
            perturbations: r,
        })
    }

    pub fn perturbations(&self) -> &Arc<Perturbations> {
        &self.perturbations
    }

    /// Coefficients from the values `[r₀, r₁, r₂, r₃]`.
    pub fn pointwise_from(&self, r: [f64; 4]) -> Pointwise {
        let l = self.lambda;
        let [r0, r1, r2, r3] = r;
        let f = -(3.0 * l * r3 + r2);
        let h = -r3;
        Pointwise {
            omega: -(((l * r3 + r2) * l + r1) * l + r0),
            lambda1: [-(3.0 * l * l * r3 + 2.0 * l * r2 + r1), f, h],
            lambda2: [-3.0 * r3, f, h],
        }
    }

    pub fn pointwise(&self, t: f64) -> Result<Pointwise> {
        Ok(self.pointwise_from(self.perturbations.eval(t)?))
    }

    pub fn omega(&self, t: f64) -> Result<f64> {
        Ok(self.pointwise(t)?.omega)
    }

    /// `p(λᵢ, t) = λᵢ³r₃ + λᵢ²r₂ + λᵢr₁ + r₀ = −Ω(t)`.
    pub fn p(&self, t: f64) -> Result<f64> {
        Ok(-self.omega(t)?)
    }

    /// `F` for precomputed coefficients.
    pub fn f_with(&self, pw: &Pointwise, x: [f64; 3]) -> f64 {
        let [x1, x2, x3] = x;
        let linear = pw.lambda1[0] * x1 + pw.lambda1[1] * x2 + pw.lambda1[2] * x3;
        let x11 = x1 * x1;
        let mixed = pw.lambda2[0] * x1 * x2 + pw.lambda2[1] * x11 + pw.lambda2[2] * x11 * x1;
        let monomials = [
            x2 * x2,
            x1 * x2,
            x1 * x3,
            x11,
            x11 * x2,
            x11 * x1,
            x11 * x11,
        ];
        let gamma: f64 = self.c.iter().zip(monomials).map(|(c, m)| c * m).sum();
        linear + mixed + gamma
    }

    pub fn eval_f(&self, t: f64, x: [f64; 3]) -> Result<f64> {
        Ok(self.f_with(&self.pointwise(t)?, x))
    }

    /// `z‴ + b₂z″ + b₁z′ + b₀z − Ω − F` for a jet `[z, z′, z″, z‴]`.
    pub fn residual_from_jet(&self, t: f64, jet: [f64; 4]) -> Result<f64> {
        let pw = self.pointwise(t)?;
        let [b2, b1, b0] = self.b;
        let lhs = jet[3] + b2 * jet[2] + b1 * jet[1] + b0 * jet[0];
        Ok(lhs - pw.omega - self.f_with(&pw, [jet[0], jet[1], jet[2]]))
    }

    pub fn riccati_residual(&self, z: &GridFunction, t: f64) -> Result<f64> {
        self.residual_from_jet(t, z.jet_at(t))
    }

    /// `(R₄, y·R₃)` for `y = exp(log_y)` with `y′/y = λᵢ + z`, where `R₄` is the
    /// residual of the fourth-order equation.
    pub fn lift_residual_from_jet(&self, t: f64, jet: [f64; 4], log_y: f64) -> Result<(f64, f64)> {
        let r = self.perturbations.eval(t)?;
        let y = log_y.exp();
        if !y.is_finite() {
            return Err(Error::Overflow(format!("y = exp({log_y}) at t = {t}")));
        }
        let ratios = derivative_ratios(self.lambda, jet);
        let [a3, a2, a1, a0] = self.a;
        let [r0, r1, r2, r3] = r;
        let r4 = ratios[3]
            + (a3 + r3) * ratios[2]
            + (a2 + r2) * ratios[1]
            + (a1 + r1) * ratios[0]
            + (a0 + r0);
        let r3_res = self.residual_from_jet(t, jet)?;
        Ok((y * r4, y * r3_res))
    }

    pub fn lift_residual_equivalence(&self, z: &GridFunction, t: f64) -> Result<(f64, f64)> {
        let integral = quad::adaptive(|s| Ok(z.jet_at(s)[0]), self.t0, t, 1e-14)?;
        self.lift_residual_from_jet(t, z.jet_at(t), self.lambda * (t - self.t0) + integral)
    }
}

/// `y⁽ᵏ⁾/y` for `k = 1..4` when `y′/y = λ + z`.
pub fn derivative_ratios(lambda: f64, jet: [f64; 4]) -> [f64; 4] {
    let w = lambda + jet[0];
    let [_, z1, z2, z3] = jet;
    let w2 = w * w;
    [
        w,
        w2 + z1,
        w2 * w + 3.0 * w * z1 + z2,
        w2 * w2 + 6.0 * w2 * z1 + 3.0 * z1 * z1 + 4.0 * w * z2 + z3,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;
    use crate::spectra::order_and_check_h1;

    fn test_roots() -> CharacteristicData {
        order_and_check_h1([2.0, 1.0, -1.0, -2.0], 1e-8).unwrap()
    }

    fn idx(i: usize) -> RootIndex {
        RootIndex::new(i).unwrap()
    }

    fn with_r0(text: &str) -> Arc<Perturbations> {
        let mut p = Perturbations::zero();
        p.r[0] = parse(text).unwrap();
        Arc::new(p)
    }

    #[test]
    fn unperturbed_second_root() {
        let sys = RiccatiSystem::build(&test_roots(), Arc::new(Perturbations::zero()), idx(2), 0.0)
            .unwrap();
        assert_eq!(sys.b, [4.0, 1.0, -6.0]);
        let pw = sys.pointwise(3.0).unwrap();
        assert_eq!(pw.omega, 0.0);
        assert_eq!(pw.lambda1, [0.0; 3]);
        assert_eq!(pw.lambda2, [0.0; 3]);
    }

    #[test]
    fn quadratic_mixed_coefficient() {
        let sys = RiccatiSystem::build(&test_roots(), Arc::new(Perturbations::zero()), idx(1), 0.0)
            .unwrap();
        assert_eq!(sys.c[1], -24.0);
    }

    #[test]
    fn omega_from_r0_only() {
        let sys =
            RiccatiSystem::build(&test_roots(), with_r0("0.001*exp(-t)"), idx(1), 0.0).unwrap();
        for t in [0.0, 1.0, 4.0] {
            assert!((sys.omega(t).unwrap() + 0.001 * (-t).exp()).abs() < 1e-18);
            assert_eq!(sys.eval_f(t, [0.0; 3]).unwrap(), 0.0);
        }
    }

    #[test]
    fn pure_power_nonlinearity() {
        let sys = RiccatiSystem::build(&test_roots(), Arc::new(Perturbations::zero()), idx(1), 0.0)
            .unwrap();
        let got = sys.eval_f(0.0, [0.1, 0.0, 0.0]).unwrap();
        assert!((got + 0.1981).abs() < 1e-15);
    }

    #[test]
    fn linear_coefficients_from_all_perturbations() {
        let p = Perturbations::new([
            parse("1").unwrap(),
            parse("2").unwrap(),
            parse("3").unwrap(),
            parse("5").unwrap(),
        ]);
        let sys = RiccatiSystem::build(&test_roots(), Arc::new(p), idx(1), 0.0).unwrap();
        let pw = sys.pointwise(0.0).unwrap();
        // λ = 2: Ω = −(8·5 + 4·3 + 2·2 + 1)
        assert_eq!(pw.omega, -57.0);
        assert_eq!(pw.lambda1, [-(12.0 * 5.0 + 12.0 + 2.0), -33.0, -5.0]);
        assert_eq!(pw.lambda2, [-15.0, -33.0, -5.0]);
        assert_eq!(sys.p(0.0).unwrap(), 57.0);
    }

    #[test]
    fn lift_equivalence_for_decaying_z() {
        let sys = RiccatiSystem::build(&test_roots(), Arc::new(Perturbations::zero()), idx(1), 0.0)
            .unwrap();
        for t in [0.0f64, 0.5, 2.0] {
            let e = 0.01 * (-t).exp();
            let log_y = 2.0 * t + 0.01 * (1.0 - (-t).exp());
            let (r4, r3y) = sys
                .lift_residual_from_jet(t, [e, -e, e, -e], log_y)
                .unwrap();
            assert!(r4.abs() > 1e-6);
            assert!((r4 - r3y).abs() <= 1e-8 * r4.abs(), "{t}: {r4} vs {r3y}");
        }
    }
}

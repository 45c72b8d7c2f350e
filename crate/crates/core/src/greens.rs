//! Green kernels of the constant-coefficient third-order operator
//! `q(D) = (D − γ₁)(D − γ₂)(D − γ₃)` with real, simple, nonzero `γ`.
//!
//! Each root contributes one exponential mode `wₖ e^{κₖ(t−s)}` with
//! `wₖ = 1/Π_{j≠k}(κₖ − κⱼ)`. Modes with `κₖ < 0` live on the causal side
//! `t ≥ s`; modes with `κₖ > 0` live on `t ≤ s` with the opposite sign. This
//! is the unique kernel whose convolution decays at infinity for any bounded
//! forcing, it is continuous together with `∂g/∂t` on the diagonal, and
//! `∂²g/∂t²` jumps by exactly one there.
//!
//! [`Orientation::Characteristic`] uses `κ = γ`; [`Orientation::Reversed`]
//! uses `κ = −γ`. Only the former inverts `q(D)`; [`select_orientation`]
//! decides this from the residual of `q(D)(Tf) − f`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exprlang::ScalarFn;
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignPattern {
    AllNeg,
    OnePos,
    TwoPos,
    AllPos,
}

impl SignPattern {
    pub fn label(self) -> &'static str {
        match self {
            SignPattern::AllNeg => "AllNeg",
            SignPattern::OnePos => "OnePos",
            SignPattern::TwoPos => "TwoPos",
            SignPattern::AllPos => "AllPos",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// Exponents `+γₖ(t − s)`.
    Characteristic,
    /// Exponents `−γₖ(t − s)`.
    Reversed,
}

/// Which half-plane of `(t, s)` a kernel mode is supported on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    /// `t ≥ s`, integrated over `[t₀, t]`.
    Causal,
    /// `t ≤ s`, integrated over `[t, ∞)`.
    AntiCausal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelMode {
    pub rate: f64,
    /// Signed weight, already including `−1` on the anti-causal side.
    pub weight: f64,
    pub side: Side,
}

/// Classifies the sign triple of `gamma`.
pub fn classify_sign_pattern(gamma: [f64; 3], zero_tol: f64) -> Result<SignPattern> {
    let mut g = gamma;
    g.sort_by(|a, b| b.total_cmp(a));
    if let Some(&value) = g.iter().find(|x| x.abs() < zero_tol) {
        return Err(Error::ZeroRoot { value });
    }
    let positives = g.iter().filter(|x| **x > 0.0).count();
    Ok(match positives {
        0 => SignPattern::AllNeg,
        1 => SignPattern::OnePos,
        2 => SignPattern::TwoPos,
        _ => SignPattern::AllPos,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenKernel {
    /// Strictly monotone, in the order supplied.
    pub gamma: [f64; 3],
    /// `(γ₂−γ₁)(γ₃−γ₂)(γ₃−γ₁)`.
    pub delta_gamma: f64,
    pub case: SignPattern,
    pub orientation: Orientation,
    pub modes: [KernelMode; 3],
}

impl GreenKernel {
    pub fn new(gamma: [f64; 3], orientation: Orientation, zero_tol: f64) -> Result<Self> {
        let case = classify_sign_pattern(gamma, zero_tol)?;
        let g = gamma;
        let delta_gamma = (g[1] - g[0]) * (g[2] - g[1]) * (g[2] - g[0]);
        let decreasing = g[0] > g[1] && g[1] > g[2];
        let increasing = g[0] < g[1] && g[1] < g[2];
        if !(decreasing || increasing) || !delta_gamma.is_finite() {
            return Err(Error::validation(
                "gamma",
                "shifted roots must be distinct and ordered",
            ));
        }
        let sign = match orientation {
            Orientation::Characteristic => 1.0,
            Orientation::Reversed => -1.0,
        };
        let rates = g.map(|x| sign * x);
        let modes = std::array::from_fn(|k| {
            let rate = rates[k];
            let denom: f64 = (0..3)
                .filter(|&j| j != k)
                .map(|j| rate - rates[j])
                .product();
            let w = 1.0 / denom;
            if rate < 0.0 {
                KernelMode {
                    rate,
                    weight: w,
                    side: Side::Causal,
                }
            } else {
                KernelMode {
                    rate,
                    weight: -w,
                    side: Side::AntiCausal,
                }
            }
        });
        Ok(GreenKernel {
            gamma: g,
            delta_gamma,
            case,
            orientation,
            modes,
        })
    }

    pub fn characteristic(gamma: [f64; 3]) -> Result<Self> {
        Self::new(gamma, Orientation::Characteristic, 1e-8)
    }

    /// `(b₂, b₁, b₀)` of `Π(μ − γₖ)`.
    pub fn cubic_coeffs(&self) -> [f64; 3] {
        let [g1, g2, g3] = self.gamma;
        [
            -(g1 + g2 + g3),
            g1 * g2 + g1 * g3 + g2 * g3,
            -(g1 * g2 * g3),
        ]
    }

    pub fn modes_on(&self, side: Side) -> impl Iterator<Item = &KernelMode> + '_ {
        self.modes.iter().filter(move |m| m.side == side)
    }

    pub fn has_side(&self, side: Side) -> bool {
        self.modes_on(side).next().is_some()
    }

    /// `∂ᵈg/∂tᵈ` as the limit from `side`, at lag `u = t − s`.
    pub fn eval_side(&self, side: Side, u: f64, d: u32) -> f64 {
        self.modes_on(side)
            .map(|m| m.weight * m.rate.powi(d as i32) * (m.rate * u).exp())
            .sum()
    }

    /// `∂ᵈg/∂tᵈ(t, s)`; on the diagonal the causal limit is returned.
    pub fn eval(&self, t: f64, s: f64, d: u32) -> f64 {
        let side = if t >= s {
            Side::Causal
        } else {
            Side::AntiCausal
        };
        self.eval_side(side, t - s, d)
    }

    /// Sum of `|∂ᵈg/∂tᵈ|` for `d = 0, 1, 2` on one side.
    pub fn abs_sum_side(&self, side: Side, u: f64) -> f64 {
        (0..3).map(|d| self.eval_side(side, u, d).abs()).sum()
    }

    /// Residual of `q(D)` applied to `t ↦ g(t, s)` away from the diagonal.
    pub fn homogeneous_residual(&self, t: f64, s: f64) -> f64 {
        let [b2, b1, b0] = self.cubic_coeffs();
        self.eval(t, s, 3)
            + b2 * self.eval(t, s, 2)
            + b1 * self.eval(t, s, 1)
            + b0 * self.eval(t, s, 0)
    }

    /// Exponential majorant of `|∂ᵈg/∂tᵈ|`.
    pub fn bound(&self, d: u32) -> KernelBound {
        let scale = self.delta_gamma.abs();
        let mut sides = Vec::new();
        for side in [Side::Causal, Side::AntiCausal] {
            let mut coefficient = 0.0;
            let mut rate: Option<f64> = None;
            for m in self.modes_on(side) {
                coefficient += scale * m.weight.abs() * m.rate.abs().powi(d as i32);
                rate = Some(match (side, rate) {
                    (_, None) => m.rate,
                    (Side::Causal, Some(r)) => r.max(m.rate),
                    (Side::AntiCausal, Some(r)) => r.min(m.rate),
                });
            }
            if let Some(rate) = rate {
                sides.push(SideBound {
                    side,
                    coefficient,
                    rate,
                });
            }
        }
        KernelBound {
            order: d,
            raw_coefficient: sides.iter().map(|s| s.coefficient).sum(),
            delta_gamma: self.delta_gamma,
            sides,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideBound {
    pub side: Side,
    /// Coefficient before division by `|δγ|`.
    pub coefficient: f64,
    /// `|∂ᵈg| ≤ coefficient/|δγ| · e^{rate·(t−s)}` on this side.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelBound {
    pub order: u32,
    /// `Σₖ |γₐ − γ_b| |γₖ|ᵈ` over both sides.
    pub raw_coefficient: f64,
    pub delta_gamma: f64,
    pub sides: Vec<SideBound>,
}

impl KernelBound {
    pub fn bound_at(&self, t: f64, s: f64) -> f64 {
        let side = if t >= s {
            Side::Causal
        } else {
            Side::AntiCausal
        };
        self.sides.iter().find(|b| b.side == side).map_or(0.0, |b| {
            b.coefficient / self.delta_gamma.abs() * (b.rate * (t - s)).exp()
        })
    }
}

fn tail_width(kernel: &GreenKernel) -> f64 {
    let slowest = kernel
        .modes_on(Side::AntiCausal)
        .map(|m| m.rate.abs())
        .fold(f64::INFINITY, f64::min);
    if slowest.is_finite() {
        1.0 / slowest
    } else {
        1.0
    }
}

/// `∫_{t₀}^∞ (|g| + |∂g/∂t| + |∂²g/∂t²|)(t, s) |E(s)| ds`, split at `s = t`.
pub fn l_functional(
    kernel: &GreenKernel,
    e: &dyn ScalarFn,
    t: f64,
    t0: f64,
    tol: f64,
) -> Result<f64> {
    let mut total = 0.0;
    if kernel.has_side(Side::Causal) && t > t0 {
        total += quad::adaptive(
            |s| Ok(kernel.abs_sum_side(Side::Causal, t - s) * e.at(s)?.abs()),
            t0,
            t,
            0.5 * tol,
        )?;
    }
    if kernel.has_side(Side::AntiCausal) {
        let start = t.max(t0);
        total += quad::semi_infinite(
            |s| Ok(kernel.abs_sum_side(Side::AntiCausal, t - s) * e.at(s)?.abs()),
            start,
            tail_width(kernel),
            0.5 * tol,
            start + 5000.0,
        )?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrientationReport {
    pub adopted: Orientation,
    /// Largest relative residual of `q(D)(Tf) − f` for `κ = γ`.
    pub residual_characteristic: f64,
    /// Same for `κ = −γ`.
    pub residual_reversed: f64,
    pub tolerance: f64,
}

/// Convolves a smooth decaying test forcing with each orientation and keeps
/// the one whose output satisfies `q(D)z = f`.
pub fn select_orientation(gamma: [f64; 3], tol: f64) -> Result<OrientationReport> {
    let characteristic = GreenKernel::new(gamma, Orientation::Characteristic, 1e-8)?;
    let reversed = GreenKernel::new(gamma, Orientation::Reversed, 1e-8)?;
    let residual_characteristic =
        orientation_residual(&characteristic, &characteristic.cubic_coeffs())?;
    let residual_reversed = orientation_residual(&reversed, &characteristic.cubic_coeffs())?;
    let adopted = if residual_characteristic <= tol {
        Orientation::Characteristic
    } else if residual_reversed <= tol {
        Orientation::Reversed
    } else {
        return Err(Error::NonFinite(format!(
            "Green kernel: neither orientation inverts the cubic (residuals {residual_characteristic:.3e}, {residual_reversed:.3e})"
        )));
    };
    Ok(OrientationReport {
        adopted,
        residual_characteristic,
        residual_reversed,
        tolerance: tol,
    })
}

fn test_forcing(s: f64) -> f64 {
    (-s).exp() * (1.0 + 0.5 * (2.0 * s).sin())
}

fn orientation_residual(kernel: &GreenKernel, b: &[f64; 3]) -> Result<f64> {
    let t0 = 0.0;
    let mut worst: f64 = 0.0;
    for t in [0.5, 1.0, 2.0, 3.5] {
        // Differentiating under the integral; the unit jump of ∂²g adds f(t) to z‴.
        let mut jet = [0.0; 4];
        for m in &kernel.modes {
            let h = match m.side {
                Side::Causal => quad::adaptive(
                    |s| Ok((m.rate * (t - s)).exp() * test_forcing(s)),
                    t0,
                    t,
                    1e-14,
                )?,
                Side::AntiCausal => quad::semi_infinite(
                    |s| Ok((m.rate * (t - s)).exp() * test_forcing(s)),
                    t,
                    1.0 / m.rate.abs(),
                    1e-14,
                    t + 5000.0,
                )?,
            };
            for (d, slot) in jet.iter_mut().enumerate() {
                *slot += m.weight * m.rate.powi(d as i32) * h;
            }
        }
        let f = test_forcing(t);
        jet[3] += f;
        let residual = jet[3] + b[0] * jet[2] + b[1] * jet[1] + b[2] * jet[0] - f;
        worst = worst.max(residual.abs() / f.abs().max(1e-300));
    }
    Ok(worst)
}

//! Decay and smallness hypotheses on the perturbations, and the constants of
//! the contraction argument.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exprlang::ScalarFn;
use crate::greens::{l_functional, GreenKernel};
use crate::quad;
use crate::riccati::Perturbations;
use crate::spectra::{CharacteristicData, RootIndex};

/// `𝔽ᵢ(E)(t) = ∫_{t₀}^t e^{κ_h(t−s)}|E| + ∫_t^∞ e^{κ_t(t−s)}|E|`, either part optional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FOperator {
    pub head_rate: Option<f64>,
    pub tail_rate: Option<f64>,
}

impl FOperator {
    pub fn new(cd: &CharacteristicData, i: RootIndex) -> Self {
        let l = cd.lambda;
        let (head_rate, tail_rate) = match i.get() {
            1 => (None, Some(l[0] - l[1])),
            2 => (Some(l[1] - l[0]), Some(l[1] - l[2])),
            3 => (Some(l[2] - l[1]), Some(l[2] - l[3])),
            _ => (Some(l[3] - l[2]), None),
        };
        FOperator {
            head_rate,
            tail_rate,
        }
    }

    pub fn eval(&self, e: &dyn ScalarFn, t: f64, t0: f64, tol: f64) -> Result<f64> {
        let mut total = 0.0;
        if let Some(k) = self.head_rate {
            if t > t0 {
                total += quad::adaptive(
                    |s| Ok((k * (t - s)).exp() * e.at(s)?.abs()),
                    t0,
                    t,
                    0.5 * tol,
                )?;
            }
        }
        if let Some(k) = self.tail_rate {
            total += quad::semi_infinite(
                |s| Ok((k * (t - s)).exp() * e.at(s)?.abs()),
                t,
                1.0 / k.abs(),
                0.5 * tol,
                t + 5000.0,
            )?;
        }
        Ok(total)
    }
}

pub fn f_operator_eval(
    cd: &CharacteristicData,
    i: RootIndex,
    e: &dyn ScalarFn,
    t: f64,
    t0: f64,
    tol: f64,
) -> Result<f64> {
    FOperator::new(cd, i).eval(e, t, t0, tol)
}

/// 256 points on `[t₀, t₀ + span]`, logarithmically clustered at `t₀`.
pub fn log_spaced_samples(t0: f64, span: f64, count: usize) -> Vec<f64> {
    let delta = 1e-3 * span;
    let growth = (1.0 + span / delta).ln();
    let last = (count - 1) as f64;
    (0..count)
        .map(|k| t0 + delta * ((growth * k as f64 / last).exp() - 1.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoBound {
    pub rho: f64,
    pub argmax_t: f64,
    /// Index `j` of the perturbation `rⱼ` attaining the maximum.
    pub component: Option<usize>,
    pub horizon: f64,
    /// Samples past the maximum never increase again.
    pub tail_monotone: bool,
}

/// Smallest sampled `ρ` with `𝔽ᵢ(rⱼ) ≤ ρ` for all `j`.
pub fn rho_bound(
    cd: &CharacteristicData,
    i: RootIndex,
    r: &Perturbations,
    t0: f64,
    samples: usize,
    tol: f64,
) -> Result<RhoBound> {
    let op = FOperator::new(cd, i);
    let horizon = t0 + 40.0 / cd.min_gap();
    let ts = log_spaced_samples(t0, horizon - t0, samples.max(8));
    let mut best = RhoBound {
        rho: 0.0,
        argmax_t: t0,
        component: None,
        horizon,
        tail_monotone: true,
    };
    for (j, rj) in r.r.iter().enumerate() {
        if rj.is_identically_zero() {
            continue;
        }
        let values = ts
            .iter()
            .map(|&t| op.eval(rj, t, t0, tol))
            .collect::<Result<Vec<_>>>()?;
        let (k, _) = values
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc },
            );
        let lo = ts[k.saturating_sub(1)];
        let hi = ts[(k + 1).min(ts.len() - 1)];
        let (t_star, v_star) = golden_max(|t| op.eval(rj, t, t0, tol), lo, hi, values[k], ts[k])?;
        let floor = 1e-12 * v_star.abs();
        let monotone = values[k..].windows(2).all(|w| w[1] <= w[0] + floor);
        best.tail_monotone &= monotone;
        if v_star > best.rho {
            best.rho = v_star;
            best.argmax_t = t_star;
            best.component = Some(j);
        }
    }
    Ok(best)
}

fn golden_max<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    v0: f64,
    t0: f64,
) -> Result<(f64, f64)> {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut best_t, mut best_v) = (t0, v0);
    if b - a <= 0.0 {
        return Ok((best_t, best_v));
    }
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d)?;
        }
        if (b - a).abs() < 1e-10 * (1.0 + a.abs()) {
            break;
        }
    }
    for (t, v) in [(c, fc), (d, fd)] {
        if v > best_v {
            best_t = t;
            best_v = v;
        }
    }
    Ok((best_t, best_v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionConstants {
    pub delta_w: f64,
    /// `α_{j,i}` for `j = 0, 1, 2`.
    pub alpha: [f64; 3],
    /// The same sums written directly in the `λ`s. For `i = 3` two of the
    /// factors read `|λ₂+λ₄−2λ₃|` and `|λ₁+λ₄−2λ₃|` instead of `|λ₂−λ₄|` and
    /// `|λ₁−λ₄|`, so only there they differ from `alpha`.
    pub alpha_lambda_form: [f64; 3],
    pub a: f64,
    pub a_lambda_form: f64,
    pub varsigma: f64,
    pub eta: f64,
}

/// `Σ |γ_b − γ_c| |γ_a|ʲ` over the cyclic triples of `gamma`.
fn alpha_from_gamma(g: [f64; 3], j: i32) -> f64 {
    (g[2] - g[1]).abs() * g[0].abs().powi(j)
        + (g[0] - g[2]).abs() * g[1].abs().powi(j)
        + (g[1] - g[0]).abs() * g[2].abs().powi(j)
}

fn alpha_lambda_form(l: [f64; 4], i: usize, j: i32) -> f64 {
    let [l1, l2, l3, l4] = l;
    let term = |x: f64, y: f64| x.abs() * y.abs().powi(j);
    match i {
        1 => term(l4 - l3, l2 - l1) + term(l4 - l2, l3 - l1) + term(l3 - l2, l4 - l1),
        2 => term(l3 - l4, l1 - l2) + term(l1 - l3, l4 - l2) + term(l1 - l4, l3 - l2),
        3 => {
            term(l2 - l1, l4 - l3)
                + term(l2 + l4 - 2.0 * l3, l1 - l3)
                + term(l1 + l4 - 2.0 * l3, l2 - l3)
        }
        _ => term(l3 - l2, l1 - l4) + term(l3 - l1, l2 - l4) + term(l2 - l1, l3 - l4),
    }
}

pub fn contraction_constants(
    cd: &CharacteristicData,
    i: RootIndex,
    eta: f64,
) -> Result<ContractionConstants> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::validation("eta", "eta must lie in (0,0.5)"));
    }
    let g = cd.shifted_roots(i);
    let delta_w = (g[1] - g[0]) * (g[2] - g[1]) * (g[2] - g[0]);
    let alpha = [0, 1, 2].map(|j| alpha_from_gamma(g, j));
    let alpha_lambda_form = [0, 1, 2].map(|j| alpha_lambda_form(cd.lambda, i.get(), j));
    let l = cd.root(i);
    let (a3, a2) = (cd.a3(), cd.a2());
    let varsigma = 3.0 * l * l
        + 5.0 * l.abs()
        + 3.0
        + (19.0
            + 7.0 * l.abs()
            + (12.0 * l + 3.0 * a3).abs()
            + (6.0 * l * l + 3.0 * l * a3 + a2).abs())
            * eta;
    Ok(ContractionConstants {
        delta_w,
        alpha,
        alpha_lambda_form,
        a: alpha.iter().sum::<f64>() / delta_w.abs(),
        a_lambda_form: alpha_lambda_form.iter().sum::<f64>() / delta_w.abs(),
        varsigma,
        eta,
    })
}

/// `Σ_d (raw bound coefficient of ∂ᵈg) / |δγ|`.
pub fn kernel_derived_a(kernel: &GreenKernel) -> f64 {
    (0..3).map(|d| kernel.bound(d).raw_coefficient).sum::<f64>() / kernel.delta_gamma.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Smallness {
    pub product: f64,
    pub ok: bool,
    pub phi: Option<f64>,
}

pub fn smallness_check(a: f64, varsigma: f64, rho: f64) -> Smallness {
    let product = rho * a * varsigma;
    let ok = product < 1.0;
    Smallness {
        product,
        ok,
        phi: ok.then(|| a / (1.0 - product)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H2Report {
    /// `(t, max_j 𝓛(rⱼ)(t))`.
    pub samples: Vec<(f64, f64)>,
    pub fitted_rate: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn default_h2_times(t0: f64, min_gap: f64) -> Vec<f64> {
    let span = 40.0 / min_gap;
    (1..=16).map(|k| t0 + span * k as f64 / 16.0).collect()
}

/// Finite-horizon decay test for `𝓛(rⱼ)`.
pub fn check_h2(
    kernel: &GreenKernel,
    r: &Perturbations,
    t0: f64,
    times: &[f64],
    h2_tol: f64,
    quad_tol: f64,
) -> Result<H2Report> {
    let mut samples = Vec::with_capacity(times.len());
    for &t in times {
        let mut worst: f64 = 0.0;
        for rj in r.r.iter().filter(|rj| !rj.is_identically_zero()) {
            worst = worst.max(l_functional(kernel, rj, t, t0, quad_tol)?);
        }
        samples.push((t, worst));
    }
    let last = samples.last().map_or(0.0, |s| s.1);
    let first = samples.first().map_or(0.0, |s| s.1);
    let pass = last <= h2_tol && (last < first || first == 0.0);
    let fit: Vec<(f64, f64)> = samples[samples.len() / 2..]
        .iter()
        .filter(|(_, v)| *v > 1e-300)
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    let fitted_rate = (fit.len() >= 2).then(|| {
        let n = fit.len() as f64;
        let mt = fit.iter().map(|p| p.0).sum::<f64>() / n;
        let mv = fit.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = fit.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
        let var: f64 = fit.iter().map(|p| (p.0 - mt).powi(2)).sum();
        cov / var
    });
    Ok(H2Report {
        samples,
        fitted_rate,
        tolerance: h2_tol,
        pass,
    })
}

/// Everything about the hypotheses for one root.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub index: RootIndex,
    pub constants: ContractionConstants,
    pub a_kernel: f64,
    pub rho: RhoBound,
    pub smallness: Smallness,
    pub h2: H2Report,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisSettings {
    pub eta: f64,
    pub h2_tol: f64,
    pub quad_tol: f64,
    pub rho_samples: usize,
}

impl Default for HypothesisSettings {
    fn default() -> Self {
        HypothesisSettings {
            eta: 0.25,
            h2_tol: 1e-6,
            quad_tol: 1e-12,
            rho_samples: 256,
        }
    }
}

pub fn assess(
    cd: &CharacteristicData,
    kernel: &GreenKernel,
    i: RootIndex,
    r: &Perturbations,
    t0: f64,
    settings: &HypothesisSettings,
) -> Result<EnvelopeReport> {
    let constants = contraction_constants(cd, i, settings.eta)?;
    let rho = rho_bound(cd, i, r, t0, settings.rho_samples, settings.quad_tol)?;
    let smallness = smallness_check(constants.a, constants.varsigma, rho.rho);
    let h2 = check_h2(
        kernel,
        r,
        t0,
        &default_h2_times(t0, cd.min_gap()),
        settings.h2_tol,
        settings.quad_tol,
    )?;
    Ok(EnvelopeReport {
        index: i,
        a_kernel: kernel_derived_a(kernel),
        constants,
        rho,
        smallness,
        h2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::parse;
    use crate::spectra::order_and_check_h1;

    fn roots() -> CharacteristicData {
        order_and_check_h1([2.0, 1.0, -1.0, -2.0], 1e-8).unwrap()
    }

    fn idx(i: usize) -> RootIndex {
        RootIndex::new(i).unwrap()
    }

    fn only_r0(text: &str) -> Perturbations {
        let mut p = Perturbations::zero();
        p.r[0] = parse(text).unwrap();
        p
    }

    #[test]
    fn f_operator_closed_forms() {
        let cd = roots();
        let e = parse("exp(-t)").unwrap();
        let v = f_operator_eval(&cd, idx(1), &e, 0.0, 0.0, 1e-13).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let v = f_operator_eval(&cd, idx(2), &e, 1.0, 0.0, 1e-13).unwrap();
        assert!((v - 4.0 / (3.0 * std::f64::consts::E)).abs() < 1e-12);
        let zero = parse("0").unwrap();
        assert_eq!(
            f_operator_eval(&cd, idx(3), &zero, 1.0, 0.0, 1e-13).unwrap(),
            0.0
        );
    }

    #[test]
    fn rho_examples() {
        let cd = roots();
        let rho = rho_bound(&cd, idx(1), &only_r0("0.001*exp(-t)"), 0.0, 256, 1e-14).unwrap();
        assert!((rho.rho - 5e-4).abs() < 1e-12);
        assert_eq!(rho.argmax_t, 0.0);
        assert!(rho.tail_monotone);
        let rho = rho_bound(&cd, idx(4), &only_r0("exp(-t)"), 0.0, 256, 1e-14).unwrap();
        assert!((rho.rho - (-1.0f64).exp()).abs() < 1e-10);
        assert!((rho.argmax_t - 1.0).abs() < 1e-4);
        let rho = rho_bound(&cd, idx(2), &Perturbations::zero(), 0.0, 256, 1e-14).unwrap();
        assert_eq!(rho.rho, 0.0);
    }

    #[test]
    fn constants_for_first_root() {
        let c = contraction_constants(&roots(), idx(1), 0.25).unwrap();
        assert_eq!(c.delta_w, -6.0);
        assert_eq!(c.alpha, [6.0, 18.0, 60.0]);
        assert_eq!(c.a, 14.0);
        assert_eq!(c.varsigma, 44.0);
        assert_eq!(c.alpha_lambda_form, c.alpha);
    }

    #[test]
    fn mirror_symmetry_and_kernel_agreement() {
        let cd = roots();
        let a1 = contraction_constants(&cd, idx(1), 0.25).unwrap().a;
        let a4 = contraction_constants(&cd, idx(4), 0.25).unwrap().a;
        assert!((a1 - a4).abs() < 1e-12);
        for i in RootIndex::ALL {
            let c = contraction_constants(&cd, i, 0.25).unwrap();
            let kernel = GreenKernel::characteristic(cd.shifted_roots(i)).unwrap();
            assert!((c.a - kernel_derived_a(&kernel)).abs() < 1e-12, "{i}");
            assert!(c.a > 0.0 && c.varsigma > 0.0);
        }
    }

    #[test]
    fn eta_out_of_range() {
        let err = contraction_constants(&roots(), idx(1), 0.5).unwrap_err();
        assert!(err.to_string().contains("eta must lie in (0,0.5)"));
    }

    #[test]
    fn smallness_arithmetic() {
        let s = smallness_check(14.0, 44.0, 5e-4);
        assert!((s.product - 0.308).abs() < 1e-12);
        assert!((s.phi.unwrap() - 14.0 / 0.692).abs() < 1e-10);
        assert_eq!(smallness_check(14.0, 44.0, 0.0).phi, Some(14.0));
        let edge = smallness_check(2.0, 4.0, 1.0 / 8.0);
        assert!(!edge.ok && edge.phi.is_none());
    }

    #[test]
    fn h2_verdicts() {
        let kernel = GreenKernel::characteristic([-1.0, -3.0, -4.0]).unwrap();
        let times = default_h2_times(0.0, 1.0);
        let zero = check_h2(&kernel, &Perturbations::zero(), 0.0, &times, 1e-6, 1e-12).unwrap();
        assert!(zero.pass && zero.samples.iter().all(|s| s.1 == 0.0));
        let decaying = check_h2(&kernel, &only_r0("exp(-t)"), 0.0, &times, 1e-6, 1e-12).unwrap();
        assert!(decaying.pass);
        assert!((decaying.fitted_rate.unwrap() + 1.0).abs() < 0.1);
        let constant = check_h2(&kernel, &only_r0("1"), 0.0, &times, 1e-6, 1e-12).unwrap();
        assert!(!constant.pass);
    }
}

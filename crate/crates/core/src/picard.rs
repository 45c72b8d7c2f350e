//! Picard iteration `ωₙ₊₁ = Tωₙ`, `ω₀ = 0`, for `z = T z` with
//!
//! ```text
//! (Tz)(t) = ∫ g(t, s) [Ω(s) + F(s, z, z′, z″)] ds
//! ```
//!
//! and the pointwise envelope check on the fixed point.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::greens::Side;
use crate::grid::{
    head_convolution, observed_tail_rate, tail_convolution, Grid, GridFunction, PanelPoints,
};
use crate::hypotheses::FOperator;
use crate::quad;
use crate::riccati::{Pointwise, RiccatiSystem};
use crate::spectra::CharacteristicData;

const TAIL_REACH: f64 = 5000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PicardSettings {
    pub fp_tol: f64,
    pub max_iter: usize,
    pub eta: f64,
    pub quad_tol: f64,
    pub keep_snapshots: bool,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings {
            fp_tol: 1e-10,
            max_iter: 50,
            eta: 0.25,
            quad_tol: 1e-12,
            keep_snapshots: false,
        }
    }
}

/// The operator `T` for one root on a fixed grid, with the perturbation
/// coefficients cached at every quadrature point.
pub struct PicardSolver<'a> {
    sys: &'a RiccatiSystem,
    grid: Arc<Grid>,
    pts: PanelPoints,
    at_points: Vec<Pointwise>,
    at_nodes: Vec<Pointwise>,
    quad_tol: f64,
}

impl<'a> PicardSolver<'a> {
    pub fn new(sys: &'a RiccatiSystem, grid: Arc<Grid>, quad_tol: f64) -> Result<Self> {
        let pts = grid.panel_points();
        let at_points = pts
            .points
            .par_iter()
            .map(|&s| sys.pointwise(s))
            .collect::<Result<Vec<_>>>()?;
        let at_nodes = grid
            .nodes()
            .par_iter()
            .map(|&t| sys.pointwise(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(PicardSolver {
            sys,
            grid,
            pts,
            at_points,
            at_nodes,
            quad_tol,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn system(&self) -> &RiccatiSystem {
        self.sys
    }

    fn forcing(&self, pw: &Pointwise, x: [f64; 3]) -> f64 {
        pw.omega + self.sys.f_with(pw, x)
    }

    pub fn apply_t(&self, z: &GridFunction) -> Result<GridFunction> {
        let f_points: Vec<f64> = self
            .pts
            .points
            .par_iter()
            .zip(&self.at_points)
            .map(|(&s, pw)| self.forcing(pw, z.channels_at(s)))
            .collect();
        let f_nodes: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|n| {
                self.forcing(
                    &self.at_nodes[n],
                    [z.channel(0)[n], z.channel(1)[n], z.channel(2)[n]],
                )
            })
            .collect();
        if f_points.iter().chain(&f_nodes).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Picard forcing".to_string()));
        }

        let n = self.grid.len();
        let mut channels = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut d3 = f_nodes.clone();
        let t_max = self.grid.t_max();
        for mode in &self.sys.kernel.modes {
            let h = match mode.side {
                Side::Causal => head_convolution(&self.grid, &self.pts, &f_points, mode.rate),
                Side::AntiCausal => {
                    let beyond = quad::semi_infinite(
                        |s| {
                            let pw = self.sys.pointwise(s)?;
                            Ok((mode.rate * (t_max - s)).exp()
                                * self.forcing(&pw, z.channels_at(s)))
                        },
                        t_max,
                        1.0 / mode.rate,
                        self.quad_tol,
                        t_max + TAIL_REACH,
                    )?;
                    tail_convolution(&self.grid, &self.pts, &f_points, mode.rate, beyond)
                }
            };
            let k = mode.rate;
            for (m, hm) in h.iter().enumerate() {
                let w = mode.weight * hm;
                channels[0][m] += w;
                channels[1][m] += w * k;
                channels[2][m] += w * k * k;
                d3[m] += w * k * k * k;
            }
        }
        let slowest = self
            .sys
            .kernel
            .modes
            .iter()
            .map(|m| m.rate.abs())
            .fold(f64::INFINITY, f64::min);
        let rate = observed_tail_rate(self.grid.nodes(), &channels[0], slowest);
        GridFunction::new(self.grid.clone(), channels, Some(d3), rate)
    }

    /// Runs the iteration, keeping the trace whatever the outcome.
    pub fn iterate(&self, settings: &PicardSettings) -> IterationOutcome {
        let mut trace = IterationTrace::default();
        let mut current = GridFunction::zeros(self.grid.clone());
        let mut growth = 0;
        for iteration in 1..=settings.max_iter {
            let next = match self.apply_t(&current) {
                Ok(next) => next,
                Err(err) => return IterationOutcome::failed(current, trace, err),
            };
            let delta = next.distance(&current);
            let norm = next.norm_c02();
            if let Some(&prev) = trace.deltas.last() {
                trace
                    .contraction
                    .push(if prev > 0.0 { delta / prev } else { 0.0 });
                growth = if delta > prev { growth + 1 } else { 0 };
            }
            trace.norms.push(norm);
            trace.deltas.push(delta);
            if settings.keep_snapshots {
                trace.snapshots.push(next.clone());
            }
            trace.n_iter = iteration;
            current = next;
            if delta <= settings.fp_tol {
                trace.converged = true;
                return IterationOutcome {
                    z: current,
                    trace,
                    error: None,
                };
            }
            if norm > 10.0 * settings.eta {
                let reason = format!("norm {norm:.3e} left 10x the eta ball");
                return IterationOutcome::failed(
                    current,
                    trace,
                    Error::Diverged { iteration, reason },
                );
            }
            if growth >= 3 {
                let reason = "deltas grew for 3 consecutive steps".to_string();
                return IterationOutcome::failed(
                    current,
                    trace,
                    Error::Diverged { iteration, reason },
                );
            }
        }
        let last_delta = trace.deltas.last().copied().unwrap_or(0.0);
        let err = Error::MaxIter {
            iterations: settings.max_iter,
            last_delta,
        };
        IterationOutcome::failed(current, trace, err)
    }

    /// `‖Tz − z‖₀`.
    pub fn certificate(&self, z: &GridFunction) -> Result<f64> {
        Ok(self.apply_t(z)?.distance(z))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IterationTrace {
    /// `‖ωₙ‖₀` for `n = 1, 2, …`.
    pub norms: Vec<f64>,
    /// `‖ωₙ − ωₙ₋₁‖₀`.
    pub deltas: Vec<f64>,
    /// `deltaₙ / deltaₙ₋₁`.
    pub contraction: Vec<f64>,
    pub converged: bool,
    pub n_iter: usize,
    #[serde(skip)]
    pub snapshots: Vec<GridFunction>,
}

impl IterationTrace {
    /// Contraction estimates taken while the deltas are above the rounding floor.
    pub fn asymptotic_contraction(&self) -> Vec<f64> {
        let floor = 1e3 * f64::EPSILON * self.norms.iter().copied().fold(0.0, f64::max);
        self.contraction
            .iter()
            .zip(self.deltas.iter().skip(1))
            .filter(|(_, d)| **d > floor)
            .map(|(k, _)| *k)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct IterationOutcome {
    /// Last iterate reached.
    pub z: GridFunction,
    pub trace: IterationTrace,
    pub error: Option<Error>,
}

impl IterationOutcome {
    fn failed(z: GridFunction, trace: IterationTrace, err: Error) -> Self {
        IterationOutcome {
            z,
            trace,
            error: Some(err),
        }
    }

    pub fn into_result(self) -> Result<(GridFunction, IterationTrace)> {
        match self.error {
            None => Ok((self.z, self.trace)),
            Some(err) => Err(err),
        }
    }
}

pub fn iterate_to_fixed_point(
    sys: &RiccatiSystem,
    grid: Arc<Grid>,
    settings: &PicardSettings,
) -> Result<(GridFunction, IterationTrace)> {
    PicardSolver::new(sys, grid, settings.quad_tol)?
        .iterate(settings)
        .into_result()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiSequence {
    pub terms: Vec<f64>,
    pub limit: f64,
}

/// `Φ₁ = A`, `Φₙ = A(1 + ρςΦₙ₋₁)`.
pub fn phi_sequence(a: f64, rho: f64, varsigma: f64, n: usize) -> Result<PhiSequence> {
    let ratio = rho * a * varsigma;
    if ratio >= 1.0 {
        return Err(Error::NoLimit { ratio });
    }
    let mut terms = Vec::with_capacity(n);
    let mut phi = a;
    for _ in 0..n {
        terms.push(phi);
        phi = a * (1.0 + rho * varsigma * phi);
    }
    Ok(PhiSequence {
        terms,
        limit: a / (1.0 - ratio),
    })
}

/// Endpoint of the admissible `β` interval nearest the spectrum.
pub fn default_beta(cd: &CharacteristicData, i: usize) -> f64 {
    let l = cd.lambda;
    match i {
        1 => l[1] - l[0],
        2 => l[2] - l[1],
        3 => l[3] - l[2],
        _ => l[2] - l[3],
    }
}

fn beta_admissible(cd: &CharacteristicData, i: usize, beta: f64) -> bool {
    let edge = default_beta(cd, i);
    if i == 4 {
        beta > 0.0 && beta <= edge
    } else {
        beta >= edge && beta < 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub beta: f64,
    pub phi: f64,
    /// `max_t Σⱼ|z⁽ʲ⁾(t)| / (Φ·E(t))` with the single-sided envelope `E(t)`.
    pub max_ratio: f64,
    pub argmax_t: f64,
    /// Same ratio against `Φ·𝔽ᵢ(|p|)`, the head and tail kept separate.
    pub max_ratio_split: f64,
    pub pass: bool,
}

fn ratio_of(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else if rhs > 0.0 {
        lhs / rhs
    } else {
        f64::INFINITY
    }
}

/// Checks `Σⱼ|z⁽ʲ⁾(t)| ≤ Φ·∫e^{−β(t−s)}|p(λᵢ, s)| ds` at every node.
pub fn envelope_check(
    sys: &RiccatiSystem,
    cd: &CharacteristicData,
    z: &GridFunction,
    beta: f64,
    phi: f64,
    quad_tol: f64,
) -> Result<EnvelopeCheck> {
    let i = sys.index.get();
    if !beta_admissible(cd, i, beta) {
        return Err(Error::validation(
            "beta",
            format!("{beta} is outside the admissible interval for root {i}"),
        ));
    }
    let grid = z.grid().clone();
    let pts = grid.panel_points();
    let abs_p: Vec<f64> = pts
        .points
        .par_iter()
        .map(|&s| sys.omega(s).map(f64::abs))
        .collect::<Result<_>>()?;
    let abs_p_at = |s: f64| sys.omega(s).map(f64::abs);
    let t_max = grid.t_max();
    let tail = |rate: f64| -> Result<Vec<f64>> {
        let beyond = quad::semi_infinite(
            |s| Ok((rate * (t_max - s)).exp() * abs_p_at(s)?),
            t_max,
            1.0 / rate.abs(),
            quad_tol,
            t_max + TAIL_REACH,
        )?;
        Ok(tail_convolution(&grid, &pts, &abs_p, rate, beyond))
    };
    let kappa = -beta;
    let merged: Vec<f64> = match i {
        1 => tail(kappa)?,
        4 => head_convolution(&grid, &pts, &abs_p, kappa),
        _ => {
            let head = head_convolution(&grid, &pts, &abs_p, kappa);
            let tail = tail(kappa)?;
            head.iter().zip(&tail).map(|(a, b)| a + b).collect()
        }
    };
    let op = FOperator::new(cd, sys.index);
    let mut split = vec![0.0; grid.len()];
    if let Some(k) = op.head_rate {
        for (s, v) in split
            .iter_mut()
            .zip(head_convolution(&grid, &pts, &abs_p, k))
        {
            *s += v;
        }
    }
    if let Some(k) = op.tail_rate {
        for (s, v) in split.iter_mut().zip(tail(k)?) {
            *s += v;
        }
    }

    let mut max_ratio: f64 = 0.0;
    let mut argmax_t = grid.t0();
    let mut max_ratio_split: f64 = 0.0;
    for (n, &t) in grid.nodes().iter().enumerate() {
        let lhs = (0..3).map(|d| z.channel(d)[n].abs()).sum::<f64>();
        let r = ratio_of(lhs, phi * merged[n]);
        if r > max_ratio {
            max_ratio = r;
            argmax_t = t;
        }
        max_ratio_split = max_ratio_split.max(ratio_of(lhs, phi * split[n]));
    }
    Ok(EnvelopeCheck {
        beta,
        phi,
        max_ratio,
        argmax_t,
        max_ratio_split,
        pass: max_ratio <= 1.0,
    })
}

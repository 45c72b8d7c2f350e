//! Fundamental solutions `yᵢ = exp ∫(λᵢ + zᵢ)` and the checks on their
//! asymptotics: derivative ratios, the Wronskian and the integral formula.

use nalgebra::Matrix4;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exprlang::ScalarFn;
use crate::grid::GridFunction;
use crate::quad::{self, gl16};
use crate::riccati::{derivative_ratios, RiccatiSystem};
use crate::spectra::RootIndex;

#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    pub index: RootIndex,
    pub lambda: f64,
    /// `πᵢ = Π_{k≠i}(λₖ − λᵢ)`.
    pub pi: f64,
    /// `b₀` of the shifted cubic; equals `−πᵢ`.
    pub b: [f64; 3],
    pub t0: f64,
    pub z: GridFunction,
    /// `∫_{t₀}^{tₙ} z`; the `λᵢ(t − t₀)` part is added exactly on evaluation.
    integral_z_nodes: Vec<f64>,
    forcing_nodes: Vec<f64>,
    sys: RiccatiSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolutionPoint {
    pub t: f64,
    pub y: f64,
    pub log_y: f64,
    /// `y⁽ℓ⁾/y` for `ℓ = 1..4`.
    pub ratios: [f64; 4],
}

impl SolutionPoint {
    /// `[y, y′, y″, y‴, y⁗]`.
    pub fn derivatives(&self) -> [f64; 5] {
        let r = self.ratios;
        [
            self.y,
            self.y * r[0],
            self.y * r[1],
            self.y * r[2],
            self.y * r[3],
        ]
    }
}

pub fn fundamental_solution(sys: &RiccatiSystem, z: &GridFunction) -> Result<FundamentalSolution> {
    let grid = z.grid().clone();
    let nodes = grid.nodes();
    let rule = gl16();
    let mut log_y_nodes = Vec::with_capacity(nodes.len());
    let mut forcing_nodes = Vec::with_capacity(nodes.len());
    let (mut log_y, mut forcing) = (0.0, 0.0);
    log_y_nodes.push(0.0);
    forcing_nodes.push(0.0);
    for w in nodes.windows(2) {
        for (s, wt) in rule.mapped(w[0], w[1]) {
            let jet = z.channels_at(s);
            log_y += wt * jet[0];
            forcing += wt * (sys.omega(s)? + sys.eval_f(s, jet)?);
        }
        log_y_nodes.push(log_y);
        forcing_nodes.push(forcing);
    }
    let pi = sys.kernel.gamma.iter().product();
    Ok(FundamentalSolution {
        index: sys.index,
        lambda: sys.lambda,
        pi,
        b: sys.b,
        t0: grid.t0(),
        z: z.clone(),
        integral_z_nodes: log_y_nodes,
        forcing_nodes,
        sys: sys.clone(),
    })
}

impl FundamentalSolution {
    fn locate(&self, t: f64) -> Result<usize> {
        let grid = self.z.grid();
        if !(t >= grid.t0() && t <= grid.t_max()) {
            return Err(Error::validation(
                "t",
                format!("{t} lies outside [{}, {}]", grid.t0(), grid.t_max()),
            ));
        }
        Ok(grid.panel_of(t))
    }

    /// `∫_{t₀}^t (λᵢ + z)`.
    pub fn log_y(&self, t: f64) -> Result<f64> {
        let n = self.locate(t)?;
        let start = self.z.grid().nodes()[n];
        let partial = gl16().integrate(|s| Ok(self.z.jet_at(s)[0]), start, t)?;
        Ok(self.lambda * (t - self.t0) + self.integral_z_nodes[n] + partial)
    }

    /// `∫_{t₀}^t (Ω + F(s, z, z′, z″)) ds`.
    pub fn forcing_integral(&self, t: f64) -> Result<f64> {
        let n = self.locate(t)?;
        let start = self.z.grid().nodes()[n];
        let partial = gl16().integrate(
            |s| {
                let jet = self.z.channels_at(s);
                Ok(self.sys.omega(s)? + self.sys.eval_f(s, jet)?)
            },
            start,
            t,
        )?;
        Ok(self.forcing_nodes[n] + partial)
    }

    pub fn eval(&self, t: f64) -> Result<SolutionPoint> {
        let log_y = self.log_y(t)?;
        let y = log_y.exp();
        if !y.is_finite() {
            return Err(Error::Overflow(format!("y_{} at t = {t}", self.index)));
        }
        Ok(SolutionPoint {
            t,
            y,
            log_y,
            ratios: derivative_ratios(self.lambda, self.z.jet_at(t)),
        })
    }

    /// Node values, for export.
    pub fn node_points(&self) -> Vec<SolutionPoint> {
        let nodes = self.z.grid().nodes();
        nodes
            .iter()
            .enumerate()
            .map(|(n, &t)| {
                let jet = [
                    self.z.channel(0)[n],
                    self.z.channel(1)[n],
                    self.z.channel(2)[n],
                    self.z.jet_at(t)[3],
                ];
                let log_y = self.lambda * (t - self.t0) + self.integral_z_nodes[n];
                SolutionPoint {
                    t,
                    y: log_y.exp(),
                    log_y,
                    ratios: derivative_ratios(self.lambda, jet),
                }
            })
            .collect()
    }

    pub fn system(&self) -> &RiccatiSystem {
        &self.sys
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioLimits {
    /// `(t, |y⁽ℓ⁾/y − λᵢ^ℓ|)` for `ℓ = 1..4`.
    pub samples: Vec<(f64, [f64; 4])>,
    pub final_errors: [f64; 4],
    pub tolerance: f64,
    pub pass: bool,
}

pub fn derivative_ratio_limits(
    fs: &FundamentalSolution,
    ts: &[f64],
    ratio_tol: f64,
) -> Result<RatioLimits> {
    let mut samples = Vec::with_capacity(ts.len());
    for &t in ts {
        let p = fs.eval(t)?;
        let errors = std::array::from_fn(|k| (p.ratios[k] - fs.lambda.powi(k as i32 + 1)).abs());
        samples.push((t, errors));
    }
    let first = samples.first().map_or([0.0; 4], |s| s.1);
    let final_errors = samples.last().map_or([0.0; 4], |s| s.1);
    let pass = final_errors
        .iter()
        .zip(first)
        .all(|(&e, f)| e <= ratio_tol && (e <= f || f == 0.0));
    Ok(RatioLimits {
        samples,
        final_errors,
        tolerance: ratio_tol,
        pass,
    })
}

/// Default sample times for ratio checks: 16 points up to the last node.
pub fn default_ratio_times(fs: &FundamentalSolution) -> Vec<f64> {
    let grid = fs.z.grid();
    let (t0, t1) = (grid.t0(), grid.t_max());
    (0..=16).map(|k| t0 + (t1 - t0) * k as f64 / 16.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WronskianValue {
    pub t: f64,
    /// `det[yᵢ⁽ℓ⁾/yᵢ]`, `ℓ = 0..3`.
    pub normalized: f64,
    /// `Π_{i<j}(λⱼ − λᵢ)`.
    pub vandermonde: f64,
    pub relative_error: f64,
    /// `ln|W|` for the solutions themselves.
    pub log_abs_unnormalized: f64,
    pub unnormalized: Option<f64>,
}

pub fn wronskian_normalized(fss: &[FundamentalSolution], t: f64) -> Result<WronskianValue> {
    if fss.len() != 4 {
        return Err(Error::validation(
            "roots",
            "the Wronskian needs all four solutions",
        ));
    }
    let points = fss
        .iter()
        .map(|fs| fs.eval(t))
        .collect::<Result<Vec<_>>>()?;
    let mut m = Matrix4::<f64>::zeros();
    for (i, p) in points.iter().enumerate() {
        m[(0, i)] = 1.0;
        for l in 1..4 {
            m[(l, i)] = p.ratios[l - 1];
        }
    }
    let normalized = m.determinant();
    let vandermonde = vandermonde_product(fss.iter().map(|f| f.lambda));
    let log_sum: f64 = points.iter().map(|p| p.log_y).sum();
    let log_abs_unnormalized = normalized.abs().ln() + log_sum;
    let scaled = normalized * log_sum.exp();
    let unnormalized = scaled.is_finite().then_some(scaled);
    Ok(WronskianValue {
        t,
        normalized,
        vandermonde,
        relative_error: (normalized - vandermonde).abs() / vandermonde.abs(),
        log_abs_unnormalized,
        unnormalized,
    })
}

pub fn vandermonde_product(lambda: impl IntoIterator<Item = f64>) -> f64 {
    let l: Vec<f64> = lambda.into_iter().collect();
    let mut out = 1.0;
    for i in 0..l.len() {
        for j in i + 1..l.len() {
            out *= l[j] - l[i];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticComparison {
    pub t: f64,
    pub y_direct: f64,
    /// `e^{λᵢ(t−t₀)} exp(∫(Ω+F)/b₀) = e^{λᵢ(t−t₀)} exp(πᵢ⁻¹∫(p − F))`.
    pub y_formula: f64,
    pub relative_gap: f64,
    /// The gap predicted exactly by the boundary term
    /// `−(z″ + b₂z′ + b₁z)|_{t₀}^{t} / b₀`.
    pub predicted_log_gap: f64,
    pub log_gap: f64,
    /// Same formula with `+F` in place of `−F`.
    pub y_formula_plus_f: f64,
    pub relative_gap_plus_f: f64,
    /// Empirical prefactors `y⁽ℓ⁾ / y_formula`, `ℓ = 1..4`.
    pub derivative_prefactors: [f64; 4],
}

pub fn asymptotic_integral_formula(
    fs: &FundamentalSolution,
    t: f64,
) -> Result<AsymptoticComparison> {
    let p = fs.eval(t)?;
    let forcing = fs.forcing_integral(t)?;
    let omega_only = quad::adaptive(|s| fs.sys.omega(s), fs.t0, t, 1e-14)?;
    let f_only = forcing - omega_only;
    let [b2, b1, b0] = fs.b;
    let base = fs.lambda * (t - fs.t0);
    let log_formula = base + forcing / b0;
    let log_formula_plus_f = base + (-omega_only + f_only) / fs.pi;
    let boundary = |s: f64| {
        let j = fs.z.jet_at(s);
        j[2] + b2 * j[1] + b1 * j[0]
    };
    let predicted_log_gap = -(boundary(t) - boundary(fs.t0)) / b0;
    let y_formula = log_formula.exp();
    let y_formula_plus_f = log_formula_plus_f.exp();
    let derivative_prefactors = std::array::from_fn(|k| p.y * p.ratios[k] / y_formula);
    Ok(AsymptoticComparison {
        t,
        y_direct: p.y,
        y_formula,
        relative_gap: (p.y / y_formula - 1.0).abs(),
        predicted_log_gap,
        log_gap: p.log_y - log_formula,
        y_formula_plus_f,
        relative_gap_plus_f: (p.y / y_formula_plus_f - 1.0).abs(),
        derivative_prefactors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_error: f64,
}

/// `∫_{t₀}^t ∫_τ^∞ e^{−a(τ−s)} H(s) ds dτ = −(K(t) − K(t₀))/a − (1/a)∫_{t₀}^t H`
/// with `K(τ) = ∫_τ^∞ e^{−a(τ−s)} H(s) ds`.
pub fn integration_identity(
    a: f64,
    h: &dyn ScalarFn,
    t0: f64,
    t: f64,
    tol: f64,
) -> Result<IdentityCheck> {
    let k = |tau: f64| {
        quad::semi_infinite(
            |s| Ok((-a * (tau - s)).exp() * h.at(s)?),
            tau,
            1.0,
            tol,
            tau + 5000.0,
        )
    };
    let lhs = quad::adaptive(k, t0, t, tol)?;
    let int_h = quad::adaptive(|s| h.at(s), t0, t, tol)?;
    let rhs = -(k(t)? - k(t0)?) / a - int_h / a;
    Ok(IdentityCheck {
        lhs,
        rhs,
        relative_error: (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE),
    })
}

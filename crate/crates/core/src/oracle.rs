//! Direct numerical integration used as ground truth: an adaptive
//! Dormand–Prince 5(4) pair for the fourth-order equation and for the
//! Riccati equation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::riccati::{Perturbations, RiccatiSystem};
use crate::synthesis::FundamentalSolution;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<const N: usize> {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<[f64; N]>,
    pub tol: f64,
}

impl<const N: usize> Trajectory<N> {
    pub fn last(&self) -> [f64; N] {
        *self
            .states
            .last()
            .expect("trajectory has its initial state")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Dopri5 {
    pub fn new(tol: f64) -> Self {
        Dopri5 {
            rtol: tol,
            atol: tol,
            max_steps: 1_000_000,
        }
    }

    pub fn integrate<const N: usize, F>(
        &self,
        mut f: F,
        t0: f64,
        y0: [f64; N],
        t1: f64,
    ) -> Result<Trajectory<N>>
    where
        F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    {
        let mut times = vec![t0];
        let mut states = vec![y0];
        let (mut t, mut y) = (t0, y0);
        let mut h = (1e-3 * (t1 - t0)).clamp(1e-8, 1e-2);
        let mut k1 = f(t, &y)?;
        let mut steps = 0;
        while t < t1 {
            if steps >= self.max_steps {
                return Err(Error::StepUnderflow { t, h });
            }
            steps += 1;
            h = h.min(t1 - t);
            let mut k = [[0.0; N]; 7];
            k[0] = k1;
            for s in 1..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    if A[s][j] != 0.0 {
                        for (yi, kji) in ys.iter_mut().zip(kj) {
                            *yi += h * A[s][j] * kji;
                        }
                    }
                }
                k[s] = f(t + C[s] * h, &ys)?;
            }
            let mut y5 = y;
            let mut err: f64 = 0.0;
            for i in 0..N {
                let (mut d5, mut d4) = (0.0, 0.0);
                for s in 0..7 {
                    d5 += B5[s] * k[s][i];
                    d4 += B4[s] * k[s][i];
                }
                y5[i] = y[i] + h * d5;
                let scale = self.atol + self.rtol * y[i].abs().max(y5[i].abs());
                err = err.max((h * (d5 - d4)).abs() / scale);
            }
            if !err.is_finite() || y5.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("oracle state at t = {t}")));
            }
            if err <= 1.0 {
                t += h;
                y = y5;
                k1 = k[6];
                times.push(t);
                states.push(y);
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t, h });
            }
        }
        Ok(Trajectory {
            times,
            states,
            tol: self.rtol,
        })
    }
}

/// State `(y, y′, y″, y‴)` of the fourth-order equation.
pub fn integrate_linear4(
    a: [f64; 4],
    r: &Perturbations,
    y0: [f64; 4],
    span: (f64, f64),
    tol: f64,
) -> Result<Trajectory<4>> {
    let [a3, a2, a1, a0] = a;
    Dopri5::new(tol).integrate(
        |t, y| {
            let [r0, r1, r2, r3] = r.eval(t)?;
            let y4 = -((a3 + r3) * y[3] + (a2 + r2) * y[2] + (a1 + r1) * y[1] + (a0 + r0) * y[0]);
            Ok([y[1], y[2], y[3], y4])
        },
        span.0,
        y0,
        span.1,
    )
}

/// State `(z, z′, z″)` of the Riccati equation.
pub fn integrate_riccati(
    sys: &RiccatiSystem,
    z0: [f64; 3],
    span: (f64, f64),
    tol: f64,
) -> Result<Trajectory<3>> {
    let [b2, b1, b0] = sys.b;
    Dopri5::new(tol).integrate(
        |t, z| {
            let pw = sys.pointwise(t)?;
            let z3 = pw.omega + sys.f_with(&pw, *z) - (b2 * z[2] + b1 * z[1] + b0 * z[0]);
            Ok([z[1], z[2], z3])
        },
        span.0,
        z0,
        span.1,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparison {
    /// `y` itself, relative error.
    Direct,
    /// `y′/y`, absolute error.
    LogDerivative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossValidation {
    pub comparison: Comparison,
    pub span: (f64, f64),
    pub max_error: f64,
    pub tolerance: f64,
    /// Largest `|z_oracle − z|` over the span from integrating the Riccati equation.
    pub riccati_max_error: f64,
    pub pass: bool,
}

/// Integrates both equations forward from the synthesized initial data and
/// compares with the synthesized solution.
pub fn cross_validate(
    fs: &FundamentalSolution,
    comparison: Comparison,
    span_length: f64,
    tol: f64,
    oracle_tol: f64,
) -> Result<CrossValidation> {
    let sys = fs.system();
    let t0 = fs.t0;
    let t1 = (t0 + span_length).min(fs.z.grid().t_max());
    let start = fs.eval(t0)?;
    let y0 = start.derivatives();
    let traj = integrate_linear4(
        sys.a,
        sys.perturbations(),
        [y0[0], y0[1], y0[2], y0[3]],
        (t0, t1),
        oracle_tol,
    )?;
    let mut max_error: f64 = 0.0;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let p = fs.eval(*t)?;
        let err = match comparison {
            Comparison::Direct => (state[0] - p.y).abs() / p.y.abs(),
            Comparison::LogDerivative => (state[1] / state[0] - p.ratios[0]).abs(),
        };
        max_error = max_error.max(err);
    }
    let z0 = fs.z.channels_at(t0);
    let ric = integrate_riccati(sys, z0, (t0, t1), oracle_tol)?;
    let mut riccati_max_error: f64 = 0.0;
    for (t, state) in ric.times.iter().zip(&ric.states) {
        riccati_max_error = riccati_max_error.max((state[0] - fs.z.jet_at(*t)[0]).abs());
    }
    Ok(CrossValidation {
        comparison,
        span: (t0, t1),
        max_error,
        tolerance: tol,
        riccati_max_error,
        pass: max_error <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEST_A: [f64; 4] = [0.0, -5.0, 0.0, 4.0];

    #[test]
    fn constant_coefficient_exponentials() {
        let r = Perturbations::zero();
        let up = integrate_linear4(TEST_A, &r, [1.0, 2.0, 4.0, 8.0], (0.0, 1.0), 1e-10).unwrap();
        assert!((up.last()[0] - 2f64.exp()).abs() < 1e-8);
        let down =
            integrate_linear4(TEST_A, &r, [1.0, -2.0, 4.0, -8.0], (0.0, 1.0), 1e-10).unwrap();
        assert!((down.last()[0] - (-2f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn long_span_accuracy() {
        let r = Perturbations::zero();
        let traj = integrate_linear4(TEST_A, &r, [1.0, 1.0, 1.0, 1.0], (0.0, 5.0), 1e-10).unwrap();
        assert!((traj.last()[0] / 5f64.exp() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn self_convergence_under_halving() {
        let r = Perturbations::zero();
        let coarse =
            integrate_linear4(TEST_A, &r, [1.0, 2.0, 4.0, 8.0], (0.0, 1.0), 1e-10).unwrap();
        let fine = integrate_linear4(TEST_A, &r, [1.0, 2.0, 4.0, 8.0], (0.0, 1.0), 5e-11).unwrap();
        let end = fine.last()[0];
        assert!((coarse.last()[0] - end).abs() < 10.0 * 1e-10 * end.abs().max(1.0));
    }

    #[test]
    fn scalar_decay() {
        let traj = Dopri5::new(1e-12)
            .integrate(|_, y: &[f64; 1]| Ok([-y[0]]), 0.0, [1.0], 3.0)
            .unwrap();
        assert!((traj.last()[0] - (-3f64).exp()).abs() < 1e-11);
    }
}

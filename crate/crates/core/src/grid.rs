//! Graded time grids, piecewise-Hermite grid functions carrying `z, z′, z″`
//! (and optionally `z‴`) as separate channels, and the exponential
//! convolutions used to apply the Green operator.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::{gl16, ORDER};

/// Nodes `t₀ + (T − t₀)·u²` with `u` uniform on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
}

impl Grid {
    pub fn graded(t0: f64, t_max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation(
                "nodes",
                "a grid needs at least two nodes",
            ));
        }
        if !t0.is_finite() || !t_max.is_finite() || t_max <= t0 {
            return Err(Error::validation("t_max", "must be finite and exceed t0"));
        }
        let len = t_max - t0;
        let last = (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n)
            .map(|k| {
                let u = k as f64 / last;
                t0 + len * u * u
            })
            .collect();
        nodes[n - 1] = t_max;
        Ok(Grid { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2
            || nodes
                .windows(2)
                .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(Error::validation(
                "nodes",
                "must be strictly increasing with at least two entries",
            ));
        }
        Ok(Grid { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn t0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Index `n` of the panel `[tₙ, tₙ₊₁]` containing `t` (clamped).
    pub fn panel_of(&self, t: f64) -> usize {
        let k = self.nodes.partition_point(|&x| x <= t);
        k.saturating_sub(1).min(self.nodes.len() - 2)
    }

    /// Gauss–Legendre points of every panel, panel-major.
    pub fn panel_points(&self) -> PanelPoints {
        let rule = gl16();
        let mut points = Vec::with_capacity((self.len() - 1) * ORDER);
        let mut weights = Vec::with_capacity(points.capacity());
        for w in self.nodes.windows(2) {
            for (x, wt) in rule.mapped(w[0], w[1]) {
                points.push(x);
                weights.push(wt);
            }
        }
        PanelPoints { points, weights }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelPoints {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PanelPoints {
    pub fn panel(&self, n: usize) -> std::ops::Range<usize> {
        n * ORDER..(n + 1) * ORDER
    }
}

/// `z, z′, z″` (and optionally `z‴`) sampled on a grid.
///
/// Between nodes channel `d` is the cubic Hermite interpolant whose end
/// slopes are channel `d + 1`; the last channel uses `z‴` when present and
/// three-point differences otherwise. Beyond the last node every channel is
/// continued as `c(T)·e^{−rate·(t − T)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<Grid>,
    channels: [Vec<f64>; 3],
    d3: Option<Vec<f64>>,
    d2_slopes: Vec<f64>,
    tail_rate: f64,
}

impl GridFunction {
    pub fn new(
        grid: Arc<Grid>,
        channels: [Vec<f64>; 3],
        d3: Option<Vec<f64>>,
        tail_rate: f64,
    ) -> Result<Self> {
        let n = grid.len();
        if channels.iter().any(|c| c.len() != n) || d3.as_ref().is_some_and(|c| c.len() != n) {
            return Err(Error::validation(
                "grid function",
                "channel length differs from grid size",
            ));
        }
        let finite = channels
            .iter()
            .chain(d3.iter())
            .all(|c| c.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::NonFinite("grid function channel".to_string()));
        }
        let d2_slopes = match &d3 {
            Some(d3) => d3.clone(),
            None => three_point_slopes(grid.nodes(), &channels[2]),
        };
        Ok(GridFunction {
            grid,
            channels,
            d3,
            d2_slopes,
            tail_rate: tail_rate.max(1e-3),
        })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        GridFunction {
            grid,
            channels: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            d3: Some(vec![0.0; n]),
            d2_slopes: vec![0.0; n],
            tail_rate: 1.0,
        }
    }

    /// Samples `f(t) = [z, z′, z″, z‴]` at the nodes.
    pub fn from_jet_fn<F: Fn(f64) -> [f64; 4]>(
        grid: Arc<Grid>,
        f: F,
        tail_rate: f64,
    ) -> Result<Self> {
        let jets: Vec<[f64; 4]> = grid.nodes().iter().map(|&t| f(t)).collect();
        let ch = |d: usize| jets.iter().map(|j| j[d]).collect::<Vec<_>>();
        Self::new(grid, [ch(0), ch(1), ch(2)], Some(ch(3)), tail_rate)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn channel(&self, d: usize) -> &[f64] {
        &self.channels[d]
    }

    pub fn d3(&self) -> Option<&[f64]> {
        self.d3.as_deref()
    }

    pub fn tail_rate(&self) -> f64 {
        self.tail_rate
    }

    fn slope(&self, d: usize, n: usize) -> f64 {
        if d < 2 {
            self.channels[d + 1][n]
        } else {
            self.d2_slopes[n]
        }
    }

    fn hermite(&self, d: usize, n: usize, t: f64) -> (f64, f64) {
        let nodes = self.grid.nodes();
        let h = nodes[n + 1] - nodes[n];
        let s = (t - nodes[n]) / h;
        let (p0, p1) = (self.channels[d][n], self.channels[d][n + 1]);
        let (m0, m1) = (self.slope(d, n), self.slope(d, n + 1));
        let s2 = s * s;
        let s3 = s2 * s;
        let value = (2.0 * s3 - 3.0 * s2 + 1.0) * p0
            + (s3 - 2.0 * s2 + s) * h * m0
            + (3.0 * s2 - 2.0 * s3) * p1
            + (s3 - s2) * h * m1;
        let deriv = (6.0 * s2 - 6.0 * s) * (p0 - p1) / h
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (3.0 * s2 - 2.0 * s) * m1;
        (value, deriv)
    }

    /// `[z, z′, z″]` at `t`.
    pub fn channels_at(&self, t: f64) -> [f64; 3] {
        let j = self.jet_at(t);
        [j[0], j[1], j[2]]
    }

    /// `[z, z′, z″, z‴]` at `t`; `z‴` is the derivative of the `z″` interpolant.
    pub fn jet_at(&self, t: f64) -> [f64; 4] {
        let t_max = self.grid.t_max();
        if t > t_max {
            let last = self.grid.len() - 1;
            let decay = (-self.tail_rate * (t - t_max)).exp();
            return [
                self.channels[0][last] * decay,
                self.channels[1][last] * decay,
                self.channels[2][last] * decay,
                self.d2_slopes[last] * decay,
            ];
        }
        let t = t.max(self.grid.t0());
        let n = self.grid.panel_of(t);
        let (v0, _) = self.hermite(0, n, t);
        let (v1, _) = self.hermite(1, n, t);
        let (v2, v3) = self.hermite(2, n, t);
        [v0, v1, v2, v3]
    }

    /// `max_t Σ_{d≤2} |z⁽ᵈ⁾(t)|` over the nodes.
    pub fn norm_c02(&self) -> f64 {
        (0..self.grid.len())
            .map(|n| self.channels.iter().map(|c| c[n].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `C⁰₂` distance to `other`, which must live on the same grid.
    pub fn distance(&self, other: &GridFunction) -> f64 {
        (0..self.grid.len())
            .map(|n| {
                (0..3)
                    .map(|d| (self.channels[d][n] - other.channels[d][n]).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Largest mismatch between the increment of channel `d` across a panel and
    /// the integral of the interpolant of channel `d + 1`, for `d = 0, 1`.
    pub fn consistency_error(&self) -> f64 {
        let nodes = self.grid.nodes();
        let mut worst: f64 = 0.0;
        for n in 0..nodes.len() - 1 {
            let h = nodes[n + 1] - nodes[n];
            for d in 0..2 {
                let increment = self.channels[d][n + 1] - self.channels[d][n];
                let (p0, p1) = (self.channels[d + 1][n], self.channels[d + 1][n + 1]);
                let (m0, m1) = (self.slope(d + 1, n), self.slope(d + 1, n + 1));
                let integral = h * (p0 + p1) / 2.0 + h * h * (m0 - m1) / 12.0;
                worst = worst.max((increment - integral).abs());
            }
        }
        worst
    }

    /// `∫_{t₀}^{tₙ} z` at every node, from the quintic Hermite rule on each panel.
    pub fn cumulative_integral(&self) -> Vec<f64> {
        let nodes = self.grid.nodes();
        let [z, dz, d2z] = &self.channels;
        let mut out = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        out.push(acc);
        for n in 0..nodes.len() - 1 {
            let h = nodes[n + 1] - nodes[n];
            acc += h * (z[n] + z[n + 1]) / 2.0
                + h * h * (dz[n] - dz[n + 1]) / 10.0
                + h * h * h * (d2z[n] + d2z[n + 1]) / 120.0;
            out.push(acc);
        }
        out
    }
}

impl crate::exprlang::ScalarFn for GridFunction {
    fn at(&self, t: f64) -> Result<f64> {
        Ok(self.jet_at(t)[0])
    }
}

fn three_point_slopes(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    if n == 2 {
        let s = (values[1] - values[0]) / (nodes[1] - nodes[0]);
        return vec![s, s];
    }
    let interior = |k: usize| {
        let (h0, h1) = (nodes[k] - nodes[k - 1], nodes[k + 1] - nodes[k]);
        let (d0, d1) = (
            (values[k] - values[k - 1]) / h0,
            (values[k + 1] - values[k]) / h1,
        );
        (h1 * d0 + h0 * d1) / (h0 + h1)
    };
    let mut out = vec![0.0; n];
    for (k, slot) in out.iter_mut().enumerate().take(n - 1).skip(1) {
        *slot = interior(k);
    }
    let d_first = (values[1] - values[0]) / (nodes[1] - nodes[0]);
    out[0] = 2.0 * d_first - out[1];
    let d_last = (values[n - 1] - values[n - 2]) / (nodes[n - 1] - nodes[n - 2]);
    out[n - 1] = 2.0 * d_last - out[n - 2];
    out
}

/// Decay rate of the last two node values of `values`, or `fallback`.
pub fn observed_tail_rate(nodes: &[f64], values: &[f64], fallback: f64) -> f64 {
    let n = nodes.len();
    if n < 2 {
        return fallback;
    }
    let (a, b) = (values[n - 2].abs(), values[n - 1].abs());
    if a > 0.0 && b > 0.0 {
        let rate = (a.ln() - b.ln()) / (nodes[n - 1] - nodes[n - 2]);
        if rate.is_finite() && rate > 0.0 {
            return rate;
        }
    }
    fallback
}

/// `H(tₙ) = ∫_{t₀}^{tₙ} e^{κ(tₙ − s)} f(s) ds` for every node, given `f` at
/// the panel points.
pub fn head_convolution(grid: &Grid, pts: &PanelPoints, f: &[f64], rate: f64) -> Vec<f64> {
    let nodes = grid.nodes();
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    out.push(acc);
    for n in 0..nodes.len() - 1 {
        let right = nodes[n + 1];
        let mut panel = 0.0;
        for q in pts.panel(n) {
            panel += pts.weights[q] * (rate * (right - pts.points[q])).exp() * f[q];
        }
        acc = (rate * (right - nodes[n])).exp() * acc + panel;
        out.push(acc);
    }
    out
}

/// `H(tₙ) = ∫_{tₙ}^{∞} e^{κ(tₙ − s)} f(s) ds` for every node, given `f` at the
/// panel points and `beyond = H(T)`.
pub fn tail_convolution(
    grid: &Grid,
    pts: &PanelPoints,
    f: &[f64],
    rate: f64,
    beyond: f64,
) -> Vec<f64> {
    let nodes = grid.nodes();
    let mut out = vec![0.0; nodes.len()];
    let mut acc = beyond;
    out[nodes.len() - 1] = acc;
    for n in (0..nodes.len() - 1).rev() {
        let left = nodes[n];
        let mut panel = 0.0;
        for q in pts.panel(n) {
            panel += pts.weights[q] * (rate * (left - pts.points[q])).exp() * f[q];
        }
        acc = (rate * (left - nodes[n + 1])).exp() * acc + panel;
        out[n] = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(Grid::graded(0.0, 10.0, n).unwrap())
    }

    #[test]
    fn graded_nodes_cluster_near_start() {
        let g = Grid::graded(1.0, 5.0, 5).unwrap();
        assert_eq!(g.nodes(), &[1.0, 1.25, 2.0, 3.25, 5.0]);
        assert_eq!(g.panel_of(1.3), 1);
        assert_eq!(g.panel_of(5.0), 3);
        assert_eq!(g.panel_of(0.0), 0);
    }

    #[test]
    fn hermite_channels_track_smooth_function() {
        let g = grid(400);
        let z = GridFunction::from_jet_fn(
            g,
            |t| {
                let e = (-t).exp();
                [
                    t.sin() * e,
                    (t.cos() - t.sin()) * e,
                    -2.0 * t.cos() * e,
                    2.0 * (t.cos() + t.sin()) * e,
                ]
            },
            1.0,
        )
        .unwrap();
        for t in [0.013, 0.7, 3.3, 9.91] {
            let j = z.jet_at(t);
            let e = (-t).exp();
            assert!((j[0] - t.sin() * e).abs() < 1e-8, "{t}");
            assert!((j[2] + 2.0 * t.cos() * e).abs() < 1e-6, "{t}");
        }
        assert!(z.consistency_error() < 1e-7);
        let cum = z.cumulative_integral();
        let exact = |t: f64| 0.5 * (1.0 - (-t).exp() * (t.sin() + t.cos()));
        assert!((cum[cum.len() - 1] - exact(10.0)).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_beyond_last_node() {
        let g = grid(50);
        let z = GridFunction::from_jet_fn(
            g,
            |t| [(-t).exp(), -(-t).exp(), (-t).exp(), -(-t).exp()],
            1.0,
        )
        .unwrap();
        assert!((z.jet_at(12.0)[0] - (-12.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn norms_and_distance() {
        let g = grid(20);
        let a = GridFunction::zeros(g.clone());
        let b = GridFunction::from_jet_fn(g, |_| [1.0, -2.0, 0.5, 0.0], 1.0).unwrap();
        assert_eq!(b.norm_c02(), 3.5);
        assert_eq!(a.distance(&b), 3.5);
    }

    #[test]
    fn convolutions_match_closed_forms() {
        let g = grid(300);
        let pts = g.panel_points();
        let f: Vec<f64> = pts.points.iter().map(|s| (-2.0 * s).exp()).collect();
        // ∫₀ᵗ e^{−(t−s)} e^{−2s} ds = e^{−t} − e^{−2t}
        let head = head_convolution(&g, &pts, &f, -1.0);
        for (t, h) in g.nodes().iter().zip(&head) {
            assert!((h - ((-t).exp() - (-2.0 * t).exp())).abs() < 1e-13);
        }
        // ∫ₜ^∞ e^{(t−s)} e^{−2s} ds = e^{−2t}/3
        let beyond = (-20.0f64).exp() / 3.0;
        let tail = tail_convolution(&g, &pts, &f, 1.0, beyond);
        for (t, h) in g.nodes().iter().zip(&tail) {
            assert!((h - (-2.0 * t).exp() / 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn tail_rate_estimate() {
        let nodes = [0.0, 1.0, 2.0];
        let values = [1.0, (-3.0f64).exp(), (-6.0f64).exp()];
        assert!((observed_tail_rate(&nodes, &values, 0.5) - 3.0).abs() < 1e-12);
        assert_eq!(observed_tail_rate(&nodes, &[0.0, 0.0, 0.0], 0.5), 0.5);
    }
}

//! Characteristic data of the unperturbed quartic.
//!
//! Roots of `λ⁴ + a₃λ³ + a₂λ² + a₁λ + a₀` are found as eigenvalues of the
//! companion matrix and then Newton-polished. The ordered, well-separated
//! real roots and, for each root `λᵢ`, the shifted triple `{λⱼ − λᵢ : j ≠ i}`
//! make up [`CharacteristicData`].

use std::fmt;

use nalgebra::{Complex, Matrix4, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based index of a characteristic root, `1..=4`, ordered by decreasing value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct RootIndex(usize);

impl RootIndex {
    pub const ALL: [RootIndex; 4] = [RootIndex(1), RootIndex(2), RootIndex(3), RootIndex(4)];

    pub fn new(index: usize) -> Result<Self> {
        if (1..=4).contains(&index) {
            Ok(RootIndex(index))
        } else {
            Err(Error::validation(
                "root index",
                format!("{index} is not in 1..=4"),
            ))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn zero_based(self) -> usize {
        self.0 - 1
    }
}

impl TryFrom<usize> for RootIndex {
    type Error = Error;

    fn try_from(value: usize) -> Result<Self> {
        RootIndex::new(value)
    }
}

impl From<RootIndex> for usize {
    fn from(value: RootIndex) -> usize {
        value.0
    }
}

impl fmt::Display for RootIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootTolerances {
    /// Minimal admissible gap between consecutive roots.
    pub gap_tol: f64,
    /// Largest imaginary part still treated as round-off.
    pub imag_tol: f64,
    /// Residual bound relative to the size of the polynomial terms.
    pub root_tol: f64,
}

impl Default for RootTolerances {
    fn default() -> Self {
        RootTolerances {
            gap_tol: 1e-8,
            imag_tol: 1e-9,
            root_tol: 1e-12,
        }
    }
}

/// `[a₃, a₂, a₁, a₀]` of the monic quartic.
pub type QuarticCoefficients = [f64; 4];

fn quartic_value(a: &QuarticCoefficients, x: f64) -> f64 {
    (((x + a[0]) * x + a[1]) * x + a[2]) * x + a[3]
}

fn quartic_derivative(a: &QuarticCoefficients, x: f64) -> f64 {
    ((4.0 * x + 3.0 * a[0]) * x + 2.0 * a[1]) * x + a[2]
}

fn quartic_scale(a: &QuarticCoefficients, x: f64) -> f64 {
    let ax = x.abs();
    ax.powi(4) + a[0].abs() * ax.powi(3) + a[1].abs() * ax * ax + a[2].abs() * ax + a[3].abs()
}

/// Residual of the quartic at `x` relative to the magnitude of its terms.
pub fn quartic_relative_residual(a: &QuarticCoefficients, x: f64) -> f64 {
    let scale = quartic_scale(a, x);
    let value = quartic_value(a, x).abs();
    if scale == 0.0 {
        value
    } else {
        value / scale
    }
}

/// True when `x` is a root up to backward rounding of the coefficients, the
/// most that can be asked of a multiple root.
fn backward_stable(a: &QuarticCoefficients, x: f64) -> bool {
    let coeff_scale = 1.0 + a.iter().map(|c| c.abs()).sum::<f64>();
    quartic_value(a, x).abs() <= 16.0 * f64::EPSILON * coeff_scale * x.abs().max(1.0).powi(4)
}

fn polish(a: &QuarticCoefficients, mut x: f64, root_tol: f64) -> Result<f64> {
    for _ in 0..4 {
        if quartic_relative_residual(a, x) <= root_tol || backward_stable(a, x) {
            return Ok(x);
        }
        let slope = quartic_derivative(a, x);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = x - quartic_value(a, x) / slope;
        if !next.is_finite() {
            break;
        }
        x = next;
    }
    let residual = quartic_relative_residual(a, x);
    if residual <= root_tol || backward_stable(a, x) {
        Ok(x)
    } else {
        Err(Error::IllConditioned { root: x, residual })
    }
}

/// Eigenvalues through a Schur form with bounded iterations. Unshifted QR can
/// cycle on companion matrices such as that of `λ⁴ + 1`; a diagonal shift
/// breaks the symmetry.
fn companion_eigenvalues(companion: &Matrix4<f64>) -> Result<[Complex<f64>; 4]> {
    let scale = 1.0 + companion.amax();
    for shift in [0.0, 0.1 * scale, -0.37 * scale] {
        let shifted = companion + Matrix4::identity() * shift;
        if let Some(schur) = Schur::try_new(shifted, f64::EPSILON, 10_000) {
            let ev = schur.complex_eigenvalues();
            return Ok(std::array::from_fn(|k| ev[k] - Complex::new(shift, 0.0)));
        }
    }
    Err(Error::NonFinite(
        "companion eigenvalues did not converge".into(),
    ))
}

/// All four roots of the monic quartic, in decreasing order, when they are real.
pub fn solve_quartic_real(a: QuarticCoefficients, tol: &RootTolerances) -> Result<[f64; 4]> {
    if a.iter().any(|c| !c.is_finite()) {
        return Err(Error::validation("coefficients", "must be finite"));
    }
    #[rustfmt::skip]
    let companion = Matrix4::new(
        -a[0], -a[1], -a[2], -a[3],
        1.0,   0.0,   0.0,   0.0,
        0.0,   1.0,   0.0,   0.0,
        0.0,   0.0,   1.0,   0.0,
    );
    let eigen = companion_eigenvalues(&companion)?;
    let max_imag = eigen.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    let magnitude = 1.0 + eigen.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    if max_imag > tol.imag_tol * magnitude {
        return Err(Error::ComplexRoots { max_imag });
    }
    let mut roots = [0.0; 4];
    for (slot, value) in roots.iter_mut().zip(eigen.iter()) {
        *slot = polish(&a, value.re, tol.root_tol)?;
    }
    roots.sort_by(|x, y| y.total_cmp(x));
    Ok(roots)
}

/// Ordered real roots with their shifted triples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicData {
    /// `[a₃, a₂, a₁, a₀]`.
    pub coefficients: QuarticCoefficients,
    /// Strictly decreasing roots.
    pub lambda: [f64; 4],
    /// `gamma[i]` lists `λⱼ − λᵢ` for `j ≠ i` in increasing `j`, hence decreasing value.
    pub gamma: [[f64; 3]; 4],
    /// `λ₁−λ₂, λ₂−λ₃, λ₃−λ₄`.
    pub gaps: [f64; 3],
}

/// Sorts `roots`, checks the separation required by the method and derives the
/// coefficients by Vieta's formulas.
pub fn order_and_check_h1(roots: [f64; 4], gap_tol: f64) -> Result<CharacteristicData> {
    let mut lambda = roots;
    if lambda.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("roots", "must be finite"));
    }
    lambda.sort_by(|x, y| y.total_cmp(x));
    let [l1, l2, l3, l4] = lambda;
    let e1 = l1 + l2 + l3 + l4;
    let e2 = l1 * l2 + l1 * l3 + l1 * l4 + l2 * l3 + l2 * l4 + l3 * l4;
    let e3 = l1 * l2 * l3 + l1 * l2 * l4 + l1 * l3 * l4 + l2 * l3 * l4;
    let e4 = l1 * l2 * l3 * l4;
    CharacteristicData::assemble([-e1, e2, -e3, e4], lambda, gap_tol)
}

impl CharacteristicData {
    /// Solves the quartic and checks that its roots are real and separated.
    pub fn from_coefficients(a: QuarticCoefficients, tol: &RootTolerances) -> Result<Self> {
        let lambda = solve_quartic_real(a, tol)?;
        Self::assemble(a, lambda, tol.gap_tol)
    }

    fn assemble(coefficients: QuarticCoefficients, lambda: [f64; 4], gap_tol: f64) -> Result<Self> {
        let gaps = [
            lambda[0] - lambda[1],
            lambda[1] - lambda[2],
            lambda[2] - lambda[3],
        ];
        let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        if min_gap < gap_tol {
            return Err(Error::RepeatedRealParts {
                gap: min_gap,
                tol: gap_tol,
            });
        }
        let mut gamma = [[0.0; 3]; 4];
        for (i, row) in gamma.iter_mut().enumerate() {
            let mut k = 0;
            for (j, &lj) in lambda.iter().enumerate() {
                if j != i {
                    row[k] = lj - lambda[i];
                    k += 1;
                }
            }
        }
        Ok(CharacteristicData {
            coefficients,
            lambda,
            gamma,
            gaps,
        })
    }

    pub fn a3(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn a2(&self) -> f64 {
        self.coefficients[1]
    }

    pub fn a1(&self) -> f64 {
        self.coefficients[2]
    }

    pub fn a0(&self) -> f64 {
        self.coefficients[3]
    }

    pub fn root(&self, i: RootIndex) -> f64 {
        self.lambda[i.zero_based()]
    }

    pub fn shifted_roots(&self, i: RootIndex) -> [f64; 3] {
        self.gamma[i.zero_based()]
    }

    pub fn min_gap(&self) -> f64 {
        self.gaps.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(b₂, b₁, b₀)` of the cubic `μ³ + b₂μ² + b₁μ + b₀` whose roots are `λⱼ − λᵢ`.
    pub fn shifted_cubic_coeffs(&self, i: RootIndex) -> [f64; 3] {
        let l = self.root(i);
        let (a3, a2, a1) = (self.a3(), self.a2(), self.a1());
        [
            4.0 * l + a3,
            6.0 * l * l + 3.0 * l * a3 + a2,
            4.0 * l * l * l + 3.0 * l * l * a3 + 2.0 * l * a2 + a1,
        ]
    }

    /// `πᵢ = Π_{k≠i} (λₖ − λᵢ)`.
    pub fn pi(&self, i: RootIndex) -> f64 {
        self.shifted_roots(i).iter().product()
    }

    /// Largest relative residual of the quartic over the stored roots.
    pub fn root_residual(&self) -> f64 {
        self.lambda
            .iter()
            .map(|&x| quartic_relative_residual(&self.coefficients, x))
            .fold(0.0, f64::max)
    }
}

/// Value of `μ³ + b₂μ² + b₁μ + b₀`.
pub fn cubic_value(b: [f64; 3], mu: f64) -> f64 {
    ((mu + b[0]) * mu + b[1]) * mu + b[2]
}

//! Problem specification files and the biharmonic preset.
//!
//! ```toml
//! [equation]
//! a3 = 0.0
//! a2 = -5.0
//! a1 = 0.0
//! a0 = 4.0
//! r0 = "0.001*exp(-t)"
//!
//! [domain]
//! t0 = 0.0
//! nodes = 2048
//!
//! [solver]
//! eta = 0.25
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exprlang::parse;
use crate::riccati::Perturbations;
use crate::spectra::RootTolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationSection {
    pub a3: f64,
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    #[serde(default = "zero_expr")]
    pub r0: String,
    #[serde(default = "zero_expr")]
    pub r1: String,
    #[serde(default = "zero_expr")]
    pub r2: String,
    #[serde(default = "zero_expr")]
    pub r3: String,
}

fn zero_expr() -> String {
    "0".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSection {
    pub t0: f64,
    /// Defaults to `t₀ + ln(10¹²)/min gap`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub nodes: usize,
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection {
            t0: 0.0,
            t_max: None,
            nodes: 2048,
        }
    }
}

/// Numerical knobs; every field can be overridden with `--tol key=value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub eta: f64,
    pub fp_tol: f64,
    pub max_iter: usize,
    pub quad_tol: f64,
    pub root_tol: f64,
    pub gap_tol: f64,
    pub imag_tol: f64,
    pub h2_tol: f64,
    pub residual_tol: f64,
    pub ratio_tol: f64,
    pub oracle_tol: f64,
    pub dominant_tol: f64,
    pub subdominant_tol: f64,
    pub wronskian_tol: f64,
    pub dominant_span: f64,
    pub subdominant_span: f64,
    pub rho_samples: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            eta: 0.25,
            fp_tol: 1e-10,
            max_iter: 50,
            quad_tol: 1e-12,
            root_tol: 1e-12,
            gap_tol: 1e-8,
            imag_tol: 1e-9,
            h2_tol: 1e-6,
            residual_tol: 1e-6,
            ratio_tol: 1e-4,
            oracle_tol: 1e-10,
            dominant_tol: 1e-4,
            subdominant_tol: 1e-3,
            wronskian_tol: 1e-2,
            dominant_span: 5.0,
            subdominant_span: 3.0,
            rho_samples: 256,
        }
    }
}

impl SolverSection {
    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let float = || {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::validation(key, format!("`{value}` is not a number")))
        };
        let count = || {
            value.trim().parse::<usize>().map_err(|_| {
                Error::validation(key, format!("`{value}` is not a non-negative integer"))
            })
        };
        match key {
            "eta" => self.eta = float()?,
            "fp_tol" => self.fp_tol = float()?,
            "max_iter" => self.max_iter = count()?,
            "quad_tol" => self.quad_tol = float()?,
            "root_tol" => self.root_tol = float()?,
            "gap_tol" => self.gap_tol = float()?,
            "imag_tol" => self.imag_tol = float()?,
            "h2_tol" => self.h2_tol = float()?,
            "residual_tol" => self.residual_tol = float()?,
            "ratio_tol" => self.ratio_tol = float()?,
            "oracle_tol" => self.oracle_tol = float()?,
            "dominant_tol" => self.dominant_tol = float()?,
            "subdominant_tol" => self.subdominant_tol = float()?,
            "wronskian_tol" => self.wronskian_tol = float()?,
            "dominant_span" => self.dominant_span = float()?,
            "subdominant_span" => self.subdominant_span = float()?,
            "rho_samples" => self.rho_samples = count()?,
            _ => return Err(Error::validation(key, "unknown tolerance key")),
        }
        Ok(())
    }

    pub fn root_tolerances(&self) -> RootTolerances {
        RootTolerances {
            gap_tol: self.gap_tol,
            imag_tol: self.imag_tol,
            root_tol: self.root_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub equation: EquationSection,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub solver: SolverSection,
}

impl ProblemSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ProblemSpec = toml::from_str(text).map_err(|err| Error::Parse {
            line: err.span().map_or(0, |span| line_of(text, span.start)),
            message: err.message().to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("problem specs always serialize")
    }

    /// Constant-coefficient problem with the given roots' coefficients.
    pub fn unperturbed(a: [f64; 4]) -> Self {
        ProblemSpec {
            equation: EquationSection {
                a3: a[0],
                a2: a[1],
                a1: a[2],
                a0: a[3],
                r0: zero_expr(),
                r1: zero_expr(),
                r2: zero_expr(),
                r3: zero_expr(),
            },
            domain: DomainSection::default(),
            solver: SolverSection::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.equation;
        for (name, v) in [("a3", e.a3), ("a2", e.a2), ("a1", e.a1), ("a0", e.a0)] {
            if !v.is_finite() {
                return Err(Error::validation(name, "must be finite"));
            }
        }
        self.perturbations()?;
        let d = &self.domain;
        if !d.t0.is_finite() {
            return Err(Error::validation("t0", "must be finite"));
        }
        if let Some(t_max) = d.t_max {
            if !t_max.is_finite() || t_max <= d.t0 {
                return Err(Error::validation("t_max", "t_max must exceed t0"));
            }
        }
        if d.nodes < 64 {
            return Err(Error::validation("nodes", "nodes must be at least 64"));
        }
        let s = &self.solver;
        if !(s.eta > 0.0 && s.eta < 0.5) {
            return Err(Error::validation("eta", "eta must lie in (0,0.5)"));
        }
        let positive = [
            ("fp_tol", s.fp_tol),
            ("quad_tol", s.quad_tol),
            ("root_tol", s.root_tol),
            ("gap_tol", s.gap_tol),
            ("imag_tol", s.imag_tol),
            ("h2_tol", s.h2_tol),
            ("residual_tol", s.residual_tol),
            ("ratio_tol", s.ratio_tol),
            ("oracle_tol", s.oracle_tol),
            ("dominant_tol", s.dominant_tol),
            ("subdominant_tol", s.subdominant_tol),
            ("wronskian_tol", s.wronskian_tol),
            ("dominant_span", s.dominant_span),
            ("subdominant_span", s.subdominant_span),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(name, format!("{name} must be positive")));
            }
        }
        if s.max_iter == 0 {
            return Err(Error::validation("max_iter", "max_iter must be at least 1"));
        }
        if s.rho_samples < 8 {
            return Err(Error::validation(
                "rho_samples",
                "rho_samples must be at least 8",
            ));
        }
        Ok(())
    }

    /// `[a₃, a₂, a₁, a₀]`.
    pub fn coefficients(&self) -> [f64; 4] {
        let e = &self.equation;
        [e.a3, e.a2, e.a1, e.a0]
    }

    pub fn perturbations(&self) -> Result<Arc<Perturbations>> {
        let e = &self.equation;
        let mut out = Vec::with_capacity(4);
        for (name, text) in [("r0", &e.r0), ("r1", &e.r1), ("r2", &e.r2), ("r3", &e.r3)] {
            out.push(parse(text).map_err(|err| Error::validation(name, err.to_string()))?);
        }
        let r: [_; 4] = out.try_into().expect("four perturbations");
        Ok(Arc::new(Perturbations::new(r)))
    }

    pub fn t_max(&self, min_gap: f64) -> f64 {
        self.domain
            .t_max
            .unwrap_or(self.domain.t0 + 1e12f64.ln() / min_gap)
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Coefficients of the radial biharmonic equation after the change of
/// variables `v(t) = e^{−4t/(p−1)} φ(eᵗ)`, together with its known roots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Biharmonic {
    pub n: f64,
    pub p: f64,
    /// `[K₃, K₂, K₁, K₀]`.
    pub k: [f64; 4],
    /// `K₁` with the prefactor `8/(p−1)³` instead of `2/(p−1)³`.
    pub k1_alternative: f64,
    /// Decreasing.
    pub roots: [f64; 4],
}

pub fn biharmonic(n: f64, p: f64) -> Result<Biharmonic> {
    if !n.is_finite() || n < 5.0 {
        return Err(Error::validation("n", "dimension must be at least 5"));
    }
    if !p.is_finite() || p <= (n + 4.0) / (n - 4.0) {
        return Err(Error::validation("p", "p must exceed (n+4)/(n-4)"));
    }
    let q = p - 1.0;
    let m = n * n - 10.0 * n + 20.0;
    let k3 = 2.0 / q * ((n - 4.0) * q - 8.0);
    let k2 = (m * q * q - 24.0 * (n - 4.0) * q + 96.0) / (q * q);
    let k1_bracket =
        (n - 2.0) * (n - 4.0) * q.powi(3) + 4.0 * m * q * q - 48.0 * (n - 4.0) * q + 128.0;
    let k1 = -2.0 / q.powi(3) * k1_bracket;
    let k0 = 8.0 / q.powi(4)
        * ((n - 2.0) * (n - 4.0) * q.powi(3) + 2.0 * m * q * q - 16.0 * (n - 4.0) * q + 32.0);
    Ok(Biharmonic {
        n,
        p,
        k: [k3, k2, k1, k0],
        k1_alternative: -8.0 / q.powi(3) * k1_bracket,
        roots: [
            2.0 * (p + 1.0) / q,
            4.0 / q,
            4.0 * p / q - n,
            2.0 * (p + 1.0) / q - n,
        ],
    })
}

pub fn biharmonic_preset(n: f64, p: f64) -> Result<ProblemSpec> {
    Ok(ProblemSpec::unperturbed(biharmonic(n, p)?.k))
}

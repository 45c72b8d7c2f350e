//! The analyze / solve / verify / report pipeline and its output files.
//!
//! `report.json` always has the same keys. Anything a stage did not compute
//! is `null`, and every root carries a `status` string.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::greens::{select_orientation, OrientationReport};
use crate::grid::{Grid, GridFunction};
use crate::hypotheses::{assess, EnvelopeReport, HypothesisSettings};
use crate::oracle::{cross_validate, Comparison, CrossValidation};
use crate::picard::{
    default_beta, envelope_check, EnvelopeCheck, IterationTrace, PicardSettings, PicardSolver,
};
use crate::problem::ProblemSpec;
use crate::riccati::{Perturbations, RiccatiSystem};
use crate::spectra::{CharacteristicData, RootIndex};
use crate::synthesis::{
    asymptotic_integral_formula, default_ratio_times, derivative_ratio_limits,
    fundamental_solution, wronskian_normalized, AsymptoticComparison, FundamentalSolution,
    RatioLimits, WronskianValue,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Analyze,
    Solve,
    Verify,
    Report,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Empty means all four roots.
    pub roots: Vec<RootIndex>,
    pub trace: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub coefficients: [f64; 4],
    pub lambda: [f64; 4],
    pub min_gap: f64,
    pub root_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainSummary {
    pub t0: f64,
    pub t_max: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardSummary {
    pub converged: bool,
    pub iterations: usize,
    pub trace: IterationTrace,
    /// `‖Tz − z‖₀` at the returned fixed point.
    pub certificate: Option<f64>,
    pub max_contraction: Option<f64>,
    /// `ρAς`, the a priori contraction factor.
    pub contraction_bound: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualSummary {
    pub max_at_nodes: f64,
    pub max_at_midpoints: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RootReport {
    pub index: RootIndex,
    pub lambda: f64,
    pub gamma: [f64; 3],
    pub case: String,
    pub status: String,
    pub error: Option<String>,
    pub orientation: Option<OrientationReport>,
    pub hypotheses: Option<EnvelopeReport>,
    pub phi_limit: Option<f64>,
    pub picard: Option<PicardSummary>,
    pub residual: Option<ResidualSummary>,
    /// Diagnostic only; it does not affect the exit status.
    pub envelope: Option<EnvelopeCheck>,
    pub ratios: Option<RatioLimits>,
    pub asymptotic: Option<Vec<AsymptoticComparison>>,
    pub cross_validation: Option<CrossValidation>,
    pub checks: BTreeMap<String, bool>,
    pub seconds: f64,
}

impl RootReport {
    pub fn pass(&self) -> bool {
        self.error.is_none() && self.checks.values().all(|&ok| ok)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WronskianSummary {
    pub samples: Vec<WronskianValue>,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub stage: Stage,
    pub status: String,
    pub error: Option<String>,
    pub spectrum: Option<SpectrumSummary>,
    pub domain: Option<DomainSummary>,
    pub perturbations: [String; 4],
    pub roots: Vec<RootReport>,
    pub wronskian: Option<WronskianSummary>,
    pub pass: bool,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "stage {:?}: {}", self.stage, self.status);
        if let Some(err) = &self.error {
            let _ = writeln!(out, "  error: {err}");
        }
        for r in &self.roots {
            let failed: Vec<&str> = r
                .checks
                .iter()
                .filter(|(_, ok)| !**ok)
                .map(|(k, _)| k.as_str())
                .collect();
            let _ = write!(
                out,
                "  root {} (lambda = {:.6}, {}): {}",
                r.index, r.lambda, r.case, r.status
            );
            if !failed.is_empty() {
                let _ = write!(out, " [failed: {}]", failed.join(", "));
            }
            if let Some(err) = &r.error {
                let _ = write!(out, " ({err})");
            }
            out.push('\n');
        }
        if let Some(w) = &self.wronskian {
            let _ = writeln!(
                out,
                "  wronskian max relative error {:.3e}",
                w.max_relative_error
            );
        }
        out
    }
}

struct RootOutcome {
    report: RootReport,
    z: Option<GridFunction>,
    snapshots: Vec<GridFunction>,
    fs: Option<FundamentalSolution>,
}

/// Runs the pipeline up to `stage`; `out` receives `report.json` and CSVs.
/// Numerical failures end up in the report, only I/O and input errors are
/// returned as `Err`.
pub fn run(
    spec: &ProblemSpec,
    stage: Stage,
    options: &RunOptions,
    out: Option<&Path>,
) -> Result<Report> {
    spec.validate()?;
    let r = spec.perturbations()?;
    let roots = if options.roots.is_empty() {
        RootIndex::ALL.to_vec()
    } else {
        options.roots.clone()
    };
    let e = &spec.equation;
    let perturbations = [e.r0.clone(), e.r1.clone(), e.r2.clone(), e.r3.clone()];
    let mut report = Report {
        stage,
        status: String::new(),
        error: None,
        spectrum: None,
        domain: None,
        perturbations,
        roots: Vec::new(),
        wronskian: None,
        pass: false,
    };
    let cd = match CharacteristicData::from_coefficients(
        spec.coefficients(),
        &spec.solver.root_tolerances(),
    ) {
        Ok(cd) => cd,
        Err(err) => {
            report.status = "spectrum_failed".into();
            report.error = Some(err.to_string());
            write_outputs(&report, &[], out, options.trace)?;
            return Ok(report);
        }
    };
    report.spectrum = Some(SpectrumSummary {
        coefficients: cd.coefficients,
        lambda: cd.lambda,
        min_gap: cd.min_gap(),
        root_residual: cd.root_residual(),
    });
    let t0 = spec.domain.t0;
    let t_max = spec.t_max(cd.min_gap());
    report.domain = Some(DomainSummary {
        t0,
        t_max,
        nodes: spec.domain.nodes,
    });
    let grid = Arc::new(Grid::graded(t0, t_max, spec.domain.nodes)?);
    let outcomes: Vec<RootOutcome> = roots
        .par_iter()
        .map(|&i| run_root(spec, &cd, &r, &grid, i, stage, options.trace))
        .collect();

    if stage >= Stage::Verify && outcomes.len() == 4 {
        let fss: Vec<&FundamentalSolution> =
            outcomes.iter().filter_map(|o| o.fs.as_ref()).collect();
        if fss.len() == 4 {
            let fss: Vec<FundamentalSolution> = fss.into_iter().cloned().collect();
            report.wronskian = Some(wronskian_summary(&fss, &grid, spec.solver.wronskian_tol));
        }
    }
    report.roots = outcomes.iter().map(|o| o.report.clone()).collect();
    report.pass = report.roots.iter().all(RootReport::pass)
        && report.wronskian.as_ref().is_none_or(|w| w.pass);
    report.status = if report.pass { "pass" } else { "fail" }.into();
    write_outputs(&report, &outcomes, out, options.trace)?;
    Ok(report)
}

fn wronskian_summary(fss: &[FundamentalSolution], grid: &Grid, tol: f64) -> WronskianSummary {
    let (t0, t1) = (grid.t0(), grid.t_max());
    let mut samples = Vec::new();
    let mut max_relative_error: f64 = 0.0;
    let mut failed = false;
    for k in 0..=64 {
        let t = t0 + (t1 - t0) * k as f64 / 64.0;
        match wronskian_normalized(fss, t) {
            Ok(w) => {
                max_relative_error = max_relative_error.max(w.relative_error);
                samples.push(w);
            }
            Err(_) => failed = true,
        }
    }
    WronskianSummary {
        samples,
        max_relative_error,
        tolerance: tol,
        pass: !failed && max_relative_error <= tol,
    }
}

fn run_root(
    spec: &ProblemSpec,
    cd: &CharacteristicData,
    r: &Arc<Perturbations>,
    grid: &Arc<Grid>,
    i: RootIndex,
    stage: Stage,
    trace: bool,
) -> RootOutcome {
    let clock = Instant::now();
    let gamma = cd.shifted_roots(i);
    let mut outcome = RootOutcome {
        report: RootReport {
            index: i,
            lambda: cd.root(i),
            gamma,
            case: String::new(),
            status: String::new(),
            error: None,
            orientation: None,
            hypotheses: None,
            phi_limit: None,
            picard: None,
            residual: None,
            envelope: None,
            ratios: None,
            asymptotic: None,
            cross_validation: None,
            checks: BTreeMap::new(),
            seconds: 0.0,
        },
        z: None,
        snapshots: Vec::new(),
        fs: None,
    };
    if let Err(err) = root_stages(spec, cd, r, grid, i, stage, trace, &mut outcome) {
        outcome.report.error = Some(err.to_string());
        outcome.report.status = "error".into();
    } else {
        outcome.report.status = if outcome.report.pass() {
            "pass"
        } else {
            "fail"
        }
        .into();
    }
    outcome.report.seconds = clock.elapsed().as_secs_f64();
    outcome
}

#[allow(clippy::too_many_arguments)]
fn root_stages(
    spec: &ProblemSpec,
    cd: &CharacteristicData,
    r: &Arc<Perturbations>,
    grid: &Arc<Grid>,
    i: RootIndex,
    stage: Stage,
    trace: bool,
    outcome: &mut RootOutcome,
) -> Result<()> {
    let s = &spec.solver;
    let t0 = spec.domain.t0;
    let rep = &mut outcome.report;

    let orientation = select_orientation(rep.gamma, 1e-6)?;
    rep.checks.insert("orientation".into(), true);
    let sys = RiccatiSystem::with_orientation(cd, r.clone(), i, t0, orientation.adopted)?;
    rep.case = sys.kernel.case.label().to_string();
    rep.orientation = Some(orientation);

    let settings = HypothesisSettings {
        eta: s.eta,
        h2_tol: s.h2_tol,
        quad_tol: s.quad_tol,
        rho_samples: s.rho_samples,
    };
    let hyp = assess(cd, &sys.kernel, i, r, t0, &settings)?;
    rep.checks.insert("h2".into(), hyp.h2.pass);
    rep.checks.insert("smallness".into(), hyp.smallness.ok);
    let smallness = hyp.smallness;
    rep.phi_limit = smallness.phi;
    rep.hypotheses = Some(hyp);
    if stage == Stage::Analyze || !smallness.ok {
        return Ok(());
    }

    let solver = PicardSolver::new(&sys, grid.clone(), s.quad_tol)?;
    let picard = PicardSettings {
        fp_tol: s.fp_tol,
        max_iter: s.max_iter,
        eta: s.eta,
        quad_tol: s.quad_tol,
        keep_snapshots: trace,
    };
    let iterated = solver.iterate(&picard);
    let mut summary = PicardSummary {
        converged: iterated.trace.converged,
        iterations: iterated.trace.n_iter,
        trace: iterated.trace.clone(),
        certificate: None,
        max_contraction: iterated
            .trace
            .asymptotic_contraction()
            .into_iter()
            .reduce(f64::max),
        contraction_bound: smallness.product,
        error: iterated.error.as_ref().map(Error::to_string),
    };
    outcome.snapshots = iterated.trace.snapshots.clone();
    rep.checks
        .insert("picard_converged".into(), iterated.error.is_none());
    if iterated.error.is_some() {
        rep.picard = Some(summary);
        outcome.z = Some(iterated.z);
        return Ok(());
    }
    let z = iterated.z;
    let certificate = solver.certificate(&z)?;
    summary.certificate = Some(certificate);
    rep.checks
        .insert("certificate".into(), certificate <= 10.0 * s.fp_tol);
    rep.picard = Some(summary);

    let mut at_nodes: f64 = 0.0;
    for &t in grid.nodes() {
        at_nodes = at_nodes.max(sys.riccati_residual(&z, t)?.abs());
    }
    let mut at_midpoints: f64 = 0.0;
    for w in grid.nodes().windows(2) {
        at_midpoints = at_midpoints.max(sys.riccati_residual(&z, 0.5 * (w[0] + w[1]))?.abs());
    }
    rep.checks.insert(
        "residual".into(),
        at_nodes.max(at_midpoints) <= s.residual_tol,
    );
    rep.residual = Some(ResidualSummary {
        max_at_nodes: at_nodes,
        max_at_midpoints: at_midpoints,
        tolerance: s.residual_tol,
    });

    if let Some(phi) = smallness.phi {
        rep.envelope =
            envelope_check(&sys, cd, &z, default_beta(cd, i.get()), phi, s.quad_tol).ok();
    }
    outcome.z = Some(z.clone());
    if stage < Stage::Verify {
        return Ok(());
    }

    let fs = fundamental_solution(&sys, &z)?;
    let ratios = derivative_ratio_limits(&fs, &default_ratio_times(&fs), s.ratio_tol)?;
    rep.checks.insert("ratio_limits".into(), ratios.pass);
    rep.ratios = Some(ratios);
    let mut asymptotic = Vec::new();
    for k in 1..=8 {
        let t = t0 + (grid.t_max() - t0) * k as f64 / 8.0;
        asymptotic.push(asymptotic_integral_formula(&fs, t)?);
    }
    rep.asymptotic = Some(asymptotic);
    let (comparison, span, tol) = if i.get() == 1 {
        (Comparison::Direct, s.dominant_span, s.dominant_tol)
    } else {
        (
            Comparison::LogDerivative,
            s.subdominant_span,
            s.subdominant_tol,
        )
    };
    let cv = cross_validate(&fs, comparison, span, tol, s.oracle_tol)?;
    rep.checks.insert("cross_validation".into(), cv.pass);
    rep.cross_validation = Some(cv);
    outcome.fs = Some(fs);
    Ok(())
}

fn write_outputs(
    report: &Report,
    outcomes: &[RootOutcome],
    out: Option<&Path>,
    trace: bool,
) -> Result<()> {
    let Some(dir) = out else {
        return Ok(());
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let write = |name: &str, text: &str| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    };
    write("report.json", &report.to_json())?;
    for o in outcomes {
        let i = o.report.index;
        if let Some(z) = &o.z {
            write(&format!("z_{i}.csv"), &z_csv(z))?;
        }
        if trace && !o.snapshots.is_empty() {
            let mut text = String::from("iter,t,z,dz,d2z\n");
            for (n, snap) in o.snapshots.iter().enumerate() {
                for (k, t) in snap.grid().nodes().iter().enumerate() {
                    let _ = writeln!(
                        text,
                        "{},{},{},{},{}",
                        n + 1,
                        t,
                        snap.channel(0)[k],
                        snap.channel(1)[k],
                        snap.channel(2)[k]
                    );
                }
            }
            write(&format!("trace_{i}.csv"), &text)?;
        }
        if let Some(fs) = &o.fs {
            let mut text = String::from("t,y,y1_over_y,y2_over_y,y3_over_y,y4_over_y\n");
            for p in fs.node_points() {
                let [r1, r2, r3, r4] = p.ratios;
                let _ = writeln!(text, "{},{},{},{},{},{}", p.t, p.y, r1, r2, r3, r4);
            }
            write(&format!("y_{i}.csv"), &text)?;
        }
    }
    if let Some(w) = &report.wronskian {
        let mut text = String::from("t,normalized,vandermonde,relative_error\n");
        for s in &w.samples {
            let _ = writeln!(
                text,
                "{},{},{},{}",
                s.t, s.normalized, s.vandermonde, s.relative_error
            );
        }
        write("wronskian.csv", &text)?;
    }
    Ok(())
}

fn z_csv(z: &GridFunction) -> String {
    let mut text = String::from("t,z,dz,d2z\n");
    for (k, t) in z.grid().nodes().iter().enumerate() {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            t,
            z.channel(0)[k],
            z.channel(1)[k],
            z.channel(2)[k]
        );
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(r0: &str) -> ProblemSpec {
        let mut spec = ProblemSpec::unperturbed([0.0, -5.0, 0.0, 4.0]);
        spec.equation.r0 = r0.to_string();
        spec.domain.nodes = 256;
        spec
    }

    #[test]
    fn analyze_only_fills_hypotheses() {
        let report = run(
            &spec("0.001*exp(-t)"),
            Stage::Analyze,
            &RunOptions::default(),
            None,
        )
        .unwrap();
        assert!(report.pass, "{}", report.summary());
        for r in &report.roots {
            assert!(r.hypotheses.is_some());
            assert!(r.picard.is_none());
        }
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert!(json["roots"][0]["picard"].is_null());
        assert!(json["wronskian"].is_null());
    }

    #[test]
    fn large_perturbation_fails_smallness() {
        let opts = RunOptions {
            roots: vec![RootIndex::new(1).unwrap()],
            trace: false,
        };
        let report = run(&spec("10*exp(-t)"), Stage::Solve, &opts, None).unwrap();
        assert!(!report.pass);
        assert!(!report.roots[0].checks["smallness"]);
        assert_eq!(report.exit_code(), 1);
    }

    #[test]
    fn complex_spectrum_is_reported() {
        let spec = ProblemSpec::unperturbed([0.0, 0.0, 0.0, 1.0]);
        let report = run(&spec, Stage::Analyze, &RunOptions::default(), None).unwrap();
        assert_eq!(report.status, "spectrum_failed");
        assert!(report.error.as_deref().unwrap().contains("complex"));
    }

    #[test]
    fn writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            roots: vec![RootIndex::new(2).unwrap()],
            trace: true,
        };
        let report = run(
            &spec("0.001*exp(-t)"),
            Stage::Report,
            &opts,
            Some(dir.path()),
        )
        .unwrap();
        assert!(report.roots[0].checks["picard_converged"]);
        for name in ["report.json", "z_2.csv", "y_2.csv", "trace_2.csv"] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        let z = std::fs::read_to_string(dir.path().join("z_2.csv")).unwrap();
        assert!(z.starts_with("t,z,dz,d2z\n"));
        assert_eq!(z.lines().count(), 257);
    }
}

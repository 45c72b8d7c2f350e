use std::sync::Arc;

use scalar_asym::exprlang::parse;
use scalar_asym::grid::{Grid, GridFunction};
use scalar_asym::picard::{IterationTrace, PicardSettings, PicardSolver};
use scalar_asym::riccati::{Perturbations, RiccatiSystem};
use scalar_asym::spectra::{order_and_check_h1, CharacteristicData, RootIndex};
use scalar_asym::synthesis::{fundamental_solution, FundamentalSolution};

pub const EPS: f64 = 0.001;

pub fn test_roots() -> CharacteristicData {
    order_and_check_h1([2.0, 1.0, -1.0, -2.0], 1e-8).unwrap()
}

pub fn eps_perturbation() -> Arc<Perturbations> {
    let mut p = Perturbations::zero();
    p.r[0] = parse(&format!("{EPS}*exp(-t)")).unwrap();
    Arc::new(p)
}

pub fn default_grid(cd: &CharacteristicData) -> Arc<Grid> {
    Arc::new(Grid::graded(0.0, 1e12f64.ln() / cd.min_gap(), 2048).unwrap())
}

pub struct Solved {
    pub sys: RiccatiSystem,
    pub z: GridFunction,
    pub trace: IterationTrace,
    pub certificate: f64,
    pub fs: FundamentalSolution,
}

pub fn solve(
    cd: &CharacteristicData,
    r: &Arc<Perturbations>,
    grid: &Arc<Grid>,
    i: RootIndex,
) -> Solved {
    let sys = RiccatiSystem::build(cd, r.clone(), i, 0.0).unwrap();
    let solver = PicardSolver::new(&sys, grid.clone(), 1e-12).unwrap();
    let (z, trace) = solver
        .iterate(&PicardSettings::default())
        .into_result()
        .unwrap();
    let certificate = solver.certificate(&z).unwrap();
    let fs = fundamental_solution(&sys, &z).unwrap();
    Solved {
        sys,
        z,
        trace,
        certificate,
        fs,
    }
}

pub fn solve_all(cd: &CharacteristicData, r: &Arc<Perturbations>) -> Vec<Solved> {
    let grid = default_grid(cd);
    RootIndex::ALL
        .iter()
        .map(|&i| solve(cd, r, &grid, i))
        .collect()
}

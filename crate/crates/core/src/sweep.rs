//! Parameter sweeps over the rescaled slope variance ρ.

use rayon::prelude::*;

use crate::conic::solve_approximate;
use crate::design::Design;
use crate::error::{Error, Result};
use crate::exact::{solve_exact, BnbOptions, BnbStatus};
use crate::problem::CbrcProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    Approximate,
    Exact,
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub rho: f64,
    /// `optimal`, `gap-limit`, `node-limit`, `infeasible` or `error: …`.
    pub status: String,
    pub value: Option<f64>,
    pub design: Option<Design>,
}

/// `start, start+step, …` up to `stop` (inclusive within a tenth of a step).
///
/// Points are computed as `start + k·step` and rounded to 12 decimals so
/// grids are reproducible.
pub fn rho_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop < 1.0 && start < stop) {
        return Err(Error::Domain(format!(
            "grid needs 0 < start < stop < 1, got start {start}, stop {stop}"
        )));
    }
    if !(step > 0.0) {
        return Err(Error::Domain(format!("grid step {step} must be positive")));
    }
    let n = ((stop - start) / step + 0.1).floor() as usize;
    Ok((0..=n)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// Solves `build(ρ)` for every grid point, in parallel, rows in grid order.
///
/// Failures are recorded in the row and do not stop the sweep.
pub fn sweep<F>(grid: &[f64], build: F, mode: SolveMode, tol: f64, bnb: &BnbOptions) -> Vec<SweepRow>
where
    F: Fn(f64) -> Result<CbrcProblem> + Sync,
{
    grid.par_iter()
        .map(|&rho| match solve_one(&build, rho, mode, tol, bnb) {
            Ok(row) => row,
            Err(e) => SweepRow {
                rho,
                status: format!("error: {e}"),
                value: None,
                design: None,
            },
        })
        .collect()
}

fn solve_one<F>(build: &F, rho: f64, mode: SolveMode, tol: f64, bnb: &BnbOptions) -> Result<SweepRow>
where
    F: Fn(f64) -> Result<CbrcProblem>,
{
    let problem = build(rho)?;
    match mode {
        SolveMode::Approximate => {
            let sol = solve_approximate(&problem, tol)?;
            Ok(SweepRow {
                rho,
                status: sol.status.as_str().to_string(),
                value: sol.value.finite(),
                design: Some(sol.design),
            })
        }
        SolveMode::Exact => {
            let integral = problem.constraints().clone().with_integrality(true);
            let problem = problem.with_constraints(integral)?;
            let r = solve_exact(&problem, bnb)?;
            Ok(SweepRow {
                rho,
                status: r.status.as_str().to_string(),
                value: r.incumbent_value,
                design: if r.status == BnbStatus::Infeasible { None } else { r.incumbent },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive_and_rounded() {
        let g = rho_grid(0.001, 0.005, 0.001).unwrap();
        assert_eq!(g, vec![0.001, 0.002, 0.003, 0.004, 0.005]);
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(rho_grid(0.5, 0.5, 0.1).is_err());
        assert!(rho_grid(0.6, 0.5, 0.1).is_err());
        assert!(rho_grid(0.1, 0.5, 0.0).is_err());
        assert!(rho_grid(0.0, 0.5, 0.1).is_err());
    }
}

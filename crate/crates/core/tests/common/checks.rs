//! Acceptance criteria as reusable checks. Each returns a one-line summary
//! on success and a description of the first failure otherwise.

use cbrc::oracle::{enumerate_exact, grid_search_2pt};
use cbrc::sweep::{rho_grid, sweep, SolveMode};
use cbrc::{
    build_artificial, paper_example, solve_approximate, solve_exact, BnbOptions, BnbStatus,
    CbrcProblem, CriterionValue, Design, Error,
};
use nalgebra::DMatrix;

use super::*;

pub type Outcome = std::result::Result<String, String>;

const GRID: usize = 51;

fn grid_index(x: f64) -> usize {
    (x * (GRID - 1) as f64).round() as usize
}

fn exact_example(rho: f64, rows: bool) -> CbrcProblem {
    let p = paper_example(rho, rows).unwrap();
    p.with_constraints(p.constraints().clone().with_integrality(true)).unwrap()
}

fn solved(status: BnbStatus) -> bool {
    matches!(status, BnbStatus::Optimal | BnbStatus::GapLimit)
}

pub fn unconstrained_exact() -> Outcome {
    let cases = [(0.003, 5.0, 5.0), (0.010, 4.0, 6.0), (0.030, 3.0, 7.0), (0.090, 2.0, 8.0), (0.500, 1.0, 9.0)];
    for (rho, at0, at1) in cases {
        let r = solve_exact(&exact_example(rho, false), &BnbOptions::default()).map_err(|e| e.to_string())?;
        let design = r.incumbent.ok_or(format!("rho {rho}: no incumbent"))?;
        let mut expected = vec![0.0; GRID];
        expected[0] = at0;
        expected[GRID - 1] = at1;
        if !solved(r.status) || r.gap > 1e-6 || design.weights() != expected.as_slice() {
            return Err(format!(
                "rho {rho}: status {} gap {:e} design {:?}",
                r.status.as_str(),
                r.gap,
                nonzero(&design)
            ));
        }
    }
    Ok("5 instances match".into())
}

pub fn exact_under_rows() -> Outcome {
    let low = [0.0, 0.06, 0.12, 0.18, 0.24];
    let high = [0.52, 0.58, 0.64, 0.70, 0.76, 0.82, 0.88, 0.94, 1.0];
    let rows: [(f64, usize); 5] = [(0.004, 5), (0.015, 4), (0.030, 3), (0.080, 2), (0.500, 1)];
    for (rho, n_low) in rows {
        let mut support: Vec<usize> = low[..n_low].iter().map(|&x| grid_index(x)).collect();
        support.extend(high[high.len() - (10 - n_low)..].iter().map(|&x| grid_index(x)));
        let r = solve_exact(&exact_example(rho, true), &BnbOptions::default()).map_err(|e| e.to_string())?;
        let design = r.incumbent.ok_or(format!("rho {rho}: no incumbent"))?;
        let got: Vec<usize> = design.support(0.5);
        let ones = support.iter().all(|&i| design.weight(i) == 1.0);
        if !solved(r.status) || got != support || !ones {
            return Err(format!("rho {rho}: expected {support:?}, got {:?}", nonzero(&design)));
        }
    }
    Ok("5 support sets match".into())
}

pub fn approximate_under_rows() -> Outcome {
    let problem = paper_example(0.1, true).unwrap();
    let sol = solve_approximate(&problem, 1e-8).map_err(|e| e.to_string())?;
    let mut expected = vec![0.0; GRID];
    expected[0] = 1.0;
    expected[grid_index(0.06)] = 0.602;
    expected[grid_index(0.52)] = 0.398;
    for k in 0..8 {
        expected[grid_index(0.58 + 0.06 * k as f64)] = 1.0;
    }
    let worst = sol
        .design
        .weights()
        .iter()
        .zip(&expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let at_expected = problem.cbrc_value(&Design::new(expected).unwrap()).unwrap();
    let (CriterionValue::Finite(v_sol), CriterionValue::Finite(v_exp)) = (sol.value, at_expected) else {
        return Err("infinite criterion value".into());
    };
    let rel = (v_sol - v_exp).abs() / v_exp.abs();
    if worst > 5e-3 || rel > 1e-5 {
        return Err(format!("max weight deviation {worst:e}, relative value gap {rel:e}"));
    }
    Ok(format!("max weight deviation {worst:.2e}, value {v_sol:.9} vs {v_exp:.9}"))
}

pub fn change_points() -> Outcome {
    let grid = rho_grid(0.001, 0.2, 0.001).map_err(|e| e.to_string())?;
    let rows = sweep(&grid, |rho| paper_example(rho, false), SolveMode::Exact, 1e-8, &BnbOptions::default());
    let mut m1 = Vec::with_capacity(rows.len());
    for row in &rows {
        let design = row.design.as_ref().ok_or(format!("rho {}: {}", row.rho, row.status))?;
        if !(row.status == "optimal" || row.status == "gap-limit") {
            return Err(format!("rho {}: status {}", row.rho, row.status));
        }
        let at0 = design.weight(0);
        let at1 = design.weight(GRID - 1);
        if at0 + at1 != 10.0 {
            return Err(format!("rho {}: interior support {:?}", row.rho, nonzero(design)));
        }
        m1.push(at1);
    }
    let found: Vec<(f64, f64)> = (1..m1.len())
        .filter(|&k| m1[k] != m1[k - 1])
        .map(|k| (grid[k - 1], grid[k]))
        .collect();
    let expected = vec![(0.005, 0.006), (0.018, 0.019), (0.040, 0.041), (0.135, 0.136)];
    if found != expected || m1[0] != 5.0 || m1[m1.len() - 1] != 9.0 {
        return Err(format!("transitions {found:?}, m1 from {} to {}", m1[0], m1[m1.len() - 1]));
    }
    Ok(format!("{} grid points, transitions {found:?}", grid.len()))
}

/// Returns (designs checked, singular agreements).
pub fn key_fact(problems: usize, designs: usize, seed: u64) -> std::result::Result<(usize, usize), String> {
    let mut rng = rng(seed);
    let mut checked = 0;
    let mut singular = 0;
    for k in 0..problems {
        let problem = random_problem(&mut rng, 4, 3, 10);
        let ap = build_artificial(&problem).map_err(|e| e.to_string())?;
        for _ in 0..designs {
            let xi = random_design(&mut rng, problem.n_points());
            let lifted = ap.lift(&xi).map_err(|e| e.to_string())?;
            let phi_a = ap.a_criterion(&lifted).map_err(|e| e.to_string())?;
            let phi = problem.cbrc_value(&xi).map_err(|e| e.to_string())?;
            match (phi_a, phi) {
                (CriterionValue::Finite(a), CriterionValue::Finite(b)) => {
                    if (a - b).abs() > 1e-8 * b.abs().max(1.0) {
                        return Err(format!("problem {k}: {a} vs {b}"));
                    }
                }
                (CriterionValue::Infinite, CriterionValue::Infinite) => singular += 1,
                _ => return Err(format!("problem {k}: {phi_a} vs {phi} for {:?}", xi.weights())),
            }
            checked += 1;
        }
    }
    Ok((checked, singular))
}

pub fn key_fact_suite() -> Outcome {
    let (checked, singular) = key_fact(120, 12, 0x6b65_7966)?;
    if singular == 0 {
        return Err("no singular designs were exercised".into());
    }
    Ok(format!("{checked} designs over 120 problems, {singular} singular agreements"))
}

pub fn oracle_equivalence(instances: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut compared = 0;
    let mut attempts = 0;
    while compared < instances {
        attempts += 1;
        if attempts > 10 * instances {
            return Err(format!("only {compared} instances with a finite optimum"));
        }
        let (problem, total) = random_exact_instance(&mut rng, compared % 2 == 1);
        let result = solve_exact(&problem, &BnbOptions::default()).map_err(|e| e.to_string())?;
        match enumerate_exact(&problem, total) {
            Ok((_, best)) => {
                let got = result.incumbent_value.ok_or(format!("instance {attempts}: no incumbent"))?;
                if !solved(result.status) || rel_diff(got, best) > 1e-6 {
                    return Err(format!(
                        "instance {attempts}: {} {got} vs enumeration {best}",
                        result.status.as_str()
                    ));
                }
                compared += 1;
            }
            Err(Error::Infeasible(_)) => {
                if result.incumbent_value.is_some() {
                    return Err(format!("instance {attempts}: enumeration found nothing finite"));
                }
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(format!("{compared} instances agree"))
}

pub fn two_point(instances: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..instances {
        let total = rng.gen_range(2..=12) as f64;
        let problem = random_two_point(&mut rng, total);
        let sol = solve_approximate(&problem, 1e-9).map_err(|e| format!("instance {k}: {e}"))?;
        let (_, grid) = grid_search_2pt(&problem, total, 1e-4).map_err(|e| e.to_string())?;
        let conic = sol.value.finite().ok_or(format!("instance {k}: infinite conic optimum"))?;
        let diff = (conic - grid).abs();
        worst = worst.max(diff);
        if diff > 1e-4 {
            return Err(format!("instance {k}: conic {conic} vs grid {grid}"));
        }
    }
    Ok(format!("{instances} instances, max difference {worst:.2e}"))
}

pub fn structure(problems: usize, seed: u64) -> Outcome {
    let mut rng = rng(seed);
    let mut convexity = 0;
    for k in 0..problems {
        let problem = random_problem(&mut rng, 4, 3, 10);
        let ap = build_artificial(&problem).map_err(|e| e.to_string())?;
        let p = problem.dim();
        for (j, term) in problem.terms().iter().enumerate() {
            let h = term.loss.as_matrix();
            let k_j = ap.factor(j);
            if (k_j.reconstruct().as_matrix() - h).amax() > 1e-9 * h.amax() {
                return Err(format!("problem {k}: K Kᵀ != H for term {j}"));
            }
            let target = k_j.whiten(&term.prior);
            let mut sum = DMatrix::zeros(p, p);
            for u in ap.aux_vectors(j) {
                sum += u * u.transpose();
            }
            if (sum - target.as_matrix()).amax() > 1e-9 * target.as_matrix().amax().max(1.0) {
                return Err(format!("problem {k}: Σ u uᵀ mismatch for term {j}"));
            }
        }
        let xi = random_design(&mut rng, problem.n_points());
        let m = ap.information_matrix(&ap.lift(&xi).unwrap()).unwrap();
        for r in 0..ap.dim() {
            for c in 0..ap.dim() {
                if r / p != c / p && m.get(r, c).abs() > 1e-12 {
                    return Err(format!("problem {k}: off-block entry {:e}", m.get(r, c)));
                }
            }
        }

        let a = random_design(&mut rng, problem.n_points());
        let b = random_design(&mut rng, problem.n_points());
        if let (CriterionValue::Finite(fa), CriterionValue::Finite(fb)) =
            (problem.cbrc_value(&a).unwrap(), problem.cbrc_value(&b).unwrap())
        {
            let alpha = rng.gen_range(0.05..0.95);
            let mixed = problem.cbrc_value(&a.mix(&b, alpha).unwrap()).unwrap();
            let bound = alpha * fa + (1.0 - alpha) * fb + 1e-9;
            match mixed {
                CriterionValue::Finite(v) if v <= bound => convexity += 1,
                _ => return Err(format!("problem {k}: convexity fails ({mixed} > {bound})")),
            }
            let mut w = a.weights().to_vec();
            let i = rng.gen_range(0..w.len());
            w[i] += rng.gen_range(0.0..2.0);
            let more = problem.cbrc_value(&Design::new(w).unwrap()).unwrap();
            if more.total_cmp(&CriterionValue::Finite(fa + 1e-12 * fa.abs())).is_gt() {
                return Err(format!("problem {k}: adding a trial increased {fa} to {more}"));
            }
        }
    }
    Ok(format!("{problems} problems, {convexity} convexity and monotonicity spot-checks"))
}

fn nonzero(d: &Design) -> Vec<(usize, f64)> {
    d.weights().iter().copied().enumerate().filter(|x| x.1 != 0.0).collect()
}

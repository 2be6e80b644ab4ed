//! Reference solvers used to cross-check the conic and branch-and-bound
//! pipelines: exhaustive enumeration, fine grid search and random feasible
//! designs.
//!
//! Random designs come from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64`, a counter-based stream that is identical on every
//! platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::{LinearConstraintSet, Relation};
use crate::design::{CriterionValue, Design};
use crate::error::{Error, Result};
use crate::problem::CbrcProblem;

/// Largest number of candidates [`enumerate_exact`] will visit.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

const CHECK_TOL: f64 = 1e-9;

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (1..=k).fold(1u128, |acc, i| acc.saturating_mul(n + 1 - i) / i)
}

/// Best integer design with exactly `total` trials, by full enumeration.
///
/// Candidates are visited in ascending lexicographic order of the weight
/// vector; the first minimizer wins ties.
pub fn enumerate_exact(problem: &CbrcProblem, total: u32) -> Result<(Design, f64)> {
    let d = problem.n_points();
    let count = binomial(total as u128 + d as u128 - 1, d as u128 - 1);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let cons = problem.constraints();
    let mut best: Option<(Design, f64)> = None;
    let mut current = vec![0u32; d];
    let mut visit = |w: &[u32]| -> Result<()> {
        let design = Design::new(w.iter().map(|&v| v as f64).collect())?;
        if !cons.check_feasible(&design, CHECK_TOL).is_feasible() {
            return Ok(());
        }
        if let CriterionValue::Finite(v) = problem.cbrc_value(&design)? {
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((design, v));
            }
        }
        Ok(())
    };
    compositions(&mut current, 0, total, &mut visit)?;
    best.ok_or_else(|| Error::Infeasible("no feasible integer design with finite criterion".into()))
}

/// Ascending lexicographic walk over all `w` with `Σ w = total`.
fn compositions(
    w: &mut [u32],
    pos: usize,
    remaining: u32,
    visit: &mut impl FnMut(&[u32]) -> Result<()>,
) -> Result<()> {
    if pos + 1 == w.len() {
        w[pos] = remaining;
        return visit(w);
    }
    for v in 0..=remaining {
        w[pos] = v;
        compositions(w, pos + 1, remaining - v, visit)?;
    }
    w[pos] = 0;
    Ok(())
}

/// Minimizes over `w₀ ∈ {0, step, …, total}`, `w₁ = total − w₀`.
///
/// Constraints of the problem other than the two-point split are ignored.
pub fn grid_search_2pt(problem: &CbrcProblem, total: f64, step: f64) -> Result<(Design, f64)> {
    if problem.n_points() != 2 {
        return Err(Error::Domain(format!(
            "grid search needs exactly two design points, got {}",
            problem.n_points()
        )));
    }
    if !(step > 0.0) || !(total > 0.0) {
        return Err(Error::Domain("step and total must be positive".into()));
    }
    let steps = (total / step).round() as u64;
    let mut best: Option<(Design, f64)> = None;
    for k in 0..=steps {
        let w0 = (k as f64 * step).min(total);
        let design = Design::new(vec![w0, total - w0])?;
        if let CriterionValue::Finite(v) = problem.cbrc_value(&design)? {
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((design, v));
            }
        }
    }
    best.ok_or_else(|| Error::Infeasible("criterion is infinite on the whole grid".into()))
}

/// Deterministic pseudo-random feasible design, or `None` after 100 failed attempts.
///
/// Mass is added in random chunks to randomly chosen points as long as the
/// `≤` rows, upper bounds and the total-trials target allow; integer chunks
/// when the set demands integrality. Without a total-trials target a random
/// total in `[1, 10]` is drawn.
pub fn random_feasible(constraints: &LinearConstraintSet, seed: u64) -> Option<Design> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        if let Some(d) = attempt(constraints, &mut rng) {
            return Some(d);
        }
    }
    None
}

fn attempt(cons: &LinearConstraintSet, rng: &mut ChaCha8Rng) -> Option<Design> {
    let n = cons.n_points();
    let integral = cons.integrality();
    let target = match cons.total_trials() {
        Some((Relation::Ge, v)) => v + if integral { rng.gen_range(0..3) as f64 } else { rng.gen_range(0.0..2.0) },
        Some((_, v)) => v,
        None => {
            if integral {
                rng.gen_range(1..=10) as f64
            } else {
                rng.gen_range(1.0..10.0)
            }
        }
    };
    let mut w: Vec<f64> = cons.lower().iter().map(|&l| if integral { l.ceil() } else { l }).collect();
    let mut remaining = target - w.iter().sum::<f64>();
    if remaining < -CHECK_TOL {
        return None;
    }
    let mut stalls = 0;
    while remaining > CHECK_TOL && stalls < 50 * n {
        let i = rng.gen_range(0..n);
        let mut room = (cons.upper()[i] - w[i]).min(remaining);
        for row in cons.rows() {
            let a = row.coefficients[i];
            match row.relation {
                Relation::Le if a > 0.0 => room = room.min((row.rhs - row.lhs(&w)) / a),
                Relation::Ge if a < 0.0 => room = room.min((row.rhs - row.lhs(&w)) / a),
                _ => {}
            }
        }
        let amount = if integral {
            let cap = (room + CHECK_TOL).floor();
            if cap < 1.0 {
                0.0
            } else {
                rng.gen_range(1..=cap as u64) as f64
            }
        } else if room > CHECK_TOL {
            room * rng.gen_range(0.05..1.0)
        } else {
            0.0
        };
        if amount <= 0.0 {
            stalls += 1;
            continue;
        }
        w[i] += amount;
        remaining -= amount;
        if !integral && remaining < 1e-6 {
            w[i] += remaining;
            remaining = 0.0;
        }
    }
    let design = Design::new(w).ok()?;
    cons.check_feasible(&design, 1e-7).is_feasible().then_some(design)
}

//! Random instance generators shared by the integration tests.

#![allow(dead_code)]

use cbrc::{
    BayesTerm, CbrcProblem, ConstraintRow, Design, DesignSpace, LinearConstraintSet, RegressionMap,
    Relation, SymMatrix,
};
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

pub use rand::{Rng, SeedableRng};

pub mod checks;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// `G Gᵀ` with `G` of shape `p × rank`.
pub fn random_nnd(rng: &mut ChaCha8Rng, p: usize, rank: usize) -> SymMatrix {
    if rank == 0 {
        return SymMatrix::zeros(p);
    }
    let g = gaussian_matrix(rng, p, rank);
    let m = &g * g.transpose();
    SymMatrix::new((&m + m.transpose()) * 0.5).unwrap()
}

pub fn random_pd(rng: &mut ChaCha8Rng, p: usize) -> SymMatrix {
    let g = gaussian_matrix(rng, p, p);
    let m = &g * g.transpose() + DMatrix::identity(p, p) * 0.2;
    SymMatrix::new((&m + m.transpose()) * 0.5).unwrap()
}

/// Space `{0, …, d−1}` with random regression vectors spanning `Rᵖ`.
pub fn random_regression(rng: &mut ChaCha8Rng, p: usize, d: usize) -> (DesignSpace, RegressionMap) {
    let space = DesignSpace::from_coordinates(&(0..d).map(|k| k as f64).collect::<Vec<_>>()).unwrap();
    loop {
        let vectors: Vec<Vec<f64>> = (0..d)
            .map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        if let Ok(f) = RegressionMap::new(vectors) {
            return (space, f);
        }
    }
}

pub fn random_terms(rng: &mut ChaCha8Rng, p: usize, s: usize) -> Vec<BayesTerm> {
    (0..s)
        .map(|_| {
            let rank = rng.gen_range(0..=p);
            BayesTerm::new(random_nnd(rng, p, rank), random_pd(rng, p))
        })
        .collect()
}

/// Unconstrained problem with `p ≤ max_p`, `s ≤ max_s`, `p ≤ d ≤ max_d`.
pub fn random_problem(rng: &mut ChaCha8Rng, max_p: usize, max_s: usize, max_d: usize) -> CbrcProblem {
    let p = rng.gen_range(1..=max_p);
    let s = rng.gen_range(1..=max_s);
    let d = rng.gen_range(p..=max_d);
    let (space, f) = random_regression(rng, p, d);
    let terms = random_terms(rng, p, s);
    CbrcProblem::new(space, f, terms, LinearConstraintSet::unconstrained(d)).unwrap()
}

/// Weights from `{0} ∪ [0.25, 3]`, roughly a third of them zero.
pub fn random_design(rng: &mut ChaCha8Rng, d: usize) -> Design {
    Design::new(
        (0..d)
            .map(|_| if rng.gen_bool(0.35) { 0.0 } else { rng.gen_range(0.25..3.0) })
            .collect(),
    )
    .unwrap()
}

/// Integer design with `Σ = total`.
pub fn random_integer_design(rng: &mut ChaCha8Rng, d: usize, total: u32) -> Vec<f64> {
    let mut w = vec![0.0; d];
    for _ in 0..total {
        w[rng.gen_range(0..d)] += 1.0;
    }
    w
}

/// Small exact instance: `d ≤ 5`, `m ≤ 6`, `s ≤ 2`, `p ≤ min(d, 3)`,
/// optionally with up to two random `≤` rows that a random integer design
/// satisfies.
pub fn random_exact_instance(rng: &mut ChaCha8Rng, with_rows: bool) -> (CbrcProblem, u32) {
    let d = rng.gen_range(2..=5);
    let p = rng.gen_range(1..=d.min(3));
    let s = rng.gen_range(1..=2);
    let total = rng.gen_range(p as u32..=6);
    let (space, f) = random_regression(rng, p, d);
    let terms = random_terms(rng, p, s);
    let mut cons = LinearConstraintSet::unconstrained(d)
        .with_total_trials(Relation::Eq, total as f64)
        .with_integrality(true);
    if with_rows {
        let witness = random_integer_design(rng, d, total);
        for _ in 0..rng.gen_range(1..=2) {
            let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-1..=2) as f64).collect();
            let lhs: f64 = c.iter().zip(&witness).map(|(a, b)| a * b).sum();
            let rhs = lhs + rng.gen_range(0..=1) as f64;
            cons.add_row(ConstraintRow::new(c, Relation::Le, rhs)).unwrap();
        }
    }
    (CbrcProblem::new(space, f, terms, cons).unwrap(), total)
}

/// Two-point instance with `Σ w = total` and `p ≤ 2`.
pub fn random_two_point(rng: &mut ChaCha8Rng, total: f64) -> CbrcProblem {
    let p = rng.gen_range(1..=2);
    let s = rng.gen_range(1..=2);
    let (space, f) = random_regression(rng, p, 2);
    let terms = random_terms(rng, p, s);
    let cons = LinearConstraintSet::unconstrained(2).with_total_trials(Relation::Eq, total);
    CbrcProblem::new(space, f, terms, cons).unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

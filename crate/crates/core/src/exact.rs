//! Exact (integer) designs by branch-and-bound over the cone relaxation.
//!
//! Every node relaxes integrality of the design weights inside a box of
//! integer bounds and solves the A-optimality cone program of the artificial
//! model. Nodes branch on the most fractional weight into `w ≤ ⌊v⌋` and
//! `w ≥ ⌈v⌉`. Selection plunges depth-first until an incumbent exists and
//! then proceeds best-bound-first.

use std::time::Instant;

use crate::conic::{build_a_opt_socp, solve, ConicProgram, ConicStatus, DEFAULT_TOL};
use crate::constraints::{LinearConstraintSet, Relation};
use crate::design::{CriterionValue, Design};
use crate::error::{Error, Result};
use crate::problem::CbrcProblem;
use crate::reduction::build_artificial;

/// Tolerance used when checking rows of candidate integer designs.
const INTEGER_FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct BnbOptions {
    /// Relative optimality gap `(incumbent − bound) / max(1, |incumbent|)`.
    pub gap_tol: f64,
    pub node_limit: usize,
    pub integrality_tol: f64,
    /// Tolerance passed to every relaxation solve.
    pub conic_tol: f64,
    /// Emit a progress line every this many nodes; 0 disables.
    pub log_interval: usize,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-6,
            node_limit: 100_000,
            integrality_tol: 1e-6,
            conic_tol: DEFAULT_TOL,
            log_interval: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnbStatus {
    /// Search tree exhausted; incumbent within `gap_tol` of the bound.
    Optimal,
    /// Stopped with open nodes left because the global gap fell below `gap_tol`.
    GapLimit,
    NodeLimit,
    Infeasible,
}

impl BnbStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            BnbStatus::Optimal => "optimal",
            BnbStatus::GapLimit => "gap-limit",
            BnbStatus::NodeLimit => "node-limit",
            BnbStatus::Infeasible => "infeasible",
        }
    }
}

/// A box of integer bounds on the design weights.
#[derive(Clone, Debug, PartialEq)]
pub struct BnbNode {
    pub id: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Relaxation value of the parent; a valid bound for the whole box.
    pub bound: f64,
    pub depth: usize,
}

#[derive(Clone, Debug)]
pub struct BnbResult {
    pub status: BnbStatus,
    pub incumbent: Option<Design>,
    pub incumbent_value: Option<f64>,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes: usize,
    /// Integer designs found with a value equal (to `gap_tol`) to the incumbent's.
    pub ties: usize,
    /// Incumbent values in the order they were accepted.
    pub incumbent_history: Vec<f64>,
    /// Global bound after every node.
    pub bound_history: Vec<f64>,
}

impl BnbResult {
    fn empty(status: BnbStatus, nodes: usize) -> Self {
        Self {
            status,
            incumbent: None,
            incumbent_value: None,
            best_bound: f64::INFINITY,
            gap: f64::INFINITY,
            nodes,
            ties: 0,
            incumbent_history: Vec::new(),
            bound_history: Vec::new(),
        }
    }
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

/// Optimal exact design of `problem` over its integer-weight permissible set.
///
/// The problem's constraints must make the weights bounded, either through
/// a total-trials condition with `=` or `≤` or through finite upper bounds.
pub fn solve_exact(problem: &CbrcProblem, options: &BnbOptions) -> Result<BnbResult> {
    let cons = problem.constraints();
    let bounded_total = matches!(cons.total_trials(), Some((Relation::Eq | Relation::Le, _)));
    if !bounded_total && cons.upper().iter().any(|u| !u.is_finite()) {
        return Err(Error::Domain(
            "exact designs need a total-trials limit or finite upper bounds".into(),
        ));
    }
    let ap = build_artificial(problem)?;
    let program = build_a_opt_socp(&ap);
    Search::new(problem, program, options).run()
}

struct Search<'a> {
    problem: &'a CbrcProblem,
    program: ConicProgram,
    options: &'a BnbOptions,
    open: Vec<BnbNode>,
    next_id: usize,
    nodes: usize,
    incumbent: Option<(Design, f64)>,
    ties: usize,
    /// Smallest bound among boxes closed by bound, not by infeasibility.
    closed_bound: f64,
    incumbent_history: Vec<f64>,
    bound_history: Vec<f64>,
    started: Instant,
}

enum NodeOutcome {
    Infeasible,
    Pruned(f64),
    Integral(f64),
    Branched,
}

impl<'a> Search<'a> {
    fn new(problem: &'a CbrcProblem, program: ConicProgram, options: &'a BnbOptions) -> Self {
        Self {
            problem,
            program,
            options,
            open: Vec::new(),
            next_id: 0,
            nodes: 0,
            incumbent: None,
            ties: 0,
            closed_bound: f64::INFINITY,
            incumbent_history: Vec::new(),
            bound_history: Vec::new(),
            started: Instant::now(),
        }
    }

    fn prune_threshold(&self) -> f64 {
        match &self.incumbent {
            Some((_, v)) => v - self.options.gap_tol * v.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn global_bound(&self) -> f64 {
        let open = self.open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
        let inc = self.incumbent.as_ref().map_or(f64::INFINITY, |(_, v)| *v);
        open.min(self.closed_bound).min(inc)
    }

    fn push(&mut self, lower: Vec<f64>, upper: Vec<f64>, bound: f64, depth: usize) {
        let id = self.next_id;
        self.next_id += 1;
        self.open.push(BnbNode {
            id,
            lower,
            upper,
            bound,
            depth,
        });
    }

    /// Deepest newest node until an incumbent exists, then lowest bound
    /// (ties by lowest id).
    fn pop(&mut self) -> Option<BnbNode> {
        let idx = if self.incumbent.is_none() {
            (0..self.open.len()).max_by(|&a, &b| {
                let (na, nb) = (&self.open[a], &self.open[b]);
                na.depth.cmp(&nb.depth).then(na.id.cmp(&nb.id))
            })?
        } else {
            (0..self.open.len()).min_by(|&a, &b| {
                let (na, nb) = (&self.open[a], &self.open[b]);
                na.bound.total_cmp(&nb.bound).then(na.id.cmp(&nb.id))
            })?
        };
        Some(self.open.swap_remove(idx))
    }

    fn offer(&mut self, design: Design) -> Result<()> {
        if !self
            .problem
            .constraints()
            .check_feasible(&design, INTEGER_FEASIBILITY_TOL)
            .is_feasible()
        {
            return Ok(());
        }
        let value = match self.problem.cbrc_value(&design)? {
            CriterionValue::Finite(v) => v,
            CriterionValue::Infinite => return Ok(()),
        };
        match &self.incumbent {
            Some((best, v)) => {
                let tie_band = self.options.gap_tol * v.abs().max(1.0);
                if value < v - tie_band {
                    self.accept(design, value);
                } else if value < *v {
                    // marginally better: take it, the old one counts as a tie
                    self.accept(design, value);
                    self.ties += 1;
                } else if value <= v + tie_band && &design != best {
                    self.ties += 1;
                }
            }
            None => self.accept(design, value),
        }
        Ok(())
    }

    fn accept(&mut self, design: Design, value: f64) {
        log::debug!("new incumbent {value} at node {}", self.nodes);
        self.incumbent = Some((design, value));
        self.incumbent_history.push(value);
        self.ties = 0;
    }

    fn process(&mut self, node: &BnbNode) -> Result<NodeOutcome> {
        let cp = self.program.with_weight_bounds(&node.lower, &node.upper);
        let sol = solve(&cp, self.options.conic_tol);
        let (bound, weights) = match sol.status {
            ConicStatus::Optimal => (sol.lower_bound().max(node.bound), sol.weights),
            ConicStatus::Infeasible => return Ok(NodeOutcome::Infeasible),
            ConicStatus::Unbounded => {
                return Err(Error::Solver("relaxation reported unbounded".into()))
            }
            ConicStatus::NumericalFailure => {
                log::warn!(
                    "relaxation at node {} failed ({}); branching on the parent bound",
                    node.id,
                    sol.message
                );
                // a fractional point in the middle of every free range
                let w = node
                    .lower
                    .iter()
                    .zip(&node.upper)
                    .map(|(&lo, &hi)| if hi > lo { (0.5 * (lo + hi)).floor() + 0.5 } else { lo })
                    .collect();
                (node.bound, w)
            }
        };
        if bound >= self.prune_threshold() {
            return Ok(NodeOutcome::Pruned(bound));
        }
        let tol = self.options.integrality_tol;
        let weights: Vec<f64> = weights
            .iter()
            .zip(node.lower.iter().zip(&node.upper))
            .map(|(&v, (&lo, &hi))| v.clamp(lo, hi))
            .collect();
        let branch_var = weights
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, (v - v.round()).abs()))
            .filter(|&(_, frac)| frac > tol)
            .fold(None, |best: Option<(usize, f64)>, (i, frac)| match best {
                Some((_, bf)) if bf >= frac => best,
                _ => Some((i, frac)),
            });
        match branch_var {
            None => {
                let design = Design::from_solver(&weights, 1e-6)?.rounded();
                self.offer(design)?;
                Ok(NodeOutcome::Integral(bound))
            }
            Some((i, _)) => {
                // v is strictly inside (lower, upper), so both children shrink
                let v = weights[i];
                let mut down_upper = node.upper.clone();
                down_upper[i] = v.floor();
                let mut up_lower = node.lower.clone();
                up_lower[i] = v.ceil();
                self.push(node.lower.clone(), down_upper, bound, node.depth + 1);
                self.push(up_lower, node.upper.clone(), bound, node.depth + 1);
                Ok(NodeOutcome::Branched)
            }
        }
    }

    fn root_box(&self) -> (Vec<f64>, Vec<f64>) {
        let cons = self.problem.constraints();
        let cap = match cons.total_trials() {
            Some((Relation::Eq | Relation::Le, v)) => v.floor(),
            _ => f64::INFINITY,
        };
        let lower = cons.lower().iter().map(|l| (l - 1e-9).ceil()).collect();
        let upper = cons.upper().iter().map(|u| (u + 1e-9).floor().min(cap)).collect();
        (lower, upper)
    }

    fn run(mut self) -> Result<BnbResult> {
        let (lower, upper) = self.root_box();
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Ok(BnbResult::empty(BnbStatus::Infeasible, 0));
        }

        let root = self.program.with_weight_bounds(&lower, &upper);
        let root_sol = solve(&root, self.options.conic_tol);
        if root_sol.status == ConicStatus::Infeasible {
            return Ok(BnbResult::empty(BnbStatus::Infeasible, 1));
        }
        if root_sol.status == ConicStatus::Optimal {
            let relaxed = Design::from_solver(&root_sol.weights, 1e-6)?;
            let problem = self.problem;
            if let Some(d) = round_incumbent(&relaxed, problem.constraints(), |d| {
                problem.cbrc_value(d).unwrap_or(CriterionValue::Infinite)
            }) {
                self.offer(d)?;
            }
        }
        self.push(lower, upper, f64::NEG_INFINITY, 0);

        let status = loop {
            if let Some((_, inc)) = &self.incumbent {
                if !self.open.is_empty() && relative_gap(*inc, self.global_bound()) <= self.options.gap_tol {
                    break BnbStatus::GapLimit;
                }
            }
            if self.nodes >= self.options.node_limit {
                break BnbStatus::NodeLimit;
            }
            let Some(node) = self.pop() else {
                break if self.incumbent.is_some() {
                    BnbStatus::Optimal
                } else {
                    BnbStatus::Infeasible
                };
            };
            if node.bound >= self.prune_threshold() {
                self.closed_bound = self.closed_bound.min(node.bound);
                continue;
            }
            self.nodes += 1;
            match self.process(&node)? {
                NodeOutcome::Infeasible => {}
                NodeOutcome::Pruned(b) | NodeOutcome::Integral(b) => {
                    self.closed_bound = self.closed_bound.min(b);
                }
                NodeOutcome::Branched => {}
            }
            let bound = self.global_bound();
            self.bound_history.push(bound);
            if self.options.log_interval > 0 && self.nodes.is_multiple_of(self.options.log_interval) {
                let inc = self.incumbent.as_ref().map(|(_, v)| *v);
                log::info!(
                    "nodes {} open {} bound {:.10e} incumbent {} gap {:.3e} elapsed {:.2}s",
                    self.nodes,
                    self.open.len(),
                    bound,
                    inc.map_or("-".to_string(), |v| format!("{v:.10e}")),
                    inc.map_or(f64::INFINITY, |v| relative_gap(v, bound)),
                    self.started.elapsed().as_secs_f64()
                );
            }
        };
        Ok(self.finish(status))
    }

    fn finish(self, status: BnbStatus) -> BnbResult {
        let best_bound = self.global_bound();
        let nodes = self.nodes;
        match self.incumbent {
            Some((design, value)) => BnbResult {
                status,
                gap: relative_gap(value, best_bound),
                incumbent: Some(design),
                incumbent_value: Some(value),
                best_bound,
                nodes,
                ties: self.ties,
                incumbent_history: self.incumbent_history,
                bound_history: self.bound_history,
            },
            None => {
                let mut r = BnbResult::empty(status, nodes);
                r.best_bound = best_bound;
                r.bound_history = self.bound_history;
                r
            }
        }
    }
}

/// Integer design close to `relaxed`, or `None` if greedy rounding fails.
///
/// Weights are floored (within bounds). With a total-trials condition
/// `= T` the remaining units are handed out one at a time; each goes to the
/// point whose increment keeps the `≤` rows and upper bounds satisfied and
/// gives the smallest `criterion`, preferring points with a fractional
/// remainder. Without one, weights are rounded to nearest. The result is
/// returned only if it satisfies every constraint.
pub fn round_incumbent(
    relaxed: &Design,
    constraints: &LinearConstraintSet,
    criterion: impl Fn(&Design) -> CriterionValue,
) -> Option<Design> {
    let n = relaxed.len();
    if n != constraints.n_points() {
        return None;
    }
    if relaxed.is_integral(1e-9) {
        let d = relaxed.rounded();
        return constraints
            .check_feasible(&d, INTEGER_FEASIBILITY_TOL)
            .is_feasible()
            .then_some(d);
    }
    let lower = constraints.lower();
    let upper = constraints.upper();
    let mut w: Vec<f64> = match constraints.total_trials() {
        Some((Relation::Eq, _)) | Some((Relation::Le, _)) => relaxed
            .weights()
            .iter()
            .enumerate()
            .map(|(i, &v)| (v + 1e-9).floor().max(lower[i].ceil()).min(upper[i].floor()))
            .collect(),
        _ => relaxed
            .weights()
            .iter()
            .enumerate()
            .map(|(i, &v)| v.round().max(lower[i].ceil()).min(upper[i].floor()))
            .collect(),
    };

    if let Some((Relation::Eq, total)) = constraints.total_trials() {
        let mut remaining = (total - w.iter().sum::<f64>()).round() as i64;
        if remaining < 0 {
            return None;
        }
        let mut bumped = vec![false; n];
        while remaining > 0 {
            let admissible = |i: usize, w: &[f64]| -> bool {
                if w[i] + 1.0 > upper[i] + INTEGER_FEASIBILITY_TOL {
                    return false;
                }
                constraints.rows().iter().all(|row| {
                    let a = row.coefficients[i];
                    let lhs = row.lhs(w) + a;
                    match row.relation {
                        Relation::Le if a > 0.0 => lhs <= row.rhs + INTEGER_FEASIBILITY_TOL,
                        Relation::Ge if a < 0.0 => lhs >= row.rhs - INTEGER_FEASIBILITY_TOL,
                        _ => true,
                    }
                })
            };
            let fractional: Vec<usize> = (0..n)
                .filter(|&i| !bumped[i] && relaxed.weight(i) - w[i] > 1e-9 && admissible(i, &w))
                .collect();
            let candidates = if fractional.is_empty() {
                (0..n).filter(|&i| admissible(i, &w)).collect()
            } else {
                fractional
            };
            let mut best: Option<(usize, CriterionValue)> = None;
            for i in candidates {
                let mut trial = w.clone();
                trial[i] += 1.0;
                let value = criterion(&Design::new(trial).ok()?);
                if best.is_none_or(|(_, b)| value.total_cmp(&b).is_lt()) {
                    best = Some((i, value));
                }
            }
            let (i, _) = best?;
            w[i] += 1.0;
            bumped[i] = true;
            remaining -= 1;
        }
    }

    let design = Design::new(w).ok()?;
    constraints
        .check_feasible(&design, INTEGER_FEASIBILITY_TOL)
        .is_feasible()
        .then_some(design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ConstraintRow;
    use crate::design::{DesignSpace, RegressionMap};

    fn line_a_opt(d: usize, total: f64) -> CbrcProblem {
        let coords: Vec<f64> = (0..d).map(|k| k as f64 / (d - 1) as f64).collect();
        let space = DesignSpace::from_coordinates(&coords).unwrap();
        let f = RegressionMap::polynomial(&space, 1).unwrap();
        let cons = LinearConstraintSet::unconstrained(d)
            .with_total_trials(Relation::Eq, total)
            .with_integrality(true);
        CbrcProblem::a_optimality(space, f, cons).unwrap()
    }

    #[test]
    fn integral_design_is_returned_unchanged() {
        let p = line_a_opt(2, 10.0);
        let d = Design::new(vec![3.0, 7.0]).unwrap();
        let got = round_incumbent(&d, p.constraints(), |x| p.cbrc_value(x).unwrap());
        assert_eq!(got, Some(d));
    }

    #[test]
    fn rounding_picks_better_of_two_candidates() {
        let p = line_a_opt(2, 10.0);
        let relaxed = Design::new(vec![4.6, 5.4]).unwrap();
        let got = round_incumbent(&relaxed, p.constraints(), |x| p.cbrc_value(x).unwrap()).unwrap();
        let a = Design::new(vec![5.0, 5.0]).unwrap();
        let b = Design::new(vec![4.0, 6.0]).unwrap();
        let va = p.cbrc_value(&a).unwrap().finite().unwrap();
        let vb = p.cbrc_value(&b).unwrap().finite().unwrap();
        assert_eq!(got, if va <= vb { a } else { b });
    }

    #[test]
    fn rounding_respects_rows() {
        let p = line_a_opt(3, 2.0);
        let cons = p
            .constraints()
            .clone()
            .with_row(ConstraintRow::new(vec![1.0, 1.0, 0.0], Relation::Le, 1.0))
            .unwrap();
        let relaxed = Design::new(vec![0.5, 0.5, 1.0]).unwrap();
        let got = round_incumbent(&relaxed, &cons, |x| p.cbrc_value(x).unwrap()).unwrap();
        assert!(cons.check_feasible(&got, 0.0).is_feasible());
        assert_eq!(got.total(), 2.0);
    }

    #[test]
    fn rounding_reports_failure() {
        let p = line_a_opt(2, 2.0);
        let cons = p
            .constraints()
            .clone()
            .with_bounds(vec![0.0, 0.0], vec![1.0, 0.5])
            .unwrap();
        let relaxed = Design::new(vec![1.0, 0.5]).unwrap();
        assert_eq!(round_incumbent(&relaxed, &cons, |x| p.cbrc_value(x).unwrap()), None);
    }

    #[test]
    fn unbounded_weights_rejected() {
        let p = line_a_opt(2, 10.0);
        let open = LinearConstraintSet::unconstrained(2)
            .with_total_trials(Relation::Ge, 3.0)
            .with_integrality(true);
        let p = p.with_constraints(open).unwrap();
        assert!(matches!(solve_exact(&p, &BnbOptions::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn infeasible_problem_reported() {
        let p = line_a_opt(2, 10.0);
        let cons = p
            .constraints()
            .clone()
            .with_bounds(vec![0.0, 0.0], vec![3.0, 3.0])
            .unwrap();
        let r = solve_exact(&p.with_constraints(cons).unwrap(), &BnbOptions::default()).unwrap();
        assert_eq!(r.status, BnbStatus::Infeasible);
        assert!(r.incumbent.is_none());
    }

    #[test]
    fn node_limit_keeps_incumbent() {
        let p = line_a_opt(4, 7.0);
        let opts = BnbOptions {
            node_limit: 1,
            ..BnbOptions::default()
        };
        let r = solve_exact(&p, &opts).unwrap();
        assert!(matches!(r.status, BnbStatus::NodeLimit | BnbStatus::Optimal | BnbStatus::GapLimit));
        assert!(r.incumbent.is_some());
    }

    #[test]
    fn incumbent_and_bound_histories_are_monotone() {
        let p = line_a_opt(5, 7.0);
        let r = solve_exact(&p, &BnbOptions::default()).unwrap();
        assert!(r.incumbent_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.bound_history.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(r.incumbent_value.unwrap() >= r.best_bound - 1e-9);
    }
}

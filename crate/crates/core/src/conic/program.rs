use std::fmt::Write as _;
use std::io;

use crate::constraints::Relation;
use crate::reduction::{ArtificialProblem, ExtendedPoint};

/// Role of a variable in the A-optimality cone program.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    /// Design weight of an original point; shared by all copies of that point.
    Weight { point: usize },
    /// Free flow variable of extended point `ext` in the c-optimality
    /// subproblem for artificial coordinate `column`.
    Flow { column: usize, ext: usize },
    /// Epigraph variable bounding `flow² / weight`.
    Epigraph { column: usize, ext: usize },
}

/// The `w` side of a rotated cone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConeWeight {
    Var(usize),
    Fixed(f64),
}

/// `flow² ≤ epigraph · weight` with `epigraph, weight ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotatedCone {
    pub epigraph: usize,
    pub weight: ConeWeight,
    pub flow: usize,
}

/// Sparse linear row `Σ coeff·x ⋈ rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRow {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl SparseRow {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * x[i]).sum()
    }
}

/// Linear objective, linear rows, variable bounds and rotated cones.
///
/// Design weights are always variables `0..n_weights`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram {
    pub(crate) kinds: Vec<VarKind>,
    pub(crate) objective: Vec<f64>,
    pub(crate) rows: Vec<SparseRow>,
    pub(crate) lower: Vec<f64>,
    pub(crate) upper: Vec<f64>,
    pub(crate) cones: Vec<RotatedCone>,
    pub(crate) n_weights: usize,
}

impl ConicProgram {
    pub fn n_vars(&self) -> usize {
        self.kinds.len()
    }

    pub fn n_weights(&self) -> usize {
        self.n_weights
    }

    pub fn kinds(&self) -> &[VarKind] {
        &self.kinds
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn cones(&self) -> &[RotatedCone] {
        &self.cones
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Copy with the design-weight bounds replaced.
    pub fn with_weight_bounds(&self, lower: &[f64], upper: &[f64]) -> ConicProgram {
        assert_eq!(lower.len(), self.n_weights);
        assert_eq!(upper.len(), self.n_weights);
        let mut cp = self.clone();
        cp.lower[..self.n_weights].copy_from_slice(lower);
        cp.upper[..self.n_weights].copy_from_slice(upper);
        cp
    }

    /// Largest violation of rows, bounds and cones at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            let lhs = row.eval(x);
            let v = match row.relation {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for i in 0..self.n_vars() {
            worst = worst.max(self.lower[i] - x[i]).max(x[i] - self.upper[i]);
        }
        for c in &self.cones {
            let w = match c.weight {
                ConeWeight::Var(i) => x[i],
                ConeWeight::Fixed(v) => v,
            };
            let t = x[c.epigraph];
            let h = x[c.flow];
            // distance-like measure on the equivalent Lorentz form
            let lorentz = (4.0 * h * h + (t - w) * (t - w)).sqrt() - (t + w);
            worst = worst.max(lorentz).max(-t).max(-w);
        }
        worst
    }

    /// Plain-text listing, one line per variable, row and cone.
    ///
    /// ```text
    /// conic-program v1
    /// vars <n> weights <n_weights> rows <m> cones <c>
    /// var <index> <kind> <lower> <upper> <objective>
    /// row <index> <relation> <rhs> <var>:<coeff> ...
    /// cone <index> rotated epigraph=<var> weight=<var|const:value> flow=<var>
    /// end
    /// ```
    ///
    /// Numbers use Rust's shortest round-trip formatting; `inf` marks
    /// missing bounds.
    pub fn write_text(&self, out: &mut impl io::Write) -> io::Result<()> {
        out.write_all(self.to_text().as_bytes())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "conic-program v1");
        let _ = writeln!(
            s,
            "vars {} weights {} rows {} cones {}",
            self.n_vars(),
            self.n_weights,
            self.rows.len(),
            self.cones.len()
        );
        for (i, kind) in self.kinds.iter().enumerate() {
            let kind = match *kind {
                VarKind::Weight { point } => format!("w[{point}]"),
                VarKind::Flow { column, ext } => format!("h[{column},{ext}]"),
                VarKind::Epigraph { column, ext } => format!("t[{column},{ext}]"),
            };
            let _ = writeln!(
                s,
                "var {i} {kind} {:?} {:?} {:?}",
                self.lower[i], self.upper[i], self.objective[i]
            );
        }
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(s, "row {i} {} {:?}", row.relation, row.rhs);
            for &(v, a) in &row.coeffs {
                let _ = write!(s, " {v}:{a:?}");
            }
            s.push('\n');
        }
        for (i, c) in self.cones.iter().enumerate() {
            let w = match c.weight {
                ConeWeight::Var(v) => format!("{v}"),
                ConeWeight::Fixed(x) => format!("const:{x:?}"),
            };
            let _ = writeln!(
                s,
                "cone {i} rotated epigraph={} weight={w} flow={}",
                c.epigraph, c.flow
            );
        }
        s.push_str("end\n");
        s
    }
}

/// Second-order cone program for the A-optimal design problem on the
/// artificial model.
///
/// `tr(M̃⁻¹) = Σ_k e_kᵀ M̃⁻¹ e_k` and each summand is the optimum of
/// `min Σ_x h_x²/w_x s.t. Σ_x f̃(x) h_x = e_k`. Because f̃ of a point in
/// block `j` vanishes outside that block, the subproblem for a coordinate
/// `k` of block `j` only involves block-`j` points and only its `p` block
/// rows. Copies `(j, x)` share the weight variable of `x`, auxiliary
/// weights enter as constants and points with `f(x) = 0` get no cones.
pub fn build_a_opt_socp(ap: &ArtificialProblem) -> ConicProgram {
    let d = ap.base().n_points();
    let p = ap.block_dim();
    let cons = ap.constraints();

    let mut kinds: Vec<VarKind> = (0..d).map(|point| VarKind::Weight { point }).collect();
    let mut objective = vec![0.0; d];
    let mut lower: Vec<f64> = vec![0.0; d];
    let mut upper = vec![f64::INFINITY; d];
    let mut rows = Vec::new();
    let mut cones = Vec::new();

    // Weight bounds: intersection over all copies of a point. Auxiliary
    // points must be fixed; their value becomes a cone constant.
    let mut fixed = vec![None; ap.len()];
    for (i, pt) in ap.points().iter().enumerate() {
        match *pt {
            ExtendedPoint::Copy { point, .. } => {
                lower[point] = lower[point].max(cons.lower()[i]);
                upper[point] = upper[point].min(cons.upper()[i]);
            }
            ExtendedPoint::Auxiliary { .. } => {
                assert_eq!(
                    cons.lower()[i],
                    cons.upper()[i],
                    "auxiliary weights are fixed by construction"
                );
                fixed[i] = Some(cons.lower()[i]);
            }
        }
    }

    for block in 0..ap.blocks() {
        let members: Vec<usize> = (0..ap.len())
            .filter(|&i| ap.points()[i].block() == block)
            .filter(|&i| ap.regression(i).iter().any(|&v| v != 0.0))
            .collect();
        for local in 0..p {
            let column = block * p + local;
            let mut flows = Vec::with_capacity(members.len());
            for &ext in &members {
                let flow = kinds.len();
                kinds.push(VarKind::Flow { column, ext });
                objective.push(0.0);
                lower.push(f64::NEG_INFINITY);
                upper.push(f64::INFINITY);
                let epigraph = kinds.len();
                kinds.push(VarKind::Epigraph { column, ext });
                objective.push(1.0);
                lower.push(0.0);
                upper.push(f64::INFINITY);
                let weight = match (ap.points()[ext], fixed[ext]) {
                    (_, Some(v)) => ConeWeight::Fixed(v),
                    (ExtendedPoint::Copy { point, .. }, None) => ConeWeight::Var(point),
                    (ExtendedPoint::Auxiliary { .. }, None) => unreachable!(),
                };
                cones.push(RotatedCone {
                    epigraph,
                    weight,
                    flow,
                });
                flows.push((ext, flow));
            }
            for r in 0..p {
                let coeffs: Vec<(usize, f64)> = flows
                    .iter()
                    .map(|&(ext, flow)| (flow, ap.regression(ext)[block * p + r]))
                    .filter(|&(_, a)| a != 0.0)
                    .collect();
                rows.push(SparseRow {
                    coeffs,
                    relation: Relation::Eq,
                    rhs: if r == local { 1.0 } else { 0.0 },
                });
            }
        }
    }
    // Design-side rows with copies mapped to the shared weight variable and
    // auxiliary points moved to the right-hand side. Coupling rows cancel.
    for row in cons.rows() {
        let mut dense = vec![0.0; d];
        let mut rhs = row.rhs;
        for (i, &a) in row.coefficients.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match ap.points()[i] {
                ExtendedPoint::Copy { point, .. } => dense[point] += a,
                ExtendedPoint::Auxiliary { .. } => rhs -= a * fixed[i].unwrap_or(0.0),
            }
        }
        let coeffs: Vec<(usize, f64)> = dense
            .into_iter()
            .enumerate()
            .filter(|&(_, a)| a != 0.0)
            .collect();
        if coeffs.is_empty() && row.relation.holds(0.0, rhs, 0.0) {
            continue;
        }
        rows.push(SparseRow {
            coeffs,
            relation: row.relation,
            rhs,
        });
    }

    ConicProgram {
        kinds,
        objective,
        rows,
        lower,
        upper,
        cones,
        n_weights: d,
    }
}

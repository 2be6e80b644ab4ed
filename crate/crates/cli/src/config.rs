//! JSON problem configuration.

use std::fs;
use std::path::Path;

use cbrc::rcr::{slope_variance, uniform_measure, RcrCriterion, RcrSpec};
use cbrc::{
    paper_example, BayesTerm, CbrcProblem, ConstraintRow, DesignPoint, DesignSpace, LinearConstraintSet,
    RegressionMap, Relation, SymMatrix,
};
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

type Matrix = Vec<Vec<f64>>;

#[derive(Clone, Debug)]
pub struct Config {
    pub design_space: Option<Vec<PointSpec>>,
    pub regression: Option<RegressionSpec>,
    pub criterion: CriterionSpec,
    pub constraints: ConstraintSpec,
}

/// First pass; tagged sections are decoded separately so that errors
/// inside them keep their field path.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    design_space: Option<Vec<PointSpec>>,
    #[serde(default)]
    regression: Option<Value>,
    criterion: Value,
    #[serde(default)]
    constraints: ConstraintSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub label: String,
    pub coordinate: Vec<f64>,
}

#[derive(Clone, Debug)]
pub enum RegressionSpec {
    Explicit { vectors: Matrix },
    Polynomial { degree: usize },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitSpec {
    vectors: Matrix,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolynomialSpec {
    degree: usize,
}

#[derive(Clone, Debug)]
pub enum CriterionSpec {
    Cbrc {
        terms: Vec<TermSpec>,
    },
    RcrLinear {
        n: usize,
        dispersion: Matrix,
        weight: Matrix,
    },
    RcrImse {
        n: usize,
        dispersion: Matrix,
        /// Uniform when absent.
        nu: Option<Vec<f64>>,
    },
    PaperExample {
        rho: f64,
        with_constraint10: bool,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CbrcSpec {
    terms: Vec<TermSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RcrLinearSpec {
    n: usize,
    #[serde(rename = "D")]
    dispersion: Matrix,
    #[serde(rename = "A")]
    weight: Matrix,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RcrImseSpec {
    n: usize,
    #[serde(rename = "D")]
    dispersion: Matrix,
    #[serde(default)]
    nu: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PaperExampleSpec {
    rho: f64,
    #[serde(default)]
    with_constraint10: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    #[serde(rename = "B")]
    pub prior: Matrix,
    #[serde(rename = "H")]
    pub loss: Matrix,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    #[serde(default)]
    pub rows: Vec<RowSpec>,
    #[serde(default)]
    pub total_trials: Option<TotalSpec>,
    #[serde(default)]
    pub bounds: Option<BoundsSpec>,
    #[serde(default)]
    pub integrality: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    pub coefficients: Vec<f64>,
    pub relation: RelationSpec,
    pub rhs: f64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
pub enum RelationSpec {
    #[serde(rename = "<=", alias = "le")]
    Le,
    #[serde(rename = "=", alias = "eq")]
    Eq,
    #[serde(rename = ">=", alias = "ge")]
    Ge,
}

impl From<RelationSpec> for Relation {
    fn from(r: RelationSpec) -> Self {
        match r {
            RelationSpec::Le => Relation::Le,
            RelationSpec::Eq => Relation::Eq,
            RelationSpec::Ge => Relation::Ge,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TotalSpec {
    #[serde(default = "eq")]
    pub relation: RelationSpec,
    pub value: f64,
}

fn eq() -> RelationSpec {
    RelationSpec::Eq
}

/// `null` in `upper` stands for no upper bound.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    #[serde(default)]
    pub lower: Option<Vec<f64>>,
    #[serde(default)]
    pub upper: Option<Vec<Option<f64>>>,
}

/// Reads and validates `path`; errors carry the field path and position.
pub fn load(path: &Path) -> Result<Config, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|msg| CliError::Input(format!("{}: {msg}", path.display())))
}

pub fn parse(text: &str) -> Result<Config, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        format!("{path}: {}", e.into_inner())
    })?;
    let (kind, body) = split_tag("criterion", raw.criterion)?;
    let criterion = match kind.as_str() {
        "cbrc" => {
            let c: CbrcSpec = section("criterion", body)?;
            CriterionSpec::Cbrc { terms: c.terms }
        }
        "rcr_linear" => {
            let c: RcrLinearSpec = section("criterion", body)?;
            CriterionSpec::RcrLinear {
                n: c.n,
                dispersion: c.dispersion,
                weight: c.weight,
            }
        }
        "rcr_imse" => {
            let c: RcrImseSpec = section("criterion", body)?;
            CriterionSpec::RcrImse {
                n: c.n,
                dispersion: c.dispersion,
                nu: c.nu,
            }
        }
        "paper_example" => {
            let c: PaperExampleSpec = section("criterion", body)?;
            CriterionSpec::PaperExample {
                rho: c.rho,
                with_constraint10: c.with_constraint10,
            }
        }
        other => {
            return Err(format!(
                "criterion.type: unknown variant `{other}`, expected one of `cbrc`, `rcr_linear`, `rcr_imse`, `paper_example`"
            ))
        }
    };
    let regression = match raw.regression {
        None => None,
        Some(v) => {
            let (kind, body) = split_tag("regression", v)?;
            Some(match kind.as_str() {
                "explicit" => RegressionSpec::Explicit {
                    vectors: section::<ExplicitSpec>("regression", body)?.vectors,
                },
                "polynomial" => RegressionSpec::Polynomial {
                    degree: section::<PolynomialSpec>("regression", body)?.degree,
                },
                other => {
                    return Err(format!(
                        "regression.type: unknown variant `{other}`, expected `explicit` or `polynomial`"
                    ))
                }
            })
        }
    };
    Ok(Config {
        design_space: raw.design_space,
        regression,
        criterion,
        constraints: raw.constraints,
    })
}

fn split_tag(name: &str, value: Value) -> Result<(String, Value), String> {
    let Value::Object(mut map) = value else {
        return Err(format!("{name}: expected an object with a `type` field"));
    };
    match map.remove("type") {
        Some(Value::String(kind)) => Ok((kind, Value::Object(map))),
        Some(_) => Err(format!("{name}.type: expected a string")),
        None => Err(format!("{name}: missing field `type`")),
    }
}

fn section<T: serde::de::DeserializeOwned>(name: &str, body: Value) -> Result<T, String> {
    serde_path_to_error::deserialize(body).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            format!("{name}: {inner}")
        } else {
            format!("{name}.{path}: {inner}")
        }
    })
}

fn input(e: cbrc::Error) -> CliError {
    CliError::Input(e.to_string())
}

fn matrix(name: &str, rows: &Matrix) -> Result<SymMatrix, CliError> {
    SymMatrix::from_rows(rows).map_err(|e| CliError::Input(format!("{name}: {e}")))
}

impl Config {
    /// Builds the problem, with `ρ` replaced by `rho` when given.
    ///
    /// For the random coefficient criteria `ρ` sets the last diagonal entry
    /// of `D` to `ρ/(1−ρ)`; plain CBRC configurations have no `ρ`.
    pub fn problem(&self, rho: Option<f64>) -> Result<CbrcProblem, CliError> {
        match &self.criterion {
            CriterionSpec::PaperExample { rho: base, with_constraint10 } => {
                if self.design_space.is_some() || self.regression.is_some() {
                    return Err(CliError::Input(
                        "paper_example fixes design_space and regression; remove them".into(),
                    ));
                }
                if self.constraints.total_trials.is_some() {
                    return Err(CliError::Input("paper_example fixes total_trials at 10".into()));
                }
                let problem = paper_example(rho.unwrap_or(*base), *with_constraint10).map_err(input)?;
                self.merge(problem)
            }
            CriterionSpec::Cbrc { terms } => {
                if rho.is_some() {
                    return Err(CliError::Input(
                        "a sweep needs an rcr_linear, rcr_imse or paper_example criterion".into(),
                    ));
                }
                let (space, regression) = self.space_and_regression()?;
                let terms = terms
                    .iter()
                    .enumerate()
                    .map(|(j, t)| {
                        Ok(BayesTerm::new(
                            matrix(&format!("criterion.terms[{j}].B"), &t.prior)?,
                            matrix(&format!("criterion.terms[{j}].H"), &t.loss)?,
                        ))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                let cons = LinearConstraintSet::unconstrained(space.len());
                let cons = match &self.constraints.total_trials {
                    Some(t) => cons.with_total_trials(t.relation.into(), t.value),
                    None => cons,
                };
                let problem = CbrcProblem::new(space, regression, terms, cons).map_err(input)?;
                self.merge(problem)
            }
            CriterionSpec::RcrLinear { n, dispersion, weight } => {
                let a = matrix("criterion.A", weight)?;
                self.rcr(*n, dispersion, RcrCriterion::Linear(a), rho)
            }
            CriterionSpec::RcrImse { n, dispersion, nu } => {
                let d = self.design_space.as_ref().map_or(0, Vec::len);
                let nu = nu.clone().unwrap_or_else(|| uniform_measure(d));
                self.rcr(*n, dispersion, RcrCriterion::Imse(nu), rho)
            }
        }
    }

    fn rcr(
        &self,
        individuals: usize,
        dispersion: &Matrix,
        criterion: RcrCriterion,
        rho: Option<f64>,
    ) -> Result<CbrcProblem, CliError> {
        let (space, regression) = self.space_and_regression()?;
        let trials = match &self.constraints.total_trials {
            Some(TotalSpec { relation: RelationSpec::Eq, value })
                if *value >= 1.0 && value.fract() == 0.0 =>
            {
                *value as usize
            }
            _ => {
                return Err(CliError::Input(
                    "random coefficient criteria need constraints.total_trials = m with integer m >= 1".into(),
                ))
            }
        };
        let mut dispersion = dispersion.clone();
        if let Some(rho) = rho {
            let delta = slope_variance(rho).map_err(input)?;
            let last = dispersion.len().checked_sub(1).ok_or(CliError::Input("criterion.D is empty".into()))?;
            let row = &mut dispersion[last];
            if row.len() != last + 1 {
                return Err(CliError::Input("criterion.D must be square".into()));
            }
            row[last] = delta;
        }
        let spec = RcrSpec {
            space,
            regression,
            individuals,
            trials,
            dispersion: matrix("criterion.D", &dispersion)?,
            criterion,
        };
        let problem = spec.to_problem().map_err(input)?;
        self.merge(problem)
    }

    fn space_and_regression(&self) -> Result<(DesignSpace, RegressionMap), CliError> {
        let points = self
            .design_space
            .as_ref()
            .ok_or(CliError::Input("design_space is required for this criterion".into()))?;
        let space = DesignSpace::new(
            points
                .iter()
                .map(|p| DesignPoint::new(p.label.clone(), p.coordinate.clone()))
                .collect(),
        )
        .map_err(input)?;
        let regression = match self
            .regression
            .as_ref()
            .ok_or(CliError::Input("regression is required for this criterion".into()))?
        {
            RegressionSpec::Polynomial { degree } => RegressionMap::polynomial(&space, *degree),
            RegressionSpec::Explicit { vectors } => {
                if vectors.len() != space.len() {
                    return Err(CliError::Input(format!(
                        "regression.vectors has {} entries, design_space has {} points",
                        vectors.len(),
                        space.len()
                    )));
                }
                RegressionMap::new(vectors.clone())
            }
        }
        .map_err(input)?;
        Ok((space, regression))
    }

    /// Adds rows, bounds and the integrality flag to the problem's own set.
    fn merge(&self, problem: CbrcProblem) -> Result<CbrcProblem, CliError> {
        let spec = &self.constraints;
        let d = problem.n_points();
        let mut cons = problem.constraints().clone();
        for (i, row) in spec.rows.iter().enumerate() {
            cons.add_row(ConstraintRow::new(row.coefficients.clone(), row.relation.into(), row.rhs))
                .map_err(|e| CliError::Input(format!("constraints.rows[{i}]: {e}")))?;
        }
        if let Some(b) = &spec.bounds {
            let lower = b.lower.clone().unwrap_or_else(|| vec![0.0; d]);
            let upper = b
                .upper
                .as_ref()
                .map(|u| u.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect())
                .unwrap_or_else(|| vec![f64::INFINITY; d]);
            cons = cons
                .with_bounds(lower, upper)
                .map_err(|e| CliError::Input(format!("constraints.bounds: {e}")))?;
        }
        if spec.integrality {
            cons = cons.with_integrality(true);
        }
        problem.with_constraints(cons).map_err(input)
    }

    /// Whether [`Config::problem`] accepts a `ρ` override.
    pub fn sweepable(&self) -> bool {
        !matches!(self.criterion, CriterionSpec::Cbrc { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_example_config() {
        let c = parse(r#"{"criterion": {"type": "paper_example", "rho": 0.1}}"#).unwrap();
        let p = c.problem(None).unwrap();
        assert_eq!(p.n_points(), 51);
        assert!(p.constraints().rows().is_empty());
        assert_eq!(c.problem(Some(0.5)).unwrap().terms()[1].prior.get(1, 1), 1.0);
    }

    #[test]
    fn error_path_is_reported() {
        let err = parse(r#"{"criterion": {"type": "cbrc", "terms": [{"B": [[0]], "H": "x"}]}}"#).unwrap_err();
        assert!(err.starts_with("criterion.terms[0].H"), "{err}");
        let err = parse(r#"{"criterion": {"type": "paper_example", "rho": 0.1}, "extra": 1}"#).unwrap_err();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn rcr_sweep_rescales_last_dispersion_entry() {
        let c = parse(
            r#"{
                "design_space": [{"label": "a", "coordinate": [0]}, {"label": "b", "coordinate": [1]}],
                "regression": {"type": "polynomial", "degree": 1},
                "criterion": {"type": "rcr_imse", "n": 5, "D": [[1, 0], [0, 7]]},
                "constraints": {"total_trials": {"value": 4}}
            }"#,
        )
        .unwrap();
        let p = c.problem(Some(0.5)).unwrap();
        assert!((p.terms()[1].prior.get(1, 1) - 1.0).abs() < 1e-14);
        let p = c.problem(None).unwrap();
        assert!((p.terms()[1].prior.get(1, 1) - 1.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn rcr_needs_trials() {
        let c = parse(
            r#"{
                "design_space": [{"label": "a", "coordinate": [0]}, {"label": "b", "coordinate": [1]}],
                "regression": {"type": "polynomial", "degree": 1},
                "criterion": {"type": "rcr_imse", "n": 5, "D": [[1, 0], [0, 1]]}
            }"#,
        )
        .unwrap();
        assert!(matches!(c.problem(None), Err(CliError::Input(_))));
    }

    #[test]
    fn cbrc_config_with_rows_and_bounds() {
        let c = parse(
            r#"{
                "design_space": [{"label": "a", "coordinate": [0]}, {"label": "b", "coordinate": [1]}],
                "regression": {"type": "explicit", "vectors": [[1, 0], [1, 1]]},
                "criterion": {"type": "cbrc", "terms": [{"B": [[0, 0], [0, 0]], "H": [[1, 0], [0, 1]]}]},
                "constraints": {
                    "rows": [{"coefficients": [1, 0], "relation": "<=", "rhs": 3}],
                    "total_trials": {"relation": "=", "value": 5},
                    "bounds": {"upper": [null, 4]},
                    "integrality": true
                }
            }"#,
        )
        .unwrap();
        let p = c.problem(None).unwrap();
        assert_eq!(p.constraints().rows().len(), 1);
        assert_eq!(p.constraints().upper(), &[f64::INFINITY, 4.0]);
        assert!(p.constraints().integrality());
        assert!(c.problem(Some(0.2)).is_err());
    }
}

//! Solution files, sweep tables and evaluation reports.

use std::io::{self, Write};

use cbrc::sweep::SweepRow;
use cbrc::{CbrcProblem, CriterionValue, Design};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WeightEntry {
    pub label: String,
    pub weight: f64,
}

/// Written by `solve`; `evaluate` reads back only `design`.
#[derive(Clone, Debug, Serialize)]
pub struct Solution {
    pub status: String,
    pub mode: String,
    /// Number, `"+inf"`, or `null` without a design.
    pub criterion: Value,
    pub terms: Vec<Value>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub nodes: Option<usize>,
    pub ties: Option<usize>,
    pub wall_time_s: f64,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub design: Vec<WeightEntry>,
}

#[derive(Debug, Deserialize)]
struct DesignFile {
    design: Vec<WeightEntry>,
}

pub fn criterion_json(v: CriterionValue) -> Value {
    match v {
        CriterionValue::Finite(x) => Value::from(x),
        CriterionValue::Infinite => Value::from("+inf"),
    }
}

pub fn design_entries(problem: &CbrcProblem, design: &Design) -> Vec<WeightEntry> {
    problem
        .space()
        .points()
        .iter()
        .zip(design.weights())
        .map(|(p, &w)| WeightEntry {
            label: p.label.clone(),
            weight: w,
        })
        .collect()
}

/// Reads `{"design": [{"label", "weight"}, …]}`; every label of the space
/// must appear exactly once.
pub fn read_design(text: &str, problem: &CbrcProblem) -> Result<Design, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: DesignFile = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::Input(format!("{}: {}", e.path(), e.inner())))?;
    let space = problem.space();
    let mut weights = vec![None; space.len()];
    for entry in &file.design {
        let i = space
            .index_of(&entry.label)
            .ok_or_else(|| CliError::Input(format!("label {:?} is not in the design space", entry.label)))?;
        if weights[i].replace(entry.weight).is_some() {
            return Err(CliError::Input(format!("label {:?} appears twice", entry.label)));
        }
    }
    let weights = weights
        .into_iter()
        .enumerate()
        .map(|(i, w)| w.ok_or_else(|| CliError::Input(format!("no weight for label {:?}", space.point(i).label))))
        .collect::<Result<Vec<_>, _>>()?;
    Design::new(weights).map_err(|e| CliError::Input(e.to_string()))
}

/// Columns: `rho, status, criterion`, then one weight column per label in
/// design-space order.
pub fn write_sweep_csv(out: impl Write, problem: &CbrcProblem, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["rho".to_string(), "status".to_string(), "criterion".to_string()];
    header.extend(problem.space().points().iter().map(|p| p.label.clone()));
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        let mut record = vec![
            row.rho.to_string(),
            row.status.clone(),
            row.value.map_or(String::new(), |v| v.to_string()),
        ];
        match &row.design {
            Some(d) => record.extend(d.weights().iter().map(|v| v.to_string())),
            None => record.extend(std::iter::repeat_n(String::new(), problem.n_points())),
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(CliError::Io)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(io::Error::other(e))
}

/// Value, per-term breakdown and feasibility of `design`.
pub fn write_evaluation(mut out: impl Write, problem: &CbrcProblem, design: &Design) -> Result<(), CliError> {
    let value = problem.cbrc_value(design).map_err(CliError::Core)?;
    writeln!(out, "criterion {value}")?;
    for (j, t) in problem.term_values(design).map_err(CliError::Core)?.iter().enumerate() {
        writeln!(out, "term {} {t}", j + 1)?;
    }
    let report = problem.constraints().check_feasible(design, cbrc::constraints::FEASIBILITY_TOL);
    writeln!(out, "feasible {}", report.is_feasible())?;
    for v in &report.violations {
        writeln!(out, "violation {v}")?;
    }
    Ok(())
}

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{InitKind, Mode, Sequence, Simulator};
use crate::error::{Error, Result};
use crate::linalg::DensityMatrix;
use crate::model::{BasisMap, PhysicalParams};

/// Quantity recorded after each run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observable {
    /// Signal proportional to the m_S = 0 population.
    #[default]
    Fluorescence,
    /// Exact populations of the four computational states.
    Populations,
    /// Emulated full tomography of the computational block.
    Tomography,
}

impl Observable {
    pub fn keyword(self) -> &'static str {
        match self {
            Observable::Fluorescence => "fluor",
            Observable::Populations => "populations",
            Observable::Tomography => "tomo",
        }
    }

    pub fn columns(self) -> Vec<String> {
        match self {
            Observable::Fluorescence => vec!["fluorescence".into()],
            Observable::Populations => ["p00", "p01", "p10", "p11"].map(String::from).to_vec(),
            Observable::Tomography => {
                let mut cols = Vec::with_capacity(16);
                for i in 0..4 {
                    for j in i..4 {
                        cols.push(format!("rho{i}{j}_re"));
                        if i != j {
                            cols.push(format!("rho{i}{j}_im"));
                        }
                    }
                }
                cols
            }
        }
    }

    /// Evaluates on a six-level state; `point` offsets the shot-noise seed.
    pub fn evaluate(self, sim: &Simulator, rho: &DensityMatrix, point: u64) -> Result<Vec<f64>> {
        match self {
            Observable::Fluorescence => Ok(vec![sim.measure_fluorescence(rho, point)]),
            Observable::Populations => {
                let pops = rho.populations();
                Ok(BasisMap::COMPUTATIONAL.iter().map(|&k| pops[k]).collect())
            }
            Observable::Tomography => {
                let block = rho.restrict_normalized(&BasisMap::COMPUTATIONAL)?;
                let est = crate::experiments::tomography_emulated(sim, &block, point)?;
                let op = est.rho_est.as_operator();
                let mut out = Vec::with_capacity(16);
                for i in 0..4 {
                    for j in i..4 {
                        out.push(op[(i, j)].re);
                        if i != j {
                            out.push(op[(i, j)].im);
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fluor" | "fluorescence" => Ok(Observable::Fluorescence),
            "populations" => Ok(Observable::Populations),
            "tomo" | "tomography" => Ok(Observable::Tomography),
            other => Err(Error::InvalidParams(format!("unknown observable `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub sequence: String,
    pub observable: Observable,
    pub init: InitKind,
    pub mode: Mode,
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub params: PhysicalParams,
}

impl SweepMetadata {
    pub fn new(sim: &Simulator, sequence: &str, observable: Observable, init: InitKind) -> Self {
        let noise = sim.options().shot_noise;
        Self {
            sequence: sequence.to_string(),
            observable,
            init,
            mode: sim.options().mode,
            seed: noise.map(|n| n.seed),
            shots: noise.map(|n| n.shots),
            params: sim.params().clone(),
        }
    }
}

/// One row of observables per delay value, in grid order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub columns: Vec<String>,
    pub taus: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub metadata: SweepMetadata,
}

/// Observables of a single run without a swept delay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub columns: Vec<String>,
    pub values: Vec<f64>,
    pub metadata: SweepMetadata,
}

/// Twelve significant digits.
pub fn format_value(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.11e}")
}

impl SweepResult {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_us");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (tau, row) in self.taus.iter().zip(&self.rows) {
            out.push_str(&format_value(*tau));
            for v in row {
                let _ = write!(out, ",{}", format_value(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl PointResult {
    pub fn to_csv(&self) -> String {
        let values: Vec<String> = self.values.iter().map(|v| format_value(*v)).collect();
        format!("{}\n{}\n", self.columns.join(","), values.join(","))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parsed numeric CSV: header names and rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Csv("missing header".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Csv(format!("row {}: `{}` is not a number", n + 1, s.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::Csv(format!(
                "row {} has {} fields, header has {}",
                n + 1,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

/// Runs `template` once per entry of `taus`, binding its single symbolic delay.
pub fn sweep_delay(
    sim: &Simulator,
    template: &Sequence,
    init: InitKind,
    taus: &[f64],
    observable: Observable,
) -> Result<SweepResult> {
    let slots = template.tau_slots();
    if slots != 1 {
        return Err(Error::TauSlots(slots));
    }
    if taus.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if template.elements.is_empty() {
        return Err(Error::EmptySequence(template.name.clone()));
    }
    let rho0 = sim.initial_state(init)?;
    let rows = taus
        .iter()
        .enumerate()
        .map(|(k, &tau)| measure_after(sim, &rho0, &template.bind_tau(tau), observable, k as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        columns: observable.columns(),
        taus: taus.to_vec(),
        rows,
        metadata: SweepMetadata::new(sim, &template.name, observable, init),
    })
}

fn measure_after(
    sim: &Simulator,
    rho0: &DensityMatrix,
    seq: &Sequence,
    observable: Observable,
    point: u64,
) -> Result<Vec<f64>> {
    let body = seq.measured_part();
    let rho = if body.is_empty() {
        rho0.clone()
    } else {
        sim.propagate(rho0, &Sequence::new(seq.name.clone(), body.to_vec()))?
    };
    observable.evaluate(sim, &rho, point)
}

/// Runs a sequence without symbolic delays once.
pub fn run_point(sim: &Simulator, seq: &Sequence, init: InitKind, observable: Observable) -> Result<PointResult> {
    let slots = seq.tau_slots();
    if slots != 0 {
        return Err(Error::UnboundTau);
    }
    if seq.elements.is_empty() {
        return Err(Error::EmptySequence(seq.name.clone()));
    }
    let rho0 = sim.initial_state(init)?;
    Ok(PointResult {
        columns: observable.columns(),
        values: measure_after(sim, &rho0, seq, observable, 0)?,
        metadata: SweepMetadata::new(sim, &seq.name, observable, init),
    })
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        n => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|k| if k == n - 1 { stop } else { start + step * k as f64 }).collect()
        }
    }
}

//! Two-qubit state tomography from fluorescence readouts.
//!
//! Each setting applies a short sequence of gates that exist on the device
//! and records the m_S = 0 population. The unknown state enters linearly, so
//! the estimate is a least-squares inversion followed by a projection onto
//! the set of density matrices.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::engine::{CleanupKind, PulseElement, Sequence, Simulator, Transition};
use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, DensityMatrix, Operator, I, ONE};
use crate::model::{evolution_period, BasisMap};

/// Largest accepted condition number of the design matrix.
pub const DEFAULT_COND_BOUND: f64 = 1e3;

/// Rabi frequency of the 90-degree readout pulses, MHz.
pub const READOUT_RABI_MHZ: f64 = 7.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReadoutGate {
    /// Electron inversion.
    X,
    /// 90 degrees about x on the 0 <-> -1 transition.
    Rx,
    /// 90 degrees about y on the 0 <-> -1 transition.
    Ry,
    /// Free evolution for a quarter period, a conditional pi/2 rotation.
    C,
    /// Clean-up that empties |00>.
    V,
}

impl ReadoutGate {
    pub fn element(self, sim: &Simulator) -> Result<PulseElement> {
        Ok(match self {
            ReadoutGate::X => PulseElement::U180e,
            ReadoutGate::Rx => PulseElement::mw(Transition::MinusOne, READOUT_RABI_MHZ, 0.0, 90.0),
            ReadoutGate::Ry => PulseElement::mw(Transition::MinusOne, READOUT_RABI_MHZ, 90.0, 90.0),
            ReadoutGate::C => PulseElement::delay(evolution_period(sim.params())? / 4.0),
            ReadoutGate::V => PulseElement::Cleanup(CleanupKind::V),
        })
    }
}

impl fmt::Display for ReadoutGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Readout settings in time order. Settings of length four are required:
/// shorter words leave the x-x correlation of the two qubits unobserved.
pub const READOUT_SETTINGS: [&[ReadoutGate]; 24] = {
    use ReadoutGate::*;
    [
        &[],
        &[X],
        &[Rx],
        &[Ry],
        &[C, C, Rx],
        &[C, C, Ry],
        &[V, X, V],
        &[Rx, C, C, Ry],
        &[C, V, X, V],
        &[V, V, Rx],
        &[V, V, Ry],
        &[X, C, X, V],
        &[C, C, Rx, V],
        &[C, X, Rx, V],
        &[C, Ry, V],
        &[V, X, V, Rx],
        &[X, V, V, Ry],
        &[X, C, Ry, V],
        &[Ry, C, Rx, V],
        &[X, V, V, Rx],
        &[V, Rx, C, Ry],
        &[C, V, V, Rx],
        &[X, V, X, V],
        &[C, V, V, Ry],
    ]
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TomographyMethod {
    /// Returns the true state.
    Oracle,
    /// Simulated readouts followed by linear inversion.
    #[default]
    Emulated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TomographyResult {
    pub rho_est: DensityMatrix,
    pub condition_number: f64,
    pub residual: f64,
    pub method: TomographyMethod,
}

/// Orthonormal Hermitian basis of 4x4 matrices under `<A, B> = Tr(A B)`.
fn hermitian_basis() -> Vec<Operator> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(16);
    for i in 0..4 {
        out.push(Operator::ket_bra(4, i, i));
    }
    for i in 0..4 {
        for j in (i + 1)..4 {
            let mut sym = Operator::zeros(4);
            sym[(i, j)] = C64::new(h, 0.0);
            sym[(j, i)] = C64::new(h, 0.0);
            out.push(sym);
            let mut asym = Operator::zeros(4);
            asym[(i, j)] = I * h;
            asym[(j, i)] = -I * h;
            out.push(asym);
        }
    }
    out
}

/// Real part of `Tr(A B)`.
fn trace_product(a: &Operator, b: &Operator) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

fn setting_sequence(sim: &Simulator, gates: &[ReadoutGate]) -> Result<Sequence> {
    let elements = gates.iter().map(|g| g.element(sim)).collect::<Result<Vec<_>>>()?;
    let name = gates.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(" ");
    Ok(Sequence::new(name, elements))
}

fn setting_unitary(sim: &Simulator, gates: &[ReadoutGate]) -> Result<Operator> {
    gates.iter().try_fold(Operator::identity(6), |acc, g| {
        Ok(&sim.element_propagator(&g.element(sim)?)? * &acc)
    })
}

/// Measurement operators on the computational block, one per setting.
pub fn readout_effects(sim: &Simulator) -> Result<Vec<Operator>> {
    let bright = {
        let mut p = Operator::zeros(6);
        for k in BasisMap::block(BasisMap::MS_ZERO) {
            p[(k, k)] = ONE;
        }
        p
    };
    READOUT_SETTINGS
        .iter()
        .map(|gates| {
            let u = setting_unitary(sim, gates)?;
            let heis = &(&u.dagger() * &bright) * &u;
            Ok(heis.restrict(&BasisMap::COMPUTATIONAL).hermitian_part())
        })
        .collect()
}

/// Design matrix rows `Tr(E_k B_m)` for the Hermitian basis `B_m`.
pub fn design_matrix(sim: &Simulator) -> Result<Vec<Vec<f64>>> {
    let basis = hermitian_basis();
    Ok(readout_effects(sim)?
        .iter()
        .map(|e| basis.iter().map(|b| trace_product(e, b)).collect())
        .collect())
}

struct Inversion {
    coefficients: Vec<f64>,
    condition_number: f64,
    residual: f64,
}

/// Least squares through the eigendecomposition of the normal matrix.
fn least_squares(a: &[Vec<f64>], y: &[f64]) -> Result<Inversion> {
    let m = a[0].len();
    let normal = Operator::from_fn(m, |i, j| {
        C64::new(a.iter().map(|row| row[i] * row[j]).sum(), 0.0)
    });
    let spec = eig_hermitian(&normal)?;
    let lmin = spec.values[0];
    let lmax = spec.values[m - 1];
    let condition_number = if lmin > 0.0 { (lmax / lmin).sqrt() } else { f64::INFINITY };
    let aty: Vec<f64> = (0..m).map(|i| a.iter().zip(y).map(|(row, yk)| row[i] * yk).sum()).collect();
    let mut coefficients = vec![0.0; m];
    for k in 0..m {
        if spec.values[k] <= 0.0 {
            continue;
        }
        let v = spec.vector(k);
        let proj: f64 = v.iter().zip(&aty).map(|(vi, b)| vi.re * b).sum();
        for i in 0..m {
            coefficients[i] += v[i].re * proj / spec.values[k];
        }
    }
    let residual = a
        .iter()
        .zip(y)
        .map(|(row, yk)| {
            let fit: f64 = row.iter().zip(&coefficients).map(|(r, c)| r * c).sum();
            (fit - yk).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    Ok(Inversion { coefficients, condition_number, residual })
}

/// Nearest state by eigenvalue clipping and renormalization.
pub fn project_to_state(op: &Operator) -> Result<DensityMatrix> {
    let spec = eig_hermitian(&op.hermitian_part())?;
    let total: f64 = spec.values.iter().map(|l| l.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidState("estimate has no positive part".into()));
    }
    let clipped = spec.map(|l| C64::new(l.max(0.0) / total, 0.0));
    Ok(DensityMatrix::new_unchecked(clipped.hermitian_part()))
}

/// Emulated tomography where the same simulator models and measures.
pub fn tomography_emulated(sim: &Simulator, rho: &DensityMatrix, point: u64) -> Result<TomographyResult> {
    tomography_emulated_with(sim, sim, rho, point, DEFAULT_COND_BOUND)
}

/// `design` supplies the nominal measurement model, `device` produces the
/// readouts (possibly with gate errors and shot noise).
pub fn tomography_emulated_with(
    design: &Simulator,
    device: &Simulator,
    rho: &DensityMatrix,
    point: u64,
    cond_bound: f64,
) -> Result<TomographyResult> {
    if rho.dim() != 4 {
        return Err(Error::Dimension(format!("tomography expects a two-qubit state, got dimension {}", rho.dim())));
    }
    let a = design_matrix(design)?;
    let rho6 = rho.embed(6, &BasisMap::COMPUTATIONAL);
    let n_settings = READOUT_SETTINGS.len() as u64;
    let y = READOUT_SETTINGS
        .iter()
        .enumerate()
        .map(|(k, gates)| {
            let out = if gates.is_empty() {
                rho6.clone()
            } else {
                device.propagate(&rho6, &setting_sequence(device, gates)?)?
            };
            Ok(device.measure_fluorescence(&out, point * n_settings + k as u64))
        })
        .collect::<Result<Vec<f64>>>()?;
    let inv = least_squares(&a, &y)?;
    if !(inv.condition_number <= cond_bound) {
        return Err(Error::DegradedDesign { cond: inv.condition_number, bound: cond_bound });
    }
    let basis = hermitian_basis();
    let raw = basis
        .iter()
        .zip(&inv.coefficients)
        .fold(Operator::zeros(4), |acc, (b, c)| &acc + &b.scale_re(*c));
    Ok(TomographyResult {
        rho_est: project_to_state(&raw)?,
        condition_number: inv.condition_number,
        residual: inv.residual,
        method: TomographyMethod::Emulated,
    })
}

pub fn tomography_full(sim: &Simulator, rho_true: &DensityMatrix, method: TomographyMethod) -> Result<TomographyResult> {
    match method {
        TomographyMethod::Oracle => Ok(TomographyResult {
            rho_est: rho_true.clone(),
            condition_number: 1.0,
            residual: 0.0,
            method,
        }),
        TomographyMethod::Emulated => tomography_emulated(sim, rho_true, 0),
    }
}

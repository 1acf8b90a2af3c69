use num_complex::Complex64 as C64;

use super::{eig_hermitian, Operator, ONE, ZERO};
use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("state vector norm is {norm}")));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales to unit norm; fails only for the zero vector.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Ok(Self { amplitudes: amplitudes.into_iter().map(|a| a / norm).collect() })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dimension {dim}");
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn projector(&self) -> Operator {
        let a = &self.amplitudes;
        Operator::from_fn(a.len(), |i, j| a[i] * a[j].conj())
    }
}

/// Trace-one, Hermitian, positive semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    /// Validates the state invariants.
    pub fn new(op: Operator) -> Result<Self> {
        let defect = op.hermiticity_defect();
        if !(defect <= TRACE_TOL) {
            return Err(Error::InvalidState(format!("not Hermitian (defect {defect:.3e})")));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let min = eig_hermitian(&op)?.values[0];
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self(op))
    }

    /// Wraps an operator whose invariants hold by construction (the image of a
    /// valid state under a unitary or a trace-preserving channel).
    pub(crate) fn new_unchecked(op: Operator) -> Self {
        Self(op)
    }

    pub fn pure(psi: &StateVector) -> Self {
        Self(psi.projector())
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        Self(Operator::ket_bra(dim, index, index))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(Operator::identity(dim).scale_re(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.diag().into_iter().map(|z| z.re).collect()
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eig_hermitian(&self.0).map(|s| s.values[0]).unwrap_or(f64::NEG_INFINITY)
    }

    /// `U rho U^dagger`.
    pub fn evolve(&self, u: &Operator) -> Self {
        Self(self.0.conjugate_by(u).hermitian_part())
    }

    /// Embeds a state of dimension `indices.len()` into `dim` dimensions.
    pub fn embed(&self, dim: usize, indices: &[usize]) -> Self {
        Self(self.0.embed(dim, indices))
    }

    /// Principal block on `indices`, renormalized to unit trace.
    pub fn restrict_normalized(&self, indices: &[usize]) -> Result<Self> {
        let block = self.0.restrict(indices);
        let tr = block.trace().re;
        if !(tr > 1e-15) {
            return Err(Error::InvalidState("no population in the requested block".into()));
        }
        Ok(Self(block.scale_re(1.0 / tr)))
    }
}

/// Traces out the leading (electron) tensor factor.
pub fn partial_trace_electron(rho: &DensityMatrix, electron_dim: usize) -> Result<DensityMatrix> {
    let dim = rho.dim();
    if electron_dim == 0 || !dim.is_multiple_of(electron_dim) {
        return Err(Error::Dimension(format!(
            "state of dimension {dim} has no electron factor of dimension {electron_dim}"
        )));
    }
    let n = dim / electron_dim;
    let op = rho.as_operator();
    let reduced = Operator::from_fn(n, |k, l| {
        (0..electron_dim).map(|e| op[(e * n + k, e * n + l)]).sum()
    });
    Ok(DensityMatrix(reduced))
}

/// `F = Tr(rho sigma) / sqrt(Tr(rho^2) Tr(sigma^2))`.
pub fn state_fidelity(rho: &DensityMatrix, target: &DensityMatrix) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::Dimension(format!(
            "fidelity between dimensions {} and {}",
            rho.dim(),
            target.dim()
        )));
    }
    let p1 = rho.purity();
    let p2 = target.purity();
    if !(p1 > 1e-15 && p2 > 1e-15) {
        return Err(Error::ZeroPurity);
    }
    let a = rho.as_operator();
    let b = target.as_operator();
    let n = a.dim();
    let mut overlap = ZERO;
    for i in 0..n {
        for j in 0..n {
            overlap += a[(i, j)] * b[(j, i)];
        }
    }
    Ok((overlap.re / (p1 * p2).sqrt()).clamp(0.0, 1.0))
}

use num_complex::Complex64 as C64;

use super::{Operator, HERMITIAN_TOL, ONE, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Relative gap under which neighbouring eigenvalues are treated as one
/// degenerate cluster.
const DEGENERACY_TOL: f64 = 1e-9;

/// Eigendecomposition `h = V diag(values) V^dagger` of a Hermitian operator.
///
/// Eigenvalues are ascending. Each eigenvector is phase-fixed so that its
/// first non-negligible component is real and positive; inside a degenerate
/// cluster the basis is rebuilt from projected unit vectors, so the output
/// does not depend on the order of Jacobi rotations.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: Operator,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.dim()).map(|i| self.vectors[(i, k)]).collect()
    }

    /// `V diag(f(lambda)) V^dagger`.
    pub fn map<F>(&self, f: F) -> Operator
    where
        F: Fn(f64) -> C64,
    {
        let n = self.dim();
        let weights: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        Operator::from_fn(n, |i, j| {
            (0..n).map(|k| v[(i, k)] * weights[k] * v[(j, k)].conj()).sum()
        })
    }

    pub fn reconstruct(&self) -> Operator {
        self.map(|l| C64::new(l, 0.0))
    }

    /// `exp(-i h t)`.
    pub fn propagator(&self, t: f64) -> Operator {
        self.map(|l| C64::from_polar(1.0, -l * t))
    }
}

/// Jacobi eigensolver for complex Hermitian matrices.
pub fn eig_hermitian(h: &Operator) -> Result<Spectrum> {
    let defect = h.hermiticity_defect();
    if !(defect <= HERMITIAN_TOL) || !h.is_finite() {
        return Err(Error::NotHermitian { defect });
    }
    let n = h.dim();
    let mut a = h.hermitian_part();
    let mut v = Operator::identity(n);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                if mag < 1e-300 || mag <= 1e-18 * (app.abs() + aqq.abs()) {
                    a[(p, q)] = ZERO;
                    a[(q, p)] = ZERO;
                    continue;
                }
                rotated = true;
                let phase = apq / mag;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // J = diag(1, conj(phase)) * [[c, s], [-s, c]] on the (p, q) plane.
                let j_pp = C64::new(c, 0.0);
                let j_pq = C64::new(s, 0.0);
                let j_qp = phase.conj() * -s;
                let j_qq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * j_pp + akq * j_qp;
                    a[(k, q)] = akp * j_pq + akq * j_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = j_pp.conj() * apk + j_qp.conj() * aqk;
                    a[(q, k)] = j_pq.conj() * apk + j_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * j_pp + vkq * j_qp;
                    v[(k, q)] = vkp * j_pq + vkq * j_qq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(x, x)].re.total_cmp(&a[(y, y)].re));
    let values: Vec<f64> = order.iter().map(|&k| a[(k, k)].re).collect();
    let mut vectors = Operator::from_fn(n, |i, k| v[(i, order[k])]);

    let scale = values.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] <= DEGENERACY_TOL * scale {
            end += 1;
        }
        if end - start > 1 {
            canonicalize_cluster(&mut vectors, start, end);
        }
        start = end;
    }
    for k in 0..n {
        fix_phase(&mut vectors, k);
    }
    Ok(Spectrum { values, vectors })
}

/// `exp(-i h t)` by spectral decomposition.
pub fn expm_unitary(h: &Operator, t: f64) -> Result<Operator> {
    Ok(eig_hermitian(h)?.propagator(t))
}

/// Replaces columns `start..end` by a Gram-Schmidt basis built from the
/// projections of the unit vectors onto their span.
fn canonicalize_cluster(vectors: &mut Operator, start: usize, end: usize) {
    let n = vectors.dim();
    let m = end - start;
    let cols: Vec<Vec<C64>> = (start..end)
        .map(|k| (0..n).map(|i| vectors[(i, k)]).collect())
        .collect();
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m);
    let mut used = vec![false; n];
    while basis.len() < m {
        let mut picked = None;
        let mut best: Option<(usize, Vec<C64>, f64)> = None;
        for e in 0..n {
            if used[e] {
                continue;
            }
            // P e = sum_c c c^dagger e, then remove what is already spanned.
            let mut w: Vec<C64> = vec![ZERO; n];
            for c in &cols {
                let coef = c[e].conj();
                for i in 0..n {
                    w[i] += c[i] * coef;
                }
            }
            for b in &basis {
                let coef: C64 = b.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
                for i in 0..n {
                    w[i] -= b[i] * coef;
                }
            }
            let norm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.3 {
                picked = Some((e, w, norm));
                break;
            }
            if best.as_ref().is_none_or(|(_, _, bn)| norm > *bn) {
                best = Some((e, w, norm));
            }
        }
        let (e, w, norm) = picked.or(best).expect("degenerate cluster lost its span");
        used[e] = true;
        basis.push(w.into_iter().map(|x| x / norm).collect());
    }
    for (offset, b) in basis.iter().enumerate() {
        for i in 0..n {
            vectors[(i, start + offset)] = b[i];
        }
    }
}

fn fix_phase(vectors: &mut Operator, k: usize) {
    let n = vectors.dim();
    let pivot = (0..n).find(|&i| vectors[(i, k)].norm() > 1e-6);
    if let Some(i) = pivot {
        let z = vectors[(i, k)];
        let rot = if z.norm() > 0.0 { z.conj() / z.norm() } else { ONE };
        for r in 0..n {
            vectors[(r, k)] *= rot;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;
    use std::f64::consts::PI;

    fn ix() -> Operator {
        Operator::from_real_rows(&[0.0, 0.5, 0.5, 0.0]).unwrap()
    }

    #[test]
    fn spin_half_x_spectrum() {
        let s = eig_hermitian(&ix()).unwrap();
        assert!((s.values[0] + 0.5).abs() < 1e-15);
        assert!((s.values[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn diagonal_input_gives_permutation_vectors() {
        let h = Operator::from_real_diag(&[3.0, 1.0, 2.0]);
        let s = eig_hermitian(&h).unwrap();
        assert_eq!(s.values, vec![1.0, 2.0, 3.0]);
        let expected = Operator::from_real_rows(&[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(s.vectors, expected);
    }

    #[test]
    fn kron_sz_ix_spectrum() {
        // Oracle: s_z (x) I_x is block diagonal with blocks +-1/2 * I_x, so its
        // eigenvalues are {+-1/4} from each block.
        let sz = Operator::from_real_diag(&[0.5, -0.5]);
        let s = eig_hermitian(&kron(&sz, &ix())).unwrap();
        let expected = [-0.25, -0.25, 0.25, 0.25];
        for (got, want) in s.values.iter().zip(expected) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_cluster_is_canonical() {
        // Rotate diag(0, 0, 1) by a unitary mixing the degenerate pair; the
        // canonical basis must come back as e0, e1.
        let c = (0.3f64).cos();
        let s = (0.3f64).sin();
        let u = Operator::from_rows(&[
            C64::new(c, 0.0), C64::new(0.0, s), ZERO,
            C64::new(0.0, s), C64::new(c, 0.0), ZERO,
            ZERO, ZERO, ONE,
        ])
        .unwrap();
        let h = Operator::from_real_diag(&[0.0, 0.0, 1.0]).conjugate_by(&u);
        let spec = eig_hermitian(&h).unwrap();
        assert!(spec.vectors.max_abs_diff(&Operator::identity(3)) < 1e-14);
    }

    #[test]
    fn zero_matrix_exponential_is_identity() {
        let u = expm_unitary(&Operator::zeros(4), 3.7).unwrap();
        assert_eq!(u, Operator::identity(4));
    }

    #[test]
    fn pi_rotation_about_x() {
        let h = ix().scale_re(2.0 * PI * 0.110);
        let t = PI / (2.0 * PI * 0.110);
        let u = expm_unitary(&h, t).unwrap();
        assert!(u[(0, 0)].norm() < 1e-12);
        assert!((u[(0, 1)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_exponentials() {
        let u = expm_unitary(&Operator::from_real_diag(&[1.0, -1.0]), PI).unwrap();
        assert!(u.max_abs_diff(&Operator::identity(2).scale_re(-1.0)) < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian() {
        let h = Operator::from_real_rows(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        match eig_hermitian(&h) {
            Err(Error::NotHermitian { defect }) => assert!((defect - 1.0).abs() < 1e-15),
            other => panic!("expected rejection, got {other:?}"),
        }
        assert!(expm_unitary(&h, 1.0).is_err());
    }
}

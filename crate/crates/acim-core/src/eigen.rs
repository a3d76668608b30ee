//! Second-eigenvalue estimation for column-stochastic transfer matrices.
//!
//! Small matrices go through the dense Schur decomposition; larger ones use
//! a deterministic Arnoldi iteration on the zero-mean subspace. Because the
//! columns sum to one, the all-ones row vector is a left eigenvector for the
//! eigenvalue 1, so projecting every Krylov vector onto the zero-mean
//! subspace deflates that eigenvalue exactly and the Ritz values approximate
//! the rest of the spectrum.

use crate::error::{Error, Result};
use crate::transfer::TransferMatrix;
use nalgebra::{Complex, DMatrix};

pub(crate) const MAX_EIGEN_N: usize = 8192;
const DENSE_MAX_N: usize = 768;
const KRYLOV_DIM: usize = 96;

pub(crate) struct SpectrumEstimate {
    pub lambda2_modulus: f64,
    pub eigenvalue_one_simple: bool,
}

pub(crate) fn estimate(m: &TransferMatrix) -> Result<SpectrumEstimate> {
    let n = m.n();
    if n > MAX_EIGEN_N {
        return Err(Error::Parameter(format!(
            "spectral estimation supports n <= {MAX_EIGEN_N}, got {n}"
        )));
    }
    if n <= DENSE_MAX_N {
        dense_estimate(m)
    } else {
        arnoldi_estimate(m)
    }
}

/// Eigenvalues by real Schur decomposition with a bounded iteration budget.
/// The Francis double shift can stagnate on spectra clustered on a circle
/// (the nilpotent dyadic doubling matrix is the canonical offender here),
/// so on failure the matrix is retried with a graded diagonal perturbation
/// far below every tolerance used downstream. Note that for such matrices
/// the small eigenvalues are infinitely ill-conditioned anyway; any backward
/// error eps resurfaces as spurious eigenvalues of size eps^(1/index).
fn bounded_eigenvalues(a: DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    let n = a.nrows();
    if n == 0 {
        return Some(Vec::new());
    }
    let budget = 100 * n.max(20);
    if let Some(s) = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, budget) {
        return Some(s.complex_eigenvalues().iter().copied().collect());
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for attempt in 1..=3u32 {
        let mut b = a.clone();
        let eps = scale * 1e-13 * attempt as f64;
        for i in 0..n {
            b[(i, i)] += eps * (i + 1) as f64 / n as f64;
        }
        if let Some(s) = nalgebra::linalg::Schur::try_new(b, f64::EPSILON, budget * 2) {
            return Some(s.complex_eigenvalues().iter().copied().collect());
        }
    }
    None
}

fn dense_estimate(m: &TransferMatrix) -> Result<SpectrumEstimate> {
    let n = m.n();
    let a = DMatrix::from_row_slice(n, n, &m.to_dense());
    let Some(eigs) = bounded_eigenvalues(a) else {
        // QR refused even the perturbed forms; the Krylov method has its
        // own exact-breakdown handling for these spectra.
        return arnoldi_estimate(m);
    };
    let one = Complex::new(1.0, 0.0);
    let near_one = eigs.iter().filter(|l| (*l - one).norm() < 1e-8).count();
    let closest = (0..eigs.len())
        .min_by(|&a, &b| {
            let (da, db) = ((eigs[a] - one).norm(), (eigs[b] - one).norm());
            da.partial_cmp(&db).unwrap()
        })
        .ok_or_else(|| Error::Eigen("empty spectrum".into()))?;
    if (eigs[closest] - one).norm() > 1e-6 {
        return Err(Error::Eigen(format!(
            "no eigenvalue near 1 (closest is {})",
            eigs[closest]
        )));
    }
    let lambda2_modulus = eigs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != closest)
        .map(|(_, l)| l.norm())
        .fold(0.0, f64::max);
    Ok(SpectrumEstimate { lambda2_modulus, eigenvalue_one_simple: near_one == 1 })
}

fn arnoldi_estimate(m: &TransferMatrix) -> Result<SpectrumEstimate> {
    let n = m.n();
    let k = KRYLOV_DIM.min(n - 1);
    let mut v0: Vec<f64> = (0..n).map(|i| splitmix(i as u64) - 0.5).collect();
    subtract_mean(&mut v0);
    let norm = l2(&v0);
    if norm == 0.0 {
        return Err(Error::Eigen("degenerate start vector".into()));
    }
    for v in &mut v0 {
        *v /= norm;
    }
    let mut basis = vec![v0];
    let mut h = vec![vec![0.0; k]; k + 1];
    let mut dim = 0;
    for j in 0..k {
        let mut w = m.apply_slice(&basis[j]);
        subtract_mean(&mut w);
        // modified Gram-Schmidt with one re-orthogonalization pass
        for _ in 0..2 {
            for (i, b) in basis.iter().enumerate() {
                let c = dot(b, &w);
                h[i][j] += c;
                for (wv, bv) in w.iter_mut().zip(b) {
                    *wv -= c * bv;
                }
            }
        }
        let beta = l2(&w);
        dim = j + 1;
        if beta < 1e-12 {
            // The Krylov space is invariant; the Ritz values are exact.
            break;
        }
        h[j + 1][j] = beta;
        for v in &mut w {
            *v /= beta;
        }
        basis.push(w);
    }
    let hm = DMatrix::from_fn(dim, dim, |i, j| h[i][j]);
    let ritz = bounded_eigenvalues(hm)
        .ok_or_else(|| Error::Eigen("Ritz eigenvalue extraction did not converge".into()))?;
    let one = Complex::new(1.0, 0.0);
    let lambda2_modulus = ritz.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let eigenvalue_one_simple = !ritz.iter().any(|l| (l - one).norm() < 1e-8);
    Ok(SpectrumEstimate { lambda2_modulus, eigenvalue_one_simple })
}

fn subtract_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v {
        *x -= mean;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn splitmix(i: u64) -> f64 {
    let mut z = i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

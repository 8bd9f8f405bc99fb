//! Closed-form eigenstructure of circulant weight matrices and the
//! hierarchy of stable invariant subspaces it induces on configuration
//! space.
//!
//! The eigenvectors of any N x N circulant matrix are the discrete Fourier
//! vectors `v_j = (1, w^j, w^{2j}, ...)` with `w = exp(2*pi*i/N)`; the
//! eigenvalue attached to `v_j` is `lambda_j = sum_i w_i * w^{ij}`. Pairing
//! `v_j` with its conjugate `v_{N-j}` yields real invariant subspaces `V_j`
//! of the stacked planar system, one per index `j = 0..=k` where `N = 2k`
//! or `N = 2k + 1`. Solutions started inside `V_j` stay there and contract
//! at rate `Re(lambda_j)`.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::topology::CirculantTopology;

/// Eigenvalues whose imaginary part is below this are treated as real when
/// deciding the 2- vs 4-dimensional subspace branch; `v_k` is exactly real
/// analytically, the threshold only guards float noise.
pub const REAL_EIGENVALUE_TOL: f64 = 1e-12;

/// One closed-form eigenpair of a circulant matrix.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub index: usize,
    pub value: Complex64,
    pub vector: DVector<Complex64>,
}

/// 2x2 real block a conjugate eigenvalue pair acts by on its invariant
/// plane; real eigenvalues degenerate to a scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RealBlock {
    Scalar(f64),
    Rotation(Matrix2<f64>),
}

impl RealBlock {
    pub fn as_matrix(&self) -> Matrix2<f64> {
        match self {
            RealBlock::Scalar(a) => Matrix2::new(*a, 0.0, 0.0, *a),
            RealBlock::Rotation(m) => *m,
        }
    }
}

/// Rotation-scaling block `[[Re l, -Im l], [Im l, Re l]]` of an eigenvalue;
/// collapses to a scalar for (numerically) real eigenvalues.
pub fn real_block(lambda: Complex64) -> RealBlock {
    if lambda.im.abs() < REAL_EIGENVALUE_TOL {
        RealBlock::Scalar(lambda.re)
    } else {
        RealBlock::Rotation(Matrix2::new(lambda.re, -lambda.im, lambda.im, lambda.re))
    }
}

/// Protocol-independent geometry of the invariant subspace with index `j`.
///
/// The basis is assembled from the four spanning configurations built from
/// `v_j` and orthonormalized. Basis order is fixed to
/// `(Re v, Im v), (-Im v, Re v), (Im v, Re v), (Re v, -Im v)` (in stacked
/// layout, duplicates dropped for `j = 0` and `j = N/2`) so that the weight
/// matrix acts on coefficients as two copies of the rotation block: the
/// rotation planes are spanned by basis columns (0,1) and (2,3).
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub index: usize,
    pub dim: usize,
    /// 2N x dim matrix with orthonormal columns, stacked layout.
    pub basis: DMatrix<f64>,
    /// Generating configuration: agent `i` at `(Re (v_j)_i, Im (v_j)_i)`.
    pub generating: Vec<[f64; 2]>,
}

/// Invariant subspace together with the spectral data of the protocol that
/// acts on it.
#[derive(Debug, Clone)]
pub struct Subspace {
    pub index: usize,
    pub dim: usize,
    /// 2N x dim matrix with orthonormal columns, stacked layout.
    pub basis: DMatrix<f64>,
    /// Generating configuration `(Re v_j, Im v_j)` per agent.
    pub generating: Vec<[f64; 2]>,
    /// Convergence rate `Re(lambda_j)`.
    pub rate: f64,
    /// Rotation speed `Im(lambda_j)`.
    pub rotation: f64,
    pub block: RealBlock,
}

/// Full closed-form spectrum of a circulant topology.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub n: usize,
    /// All N eigenpairs, sorted by index `j`.
    pub pairs: Vec<EigenPair>,
    /// Subspaces for the pair representatives `j = 0..=k`.
    pub subspaces: Vec<Subspace>,
    /// Index `s >= 1` whose rate is strictly below every other nonzero
    /// index's rate, when one exists.
    pub strong_stable: Option<usize>,
}

/// `w^{ij}` with the exponent reduced mod N first, so the argument passed
/// to sin/cos never grows with `i * j`.
fn root_of_unity_pow(n: usize, exponent: usize) -> Complex64 {
    let reduced = exponent % n;
    let angle = 2.0 * std::f64::consts::PI * reduced as f64 / n as f64;
    Complex64::new(angle.cos(), angle.sin())
}

/// Discrete Fourier eigenvector `v_j = (1, w^j, w^{2j}, ...)`; independent
/// of the generating weight vector.
pub fn eigenvector(n: usize, j: usize) -> Result<DVector<Complex64>> {
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, n, max: n });
    }
    Ok(DVector::from_fn(n, |i, _| root_of_unity_pow(n, i * j)))
}

/// Number of pair representatives: `k` with `N = 2k` or `N = 2k + 1`.
pub fn pair_count(n: usize) -> usize {
    n / 2
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns whose
/// remainder falls below `drop_tol` (relative to their original norm) are
/// dependent on earlier ones and dropped.
fn orthonormalize(columns: &[DVector<f64>], drop_tol: f64) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for col in columns {
        let original_norm = col.norm();
        if original_norm == 0.0 {
            continue;
        }
        let mut v = col.clone();
        for _ in 0..2 {
            for b in &basis {
                let coeff = b.dot(&v);
                v.axpy(-coeff, b, 1.0);
            }
        }
        if v.norm() > drop_tol * original_norm {
            v /= v.norm();
            basis.push(v);
        }
    }
    basis
}

fn stack(x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    DVector::from_fn(2 * n, |i, _| if i < n { x[i] } else { y[i - n] })
}

/// Assemble the invariant-subspace basis for index `j` (valid range
/// `0..=N/2`). The subspace geometry depends only on `n` and `j`, never on
/// the weights.
pub fn subspace_basis(n: usize, j: usize) -> Result<SubspaceBasis> {
    let k = pair_count(n);
    if j > k {
        return Err(Error::IndexOutOfRange { index: j, n, max: k + 1 });
    }
    let v = eigenvector(n, j)?;
    let re = DVector::from_fn(n, |i, _| v[i].re);
    let im = DVector::from_fn(n, |i, _| v[i].im);

    // Spanning configurations ordered so the coefficient-space action of W
    // splits into rotation planes (0,1) and (2,3).
    let candidates = [
        stack(&re, &im),
        stack(&(-&im), &re),
        stack(&im, &re),
        stack(&re, &(-&im)),
    ];
    let basis_vectors = orthonormalize(&candidates, 1e-10);
    let dim = basis_vectors.len();
    let basis = DMatrix::from_fn(2 * n, dim, |r, c| basis_vectors[c][r]);
    let generating = (0..n).map(|i| [v[i].re, v[i].im]).collect();

    Ok(SubspaceBasis {
        index: j,
        dim,
        basis,
        generating,
    })
}

/// Evaluate the closed-form spectrum `lambda_j = sum_i w_i w^{ij}` and
/// build the subspace hierarchy.
pub fn closed_form_spectrum(top: &CirculantTopology) -> SpectralData {
    let n = top.n();
    let w = top.weights();

    let pairs: Vec<EigenPair> = (0..n)
        .map(|j| {
            let value = (0..n)
                .map(|i| root_of_unity_pow(n, i * j) * w[i])
                .sum::<Complex64>();
            EigenPair {
                index: j,
                value,
                vector: eigenvector(n, j).expect("j < n"),
            }
        })
        .collect();

    let k = pair_count(n);
    let subspaces: Vec<Subspace> = (0..=k)
        .map(|j| {
            let geometry = subspace_basis(n, j).expect("j <= k");
            let lambda = pairs[j].value;
            Subspace {
                index: j,
                dim: geometry.dim,
                basis: geometry.basis,
                generating: geometry.generating,
                rate: lambda.re,
                rotation: lambda.im,
                block: real_block(lambda),
            }
        })
        .collect();

    let strong_stable = find_strong_stable(&subspaces);

    SpectralData {
        n,
        pairs,
        subspaces,
        strong_stable,
    }
}

fn find_strong_stable(subspaces: &[Subspace]) -> Option<usize> {
    let stable = &subspaces[1..];
    let min_rate = stable.iter().map(|s| s.rate).fold(f64::INFINITY, f64::min);
    if !min_rate.is_finite() {
        return None;
    }
    // "strictly smaller" needs a gap beyond float noise; ties (e.g. all
    // rates zero) mean no strong stable subspace exists.
    let mut attaining = stable.iter().filter(|s| s.rate <= min_rate + REAL_EIGENVALUE_TOL);
    match (attaining.next(), attaining.next()) {
        (Some(s), None) => Some(s.index),
        _ => None,
    }
}

impl SpectralData {
    /// Convergence rates `(j, Re(lambda_j))` for the pair representatives.
    pub fn convergence_rates(&self) -> Vec<(usize, f64)> {
        self.subspaces.iter().map(|s| (s.index, s.rate)).collect()
    }

    pub fn pair_count(&self) -> usize {
        pair_count(self.n)
    }
}

/// Free-function form used by callers that only have the data.
pub fn convergence_rates(spec: &SpectralData) -> Vec<(usize, f64)> {
    spec.convergence_rates()
}

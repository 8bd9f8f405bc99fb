//! Dense nonsymmetric eigensolver for general real weight matrices.
//!
//! Eigenvalues are computed the classical way: balance the matrix, reduce
//! it to upper Hessenberg form with Householder reflections, then run the
//! implicitly shifted (Francis double-shift) QR iteration until the
//! Hessenberg matrix deflates. Eigenvectors are obtained from the null
//! space of `W - lambda*I` (column-pivoted QR of the conjugate transpose)
//! and polished by inverse iteration. The result cross-validates the
//! closed-form circulant spectrum and powers the general gathering and
//! defectiveness tests.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::topology::WeightMatrix;

/// Largest matrix the dense solver accepts.
pub const MAX_DIM: usize = 256;

/// `|Im(lambda)| <= REALNESS_TOL * (1 + |lambda|)` is reported as real.
pub const REALNESS_TOL: f64 = 1e-10;

/// Eigenvalues closer than `CLUSTER_RADIUS_FACTOR * ||W||_F` are merged
/// into one cluster for multiplicity counting.
pub const CLUSTER_RADIUS_FACTOR: f64 = 1e-8;

/// Rank decisions in `W - lambda*I` use `RANK_TOL_FACTOR * ||W||_F`.
pub const RANK_TOL_FACTOR: f64 = 1e-10;

/// A distinct eigenvalue with its multiplicities.
#[derive(Debug, Clone, Copy)]
pub struct EigenCluster {
    pub value: Complex64,
    pub algebraic: usize,
    pub geometric: usize,
}

/// Numerically computed spectrum of a general real matrix.
#[derive(Debug, Clone)]
pub struct GeneralSpectrum {
    /// All n eigenvalues with algebraic multiplicity, sorted by
    /// (real, imaginary) part.
    pub eigenvalues: Vec<Complex64>,
    /// Unit eigenvector per entry of `eigenvalues`. Members of a defective
    /// cluster share (cycle through) the cluster's independent vectors.
    pub eigenvectors: Vec<DVector<Complex64>>,
    /// Distinct eigenvalues after clustering.
    pub clusters: Vec<EigenCluster>,
    /// Some geometric multiplicity falls short of the algebraic one.
    pub defective: bool,
    /// Every eigenvalue passed the realness test.
    pub all_real: bool,
    /// Frobenius norm of the input, the scale behind all tolerances.
    pub matrix_norm: f64,
}

impl GeneralSpectrum {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Compute eigenvalues, eigenvectors and multiplicities of a weight matrix.
pub fn eig(matrix: &WeightMatrix) -> Result<GeneralSpectrum> {
    let a = matrix.entries();
    let n = a.nrows();
    if n > MAX_DIM {
        return Err(Error::InvalidConfig(format!(
            "matrix dimension {n} exceeds the dense-solver limit {MAX_DIM}"
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(
            "matrix entries must be finite".into(),
        ));
    }

    let matrix_norm = a.norm();
    let mut work = a.clone();
    balance(&mut work);
    hessenberg(&mut work);
    let mut eigenvalues = francis_qr(&mut work, 30 * n.max(1))?;

    // snap numerically real eigenvalues onto the axis
    let mut all_real = true;
    for lambda in eigenvalues.iter_mut() {
        if lambda.im.abs() <= REALNESS_TOL * (1.0 + lambda.norm()) {
            lambda.im = 0.0;
        } else {
            all_real = false;
        }
    }
    eigenvalues.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());

    let cluster_radius = (CLUSTER_RADIUS_FACTOR * matrix_norm).max(f64::MIN_POSITIVE);
    let assignments = cluster(&eigenvalues, cluster_radius);

    let complex_a = a.map(|x| Complex64::new(x, 0.0));
    let rank_tol = RANK_TOL_FACTOR * matrix_norm;
    let mut clusters = Vec::new();
    let mut eigenvectors: Vec<Option<DVector<Complex64>>> = vec![None; n];
    for members in &assignments {
        let centroid = members.iter().map(|&i| eigenvalues[i]).sum::<Complex64>()
            / members.len() as f64;
        let mut vectors = null_space_vectors(&complex_a, centroid, rank_tol);
        if vectors.is_empty() {
            // rank test saw no null direction (heavily non-normal case):
            // fall back to plain inverse iteration
            vectors.push(inverse_iteration(&complex_a, centroid));
        }
        for v in vectors.iter_mut() {
            refine_eigenvector(&complex_a, centroid, v);
        }
        let geometric = vectors.len();
        for (slot, &i) in members.iter().enumerate() {
            eigenvectors[i] = Some(vectors[slot % geometric].clone());
        }
        clusters.push(EigenCluster {
            value: centroid,
            algebraic: members.len(),
            geometric,
        });
    }

    let defective = clusters.iter().any(|c| c.geometric < c.algebraic);
    Ok(GeneralSpectrum {
        eigenvalues,
        eigenvectors: eigenvectors.into_iter().map(|v| v.unwrap()).collect(),
        clusters,
        defective,
        all_real,
        matrix_norm,
    })
}

/// Hypothesis of the visibility result for general matrices: the whole
/// spectrum is real and algebraic and geometric multiplicities agree.
pub fn is_non_defective_real(matrix: &WeightMatrix) -> Result<bool> {
    let spectrum = eig(matrix)?;
    Ok(spectrum.all_real && !spectrum.defective)
}

/// Similarity scaling by powers of two so row and column norms balance;
/// leaves the spectrum untouched and improves QR accuracy.
fn balance(a: &mut DMatrix<f64>) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let squared = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                let mut c_scaled = c;
                while c_scaled < g {
                    f *= RADIX;
                    c_scaled *= squared;
                }
                g = r * RADIX;
                while c_scaled > g {
                    f /= RADIX;
                    c_scaled /= squared;
                }
                if (c_scaled + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 0..n {
                        a[(i, j)] *= g;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form, in place. The
/// orthogonal factor is discarded; eigenvectors are recovered later from
/// the original matrix.
fn hessenberg(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    if n < 3 {
        return;
    }
    let mut ort = vec![0.0; n];
    for m in 1..n - 1 {
        let scale: f64 = (m..n).map(|i| a[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut h = 0.0;
        for i in (m..n).rev() {
            ort[i] = a[(i, m - 1)] / scale;
            h += ort[i] * ort[i];
        }
        let g = -h.sqrt().copysign(ort[m]);
        h -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..n).rev() {
                f += ort[i] * a[(i, j)];
            }
            f /= h;
            for i in m..n {
                a[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..n {
            let mut f = 0.0;
            for j in (m..n).rev() {
                f += ort[j] * a[(i, j)];
            }
            f /= h;
            for j in m..n {
                a[(i, j)] -= f * ort[j];
            }
        }
        a[(m, m - 1)] = scale * g;
        for i in m + 1..n {
            a[(i, m - 1)] = 0.0;
        }
    }
}

/// Implicitly shifted QR iteration on an upper Hessenberg matrix.
/// Classical Francis double-shift sweep with exceptional shifts every ten
/// stalled iterations; errors out when the global sweep budget is spent.
fn francis_qr(a: &mut DMatrix<f64>, max_sweeps: usize) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let mut eigenvalues = Vec::with_capacity(n);
    let anorm: f64 = (0..n)
        .map(|i| (i.saturating_sub(1)..n).map(|j| a[(i, j)].abs()).sum::<f64>())
        .sum();
    if anorm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }

    let mut sweeps = 0usize;
    let mut shift_total = 0.0;
    let mut nn = n;
    while nn > 0 {
        let mut its = 0usize;
        loop {
            let hi = nn - 1;
            // look for a negligible subdiagonal element
            let mut l = hi;
            while l >= 1 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= f64::EPSILON * s {
                    a[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }

            let mut x = a[(hi, hi)];
            if l == hi {
                eigenvalues.push(Complex64::new(x + shift_total, 0.0));
                nn -= 1;
                break;
            }

            let mut y = a[(hi - 1, hi - 1)];
            let mut w = a[(hi, hi - 1)] * a[(hi - 1, hi)];
            if l + 1 == hi {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += shift_total;
                if q >= 0.0 {
                    let z = p + z.copysign(p);
                    let first = x + z;
                    let second = if z != 0.0 { x - w / z } else { first };
                    eigenvalues.push(Complex64::new(first, 0.0));
                    eigenvalues.push(Complex64::new(second, 0.0));
                } else {
                    eigenvalues.push(Complex64::new(x + p, z));
                    eigenvalues.push(Complex64::new(x + p, -z));
                }
                nn -= 2;
                break;
            }

            sweeps += 1;
            if sweeps > max_sweeps {
                return Err(Error::QrNoConvergence(max_sweeps));
            }
            if its > 0 && its.is_multiple_of(10) {
                // exceptional shift to break symmetric stalls
                shift_total += x;
                for i in 0..nn {
                    a[(i, i)] -= x;
                }
                let s = a[(hi, hi - 1)].abs() + a[(hi - 1, hi - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;

            // find two consecutive small subdiagonals
            let (m, mut p, mut q, mut r) = {
                let mut m = hi - 2;
                loop {
                    let z = a[(m, m)];
                    let rr = x - z;
                    let ss = y - z;
                    let mut p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
                    let mut q = a[(m + 1, m + 1)] - z - rr - ss;
                    let mut r = a[(m + 2, m + 1)];
                    let s = p.abs() + q.abs() + r.abs();
                    if s != 0.0 {
                        p /= s;
                        q /= s;
                        r /= s;
                    }
                    if m == l {
                        break (m, p, q, r);
                    }
                    let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                    let v = p.abs()
                        * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                    if u <= f64::EPSILON * v {
                        break (m, p, q, r);
                    }
                    m -= 1;
                }
            };
            for i in m + 2..=hi {
                a[(i, i - 2)] = 0.0;
                if i != m + 2 {
                    a[(i, i - 3)] = 0.0;
                }
            }

            // double QR sweep: chase the bulge from m to hi
            for k in m..hi {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k + 1 != hi { a[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s == 0.0 {
                    continue;
                }
                if k == m {
                    if l != m {
                        a[(k, k - 1)] = -a[(k, k - 1)];
                    }
                } else {
                    a[(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=hi {
                    let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                    if k + 1 != hi {
                        pp += r * a[(k + 2, j)];
                        a[(k + 2, j)] -= pp * z;
                    }
                    a[(k + 1, j)] -= pp * y;
                    a[(k, j)] -= pp * x;
                }
                let row_end = hi.min(k + 3);
                for i in l..=row_end {
                    let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                    if k + 1 != hi {
                        pp += z * a[(i, k + 2)];
                        a[(i, k + 2)] -= pp * r;
                    }
                    a[(i, k + 1)] -= pp * q;
                    a[(i, k)] -= pp;
                }
            }
        }
    }
    Ok(eigenvalues)
}

/// Greedy single-linkage clustering of the eigenvalue multiset. Returns
/// index groups into the sorted eigenvalue list.
fn cluster(eigenvalues: &[Complex64], radius: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, lambda) in eigenvalues.iter().enumerate() {
        let mut joined = false;
        for group in groups.iter_mut() {
            if group
                .iter()
                .any(|&g| (eigenvalues[g] - lambda).norm() <= radius)
            {
                group.push(i);
                joined = true;
                break;
            }
        }
        if !joined {
            groups.push(vec![i]);
        }
    }
    groups
}

/// Orthonormal basis of the numerical null space of `A - lambda*I`, read
/// off the trailing Q columns of a column-pivoted QR of the conjugate
/// transpose. Its size is the geometric multiplicity of `lambda`.
fn null_space_vectors(
    a: &DMatrix<Complex64>,
    lambda: Complex64,
    rank_tol: f64,
) -> Vec<DVector<Complex64>> {
    let n = a.nrows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    let adjoint = shifted.adjoint();
    let qr = adjoint.col_piv_qr();
    let r = qr.r();
    let rank = (0..n).take_while(|&i| r[(i, i)].norm() > rank_tol).count();
    let q = qr.q();
    (rank..n)
        .map(|c| normalize_phase(q.column(c).into_owned()))
        .collect()
}

/// One inverse-iteration solve from a generic start vector; used only when
/// the rank test fails to expose a null direction.
fn inverse_iteration(a: &DMatrix<Complex64>, lambda: Complex64) -> DVector<Complex64> {
    let n = a.nrows();
    let mut v = DVector::from_fn(n, |i, _| {
        Complex64::new(1.0 + (i as f64) * 0.25, 0.5 - (i as f64) * 0.125)
    });
    v /= Complex64::from(v.norm());
    refine_eigenvector(a, lambda, &mut v);
    v
}

/// Polish an approximate eigenvector by shifted inverse iteration, keeping
/// whichever iterate has the smallest residual.
fn refine_eigenvector(a: &DMatrix<Complex64>, lambda: Complex64, v: &mut DVector<Complex64>) {
    let n = a.nrows();
    let scale = 1.0 + lambda.norm();
    let residual = |u: &DVector<Complex64>| (a * u - u * lambda).norm();
    let mut best = residual(v);
    for &delta in &[0.0, 1e-13 * scale, 1e-10 * scale] {
        let mut shifted = a.clone();
        let shift = lambda + Complex64::new(delta, delta);
        for i in 0..n {
            shifted[(i, i)] -= shift;
        }
        let Some(mut u) = shifted.lu().solve(&*v) else {
            continue;
        };
        let norm = u.norm();
        if !norm.is_finite() || norm == 0.0 {
            continue;
        }
        u /= Complex64::from(norm);
        let res = residual(&u);
        if res < best {
            best = res;
            *v = u;
        }
    }
    *v = normalize_phase(v.clone());
}

/// Fix the free complex phase: largest-modulus entry becomes real positive.
/// Keeps eigenvectors reproducible across runs.
fn normalize_phase(mut v: DVector<Complex64>) -> DVector<Complex64> {
    let norm = v.norm();
    if norm > 0.0 {
        v /= Complex64::from(norm);
    }
    let mut pivot = Complex64::new(1.0, 0.0);
    let mut best = 0.0;
    for z in v.iter() {
        if z.norm() > best {
            best = z.norm();
            pivot = *z;
        }
    }
    if best > 0.0 {
        let phase = pivot / pivot.norm();
        v /= phase;
    }
    v
}

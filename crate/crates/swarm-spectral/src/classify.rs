//! Gathering, equilibrium and convergence predicates for linear protocols,
//! with cross-checks between the spectral and the combinatorial
//! characterizations.
//!
//! A linear protocol gathers iff its weight matrix has a simple eigenvalue
//! 1 with the all-ones eigenvector and every other eigenvalue has real
//! part below 1. For circulant matrices with non-negative weights this is
//! equivalent to "connected interaction graph + consistent weights".

use nalgebra::{DMatrix, Vector2};
use num_complex::Complex64;
use serde::Serialize;

use crate::decompose::Configuration;
use crate::eigen_oracle::{self, GeneralSpectrum};
use crate::error::{Error, Result};
use crate::topology::{CirculantTopology, WeightMatrix, CONSISTENCY_TOL, ZERO_WEIGHT_TOL};

/// Eigenvalues within this distance of 1 belong to the "eigenvalue 1"
/// cluster when testing simplicity.
pub const ONE_CLUSTER_TOL: f64 = 1e-8;

/// Strictness margin for `Re(lambda) < 1`; boundary cases count as
/// not gathering.
pub const STRICT_MARGIN: f64 = 1e-12;

/// Largest tolerated angle (as sine) between the eigenvector of 1 and
/// the all-ones direction.
pub const ONES_ANGLE_TOL: f64 = 1e-8;

/// Outcome of all classification predicates for one weight matrix.
#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub consistent: bool,
    /// Connectivity of the circulant interaction graph; absent for raw
    /// general matrices.
    pub connected: Option<bool>,
    pub nonneg: bool,
    pub gathering_spectral: bool,
    /// Combinatorial gathering test; only defined for non-negative
    /// circulant topologies.
    pub gathering_circulant: Option<bool>,
    pub equilibria_are_v0_only: bool,
    pub all_initial_converge: bool,
    pub doubly_stochastic: bool,
    pub witness: Option<String>,
}

fn one_cluster_indices(spectrum: &GeneralSpectrum) -> Vec<usize> {
    spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, l)| (*l - Complex64::new(1.0, 0.0)).norm() <= ONE_CLUSTER_TOL)
        .map(|(i, _)| i)
        .collect()
}

fn geometric_multiplicity_of_one(spectrum: &GeneralSpectrum) -> Option<usize> {
    spectrum
        .clusters
        .iter()
        .find(|c| (c.value - Complex64::new(1.0, 0.0)).norm() <= ONE_CLUSTER_TOL)
        .map(|c| c.geometric)
}

/// Sine of the angle between an eigenvector and the all-ones direction,
/// computed from the orthogonal residual (stable near zero angle, unlike
/// `sqrt(1 - cos^2)`).
fn sine_to_ones(v: &nalgebra::DVector<Complex64>) -> f64 {
    let n = v.len() as f64;
    let norm = v.norm();
    if norm == 0.0 {
        return 1.0;
    }
    let mean: Complex64 = v.iter().sum::<Complex64>() / n;
    let residual: f64 = v.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>().sqrt();
    residual / norm
}

/// Spectral gathering test for arbitrary real weight matrices: simple
/// eigenvalue 1 with the all-ones eigenvector, every other eigenvalue with
/// real part strictly below 1. Returns the verdict and, when negative, a
/// witness describing the offending eigenvalue.
pub fn is_gathering_general(matrix: &WeightMatrix) -> Result<(bool, Option<String>)> {
    let spectrum = eigen_oracle::eig(matrix)?;
    Ok(gathering_from_spectrum(&spectrum))
}

fn gathering_from_spectrum(spectrum: &GeneralSpectrum) -> (bool, Option<String>) {
    let ones = one_cluster_indices(spectrum);
    match ones.as_slice() {
        [] => (
            false,
            Some("no eigenvalue 1: coincident configurations are not equilibria".into()),
        ),
        [single] => {
            if geometric_multiplicity_of_one(spectrum) != Some(1) {
                return (
                    false,
                    Some("eigenvalue 1 has geometric multiplicity above 1".into()),
                );
            }
            let sine = sine_to_ones(&spectrum.eigenvectors[*single]);
            if sine >= ONES_ANGLE_TOL {
                return (
                    false,
                    Some(format!(
                        "eigenvector of 1 is not the all-ones direction (sin angle = {sine:.3e})"
                    )),
                );
            }
            for (i, lambda) in spectrum.eigenvalues.iter().enumerate() {
                if i != *single && lambda.re >= 1.0 - STRICT_MARGIN {
                    return (
                        false,
                        Some(format!("eigenvalue {lambda} has real part >= 1")),
                    );
                }
            }
            (true, None)
        }
        _ => (
            false,
            Some(format!(
                "eigenvalue 1 is not simple (multiplicity {})",
                ones.len()
            )),
        ),
    }
}

/// Combinatorial gathering test for non-negative circulant topologies:
/// connected interaction graph plus consistent weights. Equivalent to the
/// spectral test on the materialized matrix.
pub fn is_gathering_circulant(top: &CirculantTopology) -> Result<(bool, Option<String>)> {
    if let Some((index, &value)) = top
        .weights()
        .iter()
        .enumerate()
        .find(|(_, &w)| w < -ZERO_WEIGHT_TOL)
    {
        return Err(Error::NegativeWeights {
            op: "is_gathering_circulant",
            index,
            value,
        });
    }
    let connected = top.is_connected();
    let consistent = top.dense_matrix().is_consistent();
    let witness = match (connected, consistent) {
        (false, false) => Some("graph disconnected and weights inconsistent".into()),
        (false, true) => Some(format!(
            "interaction graph disconnected: gcd(N, jumps) = {}",
            top.jumps().iter().fold(top.n(), |g, &s| gcd(g, s))
        )),
        (true, false) => Some(format!(
            "weights sum to {} instead of 1",
            top.weights().iter().sum::<f64>()
        )),
        (true, true) => None,
    };
    Ok((connected && consistent, witness))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Equilibrium structure of a protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EquilibriaClass {
    /// Row sums are 1, so every coincident configuration is an equilibrium.
    pub consistent: bool,
    /// The coincident configurations are the only equilibria.
    pub v0_only: bool,
}

/// Classify the equilibrium set: consistency makes the coincident
/// configurations equilibria; geometric multiplicity 1 of the eigenvalue 1
/// makes them the only ones.
pub fn equilibria_class(matrix: &WeightMatrix) -> Result<EquilibriaClass> {
    let consistent = matrix.is_consistent();
    let spectrum = eigen_oracle::eig(matrix)?;
    let v0_only = consistent && geometric_multiplicity_of_one(&spectrum) == Some(1);
    Ok(EquilibriaClass {
        consistent,
        v0_only,
    })
}

/// Every initial configuration converges to some equilibrium: all
/// eigenvalues have `Re < 1` or equal 1, and the eigenvalue 1 (if present)
/// is non-defective.
pub fn converges_all(matrix: &WeightMatrix) -> Result<bool> {
    let spectrum = eigen_oracle::eig(matrix)?;
    for cluster in &spectrum.clusters {
        if (cluster.value - Complex64::new(1.0, 0.0)).norm() <= ONE_CLUSTER_TOL {
            if cluster.geometric < cluster.algebraic {
                return Ok(false);
            }
        } else if cluster.value.re >= 1.0 - STRICT_MARGIN {
            return Ok(false);
        }
    }
    Ok(true)
}

fn off_diagonal_adjacency(entries: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = entries.nrows();
    let mut influence = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && entries[(i, j)].abs() > ZERO_WEIGHT_TOL {
                // j influences i
                influence[j].push(i);
            }
        }
    }
    influence
}

fn reachable_count(adjacency: &[Vec<usize>], start: usize) -> usize {
    let mut seen = vec![false; adjacency.len()];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &u in &adjacency[v] {
            if !seen[u] {
                seen[u] = true;
                count += 1;
                queue.push_back(u);
            }
        }
    }
    count
}

/// Weak connectivity of the interaction graph induced by the nonzero
/// off-diagonal weights. Necessary for gathering: disconnected groups may
/// settle on different points.
pub fn necessary_connectivity(matrix: &WeightMatrix) -> bool {
    let n = matrix.n();
    let forward = off_diagonal_adjacency(matrix.entries());
    let mut undirected = vec![Vec::new(); n];
    for (j, targets) in forward.iter().enumerate() {
        for &i in targets {
            undirected[i].push(j);
            undirected[j].push(i);
        }
    }
    reachable_count(&undirected, 0) == n
}

/// Perron-Frobenius sufficient condition: non-negative weights, strongly
/// connected interaction graph and consistency imply gathering.
pub fn sufficient_pf(matrix: &WeightMatrix) -> Result<bool> {
    let entries = matrix.entries();
    for i in 0..matrix.n() {
        for j in 0..matrix.n() {
            if entries[(i, j)] < -ZERO_WEIGHT_TOL {
                return Err(Error::NegativeWeights {
                    op: "sufficient_pf",
                    index: i * matrix.n() + j,
                    value: entries[(i, j)],
                });
            }
        }
    }
    let forward = off_diagonal_adjacency(entries);
    let n = matrix.n();
    let mut backward = vec![Vec::new(); n];
    for (j, targets) in forward.iter().enumerate() {
        for &i in targets {
            backward[i].push(j);
        }
    }
    let strongly_connected =
        reachable_count(&forward, 0) == n && reachable_count(&backward, 0) == n;
    Ok(strongly_connected && matrix.is_consistent())
}

/// Non-negative weights summing to one make the circulant matrix doubly
/// stochastic (row and column sums coincide for circulant matrices).
pub fn is_doubly_stochastic(top: &CirculantTopology) -> bool {
    let in_range = top
        .weights()
        .iter()
        .all(|&w| (-ZERO_WEIGHT_TOL..=1.0 + ZERO_WEIGHT_TOL).contains(&w));
    in_range && (top.weights().iter().sum::<f64>() - 1.0).abs() <= CONSISTENCY_TOL
}

fn is_doubly_stochastic_matrix(matrix: &WeightMatrix) -> bool {
    let entries = matrix.entries();
    let n = matrix.n();
    let in_range = entries
        .iter()
        .all(|&w| (-ZERO_WEIGHT_TOL..=1.0 + ZERO_WEIGHT_TOL).contains(&w));
    in_range
        && (0..n).all(|i| (entries.row(i).sum() - 1.0).abs() <= CONSISTENCY_TOL)
        && (0..n).all(|j| (entries.column(j).sum() - 1.0).abs() <= CONSISTENCY_TOL)
}

/// The point a gathering protocol converges to: the average of the initial
/// positions.
pub fn gathering_point(z0: &Configuration) -> Vector2<f64> {
    z0.mean()
}

/// Run every predicate against a circulant topology.
pub fn report_circulant(top: &CirculantTopology) -> Result<ClassificationReport> {
    let matrix = top.dense_matrix();
    let spectrum = eigen_oracle::eig(&matrix)?;
    let (gathering_spectral, witness) = gathering_from_spectrum(&spectrum);
    let nonneg = !top.has_negative_weights();
    let gathering_circulant = if nonneg {
        Some(is_gathering_circulant(top)?.0)
    } else {
        None
    };
    let equilibria = equilibria_class(&matrix)?;
    Ok(ClassificationReport {
        consistent: matrix.is_consistent(),
        connected: Some(top.is_connected()),
        nonneg,
        gathering_spectral,
        gathering_circulant,
        equilibria_are_v0_only: equilibria.v0_only,
        all_initial_converge: converges_all(&matrix)?,
        doubly_stochastic: is_doubly_stochastic(top),
        witness,
    })
}

/// Run the general-matrix predicates against a raw weight matrix.
pub fn report_general(matrix: &WeightMatrix) -> Result<ClassificationReport> {
    let spectrum = eigen_oracle::eig(matrix)?;
    let (gathering_spectral, witness) = gathering_from_spectrum(&spectrum);
    let equilibria = equilibria_class(matrix)?;
    Ok(ClassificationReport {
        consistent: matrix.is_consistent(),
        connected: None,
        nonneg: !matrix.has_negative_entries(),
        gathering_spectral,
        gathering_circulant: None,
        equilibria_are_v0_only: equilibria.v0_only,
        all_initial_converge: converges_all(matrix)?,
        doubly_stochastic: is_doubly_stochastic_matrix(matrix),
        witness,
    })
}

//! Circulant interaction topologies, their weight matrices and the lifted
//! system matrices acting on planar configurations.
//!
//! A topology is generated by a weight vector `w = (w_0, ..., w_{N-1})`:
//! agent `i` listens to agent `i + s mod N` with weight `w_s`. The offsets
//! `s >= 1` with nonzero weight are the jumps of the interaction graph.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries with absolute value below this count as structural zeros when
/// deriving jumps. Weight vectors are user-specified, not computed, so an
/// absolute test is appropriate.
pub const ZERO_WEIGHT_TOL: f64 = 1e-15;

/// Row sums may accumulate float error over long vectors; this bound covers
/// sums of up to ~1024 weights.
pub const CONSISTENCY_TOL: f64 = 1e-12;

/// A circulant interaction topology generated by a weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyFile", into = "TopologyFile")]
pub struct CirculantTopology {
    n: usize,
    weights: Vec<f64>,
    jumps: Vec<usize>,
    name: Option<String>,
}

/// On-disk JSON shape: `{"n": 7, "w": [0.0, 1.0, ...], "name": "..."}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopologyFile {
    n: usize,
    w: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

impl TryFrom<TopologyFile> for CirculantTopology {
    type Error = Error;

    fn try_from(file: TopologyFile) -> Result<Self> {
        if file.n != file.w.len() {
            return Err(Error::InvalidConfig(format!(
                "topology declares n = {} but w has {} entries",
                file.n,
                file.w.len()
            )));
        }
        let mut top = CirculantTopology::from_weights(file.w)?;
        top.name = file.name;
        Ok(top)
    }
}

impl From<CirculantTopology> for TopologyFile {
    fn from(top: CirculantTopology) -> Self {
        TopologyFile {
            n: top.n,
            w: top.weights,
            name: top.name,
        }
    }
}

/// Build a circulant topology from its generating weight vector.
///
/// Fails with "too few agents" for vectors shorter than 2; a single agent
/// gathers trivially and its spectrum degenerates.
pub fn make_circulant(weights: Vec<f64>) -> Result<CirculantTopology> {
    CirculantTopology::from_weights(weights)
}

impl CirculantTopology {
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        if n < 2 {
            return Err(Error::TooFewAgents(n));
        }
        let jumps = (1..n).filter(|&s| weights[s].abs() > ZERO_WEIGHT_TOL).collect();
        Ok(CirculantTopology {
            n,
            weights,
            jumps,
            name: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Offsets `s >= 1` with nonzero weight, strictly increasing.
    pub fn jumps(&self) -> &[usize] {
        &self.jumps
    }

    pub fn self_weight(&self) -> f64 {
        self.weights[0]
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// True iff `w_{N-i} = w_i` for `i = 1, ..., N-1`, which makes the dense
    /// matrix symmetric.
    pub fn is_symmetric(&self) -> bool {
        (1..self.n).all(|i| (self.weights[self.n - i] - self.weights[i]).abs() <= ZERO_WEIGHT_TOL)
    }

    pub fn has_negative_weights(&self) -> bool {
        self.weights.iter().any(|&w| w < -ZERO_WEIGHT_TOL)
    }

    /// Directed edges `(j, i)`: agent `i` listens to `j = i + s mod N` for
    /// each jump `s`. Self-loops (`w_0 != 0`) are reported separately by
    /// [`Self::self_weight`], not here.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.jumps.len() * self.n);
        for &s in &self.jumps {
            for i in 0..self.n {
                edges.push(((i + s) % self.n, i));
            }
        }
        edges
    }

    /// Connectivity via the combinatorial rule: the interaction graph is
    /// connected iff `gcd(N, s_1, ..., s_k) = 1`.
    pub fn is_connected(&self) -> bool {
        self.jumps.iter().fold(self.n, |g, &s| gcd(g, s)) == 1
    }

    /// Connectivity via undirected breadth-first reachability on the edge
    /// set. Kept as an independent route next to [`Self::is_connected`];
    /// the two must always agree.
    pub fn is_connected_bfs(&self) -> bool {
        let mut adjacency = vec![Vec::new(); self.n];
        for (j, i) in self.edges() {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        let mut seen = vec![false; self.n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
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
        count == self.n
    }

    /// Materialize the dense circulant matrix with `W[i][j] = w_{(j-i) mod N}`.
    pub fn dense_matrix(&self) -> WeightMatrix {
        let n = self.n;
        let entries = DMatrix::from_fn(n, n, |i, j| self.weights[(j + n - i) % n]);
        WeightMatrix {
            entries,
            origin: MatrixOrigin::Circulant,
        }
    }
}

/// Materialize the weight matrix of a topology (free-function form of
/// [`CirculantTopology::dense_matrix`]).
pub fn dense_matrix(top: &CirculantTopology) -> WeightMatrix {
    top.dense_matrix()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Whether a weight matrix was materialized from a circulant topology or
/// supplied as a raw dense matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixOrigin {
    Circulant,
    General,
}

/// Dense real weight matrix of a linear protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    entries: DMatrix<f64>,
    origin: MatrixOrigin,
}

impl WeightMatrix {
    /// Wrap a raw square matrix that does not come from a circulant
    /// generating vector.
    pub fn general(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::SizeMismatch {
                left: entries.nrows(),
                right: entries.ncols(),
            });
        }
        if entries.nrows() < 2 {
            return Err(Error::TooFewAgents(entries.nrows()));
        }
        Ok(WeightMatrix {
            entries,
            origin: MatrixOrigin::General,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidConfig(
                "weight matrix rows must all have length n".into(),
            ));
        }
        Self::general(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn origin(&self) -> MatrixOrigin {
        self.origin
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..i).all(|j| (self.entries[(i, j)] - self.entries[(j, i)]).abs() <= ZERO_WEIGHT_TOL))
    }

    /// Row sums all equal 1 within [`CONSISTENCY_TOL`]. Consistency makes
    /// every coincident configuration an equilibrium.
    pub fn is_consistent(&self) -> bool {
        self.entries
            .row_iter()
            .all(|row| (row.sum() - 1.0).abs() <= CONSISTENCY_TOL)
    }

    pub fn has_negative_entries(&self) -> bool {
        self.entries.iter().any(|&w| w < -ZERO_WEIGHT_TOL)
    }

    /// Recover the generating vector (row 0) if the matrix actually has
    /// circulant structure `W[i][j] = w_{(j-i) mod N}`.
    pub fn generating_vector(&self) -> Option<Vec<f64>> {
        let n = self.n();
        let w: Vec<f64> = (0..n).map(|j| self.entries[(0, j)]).collect();
        for i in 0..n {
            for j in 0..n {
                if self.entries[(i, j)] != w[(j + n - i) % n] {
                    return None;
                }
            }
        }
        Some(w)
    }

    /// Kronecker lift of the weight matrix to the 2N-dimensional planar
    /// system: `W ⊗ I_2` for interleaved coordinates `(x_0, y_0, x_1, ...)`,
    /// `I_2 ⊗ W` (block diagonal) for stacked coordinates `(X, Y)`.
    pub fn lift(&self, layout: Layout) -> LiftedMatrix {
        let identity2 = DMatrix::<f64>::identity(2, 2);
        let entries = match layout {
            Layout::Interleaved => self.entries.kronecker(&identity2),
            Layout::Stacked => identity2.kronecker(&self.entries),
        };
        LiftedMatrix { entries, layout }
    }
}

/// Free-function forms matching the operation names used across the crate.
pub fn is_connected(top: &CirculantTopology) -> bool {
    top.is_connected()
}

pub fn is_consistent(matrix: &WeightMatrix) -> bool {
    matrix.is_consistent()
}

pub fn lift(matrix: &WeightMatrix, layout: Layout) -> LiftedMatrix {
    matrix.lift(layout)
}

/// Coordinate layout of a 2N-dimensional configuration vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `Z = (x_0, y_0, x_1, y_1, ...)`.
    Interleaved,
    /// `Z~ = (x_0, ..., x_{N-1}, y_0, ..., y_{N-1})`.
    Stacked,
}

/// `2N x 2N` system matrix acting on planar configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedMatrix {
    entries: DMatrix<f64>,
    layout: Layout,
}

impl LiftedMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }
}

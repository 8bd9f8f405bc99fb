//! Numerical integration of the linear protocol and its normalized
//! nonlinear variant, plus visibility monitoring under a limited viewing
//! range.
//!
//! Integration is classical fixed-step fourth-order Runge-Kutta; the
//! trajectories here are smooth and desk-scale, and a fixed step keeps the
//! output byte-reproducible across runs.

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::decompose::Configuration;
use crate::error::{Error, Result};
use crate::topology::{CirculantTopology, WeightMatrix};

/// Coordinates beyond this magnitude abort integration as a blowup.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// Relative slack on distance comparisons, absorbing integrator noise in
/// what are exact-arithmetic statements.
pub const VISIBILITY_SLACK: f64 = 1e-9;

/// Smallest admissible smoothing parameter; below this the normalizer is
/// numerically too close to the non-differentiable unit-speed law.
pub const MIN_EPSILON: f64 = 1e-6;

/// Base step of the finite-difference Jacobian probe.
pub const JACOBIAN_STEP: f64 = 1e-5;

/// Velocity normalizer applied to each agent's target direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalizer {
    /// Leave the linear velocity untouched.
    Identity,
    /// Smooth approximation of unit-speed motion,
    /// `N(v) = v / (|v| + exp(-|v|^2 / eps))`. Fixes `N(0) = 0` and
    /// `DN(0) = I`, so the protocol is locally the linear one.
    SmoothEps { eps: f64 },
}

impl Normalizer {
    pub fn smooth(eps: f64) -> Result<Self> {
        if !eps.is_finite() || eps < MIN_EPSILON {
            return Err(Error::InvalidEpsilon(eps));
        }
        Ok(Normalizer::SmoothEps { eps })
    }

    pub fn apply(&self, v: Vector2<f64>) -> Vector2<f64> {
        match self {
            Normalizer::Identity => v,
            Normalizer::SmoothEps { eps } => {
                let norm = v.norm();
                v / (norm + (-norm * norm / eps).exp())
            }
        }
    }

    /// Derivative scale at the origin.
    pub fn c(&self) -> f64 {
        1.0
    }

    pub fn describe(&self) -> String {
        match self {
            Normalizer::Identity => "identity".to_string(),
            Normalizer::SmoothEps { eps } => format!("smooth:{eps}"),
        }
    }
}

fn linear_velocity(positions: &[Vector2<f64>], w: &WeightMatrix) -> Vec<Vector2<f64>> {
    let entries = w.entries();
    let n = positions.len();
    (0..n)
        .map(|i| {
            let mut target = Vector2::zeros();
            for j in 0..n {
                target += positions[j] * entries[(i, j)];
            }
            target - positions[i]
        })
        .collect()
}

/// Velocity of the linear protocol: `dz_i/dt = -z_i + sum_j w_ij z_j`.
pub fn linear_rhs(z: &Configuration, w: &WeightMatrix) -> Result<Vec<Vector2<f64>>> {
    if z.n() != w.n() {
        return Err(Error::SizeMismatch {
            left: z.n(),
            right: w.n(),
        });
    }
    Ok(linear_velocity(z.positions(), w))
}

/// Velocity of the normalized protocol: the normalizer is applied to each
/// agent's linear target direction.
pub fn normalized_rhs(
    z: &Configuration,
    w: &WeightMatrix,
    normalizer: &Normalizer,
) -> Result<Vec<Vector2<f64>>> {
    if z.n() != w.n() {
        return Err(Error::SizeMismatch {
            left: z.n(),
            right: w.n(),
        });
    }
    Ok(linear_velocity(z.positions(), w)
        .into_iter()
        .map(|v| normalizer.apply(v))
        .collect())
}

/// Central-difference Jacobian of a planar map at the origin, Richardson
/// extrapolated over steps `h` and `h/2`. The extrapolation removes the
/// O(h) truncation term the radial kink of the smooth normalizer would
/// otherwise leave behind; for linear maps the result is exact.
pub fn jacobian_of(f: impl Fn(Vector2<f64>) -> Vector2<f64>, h: f64) -> Matrix2<f64> {
    let central = |step: f64| {
        let ex = Vector2::new(step, 0.0);
        let ey = Vector2::new(0.0, step);
        let dx = (f(ex) - f(-ex)) / (2.0 * step);
        let dy = (f(ey) - f(-ey)) / (2.0 * step);
        Matrix2::new(dx.x, dy.x, dx.y, dy.y)
    };
    let coarse = central(h);
    let fine = central(h / 2.0);
    fine * 2.0 - coarse
}

/// Finite-difference Jacobian of a normalizer at the origin; for the
/// smooth normalizer this must come out as the identity.
pub fn jacobian_at_zero(normalizer: &Normalizer) -> Matrix2<f64> {
    jacobian_of(|v| normalizer.apply(v), JACOBIAN_STEP)
}

/// Metadata describing how a trajectory was produced.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryMeta {
    pub topology: Option<String>,
    pub integrator: &'static str,
    pub dt: f64,
    pub stride: usize,
    pub normalizer: String,
}

/// Time grid and stored states of one integration run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Configuration>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn final_state(&self) -> &Configuration {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Fixed-step RK4 on the planar agent system. States are recorded at t = 0,
/// every `stride`-th step and the final step.
pub fn integrate<F>(
    mut rhs: F,
    z0: &Configuration,
    dt: f64,
    t_end: f64,
    stride: usize,
) -> Result<Trajectory>
where
    F: FnMut(&[Vector2<f64>]) -> Vec<Vector2<f64>>,
{
    if !dt.is_finite() || dt <= 0.0 || !t_end.is_finite() || t_end <= 0.0 {
        return Err(Error::InvalidIntegration(format!(
            "dt and T must be positive (dt = {dt}, T = {t_end})"
        )));
    }
    let stride = stride.max(1);
    let steps = (t_end / dt).round().max(1.0) as usize;

    let n = z0.n();
    let mut state: Vec<Vector2<f64>> = z0.positions().to_vec();
    let mut times = Vec::with_capacity(steps / stride + 2);
    let mut states = Vec::with_capacity(steps / stride + 2);
    times.push(0.0);
    states.push(z0.clone());

    let mut stage = vec![Vector2::zeros(); n];
    for step in 1..=steps {
        let k1 = rhs(&state);
        for i in 0..n {
            stage[i] = state[i] + k1[i] * (dt / 2.0);
        }
        let k2 = rhs(&stage);
        for i in 0..n {
            stage[i] = state[i] + k2[i] * (dt / 2.0);
        }
        let k3 = rhs(&stage);
        for i in 0..n {
            stage[i] = state[i] + k3[i] * dt;
        }
        let k4 = rhs(&stage);
        for i in 0..n {
            state[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }

        let t = step as f64 * dt;
        if state
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite() || p.x.abs() > BLOWUP_THRESHOLD || p.y.abs() > BLOWUP_THRESHOLD)
        {
            return Err(Error::Blowup {
                t,
                threshold: BLOWUP_THRESHOLD,
            });
        }
        if step.is_multiple_of(stride) || step == steps {
            times.push(t);
            states.push(Configuration::new(state.clone()));
        }
    }

    Ok(Trajectory {
        times,
        states,
        meta: TrajectoryMeta {
            topology: None,
            integrator: "rk4",
            dt,
            stride,
            normalizer: "identity".to_string(),
        },
    })
}

/// Integrate the linear protocol for a weight matrix.
pub fn integrate_linear(
    w: &WeightMatrix,
    z0: &Configuration,
    dt: f64,
    t_end: f64,
    stride: usize,
) -> Result<Trajectory> {
    if z0.n() != w.n() {
        return Err(Error::SizeMismatch {
            left: z0.n(),
            right: w.n(),
        });
    }
    integrate(|state| linear_velocity(state, w), z0, dt, t_end, stride)
}

/// Integrate the normalized protocol for a weight matrix.
pub fn integrate_normalized(
    w: &WeightMatrix,
    normalizer: &Normalizer,
    z0: &Configuration,
    dt: f64,
    t_end: f64,
    stride: usize,
) -> Result<Trajectory> {
    if z0.n() != w.n() {
        return Err(Error::SizeMismatch {
            left: z0.n(),
            right: w.n(),
        });
    }
    let mut traj = integrate(
        |state| {
            linear_velocity(state, w)
                .into_iter()
                .map(|v| normalizer.apply(v))
                .collect()
        },
        z0,
        dt,
        t_end,
        stride,
    )?;
    traj.meta.normalizer = normalizer.describe();
    Ok(traj)
}

/// Distances of communicating agents along a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct VisibilityReport {
    pub radius: f64,
    /// Undirected communication pairs `(i, j)` with `i < j`; self-loops are
    /// omitted, their distance is identically zero.
    pub edges: Vec<(usize, usize)>,
    /// Maximum distance over the trajectory, per edge.
    pub per_edge_max: Vec<f64>,
    /// First time and edge at which a distance exceeded the radius.
    pub first_violation: Option<(f64, (usize, usize))>,
    /// Largest edge distance at each stored time step.
    pub max_edge_distance_series: Vec<f64>,
}

impl VisibilityReport {
    /// True when no stored step increased the running maximum by more than
    /// the visibility slack.
    pub fn max_series_non_increasing(&self) -> bool {
        self.max_edge_distance_series
            .windows(2)
            .all(|w| w[1] <= w[0] + VISIBILITY_SLACK)
    }
}

/// Undirected communication pairs of a circulant topology.
pub fn communication_pairs(top: &CirculantTopology) -> Vec<(usize, usize)> {
    let mut pairs = std::collections::BTreeSet::new();
    for (j, i) in top.edges() {
        if i != j {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    pairs.into_iter().collect()
}

/// Track all edge distances along a trajectory. Errors when the initial
/// configuration already violates the radius.
pub fn visibility_monitor(
    traj: &Trajectory,
    top: &CirculantTopology,
    radius: f64,
) -> Result<VisibilityReport> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "viewing radius must be positive, got {radius}"
        )));
    }
    let first = traj.states.first().ok_or_else(|| {
        Error::InvalidConfig("trajectory holds no states".into())
    })?;
    if first.n() != top.n() {
        return Err(Error::SizeMismatch {
            left: first.n(),
            right: top.n(),
        });
    }

    let edges = communication_pairs(top);
    let limit = radius * (1.0 + VISIBILITY_SLACK);

    let initial_violations: Vec<(usize, usize, f64)> = edges
        .iter()
        .filter_map(|&(i, j)| {
            let d = (first.position(i) - first.position(j)).norm();
            (d > limit).then_some((i, j, d))
        })
        .collect();
    if let Some(&(i, j, distance)) = initial_violations.first() {
        return Err(Error::InvalidInitialConfiguration {
            radius,
            count: initial_violations.len(),
            i,
            j,
            distance,
        });
    }

    let mut per_edge_max = vec![0.0f64; edges.len()];
    let mut first_violation = None;
    let mut max_series = Vec::with_capacity(traj.states.len());
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let mut step_max = 0.0f64;
        for (e, &(i, j)) in edges.iter().enumerate() {
            let d = (state.position(i) - state.position(j)).norm();
            per_edge_max[e] = per_edge_max[e].max(d);
            step_max = step_max.max(d);
            if first_violation.is_none() && d > limit {
                first_violation = Some((*t, (i, j)));
            }
        }
        max_series.push(step_max);
    }

    Ok(VisibilityReport {
        radius,
        edges,
        per_edge_max,
        first_violation,
        max_edge_distance_series: max_series,
    })
}

//! Planar configurations and their closed-form decomposition into the
//! gathering point plus one component per stable invariant subspace.
//!
//! For a circulant protocol the solution through `Z(0)` is, in stacked
//! coordinates, `Z~(t) = Z~* + sum_j alpha_j(t) Xi_j(t)` where
//! `alpha_j(t) = exp((-1 + Re(lambda_j)) t)` decays, `Xi_j(t) = V_j beta_j(t)`
//! stays inside subspace `j`, and the coefficient vector `beta_j(t)` only
//! rotates: its norm is constant in time.

use nalgebra::{DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralData;

/// Positions of N agents in the plane, convertible between the interleaved
/// vector `Z = (x_0, y_0, x_1, y_1, ...)` and the stacked vector
/// `Z~ = (x_0, ..., x_{N-1}, y_0, ..., y_{N-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ConfigurationFile", into = "ConfigurationFile")]
pub struct Configuration {
    positions: Vec<Vector2<f64>>,
}

/// On-disk JSON shape: `{"positions": [[x, y], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConfigurationFile {
    positions: Vec<[f64; 2]>,
}

impl From<ConfigurationFile> for Configuration {
    fn from(file: ConfigurationFile) -> Self {
        Configuration {
            positions: file
                .positions
                .iter()
                .map(|p| Vector2::new(p[0], p[1]))
                .collect(),
        }
    }
}

impl From<Configuration> for ConfigurationFile {
    fn from(cfg: Configuration) -> Self {
        ConfigurationFile {
            positions: cfg.positions.iter().map(|p| [p.x, p.y]).collect(),
        }
    }
}

impl Configuration {
    pub fn new(positions: Vec<Vector2<f64>>) -> Self {
        Configuration { positions }
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Self {
        Configuration {
            positions: pairs.iter().map(|p| Vector2::new(p[0], p[1])).collect(),
        }
    }

    /// Uniform cloud on `[-1, 1]^2`, drawn from a ChaCha8 stream seeded
    /// with `seed`: x then y per agent, in agent order. Fixed seed, fixed
    /// bytes.
    pub fn random(n: usize, seed: u64) -> Self {
        Self::random_scaled(n, seed, 1.0)
    }

    /// Uniform cloud on `[-scale, scale]^2` from the same named generator.
    pub fn random_scaled(n: usize, seed: u64, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions = (0..n)
            .map(|_| {
                let x = rng.gen_range(-scale..=scale);
                let y = rng.gen_range(-scale..=scale);
                Vector2::new(x, y)
            })
            .collect();
        Configuration { positions }
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Vector2<f64>] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> Vector2<f64> {
        self.positions[i]
    }

    pub fn interleaved(&self) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(2 * n, |i, _| {
            let agent = i / 2;
            if i % 2 == 0 {
                self.positions[agent].x
            } else {
                self.positions[agent].y
            }
        })
    }

    pub fn stacked(&self) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(2 * n, |i, _| {
            if i < n {
                self.positions[i].x
            } else {
                self.positions[i - n].y
            }
        })
    }

    pub fn from_interleaved(z: &DVector<f64>) -> Result<Self> {
        if !z.len().is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "interleaved vector length {} is odd",
                z.len()
            )));
        }
        let n = z.len() / 2;
        Ok(Configuration {
            positions: (0..n).map(|i| Vector2::new(z[2 * i], z[2 * i + 1])).collect(),
        })
    }

    pub fn from_stacked(z: &DVector<f64>) -> Result<Self> {
        if !z.len().is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "stacked vector length {} is odd",
                z.len()
            )));
        }
        let n = z.len() / 2;
        Ok(Configuration {
            positions: (0..n).map(|i| Vector2::new(z[i], z[n + i])).collect(),
        })
    }

    /// Coordinate-wise mean of the positions; for a gathering protocol this
    /// is the point every agent converges to.
    pub fn mean(&self) -> Vector2<f64> {
        let sum: Vector2<f64> = self.positions.iter().sum();
        sum / self.n() as f64
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 0..self.n() {
            for j in 0..i {
                max = max.max((self.positions[i] - self.positions[j]).norm());
            }
        }
        max
    }

    /// The planar arrangement `(Re (v_j)_i, Im (v_j)_i)` that generates
    /// subspace `j` of the given spectrum.
    pub fn generating(spec: &SpectralData, j: usize) -> Result<Self> {
        let subspace = spec
            .subspaces
            .get(j)
            .ok_or(Error::IndexOutOfRange {
                index: j,
                n: spec.n,
                max: spec.subspaces.len(),
            })?;
        Ok(Self::from_pairs(&subspace.generating))
    }
}

/// Initial data of one invariant-subspace component.
#[derive(Debug, Clone)]
pub struct ModeComponent {
    pub index: usize,
    /// Coefficients of `Z~(0) - Z~*` in the orthonormal basis of `V_j`.
    pub beta0: DVector<f64>,
    /// `Xi_j(0) = V_j beta_j(0)` as a stacked 2N-vector.
    pub xi0: DVector<f64>,
    /// Convergence rate `Re(lambda_j)`.
    pub rate: f64,
    /// Decay exponent `-1 + Re(lambda_j)` of `alpha_j`.
    pub decay_exponent: f64,
    /// Rotation speed `Im(lambda_j)` inside the coefficient planes.
    pub rotation: f64,
}

/// Time-t state of one component produced by [`Decomposition::evolve`].
#[derive(Debug, Clone)]
pub struct ModeState {
    pub index: usize,
    pub alpha: f64,
    pub beta: DVector<f64>,
    pub xi: DVector<f64>,
}

/// Closed-form decomposition of an initial configuration.
#[derive(Debug, Clone)]
pub struct Decomposition {
    zstar: Vector2<f64>,
    spectral: SpectralData,
    components: Vec<ModeComponent>,
}

/// Project an initial configuration onto the gathering point and the
/// invariant subspaces of the given circulant spectrum.
pub fn decompose(z0: &Configuration, spec: &SpectralData) -> Result<Decomposition> {
    if z0.n() != spec.n {
        return Err(Error::SizeMismatch {
            left: z0.n(),
            right: spec.n,
        });
    }
    let n = spec.n;
    let zstar = z0.mean();
    let stacked = z0.stacked();
    let mut residual = stacked.clone();
    for i in 0..n {
        residual[i] -= zstar.x;
        residual[n + i] -= zstar.y;
    }

    let components = spec
        .subspaces
        .iter()
        .skip(1)
        .map(|s| {
            let beta0 = s.basis.transpose() * &residual;
            let xi0 = &s.basis * &beta0;
            ModeComponent {
                index: s.index,
                beta0,
                xi0,
                rate: s.rate,
                decay_exponent: -1.0 + s.rate,
                rotation: s.rotation,
            }
        })
        .collect();

    Ok(Decomposition {
        zstar,
        spectral: spec.clone(),
        components,
    })
}

/// Apply the in-plane rotation that carries `beta(0)` to `beta(t)`. The
/// coefficient planes are the basis pairs (0,1) and (2,3); the norm of the
/// whole vector is untouched.
fn rotate_beta(beta0: &DVector<f64>, angle: f64) -> DVector<f64> {
    let mut beta = beta0.clone();
    let (sin, cos) = angle.sin_cos();
    let mut plane = 0;
    while plane + 1 < beta.len() {
        let a = beta0[plane];
        let b = beta0[plane + 1];
        beta[plane] = cos * a - sin * b;
        beta[plane + 1] = sin * a + cos * b;
        plane += 2;
    }
    beta
}

impl Decomposition {
    pub fn zstar(&self) -> Vector2<f64> {
        self.zstar
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn components(&self) -> &[ModeComponent] {
        &self.components
    }

    /// Stacked vector of the gathering configuration
    /// `(x*, ..., x*, y*, ..., y*)`.
    pub fn zstar_stacked(&self) -> DVector<f64> {
        let n = self.spectral.n;
        DVector::from_fn(2 * n, |i, _| if i < n { self.zstar.x } else { self.zstar.y })
    }

    /// Closed-form coefficients at time `t >= 0`: the decayed `alpha_j`,
    /// the rotated `beta_j` (constant norm) and the component `Xi_j`.
    pub fn evolve(&self, t: f64) -> Vec<ModeState> {
        self.components
            .iter()
            .map(|c| {
                let alpha = (c.decay_exponent * t).exp();
                let beta = if c.beta0.len() == 4 {
                    rotate_beta(&c.beta0, c.rotation * t)
                } else {
                    c.beta0.clone()
                };
                let subspace = &self.spectral.subspaces[c.index];
                let xi = &subspace.basis * &beta;
                ModeState {
                    index: c.index,
                    alpha,
                    beta,
                    xi,
                }
            })
            .collect()
    }

    /// Exact solution of the linear protocol at time `t`.
    pub fn reconstruct(&self, t: f64) -> Configuration {
        let mut stacked = self.zstar_stacked();
        for state in self.evolve(t) {
            stacked.axpy(state.alpha, &state.xi, 1.0);
        }
        Configuration::from_stacked(&stacked).expect("even length by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::closed_form_spectrum;
    use crate::topology::make_circulant;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn nbug(n: usize) -> SpectralData {
        let mut w = vec![0.0; n];
        w[1] = 1.0;
        closed_form_spectrum(&make_circulant(w).unwrap())
    }

    fn gtm(n: usize) -> SpectralData {
        let mut w = vec![0.0; n];
        w[1] = 0.5;
        w[n - 1] = 0.5;
        closed_form_spectrum(&make_circulant(w).unwrap())
    }

    #[test]
    fn layout_round_trips_are_bit_exact() {
        let cfg = Configuration::random(9, 42);
        let inter = cfg.interleaved();
        let stacked = cfg.stacked();
        assert_eq!(Configuration::from_interleaved(&inter).unwrap(), cfg);
        assert_eq!(Configuration::from_stacked(&stacked).unwrap(), cfg);
    }

    #[test]
    fn mean_examples() {
        let same = Configuration::from_pairs(&[[1.0, 2.0]; 5]);
        assert_eq!(same.mean(), Vector2::new(1.0, 2.0));
        let two = Configuration::from_pairs(&[[0.0, 0.0], [2.0, 4.0]]);
        assert_eq!(two.mean(), Vector2::new(1.0, 2.0));
    }

    #[test]
    fn coincident_cloud_has_zero_components() {
        let spec = nbug(6);
        let cfg = Configuration::from_pairs(&[[3.0, -1.0]; 6]);
        let dec = decompose(&cfg, &spec).unwrap();
        assert_eq!(dec.zstar(), Vector2::new(3.0, -1.0));
        for c in dec.components() {
            assert!(c.beta0.norm() < 1e-12);
        }
    }

    #[test]
    fn generating_configuration_excites_a_single_mode() {
        let spec = nbug(7);
        for j in 1..=3usize {
            let cfg = Configuration::generating(&spec, j).unwrap();
            let dec = decompose(&cfg, &spec).unwrap();
            // roots of unity sum to zero for j != 0
            assert!(dec.zstar().norm() < 1e-14);
            for c in dec.components() {
                if c.index == j {
                    assert!(c.beta0.norm() > 0.5);
                } else {
                    assert!(
                        c.beta0.norm() < 1e-12,
                        "mode {} leaked into mode {}",
                        j,
                        c.index
                    );
                }
            }
        }
    }

    #[test]
    fn reconstruction_is_complete_at_time_zero() {
        let spec = nbug(7);
        let cfg = Configuration::random(7, 2024);
        let dec = decompose(&cfg, &spec).unwrap();
        // completeness of the direct sum
        let rebuilt = dec.reconstruct(0.0);
        let err = (rebuilt.stacked() - cfg.stacked()).norm();
        assert!(err < 1e-10, "reconstruction error {err}");

        // identical statement on the raw components
        let mut sum = dec.zstar_stacked();
        for c in dec.components() {
            sum += &c.xi0;
        }
        assert!((sum - cfg.stacked()).norm() < 1e-10);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let spec = nbug(7);
        let cfg = Configuration::random(6, 1);
        assert!(matches!(
            decompose(&cfg, &spec),
            Err(Error::SizeMismatch { left: 6, right: 7 })
        ));
    }

    #[test]
    fn symmetric_topology_has_frozen_beta() {
        let spec = gtm(6);
        let cfg = Configuration::random(6, 7);
        let dec = decompose(&cfg, &spec).unwrap();
        for t in [0.0, 0.5, 2.5, 10.0] {
            for state in dec.evolve(t) {
                let c = &dec.components()[state.index - 1];
                assert!((state.beta.clone() - &c.beta0).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn alpha_follows_the_rate_formula() {
        let spec = nbug(7);
        let cfg = Configuration::random(7, 3);
        let dec = decompose(&cfg, &spec).unwrap();
        let expected_exponent = -1.0 + (2.0 * PI / 7.0).cos();
        for t in [0.1, 1.0, 4.0] {
            let states = dec.evolve(t);
            assert_abs_diff_eq!(
                states[0].alpha,
                (expected_exponent * t).exp(),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn beta_norm_is_conserved() {
        let spec = nbug(7);
        let cfg = Configuration::random(7, 99);
        let dec = decompose(&cfg, &spec).unwrap();
        for t in [0.0, 0.3, 1.7, 5.0, 10.0] {
            for state in dec.evolve(t) {
                let c = &dec.components()[state.index - 1];
                assert!(
                    (state.beta.norm() - c.beta0.norm()).abs() < 1e-12,
                    "norm drift at t={t} for mode {}",
                    state.index
                );
            }
        }
    }

    #[test]
    fn gtm4_middle_mode_follows_the_scalar_ode() {
        // v_2 of N=4 is real, lambda_2 = -1: the solution is e^{-2t} Z0
        let spec = gtm(4);
        assert_abs_diff_eq!(spec.subspaces[2].rate, -1.0, epsilon = 1e-14);
        let cfg = Configuration::generating(&spec, 2).unwrap();
        let dec = decompose(&cfg, &spec).unwrap();
        assert!(dec.zstar().norm() < 1e-14);
        for t in [0.0, 0.25, 1.0, 3.0] {
            let exact = dec.reconstruct(t).stacked();
            let scalar_oracle = cfg.stacked() * (-2.0 * t).exp();
            assert!(
                (exact - scalar_oracle).norm() < 1e-12,
                "scalar ODE mismatch at t={t}"
            );
        }
    }

    #[test]
    fn far_future_lands_on_the_gathering_point() {
        let spec = nbug(7);
        let cfg = Configuration::random(7, 12345);
        let dec = decompose(&cfg, &spec).unwrap();
        let far = dec.reconstruct(40.0);
        let zstar = dec.zstar();
        for p in far.positions() {
            assert!((p - zstar).norm() < 1e-6);
        }
    }

    #[test]
    fn subspace_invariance_of_reconstruction() {
        // a solution started inside V_j stays inside V_j
        let spec = nbug(7);
        for j in 1..=3usize {
            let cfg = Configuration::generating(&spec, j).unwrap();
            let dec = decompose(&cfg, &spec).unwrap();
            let basis = &spec.subspaces[j].basis;
            for t in [0.5, 2.0, 7.0] {
                let state = dec.reconstruct(t).stacked();
                let projected = basis * (basis.transpose() * &state);
                assert!(
                    (state - projected).norm() < 1e-9,
                    "solution left subspace {j} at t={t}"
                );
            }
        }
    }

    #[test]
    fn fitted_decay_slopes_match_rates_and_decrease() {
        // log ||Z(t) - Z*|| is affine in t with slope -1 + Re(lambda_j)
        let spec = nbug(7);
        let mut slopes = Vec::new();
        for j in 1..=3usize {
            let cfg = Configuration::generating(&spec, j).unwrap();
            let dec = decompose(&cfg, &spec).unwrap();
            let samples: Vec<(f64, f64)> = (0..=50)
                .map(|i| {
                    let t = 0.1 * i as f64;
                    let deviation = (dec.reconstruct(t).stacked() - dec.zstar_stacked()).norm();
                    (t, deviation.ln())
                })
                .collect();
            let slope = least_squares_slope(&samples);
            let expected = -1.0 + (2.0 * PI * j as f64 / 7.0).cos();
            assert!(
                (slope - expected).abs() < 1e-9,
                "slope {slope} vs {expected} for j={j}"
            );
            slopes.push(slope);
        }
        assert!(slopes[0] > slopes[1] && slopes[1] > slopes[2]);
    }

    fn least_squares_slope(samples: &[(f64, f64)]) -> f64 {
        let n = samples.len() as f64;
        let sx: f64 = samples.iter().map(|s| s.0).sum();
        let sy: f64 = samples.iter().map(|s| s.1).sum();
        let sxx: f64 = samples.iter().map(|s| s.0 * s.0).sum();
        let sxy: f64 = samples.iter().map(|s| s.0 * s.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    proptest! {
        #[test]
        fn prop_layout_round_trip(pairs in proptest::collection::vec([-100.0f64..100.0, -100.0f64..100.0], 1..20)) {
            let pts: Vec<[f64;2]> = pairs.iter().map(|p| [p[0], p[1]]).collect();
            let cfg = Configuration::from_pairs(&pts);
            prop_assert_eq!(Configuration::from_interleaved(&cfg.interleaved()).unwrap(), cfg.clone());
            prop_assert_eq!(Configuration::from_stacked(&cfg.stacked()).unwrap(), cfg);
        }

        #[test]
        fn prop_beta_norm_conservation(seed in 0u64..5000, t in 0.0f64..20.0) {
            let spec = nbug(6);
            let cfg = Configuration::random(6, seed);
            let dec = decompose(&cfg, &spec).unwrap();
            for state in dec.evolve(t) {
                let c = &dec.components()[state.index - 1];
                prop_assert!((state.beta.norm() - c.beta0.norm()).abs() < 1e-12);
            }
        }
    }
}

//! Modeling, spectral analysis and simulation of gathering protocols for
//! mobile agents in the plane with fixed circulant interaction topologies.
//!
//! The crate classifies linear protocols as gathering, computes the exact
//! hierarchy of stable invariant subspaces of circulant weight matrices
//! together with their convergence rates, decomposes and evolves
//! configurations in closed form, integrates the linear and normalized
//! nonlinear dynamics numerically, and monitors visibility under a limited
//! viewing range. A dense nonsymmetric eigensolver cross-validates every
//! closed form.

pub mod classify;
pub mod cli;
pub mod decompose;
pub mod dynamics;
pub mod eigen_oracle;
pub mod error;
pub mod spectral;
pub mod topology;

pub use classify::ClassificationReport;
pub use decompose::{decompose, Configuration, Decomposition};
pub use dynamics::{integrate_linear, integrate_normalized, Normalizer, Trajectory, VisibilityReport};
pub use eigen_oracle::GeneralSpectrum;
pub use error::{Error, Result};
pub use spectral::{closed_form_spectrum, SpectralData};
pub use topology::{make_circulant, CirculantTopology, WeightMatrix};

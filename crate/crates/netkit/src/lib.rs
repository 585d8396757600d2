//! Key-rate analysis for continuous-variable measurement-device-independent
//! star networks.
//!
//! An untrusted relay performs a multipartite Bell detection (a cascade of
//! beam splitters followed by homodyne detectors) on Gaussian-modulated
//! coherent states arriving from `N` users over thermal-loss links. The
//! broadcast outcome projects the users' retained modes onto a correlated
//! multimode Gaussian state from which a conference key or a secret-sharing
//! key can be distilled.
//!
//! The crate is organized in four layers:
//!
//! * [`gaussian`] — covariance matrices, symplectic transformations,
//!   homodyne/heterodyne conditioning, symplectic spectra and entropies;
//! * [`network`] — the conditional post-detection states (closed forms and
//!   two independent brute-force conditioning oracles);
//! * [`rates`] — mutual informations, Holevo bounds, asymptotic and
//!   finite-size key rates, modulation optimization, maximum distances;
//! * [`montecarlo`] — an outcome-level Gaussian sampler that verifies the
//!   analytic conditional covariances and mutual informations empirically.
//!
//! Parameter sweeps and Monte Carlo shots run data-parallel through [`exec`]
//! when the `parallel` feature (default) is enabled; disabling it yields a
//! fully sequential build with identical numerical results.

pub mod error;
pub mod exec;
pub mod gaussian;
pub mod montecarlo;
pub mod network;
pub mod rates;

pub use error::{Error, Result};
pub use gaussian::{
    cascade_interferometer, entropy_h, link_params, make_tmsv, CovMatrix, InterferometerSpec,
    LinkParams, Quadrature, SymplecticMatrix,
};
pub use network::{NetworkConfig, OraclePath, SplitConfig, SqueezedParams};
pub use rates::{
    conferencing_holevo, conferencing_mi, conferencing_rate, eta_from_distance, finite_size_rate,
    max_distance, optimize_mu, plob_bound, secret_sharing_rate, squeezed_conferencing_rate,
    squeezed_ss_rate, throughput, worst_case_link, DistanceMap, FiniteSizeParams, Protocol,
    RateReport, Scenario,
};

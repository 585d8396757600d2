//! Conditional multimode states of the MDI star network after the
//! multipartite Bell detection.
//!
//! The closed forms live here together with two independent brute-force
//! conditioning oracles. The `dual` oracle homodynes the travelling modes
//! first and then rotates the retained modes through the conjugate
//! interferometer; the `direct` oracle rotates the travelling modes through
//! the interferometer and homodynes its outputs sequentially. Both must agree
//! with the closed form entrywise.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gaussian::{cascade_interferometer, CovMatrix, LinkParams, Quadrature, SymplecticMatrix};

/// A symmetric star network: `N >= 2` users behind identical links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub n_users: usize,
    pub link: LinkParams,
}

impl NetworkConfig {
    pub fn new(n_users: usize, link: LinkParams) -> Result<Self> {
        if n_users < 2 {
            return Err(Error::Domain(format!(
                "network needs at least 2 users, got {n_users}"
            )));
        }
        Ok(NetworkConfig { n_users, link })
    }
}

/// A bipartition of the users into cooperating ensembles of `n_a` and `n_b`
/// members, `n_a + n_b <= N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub n_a: usize,
    pub n_b: usize,
    pub parent: NetworkConfig,
}

impl SplitConfig {
    pub fn new(n_a: usize, n_b: usize, parent: NetworkConfig) -> Result<Self> {
        if n_a == 0 || n_b == 0 {
            return Err(Error::Split(format!(
                "both ensembles need members, got ({n_a}, {n_b})"
            )));
        }
        if n_a + n_b > parent.n_users {
            return Err(Error::Split(format!(
                "ensembles of {n_a} + {n_b} exceed {} users",
                parent.n_users
            )));
        }
        Ok(SplitConfig { n_a, n_b, parent })
    }

    /// Whether every user belongs to one of the two ensembles.
    pub fn is_full_house(&self) -> bool {
        self.n_a + self.n_b == self.parent.n_users
    }
}

/// Which brute-force conditioning route the oracle takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OraclePath {
    /// Homodyne the travelling modes first (mode 1 in p, the rest in q),
    /// then rotate the retained modes by the conjugate interferometer.
    Dual,
    /// Rotate the travelling modes by the interferometer, then homodyne
    /// output 1 in p and outputs 2..N in q, dropping each measured mode.
    Direct,
}

/// Per-mode blocks of the conditional network state: `Delta = diag(delta_q,
/// delta_p)` on the diagonal and `Gamma = gamma Z` between every pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBlocks {
    pub delta_q: f64,
    pub delta_p: f64,
    pub gamma: f64,
}

/// Closed-form blocks: `gamma = z^2/(N x)`, `delta_q = y - (N-1) z^2/(N x)`,
/// `delta_p = y - z^2/(N x)`.
///
/// The deltas are evaluated through the conditional variance
/// `w = y - z^2/x` as `delta_q = (y + (N-1) w)/N`, `delta_p = ((N-1) y +
/// w)/N`, which stays accurate where the direct subtraction cancels.
pub fn pair_blocks(cfg: &NetworkConfig) -> PairBlocks {
    let l = &cfg.link;
    let n = cfg.n_users as f64;
    let w = l.conditional_y();
    PairBlocks {
        delta_q: (l.y + (n - 1.0) * w) / n,
        delta_p: ((n - 1.0) * l.y + w) / n,
        gamma: l.z * l.z / (n * l.x),
    }
}

/// Conditional `N`-mode state of the retained modes after the Bell detection
/// with broadcast outcome, in closed form.
pub fn network_conditional_cm(cfg: &NetworkConfig) -> Result<CovMatrix> {
    let b = pair_blocks(cfg);
    let n = cfg.n_users;
    let mut mat = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                mat[(i, j)] = b.delta_q;
                mat[(n + i, n + j)] = b.delta_p;
            } else {
                mat[(i, j)] = b.gamma;
                mat[(n + i, n + j)] = -b.gamma;
            }
        }
    }
    CovMatrix::new(mat)
}

/// Full pre-detection state of the `2N` modes (travelling modes first, then
/// retained modes), each pair dressed by its channel.
fn full_input_cm(cfg: &NetworkConfig) -> Result<CovMatrix> {
    let l = &cfg.link;
    let n = cfg.n_users;
    let m = 2 * n;
    let mut mat = DMatrix::zeros(2 * m, 2 * m);
    for k in 0..n {
        let (a, b) = (k, n + k);
        mat[(a, a)] = l.x;
        mat[(b, b)] = l.y;
        mat[(a, b)] = l.z;
        mat[(b, a)] = l.z;
        mat[(m + a, m + a)] = l.x;
        mat[(m + b, m + b)] = l.y;
        mat[(m + a, m + b)] = -l.z;
        mat[(m + b, m + a)] = -l.z;
    }
    CovMatrix::new(mat)
}

/// Brute-force conditional state via the chosen route. Agrees with
/// [`network_conditional_cm`] entrywise for every physical configuration.
pub fn network_conditional_cm_oracle(cfg: &NetworkConfig, path: OraclePath) -> Result<CovMatrix> {
    let n = cfg.n_users;
    let spec = cascade_interferometer(n)?;
    match path {
        OraclePath::Dual => {
            // condition each pair locally: homodyning the travelling mode in q
            // leaves diag(y - z^2/x, y) on the partner, in p the transpose
            let l = &cfg.link;
            let w = l.conditional_y();
            let mut mat = DMatrix::zeros(2 * n, 2 * n);
            mat[(0, 0)] = l.y;
            mat[(n, n)] = w;
            for k in 1..n {
                mat[(k, k)] = w;
                mat[(n + k, n + k)] = l.y;
            }
            let vin = CovMatrix::new(mat)?;
            vin.apply_symplectic(&spec.conjugate_symplectic())
        }
        OraclePath::Direct => {
            let full = full_input_cm(cfg)?;
            let s = SymplecticMatrix::embed_orthogonal(spec.r_matrix(), 2 * n, 0)?;
            let mut v = full.apply_symplectic(&s)?;
            v = v.homodyne(0, Quadrature::P)?;
            for _ in 1..n {
                v = v.homodyne(0, Quadrature::Q)?;
            }
            Ok(v)
        }
    }
}

/// Conditional state of any pair of users, `(Delta, Gamma; Gamma, Delta)`.
pub fn pair_conditional_cm(cfg: &NetworkConfig) -> Result<CovMatrix> {
    let b = pair_blocks(cfg);
    two_mode_cm(b.delta_q, b.delta_p, b.delta_q, b.delta_p, b.gamma, -b.gamma)
}

/// Blocks of the effective two-mode secret-sharing state across a
/// bipartition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsBlocks {
    pub a_q: f64,
    pub a_p: f64,
    pub b_q: f64,
    pub b_p: f64,
    pub gamma: f64,
}

/// Closed-form blocks of the concentrated two-mode state:
/// `Delta_l = diag(y - (N-N_l) z^2/(N x), y - N_l z^2/(N x))` and
/// off-diagonal `sqrt(N_a N_b) z^2/(N x) Z`, with the subtractions routed
/// through the stable conditional variance as in [`pair_blocks`].
pub fn secret_sharing_blocks(split: &SplitConfig) -> SsBlocks {
    let l = &split.parent.link;
    let n = split.parent.n_users as f64;
    let (na, nb) = (split.n_a as f64, split.n_b as f64);
    let w = l.conditional_y();
    // y - m * kappa = ((N - m) y + m w) / N for kappa = z^2/(N x)
    let minus_kappa = |m: f64| ((n - m) * l.y + m * w) / n;
    SsBlocks {
        a_q: minus_kappa(n - na),
        a_p: minus_kappa(na),
        b_q: minus_kappa(n - nb),
        b_p: minus_kappa(nb),
        gamma: (na * nb).sqrt() * (l.z * l.z / (n * l.x)),
    }
}

/// Effective two-mode state shared by the two ensembles after local
/// concentration.
pub fn secret_sharing_cm(split: &SplitConfig) -> Result<CovMatrix> {
    let b = secret_sharing_blocks(split);
    two_mode_cm(b.a_q, b.a_p, b.b_q, b.b_p, b.gamma, -b.gamma)
}

/// Squeezing parameters that symmetrize the conditional pair state:
/// `kappa = z^2/(N x)`, `s = sqrt((y - kappa)/(y - (N-1) kappa))`, and the
/// general-split fourth-root `s_tilde`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedParams {
    pub kappa: f64,
    pub s: f64,
    pub s_tilde: f64,
}

impl SqueezedParams {
    /// Parameters for the conferencing pair state; here `s_tilde = s`.
    pub fn for_network(cfg: &NetworkConfig) -> Self {
        let l = &cfg.link;
        let n = cfg.n_users as f64;
        let kappa = l.z * l.z / (n * l.x);
        // y - kappa and y - (N-1) kappa are the stable pair deltas
        let b = pair_blocks(cfg);
        let s = (b.delta_p / b.delta_q).sqrt();
        SqueezedParams { kappa, s, s_tilde: s }
    }

    /// Parameters for a general split; `s_tilde` is the fourth root of the
    /// p-to-q variance ratio across both effective modes.
    pub fn for_split(split: &SplitConfig) -> Self {
        let base = SqueezedParams::for_network(&split.parent);
        let b = secret_sharing_blocks(split);
        let s_tilde = ((b.a_p * b.b_p) / (b.a_q * b.b_q)).sqrt().sqrt();
        SqueezedParams { s_tilde, ..base }
    }
}

/// Conditional pair state after the optimal local squeezings: diagonal blocks
/// `alpha I` with `alpha = sqrt((y-kappa)(y-(N-1)kappa))`, off-diagonal
/// `kappa diag(s, -1/s)`.
pub fn squeezed_pair_cm(cfg: &NetworkConfig) -> Result<CovMatrix> {
    let p = SqueezedParams::for_network(cfg);
    let b = pair_blocks(cfg);
    let alpha = (b.delta_p * b.delta_q).sqrt();
    two_mode_cm(alpha, alpha, alpha, alpha, p.kappa * p.s, -p.kappa / p.s)
}

/// Full `N`-mode conditional state after every user applies the local
/// squeezing, with `alpha I` diagonal blocks and `epsilon` between each pair.
pub fn squeezed_network_cm(cfg: &NetworkConfig) -> Result<CovMatrix> {
    let p = SqueezedParams::for_network(cfg);
    let b = pair_blocks(cfg);
    let n = cfg.n_users;
    let alpha = (b.delta_p * b.delta_q).sqrt();
    let (eq, ep) = (p.kappa * p.s, -p.kappa / p.s);
    let mut mat = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                mat[(i, j)] = alpha;
                mat[(n + i, n + j)] = alpha;
            } else {
                mat[(i, j)] = eq;
                mat[(n + i, n + j)] = ep;
            }
        }
    }
    CovMatrix::new(mat)
}

/// Squeezed effective two-mode secret-sharing state: diagonal blocks
/// `alpha_l I` with `alpha_l = sqrt((y-(N-N_l)kappa)(y-N_l kappa))`,
/// off-diagonal `sqrt(N_a N_b) kappa diag(s_tilde, -1/s_tilde)`.
pub fn squeezed_ss_cm(split: &SplitConfig) -> Result<CovMatrix> {
    let p = SqueezedParams::for_split(split);
    let b = secret_sharing_blocks(split);
    let alpha_a = (b.a_q * b.a_p).sqrt();
    let alpha_b = (b.b_q * b.b_p).sqrt();
    let c = (split.n_a as f64 * split.n_b as f64).sqrt() * p.kappa;
    two_mode_cm(
        alpha_a,
        alpha_a,
        alpha_b,
        alpha_b,
        c * p.s_tilde,
        -c / p.s_tilde,
    )
}

/// Two-mode state in `(q_1, q_2, p_1, p_2)` ordering with diagonal blocks
/// `diag(aq, ap)`, `diag(bq, bp)` and off-diagonal `diag(cq, cp)`.
fn two_mode_cm(aq: f64, ap: f64, bq: f64, bp: f64, cq: f64, cp: f64) -> Result<CovMatrix> {
    let mut mat = DMatrix::zeros(4, 4);
    mat[(0, 0)] = aq;
    mat[(1, 1)] = bq;
    mat[(2, 2)] = ap;
    mat[(3, 3)] = bp;
    mat[(0, 1)] = cq;
    mat[(1, 0)] = cq;
    mat[(2, 3)] = cp;
    mat[(3, 2)] = cp;
    CovMatrix::new(mat)
}

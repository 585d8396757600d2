//! Secret-key rates of the star network protocols.
//!
//! Holevo bounds come from the closed-form symplectic spectra of the
//! conditional states (cross-checked elsewhere against raw covariance-matrix
//! entropies). Mutual informations between heterodyne outcomes use the
//! Gaussian formula `I = (1/2) log2(sigma_s / sigma_n)` where each sigma is
//! `1 + det M + Tr M = det(M + I)` of a single-mode covariance matrix: the
//! marginal of the decoding mode for `sigma_s`, its conditional after the
//! partner heterodyne for `sigma_n`. Rates are `R = I - chi`, in bits per
//! use.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{entropy_h, link_params, LinkParams};
use crate::network::{
    pair_blocks, secret_sharing_blocks, NetworkConfig, SplitConfig, SqueezedParams,
};

/// Modulation search window used when none is given explicitly.
pub const MU_RANGE: (f64, f64) = (1.0, 1e6);
/// Points in the log-spaced pre-scan that guards the line search.
const MU_PRESCAN_POINTS: usize = 200;
/// Relative width at which the golden-section refinement stops.
const MU_RELATIVE_TOL: f64 = 1e-6;
/// Bracket for maximum-distance searches, in km.
const DISTANCE_BRACKET_KM: f64 = 500.0;
/// Bisection tolerance for maximum-distance searches, in km.
const DISTANCE_TOL_KM: f64 = 1e-4;

/// Symplectic data feeding the conferencing Holevo bound: the `N`-degenerate
/// eigenvalue `nu` of the conditional network state and the eigenvalue `nu_N`
/// left after one user's heterodyne, with its four intermediates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConferencingSpectrum {
    pub nu: f64,
    pub nu_n: f64,
    pub lambda: f64,
    pub lambda_bar: f64,
    pub tau: f64,
    pub tau_bar: f64,
}

/// Closed-form conferencing spectrum:
/// `nu = sqrt(y (y - z^2/x))` and `nu_N = sqrt(lambda lambda_bar / (tau
/// tau_bar))` with
/// `lambda = N w mu + eta (1 + (N-1-N w) mu)`,
/// `lambda_bar = N w mu + eta (N-1 - (N w - 1) mu)`,
/// `tau = N w (1-eta) + eta (N-1+mu)`,
/// `tau_bar = N w (1-eta) + eta ((N-1) mu + 1)`, `w` the thermal variance.
pub fn conferencing_spectrum(cfg: &NetworkConfig) -> Result<ConferencingSpectrum> {
    let l = &cfg.link;
    let n = cfg.n_users as f64;
    let (mu, eta, om) = (l.mu, l.eta, l.omega);
    let nu = sanitize_nu((l.y * l.conditional_y()).sqrt())?;
    let lambda = n * om * mu + eta * (1.0 + (n - 1.0 - n * om) * mu);
    let lambda_bar = n * om * mu + eta * (n - 1.0 - (n * om - 1.0) * mu);
    let tau = n * om * (1.0 - eta) + eta * (n - 1.0 + mu);
    let tau_bar = n * om * (1.0 - eta) + eta * ((n - 1.0) * mu + 1.0);
    let ratio = (lambda * lambda_bar) / (tau * tau_bar);
    if !ratio.is_finite() || ratio <= 0.0 {
        return Err(Error::Unphysical(ratio));
    }
    Ok(ConferencingSpectrum {
        nu,
        nu_n: sanitize_nu(ratio.sqrt())?,
        lambda,
        lambda_bar,
        tau,
        tau_bar,
    })
}

/// Guards a closed-form symplectic eigenvalue against rounding noise at the
/// purity boundary: values within `1e-6` below 1 clamp to 1, anything lower
/// is unphysical. Mirrors the spectrum clamping in the state layer.
fn sanitize_nu(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 1.0 - 1e-6 {
        return Err(Error::Unphysical(x));
    }
    Ok(x.max(1.0))
}

/// Holevo bound of the conferencing protocol, `chi = 2 h(nu) - h(nu_N)`.
pub fn conferencing_holevo(cfg: &NetworkConfig) -> Result<f64> {
    let sp = conferencing_spectrum(cfg)?;
    Ok(clamp_holevo(
        2.0 * entropy_h(sp.nu)? - entropy_h(sp.nu_n)?,
    ))
}

/// Two-mode pair with diagonal blocks `diag(aq, ap)`, `diag(bq, bp)` and
/// off-diagonal `diag(cq, cp)`; everything a heterodyne rate needs.
#[derive(Debug, Clone, Copy)]
struct HetPair {
    aq: f64,
    ap: f64,
    bq: f64,
    bp: f64,
    cq: f64,
    cp: f64,
}

impl HetPair {
    /// Conditional covariance of mode a after heterodyne on mode b.
    fn conditional_a(&self) -> (f64, f64) {
        (
            self.aq - self.cq * self.cq / (self.bq + 1.0),
            self.ap - self.cp * self.cp / (self.bp + 1.0),
        )
    }

    /// `(sigma_s, sigma_n)` of the heterodyne mutual information, with
    /// reconciliation on mode a.
    fn sigmas(&self) -> (f64, f64) {
        let (mq, mp) = self.conditional_a();
        ((1.0 + self.aq) * (1.0 + self.ap), (1.0 + mq) * (1.0 + mp))
    }

    fn mi(&self) -> f64 {
        let (ss, sn) = self.sigmas();
        0.5 * (ss / sn).log2()
    }
}

fn clamp_holevo(chi: f64) -> f64 {
    // floating-point noise on the lossless line must not produce -1e-16
    if chi < 0.0 && chi > -1e-9 {
        0.0
    } else {
        chi
    }
}

fn conferencing_het_pair(cfg: &NetworkConfig) -> HetPair {
    let b = pair_blocks(cfg);
    HetPair {
        aq: b.delta_q,
        ap: b.delta_p,
        bq: b.delta_q,
        bp: b.delta_p,
        cq: b.gamma,
        cp: -b.gamma,
    }
}

/// `(sigma_s, sigma_n)` of the conferencing mutual information.
pub fn conferencing_mi_parts(cfg: &NetworkConfig) -> (f64, f64) {
    conferencing_het_pair(cfg).sigmas()
}

/// Mutual information between two users' heterodyne outcomes, in bits.
pub fn conferencing_mi(cfg: &NetworkConfig) -> f64 {
    conferencing_het_pair(cfg).mi()
}

/// Protocol selector for reports, sweeps and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Conference,
    SecretSharing,
    SqueezedConference,
    SqueezedSecretSharing,
}

impl Protocol {
    pub fn is_secret_sharing(&self) -> bool {
        matches!(self, Protocol::SecretSharing | Protocol::SqueezedSecretSharing)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Conference => "conference",
            Protocol::SecretSharing => "secret-sharing",
            Protocol::SqueezedConference => "squeezed-conference",
            Protocol::SqueezedSecretSharing => "squeezed-secret-sharing",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conference" => Ok(Protocol::Conference),
            "secret-sharing" => Ok(Protocol::SecretSharing),
            "squeezed-conference" => Ok(Protocol::SqueezedConference),
            "squeezed-secret-sharing" => Ok(Protocol::SqueezedSecretSharing),
            other => Err(Error::Domain(format!(
                "unknown protocol '{other}' (expected conference, secret-sharing, \
                 squeezed-conference or squeezed-secret-sharing)"
            ))),
        }
    }
}

/// One evaluated rate point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    pub protocol: Protocol,
    pub n_users: usize,
    pub split: Option<(usize, usize)>,
    pub eta: f64,
    pub nbar: f64,
    pub mu: f64,
    pub mutual_info: f64,
    pub holevo: f64,
    pub rate: f64,
}

/// A protocol configuration without channel transmissivity or modulation;
/// those vary across sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub protocol: Protocol,
    pub n_users: usize,
    pub split: Option<(usize, usize)>,
    pub nbar: f64,
}

impl Scenario {
    pub fn new(
        protocol: Protocol,
        n_users: usize,
        split: Option<(usize, usize)>,
        nbar: f64,
    ) -> Result<Self> {
        if protocol.is_secret_sharing() {
            let (na, nb) = split.ok_or_else(|| {
                Error::Split("secret-sharing protocols need a split".into())
            })?;
            if na == 0 || nb == 0 || na + nb > n_users {
                return Err(Error::Split(format!(
                    "invalid split ({na}, {nb}) for {n_users} users"
                )));
            }
        }
        if n_users < 2 {
            return Err(Error::Domain(format!(
                "network needs at least 2 users, got {n_users}"
            )));
        }
        Ok(Scenario {
            protocol,
            n_users,
            split: if protocol.is_secret_sharing() { split } else { None },
            nbar,
        })
    }

    fn network(&self, eta: f64, mu: f64) -> Result<NetworkConfig> {
        NetworkConfig::new(self.n_users, link_params(mu, eta, self.nbar)?)
    }

    fn split_config(&self, eta: f64, mu: f64) -> Result<SplitConfig> {
        let (na, nb) = self.split.expect("validated at construction");
        SplitConfig::new(na, nb, self.network(eta, mu)?)
    }

    /// Evaluates the protocol rate at fixed transmissivity and modulation.
    pub fn report(&self, eta: f64, mu: f64) -> Result<RateReport> {
        let inner = match self.protocol {
            Protocol::Conference => conferencing_rate(&self.network(eta, mu)?)?,
            Protocol::SecretSharing => secret_sharing_rate(&self.split_config(eta, mu)?)?,
            Protocol::SqueezedConference => {
                squeezed_conferencing_rate(&self.network(eta, mu)?)?
            }
            Protocol::SqueezedSecretSharing => squeezed_ss_rate(&self.split_config(eta, mu)?)?,
        };
        Ok(RateReport {
            split: self.split,
            ..inner
        })
    }
}

/// Asymptotic conferencing rate `R = I - chi` at the configuration's
/// modulation.
pub fn conferencing_rate(cfg: &NetworkConfig) -> Result<RateReport> {
    let mi = conferencing_mi(cfg);
    let chi = conferencing_holevo(cfg)?;
    Ok(RateReport {
        protocol: Protocol::Conference,
        n_users: cfg.n_users,
        split: None,
        eta: cfg.link.eta,
        nbar: cfg.link.nbar,
        mu: cfg.link.mu,
        mutual_info: mi,
        holevo: chi,
        rate: mi - chi,
    })
}

fn ss_het_pair(split: &SplitConfig) -> HetPair {
    let b = secret_sharing_blocks(split);
    HetPair {
        aq: b.a_q,
        ap: b.a_p,
        bq: b.b_q,
        bp: b.b_p,
        cq: b.gamma,
        cp: -b.gamma,
    }
}

/// Asymptotic secret-sharing rate `R = J(alpha:beta) - chi^SS` with
/// reconciliation on ensemble a; `chi^SS = 2 h(nu) - h(nu^SS)` where `nu^SS`
/// is the symplectic eigenvalue `sqrt(det V_a|gamma,beta)` of the mode-a
/// state conditioned on the partner heterodyne.
pub fn secret_sharing_rate(split: &SplitConfig) -> Result<RateReport> {
    let pair = ss_het_pair(split);
    let mi = pair.mi();
    let (mq, mp) = pair.conditional_a();
    let nu_ss = sanitize_nu((mq * mp).sqrt())?;
    let nu = conferencing_spectrum(&split.parent)?.nu;
    let chi = clamp_holevo(2.0 * entropy_h(nu)? - entropy_h(nu_ss)?);
    Ok(RateReport {
        protocol: Protocol::SecretSharing,
        n_users: split.parent.n_users,
        split: Some((split.n_a, split.n_b)),
        eta: split.parent.link.eta,
        nbar: split.parent.link.nbar,
        mu: split.parent.link.mu,
        mutual_info: mi,
        holevo: chi,
        rate: mi - chi,
    })
}

/// Conditional eigenvalue of the squeezed conferencing protocol,
/// `nu_tilde = (mu (mu - N kappa) + r)/(1 + r)` with
/// `r = sqrt((mu - kappa)(mu - (N-1) kappa))`; note `mu - N kappa` is the
/// conditional variance `y - z^2/x` and `r` the symmetrized block `alpha`.
pub fn squeezed_nu_tilde(cfg: &NetworkConfig) -> f64 {
    let b = pair_blocks(cfg);
    let mu = cfg.link.mu;
    let rad = (b.delta_p * b.delta_q).sqrt();
    (mu * cfg.link.conditional_y() + rad) / (1.0 + rad)
}

/// Asymptotic rate of the squeezed conferencing protocol:
/// `chi = 2 h(nu) - h(nu_tilde)`, mutual information from the symmetrized
/// pair blocks.
pub fn squeezed_conferencing_rate(cfg: &NetworkConfig) -> Result<RateReport> {
    let l = &cfg.link;
    let p = SqueezedParams::for_network(cfg);
    let b = pair_blocks(cfg);
    let alpha = (b.delta_p * b.delta_q).sqrt();
    let pair = HetPair {
        aq: alpha,
        ap: alpha,
        bq: alpha,
        bp: alpha,
        cq: p.kappa * p.s,
        cp: -p.kappa / p.s,
    };
    let mi = pair.mi();
    let nu = conferencing_spectrum(cfg)?.nu;
    let chi = clamp_holevo(
        2.0 * entropy_h(nu)? - entropy_h(sanitize_nu(squeezed_nu_tilde(cfg))?)?,
    );
    Ok(RateReport {
        protocol: Protocol::SqueezedConference,
        n_users: cfg.n_users,
        split: None,
        eta: l.eta,
        nbar: l.nbar,
        mu: l.mu,
        mutual_info: mi,
        holevo: chi,
        rate: mi - chi,
    })
}

/// Full-house closed forms of the squeezed secret-sharing protocol:
/// `alpha_bar = sqrt((y - N_a kappa)(y - N_b kappa))`,
/// `nu_bar' = (y (y - N kappa) + alpha_bar)/(1 + alpha_bar)`,
/// `I = -log2(1 - (sqrt(N_a N_b) kappa / (1 + alpha_bar))^2)`.
fn squeezed_ss_full_house(split: &SplitConfig) -> Result<RateReport> {
    let l = &split.parent.link;
    let (na, nb) = (split.n_a as f64, split.n_b as f64);
    let p = SqueezedParams::for_split(split);
    let b = secret_sharing_blocks(split);
    // y - N_a kappa and y - N_b kappa are the stable p-quadrature deltas
    let alpha_bar = (b.a_p * b.b_p).sqrt();
    let c_bar = (na * nb).sqrt() * p.kappa;
    let mi = -(1.0 - (c_bar / (1.0 + alpha_bar)).powi(2)).log2();
    // y (y - N kappa) with N kappa = z^2/x, via the stable conditional
    let nu_bar_prime =
        sanitize_nu((l.y * l.conditional_y() + alpha_bar) / (1.0 + alpha_bar))?;
    let nu = conferencing_spectrum(&split.parent)?.nu;
    let chi = clamp_holevo(2.0 * entropy_h(nu)? - entropy_h(nu_bar_prime)?);
    Ok(RateReport {
        protocol: Protocol::SqueezedSecretSharing,
        n_users: split.parent.n_users,
        split: Some((split.n_a, split.n_b)),
        eta: l.eta,
        nbar: l.nbar,
        mu: l.mu,
        mutual_info: mi,
        holevo: chi,
        rate: mi - chi,
    })
}

/// Asymptotic rate of the squeezed secret-sharing protocol. Full-house splits
/// use the closed forms; general splits evaluate the squeezed two-mode state
/// numerically.
pub fn squeezed_ss_rate(split: &SplitConfig) -> Result<RateReport> {
    if split.is_full_house() {
        return squeezed_ss_full_house(split);
    }
    let b = secret_sharing_blocks(split);
    let p = SqueezedParams::for_split(split);
    let c = (split.n_a as f64 * split.n_b as f64).sqrt() * p.kappa;
    let pair = HetPair {
        aq: (b.a_q * b.a_p).sqrt(),
        ap: (b.a_q * b.a_p).sqrt(),
        bq: (b.b_q * b.b_p).sqrt(),
        bp: (b.b_q * b.b_p).sqrt(),
        cq: c * p.s_tilde,
        cp: -c / p.s_tilde,
    };
    let mi = pair.mi();
    let (mq, mp) = pair.conditional_a();
    let nu_cond = sanitize_nu((mq * mp).sqrt())?;
    let nu = conferencing_spectrum(&split.parent)?.nu;
    let chi = clamp_holevo(2.0 * entropy_h(nu)? - entropy_h(nu_cond)?);
    Ok(RateReport {
        protocol: Protocol::SqueezedSecretSharing,
        n_users: split.parent.n_users,
        split: Some((split.n_a, split.n_b)),
        eta: split.parent.link.eta,
        nbar: split.parent.link.nbar,
        mu: split.parent.link.mu,
        mutual_info: mi,
        holevo: chi,
        rate: mi - chi,
    })
}

/// Maximizes the rate over the modulation `mu` on `mu_range`.
///
/// A 200-point log-spaced pre-scan brackets the maximum, then a
/// golden-section search on `log mu` refines it to `1e-6` relative width.
/// Deterministic for fixed inputs.
pub fn optimize_mu(sc: &Scenario, eta: f64, mu_range: (f64, f64)) -> Result<(f64, RateReport)> {
    let (lo, hi) = mu_range;
    if !(lo.is_finite() && hi.is_finite()) || lo < 1.0 || hi < lo {
        return Err(Error::Empty(format!("invalid mu range [{lo}, {hi}]")));
    }
    if hi == lo {
        let rep = sc.report(eta, lo)?;
        return Ok((lo, rep));
    }
    let rate_at = |mu: f64| -> Result<f64> { Ok(sc.report(eta, mu)?.rate) };

    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut best_i = 0usize;
    let mut best = f64::NEG_INFINITY;
    let step = (lhi - llo) / (MU_PRESCAN_POINTS - 1) as f64;
    for i in 0..MU_PRESCAN_POINTS {
        let mu = (llo + step * i as f64).exp();
        let r = rate_at(mu)?;
        if r > best {
            best = r;
            best_i = i;
        }
    }
    let mut a = llo + step * best_i.saturating_sub(1) as f64;
    let mut b = (llo + step * (best_i + 1) as f64).min(lhi);

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = rate_at(c.exp())?;
    let mut fd = rate_at(d.exp())?;
    while (b - a) > MU_RELATIVE_TOL {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = rate_at(c.exp())?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = rate_at(d.exp())?;
        }
    }
    let mu_star = (0.5 * (a + b)).exp().clamp(lo, hi);
    let report = sc.report(eta, mu_star)?;
    Ok((mu_star, report))
}

/// Fiber-distance map: `eta = 10^(-attenuation * d / 10)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceMap {
    pub distance_km: f64,
    pub attenuation_db_per_km: f64,
}

impl DistanceMap {
    /// Standard fiber at 0.2 dB/km, so `eta = 10^(-0.02 d)`.
    pub fn new(distance_km: f64) -> Result<Self> {
        DistanceMap::with_attenuation(distance_km, 0.2)
    }

    pub fn with_attenuation(distance_km: f64, attenuation_db_per_km: f64) -> Result<Self> {
        if !distance_km.is_finite() || distance_km < 0.0 {
            return Err(Error::Domain(format!(
                "distance must be >= 0 km, got {distance_km}"
            )));
        }
        if !attenuation_db_per_km.is_finite() || attenuation_db_per_km <= 0.0 {
            return Err(Error::Domain(format!(
                "attenuation must be > 0 dB/km, got {attenuation_db_per_km}"
            )));
        }
        Ok(DistanceMap {
            distance_km,
            attenuation_db_per_km,
        })
    }
}

/// Transmissivity of the mapped fiber link.
pub fn eta_from_distance(map: &DistanceMap) -> f64 {
    10f64.powf(-map.attenuation_db_per_km * map.distance_km / 10.0)
}

/// Maximum link distance at which the mu-optimized rate stays positive,
/// found by bisection on `[0, 500]` km to `1e-4` km.
///
/// Returns 0 when the rate is already nonpositive at zero distance.
pub fn max_distance(sc: &Scenario, attenuation_db_per_km: f64) -> Result<f64> {
    let rate_at_d = |d: f64| -> Result<f64> {
        let map = DistanceMap::with_attenuation(d, attenuation_db_per_km)?;
        let (_, rep) = optimize_mu(sc, eta_from_distance(&map), MU_RANGE)?;
        Ok(rep.rate)
    };
    if rate_at_d(0.0)? <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = DISTANCE_BRACKET_KM;
    if rate_at_d(hi)? > 0.0 {
        return Ok(hi);
    }
    let mut lo = 0.0;
    while hi - lo > DISTANCE_TOL_KM {
        let mid = 0.5 * (lo + hi);
        if rate_at_d(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Ultimate repeaterless bound `-log2(1 - eta)` of the lossy channel, in bits
/// per use. Unbounded (infinite) at `eta = 1`.
pub fn plob_bound(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("eta must be in (0, 1], got {eta}")));
    }
    if eta == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-(1.0 - eta).log2())
}

/// Composable finite-size security parameters.
///
/// Defaults: `xi = 0.95`, 5 discretization bits, `p = 0.9` and
/// `delta_s = delta_ec = delta_pe = 4.3e-10` (so the total `delta` is about
/// `1.3e-9`), with the logarithm inside the AEP correction taken base 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteSizeParams {
    /// Error-correction efficiency `xi` in `(0, 1)`.
    pub ec_efficiency: f64,
    /// Number of protocol uses `n`.
    pub block_size: f64,
    /// Discretization bits per quadrature (`2^d` values).
    pub bits_per_quadrature: u32,
    pub delta_s: f64,
    pub delta_ec: f64,
    pub delta_pe: f64,
    /// Probability that the protocol does not abort.
    pub success_prob: f64,
    /// Base of the logarithm inside the AEP correction.
    pub aep_log_base: f64,
}

impl Default for FiniteSizeParams {
    fn default() -> Self {
        FiniteSizeParams {
            ec_efficiency: 0.95,
            block_size: 1e9,
            bits_per_quadrature: 5,
            delta_s: 4.3e-10,
            delta_ec: 4.3e-10,
            delta_pe: 4.3e-10,
            success_prob: 0.9,
            aep_log_base: 2.0,
        }
    }
}

impl FiniteSizeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ec_efficiency > 0.0 && self.ec_efficiency < 1.0) {
            return Err(Error::FiniteSize(format!(
                "xi must be in (0, 1), got {}",
                self.ec_efficiency
            )));
        }
        if !(self.block_size >= 1.0) {
            return Err(Error::FiniteSize(format!(
                "block size must be >= 1, got {}",
                self.block_size
            )));
        }
        let delta = self.delta_s + self.delta_ec + self.delta_pe;
        if !(self.delta_s > 0.0 && self.delta_ec > 0.0 && self.delta_pe > 0.0 && delta < 1.0) {
            return Err(Error::FiniteSize(format!(
                "error terms must be positive with total below 1, got {delta}"
            )));
        }
        if !(self.success_prob > 0.0 && self.success_prob <= 1.0) {
            return Err(Error::FiniteSize(format!(
                "success probability must be in (0, 1], got {}",
                self.success_prob
            )));
        }
        if !(self.aep_log_base > 1.0) {
            return Err(Error::FiniteSize(format!(
                "log base must exceed 1, got {}",
                self.aep_log_base
            )));
        }
        Ok(())
    }

    /// Total security parameter `delta = delta_s + delta_EC + delta_PE`.
    pub fn delta(&self) -> f64 {
        self.delta_s + self.delta_ec + self.delta_pe
    }
}

/// AEP correction bound `4 (d + 1) sqrt(log(2 / epsilon^2))`.
pub fn delta_aep(epsilon: f64, bits_per_quadrature: u32, log_base: f64) -> f64 {
    4.0 * (bits_per_quadrature as f64 + 1.0)
        * (2.0 / (epsilon * epsilon)).log(log_base).sqrt()
}

/// Composable finite-size key rate
/// `r = xi I - chi_worst - Delta_AEP(2 p delta_s / 3, d) / sqrt(n)`.
///
/// `chi_worst` is the worst-case Holevo bound compatible with parameter
/// estimation; see [`widened_link`] for the confidence-offset helper. The
/// result may be negative and is reported as-is.
pub fn finite_size_rate(mi: f64, chi_worst: f64, fs: &FiniteSizeParams) -> Result<f64> {
    fs.validate()?;
    let eps = 2.0 * fs.success_prob * fs.delta_s / 3.0;
    let corr = delta_aep(eps, fs.bits_per_quadrature, fs.aep_log_base) / fs.block_size.sqrt();
    Ok(fs.ec_efficiency * mi - chi_worst - corr)
}

/// Widens a link by parameter-estimation confidence offsets: transmissivity
/// down by `eta_offset`, thermal photons up by `nbar_offset`.
pub fn widened_link(link: &LinkParams, eta_offset: f64, nbar_offset: f64) -> Result<LinkParams> {
    if eta_offset < 0.0 || nbar_offset < 0.0 {
        return Err(Error::Domain(
            "confidence offsets must be nonnegative".into(),
        ));
    }
    link_params(link.mu, link.eta - eta_offset, link.nbar + nbar_offset)
}

/// Worst-case reduction of an asymmetric star: the minimum transmissivity and
/// maximum thermal noise over the links, at their common modulation.
pub fn worst_case_link(links: &[LinkParams]) -> Result<LinkParams> {
    let first = links
        .first()
        .ok_or_else(|| Error::Empty("worst_case_link needs at least one link".into()))?;
    let mut eta = first.eta;
    let mut nbar = first.nbar;
    for l in &links[1..] {
        if l.mu != first.mu {
            return Err(Error::Domain(format!(
                "links must share one modulation, got {} and {}",
                first.mu, l.mu
            )));
        }
        eta = eta.min(l.eta);
        nbar = nbar.max(l.nbar);
    }
    link_params(first.mu, eta, nbar)
}

/// Converts a per-use rate to bits per second at the given clock.
pub fn throughput(rate_bits_per_use: f64, clock_hz: f64) -> f64 {
    rate_bits_per_use * clock_hz
}

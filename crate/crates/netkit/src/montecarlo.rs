//! Outcome-level statistical oracle for the star network.
//!
//! Every measurement in the protocol is Gaussian, so the joint distribution
//! of the relay homodyne outcomes and the users' heterodyne outcomes is
//! multivariate normal. Sampling therefore proceeds classically: draw the
//! quadrature phase-space variables of each two-mode resource state, mix the
//! travelling modes with independent thermal environments at the channel
//! beam splitters, rotate them through the relay interferometer, read out the
//! homodyned quadratures, and add one unit of vacuum noise per quadrature for
//! each heterodyne. The residual covariance of the users' outcomes after
//! regressing out the broadcast outcome must match the analytic conditional
//! state plus heterodyne vacuum.
//!
//! Shots are partitioned into fixed chunks; chunk `i` draws from stream `i`
//! of a ChaCha12 generator seeded with the run seed, and partial sufficient
//! statistics merge in chunk order, so results are identical whether chunks
//! run in parallel or sequentially.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::gaussian::CovMatrix;
use crate::network::{network_conditional_cm, NetworkConfig};

/// Counter-based generator behind every simulation, pinned for
/// reproducibility metadata.
pub const RNG_ALGORITHM: &str = "chacha12 (rand_chacha 0.9)";

/// Shots per worker chunk; each chunk owns one RNG stream.
const CHUNK_SHOTS: usize = 16_384;

/// Number of interleaved blocks used for statistical standard errors.
const MI_BLOCKS: usize = 20;

/// Raw outcome record of a simulated run.
///
/// `gamma` holds one row of `N` relay outcomes per shot, ordered
/// `(q_2, .., q_N, p)`; `beta` holds one row of `2N` heterodyne outcomes per
/// shot, ordered `(q_1..q_N, p_1..p_N)`.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub config: NetworkConfig,
    pub shots: usize,
    pub seed: u64,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl SimRun {
    pub fn gamma_row(&self, shot: usize) -> &[f64] {
        let n = self.config.n_users;
        &self.gamma[shot * n..(shot + 1) * n]
    }

    pub fn beta_row(&self, shot: usize) -> &[f64] {
        let n = 2 * self.config.n_users;
        &self.beta[shot * n..(shot + 1) * n]
    }
}

/// Comparison of the empirical conditional covariance of the users' outcomes
/// against the analytic prediction (conditional state plus heterodyne
/// vacuum).
#[derive(Debug, Clone)]
pub struct EmpiricalStats {
    pub empirical_cov: DMatrix<f64>,
    pub analytic_cov: DMatrix<f64>,
    pub std_errors: DMatrix<f64>,
    pub max_abs_dev: f64,
    pub max_dev_in_se: f64,
    /// Fitted linear map from the broadcast outcome to the outcome means,
    /// reported for inspection.
    pub regression_map: DMatrix<f64>,
    pub shots: usize,
}

/// Monte Carlo mutual-information estimate with its block standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MiEstimate {
    pub bits: f64,
    pub std_err: f64,
}

/// Per-link sampling constants for one shot.
struct ShotModel {
    n: usize,
    sqrt_mu: f64,
    tms_cross: f64,
    tms_cond: f64,
    sqrt_eta: f64,
    sqrt_env: f64,
    r: DMatrix<f64>,
}

impl ShotModel {
    fn new(cfg: &NetworkConfig) -> Result<Self> {
        let l = &cfg.link;
        Ok(ShotModel {
            n: cfg.n_users,
            sqrt_mu: l.mu.sqrt(),
            tms_cross: (l.mu * l.mu - 1.0).sqrt() / l.mu.sqrt(),
            // mu - (mu^2 - 1)/mu = 1/mu exactly
            tms_cond: (1.0 / l.mu).sqrt(),
            sqrt_eta: l.eta.sqrt(),
            sqrt_env: ((1.0 - l.eta) * l.omega).sqrt(),
            r: crate::gaussian::cascade_interferometer(cfg.n_users)?
                .r_matrix()
                .clone(),
        })
    }

    /// Draws one shot into the provided gamma and beta rows.
    fn sample_shot<R: Rng>(&self, rng: &mut R, aq: &mut [f64], ap: &mut [f64], gamma: &mut [f64], beta: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            let g3: f64 = rng.sample(StandardNormal);
            let g4: f64 = rng.sample(StandardNormal);
            let a_q = self.sqrt_mu * g1;
            let a_p = self.sqrt_mu * g3;
            beta[k] = self.tms_cross * g1 + self.tms_cond * g2;
            beta[n + k] = -self.tms_cross * g3 + self.tms_cond * g4;
            let e_q: f64 = rng.sample(StandardNormal);
            let e_p: f64 = rng.sample(StandardNormal);
            aq[k] = self.sqrt_eta * a_q + self.sqrt_env * e_q;
            ap[k] = self.sqrt_eta * a_p + self.sqrt_env * e_p;
        }
        // relay: rows 2..N of R give the q outcomes, row 1 the p outcome
        for k in 1..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.r[(k, j)] * aq[j];
            }
            gamma[k - 1] = acc;
        }
        let mut acc = 0.0;
        for j in 0..n {
            acc += self.r[(0, j)] * ap[j];
        }
        gamma[n - 1] = acc;
        // heterodyne vacuum units on every retained quadrature
        for b in beta.iter_mut() {
            let v: f64 = rng.sample(StandardNormal);
            *b += v;
        }
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64 + 1);
    rng
}

/// Samples the joint outcome distribution of the protocol.
pub fn sample_protocol(cfg: &NetworkConfig, shots: usize, seed: u64) -> Result<SimRun> {
    sample_protocol_with(cfg, shots, seed, exec::Mode::Auto)
}

/// [`sample_protocol`] with an explicit execution mode; both modes produce
/// bit-identical outcomes.
pub fn sample_protocol_with(
    cfg: &NetworkConfig,
    shots: usize,
    seed: u64,
    mode: exec::Mode,
) -> Result<SimRun> {
    if shots == 0 {
        return Err(Error::Empty("shots must be >= 1".into()));
    }
    let model = ShotModel::new(cfg)?;
    let n = cfg.n_users;
    let chunks = shots.div_ceil(CHUNK_SHOTS);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = exec::map_range_with(mode, chunks, |c| {
        let start = c * CHUNK_SHOTS;
        let len = CHUNK_SHOTS.min(shots - start);
        let mut rng = chunk_rng(seed, c);
        let mut gamma = vec![0.0; len * n];
        let mut beta = vec![0.0; len * 2 * n];
        let mut aq = vec![0.0; n];
        let mut ap = vec![0.0; n];
        for s in 0..len {
            model.sample_shot(
                &mut rng,
                &mut aq,
                &mut ap,
                &mut gamma[s * n..(s + 1) * n],
                &mut beta[s * 2 * n..(s + 1) * 2 * n],
            );
        }
        (gamma, beta)
    });
    let mut gamma = Vec::with_capacity(shots * n);
    let mut beta = Vec::with_capacity(shots * 2 * n);
    for (g, b) in parts {
        gamma.extend_from_slice(&g);
        beta.extend_from_slice(&b);
    }
    Ok(SimRun {
        config: *cfg,
        shots,
        seed,
        gamma,
        beta,
    })
}

/// Accumulated second moments of `(gamma, beta)`.
#[derive(Clone)]
struct SuffStats {
    n: f64,
    sum_g: DMatrix<f64>,
    sum_b: DMatrix<f64>,
    gg: DMatrix<f64>,
    gb: DMatrix<f64>,
    bb: DMatrix<f64>,
}

impl SuffStats {
    fn zero(dg: usize, db: usize) -> Self {
        SuffStats {
            n: 0.0,
            sum_g: DMatrix::zeros(dg, 1),
            sum_b: DMatrix::zeros(db, 1),
            gg: DMatrix::zeros(dg, dg),
            gb: DMatrix::zeros(dg, db),
            bb: DMatrix::zeros(db, db),
        }
    }

    fn add_shot(&mut self, g: &[f64], b: &[f64]) {
        self.n += 1.0;
        for (i, &gi) in g.iter().enumerate() {
            self.sum_g[(i, 0)] += gi;
            for (j, &gj) in g.iter().enumerate() {
                self.gg[(i, j)] += gi * gj;
            }
            for (j, &bj) in b.iter().enumerate() {
                self.gb[(i, j)] += gi * bj;
            }
        }
        for (i, &bi) in b.iter().enumerate() {
            self.sum_b[(i, 0)] += bi;
            for (j, &bj) in b.iter().enumerate() {
                self.bb[(i, j)] += bi * bj;
            }
        }
    }

    fn merge(mut self, other: &SuffStats) -> Self {
        self.n += other.n;
        self.sum_g += &other.sum_g;
        self.sum_b += &other.sum_b;
        self.gg += &other.gg;
        self.gb += &other.gb;
        self.bb += &other.bb;
        self
    }

    /// Mean-corrected covariances with `n - 1` denominators.
    fn covariances(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let n = self.n;
        let gbar = &self.sum_g / n;
        let bbar = &self.sum_b / n;
        let cgg = (&self.gg - &gbar * self.sum_g.transpose()) / (n - 1.0);
        let cgb = (&self.gb - &gbar * self.sum_b.transpose()) / (n - 1.0);
        let cbb = (&self.bb - &bbar * self.sum_b.transpose()) / (n - 1.0);
        (cgg, cgb, cbb)
    }

    /// Residual covariance of `beta` after the least-squares regression on
    /// `gamma`, plus the fitted map.
    fn conditional(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (cgg, cgb, cbb) = self.covariances();
        let chol = cgg
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Domain("singular regressor covariance".into()))?;
        let map = chol.solve(&cgb); // gamma -> beta coefficient matrix
        let resid = cbb - cgb.transpose() * &map;
        Ok((resid, map))
    }
}

fn accumulate(run: &SimRun) -> Vec<SuffStats> {
    let n = run.config.n_users;
    let chunks = run.shots.div_ceil(CHUNK_SHOTS);
    exec::map_range(chunks, |c| {
        let start = c * CHUNK_SHOTS;
        let len = CHUNK_SHOTS.min(run.shots - start);
        let mut st = SuffStats::zero(n, 2 * n);
        for s in start..start + len {
            st.add_shot(run.gamma_row(s), run.beta_row(s));
        }
        st
    })
}

/// Regresses the users' outcomes on the broadcast outcome and compares the
/// residual covariance to the analytic conditional state plus heterodyne
/// vacuum. Standard errors use the analytic covariance:
/// `se_ij = sqrt((C_ii C_jj + C_ij^2) / shots)`.
pub fn verify_conditional_cm(cfg: &NetworkConfig, shots: usize, seed: u64) -> Result<EmpiricalStats> {
    let run = sample_protocol(cfg, shots, seed)?;
    empirical_stats(&run)
}

/// [`verify_conditional_cm`] on an already sampled run.
pub fn empirical_stats(run: &SimRun) -> Result<EmpiricalStats> {
    let n = run.config.n_users;
    if run.shots < 10 * n {
        return Err(Error::Empty(format!(
            "need at least {} shots for the regression, got {}",
            10 * n,
            run.shots
        )));
    }
    let total = accumulate(run)
        .into_iter()
        .fold(SuffStats::zero(n, 2 * n), |acc, st| acc.merge(&st));
    let (resid, map) = total.conditional()?;
    let analytic =
        analytic_outcome_cov(&network_conditional_cm(&run.config)?);
    let mut se = DMatrix::zeros(2 * n, 2 * n);
    let mut max_abs = 0.0f64;
    let mut max_se = 0.0f64;
    for i in 0..2 * n {
        for j in 0..2 * n {
            let s = ((analytic[(i, i)] * analytic[(j, j)] + analytic[(i, j)].powi(2))
                / run.shots as f64)
                .sqrt();
            se[(i, j)] = s;
            let dev = (resid[(i, j)] - analytic[(i, j)]).abs();
            max_abs = max_abs.max(dev);
            max_se = max_se.max(dev / s);
        }
    }
    Ok(EmpiricalStats {
        empirical_cov: resid,
        analytic_cov: analytic,
        std_errors: se,
        max_abs_dev: max_abs,
        max_dev_in_se: max_se,
        regression_map: map,
        shots: run.shots,
    })
}

/// Heterodyne outcome covariance: the conditional state plus one vacuum unit
/// per quadrature.
fn analytic_outcome_cov(cm: &CovMatrix) -> DMatrix<f64> {
    let n = cm.matrix().nrows();
    cm.matrix().clone() + DMatrix::identity(n, n)
}

/// Gaussian mutual information between the heterodyne outcomes of two modes,
/// from an empirical residual covariance.
fn mi_from_resid(resid: &DMatrix<f64>, n: usize, i: usize, j: usize) -> f64 {
    let idx = [i, n + i, j, n + j];
    let mut s = DMatrix::zeros(4, 4);
    for (r, &a) in idx.iter().enumerate() {
        for (c, &b) in idx.iter().enumerate() {
            s[(r, c)] = resid[(a, b)];
        }
    }
    let det_i = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
    let det_j = s[(2, 2)] * s[(3, 3)] - s[(2, 3)] * s[(3, 2)];
    0.5 * (det_i * det_j / s.determinant()).log2()
}

/// Monte Carlo estimate of the mutual information between users `i` and `j`,
/// with a standard error from 20 interleaved shot blocks.
pub fn estimate_pair_mi_between(
    cfg: &NetworkConfig,
    shots: usize,
    seed: u64,
    i: usize,
    j: usize,
) -> Result<MiEstimate> {
    if i >= cfg.n_users || j >= cfg.n_users || i == j {
        return Err(Error::Dimension(format!(
            "invalid user pair ({i}, {j}) for {} users",
            cfg.n_users
        )));
    }
    let run = sample_protocol(cfg, shots, seed)?;
    let n = cfg.n_users;
    if run.shots < MI_BLOCKS * 10 * n {
        return Err(Error::Empty(format!(
            "need at least {} shots for blocked estimation, got {}",
            MI_BLOCKS * 10 * n,
            run.shots
        )));
    }
    let mut blocks = vec![SuffStats::zero(n, 2 * n); MI_BLOCKS];
    for s in 0..run.shots {
        blocks[s % MI_BLOCKS].add_shot(run.gamma_row(s), run.beta_row(s));
    }
    let mut block_mis = Vec::with_capacity(MI_BLOCKS);
    for b in &blocks {
        let (resid, _) = b.conditional()?;
        block_mis.push(mi_from_resid(&resid, n, i, j));
    }
    let total = blocks
        .iter()
        .fold(SuffStats::zero(n, 2 * n), |acc, st| acc.merge(st));
    let (resid, _) = total.conditional()?;
    let pooled = mi_from_resid(&resid, n, i, j);
    let mean = block_mis.iter().sum::<f64>() / MI_BLOCKS as f64;
    let var = block_mis.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        / (MI_BLOCKS as f64 - 1.0);
    Ok(MiEstimate {
        bits: pooled,
        std_err: (var / MI_BLOCKS as f64).sqrt(),
    })
}

/// Mutual-information estimate between the first two users.
pub fn estimate_pair_mi(cfg: &NetworkConfig, shots: usize, seed: u64) -> Result<MiEstimate> {
    estimate_pair_mi_between(cfg, shots, seed, 0, 1)
}

/// Fits the scaling exponent of the covariance deviation against shot count:
/// for each level the max-abs deviation is averaged geometrically over
/// `reps` independent seeds, then a least-squares line through
/// `log10(dev) ~ slope * log10(shots)` gives the exponent (expected -0.5).
pub fn convergence_slope(
    cfg: &NetworkConfig,
    shot_levels: &[usize],
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if shot_levels.len() < 2 {
        return Err(Error::Empty("need at least two shot levels".into()));
    }
    if reps == 0 {
        return Err(Error::Empty("need at least one repetition".into()));
    }
    let mut xs = Vec::with_capacity(shot_levels.len());
    let mut ys = Vec::with_capacity(shot_levels.len());
    for (li, &shots) in shot_levels.iter().enumerate() {
        let mut log_sum = 0.0;
        for r in 0..reps {
            let s = seed
                .wrapping_add(7919 * (li * reps + r) as u64)
                .wrapping_add(1);
            let stats = verify_conditional_cm(cfg, shots, s)?;
            log_sum += stats.max_abs_dev.log10();
        }
        xs.push((shots as f64).log10());
        ys.push(log_sum / reps as f64);
    }
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::link_params;
    use crate::network::{pair_blocks, NetworkConfig};
    use crate::rates;

    fn cfg(n: usize, mu: f64, eta: f64, nbar: f64) -> NetworkConfig {
        NetworkConfig::new(n, link_params(mu, eta, nbar).unwrap()).unwrap()
    }

    #[test]
    fn test_fixed_seed_reproduces_bitwise() {
        let c = cfg(3, 20.0, 0.8, 0.01);
        let a = sample_protocol(&c, 5000, 42).unwrap();
        let b = sample_protocol(&c, 5000, 42).unwrap();
        assert_eq!(a.gamma, b.gamma);
        assert_eq!(a.beta, b.beta);
        let other = sample_protocol(&c, 5000, 43).unwrap();
        assert_ne!(a.gamma, other.gamma);
    }

    #[test]
    fn test_parallel_and_sequential_agree_bitwise() {
        let c = cfg(2, 8.0, 0.7, 0.1);
        // spans several chunks
        let par = sample_protocol_with(&c, 40_000, 7, exec::Mode::Auto).unwrap();
        let seq = sample_protocol_with(&c, 40_000, 7, exec::Mode::Sequential).unwrap();
        assert_eq!(par.gamma, seq.gamma);
        assert_eq!(par.beta, seq.beta);
    }

    #[test]
    fn test_zero_shots_rejected() {
        assert!(sample_protocol(&cfg(2, 5.0, 0.9, 0.0), 0, 1).is_err());
    }

    #[test]
    fn test_no_modulation_gamma_is_vacuum_level() {
        // mu = 1, nbar = 0: the relay sees vacuum through the cascade
        let c = cfg(3, 1.0, 0.6, 0.0);
        let run = sample_protocol(&c, 200_000, 3).unwrap();
        let n = c.n_users;
        let mut var = vec![0.0; n];
        let mut cross = 0.0;
        for s in 0..run.shots {
            let g = run.gamma_row(s);
            for k in 0..n {
                var[k] += g[k] * g[k];
            }
            cross += g[0] * g[1];
        }
        for v in &mut var {
            *v /= run.shots as f64;
        }
        cross /= run.shots as f64;
        let se = (2.0 / run.shots as f64).sqrt();
        for v in var {
            assert!((v - 1.0).abs() < 5.0 * se, "variance {v}");
        }
        assert!(cross.abs() < 5.0 * (1.0 / run.shots as f64).sqrt());
    }

    #[test]
    fn test_conditional_covariance_matches_analytic() {
        let stats = verify_conditional_cm(&cfg(3, 20.0, 0.8, 0.01), 200_000, 5).unwrap();
        assert!(
            stats.max_dev_in_se < 5.0,
            "max deviation {} standard errors",
            stats.max_dev_in_se
        );
        // off-diagonal q-q residual covariance ~ z^2/(N x)
        let b = pair_blocks(&cfg(3, 20.0, 0.8, 0.01));
        let emp = stats.empirical_cov[(0, 1)];
        assert!(
            (emp - b.gamma).abs() < 5.0 * stats.std_errors[(0, 1)],
            "gamma {emp} vs {}",
            b.gamma
        );
    }

    #[test]
    fn test_epr_limit_sum_p_variance() {
        // eta = 1, mu large: Var(sum p residual) ~ N/mu
        let c = cfg(3, 1e3, 1.0, 0.0);
        let stats = verify_conditional_cm(&c, 150_000, 11).unwrap();
        let n = 3;
        let mut var_sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                // subtract heterodyne vacuum on the diagonal
                var_sum += stats.empirical_cov[(n + i, n + j)]
                    - if i == j { 1.0 } else { 0.0 };
            }
        }
        let expect = n as f64 / 1e3;
        assert!(
            (var_sum - expect).abs() < 0.05,
            "Var(sum p) = {var_sum}, expected ~{expect}"
        );
    }

    #[test]
    fn test_regression_residuals_orthogonal_to_gamma() {
        let c = cfg(2, 10.0, 0.75, 0.05);
        let run = sample_protocol(&c, 30_000, 9).unwrap();
        let total = accumulate(&run)
            .into_iter()
            .fold(SuffStats::zero(2, 4), |acc, st| acc.merge(&st));
        let (_, map) = total.conditional().unwrap();
        let (cgg, cgb, _) = total.covariances();
        // in-sample OLS residual cross-covariance vanishes identically
        let cross = cgb - cgg * map;
        let max = cross.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(max < 1e-10, "residual-gamma covariance {max}");
    }

    #[test]
    fn test_too_few_shots_for_regression() {
        assert!(verify_conditional_cm(&cfg(3, 5.0, 0.9, 0.0), 20, 1).is_err());
    }

    #[test]
    fn test_pair_mi_matches_analytic() {
        let c = cfg(2, 20.0, 0.9, 0.0);
        let est = estimate_pair_mi(&c, 1_000_000, 13).unwrap();
        let analytic = rates::conferencing_mi(&c);
        assert!(
            (est.bits - analytic).abs() <= 3.0 * est.std_err,
            "MC {} +- {} vs analytic {}",
            est.bits,
            est.std_err,
            analytic
        );
    }

    #[test]
    fn test_pair_mi_without_modulation_is_noise_level() {
        let est = estimate_pair_mi(&cfg(2, 1.0, 0.8, 0.0), 100_000, 21).unwrap();
        assert!(est.bits.abs() < 5.0 * est.std_err.max(1e-4), "{est:?}");
    }

    #[test]
    fn test_pair_mi_symmetric_under_swap() {
        let c = cfg(3, 15.0, 0.85, 0.02);
        let ij = estimate_pair_mi_between(&c, 60_000, 17, 0, 1).unwrap();
        let ji = estimate_pair_mi_between(&c, 60_000, 17, 1, 0).unwrap();
        assert!((ij.bits - ji.bits).abs() < 1e-12);
    }

    #[test]
    fn test_convergence_exponent_is_half() {
        let c = cfg(2, 10.0, 0.8, 0.05);
        let slope = convergence_slope(&c, &[10_000, 100_000], 3, 100).unwrap();
        assert!(
            (-0.85..=-0.15).contains(&slope),
            "slope {slope} far from -0.5"
        );
    }
}

//! Dense symplectic linear algebra for zero-mean Gaussian states.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * shot-noise units: the vacuum quadrature variance is 1, so a two-mode
//!   squeezed vacuum has diagonal `mu >= 1`;
//! * quadrature ordering is blockwise, `(q_1..q_m, p_1..p_m)`; the
//!   interleaved ordering `(q_1, p_1, ..)` is supported at the boundary via
//!   [`CovMatrix::from_interleaved`] / [`CovMatrix::to_interleaved`];
//! * all entropies are in bits (base-2 logarithms).
//!
//! Measurement conditioning follows the generalized Schur complement: for a
//! homodyne of one quadrature the measured block is projected and
//! pseudo-inverted, for a heterodyne the measured mode's block is augmented
//! by one unit of vacuum before inversion.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Absolute tolerance for the symmetry invariant of covariance matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Symplectic eigenvalues within this band below 1 are clamped to 1.
pub const EIGEN_CLAMP_TOL: f64 = 1e-9;
/// Symplectic eigenvalues below `1 - EIGEN_HARD_TOL` are a hard error.
pub const EIGEN_HARD_TOL: f64 = 1e-6;
/// Tolerance for the symplectic condition `S Omega S^T = Omega`.
pub const SYMPLECTIC_TOL: f64 = 1e-10;

/// A single quadrature of a bosonic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Q,
    P,
}

/// The standard symplectic form for `m` modes in `(q.., p..)` ordering.
fn symplectic_form(m: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        omega[(i, m + i)] = 1.0;
        omega[(m + i, i)] = -1.0;
    }
    omega
}

/// Binary entropy of a thermal symplectic eigenvalue, in bits.
///
/// `h(x) = ((x+1)/2) log2((x+1)/2) - ((x-1)/2) log2((x-1)/2)`, with
/// `h(1) = 0`. Values within `1e-9` below 1 clamp to 1; anything lower is a
/// domain error.
pub fn entropy_h(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 1.0 - EIGEN_CLAMP_TOL {
        return Err(Error::Domain(format!("entropy argument {x} below 1")));
    }
    let x = x.max(1.0);
    if x == 1.0 {
        return Ok(0.0);
    }
    let a = (x + 1.0) / 2.0;
    let b = (x - 1.0) / 2.0;
    Ok(a * a.log2() - b * b.log2())
}

/// Channel-dressed covariance entries of one star link.
///
/// For a thermal-loss channel of transmissivity `eta` and mean thermal photon
/// number `nbar` acting on half of a TMSV of variance `mu`:
/// `x = eta*mu + (1-eta)*omega`, `y = mu`, `z = sqrt(eta*(mu^2-1))` with
/// `omega = 2*nbar + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub mu: f64,
    pub eta: f64,
    pub nbar: f64,
    pub omega: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl LinkParams {
    /// The conditional variance `y - z^2/x`, evaluated through the identity
    /// `x y - z^2 = (1 - eta) omega mu + eta`.
    ///
    /// The direct subtraction loses all precision near `eta = 1` at large
    /// `mu`, where the value approaches `1/mu`; this form is cancellation
    /// free.
    pub fn conditional_y(&self) -> f64 {
        ((1.0 - self.eta) * self.omega * self.mu + self.eta) / self.x
    }
}

/// Builds [`LinkParams`], validating `mu >= 1`, `0 < eta <= 1`, `nbar >= 0`.
pub fn link_params(mu: f64, eta: f64, nbar: f64) -> Result<LinkParams> {
    if !mu.is_finite() || mu < 1.0 {
        return Err(Error::InvalidModulation(mu));
    }
    if !eta.is_finite() || eta <= 0.0 || eta > 1.0 {
        return Err(Error::Domain(format!("eta must be in (0, 1], got {eta}")));
    }
    if !nbar.is_finite() || nbar < 0.0 {
        return Err(Error::Domain(format!("nbar must be >= 0, got {nbar}")));
    }
    let omega = 2.0 * nbar + 1.0;
    Ok(LinkParams {
        mu,
        eta,
        nbar,
        omega,
        x: eta * mu + (1.0 - eta) * omega,
        y: mu,
        z: (eta * (mu * mu - 1.0)).sqrt(),
    })
}

/// Covariance matrix of a zero-mean `m`-mode Gaussian state in
/// `(q_1..q_m, p_1..p_m)` ordering.
///
/// Construction validates symmetry (to `1e-12`) and physicality (every
/// symplectic eigenvalue at least `1 - 1e-6`, clamped to 1 within `1e-9`).
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    modes: usize,
    mat: DMatrix<f64>,
}

impl CovMatrix {
    /// Validates and wraps a `2m x 2m` matrix given in `(q.., p..)` ordering.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        let (r, c) = mat.shape();
        if r != c || r == 0 || r % 2 != 0 {
            return Err(Error::Dimension(format!(
                "covariance matrix must be square with even dimension, got {r}x{c}"
            )));
        }
        let mut asym: f64 = 0.0;
        for i in 0..r {
            for j in (i + 1)..r {
                asym = asym.max((mat[(i, j)] - mat[(j, i)]).abs());
            }
        }
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        // canonicalize away sub-tolerance asymmetry from accumulated rounding
        let sym = (&mat + mat.transpose()) * 0.5;
        let cm = CovMatrix {
            modes: r / 2,
            mat: sym,
        };
        cm.symplectic_spectrum()?;
        Ok(cm)
    }

    /// Builds from the interleaved ordering `(q_1, p_1, q_2, p_2, ..)`.
    pub fn from_interleaved(mat: DMatrix<f64>) -> Result<Self> {
        let n = mat.nrows();
        if n % 2 != 0 || n != mat.ncols() {
            return Err(Error::Dimension(format!(
                "interleaved matrix must be square with even dimension, got {n}x{}",
                mat.ncols()
            )));
        }
        let m = n / 2;
        let perm = |i: usize| if i % 2 == 0 { i / 2 } else { m + i / 2 };
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(perm(i), perm(j))] = mat[(i, j)];
            }
        }
        CovMatrix::new(out)
    }

    /// Returns the matrix in interleaved ordering `(q_1, p_1, q_2, p_2, ..)`.
    pub fn to_interleaved(&self) -> DMatrix<f64> {
        let m = self.modes;
        let n = 2 * m;
        let perm = |i: usize| if i % 2 == 0 { i / 2 } else { m + i / 2 };
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self.mat[(perm(i), perm(j))];
            }
        }
        out
    }

    /// Vacuum state of `m` modes (identity matrix).
    pub fn vacuum(m: usize) -> Self {
        CovMatrix {
            modes: m,
            mat: DMatrix::identity(2 * m, 2 * m),
        }
    }

    /// Product of thermal states with the given quadrature variances.
    pub fn thermal(variances: &[f64]) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::Empty("thermal state needs at least one mode".into()));
        }
        let m = variances.len();
        let mut mat = DMatrix::zeros(2 * m, 2 * m);
        for (i, &v) in variances.iter().enumerate() {
            mat[(i, i)] = v;
            mat[(m + i, m + i)] = v;
        }
        CovMatrix::new(mat)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Entry in `(q.., p..)` ordering.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    /// Largest absolute entry-wise difference to another covariance matrix.
    pub fn max_abs_diff(&self, other: &CovMatrix) -> f64 {
        assert_eq!(self.modes, other.modes, "mode count mismatch");
        let mut d: f64 = 0.0;
        for i in 0..2 * self.modes {
            for j in 0..2 * self.modes {
                d = d.max((self.mat[(i, j)] - other.mat[(i, j)]).abs());
            }
        }
        d
    }

    /// Tensor product, appending the modes of `other`.
    pub fn tensor(&self, other: &CovMatrix) -> CovMatrix {
        let (ma, mb) = (self.modes, other.modes);
        let m = ma + mb;
        let mut mat = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..2 * ma {
            for j in 0..2 * ma {
                let (bi, bj) = (i % ma, j % ma);
                let (qi, qj) = (i / ma, j / ma);
                mat[(qi * m + bi, qj * m + bj)] = self.mat[(i, j)];
            }
        }
        for i in 0..2 * mb {
            for j in 0..2 * mb {
                let (bi, bj) = (i % mb, j % mb);
                let (qi, qj) = (i / mb, j / mb);
                mat[(qi * m + ma + bi, qj * m + ma + bj)] = other.mat[(i, j)];
            }
        }
        CovMatrix { modes: m, mat }
    }

    /// Reduced state over the listed modes, in the listed order.
    pub fn reduced(&self, keep: &[usize]) -> Result<CovMatrix> {
        if keep.is_empty() {
            return Err(Error::Empty("cannot reduce to zero modes".into()));
        }
        for &k in keep {
            if k >= self.modes {
                return Err(Error::Dimension(format!(
                    "mode index {k} out of range for {} modes",
                    self.modes
                )));
            }
        }
        let m = keep.len();
        let mut mat = DMatrix::zeros(2 * m, 2 * m);
        let full = self.modes;
        let map = |slot: usize, keep: &[usize]| -> usize {
            if slot < m {
                keep[slot]
            } else {
                full + keep[slot - m]
            }
        };
        for i in 0..2 * m {
            for j in 0..2 * m {
                mat[(i, j)] = self.mat[(map(i, keep), map(j, keep))];
            }
        }
        Ok(CovMatrix { modes: m, mat })
    }

    /// Relabels modes: new mode `i` is old mode `perm[i]`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<CovMatrix> {
        if perm.len() != self.modes {
            return Err(Error::Dimension(format!(
                "permutation length {} != {} modes",
                perm.len(),
                self.modes
            )));
        }
        let mut seen = vec![false; self.modes];
        for &p in perm {
            if p >= self.modes || seen[p] {
                return Err(Error::Domain(format!("invalid mode permutation {perm:?}")));
            }
            seen[p] = true;
        }
        self.reduced(perm)
    }

    /// Congruence `S V S^T` by a symplectic transformation.
    pub fn apply_symplectic(&self, s: &SymplecticMatrix) -> Result<CovMatrix> {
        if s.mat.nrows() != 2 * self.modes {
            return Err(Error::Dimension(format!(
                "symplectic is {}x{}, state has {} modes",
                s.mat.nrows(),
                s.mat.ncols(),
                self.modes
            )));
        }
        CovMatrix::new(&s.mat * &self.mat * s.mat.transpose())
    }

    /// Conditions on a homodyne measurement of one quadrature of `mode` and
    /// removes that mode.
    ///
    /// Uses the Schur complement with the pseudo-inverse of the projected
    /// measured block, which covers both quadratures uniformly.
    pub fn homodyne(&self, mode: usize, quad: Quadrature) -> Result<CovMatrix> {
        self.check_measured_mode(mode)?;
        let m = self.modes;
        let idx = match quad {
            Quadrature::Q => mode,
            Quadrature::P => m + mode,
        };
        let v = self.mat[(idx, idx)];
        let pinv = if v.abs() < 1e-12 { 0.0 } else { 1.0 / v };
        let keep = self.keep_indices(mode);
        let n = keep.len();
        let mut out = DMatrix::zeros(n, n);
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                out[(a, b)] = self.mat[(i, j)] - self.mat[(i, idx)] * pinv * self.mat[(idx, j)];
            }
        }
        CovMatrix::new(out)
    }

    /// Conditions on a heterodyne measurement of `mode` and removes it:
    /// `V_rest - C (V_mode + I)^-1 C^T`.
    pub fn heterodyne(&self, mode: usize) -> Result<CovMatrix> {
        self.check_measured_mode(mode)?;
        let m = self.modes;
        let (qi, pi) = (mode, m + mode);
        // 2x2 inverse of the vacuum-augmented measured block
        let a = self.mat[(qi, qi)] + 1.0;
        let b = self.mat[(qi, pi)];
        let d = self.mat[(pi, pi)] + 1.0;
        let det = a * d - b * b;
        if det <= 0.0 {
            return Err(Error::Unphysical(det));
        }
        let (ia, ib, id) = (d / det, -b / det, a / det);
        let keep = self.keep_indices(mode);
        let n = keep.len();
        let mut out = DMatrix::zeros(n, n);
        for (r, &i) in keep.iter().enumerate() {
            let (cq, cp) = (self.mat[(i, qi)], self.mat[(i, pi)]);
            let (wq, wp) = (cq * ia + cp * ib, cq * ib + cp * id);
            for (c, &j) in keep.iter().enumerate() {
                out[(r, c)] = self.mat[(i, j)] - wq * self.mat[(qi, j)] - wp * self.mat[(pi, j)];
            }
        }
        CovMatrix::new(out)
    }

    fn check_measured_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes {
            return Err(Error::Dimension(format!(
                "mode index {mode} out of range for {} modes",
                self.modes
            )));
        }
        if self.modes < 2 {
            return Err(Error::Dimension(
                "cannot condition away the only mode".into(),
            ));
        }
        Ok(())
    }

    fn keep_indices(&self, dropped_mode: usize) -> Vec<usize> {
        let m = self.modes;
        (0..m)
            .filter(|&k| k != dropped_mode)
            .chain((0..m).filter(|&k| k != dropped_mode).map(|k| m + k))
            .collect()
    }

    /// Symplectic (Williamson) spectrum, sorted descending.
    ///
    /// Computed as the paired singular values of `V^(1/2) Omega V^(1/2)`,
    /// which is real antisymmetric for symmetric positive semidefinite `V`.
    /// Eigenvalues within `1e-9` below 1 clamp to 1; below `1 - 1e-6` the
    /// state is reported unphysical.
    pub fn symplectic_spectrum(&self) -> Result<Vec<f64>> {
        let m = self.modes;
        let se = self.mat.clone().symmetric_eigen();
        let mut roots = se.eigenvalues.clone();
        for v in roots.iter_mut() {
            if *v < -1e-9 {
                return Err(Error::Unphysical(*v));
            }
            *v = v.max(0.0).sqrt();
        }
        let sqrt_v = &se.eigenvectors * DMatrix::from_diagonal(&roots) * se.eigenvectors.transpose();
        let a = &sqrt_v * symplectic_form(m) * &sqrt_v;
        let sv: DVector<f64> = a.svd(false, false).singular_values;
        let mut vals: Vec<f64> = sv.iter().cloned().collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut spectrum = Vec::with_capacity(m);
        for k in 0..m {
            // singular values come in near-identical pairs, one per mode
            let nu = 0.5 * (vals[2 * k] + vals[2 * k + 1]);
            if nu < 1.0 - EIGEN_HARD_TOL {
                return Err(Error::Unphysical(nu));
            }
            spectrum.push(if nu < 1.0 && 1.0 - nu <= EIGEN_CLAMP_TOL {
                1.0
            } else {
                nu
            });
        }
        Ok(spectrum)
    }

    /// Von Neumann entropy in bits: the sum of `h` over the symplectic
    /// spectrum.
    pub fn von_neumann_entropy(&self) -> Result<f64> {
        let mut s = 0.0;
        for nu in self.symplectic_spectrum()? {
            s += entropy_h(nu)?;
        }
        Ok(s)
    }
}

/// A real `2m x 2m` matrix satisfying `S Omega S^T = Omega` in the
/// `(q.., p..)` ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    mat: DMatrix<f64>,
}

impl SymplecticMatrix {
    /// Validates the symplectic condition to `1e-10`.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        let (r, c) = mat.shape();
        if r != c || r == 0 || r % 2 != 0 {
            return Err(Error::Dimension(format!(
                "symplectic matrix must be square with even dimension, got {r}x{c}"
            )));
        }
        let m = r / 2;
        let omega = symplectic_form(m);
        let resid = &mat * &omega * mat.transpose() - &omega;
        let dev = resid.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if dev > SYMPLECTIC_TOL {
            return Err(Error::NotSymplectic(dev));
        }
        Ok(SymplecticMatrix { mat })
    }

    pub fn identity(m: usize) -> Self {
        SymplecticMatrix {
            mat: DMatrix::identity(2 * m, 2 * m),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Passive transformation acting as the orthogonal `r` on the q block and
    /// again on the p block.
    pub fn from_orthogonal(r: &DMatrix<f64>) -> Result<Self> {
        let n = r.nrows();
        if n != r.ncols() {
            return Err(Error::Dimension("orthogonal block must be square".into()));
        }
        let mut mat = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                mat[(i, j)] = r[(i, j)];
                mat[(n + i, n + j)] = r[(i, j)];
            }
        }
        SymplecticMatrix::new(mat)
    }

    /// Embeds the orthogonal `r` on the contiguous mode range starting at
    /// `offset` of a `total`-mode system, identity elsewhere.
    pub fn embed_orthogonal(r: &DMatrix<f64>, total: usize, offset: usize) -> Result<Self> {
        let k = r.nrows();
        if k != r.ncols() {
            return Err(Error::Dimension("orthogonal block must be square".into()));
        }
        if offset + k > total {
            return Err(Error::Dimension(format!(
                "block of {k} modes at offset {offset} exceeds {total} modes"
            )));
        }
        let mut mat = DMatrix::identity(2 * total, 2 * total);
        for i in 0..k {
            for j in 0..k {
                mat[(offset + i, offset + j)] = r[(i, j)];
                mat[(total + offset + i, total + offset + j)] = r[(i, j)];
            }
        }
        SymplecticMatrix::new(mat)
    }

    /// Beam splitter of transmissivity `t` between modes `i` and `j`.
    pub fn beamsplitter(total: usize, i: usize, j: usize, t: f64) -> Result<Self> {
        if i >= total || j >= total || i == j {
            return Err(Error::Dimension(format!(
                "invalid beamsplitter modes ({i}, {j}) for {total} modes"
            )));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!(
                "transmissivity must be in [0, 1], got {t}"
            )));
        }
        let (ct, st) = (t.sqrt(), (1.0 - t).sqrt());
        let mut r = DMatrix::identity(total, total);
        r[(i, i)] = ct;
        r[(j, j)] = ct;
        r[(i, j)] = st;
        r[(j, i)] = -st;
        SymplecticMatrix::from_orthogonal(&r)
    }

    /// Mode relabeling: new mode `i` is old mode `perm[i]`.
    pub fn mode_permutation(perm: &[usize]) -> Result<Self> {
        let m = perm.len();
        let mut r = DMatrix::zeros(m, m);
        let mut seen = vec![false; m];
        for (i, &p) in perm.iter().enumerate() {
            if p >= m || seen[p] {
                return Err(Error::Domain(format!("invalid mode permutation {perm:?}")));
            }
            seen[p] = true;
            r[(i, p)] = 1.0;
        }
        SymplecticMatrix::from_orthogonal(&r)
    }

    /// Local single-mode squeezers `diag(t_i)` on q and `diag(1/t_i)` on p.
    pub fn local_squeeze(factors: &[f64]) -> Result<Self> {
        let m = factors.len();
        if m == 0 {
            return Err(Error::Empty("no squeeze factors".into()));
        }
        let mut mat = DMatrix::zeros(2 * m, 2 * m);
        for (i, &t) in factors.iter().enumerate() {
            if t <= 0.0 || !t.is_finite() {
                return Err(Error::Domain(format!("squeeze factor must be > 0, got {t}")));
            }
            mat[(i, i)] = t;
            mat[(m + i, m + i)] = 1.0 / t;
        }
        SymplecticMatrix::new(mat)
    }
}

/// The cascaded beam-splitter interferometer of the multipartite Bell
/// detection, as an `N x N` orthogonal matrix acting identically on the q and
/// p blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferometerSpec {
    n_modes: usize,
    r: DMatrix<f64>,
}

impl InterferometerSpec {
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn r_matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// The symplectic `R (+) R`.
    pub fn symplectic(&self) -> SymplecticMatrix {
        SymplecticMatrix::from_orthogonal(&self.r).expect("cascade matrix is orthogonal")
    }

    /// The symplectic of the conjugate interferometer, `R^T (+) R^T`.
    pub fn conjugate_symplectic(&self) -> SymplecticMatrix {
        SymplecticMatrix::from_orthogonal(&self.r.transpose()).expect("transpose is orthogonal")
    }
}

/// Builds the cascade of beam splitters with transmissivities `T_k = 1 - 1/k`
/// for `k = 2..N`.
///
/// Row 1 is the balanced sum `(1/sqrt(N))(q_1 + .. + q_N)`; row `k >= 2` is
/// the difference mode `sqrt(1 - 1/k) (q_k - (1/(k-1)) sum_{i<k} q_i)`, i.e.
/// `R_kk = sqrt(1 - 1/k)` and `R_kj = -1/sqrt(k(k-1))` for `j < k`.
pub fn cascade_interferometer(n: usize) -> Result<InterferometerSpec> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "interferometer needs at least 2 modes, got {n}"
        )));
    }
    let mut r = DMatrix::zeros(n, n);
    let root_n = (n as f64).sqrt();
    for j in 0..n {
        r[(0, j)] = 1.0 / root_n;
    }
    for k in 2..=n {
        let kf = k as f64;
        r[(k - 1, k - 1)] = (1.0 - 1.0 / kf).sqrt();
        let off = -1.0 / (kf * (kf - 1.0)).sqrt();
        for j in 0..k - 1 {
            r[(k - 1, j)] = off;
        }
    }
    let resid = &r * r.transpose() - DMatrix::identity(n, n);
    let dev = resid.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if dev > SYMMETRY_TOL {
        return Err(Error::Domain(format!(
            "cascade matrix failed orthogonality: {dev:.3e}"
        )));
    }
    Ok(InterferometerSpec { n_modes: n, r })
}

/// Two-mode squeezed vacuum: diagonal blocks `mu I`, off-diagonal blocks
/// `sqrt(mu^2 - 1) Z` with `Z = diag(1, -1)`.
pub fn make_tmsv(mu: f64) -> Result<CovMatrix> {
    if !mu.is_finite() || mu < 1.0 {
        return Err(Error::InvalidModulation(mu));
    }
    let c = (mu * mu - 1.0).sqrt();
    let mut mat = DMatrix::zeros(4, 4);
    // (q_A, q_B, p_A, p_B)
    mat[(0, 0)] = mu;
    mat[(1, 1)] = mu;
    mat[(2, 2)] = mu;
    mat[(3, 3)] = mu;
    mat[(0, 1)] = c;
    mat[(1, 0)] = c;
    mat[(2, 3)] = -c;
    mat[(3, 2)] = -c;
    CovMatrix::new(mat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    #[test]
    fn test_tmsv_vacuum_limit() {
        let v = make_tmsv(1.0).unwrap();
        assert_eq!(v.max_abs_diff(&CovMatrix::vacuum(2)), 0.0);
    }

    #[test]
    fn test_tmsv_off_diagonal() {
        let v = make_tmsv(2.0).unwrap();
        assert_relative_eq!(v.entry(0, 1), 3.0f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(v.entry(2, 3), -(3.0f64.sqrt()), max_relative = 1e-15);
    }

    #[test]
    fn test_tmsv_is_pure() {
        for mu in [1.0, 2.0, 17.5, 1e3] {
            let spec = make_tmsv(mu).unwrap().symplectic_spectrum().unwrap();
            for nu in spec {
                assert_close(nu, 1.0, 1e-8);
            }
        }
    }

    #[test]
    fn test_tmsv_rejects_sub_vacuum() {
        assert!(matches!(
            make_tmsv(0.9),
            Err(Error::InvalidModulation(_))
        ));
    }

    #[test]
    fn test_link_params_substitution() {
        let l = link_params(2.0, 0.5, 0.0).unwrap();
        assert_relative_eq!(l.x, 1.5, max_relative = 1e-15);
        assert_relative_eq!(l.y, 2.0, max_relative = 1e-15);
        assert_relative_eq!(l.z, 1.5f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(l.omega, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn test_link_params_lossless() {
        let l = link_params(7.0, 1.0, 0.0).unwrap();
        assert_eq!(l.x, 7.0);
        assert_relative_eq!(l.z, 48.0f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn test_link_params_no_modulation() {
        let l = link_params(1.0, 0.7, 0.05).unwrap();
        assert_eq!(l.z, 0.0);
        assert_relative_eq!(l.x, 0.7 + 0.3 * 1.1, max_relative = 1e-14);
    }

    #[test]
    fn test_link_params_rejects_out_of_range() {
        assert!(link_params(0.5, 0.5, 0.0).is_err());
        assert!(link_params(2.0, 0.0, 0.0).is_err());
        assert!(link_params(2.0, 1.1, 0.0).is_err());
        assert!(link_params(2.0, 0.5, -0.1).is_err());
    }

    #[test]
    fn test_cascade_two_modes() {
        let spec = cascade_interferometer(2).unwrap();
        let s = 0.5f64.sqrt();
        let r = spec.r_matrix();
        assert_relative_eq!(r[(0, 0)], s, max_relative = 1e-15);
        assert_relative_eq!(r[(0, 1)], s, max_relative = 1e-15);
        assert_relative_eq!(r[(1, 0)], -s, max_relative = 1e-15);
        assert_relative_eq!(r[(1, 1)], s, max_relative = 1e-15);
    }

    #[test]
    fn test_cascade_difference_rows_kill_symmetric_vector() {
        let spec = cascade_interferometer(3).unwrap();
        for k in 1..3 {
            let sum: f64 = (0..3).map(|j| spec.r_matrix()[(k, j)]).sum();
            assert_close(sum, 0.0, 1e-15);
        }
    }

    #[test]
    fn test_cascade_orthogonality() {
        let spec = cascade_interferometer(10).unwrap();
        let r = spec.r_matrix();
        let resid = r * r.transpose() - DMatrix::identity(10, 10);
        let dev = resid.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(dev <= 1e-12, "orthogonality residual {dev:.3e}");
        for j in 0..10 {
            assert_relative_eq!(r[(0, j)], 0.1f64.sqrt(), max_relative = 1e-14);
        }
    }

    #[test]
    fn test_cascade_rejects_single_mode() {
        assert!(cascade_interferometer(1).is_err());
    }

    #[test]
    fn test_apply_symplectic_identity() {
        let v = make_tmsv(3.0).unwrap();
        let out = v.apply_symplectic(&SymplecticMatrix::identity(2)).unwrap();
        assert_eq!(out.max_abs_diff(&v), 0.0);
    }

    #[test]
    fn test_beamsplitter_preserves_vacuum() {
        let v = CovMatrix::vacuum(2);
        let bs = SymplecticMatrix::beamsplitter(2, 0, 1, 0.3).unwrap();
        let out = v.apply_symplectic(&bs).unwrap();
        assert!(out.max_abs_diff(&CovMatrix::vacuum(2)) < 1e-14);
    }

    #[test]
    fn test_symplectic_preserves_spectrum() {
        let v = make_tmsv(4.0)
            .unwrap()
            .tensor(&CovMatrix::thermal(&[2.5]).unwrap());
        let bs = SymplecticMatrix::beamsplitter(3, 0, 2, 0.7).unwrap();
        let sq = SymplecticMatrix::local_squeeze(&[1.3, 0.6, 2.0]).unwrap();
        let out = v
            .apply_symplectic(&bs)
            .unwrap()
            .apply_symplectic(&sq)
            .unwrap();
        let mut a = v.symplectic_spectrum().unwrap();
        let mut b = out.symplectic_spectrum().unwrap();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert_close(*x, *y, 1e-9);
        }
    }

    #[test]
    fn test_apply_symplectic_dimension_mismatch() {
        let v = make_tmsv(2.0).unwrap();
        assert!(v.apply_symplectic(&SymplecticMatrix::identity(3)).is_err());
    }

    /// Post-channel two-mode state in (q_A, q_B, p_A, p_B) ordering.
    fn link_pair_cm(l: &LinkParams) -> CovMatrix {
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = l.x;
        m[(1, 1)] = l.y;
        m[(2, 2)] = l.x;
        m[(3, 3)] = l.y;
        m[(0, 1)] = l.z;
        m[(1, 0)] = l.z;
        m[(2, 3)] = -l.z;
        m[(3, 2)] = -l.z;
        CovMatrix::new(m).unwrap()
    }

    #[test]
    fn test_homodyne_q_on_link_pair() {
        let l = link_params(5.0, 0.6, 0.1).unwrap();
        let out = link_pair_cm(&l).homodyne(0, Quadrature::Q).unwrap();
        assert_relative_eq!(out.entry(0, 0), l.y - l.z * l.z / l.x, max_relative = 1e-14);
        assert_relative_eq!(out.entry(1, 1), l.y, max_relative = 1e-14);
        assert_close(out.entry(0, 1), 0.0, 1e-14);
    }

    #[test]
    fn test_homodyne_p_on_link_pair() {
        let l = link_params(5.0, 0.6, 0.1).unwrap();
        let out = link_pair_cm(&l).homodyne(0, Quadrature::P).unwrap();
        assert_relative_eq!(out.entry(0, 0), l.y, max_relative = 1e-14);
        assert_relative_eq!(out.entry(1, 1), l.y - l.z * l.z / l.x, max_relative = 1e-14);
    }

    #[test]
    fn test_homodyne_spectator_untouched() {
        let v = make_tmsv(3.0).unwrap().tensor(&CovMatrix::thermal(&[4.0]).unwrap());
        let out = v.homodyne(0, Quadrature::Q).unwrap();
        // spectator thermal mode (now index 1) unchanged
        assert_relative_eq!(out.entry(1, 1), 4.0, max_relative = 1e-14);
        assert_relative_eq!(out.entry(3, 3), 4.0, max_relative = 1e-14);
        assert_close(out.entry(0, 1), 0.0, 1e-14);
    }

    #[test]
    fn test_heterodyne_tmsv_gives_vacuum() {
        // heterodyning one arm of a TMSV prepares a coherent state:
        // mu - (mu^2 - 1)/(mu + 1) = 1 for every mu
        for mu in [1.0, 5.0, 1e4] {
            let out = make_tmsv(mu).unwrap().heterodyne(1).unwrap();
            assert!(out.max_abs_diff(&CovMatrix::vacuum(1)) < 1e-9);
        }
    }

    #[test]
    fn test_heterodyne_matches_block_formula() {
        // Delta - Gamma (Delta + I)^-1 Gamma for a symmetric pair state
        let (dq, dp, g) = (3.0, 5.0, 1.2);
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = dq;
        m[(1, 1)] = dq;
        m[(2, 2)] = dp;
        m[(3, 3)] = dp;
        m[(0, 1)] = g;
        m[(1, 0)] = g;
        m[(2, 3)] = -g;
        m[(3, 2)] = -g;
        let out = CovMatrix::new(m).unwrap().heterodyne(1).unwrap();
        assert_relative_eq!(out.entry(0, 0), dq - g * g / (dq + 1.0), max_relative = 1e-14);
        assert_relative_eq!(out.entry(1, 1), dp - g * g / (dp + 1.0), max_relative = 1e-14);
    }

    #[test]
    fn test_heterodyne_uncorrelated_leaves_rest() {
        let v = CovMatrix::thermal(&[2.0, 3.0]).unwrap();
        let out = v.heterodyne(1).unwrap();
        assert!(out.max_abs_diff(&CovMatrix::thermal(&[2.0]).unwrap()) < 1e-14);
    }

    #[test]
    fn test_spectrum_vacuum_and_thermal() {
        let v = CovMatrix::vacuum(1).symplectic_spectrum().unwrap();
        assert_eq!(v.len(), 1);
        assert_relative_eq!(v[0], 1.0, epsilon = 1e-12);
        let s = CovMatrix::thermal(&[3.7]).unwrap().symplectic_spectrum().unwrap();
        assert_relative_eq!(s[0], 3.7, max_relative = 1e-12);
    }

    #[test]
    fn test_spectrum_rejects_unphysical() {
        let m = DMatrix::from_diagonal_element(2, 2, 0.5);
        assert!(matches!(CovMatrix::new(m), Err(Error::Unphysical(_))));
    }

    #[test]
    fn test_conditioning_commutes_with_spectator_permutation() {
        let l = link_params(6.0, 0.7, 0.2).unwrap();
        let v = link_pair_cm(&l)
            .tensor(&CovMatrix::thermal(&[2.0, 5.0]).unwrap());
        // measure mode 0; spectators are (1, 2, 3)
        let hom_then_perm = v
            .homodyne(0, Quadrature::P)
            .unwrap()
            .permute_modes(&[2, 0, 1])
            .unwrap();
        let perm_then_hom = v
            .permute_modes(&[0, 3, 1, 2])
            .unwrap()
            .homodyne(0, Quadrature::P)
            .unwrap();
        assert!(hom_then_perm.max_abs_diff(&perm_then_hom) < 1e-13);

        let het_then_perm = v.heterodyne(0).unwrap().permute_modes(&[2, 0, 1]).unwrap();
        let perm_then_het = v
            .permute_modes(&[0, 3, 1, 2])
            .unwrap()
            .heterodyne(0)
            .unwrap();
        assert!(het_then_perm.max_abs_diff(&perm_then_het) < 1e-13);
    }

    #[test]
    fn test_entropy_h_values() {
        assert_eq!(entropy_h(1.0).unwrap(), 0.0);
        assert_relative_eq!(entropy_h(3.0).unwrap(), 2.0, max_relative = 1e-14);
        // direct evaluation: 3 log2 3 - 2
        assert_relative_eq!(
            entropy_h(5.0).unwrap(),
            2.7548875021634682,
            epsilon = 1e-12
        );
    }

    #[test]
    fn test_entropy_h_clamps_and_rejects() {
        assert_eq!(entropy_h(1.0 - 5e-10).unwrap(), 0.0);
        assert!(entropy_h(1.0 - 1e-8).is_err());
        assert!(entropy_h(f64::NAN).is_err());
    }

    #[test]
    fn test_entropy_h_strictly_increasing() {
        let mut last = 0.0;
        for i in 1..200 {
            let x = 1.0 + i as f64 * 0.25;
            let h = entropy_h(x).unwrap();
            assert!(h > last, "h({x}) = {h} not > {last}");
            last = h;
        }
    }

    #[test]
    fn test_von_neumann_entropy() {
        assert!(CovMatrix::vacuum(3).von_neumann_entropy().unwrap() < 1e-12);
        let th = CovMatrix::thermal(&[5.0]).unwrap();
        assert_relative_eq!(
            th.von_neumann_entropy().unwrap(),
            entropy_h(5.0).unwrap(),
            max_relative = 1e-11
        );
        // pure TMSV carries no entropy
        assert!(make_tmsv(40.0).unwrap().von_neumann_entropy().unwrap() < 1e-7);
    }

    #[test]
    fn test_interleaved_round_trip() {
        let v = make_tmsv(2.5).unwrap();
        let inter = v.to_interleaved();
        // Eq.-style per-mode 2x2 blocks: q_A p_A q_B p_B
        assert_eq!(inter[(0, 0)], 2.5);
        assert_eq!(inter[(0, 1)], 0.0);
        assert_relative_eq!(inter[(0, 2)], (2.5f64 * 2.5 - 1.0).sqrt(), max_relative = 1e-15);
        let back = CovMatrix::from_interleaved(inter).unwrap();
        assert_eq!(back.max_abs_diff(&v), 0.0);
    }

    #[test]
    fn test_symplectic_validation() {
        let mut bad = DMatrix::identity(4, 4);
        bad[(0, 0)] = 2.0;
        assert!(matches!(
            SymplecticMatrix::new(bad),
            Err(Error::NotSymplectic(_))
        ));
    }

    proptest! {
        #[test]
        fn prop_conditioning_keeps_states_physical(
            mu in 1.0f64..50.0,
            eta in 0.05f64..1.0,
            nbar in 0.0f64..1.0,
            t in 0.05f64..0.95,
        ) {
            let l = link_params(mu, eta, nbar).unwrap();
            let v = link_pair_cm(&l).tensor(&CovMatrix::thermal(&[1.0 + nbar]).unwrap());
            let bs = SymplecticMatrix::beamsplitter(3, 1, 2, t).unwrap();
            let mixed = v.apply_symplectic(&bs).unwrap();
            // constructors validate symmetry and physicality; reaching here is the assertion
            mixed.homodyne(0, Quadrature::Q).unwrap();
            mixed.homodyne(2, Quadrature::P).unwrap();
            mixed.heterodyne(1).unwrap();
        }

        #[test]
        fn prop_entropy_monotone(a in 1.0f64..500.0, d in 1e-6f64..50.0) {
            prop_assert!(entropy_h(a + d).unwrap() > entropy_h(a).unwrap());
        }
    }
}

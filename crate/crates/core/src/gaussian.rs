//! Covariance-matrix description of Gaussian bosonic states.
//!
//! Quadratures are ordered `(x_1, p_1, ..., x_n, p_n)` with
//! `x = (a + a†)/2` and `p = (a - a†)/(2i)`, so `[x, p] = i/2` and the
//! vacuum has variance 1/4 in every quadrature. The rotated quadrature
//! measured by a homodyne detector at local-oscillator phase `θ` is
//! `X(θ) = (a† e^{iθ} + a e^{-iθ})/2 = x cos θ + p sin θ`.
//!
//! Conventions fixed here and relied on everywhere else:
//!
//! * squeezer `S(ζ) = exp[(ζ* a² - ζ a†²)/2]`, `ζ = r e^{iφ}`, maps
//!   `a → a cosh r - a† e^{iφ} sinh r`. The quadrature `X(φ/2)` is squeezed
//!   to `e^{-2r}/4` and `X(φ/2 + π/2)` is stretched to `e^{2r}/4`.
//! * two-mode squeezer `exp[ζ* a b - ζ a† b†]` maps
//!   `a → a cosh r - b† e^{iφ} sinh r` (and symmetrically for `b`).
//! * beamsplitter with mixing angle `t` and relative phase `φ`:
//!   `a → a cos t + b e^{iφ} sin t`, `b → -a e^{-iφ} sin t + b cos t`.
//! * phase shift by `φ`: `a → a e^{iφ}`, so `X_out(θ) = X_in(θ - φ)`.
//!
//! All operations are pure: they borrow a state and return a new one.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, SymmetricEigen};

use crate::error::{check_param, Error, Result};

/// Quadrature variance of the vacuum.
pub const VACUUM_VARIANCE: f64 = 0.25;

/// Complex squeezing parameter `ζ = r e^{iφ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezeParam {
    r: f64,
    phi: f64,
}

impl SqueezeParam {
    pub fn new(r: f64, phi: f64) -> Result<Self> {
        check_param("r", r, r >= 0.0, "squeezing magnitude must be non-negative")?;
        check_param("phi", phi, true, "squeezing phase must be finite")?;
        Ok(Self {
            r,
            phi: normalize_angle(phi),
        })
    }

    /// Squeezer whose minimum quadrature variance is `db` decibels relative
    /// to the vacuum (`db <= 0`).
    pub fn from_squeezing_db(db: f64, phi: f64) -> Result<Self> {
        check_param("squeezing_db", db, db <= 0.0, "squeezing level must be <= 0 dB")?;
        Self::new(-db * std::f64::consts::LN_10 / 20.0, phi)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `-ζ`: same magnitude, phase advanced by π.
    pub fn negated(&self) -> Self {
        Self {
            r: self.r,
            phi: normalize_angle(self.phi + PI),
        }
    }

    /// LO phase at which this squeezer minimises the quadrature variance.
    pub fn squeezed_angle(&self) -> f64 {
        self.phi / 2.0
    }

    /// Squeezing level in dB (non-positive).
    pub fn squeezing_db(&self) -> f64 {
        -20.0 * self.r / std::f64::consts::LN_10
    }
}

/// Maps an angle onto `[0, 2π)`.
pub fn normalize_angle(phi: f64) -> f64 {
    let a = phi.rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// A mixed squeezed state described by its measured squeezing and
/// antisqueezing levels.
///
/// Realised as a pure squeezer followed by a pure-loss channel, which is the
/// unique such decomposition for a given pair of levels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezingLevels {
    pub squeezing_db: f64,
    pub antisqueezing_db: f64,
}

impl SqueezingLevels {
    pub fn new(squeezing_db: f64, antisqueezing_db: f64) -> Result<Self> {
        let levels = Self {
            squeezing_db,
            antisqueezing_db,
        };
        levels.decompose()?;
        Ok(levels)
    }

    /// A pure state: antisqueezing mirrors the squeezing level.
    pub fn pure(squeezing_db: f64) -> Result<Self> {
        Self::new(squeezing_db, -squeezing_db)
    }

    /// Returns `(r, efficiency)` such that squeezing by `r` and then
    /// attenuating with transmission `efficiency` reproduces both levels.
    pub fn decompose(&self) -> Result<(f64, f64)> {
        let sq = self.squeezing_db;
        let anti = self.antisqueezing_db;
        check_param("squeezing_db", sq, sq <= 0.0, "squeezing level must be <= 0 dB")?;
        check_param(
            "antisqueezing_db",
            anti,
            anti >= -sq - 1e-9,
            "antisqueezing must be at least as large as |squeezing| (uncertainty bound)",
        )?;
        if sq == 0.0 {
            if anti.abs() > 1e-12 {
                return Err(Error::InvalidParameter {
                    name: "antisqueezing_db",
                    value: anti,
                    reason: "excess noise without squeezing is not a lossy squeezed state",
                });
            }
            return Ok((0.0, 1.0));
        }
        let below = 1.0 - db_to_ratio(sq);
        let above = db_to_ratio(anti) - 1.0;
        let stretch = (above / below).max(1.0);
        let efficiency = if stretch > 1.0 {
            (above / (stretch - 1.0)).min(1.0)
        } else {
            1.0
        };
        Ok((0.5 * stretch.ln(), efficiency))
    }

    /// Single-mode state with these levels; the squeezed quadrature sits at
    /// LO phase `theta_sq`.
    pub fn single_mode(&self, theta_sq: f64) -> Result<CovarianceState> {
        let (r, eta) = self.decompose()?;
        CovarianceState::vacuum(1)?
            .apply_squeeze(0, SqueezeParam::new(r, 2.0 * theta_sq)?)?
            .apply_loss(0, eta)
    }
}

/// `10^{db/10}`.
pub fn db_to_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Gaussian state of `n` bosonic modes.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl CovarianceState {
    pub fn vacuum(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::NoModes);
        }
        let dim = 2 * n_modes;
        Ok(Self {
            mean: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim) * VACUUM_VARIANCE,
        })
    }

    /// Builds a state from raw moments. The covariance is symmetrised; it is
    /// not checked for physicality (see [`CovarianceState::is_physical`]).
    pub fn from_moments(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Dimension(format!(
                "mean length {dim} is not a positive even number"
            )));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::Dimension(format!(
                "covariance is {}x{}, expected {dim}x{dim}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Dimension("non-finite moment".into()));
        }
        Ok(Self {
            mean,
            cov: symmetrize(cov),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.n_modes() {
            Ok(())
        } else {
            Err(Error::ModeIndex {
                index: mode,
                n_modes: self.n_modes(),
            })
        }
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        self.check_mode(a)?;
        self.check_mode(b)?;
        if a == b {
            return Err(Error::SameMode(a));
        }
        Ok(())
    }

    /// 2x2 covariance block of one mode.
    pub fn mode_cov(&self, mode: usize) -> Result<Matrix2<f64>> {
        self.check_mode(mode)?;
        let i = 2 * mode;
        Ok(self.cov.fixed_view::<2, 2>(i, i).into_owned())
    }

    /// 4x4 covariance of two modes, ordered `(x_a, p_a, x_b, p_b)`.
    pub fn pair_cov(&self, a: usize, b: usize) -> Result<Matrix4<f64>> {
        self.check_pair(a, b)?;
        let idx = [2 * a, 2 * a + 1, 2 * b, 2 * b + 1];
        Ok(Matrix4::from_fn(|r, c| self.cov[(idx[r], idx[c])]))
    }

    /// Cross-covariance block `<Δr_a Δr_bᵀ>` between two modes.
    pub fn cross_cov(&self, a: usize, b: usize) -> Result<Matrix2<f64>> {
        self.check_pair(a, b)?;
        Ok(self.cov.fixed_view::<2, 2>(2 * a, 2 * b).into_owned())
    }

    fn congruence(&self, modes: &[usize], local: &DMatrix<f64>) -> Self {
        let dim = self.mean.len();
        let mut full = DMatrix::<f64>::identity(dim, dim);
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        for (r, &gr) in idx.iter().enumerate() {
            for (c, &gc) in idx.iter().enumerate() {
                full[(gr, gc)] = local[(r, c)];
            }
        }
        let cov = &full * &self.cov * full.transpose();
        Self {
            mean: &full * &self.mean,
            cov: symmetrize(cov),
        }
    }

    pub fn apply_squeeze(&self, mode: usize, zeta: SqueezeParam) -> Result<Self> {
        self.check_mode(mode)?;
        Ok(self.congruence(&[mode], &single_mode_squeezer(zeta)))
    }

    pub fn apply_two_mode_squeeze(
        &self,
        mode_a: usize,
        mode_b: usize,
        zeta: SqueezeParam,
    ) -> Result<Self> {
        self.check_pair(mode_a, mode_b)?;
        Ok(self.congruence(&[mode_a, mode_b], &two_mode_squeezer(zeta)))
    }

    pub fn apply_beamsplitter(
        &self,
        mode_a: usize,
        mode_b: usize,
        mix_angle: f64,
        rel_phase: f64,
    ) -> Result<Self> {
        self.check_pair(mode_a, mode_b)?;
        check_param("mix_angle", mix_angle, true, "must be finite")?;
        check_param("rel_phase", rel_phase, true, "must be finite")?;
        Ok(self.congruence(&[mode_a, mode_b], &beamsplitter(mix_angle, rel_phase)))
    }

    pub fn apply_phase(&self, mode: usize, phi: f64) -> Result<Self> {
        self.check_mode(mode)?;
        check_param("phi", phi, true, "must be finite")?;
        let r = rotation(phi);
        Ok(self.congruence(&[mode], &DMatrix::from_column_slice(2, 2, r.as_slice())))
    }

    /// Pure-loss channel with intensity transmission `eta`.
    pub fn apply_loss(&self, mode: usize, eta: f64) -> Result<Self> {
        self.check_mode(mode)?;
        check_param("eta", eta, (0.0..=1.0).contains(&eta), "transmission must lie in [0, 1]")?;
        let dim = self.mean.len();
        let amp = eta.sqrt();
        let mut scale = DVector::from_element(dim, 1.0);
        scale[2 * mode] = amp;
        scale[2 * mode + 1] = amp;
        let mut cov = self.cov.clone();
        for r in 0..dim {
            for c in 0..dim {
                cov[(r, c)] *= scale[r] * scale[c];
            }
        }
        let added = (1.0 - eta) * VACUUM_VARIANCE;
        cov[(2 * mode, 2 * mode)] += added;
        cov[(2 * mode + 1, 2 * mode + 1)] += added;
        Ok(Self {
            mean: self.mean.component_mul(&scale),
            cov: symmetrize(cov),
        })
    }

    /// Replaces one mode by the vacuum, leaving the others untouched.
    pub fn reset_to_vacuum(&self, mode: usize) -> Result<Self> {
        self.apply_loss(mode, 0.0)
    }

    /// `Var[X(θ)]` of one mode.
    pub fn quadrature_variance(&self, mode: usize, theta: f64) -> Result<f64> {
        let v = self.mode_cov(mode)?;
        let u = nalgebra::Vector2::new(theta.cos(), theta.sin());
        Ok((u.transpose() * v * u)[(0, 0)].max(0.0))
    }

    /// `<X(θ)²>`, i.e. the variance plus the squared mean.
    pub fn quadrature_second_moment(&self, mode: usize, theta: f64) -> Result<f64> {
        let var = self.quadrature_variance(mode, theta)?;
        let m = self.mean[2 * mode] * theta.cos() + self.mean[2 * mode + 1] * theta.sin();
        Ok(var + m * m)
    }

    /// Smallest eigenvalue of the Hermitian matrix `cov + (i/4)Ω`, which is
    /// non-negative exactly for physical states in the vacuum-1/4 convention.
    pub fn physicality_margin(&self) -> f64 {
        let dim = self.mean.len();
        let w = symplectic_form(self.n_modes()) * VACUUM_VARIANCE;
        // Real embedding of V + iW: [[V, -W], [W, V]].
        let mut big = DMatrix::<f64>::zeros(2 * dim, 2 * dim);
        big.view_mut((0, 0), (dim, dim)).copy_from(&self.cov);
        big.view_mut((dim, dim), (dim, dim)).copy_from(&self.cov);
        big.view_mut((0, dim), (dim, dim)).copy_from(&(-&w));
        big.view_mut((dim, 0), (dim, dim)).copy_from(&w);
        SymmetricEigen::new(big)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_physical(&self) -> bool {
        self.physicality_margin() >= -1e-9
    }

    pub fn ensure_physical(&self) -> Result<()> {
        let m = self.physicality_margin();
        if m >= -1e-9 {
            Ok(())
        } else {
            Err(Error::Unphysical(m))
        }
    }

    /// Symplectic eigenvalues in ascending order (1/4 for each vacuum mode).
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.cov.clone());
        let sqrt_v = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
            * eig.eigenvectors.transpose();
        let a = &sqrt_v * symplectic_form(self.n_modes()) * &sqrt_v;
        let mut nu: Vec<f64> = SymmetricEigen::new(a.transpose() * &a)
            .eigenvalues
            .iter()
            .map(|l| l.max(0.0).sqrt())
            .collect();
        nu.sort_by(f64::total_cmp);
        nu.into_iter().step_by(2).collect()
    }

    /// `1/sqrt(det(4·cov))`; equals 1 for pure states.
    pub fn purity(&self) -> f64 {
        let scaled = &self.cov * (1.0 / VACUUM_VARIANCE);
        1.0 / scaled.determinant().sqrt()
    }
}

/// `Ω = ⊕ [[0, 1], [-1, 0]]`.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Quadrature rotation for `a → a e^{iφ}`.
pub fn rotation(phi: f64) -> Matrix2<f64> {
    let (s, c) = phi.sin_cos();
    Matrix2::new(c, -s, s, c)
}

pub(crate) fn single_mode_squeezer(zeta: SqueezeParam) -> DMatrix<f64> {
    let (ch, sh) = (zeta.r.cosh(), zeta.r.sinh());
    let (s, c) = zeta.phi.sin_cos();
    DMatrix::from_row_slice(2, 2, &[ch - sh * c, -sh * s, -sh * s, ch + sh * c])
}

pub(crate) fn two_mode_squeezer(zeta: SqueezeParam) -> DMatrix<f64> {
    let (ch, sh) = (zeta.r.cosh(), zeta.r.sinh());
    let (s, c) = zeta.phi.sin_cos();
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        ch,       0.0,      -sh * c, -sh * s,
        0.0,      ch,       -sh * s,  sh * c,
        -sh * c, -sh * s,   ch,       0.0,
        -sh * s,  sh * c,   0.0,      ch,
    ]);
    m
}

pub(crate) fn beamsplitter(t: f64, phi: f64) -> DMatrix<f64> {
    let (st, ct) = t.sin_cos();
    let fwd = rotation(phi) * st;
    let back = rotation(-phi) * (-st);
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        ct,         0.0,        fwd[(0, 0)],  fwd[(0, 1)],
        0.0,        ct,         fwd[(1, 0)],  fwd[(1, 1)],
        back[(0, 0)], back[(0, 1)], ct,       0.0,
        back[(1, 0)], back[(1, 1)], 0.0,      ct,
    ]);
    m
}

#[cfg(test)]
pub(crate) mod test_support {
    //! Independent Monte-Carlo oracle: propagates Wigner samples of complex
    //! amplitudes `α = x + ip` through the Bogoliubov maps written in complex
    //! form, never touching the symplectic matrices above.

    use std::f64::consts::{PI, TAU};

    use nalgebra::DVector;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    use super::{CovarianceState, SqueezeParam};

    pub fn vacuum_amplitudes(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.5).unwrap();
        (0..n)
            .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect()
    }

    pub fn squeeze(alpha: Complex64, r: f64, phi: f64) -> Complex64 {
        alpha * r.cosh() - alpha.conj() * Complex64::from_polar(1.0, phi) * r.sinh()
    }

    pub fn quadrature(alpha: Complex64, theta: f64) -> f64 {
        (alpha * Complex64::from_polar(1.0, -theta)).re
    }

    pub fn random_state(rng: &mut impl Rng, n_modes: usize, ops: usize) -> CovarianceState {
        let mut s = CovarianceState::vacuum(n_modes).unwrap();
        let dim = 2 * n_modes;
        s = CovarianceState::from_moments(
            DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)),
            s.cov().clone(),
        )
        .unwrap();
        for _ in 0..ops {
            let m = rng.random_range(0..n_modes);
            let other = (m + 1 + rng.random_range(0..n_modes.max(2) - 1)) % n_modes;
            s = match rng.random_range(0..5) {
                0 => s
                    .apply_squeeze(m, SqueezeParam::new(rng.random_range(0.0..1.0), rng.random_range(0.0..TAU)).unwrap())
                    .unwrap(),
                1 if n_modes > 1 => s
                    .apply_two_mode_squeeze(m, other, SqueezeParam::new(rng.random_range(0.0..1.0), rng.random_range(0.0..TAU)).unwrap())
                    .unwrap(),
                2 if n_modes > 1 => s
                    .apply_beamsplitter(m, other, rng.random_range(-PI..PI), rng.random_range(0.0..TAU))
                    .unwrap(),
                3 => s.apply_phase(m, rng.random_range(0.0..TAU)).unwrap(),
                _ => s.apply_loss(m, rng.random_range(0.0..=1.0)).unwrap(),
            };
        }
        s
    }

    pub fn variance(xs: impl Iterator<Item = f64>) -> f64 {
        let v: Vec<f64> = xs.collect();
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    }
}

//! Sideband-pair algebra.
//!
//! A pair of probe modes at `ω₀ ± Δ` is rotated into the symmetric and
//! antisymmetric combinations
//!
//! ```text
//! a₊ = (a_u + a_l)/√2,   a₋ = (a_u − a_l)/√2
//! ```
//!
//! whose continuous-mode temporal functions are `cos(Δt)` and `sin(Δt)`.
//! A two-mode squeezer `exp[ζ* a_u a_l − ζ a_u† a_l†]` factorises in this
//! basis into single-mode squeezers `S(ζ)` on `a₊` and `S(−ζ)` on `a₋`.
//!
//! The basis change is the 50:50 beamsplitter of [`crate::gaussian`] with
//! zero relative phase, followed by a π phase on the lower slot so that it
//! holds `+a₋` rather than `−a₋`. After [`to_pm_basis`] the `upper` index of
//! the pair carries `a₊` and the `lower` index carries `a₋`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::error::{check_param, Error, Result};
use crate::gaussian::{CovarianceState, SqueezeParam};

/// Two probe modes symmetric about the carrier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidebandPair {
    /// Carrier frequency in Hz; bookkeeping only.
    pub carrier_hz: f64,
    /// Sideband offset Δ in Hz.
    pub offset_hz: f64,
    pub upper: usize,
    pub lower: usize,
}

impl SidebandPair {
    pub fn new(carrier_hz: f64, offset_hz: f64, upper: usize, lower: usize) -> Result<Self> {
        check_param("offset_hz", offset_hz, offset_hz > 0.0, "sideband offset must be positive")?;
        if upper == lower {
            return Err(Error::SameMode(upper));
        }
        Ok(Self {
            carrier_hz,
            offset_hz,
            upper,
            lower,
        })
    }

    /// Pair occupying modes 0 (upper) and 1 (lower) of a two-mode state.
    pub fn at_offset(offset_hz: f64) -> Result<Self> {
        Self::new(0.0, offset_hz, 0, 1)
    }

    pub fn offset_rad(&self) -> f64 {
        2.0 * PI * self.offset_hz
    }
}

pub fn to_pm_basis(state: &CovarianceState, pair: &SidebandPair) -> Result<CovarianceState> {
    state
        .apply_beamsplitter(pair.upper, pair.lower, FRAC_PI_4, 0.0)?
        .apply_phase(pair.lower, PI)
}

pub fn from_pm_basis(state: &CovarianceState, pair: &SidebandPair) -> Result<CovarianceState> {
    state
        .apply_phase(pair.lower, -PI)?
        .apply_beamsplitter(pair.upper, pair.lower, -FRAC_PI_4, 0.0)
}

/// Single-mode squeezers `(ζ, −ζ)` acting on `(a₊, a₋)` that reproduce a
/// two-mode squeezer `ζ` on the sideband pair.
pub fn pm_squeeze_params(zeta: SqueezeParam) -> (SqueezeParam, SqueezeParam) {
    (zeta, zeta.negated())
}

/// Two-mode squeezed vacuum on a fresh two-mode state, sideband basis.
pub fn two_mode_squeezed_vacuum(pair: &SidebandPair, zeta: SqueezeParam) -> Result<CovarianceState> {
    let n = pair.upper.max(pair.lower) + 1;
    CovarianceState::vacuum(n)?.apply_two_mode_squeeze(pair.upper, pair.lower, zeta)
}

/// Reads the squeezing parameter of a pure, zero-mean single-mode squeezed
/// vacuum back out of its covariance block.
pub fn squeeze_param_of_mode(state: &CovarianceState, mode: usize) -> Result<SqueezeParam> {
    let v = state.mode_cov(mode)? * 4.0;
    let c = 0.5 * (v[(1, 1)] - v[(0, 0)]);
    let s = -v[(0, 1)];
    let sinh_2r = c.hypot(s);
    let r = 0.5 * sinh_2r.asinh();
    let phi = if sinh_2r > 0.0 { s.atan2(c) } else { 0.0 };
    SqueezeParam::new(r, phi)
}

/// Homodyne power `<X_Δ†(θ) X_Δ(θ)>` of the two-mode quadrature
/// `X_Δ(θ) = [a_l† e^{iθ} + a_u e^{−iθ}]/2`, evaluated directly in the
/// sideband basis.
///
/// Writing `X_Δ = (A + iB)/2` with Hermitian `A`, `B` that commute, the power
/// is `(<A²> + <B²>)/4`.
pub fn two_mode_quadrature_power(
    state: &CovarianceState,
    pair: &SidebandPair,
    theta: f64,
) -> Result<f64> {
    let (s, c) = theta.sin_cos();
    // coefficients on (x_u, p_u, x_l, p_l)
    let a = Vector4::new(c, s, c, s);
    let b = Vector4::new(-s, c, s, -c);
    let m = second_moments(state, pair)?;
    let power = 0.25 * ((a.transpose() * m * a)[(0, 0)] + (b.transpose() * m * b)[(0, 0)]);
    Ok(power.max(0.0))
}

/// `½<X₊²(θ)> + ½<X₋²(θ + π/2)>` for a state already in the ± basis.
pub fn pm_quadrature_power(
    state_pm: &CovarianceState,
    pair: &SidebandPair,
    theta: f64,
) -> Result<f64> {
    let plus = state_pm.quadrature_second_moment(pair.upper, theta)?;
    let minus = state_pm.quadrature_second_moment(pair.lower, theta + FRAC_PI_2)?;
    Ok(0.5 * plus + 0.5 * minus)
}

fn second_moments(state: &CovarianceState, pair: &SidebandPair) -> Result<nalgebra::Matrix4<f64>> {
    let cov = state.pair_cov(pair.upper, pair.lower)?;
    let m = state.mean();
    let mu = Vector4::new(
        m[2 * pair.upper],
        m[2 * pair.upper + 1],
        m[2 * pair.lower],
        m[2 * pair.lower + 1],
    );
    Ok(cov + mu * mu.transpose())
}

/// Shape of a temporal mode function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeShape {
    /// `cos(2πΔt + phase)` on `[start, start + duration)`.
    Cos {
        freq_hz: f64,
        phase: f64,
        start: f64,
        duration: f64,
    },
    /// `sin(2πΔt + phase)` on `[start, start + duration)`.
    Sin {
        freq_hz: f64,
        phase: f64,
        start: f64,
        duration: f64,
    },
    /// Gaussian whose intensity `|f|²` has full width at half maximum `fwhm`.
    Gaussian { center: f64, fwhm: f64 },
    /// Zero before `start`, then the trailing half of a Gaussian whose
    /// intensity FWHM (of the full Gaussian) is `fwhm`.
    HalfGaussian { start: f64, fwhm: f64 },
    /// Arbitrary samples on a uniform grid, linearly interpolated.
    Sampled { t0: f64, dt: f64, values: Vec<f64> },
}

/// Normalised temporal mode function (`∫|f|² dt = 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalModeFn {
    shape: ModeShape,
    norm: f64,
}

const FWHM_TO_SIGMA: f64 = 0.424_660_900_144_009_5; // 1/(2√(2 ln 2))

impl TemporalModeFn {
    pub fn new(shape: ModeShape) -> Result<Self> {
        let norm = match &shape {
            ModeShape::Cos { freq_hz, duration, .. } | ModeShape::Sin { freq_hz, duration, .. } => {
                check_param("freq_hz", *freq_hz, *freq_hz > 0.0, "beat frequency must be positive")?;
                check_param("duration", *duration, *duration > 0.0, "window must be positive")?;
                (2.0 / duration).sqrt()
            }
            ModeShape::Gaussian { fwhm, .. } => {
                check_param("fwhm", *fwhm, *fwhm > 0.0, "pulse width must be positive")?;
                let sigma = fwhm * FWHM_TO_SIGMA;
                (2.0 * PI * sigma * sigma).powf(-0.25)
            }
            ModeShape::HalfGaussian { fwhm, .. } => {
                check_param("fwhm", *fwhm, *fwhm > 0.0, "pulse width must be positive")?;
                let sigma = fwhm * FWHM_TO_SIGMA;
                2f64.sqrt() * (2.0 * PI * sigma * sigma).powf(-0.25)
            }
            ModeShape::Sampled { dt, values, .. } => {
                check_param("dt", *dt, *dt > 0.0, "sample spacing must be positive")?;
                if values.len() < 2 {
                    return Err(Error::TooFewSamples {
                        needed: 2,
                        got: values.len(),
                    });
                }
                // trapezoid of the piecewise-linear interpolant squared
                let energy: f64 = values
                    .windows(2)
                    .map(|w| dt * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0)
                    .sum();
                check_param("energy", energy, energy > 0.0, "sampled mode is identically zero")?;
                1.0 / energy.sqrt()
            }
        };
        Ok(Self { shape, norm })
    }

    pub fn gaussian(center: f64, fwhm: f64) -> Result<Self> {
        Self::new(ModeShape::Gaussian { center, fwhm })
    }

    pub fn half_gaussian(start: f64, fwhm: f64) -> Result<Self> {
        Self::new(ModeShape::HalfGaussian { start, fwhm })
    }

    pub fn cos_beat(freq_hz: f64, phase: f64, start: f64, duration: f64) -> Result<Self> {
        Self::new(ModeShape::Cos {
            freq_hz,
            phase,
            start,
            duration,
        })
    }

    pub fn sin_beat(freq_hz: f64, phase: f64, start: f64, duration: f64) -> Result<Self> {
        Self::new(ModeShape::Sin {
            freq_hz,
            phase,
            start,
            duration,
        })
    }

    pub fn shape(&self) -> &ModeShape {
        &self.shape
    }

    /// Time interval outside of which the function vanishes (or is
    /// negligible: Gaussians are cut at 16 intensity standard deviations).
    pub fn support(&self) -> (f64, f64) {
        match &self.shape {
            ModeShape::Cos { start, duration, .. } | ModeShape::Sin { start, duration, .. } => {
                (*start, start + duration)
            }
            ModeShape::Gaussian { center, fwhm } => {
                let half = 16.0 * fwhm * FWHM_TO_SIGMA;
                (center - half, center + half)
            }
            ModeShape::HalfGaussian { start, fwhm } => (*start, start + 16.0 * fwhm * FWHM_TO_SIGMA),
            ModeShape::Sampled { t0, dt, values } => (*t0, t0 + dt * (values.len() - 1) as f64),
        }
    }

    /// Normalised amplitude at time `t` (zero outside the support).
    pub fn value(&self, t: f64) -> f64 {
        let raw = match &self.shape {
            ModeShape::Cos {
                freq_hz,
                phase,
                start,
                duration,
            } => {
                if t < *start || t >= start + duration {
                    return 0.0;
                }
                (2.0 * PI * freq_hz * t + phase).cos()
            }
            ModeShape::Sin {
                freq_hz,
                phase,
                start,
                duration,
            } => {
                if t < *start || t >= start + duration {
                    return 0.0;
                }
                (2.0 * PI * freq_hz * t + phase).sin()
            }
            ModeShape::Gaussian { center, fwhm } => {
                let sigma = fwhm * FWHM_TO_SIGMA;
                let x = t - center;
                (-x * x / (4.0 * sigma * sigma)).exp()
            }
            ModeShape::HalfGaussian { start, fwhm } => {
                if t < *start {
                    return 0.0;
                }
                let sigma = fwhm * FWHM_TO_SIGMA;
                let x = t - start;
                (-x * x / (4.0 * sigma * sigma)).exp()
            }
            ModeShape::Sampled { t0, dt, values } => {
                let pos = (t - t0) / dt;
                if pos < 0.0 || pos > (values.len() - 1) as f64 {
                    return 0.0;
                }
                let i = (pos.floor() as usize).min(values.len() - 2);
                let frac = pos - i as f64;
                values[i] * (1.0 - frac) + values[i + 1] * frac
            }
        };
        raw * self.norm
    }

    /// Samples at `t_k = k / sample_rate`, rescaled so that
    /// `Σ f_k² / sample_rate = 1` exactly.
    pub fn sample(&self, sample_rate: f64, n: usize) -> Result<Vec<f64>> {
        check_param("sample_rate", sample_rate, sample_rate > 0.0, "must be positive")?;
        let mut out: Vec<f64> = (0..n).map(|k| self.value(k as f64 / sample_rate)).collect();
        let energy: f64 = out.iter().map(|v| v * v).sum::<f64>() / sample_rate;
        if energy <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "mode_fn",
                value: energy,
                reason: "mode function vanishes on the sampling grid",
            });
        }
        let scale = energy.sqrt().recip();
        out.iter_mut().for_each(|v| *v *= scale);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::test_support::random_state;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn pair() -> SidebandPair {
        SidebandPair::at_offset(2.0e6).unwrap()
    }

    #[test]
    fn pair_validation() {
        assert!(SidebandPair::new(0.0, 0.0, 0, 1).is_err());
        assert!(SidebandPair::new(0.0, -1.0, 0, 1).is_err());
        assert!(matches!(SidebandPair::new(0.0, 1.0, 2, 2), Err(Error::SameMode(2))));
    }

    #[test]
    fn vacuum_is_basis_independent() {
        let v = CovarianceState::vacuum(2).unwrap();
        let pm = to_pm_basis(&v, &pair()).unwrap();
        assert_abs_diff_eq!(pm.cov(), v.cov(), epsilon = 1e-15);
        assert_abs_diff_eq!(from_pm_basis(&v, &pair()).unwrap().cov(), v.cov(), epsilon = 1e-15);
    }

    #[test]
    fn pm_basis_matches_definition_on_means() {
        // Coherent amplitudes α_u, α_l map to (α_u ± α_l)/√2.
        let mean = nalgebra::DVector::from_vec(vec![1.0, 0.5, -0.25, 2.0]);
        let s = CovarianceState::from_moments(mean, CovarianceState::vacuum(2).unwrap().cov().clone()).unwrap();
        let pm = to_pm_basis(&s, &pair()).unwrap();
        let k = 0.5f64.sqrt();
        let expected = [k * 0.75, k * 2.5, k * 1.25, k * -1.5];
        for (got, want) in pm.mean().iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn round_trip_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let s = random_state(&mut rng, 3, 8);
            let p = SidebandPair::new(0.0, 1.0, 2, 0).unwrap();
            let back = from_pm_basis(&to_pm_basis(&s, &p).unwrap(), &p).unwrap();
            assert_abs_diff_eq!(back.cov(), s.cov(), epsilon = 1e-12);
            assert_abs_diff_eq!(back.mean(), s.mean(), epsilon = 1e-12);
        }
    }

    #[test]
    fn two_mode_squeezed_vacuum_separates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let zeta = SqueezeParam::new(rng.random_range(0.05..1.5), rng.random_range(0.0..TAU)).unwrap();
            let tmsv = two_mode_squeezed_vacuum(&pair(), zeta).unwrap();
            let pm = to_pm_basis(&tmsv, &pair()).unwrap();
            assert!(pm.cross_cov(0, 1).unwrap().abs().max() < 1e-10);

            let (zp, zm) = pm_squeeze_params(zeta);
            let product = CovarianceState::vacuum(2)
                .unwrap()
                .apply_squeeze(0, zp)
                .unwrap()
                .apply_squeeze(1, zm)
                .unwrap();
            assert_abs_diff_eq!(pm.cov(), product.cov(), epsilon = 1e-10);

            let rp = squeeze_param_of_mode(&pm, 0).unwrap();
            let rm = squeeze_param_of_mode(&pm, 1).unwrap();
            assert_abs_diff_eq!(rp.r(), zeta.r(), epsilon = 1e-9);
            assert_abs_diff_eq!(rm.r(), zeta.r(), epsilon = 1e-9);
            assert!(angle_diff(rp.phi(), zeta.phi()) < 1e-9);
            assert!(angle_diff(rm.phi(), zeta.phi() + PI) < 1e-9);
        }
    }

    fn angle_diff(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(TAU);
        d.min(TAU - d)
    }

    #[test]
    fn pm_squeeze_params_sign_structure() {
        let (p, m) = pm_squeeze_params(SqueezeParam::new(0.0, 0.0).unwrap());
        assert_eq!((p.r(), m.r()), (0.0, 0.0));
        let (p, m) = pm_squeeze_params(SqueezeParam::new(0.3, 0.0).unwrap());
        assert_eq!((p.r(), p.phi()), (0.3, 0.0));
        assert_eq!(m.r(), 0.3);
        assert_abs_diff_eq!(m.phi(), PI, epsilon = 1e-15);
    }

    #[test]
    fn two_mode_power_of_vacuum() {
        let v = CovarianceState::vacuum(2).unwrap();
        for k in 0..12 {
            let p = two_mode_quadrature_power(&v, &pair(), k as f64 * 0.5).unwrap();
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_mode_power_identity_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let ops = rng.random_range(1..8);
            let s = random_state(&mut rng, 2, ops);
            let pm = to_pm_basis(&s, &pair()).unwrap();
            let theta = rng.random_range(0.0..TAU);
            let direct = two_mode_quadrature_power(&s, &pair(), theta).unwrap();
            let split = pm_quadrature_power(&pm, &pair(), theta).unwrap();
            assert!((direct - split).abs() < 1e-10, "{direct} vs {split}");
        }
    }

    #[test]
    fn calibrated_two_mode_squeezing_level() {
        let zeta = SqueezeParam::from_squeezing_db(-1.78, 0.0).unwrap();
        let tmsv = two_mode_squeezed_vacuum(&pair(), zeta).unwrap();
        let p = two_mode_quadrature_power(&tmsv, &pair(), zeta.squeezed_angle()).unwrap();
        assert_abs_diff_eq!(p, 0.25 * 10f64.powf(-0.178), epsilon = 1e-14);
    }

    #[test]
    fn analytic_mode_functions_are_normalised() {
        let rate = 1e10;
        for f in [
            TemporalModeFn::gaussian(2e-6, 470e-9).unwrap(),
            TemporalModeFn::half_gaussian(1e-6, 470e-9).unwrap(),
            TemporalModeFn::cos_beat(2e6, 0.3, 0.0, 2e-6).unwrap(),
            TemporalModeFn::sin_beat(2e6, 0.3, 0.0, 2e-6).unwrap(),
        ] {
            let (a, b) = f.support();
            let n = ((b - a) * rate) as usize;
            // midpoint rule
            let e: f64 = (0..n)
                .map(|k| {
                    let v = f.value(a + (k as f64 + 0.5) / rate);
                    v * v
                })
                .sum::<f64>()
                / rate;
            assert!((e - 1.0).abs() < 1e-9, "{f:?}: {e}");
        }
    }

    #[test]
    fn sampled_form_is_discretely_normalised() {
        let f = TemporalModeFn::half_gaussian(1e-6, 470e-9).unwrap();
        let s = f.sample(1e8, 1024).unwrap();
        let e: f64 = s.iter().map(|v| v * v).sum::<f64>() / 1e8;
        assert_abs_diff_eq!(e, 1.0, epsilon = 1e-12);
        assert_eq!(s[99], 0.0);
        assert!(s[100] > 0.0);

        let custom = TemporalModeFn::new(ModeShape::Sampled {
            t0: 0.0,
            dt: 1e-8,
            values: vec![0.0, 1.0, 2.0, 1.0, 0.0],
        })
        .unwrap();
        assert_abs_diff_eq!(custom.value(1.5e-8) / custom.value(1e-8), 1.5, epsilon = 1e-12);
        assert_eq!(custom.value(-1e-9), 0.0);
        assert!(TemporalModeFn::gaussian(0.0, -1.0).is_err());
    }

    #[test]
    fn cos_sin_beats_are_orthogonal() {
        let (delta, periods, per_period): (f64, f64, f64) = (2e6, 7.0, 100.0);
        let rate = delta * per_period;
        let duration = periods / delta;
        let n = (duration * rate).round() as usize;
        let c = TemporalModeFn::cos_beat(delta, 0.4, 0.0, duration).unwrap().sample(rate, n).unwrap();
        let s = TemporalModeFn::sin_beat(delta, 0.4, 0.0, duration).unwrap().sample(rate, n).unwrap();
        let inner: f64 = c.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / rate;
        assert!(inner.abs() < 1e-6, "{inner}");
    }
}

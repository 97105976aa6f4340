//! Synthetic homodyne records.
//!
//! A record is the LO-phase quadrature `i(t) = cos θ · x(t) + sin θ · p(t)` of
//! two independent white field quadratures with one-sided density
//! `shot_level` (per-sample variance `shot_level · rate / 2`). A sideband
//! feature at `±Δ` is imposed on the in-phase and quadrature components of
//! `x` and `p` around `Δ`:
//!
//! ```text
//! x_band(t) = √2 sin(2πΔt + φ_b) x_c(t) + √2 cos(2πΔt + φ_b) x_s(t)
//! ```
//!
//! and likewise for `p`. The `c` components carry the `a₊` mode and the `s`
//! components carry `−i a₋`, so demodulating a record at the beat phase `φ_b`
//! yields `X₊(θ)` and at `φ_b + π/2` yields `X₋(θ + π/2)`. The baseband
//! vector `(x_c, p_c, x_s, p_s)` is coloured so that its spectral density is
//! `shot_level · [I + L(f)(M − I)]`, with `M` the ± covariance of the feature
//! in vacuum units and `L` a lineshape that vanishes before `Δ`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{check_param, Error, Result};
use crate::gaussian::{CovarianceState, SqueezingLevels, VACUUM_VARIANCE};
use crate::sideband::{to_pm_basis, SidebandPair, TemporalModeFn};

/// Synchronous beat-note channel `sin(2πf t + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceChannel {
    pub freq_hz: f64,
    pub phase: f64,
    pub samples: Vec<f64>,
}

impl ReferenceChannel {
    /// Least-squares phase of the recorded samples at the nominal frequency.
    pub fn estimate_phase(&self, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * self.freq_hz / sample_rate;
        // normal equations of v ≈ a sin + b cos; exact over non-integer periods
        let (mut ss, mut sc, mut cc, mut vs, mut vc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (k, v) in self.samples.iter().enumerate() {
            let (s, c) = (w * k as f64).sin_cos();
            ss += s * s;
            sc += s * c;
            cc += c * c;
            vs += v * s;
            vc += v * c;
        }
        let a = cc * vs - sc * vc;
        let b = ss * vc - sc * vs;
        b.atan2(a)
    }

    /// Unit sine at the reference frequency, shifted by `offset` from the
    /// recorded phase.
    pub fn waveform(&self, sample_rate: f64, offset: f64) -> Vec<f64> {
        if offset == 0.0 {
            return self.samples.clone();
        }
        let phase = self.estimate_phase(sample_rate) + offset;
        beat_waveform(self.freq_hz, phase, sample_rate, self.samples.len())
    }
}

fn beat_waveform(freq_hz: f64, phase: f64, sample_rate: f64, n: usize) -> Vec<f64> {
    let w = 2.0 * PI * freq_hz / sample_rate;
    (0..n).map(|k| (w * k as f64 + phase).sin()).collect()
}

/// Unit-amplitude reference `sin(2πΔt + phase)` sampled at `t_k = k/rate`.
pub fn beat_reference(delta_hz: f64, phase: f64, sample_rate: f64, n: usize) -> Result<ReferenceChannel> {
    check_param("delta_hz", delta_hz, delta_hz > 0.0, "must be positive")?;
    check_param("sample_rate", sample_rate, sample_rate > 0.0, "must be positive")?;
    check_param("phase", phase, true, "must be finite")?;
    Ok(ReferenceChannel {
        freq_hz: delta_hz,
        phase,
        samples: beat_waveform(delta_hz, phase, sample_rate, n),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomodyneTrace {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub theta: f64,
    pub seed: u64,
    pub reference: Option<ReferenceChannel>,
}

impl HomodyneTrace {
    pub fn validate(&self) -> Result<()> {
        check_param("sample_rate", self.sample_rate, self.sample_rate > 0.0, "must be positive")?;
        if let Some(bad) = self.samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "samples",
                value: *bad,
                reason: "trace contains non-finite samples",
            });
        }
        if let Some(r) = &self.reference {
            if r.samples.len() != self.samples.len() {
                return Err(Error::Dimension(format!(
                    "reference has {} samples, trace has {}",
                    r.samples.len(),
                    self.samples.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }
}

/// Spectral weight `L(f) ∈ [0, 1]` of a feature versus baseband offset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Lineshape {
    /// 1 up to `half_width_hz`, raised-cosine roll-off over `taper_hz`.
    FlatTop { half_width_hz: f64, taper_hz: f64 },
    /// Gaussian of full width `fwhm_hz`, zero beyond `cutoff_hz`.
    Gaussian { fwhm_hz: f64, cutoff_hz: f64 },
}

impl Lineshape {
    pub fn weight(&self, f_hz: f64) -> f64 {
        let f = f_hz.abs();
        match *self {
            Lineshape::FlatTop { half_width_hz, taper_hz } => {
                if f <= half_width_hz {
                    1.0
                } else if f >= half_width_hz + taper_hz {
                    0.0
                } else {
                    0.5 * (1.0 + (PI * (f - half_width_hz) / taper_hz).cos())
                }
            }
            Lineshape::Gaussian { fwhm_hz, cutoff_hz } => {
                if f >= cutoff_hz {
                    0.0
                } else {
                    (-4.0 * 2f64.ln() * f * f / (fwhm_hz * fwhm_hz)).exp()
                }
            }
        }
    }

    /// Offset beyond which the weight is exactly zero.
    pub fn extent(&self) -> f64 {
        match *self {
            Lineshape::FlatTop { half_width_hz, taper_hz } => half_width_hz + taper_hz,
            Lineshape::Gaussian { cutoff_hz, .. } => cutoff_hz,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Lineshape::FlatTop { half_width_hz, taper_hz } => {
                check_param("half_width_hz", half_width_hz, half_width_hz >= 0.0, "must be >= 0")?;
                check_param("taper_hz", taper_hz, taper_hz > 0.0, "must be > 0")
            }
            Lineshape::Gaussian { fwhm_hz, cutoff_hz } => {
                check_param("fwhm_hz", fwhm_hz, fwhm_hz > 0.0, "must be > 0")?;
                check_param("cutoff_hz", cutoff_hz, cutoff_hz > 0.0, "must be > 0")
            }
        }
    }
}

/// ± covariance of a sideband pair in vacuum units, ordered
/// `(x₊, p₊, x₋, p₋)`.
pub type PmMatrix = [[f64; 4]; 4];

/// Squeezing structure around a beat frequency `Δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidebandFeature {
    pub center_hz: f64,
    pub lineshape: Lineshape,
    /// Phase `φ_b` of the beat reference that demodulates onto `a₊`.
    pub beat_phase: f64,
    pub pm_cov: PmMatrix,
}

impl SidebandFeature {
    /// Two-mode squeezed sidebands with the given levels; the two-mode
    /// quadrature is squeezed at LO phase `theta_sq`.
    pub fn two_mode_squeezed(
        center_hz: f64,
        lineshape: Lineshape,
        levels: SqueezingLevels,
        theta_sq: f64,
        beat_phase: f64,
    ) -> Result<Self> {
        let pair = SidebandPair::at_offset(center_hz)?;
        let (r, eta) = levels.decompose()?;
        let zeta = crate::gaussian::SqueezeParam::new(r, 2.0 * theta_sq)?;
        let state = CovarianceState::vacuum(2)?
            .apply_two_mode_squeeze(0, 1, zeta)?
            .apply_loss(0, eta)?
            .apply_loss(1, eta)?;
        Self::from_pm_state(center_hz, lineshape, &to_pm_basis(&state, &pair)?, &pair, beat_phase)
    }

    /// Feature whose `a₊`/`a₋` statistics are those of `state_pm`.
    pub fn from_pm_state(
        center_hz: f64,
        lineshape: Lineshape,
        state_pm: &CovarianceState,
        pair: &SidebandPair,
        beat_phase: f64,
    ) -> Result<Self> {
        let m = state_pm.pair_cov(pair.upper, pair.lower)? / VACUUM_VARIANCE;
        let mut pm_cov = [[0.0; 4]; 4];
        for (i, row) in pm_cov.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[(i, j)];
            }
        }
        let f = Self {
            center_hz,
            lineshape,
            beat_phase,
            pm_cov,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        check_param("center_hz", self.center_hz, self.center_hz > 0.0, "must be positive")?;
        check_param("beat_phase", self.beat_phase, true, "must be finite")?;
        self.lineshape.validate()?;
        check_param(
            "lineshape",
            self.lineshape.extent(),
            self.lineshape.extent() < self.center_hz,
            "feature must vanish before zero frequency",
        )?;
        let state = CovarianceState::from_moments(
            nalgebra::DVector::zeros(4),
            nalgebra::DMatrix::from_fn(4, 4, |i, j| self.pm_cov[i][j] * VACUUM_VARIANCE),
        )?;
        state.ensure_physical()
    }

    fn pm(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.pm_cov[i][j])
    }

    /// Covariance of the demodulated baseband vector `(x_c, p_c, x_s, p_s)`.
    pub fn baseband_matrix(&self) -> Matrix4<f64> {
        // (x_c, p_c, x_s, p_s) = (x₊, p₊, p₋, −x₋)
        let t = Matrix4::new(
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, -1.0, 0.0,
        );
        t * self.pm() * t.transpose()
    }

    /// `⟨X₊²(θ)⟩` in vacuum units.
    pub fn plus_level(&self, theta: f64) -> f64 {
        quad(&self.baseband_matrix(), 0, theta)
    }

    /// `⟨X₋²(θ + π/2)⟩` in vacuum units.
    pub fn minus_level(&self, theta: f64) -> f64 {
        quad(&self.baseband_matrix(), 2, theta)
    }

    /// Two-mode quadrature power in vacuum units.
    pub fn direct_level(&self, theta: f64) -> f64 {
        0.5 * (self.plus_level(theta) + self.minus_level(theta))
    }
}

fn quad(m: &Matrix4<f64>, first: usize, theta: f64) -> f64 {
    let (c, s) = (theta.cos(), theta.sin());
    c * c * m[(first, first)] + 2.0 * c * s * m[(first, first + 1)] + s * s * m[(first + 1, first + 1)]
}

/// Narrow classical pick-up added to the record with a random phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentalLine {
    pub freq_hz: f64,
    /// Mean-square contribution to the record.
    pub power: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpectrumModel {
    /// One-sided spectral density of shot noise.
    pub shot_level: f64,
    pub features: Vec<SidebandFeature>,
    #[serde(default)]
    pub lines: Vec<EnvironmentalLine>,
}

/// Which demodulated quadrature a baseband prediction refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Demodulated {
    Plus,
    Minus,
}

impl NoiseSpectrumModel {
    pub fn shot_only(shot_level: f64) -> Self {
        Self {
            shot_level,
            features: Vec::new(),
            lines: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_param("shot_level", self.shot_level, self.shot_level > 0.0, "must be positive")?;
        for f in &self.features {
            f.validate()?;
        }
        let mut spans: Vec<(f64, f64)> = self
            .features
            .iter()
            .map(|f| (f.center_hz - f.lineshape.extent(), f.center_hz + f.lineshape.extent()))
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in spans.windows(2) {
            check_param("features", w[1].0, w[1].0 >= w[0].1, "feature bands overlap")?;
        }
        for l in &self.lines {
            check_param("line.freq_hz", l.freq_hz, l.freq_hz > 0.0, "must be positive")?;
            check_param("line.power", l.power, l.power >= 0.0, "must be >= 0")?;
        }
        Ok(())
    }

    /// Expected one-sided PSD of a record at LO phase `theta`, excluding the
    /// environmental lines.
    pub fn psd(&self, f_hz: f64, theta: f64) -> f64 {
        let excess: f64 = self
            .features
            .iter()
            .map(|ft| ft.lineshape.weight(f_hz - ft.center_hz) * (ft.direct_level(theta) - 1.0))
            .sum();
        self.shot_level * (1.0 + excess)
    }

    /// Expected PSD at baseband offset `f_hz` after demodulating at the
    /// feature's beat phase (`Plus`) or a quarter period later (`Minus`).
    pub fn demodulated_psd(&self, feature: usize, which: Demodulated, f_hz: f64, theta: f64) -> Result<f64> {
        let ft = self.features.get(feature).ok_or(Error::ModeIndex {
            index: feature,
            n_modes: self.features.len(),
        })?;
        let level = match which {
            Demodulated::Plus => ft.plus_level(theta),
            Demodulated::Minus => ft.minus_level(theta),
        };
        Ok(self.shot_level * (1.0 + ft.lineshape.weight(f_hz) * (level - 1.0)))
    }

    /// Per-sample variance of white shot noise at `sample_rate`.
    pub fn shot_variance(&self, sample_rate: f64) -> f64 {
        self.shot_level * sample_rate / 2.0
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn white(rng: &mut impl Rng, n: usize, sigma: f64) -> Vec<f64> {
    (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// White shot-noise record with one-sided density `shot_level`.
pub fn shot_noise_trace(shot_level: f64, sample_rate: f64, n: usize, seed: u64) -> Result<HomodyneTrace> {
    check_param("shot_level", shot_level, shot_level > 0.0, "must be positive")?;
    check_param("sample_rate", sample_rate, sample_rate > 0.0, "must be positive")?;
    let mut rng = stream_rng(seed, 0);
    Ok(HomodyneTrace {
        samples: white(&mut rng, n, (shot_level * sample_rate / 2.0).sqrt()),
        sample_rate,
        theta: 0.0,
        seed,
        reference: None,
    })
}

/// Stationary record at LO phase `theta`; see [`synthesize_trace_stream`].
pub fn synthesize_trace(
    model: &NoiseSpectrumModel,
    theta: f64,
    sample_rate: f64,
    n_samples: usize,
    seed: u64,
) -> Result<HomodyneTrace> {
    synthesize_trace_stream(model, theta, sample_rate, n_samples, seed, 0)
}

/// Stationary record drawn from RNG stream `stream` of `seed`, so that an
/// ensemble `(seed, 0..k)` is reproducible and can be generated in parallel.
/// The reference channel follows the first feature, if any.
pub fn synthesize_trace_stream(
    model: &NoiseSpectrumModel,
    theta: f64,
    sample_rate: f64,
    n_samples: usize,
    seed: u64,
    stream: u64,
) -> Result<HomodyneTrace> {
    model.validate()?;
    check_param("sample_rate", sample_rate, sample_rate > 0.0, "must be positive")?;
    check_param("theta", theta, true, "must be finite")?;
    if n_samples < 2 || !n_samples.is_power_of_two() {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            value: n_samples as f64,
            reason: "must be a power of two >= 2",
        });
    }
    for f in &model.features {
        check_param(
            "center_hz",
            f.center_hz,
            f.center_hz + f.lineshape.extent() < sample_rate / 2.0,
            "feature extends beyond the Nyquist frequency",
        )?;
    }
    let mut rng = stream_rng(seed, stream);
    let sigma = model.shot_variance(sample_rate).sqrt();
    let mut x = white(&mut rng, n_samples, sigma);
    let mut p = white(&mut rng, n_samples, sigma);
    let mut planner = FftPlanner::<f64>::new();
    for f in &model.features {
        shape_feature(&mut x, &mut p, f, sample_rate, &mut planner);
    }
    let (c, s) = (theta.cos(), theta.sin());
    let mut samples: Vec<f64> = x.iter().zip(&p).map(|(a, b)| c * a + s * b).collect();
    for line in &model.lines {
        let phase = rng.random_range(0.0..2.0 * PI);
        let amp = (2.0 * line.power).sqrt();
        let w = 2.0 * PI * line.freq_hz / sample_rate;
        for (k, v) in samples.iter_mut().enumerate() {
            *v += amp * (w * k as f64 + phase).sin();
        }
    }
    let reference = match model.features.first() {
        Some(f) => Some(beat_reference(f.center_hz, f.beat_phase, sample_rate, n_samples)?),
        None => None,
    };
    Ok(HomodyneTrace {
        samples,
        sample_rate,
        theta,
        seed,
        reference,
    })
}

/// `G(L) = V diag(√(1 + L(λ − 1)) − 1) Vᵀ`, the correction that turns unit
/// white baseband noise into `I + L(M − I)`.
struct Colouring {
    eig: SymmetricEigen<f64, nalgebra::U4>,
}

impl Colouring {
    fn new(m: Matrix4<f64>) -> Self {
        Self { eig: m.symmetric_eigen() }
    }

    fn at(&self, weight: f64) -> Matrix4<f64> {
        let d = Vector4::from_fn(|i, _| (1.0 + weight * (self.eig.eigenvalues[i] - 1.0)).max(0.0).sqrt() - 1.0);
        let v = &self.eig.eigenvectors;
        v * Matrix4::from_diagonal(&d) * v.transpose()
    }
}

fn shape_feature(x: &mut [f64], p: &mut [f64], feature: &SidebandFeature, rate: f64, planner: &mut FftPlanner<f64>) {
    let n = x.len();
    let root2 = std::f64::consts::SQRT_2;
    let r = beat_waveform(feature.center_hz, feature.beat_phase, rate, n);
    let rq = beat_waveform(feature.center_hz, feature.beat_phase + FRAC_PI_2, rate, n);
    let mut chans: Vec<Vec<Complex64>> = [(&*x, &r), (&*p, &r), (&*x, &rq), (&*p, &rq)]
        .iter()
        .map(|(sig, w)| sig.iter().zip(w.iter()).map(|(a, b)| Complex64::new(root2 * a * b, 0.0)).collect())
        .collect();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    chans.iter_mut().for_each(|c| fwd.process(c));
    let colouring = Colouring::new(feature.baseband_matrix());
    let df = rate / n as f64;
    for k in 0..n {
        let f = k.min(n - k) as f64 * df;
        let weight = feature.lineshape.weight(f);
        if weight == 0.0 {
            chans.iter_mut().for_each(|c| c[k] = Complex64::new(0.0, 0.0));
            continue;
        }
        let g = colouring.at(weight);
        let v = [chans[0][k], chans[1][k], chans[2][k], chans[3][k]];
        for (i, c) in chans.iter_mut().enumerate() {
            c[k] = (0..4).map(|j| v[j] * g[(i, j)]).sum();
        }
    }
    chans.iter_mut().for_each(|c| inv.process(c));
    let scale = root2 / n as f64;
    for t in 0..n {
        x[t] += scale * (r[t] * chans[0][t].re + rq[t] * chans[2][t].re);
        p[t] += scale * (r[t] * chans[1][t].re + rq[t] * chans[3][t].re);
    }
}

/// Pulsed records: white shot noise everywhere except in the two temporal
/// modes `√2 sin(2πΔt + φ_b) u(t)` and `√2 cos(2πΔt + φ_b) u(t)`, which carry
/// the `a₊` and `a₋` statistics of a ± state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSynthesis {
    pub shot_level: f64,
    pub sample_rate: f64,
    pub n_samples: usize,
    pub beat_hz: f64,
    pub beat_phase: f64,
    pub envelope: TemporalModeFn,
    pub pm_cov: PmMatrix,
}

/// Orthonormal sampled modes and the square root of their covariance.
pub struct PulseSynthesizer {
    config: PulseSynthesis,
    modes: [Vec<f64>; 2],
    sqrt_m: Matrix4<f64>,
    reference: ReferenceChannel,
}

impl PulseSynthesis {
    pub fn prepare(&self) -> Result<PulseSynthesizer> {
        check_param("shot_level", self.shot_level, self.shot_level > 0.0, "must be positive")?;
        check_param("sample_rate", self.sample_rate, self.sample_rate > 0.0, "must be positive")?;
        check_param(
            "beat_hz",
            self.beat_hz,
            self.beat_hz > 0.0 && self.beat_hz < self.sample_rate / 2.0,
            "must lie below the Nyquist frequency",
        )?;
        let feature = SidebandFeature {
            center_hz: self.beat_hz,
            lineshape: Lineshape::FlatTop {
                half_width_hz: 0.0,
                taper_hz: self.beat_hz / 2.0,
            },
            beat_phase: self.beat_phase,
            pm_cov: self.pm_cov,
        };
        feature.validate()?;
        let env = self.envelope.sample(self.sample_rate, self.n_samples)?;
        let r = beat_waveform(self.beat_hz, self.beat_phase, self.sample_rate, self.n_samples);
        let rq = beat_waveform(self.beat_hz, self.beat_phase + FRAC_PI_2, self.sample_rate, self.n_samples);
        let mut c: Vec<f64> = env.iter().zip(&r).map(|(e, w)| e * w).collect();
        let mut s: Vec<f64> = env.iter().zip(&rq).map(|(e, w)| e * w).collect();
        normalise(&mut c)?;
        let overlap = dot(&c, &s);
        s.iter_mut().zip(&c).for_each(|(v, u)| *v -= overlap * u);
        normalise(&mut s)?;
        let eig = feature.baseband_matrix().symmetric_eigen();
        let sqrt_m = eig.eigenvectors
            * Matrix4::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
            * eig.eigenvectors.transpose();
        Ok(PulseSynthesizer {
            config: self.clone(),
            modes: [c, s],
            sqrt_m,
            reference: ReferenceChannel {
                freq_hz: self.beat_hz,
                phase: self.beat_phase,
                samples: r,
            },
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalise(v: &mut [f64]) -> Result<()> {
    let norm = dot(v, v).sqrt();
    check_param("envelope", norm, norm > 0.0, "temporal mode vanishes on the sampling grid")?;
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(())
}

impl PulseSynthesizer {
    pub fn config(&self) -> &PulseSynthesis {
        &self.config
    }

    pub fn reference(&self) -> &ReferenceChannel {
        &self.reference
    }

    /// Record number `stream` of the ensemble `seed`.
    pub fn trace(&self, theta: f64, seed: u64, stream: u64, with_reference: bool) -> HomodyneTrace {
        let n = self.config.n_samples;
        let mut rng = stream_rng(seed, stream);
        let sigma = (self.config.shot_level * self.config.sample_rate / 2.0).sqrt();
        let mut x = white(&mut rng, n, sigma);
        let mut p = white(&mut rng, n, sigma);
        let [c, s] = &self.modes;
        let old = Vector4::new(dot(c, &x), dot(c, &p), dot(s, &x), dot(s, &p));
        let delta = self.sqrt_m * old - old;
        for k in 0..n {
            x[k] += delta[0] * c[k] + delta[2] * s[k];
            p[k] += delta[1] * c[k] + delta[3] * s[k];
        }
        let (ct, st) = (theta.cos(), theta.sin());
        HomodyneTrace {
            samples: x.iter().zip(&p).map(|(a, b)| ct * a + st * b).collect(),
            sample_rate: self.config.sample_rate,
            theta,
            seed,
            reference: with_reference.then(|| self.reference.clone()),
        }
    }

    /// Ensemble of `count` records, generated in parallel and returned in
    /// stream order.
    pub fn ensemble(&self, theta: f64, seed: u64, count: usize) -> Vec<HomodyneTrace> {
        (0..count as u64)
            .into_par_iter()
            .map(|i| self.trace(theta, seed, i, true))
            .collect()
    }
}

//! Linear-response transfer function of a Λ-type EIT medium and the
//! monochromatic / bichromatic channels built from it.
//!
//! Weak-probe amplitude transmission through a medium of intensity optical
//! depth `d`:
//!
//! ```text
//! t(δ) = exp[ −i (dΓ/4) χ(δ) ],   χ(δ) = 1 / ( δ + iΓ/2 − Ω² / (δ₂ + iγ₀) )
//! ```
//!
//! with `δ` the probe detuning from the excited state, `δ₂ = δ − δ_c` the
//! two-photon detuning, `Γ` the excited-state linewidth (FWHM), `γ₀` the
//! ground-state decoherence rate and `Ω` the control Rabi frequency (all in
//! rad/s). The imaginary part of the denominator is at least `Γ/2`, so
//! `|t| ≤ 1` and the absorption is bounded by the two-level value `e^{−d/2}`.
//! Limits:
//!
//! * `Ω = 0`: `χ = 1/(δ + iΓ/2)`, `|t(0)| = e^{−d/2}` (intensity `e^{−d}`).
//! * `γ₀ = 0, δ₂ = 0, Ω > 0`: dark state, `t = 1`.
//! * `|δ| → ∞`: `t → 1`.
//! * resonant control (`δ_c = 0`): `t(−δ) = t(δ)*`, so the two sidebands of
//!   a squeezed pair pick up opposite phases and the pair correlation only
//!   sees `|t|²`.
//!
//! With bichromatic control at `±Δ` (each tone Rabi frequency `Ω`) the probe
//! is split into the `a₊` mode, which shares the `cos(Δt)` time dependence of
//! the control and therefore has a dark state, and the `a₋` mode, which has
//! none. Averaging the `cos²` modulation over a beat period gives `a₊` an
//! effective Λ response with optical depth `d` and Rabi frequency `√2 Ω`,
//! while `a₋` sees the bare two-level absorption. Both are evaluated at the
//! demodulated (baseband) offset `f = δ − Δ`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_param, Error, Result};
use crate::gaussian::{CovarianceState, SqueezingLevels, VACUUM_VARIANCE};
use crate::sideband::{from_pm_basis, to_pm_basis, two_mode_quadrature_power, SidebandPair};

/// Natural linewidth of the ⁸⁷Rb D1 line, 2π × 5.75 MHz.
pub const RB87_D1_LINEWIDTH: f64 = 2.0 * PI * 5.75e6;

/// Converts a frequency in Hz to an angular frequency in rad/s.
pub fn hz_to_rad(hz: f64) -> f64 {
    2.0 * PI * hz
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EitParams {
    /// Intensity optical depth `d` (two-level transmission `e^{−d}`).
    pub optical_depth: f64,
    /// Excited-state linewidth Γ, rad/s.
    pub gamma: f64,
    /// Ground-state decoherence γ₀, rad/s.
    pub gamma0: f64,
    /// Control Rabi frequency Ω, rad/s (per tone when bichromatic).
    pub omega: f64,
    /// Control detuning δ_c from the excited state, rad/s.
    pub control_detuning: f64,
    pub bichromatic: bool,
    /// Tone offset Δ of bichromatic control, rad/s.
    pub bichromatic_offset: f64,
}

impl EitParams {
    pub fn monochromatic(optical_depth: f64, omega: f64, gamma0: f64, control_detuning: f64) -> Result<Self> {
        let p = Self {
            optical_depth,
            gamma: RB87_D1_LINEWIDTH,
            gamma0,
            omega,
            control_detuning,
            bichromatic: false,
            bichromatic_offset: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn bichromatic(optical_depth: f64, omega: f64, gamma0: f64, offset: f64) -> Result<Self> {
        let p = Self {
            optical_depth,
            gamma: RB87_D1_LINEWIDTH,
            gamma0,
            omega,
            control_detuning: 0.0,
            bichromatic: true,
            bichromatic_offset: offset,
        };
        p.validate()?;
        Ok(p)
    }

    /// No atoms: identity channel.
    pub fn empty(bichromatic: bool, offset: f64) -> Self {
        Self {
            optical_depth: 0.0,
            gamma: RB87_D1_LINEWIDTH,
            gamma0: 0.0,
            omega: 0.0,
            control_detuning: 0.0,
            bichromatic,
            bichromatic_offset: offset,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_param("optical_depth", self.optical_depth, self.optical_depth >= 0.0, "must be >= 0")?;
        check_param("gamma", self.gamma, self.gamma > 0.0, "must be > 0")?;
        check_param("gamma0", self.gamma0, self.gamma0 >= 0.0, "must be >= 0")?;
        check_param("omega", self.omega, self.omega >= 0.0, "must be >= 0")?;
        check_param("control_detuning", self.control_detuning, true, "must be finite")?;
        check_param(
            "bichromatic_offset",
            self.bichromatic_offset,
            !self.bichromatic || self.bichromatic_offset > 0.0,
            "bichromatic control needs a positive tone offset",
        )?;
        Ok(())
    }

    /// Rabi frequency seen by the `a₊` mode under bichromatic control.
    pub fn plus_mode_rabi(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.omega
    }
}

/// Complex transmission at one probe detuning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferSample {
    /// Probe detuning, rad/s.
    pub delta: f64,
    pub t: Complex64,
}

impl TransferSample {
    pub fn intensity(&self) -> f64 {
        self.t.norm_sqr()
    }

    pub fn phase(&self) -> f64 {
        self.t.arg()
    }
}

/// Λ-system response for explicit one- and two-photon detunings.
pub fn lambda_transmission(
    optical_depth: f64,
    gamma: f64,
    gamma0: f64,
    omega: f64,
    delta: f64,
    two_photon: f64,
) -> Complex64 {
    if optical_depth == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let i = Complex64::i();
    let chi = if omega == 0.0 {
        (delta + i * (gamma / 2.0)).inv()
    } else {
        let ground = two_photon + i * gamma0;
        if ground.norm_sqr() == 0.0 {
            // perfect dark state: the control term diverges, χ → 0
            return Complex64::new(1.0, 0.0);
        }
        (delta + i * (gamma / 2.0) - omega * omega / ground).inv()
    };
    (-i * (optical_depth * gamma / 4.0) * chi).exp()
}

/// Probe transmission at detuning `delta` (rad/s) for a single control tone.
pub fn transfer_function(params: &EitParams, delta: f64) -> TransferSample {
    let t = lambda_transmission(
        params.optical_depth,
        params.gamma,
        params.gamma0,
        params.omega,
        delta,
        delta - params.control_detuning,
    );
    TransferSample { delta, t }
}

/// Effective `a₊` transmission at baseband offset `f` (rad/s).
pub fn plus_mode_transfer(params: &EitParams, f: f64) -> TransferSample {
    let t = lambda_transmission(
        params.optical_depth,
        params.gamma,
        params.gamma0,
        params.plus_mode_rabi(),
        f,
        f - params.control_detuning,
    );
    TransferSample { delta: f, t }
}

/// `a₋` transmission at baseband offset `f` (rad/s): no dark state.
pub fn minus_mode_transfer(params: &EitParams, f: f64) -> TransferSample {
    let t = lambda_transmission(params.optical_depth, params.gamma, 0.0, 0.0, f, f);
    TransferSample { delta: f, t }
}

fn attenuate(state: &CovarianceState, mode: usize, eta: f64, phase: f64) -> Result<CovarianceState> {
    state.apply_loss(mode, eta.clamp(0.0, 1.0))?.apply_phase(mode, phase)
}

/// Single-tone control: each sideband of the pair is attenuated and phase
/// shifted by `t(±Δ)`.
pub fn apply_monochromatic_eit(
    state: &CovarianceState,
    pair: &SidebandPair,
    params: &EitParams,
) -> Result<CovarianceState> {
    params.validate()?;
    if params.bichromatic {
        return Err(Error::InvalidParameter {
            name: "bichromatic",
            value: 1.0,
            reason: "monochromatic channel called with bichromatic control",
        });
    }
    let up = transfer_function(params, pair.offset_rad());
    let low = transfer_function(params, -pair.offset_rad());
    let s = attenuate(state, pair.upper, up.intensity(), up.phase())?;
    attenuate(&s, pair.lower, low.intensity(), low.phase())
}

/// Bichromatic control acting on a state already in the ± basis (`pair.upper`
/// holds `a₊`, `pair.lower` holds `a₋`). The baseband offset is
/// `2π·pair.offset_hz − params.bichromatic_offset`.
///
/// A single-mode squeezed envelope at baseband `f` correlates the `±f`
/// components, so each mode gets the loss `|t(f) t(−f)|` and the mean phase
/// `(arg t(f) + arg t(−f))/2`; for resonant control the phase vanishes.
pub fn apply_bichromatic_eit(
    state_pm: &CovarianceState,
    pair: &SidebandPair,
    params: &EitParams,
) -> Result<CovarianceState> {
    params.validate()?;
    if !params.bichromatic {
        return Err(Error::InvalidParameter {
            name: "bichromatic",
            value: 0.0,
            reason: "bichromatic channel called with single-tone control",
        });
    }
    let f = pair.offset_rad() - params.bichromatic_offset;
    let (eta_p, phi_p) = symmetric_response(|x| plus_mode_transfer(params, x), f);
    let (eta_m, phi_m) = symmetric_response(|x| minus_mode_transfer(params, x), f);
    let s = attenuate(state_pm, pair.upper, eta_p, phi_p)?;
    attenuate(&s, pair.lower, eta_m, phi_m)
}

fn symmetric_response(t: impl Fn(f64) -> TransferSample, f: f64) -> (f64, f64) {
    let (pos, neg) = (t(f), t(-f));
    (pos.t.norm() * neg.t.norm(), 0.5 * (pos.phase() + neg.phase()))
}

/// Intensity transmission of the `a₊` mode at the centre of the window.
pub fn plus_mode_efficiency(params: &EitParams) -> f64 {
    symmetric_response(|x| plus_mode_transfer(params, x), 0.0).0
}

/// Ground-state decoherence that sets the `a₊` transmission at the window
/// centre to `target_eta`, for resonant control.
///
/// At `f = 0` the exponent is real: `|t|² = exp[−(dΓ/2) γ₀ / (Γγ₀/2 + Ω₊²)]`,
/// which inverts to `γ₀ = 2 L Ω₊² / (Γ (d − L))` with `L = ln(1/η)`.
pub fn calibrate_gamma0(optical_depth: f64, gamma: f64, plus_rabi: f64, target_eta: f64) -> Result<f64> {
    check_param("target_eta", target_eta, target_eta > 0.0 && target_eta <= 1.0, "must lie in (0, 1]")?;
    let l = -target_eta.ln();
    check_param(
        "optical_depth",
        optical_depth,
        optical_depth > l,
        "medium too thin to reach the target loss",
    )?;
    check_param("gamma", gamma, gamma > 0.0, "must be > 0")?;
    Ok(2.0 * l * plus_rabi * plus_rabi / (gamma * (optical_depth - l)))
}

/// Input sideband squeezing fed into a scan: a (possibly lossy) two-mode
/// squeezed vacuum whose two-mode quadrature power is minimal at
/// `theta_sq`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezedInput {
    pub squeezing_db: f64,
    pub antisqueezing_db: f64,
    /// LO phase of minimum noise, radians.
    pub theta_sq: f64,
}

impl SqueezedInput {
    pub fn levels(&self) -> Result<SqueezingLevels> {
        SqueezingLevels::new(self.squeezing_db, self.antisqueezing_db)
    }

    /// Two-mode state on `pair`, sideband basis.
    pub fn state(&self, pair: &SidebandPair) -> Result<CovarianceState> {
        let (r, eta) = self.levels()?.decompose()?;
        let zeta = crate::gaussian::SqueezeParam::new(r, 2.0 * self.theta_sq)?;
        let n = pair.upper.max(pair.lower) + 1;
        CovarianceState::vacuum(n)?
            .apply_two_mode_squeeze(pair.upper, pair.lower, zeta)?
            .apply_loss(pair.upper, eta)?
            .apply_loss(pair.lower, eta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    /// Power of the two-mode quadrature at the sideband offset.
    Direct,
    /// `a₊` quadrature at θ, versus baseband offset after demodulation.
    PlusMode,
    /// `a₋` quadrature at θ + π/2, versus baseband offset.
    MinusMode,
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::Direct => "direct",
            Analysis::PlusMode => "plus_mode",
            Analysis::MinusMode => "minus_mode",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub delta_hz: f64,
    pub power: f64,
}

/// Quadrature-noise power versus frequency, with the vacuum reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCurve {
    pub analysis: Analysis,
    pub theta: f64,
    pub shot_ref: f64,
    pub points: Vec<SpectrumPoint>,
}

impl SpectrumCurve {
    pub fn power_db(&self, index: usize) -> f64 {
        10.0 * (self.points[index].power / self.shot_ref).log10()
    }

    /// CSV with columns `delta_hz,power,power_db,shot_ref`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta_hz,power,power_db,shot_ref\n");
        for (i, p) in self.points.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", p.delta_hz, p.power, self.power_db(i), self.shot_ref));
        }
        out
    }
}

/// Propagates the input through the configured channel at one sideband
/// offset and returns the output in the sideband basis.
pub fn propagate(input: &SqueezedInput, params: &EitParams, offset_hz: f64) -> Result<CovarianceState> {
    let pair = SidebandPair::at_offset(offset_hz)?;
    let state = input.state(&pair)?;
    if params.bichromatic {
        let pm = to_pm_basis(&state, &pair)?;
        from_pm_basis(&apply_bichromatic_eit(&pm, &pair, params)?, &pair)
    } else {
        apply_monochromatic_eit(&state, &pair, params)
    }
}

/// Output power at each grid point (Hz).
///
/// For [`Analysis::Direct`] the grid holds sideband offsets `δ > 0`. For the
/// demodulated views it holds baseband offsets `f`, mapped to sideband
/// offsets `Δ + f` with `Δ = params.bichromatic_offset`.
pub fn spectrum_scan(
    input: &SqueezedInput,
    params: &EitParams,
    grid_hz: &[f64],
    theta: f64,
    analysis: Analysis,
) -> Result<SpectrumCurve> {
    if grid_hz.is_empty() {
        return Err(Error::EmptyGrid);
    }
    params.validate()?;
    input.levels()?;
    let demod_hz = params.bichromatic_offset / (2.0 * PI);
    if analysis != Analysis::Direct {
        check_param(
            "bichromatic_offset",
            params.bichromatic_offset,
            params.bichromatic_offset > 0.0,
            "demodulated views need a beat offset",
        )?;
    }
    let points = grid_hz
        .par_iter()
        .map(|&x| {
            let power = match analysis {
                Analysis::Direct => {
                    let out = propagate(input, params, x)?;
                    two_mode_quadrature_power(&out, &SidebandPair::at_offset(x)?, theta)?
                }
                Analysis::PlusMode | Analysis::MinusMode => {
                    let offset = demod_hz + x;
                    check_param("delta_hz", x, offset > 0.0, "baseband offset beyond the beat frequency")?;
                    let pair = SidebandPair::at_offset(offset)?;
                    let pm = to_pm_basis(&propagate(input, params, offset)?, &pair)?;
                    if analysis == Analysis::PlusMode {
                        pm.quadrature_second_moment(pair.upper, theta)?
                    } else {
                        pm.quadrature_second_moment(pair.lower, theta + FRAC_PI_2)?
                    }
                }
            };
            Ok(SpectrumPoint { delta_hz: x, power })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumCurve {
        analysis,
        theta,
        shot_ref: VACUUM_VARIANCE,
        points,
    })
}

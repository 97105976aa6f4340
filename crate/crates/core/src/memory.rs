//! Phenomenological storage and retrieval of the `a₊` pulse.
//!
//! The memory is a pure attenuation channel on `a₊` with transmission
//! `η_total = η₊ · η_m · exp(−rate · T_storage)`, where `η₊` is the EIT
//! transmission of the `a₊` mode at the centre of its window. The `a₋` mode
//! has no dark state and leaves the medium as vacuum.

use serde::{Deserialize, Serialize};

use crate::eit::{plus_mode_efficiency, EitParams};
use crate::error::{check_param, Error, Result};
use crate::gaussian::{db_to_ratio, CovarianceState, VACUUM_VARIANCE};
use crate::sideband::{SidebandPair, TemporalModeFn};

pub const DEFAULT_PULSE_FWHM: f64 = 470e-9;
pub const DEFAULT_STORAGE_TIME: f64 = 3e-6;
/// Retrieved pulses come out stretched by the finite transparency window. The
/// width must also stay long against the beat period, otherwise the sin and cos
/// pulse modes overlap and a₊ noise leaks into the a₋ projection.
pub const DEFAULT_RETRIEVED_FWHM: f64 = 1.5e-6;

/// Timing script and loss budget of one store/retrieve cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseExperiment {
    pub input_envelope: TemporalModeFn,
    /// Time at which the control light is switched off, s.
    pub write_off_time: f64,
    pub storage_time: f64,
    pub retrieved_envelope: TemporalModeFn,
    pub memory_efficiency: f64,
    /// Ground-state coherence decay during storage, 1/s.
    pub storage_decoherence: f64,
}

impl PulseExperiment {
    /// Gaussian input centred at `input_center`, control switched off one
    /// FWHM later, half-Gaussian retrieval as soon as the control returns.
    pub fn standard(
        input_center: f64,
        input_fwhm: f64,
        storage_time: f64,
        retrieved_fwhm: f64,
        memory_efficiency: f64,
        storage_decoherence: f64,
    ) -> Result<Self> {
        let write_off_time = input_center + input_fwhm;
        let exp = Self {
            input_envelope: TemporalModeFn::gaussian(input_center, input_fwhm)?,
            write_off_time,
            storage_time,
            retrieved_envelope: TemporalModeFn::half_gaussian(write_off_time + storage_time, retrieved_fwhm)?,
            memory_efficiency,
            storage_decoherence,
        };
        exp.validate()?;
        Ok(exp)
    }

    pub fn validate(&self) -> Result<()> {
        check_param("storage_time", self.storage_time, self.storage_time >= 0.0, "must be >= 0")?;
        check_param("write_off_time", self.write_off_time, true, "must be finite")?;
        check_param(
            "memory_efficiency",
            self.memory_efficiency,
            (0.0..=1.0).contains(&self.memory_efficiency),
            "must lie in [0, 1]",
        )?;
        check_param(
            "storage_decoherence",
            self.storage_decoherence,
            self.storage_decoherence >= 0.0,
            "must be >= 0",
        )?;
        let retrieval_start = self.retrieved_envelope.support().0;
        check_param(
            "retrieved_envelope",
            retrieval_start,
            retrieval_start >= self.read_on_time() - 1e-12,
            "retrieval must not begin before the control is switched back on",
        )?;
        Ok(())
    }

    pub fn read_on_time(&self) -> f64 {
        self.write_off_time + self.storage_time
    }

    /// Storage-only factor `η_m · exp(−rate · T)`.
    pub fn storage_efficiency(&self) -> f64 {
        self.memory_efficiency * (-self.storage_decoherence * self.storage_time).exp()
    }

    pub fn total_efficiency(&self, eit: &EitParams) -> f64 {
        plus_mode_efficiency(eit) * self.storage_efficiency()
    }

    /// Sets `memory_efficiency` so that the total transmission equals
    /// `target` for the given EIT parameters.
    pub fn calibrate_to(&mut self, target: f64, eit: &EitParams) -> Result<()> {
        check_param("target", target, (0.0..=1.0).contains(&target), "must lie in [0, 1]")?;
        let rest = plus_mode_efficiency(eit) * (-self.storage_decoherence * self.storage_time).exp();
        let eta_m = target / rest;
        check_param(
            "memory_efficiency",
            eta_m,
            rest > 0.0 && eta_m <= 1.0,
            "target exceeds what the EIT window and storage decay allow",
        )?;
        self.memory_efficiency = eta_m;
        Ok(())
    }
}

/// Normalised envelope amplitude at `t`; zero outside the support.
pub fn pulse_envelope(mode: &TemporalModeFn, t: f64) -> f64 {
    let (lo, hi) = mode.support();
    if t < lo || t > hi {
        return 0.0;
    }
    mode.value(t)
}

/// Stores and retrieves the `a₊` mode of a state in the ± basis.
pub fn store_retrieve(
    state_pm: &CovarianceState,
    pair: &SidebandPair,
    experiment: &PulseExperiment,
    eit: &EitParams,
) -> Result<CovarianceState> {
    eit.validate()?;
    experiment.validate()?;
    if !eit.bichromatic {
        return Err(Error::InvalidParameter {
            name: "bichromatic",
            value: 0.0,
            reason: "storage of the plus mode needs bichromatic control",
        });
    }
    let eta = experiment.total_efficiency(eit);
    state_pm.apply_loss(pair.upper, eta)?.reset_to_vacuum(pair.lower)
}

/// Transmission `η` of the pure-loss channel mapping variance `v_in` to
/// `v_out`; `None` when `v_in` is at the vacuum level.
pub fn invert_loss(v_in: f64, v_out: f64) -> Option<f64> {
    let gap = v_in - VACUUM_VARIANCE;
    (gap.abs() > 1e-15).then(|| (v_out - VACUUM_VARIANCE) / gap)
}

/// Same inversion for levels given in dB relative to shot noise.
pub fn invert_loss_db(in_db: f64, out_db: f64) -> Option<f64> {
    invert_loss(VACUUM_VARIANCE * db_to_ratio(in_db), VACUUM_VARIANCE * db_to_ratio(out_db))
}

/// Input antisqueezing that a pure-loss channel fitted on the squeezed
/// quadrature maps onto `out_anti_db`.
pub fn consistent_input_antisqueezing(in_sq_db: f64, out_sq_db: f64, out_anti_db: f64) -> Result<f64> {
    let eta = invert_loss_db(in_sq_db, out_sq_db).ok_or(Error::InvalidParameter {
        name: "squeezing_db",
        value: in_sq_db,
        reason: "input must be squeezed",
    })?;
    check_param("eta", eta, eta > 0.0 && eta <= 1.0, "levels are not related by loss")?;
    let ratio = 1.0 + (db_to_ratio(out_anti_db) - 1.0) / eta;
    Ok(10.0 * ratio.log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eit::{calibrate_gamma0, RB87_D1_LINEWIDTH};
    use crate::gaussian::SqueezingLevels;
    use crate::sideband::{to_pm_basis, ModeShape};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    const MHZ: f64 = 2.0 * PI * 1e6;

    fn eit() -> EitParams {
        let g0 = calibrate_gamma0(8.0, RB87_D1_LINEWIDTH, 3.0 * MHZ, 0.75).unwrap();
        EitParams::bichromatic(8.0, 3.0 * MHZ / SQRT_2, g0, 2.0 * MHZ).unwrap()
    }

    fn experiment(eta_m: f64, rate: f64) -> PulseExperiment {
        PulseExperiment::standard(1e-6, DEFAULT_PULSE_FWHM, DEFAULT_STORAGE_TIME, DEFAULT_RETRIEVED_FWHM, eta_m, rate).unwrap()
    }

    fn pm_input(sq: f64, anti: f64) -> (SidebandPair, CovarianceState) {
        let pair = SidebandPair::at_offset(2e6).unwrap();
        let input = crate::eit::SqueezedInput {
            squeezing_db: sq,
            antisqueezing_db: anti,
            theta_sq: FRAC_PI_2,
        };
        let s = input.state(&pair).unwrap();
        (pair, to_pm_basis(&s, &pair).unwrap())
    }

    #[test]
    fn lossless_memory_is_identity_on_plus_mode() {
        let (pair, pm) = pm_input(-1.78, 4.0);
        let ideal = EitParams::bichromatic(8.0, 3.0 * MHZ / SQRT_2, 0.0, 2.0 * MHZ).unwrap();
        let out = store_retrieve(&pm, &pair, &experiment(1.0, 0.0), &ideal).unwrap();
        assert_abs_diff_eq!(out.mode_cov(0).unwrap(), pm.mode_cov(0).unwrap(), epsilon = 1e-15);
        assert_abs_diff_eq!(out.quadrature_variance(1, 0.3).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn retrieved_levels_follow_calibrated_loss() {
        let eta = invert_loss_db(-1.78, -0.44).unwrap();
        assert_abs_diff_eq!(eta, 0.286538, epsilon = 1e-6);
        let anti = consistent_input_antisqueezing(-1.78, -0.44, 1.80).unwrap();
        assert_abs_diff_eq!(anti, 4.4596, epsilon = 1e-4);
        let (pair, pm) = pm_input(-1.78, anti);
        let mut exp = experiment(1.0, 0.0);
        exp.calibrate_to(eta, &eit()).unwrap();
        let out = store_retrieve(&pm, &pair, &exp, &eit()).unwrap();
        let db = |v: f64| 10.0 * (v / 0.25).log10();
        assert!((db(out.quadrature_variance(0, FRAC_PI_2).unwrap()) + 0.44).abs() < 0.05);
        assert!((db(out.quadrature_variance(0, 0.0).unwrap()) - 1.80).abs() < 0.05);
        let eta_sq = invert_loss(pm.quadrature_variance(0, FRAC_PI_2).unwrap(), out.quadrature_variance(0, FRAC_PI_2).unwrap()).unwrap();
        let eta_anti = invert_loss(pm.quadrature_variance(0, 0.0).unwrap(), out.quadrature_variance(0, 0.0).unwrap()).unwrap();
        assert!((eta_sq - eta_anti).abs() < 0.05);
    }

    #[test]
    fn plus_five_db_input_overshoots_antisqueezing() {
        let eta = invert_loss_db(-1.78, -0.44).unwrap();
        let out_anti = 10.0 * (1.0 + eta * (db_to_ratio(5.0) - 1.0)).log10();
        assert!(out_anti - 1.80 > 0.25, "{out_anti}");
        let mismatch = (invert_loss_db(5.0, 1.80).unwrap() - eta).abs();
        assert!(mismatch > 0.04 && mismatch < 0.05, "{mismatch}");
    }

    #[test]
    fn decoherence_and_efficiency_multiply() {
        let e = experiment(0.5, 1e5);
        assert_abs_diff_eq!(e.total_efficiency(&eit()), 0.75 * 0.5 * (-0.3f64).exp(), epsilon = 1e-12);
        let mut e = experiment(1.0, 0.0);
        assert!(e.calibrate_to(0.9, &eit()).is_err());
    }

    #[test]
    fn squeezing_degrades_monotonically() {
        let (pair, pm) = pm_input(-1.78, 4.4596);
        let (mut prev_sq, mut prev_anti) = (0.0, f64::INFINITY);
        for k in 0..=20 {
            let eta_m = 1.0 - k as f64 / 20.0;
            let out = store_retrieve(&pm, &pair, &experiment(eta_m, 0.0), &eit()).unwrap();
            let sq = out.quadrature_variance(0, FRAC_PI_2).unwrap();
            let anti = out.quadrature_variance(0, 0.0).unwrap();
            assert!(sq >= prev_sq && anti <= prev_anti);
            assert!(sq >= pm.quadrature_variance(0, FRAC_PI_2).unwrap() - 1e-15 && sq <= 0.25 + 1e-15);
            assert!(anti <= pm.quadrature_variance(0, 0.0).unwrap() + 1e-15 && anti >= 0.25 - 1e-15);
            assert!((out.quadrature_variance(1, 0.0).unwrap() - 0.25).abs() < 1e-3);
            assert!(out.is_physical());
            (prev_sq, prev_anti) = (sq, anti);
        }
    }

    #[test]
    fn envelopes_are_normalised_and_causal() {
        let e = experiment(1.0, 0.0);
        let peak = pulse_envelope(&e.input_envelope, 1e-6);
        assert!(peak > pulse_envelope(&e.input_envelope, 1.1e-6));
        assert!(peak > pulse_envelope(&e.input_envelope, 0.9e-6));
        let on = e.read_on_time();
        assert_eq!(pulse_envelope(&e.retrieved_envelope, on - 1e-9), 0.0);
        assert!(pulse_envelope(&e.retrieved_envelope, on) > 0.0);
        assert!(matches!(e.retrieved_envelope.shape(), ModeShape::HalfGaussian { .. }));
        for f in [&e.input_envelope, &e.retrieved_envelope] {
            let (lo, hi) = f.support();
            let n = 400_000;
            let h = (hi - lo) / n as f64;
            let energy: f64 = (0..n).map(|k| pulse_envelope(f, lo + (k as f64 + 0.5) * h).powi(2) * h).sum();
            assert_abs_diff_eq!(energy, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn invalid_experiments_are_rejected() {
        assert!(PulseExperiment::standard(1e-6, 470e-9, -1e-6, 470e-9, 0.5, 0.0).is_err());
        assert!(PulseExperiment::standard(1e-6, 470e-9, 3e-6, 470e-9, 1.5, 0.0).is_err());
        let mut e = experiment(0.5, 0.0);
        e.storage_time = 5e-6;
        assert!(e.validate().is_err());
        let mono = EitParams::monochromatic(8.0, 1.0, 0.0, 0.0).unwrap();
        let (pair, pm) = pm_input(-1.78, 1.78);
        assert!(store_retrieve(&pm, &pair, &experiment(0.5, 0.0), &mono).is_err());
        assert!(SqueezingLevels::new(-1.78, 1.0).is_err());
    }
}

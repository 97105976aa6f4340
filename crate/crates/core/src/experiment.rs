//! Runs a configured experiment end to end and returns every output file in
//! memory, so the caller decides where (and whether) to write them.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Preset};
use crate::dsp::{self, power_spectrum, SpectrumEstimate, TemporalProjector};
use crate::eit::{
    self, calibrate_gamma0, hz_to_rad, plus_mode_efficiency, spectrum_scan, Analysis, EitParams, SqueezedInput,
};
use crate::error::{Error, Result};
use crate::gaussian::{db_to_ratio, CovarianceState, VACUUM_VARIANCE};
use crate::memory::{consistent_input_antisqueezing, invert_loss, invert_loss_db, store_retrieve, PulseExperiment};
use crate::sideband::{to_pm_basis, SidebandPair};
use crate::synth::{
    beat_reference, synthesize_trace_stream, HomodyneTrace, Lineshape, NoiseSpectrumModel, PulseSynthesis,
    SidebandFeature,
};

/// Values fixed by calibration rather than given in the config.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub input_antisqueezing_db: f64,
    pub linewidth_hz: f64,
    pub rabi_hz: f64,
    pub plus_mode_rabi_hz: f64,
    pub decoherence_hz: f64,
    pub plus_transmission: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_efficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_efficiency: Option<f64>,
}

/// Config turned into model objects.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub input: SqueezedInput,
    pub eit: EitParams,
    pub pulse: Option<PulseExperiment>,
    pub calibration: Calibration,
}

fn config_error(diags: Vec<crate::config::Diagnostic>) -> Error {
    Error::InvalidParameter {
        name: "config",
        value: diags.len() as f64,
        reason: "configuration has violations",
    }
}

pub fn resolve(config: &ExperimentConfig) -> Result<Resolved> {
    let diags = config.validate();
    if !diags.is_empty() {
        return Err(config_error(diags));
    }
    let seed = config.seed.expect("validated");
    let (i, e, m) = (&config.input, &config.eit, &config.memory);
    let anti = match i.antisqueezing_db {
        Some(a) => a,
        None => consistent_input_antisqueezing(i.squeezing_db, m.target_squeezing_db, m.target_antisqueezing_db)?,
    };
    let input = SqueezedInput {
        squeezing_db: i.squeezing_db,
        antisqueezing_db: anti,
        theta_sq: i.theta_sq,
    };
    input.levels()?;
    let gamma = hz_to_rad(e.linewidth_hz);
    let omega = hz_to_rad(e.rabi_hz);
    let window_rabi = if e.bichromatic { SQRT_2 * omega } else { omega };
    let gamma0 = match e.decoherence_hz {
        Some(g) => hz_to_rad(g),
        None => calibrate_gamma0(e.optical_depth, gamma, window_rabi, e.target_plus_transmission)?,
    };
    let eit = EitParams {
        optical_depth: e.optical_depth,
        gamma,
        gamma0,
        omega,
        control_detuning: hz_to_rad(e.control_detuning_hz),
        bichromatic: e.bichromatic,
        bichromatic_offset: if e.bichromatic { hz_to_rad(e.beat_hz) } else { 0.0 },
    };
    eit.validate()?;
    let plus_transmission = if e.bichromatic {
        plus_mode_efficiency(&eit)
    } else {
        eit::transfer_function(&eit, 0.0).intensity()
    };
    let pulse = if e.bichromatic {
        let mut p = PulseExperiment::standard(
            m.pulse_center_s,
            m.pulse_fwhm_s,
            m.storage_time_s,
            m.retrieved_fwhm_s,
            m.memory_efficiency.unwrap_or(1.0),
            m.decoherence_rate,
        )?;
        if m.memory_efficiency.is_none() {
            let target = invert_loss_db(i.squeezing_db, m.target_squeezing_db).ok_or(Error::InvalidParameter {
                name: "input.squeezing_db",
                value: i.squeezing_db,
                reason: "input must be squeezed",
            })?;
            p.calibrate_to(target, &eit)?;
        }
        Some(p)
    } else {
        None
    };
    let calibration = Calibration {
        input_antisqueezing_db: anti,
        linewidth_hz: e.linewidth_hz,
        rabi_hz: e.rabi_hz,
        plus_mode_rabi_hz: window_rabi / (2.0 * PI),
        decoherence_hz: gamma0 / (2.0 * PI),
        plus_transmission,
        memory_efficiency: pulse.as_ref().map(|p| p.memory_efficiency),
        total_efficiency: pulse.as_ref().map(|p| p.total_efficiency(&eit)),
    };
    Ok(Resolved {
        config: config.clone(),
        seed,
        input,
        eit,
        pulse,
        calibration,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct ReportBundle {
    pub files: Vec<OutputFile>,
    pub summary: serde_json::Value,
    pub calibration: Calibration,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects output files; CSVs get a leading comment with the config hash.
struct Bundle {
    hash: String,
    files: Vec<OutputFile>,
}

impl Bundle {
    fn csv(&mut self, name: String, body: String) {
        let contents = format!("# config_sha256={}\n{body}", self.hash);
        self.files.push(OutputFile {
            name,
            contents: contents.into_bytes(),
        });
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) {
        let mut text = serde_json::to_string_pretty(value).expect("json value serialises");
        text.push('\n');
        self.files.push(OutputFile {
            name: name.into(),
            contents: text.into_bytes(),
        });
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn db(v: f64) -> f64 {
    10.0 * (v / VACUUM_VARIANCE).log10()
}

/// Output state at the beat frequency in the ± basis; checked for physicality.
pub fn output_pm_state(r: &Resolved) -> Result<(SidebandPair, CovarianceState)> {
    let pair = SidebandPair::at_offset(r.config.eit.beat_hz)?;
    let out = eit::propagate(&r.input, &r.eit, r.config.eit.beat_hz)?;
    let pm = to_pm_basis(&out, &pair)?;
    pm.ensure_physical()?;
    Ok((pair, pm))
}

fn input_pm_state(r: &Resolved) -> Result<(SidebandPair, CovarianceState)> {
    let pair = SidebandPair::at_offset(r.config.eit.beat_hz)?;
    Ok((pair, to_pm_basis(&r.input.state(&pair)?, &pair)?))
}

/// Analytic channel predictions at the beat frequency.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelSummary {
    pub direct_db: f64,
    pub direct_anti_db: f64,
    pub phase_min_db: f64,
    pub phase_max_db: f64,
    pub phase_spread_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plus_transmission: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minus_db: Option<f64>,
}

pub fn channel_summary(r: &Resolved) -> Result<ChannelSummary> {
    let c = &r.config;
    let theta = c.analysis.theta;
    let beat = c.eit.beat_hz;
    let at = |t: f64| -> Result<f64> {
        Ok(spectrum_scan(&r.input, &r.eit, &[beat], t, Analysis::Direct)?.points[0].power)
    };
    let sweep: Vec<f64> = (0..c.analysis.phase_points)
        .map(|k| at(k as f64 * PI / c.analysis.phase_points as f64).map(db))
        .collect::<Result<_>>()?;
    let min = sweep.iter().copied().fold(f64::INFINITY, f64::min);
    let max = sweep.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let direct = at(theta)?;
    let (mut recovery, mut plus, mut minus) = (None, None, None);
    if c.eit.bichromatic {
        let v_in = VACUUM_VARIANCE * db_to_ratio(r.input.squeezing_db);
        recovery = Some((VACUUM_VARIANCE - direct) / (VACUUM_VARIANCE - v_in));
        let (pair, pm_in) = input_pm_state(r)?;
        let (_, pm_out) = output_pm_state(r)?;
        plus = invert_loss(
            pm_in.quadrature_second_moment(pair.upper, theta)?,
            pm_out.quadrature_second_moment(pair.upper, theta)?,
        );
        minus = Some(db(pm_out.quadrature_second_moment(pair.lower, theta + FRAC_PI_2)?));
    }
    Ok(ChannelSummary {
        direct_db: db(direct),
        direct_anti_db: db(at(theta + FRAC_PI_2)?),
        phase_min_db: min,
        phase_max_db: max,
        phase_spread_db: max - min,
        recovery_fraction: recovery,
        plus_transmission: plus,
        minus_db: minus,
    })
}

/// Stationary model of the channel output at the beat frequency.
pub fn output_noise_model(r: &Resolved) -> Result<NoiseSpectrumModel> {
    let s = &r.config.synthesis;
    let (pair, pm) = output_pm_state(r)?;
    let feature = SidebandFeature::from_pm_state(
        r.config.eit.beat_hz,
        Lineshape::FlatTop {
            half_width_hz: s.feature_half_width_hz,
            taper_hz: s.feature_taper_hz,
        },
        &pm,
        &pair,
        s.beat_phase,
    )?;
    Ok(NoiseSpectrumModel {
        shot_level: s.shot_level,
        features: vec![feature],
        lines: Vec::new(),
    })
}

/// `count` records of `model`, from streams `first..first + count` of `seed`.
/// Records without a feature get the model's beat reference attached.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_records(
    model: &NoiseSpectrumModel,
    theta: f64,
    sample_rate: f64,
    n: usize,
    seed: u64,
    first: u64,
    count: usize,
    reference: Option<(f64, f64)>,
) -> Result<Vec<HomodyneTrace>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut t = synthesize_trace_stream(model, theta, sample_rate, n, seed, first + i)?;
            if t.reference.is_none() {
                if let Some((f, phase)) = reference {
                    t.reference = Some(beat_reference(f, phase, sample_rate, n)?);
                }
            }
            Ok(t)
        })
        .collect()
}

/// Measured spectra of synthesized records, calibrated by synthesized shot
/// records of the same length.
#[derive(Clone, Debug)]
pub struct MeasuredSpectra {
    pub direct: SpectrumEstimate,
    pub plus: Option<SpectrumEstimate>,
    pub minus: Option<SpectrumEstimate>,
}

fn spectra_of(r: &Resolved, traces: &[HomodyneTrace], demod: bool) -> Result<[Option<SpectrumEstimate>; 3]> {
    let a = &r.config.analysis;
    let direct = power_spectrum(traces, a.segment_len, a.window, a.overlap)?;
    if !demod {
        return Ok([Some(direct), None, None]);
    }
    let demod_at = |offset: f64| -> Result<SpectrumEstimate> {
        let d: Vec<HomodyneTrace> = traces
            .par_iter()
            .map(|t| dsp::demodulate(t, offset))
            .collect::<Result<_>>()?;
        power_spectrum(&d, a.segment_len, a.window, a.overlap)
    };
    Ok([
        Some(direct),
        Some(demod_at(a.demod_phase)?),
        Some(demod_at(a.demod_phase + FRAC_PI_2)?),
    ])
}

pub fn measure_spectra(r: &Resolved) -> Result<MeasuredSpectra> {
    let s = &r.config.synthesis;
    let model = output_noise_model(r)?;
    let demod = r.config.eit.bichromatic;
    let theta = r.config.analysis.theta;
    let reference = Some((r.config.eit.beat_hz, s.beat_phase));
    let signal = synthesize_records(&model, theta, s.sample_rate, s.n_samples, r.seed, 0, s.n_traces, reference)?;
    let [d, p, m] = spectra_of(r, &signal, demod)?;
    drop(signal);
    let shot_model = NoiseSpectrumModel::shot_only(s.shot_level);
    let shot = synthesize_records(
        &shot_model,
        theta,
        s.sample_rate,
        s.n_samples,
        r.seed,
        s.n_traces as u64,
        s.n_traces,
        reference,
    )?;
    let [sd, sp, sm] = spectra_of(r, &shot, demod)?;
    let calibrate = |x: Option<SpectrumEstimate>, y: Option<SpectrumEstimate>| -> Result<Option<SpectrumEstimate>> {
        match (x, y) {
            (Some(x), Some(y)) => Ok(Some(x.with_shot_estimate(&y)?)),
            _ => Ok(None),
        }
    };
    Ok(MeasuredSpectra {
        direct: calibrate(d, sd)?.expect("direct spectrum always present"),
        plus: calibrate(p, sp)?,
        minus: calibrate(m, sm)?,
    })
}

fn band_db(est: &SpectrumEstimate, lo: f64, hi: f64) -> Result<f64> {
    let (p, s) = est.band_mean(lo, hi)?;
    dsp::to_db(p, s)
}

/// Retrieved-pulse variance of one demodulated mode at one LO phase.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PulseVariance {
    pub mode: String,
    pub theta: f64,
    pub variance: f64,
    pub standard_error: f64,
    pub shot_ref: f64,
    pub db: f64,
    pub db_error: f64,
    pub predicted_db: f64,
    pub n_traces: usize,
}

#[derive(Clone, Debug)]
pub struct PulseReport {
    pub rows: Vec<PulseVariance>,
    pub samples: Vec<dsp::QuadratureSampleSet>,
    /// Single-η loss fits from the measured squeezed and antisqueezed a₊.
    pub eta_squeezed: f64,
    pub eta_antisqueezed: f64,
}

/// Retrieved ± state of the memory experiment.
pub fn retrieved_state(r: &Resolved) -> Result<(SidebandPair, CovarianceState, CovarianceState)> {
    let pulse = r.pulse.as_ref().ok_or(Error::InvalidParameter {
        name: "eit.bichromatic",
        value: 0.0,
        reason: "pulse storage needs bichromatic control",
    })?;
    let (pair, pm_in) = input_pm_state(r)?;
    let out = store_retrieve(&pm_in, &pair, pulse, &r.eit)?;
    out.ensure_physical()?;
    Ok((pair, pm_in, out))
}

pub fn measure_pulses(r: &Resolved) -> Result<PulseReport> {
    let s = &r.config.synthesis;
    let a = &r.config.analysis;
    let pulse = r.pulse.as_ref().expect("retrieved_state checks for a pulse experiment");
    let (pair, pm_in, pm_out) = retrieved_state(r)?;
    let synth = PulseSynthesis {
        shot_level: s.shot_level,
        sample_rate: s.pulse_sample_rate,
        n_samples: s.pulse_samples,
        beat_hz: r.config.eit.beat_hz,
        beat_phase: s.beat_phase,
        envelope: pulse.retrieved_envelope.clone(),
        pm_cov: SidebandFeature::from_pm_state(
            r.config.eit.beat_hz,
            Lineshape::FlatTop {
                half_width_hz: 0.0,
                taper_hz: r.config.eit.beat_hz / 2.0,
            },
            &pm_out,
            &pair,
            s.beat_phase,
        )?
        .pm_cov,
    }
    .prepare()?;
    let env = pulse.retrieved_envelope.sample(s.pulse_sample_rate, s.pulse_samples)?;
    let plus = TemporalProjector::new(synth.reference(), s.pulse_sample_rate, &env, a.demod_phase)?;
    let minus = TemporalProjector::new(synth.reference(), s.pulse_sample_rate, &env, a.demod_phase + FRAC_PI_2)?;
    let per_sample = s.shot_level * s.pulse_sample_rate / 2.0;
    let thetas = [r.input.theta_sq, r.input.theta_sq - FRAC_PI_2];
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for (ti, &theta) in thetas.iter().enumerate() {
        let first = (ti * s.pulse_traces) as u64;
        let values: Vec<(f64, f64)> = (0..s.pulse_traces as u64)
            .into_par_iter()
            .map(|i| {
                let t = synth.trace(theta, r.seed, first + i, false);
                Ok((plus.project(&t.samples)?, minus.project(&t.samples)?))
            })
            .collect::<Result<_>>()?;
        for (mode, proj, which) in [("plus", &plus, 0), ("minus", &minus, 1)] {
            let set = dsp::QuadratureSampleSet {
                values: values.iter().map(|v| if which == 0 { v.0 } else { v.1 }).collect(),
                theta,
                mode_fn: Some(pulse.retrieved_envelope.clone()),
            };
            let (var, se) = dsp::variance_estimate(&set)?;
            let shot = proj.white_noise_variance(per_sample);
            let predicted = if which == 0 {
                pm_out.quadrature_second_moment(pair.upper, theta)?
            } else {
                pm_out.quadrature_second_moment(pair.lower, theta + FRAC_PI_2)?
            };
            rows.push(PulseVariance {
                mode: mode.into(),
                theta,
                variance: var,
                standard_error: se,
                shot_ref: shot,
                db: dsp::to_db(var, shot)?,
                db_error: 10.0 / std::f64::consts::LN_10 * se / var,
                predicted_db: db(predicted),
                n_traces: s.pulse_traces,
            });
            samples.push(set);
        }
    }
    let ratio_in = |theta: f64| -> Result<f64> { Ok(pm_in.quadrature_second_moment(pair.upper, theta)? / VACUUM_VARIANCE) };
    let fit = |row: &PulseVariance| -> Result<f64> {
        let measured = row.variance / row.shot_ref;
        Ok((measured - 1.0) / (ratio_in(row.theta)? - 1.0))
    };
    Ok(PulseReport {
        eta_squeezed: fit(&rows[0])?,
        eta_antisqueezed: fit(&rows[2])?,
        rows,
        samples,
    })
}

fn pulse_csv(rows: &[PulseVariance]) -> String {
    let mut out = String::from("mode,theta,variance,standard_error,shot_ref,db,db_error,predicted_db,n_traces\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.mode, r.theta, r.variance, r.standard_error, r.shot_ref, r.db, r.db_error, r.predicted_db, r.n_traces
        ));
    }
    out
}

fn phase_sweep_csv(r: &Resolved) -> Result<String> {
    let n = r.config.analysis.phase_points;
    let beat = r.config.eit.beat_hz;
    let mut out = String::from("theta,power,power_db\n");
    for k in 0..n {
        let theta = k as f64 * PI / n as f64;
        let p = spectrum_scan(&r.input, &r.eit, &[beat], theta, Analysis::Direct)?.points[0].power;
        out.push_str(&format!("{theta},{p},{}\n", db(p)));
    }
    Ok(out)
}

/// Executes the experiment and returns all outputs, including the manifest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ReportBundle> {
    let r = resolve(config)?;
    let c = &r.config;
    let name = c.experiment.name();
    let mut bundle = Bundle {
        hash: c.hash(),
        files: Vec::new(),
    };
    let summary = match c.experiment {
        Preset::Fig5 => {
            let (pair, pm_in, pm_out) = retrieved_state(&r)?;
            let mut levels = Vec::new();
            for theta in [r.input.theta_sq, r.input.theta_sq - FRAC_PI_2] {
                levels.push(json!({
                    "theta": theta,
                    "input_plus_db": db(pm_in.quadrature_second_moment(pair.upper, theta)?),
                    "retrieved_plus_db": db(pm_out.quadrature_second_moment(pair.upper, theta)?),
                    "retrieved_minus_db": db(pm_out.quadrature_second_moment(pair.lower, theta + FRAC_PI_2)?),
                }));
            }
            let mut s = json!({ "analytic": levels });
            if c.synthesis.enabled {
                let report = measure_pulses(&r)?;
                bundle.csv(format!("{name}_retrieved.csv"), pulse_csv(&report.rows));
                if c.output.write_samples {
                    for (row, set) in report.rows.iter().zip(&report.samples) {
                        bundle.csv(format!("{name}_samples_{}_theta{:.4}.csv", row.mode, row.theta), set.to_csv());
                    }
                }
                s["measured"] = json!({
                    "rows": report.rows,
                    "eta_squeezed": report.eta_squeezed,
                    "eta_antisqueezed": report.eta_antisqueezed,
                    "eta_mismatch": (report.eta_squeezed - report.eta_antisqueezed).abs(),
                });
            }
            s
        }
        _ => {
            let a = &c.analysis;
            let grid = linspace(a.scan_start_hz, a.scan_stop_hz, a.scan_points);
            let direct = spectrum_scan(&r.input, &r.eit, &grid, a.theta, Analysis::Direct)?;
            bundle.csv(format!("{name}_direct.csv"), direct.to_csv());
            let anti = spectrum_scan(&r.input, &r.eit, &grid, a.theta + FRAC_PI_2, Analysis::Direct)?;
            bundle.csv(format!("{name}_direct_anti.csv"), anti.to_csv());
            if c.eit.bichromatic {
                let base = linspace(-a.baseband_span_hz, a.baseband_span_hz, a.baseband_points);
                let plus = spectrum_scan(&r.input, &r.eit, &base, a.theta, Analysis::PlusMode)?;
                bundle.csv(format!("{name}_plus_mode.csv"), plus.to_csv());
                let minus = spectrum_scan(&r.input, &r.eit, &base, a.theta, Analysis::MinusMode)?;
                bundle.csv(format!("{name}_minus_mode.csv"), minus.to_csv());
            }
            bundle.csv(format!("{name}_phase_sweep.csv"), phase_sweep_csv(&r)?);
            for f in &grid {
                eit::propagate(&r.input, &r.eit, *f)?.ensure_physical()?;
            }
            let mut s = json!({ "analytic": channel_summary(&r)? });
            if c.synthesis.enabled {
                let m = measure_spectra(&r)?;
                let beat = c.eit.beat_hz;
                bundle.csv(format!("{name}_measured_direct.csv"), m.direct.to_csv());
                let mut measured = json!({
                    "n_averages": m.direct.n_averages,
                    "direct_db": band_db(&m.direct, beat - a.band_hz, beat + a.band_hz)?,
                });
                if let (Some(p), Some(q)) = (&m.plus, &m.minus) {
                    bundle.csv(format!("{name}_measured_plus_mode.csv"), p.to_csv());
                    bundle.csv(format!("{name}_measured_minus_mode.csv"), q.to_csv());
                    measured["plus_db"] = json!(band_db(p, 0.0, a.band_hz)?);
                    measured["minus_db"] = json!(band_db(q, 0.0, a.band_hz)?);
                }
                s["measured"] = measured;
            }
            s
        }
    };
    let mut summary = summary;
    summary["experiment"] = json!(name);
    summary["config_sha256"] = json!(bundle.hash);
    bundle.json("summary.json", &summary);
    let files: Vec<serde_json::Value> = bundle
        .files
        .iter()
        .map(|f| json!({ "name": f.name, "sha256": sha256_hex(&f.contents) }))
        .collect();
    let manifest = json!({
        "tool": "sqmem",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": name,
        "config_sha256": bundle.hash,
        "config": c,
        "calibration": r.calibration,
        "files": files,
    });
    bundle.json("manifest.json", &manifest);
    Ok(ReportBundle {
        files: bundle.files,
        summary,
        calibration: r.calibration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(preset: Preset) -> ExperimentConfig {
        let mut c = preset.config(42);
        c.synthesis.n_samples = 1 << 14;
        c.synthesis.pulse_traces = 200;
        c.analysis.scan_points = 11;
        c.analysis.baseband_points = 11;
        c
    }

    #[test]
    fn calibration_fills_unset_values() {
        let r = resolve(&Preset::Fig5.config(1)).unwrap();
        assert!((r.calibration.plus_transmission - 0.75).abs() < 1e-12);
        assert!((r.calibration.total_efficiency.unwrap() - 0.286538).abs() < 1e-6);
        assert!((r.calibration.input_antisqueezing_db - 4.4596).abs() < 1e-4);
        assert!((r.calibration.plus_mode_rabi_hz - 3e6).abs() < 1e-6);
        let mut c = Preset::Fig5.config(1);
        c.seed = None;
        assert!(resolve(&c).is_err());
    }

    #[test]
    fn fig4_bundle_has_expected_files() {
        let b = run_experiment(&small(Preset::Fig4)).unwrap();
        let names: Vec<&str> = b.files.iter().map(|f| f.name.as_str()).collect();
        for want in ["fig4_direct.csv", "fig4_plus_mode.csv", "fig4_minus_mode.csv", "manifest.json", "summary.json"] {
            assert!(names.contains(&want), "{names:?}");
        }
        let again = run_experiment(&small(Preset::Fig4)).unwrap();
        assert_eq!(b.files, again.files);
    }

    #[test]
    fn manifest_round_trips_config() {
        let c = small(Preset::Fig3Detuned2m);
        let b = run_experiment(&c).unwrap();
        let manifest = b.files.iter().find(|f| f.name == "manifest.json").unwrap();
        let v: serde_json::Value = serde_json::from_slice(&manifest.contents).unwrap();
        let back: ExperimentConfig = serde_json::from_value(v["config"].clone()).unwrap();
        assert_eq!(back, c);
        assert_eq!(v["config_sha256"], json!(c.hash()));
        for f in &b.files {
            assert!(String::from_utf8_lossy(&f.contents).contains(&c.hash()), "{}", f.name);
        }
    }

    #[test]
    fn fig5_bundle_reports_four_variances() {
        let b = run_experiment(&small(Preset::Fig5)).unwrap();
        let rows = b.summary["measured"]["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 4);
    }
}

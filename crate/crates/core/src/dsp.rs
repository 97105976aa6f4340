//! Measurement chain: lock-in demodulation, averaged power spectra,
//! temporal-mode projection and calibration against shot noise.
//!
//! Demodulation multiplies by `√2 sin(2πΔt + φ_b + offset)`, so a pure tone
//! `A sin(2πΔt + φ_b)` maps to a DC level `A/√2` and a sideband feature keeps
//! its spectral density when moved to baseband. Spectra are one-sided and
//! normalised so that `Σ PSD · df` equals the mean square of the record.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check_param, Error, Result};
use crate::sideband::TemporalModeFn;
use crate::synth::{HomodyneTrace, ReferenceChannel};

/// Sum by recursive halving, so the result does not depend on how the work
/// was split between threads.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn pairwise_sum_vecs(rows: &[Vec<f64>]) -> Vec<f64> {
    match rows.len() {
        0 => Vec::new(),
        1 => rows[0].clone(),
        _ => {
            let (a, b) = rows.split_at(rows.len() / 2);
            let mut out = pairwise_sum_vecs(a);
            out.iter_mut().zip(pairwise_sum_vecs(b)).for_each(|(x, y)| *x += y);
            out
        }
    }
}

/// Multiplies the record by `√2 × reference` shifted by `reference_phase_offset`.
pub fn demodulate(trace: &HomodyneTrace, reference_phase_offset: f64) -> Result<HomodyneTrace> {
    trace.validate()?;
    let reference = trace.reference.as_ref().ok_or(Error::MissingReference)?;
    let wave = reference.waveform(trace.sample_rate, reference_phase_offset);
    Ok(HomodyneTrace {
        samples: trace.samples.iter().zip(&wave).map(|(x, r)| SQRT_2 * r * x).collect(),
        sample_rate: trace.sample_rate,
        theta: trace.theta,
        seed: trace.seed,
        reference: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rect,
    Hann,
}

impl Window {
    fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            // periodic form
            Window::Hann => (0..n)
                .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub n_averages: usize,
    /// Shot-noise reference per bin; empty until calibrated.
    pub shot_ref: Vec<f64>,
}

impl SpectrumEstimate {
    pub fn bin_width(&self) -> f64 {
        if self.freqs.len() < 2 {
            0.0
        } else {
            self.freqs[1] - self.freqs[0]
        }
    }

    pub fn with_shot_estimate(mut self, shot: &SpectrumEstimate) -> Result<Self> {
        if shot.freqs != self.freqs {
            return Err(Error::Dimension("shot reference is on a different frequency grid".into()));
        }
        self.shot_ref = shot.power.clone();
        Ok(self)
    }

    pub fn with_flat_shot(mut self, level: f64) -> Result<Self> {
        check_param("shot_ref", level, level > 0.0, "must be positive")?;
        self.shot_ref = vec![level; self.freqs.len()];
        Ok(self)
    }

    /// `10 log10(power / shot_ref)` per bin; NaN where no reference is set.
    pub fn db(&self) -> Vec<f64> {
        (0..self.power.len())
            .map(|i| match self.shot_ref.get(i) {
                Some(&s) if s > 0.0 => 10.0 * (self.power[i] / s).log10(),
                _ => f64::NAN,
            })
            .collect()
    }

    /// Indices of bins with `lo ≤ f ≤ hi`.
    pub fn band(&self, lo: f64, hi: f64) -> Vec<usize> {
        (0..self.freqs.len()).filter(|&i| self.freqs[i] >= lo && self.freqs[i] <= hi).collect()
    }

    /// Band-averaged power and shot reference.
    pub fn band_mean(&self, lo: f64, hi: f64) -> Result<(f64, f64)> {
        let idx = self.band(lo, hi);
        if idx.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let n = idx.len() as f64;
        let p: Vec<f64> = idx.iter().map(|&i| self.power[i]).collect();
        let s: Vec<f64> = idx.iter().map(|&i| self.shot_ref.get(i).copied().unwrap_or(f64::NAN)).collect();
        Ok((pairwise_sum(&p) / n, pairwise_sum(&s) / n))
    }

    /// CSV with columns `freq_hz,power,db,shot_ref,n_avg`.
    pub fn to_csv(&self) -> String {
        let db = self.db();
        let mut out = String::from("freq_hz,power,db,shot_ref,n_avg\n");
        for (i, (f, p)) in self.freqs.iter().zip(&self.power).enumerate() {
            let shot = self.shot_ref.get(i).copied().unwrap_or(f64::NAN);
            out.push_str(&format!("{f},{p},{},{shot},{}\n", db[i], self.n_averages));
        }
        out
    }
}

/// Welch-averaged one-sided PSD over all segments of all traces.
pub fn power_spectrum(
    traces: &[HomodyneTrace],
    segment_len: usize,
    window: Window,
    overlap: f64,
) -> Result<SpectrumEstimate> {
    let first = traces.first().ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
    let rate = first.sample_rate;
    check_param("overlap", overlap, (0.0..1.0).contains(&overlap), "must lie in [0, 1)")?;
    if segment_len < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: segment_len,
        });
    }
    for t in traces {
        t.validate()?;
        if t.sample_rate != rate {
            return Err(Error::Dimension("traces have different sample rates".into()));
        }
        if t.len() < segment_len {
            return Err(Error::TooFewSamples {
                needed: segment_len,
                got: t.len(),
            });
        }
    }
    let hop = ((segment_len as f64 * (1.0 - overlap)).round() as usize).max(1);
    let jobs: Vec<(usize, usize)> = traces
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..=(t.len() - segment_len) / hop).map(move |s| (i, s * hop)))
        .collect();
    let w = window.coefficients(segment_len);
    let norm = rate * w.iter().map(|v| v * v).sum::<f64>();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(segment_len);
    let n_bins = segment_len / 2 + 1;
    let periodogram = |&(i, start): &(usize, usize)| -> Vec<f64> {
        let mut buf: Vec<Complex64> = traces[i].samples[start..start + segment_len]
            .iter()
            .zip(&w)
            .map(|(x, c)| Complex64::new(x * c, 0.0))
            .collect();
        fft.process(&mut buf);
        (0..n_bins)
            .map(|k| {
                let two_sided = k != 0 && !(segment_len % 2 == 0 && k == segment_len / 2);
                let scale = if two_sided { 2.0 } else { 1.0 };
                scale * buf[k].norm_sqr() / norm
            })
            .collect()
    };
    // fixed chunking keeps the summation tree independent of thread count
    let partial: Vec<Vec<f64>> = jobs
        .chunks(64)
        .map(|chunk| {
            let rows: Vec<Vec<f64>> = chunk.par_iter().map(periodogram).collect();
            pairwise_sum_vecs(&rows)
        })
        .collect();
    let total = pairwise_sum_vecs(&partial);
    let n_avg = jobs.len();
    Ok(SpectrumEstimate {
        freqs: (0..n_bins).map(|k| k as f64 * rate / segment_len as f64).collect(),
        power: total.into_iter().map(|v| v / n_avg as f64).collect(),
        n_averages: n_avg,
        shot_ref: Vec::new(),
    })
}

/// Precomputed projection kernel `√2 ref(t; φ) u(t) dt`.
#[derive(Clone, Debug)]
pub struct TemporalProjector {
    kernel: Vec<f64>,
}

impl TemporalProjector {
    pub fn new(reference: &ReferenceChannel, sample_rate: f64, envelope: &[f64], demod_phase: f64) -> Result<Self> {
        if envelope.len() != reference.samples.len() {
            return Err(Error::Dimension(format!(
                "mode function has {} samples, trace has {}",
                envelope.len(),
                reference.samples.len()
            )));
        }
        let dt = 1.0 / sample_rate;
        let wave = reference.waveform(sample_rate, demod_phase);
        Ok(Self {
            kernel: wave.iter().zip(envelope).map(|(r, e)| SQRT_2 * r * e * dt).collect(),
        })
    }

    pub fn for_mode(reference: &ReferenceChannel, sample_rate: f64, mode: &TemporalModeFn, demod_phase: f64) -> Result<Self> {
        let env = mode.sample(sample_rate, reference.samples.len())?;
        Self::new(reference, sample_rate, &env, demod_phase)
    }

    pub fn project(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.kernel.len() {
            return Err(Error::Dimension(format!(
                "kernel has {} samples, trace has {}",
                self.kernel.len(),
                samples.len()
            )));
        }
        Ok(self.kernel.iter().zip(samples).map(|(k, x)| k * x).sum())
    }

    /// Variance of the projection of white noise with the given per-sample
    /// variance.
    pub fn white_noise_variance(&self, per_sample_variance: f64) -> f64 {
        per_sample_variance * self.kernel.iter().map(|k| k * k).sum::<f64>()
    }
}

/// Demodulates, weights by the envelope and integrates: one quadrature value.
pub fn project_temporal_mode(trace: &HomodyneTrace, envelope: &[f64], demod_phase: f64) -> Result<f64> {
    trace.validate()?;
    let reference = trace.reference.as_ref().ok_or(Error::MissingReference)?;
    TemporalProjector::new(reference, trace.sample_rate, envelope, demod_phase)?.project(&trace.samples)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSampleSet {
    pub values: Vec<f64>,
    pub theta: f64,
    pub mode_fn: Option<TemporalModeFn>,
}

impl QuadratureSampleSet {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }
}

/// Unbiased variance and its standard error `Var · √(2/(n−1))`.
pub fn variance_estimate(samples: &QuadratureSampleSet) -> Result<(f64, f64)> {
    let v = &samples.values;
    if v.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: v.len() });
    }
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "values",
            value: *bad,
            reason: "non-finite quadrature sample",
        });
    }
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    let sq: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    Ok((var, var * (2.0 / (n - 1.0)).sqrt()))
}

pub fn to_db(power: f64, shot_ref: f64) -> Result<f64> {
    check_param("shot_ref", shot_ref, shot_ref > 0.0, "must be positive")?;
    Ok(10.0 * (power / shot_ref).log10())
}

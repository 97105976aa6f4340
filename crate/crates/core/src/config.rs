//! Experiment configuration: TOML with dotted sections, presets, validation
//! with field-path diagnostics and a stable content hash.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::Window;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig3Resonant,
    Fig3Detuned500k,
    Fig3Detuned2m,
    Fig4,
    Fig5,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Fig3Resonant,
        Preset::Fig3Detuned500k,
        Preset::Fig3Detuned2m,
        Preset::Fig4,
        Preset::Fig5,
        Preset::Custom,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig3Resonant => "fig3_resonant",
            Preset::Fig3Detuned500k => "fig3_detuned_500k",
            Preset::Fig3Detuned2m => "fig3_detuned_2m",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Custom => "custom",
        }
    }

    pub fn parse(name: &str) -> Option<Preset> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Default configuration for this experiment, seeded with `seed`.
    pub fn config(&self, seed: u64) -> ExperimentConfig {
        let mut c = ExperimentConfig {
            experiment: *self,
            seed: Some(seed),
            input: InputConfig::default(),
            eit: EitConfig::default(),
            memory: MemoryConfig::default(),
            synthesis: SynthesisConfig::default(),
            analysis: AnalysisConfig::default(),
            output: OutputConfig::default(),
        };
        match self {
            Preset::Fig3Resonant => c.eit.control_detuning_hz = 0.0,
            Preset::Fig3Detuned500k => c.eit.control_detuning_hz = 0.5e6,
            Preset::Fig3Detuned2m => c.eit.control_detuning_hz = 2e6,
            Preset::Fig4 | Preset::Fig5 | Preset::Custom => {
                c.eit.bichromatic = true;
                c.eit.rabi_hz = DEFAULT_RABI_HZ / std::f64::consts::SQRT_2;
            }
        }
        if matches!(self, Preset::Fig3Resonant | Preset::Fig3Detuned500k | Preset::Fig3Detuned2m) {
            c.analysis.scan_start_hz = 0.05e6;
        }
        c
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const DEFAULT_RABI_HZ: f64 = 3e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub squeezing_db: f64,
    /// Left unset, the level that makes the pure-loss memory model consistent
    /// with `memory.target_*` is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub antisqueezing_db: Option<f64>,
    pub theta_sq: f64,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            squeezing_db: -1.78,
            antisqueezing_db: None,
            theta_sq: FRAC_PI_2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EitConfig {
    pub optical_depth: f64,
    /// Excited-state linewidth Γ/2π.
    pub linewidth_hz: f64,
    /// Control Rabi frequency Ω/2π, per tone when bichromatic.
    pub rabi_hz: f64,
    /// γ₀/2π; left unset, calibrated to `target_plus_transmission`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decoherence_hz: Option<f64>,
    pub target_plus_transmission: f64,
    pub control_detuning_hz: f64,
    pub bichromatic: bool,
    /// Beat frequency Δ of the analysed sidebands (and tone offset of
    /// bichromatic control).
    pub beat_hz: f64,
}

impl Default for EitConfig {
    fn default() -> Self {
        Self {
            optical_depth: 8.0,
            linewidth_hz: 5.75e6,
            rabi_hz: DEFAULT_RABI_HZ,
            decoherence_hz: None,
            target_plus_transmission: 0.75,
            control_detuning_hz: 0.0,
            bichromatic: false,
            beat_hz: 2e6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryConfig {
    pub pulse_fwhm_s: f64,
    pub pulse_center_s: f64,
    pub storage_time_s: f64,
    pub retrieved_fwhm_s: f64,
    pub decoherence_rate: f64,
    /// η_m; left unset, calibrated so that the retrieved squeezing equals
    /// `target_squeezing_db`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_efficiency: Option<f64>,
    pub target_squeezing_db: f64,
    pub target_antisqueezing_db: f64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            pulse_fwhm_s: 470e-9,
            pulse_center_s: 1e-6,
            storage_time_s: 3e-6,
            retrieved_fwhm_s: crate::memory::DEFAULT_RETRIEVED_FWHM,
            decoherence_rate: 0.0,
            memory_efficiency: None,
            target_squeezing_db: -0.44,
            target_antisqueezing_db: 1.80,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    pub enabled: bool,
    pub shot_level: f64,
    pub sample_rate: f64,
    pub n_samples: usize,
    pub n_traces: usize,
    pub feature_half_width_hz: f64,
    pub feature_taper_hz: f64,
    pub beat_phase: f64,
    pub pulse_sample_rate: f64,
    pub pulse_samples: usize,
    pub pulse_traces: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            shot_level: 1.0,
            sample_rate: 5e7,
            n_samples: 1 << 20,
            n_traces: 1,
            feature_half_width_hz: 1e6,
            feature_taper_hz: 0.5e6,
            beat_phase: 0.0,
            pulse_sample_rate: 1e8,
            pulse_samples: 1024,
            pulse_traces: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub theta: f64,
    pub segment_len: usize,
    pub window: Window,
    pub overlap: f64,
    pub demod_phase: f64,
    pub scan_start_hz: f64,
    pub scan_stop_hz: f64,
    pub scan_points: usize,
    pub baseband_span_hz: f64,
    pub baseband_points: usize,
    pub phase_points: usize,
    /// Half-width of the band averaged for dB summaries of measured spectra.
    pub band_hz: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            theta: FRAC_PI_2,
            segment_len: 2048,
            window: Window::Hann,
            overlap: 0.5,
            demod_phase: 0.0,
            scan_start_hz: 0.5e6,
            scan_stop_hz: 3.5e6,
            scan_points: 121,
            baseband_span_hz: 1e6,
            baseband_points: 81,
            phase_points: 32,
            band_hz: 0.8e6,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    pub write_samples: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Preset,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default)]
    pub eit: EitConfig,
    #[serde(default)]
    pub memory: MemoryConfig,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// One violation, located by its dotted field path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Parses TOML text; syntax and type errors come back as diagnostics.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<Diagnostic>> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let at = e
            .span()
            .map(|s| {
                let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}")
            })
            .unwrap_or_else(|| "document".into());
        vec![Diagnostic::new(at, e.message().to_string())]
    })?;
    serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        let first = message.lines().next().unwrap_or("").to_string();
        vec![Diagnostic::new(if path == "." { "document".into() } else { path }, first)]
    })
}

/// Parses and validates; `Ok` only for a config with no violations.
pub fn load_config(text: &str) -> Result<ExperimentConfig, Vec<Diagnostic>> {
    let config = parse_config(text)?;
    let diags = config.validate();
    if diags.is_empty() {
        Ok(config)
    } else {
        Err(diags)
    }
}

struct Checker(Vec<Diagnostic>);

impl Checker {
    fn check(&mut self, path: &str, value: f64, ok: bool, rule: &str) {
        if !value.is_finite() {
            self.0.push(Diagnostic::new(path, format!("{value} is not finite")));
        } else if !ok {
            self.0.push(Diagnostic::new(path, format!("{value} violates: {rule}")));
        }
    }

    fn count(&mut self, path: &str, value: usize, ok: bool, rule: &str) {
        if !ok {
            self.0.push(Diagnostic::new(path, format!("{value} violates: {rule}")));
        }
    }
}

impl ExperimentConfig {
    /// All invariant violations, in field order.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut c = Checker(Vec::new());
        if self.seed.is_none() {
            c.0.push(Diagnostic::new("seed", "missing; every run needs an explicit seed"));
        }
        let i = &self.input;
        c.check("input.squeezing_db", i.squeezing_db, i.squeezing_db < 0.0, "must be < 0 dB");
        if let Some(a) = i.antisqueezing_db {
            c.check(
                "input.antisqueezing_db",
                a,
                a >= -i.squeezing_db,
                "must be >= |input.squeezing_db| (uncertainty bound)",
            );
        }
        c.check("input.theta_sq", i.theta_sq, true, "finite");

        let e = &self.eit;
        c.check("eit.optical_depth", e.optical_depth, e.optical_depth > 0.0, "must be > 0");
        c.check("eit.linewidth_hz", e.linewidth_hz, e.linewidth_hz > 0.0, "must be > 0");
        c.check("eit.rabi_hz", e.rabi_hz, e.rabi_hz > 0.0, "must be > 0");
        if let Some(g) = e.decoherence_hz {
            c.check("eit.decoherence_hz", g, g >= 0.0, "must be >= 0");
        }
        let eta = e.target_plus_transmission;
        c.check(
            "eit.target_plus_transmission",
            eta,
            eta > 0.0 && eta <= 1.0 && -eta.ln() < e.optical_depth,
            "must lie in (0, 1] and above exp(-eit.optical_depth)",
        );
        c.check("eit.control_detuning_hz", e.control_detuning_hz, true, "finite");
        c.check("eit.beat_hz", e.beat_hz, e.beat_hz > 0.0, "must be > 0");
        if e.bichromatic && e.control_detuning_hz != 0.0 {
            c.0.push(Diagnostic::new(
                "eit.control_detuning_hz",
                "bichromatic control is modelled on two-photon resonance only",
            ));
        }

        let m = &self.memory;
        c.check("memory.pulse_fwhm_s", m.pulse_fwhm_s, m.pulse_fwhm_s > 0.0, "must be > 0");
        c.check("memory.pulse_center_s", m.pulse_center_s, true, "finite");
        c.check("memory.storage_time_s", m.storage_time_s, m.storage_time_s >= 0.0, "must be >= 0");
        c.check("memory.retrieved_fwhm_s", m.retrieved_fwhm_s, m.retrieved_fwhm_s > 0.0, "must be > 0");
        c.check("memory.decoherence_rate", m.decoherence_rate, m.decoherence_rate >= 0.0, "must be >= 0");
        if let Some(eta) = m.memory_efficiency {
            c.check("memory.memory_efficiency", eta, (0.0..=1.0).contains(&eta), "must lie in [0, 1]");
        }
        c.check(
            "memory.target_squeezing_db",
            m.target_squeezing_db,
            m.target_squeezing_db <= 0.0 && m.target_squeezing_db >= i.squeezing_db,
            "must lie between input.squeezing_db and 0 dB",
        );
        c.check(
            "memory.target_antisqueezing_db",
            m.target_antisqueezing_db,
            m.target_antisqueezing_db >= 0.0,
            "must be >= 0 dB",
        );

        let s = &self.synthesis;
        c.check("synthesis.shot_level", s.shot_level, s.shot_level > 0.0, "must be > 0");
        c.check("synthesis.sample_rate", s.sample_rate, s.sample_rate > 0.0, "must be > 0");
        c.count(
            "synthesis.n_samples",
            s.n_samples,
            s.n_samples >= 2 && s.n_samples.is_power_of_two(),
            "must be a power of two",
        );
        c.count("synthesis.n_traces", s.n_traces, s.n_traces >= 1, "must be >= 1");
        c.check(
            "synthesis.feature_half_width_hz",
            s.feature_half_width_hz,
            s.feature_half_width_hz >= 0.0,
            "must be >= 0",
        );
        c.check("synthesis.feature_taper_hz", s.feature_taper_hz, s.feature_taper_hz > 0.0, "must be > 0");
        c.check(
            "synthesis.feature_half_width_hz",
            s.feature_half_width_hz + s.feature_taper_hz,
            s.feature_half_width_hz + s.feature_taper_hz < e.beat_hz,
            "feature band (half width + taper) must stay below eit.beat_hz",
        );
        c.check(
            "synthesis.sample_rate",
            s.sample_rate,
            e.beat_hz + s.feature_half_width_hz + s.feature_taper_hz < s.sample_rate / 2.0,
            "feature band must lie below the Nyquist frequency",
        );
        c.check("synthesis.beat_phase", s.beat_phase, true, "finite");
        c.check(
            "synthesis.pulse_sample_rate",
            s.pulse_sample_rate,
            s.pulse_sample_rate > 2.0 * e.beat_hz,
            "must exceed twice eit.beat_hz",
        );
        c.count("synthesis.pulse_samples", s.pulse_samples, s.pulse_samples >= 16, "must be >= 16");
        c.count("synthesis.pulse_traces", s.pulse_traces, s.pulse_traces >= 2, "must be >= 2");
        if s.pulse_sample_rate > 0.0 && s.pulse_samples > 0 {
            let span = s.pulse_samples as f64 / s.pulse_sample_rate;
            let read_on = m.pulse_center_s + m.pulse_fwhm_s + m.storage_time_s;
            c.check(
                "synthesis.pulse_samples",
                span,
                read_on + 3.0 * m.retrieved_fwhm_s < span && m.pulse_center_s >= 0.0,
                "record must cover the retrieved pulse",
            );
        }

        let a = &self.analysis;
        c.check("analysis.theta", a.theta, true, "finite");
        c.count(
            "analysis.segment_len",
            a.segment_len,
            a.segment_len >= 16 && a.segment_len <= s.n_samples,
            "must lie in [16, synthesis.n_samples]",
        );
        c.check("analysis.overlap", a.overlap, (0.0..1.0).contains(&a.overlap), "must lie in [0, 1)");
        c.check("analysis.demod_phase", a.demod_phase, true, "finite");
        c.check("analysis.scan_start_hz", a.scan_start_hz, a.scan_start_hz > 0.0, "must be > 0");
        c.check(
            "analysis.scan_stop_hz",
            a.scan_stop_hz,
            a.scan_stop_hz > a.scan_start_hz,
            "must exceed analysis.scan_start_hz",
        );
        c.count("analysis.scan_points", a.scan_points, a.scan_points >= 2, "must be >= 2");
        c.check(
            "analysis.baseband_span_hz",
            a.baseband_span_hz,
            a.baseband_span_hz > 0.0 && a.baseband_span_hz < e.beat_hz,
            "must lie in (0, eit.beat_hz)",
        );
        c.count("analysis.baseband_points", a.baseband_points, a.baseband_points >= 2, "must be >= 2");
        c.count("analysis.phase_points", a.phase_points, a.phase_points >= 2, "must be >= 2");
        c.check(
            "analysis.band_hz",
            a.band_hz,
            a.band_hz > 0.0 && a.band_hz < e.beat_hz,
            "must lie in (0, eit.beat_hz)",
        );
        c.0
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_round_trip() {
        for p in Preset::ALL {
            let c = p.config(42);
            assert!(c.validate().is_empty(), "{p}: {:?}", c.validate());
            assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
            assert_eq!(Preset::parse(p.name()), Some(p));
        }
    }

    #[test]
    fn dotted_keys_and_defaults() {
        let c = load_config("experiment = \"fig4\"\nseed = 7\neit.optical_depth = 6.5\nanalysis.window = \"rect\"\n").unwrap();
        assert_eq!(c.eit.optical_depth, 6.5);
        assert_eq!(c.analysis.window, Window::Rect);
        assert_eq!(c.memory.storage_time_s, 3e-6);
    }

    #[test]
    fn violations_are_named_by_path() {
        let mut c = Preset::Fig5.config(1);
        c.memory.memory_efficiency = Some(1.2);
        c.seed = None;
        let d = c.validate();
        let paths: Vec<&str> = d.iter().map(|x| x.path.as_str()).collect();
        assert_eq!(paths, ["seed", "memory.memory_efficiency"]);
    }

    #[test]
    fn parse_errors_carry_paths() {
        let d = parse_config("experiment = \"fig4\"\neit.optical_depth = \"deep\"\n").unwrap_err();
        assert_eq!(d[0].path, "eit.optical_depth");
        let d = parse_config("experiment = \"fig4\"\neit.depth = 3\n").unwrap_err();
        assert_eq!(d[0].path, "eit.depth");
        assert!(d[0].message.contains("unknown field"));
        let d = parse_config("experiment = \"fig9\"\n").unwrap_err();
        assert_eq!(d[0].path, "experiment");
        let d = parse_config("experiment = [\n").unwrap_err();
        assert!(d[0].path.starts_with("line"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = Preset::Fig4.config(42);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = Some(43);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}

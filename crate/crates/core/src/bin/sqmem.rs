use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sqmem::config::{load_config, Diagnostic, ExperimentConfig, Preset};
use sqmem::dsp::{self, power_spectrum};
use sqmem::experiment::{self, resolve, run_experiment, OutputFile};
use sqmem::synth::{Lineshape, PulseSynthesis, SidebandFeature};
use sqmem::{trace_io, Error};

const OUT_DIR_ENV: &str = "SQMEM_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "sqmem-out";
const PRESET_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "sqmem", version, about = "Sideband squeezing through bichromatic EIT: channel model, synthetic homodyne data and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $SQMEM_OUT_DIR or ./sqmem-out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the number of synthesized records.
    #[arg(long, global = true)]
    traces: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic channel model only (no synthetic data).
    Simulate,
    /// Write synthetic homodyne records.
    Synth {
        #[arg(long, value_enum, default_value_t = TraceFormat::Htrc)]
        format: TraceFormat,
    },
    /// Spectra of recorded traces.
    Analyze {
        #[arg(required = true, value_name = "TRACE")]
        inputs: Vec<PathBuf>,
    },
    /// Run a preset end to end (the config file, if given, must name the same preset).
    Reproduce { preset: String },
    /// Check a configuration and list every violation.
    Validate { path: Option<PathBuf> },
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceFormat {
    Htrc,
    Csv,
}

enum Failure {
    Config(Vec<Diagnostic>),
    Numeric(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn report(&self) -> serde_json::Value {
        match self {
            Failure::Config(d) => json!({ "error": "config", "diagnostics": d }),
            Failure::Numeric(m) => json!({ "error": "numeric", "message": m }),
            Failure::Io(m) => json!({ "error": "io", "message": m }),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Format(_) => Failure::Io(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn read_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    load_config(&text).map_err(Failure::Config)
}

fn apply_overrides(cli: &Cli, mut config: ExperimentConfig) -> Result<ExperimentConfig, Failure> {
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(n) = cli.traces {
        if config.experiment == Preset::Fig5 {
            config.synthesis.pulse_traces = n;
        } else {
            config.synthesis.n_traces = n;
        }
    }
    let diags = config.validate();
    if diags.is_empty() {
        Ok(config)
    } else {
        Err(Failure::Config(diags))
    }
}

fn out_dir(cli: &Cli, config: Option<&ExperimentConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| config.and_then(|c| c.output.dir.clone()).map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Writes files, removing everything it created if any write fails.
fn write_all(dir: &Path, files: &[OutputFile]) -> Result<(), Failure> {
    let created_dir = !dir.exists();
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let mut written = Vec::new();
    for f in files {
        let path = dir.join(&f.name);
        if let Err(e) = fs::write(&path, &f.contents) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            let _ = fs::remove_file(&path);
            if created_dir {
                let _ = fs::remove_dir_all(dir);
            }
            return Err(io_failure(&path, e));
        }
        written.push(path);
    }
    Ok(())
}

fn required_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| {
        Failure::Config(vec![Diagnostic {
            path: "--config".into(),
            message: "this command needs a configuration file".into(),
        }])
    })?;
    apply_overrides(cli, read_config(path)?)
}

fn simulate(cli: &Cli) -> Result<serde_json::Value, Failure> {
    let mut config = required_config(cli)?;
    config.synthesis.enabled = false;
    let bundle = run_experiment(&config)?;
    write_all(&out_dir(cli, Some(&config)), &bundle.files)?;
    Ok(bundle.summary)
}

fn reproduce(cli: &Cli, name: &str) -> Result<serde_json::Value, Failure> {
    let preset = Preset::parse(name).ok_or_else(|| {
        Failure::Config(vec![Diagnostic {
            path: "preset".into(),
            message: format!(
                "unknown preset `{name}`; expected one of {}",
                Preset::ALL.map(|p| p.name()).join(", ")
            ),
        }])
    })?;
    let config = match &cli.config {
        Some(path) => {
            let c = read_config(path)?;
            if c.experiment != preset {
                return Err(Failure::Config(vec![Diagnostic {
                    path: "experiment".into(),
                    message: format!("config is for `{}`, not `{name}`", c.experiment),
                }]));
            }
            c
        }
        None => preset.config(PRESET_SEED),
    };
    let config = apply_overrides(cli, config)?;
    let bundle = run_experiment(&config)?;
    write_all(&out_dir(cli, Some(&config)), &bundle.files)?;
    Ok(bundle.summary)
}

fn synth(cli: &Cli, format: TraceFormat) -> Result<serde_json::Value, Failure> {
    let config = required_config(cli)?;
    let r = resolve(&config)?;
    let s = &config.synthesis;
    let traces = if config.experiment == Preset::Fig5 {
        let (pair, _, out) = experiment::retrieved_state(&r)?;
        let pulse = r.pulse.as_ref().expect("fig5 resolves a pulse experiment");
        let feature = SidebandFeature::from_pm_state(
            config.eit.beat_hz,
            Lineshape::FlatTop {
                half_width_hz: 0.0,
                taper_hz: config.eit.beat_hz / 2.0,
            },
            &out,
            &pair,
            s.beat_phase,
        )?;
        let synth = PulseSynthesis {
            shot_level: s.shot_level,
            sample_rate: s.pulse_sample_rate,
            n_samples: s.pulse_samples,
            beat_hz: config.eit.beat_hz,
            beat_phase: s.beat_phase,
            envelope: pulse.retrieved_envelope.clone(),
            pm_cov: feature.pm_cov,
        }
        .prepare()?;
        let n = cli.traces.unwrap_or(10);
        synth.ensemble(config.analysis.theta, r.seed, n)
    } else {
        let model = experiment::output_noise_model(&r)?;
        experiment::synthesize_records(
            &model,
            config.analysis.theta,
            s.sample_rate,
            s.n_samples,
            r.seed,
            0,
            s.n_traces,
            config.eit.bichromatic.then_some((config.eit.beat_hz, s.beat_phase)),
        )?
    };
    let mut files = Vec::new();
    for (i, t) in traces.iter().enumerate() {
        match format {
            TraceFormat::Htrc => {
                let mut buf = Vec::new();
                trace_io::write_trace(&mut buf, t)?;
                files.push(OutputFile {
                    name: format!("trace_{i:05}.htrc"),
                    contents: buf,
                });
            }
            TraceFormat::Csv => files.push(OutputFile {
                name: format!("trace_{i:05}.csv"),
                contents: trace_io::to_csv(t).into_bytes(),
            }),
        }
    }
    let manifest = json!({
        "tool": "sqmem",
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": config.hash(),
        "config": config,
        "calibration": r.calibration,
        "traces": files.iter().map(|f| f.name.clone()).collect::<Vec<_>>(),
    });
    files.push(OutputFile {
        name: "manifest.json".into(),
        contents: format!("{}\n", serde_json::to_string_pretty(&manifest).expect("json")).into_bytes(),
    });
    write_all(&out_dir(cli, Some(&config)), &files)?;
    Ok(json!({ "traces": traces.len() }))
}

fn analyze(cli: &Cli, paths: &[PathBuf]) -> Result<serde_json::Value, Failure> {
    let config = required_config(cli)?;
    let a = &config.analysis;
    let traces = paths
        .iter()
        .map(|p| trace_io::load(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let shot = config.synthesis.shot_level;
    let hash = config.hash();
    let csv = |name: &str, est: &dsp::SpectrumEstimate| OutputFile {
        name: name.into(),
        contents: format!("# config_sha256={hash}\n{}", est.to_csv()).into_bytes(),
    };
    let direct = power_spectrum(&traces, a.segment_len, a.window, a.overlap)?.with_flat_shot(shot)?;
    let mut files = vec![csv("analyze_direct.csv", &direct)];
    let mut summary = json!({ "n_averages": direct.n_averages, "config_sha256": hash });
    if traces.iter().all(|t| t.reference.is_some()) {
        for (label, offset) in [("plus_mode", a.demod_phase), ("minus_mode", a.demod_phase + std::f64::consts::FRAC_PI_2)] {
            let d = traces
                .iter()
                .map(|t| dsp::demodulate(t, offset))
                .collect::<Result<Vec<_>, _>>()?;
            let est = power_spectrum(&d, a.segment_len, a.window, a.overlap)?.with_flat_shot(shot)?;
            let (p, s) = est.band_mean(0.0, a.band_hz)?;
            summary[format!("{label}_db")] = json!(dsp::to_db(p, s)?);
            files.push(csv(&format!("analyze_{label}.csv"), &est));
        }
    }
    let manifest = json!({
        "tool": "sqmem",
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": hash,
        "config": config,
        "inputs": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    files.push(OutputFile {
        name: "summary.json".into(),
        contents: format!("{}\n", serde_json::to_string_pretty(&summary).expect("json")).into_bytes(),
    });
    files.push(OutputFile {
        name: "manifest.json".into(),
        contents: format!("{}\n", serde_json::to_string_pretty(&manifest).expect("json")).into_bytes(),
    });
    write_all(&out_dir(cli, Some(&config)), &files)?;
    Ok(summary)
}

fn validate(cli: &Cli, path: Option<&PathBuf>) -> Result<serde_json::Value, Failure> {
    let path = path.or(cli.config.as_ref()).ok_or_else(|| {
        Failure::Config(vec![Diagnostic {
            path: "--config".into(),
            message: "no configuration file given".into(),
        }])
    })?;
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    match load_config(&text) {
        Ok(_) => Ok(json!({ "valid": true, "diagnostics": [] })),
        Err(d) => Err(Failure::Config(d)),
    }
}

fn dispatch(cli: &Cli) -> Result<serde_json::Value, Failure> {
    match &cli.command {
        Command::Simulate => simulate(cli),
        Command::Synth { format } => synth(cli, *format),
        Command::Analyze { inputs } => analyze(cli, inputs),
        Command::Reproduce { preset } => reproduce(cli, preset),
        Command::Validate { path } => validate(cli, path.as_ref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Failure::Numeric(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(summary) => {
            // a closed pipe downstream is not a failure of the run
            let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&summary).expect("json"));
            ExitCode::SUCCESS
        }
        Err(f) => {
            let report = serde_json::to_string_pretty(&f.report()).expect("json");
            if matches!(cli.command, Command::Validate { .. }) && matches!(f, Failure::Config(_)) {
                println!("{}", json!({ "valid": false, "diagnostics": f.report()["diagnostics"] }));
            } else {
                eprintln!("{report}");
            }
            ExitCode::from(f.code())
        }
    }
}

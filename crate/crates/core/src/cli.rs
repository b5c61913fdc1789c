//! `nopa` command line: one JSON config, five experiments.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 no solution or
//! model error.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::{ConfigError, JitterConfig, RunConfig, FORMAT_VERSION};
use crate::material::{phase_matching_temperature, TEMPERATURE_WINDOW_C};
use crate::measurement_sim::{
    apply_phase_jitter, calibrate_phase_jitter, estimate_db_from_trace, simulate_cavity_scan, simulate_noise_trace,
    ScanPoint,
};
use crate::opo_quantum::{parametric_gain, pump_buildup, variance_from_db_below_snl, variance_spectrum, GainPhase};
use crate::resonance_solver::{solve_double_resonance, stage_presets, enumerate_triple_resonances};

#[derive(Debug, Parser)]
#[command(name = "nopa", version, about = "Triple-resonant NOPA design and measurement simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Resonant,
    Nonresonant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Single,
    Double,
    Triple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    X,
    Y,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for double and triple resonance.
    Design(Common),
    /// Quadrature variance spectra (CSV).
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.1e6)]
        fmin: f64,
        #[arg(long, default_value_t = 20e6)]
        fmax: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Resonant and non-resonant oscillation thresholds (JSON).
    Threshold {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ThresholdMode::Resonant)]
        mode: ThresholdMode,
    },
    /// Cavity-length scan trace at a resonance stage (CSV).
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Stage::Triple)]
        stage: Stage,
    },
    /// Spectrum-analyzer noise traces (CSV); level estimates go to stderr.
    Noise {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Quadrature::X)]
        quadrature: Quadrature,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Design(c) => c,
            Command::Spectrum { common, .. }
            | Command::Threshold { common, .. }
            | Command::Scan { common, .. }
            | Command::Noise { common, .. } => common,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{0}")]
    Model(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Model(_) => 2,
        }
    }
}

fn model(e: impl std::fmt::Display) -> CliError {
    CliError::Model(e.to_string())
}

/// What a command produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
}

/// Nine significant digits.
fn num(x: f64) -> String {
    format!("{x:.8e}")
}

fn csv(meta: &[(&str, String)], columns: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut s = format!("# format_version={FORMAT_VERSION}\n");
    for (k, v) in meta {
        let _ = writeln!(s, "# {k}={v}");
    }
    s.push_str(&columns.join(","));
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(num).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let cfg = RunConfig::load(&cli.command.common().config)?;
    match &cli.command {
        Command::Design(_) => cmd_design(&cfg),
        Command::Spectrum { fmin, fmax, points, .. } => cmd_spectrum(&cfg, *fmin, *fmax, *points),
        Command::Threshold { mode, .. } => cmd_threshold(&cfg, *mode),
        Command::Scan { stage, .. } => cmd_scan(&cfg, *stage),
        Command::Noise { quadrature, .. } => cmd_noise(&cfg, *quadrature),
    }
}

pub fn cmd_design(cfg: &RunConfig) -> Result<Output, CliError> {
    let device = cfg.device()?;
    let domain = cfg.search_domain(&device)?;
    let pm = phase_matching_temperature(&device.dispersion, &device.modes, TEMPERATURE_WINDOW_C).map_err(model)?;
    let double = solve_double_resonance(&device, &domain).map_err(model)?;
    let scan = enumerate_triple_resonances(&device, &domain).map_err(model)?;
    let Some(triple) = scan.solutions.first() else {
        return Err(model(crate::resonance_solver::SolverError::NoPumpCrossing { sweep: scan.sweep }));
    };
    let value = json!({
        "format_version": FORMAT_VERSION,
        "phase_matching_temperature_c": pm.temperature_c,
        "search_domain": domain,
        "double_resonance": double,
        "triple_resonance": triple,
        "triple_resonances_in_domain": scan.solutions.len(),
    });
    Ok(Output {
        stdout: to_json(&value),
        stderr: String::new(),
    })
}

pub fn cmd_spectrum(cfg: &RunConfig, fmin: f64, fmax: f64, points: usize) -> Result<Output, CliError> {
    if !(fmin > 0.0 && fmax > fmin && fmax.is_finite()) || points < 2 {
        return Err(CliError::Usage(format!(
            "frequency range needs 0 < fmin < fmax and at least two points (got {fmin}, {fmax}, {points})"
        )));
    }
    let device = cfg.device()?;
    let point = cfg.operating_point(&device)?;
    let grid: Vec<f64> = (0..points)
        .map(|i| fmin + (fmax - fmin) * i as f64 / (points - 1) as f64)
        .collect();
    let spectrum = variance_spectrum(&point, &grid).map_err(model)?;
    let rows = spectrum.frequencies_hz.iter().zip(&spectrum.variances).map(|(&f, v)| {
        vec![
            f,
            v.x_sum,
            v.x_diff,
            v.y_sum,
            v.y_diff,
            10.0 * (v.x_sum / crate::opo_quantum::SHOT_NOISE_LEVEL).log10(),
        ]
    });
    let meta = [
        ("pump_ratio", num(point.pump_ratio())),
        ("decay_rate_per_s", num(point.decay_rate)),
        ("total_efficiency", num(point.detection.total())),
    ];
    Ok(Output {
        stdout: csv(
            &meta,
            &["frequency_hz", "x_sum", "x_diff", "y_sum", "y_diff", "corr_db"],
            rows,
        ),
        stderr: String::new(),
    })
}

pub fn cmd_threshold(cfg: &RunConfig, mode: ThresholdMode) -> Result<Output, CliError> {
    let t = cfg.threshold_model()?;
    let buildup = pump_buildup(t.pump_coupling, t.pump_loss).map_err(model)?;
    let resonant = t.threshold_w;
    let nonresonant = resonant * buildup;
    let selected = match mode {
        ThresholdMode::Resonant => resonant,
        ThresholdMode::Nonresonant => nonresonant,
    };
    let value = json!({
        "format_version": FORMAT_VERSION,
        "mode": mode,
        "threshold_mw": selected * 1e3,
        "resonant_threshold_mw": resonant * 1e3,
        "nonresonant_threshold_mw": nonresonant * 1e3,
        "ratio": nonresonant / resonant,
        "buildup": buildup,
        "chi": t.chi,
        "pump_loss": t.pump_loss,
        "pump_coupling": t.pump_coupling,
    });
    Ok(Output {
        stdout: to_json(&value),
        stderr: String::new(),
    })
}

pub fn cmd_scan(cfg: &RunConfig, stage: Stage) -> Result<Output, CliError> {
    let device = cfg.device()?;
    let domain = cfg.search_domain(&device)?;
    let threshold = cfg.threshold_model()?;
    let presets = stage_presets(&device, &domain).map_err(model)?;
    let sol = match stage {
        Stage::Single => presets.single,
        Stage::Double => presets.double,
        Stage::Triple => presets.triple,
    };
    let pump_ratio = cfg.quantum.pump_power_mw * 1e-3 / threshold.threshold_w;
    let point = ScanPoint {
        temperature_c: sol.temperature_c,
        offset_m: sol.wedge_offset_m,
        trim_center_m: sol.length_trim_m,
        pump_ratio,
        detector_noise: cfg.measurement.scan_detector_noise,
    };
    let trace = simulate_cavity_scan(&device, &point, &cfg.scan_waveform(), cfg.measurement.scan_seed).map_err(model)?;
    let gain = parametric_gain(pump_ratio, 1.0, GainPhase::Amplify).map_err(model)?;
    let meta = [
        ("stage", format!("{stage:?}").to_lowercase()),
        ("classification", sol.classification.to_string()),
        ("temperature_c", num(sol.temperature_c)),
        ("offset_m", num(sol.wedge_offset_m)),
        ("trim_center_m", num(sol.length_trim_m)),
        ("pump_ratio", num(pump_ratio)),
        ("resonant_gain", num(gain)),
    ];
    let n = trace.time_s.len();
    let rows = (0..n).map(|i| {
        vec![
            trace.time_s[i],
            trace.trim_m[i],
            trace.pump_transmission[i],
            trace.subharmonic_transmission[i],
        ]
    });
    Ok(Output {
        stdout: csv(
            &meta,
            &["time_s", "trim_m", "pump_transmission", "subharmonic_transmission"],
            rows,
        ),
        stderr: String::new(),
    })
}

pub fn cmd_noise(cfg: &RunConfig, quadrature: Quadrature) -> Result<Output, CliError> {
    let device = cfg.device()?;
    let point = cfg.operating_point(&device)?;
    let vars = point
        .variances(cfg.quantum.analysis_frequency_mhz * 1e6)
        .map_err(model)?;
    let sigma = match cfg.measurement.phase_jitter_rad {
        JitterConfig::Value(s) => s,
        JitterConfig::Calibrate { calibrate_to_db } => {
            calibrate_phase_jitter(vars.x_sum, vars.x_diff, variance_from_db_below_snl(calibrate_to_db))
                .map_err(model)?
        }
    };
    let vars = apply_phase_jitter(&vars, sigma).map_err(|e| ConfigError::new("measurement.phase_jitter_rad", e))?;
    let (corr, anti, stream) = match quadrature {
        Quadrature::X => (vars.x_sum, vars.x_diff, 0),
        Quadrature::Y => (vars.y_diff, vars.y_sum, 2),
    };
    let level = |v: f64| 10.0 * (v / crate::opo_quantum::SHOT_NOISE_LEVEL).log10();
    let template = cfg.noise_template();
    let seed = template.seed.wrapping_mul(4).wrapping_add(stream);
    let corr_trace = simulate_noise_trace(&crate::measurement_sim::NoiseTraceConfig {
        level_db: level(corr),
        seed,
        ..template
    })
    .map_err(model)?;
    let anti_trace = simulate_noise_trace(&crate::measurement_sim::NoiseTraceConfig {
        level_db: level(anti),
        seed: seed.wrapping_add(1),
        ..template
    })
    .map_err(model)?;
    let corr_est = estimate_db_from_trace(&corr_trace.power_db, &corr_trace.snl_db).map_err(model)?;
    let anti_est = estimate_db_from_trace(&anti_trace.power_db, &corr_trace.snl_db).map_err(model)?;

    let report = json!({
        "format_version": FORMAT_VERSION,
        "quadrature": quadrature,
        "phase_jitter_rad": sigma,
        "configured_correlated_db": level(corr),
        "configured_anticorrelated_db": level(anti),
        "correlated": corr_est,
        "anticorrelated": anti_est,
    });
    let meta = [
        ("quadrature", format!("{quadrature:?}").to_lowercase()),
        ("rbw_hz", num(template.rbw_hz)),
        ("vbw_hz", num(template.vbw_hz)),
        ("phase_jitter_rad", num(sigma)),
    ];
    let rows = (0..corr_trace.time_s.len()).map(|i| {
        vec![
            corr_trace.time_s[i],
            corr_trace.snl_db[i],
            corr_trace.power_db[i],
            anti_trace.power_db[i],
            corr_trace.enl_db[i],
        ]
    });
    Ok(Output {
        stdout: csv(
            &meta,
            &["time_s", "snl_db", "correlated_db", "anticorrelated_db", "enl_db"],
            rows,
        ),
        stderr: to_json(&report),
    })
}

/// Parses `args` (including the program name), runs, writes output, and
/// returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(out) => {
            if !out.stderr.is_empty() {
                eprint!("{}", out.stderr);
            }
            match &cli.command.common().out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, &out.stdout) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return 1;
                    }
                }
                None => print!("{}", out.stdout),
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

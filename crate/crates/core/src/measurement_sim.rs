//! Seeded synthetic measurements: cavity-length scan transmission traces and
//! spectrum-analyzer noise-power traces.
//!
//! Scan transmissions are normalized per mode so that a bare resonance peak
//! (no parametric gain) has height 1; that is the single-peak unit.

use std::f64::consts::{FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cavity_optics::{airy_lineshape, CavityError};
use crate::opo_quantum::{parametric_gain, GainPhase, QuadratureVariances, QuantumError};
use crate::resonance_solver::NopaDevice;

/// Minimum number of points in a noise trace.
pub const MIN_TRACE_POINTS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasurementError {
    #[error(transparent)]
    Cavity(#[from] CavityError),

    #[error(transparent)]
    Quantum(#[from] QuantumError),

    #[error("invalid scan waveform: {0}")]
    InvalidWaveform(String),

    #[error("invalid noise trace configuration: {0}")]
    InvalidConfig(String),

    #[error("trace lengths differ: {trace} vs {reference}")]
    LengthMismatch { trace: usize, reference: usize },

    #[error("trace needs at least two points, got {0}")]
    TooShort(usize),

    #[error("phase jitter {0} rad outside [0, pi/4]")]
    JitterOutOfRange(f64),

    #[error("target variance {target} unreachable by jitter between {correlated} and {anticorrelated}")]
    JitterUnreachable {
        target: f64,
        correlated: f64,
        anticorrelated: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveShape {
    Triangle,
    Sawtooth,
}

/// Piezo drive. The trim sweeps `amplitude_m` peak to peak around a centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanWaveform {
    pub shape: WaveShape,
    pub amplitude_m: f64,
    pub period_s: f64,
    pub samples: usize,
}

impl ScanWaveform {
    /// Triangle sweep of one subharmonic free spectral range.
    pub fn one_fsr(subharmonic_wavelength_m: f64) -> Self {
        Self {
            shape: WaveShape::Triangle,
            amplitude_m: 0.5 * subharmonic_wavelength_m,
            period_s: 0.02,
            samples: 4000,
        }
    }

    pub fn validate(&self, subharmonic_wavelength_m: f64) -> Result<(), MeasurementError> {
        let bad = |m: String| Err(MeasurementError::InvalidWaveform(m));
        if !(self.amplitude_m >= 0.5 * subharmonic_wavelength_m * (1.0 - 1e-12)) {
            return bad(format!(
                "amplitude {} m covers less than one free spectral range ({} m)",
                self.amplitude_m,
                0.5 * subharmonic_wavelength_m
            ));
        }
        if !(self.period_s.is_finite() && self.period_s > 0.0) {
            return bad(format!("period {} s", self.period_s));
        }
        // the sample grid must contain the centre of the sweep
        let step = match self.shape {
            WaveShape::Triangle => 4,
            WaveShape::Sawtooth => 2,
        };
        if self.samples < 8 || !self.samples.is_multiple_of(step) {
            return bad(format!("{} samples; need at least 8 and a multiple of {step}", self.samples));
        }
        Ok(())
    }

    /// Sweep position in `[−1/2, 1/2]` for sample `i`.
    fn position(&self, i: usize) -> f64 {
        let u = i as f64 / self.samples as f64;
        match self.shape {
            WaveShape::Sawtooth => u - 0.5,
            WaveShape::Triangle if u < 0.5 => 2.0 * u - 0.5,
            WaveShape::Triangle => 1.5 - 2.0 * u,
        }
    }
}

/// Where the scan sits and how hard it is pumped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub temperature_c: f64,
    pub offset_m: f64,
    /// Trim at the centre of the sweep.
    pub trim_center_m: f64,
    /// `P/P_thr` at full pump resonance.
    pub pump_ratio: f64,
    /// Standard deviation of the additive detector noise, in single-peak
    /// units; zero gives a noise-free trace.
    pub detector_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanTrace {
    pub time_s: Vec<f64>,
    pub trim_m: Vec<f64>,
    pub pump_transmission: Vec<f64>,
    /// Signal plus idler, as seen by one detector.
    pub subharmonic_transmission: Vec<f64>,
}

/// Parametric gain with the pump lineshape setting the effective pump:
/// `x_eff = x · (A_p − A_min)/(1 − A_min)`, so a maximally detuned pump
/// gives no gain.
fn scan_gain(pump_ratio: f64, pump_shape: f64, pump_floor: f64) -> Result<f64, QuantumError> {
    let weight = ((pump_shape - pump_floor) / (1.0 - pump_floor)).clamp(0.0, 1.0);
    parametric_gain(pump_ratio * weight, 1.0, GainPhase::Amplify)
}

pub fn simulate_cavity_scan(
    device: &NopaDevice,
    point: &ScanPoint,
    waveform: &ScanWaveform,
    seed: u64,
) -> Result<ScanTrace, MeasurementError> {
    waveform.validate(device.subharmonic_wavelength_m())?;
    if !(point.detector_noise.is_finite() && point.detector_noise >= 0.0) {
        return Err(MeasurementError::InvalidWaveform(format!(
            "detector noise {}",
            point.detector_noise
        )));
    }
    if !(0.0..1.0).contains(&point.pump_ratio) {
        return Err(QuantumError::AboveThreshold {
            pump_w: point.pump_ratio,
            threshold_w: 1.0,
        }
        .into());
    }
    let g = &device.geometry;
    let mut couplers = Vec::with_capacity(3);
    for m in device.modes.modes() {
        let (t_in, t_out) = g.couplers(&m)?;
        couplers.push((t_in, t_out, g.round_trip_loss(&m)?));
    }
    let shape = |k: usize, r: f64| {
        let (a, b, l) = couplers[k];
        airy_lineshape(2.0 * PI * r, a, b, l)
    };
    let pump_floor = shape(2, 0.5);

    let noise = Normal::new(0.0, point.detector_noise.max(f64::MIN_POSITIVE))
        .map_err(|e| MeasurementError::InvalidWaveform(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let detect = |v: f64, rng: &mut ChaCha8Rng| {
        if point.detector_noise > 0.0 {
            (v + noise.sample(rng)).max(0.0)
        } else {
            v
        }
    };

    let n = waveform.samples;
    let mut trace = ScanTrace {
        time_s: Vec::with_capacity(n),
        trim_m: Vec::with_capacity(n),
        pump_transmission: Vec::with_capacity(n),
        subharmonic_transmission: Vec::with_capacity(n),
    };
    for i in 0..n {
        let trim = point.trim_center_m + waveform.amplitude_m * waveform.position(i);
        let c = device.mode_cycles(point.temperature_c, point.offset_m, trim)?;
        let [s, idl, p] = [shape(0, c[0]), shape(1, c[1]), shape(2, c[2])];
        let gain = scan_gain(point.pump_ratio, p, pump_floor)?;
        trace.time_s.push(waveform.period_s * i as f64 / n as f64);
        trace.trim_m.push(trim);
        trace.pump_transmission.push(detect(p, &mut rng));
        trace.subharmonic_transmission.push(detect(gain * (s + idl), &mut rng));
    }
    Ok(trace)
}

/// Spectrum-analyzer trace settings. Levels are in dB relative to the SNL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseTraceConfig {
    pub level_db: f64,
    pub rbw_hz: f64,
    pub vbw_hz: f64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub enl_db: f64,
    pub seed: u64,
}

impl NoiseTraceConfig {
    pub fn validate(&self) -> Result<(), MeasurementError> {
        let bad = |m: String| Err(MeasurementError::InvalidConfig(m));
        if !(self.vbw_hz > 0.0 && self.rbw_hz.is_finite() && self.vbw_hz < self.rbw_hz) {
            return bad(format!("need 0 < vbw ({}) < rbw ({})", self.vbw_hz, self.rbw_hz));
        }
        if !(self.level_db.is_finite() && self.enl_db.is_finite()) {
            return bad("levels must be finite".into());
        }
        if !(self.duration_s > 0.0 && self.sample_rate_hz > 0.0) || self.points() < MIN_TRACE_POINTS {
            return bad(format!(
                "duration x sample rate = {} points, need at least {MIN_TRACE_POINTS}",
                self.duration_s * self.sample_rate_hz
            ));
        }
        Ok(())
    }

    pub fn points(&self) -> usize {
        let n = (self.duration_s * self.sample_rate_hz).round();
        if n.is_finite() && n > 0.0 {
            n as usize
        } else {
            0
        }
    }

    /// Independent power samples averaged per displayed point.
    pub fn averages(&self) -> usize {
        ((self.rbw_hz / self.vbw_hz).round() as usize).max(1)
    }

    /// Closed-form per-point standard deviation in dB, `(10/ln 10)/√N`.
    pub fn expected_scatter_db(&self) -> f64 {
        10.0 / std::f64::consts::LN_10 / (self.averages() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseTrace {
    pub time_s: Vec<f64>,
    pub power_db: Vec<f64>,
    pub snl_db: Vec<f64>,
    pub enl_db: Vec<f64>,
}

fn averaged_power_db(rng: &mut ChaCha8Rng, level_db: f64, n_avg: usize) -> f64 {
    let sum: f64 = (0..n_avg).map(|_| -> f64 { rng.sample(Exp1) }).sum();
    level_db + 10.0 * (sum / n_avg as f64).log10()
}

/// Measured, SNL and ENL traces from three ChaCha streams of one seed.
pub fn simulate_noise_trace(config: &NoiseTraceConfig) -> Result<NoiseTrace, MeasurementError> {
    config.validate()?;
    let n = config.points();
    let n_avg = config.averages();
    let stream = |k: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(k);
        rng
    };
    let (mut meas, mut snl, mut enl) = (stream(0), stream(1), stream(2));
    let mut trace = NoiseTrace {
        time_s: Vec::with_capacity(n),
        power_db: Vec::with_capacity(n),
        snl_db: Vec::with_capacity(n),
        enl_db: Vec::with_capacity(n),
    };
    for i in 0..n {
        trace.time_s.push(i as f64 / config.sample_rate_hz);
        trace.power_db.push(averaged_power_db(&mut meas, config.level_db, n_avg));
        trace.snl_db.push(averaged_power_db(&mut snl, 0.0, n_avg));
        trace.enl_db.push(averaged_power_db(&mut enl, config.enl_db, n_avg));
    }
    Ok(trace)
}

/// Level of a trace relative to its SNL reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelEstimate {
    /// `mean(trace) − mean(snl)` in dB.
    pub level_db: f64,
    /// Standard error of that difference.
    pub standard_error_db: f64,
    /// Per-point standard deviation of the trace.
    pub std_dev_db: f64,
    pub points: usize,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

pub fn estimate_db_from_trace(trace_db: &[f64], snl_db: &[f64]) -> Result<LevelEstimate, MeasurementError> {
    if trace_db.len() != snl_db.len() {
        return Err(MeasurementError::LengthMismatch {
            trace: trace_db.len(),
            reference: snl_db.len(),
        });
    }
    let n = trace_db.len();
    if n < 2 {
        return Err(MeasurementError::TooShort(n));
    }
    let (mt, vt) = mean_var(trace_db);
    let (ms, vs) = mean_var(snl_db);
    Ok(LevelEstimate {
        level_db: mt - ms,
        standard_error_db: ((vt + vs) / n as f64).sqrt(),
        std_dev_db: vt.sqrt(),
        points: n,
    })
}

fn check_jitter(sigma: f64) -> Result<(), MeasurementError> {
    if !(0.0..=FRAC_PI_4).contains(&sigma) {
        return Err(MeasurementError::JitterOutOfRange(sigma));
    }
    Ok(())
}

/// Mixes each correlated combination with its anticorrelated partner:
/// `V_c ← V_c cos²σ + V_a sin²σ` and symmetrically.
pub fn apply_phase_jitter(vars: &QuadratureVariances, sigma_rad: f64) -> Result<QuadratureVariances, MeasurementError> {
    check_jitter(sigma_rad)?;
    let (c2, s2) = (sigma_rad.cos().powi(2), sigma_rad.sin().powi(2));
    let mix = |a: f64, b: f64| a * c2 + b * s2;
    Ok(QuadratureVariances {
        x_sum: mix(vars.x_sum, vars.x_diff),
        x_diff: mix(vars.x_diff, vars.x_sum),
        y_sum: mix(vars.y_sum, vars.y_diff),
        y_diff: mix(vars.y_diff, vars.y_sum),
    })
}

/// Jitter that raises `correlated` to `target` when mixed with
/// `anticorrelated`.
pub fn calibrate_phase_jitter(correlated: f64, anticorrelated: f64, target: f64) -> Result<f64, MeasurementError> {
    let unreachable = MeasurementError::JitterUnreachable {
        target,
        correlated,
        anticorrelated,
    };
    let span = anticorrelated - correlated;
    if !(span > 0.0) {
        return Err(unreachable);
    }
    let s2 = (target - correlated) / span;
    if !(0.0..=0.5).contains(&s2) {
        return Err(unreachable);
    }
    let sigma = s2.sqrt().asin();
    check_jitter(sigma)?;
    Ok(sigma)
}

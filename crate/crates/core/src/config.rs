//! JSON run configuration in laboratory units.
//!
//! Every block has defaults describing the reference device, so `{}` with a
//! `format_version` is a complete configuration. Unknown fields are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cavity_optics::{CoatingEntry, CoatingSpec, KappaConvention, NopaGeometry, WedgedCrystal};
use crate::material::{phase_matching_temperature, CrystalAxis, DispersionModel, ModeSet, TEMPERATURE_WINDOW_C};
use crate::measurement_sim::{ScanWaveform, WaveShape};
use crate::opo_quantum::{fit_chi, infer_pump_loss, threshold_power, DetectionChain, OperatingPoint};
use crate::resonance_solver::{NopaDevice, SearchDomain};

pub const FORMAT_VERSION: u32 = 1;

/// Invalid configuration, with the offending field path.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl ToString) -> Self {
        Self {
            field: field.into(),
            message: message.to_string(),
        }
    }
}

fn check(field: &str, ok: bool, value: f64, rule: &str) -> Result<(), ConfigError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("{value} {rule}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub format_version: u32,
    /// Dispersion JSON; relative paths resolve against the config file.
    /// Absent selects the bundled KTP data.
    pub dispersion_file: Option<PathBuf>,
    pub modes: ModesConfig,
    pub geometry: GeometryConfig,
    pub quantum: QuantumConfig,
    pub measurement: MeasurementConfig,
    pub solver: SolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            dispersion_file: None,
            modes: ModesConfig::default(),
            geometry: GeometryConfig::default(),
            quantum: QuantumConfig::default(),
            measurement: MeasurementConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModesConfig {
    pub subharmonic_wavelength_nm: f64,
    pub signal: CrystalAxis,
    pub idler: CrystalAxis,
    pub pump: CrystalAxis,
}

impl Default for ModesConfig {
    fn default() -> Self {
        Self {
            subharmonic_wavelength_nm: 1080.0,
            signal: CrystalAxis::Y,
            idler: CrystalAxis::Z,
            pump: CrystalAxis::Y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoatingConfig {
    pub wavelength_nm: f64,
    pub transmission: f64,
    #[serde(default)]
    pub loss: f64,
}

/// Pump round-trip loss, given directly or inferred from the ratio of
/// non-resonant to resonant threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum PumpLossConfig {
    Value(f64),
    FromThresholdRatio { from_threshold_ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub crystal_length_mm: f64,
    pub aperture_width_mm: f64,
    pub aperture_height_mm: f64,
    pub wedge_angle_deg: f64,
    /// Front face to output mirror; the air gap is this minus the crystal.
    pub cavity_length_mm: f64,
    pub mirror_radius_mm: f64,
    pub front_face: Vec<CoatingConfig>,
    pub end_face: Vec<CoatingConfig>,
    pub output_coupler: Vec<CoatingConfig>,
    pub loss_subharmonic: f64,
    pub loss_pump: PumpLossConfig,
}

fn coatings(pairs: &[(f64, f64)]) -> Vec<CoatingConfig> {
    pairs
        .iter()
        .map(|&(wavelength_nm, transmission)| CoatingConfig {
            wavelength_nm,
            transmission,
            loss: 0.0,
        })
        .collect()
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            crystal_length_mm: 10.0,
            aperture_width_mm: 3.0,
            aperture_height_mm: 3.0,
            wedge_angle_deg: 1.0,
            cavity_length_mm: 54.0,
            mirror_radius_mm: 50.0,
            front_face: coatings(&[(1080.0, 0.0), (540.0, 0.2)]),
            end_face: coatings(&[(1080.0, 0.0), (540.0, 0.0)]),
            output_coupler: coatings(&[(1080.0, 0.125), (540.0, 0.0)]),
            loss_subharmonic: 0.003,
            loss_pump: PumpLossConfig::FromThresholdRatio {
                from_threshold_ratio: 12.5,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantumConfig {
    pub pump_power_mw: f64,
    /// Measured oscillation threshold; exactly one of this and `chi`.
    pub threshold_mw: Option<f64>,
    /// Effective nonlinear coupling in W^(-1/2).
    pub chi: Option<f64>,
    pub detection_efficiency: f64,
    pub kappa_convention: KappaConvention,
    pub analysis_frequency_mhz: f64,
}

impl Default for QuantumConfig {
    fn default() -> Self {
        Self {
            pump_power_mw: 75.0,
            threshold_mw: Some(150.0),
            chi: None,
            detection_efficiency: 0.95,
            kappa_convention: KappaConvention::Amplitude,
            analysis_frequency_mhz: 2.0,
        }
    }
}

/// RMS relative-phase jitter, given directly or chosen so the correlated
/// level lands `calibrate_to_db` below the SNL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum JitterConfig {
    Value(f64),
    Calibrate { calibrate_to_db: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementConfig {
    pub rbw_hz: f64,
    pub vbw_hz: f64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub enl_db: f64,
    pub noise_seed: u64,
    pub phase_jitter_rad: JitterConfig,
    pub scan_seed: u64,
    pub scan_shape: WaveShape,
    /// Peak-to-peak trim sweep in subharmonic free spectral ranges.
    pub scan_fsr: f64,
    pub scan_period_s: f64,
    pub scan_samples: usize,
    /// Detector noise in single-peak units.
    pub scan_detector_noise: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            rbw_hz: 10e3,
            vbw_hz: 100.0,
            duration_s: 1.0,
            sample_rate_hz: 1000.0,
            enl_db: -15.0,
            noise_seed: 1,
            phase_jitter_rad: JitterConfig::Calibrate { calibrate_to_db: 8.4 },
            scan_seed: 1,
            scan_shape: WaveShape::Triangle,
            scan_fsr: 1.0,
            scan_period_s: 0.02,
            scan_samples: 4000,
            scan_detector_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Absent: phase matching ± the half width of its sinc² curve.
    pub temperature_window_c: Option<[f64; 2]>,
    /// Absent: the full aperture.
    pub offset_range_mm: Option<[f64; 2]>,
    pub temperature_points: usize,
    pub offset_points: usize,
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            temperature_window_c: None,
            offset_range_mm: None,
            temperature_points: 241,
            offset_points: 301,
            tolerance: 1e-8,
        }
    }
}

/// Pump threshold resolved from either a measurement or `χ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdModel {
    pub threshold_w: f64,
    pub chi: f64,
    /// Pump round-trip loss `L0` actually used.
    pub pump_loss: f64,
    /// Input-coupler transmission `T0` at the pump.
    pub pump_coupling: f64,
    pub subharmonic_coupling: f64,
    pub subharmonic_loss: f64,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::new("config", e))?;
        if cfg.format_version != FORMAT_VERSION {
            return Err(ConfigError::new(
                "format_version",
                format!("{} is not supported (expected {FORMAT_VERSION})", cfg.format_version),
            ));
        }
        Ok(cfg)
    }

    /// Reads, parses and validates; resolves the dispersion path against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)?;
        if let Some(p) = &cfg.dispersion_file {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.dispersion_file = Some(base.join(p));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// All field-level checks plus construction of every library object.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let q = &self.quantum;
        check("quantum.pump_power_mw", q.pump_power_mw >= 0.0, q.pump_power_mw, "must be non-negative")?;
        check(
            "quantum.detection_efficiency",
            q.detection_efficiency > 0.0 && q.detection_efficiency <= 1.0,
            q.detection_efficiency,
            "must lie in (0, 1]",
        )?;
        check(
            "quantum.analysis_frequency_mhz",
            q.analysis_frequency_mhz >= 0.0,
            q.analysis_frequency_mhz,
            "must be non-negative",
        )?;
        let m = &self.measurement;
        check("measurement.scan_fsr", m.scan_fsr >= 1.0, m.scan_fsr, "must be at least 1")?;
        check(
            "measurement.scan_detector_noise",
            m.scan_detector_noise >= 0.0,
            m.scan_detector_noise,
            "must be non-negative",
        )?;
        let device = self.device()?;
        let threshold = self.threshold_model()?;
        if q.pump_power_mw * 1e-3 >= threshold.threshold_w {
            return Err(ConfigError::new(
                "quantum.pump_power_mw",
                format!(
                    "{} mW is not below the threshold {} mW",
                    q.pump_power_mw,
                    threshold.threshold_w * 1e3
                ),
            ));
        }
        self.search_domain(&device)?;
        self.noise_template().validate().map_err(|e| ConfigError::new("measurement", e))?;
        self.scan_waveform()
            .validate(device.subharmonic_wavelength_m())
            .map_err(|e| ConfigError::new("measurement", e))?;
        Ok(())
    }

    pub fn dispersion(&self) -> Result<DispersionModel, ConfigError> {
        match &self.dispersion_file {
            None => Ok(DispersionModel::reference_ktp()),
            Some(p) => DispersionModel::load(p).map_err(|e| ConfigError::new("dispersion_file", e)),
        }
    }

    pub fn modes(&self) -> Result<ModeSet, ConfigError> {
        let m = &self.modes;
        check(
            "modes.subharmonic_wavelength_nm",
            m.subharmonic_wavelength_nm > 0.0,
            m.subharmonic_wavelength_nm,
            "must be positive",
        )?;
        ModeSet::degenerate(m.subharmonic_wavelength_nm * 1e-9, m.signal, m.idler, m.pump)
            .map_err(|e| ConfigError::new("modes", e))
    }

    fn coating(field: &str, entries: &[CoatingConfig]) -> Result<CoatingSpec, ConfigError> {
        CoatingSpec::new(
            entries
                .iter()
                .map(|c| CoatingEntry {
                    wavelength_m: c.wavelength_nm * 1e-9,
                    transmission: c.transmission,
                    loss: c.loss,
                })
                .collect(),
        )
        .map_err(|e| ConfigError::new(field, e))
    }

    /// Pump loss `L0`, inferring it from the threshold ratio if asked.
    pub fn pump_loss(&self) -> Result<f64, ConfigError> {
        let g = &self.geometry;
        match g.loss_pump {
            PumpLossConfig::Value(v) => Ok(v),
            PumpLossConfig::FromThresholdRatio { from_threshold_ratio } => {
                let modes = self.modes()?;
                let front = Self::coating("geometry.front_face", &g.front_face)?;
                let t0 = front
                    .transmission(modes.pump.wavelength_m)
                    .map_err(|e| ConfigError::new("geometry.front_face", e))?;
                infer_pump_loss(from_threshold_ratio, t0).map_err(|e| ConfigError::new("geometry.loss_pump", e))
            }
        }
    }

    pub fn geometry(&self) -> Result<NopaGeometry, ConfigError> {
        let g = &self.geometry;
        for (f, v) in [
            ("geometry.crystal_length_mm", g.crystal_length_mm),
            ("geometry.cavity_length_mm", g.cavity_length_mm),
        ] {
            check(f, v > 0.0, v, "must be positive")?;
        }
        if g.cavity_length_mm <= g.crystal_length_mm {
            return Err(ConfigError::new(
                "geometry.cavity_length_mm",
                format!("{} mm must exceed the crystal length {} mm", g.cavity_length_mm, g.crystal_length_mm),
            ));
        }
        check(
            "geometry.wedge_angle_deg",
            g.wedge_angle_deg >= 0.0 && g.wedge_angle_deg < 5.0,
            g.wedge_angle_deg,
            "must lie in [0, 5)",
        )?;
        NopaGeometry::new(
            WedgedCrystal {
                length_m: g.crystal_length_mm * 1e-3,
                aperture_width_m: g.aperture_width_mm * 1e-3,
                aperture_height_m: g.aperture_height_mm * 1e-3,
                wedge_angle_rad: g.wedge_angle_deg.to_radians(),
                front_face: Self::coating("geometry.front_face", &g.front_face)?,
                end_face: Self::coating("geometry.end_face", &g.end_face)?,
            },
            (g.cavity_length_mm - g.crystal_length_mm) * 1e-3,
            g.mirror_radius_mm * 1e-3,
            Self::coating("geometry.output_coupler", &g.output_coupler)?,
            g.loss_subharmonic,
            self.pump_loss()?,
        )
        .map_err(|e| ConfigError::new("geometry", e))
    }

    pub fn device(&self) -> Result<NopaDevice, ConfigError> {
        let device = NopaDevice::new(self.geometry()?, self.dispersion()?, self.modes()?)
            .map_err(|e| ConfigError::new("geometry", e))?;
        // the cavity must be stable and every mode needs coatings
        for m in device.modes.modes() {
            crate::cavity_optics::round_trip_phase(
                &device.geometry,
                &m,
                &device.dispersion,
                device.dispersion.reference_temperature_c,
                0.0,
                0.0,
            )
            .map_err(|e| ConfigError::new("geometry", e))?;
            device.geometry.couplers(&m).map_err(|e| ConfigError::new("geometry", e))?;
            device.geometry.round_trip_loss(&m).map_err(|e| ConfigError::new("geometry", e))?;
        }
        Ok(device)
    }

    pub fn threshold_model(&self) -> Result<ThresholdModel, ConfigError> {
        let modes = self.modes()?;
        let geom = self.geometry()?;
        let field = |e| ConfigError::new("geometry", e);
        let (t0, _) = geom.couplers(&modes.pump).map_err(field)?;
        let l0 = geom.round_trip_loss(&modes.pump).map_err(field)?;
        let (t_in, t_out) = geom.couplers(&modes.signal).map_err(field)?;
        let t = t_in + t_out;
        let l = geom.round_trip_loss(&modes.signal).map_err(field)?;
        let q = &self.quantum;
        let (threshold_w, chi) = match (q.threshold_mw, q.chi) {
            (Some(p), None) => {
                check("quantum.threshold_mw", p > 0.0, p, "must be positive")?;
                let chi = fit_chi(p * 1e-3, t0, l0, t, l).map_err(|e| ConfigError::new("quantum.threshold_mw", e))?;
                (p * 1e-3, chi)
            }
            (None, Some(chi)) => {
                let p = threshold_power(t0, l0, t, l, chi).map_err(|e| ConfigError::new("quantum.chi", e))?;
                (p, chi)
            }
            (None, None) => {
                return Err(ConfigError::new(
                    "quantum.threshold_mw",
                    "either threshold_mw or chi must be given",
                ))
            }
            (Some(_), Some(_)) => {
                return Err(ConfigError::new(
                    "quantum.chi",
                    "give only one of threshold_mw and chi",
                ))
            }
        };
        Ok(ThresholdModel {
            threshold_w,
            chi,
            pump_loss: l0,
            pump_coupling: t0,
            subharmonic_coupling: t,
            subharmonic_loss: l,
        })
    }

    pub fn search_domain(&self, device: &NopaDevice) -> Result<SearchDomain, ConfigError> {
        let mut d = SearchDomain::around_phase_matching(device).map_err(|e| ConfigError::new("solver", e))?;
        let s = &self.solver;
        if let Some([a, b]) = s.temperature_window_c {
            d.temperature_c = (a, b);
        }
        if let Some([a, b]) = s.offset_range_mm {
            d.offset_m = (a * 1e-3, b * 1e-3);
        }
        d.temperature_points = s.temperature_points;
        d.offset_points = s.offset_points;
        d.tolerance = s.tolerance;
        d.validate(device).map_err(|e| ConfigError::new("solver", e))?;
        Ok(d)
    }

    /// Operating point for the variance spectra; `κ` is that of the signal
    /// mode at phase matching with the crystal at `d = 0`.
    pub fn operating_point(&self, device: &NopaDevice) -> Result<OperatingPoint, ConfigError> {
        let threshold = self.threshold_model()?;
        let pm = phase_matching_temperature(&device.dispersion, &device.modes, TEMPERATURE_WINDOW_C)
            .map_err(|e| ConfigError::new("modes", e))?;
        let params = crate::cavity_optics::mode_params(
            &device.geometry,
            &device.modes.signal,
            &device.dispersion,
            pm.temperature_c,
            0.0,
            self.quantum.kappa_convention,
        )
        .map_err(|e| ConfigError::new("geometry", e))?;
        let detection = DetectionChain::new(self.quantum.detection_efficiency, params.escape_efficiency)
            .map_err(|e| ConfigError::new("quantum.detection_efficiency", e))?;
        Ok(OperatingPoint {
            pump_power_w: self.quantum.pump_power_mw * 1e-3,
            threshold_w: threshold.threshold_w,
            decay_rate: params.decay_rate,
            detection,
        })
    }

    /// Noise-trace settings with level and seed left for the caller.
    pub fn noise_template(&self) -> crate::measurement_sim::NoiseTraceConfig {
        let m = &self.measurement;
        crate::measurement_sim::NoiseTraceConfig {
            level_db: 0.0,
            rbw_hz: m.rbw_hz,
            vbw_hz: m.vbw_hz,
            duration_s: m.duration_s,
            sample_rate_hz: m.sample_rate_hz,
            enl_db: m.enl_db,
            seed: m.noise_seed,
        }
    }

    pub fn scan_waveform(&self) -> ScanWaveform {
        let m = &self.measurement;
        ScanWaveform {
            shape: m.scan_shape,
            amplitude_m: m.scan_fsr * 0.5 * self.modes.subharmonic_wavelength_nm * 1e-9,
            period_s: m.scan_period_s,
            samples: m.scan_samples,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_reference_device() {
        let cfg = RunConfig::from_json_str(r#"{"format_version": 1}"#).unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
        let t = cfg.threshold_model().unwrap();
        assert!((t.pump_loss - 0.052982).abs() < 1e-6);
    }

    #[test]
    fn defaults_round_trip_through_json() {
        let text = serde_json::to_string_pretty(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::from_json_str(&text).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_field_is_named() {
        let e = RunConfig::from_json_str(r#"{"format_version": 1, "geometry": {"wedge": 1}}"#).unwrap_err();
        assert!(e.message.contains("wedge"), "{e}");
    }

    #[test]
    fn wrong_version_rejected() {
        let e = RunConfig::from_json_str(r#"{"format_version": 2}"#).unwrap_err();
        assert_eq!(e.field, "format_version");
    }

    #[test]
    fn threshold_source_must_be_unique() {
        let mut cfg = RunConfig::default();
        cfg.quantum.chi = Some(0.07);
        assert_eq!(cfg.validate().unwrap_err().field, "quantum.chi");
        cfg.quantum.threshold_mw = None;
        cfg.quantum.chi = None;
        assert_eq!(cfg.validate().unwrap_err().field, "quantum.threshold_mw");
    }

    #[test]
    fn pump_above_threshold_rejected() {
        let mut cfg = RunConfig::default();
        cfg.quantum.pump_power_mw = 150.0;
        assert_eq!(cfg.validate().unwrap_err().field, "quantum.pump_power_mw");
    }

    #[test]
    fn explicit_pump_loss() {
        let cfg: RunConfig =
            RunConfig::from_json_str(r#"{"format_version": 1, "geometry": {"loss_pump": 0.05}}"#).unwrap();
        assert_eq!(cfg.pump_loss().unwrap(), 0.05);
    }
}

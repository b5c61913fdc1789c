//! Crystal dispersion: temperature- and wavelength-dependent refractive
//! indices and the type-II phase-matching condition.
//!
//! Coefficients are never compiled in as literals. They are read from a
//! versioned JSON file (see `data/` in the crate root). The reference KTP set
//! ships with the crate and is embedded from that file by
//! [`DispersionModel::reference_ktp`].
//!
//! Index model, with `λ` in micrometres:
//!
//! ```text
//! n(λ, T)  = n_S(λ) + dn/dT(λ) · (T − T_ref)
//! n_S(λ)² = A + Σ_k B_k / (λ² − C_k) − D·λ²
//! dn/dT(λ) = Σ_k c_k · λ^(−k)
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Wavelength window (µm) over which indices may be evaluated.
pub const WAVELENGTH_WINDOW_UM: (f64, f64) = (0.4, 1.5);
/// Temperature window (°C) accepted by [`refractive_index`].
pub const TEMPERATURE_WINDOW_C: (f64, f64) = (0.0, 200.0);
/// Temperature window (°C) over which loaded models are validated.
const VALIDATION_TEMPERATURES_C: [f64; 3] = [20.0, 70.0, 120.0];

/// Phase-mismatch tolerance used by [`phase_matching_temperature`].
pub const PHASE_MATCH_TOLERANCE: f64 = 1e-9;

const REFERENCE_KTP_JSON: &str = include_str!("../data/ktp_kato_takaoka_2002.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("wavelength {wavelength_um} um is outside the dispersion window [0.4, 1.5] um")]
    WavelengthOutOfRange { wavelength_um: f64 },

    #[error("temperature {temperature_c} C is outside the accepted range [0, 200] C")]
    TemperatureOutOfRange { temperature_c: f64 },

    #[error("invalid dispersion model: {0}")]
    InvalidModel(String),

    #[error("invalid mode set: {0}")]
    InvalidModes(String),

    #[error(
        "no phase-matching point in [{low_c}, {high_c}] C: index mismatch runs from {mismatch_low:e} to {mismatch_high:e} without a sign change"
    )]
    NoPhaseMatching {
        low_c: f64,
        high_c: f64,
        mismatch_low: f64,
        mismatch_high: f64,
    },

    #[error("index mismatch is flat in temperature ({mismatch:e}); every temperature in the window is equally phase matched")]
    FlatMismatch { mismatch: f64 },

    #[error("could not read dispersion file {path}: {message}")]
    Io { path: String, message: String },
}

/// Principal dielectric axis of a biaxial crystal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrystalAxis {
    X,
    Y,
    Z,
}

impl CrystalAxis {
    pub const ALL: [CrystalAxis; 3] = [CrystalAxis::X, CrystalAxis::Y, CrystalAxis::Z];

    fn index(self) -> usize {
        match self {
            CrystalAxis::X => 0,
            CrystalAxis::Y => 1,
            CrystalAxis::Z => 2,
        }
    }
}

impl fmt::Display for CrystalAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CrystalAxis::X => "x",
            CrystalAxis::Y => "y",
            CrystalAxis::Z => "z",
        };
        f.write_str(s)
    }
}

/// Propagation axis of an α-cut crystal.
pub const PROPAGATION_AXIS: CrystalAxis = CrystalAxis::X;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeRole {
    Signal,
    Idler,
    Pump,
}

impl fmt::Display for ModeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModeRole::Signal => "signal",
            ModeRole::Idler => "idler",
            ModeRole::Pump => "pump",
        };
        f.write_str(s)
    }
}

/// One of the three cavity modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalMode {
    pub role: ModeRole,
    /// Vacuum wavelength in metres.
    pub wavelength_m: f64,
    pub polarization: CrystalAxis,
}

/// Signal, idler and pump of a frequency-degenerate type-II process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub signal: OpticalMode,
    pub idler: OpticalMode,
    pub pump: OpticalMode,
}

impl ModeSet {
    /// Degenerate subharmonics at `subharmonic_wavelength_m` with orthogonal
    /// polarizations, pumped at half that wavelength.
    pub fn degenerate(
        subharmonic_wavelength_m: f64,
        signal_axis: CrystalAxis,
        idler_axis: CrystalAxis,
        pump_axis: CrystalAxis,
    ) -> Result<Self, MaterialError> {
        let set = Self {
            signal: OpticalMode {
                role: ModeRole::Signal,
                wavelength_m: subharmonic_wavelength_m,
                polarization: signal_axis,
            },
            idler: OpticalMode {
                role: ModeRole::Idler,
                wavelength_m: subharmonic_wavelength_m,
                polarization: idler_axis,
            },
            pump: OpticalMode {
                role: ModeRole::Pump,
                wavelength_m: 0.5 * subharmonic_wavelength_m,
                polarization: pump_axis,
            },
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        let ls = self.signal.wavelength_m;
        if !(ls.is_finite() && ls > 0.0) {
            return Err(MaterialError::InvalidModes(format!(
                "subharmonic wavelength {ls} m must be positive"
            )));
        }
        if (self.idler.wavelength_m - ls).abs() > 1e-12 * ls {
            return Err(MaterialError::InvalidModes(
                "signal and idler wavelengths must be equal".into(),
            ));
        }
        if (self.pump.wavelength_m - 0.5 * ls).abs() > 1e-12 * ls {
            return Err(MaterialError::InvalidModes(
                "pump wavelength must be half the subharmonic wavelength".into(),
            ));
        }
        if self.signal.polarization == self.idler.polarization {
            return Err(MaterialError::InvalidModes(
                "signal and idler must be polarized along orthogonal axes".into(),
            ));
        }
        for mode in self.modes() {
            if mode.polarization == PROPAGATION_AXIS {
                return Err(MaterialError::InvalidModes(format!(
                    "{} cannot be polarized along the propagation axis {}",
                    mode.role, PROPAGATION_AXIS
                )));
            }
        }
        Ok(())
    }

    /// Signal, idler, pump in that order.
    pub fn modes(&self) -> [OpticalMode; 3] {
        [self.signal, self.idler, self.pump]
    }

    /// Same set with signal and idler polarizations exchanged.
    pub fn swapped_subharmonics(&self) -> Self {
        let mut s = *self;
        std::mem::swap(&mut s.signal.polarization, &mut s.idler.polarization);
        s
    }
}

/// A single `B / (λ² − C)` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellmeierPole {
    pub strength: f64,
    /// Resonance `C` in µm².
    pub resonance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellmeierCoefficients {
    pub constant: f64,
    pub poles: Vec<SellmeierPole>,
    /// `D` in the `−D·λ²` infrared correction (µm⁻²).
    #[serde(default)]
    pub ir_term: f64,
}

impl SellmeierCoefficients {
    fn index_squared(&self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        self.constant
            + self
                .poles
                .iter()
                .map(|p| p.strength / (l2 - p.resonance))
                .sum::<f64>()
            - self.ir_term * l2
    }
}

/// Dispersion and thermo-optic data for one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellmeierSet {
    pub axis: CrystalAxis,
    pub sellmeier: SellmeierCoefficients,
    /// `c_k` of `dn/dT = Σ c_k λ^(−k)`, in 1/K with `λ` in µm.
    pub thermo_optic: Vec<f64>,
}

impl SellmeierSet {
    /// Index at the reference temperature.
    pub fn sellmeier_index(&self, lambda_um: f64) -> f64 {
        self.sellmeier.index_squared(lambda_um).sqrt()
    }

    /// dn/dT in 1/K.
    pub fn thermo_optic_slope(&self, lambda_um: f64) -> f64 {
        let inv = 1.0 / lambda_um;
        // Horner in 1/λ
        self.thermo_optic
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * inv + c)
    }

    fn index(&self, lambda_um: f64, delta_t: f64) -> f64 {
        self.sellmeier_index(lambda_um) + self.thermo_optic_slope(lambda_um) * delta_t
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DispersionFile {
    format_version: u32,
    #[serde(default)]
    crystal: Option<String>,
    source: String,
    reference_temperature_c: f64,
    #[serde(default)]
    wavelength_unit: Option<String>,
    sets: Vec<SellmeierSet>,
}

/// Per-axis dispersion for a biaxial crystal.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionModel {
    sets: [SellmeierSet; 3],
    pub reference_temperature_c: f64,
    pub source: String,
}

impl DispersionModel {
    /// Builds and validates a model from one set per axis (any order).
    pub fn new(
        sets: Vec<SellmeierSet>,
        reference_temperature_c: f64,
        source: impl Into<String>,
    ) -> Result<Self, MaterialError> {
        if sets.len() != 3 {
            return Err(MaterialError::InvalidModel(format!(
                "expected exactly three axis sets, found {}",
                sets.len()
            )));
        }
        let mut slots: [Option<SellmeierSet>; 3] = [None, None, None];
        for set in sets {
            let i = set.axis.index();
            if slots[i].is_some() {
                return Err(MaterialError::InvalidModel(format!(
                    "axis {} listed twice",
                    set.axis
                )));
            }
            slots[i] = Some(set);
        }
        let [x, y, z] = slots;
        let (Some(x), Some(y), Some(z)) = (x, y, z) else {
            return Err(MaterialError::InvalidModel("missing axis".into()));
        };
        if !reference_temperature_c.is_finite() {
            return Err(MaterialError::InvalidModel(
                "reference temperature must be finite".into(),
            ));
        }
        let model = Self {
            sets: [x, y, z],
            reference_temperature_c,
            source: source.into(),
        };
        model.validate()?;
        Ok(model)
    }

    /// Parses the JSON dispersion file format.
    pub fn from_json_str(json: &str) -> Result<Self, MaterialError> {
        let file: DispersionFile = serde_json::from_str(json)
            .map_err(|e| MaterialError::InvalidModel(format!("malformed dispersion JSON: {e}")))?;
        if file.format_version != 1 {
            return Err(MaterialError::InvalidModel(format!(
                "unsupported dispersion format_version {}",
                file.format_version
            )));
        }
        if let Some(unit) = file.wavelength_unit.as_deref() {
            if unit != "um" {
                return Err(MaterialError::InvalidModel(format!(
                    "wavelength_unit must be \"um\", got {unit:?}"
                )));
            }
        }
        Self::new(file.sets, file.reference_temperature_c, file.source)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MaterialError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| MaterialError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json_str(&text)
    }

    /// Kato & Takaoka (2002) KTP set shipped in `data/`.
    pub fn reference_ktp() -> Self {
        Self::from_json_str(REFERENCE_KTP_JSON).expect("shipped dispersion file is valid")
    }

    /// Serializes back to the file format.
    pub fn to_json(&self) -> String {
        let file = DispersionFile {
            format_version: 1,
            crystal: None,
            source: self.source.clone(),
            reference_temperature_c: self.reference_temperature_c,
            wavelength_unit: Some("um".into()),
            sets: self.sets.to_vec(),
        };
        serde_json::to_string_pretty(&file).expect("dispersion model serializes")
    }

    pub fn set(&self, axis: CrystalAxis) -> &SellmeierSet {
        &self.sets[axis.index()]
    }

    pub fn set_mut(&mut self, axis: CrystalAxis) -> &mut SellmeierSet {
        &mut self.sets[axis.index()]
    }

    /// Index without range checks; `λ` in metres.
    pub(crate) fn index_unchecked(&self, axis: CrystalAxis, wavelength_m: f64, temperature_c: f64) -> f64 {
        self.set(axis)
            .index(wavelength_m * 1e6, temperature_c - self.reference_temperature_c)
    }

    /// dn/dT for `axis` at `wavelength_m`.
    pub fn thermo_optic_slope(&self, axis: CrystalAxis, wavelength_m: f64) -> f64 {
        self.set(axis).thermo_optic_slope(wavelength_m * 1e6)
    }

    fn validate(&self) -> Result<(), MaterialError> {
        let (lo, hi) = WAVELENGTH_WINDOW_UM;
        let steps = 110;
        for set in &self.sets {
            if set.thermo_optic.iter().any(|c| !c.is_finite())
                || !set.sellmeier.constant.is_finite()
                || set
                    .sellmeier
                    .poles
                    .iter()
                    .any(|p| !p.strength.is_finite() || !p.resonance.is_finite())
            {
                return Err(MaterialError::InvalidModel(format!(
                    "axis {}: non-finite coefficient",
                    set.axis
                )));
            }
            for &t in &VALIDATION_TEMPERATURES_C {
                let dt = t - self.reference_temperature_c;
                let mut prev: Option<f64> = None;
                for i in 0..=steps {
                    let l = lo + (hi - lo) * i as f64 / steps as f64;
                    let n = set.index(l, dt);
                    if !(n.is_finite() && n > 1.0 && n < 3.0) {
                        return Err(MaterialError::InvalidModel(format!(
                            "axis {}: index {n} at {l:.3} um, {t} C is outside (1, 3)",
                            set.axis
                        )));
                    }
                    if let Some(p) = prev {
                        if n >= p {
                            return Err(MaterialError::InvalidModel(format!(
                                "axis {}: anomalous dispersion near {l:.3} um, {t} C",
                                set.axis
                            )));
                        }
                    }
                    prev = Some(n);
                }
            }
        }
        Ok(())
    }
}

fn check_wavelength(wavelength_m: f64) -> Result<(), MaterialError> {
    let um = wavelength_m * 1e6;
    let (lo, hi) = WAVELENGTH_WINDOW_UM;
    // 1e-9 slack so 0.4 µm written in metres is still accepted
    if !(um.is_finite() && um >= lo - 1e-9 && um <= hi + 1e-9) {
        return Err(MaterialError::WavelengthOutOfRange { wavelength_um: um });
    }
    Ok(())
}

fn check_temperature(temperature_c: f64) -> Result<(), MaterialError> {
    let (lo, hi) = TEMPERATURE_WINDOW_C;
    if !(temperature_c.is_finite() && (lo..=hi).contains(&temperature_c)) {
        return Err(MaterialError::TemperatureOutOfRange { temperature_c });
    }
    Ok(())
}

/// Refractive index along `axis` at vacuum wavelength `wavelength_m` and
/// temperature `temperature_c`.
pub fn refractive_index(
    model: &DispersionModel,
    axis: CrystalAxis,
    wavelength_m: f64,
    temperature_c: f64,
) -> Result<f64, MaterialError> {
    check_wavelength(wavelength_m)?;
    check_temperature(temperature_c)?;
    Ok(model.index_unchecked(axis, wavelength_m, temperature_c))
}

/// `n_p − (n_s + n_i)/2` at `temperature_c`.
pub fn index_mismatch(
    model: &DispersionModel,
    modes: &ModeSet,
    temperature_c: f64,
) -> Result<f64, MaterialError> {
    let n = |m: &OpticalMode| refractive_index(model, m.polarization, m.wavelength_m, temperature_c);
    Ok(n(&modes.pump)? - 0.5 * (n(&modes.signal)? + n(&modes.idler)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseMatch {
    pub temperature_c: f64,
    /// Scan cell that contained the sign change.
    pub bracket_c: (f64, f64),
    /// Residual `n_p − (n_s + n_i)/2` at `temperature_c`.
    pub index_mismatch: f64,
}

/// Collinear type-II phase-matching temperature along the propagation axis,
/// located by scanning `window_c` for a sign change of the index mismatch and
/// bisecting it to [`PHASE_MATCH_TOLERANCE`].
pub fn phase_matching_temperature(
    model: &DispersionModel,
    modes: &ModeSet,
    window_c: (f64, f64),
) -> Result<PhaseMatch, MaterialError> {
    modes.validate()?;
    let (lo, hi) = window_c;
    check_temperature(lo)?;
    check_temperature(hi)?;
    if hi <= lo {
        return Err(MaterialError::TemperatureOutOfRange { temperature_c: hi });
    }
    const CELLS: usize = 200;
    let grid: Vec<f64> = (0..=CELLS)
        .map(|i| lo + (hi - lo) * i as f64 / CELLS as f64)
        .collect();
    let values = grid
        .iter()
        .map(|&t| index_mismatch(model, modes, t))
        .collect::<Result<Vec<_>, _>>()?;

    let (vmin, vmax) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if vmax - vmin < 1e-12 * (1.0 + vmax.abs()) {
        if vmax.abs() < PHASE_MATCH_TOLERANCE {
            return Err(MaterialError::FlatMismatch { mismatch: vmax });
        }
        return Err(MaterialError::NoPhaseMatching {
            low_c: lo,
            high_c: hi,
            mismatch_low: values[0],
            mismatch_high: values[CELLS],
        });
    }

    for i in 0..CELLS {
        let (t0, t1) = (grid[i], grid[i + 1]);
        let (f0, f1) = (values[i], values[i + 1]);
        if f0 == 0.0 {
            return Ok(PhaseMatch {
                temperature_c: t0,
                bracket_c: (t0, t1),
                index_mismatch: 0.0,
            });
        }
        if f0.signum() != f1.signum() || f1 == 0.0 {
            let (mut a, mut b, mut fa) = (t0, t1, f0);
            let mut mid = 0.5 * (a + b);
            let mut fm = index_mismatch(model, modes, mid)?;
            for _ in 0..200 {
                if fm.abs() < PHASE_MATCH_TOLERANCE && (b - a) < 1e-9 {
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
                let next = 0.5 * (a + b);
                if next == mid {
                    break;
                }
                mid = next;
                fm = index_mismatch(model, modes, mid)?;
            }
            return Ok(PhaseMatch {
                temperature_c: mid,
                bracket_c: (t0, t1),
                index_mismatch: fm,
            });
        }
    }
    Err(MaterialError::NoPhaseMatching {
        low_c: lo,
        high_c: hi,
        mismatch_low: values[0],
        mismatch_high: values[CELLS],
    })
}

/// Half width (K) of the `sinc²(Δk·L/2)` phase-matching curve at half
/// maximum, for a crystal of `crystal_length_m` near `temperature_c`.
pub fn phase_matching_half_width(
    model: &DispersionModel,
    modes: &ModeSet,
    crystal_length_m: f64,
    temperature_c: f64,
) -> Result<f64, MaterialError> {
    // sinc²(x) = 1/2 at x = 1.391557...
    const SINC2_HALF: f64 = 1.391_557_377_5;
    let slope = 0.5
        * (index_mismatch(model, modes, temperature_c + 1.0)?
            - index_mismatch(model, modes, temperature_c - 1.0)?);
    if slope == 0.0 {
        return Err(MaterialError::FlatMismatch {
            mismatch: index_mismatch(model, modes, temperature_c)?,
        });
    }
    // Δk = 2π·Δn/λ_p for a degenerate pair
    let dn_half = SINC2_HALF * modes.pump.wavelength_m / (std::f64::consts::PI * crystal_length_m);
    Ok((dn_half / slope).abs())
}

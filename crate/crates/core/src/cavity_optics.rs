//! Linear optics of the half-monolithic wedged-crystal cavity.
//!
//! The cavity is formed by the flat, coated front face of the crystal and a
//! concave output mirror. Sliding the crystal by `d` across the wedged end
//! face trades crystal path for air path:
//!
//! ```text
//! l(n, d) = 2·n·(l_x − d·tanθ) + 2·(l_air + d·tanθ)
//! Φ       = (2π/λ)·l(n, d) − 4·Φ_G(n)
//! ```
//!
//! Diffraction (stability, Gouy phase) sees the crystal through its reduced
//! length `l_x/n`; the round-trip phase uses the full optical length `n·l_x`.
//! `Φ_G` is one quarter of the ray-matrix round-trip Gouy phase, so that
//! `4·Φ_G` is exactly the Gouy phase picked up per round trip.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::material::{refractive_index, DispersionModel, MaterialError, ModeRole, OpticalMode};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Largest accepted wedge angle.
pub const MAX_WEDGE_ANGLE_RAD: f64 = 5.0 * PI / 180.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CavityError {
    #[error("wedge offset d = {offset_m} m is outside the crystal aperture [0, {width_m}] m")]
    OffsetOutOfRange { offset_m: f64, width_m: f64 },

    #[error("refractive index {0} must be finite and greater than 1")]
    InvalidIndex(f64),

    #[error("cavity is unstable for this mode: g1*g2 = {g_product}")]
    Unstable { g_product: f64 },

    #[error("lossless, uncoupled cavity: finesse diverges")]
    Divergent,

    #[error("output coupling T = 0 leaves the escape efficiency undefined")]
    UndefinedCoupling,

    #[error("fraction {name} = {value} is out of range")]
    InvalidFraction { name: &'static str, value: f64 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("no coating data at {wavelength_nm} nm")]
    MissingCoating { wavelength_nm: f64 },

    #[error(transparent)]
    Material(#[from] MaterialError),
}

/// Wraps a cycle count into `[−0.5, 0.5)`.
pub fn wrap_cycles(x: f64) -> f64 {
    x - (x + 0.5).floor()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoatingEntry {
    pub wavelength_m: f64,
    pub transmission: f64,
    #[serde(default)]
    pub loss: f64,
}

/// Power transmissivity and excess loss of a coated surface, per wavelength.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoatingSpec {
    pub entries: Vec<CoatingEntry>,
}

impl CoatingSpec {
    pub fn new(entries: Vec<CoatingEntry>) -> Result<Self, CavityError> {
        for e in &entries {
            if !(e.wavelength_m.is_finite() && e.wavelength_m > 0.0) {
                return Err(CavityError::InvalidGeometry(format!(
                    "coating wavelength {} m must be positive",
                    e.wavelength_m
                )));
            }
            if !(0.0..=1.0).contains(&e.transmission) || !(0.0..=1.0).contains(&e.loss) {
                return Err(CavityError::InvalidFraction {
                    name: "coating transmission/loss",
                    value: e.transmission.max(e.loss),
                });
            }
            if e.transmission + e.loss > 1.0 {
                return Err(CavityError::InvalidFraction {
                    name: "coating transmission + loss",
                    value: e.transmission + e.loss,
                });
            }
        }
        Ok(Self { entries })
    }

    fn entry(&self, wavelength_m: f64) -> Result<&CoatingEntry, CavityError> {
        self.entries
            .iter()
            .find(|e| (e.wavelength_m - wavelength_m).abs() <= 1e-6 * wavelength_m)
            .ok_or(CavityError::MissingCoating {
                wavelength_nm: wavelength_m * 1e9,
            })
    }

    pub fn transmission(&self, wavelength_m: f64) -> Result<f64, CavityError> {
        Ok(self.entry(wavelength_m)?.transmission)
    }

    pub fn loss(&self, wavelength_m: f64) -> Result<f64, CavityError> {
        Ok(self.entry(wavelength_m)?.loss)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgedCrystal {
    /// Length along the propagation axis.
    pub length_m: f64,
    /// Transverse extent along the translation direction; bounds `d`.
    pub aperture_width_m: f64,
    pub aperture_height_m: f64,
    pub wedge_angle_rad: f64,
    /// Flat input face; acts as the input coupler.
    pub front_face: CoatingSpec,
    /// Wedged face inside the cavity.
    pub end_face: CoatingSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NopaGeometry {
    pub crystal: WedgedCrystal,
    /// Crystal end face to output mirror at `d = 0`.
    pub air_gap_m: f64,
    /// Radius of curvature of the concave output mirror.
    pub mirror_radius_m: f64,
    pub output_coupler: CoatingSpec,
    /// Extra round-trip loss `L` for the subharmonic modes.
    pub loss_subharmonic: f64,
    /// Extra round-trip loss `L0` for the pump.
    pub loss_pump: f64,
}

impl NopaGeometry {
    pub fn new(
        crystal: WedgedCrystal,
        air_gap_m: f64,
        mirror_radius_m: f64,
        output_coupler: CoatingSpec,
        loss_subharmonic: f64,
        loss_pump: f64,
    ) -> Result<Self, CavityError> {
        let g = Self {
            crystal,
            air_gap_m,
            mirror_radius_m,
            output_coupler,
            loss_subharmonic,
            loss_pump,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), CavityError> {
        let c = &self.crystal;
        for (name, v) in [
            ("crystal length", c.length_m),
            ("aperture width", c.aperture_width_m),
            ("aperture height", c.aperture_height_m),
            ("air gap", self.air_gap_m),
            ("mirror radius", self.mirror_radius_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CavityError::InvalidGeometry(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(c.wedge_angle_rad >= 0.0 && c.wedge_angle_rad < MAX_WEDGE_ANGLE_RAD) {
            return Err(CavityError::InvalidGeometry(format!(
                "wedge angle {} rad must lie in [0, 5 deg)",
                c.wedge_angle_rad
            )));
        }
        if c.aperture_width_m * c.wedge_angle_rad.tan() >= c.length_m {
            return Err(CavityError::InvalidGeometry(
                "wedge removes the whole crystal before the aperture edge".into(),
            ));
        }
        for (name, v) in [("L", self.loss_subharmonic), ("L0", self.loss_pump)] {
            if !(0.0..=0.2).contains(&v) {
                return Err(CavityError::InvalidFraction { name, value: v });
            }
        }
        Ok(())
    }

    /// `l_x + l_air`.
    pub fn geometric_length_m(&self) -> f64 {
        self.crystal.length_m + self.air_gap_m
    }

    fn tan_wedge(&self) -> f64 {
        self.crystal.wedge_angle_rad.tan()
    }

    fn check_offset(&self, d: f64) -> Result<(), CavityError> {
        let w = self.crystal.aperture_width_m;
        if !(d.is_finite() && (0.0..=w).contains(&d)) {
            return Err(CavityError::OffsetOutOfRange {
                offset_m: d,
                width_m: w,
            });
        }
        Ok(())
    }

    /// `(T_in, T_out)` power transmissions seen by `mode`.
    pub fn couplers(&self, mode: &OpticalMode) -> Result<(f64, f64), CavityError> {
        Ok((
            self.crystal.front_face.transmission(mode.wavelength_m)?,
            self.output_coupler.transmission(mode.wavelength_m)?,
        ))
    }

    /// Extra round-trip loss for `mode`, including coating excess loss.
    pub fn round_trip_loss(&self, mode: &OpticalMode) -> Result<f64, CavityError> {
        let base = match mode.role {
            ModeRole::Pump => self.loss_pump,
            ModeRole::Signal | ModeRole::Idler => self.loss_subharmonic,
        };
        let l = mode.wavelength_m;
        Ok(base
            + self.crystal.front_face.loss(l)?
            + 2.0 * self.crystal.end_face.loss(l)?
            + self.output_coupler.loss(l)?)
    }
}

/// Round-trip optical path `l(n, d)`.
pub fn optical_path_length(geom: &NopaGeometry, index: f64, offset_m: f64) -> Result<f64, CavityError> {
    if !(index.is_finite() && index > 1.0) {
        return Err(CavityError::InvalidIndex(index));
    }
    geom.check_offset(offset_m)?;
    Ok(path_length(geom, index, offset_m, 0.0))
}

/// `l(n, d)` with the piezo trim added to the air gap; no checks.
fn path_length(geom: &NopaGeometry, index: f64, offset_m: f64, trim_m: f64) -> f64 {
    let shift = offset_m * geom.tan_wedge();
    2.0 * index * (geom.crystal.length_m - shift) + 2.0 * (geom.air_gap_m + trim_m + shift)
}

/// Paraxial ray-transfer matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RayMatrix {
    pub fn free_space(length: f64) -> Self {
        Self { a: 1.0, b: length, c: 0.0, d: 1.0 }
    }

    /// Reflection from a concave mirror of radius `radius`.
    pub fn mirror(radius: f64) -> Self {
        Self { a: 1.0, b: 0.0, c: -2.0 / radius, d: 1.0 }
    }

    /// `self` applied after `first`.
    pub fn after(&self, first: &RayMatrix) -> RayMatrix {
        RayMatrix {
            a: self.a * first.a + self.b * first.c,
            b: self.a * first.b + self.b * first.d,
            c: self.c * first.a + self.d * first.c,
            d: self.c * first.b + self.d * first.d,
        }
    }

    pub fn half_trace(&self) -> f64 {
        0.5 * (self.a + self.d)
    }

    /// Propagates the complex beam parameter `q`, returning the new `q` and
    /// the Gouy phase picked up on the way.
    pub fn propagate(&self, q: Complex64) -> (Complex64, f64) {
        let q_out = (self.a * q + self.b) / (self.c * q + self.d);
        let gouy = -(self.a + self.b / q).arg();
        (q_out, gouy)
    }

    /// Self-consistent `q` at the reference plane of a stable round trip.
    pub fn eigen_q(&self) -> Option<Complex64> {
        let m = self.half_trace();
        if !(m.abs() < 1.0) || self.b == 0.0 {
            return None;
        }
        let re = (self.d - self.a) / (2.0 * self.b);
        let im = -(1.0 - m * m).sqrt() / self.b.abs();
        Some(Complex64::new(1.0, 0.0) / Complex64::new(re, im))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GouyPhase {
    /// Total Gouy phase accumulated over one round trip.
    pub round_trip_rad: f64,
    /// Flat face to mirror.
    pub one_way_rad: f64,
    /// `Φ_G` such that `4·Φ_G` equals the round-trip value.
    pub quarter_rad: f64,
    /// Stability product `g1·g2` (flat face: `g1 = 1`).
    pub g_product: f64,
    /// Reduced length `l_air + l_x/n`.
    pub effective_length_m: f64,
}

/// Round-trip Gouy phase for a mode with crystal index `index`.
pub fn round_trip_gouy(geom: &NopaGeometry, index: f64) -> Result<GouyPhase, CavityError> {
    if !(index.is_finite() && index > 1.0) {
        return Err(CavityError::InvalidIndex(index));
    }
    let l_eff = geom.air_gap_m + geom.crystal.length_m / index;
    let g_product = 1.0 - l_eff / geom.mirror_radius_m;
    if !(g_product > 0.0 && g_product < 1.0) {
        return Err(CavityError::Unstable { g_product });
    }
    let out = RayMatrix::free_space(l_eff);
    let reflect = RayMatrix::mirror(geom.mirror_radius_m);
    let back = RayMatrix::free_space(l_eff);
    let round_trip = back.after(&reflect).after(&out);
    let q0 = round_trip
        .eigen_q()
        .ok_or(CavityError::Unstable { g_product })?;

    let (q1, gouy_out) = out.propagate(q0);
    let (q2, gouy_mirror) = reflect.propagate(q1);
    let (_, gouy_back) = back.propagate(q2);
    let total = gouy_out + gouy_mirror + gouy_back;
    Ok(GouyPhase {
        round_trip_rad: total,
        one_way_rad: gouy_out,
        quarter_rad: 0.25 * total,
        g_product,
        effective_length_m: l_eff,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundTripPhase {
    /// `Φ / 2π`, unwrapped.
    pub cycles: f64,
    pub total_rad: f64,
    /// `Φ` reduced to `[−π, π)`.
    pub wrapped_rad: f64,
    /// `Φ / 2π` reduced to `[−0.5, 0.5)`.
    pub fractional: f64,
    pub index: f64,
}

/// Round-trip phase of `mode` at temperature `temperature_c`, wedge offset
/// `offset_m` and mirror trim `trim_m`.
///
/// The trim lengthens the air gap for the propagation phase only; the Gouy
/// term is evaluated at the nominal gap so that a trim of `λ/2` shifts `Φ` by
/// exactly `2π`.
pub fn round_trip_phase(
    geom: &NopaGeometry,
    mode: &OpticalMode,
    model: &DispersionModel,
    temperature_c: f64,
    offset_m: f64,
    trim_m: f64,
) -> Result<RoundTripPhase, CavityError> {
    let n = refractive_index(model, mode.polarization, mode.wavelength_m, temperature_c)?;
    geom.check_offset(offset_m)?;
    let gouy = round_trip_gouy(geom, n)?;
    let cycles = path_length(geom, n, offset_m, trim_m) / mode.wavelength_m
        - gouy.round_trip_rad / (2.0 * PI);
    let fractional = wrap_cycles(cycles);
    Ok(RoundTripPhase {
        cycles,
        total_rad: 2.0 * PI * cycles,
        wrapped_rad: 2.0 * PI * fractional,
        fractional,
        index: n,
    })
}

fn check_fraction(name: &'static str, value: f64) -> Result<(), CavityError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(CavityError::InvalidFraction { name, value });
    }
    Ok(())
}

/// Finesse from the total round-trip loss, `2π/(T + L)`.
///
/// This is the convention under which a measured finesse of 49 with a
/// 12.5 % coupler implies 0.3 % extra loss. See [`airy_finesse`] for the
/// exact FWHM of the Airy function.
pub fn finesse(coupling: f64, loss: f64) -> Result<f64, CavityError> {
    check_fraction("T", coupling)?;
    check_fraction("L", loss)?;
    let total = coupling + loss;
    if total == 0.0 {
        return Err(CavityError::Divergent);
    }
    if total >= 1.0 {
        return Err(CavityError::InvalidFraction {
            name: "T + L",
            value: total,
        });
    }
    Ok(2.0 * PI / total)
}

/// Round-trip amplitude factor `g = √((1−T_in)(1−T_out)(1−L))`.
fn round_trip_amplitude(t_in: f64, t_out: f64, loss: f64) -> f64 {
    ((1.0 - t_in) * (1.0 - t_out) * (1.0 - loss)).sqrt()
}

/// `2π / FWHM` of the Airy transmission peak.
pub fn airy_finesse(t_in: f64, t_out: f64, loss: f64) -> Result<f64, CavityError> {
    check_fraction("T_in", t_in)?;
    check_fraction("T_out", t_out)?;
    check_fraction("L", loss)?;
    let g = round_trip_amplitude(t_in, t_out, loss);
    if g >= 1.0 {
        return Err(CavityError::Divergent);
    }
    let arg = (1.0 - g) / (2.0 * g.sqrt());
    if g == 0.0 || arg >= 1.0 {
        // peak never falls to half maximum
        return Ok(1.0);
    }
    Ok(PI / (2.0 * arg.asin()))
}

pub fn escape_efficiency(coupling: f64, loss: f64) -> Result<f64, CavityError> {
    if coupling == 0.0 {
        return Err(CavityError::UndefinedCoupling);
    }
    if !(coupling > 0.0 && coupling.is_finite()) {
        return Err(CavityError::InvalidFraction {
            name: "T",
            value: coupling,
        });
    }
    if !(loss >= 0.0 && loss.is_finite()) {
        return Err(CavityError::InvalidFraction {
            name: "L",
            value: loss,
        });
    }
    Ok(coupling / (coupling + loss))
}

/// How `κ` relates to the cavity linewidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaConvention {
    /// Field amplitude decay rate; HWHM of the resonance is `κ/2π` Hz.
    #[default]
    Amplitude,
    /// Energy decay rate, twice the amplitude rate.
    Energy,
}

/// Cavity decay rate in s⁻¹ from the free spectral range and the total
/// round-trip loss `T + L`.
pub fn decay_rate(fsr_hz: f64, round_trip_loss: f64, convention: KappaConvention) -> Result<f64, CavityError> {
    if !(fsr_hz.is_finite() && fsr_hz > 0.0) {
        return Err(CavityError::InvalidGeometry(format!(
            "free spectral range {fsr_hz} Hz must be positive"
        )));
    }
    check_fraction("T + L", round_trip_loss)?;
    let amplitude = 0.5 * round_trip_loss * fsr_hz;
    Ok(match convention {
        KappaConvention::Amplitude => amplitude,
        KappaConvention::Energy => 2.0 * amplitude,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavityModeParams {
    pub mode: OpticalMode,
    pub round_trip_optical_length_m: f64,
    pub fsr_hz: f64,
    pub coupling: f64,
    pub loss: f64,
    pub finesse: f64,
    pub decay_rate: f64,
    pub kappa_convention: KappaConvention,
    pub escape_efficiency: f64,
}

impl CavityModeParams {
    /// Full width at half maximum in Hz, from `κ`.
    pub fn linewidth_fwhm_hz(&self) -> f64 {
        let amplitude = match self.kappa_convention {
            KappaConvention::Amplitude => self.decay_rate,
            KappaConvention::Energy => 0.5 * self.decay_rate,
        };
        2.0 * amplitude / (2.0 * PI)
    }
}

pub fn mode_params(
    geom: &NopaGeometry,
    mode: &OpticalMode,
    model: &DispersionModel,
    temperature_c: f64,
    offset_m: f64,
    convention: KappaConvention,
) -> Result<CavityModeParams, CavityError> {
    let n = refractive_index(model, mode.polarization, mode.wavelength_m, temperature_c)?;
    let length = optical_path_length(geom, n, offset_m)?;
    let fsr = SPEED_OF_LIGHT / length;
    let (t_in, t_out) = geom.couplers(mode)?;
    let coupling = t_in + t_out;
    let loss = geom.round_trip_loss(mode)?;
    let finesse = finesse(coupling, loss)?;
    Ok(CavityModeParams {
        mode: *mode,
        round_trip_optical_length_m: length,
        fsr_hz: fsr,
        coupling,
        loss,
        finesse,
        decay_rate: decay_rate(fsr, coupling + loss, convention)?,
        kappa_convention: convention,
        escape_efficiency: escape_efficiency(coupling, loss)?,
    })
}

/// Transmitted power fraction of a two-mirror cavity at round-trip
/// detuning `detuning_rad`.
pub fn airy_transmission(detuning_rad: f64, t_in: f64, t_out: f64, loss: f64) -> f64 {
    let g = round_trip_amplitude(t_in, t_out, loss);
    let s = (0.5 * detuning_rad).sin();
    t_in * t_out * (1.0 - loss).sqrt() / ((1.0 - g).powi(2) + 4.0 * g * s * s)
}

/// Airy function normalized to 1 on resonance.
pub fn airy_lineshape(detuning_rad: f64, t_in: f64, t_out: f64, loss: f64) -> f64 {
    let g = round_trip_amplitude(t_in, t_out, loss);
    let s = (0.5 * detuning_rad).sin();
    let coefficient = 4.0 * g / (1.0 - g).powi(2);
    1.0 / (1.0 + coefficient * s * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geometry(theta_deg: f64) -> NopaGeometry {
        let coat = |pairs: &[(f64, f64)]| {
            CoatingSpec::new(
                pairs
                    .iter()
                    .map(|&(l, t)| CoatingEntry { wavelength_m: l, transmission: t, loss: 0.0 })
                    .collect(),
            )
            .unwrap()
        };
        NopaGeometry::new(
            WedgedCrystal {
                length_m: 10e-3,
                aperture_width_m: 3e-3,
                aperture_height_m: 3e-3,
                wedge_angle_rad: theta_deg.to_radians(),
                front_face: coat(&[(1080e-9, 0.0), (540e-9, 0.2)]),
                end_face: coat(&[(1080e-9, 0.0), (540e-9, 0.0)]),
            },
            44e-3,
            50e-3,
            coat(&[(1080e-9, 0.125), (540e-9, 0.0)]),
            0.003,
            0.053,
        )
        .unwrap()
    }

    #[test]
    fn path_at_zero_offset() {
        let g = geometry(1.0);
        let l = optical_path_length(&g, 1.8, 0.0).unwrap();
        assert_relative_eq!(l, 2.0 * 1.8 * 10e-3 + 2.0 * 44e-3, epsilon = 1e-15);
    }

    #[test]
    fn flat_wedge_makes_offset_inert() {
        let g = geometry(0.0);
        let a = optical_path_length(&g, 1.8, 0.0).unwrap();
        let b = optical_path_length(&g, 1.8, 2.5e-3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn offset_outside_aperture_is_rejected() {
        let g = geometry(1.0);
        assert!(matches!(
            optical_path_length(&g, 1.8, 3.1e-3),
            Err(CavityError::OffsetOutOfRange { .. })
        ));
        assert!(optical_path_length(&g, 1.8, -1e-6).is_err());
        assert!(matches!(optical_path_length(&g, 0.9, 0.0), Err(CavityError::InvalidIndex(_))));
    }

    #[test]
    fn unstable_geometry_reports_g() {
        let mut g = geometry(1.0);
        g.air_gap_m = 60e-3;
        match round_trip_gouy(&g, 1.8) {
            Err(CavityError::Unstable { g_product }) => assert!(g_product < 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn finesse_errors() {
        assert_eq!(finesse(0.0, 0.0), Err(CavityError::Divergent));
        assert!(finesse(0.9, 0.2).is_err());
        assert_eq!(escape_efficiency(0.0, 0.01), Err(CavityError::UndefinedCoupling));
    }

    #[test]
    fn escape_efficiency_cases() {
        assert_eq!(escape_efficiency(0.07, 0.0).unwrap(), 1.0);
        assert_eq!(escape_efficiency(0.04, 0.04).unwrap(), 0.5);
    }

    #[test]
    fn decay_rate_linearity() {
        let k = decay_rate(2.4e9, 0.128, KappaConvention::Amplitude).unwrap();
        assert_relative_eq!(decay_rate(2.4e9, 0.256, KappaConvention::Amplitude).unwrap(), 2.0 * k);
        assert_relative_eq!(decay_rate(1.2e9, 0.128, KappaConvention::Amplitude).unwrap(), 0.5 * k);
        assert_relative_eq!(decay_rate(2.4e9, 0.128, KappaConvention::Energy).unwrap(), 2.0 * k);
    }

    #[test]
    fn airy_extremes() {
        assert_relative_eq!(airy_transmission(0.0, 0.05, 0.05, 0.0), 1.0, epsilon = 1e-12);
        let at_pi = airy_transmission(PI, 0.05, 0.05, 0.0);
        for k in 0..100 {
            let det = -PI + 2.0 * PI * k as f64 / 100.0;
            assert!(airy_transmission(det, 0.05, 0.05, 0.0) >= at_pi - 1e-15);
        }
        assert_eq!(airy_lineshape(0.0, 0.2, 0.0, 0.05), 1.0);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_cycles(0.5), -0.5);
        assert_eq!(wrap_cycles(-0.5), -0.5);
        assert_relative_eq!(wrap_cycles(3.25), 0.25);
        assert_relative_eq!(wrap_cycles(-2.75), 0.25);
    }
}

//! Operating points where signal, idler and pump resonate together.
//!
//! Two phase combinations do not depend on the mirror trim:
//!
//! * `ψ = c_s − c_i`, the signal–idler order difference, tuned mainly by
//!   temperature through the birefringence;
//! * `β = c_p − c_s − c_i`, the pump order relative to the subharmonics,
//!   which the wedge offset `d` moves once `ψ` is held.
//!
//! (`c_j = Φ_j / 2π`.) Double resonance is `ψ ∈ ℤ`; triple resonance adds
//! `β ∈ ℤ`; the trim then places the common peak. The search follows the
//! experimental order: scan temperature for integer `ψ`, follow each
//! integer-`ψ` branch across `d` watching `β`, and polish each crossing with
//! a Newton iteration on all three residuals.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cavity_optics::{
    finesse, round_trip_phase, wrap_cycles, CavityError, NopaGeometry,
};
use crate::material::{
    phase_matching_half_width, phase_matching_temperature, DispersionModel, MaterialError, ModeSet,
    OpticalMode, TEMPERATURE_WINDOW_C,
};

/// Default residual tolerance, as a fraction of 2π.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

// Variable scaling used inside the Newton iteration: K, µm, nm.
const SCALE: [f64; 3] = [1.0, 1e-6, 1e-9];
const FD_STEP: [f64; 3] = [1e-3, 1e-2, 1e-2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Cavity(#[from] CavityError),

    #[error("invalid search domain: {0}")]
    InvalidDomain(String),

    #[error("signal-idler relative phase does not change with temperature (span {span:e} cycles); double resonance cannot be tuned")]
    DegenerateTemperature { span: f64 },

    #[error("no double resonance in [{low_c}, {high_c}] C: relative order spans {psi_min} .. {psi_max} without reaching an integer")]
    NoDoubleResonance {
        low_c: f64,
        high_c: f64,
        psi_min: f64,
        psi_max: f64,
    },

    #[error("wedge angle is zero: the crystal offset has no effect on the relative phases")]
    DegenerateWedge,

    #[error("pump residual never crosses zero along the double-resonance branches ({} sweep points)", sweep.len())]
    NoPumpCrossing { sweep: Vec<PumpSweepPoint> },

    #[error("Jacobian is singular at T = {temperature_c} C, d = {offset_m} m")]
    SingularJacobian { temperature_c: f64, offset_m: f64 },

    #[error("Newton iteration did not converge (max residual {residual:e})")]
    NotConverged { residual: f64 },
}

impl From<MaterialError> for SolverError {
    fn from(e: MaterialError) -> Self {
        SolverError::Cavity(CavityError::Material(e))
    }
}

/// Geometry, dispersion and mode assignment of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct NopaDevice {
    pub geometry: NopaGeometry,
    pub dispersion: DispersionModel,
    pub modes: ModeSet,
}

impl NopaDevice {
    pub fn new(geometry: NopaGeometry, dispersion: DispersionModel, modes: ModeSet) -> Result<Self, SolverError> {
        geometry.validate()?;
        modes.validate()?;
        Ok(Self {
            geometry,
            dispersion,
            modes,
        })
    }

    fn cycles(&self, mode: &OpticalMode, t: f64, d: f64, trim: f64) -> Result<f64, CavityError> {
        Ok(round_trip_phase(&self.geometry, mode, &self.dispersion, t, d, trim)?.cycles)
    }

    /// Unwrapped `Φ/2π` for signal, idler, pump.
    pub fn mode_cycles(&self, t: f64, d: f64, trim: f64) -> Result<[f64; 3], CavityError> {
        let [s, i, p] = self.modes.modes();
        Ok([
            self.cycles(&s, t, d, trim)?,
            self.cycles(&i, t, d, trim)?,
            self.cycles(&p, t, d, trim)?,
        ])
    }

    /// `(ψ, β)`: trim-independent order combinations.
    pub fn relative_orders(&self, t: f64, d: f64) -> Result<(f64, f64), CavityError> {
        let [s, i, p] = self.mode_cycles(t, d, 0.0)?;
        Ok((s - i, p - s - i))
    }

    pub fn subharmonic_wavelength_m(&self) -> f64 {
        self.modes.signal.wavelength_m
    }

    /// Trim in `[lo, lo + λ_s/2)` that puts the signal on resonance.
    fn signal_trim(&self, t: f64, d: f64, trim_low: f64) -> Result<f64, CavityError> {
        let half = 0.5 * self.subharmonic_wavelength_m();
        let c0 = self.cycles(&self.modes.signal, t, d, 0.0)?;
        let base = -wrap_cycles(c0) * half;
        let k = ((trim_low - base) / half).ceil();
        Ok(base + k * half)
    }

    /// Peak-coincidence tolerances in fractional orders: one linewidth
    /// (`1/F`) for the subharmonics and for the pump.
    fn linewidths(&self) -> Result<(f64, f64), CavityError> {
        let g = &self.geometry;
        let f = |m: &OpticalMode| -> Result<f64, CavityError> {
            let (t_in, t_out) = g.couplers(m)?;
            finesse(t_in + t_out, g.round_trip_loss(m)?)
        };
        Ok((1.0 / f(&self.modes.signal)?, 1.0 / f(&self.modes.pump)?))
    }
}

/// Per-mode fractional detuning `wrap(Φ_j/2π)` in `[−0.5, 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceResidual {
    pub signal: f64,
    pub idler: f64,
    pub pump: f64,
}

impl ResonanceResidual {
    pub const ZERO: Self = Self {
        signal: 0.0,
        idler: 0.0,
        pump: 0.0,
    };

    pub fn as_array(&self) -> [f64; 3] {
        [self.signal, self.idler, self.pump]
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub fn fractional_detunings(
    device: &NopaDevice,
    temperature_c: f64,
    offset_m: f64,
    trim_m: f64,
) -> Result<ResonanceResidual, SolverError> {
    let [s, i, p] = device.mode_cycles(temperature_c, offset_m, trim_m)?;
    Ok(ResonanceResidual {
        signal: wrap_cycles(s),
        idler: wrap_cycles(i),
        pump: wrap_cycles(p),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Single,
    Double,
    Triple,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Single => "single",
            Classification::Double => "double",
            Classification::Triple => "triple",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModeNumbers {
    pub signal: i64,
    pub idler: i64,
    pub pump: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceSolution {
    pub temperature_c: f64,
    pub wedge_offset_m: f64,
    pub length_trim_m: f64,
    pub mode_numbers: ModeNumbers,
    pub residual: ResonanceResidual,
    pub classification: Classification,
    /// Integer signal–idler order difference of the branch.
    pub subharmonic_order: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchDomain {
    pub temperature_c: (f64, f64),
    pub offset_m: (f64, f64),
    pub trim_m: (f64, f64),
    pub temperature_points: usize,
    pub offset_points: usize,
    pub tolerance: f64,
    /// Preferred temperature for tie-breaking, normally phase matching.
    pub target_temperature_c: f64,
}

impl SearchDomain {
    /// Temperatures within the half-maximum width of the phase-matching
    /// curve, the full crystal aperture in `d`, and one subharmonic free
    /// spectral range of trim centred on zero.
    pub fn around_phase_matching(device: &NopaDevice) -> Result<Self, SolverError> {
        let pm = phase_matching_temperature(&device.dispersion, &device.modes, TEMPERATURE_WINDOW_C)?;
        let hw = phase_matching_half_width(
            &device.dispersion,
            &device.modes,
            device.geometry.crystal.length_m,
            pm.temperature_c,
        )?;
        let (tmin, tmax) = TEMPERATURE_WINDOW_C;
        let quarter = 0.25 * device.subharmonic_wavelength_m();
        Ok(Self {
            temperature_c: ((pm.temperature_c - hw).max(tmin), (pm.temperature_c + hw).min(tmax)),
            offset_m: (0.0, device.geometry.crystal.aperture_width_m),
            trim_m: (-quarter, quarter),
            temperature_points: 241,
            offset_points: 301,
            tolerance: DEFAULT_TOLERANCE,
            target_temperature_c: pm.temperature_c,
        })
    }

    pub fn validate(&self, device: &NopaDevice) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidDomain(m));
        let (t0, t1) = self.temperature_c;
        if !(t0 < t1) || t0 < TEMPERATURE_WINDOW_C.0 || t1 > TEMPERATURE_WINDOW_C.1 {
            return bad(format!("temperature range [{t0}, {t1}] C"));
        }
        let (d0, d1) = self.offset_m;
        let w = device.geometry.crystal.aperture_width_m;
        if !(d0 <= d1) || d0 < 0.0 || d1 > w {
            return bad(format!("offset range [{d0}, {d1}] m must lie within [0, {w}] m"));
        }
        let (r0, r1) = self.trim_m;
        if !(r1 - r0 >= 0.5 * device.subharmonic_wavelength_m() * (1.0 - 1e-12)) {
            return bad(format!("trim range [{r0}, {r1}] m is shorter than half a subharmonic wavelength"));
        }
        if self.temperature_points < 2 || self.offset_points < 2 {
            return bad("grid needs at least two points per axis".into());
        }
        if !(self.tolerance > 0.0 && self.tolerance < 0.5) {
            return bad(format!("tolerance {}", self.tolerance));
        }
        Ok(())
    }

    fn grid(range: (f64, f64), points: usize) -> Vec<f64> {
        (0..points)
            .map(|i| range.0 + (range.1 - range.0) * i as f64 / (points - 1) as f64)
            .collect()
    }
}

/// Root of `f` in `[a, b]` given a sign change; secant steps safeguarded by
/// bisection.
fn bracketed_root<F>(mut f: F, mut a: f64, mut b: f64, fa: f64, fb: f64) -> Result<f64, CavityError>
where
    F: FnMut(f64) -> Result<f64, CavityError>,
{
    let (mut fa, mut fb) = (fa, fb);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut x = a;
    for _ in 0..200 {
        let secant = b - fb * (b - a) / (fb - fa);
        x = if secant > a.min(b) && secant < a.max(b) {
            secant
        } else {
            0.5 * (a + b)
        };
        let fx = f(x)?;
        if fx == 0.0 || (b - a).abs() < 1e-13 * (1.0 + x.abs()) || fx.abs() < 1e-13 {
            return Ok(x);
        }
        // keep the bracket; halve the stale end (Illinois) to avoid stalling
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            fb *= 0.5;
        } else {
            b = x;
            fb = fx;
            fa *= 0.5;
        }
    }
    Ok(x)
}

/// All temperatures in the domain where `ψ` is an integer at offset `d`,
/// with that integer.
pub fn double_resonance_temperatures(
    device: &NopaDevice,
    domain: &SearchDomain,
    offset_m: f64,
) -> Result<Vec<(i64, f64)>, SolverError> {
    let grid = SearchDomain::grid(domain.temperature_c, domain.temperature_points);
    let psi = grid
        .iter()
        .map(|&t| device.relative_orders(t, offset_m).map(|(p, _)| p))
        .collect::<Result<Vec<_>, _>>()?;
    let (lo, hi) = psi
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo < 1e-9 {
        return Err(SolverError::DegenerateTemperature { span: hi - lo });
    }
    let mut roots = Vec::new();
    for w in 0..grid.len() - 1 {
        let (pa, pb) = (psi[w], psi[w + 1]);
        let kmin = pa.min(pb).ceil() as i64;
        let kmax = pa.max(pb).floor() as i64;
        for k in kmin..=kmax {
            let kf = k as f64;
            // an integer hit exactly at a grid point belongs to the left cell
            if pb == kf && w + 1 < grid.len() - 1 {
                continue;
            }
            let t = bracketed_root(
                |t| Ok(device.relative_orders(t, offset_m)?.0 - kf),
                grid[w],
                grid[w + 1],
                pa - kf,
                pb - kf,
            )?;
            roots.push((k, t));
        }
    }
    Ok(roots)
}

fn classify_residual(r: &ResonanceResidual, tol: f64) -> Classification {
    match (r.signal.abs() < tol && r.idler.abs() < tol, r.pump.abs() < tol) {
        (true, true) => Classification::Triple,
        (true, false) => Classification::Double,
        _ => Classification::Single,
    }
}

fn make_solution(
    device: &NopaDevice,
    t: f64,
    d: f64,
    trim: f64,
    tol: f64,
) -> Result<ResonanceSolution, SolverError> {
    let c = device.mode_cycles(t, d, trim)?;
    let residual = ResonanceResidual {
        signal: wrap_cycles(c[0]),
        idler: wrap_cycles(c[1]),
        pump: wrap_cycles(c[2]),
    };
    Ok(ResonanceSolution {
        temperature_c: t,
        wedge_offset_m: d,
        length_trim_m: trim,
        mode_numbers: ModeNumbers {
            signal: c[0].round() as i64,
            idler: c[1].round() as i64,
            pump: c[2].round() as i64,
        },
        residual,
        classification: classify_residual(&residual, tol),
        subharmonic_order: (c[0] - c[1]).round() as i64,
    })
}

/// Double resonance at the lower end of the offset range, nearest the
/// target temperature.
pub fn solve_double_resonance(device: &NopaDevice, domain: &SearchDomain) -> Result<ResonanceSolution, SolverError> {
    domain.validate(device)?;
    let d = domain.offset_m.0;
    let roots = double_resonance_temperatures(device, domain, d)?;
    let Some(&(_, t)) = roots.iter().min_by(|a, b| {
        (a.1 - domain.target_temperature_c)
            .abs()
            .total_cmp(&(b.1 - domain.target_temperature_c).abs())
    }) else {
        let grid = SearchDomain::grid(domain.temperature_c, domain.temperature_points);
        let psi = grid
            .iter()
            .map(|&t| device.relative_orders(t, d).map(|(p, _)| p))
            .collect::<Result<Vec<_>, _>>()?;
        return Err(SolverError::NoDoubleResonance {
            low_c: domain.temperature_c.0,
            high_c: domain.temperature_c.1,
            psi_min: psi.iter().cloned().fold(f64::INFINITY, f64::min),
            psi_max: psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        });
    };
    let trim = device.signal_trim(t, d, domain.trim_m.0)?;
    make_solution(device, t, d, trim, domain.tolerance)
}

/// Residual vector `wrap(r − target)`.
fn target_residual(device: &NopaDevice, x: &[f64; 3], target: &ResonanceResidual) -> Result<Vector3<f64>, SolverError> {
    let c = device.mode_cycles(x[0], x[1], x[2])?;
    let t = target.as_array();
    Ok(Vector3::new(
        wrap_cycles(c[0] - t[0]),
        wrap_cycles(c[1] - t[1]),
        wrap_cycles(c[2] - t[2]),
    ))
}

/// Central-difference Jacobian of the unwrapped cycles in scaled variables.
fn jacobian(device: &NopaDevice, x: &[f64; 3]) -> Result<Matrix3<f64>, SolverError> {
    let width = device.geometry.crystal.aperture_width_m;
    let mut j = Matrix3::zeros();
    for k in 0..3 {
        let h = FD_STEP[k] * SCALE[k];
        let (mut xp, mut xm) = (*x, *x);
        xp[k] += h;
        xm[k] -= h;
        // one-sided at the aperture edges
        let mut span = 2.0 * h;
        if k == 1 && xm[1] < 0.0 {
            xm[1] = x[1];
            span = h;
        } else if k == 1 && xp[1] > width {
            xp[1] = x[1];
            span = h;
        }
        let cp = device.mode_cycles(xp[0], xp[1], xp[2])?;
        let cm = device.mode_cycles(xm[0], xm[1], xm[2])?;
        for r in 0..3 {
            j[(r, k)] = (cp[r] - cm[r]) / span * SCALE[k];
        }
    }
    Ok(j)
}

/// Newton step toward the nearest admissible lattice image of the target.
///
/// `f` is the wrapped residual; adding integers to it selects other images.
/// The plain step is preferred; otherwise the shortest step (in scaled
/// variables) that `admissible` accepts.
fn lattice_step<A>(device: &NopaDevice, x: &[f64; 3], f: &Vector3<f64>, admissible: A) -> Result<Option<[f64; 3]>, SolverError>
where
    A: Fn(&[f64; 3]) -> bool,
{
    let j = jacobian(device, x)?;
    let row_norms: f64 = (0..3).map(|r| j.row(r).norm()).product();
    let singular = SolverError::SingularJacobian {
        temperature_c: x[0],
        offset_m: x[1],
    };
    if row_norms == 0.0 || (j.determinant() / row_norms).abs() < 1e-12 {
        return Err(singular);
    }
    let lu = j.lu();
    let mut best: Option<(f64, [f64; 3])> = None;
    for a in -1..=1 {
        for b in -1..=1 {
            for c in -1..=1 {
                let shift = Vector3::new(a as f64, b as f64, c as f64);
                let dx = lu.solve(&(-(f + shift))).ok_or_else(|| singular.clone())?;
                let cand = [x[0] + dx[0] * SCALE[0], x[1] + dx[1] * SCALE[1], x[2] + dx[2] * SCALE[2]];
                if !admissible(&cand) {
                    continue;
                }
                if (a, b, c) == (0, 0, 0) {
                    return Ok(Some(cand));
                }
                let norm = dx.norm();
                if best.is_none_or(|(n, _)| norm < n) {
                    best = Some((norm, cand));
                }
            }
        }
    }
    Ok(best.map(|(_, c)| c))
}

fn in_device(device: &NopaDevice, x: &[f64; 3]) -> bool {
    let (tlo, thi) = TEMPERATURE_WINDOW_C;
    x[0] >= tlo && x[0] <= thi && x[1] >= 0.0 && x[1] <= device.geometry.crystal.aperture_width_m
}

/// Newton iteration on all three residuals toward `target` from `guess`
/// `(T, d, trim)`, staying inside the aperture and temperature window.
pub fn solve_operating_point(
    device: &NopaDevice,
    target: &ResonanceResidual,
    guess: (f64, f64, f64),
    tolerance: f64,
) -> Result<ResonanceSolution, SolverError> {
    let mut x = [guess.0, guess.1, guess.2];
    let mut f = target_residual(device, &x, target)?;
    for _ in 0..60 {
        if f.amax() < 1e-3 * tolerance {
            break;
        }
        let Some(next) = lattice_step(device, &x, &f, |c| in_device(device, c))? else {
            break;
        };
        let f_next = target_residual(device, &next, target)?;
        if f_next.amax() >= f.amax() && f.amax() < tolerance {
            break;
        }
        x = next;
        f = f_next;
    }
    if f.amax() >= tolerance {
        return Err(SolverError::NotConverged { residual: f.amax() });
    }
    make_solution(device, x[0], x[1], x[2], tolerance)
}

/// One point of the pump-residual sweep along a double-resonance branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PumpSweepPoint {
    pub offset_m: f64,
    pub temperature_c: f64,
    pub subharmonic_order: i64,
    /// `wrap(β)`: pump detuning while signal and idler are resonant.
    pub pump_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripleScan {
    /// Sorted by offset, then by distance from the target temperature.
    pub solutions: Vec<ResonanceSolution>,
    pub sweep: Vec<PumpSweepPoint>,
}

fn check_wedge(device: &NopaDevice) -> Result<(), SolverError> {
    if device.geometry.crystal.wedge_angle_rad.tan().abs() < 1e-12 {
        return Err(SolverError::DegenerateWedge);
    }
    Ok(())
}

/// Every triple resonance in the domain.
pub fn enumerate_triple_resonances(device: &NopaDevice, domain: &SearchDomain) -> Result<TripleScan, SolverError> {
    domain.validate(device)?;
    check_wedge(device)?;
    let offsets = SearchDomain::grid(domain.offset_m, domain.offset_points);

    let per_offset: Vec<Vec<PumpSweepPoint>> = offsets
        .par_iter()
        .map(|&d| -> Result<Vec<PumpSweepPoint>, SolverError> {
            double_resonance_temperatures(device, domain, d)?
                .into_iter()
                .map(|(k, t)| {
                    let (_, beta) = device.relative_orders(t, d)?;
                    Ok(PumpSweepPoint {
                        offset_m: d,
                        temperature_c: t,
                        subharmonic_order: k,
                        pump_residual: wrap_cycles(beta),
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut branches: BTreeMap<i64, Vec<(usize, PumpSweepPoint)>> = BTreeMap::new();
    for (i, points) in per_offset.iter().enumerate() {
        for p in points {
            branches.entry(p.subharmonic_order).or_default().push((i, *p));
        }
    }
    let sweep: Vec<PumpSweepPoint> = per_offset.into_iter().flatten().collect();
    if sweep.is_empty() {
        let (psi_a, _) = device.relative_orders(domain.temperature_c.0, domain.offset_m.0)?;
        let (psi_b, _) = device.relative_orders(domain.temperature_c.1, domain.offset_m.0)?;
        return Err(SolverError::NoDoubleResonance {
            low_c: domain.temperature_c.0,
            high_c: domain.temperature_c.1,
            psi_min: psi_a.min(psi_b),
            psi_max: psi_a.max(psi_b),
        });
    }

    let mut solutions: Vec<ResonanceSolution> = Vec::new();
    for points in branches.values() {
        for pair in points.windows(2) {
            let ((i0, a), (i1, b)) = (pair[0], pair[1]);
            if i1 != i0 + 1 {
                continue;
            }
            let (ra, rb) = (a.pump_residual, b.pump_residual);
            let crosses = (ra == 0.0) || (ra.signum() != rb.signum() && (ra - rb).abs() < 0.5);
            if !crosses {
                continue;
            }
            let s = if ra == 0.0 { 0.0 } else { ra / (ra - rb) };
            let t = a.temperature_c + s * (b.temperature_c - a.temperature_c);
            let d = a.offset_m + s * (b.offset_m - a.offset_m);
            let trim = device.signal_trim(t, d, domain.trim_m.0)?;
            let sol = solve_operating_point(device, &ResonanceResidual::ZERO, (t, d, trim), domain.tolerance)?;
            let inside = sol.temperature_c >= domain.temperature_c.0
                && sol.temperature_c <= domain.temperature_c.1
                && sol.wedge_offset_m >= domain.offset_m.0
                && sol.wedge_offset_m <= domain.offset_m.1;
            let duplicate = solutions.iter().any(|o| {
                (o.wedge_offset_m - sol.wedge_offset_m).abs() < 1e-9
                    && (o.temperature_c - sol.temperature_c).abs() < 1e-6
            });
            if inside && !duplicate && sol.classification == Classification::Triple {
                solutions.push(sol);
            }
        }
    }
    let target = domain.target_temperature_c;
    solutions.sort_by(|a, b| {
        a.wedge_offset_m.total_cmp(&b.wedge_offset_m).then(
            (a.temperature_c - target)
                .abs()
                .total_cmp(&(b.temperature_c - target).abs()),
        )
    });
    Ok(TripleScan { solutions, sweep })
}

/// Triple resonance with the smallest offset `d` in the domain.
pub fn solve_triple_resonance(device: &NopaDevice, domain: &SearchDomain) -> Result<ResonanceSolution, SolverError> {
    let scan = enumerate_triple_resonances(device, domain)?;
    scan.solutions
        .first()
        .copied()
        .ok_or(SolverError::NoPumpCrossing { sweep: scan.sweep })
}

/// Scan label at `(T, d)` over one subharmonic free spectral range of trim:
/// signal and idler peaks coincide when they are closer than one
/// subharmonic linewidth; the pump coincides when one of its peaks lies
/// within one pump linewidth of the signal peak.
pub fn classify_scan(device: &NopaDevice, temperature_c: f64, offset_m: f64) -> Result<Classification, SolverError> {
    let (psi, beta) = device.relative_orders(temperature_c, offset_m)?;
    let (sub_width, pump_width) = device.linewidths()?;
    // at the signal peak: idler detuned by −ψ, pump by β + ψ (all mod 1)
    let si = wrap_cycles(psi).abs();
    if si >= sub_width {
        return Ok(Classification::Single);
    }
    let pump = wrap_cycles(beta + psi).abs();
    Ok(if pump < pump_width {
        Classification::Triple
    } else {
        Classification::Double
    })
}

/// `(T, d, trim)` presets for the three scan stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StagePresets {
    /// Signal and idler half an order apart, pump detuned by half an order
    /// from both.
    pub single: ResonanceSolution,
    /// Signal and idler resonant, pump half an order off.
    pub double: ResonanceSolution,
    pub triple: ResonanceSolution,
}

/// Lattice point nearest `anchor` whose residuals equal `target` modulo 1,
/// staying inside the domain.
pub fn solve_relative_to(
    device: &NopaDevice,
    domain: &SearchDomain,
    anchor: &ResonanceSolution,
    target: &ResonanceResidual,
) -> Result<ResonanceSolution, SolverError> {
    let x = [anchor.temperature_c, anchor.wedge_offset_m, anchor.length_trim_m];
    let f = target_residual(device, &x, target)?;
    let inside = |c: &[f64; 3]| {
        c[0] >= domain.temperature_c.0
            && c[0] <= domain.temperature_c.1
            && c[1] >= domain.offset_m.0
            && c[1] <= domain.offset_m.1
    };
    let Some(g) = lattice_step(device, &x, &f, inside)? else {
        return Err(SolverError::InvalidDomain(
            "no lattice point with the requested detunings near the anchor".into(),
        ));
    };
    // re-centre the trim on the signal resonance window
    let mut sol = solve_operating_point(device, target, (g[0], g[1], g[2]), domain.tolerance)?;
    let half = 0.5 * device.subharmonic_wavelength_m();
    let k = ((domain.trim_m.0 - sol.length_trim_m) / half).ceil();
    if k != 0.0 {
        sol = make_solution(
            device,
            sol.temperature_c,
            sol.wedge_offset_m,
            sol.length_trim_m + k * half,
            domain.tolerance,
        )?;
    }
    Ok(sol)
}

pub fn stage_presets(device: &NopaDevice, domain: &SearchDomain) -> Result<StagePresets, SolverError> {
    let triple = solve_triple_resonance(device, domain)?;
    let double = solve_relative_to(
        device,
        domain,
        &triple,
        &ResonanceResidual {
            signal: 0.0,
            idler: 0.0,
            pump: -0.5,
        },
    )?;
    let single = solve_relative_to(
        device,
        domain,
        &triple,
        &ResonanceResidual {
            signal: 0.0,
            idler: -0.5,
            pump: -0.5,
        },
    )?;
    Ok(StagePresets {
        single,
        double,
        triple,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity_optics::{CoatingEntry, CoatingSpec, WedgedCrystal};
    use crate::material::CrystalAxis;

    fn device(theta_deg: f64) -> NopaDevice {
        let coat = |pairs: &[(f64, f64)]| {
            CoatingSpec::new(
                pairs
                    .iter()
                    .map(|&(l, t)| CoatingEntry { wavelength_m: l, transmission: t, loss: 0.0 })
                    .collect(),
            )
            .unwrap()
        };
        let geometry = NopaGeometry::new(
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
        .unwrap();
        let modes = ModeSet::degenerate(1080e-9, CrystalAxis::Y, CrystalAxis::Z, CrystalAxis::Y).unwrap();
        NopaDevice::new(geometry, DispersionModel::reference_ktp(), modes).unwrap()
    }

    #[test]
    #[ignore]
    fn explore() {
        let dev = device(1.0);
        let dom = SearchDomain::around_phase_matching(&dev).unwrap();
        println!("{dom:?}");
        println!("{:?}", solve_double_resonance(&dev, &dom));
        let scan = enumerate_triple_resonances(&dev, &dom).unwrap();
        for s in &scan.solutions {
            println!("{s:?}");
        }
        println!("{:#?}", stage_presets(&dev, &dom));
    }

    #[test]
    fn double_resonance_has_integer_order_difference() {
        let dev = device(1.0);
        let dom = SearchDomain::around_phase_matching(&dev).unwrap();
        let sol = solve_double_resonance(&dev, &dom).unwrap();
        assert!(sol.residual.signal.abs() < 1e-8);
        assert!(sol.residual.idler.abs() < 1e-8);
        assert_ne!(sol.classification, Classification::Single);
        assert_eq!(sol.mode_numbers.signal - sol.mode_numbers.idler, sol.subharmonic_order);
        assert!(sol.length_trim_m >= dom.trim_m.0 && sol.length_trim_m < dom.trim_m.0 + 540e-9);
    }

    #[test]
    fn triple_resonance_converges() {
        let dev = device(1.0);
        let dom = SearchDomain::around_phase_matching(&dev).unwrap();
        let sol = solve_triple_resonance(&dev, &dom).unwrap();
        assert_eq!(sol.classification, Classification::Triple);
        assert!(sol.residual.max_abs() < 1e-8);
        let again = fractional_detunings(&dev, sol.temperature_c, sol.wedge_offset_m, sol.length_trim_m).unwrap();
        assert_eq!(again, sol.residual);
        assert_eq!(classify_scan(&dev, sol.temperature_c, sol.wedge_offset_m).unwrap(), Classification::Triple);
    }

    #[test]
    fn flat_crystal_is_degenerate() {
        let dev = device(0.0);
        let dom = SearchDomain::around_phase_matching(&dev).unwrap();
        assert_eq!(solve_triple_resonance(&dev, &dom), Err(SolverError::DegenerateWedge));
    }

    #[test]
    fn presets_have_requested_detunings() {
        let dev = device(1.0);
        let dom = SearchDomain::around_phase_matching(&dev).unwrap();
        let p = stage_presets(&dev, &dom).unwrap();
        assert!(p.double.residual.signal.abs() < 1e-8 && p.double.residual.idler.abs() < 1e-8);
        assert!((p.double.residual.pump.abs() - 0.5).abs() < 1e-8);
        assert!((p.single.residual.idler.abs() - 0.5).abs() < 1e-8);
        assert_eq!(classify_scan(&dev, p.double.temperature_c, p.double.wedge_offset_m).unwrap(), Classification::Double);
        assert_eq!(classify_scan(&dev, p.single.temperature_c, p.single.wedge_offset_m).unwrap(), Classification::Single);
    }

    #[test]
    fn narrow_window_without_integer_order_reports_extrema() {
        let dev = device(1.0);
        let mut dom = SearchDomain::around_phase_matching(&dev).unwrap();
        let roots = double_resonance_temperatures(&dev, &dom, 0.0).unwrap();
        // a window strictly between two neighbouring roots
        let (a, b) = (roots[0].1, roots[1].1);
        dom.temperature_c = (a + 0.25 * (b - a), a + 0.75 * (b - a));
        match solve_double_resonance(&dev, &dom) {
            Err(SolverError::NoDoubleResonance { psi_min, psi_max, .. }) => {
                assert!(psi_min.floor() == psi_max.floor());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn domain_validation() {
        let dev = device(1.0);
        let mut dom = SearchDomain::around_phase_matching(&dev).unwrap();
        dom.offset_m = (0.0, 4e-3);
        assert!(matches!(dom.validate(&dev), Err(SolverError::InvalidDomain(_))));
        let mut dom = SearchDomain::around_phase_matching(&dev).unwrap();
        dom.trim_m = (0.0, 100e-9);
        assert!(matches!(dom.validate(&dev), Err(SolverError::InvalidDomain(_))));
    }
}

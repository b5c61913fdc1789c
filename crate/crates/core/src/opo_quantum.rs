//! Below-threshold NOPA: oscillation threshold, quadrature correlation
//! spectra and entanglement metrics.
//!
//! Variances are normalized so that the shot-noise limit of every two-mode
//! combination equals 2. For pump parameter `x = √(P/P_thr)`:
//!
//! ```text
//! V∓ = 2·(1 ∓ η_det·η_esc · 4x / ((1 ± x)² + 4(2πf/κ)²))
//! ```
//!
//! with the upper signs for the correlated combinations (X-sum, Y-diff).

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

/// Shot-noise level of a two-mode combination.
pub const SHOT_NOISE_LEVEL: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("pump power {pump_w} W is above the oscillation threshold {threshold_w} W")]
    AboveThreshold { pump_w: f64, threshold_w: f64 },

    #[error("anticorrelated variance diverges at threshold (P = P_thr = {threshold_w} W)")]
    ThresholdSingularity { threshold_w: f64 },

    #[error("{name} = {value} is outside its domain")]
    Domain { name: &'static str, value: f64 },

    #[error("threshold diverges: {0} is zero")]
    Divergent(&'static str),

    #[error("threshold ratio {ratio} with T0 = {t0} implies negative pump loss L0 = {l0}")]
    InconsistentPumpLoss { ratio: f64, t0: f64, l0: f64 },
}

fn require(name: &'static str, value: f64, ok: bool) -> Result<(), QuantumError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(QuantumError::Domain { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// X-sum and Y-difference.
    Correlated,
    /// X-difference and Y-sum.
    Anticorrelated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GainPhase {
    Amplify,
    Deamplify,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PumpConfig {
    pub pump_power_w: f64,
    pub threshold_w: f64,
    /// Effective nonlinear coupling in W^(−1/2), when known.
    pub chi: Option<f64>,
    pub pump_resonant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionChain {
    pub detection_efficiency: f64,
    pub escape_efficiency: f64,
}

impl DetectionChain {
    pub fn new(detection_efficiency: f64, escape_efficiency: f64) -> Result<Self, QuantumError> {
        require("eta_det", detection_efficiency, detection_efficiency > 0.0 && detection_efficiency <= 1.0)?;
        require("eta_esc", escape_efficiency, escape_efficiency > 0.0 && escape_efficiency <= 1.0)?;
        Ok(Self {
            detection_efficiency,
            escape_efficiency,
        })
    }

    pub fn total(&self) -> f64 {
        self.detection_efficiency * self.escape_efficiency
    }
}

/// Everything needed to evaluate the variance spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub pump_power_w: f64,
    pub threshold_w: f64,
    /// Cavity decay rate in s⁻¹.
    pub decay_rate: f64,
    pub detection: DetectionChain,
}

/// One correlation or anticorrelation variance.
pub fn correlation_variance(
    pump_power_w: f64,
    threshold_w: f64,
    frequency_hz: f64,
    decay_rate: f64,
    eta_det: f64,
    eta_esc: f64,
    branch: Branch,
) -> Result<f64, QuantumError> {
    require("P", pump_power_w, pump_power_w >= 0.0)?;
    require("P_thr", threshold_w, threshold_w > 0.0)?;
    require("f", frequency_hz, frequency_hz >= 0.0)?;
    require("kappa", decay_rate, decay_rate > 0.0)?;
    require("eta_det", eta_det, eta_det > 0.0 && eta_det <= 1.0)?;
    require("eta_esc", eta_esc, eta_esc > 0.0 && eta_esc <= 1.0)?;
    if pump_power_w > threshold_w {
        return Err(QuantumError::AboveThreshold {
            pump_w: pump_power_w,
            threshold_w,
        });
    }
    if pump_power_w == threshold_w && branch == Branch::Anticorrelated {
        return Err(QuantumError::ThresholdSingularity { threshold_w });
    }
    let x = (pump_power_w / threshold_w).sqrt();
    let rolloff = 2.0 * PI * frequency_hz / decay_rate;
    let lost = 4.0 * x * (1.0 - eta_det * eta_esc);
    let r2 = 4.0 * rolloff * rolloff;
    // 1 ∓ 4ηx/((1 ± x)² + r2) over a common denominator; the correlated
    // numerator is written without the cancellation near threshold
    let (num, den) = match branch {
        Branch::Correlated => ((1.0 - x).powi(2) + lost + r2, (1.0 + x).powi(2) + r2),
        Branch::Anticorrelated => ((1.0 + x).powi(2) - lost + r2, (1.0 - x).powi(2) + r2),
    };
    Ok(SHOT_NOISE_LEVEL * num / den)
}

/// The four two-mode quadrature combinations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureVariances {
    pub x_sum: f64,
    pub x_diff: f64,
    pub y_sum: f64,
    pub y_diff: f64,
}

impl QuadratureVariances {
    /// Builds the four combinations from a correlated/anticorrelated pair.
    pub fn from_branches(correlated: f64, anticorrelated: f64) -> Self {
        Self {
            x_sum: correlated,
            x_diff: anticorrelated,
            y_sum: anticorrelated,
            y_diff: correlated,
        }
    }

    pub fn shot_noise() -> Self {
        Self::from_branches(SHOT_NOISE_LEVEL, SHOT_NOISE_LEVEL)
    }
}

impl OperatingPoint {
    pub fn variances(&self, frequency_hz: f64) -> Result<QuadratureVariances, QuantumError> {
        let v = |branch| {
            correlation_variance(
                self.pump_power_w,
                self.threshold_w,
                frequency_hz,
                self.decay_rate,
                self.detection.detection_efficiency,
                self.detection.escape_efficiency,
                branch,
            )
        };
        Ok(QuadratureVariances::from_branches(
            v(Branch::Correlated)?,
            v(Branch::Anticorrelated)?,
        ))
    }

    pub fn pump_ratio(&self) -> f64 {
        self.pump_power_w / self.threshold_w
    }
}

/// `P_thr = (T0 + L0)²(T + L)² / (8χ²T0)`.
pub fn threshold_power(t0: f64, l0: f64, t: f64, l: f64, chi: f64) -> Result<f64, QuantumError> {
    if chi == 0.0 {
        return Err(QuantumError::Divergent("chi"));
    }
    if t0 == 0.0 {
        return Err(QuantumError::Divergent("T0"));
    }
    require("chi", chi, chi > 0.0)?;
    require("T0", t0, t0 > 0.0 && t0 < 1.0)?;
    require("L0", l0, (0.0..1.0).contains(&l0))?;
    require("T", t, t > 0.0 && t < 1.0)?;
    require("L", l, (0.0..1.0).contains(&l))?;
    let a = (t0 + l0) * (t + l);
    Ok(a * a / (8.0 * chi * chi * t0))
}

/// Inverts [`threshold_power`] for `χ`.
pub fn fit_chi(measured_threshold_w: f64, t0: f64, l0: f64, t: f64, l: f64) -> Result<f64, QuantumError> {
    require("P_thr", measured_threshold_w, measured_threshold_w > 0.0)?;
    require("T0", t0, t0 > 0.0 && t0 < 1.0)?;
    require("L0", l0, (0.0..1.0).contains(&l0))?;
    require("T", t, t > 0.0 && t < 1.0)?;
    require("L", l, (0.0..1.0).contains(&l))?;
    Ok((t0 + l0) * (t + l) / (8.0 * t0 * measured_threshold_w).sqrt())
}

/// Resonant enhancement of the circulating pump power, `4T0/(T0 + L0)²`.
///
/// Multiplying a pump-resonant threshold by this factor gives the threshold
/// of the same cavity with the pump single-pass.
pub fn pump_buildup(t0: f64, l0: f64) -> Result<f64, QuantumError> {
    require("T0", t0, t0 > 0.0 && t0 < 1.0)?;
    require("L0", l0, (0.0..1.0).contains(&l0))?;
    Ok(4.0 * t0 / ((t0 + l0) * (t0 + l0)))
}

/// Pump loss `L0` for which [`pump_buildup`] equals `threshold_ratio`.
pub fn infer_pump_loss(threshold_ratio: f64, t0: f64) -> Result<f64, QuantumError> {
    require("threshold ratio", threshold_ratio, threshold_ratio > 1.0)?;
    require("T0", t0, t0 > 0.0 && t0 < 1.0)?;
    let l0 = 2.0 * (t0 / threshold_ratio).sqrt() - t0;
    if l0 < 0.0 {
        return Err(QuantumError::InconsistentPumpLoss {
            ratio: threshold_ratio,
            t0,
            l0,
        });
    }
    Ok(l0)
}

/// Classical parametric gain `(1 ∓ √(P/P_thr))⁻²`.
pub fn parametric_gain(pump_power_w: f64, threshold_w: f64, phase: GainPhase) -> Result<f64, QuantumError> {
    require("P", pump_power_w, pump_power_w >= 0.0)?;
    require("P_thr", threshold_w, threshold_w > 0.0)?;
    if pump_power_w >= threshold_w {
        return Err(QuantumError::AboveThreshold {
            pump_w: pump_power_w,
            threshold_w,
        });
    }
    let x = (pump_power_w / threshold_w).sqrt();
    let base = match phase {
        GainPhase::Amplify => 1.0 - x,
        GainPhase::Deamplify => 1.0 + x,
    };
    Ok(1.0 / (base * base))
}

/// Pump ratio `P/P_thr` that gives amplifying gain `gain`.
pub fn pump_ratio_for_gain(gain: f64) -> Result<f64, QuantumError> {
    require("gain", gain, gain >= 1.0)?;
    let x = 1.0 - 1.0 / gain.sqrt();
    Ok(x * x)
}

/// Noise reduction below the shot-noise level in dB (positive = below).
pub fn db_below_snl(variance: f64) -> f64 {
    -10.0 * (variance / SHOT_NOISE_LEVEL).log10()
}

/// Variance that sits `db` below the shot-noise level.
pub fn variance_from_db_below_snl(db: f64) -> f64 {
    SHOT_NOISE_LEVEL * 10f64.powf(-db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntanglementReport {
    /// X-sum reduction below SNL (dB).
    pub x_correlation_db: f64,
    /// Y-difference reduction below SNL (dB).
    pub y_correlation_db: f64,
    /// X-difference excess above SNL (dB).
    pub x_anti_correlation_db: f64,
    /// Y-sum excess above SNL (dB).
    pub y_anti_correlation_db: f64,
    /// Inseparability sum `V(X-sum) + V(Y-diff)`; below 4 certifies
    /// entanglement in this normalization.
    pub duan_value: f64,
    pub entangled: bool,
}

pub fn entanglement_report(vars: &QuadratureVariances) -> Result<EntanglementReport, QuantumError> {
    for (name, v) in [
        ("x_sum", vars.x_sum),
        ("x_diff", vars.x_diff),
        ("y_sum", vars.y_sum),
        ("y_diff", vars.y_diff),
    ] {
        require(name, v, v > 0.0)?;
    }
    let duan = vars.x_sum + vars.y_diff;
    Ok(EntanglementReport {
        x_correlation_db: db_below_snl(vars.x_sum),
        y_correlation_db: db_below_snl(vars.y_diff),
        x_anti_correlation_db: -db_below_snl(vars.x_diff),
        y_anti_correlation_db: -db_below_snl(vars.y_sum),
        duan_value: duan,
        entangled: duan < 2.0 * SHOT_NOISE_LEVEL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureSpectrum {
    pub frequencies_hz: Vec<f64>,
    pub variances: Vec<QuadratureVariances>,
}

/// Evaluates all four combinations over an ascending, positive grid.
pub fn variance_spectrum(point: &OperatingPoint, frequencies_hz: &[f64]) -> Result<QuadratureSpectrum, QuantumError> {
    for w in frequencies_hz.windows(2) {
        if !(w[1] > w[0]) {
            return Err(QuantumError::Domain {
                name: "frequency grid (must ascend)",
                value: w[1],
            });
        }
    }
    if let Some(&f) = frequencies_hz.first() {
        require("f", f, f > 0.0)?;
    }
    let variances = frequencies_hz
        .iter()
        .map(|&f| point.variances(f))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(QuadratureSpectrum {
        frequencies_hz: frequencies_hz.to_vec(),
        variances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_pump_is_shot_noise() {
        for b in [Branch::Correlated, Branch::Anticorrelated] {
            assert_eq!(correlation_variance(0.0, 0.15, 1e6, 1e8, 0.9, 0.9, b).unwrap(), 2.0);
        }
    }

    #[test]
    fn threshold_handling() {
        assert!(matches!(
            correlation_variance(0.15, 0.15, 0.0, 1e8, 1.0, 1.0, Branch::Anticorrelated),
            Err(QuantumError::ThresholdSingularity { .. })
        ));
        assert!(correlation_variance(0.15, 0.15, 0.0, 1e8, 1.0, 1.0, Branch::Correlated).is_ok());
        assert!(matches!(
            correlation_variance(0.2, 0.15, 0.0, 1e8, 1.0, 1.0, Branch::Correlated),
            Err(QuantumError::AboveThreshold { .. })
        ));
        assert!(parametric_gain(0.15, 0.15, GainPhase::Amplify).is_err());
    }

    #[test]
    fn threshold_divergences() {
        assert_eq!(threshold_power(0.2, 0.05, 0.125, 0.003, 0.0), Err(QuantumError::Divergent("chi")));
        assert_eq!(threshold_power(0.0, 0.05, 0.125, 0.003, 0.1), Err(QuantumError::Divergent("T0")));
        assert!(fit_chi(0.0, 0.2, 0.05, 0.125, 0.003).is_err());
        assert!(fit_chi(-1.0, 0.2, 0.05, 0.125, 0.003).is_err());
    }

    #[test]
    fn chi_scaling() {
        let a = threshold_power(0.2, 0.053, 0.125, 0.003, 0.05).unwrap();
        let b = threshold_power(0.2, 0.053, 0.125, 0.003, 0.10).unwrap();
        assert_relative_eq!(b, a / 4.0, max_relative = 1e-14);
        let c1 = fit_chi(0.15, 0.2, 0.053, 0.125, 0.003).unwrap();
        let c4 = fit_chi(0.60, 0.2, 0.053, 0.125, 0.003).unwrap();
        assert_relative_eq!(c4, c1 / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn buildup_cases() {
        assert_relative_eq!(pump_buildup(0.2, 0.2).unwrap(), 1.0 / 0.2, max_relative = 1e-14);
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let b = pump_buildup(0.2, i as f64 * 0.01).unwrap();
            assert!(b < prev);
            prev = b;
        }
        assert_relative_eq!(infer_pump_loss(1.0 / 0.2, 0.2).unwrap(), 0.2, max_relative = 1e-12);
        // ratio above the lossless maximum 4/T0
        assert!(matches!(infer_pump_loss(25.0, 0.2), Err(QuantumError::InconsistentPumpLoss { .. })));
    }

    #[test]
    fn gain_at_zero_pump() {
        assert_eq!(parametric_gain(0.0, 1.0, GainPhase::Amplify).unwrap(), 1.0);
        assert_eq!(parametric_gain(0.0, 1.0, GainPhase::Deamplify).unwrap(), 1.0);
    }

    #[test]
    fn report_boundaries() {
        let r = entanglement_report(&QuadratureVariances::shot_noise()).unwrap();
        assert_eq!(r.x_correlation_db, 0.0);
        assert_eq!(r.duan_value, 4.0);
        assert!(!r.entangled);
        assert_relative_eq!(variance_from_db_below_snl(-20.0), 200.0, max_relative = 1e-12);
        assert!(entanglement_report(&QuadratureVariances::from_branches(0.0, 2.0)).is_err());
    }

    #[test]
    fn spectrum_grid_checks() {
        let p = OperatingPoint {
            pump_power_w: 0.075,
            threshold_w: 0.15,
            decay_rate: 1.5e8,
            detection: DetectionChain::new(0.95, 0.976).unwrap(),
        };
        assert!(variance_spectrum(&p, &[2e6, 1e6]).is_err());
        assert!(variance_spectrum(&p, &[0.0, 1e6]).is_err());
        let s = variance_spectrum(&p, &[2e6]).unwrap();
        assert_eq!(s.variances[0], p.variances(2e6).unwrap());
    }
}

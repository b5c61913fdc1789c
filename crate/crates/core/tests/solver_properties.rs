//! Resonance solver: residual re-verification, lattice periods, failure modes.

mod common;

use nopa::cavity_optics::{round_trip_phase, wrap_cycles};
use nopa::material::{refractive_index, CrystalAxis};
use nopa::resonance_solver::{
    classify_scan, double_resonance_temperatures, enumerate_triple_resonances, fractional_detunings,
    solve_operating_point, Classification, NopaDevice, ResonanceResidual, SearchDomain, SolverError,
};
use proptest::prelude::*;

/// d-spacing of triple resonances along one double-resonance branch.
fn analytic_branch_period(dev: &NopaDevice, t: f64) -> f64 {
    let m = &dev.dispersion;
    let n = |axis, l| refractive_index(m, axis, l, t).unwrap();
    let (ns, ni, np) = (n(CrystalAxis::Y, 1080e-9), n(CrystalAxis::Z, 1080e-9), n(CrystalAxis::Y, 540e-9));
    let s = |axis, l| m.thermo_optic_slope(axis, l);
    let (ss, si, sp) = (s(CrystalAxis::Y, 1080e-9), s(CrystalAxis::Z, 1080e-9), s(CrystalAxis::Y, 540e-9));
    let tan = dev.geometry.crystal.wedge_angle_rad.tan();
    1080e-9 * (ss - si).abs() / (2.0 * tan * ((ns - ni) * (2.0 * sp - ss - si) - (ss - si) * (2.0 * np - ns - ni)).abs())
}

#[test]
fn triple_solutions_reverify_independently() {
    let dev = common::reference_device();
    let dom = SearchDomain::around_phase_matching(&dev).unwrap();
    let scan = enumerate_triple_resonances(&dev, &dom).unwrap();
    assert!(!scan.solutions.is_empty());
    for s in &scan.solutions {
        for (mode, order) in dev.modes.modes().iter().zip([
            s.mode_numbers.signal,
            s.mode_numbers.idler,
            s.mode_numbers.pump,
        ]) {
            let p = round_trip_phase(&dev.geometry, mode, &dev.dispersion, s.temperature_c, s.wedge_offset_m, s.length_trim_m)
                .unwrap();
            assert!(p.fractional.abs() < 1e-8);
            assert_eq!(p.cycles.round() as i64, order);
        }
        assert_eq!(s.classification, Classification::Triple);
        assert_eq!(s.mode_numbers.signal - s.mode_numbers.idler, s.subharmonic_order);
    }
    // sorted by offset
    assert!(scan.solutions.windows(2).all(|w| w[0].wedge_offset_m <= w[1].wedge_offset_m));
}

#[test]
fn branch_spacing_matches_analytic_period() {
    let dev = common::reference_device();
    let dom = SearchDomain::around_phase_matching(&dev).unwrap();
    let scan = enumerate_triple_resonances(&dev, &dom).unwrap();
    let mut checked = 0;
    for a in &scan.solutions {
        let next = scan
            .solutions
            .iter()
            .filter(|b| b.subharmonic_order == a.subharmonic_order && b.wedge_offset_m > a.wedge_offset_m)
            .min_by(|x, y| x.wedge_offset_m.total_cmp(&y.wedge_offset_m));
        if let Some(b) = next {
            let spacing = b.wedge_offset_m - a.wedge_offset_m;
            let analytic = analytic_branch_period(&dev, 0.5 * (a.temperature_c + b.temperature_c));
            assert!((spacing / analytic - 1.0).abs() < 0.01, "{spacing} vs {analytic}");
            assert!((analytic - 0.460106e-3).abs() < 1e-8);
            checked += 1;
        }
    }
    assert!(checked >= 5, "{checked}");
}

#[test]
fn double_resonance_temperature_period() {
    let dev = common::reference_device();
    let mut dom = SearchDomain::around_phase_matching(&dev).unwrap();
    dom.temperature_c = (40.0, 120.0);
    dom.temperature_points = 801;
    let roots = double_resonance_temperatures(&dev, &dom, 0.0).unwrap();
    assert!(roots.len() >= 8);
    let ds = dev.modes.signal.wavelength_m;
    let m = &dev.dispersion;
    let analytic = ds
        / (2.0 * 10e-3 * (m.thermo_optic_slope(CrystalAxis::Y, ds) - m.thermo_optic_slope(CrystalAxis::Z, ds)).abs());
    assert!((analytic - 8.95146).abs() < 1e-4);
    for w in roots.windows(2) {
        assert_eq!((w[1].0 - w[0].0).abs(), 1);
        let spacing = w[1].1 - w[0].1;
        assert!((spacing / analytic - 1.0).abs() < 0.01, "{spacing} vs {analytic}");
    }
}

#[test]
fn half_wave_trim_maps_solutions_to_solutions() {
    let dev = common::reference_device();
    let dom = SearchDomain::around_phase_matching(&dev).unwrap();
    let s = enumerate_triple_resonances(&dev, &dom).unwrap().solutions[0];
    for k in [-2.0, -1.0, 1.0, 3.0] {
        let r = fractional_detunings(&dev, s.temperature_c, s.wedge_offset_m, s.length_trim_m + k * 540e-9).unwrap();
        assert!(r.max_abs() < 1e-8, "{r:?}");
    }
    // a quarter wave leaves the pump resonant and both subharmonics half an order off
    let r = fractional_detunings(&dev, s.temperature_c, s.wedge_offset_m, s.length_trim_m + 270e-9).unwrap();
    assert!((r.signal.abs() - 0.5).abs() < 1e-8 && (r.idler.abs() - 0.5).abs() < 1e-8 && r.pump.abs() < 1e-8);
}

#[test]
fn newton_is_stationary_at_a_solution() {
    let dev = common::reference_device();
    let dom = SearchDomain::around_phase_matching(&dev).unwrap();
    let s = enumerate_triple_resonances(&dev, &dom).unwrap().solutions[0];
    let again = solve_operating_point(
        &dev,
        &ResonanceResidual::ZERO,
        (s.temperature_c, s.wedge_offset_m, s.length_trim_m),
        1e-8,
    )
    .unwrap();
    assert!((again.temperature_c - s.temperature_c).abs() < 1e-9);
    assert!((again.wedge_offset_m - s.wedge_offset_m).abs() < 1e-12);
    assert!((again.length_trim_m - s.length_trim_m).abs() < 1e-15);
}

#[test]
fn flat_crystal_reports_degenerate_wedge() {
    let mut cfg = nopa::config::RunConfig::default();
    cfg.geometry.wedge_angle_deg = 0.0;
    let dev = cfg.device().unwrap();
    let dom = SearchDomain::around_phase_matching(&dev).unwrap();
    assert_eq!(enumerate_triple_resonances(&dev, &dom), Err(SolverError::DegenerateWedge));
}

#[test]
fn short_offset_range_reports_pump_sweep() {
    let dev = common::reference_device();
    let mut dom = SearchDomain::around_phase_matching(&dev).unwrap();
    dom.offset_m = (0.0, 0.05e-3);
    dom.offset_points = 11;
    match nopa::resonance_solver::solve_triple_resonance(&dev, &dom) {
        Err(SolverError::NoPumpCrossing { sweep }) => {
            assert!(!sweep.is_empty());
            assert!(sweep.iter().all(|p| p.pump_residual.abs() <= 0.5));
        }
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operating_points_hit_their_targets(
        rs in -0.45f64..0.45,
        ri in -0.45f64..0.45,
        rp in -0.45f64..0.45,
        start in 0usize..4,
    ) {
        let dev = common::reference_device();
        let dom = SearchDomain::around_phase_matching(&dev).unwrap();
        let s = enumerate_triple_resonances(&dev, &dom).unwrap().solutions[start * 2];
        let target = ResonanceResidual { signal: rs, idler: ri, pump: rp };
        let sol = solve_operating_point(&dev, &target, (s.temperature_c, s.wedge_offset_m, s.length_trim_m), 1e-8).unwrap();
        let r = fractional_detunings(&dev, sol.temperature_c, sol.wedge_offset_m, sol.length_trim_m).unwrap();
        for (got, want) in r.as_array().iter().zip(target.as_array()) {
            prop_assert!(wrap_cycles(got - want).abs() < 1e-8);
        }
    }

    #[test]
    fn classification_agrees_with_residuals(t in 70.0f64..89.0, d in 0.0f64..3e-3) {
        let dev = common::reference_device();
        let (psi, beta) = dev.relative_orders(t, d).unwrap();
        let c = classify_scan(&dev, t, d).unwrap();
        let width = 0.128 / (2.0 * std::f64::consts::PI);
        if wrap_cycles(psi).abs() >= width {
            prop_assert_eq!(c, Classification::Single);
        } else {
            prop_assert_ne!(c, Classification::Single);
            prop_assert_eq!(c == Classification::Triple, wrap_cycles(beta + psi).abs() < 0.253 / (2.0 * std::f64::consts::PI));
        }
    }
}

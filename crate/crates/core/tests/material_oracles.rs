//! Dispersion and phase matching against values computed outside the crate.

use nopa::material::{
    index_mismatch, phase_matching_temperature, refractive_index, CrystalAxis, DispersionModel, MaterialError, ModeSet,
    TEMPERATURE_WINDOW_C,
};
use proptest::prelude::*;

fn modes() -> ModeSet {
    ModeSet::degenerate(1080e-9, CrystalAxis::Y, CrystalAxis::Z, CrystalAxis::Y).unwrap()
}

#[test]
fn reference_indices_at_20c() {
    let m = DispersionModel::reference_ktp();
    let cases = [
        (CrystalAxis::Y, 1080e-9, 1.7450035),
        (CrystalAxis::Y, 540e-9, 1.7868805),
        (CrystalAxis::Z, 1080e-9, 1.8290455),
        (CrystalAxis::Z, 540e-9, 1.8861614),
    ];
    for (axis, lambda, expected) in cases {
        let n = refractive_index(&m, axis, lambda, 20.0).unwrap();
        assert!((n - expected).abs() < 1e-6, "{axis} {lambda}: {n}");
    }
}

#[test]
fn thermo_optic_slope_matches_finite_difference() {
    let m = DispersionModel::reference_ktp();
    for (axis, lambda, expected) in [
        (CrystalAxis::Y, 1080e-9, 8.29914e-6),
        (CrystalAxis::Y, 540e-9, 1.37182e-5),
        (CrystalAxis::Z, 1080e-9, 1.43317e-5),
    ] {
        let fd = (refractive_index(&m, axis, lambda, 61.0).unwrap() - refractive_index(&m, axis, lambda, 59.0).unwrap()) / 2.0;
        let slope = m.thermo_optic_slope(axis, lambda);
        assert!((fd - slope).abs() < 1e-12);
        assert!((slope - expected).abs() < 1e-10, "{slope}");
    }
}

#[test]
fn phase_matching_agrees_with_millikelvin_scan() {
    let m = DispersionModel::reference_ktp();
    let modes = modes();
    let pm = phase_matching_temperature(&m, &modes, TEMPERATURE_WINDOW_C).unwrap();
    // brute force: first sign change on a 1 mK grid
    let mut prev = index_mismatch(&m, &modes, 0.0).unwrap();
    let mut found = None;
    for i in 1..=200_000 {
        let t = i as f64 * 1e-3;
        let cur = index_mismatch(&m, &modes, t).unwrap();
        if cur.signum() != prev.signum() {
            found = Some(t - 0.5e-3);
            break;
        }
        prev = cur;
    }
    let scan = found.expect("sign change");
    assert!((pm.temperature_c - scan).abs() <= 1e-3, "{} vs {scan}", pm.temperature_c);
    assert!((pm.temperature_c - 79.925423).abs() < 1e-5);
    assert!(pm.index_mismatch.abs() < 1e-9);
}

#[test]
fn pump_along_z_never_phase_matches() {
    let m = DispersionModel::reference_ktp();
    let modes = ModeSet::degenerate(1080e-9, CrystalAxis::Y, CrystalAxis::Z, CrystalAxis::Z).unwrap();
    assert!(matches!(
        phase_matching_temperature(&m, &modes, TEMPERATURE_WINDOW_C),
        Err(MaterialError::NoPhaseMatching { .. })
    ));
}

#[test]
fn swapping_subharmonics_keeps_phase_matching() {
    let m = DispersionModel::reference_ktp();
    let a = phase_matching_temperature(&m, &modes(), TEMPERATURE_WINDOW_C).unwrap();
    let b = phase_matching_temperature(&m, &modes().swapped_subharmonics(), TEMPERATURE_WINDOW_C).unwrap();
    assert!((a.temperature_c - b.temperature_c).abs() < 1e-9);
}

proptest! {
    #[test]
    fn normal_dispersion_everywhere(t in 0.0f64..200.0, l in 0.4f64..1.49, axis in 0usize..3) {
        let m = DispersionModel::reference_ktp();
        let axis = CrystalAxis::ALL[axis];
        let a = refractive_index(&m, axis, l * 1e-6, t).unwrap();
        let b = refractive_index(&m, axis, (l + 0.01) * 1e-6, t).unwrap();
        prop_assert!(a > b && b > 1.0 && a < 3.0);
    }

    #[test]
    fn index_is_affine_in_temperature(t1 in 0.0f64..200.0, t2 in 0.0f64..200.0) {
        let m = DispersionModel::reference_ktp();
        let mid = refractive_index(&m, CrystalAxis::Z, 1080e-9, 0.5 * (t1 + t2)).unwrap();
        let avg = 0.5 * (refractive_index(&m, CrystalAxis::Z, 1080e-9, t1).unwrap()
            + refractive_index(&m, CrystalAxis::Z, 1080e-9, t2).unwrap());
        prop_assert!((mid - avg).abs() < 1e-14);
    }
}

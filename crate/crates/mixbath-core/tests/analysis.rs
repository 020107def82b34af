use mixbath_core::analysis::{
    classify, linear_r2, scan, vary, ClassifyOptions, Observable, ScanParameter, ScanSpec,
};
use mixbath_core::evolution::{DiffusionOptions, TimeGrid};
use mixbath_core::model::Model;
use mixbath_core::presets::two_bath;
use mixbath_core::scenario::Statistics::{Bose as B, Fermi as F};

fn late_info(sc: &mixbath_core::scenario::Scenario) -> mixbath_core::analysis::OscillationInfo {
    let grid = TimeGrid::new(0.01, 40.0).unwrap();
    let (tr, _) = Model::with_defaults(sc)
        .unwrap()
        .evolve_diffusion(&grid, &DiffusionOptions::default())
        .unwrap();
    classify(&tr.times, &tr.n, &ClassifyOptions::default()).unwrap()
}

#[test]
fn pure_families_settle_and_mixed_ones_keep_oscillating() {
    assert!(late_info(&two_bath(F, F, F)).stationary);
    assert!(late_info(&two_bath(B, B, B)).stationary);
    for sc in [two_bath(F, B, F), two_bath(B, F, B)] {
        let info = late_info(&sc);
        assert!(
            !info.stationary && info.amplitude > 1e-3,
            "{}: {info:?}",
            sc.label()
        );
        assert!(!info.low_confidence);
    }
}

#[test]
fn scan_keeps_order_and_records_bad_points() {
    let sc = two_bath(F, B, F);
    let spec = ScanSpec {
        parameter: ScanParameter::Omega,
        values: vec![2.0, -1.0, 1.5],
        observable: Observable::Friction,
        grid: TimeGrid::new(0.01, 30.0).unwrap(),
        classify: ClassifyOptions::default(),
        diffusion: DiffusionOptions::default(),
    };
    let r = scan(&sc, &spec);
    assert_eq!(r.parameter, "Omega");
    let got: Vec<f64> = r.points.iter().map(|p| p.value).collect();
    assert_eq!(got, vec![2.0, -1.0, 1.5]);
    assert!(r.points[1].error.is_some() && r.points[1].info.is_none());
    let f0 = r.points[0].info.as_ref().unwrap().frequency;
    let f2 = r.points[2].info.as_ref().unwrap().frequency;
    assert!(f0 > f2, "{f0} {f2}");
}

#[test]
fn vary_addresses_baths_in_config_order() {
    let sc = two_bath(F, B, F);
    let v = vary(&sc, ScanParameter::Gamma(1), 12.0).unwrap();
    let baths = v.baths_in_config_order();
    assert_eq!(baths[0].gamma, 10.0);
    assert_eq!(baths[1].gamma, 12.0);
    assert!(vary(&sc, ScanParameter::Alpha(5), 0.1).is_err());
}

#[test]
fn r2_of_a_line_is_one() {
    let x: Vec<f64> = (0..10).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
    assert!((linear_r2(&x, &y) - 1.0).abs() < 1e-12);
    let noisy: Vec<f64> = x
        .iter()
        .map(|v| if (*v as i32) % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    assert!(linear_r2(&x, &noisy) < 0.2);
}

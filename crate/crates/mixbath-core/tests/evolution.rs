use mixbath_core::evolution::{DiffusionOptions, TimeGrid};
use mixbath_core::model::Model;
use mixbath_core::presets::{markov, two_bath, two_bath_family};
use mixbath_core::scenario::Statistics::{Bose as B, Fermi as F};
use mixbath_core::Error;

#[test]
fn diffusion_tracks_closed_form_for_pure_families() {
    let grid = TimeGrid::new(0.005, 10.0).unwrap();
    for sc in [two_bath(F, F, F), two_bath(B, B, B)] {
        let m = Model::with_defaults(&sc).unwrap();
        let cf = m.evolve_closed_form(&grid).unwrap();
        let (tr, _) = m
            .evolve_diffusion(&grid, &DiffusionOptions::default())
            .unwrap();
        let gap =
            tr.n.iter()
                .zip(&cf.n)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        assert!(gap < 1e-6, "{}: {gap:e}", sc.label());
    }
}

#[test]
fn every_family_starts_at_n0_with_zero_transport() {
    let grid = TimeGrid::new(0.01, 2.0).unwrap();
    for sc in two_bath_family() {
        let sc = sc.with_n0(0.25).unwrap();
        let m = Model::with_defaults(&sc).unwrap();
        let (tr, samples) = m
            .evolve_diffusion(&grid, &DiffusionOptions::default())
            .unwrap();
        assert_eq!(tr.n[0], 0.25);
        assert!(
            samples[0].lambda.abs() < 1e-12 && samples[0].d.abs() < 1e-12,
            "{}",
            sc.label()
        );
    }
}

#[test]
fn closed_form_refuses_mixed_statistics() {
    let m = Model::with_defaults(&two_bath(F, B, F)).unwrap();
    assert!(matches!(
        m.occupation_closed_form(1.0),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn pure_asymptote_is_reached() {
    for sc in [two_bath(F, F, F), two_bath(B, B, B)] {
        let m = Model::with_defaults(&sc).unwrap();
        let rep = m.asymptotics().unwrap();
        let target = rep.n_inf_pure.unwrap();
        assert!((target - rep.i_inf.iter().sum::<f64>()).abs() < 1e-15);
        let late = m.occupation_closed_form(80.0).unwrap();
        assert!(
            (late - target).abs() < 1e-6,
            "{}: {late} vs {target}",
            sc.label()
        );
    }
}

#[test]
fn tiny_coupling_approaches_thermal_occupation() {
    // with the frequency shift 2 alpha gamma / omega negligible the asymptote is the thermal value
    let e = std::f64::consts::E;
    for (stat, thermal) in [(B, 1.0 / (e - 1.0)), (F, 1.0 / (e + 1.0))] {
        let m = Model::with_defaults(&markov(stat, 1e-5)).unwrap();
        let n = m.asymptotics().unwrap().n_inf_pure.unwrap();
        assert!(
            (n / thermal - 1.0).abs() < 3e-3,
            "{stat:?}: {n} vs {thermal}"
        );
    }
}

#[test]
fn mixed_families_are_not_predicted_stationary() {
    for sc in two_bath_family() {
        let rep = Model::with_defaults(&sc).unwrap().asymptotics().unwrap();
        assert_eq!(rep.is_stationary_predicted, sc.is_pure(), "{}", sc.label());
    }
}

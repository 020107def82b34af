//! Acceptance criteria. Each runner returns a verdict with the measured numbers; nothing is asserted here.

use std::f64::consts::E;
use std::time::Instant;

use mixbath_core::analysis::{
    classify, linear_r2, scan, ClassifyOptions, Observable, ScanParameter, ScanSpec,
};
use mixbath_core::evolution::{DiffusionOptions, TimeGrid};
use mixbath_core::model::Model;
use mixbath_core::oracle::volterra::VOLTERRA_HALVING_TOL;
use mixbath_core::oracle::{build_kernels, volterra_solve};
use mixbath_core::presets::{markov, two_bath, two_bath_family, two_bath_with};
use mixbath_core::scenario::Scenario;
use mixbath_core::scenario::Statistics::{Bose as B, Fermi as F};
use mixbath_core::verify::{run_verify, VerifyOptions};
use mixbath_core::Result;

#[derive(Clone, Debug)]
pub struct Verdict {
    pub id: u8,
    pub title: &'static str,
    /// every clause, each with its own outcome
    pub clauses: Vec<(String, bool)>,
    pub seconds: f64,
    pub budget_s: f64,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.seconds <= self.budget_s && self.clauses.iter().all(|c| c.1)
    }

    pub fn line(&self) -> String {
        let mut s = format!(
            "{} criterion {}: {} ({:.1} s of {:.0} s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds,
            self.budget_s
        );
        for (text, ok) in &self.clauses {
            s.push_str(&format!(" | {}{}", if *ok { "" } else { "FAIL " }, text));
        }
        s
    }
}

fn timed(
    id: u8,
    title: &'static str,
    budget_s: f64,
    f: impl FnOnce() -> Result<Vec<(String, bool)>>,
) -> Verdict {
    let t0 = Instant::now();
    let clauses = f().unwrap_or_else(|e| vec![(format!("error: {e}"), false)]);
    Verdict {
        id,
        title,
        clauses,
        seconds: t0.elapsed().as_secs_f64(),
        budget_s,
    }
}

fn fermi(x: f64) -> f64 {
    1.0 / (x.exp() + 1.0)
}

/// Grid spanning Omega t in [0, t_max] with Omega dt = dt.
fn omega_grid(sc: &Scenario, dt: f64, t_max: f64) -> Result<TimeGrid> {
    TimeGrid::new(dt / sc.big_omega, t_max / sc.big_omega)
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn markov_thermalization() -> Verdict {
    timed(1, "Markovian thermalization", 10.0, || {
        let mut out = Vec::new();
        for (stat, target) in [(B, 1.0 / (E - 1.0)), (F, 1.0 / (E + 1.0))] {
            let m = Model::with_defaults(&markov(stat, 0.001))?;
            let n_inf = m.asymptotics()?.n_inf_pure.unwrap_or(f64::NAN);
            let late = m.occupation_closed_form(20_000.0 / m.scenario.big_omega)?;
            for (what, v) in [("asymptote", n_inf), ("n(Omega t=2e4)", late)] {
                let rel = (v / target - 1.0).abs();
                out.push((
                    format!(
                        "{} {what} {v:.6} vs {target:.6} rel {rel:.3e} <= 2e-2",
                        stat.name()
                    ),
                    rel <= 0.02,
                ));
            }
        }
        Ok(out)
    })
}

fn oracle_equivalence(sc: Scenario, title: &'static str) -> Verdict {
    timed(2, title, 60.0, move || {
        let grid = omega_grid(&sc, 0.005, 50.0)?;
        let m = Model::with_defaults(&sc)?;
        let cf = m.evolve_closed_form(&grid)?;
        let (diff, _) = m.evolve_diffusion(&grid, &DiffusionOptions::default())?;
        let k = build_kernels(&sc, &grid)?;
        let vol = volterra_solve(&k, sc.system.n0, VOLTERRA_HALVING_TOL)?;
        let gd = max_gap(&diff.n, &cf.n);
        let gv = max_gap(&vol.n, &cf.n);
        Ok(vec![
            (
                format!("max|n_diffusion - n_closed| {gd:.3e} <= 1e-4"),
                gd <= 1e-4,
            ),
            (
                format!("max|n_volterra - n_closed| {gv:.3e} <= 5e-3"),
                gv <= 5e-3,
            ),
        ])
    })
}

pub fn oracle_equivalence_fermi() -> Verdict {
    oracle_equivalence(two_bath(F, F, F), "oracle equivalence, f-f1-f2")
}

pub fn oracle_equivalence_bose() -> Verdict {
    oracle_equivalence(two_bath(B, B, B), "oracle equivalence, b-b1-b2")
}

pub fn stationarity_dichotomy() -> Verdict {
    timed(3, "stationarity dichotomy", 120.0, || {
        let mut out = Vec::new();
        let mut amp = Vec::new();
        for sc in two_bath_family() {
            let grid = omega_grid(&sc, 0.005, 50.0)?;
            let (tr, _) =
                Model::with_defaults(&sc)?.evolve_diffusion(&grid, &DiffusionOptions::default())?;
            let info = classify(&tr.times, &tr.n, &ClassifyOptions::default())?;
            let half_pp = info.half_peak_to_peak;
            if sc.is_pure() {
                out.push((
                    format!(
                        "{} stationary, half peak-to-peak {half_pp:.3e} < 1e-4",
                        sc.label()
                    ),
                    info.stationary,
                ));
            } else {
                out.push((
                    format!(
                        "{} oscillating, amplitude {:.3e} > 1e-3",
                        sc.label(),
                        info.amplitude
                    ),
                    !info.stationary && info.amplitude > 1e-3,
                ));
                amp.push(info.amplitude);
            }
        }
        out.push((
            format!(
                "f-b1-f2 amplitude {:.3e} > b-f1-b2 amplitude {:.3e}",
                amp[0], amp[1]
            ),
            amp[0] > amp[1],
        ));
        Ok(out)
    })
}

pub fn friction_transient() -> Verdict {
    timed(
        4,
        "friction transient and transport frequencies",
        60.0,
        || {
            let mut out = Vec::new();
            let sc = two_bath(F, F, F);
            let m = Model::with_defaults(&sc)?;
            let unit = 1.0 / sc.big_omega;
            let ref5 = m.transport(5.0 * unit)?.lambda;
            let mut worst: f64 = 0.0;
            for i in 0..=90 {
                let t = (0.5 + 0.05 * i as f64) * unit;
                worst = worst.max((m.transport(t)?.lambda / ref5 - 1.0).abs());
            }
            out.push((
            format!("f-f1-f2 max|lambda(t)/lambda(5) - 1| over Omega t in [0.5, 5] {worst:.3e} <= 1e-2"),
            worst <= 0.01,
        ));
            for sc in [two_bath(F, B, F), two_bath(B, F, B)] {
                let m = Model::with_defaults(&sc)?;
                let grid = omega_grid(&sc, 0.005, 50.0)?;
                let times = grid.times();
                let s = m.transport_sweep(&times)?;
                let lam: Vec<f64> = s.iter().map(|x| x.lambda).collect();
                let d: Vec<f64> = s.iter().map(|x| x.d).collect();
                let o = ClassifyOptions::default();
                let (fl, fd) = (
                    classify(&times, &lam, &o)?.frequency,
                    classify(&times, &d, &o)?.frequency,
                );
                let rel = (fl / fd - 1.0).abs();
                out.push((
                    format!(
                        "{} lambda/D frequencies {fl:.5}/{fd:.5} rel {rel:.2e} <= 1e-2",
                        sc.label()
                    ),
                    rel <= 0.01,
                ));
            }
            let mut worst0: f64 = 0.0;
            for sc in two_bath_family() {
                let s = Model::with_defaults(&sc)?.transport(0.0)?;
                worst0 = worst0.max(s.lambda.abs()).max(s.d.abs());
            }
            out.push((
                format!("max |lambda(0)|, |D(0)| over four systems {worst0:.1e} <= 1e-9"),
                worst0 <= 1e-9,
            ));
            Ok(out)
        },
    )
}

pub fn frequency_scan() -> Verdict {
    timed(5, "asymptotic frequency versus Omega", 600.0, || {
        let gamma1 = 10.0;
        let values: Vec<f64> = (0..20)
            .map(|i| gamma1 * (0.12 + 0.28 * i as f64 / 19.0))
            .collect();
        let spec = ScanSpec {
            parameter: ScanParameter::Omega,
            values: values.clone(),
            observable: Observable::Occupation,
            grid: TimeGrid::new(0.005, 50.0)?,
            classify: ClassifyOptions::default(),
            diffusion: DiffusionOptions::default(),
        };
        let mut freqs = Vec::new();
        let mut out = Vec::new();
        for sc in [two_bath(F, B, F), two_bath(B, F, B)] {
            let r = scan(&sc, &spec);
            let f: Vec<f64> = r
                .points
                .iter()
                .map(|p| {
                    p.info.as_ref().map_or(f64::NAN, |i| {
                        if i.frequency > 0.0 {
                            i.frequency
                        } else {
                            f64::NAN
                        }
                    })
                })
                .collect();
            let errors = r.points.iter().filter(|p| p.error.is_some()).count();
            let monotone = f.windows(2).all(|w| w[1] > w[0]);
            let r2 = linear_r2(&values, &f);
            out.push((
                format!(
                    "{} frequencies {:.4}..{:.4} monotone, R^2 {r2:.5} >= 0.98, {errors} failed points",
                    sc.label(),
                    f[0],
                    f[f.len() - 1]
                ),
                monotone && r2 >= 0.98 && errors == 0,
            ));
            freqs.push(f);
        }
        let worst = freqs[0]
            .iter()
            .zip(&freqs[1])
            .map(|(a, b)| (a / b - 1.0).abs())
            .fold(
                0.0,
                |m: f64, x| if x.is_nan() { f64::INFINITY } else { m.max(x) },
            );
        out.push((
            format!("f-b1-f2 vs b-f1-b2 worst relative gap {worst:.2e} <= 1e-2"),
            worst <= 0.01,
        ));
        Ok(out)
    })
}

pub fn fluctuation_dissipation() -> Verdict {
    timed(6, "fluctuation-dissipation asymptote", 30.0, || {
        let mut out = Vec::new();
        for sc in [two_bath(F, F, F), two_bath(B, B, B)] {
            let m = Model::with_defaults(&sc)?;
            let s = m.transport(50.0 / sc.big_omega)?;
            let sum: f64 = m.baths.i_inf.iter().sum();
            let dev = (s.d / s.lambda - sum).abs();
            out.push((
                format!(
                    "{} |D/lambda - sum I(inf)| = |{:.6} - {sum:.6}| {dev:.2e} <= 1e-3",
                    sc.label(),
                    s.d / s.lambda
                ),
                dev <= 1e-3,
            ));
        }
        Ok(out)
    })
}

pub fn invariant_suite() -> Verdict {
    timed(
        7,
        "invariant suite on 50 randomized scenarios",
        300.0,
        || {
            let report = run_verify(&VerifyOptions::full());
            Ok(report
                .checks
                .iter()
                .map(|c| {
                    let mut s = format!(
                        "{} worst {:.2e} tol {:.0e} ({} failed of {}",
                        c.name, c.worst, c.tolerance, c.failures, c.checked
                    );
                    if c.skipped > 0 {
                        s.push_str(&format!(", {} skipped", c.skipped));
                    }
                    s.push(')');
                    (s, c.passed())
                })
                .collect())
        },
    )
}

pub fn non_thermal_strong_coupling() -> Verdict {
    timed(8, "non-thermal asymptote at strong coupling", 30.0, || {
        let sc = two_bath_with(F, F, F, 1.0, 1.0);
        let m = Model::with_defaults(&sc)?;
        let n_inf = m.asymptotics()?.n_inf_pure.unwrap_or(f64::NAN);
        let late = m.occupation_closed_form(80.0 / sc.big_omega)?;
        let mut out = vec![(
            format!("closed form at Omega t=80 {late:.6} agrees with asymptote {n_inf:.6}"),
            (late - n_inf).abs() < 1e-5,
        )];
        for (name, w) in [("omega", sc.omega), ("Omega", sc.big_omega)] {
            let fd = fermi(w);
            let dev = (n_inf - fd).abs();
            out.push((
                format!("|n(inf) - f({name}={w:.4})| = |{n_inf:.6} - {fd:.6}| {dev:.3e} > 1e-3"),
                dev > 1e-3,
            ));
        }
        Ok(out)
    })
}

/// Runners keyed by criterion number, in order.
pub fn all() -> Vec<(u8, fn() -> Verdict)> {
    vec![
        (1, markov_thermalization),
        (2, oracle_equivalence_fermi),
        (2, oracle_equivalence_bose),
        (3, stationarity_dichotomy),
        (4, friction_transient),
        (5, frequency_scan),
        (6, fluctuation_dissipation),
        (7, invariant_suite),
        (8, non_thermal_strong_coupling),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verdict(ok: bool, seconds: f64) -> Verdict {
        Verdict {
            id: 9,
            title: "demo",
            clauses: vec![("a".into(), true), ("b".into(), ok)],
            seconds,
            budget_s: 1.0,
        }
    }

    #[test]
    fn a_failed_clause_or_overrun_fails_the_criterion() {
        assert!(verdict(true, 0.5).passed());
        assert!(!verdict(false, 0.5).passed());
        assert!(!verdict(true, 2.0).passed());
        let line = verdict(false, 0.5).line();
        assert!(line.starts_with("FAIL criterion 9: demo") && line.contains("| FAIL b"));
    }
}

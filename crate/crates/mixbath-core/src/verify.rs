//! Invariant suite over randomized scenarios.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bath::QuadratureSpec;
use crate::error::{Error, Result};
use crate::evolution::{DiffusionOptions, TimeGrid};
use crate::model::Model;
use crate::scenario::{BathSpec, FrequencyMode, Scenario, Statistics, SystemSpec};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VerifyOptions {
    pub scenarios: usize,
    pub seed: u64,
    /// horizon of the range check, in units of 1/Omega
    pub t_max: f64,
    pub dt: f64,
}

impl VerifyOptions {
    pub fn full() -> Self {
        VerifyOptions {
            scenarios: 50,
            seed: 20_240_601,
            t_max: 20.0,
            dt: 0.01,
        }
    }

    pub fn quick() -> Self {
        VerifyOptions {
            scenarios: 10,
            t_max: 10.0,
            ..Self::full()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub tolerance: f64,
    pub worst: f64,
    pub failures: usize,
    pub checked: usize,
    /// scenarios where the quantity is undefined (mixed friction denominator crossing zero)
    pub skipped: usize,
    pub first_failure: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed())
    }
}

/// N <= 4 baths, alpha in [0, 0.2], gamma / Omega in [5, 20], mixed statistics allowed.
pub fn random_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let stat = |rng: &mut ChaCha8Rng| {
        if rng.random_bool(0.5) {
            Statistics::Fermi
        } else {
            Statistics::Bose
        }
    };
    let big_omega = rng.random_range(0.5..2.0);
    let sys_stat = stat(rng);
    let n0 = match sys_stat {
        Statistics::Fermi => rng.random_range(0.0..=1.0),
        Statistics::Bose => rng.random_range(0.0..2.0),
    };
    let n = rng.random_range(1..=4);
    let baths = (0..n)
        .map(|_| BathSpec {
            statistics: stat(rng),
            alpha: rng.random_range(0.0..0.2),
            gamma: big_omega * rng.random_range(5.0..20.0),
            temperature: if rng.random_bool(0.15) {
                0.0
            } else {
                big_omega * rng.random_range(0.05..2.0)
            },
        })
        .collect();
    let system = SystemSpec {
        statistics: sys_stat,
        frequency_mode: FrequencyMode::Renormalized,
        frequency_value: big_omega,
        n0,
    };
    Scenario::new(system, baths).expect("renormalized random scenario is valid")
}

#[derive(Default)]
struct Tally {
    worst: f64,
    failures: usize,
    checked: usize,
    skipped: usize,
    first: Option<String>,
}

type Value = std::result::Result<Option<f64>, String>;

struct Outcome {
    label: String,
    values: Vec<(&'static str, Value)>,
}

const CHECKS: [(&str, f64); 8] = [
    ("residue identity", 1e-9),
    ("root conjugation closure", 1e-9),
    ("A(0)=1, B(0)=0", 1e-10),
    ("M(w,0)=N(w,0)=0", 1e-10),
    ("kernel derivatives vs finite difference (relative)", 1e-6),
    (
        "bath integral derivative vs finite difference (relative)",
        1e-6,
    ),
    ("quadrature refinement stability", 1e-6),
    ("occupation range", 1e-6),
];

fn residue_identity(model: &Model) -> Result<f64> {
    let r = &model.roots;
    let w = model.scenario.big_omega;
    let xi = r.full_residues(w)?;
    let mut nodes = vec![C64::new(0.0, -w)];
    nodes.extend(r.roots.iter().copied());
    let n0 = r.roots.len();
    let mut worst = 0.0f64;
    for m in 0..=n0 {
        let terms: Vec<C64> = xi
            .iter()
            .zip(&nodes)
            .map(|(x, s)| x * s.powu(m as u32))
            .collect();
        let sum: C64 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|t| t.norm()).sum::<f64>().max(1.0);
        let expect = if m == n0 { 1.0 } else { 0.0 };
        worst = worst.max((sum - expect).norm() / scale);
    }
    Ok(worst)
}

fn conjugation_closure(model: &Model) -> f64 {
    let roots = &model.roots.roots;
    let scale = roots.iter().fold(1.0f64, |m, r| m.max(r.norm()));
    roots
        .iter()
        .map(|r| {
            roots
                .iter()
                .map(|s| (r.conj() - s).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        / scale
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-3)
}

fn kernel_derivatives(model: &Model) -> f64 {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for t in [0.3, 1.7] {
        let k = model.kernels.eval_ab(t);
        let p = model.kernels.eval_ab(t + h);
        let m = model.kernels.eval_ab(t - h);
        worst = worst.max(rel(k.da_dt, (p.a - m.a) / (2.0 * h)));
        worst = worst.max(rel(k.db_dt, (p.b - m.b) / (2.0 * h)));
    }
    worst
}

fn bath_derivative(model: &Model) -> Result<f64> {
    let h = 1e-4;
    let t = 1.1;
    let c = model.baths.eval(t)?;
    let p = model.baths.eval(t + h)?;
    let m = model.baths.eval(t - h)?;
    let scale = model
        .baths
        .i_inf
        .iter()
        .fold(1e-3f64, |a, v| a.max(v.abs()));
    let mut worst = 0.0f64;
    for l in 0..c.i.len() {
        let fd = (p.i[l] - m.i[l]) / (2.0 * h);
        worst = worst.max((fd - c.di_dt[l]).abs() / c.di_dt[l].abs().max(scale));
    }
    Ok(worst)
}

fn quadrature_stability(model: &Model) -> Result<f64> {
    let sc = &model.scenario;
    let base = model.spec;
    let fine = QuadratureSpec {
        rel_tol: base.rel_tol * 1e-2,
        abs_tol: base.abs_tol * 1e-2,
        w_max: base.w_max * 2.0,
        ..base
    };
    let refined = Model::new(sc, fine)?;
    let t = 2.0;
    let a = model.baths.eval(t)?;
    let b = refined.baths.eval(t)?;
    let mut worst = 0.0f64;
    for l in 0..a.i.len() {
        worst = worst.max((a.i[l] - b.i[l]).abs());
        worst = worst.max((model.baths.i_inf[l] - refined.baths.i_inf[l]).abs());
    }
    Ok(worst)
}

fn occupation_range(model: &Model, opts: &VerifyOptions) -> Result<Option<f64>> {
    let sc = &model.scenario;
    let unit = 1.0 / sc.big_omega;
    let grid = TimeGrid::new(opts.dt * unit, opts.t_max * unit)?;
    let tr = if sc.is_pure() {
        model.evolve_closed_form(&grid)?
    } else {
        match model.evolve_diffusion(&grid, &DiffusionOptions::default()) {
            Ok((tr, _)) => tr,
            Err(Error::DenominatorFloor { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    };
    let eps = sc.eps_a();
    Ok(Some(tr.n.iter().fold(0.0f64, |m, &n| {
        let below = (-n).max(0.0);
        let above = if eps < 0.0 { (n - 1.0).max(0.0) } else { 0.0 };
        m.max(below).max(above)
    })))
}

fn run_one(sc: &Scenario, opts: &VerifyOptions) -> Outcome {
    let label = format!("{} [{}]", sc.label(), sc.hash());
    let model = match Model::with_defaults(sc) {
        Ok(m) => m,
        Err(e) => {
            let msg = format!("model: {e}");
            return Outcome {
                label,
                values: CHECKS.iter().map(|(n, _)| (*n, Err(msg.clone()))).collect(),
            };
        }
    };
    let wrap = |r: Result<f64>| r.map(Some).map_err(|e| e.to_string());
    let a0 = model.kernels.eval_ab(0.0);
    let ab0 = (a0.a - 1.0).norm().max(a0.b.norm());
    let mn0 = [0.5, 1.0, 3.0]
        .iter()
        .map(|f| {
            model
                .kernels
                .eval_mn(&model.roots, f * sc.big_omega, 0.0)
                .map(|s| s.m.norm().max(s.n.norm()))
        })
        .collect::<Result<Vec<f64>>>()
        .map(|v| v.into_iter().fold(0.0, f64::max));
    Outcome {
        label,
        values: vec![
            (CHECKS[0].0, wrap(residue_identity(&model))),
            (CHECKS[1].0, Ok(Some(conjugation_closure(&model)))),
            (CHECKS[2].0, Ok(Some(ab0))),
            (CHECKS[3].0, wrap(mn0)),
            (CHECKS[4].0, Ok(Some(kernel_derivatives(&model)))),
            (CHECKS[5].0, wrap(bath_derivative(&model))),
            (CHECKS[6].0, wrap(quadrature_stability(&model))),
            (
                CHECKS[7].0,
                occupation_range(&model, opts).map_err(|e| e.to_string()),
            ),
        ],
    }
}

/// The scenarios the suite draws for a given seed, in order.
pub fn scenarios_for(opts: &VerifyOptions) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    (0..opts.scenarios)
        .map(|_| random_scenario(&mut rng))
        .collect()
}

pub fn run_verify(opts: &VerifyOptions) -> VerifyReport {
    let scenarios = scenarios_for(opts);
    let outcomes: Vec<Outcome> = scenarios.par_iter().map(|sc| run_one(sc, opts)).collect();
    let mut tallies: Vec<Tally> = CHECKS.iter().map(|_| Tally::default()).collect();
    for o in &outcomes {
        for (i, (_, v)) in o.values.iter().enumerate() {
            let t = &mut tallies[i];
            match v {
                Ok(None) => {
                    t.skipped += 1;
                    continue;
                }
                _ => t.checked += 1,
            }
            match v {
                Ok(None) => {}
                Ok(Some(x)) if *x <= CHECKS[i].1 => t.worst = t.worst.max(*x),
                Ok(Some(x)) => {
                    t.worst = t.worst.max(*x);
                    t.failures += 1;
                    t.first
                        .get_or_insert_with(|| format!("{}: {x:.3e}", o.label));
                }
                Err(e) => {
                    t.worst = f64::INFINITY;
                    t.failures += 1;
                    t.first.get_or_insert_with(|| format!("{}: {e}", o.label));
                }
            }
        }
    }
    VerifyReport {
        options: *opts,
        checks: CHECKS
            .iter()
            .zip(tallies)
            .map(|((name, tol), t)| CheckResult {
                name: name.to_string(),
                tolerance: *tol,
                worst: t.worst,
                failures: t.failures,
                checked: t.checked,
                skipped: t.skipped,
                first_failure: t.first,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_scenarios_are_reproducible() {
        let o = VerifyOptions::quick();
        let a: Vec<String> = scenarios_for(&o).iter().map(|s| s.hash()).collect();
        let b: Vec<String> = scenarios_for(&o).iter().map(|s| s.hash()).collect();
        assert_eq!(a, b);
        assert!(scenarios_for(&o)
            .iter()
            .all(|s| s.n_baths() <= 4 && s.big_omega > 0.0));
    }
}

//! Occupation trajectories, asymptotic values and the stationarity condition.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::bath_occ;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::scenario::Scenario;
use crate::transport::TransportSample;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ClosedFormPure,
    DiffusionMixed,
    Volterra,
    DiscreteBath,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ClosedFormPure => "closed-form",
            Method::DiffusionMixed => "diffusion",
            Method::Volterra => "volterra",
            Method::DiscreteBath => "discrete",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub n: Vec<f64>,
    pub method: Method,
    pub scenario_hash: String,
    /// true where a sample left the physical range or came from a flagged transport sample
    pub flags: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub t_max: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid {
            dt: 0.005,
            t_max: 50.0,
        }
    }
}

impl TimeGrid {
    pub fn new(dt: f64, t_max: f64) -> Result<Self> {
        if !(dt > 0.0 && t_max > 0.0 && dt.is_finite() && t_max.is_finite()) {
            return Err(Error::Invalid(format!("bad grid dt={dt}, t_max={t_max}")));
        }
        Ok(TimeGrid { dt, t_max })
    }

    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|i| i as f64 * self.dt).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CumulativeRule {
    Trapezoid,
    /// four-point Lagrange panels, fourth order
    Cubic,
}

impl CumulativeRule {
    pub fn name(self) -> &'static str {
        match self {
            CumulativeRule::Trapezoid => "trapezoid",
            CumulativeRule::Cubic => "cubic",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DiffusionOptions {
    pub rule: CumulativeRule,
    /// max |n_dt - n_dt/2| allowed by the step-halving self-check
    pub halving_tol: f64,
    /// the onset of D(t) is steep on a scale 1/gamma_max; that many of these scales
    /// are integrated on a sub-grid before switching to the uniform grid
    pub start_span: f64,
    pub start_substeps: usize,
}

impl Default for DiffusionOptions {
    fn default() -> Self {
        DiffusionOptions {
            rule: CumulativeRule::Cubic,
            halving_tol: 1e-5,
            start_span: 2.0,
            start_substeps: 16,
        }
    }
}

fn range_flag(stat_sign: f64, n: f64) -> bool {
    !n.is_finite() || n < -1e-6 || (stat_sign < 0.0 && n > 1.0 + 1e-6)
}

fn panel_weights(i: usize, len: usize) -> ([f64; 4], usize) {
    // integral over [t_i, t_{i+1}] from four consecutive samples starting at the returned index
    if i == 0 {
        ([9.0, 19.0, -5.0, 1.0], 0)
    } else if i + 2 >= len {
        ([1.0, -5.0, 19.0, 9.0], len - 4)
    } else {
        ([-1.0, 13.0, 13.0, -1.0], i - 1)
    }
}

/// Solves dn/dt = -2 lambda n + 2 D on a uniform grid:
/// n(t) = e^{-2L(t)} n0 + 2 int_0^t D(tau) e^{-2(L(t)-L(tau))} dtau, advanced panel by panel.
pub fn integrate_rate_equation(
    dt: f64,
    lambda: &[f64],
    d: &[f64],
    n0: f64,
    rule: CumulativeRule,
) -> Vec<f64> {
    let len = lambda.len();
    let mut n = vec![n0; len];
    if len < 2 {
        return n;
    }
    let rule = if len < 4 {
        CumulativeRule::Trapezoid
    } else {
        rule
    };
    match rule {
        CumulativeRule::Trapezoid => {
            for i in 0..len - 1 {
                let decay = (-dt * (lambda[i] + lambda[i + 1])).exp();
                n[i + 1] = n[i] * decay + dt * (d[i] * decay + d[i + 1]);
            }
        }
        CumulativeRule::Cubic => {
            let mut cum = vec![0.0; len];
            for i in 0..len - 1 {
                let (w, s) = panel_weights(i, len);
                let inc: f64 = (0..4).map(|j| w[j] * lambda[s + j]).sum::<f64>() * dt / 24.0;
                cum[i + 1] = cum[i] + inc;
            }
            for i in 0..len - 1 {
                let (w, s) = panel_weights(i, len);
                let decay = (-2.0 * (cum[i + 1] - cum[i])).exp();
                let src: f64 = (0..4)
                    .map(|j| w[j] * d[s + j] * (-2.0 * (cum[i + 1] - cum[s + j])).exp())
                    .sum::<f64>()
                    * dt
                    / 24.0;
                n[i + 1] = n[i] * decay + 2.0 * src;
            }
        }
    }
    n
}

/// Largest deviation between the grid solution and the same equation solved on every other sample.
pub fn step_halving_deviation(
    dt: f64,
    lambda: &[f64],
    d: &[f64],
    n0: f64,
    rule: CumulativeRule,
) -> f64 {
    let fine = integrate_rate_equation(dt, lambda, d, n0, rule);
    let l2: Vec<f64> = lambda.iter().step_by(2).copied().collect();
    let d2: Vec<f64> = d.iter().step_by(2).copied().collect();
    let coarse = integrate_rate_equation(2.0 * dt, &l2, &d2, n0, rule);
    coarse
        .iter()
        .zip(fine.iter().step_by(2))
        .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// Same equation, but the first `k` panels come from a sub-grid of `substeps` points per panel
/// (`fine_*` hold k*substeps+1 samples). The uniform solve restarts from n(k dt).
pub fn integrate_with_start(
    dt: f64,
    lambda: &[f64],
    d: &[f64],
    n0: f64,
    rule: CumulativeRule,
    fine_lambda: &[f64],
    fine_d: &[f64],
    substeps: usize,
) -> Vec<f64> {
    let k = (fine_lambda.len().saturating_sub(1)) / substeps.max(1);
    if k == 0 || substeps == 0 {
        return integrate_rate_equation(dt, lambda, d, n0, rule);
    }
    let fine = integrate_rate_equation(dt / substeps as f64, fine_lambda, fine_d, n0, rule);
    let mut n: Vec<f64> = fine.iter().step_by(substeps).take(k + 1).copied().collect();
    if lambda.len() > k + 1 {
        let rest = integrate_rate_equation(dt, &lambda[k..], &d[k..], n[k], rule);
        n.extend_from_slice(&rest[1..]);
    }
    n.truncate(lambda.len());
    n
}

fn check_flags(samples: &[TransportSample]) -> Result<()> {
    match samples.iter().find(|s| s.flagged) {
        Some(s) => Err(Error::DenominatorFloor {
            t: s.t,
            value: s.denominators.0.min(s.denominators.1),
        }),
        None => Ok(()),
    }
}

impl Model {
    /// n(t) = n0 (|A|^2 + eps|B|^2) + |B|^2 + sum_lambda I_lambda(t); pure statistics only.
    pub fn occupation_closed_form(&self, t: f64) -> Result<f64> {
        let sc = &self.scenario;
        if !sc.is_pure() {
            return Err(Error::Precondition(
                "closed form needs every bath to share the system statistics".into(),
            ));
        }
        if t == 0.0 {
            return Ok(sc.system.n0);
        }
        let ks = self.kernels.eval_ab(t);
        let bv = self.baths.eval(t)?;
        let eps = sc.eps_a();
        let a2 = ks.a.norm_sqr();
        let b2 = ks.b.norm_sqr();
        let i: f64 = bv.i.iter().sum();
        Ok(sc.system.n0 * (a2 + eps * b2) + b2 + i)
    }

    pub fn evolve_closed_form(&self, grid: &TimeGrid) -> Result<Trajectory> {
        let times = grid.times();
        let n: Vec<f64> = times
            .par_iter()
            .map(|&t| self.occupation_closed_form(t))
            .collect::<Result<_>>()?;
        let eps = self.scenario.eps_a();
        let flags = n.iter().map(|&x| range_flag(eps, x)).collect();
        Ok(Trajectory {
            times,
            n,
            method: Method::ClosedFormPure,
            scenario_hash: self.scenario.hash(),
            flags,
        })
    }

    fn start_panels(&self, dt: f64, steps: usize, opts: &DiffusionOptions) -> usize {
        let gmax = self
            .scenario
            .baths
            .iter()
            .map(|b| b.gamma)
            .fold(0.0, f64::max);
        if gmax == 0.0 || opts.start_substeps < 2 {
            return 0;
        }
        ((opts.start_span / gmax / dt).ceil() as usize).min(steps)
    }

    fn solve_grid(
        &self,
        dt: f64,
        samples: &[TransportSample],
        opts: &DiffusionOptions,
    ) -> Result<Vec<f64>> {
        let lambda: Vec<f64> = samples.iter().map(|s| s.lambda).collect();
        let d: Vec<f64> = samples.iter().map(|s| s.d).collect();
        let n0 = self.scenario.system.n0;
        let k = self.start_panels(dt, samples.len().saturating_sub(1), opts);
        if k == 0 {
            return Ok(integrate_rate_equation(dt, &lambda, &d, n0, opts.rule));
        }
        let sub = opts.start_substeps;
        let h = dt / sub as f64;
        let fine_t: Vec<f64> = (0..=k * sub).map(|i| i as f64 * h).collect();
        let fine = self.transport_sweep(&fine_t)?;
        check_flags(&fine)?;
        let fl: Vec<f64> = fine.iter().map(|s| s.lambda).collect();
        let fd: Vec<f64> = fine.iter().map(|s| s.d).collect();
        Ok(integrate_with_start(
            dt, &lambda, &d, n0, opts.rule, &fl, &fd, sub,
        ))
    }

    /// Integrates the rate equation with transport samples on the grid, checked against dt/2.
    pub fn evolve_diffusion(
        &self,
        grid: &TimeGrid,
        opts: &DiffusionOptions,
    ) -> Result<(Trajectory, Vec<TransportSample>)> {
        let steps = grid.steps();
        let half_dt = grid.dt / 2.0;
        let half_times: Vec<f64> = (0..=2 * steps).map(|i| i as f64 * half_dt).collect();
        let half = self.transport_sweep(&half_times)?;
        check_flags(&half)?;
        let n_half = self.solve_grid(half_dt, &half, opts)?;
        let samples: Vec<TransportSample> = half.into_iter().step_by(2).collect();
        let traj = self.trajectory_from_transport(grid.dt, &samples, opts)?;
        let dev = traj
            .n
            .iter()
            .zip(n_half.iter().step_by(2))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if !(dev <= opts.halving_tol) {
            return Err(Error::GridTooCoarse {
                deviation: dev,
                tolerance: opts.halving_tol,
            });
        }
        Ok((traj, samples))
    }

    /// Trajectory from transport samples already on a uniform grid (no halving check).
    pub fn trajectory_from_transport(
        &self,
        dt: f64,
        samples: &[TransportSample],
        opts: &DiffusionOptions,
    ) -> Result<Trajectory> {
        check_flags(samples)?;
        let n = self.solve_grid(dt, samples, opts)?;
        let eps = self.scenario.eps_a();
        let flags = n.iter().map(|&x| range_flag(eps, x)).collect();
        Ok(Trajectory {
            times: samples.iter().map(|s| s.t).collect(),
            n,
            method: Method::DiffusionMixed,
            scenario_hash: self.scenario.hash(),
            flags,
        })
    }

    pub fn asymptotics(&self) -> Result<AsymptoticReport> {
        asymptotic_report(&self.scenario, &self.baths.i_inf)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticReport {
    pub n_inf_pure: Option<f64>,
    pub n_inf_opposite: Option<f64>,
    pub markov_limit: f64,
    pub stationarity_residual: f64,
    pub is_stationary_predicted: bool,
    pub i_inf: Vec<f64>,
}

pub const STATIONARITY_TOL: f64 = 1e-6;

/// (1/g0) sum_lambda alpha_lambda n_lambda(omega); NaN when every alpha vanishes.
pub fn markov_limit(sc: &Scenario) -> Result<f64> {
    if sc.g0 == 0.0 {
        return Ok(f64::NAN);
    }
    let mut acc = 0.0;
    for b in &sc.baths {
        acc += b.alpha * bath_occ(sc.omega, b.temperature, b.statistics.sign())?;
    }
    Ok(acc / sc.g0)
}

pub fn asymptotic_report(sc: &Scenario, i_inf: &[f64]) -> Result<AsymptoticReport> {
    let eps_a = sc.eps_a();
    let opp: f64 = i_inf[..sc.n_opposite].iter().sum();
    let same: f64 = i_inf[sc.n_opposite..].iter().sum();
    let n_inf_pure = (sc.n_opposite == 0).then_some(same);
    let n_inf_opposite = if sc.n_same == 0 {
        let den = 1.0 - 2.0 * eps_a * opp;
        if den.abs() < 1e-12 {
            return Err(Error::Domain(
                "opposite-statistics asymptote denominator vanishes".into(),
            ));
        }
        Some(opp / den)
    } else {
        None
    };
    let p = sc.p;
    let (residual, stationary) = if sc.n_opposite == 0 || sc.n_same == 0 || p <= 0.0 || p >= 1.0 {
        (0.0, true)
    } else {
        let lhs = opp / p;
        let rhs = (same / (1.0 - p)) / (1.0 + 2.0 * eps_a / (1.0 - p) * same);
        let r = lhs - rhs;
        (r, r.abs() < STATIONARITY_TOL)
    };
    Ok(AsymptoticReport {
        n_inf_pure,
        n_inf_opposite,
        markov_limit: markov_limit(sc)?,
        stationarity_residual: residual,
        is_stationary_predicted: stationary,
        i_inf: i_inf.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_diffusion_is_pure_decay() {
        let dt = 0.01;
        let times: Vec<f64> = (0..=500).map(|i| i as f64 * dt).collect();
        let lambda: Vec<f64> = times.iter().map(|t| 0.3 + 0.1 * t.sin()).collect();
        let d = vec![0.0; times.len()];
        for rule in [CumulativeRule::Trapezoid, CumulativeRule::Cubic] {
            let n = integrate_rate_equation(dt, &lambda, &d, 0.7, rule);
            for (t, v) in times.iter().zip(&n) {
                let l = 0.3 * t + 0.1 * (1.0 - t.cos());
                let exact = 0.7 * (-2.0 * l).exp();
                let tol = if rule == CumulativeRule::Cubic {
                    1e-10
                } else {
                    1e-5
                };
                assert!((v - exact).abs() < tol, "{rule:?} t={t}");
            }
        }
    }

    #[test]
    fn constant_coefficients_relax_to_ratio() {
        let dt = 0.01;
        let len = 2001;
        let n = integrate_rate_equation(
            dt,
            &vec![0.5; len],
            &vec![0.1; len],
            0.0,
            CumulativeRule::Cubic,
        );
        let exact = |t: f64| 0.2 * (1.0 - (-t).exp());
        let e1 = (n[len - 1] - exact(20.0)).abs();
        let e2 = (n[100] - exact(1.0)).abs();
        assert!(e1 < 1e-10 && e2 < 1e-10, "{e1} {e2}");
    }

    #[test]
    fn start_segment_matches_plain_solve_when_smooth() {
        let dt = 0.01;
        let len = 1001;
        let lam: Vec<f64> = (0..len)
            .map(|i| 0.2 + 0.05 * (i as f64 * dt).cos())
            .collect();
        let d: Vec<f64> = (0..len)
            .map(|i| 0.1 * (i as f64 * dt).sin().powi(2))
            .collect();
        let sub = 8;
        let k = 20;
        let h = dt / sub as f64;
        let fl: Vec<f64> = (0..=k * sub)
            .map(|i| 0.2 + 0.05 * (i as f64 * h).cos())
            .collect();
        let fd: Vec<f64> = (0..=k * sub)
            .map(|i| 0.1 * (i as f64 * h).sin().powi(2))
            .collect();
        let a = integrate_rate_equation(dt, &lam, &d, 0.3, CumulativeRule::Cubic);
        let b = integrate_with_start(dt, &lam, &d, 0.3, CumulativeRule::Cubic, &fl, &fd, sub);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_times() {
        let g = TimeGrid::new(0.005, 50.0).unwrap();
        assert_eq!(g.steps(), 10000);
        assert_eq!(g.times().len(), 10001);
    }
}

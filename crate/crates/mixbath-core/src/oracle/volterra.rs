//! Master equation dn/dt = int_0^t [W+(t-s) - W(t-s) n(s)] ds with baths frozen at their
//! initial thermal occupations.
//!
//! W+ and W- diverge logarithmically at zero lag (the vacuum part of the Drude weight falls
//! off only like 1/w), so the solver works with the integrated kernels
//!   K(u) = int_0^u W,   G(u) = int_0^u (u - s) W+(s) ds,
//! which are continuous. Integrating the equation once gives the second-kind form
//!   n(t) = n0 + G(t) - int_0^t K(t - s) n(s) ds,
//! marched with the trapezoid rule in the history; K(0) = 0 keeps it explicit.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_4, PI};

use crate::bath::w_occ;
use crate::error::{Error, Result};
use crate::evolution::{Method, TimeGrid, Trajectory};
use crate::quad::{breakpoints, integrate, integrate_semi_infinite, Tolerance};
use crate::scenario::Scenario;

#[derive(Clone, Debug, Serialize)]
pub struct MemoryKernels {
    pub tau: Vec<f64>,
    pub dt: f64,
    /// +inf at zero lag when the vacuum divergence is present
    pub w_plus: Vec<f64>,
    pub w_minus: Vec<f64>,
    pub w: Vec<f64>,
    pub k_int: Vec<f64>,
    pub g_int: Vec<f64>,
    pub eps_a: f64,
    pub scenario_hash: String,
}

// cos(x u), sin(x u)/x, (1 - cos(x u))/x^2 for x = w - omega and x = w + omega
const DIM: usize = 6;

fn kernel_tol() -> Tolerance {
    Tolerance {
        rel: 1e-11,
        abs: 1e-15,
        max_subdivisions: 20_000,
    }
}

/// 1 + i z - e^{i z}, accurate for small |z|
fn one_plus_iz_minus_exp(z: C64) -> C64 {
    if z.norm() < 0.1 {
        // -sum_{k>=2} (iz)^k / k!
        let iz = C64::i() * z;
        let mut term = iz * iz / 2.0;
        let mut acc = C64::new(0.0, 0.0);
        for k in 3..12 {
            acc -= term;
            term = term * iz / k as f64;
        }
        acc
    } else {
        C64::new(1.0, 0.0) + C64::i() * z - (C64::i() * z).exp()
    }
}

/// e^{i z} - 1, accurate for small |z|
fn exp_iz_minus_one(z: C64) -> C64 {
    if z.norm() < 0.1 {
        let iz = C64::i() * z;
        let mut term = iz;
        let mut acc = C64::new(0.0, 0.0);
        for k in 2..12 {
            acc += term;
            term = term * iz / k as f64;
        }
        acc
    } else {
        (C64::i() * z).exp() - 1.0
    }
}

/// Vacuum part, weight h(w) = w/(gamma^2 + w^2), on the ray w = r e^{i pi/4}.
/// The real-axis integrals equal the ray integrals because every integrand is analytic in the
/// first quadrant (the only pole sits at i gamma) and falls off at least like 1/|w|^2 there.
fn vacuum_parts(gamma: f64, omega: f64, u: f64) -> Result<[f64; DIM]> {
    if u == 0.0 {
        return Ok([f64::INFINITY, f64::INFINITY, 0.0, 0.0, 0.0, 0.0]);
    }
    let dir = C64::from_polar(1.0, FRAC_PI_4);
    let f = |r: f64, out: &mut [C64]| {
        let w = dir * r;
        let h = w / (gamma * gamma + w * w) * dir;
        for (s, x) in [(0usize, w - omega), (1, w + omega)] {
            let z = x * u;
            out[s] = h * (C64::i() * z).exp();
            out[2 + s] = h * exp_iz_minus_one(z) / x;
            out[4 + s] = h * one_plus_iz_minus_exp(z) / (x * x);
        }
    };
    let scale = gamma.max(omega).max(1.0 / u);
    let r = integrate_semi_infinite(&f, DIM, 0.0, scale, &[gamma, omega, 1.0 / u], &kernel_tol())?;
    let v = &r.value;
    Ok([v[0].re, v[1].re, v[2].im, v[3].im, v[4].re, v[5].re])
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Thermal part, weight w n(w)/(gamma^2 + w^2), on the real axis where it decays exponentially.
fn thermal_parts(gamma: f64, omega: f64, temperature: f64, eps: f64, u: f64) -> Result<[f64; DIM]> {
    if temperature == 0.0 {
        return Ok([0.0; DIM]);
    }
    let f = |w: f64, out: &mut [C64]| {
        let h = w_occ(w, temperature, eps) / (gamma * gamma + w * w);
        for (s, x) in [(0usize, w - omega), (1, w + omega)] {
            out[s] = C64::new(h * (x * u).cos(), 0.0);
            out[2 + s] = C64::new(h * u * sinc(x * u), 0.0);
            let half = sinc(0.5 * x * u);
            out[4 + s] = C64::new(h * 0.5 * u * u * half * half, 0.0);
        }
    };
    let w_top = omega + 60.0 * temperature;
    let mut extra = vec![omega, gamma, temperature];
    if u > 0.0 {
        let step = 8.0 * PI / u;
        let mut x = step;
        while x < w_top {
            extra.push(x);
            x += step;
        }
    }
    let pts = breakpoints(0.0, w_top, extra);
    let r = integrate(&f, DIM, &pts, &kernel_tol())?;
    let mut out = [0.0; DIM];
    for (o, v) in out.iter_mut().zip(&r.value) {
        *o = v.re;
    }
    Ok(out)
}

struct KernelPoint {
    w_plus: f64,
    w_minus: f64,
    k: f64,
    g: f64,
}

fn kernel_point(sc: &Scenario, u: f64) -> Result<KernelPoint> {
    let eps_a = sc.eps_a();
    let mut p = KernelPoint {
        w_plus: 0.0,
        w_minus: 0.0,
        k: 0.0,
        g: 0.0,
    };
    for b in &sc.baths {
        if b.alpha == 0.0 {
            continue;
        }
        let c = 2.0 * b.alpha * b.gamma * b.gamma / PI;
        let e = b.statistics.sign();
        let v = vacuum_parts(b.gamma, sc.omega, u)?;
        let t = thermal_parts(b.gamma, sc.omega, b.temperature, e, u)?;
        // frozen bath: cos((w-omega)u) carries (1 + e n) in W-, n in W+; cos((w+omega)u) the reverse
        p.w_minus += c * (v[0] + e * t[0] + t[1]);
        p.w_plus += c * (t[0] + v[1] + e * t[1]);
        p.k += c * ((v[2] + e * t[2] + t[3]) - eps_a * (t[2] + v[3] + e * t[3]));
        p.g += c * (t[4] + v[5] + e * t[5]);
    }
    Ok(p)
}

/// Samples the memory kernels and their integrals on the uniform grid of `grid`.
pub fn build_kernels(sc: &Scenario, grid: &TimeGrid) -> Result<MemoryKernels> {
    let tau = grid.times();
    let pts: Vec<KernelPoint> = tau
        .par_iter()
        .map(|&u| kernel_point(sc, u))
        .collect::<Result<_>>()?;
    let eps_a = sc.eps_a();
    let w_plus: Vec<f64> = pts.iter().map(|p| p.w_plus).collect();
    let w_minus: Vec<f64> = pts.iter().map(|p| p.w_minus).collect();
    let w = pts
        .iter()
        .map(|p| {
            if p.w_minus.is_infinite() {
                // the log divergences cancel for a bosonic system
                if eps_a > 0.0 {
                    f64::NAN
                } else {
                    f64::INFINITY
                }
            } else {
                p.w_minus - eps_a * p.w_plus
            }
        })
        .collect();
    Ok(MemoryKernels {
        dt: grid.dt,
        w_plus,
        w_minus,
        w,
        k_int: pts.iter().map(|p| p.k).collect(),
        g_int: pts.iter().map(|p| p.g).collect(),
        tau,
        eps_a,
        scenario_hash: sc.hash(),
    })
}

impl MemoryKernels {
    /// Kernels built directly from integrated samples (tests, synthetic checks).
    pub fn from_integrated(dt: f64, k_int: Vec<f64>, g_int: Vec<f64>, eps_a: f64) -> Self {
        let len = k_int.len();
        MemoryKernels {
            tau: (0..len).map(|i| i as f64 * dt).collect(),
            dt,
            w_plus: vec![f64::NAN; len],
            w_minus: vec![f64::NAN; len],
            w: vec![f64::NAN; len],
            k_int,
            g_int,
            eps_a,
            scenario_hash: String::new(),
        }
    }

    /// W at lag tau (either sign); the kernels are even by construction.
    pub fn w_at(&self, tau: f64) -> Option<f64> {
        let i = (tau.abs() / self.dt).round() as usize;
        self.w.get(i).copied()
    }

    fn every_other(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.k_int.iter().step_by(2).copied().collect(),
            self.g_int.iter().step_by(2).copied().collect(),
        )
    }
}

fn march(h: f64, k: &[f64], g: &[f64], n0: f64) -> Vec<f64> {
    let len = k.len();
    let mut n = vec![n0; len];
    for i in 1..len {
        let mut hist = 0.5 * k[i] * n0;
        for j in 1..i {
            hist += k[i - j] * n[j];
        }
        n[i] = n0 + g[i] - h * hist;
    }
    n
}

pub const VOLTERRA_HALVING_TOL: f64 = 1e-3;

/// Trapezoid-in-history march; checked against the same march on every other sample.
pub fn volterra_solve(kernels: &MemoryKernels, n0: f64, halving_tol: f64) -> Result<Trajectory> {
    let h = kernels.dt;
    let n = march(h, &kernels.k_int, &kernels.g_int, n0);
    if n.len() >= 5 {
        let (k2, g2) = kernels.every_other();
        let coarse = march(2.0 * h, &k2, &g2, n0);
        let dev = coarse
            .iter()
            .zip(n.iter().step_by(2))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if !(dev <= halving_tol) {
            return Err(Error::GridTooCoarse {
                deviation: dev,
                tolerance: halving_tol,
            });
        }
    }
    let eps = kernels.eps_a;
    let flags = n
        .iter()
        .map(|&x| !x.is_finite() || x < -1e-6 || (eps < 0.0 && x > 1.0 + 1e-6))
        .collect();
    Ok(Trajectory {
        times: kernels.tau.clone(),
        n,
        method: Method::Volterra,
        scenario_hash: kernels.scenario_hash.clone(),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::two_bath;
    use crate::scenario::Statistics::{Bose as B, Fermi as F};

    #[test]
    fn exponential_kernel_has_known_solution() {
        // W = 2 k0 delta-like? use K(u) = a u, G(u) = b u^2/2: n' = b t - a n integrated ... n'' = b - a n'
        // n(t) = n0 + G - int K(t-s) n(s) ds  with K = a u, G = b u^2 / 2  <=>  n'' = b - a n, n'(0)=0
        let (a, b, n0) = (2.0f64, 1.0, 0.3);
        let h = 0.001;
        let len = 3001;
        let k: Vec<f64> = (0..len).map(|i| a * i as f64 * h).collect();
        let g: Vec<f64> = (0..len).map(|i| b * (i as f64 * h).powi(2) / 2.0).collect();
        let n = march(h, &k, &g, n0);
        let wq = a.sqrt();
        for i in (0..len).step_by(500) {
            let t = i as f64 * h;
            let exact = b / a + (n0 - b / a) * (wq * t).cos();
            assert!((n[i] - exact).abs() < 1e-5, "t={t} {} {exact}", n[i]);
        }
    }

    #[test]
    fn zero_coupling_keeps_n0() {
        let mut sc = two_bath(F, F, F);
        for bth in sc.baths.iter_mut() {
            bth.alpha = 0.0;
        }
        let sc = Scenario::new(sc.system.clone(), sc.baths.clone()).unwrap();
        let kern = build_kernels(&sc, &TimeGrid::new(0.05, 2.0).unwrap()).unwrap();
        let tr = volterra_solve(&kern, 0.4, VOLTERRA_HALVING_TOL).unwrap();
        assert!(tr.n.iter().all(|&x| x == 0.4));
    }

    #[test]
    fn linear_in_initial_occupation() {
        let sc = two_bath(F, B, F);
        let kern = build_kernels(&sc, &TimeGrid::new(0.01, 2.0).unwrap()).unwrap();
        let s0 = volterra_solve(&kern, 0.0, 1.0).unwrap();
        let s1 = volterra_solve(&kern, 1.0, 1.0).unwrap();
        let sx = volterra_solve(&kern, 0.37, 1.0).unwrap();
        for i in 0..s0.n.len() {
            let affine = 0.37 * (s1.n[i] - s0.n[i]) + s0.n[i];
            assert!((sx.n[i] - affine).abs() < 1e-10);
        }
    }

    #[test]
    fn integrated_kernel_matches_trapezoid_of_samples() {
        // away from the origin K' = W
        let sc = two_bath(B, F, B);
        let kern = build_kernels(&sc, &TimeGrid::new(0.002, 1.0).unwrap()).unwrap();
        for i in [100usize, 250, 400] {
            let fd = (kern.k_int[i + 1] - kern.k_int[i - 1]) / (2.0 * kern.dt);
            assert!(
                (fd - kern.w[i]).abs() < 1e-4 * kern.w[i].abs().max(1.0),
                "{fd} {}",
                kern.w[i]
            );
            let gd =
                (kern.g_int[i + 1] - 2.0 * kern.g_int[i] + kern.g_int[i - 1]) / kern.dt.powi(2);
            assert!(
                (gd - kern.w_plus[i]).abs() < 1e-3 * kern.w_plus[i].abs().max(1.0),
                "{gd} {}",
                kern.w_plus[i]
            );
        }
    }

    #[test]
    fn even_in_lag() {
        let sc = two_bath(F, F, F);
        let kern = build_kernels(&sc, &TimeGrid::new(0.1, 1.0).unwrap()).unwrap();
        assert_eq!(kern.w_at(0.3), kern.w_at(-0.3));
        assert!(kern.w[0].is_infinite());
    }
}

//! Bath occupations and the bath integrals I_lambda(t), I_lambda(inf).
//!
//! I_lambda(t) is split as
//!   I(inf) + sum_kl E_k conj(E_l) G_kl + 2 Re sum_k E_k C_k(t),   E_k = exp(s_k t),
//! where G is a time-independent Gram matrix over the real axis and C_k(t) is a
//! one-sided Fourier integral evaluated on a ray in the first quadrant plus the
//! residues swept over by the rotation.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernels::{exp_flushed, Kernels};
use crate::polyroots::RootData;
use crate::quad::{breakpoints, integrate, integrate_semi_infinite, Tolerance};
use crate::scenario::Scenario;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Occupation 1/(exp(w/T) - eps).
pub fn bath_occ(w: f64, temperature: f64, eps: f64) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(Error::Domain(format!("occupation needs w >= 0, got {w}")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    if w == 0.0 {
        if eps < 0.0 {
            return Ok(0.5);
        }
        return Err(Error::Domain(
            "Bose occupation has a pole at w = 0; use the product w n(w)".into(),
        ));
    }
    let x = w / temperature;
    if x > 700.0 {
        return Ok(0.0);
    }
    Ok(if eps > 0.0 {
        1.0 / x.exp_m1()
    } else {
        1.0 / (x.exp() + 1.0)
    })
}

fn expm1_c(z: C64) -> C64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    C64::new(z.re.exp_m1() * c - 2.0 * half * half, z.re.exp() * s)
}

/// w n(w) continued to Re z >= 0; regular at z = 0 for Bose (limit T).
pub fn w_occ_c(z: C64, temperature: f64, eps: f64) -> C64 {
    if temperature == 0.0 {
        return ZERO;
    }
    let x = z / temperature;
    if x.re > 700.0 {
        return ZERO;
    }
    if eps > 0.0 {
        if x.norm() < 1e-300 {
            return C64::new(temperature, 0.0);
        }
        if x.re > 1.0 {
            let q = (-x).exp();
            z * q / (1.0 - q)
        } else {
            z / expm1_c(x)
        }
    } else if x.re > 1.0 {
        let q = (-x).exp();
        z * q / (1.0 + q)
    } else {
        z / (x.exp() + 1.0)
    }
}

pub fn w_occ(w: f64, temperature: f64, eps: f64) -> f64 {
    w_occ_c(C64::new(w, 0.0), temperature, eps).re
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub w_max: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn default_for(sc: &Scenario) -> Self {
        let gmax = sc.baths.iter().fold(0.0f64, |m, b| m.max(b.gamma));
        let tmax = sc.baths.iter().fold(0.0f64, |m, b| m.max(b.temperature));
        QuadratureSpec {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            w_max: (20.0 * gmax).max(50.0 * sc.omega).max(50.0 * tmax),
            max_subdivisions: 100_000,
        }
    }

    pub fn validate(&self, sc: &Scenario) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-3) {
            return Err(Error::Invalid(format!(
                "rel_tol {} outside (0, 1e-3]",
                self.rel_tol
            )));
        }
        let floor = sc
            .baths
            .iter()
            .fold(sc.omega, |m, b| m.max(b.gamma).max(b.temperature));
        if !(self.w_max > floor) {
            return Err(Error::Invalid(format!(
                "w_max {} must exceed every gamma, T and omega ({floor})",
                self.w_max
            )));
        }
        Ok(())
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance {
            rel: self.rel_tol,
            abs: self.abs_tol,
            max_subdivisions: self.max_subdivisions,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct BathParams {
    /// alpha gamma^2 / pi
    pref: f64,
    gamma: f64,
    temperature: f64,
    eps: f64,
}

impl BathParams {
    /// (f n, f (1 + eps n)) with f = pref z/(gamma^2+z^2).
    fn weights(&self, z: C64) -> (C64, C64) {
        let den = self.gamma * self.gamma + z * z;
        let f = self.pref * z / den;
        let fnn = self.pref * w_occ_c(z, self.temperature, self.eps) / den;
        (fnn, f + self.eps * fnn)
    }
}

/// I_lambda(t) and dI_lambda/dt per bath.
#[derive(Clone, Debug)]
pub struct BathValues {
    pub i: Vec<f64>,
    pub di_dt: Vec<f64>,
    pub error: f64,
}

#[derive(Clone, Debug)]
pub struct BathIntegrals {
    pub spec: QuadratureSpec,
    roots: Vec<C64>,
    residues: Vec<C64>,
    pk: Vec<C64>,
    m_coef: Vec<C64>,
    n_coef: Vec<C64>,
    gammas: Vec<f64>,
    omega: f64,
    baths: Vec<BathParams>,
    /// I_lambda(inf)
    pub i_inf: Vec<f64>,
    /// packed upper triangle per bath
    gram: Vec<Vec<C64>>,
    pub static_error: f64,
    theta: f64,
    enclosed: Vec<usize>,
    ray_scale: f64,
    ray_breaks: Vec<f64>,
    decoupled: bool,
}

fn tri_index(k: usize, l: usize, n: usize) -> usize {
    // k <= l
    k * n - k * (k + 1) / 2 + l
}

impl BathIntegrals {
    pub fn new(
        roots: &RootData,
        sc: &Scenario,
        kernels: &Kernels,
        spec: QuadratureSpec,
    ) -> Result<Self> {
        let decoupled = sc.g0 == 0.0;
        if !decoupled {
            roots.require_stable()?;
        }
        let (m_coef, n_coef) = kernels.mn_coefficients();
        let baths: Vec<BathParams> = sc
            .baths
            .iter()
            .map(|b| BathParams {
                pref: b.alpha * b.gamma * b.gamma / PI,
                gamma: b.gamma,
                temperature: b.temperature,
                eps: b.statistics.sign(),
            })
            .collect();
        let mut me = BathIntegrals {
            spec,
            roots: roots.roots.clone(),
            residues: roots.reduced_residues.clone(),
            pk: kernels.pk.clone(),
            m_coef: m_coef.to_vec(),
            n_coef: n_coef.to_vec(),
            gammas: kernels.gammas.clone(),
            omega: sc.omega,
            baths,
            i_inf: Vec::new(),
            gram: Vec::new(),
            static_error: 0.0,
            theta: 0.0,
            enclosed: Vec::new(),
            ray_scale: 1.0,
            ray_breaks: Vec::new(),
            decoupled,
        };
        if decoupled {
            let nr = me.roots.len();
            me.i_inf = vec![0.0; me.baths.len()];
            me.gram = vec![vec![ZERO; nr * (nr + 1) / 2]; me.baths.len()];
        } else {
            me.build_static()?;
            me.build_ray();
        }
        Ok(me)
    }

    pub fn for_scenario(sc: &Scenario, spec: QuadratureSpec) -> Result<(RootData, Kernels, Self)> {
        let roots = crate::polyroots::roots_for(sc)?;
        let kernels = Kernels::new(&roots, sc);
        let bi = BathIntegrals::new(&roots, sc, &kernels, spec)?;
        Ok((roots, kernels, bi))
    }

    pub fn n_baths(&self) -> usize {
        self.baths.len()
    }

    /// Characteristic frequencies where the real-axis integrands have structure.
    fn real_axis_breaks(&self) -> Vec<f64> {
        let mut v = vec![self.omega];
        for r in &self.roots {
            let c = -r.im;
            let wdt = r.re.abs();
            if c > 0.0 {
                for m in [-8.0, -2.0, -0.5, 0.0, 0.5, 2.0, 8.0] {
                    v.push(c + m * wdt);
                }
            }
        }
        for b in &self.baths {
            v.push(b.gamma);
            if b.temperature > 0.0 {
                v.push(b.temperature);
                v.push(10.0 * b.temperature);
            }
        }
        v
    }

    /// Real-axis pieces at frequency w: (m0, n0, xi-free root terms 1/(s_k + i w)).
    fn static_pieces(&self, w: f64, inv: &mut [C64]) -> (C64, C64) {
        let s0 = C64::new(0.0, -w);
        let mut xi0 = C64::new(1.0, 0.0);
        for (k, &s) in self.roots.iter().enumerate() {
            xi0 /= s0 - s;
            inv[k] = 1.0 / (s - s0);
        }
        let pg = self
            .gammas
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, &g| acc * (g - I * w));
        (-xi0 * (w + self.omega) * pg, xi0 * (w - self.omega) * pg)
    }

    fn build_static(&mut self) -> Result<()> {
        let nr = self.roots.len();
        let ntri = nr * (nr + 1) / 2;
        let per = 1 + ntri;
        let dim = per * self.baths.len();
        let integrand = |w: f64, out: &mut [C64]| {
            let mut inv = vec![ZERO; nr];
            let (m0, n0) = self.static_pieces(w, &mut inv);
            let mk: Vec<C64> = (0..nr).map(|k| -self.m_coef[k] * inv[k]).collect();
            let nk: Vec<C64> = (0..nr).map(|k| self.n_coef[k] * inv[k]).collect();
            for (l, b) in self.baths.iter().enumerate() {
                let (fnn, fnb) = b.weights(C64::new(w, 0.0));
                let (fnn, fnb) = (fnn.re, fnb.re);
                let base = l * per;
                out[base] = C64::new(fnn * m0.norm_sqr() + fnb * n0.norm_sqr(), 0.0);
                for k in 0..nr {
                    for q in k..nr {
                        out[base + 1 + tri_index(k, q, nr)] =
                            fnn * mk[k] * mk[q].conj() + fnb * nk[k] * nk[q].conj();
                    }
                }
            }
        };
        let tol = self.spec.tolerance();
        let pts = breakpoints(0.0, self.spec.w_max, self.real_axis_breaks());
        let head = integrate(&integrand, dim, &pts, &tol)?;
        let tail =
            integrate_semi_infinite(&integrand, dim, self.spec.w_max, self.spec.w_max, &[], &tol)?;
        self.static_error = head.error + tail.error;
        self.i_inf.clear();
        self.gram.clear();
        for l in 0..self.baths.len() {
            let base = l * per;
            self.i_inf.push(head.value[base].re + tail.value[base].re);
            self.gram.push(
                (0..ntri)
                    .map(|j| head.value[base + 1 + j] + tail.value[base + 1 + j])
                    .collect(),
            );
        }
        Ok(())
    }

    fn build_ray(&mut self) {
        // poles of the continued conj(xi_0) at p = -i s for Im s > 0
        let mut angles = Vec::new();
        for &s in &self.roots {
            if s.im > 0.0 {
                let p = -I * s;
                angles.push(p.arg());
            }
        }
        let mut best = (0.25 * PI, -1.0);
        for j in 0..=64 {
            let th = PI * (0.15 + 0.2 * j as f64 / 64.0);
            let d = angles
                .iter()
                .fold(f64::INFINITY, |m, a| m.min((a - th).abs()));
            if d > best.1 {
                best = (th, d);
            }
        }
        self.theta = best.0;
        self.enclosed = self
            .roots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.im > 0.0 && (-I * **s).arg() < self.theta)
            .map(|(i, _)| i)
            .collect();
        let mut scale = self.omega;
        let mut br = vec![self.omega];
        for &s in &self.roots {
            scale = scale.max(s.norm());
            br.push(s.norm());
        }
        for b in &self.baths {
            scale = scale.max(b.gamma);
            br.push(b.gamma);
            if b.temperature > 0.0 {
                br.push(PI * b.temperature);
                br.push(2.0 * PI * b.temperature);
            }
        }
        self.ray_scale = scale;
        self.ray_breaks = br;
    }

    /// Continued conj(M_0), conj(N_0) kernels at complex z.
    fn conj_heads(&self, z: C64) -> (C64, C64) {
        let iz = I * z;
        let mut den = C64::new(1.0, 0.0);
        for &s in &self.roots {
            den *= iz - s;
        }
        let pg = self
            .gammas
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, &g| acc * (g + iz));
        let r = pg / den;
        (-(z + self.omega) * r, (z - self.omega) * r)
    }

    /// C_{lambda k}(t) and C'_{lambda k}(t), layout [lambda * N0 + k].
    fn cross_terms(&self, t: f64) -> Result<(Vec<C64>, Vec<C64>, f64)> {
        let nr = self.roots.len();
        let nb = self.baths.len();
        let half = nb * nr;
        let dir = C64::from_polar(1.0, self.theta);
        let integrand = |r: f64, out: &mut [C64]| {
            let z = r * dir;
            let phase = exp_flushed(I * z * t) * dir;
            let (m0c, n0c) = self.conj_heads(z);
            let iz = I * z;
            for (l, b) in self.baths.iter().enumerate() {
                let (fnn, fnb) = b.weights(z);
                let a = fnn * m0c * phase;
                let c = fnb * n0c * phase;
                for k in 0..nr {
                    let inv = 1.0 / (self.roots[k] + iz);
                    let h = (-a * self.m_coef[k] + c * self.n_coef[k]) * inv;
                    out[l * nr + k] = h;
                    out[half + l * nr + k] = iz * h;
                }
            }
        };
        let scale = 1.0 / (t * self.theta.sin() + 1.0 / self.ray_scale);
        let q = integrate_semi_infinite(
            &integrand,
            2 * half,
            0.0,
            scale,
            &self.ray_breaks,
            &self.spec.tolerance(),
        )?;
        let mut c = q.value[..half].to_vec();
        let mut dc = q.value[half..].to_vec();

        for &i in &self.enclosed {
            let si = self.roots[i];
            let p = -I * si;
            let common = 2.0 * PI * I * exp_flushed(si * t) * (-I * self.residues[i]) * self.pk[i];
            for (l, b) in self.baths.iter().enumerate() {
                let (fnn, fnb) = b.weights(p);
                for k in 0..nr {
                    let inv = 1.0 / (self.roots[k] + si);
                    let mk = -self.m_coef[k] * inv;
                    let nk = self.n_coef[k] * inv;
                    let res =
                        common * (fnn * mk * (-(p + self.omega)) + fnb * nk * (p - self.omega));
                    c[l * nr + k] += res;
                    dc[l * nr + k] += I * p * res;
                }
            }
        }
        Ok((c, dc, q.error))
    }

    /// I_lambda(t) and dI_lambda/dt for every bath.
    pub fn eval(&self, t: f64) -> Result<BathValues> {
        let nb = self.baths.len();
        if t == 0.0 || self.decoupled {
            // M(w,0) = N(w,0) = 0 identically; all prefactors vanish when decoupled
            return Ok(BathValues {
                i: vec![0.0; nb],
                di_dt: vec![0.0; nb],
                error: 0.0,
            });
        }
        let nr = self.roots.len();
        let e: Vec<C64> = self.roots.iter().map(|&s| exp_flushed(s * t)).collect();
        let (c, dc, err) = self.cross_terms(t)?;
        let mut i_out = Vec::with_capacity(nb);
        let mut d_out = Vec::with_capacity(nb);
        for l in 0..nb {
            let g = &self.gram[l];
            let mut val = self.i_inf[l];
            let mut der = 0.0;
            for k in 0..nr {
                let gkk = g[tri_index(k, k, nr)].re;
                let ek2 = e[k].norm_sqr();
                val += ek2 * gkk;
                der += 2.0 * self.roots[k].re * ek2 * gkk;
                for q in k + 1..nr {
                    let term = e[k] * e[q].conj() * g[tri_index(k, q, nr)];
                    val += 2.0 * term.re;
                    der += 2.0 * ((self.roots[k] + self.roots[q].conj()) * term).re;
                }
                let x = e[k] * c[l * nr + k];
                val += 2.0 * x.re;
                der += 2.0 * (e[k] * (self.roots[k] * c[l * nr + k] + dc[l * nr + k])).re;
            }
            i_out.push(val);
            d_out.push(der);
        }
        Ok(BathValues {
            i: i_out,
            di_dt: d_out,
            error: err + self.static_error,
        })
    }

    /// Direct real-axis quadrature of the defining integral; slow, used for cross-checks.
    /// Returns (I, dI/dt, error estimate). Beyond 64 w_max only the non-oscillating part of
    /// |M|^2, |N|^2 is integrated; the dropped e^{iwt} cross term is bounded and added to the error.
    pub fn eval_direct(&self, lambda: usize, t: f64) -> Result<(f64, f64, f64)> {
        if self.decoupled {
            return Ok((0.0, 0.0, 0.0));
        }
        let nr = self.roots.len();
        let b = self.baths[lambda];
        let ek: Vec<C64> = self.roots.iter().map(|&s| exp_flushed(s * t)).collect();
        let pieces = |w: f64| {
            let mut inv = vec![ZERO; nr];
            let (m0, n0) = self.static_pieces(w, &mut inv);
            let mut rm = ZERO;
            let mut rn = ZERO;
            let mut drm = ZERO;
            let mut drn = ZERO;
            for k in 0..nr {
                let tm = -self.m_coef[k] * inv[k] * ek[k];
                let tn = self.n_coef[k] * inv[k] * ek[k];
                rm += tm;
                rn += tn;
                drm += tm * self.roots[k];
                drn += tn * self.roots[k];
            }
            let (fnn, fnb) = b.weights(C64::new(w, 0.0));
            (m0, n0, rm, rn, drm, drn, fnn.re, fnb.re)
        };
        let full = |w: f64, out: &mut [C64]| {
            let (m0, n0, rm, rn, drm, drn, fnn, fnb) = pieces(w);
            let e0 = C64::new(0.0, -w * t).exp();
            let m = m0 * e0 + rm;
            let n = n0 * e0 + rn;
            let dm = -I * w * m0 * e0 + drm;
            let dn = -I * w * n0 * e0 + drn;
            out[0] = C64::new(fnn * m.norm_sqr() + fnb * n.norm_sqr(), 0.0);
            out[1] = C64::new(
                2.0 * (fnn * (m.conj() * dm).re + fnb * (n.conj() * dn).re),
                0.0,
            );
        };
        let smooth = |w: f64, out: &mut [C64]| {
            let (m0, n0, rm, rn, drm, drn, fnn, fnb) = pieces(w);
            out[0] = C64::new(
                fnn * (m0.norm_sqr() + rm.norm_sqr()) + fnb * (n0.norm_sqr() + rn.norm_sqr()),
                0.0,
            );
            out[1] = C64::new(
                2.0 * (fnn * (rm.conj() * drm).re + fnb * (rn.conj() * drn).re),
                0.0,
            );
        };
        let w_hi = 64.0 * self.spec.w_max;
        let mut extra = self.real_axis_breaks();
        extra.push(self.spec.w_max);
        if t > 0.0 {
            let panels = (w_hi * t / PI).ceil() as usize;
            extra.extend((1..panels).map(|j| j as f64 * w_hi / panels as f64));
        }
        let tol = self.spec.tolerance();
        let head = integrate(&full, 2, &breakpoints(0.0, w_hi, extra), &tol)?;
        let tail = integrate_semi_infinite(&smooth, 2, w_hi, w_hi, &[], &tol)?;
        // |cross term| <= 2 f |m0||Rm| + ..., integrated by parts once
        let (m0, n0, rm, rn, drm, drn, fnn, fnb) = pieces(w_hi);
        let amp = 2.0 * (fnn.abs() * m0.norm() * rm.norm() + fnb.abs() * n0.norm() * rn.norm());
        let damp = 2.0
            * (fnn.abs() * m0.norm() * (drm.norm() + w_hi * rm.norm())
                + fnb.abs() * n0.norm() * (drn.norm() + w_hi * rn.norm()));
        let bound = if t > 0.0 {
            2.0 * amp.max(damp) / t
        } else {
            0.0
        };
        Ok((
            head.value[0].re + tail.value[0].re,
            head.value[1].re + tail.value[1].re,
            head.error + tail.error + bound,
        ))
    }
}

pub fn i_lambda_inf(sc: &Scenario, lambda: usize, spec: QuadratureSpec) -> Result<f64> {
    let (_, _, bi) = BathIntegrals::for_scenario(sc, spec)?;
    Ok(bi.i_inf[lambda])
}

pub fn i_lambda_t(
    sc: &Scenario,
    lambda: usize,
    t: f64,
    spec: QuadratureSpec,
) -> Result<(f64, f64)> {
    let (_, _, bi) = BathIntegrals::for_scenario(sc, spec)?;
    let v = bi.eval(t)?;
    Ok((v.i[lambda], v.di_dt[lambda]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupation_values() {
        let e = std::f64::consts::E;
        assert!((bath_occ(1.0, 1.0, -1.0).unwrap() - 1.0 / (e + 1.0)).abs() < 1e-15);
        assert!((bath_occ(1.0, 1.0, 1.0).unwrap() - 1.0 / (e - 1.0)).abs() < 1e-15);
        assert_eq!(bath_occ(0.0, 1.0, -1.0).unwrap(), 0.5);
        assert_eq!(bath_occ(3.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(bath_occ(0.0, 1.0, 1.0).is_err());
        assert_eq!(bath_occ(1e4, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn bose_product_limit() {
        let t = 0.7;
        assert_eq!(w_occ(0.0, t, 1.0), t);
        let w = 1e-12;
        assert!((w_occ(w, t, 1.0) - t).abs() < 1e-12);
        for &w in &[1e-6, 0.3, 2.0, 30.0] {
            let direct = w * bath_occ(w, t, 1.0).unwrap();
            assert!((w_occ(w, t, 1.0) - direct).abs() <= 1e-14 * direct.max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn complex_occupation_matches_series_off_axis() {
        // Bose: x/(e^x - 1) near 0 is 1 - x/2 + x^2/12
        let tmp = 1.0;
        let z = C64::new(1e-4, 2e-4);
        let v = w_occ_c(z, tmp, 1.0);
        let s = 1.0 - z / 2.0 + z * z / 12.0;
        assert!((v - s).norm() < 1e-12);
        // Fermi continuation equals the formula directly
        let z = C64::new(0.8, 0.5);
        let v = w_occ_c(z, 0.5, -1.0);
        let d = z / ((z / 0.5).exp() + 1.0);
        assert!((v - d).norm() < 1e-14);
    }
}

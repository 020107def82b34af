//! Dynamic kernels A(t), B(t), B_lambda(t) and the frequency-resolved M(w,t), N(w,t).

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::polyroots::RootData;
use crate::scenario::Scenario;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const UNDERFLOW: f64 = -700.0;

/// Kernel values at time t. When `shift` is nonzero every stored value is
/// multiplied by exp(-shift * t); ratios such as the friction are unaffected.
#[derive(Clone, Debug)]
pub struct KernelSample {
    pub t: f64,
    pub shift: f64,
    pub a: C64,
    pub b: C64,
    pub b_components: Vec<C64>,
    pub da_dt: C64,
    pub db_dt: C64,
    pub db_components: Vec<C64>,
}

#[derive(Clone, Copy, Debug)]
pub struct WKernelSample {
    pub w: f64,
    pub t: f64,
    pub m: C64,
    pub n: C64,
    pub dm_dt: C64,
    pub dn_dt: C64,
}

/// Per-root coefficients so that every kernel is sum_k c_k exp(s_k t).
#[derive(Clone, Debug)]
pub struct Kernels {
    pub roots: Vec<C64>,
    pub residues: Vec<C64>,
    pub omega: f64,
    pub gammas: Vec<f64>,
    /// prod_mu (s_k + gamma_mu)
    pub pk: Vec<C64>,
    a_coef: Vec<C64>,
    a2_coef: Vec<C64>,
    b_coef: Vec<C64>,
    /// [lambda][k]
    bl_coef: Vec<Vec<C64>>,
    /// xi'_k (i s_k + omega) prod(s_k + gamma), the M numerator without the -1
    m_coef: Vec<C64>,
    /// xi'_k (i s_k - omega) prod(s_k + gamma)
    n_coef: Vec<C64>,
}

pub fn exp_flushed(z: C64) -> C64 {
    if z.re < UNDERFLOW {
        C64::new(0.0, 0.0)
    } else {
        z.exp()
    }
}

impl Kernels {
    pub fn new(roots: &RootData, sc: &Scenario) -> Self {
        let omega = sc.omega;
        let big = sc.big_omega;
        let gammas: Vec<f64> = sc.baths.iter().map(|b| b.gamma).collect();
        let alphas: Vec<f64> = sc.baths.iter().map(|b| b.alpha).collect();
        let n = gammas.len();
        let nr = roots.roots.len();

        let mut pk = Vec::with_capacity(nr);
        let mut a_coef = Vec::with_capacity(nr);
        let mut a2_coef = Vec::with_capacity(nr);
        let mut b_coef = Vec::with_capacity(nr);
        let mut bl_coef = vec![Vec::with_capacity(nr); n];
        let mut m_coef = Vec::with_capacity(nr);
        let mut n_coef = Vec::with_capacity(nr);

        for (k, &s) in roots.roots.iter().enumerate() {
            let xi = roots.reduced_residues[k];
            let p: C64 = gammas
                .iter()
                .fold(C64::new(1.0, 0.0), |acc, &g| acc * (s + g));
            let sum: C64 = (0..n)
                .map(|l| alphas[l] * gammas[l] / (s + gammas[l]))
                .sum();
            let brace_a = 2.0 * s - I * (big + omega) - 2.0 * I * s * sum;
            let brace_b = (big - omega) + 2.0 * s * sum;
            a_coef.push(0.5 * xi * brace_a * p);
            b_coef.push(0.5 * I * xi * brace_b * p);

            let rot = (s - I * omega) / (s + I * omega);
            let mut a2 = C64::new(0.0, 0.0);
            for l in 0..n {
                let q: C64 = gammas
                    .iter()
                    .enumerate()
                    .filter(|&(mu, _)| mu != l)
                    .fold(C64::new(1.0, 0.0), |acc, (_, &g)| acc * (s + g));
                let w = alphas[l] * gammas[l] * gammas[l];
                bl_coef[l].push(-I * w * xi * q);
                a2 += w * q;
            }
            a2_coef.push(I * xi * rot * a2);
            m_coef.push(xi * (I * s + omega) * p);
            n_coef.push(xi * (I * s - omega) * p);
            pk.push(p);
        }

        Kernels {
            roots: roots.roots.clone(),
            residues: roots.reduced_residues.clone(),
            omega,
            gammas,
            pk,
            a_coef,
            a2_coef,
            b_coef,
            bl_coef,
            m_coef,
            n_coef,
        }
    }

    pub fn n_roots(&self) -> usize {
        self.roots.len()
    }

    /// exp((s_k - shift) t) with underflow flush.
    pub fn exponentials(&self, t: f64, shift: f64) -> Vec<C64> {
        self.roots
            .iter()
            .map(|&s| exp_flushed((s - shift) * t))
            .collect()
    }

    pub fn eval_ab(&self, t: f64) -> KernelSample {
        self.eval_ab_shifted(t, 0.0)
    }

    pub fn eval_ab_shifted(&self, t: f64, shift: f64) -> KernelSample {
        let e = self.exponentials(t, shift);
        let mut a = C64::new(0.0, 0.0);
        let mut b = C64::new(0.0, 0.0);
        let mut da = C64::new(0.0, 0.0);
        let mut db = C64::new(0.0, 0.0);
        for k in 0..self.roots.len() {
            let ta = self.a_coef[k] * e[k];
            let tb = self.b_coef[k] * e[k];
            a += ta;
            b += tb;
            da += ta * self.roots[k];
            db += tb * self.roots[k];
        }
        let mut bc = Vec::with_capacity(self.bl_coef.len());
        let mut dbc = Vec::with_capacity(self.bl_coef.len());
        for coef in &self.bl_coef {
            let mut v = C64::new(0.0, 0.0);
            let mut dv = C64::new(0.0, 0.0);
            for k in 0..self.roots.len() {
                let term = coef[k] * e[k];
                v += term;
                dv += term * self.roots[k];
            }
            bc.push(v);
            dbc.push(dv);
        }
        KernelSample {
            t,
            shift,
            a,
            b,
            b_components: bc,
            da_dt: da,
            db_dt: db,
            db_components: dbc,
        }
    }

    /// A(t) from the alpha-weighted second printed form; self-check only.
    pub fn a_second_form(&self, t: f64) -> C64 {
        let e = self.exponentials(t, 0.0);
        self.a2_coef.iter().zip(&e).map(|(c, x)| c * x).sum()
    }

    /// Per-root constants of the M and N kernels: (m_k, n_k) with
    /// M = -xi_0 e^{-iwt}(w+omega)prod(gamma-iw) - sum_k m_k e^{s_k t}/(s_k+iw), N similarly.
    pub fn mn_coefficients(&self) -> (&[C64], &[C64]) {
        (&self.m_coef, &self.n_coef)
    }

    /// M and N via the literal residue sum over the full node set.
    pub fn eval_mn(&self, roots: &RootData, w: f64, t: f64) -> Result<WKernelSample> {
        let xi = roots.full_residues(w)?;
        let mut nodes = Vec::with_capacity(self.roots.len() + 1);
        nodes.push(C64::new(0.0, -w));
        nodes.extend(self.roots.iter().copied());
        let mut m = C64::new(0.0, 0.0);
        let mut n = C64::new(0.0, 0.0);
        let mut dm = C64::new(0.0, 0.0);
        let mut dn = C64::new(0.0, 0.0);
        for (k, &s) in nodes.iter().enumerate() {
            let p: C64 = self
                .gammas
                .iter()
                .fold(C64::new(1.0, 0.0), |acc, &g| acc * (s + g));
            let e = exp_flushed(s * t);
            let tm = -xi[k] * e * (I * s + self.omega) * p;
            let tn = xi[k] * e * (I * s - self.omega) * p;
            m += tm;
            n += tn;
            dm += tm * s;
            dn += tn * s;
        }
        Ok(WKernelSample {
            w,
            t,
            m,
            n,
            dm_dt: dm,
            dn_dt: dn,
        })
    }
}

/// J_lambda = Re(B_lambda conj(B)); sums to |B|^2.
pub fn j_decomposition(ks: &KernelSample) -> Vec<f64> {
    ks.b_components
        .iter()
        .map(|bl| (bl * ks.b.conj()).re)
        .collect()
}

/// d J_lambda / dt.
pub fn j_derivative(ks: &KernelSample) -> Vec<f64> {
    ks.b_components
        .iter()
        .zip(&ks.db_components)
        .map(|(bl, dbl)| (dbl * ks.b.conj() + bl * ks.db_dt.conj()).re)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyroots::roots_for;
    use crate::scenario::{BathSpec, FrequencyMode, Statistics, SystemSpec};

    fn sec3() -> Scenario {
        Scenario::new(
            SystemSpec {
                statistics: Statistics::Fermi,
                frequency_mode: FrequencyMode::Renormalized,
                frequency_value: 1.0,
                n0: 0.0,
            },
            vec![
                BathSpec {
                    statistics: Statistics::Fermi,
                    alpha: 0.1,
                    gamma: 10.0,
                    temperature: 1.0,
                },
                BathSpec {
                    statistics: Statistics::Fermi,
                    alpha: 0.05,
                    gamma: 15.0,
                    temperature: 0.1,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn initial_values() {
        let sc = sec3();
        let r = roots_for(&sc).unwrap();
        let k = Kernels::new(&r, &sc);
        let s = k.eval_ab(0.0);
        assert!((s.a - 1.0).norm() < 1e-10);
        assert!(s.b.norm() < 1e-10);
        // a(t) starts rotating at the bare frequency
        assert!((s.da_dt - C64::new(0.0, -sc.omega)).norm() < 1e-9);
    }

    #[test]
    fn decays_by_fifty() {
        let sc = sec3();
        let r = roots_for(&sc).unwrap();
        let s = Kernels::new(&r, &sc).eval_ab(50.0);
        assert!(s.a.norm() < 1e-6 && s.b.norm() < 1e-6);
    }

    #[test]
    fn second_form_agrees() {
        let sc = sec3();
        let r = roots_for(&sc).unwrap();
        let k = Kernels::new(&r, &sc);
        for &t in &[0.0, 0.3, 1.0, 4.0, 12.0] {
            let a = k.eval_ab(t).a;
            let a2 = k.a_second_form(t);
            assert!((a - a2).norm() < 1e-10, "t={t}: {a} vs {a2}");
        }
    }

    #[test]
    fn components_sum_to_b() {
        let sc = sec3();
        let r = roots_for(&sc).unwrap();
        let k = Kernels::new(&r, &sc);
        for &t in &[0.1, 1.0, 3.0] {
            let s = k.eval_ab(t);
            let sum: C64 = s.b_components.iter().sum();
            assert!((sum - s.b).norm() <= 1e-10 * s.b.norm());
            let j: f64 = j_decomposition(&s).iter().sum();
            assert!((j - s.b.norm_sqr()).abs() <= 1e-14);
        }
    }

    #[test]
    fn mn_vanish_at_origin() {
        let sc = sec3();
        let r = roots_for(&sc).unwrap();
        let k = Kernels::new(&r, &sc);
        for &w in &[0.0, 0.5, 1.0, 4.5, 30.0] {
            let s = k.eval_mn(&r, w, 0.0).unwrap();
            assert!(s.m.norm() < 1e-10 && s.n.norm() < 1e-10, "w={w}");
        }
    }

    #[test]
    fn shifted_sample_scales() {
        let sc = sec3();
        let r = roots_for(&sc).unwrap();
        let k = Kernels::new(&r, &sc);
        let t = 7.0;
        let sigma = r.max_re();
        let a = k.eval_ab(t);
        let b = k.eval_ab_shifted(t, sigma);
        let f = (-sigma * t).exp();
        assert!((a.a * f - b.a).norm() < 1e-12 * b.a.norm());
        assert!((a.db_dt * f - b.db_dt).norm() < 1e-12 * b.db_dt.norm());
    }
}

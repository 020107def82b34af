//! Characteristic polynomial of the coupled system, its roots and residue weights.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Clone, Debug, Serialize)]
pub struct CharPoly {
    /// Descending powers, leading coefficient 1.
    pub coefficients: Vec<f64>,
    pub scenario_hash: String,
    omega: f64,
    alphas: Vec<f64>,
    gammas: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RootData {
    pub roots: Vec<C64>,
    /// xi'_k = prod_{i != k} 1/(s_k - s_i)
    pub reduced_residues: Vec<C64>,
    pub min_separation: f64,
    pub threshold: f64,
}

const MAX_ITER: usize = 500;

fn poly_mul_linear(p: &[f64], c: f64) -> Vec<f64> {
    // p * (s + c), descending powers
    let mut out = vec![0.0; p.len() + 1];
    for (i, &a) in p.iter().enumerate() {
        out[i] += a;
        out[i + 1] += a * c;
    }
    out
}

pub fn build_char_poly(sc: &Scenario) -> CharPoly {
    let omega = sc.omega;
    let gammas: Vec<f64> = sc.baths.iter().map(|b| b.gamma).collect();
    let alphas: Vec<f64> = sc.baths.iter().map(|b| b.alpha).collect();
    let n = gammas.len();

    let mut main = vec![1.0, 0.0, omega * omega];
    for &g in &gammas {
        main = poly_mul_linear(&main, g);
    }
    for lam in 0..n {
        let mut q = vec![1.0];
        for (mu, &g) in gammas.iter().enumerate() {
            if mu != lam {
                q = poly_mul_linear(&q, g);
            }
        }
        let c = 2.0 * omega * alphas[lam] * gammas[lam] * gammas[lam];
        let off = main.len() - q.len();
        for (i, &a) in q.iter().enumerate() {
            main[off + i] -= c * a;
        }
    }
    CharPoly {
        coefficients: main,
        scenario_hash: sc.hash(),
        omega,
        alphas,
        gammas,
    }
}

impl CharPoly {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, s: C64) -> C64 {
        self.coefficients
            .iter()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    fn eval_with_derivative(&self, s: C64) -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &c in &self.coefficients {
            dp = dp * s + p;
            p = p * s + c;
        }
        (p, dp)
    }

    /// Value and derivative of the unexpanded product form.
    pub fn eval_factored(&self, s: C64) -> (C64, C64) {
        let n = self.gammas.len();
        let lin: Vec<C64> = self.gammas.iter().map(|&g| s + g).collect();
        let prod_except = |skip: &[usize]| -> C64 {
            lin.iter()
                .enumerate()
                .filter(|(i, _)| !skip.contains(i))
                .fold(C64::new(1.0, 0.0), |acc, (_, &x)| acc * x)
        };
        let q = prod_except(&[]);
        let mut dq = C64::new(0.0, 0.0);
        for mu in 0..n {
            dq += prod_except(&[mu]);
        }
        let w2 = self.omega * self.omega;
        let mut p = (s * s + w2) * q;
        let mut dp = 2.0 * s * q + (s * s + w2) * dq;
        for lam in 0..n {
            let c = 2.0 * self.omega * self.alphas[lam] * self.gammas[lam] * self.gammas[lam];
            if c == 0.0 {
                continue;
            }
            p -= c * prod_except(&[lam]);
            let mut dql = C64::new(0.0, 0.0);
            for nu in 0..n {
                if nu != lam {
                    dql += prod_except(&[lam, nu]);
                }
            }
            dp -= c * dql;
        }
        (p, dp)
    }

    fn coeff_norm(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Aberth simultaneous iteration, factored-form Newton polish, conjugate symmetrization.
pub fn find_roots(poly: &CharPoly) -> Result<RootData> {
    let deg = poly.degree();
    if deg < 1 {
        return Err(Error::Precondition("polynomial degree must be >= 1".into()));
    }
    let radius = 1.0
        + poly.coefficients[1..]
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()));
    let mut z: Vec<C64> = (0..deg)
        .map(|k| {
            C64::from_polar(
                radius,
                2.0 * std::f64::consts::PI * k as f64 / deg as f64 + 0.4,
            )
        })
        .collect();

    let mut converged = false;
    for _ in 0..MAX_ITER {
        let mut max_step = 0.0f64;
        for k in 0..deg {
            let (p, dp) = poly.eval_with_derivative(z[k]);
            if p == C64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let mut sum = C64::new(0.0, 0.0);
            for j in 0..deg {
                if j != k {
                    sum += 1.0 / (z[k] - z[j]);
                }
            }
            let step = ratio / (1.0 - ratio * sum);
            if step.is_finite() {
                z[k] -= step;
                max_step = max_step.max(step.norm());
            }
        }
        if max_step < 1e-13 * radius {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "root iteration hit the cap of {MAX_ITER} sweeps"
        )));
    }

    for r in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = poly.eval_factored(*r);
            let next = *r - p / dp;
            if !next.is_finite() || poly.eval_factored(next).0.norm() >= p.norm() {
                break;
            }
            *r = next;
        }
    }

    let scale = z.iter().fold(0.0f64, |m, r| m.max(r.norm()));
    let threshold = 1e-8 * scale.max(f64::MIN_POSITIVE);
    let roots = symmetrize(z, threshold)?;

    let mut min_sep = f64::INFINITY;
    for i in 0..deg {
        for j in i + 1..deg {
            min_sep = min_sep.min((roots[i] - roots[j]).norm());
        }
    }
    if min_sep <= threshold {
        return Err(Error::DegenerateRoots {
            separation: min_sep,
            threshold,
        });
    }

    let cn = poly.coeff_norm();
    for r in &roots {
        let res = poly.eval(*r).norm() / cn;
        if !(res <= 1e-10) {
            return Err(Error::NonConvergence(format!(
                "residual {res:e} at root {r} exceeds 1e-10"
            )));
        }
    }

    let reduced_residues = reduced_residues(&roots);
    Ok(RootData {
        roots,
        reduced_residues,
        min_separation: min_sep,
        threshold,
    })
}

fn symmetrize(z: Vec<C64>, tol: f64) -> Result<Vec<C64>> {
    let n = z.len();
    let mut used = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if used[i] || z[i].im.abs() <= tol {
            continue;
        }
        if z[i].im < 0.0 {
            continue;
        }
        let partner = (0..n)
            .filter(|&j| !used[j] && j != i && z[j].im < -tol)
            .min_by(|&a, &b| {
                (z[a].conj() - z[i])
                    .norm()
                    .total_cmp(&(z[b].conj() - z[i]).norm())
            })
            .ok_or_else(|| {
                Error::NonConvergence("root set is not closed under conjugation".into())
            })?;
        used[i] = true;
        used[partner] = true;
        let m = 0.5 * (z[i] + z[partner].conj());
        out.push(m);
        out.push(m.conj());
    }
    for i in 0..n {
        if !used[i] && z[i].im.abs() <= tol {
            used[i] = true;
            out.push(C64::new(z[i].re, 0.0));
        }
    }
    if used.iter().any(|u| !u) {
        return Err(Error::NonConvergence("unpaired complex root".into()));
    }
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(out)
}

fn reduced_residues(roots: &[C64]) -> Vec<C64> {
    roots
        .iter()
        .enumerate()
        .map(|(k, &sk)| {
            let prod = roots
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .fold(C64::new(1.0, 0.0), |acc, (_, &si)| acc * (sk - si));
            1.0 / prod
        })
        .collect()
}

impl RootData {
    pub fn max_re(&self) -> f64 {
        self.roots
            .iter()
            .fold(f64::NEG_INFINITY, |m, r| m.max(r.re))
    }

    pub fn require_stable(&self) -> Result<()> {
        let m = self.max_re();
        if m >= 0.0 {
            Err(Error::UnstableRoots { max_re: m })
        } else {
            Ok(())
        }
    }

    /// Residues over the node set {-iw, s_1, ..., s_N0}; index 0 is the -iw node.
    pub fn full_residues(&self, w: f64) -> Result<Vec<C64>> {
        let s0 = C64::new(0.0, -w);
        let mut out = Vec::with_capacity(self.roots.len() + 1);
        let mut xi0 = C64::new(1.0, 0.0);
        for &s in &self.roots {
            let d = s0 - s;
            if d.norm() <= self.threshold {
                return Err(Error::NodeCollision { w });
            }
            xi0 /= d;
        }
        out.push(xi0);
        for (k, &s) in self.roots.iter().enumerate() {
            out.push(self.reduced_residues[k] / (s - s0));
        }
        Ok(out)
    }
}

pub fn roots_for(sc: &Scenario) -> Result<RootData> {
    find_roots(&build_char_poly(sc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{BathSpec, FrequencyMode, Statistics, SystemSpec};

    fn scenario(omega_ren: f64, baths: &[(f64, f64)]) -> Scenario {
        Scenario::new(
            SystemSpec {
                statistics: Statistics::Fermi,
                frequency_mode: FrequencyMode::Renormalized,
                frequency_value: omega_ren,
                n0: 0.0,
            },
            baths
                .iter()
                .map(|&(alpha, gamma)| BathSpec {
                    statistics: Statistics::Fermi,
                    alpha,
                    gamma,
                    temperature: 1.0,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn decoupled_polynomial_and_roots() {
        let sc = scenario(2.0, &[(0.0, 7.0)]);
        let p = build_char_poly(&sc);
        assert_eq!(p.coefficients, vec![1.0, 7.0, 4.0, 28.0]);
        let r = find_roots(&p).unwrap();
        let expect = [C64::new(0.0, 2.0), C64::new(0.0, -2.0), C64::new(-7.0, 0.0)];
        for (a, b) in r.roots.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn single_bath_expansion() {
        let sc = scenario(1.0, &[(0.1, 10.0)]);
        let (w, a, g) = (sc.omega, 0.1, 10.0);
        let p = build_char_poly(&sc);
        let expect = [1.0, g, w * w, g * w * w - 2.0 * w * a * g * g];
        for (x, y) in p.coefficients.iter().zip(expect.iter()) {
            assert!((x - y).abs() <= 1e-13 * y.abs().max(1.0));
        }
    }

    #[test]
    fn value_at_origin() {
        let sc = scenario(1.0, &[(0.1, 10.0), (0.05, 15.0)]);
        let p = build_char_poly(&sc);
        let w = sc.omega;
        let expect = w * w * 150.0 - 2.0 * w * (0.1 * 100.0 * 15.0 + 0.05 * 225.0 * 10.0);
        assert!((p.eval(C64::new(0.0, 0.0)).re - expect).abs() < 1e-10 * expect.abs());
        // equals omega * Omega * prod gamma
        assert!((expect - w * sc.big_omega * 150.0).abs() < 1e-10 * expect.abs());
    }

    #[test]
    fn two_bath_roots_are_stable() {
        let sc = scenario(1.0, &[(0.1, 10.0), (0.05, 15.0)]);
        let p = build_char_poly(&sc);
        let r = find_roots(&p).unwrap();
        assert_eq!(r.roots.len(), 4);
        r.require_stable().unwrap();
        for s in &r.roots {
            assert!(p.eval(*s).norm() / p.coeff_norm() < 1e-10);
            assert!(p.eval_factored(*s).0.norm() < 1e-8 * p.coeff_norm());
        }
    }

    #[test]
    fn full_residue_identity() {
        let sc = scenario(1.0, &[(0.1, 10.0), (0.05, 15.0)]);
        let r = roots_for(&sc).unwrap();
        let w = 1.0;
        let xi = r.full_residues(w).unwrap();
        let mut nodes = vec![C64::new(0.0, -w)];
        nodes.extend(r.roots.iter().copied());
        let n0 = r.roots.len();
        for m in 0..=n0 {
            let s: C64 = xi
                .iter()
                .zip(&nodes)
                .map(|(x, s)| x * s.powu(m as u32))
                .sum();
            let expect = if m == n0 { 1.0 } else { 0.0 };
            let scale: f64 = xi
                .iter()
                .zip(&nodes)
                .map(|(x, s)| (x * s.powu(m as u32)).norm())
                .sum();
            assert!((s - expect).norm() < 1e-10 * scale.max(1.0), "m={m}: {s}");
        }
    }

    #[test]
    fn two_node_residues() {
        let rd = RootData {
            roots: vec![C64::new(-1.0, 0.0)],
            reduced_residues: vec![C64::new(1.0, 0.0)],
            min_separation: f64::INFINITY,
            threshold: 1e-8,
        };
        let xi = rd.full_residues(2.0).unwrap();
        let s0 = C64::new(0.0, -2.0);
        let s1 = C64::new(-1.0, 0.0);
        assert!((xi[0] - 1.0 / (s0 - s1)).norm() < 1e-15);
        assert!((xi[1] - 1.0 / (s1 - s0)).norm() < 1e-15);
    }

    #[test]
    fn collision_is_reported() {
        let rd = RootData {
            roots: vec![C64::new(0.0, -2.0)],
            reduced_residues: vec![C64::new(1.0, 0.0)],
            min_separation: f64::INFINITY,
            threshold: 1e-8,
        };
        assert!(matches!(
            rd.full_residues(2.0),
            Err(Error::NodeCollision { .. })
        ));
    }
}

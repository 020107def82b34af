//! Finite bath: the oscillator plus M modes per bath, solved exactly.
//!
//! With X = b + b^dag and P = i(b^dag - b) for every mode, the Heisenberg equations are linear for
//! either statistics, and the scaled coordinates q_j = X_j / sqrt(w_j) obey q'' = -V q with
//!   V_aa = omega^2, V_ii = w_i^2, V_ai = 2 alpha_i sqrt(omega w_i).
//! Writing a(t) = sum_j u_j b_j + v_j b_j^dag, the occupation is
//!   n(t) = sum_j |u_j|^2 n_j + |v_j|^2 (1 + eps n_j).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::bath::bath_occ;
use crate::error::{Error, Result};
use crate::evolution::{Method, TimeGrid, Trajectory};
use crate::scenario::Scenario;

pub const MAX_DIMENSION: usize = 10_000;
pub const DEFAULT_MODES: usize = 400;

#[derive(Clone, Debug, Serialize)]
pub struct DiscreteBath {
    pub frequencies: Vec<f64>,
    pub couplings: Vec<f64>,
    pub occupations: Vec<f64>,
}

impl DiscreteBath {
    /// Equal-weight placement under gamma^2/(gamma^2 + w^2) on the half line; each mode carries
    /// alpha_i^2 = w_i alpha gamma / (2M), so sum alpha_i^2 / w_i = alpha gamma / 2 exactly.
    pub fn sample(
        alpha: f64,
        gamma: f64,
        temperature: f64,
        eps: f64,
        modes: usize,
    ) -> Result<Self> {
        let m = modes as f64;
        let frequencies: Vec<f64> = (0..modes)
            .map(|i| gamma * (PI * (i as f64 + 0.5) / (2.0 * m)).tan())
            .collect();
        let couplings = frequencies
            .iter()
            .map(|w| (w * alpha * gamma / (2.0 * m)).sqrt())
            .collect();
        let occupations = frequencies
            .iter()
            .map(|&w| bath_occ(w, temperature, eps))
            .collect::<Result<_>>()?;
        Ok(DiscreteBath {
            frequencies,
            couplings,
            occupations,
        })
    }

    /// sum alpha_i^2 / w_i, to compare with the continuum value alpha gamma / 2
    pub fn spectral_sum(&self) -> f64 {
        self.couplings
            .iter()
            .zip(&self.frequencies)
            .map(|(a, w)| a * a / w)
            .sum()
    }
}

pub fn discrete_bath_solve(sc: &Scenario, modes: usize, grid: &TimeGrid) -> Result<Trajectory> {
    if !sc.is_pure() {
        return Err(Error::Precondition(
            "discrete bath needs every bath to share the system statistics".into(),
        ));
    }
    let eps = sc.eps_a();
    let active: Vec<_> = sc.baths.iter().filter(|b| b.alpha > 0.0).collect();
    let dim = 1 + modes * active.len();
    if dim > MAX_DIMENSION {
        return Err(Error::ResourceLimit(format!(
            "matrix dimension {dim} exceeds {MAX_DIMENSION}"
        )));
    }
    let times = grid.times();
    let n0 = sc.system.n0;
    if active.is_empty() {
        return Ok(Trajectory {
            n: vec![n0; times.len()],
            flags: vec![false; times.len()],
            times,
            method: Method::DiscreteBath,
            scenario_hash: sc.hash(),
        });
    }

    let omega = sc.omega;
    let mut freq = vec![omega];
    let mut occ = vec![n0];
    let mut coup = vec![0.0];
    for b in &active {
        let db = DiscreteBath::sample(b.alpha, b.gamma, b.temperature, eps, modes)?;
        freq.extend(&db.frequencies);
        occ.extend(&db.occupations);
        coup.extend(&db.couplings);
    }
    let mut v = DMatrix::<f64>::zeros(dim, dim);
    v[(0, 0)] = omega * omega;
    for j in 1..dim {
        v[(j, j)] = freq[j] * freq[j];
        let c = 2.0 * coup[j] * (omega * freq[j]).sqrt();
        v[(0, j)] = c;
        v[(j, 0)] = c;
    }
    let eig = SymmetricEigen::new(v);
    let lmin = eig.eigenvalues.min();
    if !(lmin > 0.0) {
        return Err(Error::UnstableRoots {
            max_re: (-lmin).sqrt(),
        });
    }
    let freqs: Vec<f64> = eig.eigenvalues.iter().map(|l| l.sqrt()).collect();
    let q = eig.eigenvectors;
    let qa: Vec<f64> = (0..dim).map(|k| q[(0, k)]).collect();

    const CHUNK: usize = 64;
    let n: Vec<f64> = times
        .par_chunks(CHUNK)
        .flat_map_iter(|ts| {
            // columns per time: cos, sin / W, -W sin, each weighted by the system row
            let mut rhs = DMatrix::<f64>::zeros(dim, 3 * ts.len());
            for (c, &t) in ts.iter().enumerate() {
                for k in 0..dim {
                    let (s, co) = (freqs[k] * t).sin_cos();
                    rhs[(k, 3 * c)] = qa[k] * co;
                    rhs[(k, 3 * c + 1)] = qa[k] * s / freqs[k];
                    rhs[(k, 3 * c + 2)] = -qa[k] * freqs[k] * s;
                }
            }
            let rows = &q * rhs;
            let sw = omega.sqrt();
            let out: Vec<f64> = (0..ts.len())
                .map(|c| {
                    let mut acc_u = 0.0;
                    let mut acc_v = 0.0;
                    for j in 0..dim {
                        let (cj, sj, vj) =
                            (rows[(j, 3 * c)], rows[(j, 3 * c + 1)], rows[(j, 3 * c + 2)]);
                        let swj = freq[j].sqrt();
                        let alpha = C64::new(0.5 * sw * cj / swj, 0.5 * vj / (sw * swj));
                        let beta = C64::new(0.5 * sw * swj * sj, 0.5 * cj * swj / sw);
                        let u = alpha - C64::i() * beta;
                        let vv = alpha + C64::i() * beta;
                        acc_u += u.norm_sqr() * occ[j];
                        acc_v += vv.norm_sqr() * (1.0 + eps * occ[j]);
                    }
                    acc_u + acc_v
                })
                .collect();
            out
        })
        .collect();
    let mut n = n;
    n[0] = n0;
    let flags = n
        .iter()
        .map(|&x| !x.is_finite() || x < -1e-6 || (eps < 0.0 && x > 1.0 + 1e-6))
        .collect();
    Ok(Trajectory {
        times,
        n,
        method: Method::DiscreteBath,
        scenario_hash: sc.hash(),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::two_bath;
    use crate::scenario::Statistics::{Bose as B, Fermi as F};

    #[test]
    fn spectral_sum_is_exact() {
        let db = DiscreteBath::sample(0.1, 10.0, 1.0, 1.0, 200).unwrap();
        assert!((db.spectral_sum() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_mixed() {
        let sc = two_bath(F, B, F);
        let r = discrete_bath_solve(&sc, 10, &TimeGrid::new(0.1, 1.0).unwrap());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn resource_limit() {
        let sc = two_bath(B, B, B);
        let r = discrete_bath_solve(&sc, 6000, &TimeGrid::new(0.1, 1.0).unwrap());
        assert!(matches!(r, Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn starts_at_n0_and_stays_physical() {
        let mut sc = two_bath(F, F, F);
        sc = sc.with_n0(0.7).unwrap();
        let tr = discrete_bath_solve(&sc, 100, &TimeGrid::new(0.05, 5.0).unwrap()).unwrap();
        assert_eq!(tr.n[0], 0.7);
        assert!((tr.n[1] - 0.7).abs() < 0.05);
        assert!(tr.flags.iter().all(|f| !f));
    }
}

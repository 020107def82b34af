//! Friction and diffusion coefficients, pure and mixed statistics.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{j_decomposition, j_derivative, KernelSample};
use crate::model::Model;

pub const DENOMINATOR_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, Serialize)]
pub struct TransportSample {
    pub t: f64,
    pub lambda: f64,
    pub d: f64,
    /// (lambda_f, lambda_b); NaN where the denominator floor was hit
    pub lambda_pure: (f64, f64),
    pub d_partials: Vec<f64>,
    /// (|A|^2 + |B|^2, |A|^2 - |B|^2)
    pub denominators: (f64, f64),
    pub flagged: bool,
}

/// -1/2 d/dt ln(|A|^2 + eps |B|^2). Invariant under the sample's exponential shift.
pub fn friction_pure(ks: &KernelSample, eps: f64) -> Result<f64> {
    let den = ks.a.norm_sqr() + eps * ks.b.norm_sqr();
    if !(den > DENOMINATOR_FLOOR) {
        return Err(Error::DenominatorFloor {
            t: ks.t,
            value: den,
        });
    }
    let da2 = 2.0 * (ks.a.conj() * ks.da_dt).re;
    let db2 = 2.0 * (ks.b.conj() * ks.db_dt).re;
    Ok(-0.5 * (da2 + eps * db2) / den)
}

/// D_lambda = lambda_own (J + I) + 1/2 d/dt (J + I), each bath with its own friction.
pub fn diffusion_partials(
    friction: &[f64],
    j: &[f64],
    dj: &[f64],
    i: &[f64],
    di: &[f64],
) -> Vec<f64> {
    (0..j.len())
        .map(|l| friction[l] * (j[l] + i[l]) + 0.5 * (dj[l] + di[l]))
        .collect()
}

impl Model {
    /// Transport coefficients at time t, combining opposite- and same-statistics baths.
    pub fn transport(&self, t: f64) -> Result<TransportSample> {
        let sc = &self.scenario;
        let eps_a = sc.eps_a();
        let scaled = self.kernels.eval_ab_shifted(t, self.sigma);
        let ks = self.kernels.eval_ab(t);
        let bv = self.baths.eval(t)?;

        let lf = friction_pure(&scaled, -1.0);
        let lb = friction_pure(&scaled, 1.0);
        let (la, lab) = if eps_a > 0.0 { (&lb, &lf) } else { (&lf, &lb) };

        let need_opp = sc.n_opposite > 0;
        let need_same = sc.n_same > 0;
        let mut flagged = false;
        let mut pick = |r: &Result<f64>, needed: bool| match r {
            Ok(v) => *v,
            Err(_) => {
                if needed {
                    flagged = true;
                }
                f64::NAN
            }
        };
        let lambda_a = pick(la, need_same || !need_opp);
        let lambda_ab = pick(lab, need_opp);

        let j = j_decomposition(&ks);
        let dj = j_derivative(&ks);
        let own: Vec<f64> = (0..sc.n_baths())
            .map(|l| {
                if sc.is_opposite(l) {
                    lambda_ab
                } else {
                    lambda_a
                }
            })
            .collect();
        let d_partials = diffusion_partials(&own, &j, &dj, &bv.i, &bv.di_dt);
        let d_opp: f64 = d_partials[..sc.n_opposite].iter().sum();
        let d: f64 = d_partials.iter().sum();

        let lambda = if !need_opp {
            lambda_a
        } else if !need_same {
            lambda_ab - 2.0 * eps_a * d_opp
        } else {
            sc.p * lambda_ab + (1.0 - sc.p) * lambda_a - 2.0 * eps_a * d_opp
        };

        let grow = (2.0 * self.sigma * t).exp();
        let a2 = scaled.a.norm_sqr();
        let b2 = scaled.b.norm_sqr();
        Ok(TransportSample {
            t,
            lambda,
            d,
            lambda_pure: (
                lf.as_ref().copied().unwrap_or(f64::NAN),
                lb.as_ref().copied().unwrap_or(f64::NAN),
            ),
            d_partials,
            denominators: ((a2 + b2) * grow, (a2 - b2) * grow),
            flagged,
        })
    }

    /// Transport samples on a grid, evaluated in parallel, returned in grid order.
    pub fn transport_sweep(&self, times: &[f64]) -> Result<Vec<TransportSample>> {
        times.par_iter().map(|&t| self.transport(t)).collect()
    }
}

//! Globally adaptive Gauss-Kronrod (7/15) quadrature for vector-valued complex integrands.

use num_complex::Complex64 as C64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-8,
            abs: 1e-12,
            max_subdivisions: 100_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult {
    pub value: Vec<C64>,
    pub error: f64,
    pub subdivisions: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<C64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64, &mut [C64])>(f: &F, a: f64, b: f64, dim: usize, buf: &mut [C64]) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = vec![C64::new(0.0, 0.0); dim];
    let mut gauss = vec![C64::new(0.0, 0.0); dim];
    f(c, buf);
    for d in 0..dim {
        kron[d] += WGK[7] * buf[d];
        gauss[d] += WG[3] * buf[d];
    }
    for j in 0..7 {
        let x = h * XGK[j];
        for sign in [-1.0, 1.0] {
            f(c + sign * x, buf);
            for d in 0..dim {
                kron[d] += WGK[j] * buf[d];
                if j % 2 == 1 {
                    gauss[d] += WG[j / 2] * buf[d];
                }
            }
        }
    }
    let mut err = 0.0f64;
    for d in 0..dim {
        kron[d] *= h;
        gauss[d] *= h;
        err = err.max((kron[d] - gauss[d]).norm());
    }
    Panel {
        a,
        b,
        value: kron,
        error: if err.is_finite() { err } else { f64::INFINITY },
    }
}

fn pairwise_sum(panels: &[&Panel], dim: usize) -> Vec<C64> {
    match panels.len() {
        0 => vec![C64::new(0.0, 0.0); dim],
        1 => panels[0].value.clone(),
        n => {
            let (l, r) = panels.split_at(n / 2);
            let mut a = pairwise_sum(l, dim);
            let b = pairwise_sum(r, dim);
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        }
    }
}

fn inf_norm(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.norm()))
}

/// Integrate `f` over [points[0], points[last]] with the given breakpoints as initial panels.
/// The integrand writes `dim` components into its output slice.
pub fn integrate<F>(f: &F, dim: usize, points: &[f64], tol: &Tolerance) -> Result<QuadResult>
where
    F: Fn(f64, &mut [C64]),
{
    assert!(points.len() >= 2);
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    let mut heap = BinaryHeap::new();
    let mut done: Vec<Panel> = Vec::new();
    let mut total = vec![C64::new(0.0, 0.0); dim];
    let mut total_err = 0.0;
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let p = gk15(f, w[0], w[1], dim, &mut buf);
        for d in 0..dim {
            total[d] += p.value[d];
        }
        total_err += p.error;
        heap.push(p);
    }
    let mut subdivisions = 0usize;
    let mut since_refresh = 0usize;
    loop {
        let target = tol.abs.max(tol.rel * inf_norm(&total));
        if total_err <= target || heap.is_empty() {
            if total_err > target {
                return Err(Error::QuadratureNonConvergence {
                    subdivisions,
                    error: total_err,
                    target,
                });
            }
            break;
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b)
            || (worst.b - worst.a) < 1e-14 * worst.a.abs().max(1e-300)
        {
            // cannot split further; its error stays in the budget
            done.push(worst);
            continue;
        }
        if subdivisions >= tol.max_subdivisions {
            return Err(Error::QuadratureNonConvergence {
                subdivisions,
                error: total_err,
                target,
            });
        }
        subdivisions += 1;
        let left = gk15(f, worst.a, mid, dim, &mut buf);
        let right = gk15(f, mid, worst.b, dim, &mut buf);
        for d in 0..dim {
            total[d] += left.value[d] + right.value[d] - worst.value[d];
        }
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        since_refresh += 1;
        if since_refresh >= 64 {
            since_refresh = 0;
            total_err = heap.iter().chain(done.iter()).map(|p| p.error).sum();
        }
    }
    let mut all: Vec<&Panel> = heap.iter().chain(done.iter()).collect();
    all.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = pairwise_sum(&all, dim);
    let error = all.iter().map(|p| p.error).sum();
    Ok(QuadResult {
        value,
        error,
        subdivisions,
    })
}

/// Integrate over [a, inf) with the map w = a + scale * x / (1 - x).
/// `breaks` are extra breakpoints given in w.
pub fn integrate_semi_infinite<F>(
    f: &F,
    dim: usize,
    a: f64,
    scale: f64,
    breaks: &[f64],
    tol: &Tolerance,
) -> Result<QuadResult>
where
    F: Fn(f64, &mut [C64]),
{
    let g = |x: f64, out: &mut [C64]| {
        let one_minus = 1.0 - x;
        let w = a + scale * x / one_minus;
        let jac = scale / (one_minus * one_minus);
        if !w.is_finite() || !jac.is_finite() {
            out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
            return;
        }
        f(w, out);
        out.iter_mut().for_each(|o| *o *= jac);
    };
    let mut xs = vec![0.0, 1.0];
    for &b in breaks {
        if b > a && b.is_finite() {
            let u = (b - a) / scale;
            xs.push(u / (1.0 + u));
        }
    }
    xs.sort_by(|x, y| x.total_cmp(y));
    xs.dedup();
    integrate(&g, dim, &xs, tol)
}

/// Scalar real convenience wrapper.
pub fn integrate_real<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    tol: &Tolerance,
) -> Result<(f64, f64)> {
    let g = |x: f64, out: &mut [C64]| out[0] = C64::new(f(x), 0.0);
    let r = integrate(&g, 1, points, tol)?;
    Ok((r.value[0].re, r.error))
}

/// Sorted, deduplicated breakpoints clipped to [lo, hi], always including both ends.
pub fn breakpoints(lo: f64, hi: f64, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = extra
        .into_iter()
        .filter(|x| x.is_finite() && *x > lo && *x < hi)
        .collect();
    v.push(lo);
    v.push(hi);
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let (v, _) = integrate_real(
            |x| x.powi(5) - 3.0 * x * x,
            &[0.0, 2.0],
            &Tolerance::default(),
        )
        .unwrap();
        assert!((v - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn sharp_lorentzian() {
        let eps = 1e-3;
        let f = |x: f64| eps / ((x - 0.3).powi(2) + eps * eps);
        let (v, _) = integrate_real(f, &[0.0, 1.0], &Tolerance::default()).unwrap();
        let exact = (0.7 / eps).atan() + (0.3 / eps).atan();
        assert!((v - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn semi_infinite_decay() {
        let f = |w: f64, out: &mut [C64]| {
            out[0] = C64::new(1.0 / (1.0 + w * w), 0.0);
            out[1] = C64::new((-w).exp(), w.sin() * (-w).exp());
        };
        let r = integrate_semi_infinite(&f, 2, 0.0, 1.0, &[], &Tolerance::default()).unwrap();
        assert!((r.value[0].re - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
        assert!((r.value[1] - C64::new(1.0, 0.5)).norm() < 1e-10);
    }

    #[test]
    fn subdivision_cap() {
        let tol = Tolerance {
            rel: 1e-14,
            abs: 0.0,
            max_subdivisions: 3,
        };
        let r = integrate_real(|x: f64| (1.0 / x).sin(), &[1e-6, 1.0], &tol);
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }
}

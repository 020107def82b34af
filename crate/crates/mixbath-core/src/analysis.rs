//! Late-time classification of trajectories and parameter scans.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::evolution::{DiffusionOptions, TimeGrid};
use crate::model::Model;
use crate::scenario::{FrequencyMode, Scenario};

pub const DEFAULT_WINDOW: f64 = 0.4;
pub const DEFAULT_THRESHOLD: f64 = 1e-4;
const MIN_PERIODS: f64 = 3.0;
/// below this half peak-to-peak no sinusoid is fitted (integration noise)
pub const FIT_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct OscillationInfo {
    pub window: (f64, f64),
    pub mean: f64,
    pub amplitude: f64,
    /// angular frequency of the fitted sinusoid; 0 when the window is flat to noise level.
    /// Small oscillations below the stationarity threshold are still measured.
    pub frequency: f64,
    pub fit_residual: f64,
    /// half of max - min over the window; stationary means this is below the threshold
    pub half_peak_to_peak: f64,
    pub stationary: bool,
    /// fewer than three fitted periods inside the window
    pub low_confidence: bool,
}

impl OscillationInfo {
    pub fn cyclic_frequency(&self) -> f64 {
        self.frequency / (2.0 * PI)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub window_fraction: f64,
    pub threshold: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            window_fraction: DEFAULT_WINDOW,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

struct Fit {
    mean: f64,
    amplitude: f64,
    rss: f64,
}

/// Least squares for mean + a cos(w t) + b sin(w t) at fixed w.
fn fit_at(t: &[f64], y: &[f64], w: f64) -> Option<Fit> {
    let mut m = Matrix3::<f64>::zeros();
    let mut r = Vector3::<f64>::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let (s, c) = (w * ti).sin_cos();
        let row = Vector3::new(1.0, c, s);
        m += row * row.transpose();
        r += row * yi;
    }
    let x = m.cholesky()?.solve(&r);
    let rss = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let (s, c) = (w * ti).sin_cos();
            let e = yi - x[0] - x[1] * c - x[2] * s;
            e * e
        })
        .sum();
    Some(Fit {
        mean: x[0],
        amplitude: x[1].hypot(x[2]),
        rss,
    })
}

/// Angular frequency of the strongest non-zero bin of the Hann-windowed, mean-removed series.
fn spectral_peak(y: &[f64], dt: f64) -> Option<f64> {
    let len = y.len();
    let mean = y.iter().sum::<f64>() / len as f64;
    let padded = (4 * len).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = (0..padded)
        .map(|i| {
            if i < len {
                let hann = 0.5 - 0.5 * (2.0 * PI * i as f64 / (len - 1) as f64).cos();
                Complex::new((y[i] - mean) * hann, 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        })
        .collect();
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);
    let (k, mag) = buf[1..padded / 2]
        .iter()
        .enumerate()
        .map(|(i, c)| (i + 1, c.norm()))
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    (mag > 0.0).then(|| 2.0 * PI * k as f64 / (padded as f64 * dt))
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 * (a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Classifies the last `window_fraction` of a uniformly sampled series.
pub fn classify(times: &[f64], values: &[f64], opts: &ClassifyOptions) -> Result<OscillationInfo> {
    if times.len() != values.len() || times.len() < 8 {
        return Err(Error::Invalid(
            "need at least 8 equally long samples".into(),
        ));
    }
    if !(opts.window_fraction > 0.0 && opts.window_fraction <= 0.5) {
        return Err(Error::Precondition(format!(
            "window fraction {} must lie in (0, 0.5]",
            opts.window_fraction
        )));
    }
    let t0 = times[0];
    let t_end = *times.last().unwrap();
    let t_start = t_end - opts.window_fraction * (t_end - t0);
    let first = times.partition_point(|&t| t < t_start);
    let tw = &times[first..];
    let yw = &values[first..];
    if yw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite samples inside the window".into()));
    }
    let (lo, hi) = yw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    let half_p2p = 0.5 * (hi - lo);
    let mean = yw.iter().sum::<f64>() / yw.len() as f64;
    let span = tw.last().unwrap() - tw[0];
    let stationary = half_p2p < opts.threshold;
    if half_p2p < FIT_FLOOR.min(opts.threshold) {
        let rss: f64 = yw.iter().map(|v| (v - mean).powi(2)).sum();
        return Ok(OscillationInfo {
            window: (tw[0], *tw.last().unwrap()),
            mean,
            amplitude: half_p2p,
            frequency: 0.0,
            fit_residual: (rss / yw.len() as f64).sqrt(),
            half_peak_to_peak: half_p2p,
            stationary,
            low_confidence: false,
        });
    }
    let dt = (t_end - t0) / (times.len() - 1) as f64;
    let mid = 0.5 * (tw[0] + tw.last().unwrap());
    let tc: Vec<f64> = tw.iter().map(|t| t - mid).collect();
    let seed = spectral_peak(yw, dt).ok_or_else(|| Error::Domain("flat spectrum".into()))?;
    let bin = 2.0 * PI / span;
    let lo_w = (seed - 1.5 * bin).max(0.25 * seed);
    let rss = |w: f64| fit_at(&tc, yw, w).map(|f| f.rss).unwrap_or(f64::INFINITY);
    let w = golden_min(rss, lo_w, seed + 1.5 * bin);
    let fit = fit_at(&tc, yw, w).ok_or_else(|| Error::Domain("singular sinusoid fit".into()))?;
    Ok(OscillationInfo {
        window: (tw[0], *tw.last().unwrap()),
        mean: fit.mean,
        amplitude: fit.amplitude,
        frequency: w,
        fit_residual: (fit.rss / yw.len() as f64).sqrt(),
        half_peak_to_peak: half_p2p,
        stationary,
        low_confidence: w * span / (2.0 * PI) < MIN_PERIODS,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    Occupation,
    Friction,
    Diffusion,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScanParameter {
    /// renormalized frequency; baths stay fixed in absolute units
    Omega,
    Alpha(usize),
    Gamma(usize),
    Temperature(usize),
    N0,
}

impl ScanParameter {
    pub fn name(&self) -> String {
        match self {
            ScanParameter::Omega => "Omega".into(),
            ScanParameter::Alpha(i) => format!("alpha.{}", i + 1),
            ScanParameter::Gamma(i) => format!("gamma.{}", i + 1),
            ScanParameter::Temperature(i) => format!("temperature.{}", i + 1),
            ScanParameter::N0 => "n0".into(),
        }
    }

    /// Parses `Omega`, `n0`, `alpha.K`, `gamma.K`, `temperature.K` (K counts baths from 1 as in the config).
    pub fn parse(s: &str) -> Result<Self> {
        let bath = |rest: &str| -> Result<usize> {
            match rest.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(k - 1),
                _ => Err(Error::Invalid(format!("bad bath index in '{s}'"))),
            }
        };
        match s.split_once('.') {
            None if s == "Omega" => Ok(ScanParameter::Omega),
            None if s == "n0" => Ok(ScanParameter::N0),
            Some(("alpha", k)) => Ok(ScanParameter::Alpha(bath(k)?)),
            Some(("gamma", k)) => Ok(ScanParameter::Gamma(bath(k)?)),
            Some(("temperature", k)) => Ok(ScanParameter::Temperature(bath(k)?)),
            _ => Err(Error::Invalid(format!("unknown scan parameter '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanSpec {
    pub parameter: ScanParameter,
    pub values: Vec<f64>,
    pub observable: Observable,
    /// grid in units of 1/Omega of each point
    pub grid: TimeGrid,
    pub classify: ClassifyOptions,
    pub diffusion: DiffusionOptions,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanPoint {
    pub value: f64,
    pub scenario_hash: Option<String>,
    pub info: Option<OscillationInfo>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub parameter: String,
    pub values: Vec<f64>,
    pub points: Vec<ScanPoint>,
}

/// The template with one parameter replaced. Bath indices follow the config order.
pub fn vary(template: &Scenario, parameter: ScanParameter, value: f64) -> Result<Scenario> {
    let mut system = template.system.clone();
    let mut baths = template.baths_in_config_order();
    let len = baths.len();
    let pick = |i: usize| -> Result<usize> {
        if i < len {
            Ok(i)
        } else {
            Err(Error::Invalid(format!("bath {} does not exist", i + 1)))
        }
    };
    match parameter {
        ScanParameter::Omega => {
            system.frequency_mode = FrequencyMode::Renormalized;
            system.frequency_value = value;
        }
        ScanParameter::N0 => system.n0 = value,
        ScanParameter::Alpha(i) => baths[pick(i)?].alpha = value,
        ScanParameter::Gamma(i) => baths[pick(i)?].gamma = value,
        ScanParameter::Temperature(i) => baths[pick(i)?].temperature = value,
    }
    Scenario::new(system, baths)
}

fn scan_point(
    template: &Scenario,
    spec: &ScanSpec,
    value: f64,
) -> Result<(String, OscillationInfo)> {
    let sc = vary(template, spec.parameter, value)?;
    let model = Model::with_defaults(&sc)?;
    let unit = 1.0 / sc.big_omega;
    let grid = TimeGrid::new(spec.grid.dt * unit, spec.grid.t_max * unit)?;
    let (series_t, series) = match spec.observable {
        Observable::Occupation => {
            let (tr, _) = model.evolve_diffusion(&grid, &spec.diffusion)?;
            (tr.times, tr.n)
        }
        Observable::Friction | Observable::Diffusion => {
            let times = grid.times();
            let samples = model.transport_sweep(&times)?;
            let v = samples
                .iter()
                .map(|s| {
                    if spec.observable == Observable::Friction {
                        s.lambda
                    } else {
                        s.d
                    }
                })
                .collect();
            (times, v)
        }
    };
    Ok((sc.hash(), classify(&series_t, &series, &spec.classify)?))
}

/// One full pipeline run per value, in parallel; failures are recorded per point.
pub fn scan(template: &Scenario, spec: &ScanSpec) -> ScanResult {
    let points = spec
        .values
        .par_iter()
        .map(|&value| match scan_point(template, spec, value) {
            Ok((hash, info)) => ScanPoint {
                value,
                scenario_hash: Some(hash),
                info: Some(info),
                error: None,
            },
            Err(e) => ScanPoint {
                value,
                scenario_hash: vary(template, spec.parameter, value).ok().map(|s| s.hash()),
                info: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    ScanResult {
        parameter: spec.parameter.name(),
        values: spec.values.clone(),
        points,
    }
}

/// Coefficient of determination of the least-squares line through (x, y).
pub fn linear_r2(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64, dt: f64, t_max: f64) -> (Vec<f64>, Vec<f64>) {
        let n = (t_max / dt).round() as usize;
        let t: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let y = t.iter().map(|&x| f(x)).collect();
        (t, y)
    }

    #[test]
    fn constant_is_stationary() {
        let (t, y) = series(|_| 0.25, 0.01, 10.0);
        let info = classify(&t, &y, &ClassifyOptions::default()).unwrap();
        assert!(info.stationary);
        assert_eq!(info.amplitude, 0.0);
        assert_eq!(info.frequency, 0.0);
    }

    #[test]
    fn synthetic_sinusoid() {
        let (t, y) = series(|x| 0.3 + 0.01 * (2.0 * x).cos(), 0.005, 50.0);
        let info = classify(&t, &y, &ClassifyOptions::default()).unwrap();
        assert!(!info.stationary && !info.low_confidence);
        assert!((info.frequency - 2.0).abs() < 1e-6, "{}", info.frequency);
        assert!((info.amplitude - 0.01).abs() < 1e-6);
        assert!((info.mean - 0.3).abs() < 1e-6);
        assert!(info.fit_residual < 1e-10);
    }

    #[test]
    fn small_oscillation_is_stationary_but_measured() {
        let (t, y) = series(|x| 0.1 + 2e-5 * (3.0 * x).sin(), 0.005, 50.0);
        let info = classify(&t, &y, &ClassifyOptions::default()).unwrap();
        assert!(info.stationary);
        assert!((info.frequency - 3.0).abs() < 1e-6);
        assert!((info.amplitude - 2e-5).abs() < 1e-10);
    }

    #[test]
    fn short_window_flagged() {
        let (t, y) = series(|x| (0.2 * x).sin(), 0.01, 50.0);
        let info = classify(&t, &y, &ClassifyOptions::default()).unwrap();
        assert!(info.low_confidence);
    }

    #[test]
    fn window_must_fit_twice() {
        let (t, y) = series(|x| x.sin(), 0.01, 10.0);
        let opts = ClassifyOptions {
            window_fraction: 0.7,
            ..Default::default()
        };
        assert!(matches!(
            classify(&t, &y, &opts),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn scan_parameter_names_round_trip() {
        for p in ["Omega", "n0", "alpha.1", "gamma.2", "temperature.3"] {
            assert_eq!(ScanParameter::parse(p).unwrap().name(), p);
        }
        assert!(ScanParameter::parse("alpha.0").is_err());
        assert!(ScanParameter::parse("beta").is_err());
    }

    #[test]
    fn r2_of_line_is_one() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 4.1, 6.0, 8.1];
        assert!(linear_r2(&x, &y) > 0.99);
        assert!((linear_r2(&x, &[3.0, 5.0, 7.0, 9.0]) - 1.0).abs() < 1e-14);
    }
}

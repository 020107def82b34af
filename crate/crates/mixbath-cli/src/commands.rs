use std::fmt::Write as _;
use std::time::Instant;

use serde_json::json;

use mixbath_core::analysis::{scan, ClassifyOptions, Observable, ScanParameter, ScanSpec};
use mixbath_core::config::parse_config_file;
use mixbath_core::evolution::{
    AsymptoticReport, CumulativeRule, DiffusionOptions, TimeGrid, Trajectory,
};
use mixbath_core::model::Model;
use mixbath_core::oracle::volterra::VOLTERRA_HALVING_TOL;
use mixbath_core::oracle::{build_kernels, discrete_bath_solve, volterra_solve};
use mixbath_core::output::{
    output_paths, scan_table, trajectory_table, transport_table, OutputFile, RunManifest,
};
use mixbath_core::scenario::Scenario;
use mixbath_core::verify::{run_verify, VerifyOptions};
use mixbath_core::{Error, Result};

use crate::{Command, GridArgs, MethodArg, ObservableArg, RuleArg};

pub const VERIFY_FAILED: u8 = 3;

/// MIXBATH_THREADS caps the rayon pool; anything but a positive integer is rejected.
pub fn configure_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var("MIXBATH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("MIXBATH_THREADS must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn scaled_grid(g: &GridArgs, big_omega: f64) -> Result<TimeGrid> {
    let unit = 1.0 / big_omega;
    TimeGrid::new(g.dt * unit, g.t_max * unit)
}

fn flagged_warning(what: &str, flags: impl Iterator<Item = bool>) -> Option<String> {
    let n = flags.filter(|f| *f).count();
    (n > 0).then(|| format!("{n} {what} samples flagged"))
}

fn timed<T>(m: &mut RunManifest, label: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t0 = Instant::now();
    let r = f();
    m.timings_s.push((label.into(), t0.elapsed().as_secs_f64()));
    r
}

pub fn run(cmd: Command, argv: Vec<String>) -> Result<u8> {
    match cmd {
        Command::Transport { common, grid } => {
            let sc = parse_config_file(&common.config)?;
            let mut m = RunManifest::new("transport", argv);
            m.set_scenario(&sc);
            let model = timed(&mut m, "model", || Model::with_defaults(&sc))?;
            m.set_model(&model);
            let g = scaled_grid(&grid, sc.big_omega)?;
            m.grid = Some(g);
            let samples = timed(&mut m, "transport", || model.transport_sweep(&g.times()))?;
            m.warnings.extend(flagged_warning(
                "transport",
                samples.iter().map(|s| s.flagged),
            ));
            let table = transport_table(&sc, &samples);
            let (csv, man) = output_paths(&common.out, &format!("transport-{}", sc.hash()))?;
            m.record_output(&csv, &table);
            table.write(&csv, &man)?;
            m.write(&man)?;
            println!("{}", csv.display());
            Ok(0)
        }
        Command::Evolve {
            common,
            grid,
            method,
            rule,
            modes,
        } => {
            let sc = parse_config_file(&common.config)?;
            let mut m = RunManifest::new("evolve", argv);
            m.set_scenario(&sc);
            let g = scaled_grid(&grid, sc.big_omega)?;
            m.grid = Some(g);
            let opts = DiffusionOptions {
                rule: match rule {
                    RuleArg::Cubic => CumulativeRule::Cubic,
                    RuleArg::Trapezoid => CumulativeRule::Trapezoid,
                },
                ..DiffusionOptions::default()
            };
            let tr: Trajectory = match method {
                MethodArg::ClosedForm => {
                    let model = timed(&mut m, "model", || Model::with_defaults(&sc))?;
                    m.set_model(&model);
                    timed(&mut m, "evolve", || model.evolve_closed_form(&g))?
                }
                MethodArg::Diffusion => {
                    let model = timed(&mut m, "model", || Model::with_defaults(&sc))?;
                    m.set_model(&model);
                    m.settings = json!({ "diffusion": opts });
                    timed(&mut m, "evolve", || {
                        model.evolve_diffusion(&g, &opts).map(|r| r.0)
                    })?
                }
                MethodArg::Volterra => {
                    m.settings = json!({ "halving_tol": VOLTERRA_HALVING_TOL });
                    let k = timed(&mut m, "kernels", || build_kernels(&sc, &g))?;
                    timed(&mut m, "evolve", || {
                        volterra_solve(&k, sc.system.n0, VOLTERRA_HALVING_TOL)
                    })?
                }
                MethodArg::Discrete => {
                    m.settings = json!({ "modes": modes });
                    timed(&mut m, "evolve", || discrete_bath_solve(&sc, modes, &g))?
                }
            };
            m.warnings
                .extend(flagged_warning("trajectory", tr.flags.iter().copied()));
            let table = trajectory_table(&tr);
            let stem = format!("evolve-{}-{}", tr.method.name(), sc.hash());
            let (csv, man) = output_paths(&common.out, &stem)?;
            m.record_output(&csv, &table);
            table.write(&csv, &man)?;
            m.write(&man)?;
            println!("{}", csv.display());
            Ok(0)
        }
        Command::Asymptote { common } => {
            let sc = parse_config_file(&common.config)?;
            let mut m = RunManifest::new("asymptote", argv);
            m.set_scenario(&sc);
            let model = timed(&mut m, "model", || Model::with_defaults(&sc))?;
            m.set_model(&model);
            let rep = model.asymptotics()?;
            let text = asymptote_text(&sc, &rep);
            print!("{text}");
            let stem = format!("asymptote-{}", sc.hash());
            let (_, man) = output_paths(&common.out, &stem)?;
            let txt = common.out.join(format!("{stem}.txt"));
            std::fs::write(&txt, &text)
                .map_err(|e| Error::Io(format!("{}: {e}", txt.display())))?;
            m.outputs.push(OutputFile {
                path: txt.display().to_string(),
                columns: Vec::new(),
            });
            m.settings = json!({ "report": rep });
            m.write(&man)?;
            Ok(0)
        }
        Command::Scan {
            common,
            grid,
            param,
            from,
            to,
            points,
            observable,
            window,
            threshold,
        } => {
            let sc = parse_config_file(&common.config)?;
            let parameter = ScanParameter::parse(&param)?;
            if points == 0 || !from.is_finite() || !to.is_finite() {
                return Err(Error::Invalid(
                    "scan needs finite bounds and at least one point".into(),
                ));
            }
            let values: Vec<f64> = if points == 1 {
                vec![from]
            } else {
                (0..points)
                    .map(|i| from + (to - from) * i as f64 / (points - 1) as f64)
                    .collect()
            };
            let spec = ScanSpec {
                parameter,
                values,
                observable: match observable {
                    ObservableArg::Occupation => Observable::Occupation,
                    ObservableArg::Friction => Observable::Friction,
                    ObservableArg::Diffusion => Observable::Diffusion,
                },
                grid: TimeGrid::new(grid.dt, grid.t_max)?,
                classify: ClassifyOptions {
                    window_fraction: window,
                    threshold,
                },
                diffusion: DiffusionOptions::default(),
            };
            let mut m = RunManifest::new("scan", argv);
            m.set_scenario(&sc);
            m.grid = Some(spec.grid);
            m.settings = json!({ "scan": spec });
            let result = timed(&mut m, "scan", || Ok(scan(&sc, &spec)))?;
            for p in &result.points {
                if let Some(e) = &p.error {
                    m.warnings
                        .push(format!("{} = {}: {e}", result.parameter, p.value));
                } else if p.info.as_ref().is_some_and(|i| i.low_confidence) {
                    m.warnings.push(format!(
                        "{} = {}: low-confidence fit",
                        result.parameter, p.value
                    ));
                }
            }
            let table = scan_table(&result);
            let stem = format!("scan-{}-{}", result.parameter, sc.hash());
            let (csv, man) = output_paths(&common.out, &stem)?;
            m.record_output(&csv, &table);
            table.write(&csv, &man)?;
            m.write(&man)?;
            println!("{}", csv.display());
            Ok(0)
        }
        Command::Verify { quick, seed, out } => {
            let mut opts = if quick {
                VerifyOptions::quick()
            } else {
                VerifyOptions::full()
            };
            if let Some(s) = seed {
                opts.seed = s;
            }
            let mut m = RunManifest::new("verify", argv);
            let report = timed(&mut m, "verify", || Ok(run_verify(&opts)))?;
            let mut text = String::new();
            for c in &report.checks {
                let _ = writeln!(
                    text,
                    "{} {} worst={:.3e} tol={:.0e} failures={} checked={} skipped={}",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.name,
                    c.worst,
                    c.tolerance,
                    c.failures,
                    c.checked,
                    c.skipped
                );
                if let Some(f) = &c.first_failure {
                    let _ = writeln!(text, "  first failure: {f}");
                    m.warnings.push(format!("{}: {f}", c.name));
                }
            }
            print!("{text}");
            let stem = format!("verify-{}", opts.seed);
            let (_, man) = output_paths(&out, &stem)?;
            let txt = out.join(format!("{stem}.txt"));
            std::fs::write(&txt, &text)
                .map_err(|e| Error::Io(format!("{}: {e}", txt.display())))?;
            m.outputs.push(OutputFile {
                path: txt.display().to_string(),
                columns: Vec::new(),
            });
            m.settings = json!({ "report": report });
            m.write(&man)?;
            Ok(if report.passed() { 0 } else { VERIFY_FAILED })
        }
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".into(), |v| format!("{v:.10}"))
}

/// key = value lines; i_inf is listed in config order.
pub fn asymptote_text(sc: &Scenario, r: &AsymptoticReport) -> String {
    let hash = sc.hash();
    let mut s = String::new();
    let _ = writeln!(s, "scenario_hash = {hash}");
    let _ = writeln!(s, "n_inf_pure = {}", fmt_opt(r.n_inf_pure));
    let _ = writeln!(s, "n_inf_opposite = {}", fmt_opt(r.n_inf_opposite));
    let _ = writeln!(s, "markov_limit = {:.10}", r.markov_limit);
    let _ = writeln!(s, "stationarity_residual = {:.6e}", r.stationarity_residual);
    let _ = writeln!(s, "is_stationary_predicted = {}", r.is_stationary_predicted);
    let parts: Vec<String> = sc
        .config_order
        .iter()
        .map(|&i| format!("{:.10}", r.i_inf[i]))
        .collect();
    let _ = writeln!(s, "i_inf = {}", parts.join(" "));
    s
}

//! CSV tables and run manifests.

use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::ScanResult;
use crate::bath::QuadratureSpec;
use crate::error::{Error, Result};
use crate::evolution::{TimeGrid, Trajectory};
use crate::model::Model;
use crate::scenario::Scenario;
use crate::transport::TransportSample;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits, round-trip exact.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// `# manifest: <path>` first, then the header, then the rows.
    pub fn render(&self, manifest: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# manifest: {manifest}");
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path, manifest: &Path) -> Result<()> {
        fs::write(path, self.render(&manifest.display().to_string()))
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

pub fn transport_table(sc: &Scenario, samples: &[TransportSample]) -> Table {
    let mut cols: Vec<String> = ["t", "lambda", "D", "lambda_f", "lambda_b"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for k in 0..sc.n_baths() {
        cols.push(format!("D_{}", k + 1));
    }
    cols.push("flagged".into());
    let mut t = Table::new(cols);
    for s in samples {
        let mut row = vec![
            fmt17(s.t),
            fmt17(s.lambda),
            fmt17(s.d),
            fmt17(s.lambda_pure.0),
            fmt17(s.lambda_pure.1),
        ];
        for &i in &sc.config_order {
            row.push(fmt17(s.d_partials[i]));
        }
        row.push(u8::from(s.flagged).to_string());
        t.push(row);
    }
    t
}

pub fn trajectory_table(tr: &Trajectory) -> Table {
    let mut t = Table::new(vec!["t".into(), "n".into(), "flag".into()]);
    for i in 0..tr.n.len() {
        t.push(vec![
            fmt17(tr.times[i]),
            fmt17(tr.n[i]),
            u8::from(tr.flags[i]).to_string(),
        ]);
    }
    t
}

pub fn scan_table(r: &ScanResult) -> Table {
    let cols = [
        "value",
        "scenario_hash",
        "stationary",
        "mean",
        "amplitude",
        "frequency_angular",
        "frequency_cyclic",
        "fit_residual",
        "half_peak_to_peak",
        "low_confidence",
        "error",
    ];
    let mut t = Table::new(cols.iter().map(|s| s.to_string()).collect());
    for p in &r.points {
        let hash = p.scenario_hash.clone().unwrap_or_default();
        let row = match &p.info {
            Some(i) => vec![
                fmt17(p.value),
                hash,
                u8::from(i.stationary).to_string(),
                fmt17(i.mean),
                fmt17(i.amplitude),
                fmt17(i.frequency),
                fmt17(i.cyclic_frequency()),
                fmt17(i.fit_residual),
                fmt17(i.half_peak_to_peak),
                u8::from(i.low_confidence).to_string(),
                String::new(),
            ],
            None => {
                let msg = p
                    .error
                    .clone()
                    .unwrap_or_default()
                    .replace([',', '\n'], ";");
                let mut v = vec![fmt17(p.value), hash];
                v.extend(std::iter::repeat_n("nan".to_string(), 7));
                v.push("0".into());
                v.push(msg);
                v
            }
        };
        t.push(row);
    }
    t
}

#[derive(Clone, Debug, Serialize)]
pub struct Derived {
    pub omega: f64,
    #[serde(rename = "Omega")]
    pub big_omega: f64,
    pub p: f64,
    pub g0: f64,
    /// [re, im] pairs in canonical order
    pub roots: Vec<[f64; 2]>,
}

impl Derived {
    pub fn of(model: &Model) -> Self {
        let sc = &model.scenario;
        Derived {
            omega: sc.omega,
            big_omega: sc.big_omega,
            p: sc.p,
            g0: sc.g0,
            roots: model.roots.roots.iter().map(|r| [r.re, r.im]).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub columns: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub argv: Vec<String>,
    /// fully resolved scenario, bare-frequency form, in config syntax
    pub scenario_config: Option<String>,
    pub scenario_hash: Option<String>,
    pub derived: Option<Derived>,
    pub grid: Option<TimeGrid>,
    pub quadrature: Option<QuadratureSpec>,
    pub settings: serde_json::Value,
    pub outputs: Vec<OutputFile>,
    pub timings_s: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>) -> Self {
        RunManifest {
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            argv,
            scenario_config: None,
            scenario_hash: None,
            derived: None,
            grid: None,
            quadrature: None,
            settings: serde_json::Value::Null,
            outputs: Vec::new(),
            timings_s: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn set_model(&mut self, model: &Model) {
        let sc = &model.scenario;
        self.scenario_config = sc.to_bare().ok().map(|b| b.to_config_string());
        self.scenario_hash = Some(sc.hash());
        self.derived = Some(Derived::of(model));
        self.quadrature = Some(model.spec);
    }

    pub fn set_scenario(&mut self, sc: &Scenario) {
        self.scenario_config = sc.to_bare().ok().map(|b| b.to_config_string());
        self.scenario_hash = Some(sc.hash());
    }

    pub fn record_output(&mut self, path: &Path, table: &Table) {
        self.outputs.push(OutputFile {
            path: path.display().to_string(),
            columns: table.columns.clone(),
        });
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// `<dir>/<stem>.csv` and `<dir>/<stem>.manifest.json`, creating the directory.
pub fn output_paths(dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    Ok((
        dir.join(format!("{stem}.csv")),
        dir.join(format!("{stem}.manifest.json")),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17, "{s}");
        }
    }

    #[test]
    fn manifest_line_comes_first() {
        let mut t = Table::new(vec!["t".into(), "n".into()]);
        t.push(vec!["0".into(), "1".into()]);
        let text = t.render("runs/x.manifest.json");
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# manifest: runs/x.manifest.json"));
        assert_eq!(lines.next(), Some("t,n"));
    }
}

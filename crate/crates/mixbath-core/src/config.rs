//! Line-oriented scenario config: `[system]` and `[bath.K]` sections of `key = value`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scenario::{BathSpec, FrequencyMode, Scenario, Statistics, SystemSpec};

#[derive(Debug)]
struct Entry {
    value: String,
    line: usize,
    col: usize,
}

#[derive(Debug)]
struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

const SYSTEM_KEYS: &[&str] = &["statistics", "omega_mode", "frequency", "n0"];
const BATH_KEYS: &[&str] = &["statistics", "alpha", "gamma", "temperature"];

pub fn parse_config_file(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Scenario> {
    let mut system: Option<Section> = None;
    let mut baths: BTreeMap<u32, Section> = BTreeMap::new();
    let mut current: Option<(bool, u32)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let body = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let trimmed = body.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = body.len() - body.trim_start().len();
        let col0 = indent + 1;

        if trimmed.starts_with('[') {
            if !trimmed.ends_with(']') {
                return Err(Error::config(lineno, col0, "unterminated section header"));
            }
            let name = trimmed[1..trimmed.len() - 1].trim();
            if name == "system" {
                if system.is_some() {
                    return Err(Error::config(lineno, col0, "duplicate section [system]"));
                }
                system = Some(Section {
                    name: name.to_string(),
                    line: lineno,
                    entries: BTreeMap::new(),
                });
                current = Some((true, 0));
            } else if let Some(k) = name.strip_prefix("bath.") {
                let k: u32 = k.parse().map_err(|_| {
                    Error::config(lineno, col0, format!("bad bath index in [{name}]"))
                })?;
                if k == 0 {
                    return Err(Error::config(lineno, col0, "bath indices start at 1"));
                }
                if baths.contains_key(&k) {
                    return Err(Error::config(
                        lineno,
                        col0,
                        format!("duplicate section [{name}]"),
                    ));
                }
                baths.insert(
                    k,
                    Section {
                        name: name.to_string(),
                        line: lineno,
                        entries: BTreeMap::new(),
                    },
                );
                current = Some((false, k));
            } else {
                return Err(Error::config(
                    lineno,
                    col0,
                    format!("unknown section [{name}]"),
                ));
            }
            continue;
        }

        let Some(eq) = body.find('=') else {
            return Err(Error::config(lineno, col0, "expected `key = value`"));
        };
        let key = body[..eq].trim();
        let value_raw = &body[eq + 1..];
        let value = value_raw.trim();
        let value_col = eq + 2 + (value_raw.len() - value_raw.trim_start().len());
        if key.is_empty() {
            return Err(Error::config(lineno, col0, "empty key"));
        }
        if value.is_empty() {
            return Err(Error::config(
                lineno,
                value_col,
                format!("empty value for `{key}`"),
            ));
        }
        let section = match current {
            None => return Err(Error::config(lineno, col0, "key outside of any section")),
            Some((true, _)) => system.as_mut().unwrap(),
            Some((false, k)) => baths.get_mut(&k).unwrap(),
        };
        let allowed = if section.name == "system" {
            SYSTEM_KEYS
        } else {
            BATH_KEYS
        };
        if !allowed.contains(&key) {
            return Err(Error::config(
                lineno,
                col0,
                format!("unknown key `{key}` in [{}]", section.name),
            ));
        }
        if section.entries.contains_key(key) {
            return Err(Error::config(
                lineno,
                col0,
                format!("duplicate key `{key}` in [{}]", section.name),
            ));
        }
        section.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line: lineno,
                col: value_col,
            },
        );
    }

    let system = system.ok_or_else(|| Error::config(1, 1, "missing [system] section"))?;
    if baths.is_empty() {
        return Err(Error::config(1, 1, "no [bath.K] sections"));
    }

    let sys = SystemSpec {
        statistics: get_statistics(&system)?,
        frequency_mode: get_mode(&system)?,
        frequency_value: get_real(&system, "frequency")?,
        n0: get_real(&system, "n0")?,
    };
    let mut specs = Vec::with_capacity(baths.len());
    for sec in baths.values() {
        specs.push(BathSpec {
            statistics: get_statistics(sec)?,
            alpha: get_real(sec, "alpha")?,
            gamma: get_real(sec, "gamma")?,
            temperature: get_real(sec, "temperature")?,
        });
    }
    Scenario::new(sys, specs)
}

fn get<'a>(sec: &'a Section, key: &str) -> Result<&'a Entry> {
    sec.entries.get(key).ok_or_else(|| {
        Error::config(
            sec.line,
            1,
            format!("missing key `{key}` in section [{}]", sec.name),
        )
    })
}

fn get_real(sec: &Section, key: &str) -> Result<f64> {
    let e = get(sec, key)?;
    let v: f64 = e.value.parse().map_err(|_| {
        Error::config(
            e.line,
            e.col,
            format!("`{key}`: not a number: `{}`", e.value),
        )
    })?;
    if !v.is_finite() {
        return Err(Error::config(
            e.line,
            e.col,
            format!("`{key}` must be finite"),
        ));
    }
    Ok(v)
}

fn get_statistics(sec: &Section) -> Result<Statistics> {
    let e = get(sec, "statistics")?;
    match e.value.to_ascii_lowercase().as_str() {
        "fermi" => Ok(Statistics::Fermi),
        "bose" => Ok(Statistics::Bose),
        other => Err(Error::config(
            e.line,
            e.col,
            format!("statistics must be fermi or bose, got `{other}`"),
        )),
    }
}

fn get_mode(sec: &Section) -> Result<FrequencyMode> {
    let e = get(sec, "omega_mode")?;
    match e.value.to_ascii_lowercase().as_str() {
        "bare" => Ok(FrequencyMode::Bare),
        "renormalized" => Ok(FrequencyMode::Renormalized),
        other => Err(Error::config(
            e.line,
            e.col,
            format!("omega_mode must be bare or renormalized, got `{other}`"),
        )),
    }
}

//! Physical data model: system oscillator, baths, derived constants.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

use crate::bath::bath_occ;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Fermi,
    Bose,
}

impl Statistics {
    /// +1 for bosons, -1 for fermions.
    pub fn sign(self) -> f64 {
        match self {
            Statistics::Bose => 1.0,
            Statistics::Fermi => -1.0,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Statistics::Bose => Statistics::Fermi,
            Statistics::Fermi => Statistics::Bose,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Statistics::Bose => "bose",
            Statistics::Fermi => "fermi",
        }
    }

    pub fn letter(self) -> char {
        match self {
            Statistics::Bose => 'b',
            Statistics::Fermi => 'f',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyMode {
    Bare,
    Renormalized,
}

impl FrequencyMode {
    pub fn name(self) -> &'static str {
        match self {
            FrequencyMode::Bare => "bare",
            FrequencyMode::Renormalized => "renormalized",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub statistics: Statistics,
    pub frequency_mode: FrequencyMode,
    pub frequency_value: f64,
    pub n0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub statistics: Statistics,
    pub alpha: f64,
    pub gamma: f64,
    pub temperature: f64,
}

/// Validated scenario. Baths are stored opposite-statistics first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub system: SystemSpec,
    pub baths: Vec<BathSpec>,
    pub omega: f64,
    #[serde(rename = "Omega")]
    pub big_omega: f64,
    pub n_opposite: usize,
    pub n_same: usize,
    pub p: f64,
    pub g0: f64,
    /// bath K of the input sits at baths[config_order[K]]
    pub config_order: Vec<usize>,
}

fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(|a, b| a.total_cmp(b));
    terms.iter().sum()
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{name} must be finite, got {v}")))
    }
}

impl Scenario {
    pub fn new(system: SystemSpec, baths: Vec<BathSpec>) -> Result<Self> {
        check_finite("frequency", system.frequency_value)?;
        check_finite("n0", system.n0)?;
        if system.frequency_value <= 0.0 {
            return Err(Error::Invalid(format!(
                "frequency must be positive, got {}",
                system.frequency_value
            )));
        }
        match system.statistics {
            Statistics::Fermi if !(0.0..=1.0).contains(&system.n0) => {
                return Err(Error::Invalid(format!(
                    "fermionic n0 must lie in [0, 1], got {}",
                    system.n0
                )))
            }
            Statistics::Bose if system.n0 < 0.0 => {
                return Err(Error::Invalid(format!(
                    "bosonic n0 must be nonnegative, got {}",
                    system.n0
                )))
            }
            _ => {}
        }
        if baths.is_empty() {
            return Err(Error::Invalid("at least one bath is required".into()));
        }
        for (i, b) in baths.iter().enumerate() {
            let tag = format!("bath {}", i + 1);
            check_finite(&format!("{tag} alpha"), b.alpha)?;
            check_finite(&format!("{tag} gamma"), b.gamma)?;
            check_finite(&format!("{tag} temperature"), b.temperature)?;
            if b.alpha < 0.0 {
                return Err(Error::Invalid(format!("{tag}: alpha must be >= 0")));
            }
            if b.gamma <= 0.0 {
                return Err(Error::Invalid(format!("{tag}: gamma must be > 0")));
            }
            if b.temperature < 0.0 {
                return Err(Error::Invalid(format!("{tag}: temperature must be >= 0")));
            }
        }

        let eps_a = system.statistics;
        let mut idx: Vec<usize> = (0..baths.len()).collect();
        // opposite statistics first, stable
        idx.sort_by_key(|&i| baths[i].statistics == eps_a);
        let n_opposite = baths.iter().filter(|b| b.statistics != eps_a).count();
        let n_same = baths.len() - n_opposite;
        let mut config_order = vec![0; baths.len()];
        for (pos, &i) in idx.iter().enumerate() {
            config_order[i] = pos;
        }
        let ordered: Vec<BathSpec> = idx.iter().map(|&i| baths[i].clone()).collect();

        let shift = 2.0 * sorted_sum(ordered.iter().map(|b| b.alpha * b.gamma).collect());
        let (omega, big_omega) = match system.frequency_mode {
            FrequencyMode::Bare => (system.frequency_value, system.frequency_value - shift),
            FrequencyMode::Renormalized => (system.frequency_value + shift, system.frequency_value),
        };
        if !(big_omega > 0.0) {
            return Err(Error::Units(format!(
                "renormalized frequency must be positive, got {big_omega}"
            )));
        }
        let g0 = sorted_sum(ordered.iter().map(|b| b.alpha).collect());
        let g_opp = sorted_sum(ordered[..n_opposite].iter().map(|b| b.alpha).collect());
        // With every alpha zero the split is undefined; report 0.
        let p = if g0 > 0.0 { g_opp / g0 } else { 0.0 };

        Ok(Scenario {
            system,
            baths: ordered,
            omega,
            big_omega,
            n_opposite,
            n_same,
            p,
            g0,
            config_order,
        })
    }

    pub fn baths_in_config_order(&self) -> Vec<BathSpec> {
        self.config_order
            .iter()
            .map(|&i| self.baths[i].clone())
            .collect()
    }

    pub fn n_baths(&self) -> usize {
        self.baths.len()
    }

    pub fn eps_a(&self) -> f64 {
        self.system.statistics.sign()
    }

    pub fn is_opposite(&self, lambda: usize) -> bool {
        lambda < self.n_opposite
    }

    pub fn is_pure(&self) -> bool {
        self.n_opposite == 0
    }

    /// Short label like `f-b1-f2` (system letter, then baths in stored order).
    pub fn label(&self) -> String {
        let mut s = String::new();
        s.push(self.system.statistics.letter());
        for (i, b) in self.baths.iter().enumerate() {
            let _ = write!(s, "-{}{}", b.statistics.letter(), i + 1);
        }
        s
    }

    /// Config text reproducing this scenario exactly (frequency mode preserved).
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let sys = &self.system;
        let _ = writeln!(s, "[system]");
        let _ = writeln!(s, "statistics = {}", sys.statistics.name());
        let _ = writeln!(s, "omega_mode = {}", sys.frequency_mode.name());
        let _ = writeln!(s, "frequency = {:?}", sys.frequency_value);
        let _ = writeln!(s, "n0 = {:?}", sys.n0);
        for (i, b) in self.baths_in_config_order().iter().enumerate() {
            let _ = writeln!(s, "\n[bath.{}]", i + 1);
            let _ = writeln!(s, "statistics = {}", b.statistics.name());
            let _ = writeln!(s, "alpha = {:?}", b.alpha);
            let _ = writeln!(s, "gamma = {:?}", b.gamma);
            let _ = writeln!(s, "temperature = {:?}", b.temperature);
        }
        s
    }

    /// Same physics expressed with the bare frequency.
    pub fn to_bare(&self) -> Result<Scenario> {
        let mut system = self.system.clone();
        system.frequency_mode = FrequencyMode::Bare;
        system.frequency_value = self.omega;
        Scenario::new(system, self.baths_in_config_order())
    }

    pub fn with_n0(&self, n0: f64) -> Result<Scenario> {
        let mut system = self.system.clone();
        system.n0 = n0;
        Scenario::new(system, self.baths_in_config_order())
    }

    /// Hex digest of the canonical config text (first 16 hex digits).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_config_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Thermal occupation at the bare frequency when all baths share one temperature.
    pub fn thermal_occupation_reference(&self) -> Result<f64> {
        let t0 = self.baths[0].temperature;
        if self.baths.iter().any(|b| b.temperature != t0) {
            return Err(Error::Precondition(
                "thermal reference needs equal bath temperatures".into(),
            ));
        }
        if t0 <= 0.0 {
            return Err(Error::Precondition(
                "thermal reference needs a positive temperature".into(),
            ));
        }
        bath_occ(self.omega, t0, self.eps_a())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(stat: Statistics, mode: FrequencyMode, f: f64) -> SystemSpec {
        SystemSpec {
            statistics: stat,
            frequency_mode: mode,
            frequency_value: f,
            n0: 0.0,
        }
    }

    fn bath(stat: Statistics, alpha: f64, gamma: f64, t: f64) -> BathSpec {
        BathSpec {
            statistics: stat,
            alpha,
            gamma,
            temperature: t,
        }
    }

    #[test]
    fn zero_coupling_keeps_frequency() {
        let sc = Scenario::new(
            sys(Statistics::Bose, FrequencyMode::Bare, 1.0),
            vec![bath(Statistics::Bose, 0.0, 10.0, 1.0)],
        )
        .unwrap();
        assert_eq!(sc.big_omega, 1.0);
        assert_eq!(sc.p, 0.0);
    }

    #[test]
    fn two_bath_bare_frequency() {
        let sc = Scenario::new(
            sys(Statistics::Fermi, FrequencyMode::Renormalized, 1.0),
            vec![
                bath(Statistics::Fermi, 0.1, 10.0, 1.0),
                bath(Statistics::Fermi, 0.05, 15.0, 0.1),
            ],
        )
        .unwrap();
        assert!((sc.omega - 4.5).abs() < 1e-14);
        assert!((sc.g0 - 0.15).abs() < 1e-15);
    }

    #[test]
    fn p_counts_opposite_weight() {
        let sc = Scenario::new(
            sys(Statistics::Fermi, FrequencyMode::Renormalized, 1.0),
            vec![
                bath(Statistics::Bose, 0.1, 10.0, 1.0),
                bath(Statistics::Fermi, 0.05, 15.0, 0.1),
            ],
        )
        .unwrap();
        assert!((sc.p - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(sc.label(), "f-b1-f2");
    }

    #[test]
    fn opposite_baths_are_moved_first() {
        let sc = Scenario::new(
            sys(Statistics::Bose, FrequencyMode::Bare, 5.0),
            vec![
                bath(Statistics::Bose, 0.05, 15.0, 0.1),
                bath(Statistics::Fermi, 0.1, 10.0, 1.0),
            ],
        )
        .unwrap();
        assert_eq!(sc.baths[0].statistics, Statistics::Fermi);
        assert_eq!(sc.n_opposite, 1);
        assert_eq!(sc.n_same, 1);
    }

    #[test]
    fn rejects_negative_renormalized_frequency() {
        let err = Scenario::new(
            sys(Statistics::Bose, FrequencyMode::Bare, 1.0),
            vec![bath(Statistics::Bose, 0.1, 10.0, 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Units(_)));
    }

    #[test]
    fn rejects_bad_fields() {
        let mut s = sys(Statistics::Fermi, FrequencyMode::Bare, 1.0);
        s.n0 = 1.5;
        assert!(Scenario::new(s, vec![bath(Statistics::Fermi, 0.0, 1.0, 1.0)]).is_err());
        let s = sys(Statistics::Bose, FrequencyMode::Bare, 1.0);
        assert!(Scenario::new(s.clone(), vec![bath(Statistics::Bose, -0.1, 1.0, 1.0)]).is_err());
        assert!(Scenario::new(s.clone(), vec![bath(Statistics::Bose, 0.1, 0.0, 1.0)]).is_err());
        assert!(Scenario::new(s.clone(), vec![bath(Statistics::Bose, 0.1, 1.0, -1.0)]).is_err());
        assert!(Scenario::new(s, vec![]).is_err());
    }

    #[test]
    fn thermal_reference_values() {
        let mk = |stat| {
            Scenario::new(
                sys(stat, FrequencyMode::Bare, 1.0),
                vec![bath(stat, 0.0, 10.0, 1.0)],
            )
            .unwrap()
        };
        let e = std::f64::consts::E;
        let f = mk(Statistics::Fermi)
            .thermal_occupation_reference()
            .unwrap();
        let b = mk(Statistics::Bose).thermal_occupation_reference().unwrap();
        assert!((f - 1.0 / (e + 1.0)).abs() < 1e-15);
        assert!((b - 1.0 / (e - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn thermal_reference_needs_equal_temperatures() {
        let sc = Scenario::new(
            sys(Statistics::Fermi, FrequencyMode::Bare, 1.0),
            vec![
                bath(Statistics::Fermi, 0.0, 10.0, 1.0),
                bath(Statistics::Fermi, 0.0, 10.0, 2.0),
            ],
        )
        .unwrap();
        assert!(matches!(
            sc.thermal_occupation_reference(),
            Err(Error::Precondition(_))
        ));
    }
}

//! Reference parameter sets.

use crate::scenario::{BathSpec, FrequencyMode, Scenario, Statistics, SystemSpec};

/// Omega = 1, gamma = (10, 15), alpha = (0.1, 0.05), T = (1, 0.1), n0 = 0.
pub fn two_bath(system: Statistics, bath1: Statistics, bath2: Statistics) -> Scenario {
    two_bath_with(system, bath1, bath2, 1.0, 0.1)
}

pub fn two_bath_with(
    system: Statistics,
    bath1: Statistics,
    bath2: Statistics,
    t1: f64,
    t2: f64,
) -> Scenario {
    Scenario::new(
        SystemSpec {
            statistics: system,
            frequency_mode: FrequencyMode::Renormalized,
            frequency_value: 1.0,
            n0: 0.0,
        },
        vec![
            BathSpec {
                statistics: bath1,
                alpha: 0.1,
                gamma: 10.0,
                temperature: t1,
            },
            BathSpec {
                statistics: bath2,
                alpha: 0.05,
                gamma: 15.0,
                temperature: t2,
            },
        ],
    )
    .expect("reference parameters are valid")
}

/// The four curve families: f-f1-f2, b-b1-b2, f-b1-f2, b-f1-b2.
pub fn two_bath_family() -> Vec<Scenario> {
    use Statistics::{Bose as B, Fermi as F};
    vec![
        two_bath(F, F, F),
        two_bath(B, B, B),
        two_bath(F, B, F),
        two_bath(B, F, B),
    ]
}

/// Single bath with bare omega = 1, gamma = 100, T = 1.
pub fn markov(stat: Statistics, alpha: f64) -> Scenario {
    Scenario::new(
        SystemSpec {
            statistics: stat,
            frequency_mode: FrequencyMode::Bare,
            frequency_value: 1.0,
            n0: 0.0,
        },
        vec![BathSpec {
            statistics: stat,
            alpha,
            gamma: 100.0,
            temperature: 1.0,
        }],
    )
    .expect("markov parameters are valid")
}

//! Bundled synthetic specs used by the experiments and their tests.

use serde::Serialize;

use crate::data::GroupPair;
use crate::error::Result;
use crate::sim::synthetic::{concentration_for_tpr, GroupSpec, SyntheticSpec, TrueCalibration};

/// A synthetic population recipe with the pair whose gap the experiments estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedSpec {
    pub name: String,
    pub spec: SyntheticSpec,
    pub unprivileged: String,
    pub privileged: String,
}

impl NamedSpec {
    pub fn pair(&self) -> Result<GroupPair> {
        self.spec.pair(&self.unprivileged, &self.privileged)
    }
}

fn group(name: &str, proportion: f64, positive_rate: f64, concentration: f64, calibration: TrueCalibration) -> GroupSpec {
    GroupSpec {
        name: name.into(),
        proportion,
        positive_rate,
        concentration,
        calibration,
    }
}

fn named(name: &str, groups: Vec<GroupSpec>, population: usize, seed: u64) -> NamedSpec {
    let unprivileged = groups[1].name.clone();
    let privileged = groups[0].name.clone();
    NamedSpec {
        name: name.into(),
        spec: SyntheticSpec {
            groups,
            population,
            seed,
        },
        unprivileged,
        privileged,
    }
}

/// Income-style data split by race: a small minority, low positive rates
/// and an overconfident model whose miscalibration differs by group.
pub fn adult_like_spec(population: usize, seed: u64) -> NamedSpec {
    named(
        "adult_like",
        vec![
            group("white", 0.85, 0.26, 1.6, TrueCalibration::beta(0.6, 0.7, -0.2)),
            group("nonwhite", 0.15, 0.15, 1.6, TrueCalibration::beta(0.5, 0.6, -0.5)),
        ],
        population,
        seed,
    )
}

/// Recidivism-style data: balanced groups, high base rates and an
/// underconfident model.
pub fn compas_like_spec(population: usize, seed: u64) -> NamedSpec {
    named(
        "compas_like",
        vec![
            group("caucasian", 0.6, 0.39, 4.0, TrueCalibration::beta(1.8, 1.6, 0.2)),
            group("african_american", 0.4, 0.51, 4.0, TrueCalibration::beta(1.5, 1.9, -0.3)),
        ],
        population,
        seed,
    )
}

/// Marketing-style data: rare positives and a score shifted upward for the
/// younger group.
pub fn bank_like_spec(population: usize, seed: u64) -> NamedSpec {
    named(
        "bank_like",
        vec![
            group("older", 0.7, 0.12, 1.0, TrueCalibration::beta(0.7, 1.2, -0.4)),
            group("younger", 0.3, 0.15, 1.0, TrueCalibration::beta(0.6, 0.9, -0.8)),
        ],
        population,
        seed,
    )
}

/// Distortions outside the beta-calibration family: kinked piecewise-linear
/// maps.
pub fn piecewise_spec(population: usize, seed: u64) -> NamedSpec {
    named(
        "piecewise",
        vec![
            group(
                "male",
                0.65,
                0.3,
                2.0,
                TrueCalibration::Piecewise {
                    knots: vec![(0.2, 0.08), (0.5, 0.4), (0.85, 0.8)],
                },
            ),
            group(
                "female",
                0.35,
                0.12,
                2.0,
                TrueCalibration::Piecewise {
                    knots: vec![(0.3, 0.1), (0.6, 0.35), (0.9, 0.75)],
                },
            ),
        ],
        population,
        seed,
    )
}

/// Genuinely miscalibrated specs, one of them out of family.
pub fn miscalibrated_suite(population: usize, seed: u64) -> Vec<NamedSpec> {
    vec![
        adult_like_spec(population, seed),
        compas_like_spec(population, seed.wrapping_add(1)),
        bank_like_spec(population, seed.wrapping_add(2)),
        piecewise_spec(population, seed.wrapping_add(3)),
    ]
}

/// Honestly calibrated groups; per-group outcomes are plain Bernoulli draws.
pub fn well_specified_spec(population: usize, seed: u64) -> NamedSpec {
    named(
        "well_specified",
        vec![
            group("g0", 0.5, 0.4, 3.0, TrueCalibration::IDENTITY),
            group("g1", 0.5, 0.3, 3.0, TrueCalibration::IDENTITY),
        ],
        population,
        seed,
    )
}

/// Mild beta-family miscalibration.
pub fn in_family_spec(population: usize, seed: u64) -> NamedSpec {
    named(
        "in_family",
        vec![
            group("g0", 0.6, 0.35, 2.0, TrueCalibration::beta(1.2, 0.9, 0.1)),
            group("g1", 0.4, 0.25, 2.0, TrueCalibration::beta(0.9, 1.1, -0.2)),
        ],
        population,
        seed,
    )
}

/// Ten beta-family configurations with varied group sizes, base rates and
/// distortions.
pub fn error_bound_configs(population: usize, seed: u64) -> Vec<NamedSpec> {
    let cals = [
        ((1.0, 1.0, 0.0), (0.7, 0.8, -0.3)),
        ((1.4, 1.2, 0.3), (0.6, 0.6, 0.0)),
        ((0.8, 1.5, -0.5), (1.2, 0.7, 0.4)),
        ((2.0, 2.0, 0.0), (1.0, 1.0, 0.5)),
        ((0.5, 0.5, -0.2), (0.5, 0.9, -0.6)),
        ((1.1, 0.9, 0.8), (1.3, 1.6, -0.8)),
        ((0.9, 0.9, 0.0), (1.8, 1.2, 0.2)),
        ((1.5, 0.8, 0.4), (0.8, 1.5, -0.4)),
        ((0.7, 1.0, 0.2), (0.7, 1.0, -0.2)),
        ((1.2, 1.2, -0.6), (0.6, 0.8, 0.6)),
    ];
    cals.iter()
        .enumerate()
        .map(|(i, &((a0, b0, c0), (a1, b1, c1)))| {
            let f = i as f64 / 9.0;
            named(
                &format!("bound_{i}"),
                vec![
                    group("g0", 0.5 + 0.3 * f, 0.2 + 0.2 * f, 1.0 + 3.0 * f, TrueCalibration::beta(a0, b0, c0)),
                    group("g1", 0.5 - 0.3 * f, 0.4 - 0.15 * f, 3.0 - 1.5 * f, TrueCalibration::beta(a1, b1, c1)),
                ],
                population,
                seed.wrapping_add(i as u64),
            )
        })
        .collect()
}

/// Two honestly calibrated groups with 20% positives, the minority (20% of
/// the data) at TPR 0.90 and the majority at TPR 0.95. The pair is ordered
/// majority first so the true TPR gap is +0.05.
pub fn tpr_gap_spec(population: usize, seed: u64) -> SyntheticSpec {
    let k = |tpr| concentration_for_tpr(0.2, tpr).expect("reachable TPR");
    SyntheticSpec {
        groups: vec![
            group("majority", 0.8, 0.2, k(0.95), TrueCalibration::IDENTITY),
            group("minority", 0.2, 0.2, k(0.90), TrueCalibration::IDENTITY),
        ],
        population,
        seed,
    }
}

/// Bundled specs addressable by name.
pub fn preset(name: &str, population: usize, seed: u64) -> Option<NamedSpec> {
    Some(match name {
        "adult_like" => adult_like_spec(population, seed),
        "compas_like" => compas_like_spec(population, seed),
        "bank_like" => bank_like_spec(population, seed),
        "piecewise" => piecewise_spec(population, seed),
        "well_specified" => well_specified_spec(population, seed),
        "in_family" => in_family_spec(population, seed),
        "tpr_gap" => NamedSpec {
            name: "tpr_gap".into(),
            spec: tpr_gap_spec(population, seed),
            unprivileged: "majority".into(),
            privileged: "minority".into(),
        },
        _ => return None,
    })
}

pub const PRESETS: [&str; 7] = [
    "adult_like",
    "compas_like",
    "bank_like",
    "piecewise",
    "well_specified",
    "in_family",
    "tpr_gap",
];

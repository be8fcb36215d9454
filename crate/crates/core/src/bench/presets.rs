//! Named sweep grids for the reference figures.

use super::SweepConfig;
use crate::scenario::PlacementKind;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> SweepConfig,
}

impl Preset {
    pub fn config(&self) -> SweepConfig {
        (self.build)()
    }
}

const ZETA_GRID: [f64; 5] = [0.06, 0.08, 0.10, 0.12, 0.16];

fn fig3a() -> SweepConfig {
    SweepConfig {
        placements: vec![PlacementKind::Random],
        anchor_counts: vec![3],
        zeta_values: ZETA_GRID.to_vec(),
        sigma_values: vec![0.0],
        ..SweepConfig::default()
    }
}

fn fig3b() -> SweepConfig {
    SweepConfig {
        placements: vec![PlacementKind::Designed],
        ..fig3a()
    }
}

fn fig5() -> SweepConfig {
    SweepConfig {
        placements: vec![PlacementKind::Random, PlacementKind::Designed],
        anchor_counts: vec![3],
        zeta_values: vec![0.06],
        sigma_values: vec![0.0, 2.0, 4.0],
        ..SweepConfig::default()
    }
}

fn fig7() -> SweepConfig {
    SweepConfig {
        placements: vec![PlacementKind::Random, PlacementKind::Designed],
        anchor_counts: vec![3, 4, 5],
        zeta_values: vec![0.08],
        sigma_values: vec![2.0],
        ..SweepConfig::default()
    }
}

pub const PRESETS: [Preset; 4] = [
    Preset {
        name: "fig3a",
        description: "RMSE versus zeta, random placement, sigma=0, M=3",
        build: fig3a,
    },
    Preset {
        name: "fig3b",
        description: "RMSE versus zeta, designed placement, sigma=0, M=3",
        build: fig3b,
    },
    Preset {
        name: "fig5",
        description: "RMSE versus sigma, zeta=0.06, M=3, both placements",
        build: fig5,
    },
    Preset {
        name: "fig7",
        description: "RMSE versus M, zeta=0.08, sigma=2, both placements",
        build: fig7,
    },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

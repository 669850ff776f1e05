//! Fixed benchmark inputs shared by the criterion targets.

use spectrum_core::presets::{self, NineNodeGraph, Preset, PresetOptions};
use spectrum_core::{Scenario, SeedRoot};

pub fn nine_node(graph: NineNodeGraph) -> Scenario {
    let opts = PresetOptions {
        graph: Some(graph),
        ..PresetOptions::default()
    };
    presets::generate(Preset::Paper9x5, &opts, SeedRoot(7))
        .and_then(|c| c.validate())
        .expect("preset is valid")
}

pub fn grid() -> Scenario {
    presets::generate(Preset::GridObstacles, &PresetOptions::default(), SeedRoot(7))
        .and_then(|c| c.validate())
        .expect("preset is valid")
}

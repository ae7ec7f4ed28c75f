//! Seeded synthetic scenarios: TPS/volume/speed series and tweet corpora
//! with a planted lagged correlation and keyword-bearing events.

pub mod config;
pub mod generate;
pub mod words;

pub use config::{EventSpec, ScenarioConfig};
pub use generate::{generate, EventRecord, PlantedCorrelation, Scenario, ScenarioManifest};

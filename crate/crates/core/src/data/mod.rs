//! Gridded inputs, fire observations and the evaluation protocol.

mod grid;
pub mod io;
mod protocol;
mod raster;
mod resample;
pub mod synth;

pub use grid::GridDefinition;
pub use protocol::{fuzzy_match, fuzzy_outcomes, quantile_threshold, temporal_split, DateRange, Outcome};
pub use raster::{Dataset, FireObservationGrid, Layer, RasterStack, Variable, VariableKind, INPUT_VARIABLES};
pub use resample::{pool_fire, resample_categorical, resample_continuous};

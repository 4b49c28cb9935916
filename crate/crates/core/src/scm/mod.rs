//! Structural causal models: expressions, noise, sampling, term taxonomy,
//! presets and the text model format.

mod dataset;
mod expr;
mod model;
mod noise;
pub mod presets;
mod spec_file;
mod taxonomy;

pub use dataset::{Column, Dataset};
pub use expr::{Expr, NoiseId, UnaryKind};
pub use model::{ScmModel, SAMPLE_BLOCK};
pub use noise::{Distribution, NoiseSpec};
pub use presets::{preset, preset_by_name, Preset, PresetName};
pub use spec_file::ModelSpecFile;
pub use taxonomy::{decompose, Bucket, LinearTerm, TermTaxonomy};

//! Deterministic file formats: JSON scene/demo/result documents and SVG plots.
//!
//! All numbers are emitted with 17 significant digits so doubles round-trip
//! bit-faithfully, and object keys are sorted, so identical inputs always
//! produce byte-identical files.

mod json;
mod svg;

pub use json::{
    demo_to_value, load_demo, load_result, load_scene, result_to_value, save_demo, save_result,
    save_scene, scene_to_value, validation_to_value, write_value, Diagnostics, ResultDoc,
    FORMAT_VERSION,
};
pub use svg::{plot_svg, write_plot, PlotLayer, PlotStyle};

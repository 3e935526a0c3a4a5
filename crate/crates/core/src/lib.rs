pub mod bridge;
pub mod calibrate;
pub mod classify;
pub mod critic;
pub mod eval;
pub mod client;
pub mod extract;
pub mod geom;
pub mod layout;
pub mod model;
pub mod ocr;
pub mod perturb;
pub mod pipeline;
pub mod raster;
pub mod render;
pub mod svgdoc;
pub mod synth;

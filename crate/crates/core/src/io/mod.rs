//! On-disk formats and report rendering.

pub mod fixlog;
pub mod heatmap;
pub mod manifest;
pub mod report;
pub mod tensor;

pub use fixlog::{read_logs, write_logs};
pub use heatmap::{export_heatmap, Palette};
pub use manifest::{load_suite, store_suite};
pub use report::OutputFormat;
pub use tensor::{read_tensor, write_tensor, Tensor};

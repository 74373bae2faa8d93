//! Front end for `qsd-core`: JSON model files, text/JSON rendering and the
//! `qsd` command dispatcher.

pub mod model_file;
pub mod render;
pub mod run;

pub use model_file::ModelFile;
pub use run::{run, BackendChoice, Command, Outcome, OutputFormat, QsdMethod, RunConfig};

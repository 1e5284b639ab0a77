//! `describe`: dataset statistics as pretty-printed JSON.

use std::path::Path;

use kmesn::data::describe;

use crate::config::ExperimentConfig;
use crate::model_io::load_dataset;
use crate::CliError;

pub fn run(config: &ExperimentConfig, path: &Path) -> Result<(), CliError> {
    let ds = load_dataset(path, config.task_kind())?;
    println!("{}", serde_json::to_string_pretty(&describe(&ds))?);
    Ok(())
}

//! Optional TOML configuration: one table per subcommand, with the same
//! keys as the long flags.

use std::path::Path;

use serde::Deserialize;

use crate::commands::{capacity, case_study, fit, simulate, support, synth};
use crate::CliResult;

#[derive(Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub support: support::Args,
    pub case_study: case_study::Args,
    pub fit_mixture: fit::Args,
    pub simulate: simulate::FileSection,
    pub capacity_prior: capacity::Args,
    pub synth: synth::Args,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }
}

/// `merge(self, file)` keeping each flag that was given and falling back to
/// the file's value otherwise.
macro_rules! merge_options {
    ($ty:ident { $($field:ident),* $(,)? }) => {
        impl $ty {
            pub fn merge(self, file: Self) -> Self {
                Self { $($field: self.$field.or(file.$field)),* }
            }
        }
    };
}
pub(crate) use merge_options;

//! Library side of the `deepres` command-line tool: config parsing, the
//! artifact directory and the subcommands.

pub mod commands;
pub mod config;
pub mod output;

use std::path::Path;

use config::{ConfigError, ExperimentConfig};

/// Exit codes: 0 success, 1 runtime failure of a stage, 2 invalid input or
/// config, 3 a verification check ran and failed.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("stage `{stage}` failed: {cause}")]
    Stage { stage: String, cause: String },
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn stage(stage: &str, cause: impl std::fmt::Display) -> Self {
        CliError::Stage {
            stage: stage.into(),
            cause: cause.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Stage { .. } => 1,
            CliError::CheckFailed(_) => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Context {
    pub quiet: bool,
}

impl Context {
    /// Progress goes to stderr and is silenced by `--quiet`.
    pub fn log(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    /// Result lines always go to stdout.
    pub fn result(&self, msg: &str) {
        println!("{msg}");
    }
}

pub const PRESETS: &[(&str, &str)] = &[
    ("quickstart", include_str!("../presets/quickstart.conf")),
    ("ode", include_str!("../presets/ode.conf")),
    ("sde", include_str!("../presets/sde.conf")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

/// `arg` is a config file path or, failing that, a preset name. Without an
/// argument the built-in defaults are used.
pub fn load_config(arg: Option<&str>) -> Result<ExperimentConfig, CliError> {
    let Some(arg) = arg else {
        return Ok(ExperimentConfig::default());
    };
    let path = Path::new(arg);
    let text = if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{arg}: {e}")))?
    } else if let Some(text) = preset(arg) {
        text.to_string()
    } else {
        let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
        return Err(CliError::Input(format!(
            "`{arg}` is neither a config file nor a preset ({})",
            names.join(", ")
        )));
    };
    Ok(ExperimentConfig::parse(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for (name, text) in PRESETS {
            let cfg = ExperimentConfig::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            if *name == "quickstart" {
                cfg.validate_training().unwrap();
            }
            if cfg.limits.enabled || *name != "quickstart" {
                cfg.validate_limits()
                    .unwrap_or_else(|e| panic!("{name}: {e}"));
            }
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
        assert_eq!(CliError::stage("train", "x").exit_code(), 1);
        assert_eq!(CliError::CheckFailed("x".into()).exit_code(), 3);
    }
}

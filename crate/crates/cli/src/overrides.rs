//! One `--<key>` flag per config key, generated from the key list so the two
//! can never drift apart.

use clap::{Arg, ArgMatches, Args, Command, FromArgMatches};
use gfmfr_core::ExperimentConfig;

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn help_for(key: &str) -> String {
    let default = ExperimentConfig::default().get(key).unwrap_or_default();
    if default.is_empty() {
        format!("Sets config key `{key}`")
    } else {
        format!("Sets config key `{key}` [default: {default}]")
    }
}

/// Config values given as named flags, in key order.
#[derive(Debug, Clone, Default)]
pub struct ConfigFlags {
    pub values: Vec<(String, String)>,
}

impl FromArgMatches for ConfigFlags {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut out = Self::default();
        out.update_from_arg_matches(m)?;
        Ok(out)
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        self.values.clear();
        for key in ExperimentConfig::KEYS {
            if let Some(v) = m.get_one::<String>(key) {
                self.values.push((key.to_string(), v.clone()));
            }
        }
        Ok(())
    }
}

impl Args for ConfigFlags {
    fn augment_args(cmd: Command) -> Command {
        ExperimentConfig::KEYS.iter().fold(cmd, |cmd, key| {
            cmd.arg(
                Arg::new(*key)
                    .long(flag_name(key))
                    .value_name("VALUE")
                    .help(help_for(key))
                    .help_heading("Config overrides"),
            )
        })
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

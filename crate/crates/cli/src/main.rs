mod commands;
mod error;
mod settings;

use std::collections::BTreeMap;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches};

use error::{CliError, CliResult, EXIT_OK};
use settings::{read_config_file, settings_for, Command, FileValues, Kind, Settings, SEED_ENV};

fn cli() -> clap::Command {
    let mut root = clap::Command::new("stegodetect")
        .about("Detect steganographic text with recurrent networks")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("Config file of `key = value` lines under [section] headers"),
        );
    for cmd in Command::ALL {
        let mut sub = clap::Command::new(cmd.name()).about(cmd.about());
        for setting in settings_for(cmd) {
            let mut arg = Arg::new(setting.key)
                .long(setting.key)
                .help(setting.help)
                .action(ArgAction::Set);
            arg = match setting.kind {
                Kind::Flag => arg.num_args(0..=1).default_missing_value("true").value_name("BOOL"),
                Kind::Path => arg.value_name("PATH"),
                Kind::Text => arg.value_name("VALUE"),
            };
            sub = sub.arg(arg);
        }
        root = root.subcommand(sub);
    }
    root
}

fn settings_from(cmd: Command, matches: &ArgMatches, config: Option<&String>) -> CliResult<Settings> {
    let mut flags = BTreeMap::new();
    for setting in settings_for(cmd) {
        if let Some(v) = matches.get_one::<String>(setting.key) {
            flags.insert(setting.key, v.clone());
        }
    }
    let file = match config {
        Some(path) => read_config_file(std::path::Path::new(path))?,
        None => FileValues::new(),
    };
    Settings::merge(cmd, &flags, &file, std::env::var(SEED_ENV).ok())
}

fn run() -> CliResult<()> {
    let matches = cli().try_get_matches().map_err(|e| {
        if e.use_stderr() {
            CliError::Usage(e.to_string().trim_end().to_string())
        } else {
            // --help and --version
            let _ = e.print();
            std::process::exit(0);
        }
    })?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let cmd = Command::ALL.into_iter().find(|c| c.name() == name).unwrap();
    let settings = settings_from(cmd, sub, sub.get_one::<String>("config"))?;
    eprint!("{}", settings.echo());
    commands::run(&settings)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("stegodetect: {e}");
            let code = e.exit_code();
            debug_assert!(code != 0);
            ExitCode::from(code.clamp(1, 255) as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use error::EXIT_USAGE;

    #[test]
    fn command_definitions_are_consistent() {
        cli().debug_assert();
    }

    #[test]
    fn usage_errors_map_to_exit_two() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
    }
}

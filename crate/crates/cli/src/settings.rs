//! Every setting the commands understand, where it can come from, and how
//! the sources are merged: flags, then the config file, then defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::error::CliError;

pub const SEED_ENV: &str = "STEGODETECT_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Generate,
    Train,
    Eval,
    Predict,
    ExportFeatures,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Generate,
        Command::Train,
        Command::Eval,
        Command::Predict,
        Command::ExportFeatures,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Predict => "predict",
            Command::ExportFeatures => "export-features",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::Generate => "Synthesize cover and stego corpora from an n-gram language model",
            Command::Train => "Train a detector and write its checkpoint and training log",
            Command::Eval => "Evaluate a checkpoint on a corpus split",
            Command::Predict => "Classify text lines with a checkpoint",
            Command::ExportFeatures => "Dump fused sentence features for external visualization",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Text,
    Path,
    Flag,
}

pub struct Setting {
    pub section: &'static str,
    pub key: &'static str,
    /// `None` means required; `Some("")` means derived from other settings.
    pub default: Option<&'static str>,
    pub kind: Kind,
    pub commands: &'static [Command],
    pub help: &'static str,
}

use Command::{Eval, ExportFeatures as Export, Generate, Predict, Train};

const fn s(
    section: &'static str,
    key: &'static str,
    default: Option<&'static str>,
    kind: Kind,
    commands: &'static [Command],
    help: &'static str,
) -> Setting {
    Setting {
        section,
        key,
        default,
        kind,
        commands,
        help,
    }
}

const DERIVED: Option<&str> = Some("");

pub static SCHEMA: &[Setting] = &[
    s(
        "general",
        "seed",
        DERIVED,
        Kind::Text,
        &[Generate, Train, Eval, Export],
        "Master seed (falls back to $STEGODETECT_SEED, then 0)",
    ),
    s(
        "generate",
        "source",
        None,
        Kind::Path,
        &[Generate],
        "Plain text the language model is trained on",
    ),
    s(
        "generate",
        "out-dir",
        None,
        Kind::Path,
        &[Generate],
        "Directory for the per-bpw files and manifest",
    ),
    s(
        "generate",
        "bpw",
        Some("0,1,2,3,4,5"),
        Kind::Text,
        &[Generate],
        "Comma-separated embedding rates (0 = cover)",
    ),
    s(
        "generate",
        "per-class",
        Some("2000"),
        Kind::Text,
        &[Generate],
        "Sentences per rate",
    ),
    s(
        "generate",
        "order",
        Some("3"),
        Kind::Text,
        &[Generate],
        "N-gram order of the language model",
    ),
    s(
        "generate",
        "verify",
        Some("false"),
        Kind::Flag,
        &[Generate],
        "Decode every written stego line and check its payload",
    ),
    s(
        "data",
        "data",
        None,
        Kind::Path,
        &[Train, Eval, Export],
        "Corpus directory, one sentence per line",
    ),
    s(
        "data",
        "manifest",
        DERIVED,
        Kind::Path,
        &[Train, Eval, Export],
        "Manifest mapping files to bpw (default <data>/manifest.tsv)",
    ),
    s(
        "data",
        "task",
        DERIVED,
        Kind::Text,
        &[Train, Eval, Export],
        "binary or rate (eval and export default to the checkpoint's task)",
    ),
    s(
        "data",
        "bpw",
        DERIVED,
        Kind::Text,
        &[Train, Eval, Export],
        "Stego rate of a binary task",
    ),
    s(
        "data",
        "split-seed",
        DERIVED,
        Kind::Text,
        &[Train, Eval, Export],
        "Seed of the train/validation/test split (default: seed)",
    ),
    s(
        "data",
        "split-ratios",
        Some("0.8,0.1,0.1"),
        Kind::Text,
        &[Train, Eval, Export],
        "Train, validation and test fractions",
    ),
    s(
        "data",
        "vocab-cap",
        Some("10000"),
        Kind::Text,
        &[Train],
        "Vocabulary size including <pad> and <unk>",
    ),
    s(
        "data",
        "min-freq",
        Some("1"),
        Kind::Text,
        &[Train],
        "Minimum training-split count for a word to get an id",
    ),
    s(
        "data",
        "split",
        DERIVED,
        Kind::Text,
        &[Eval, Export],
        "train, validation, test or all (eval: test, export: all)",
    ),
    s(
        "model",
        "arch",
        Some("ts-birnn"),
        Kind::Text,
        &[Train],
        "ts-birnn (bidirectional) or ts-rnn (unidirectional)",
    ),
    s(
        "model",
        "embedding-dim",
        Some("256"),
        Kind::Text,
        &[Train],
        "Word embedding width",
    ),
    s(
        "model",
        "num-layers",
        DERIVED,
        Kind::Text,
        &[Train],
        "Stacked LSTM layers (ts-birnn: 2, ts-rnn: 3)",
    ),
    s(
        "model",
        "hidden-units",
        DERIVED,
        Kind::Text,
        &[Train],
        "Units per layer and direction (ts-birnn: 100, ts-rnn: 200)",
    ),
    s(
        "model",
        "fused-dim",
        Some("128"),
        Kind::Text,
        &[Train],
        "Width of the fused feature",
    ),
    s(
        "model",
        "threshold",
        Some("0.5"),
        Kind::Text,
        &[Train],
        "Stego decision threshold of binary models",
    ),
    s(
        "train",
        "learning-rate",
        Some("0.001"),
        Kind::Text,
        &[Train],
        "Adam step size",
    ),
    s(
        "train",
        "batch-size",
        Some("128"),
        Kind::Text,
        &[Train],
        "Sentences per mini-batch",
    ),
    s(
        "train",
        "dropout",
        Some("0.5"),
        Kind::Text,
        &[Train],
        "Dropout rate between layers and on the fused feature",
    ),
    s(
        "train",
        "l2-coeff",
        Some("0.0001"),
        Kind::Text,
        &[Train],
        "L2 coefficient on weight matrices",
    ),
    s(
        "train",
        "max-epochs",
        Some("30"),
        Kind::Text,
        &[Train],
        "Upper bound on epochs",
    ),
    s(
        "train",
        "patience",
        Some("5"),
        Kind::Text,
        &[Train],
        "Epochs without validation improvement before stopping",
    ),
    s(
        "train",
        "clip-norm",
        Some("5"),
        Kind::Text,
        &[Train],
        "Global gradient-norm clip",
    ),
    s(
        "train",
        "precision",
        Some("f32"),
        Kind::Text,
        &[Train],
        "f32 or f64 arithmetic (checkpoints are always f32)",
    ),
    s(
        "output",
        "checkpoint",
        None,
        Kind::Path,
        &[Train, Eval, Predict, Export],
        "Checkpoint file",
    ),
    s(
        "output",
        "log",
        DERIVED,
        Kind::Path,
        &[Train],
        "Training log (default <checkpoint>.log.tsv)",
    ),
    s(
        "output",
        "report",
        DERIVED,
        Kind::Path,
        &[Eval],
        "Metric report (default <checkpoint>.report.tsv)",
    ),
    s("output", "features", None, Kind::Path, &[Export], "Feature dump file"),
    s(
        "output",
        "input",
        Some("-"),
        Kind::Path,
        &[Predict],
        "Text to classify, one sentence per line (- for stdin)",
    ),
    s(
        "output",
        "output",
        Some("-"),
        Kind::Path,
        &[Predict],
        "Where predictions go (- for stdout)",
    ),
];

pub fn settings_for(cmd: Command) -> impl Iterator<Item = &'static Setting> {
    SCHEMA.iter().filter(move |s| s.commands.contains(&cmd))
}

/// Config-file values keyed by `(section, key)`.
pub type FileValues = BTreeMap<(&'static str, &'static str), String>;

/// Reads a `key = value` file with `[section]` headers. Keys may use `-`
/// or `_`. Unknown keys are rejected; keys of other commands are allowed so
/// one file can drive a whole pipeline.
pub fn read_config_file(path: &Path) -> Result<FileValues, CliError> {
    let ini = Ini::load_from_file(path).map_err(|e| match e {
        ini::Error::Io(io) => CliError::Core(stegodetect::Error::Io {
            path: path.to_path_buf(),
            source: io,
        }),
        ini::Error::Parse(p) => CliError::Usage(format!("config file {}: {p}", path.display())),
    })?;
    let bad = |msg: String| CliError::Usage(format!("config file {}: {msg}", path.display()));
    let mut out = BTreeMap::new();
    for (section, props) in ini.iter() {
        for (k, v) in props.iter() {
            let key = k.trim().replace('_', "-");
            let matches: Vec<&Setting> = SCHEMA
                .iter()
                .filter(|s| s.key == key && section.is_none_or(|sec| sec == s.section))
                .collect();
            let setting = match matches.as_slice() {
                [one] => *one,
                [] => match section {
                    Some(sec) => return Err(bad(format!("unknown key {k:?} in [{sec}]"))),
                    None => return Err(bad(format!("unknown key {k:?}"))),
                },
                _ => return Err(bad(format!("key {k:?} is ambiguous outside a section"))),
            };
            out.insert((setting.section, setting.key), v.trim().to_string());
        }
    }
    Ok(out)
}

/// The effective settings of one command run.
#[derive(Clone, Debug)]
pub struct Settings {
    pub command: Command,
    values: BTreeMap<&'static str, String>,
}

impl Settings {
    /// Merges flags over file values over defaults, then fills in derived
    /// defaults and makes paths absolute.
    pub fn merge(
        command: Command,
        flags: &BTreeMap<&'static str, String>,
        file: &FileValues,
        env_seed: Option<String>,
    ) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for setting in settings_for(command) {
            let value = flags
                .get(setting.key)
                .or_else(|| file.get(&(setting.section, setting.key)))
                .cloned()
                .or_else(|| setting.default.map(str::to_string));
            match value {
                Some(v) => {
                    values.insert(setting.key, v);
                }
                None => {
                    return Err(CliError::Usage(format!(
                        "{}: missing required --{}",
                        command.name(),
                        setting.key
                    )))
                }
            }
        }
        let mut s = Settings { command, values };
        s.derive(env_seed)?;
        Ok(s)
    }

    fn derive(&mut self, env_seed: Option<String>) -> Result<(), CliError> {
        let cmd = self.command;
        if self.has("seed") && self.get("seed").is_empty() {
            let seed = env_seed.filter(|v| !v.trim().is_empty()).unwrap_or_else(|| "0".into());
            self.set("seed", seed.trim().to_string());
        }
        if self.has("seed") {
            self.parse::<u64>("seed")?;
        }
        for setting in settings_for(cmd).filter(|s| s.kind == Kind::Path) {
            let v = self.get(setting.key).to_string();
            if !v.is_empty() && v != "-" {
                let abs = std::path::absolute(&v)
                    .map_err(|e| CliError::Usage(format!("cannot resolve --{} {v:?}: {e}", setting.key)))?;
                self.set(setting.key, abs.display().to_string());
            }
        }
        self.fill("split-seed", |s| s.get("seed").to_string());
        self.fill("manifest", |s| {
            Path::new(s.get("data")).join("manifest.tsv").display().to_string()
        });
        self.fill("log", |s| format!("{}.log.tsv", s.get("checkpoint")));
        self.fill("report", |s| format!("{}.report.tsv", s.get("checkpoint")));
        self.fill(
            "split",
            |s| if s.command == Eval { "test".into() } else { "all".into() },
        );
        match cmd {
            Train => {
                self.fill("task", |_| "binary".into());
                let arch = self.get("arch").to_string();
                let (layers, units) = match arch.as_str() {
                    "ts-birnn" => ("2", "100"),
                    "ts-rnn" => ("3", "200"),
                    other => {
                        return Err(CliError::Usage(format!(
                            "unknown --arch {other:?} (ts-birnn or ts-rnn)"
                        )))
                    }
                };
                self.fill("num-layers", |_| layers.into());
                self.fill("hidden-units", |_| units.into());
            }
            Eval | Export => self.fill("task", |_| "checkpoint".into()),
            _ => {}
        }
        if self.has("task") {
            match self.get("task") {
                "binary" => {
                    if self.get("bpw").is_empty() {
                        if cmd == Train {
                            return Err(CliError::Usage("binary task needs --bpw".into()));
                        }
                        self.set("bpw", "checkpoint".into());
                    }
                }
                "rate" | "checkpoint" => self.fill("bpw", |_| "none".into()),
                other => return Err(CliError::Usage(format!("unknown --task {other:?} (binary or rate)"))),
            }
        }
        Ok(())
    }

    fn fill(&mut self, key: &'static str, value: impl FnOnce(&Self) -> String) {
        if self.has(key) && self.get(key).is_empty() {
            let v = value(self);
            self.set(key, v);
        }
    }

    fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn set(&mut self, key: &'static str, value: String) {
        self.values.insert(key, value);
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("setting {key} is not defined for {}", self.command.name()))
    }

    pub fn path(&self, key: &str) -> PathBuf {
        PathBuf::from(self.get(key))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.get(key);
        raw.parse()
            .map_err(|_| CliError::Usage(format!("--{key}: cannot parse {raw:?}")))
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.get(key) {
            "true" | "yes" | "1" | "on" => Ok(true),
            "false" | "no" | "0" | "off" => Ok(false),
            other => Err(CliError::Usage(format!(
                "--{key}: expected true or false, got {other:?}"
            ))),
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        self.get(key)
            .split(',')
            .map(|part| {
                part.trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("--{key}: cannot parse {part:?}")))
            })
            .collect()
    }

    /// The effective configuration as a config file.
    pub fn echo(&self) -> String {
        let mut out = format!("# effective configuration: stegodetect {}\n", self.command.name());
        let mut section = "";
        for setting in settings_for(self.command) {
            if setting.section != section {
                section = setting.section;
                let _ = writeln!(out, "[{section}]");
            }
            let _ = writeln!(out, "{} = {}", setting.key, self.get(setting.key));
        }
        out
    }
}

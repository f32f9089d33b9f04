//! Flat `key = value` configuration shared by every subcommand. A config
//! file supplies values, command-line flags override them, and per-command
//! defaults fill the rest.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Grid cells per unit length (h = 1/n).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,

    /// Mesh file written by `fraclap mesh`, instead of --n.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh_file: Option<PathBuf>,

    /// Truncation radius; also the halo width of generated meshes.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,

    /// Fractional order in (0, 1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,

    /// Use α = 1/3 (exact branch of the spectrum).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub alpha_third: bool,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_quadrature_degree: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement_levels: Option<usize>,

    /// coupled or modular.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,

    /// Initial data for `run`: vortex (unforced) or mms (manufactured).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,

    /// h or h2.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_mode: Option<String>,

    /// Comma-separated mesh sizes such as 1/4,1/8,1/16.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<String>,

    /// Velocity scale of the spectrum.
    #[arg(long = "U")]
    #[serde(rename = "U", skip_serializing_if = "Option::is_none")]
    pub u_scale: Option<f64>,

    /// Kolmogorov constant.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ck: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmin: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,

    /// Output path.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Mesh,
    Run,
    Mms,
    Spectrum,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Mesh => "mesh",
            Command::Run => "run",
            Command::Mms => "mms",
            Command::Spectrum => "spectrum",
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Command::Mesh => &["n", "lambda", "out"],
            Command::Run => &["dt", "t_final", "out"],
            Command::Mms => &["h", "dt_mode", "out"],
            Command::Spectrum => &["gamma", "nu", "U", "kmax", "out"],
        }
    }

    fn defaults(self) -> Vec<(&'static str, Value)> {
        let fem = || {
            vec![
                ("gamma", Value::Float(1.0)),
                ("nu", Value::Float(1.0)),
                ("scheme", Value::String("coupled".into())),
                ("pair_quadrature_degree", Value::Integer(6)),
                ("refinement_levels", Value::Integer(4)),
            ]
        };
        match self {
            Command::Mesh => vec![],
            Command::Run => {
                let mut d = fem();
                d.push(("initial", Value::String("vortex".into())));
                d
            }
            Command::Mms => {
                let mut d = fem();
                d.push(("lambda", Value::Float(1.0)));
                d.push(("t_final", Value::Float(0.5)));
                d
            }
            Command::Spectrum => vec![
                ("ck", Value::Float(fraclap::spectrum::DEFAULT_CK)),
                ("kmin", Value::Float(1.0)),
                ("points", Value::Integer(200)),
            ],
        }
    }

    fn optional(self) -> &'static [&'static str] {
        match self {
            Command::Mesh => &[],
            Command::Run => &["n", "mesh_file", "lambda", "alpha", "alpha_third"],
            Command::Mms | Command::Spectrum => &["alpha", "alpha_third"],
        }
    }

    fn allows(self, key: &str) -> bool {
        self.required().contains(&key)
            || self.optional().contains(&key)
            || self.defaults().iter().any(|(k, _)| *k == key)
    }
}

fn to_table(cfg: &RunConfig) -> Table {
    Table::try_from(cfg).expect("config serializes to a table")
}

fn from_table(table: Table) -> Result<RunConfig, CliError> {
    Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("bad configuration: {e}")))
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn dump(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

/// Merge file values, flag overrides and defaults, then check that the
/// result is complete and only uses keys the command understands.
pub fn resolve(
    command: Command,
    file: Option<RunConfig>,
    flags: RunConfig,
) -> Result<RunConfig, CliError> {
    let mut table = file.as_ref().map(to_table).unwrap_or_default();
    table.extend(to_table(&flags));
    for key in table.keys() {
        if !command.allows(key) {
            return Err(CliError::Usage(format!(
                "key '{key}' is not used by '{}'",
                command.name()
            )));
        }
    }
    if table.contains_key("alpha") && table.contains_key("alpha_third") {
        return Err(CliError::Usage(
            "alpha and alpha_third are mutually exclusive".into(),
        ));
    }
    for (k, v) in command.defaults() {
        table.entry(k).or_insert(v);
    }
    match command {
        Command::Run | Command::Mms if !table.contains_key("alpha_third") => {
            table.entry("alpha").or_insert(Value::Float(0.5));
        }
        Command::Spectrum if !table.contains_key("alpha_third") && !table.contains_key("alpha") => {
            return Err(CliError::Usage("spectrum needs --alpha or --alpha-third".into()));
        }
        _ => {}
    }
    if command == Command::Run {
        match (table.contains_key("n"), table.contains_key("mesh_file")) {
            (true, false) => {
                table.entry("lambda").or_insert(Value::Float(1.0));
            }
            (false, true) => {}
            _ => {
                return Err(CliError::Usage(
                    "run needs exactly one of --n and --mesh-file".into(),
                ))
            }
        }
    }
    for key in command.required() {
        if !table.contains_key(*key) {
            return Err(CliError::Usage(format!(
                "'{}' needs a value for '{key}'",
                command.name()
            )));
        }
    }
    from_table(table)
}

/// Parse `1/4,1/8,0.0625` into grid counts n = 1/h.
pub fn parse_sizes(list: &str) -> Result<Vec<usize>, CliError> {
    let bad = |s: &str| CliError::Usage(format!("'{s}' is not a mesh size of the form 1/n"));
    list.split(',')
        .map(|s| {
            let s = s.trim();
            let h = match s.split_once('/') {
                Some((a, b)) => {
                    let a: f64 = a.trim().parse().map_err(|_| bad(s))?;
                    let b: f64 = b.trim().parse().map_err(|_| bad(s))?;
                    a / b
                }
                None => s.parse().map_err(|_| bad(s))?,
            };
            let n = (1.0 / h).round();
            if !(h > 0.0) || n < 1.0 || (n * h - 1.0).abs() > 1e-9 {
                return Err(bad(s));
            }
            Ok(n as usize)
        })
        .collect()
}

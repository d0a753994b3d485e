//! Experiment configuration. Every field is optional so that a config file,
//! command-line flags and per-command defaults can be layered.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::Serialize;
use wavecheck::{Error, Result};

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_one<T: FromStr>(key: &str, raw: &str, line: usize) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("bad value '{raw}' for key '{key}'") })
}

fn parse_list<T: FromStr>(key: &str, raw: &str, line: usize) -> Result<Vec<T>> {
    raw.split(',').map(|s| parse_one(key, s, line)).collect()
}

macro_rules! config {
    ($( $(#[$meta:meta])* $field:ident : $ty:ty => $to:expr, $from:ident ; )*) => {
        #[derive(Args, Clone, Debug, Default, PartialEq, Serialize)]
        pub struct ExperimentConfig {
            $( $(#[$meta])* #[serde(skip_serializing_if = "Option::is_none")] pub $field: Option<$ty>, )*
        }

        impl ExperimentConfig {
            /// Values of `over` win over values of `self`.
            pub fn overlay(self, over: ExperimentConfig) -> ExperimentConfig {
                ExperimentConfig { $( $field: over.$field.or(self.$field), )* }
            }

            pub fn to_map(&self) -> BTreeMap<&'static str, String> {
                let mut m = BTreeMap::new();
                $( if let Some(v) = &self.$field { m.insert(stringify!($field), ($to)(v)); } )*
                m
            }

            fn set(&mut self, key: &str, raw: &str, line: usize) -> Result<()> {
                match key {
                    $( stringify!($field) => self.$field = Some($from(key, raw, line)?), )*
                    _ => return Err(Error::Parse { line, msg: format!("unknown key '{key}'") }),
                }
                Ok(())
            }
        }
    };
}

config! {
    /// Master RNG seed.
    #[arg(long, global = true)]
    seed: u64 => |v: &u64| v.to_string(), parse_one;
    /// Vertex count of the random graph.
    #[arg(long, global = true)]
    n: usize => |v: &usize| v.to_string(), parse_one;
    /// Degree.
    #[arg(long, global = true)]
    d: usize => |v: &usize| v.to_string(), parse_one;
    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda: f64 => |v: &f64| v.to_string(), parse_one;
    /// Ball radius (`wave`: largest radius of the table).
    #[arg(long, global = true)]
    k: usize => |v: &usize| v.to_string(), parse_one;
    /// Spectral window half-width.
    #[arg(long = "eps", alias = "epsilon", global = true)]
    epsilon: f64 => |v: &f64| v.to_string(), parse_one;
    /// Discretization noise.
    #[arg(long, global = true)]
    sigma: f64 => |v: &f64| v.to_string(), parse_one;
    /// Grid parameter(s), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    a: Vec<u32> => |v: &Vec<u32>| join(v), parse_list;
    /// Heat times for the de Bruijn check, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    t: Vec<f64> => |v: &Vec<f64>| join(v), parse_list;
    /// Number of lift or source samples.
    #[arg(long, global = true)]
    samples: usize => |v: &usize| v.to_string(), parse_one;
    /// Number of independent colorings.
    #[arg(long, global = true)]
    colorings: usize => |v: &usize| v.to_string(), parse_one;
    /// Localization or kernel radius.
    #[arg(long, global = true)]
    r: usize => |v: &usize| v.to_string(), parse_one;
    /// `almost-eig` vector construction: window, localized or kernel.
    #[arg(long, global = true)]
    mode: String => |v: &String| v.clone(), parse_one;
    /// `wave`: markov. `entropy`: debruijn, discmain or finombecsles.
    #[arg(long, global = true)]
    check: String => |v: &String| v.clone(), parse_one;
    /// Ball shape for lifts: star or edge.
    #[arg(long, global = true)]
    ball: String => |v: &String| v.clone(), parse_one;
    /// Report path (`gen`: edge-list path).
    #[arg(long, global = true)]
    out: PathBuf => |v: &PathBuf| v.display().to_string(), parse_one;
    /// Tidy CSV path for plot data.
    #[arg(long, global = true)]
    csv: PathBuf => |v: &PathBuf| v.display().to_string(), parse_one;
    /// Edge-list file to use instead of generating a graph.
    #[arg(long, global = true)]
    input: PathBuf => |v: &PathBuf| v.display().to_string(), parse_one;
    /// Cap on pairing-model restarts.
    #[arg(long, global = true)]
    max_attempts: usize => |v: &usize| v.to_string(), parse_one;
    /// Longest cycle examined for the girth measure.
    #[arg(long, global = true)]
    l_max: usize => |v: &usize| v.to_string(), parse_one;
    /// `gen`: report the essential girth measure.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    omega: bool => |v: &bool| v.to_string(), parse_one;
    /// `gen`: report the second eigenvalue.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    lambda2: bool => |v: &bool| v.to_string(), parse_one;
}

impl ExperimentConfig {
    /// Parses flat `key = value` text. Blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse { line: i + 1, msg: format!("expected key=value, got '{line}'") });
            };
            cfg.set(key.trim(), value.trim(), i + 1)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_map() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

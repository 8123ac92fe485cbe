//! Run settings gathered from an optional JSON file and command-line flags.
//! Flags take precedence over file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::Deserialize;

/// Radius for continuous variables: one value for all, or one per name.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum RadiusSpec {
    Scalar(f64),
    PerVariable(BTreeMap<String, f64>),
}

/// Radius for known continuous variables in the experiments.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum KnownRadius {
    Fixed(f64),
    /// Only `"swept"` is accepted.
    Mode(String),
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub orig: Option<PathBuf>,
    pub syn: Option<String>,
    pub out: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub categorical: Option<Vec<String>>,
    pub known: Option<Vec<String>>,
    pub synvars: Option<Vec<String>>,
    pub r: Option<RadiusSpec>,
    pub percentage: Option<bool>,
    pub euclidean: Option<bool>,
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub repetitions: Option<usize>,
    pub threads: Option<usize>,
    pub n: Option<usize>,
    pub scenarios: Option<Vec<String>>,
    pub radii: Option<Vec<f64>>,
    pub m_values: Option<Vec<usize>>,
    pub known_radius: Option<KnownRadius>,
    pub min_bucket: Option<usize>,
    pub min_split: Option<usize>,
    pub complexity_threshold: Option<f64>,
    pub svg: Option<bool>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct Opts {
    /// JSON file with default values for any of the options below
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Original data CSV
    #[arg(long, value_name = "CSV")]
    pub orig: Option<PathBuf>,

    /// Synthetic data: a glob pattern or a directory of CSV files
    #[arg(long, value_name = "GLOB|DIR")]
    pub syn: Option<String>,

    /// Output directory (output file for `generate`)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// JSON schema for the original data; inferred from the CSV when absent
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,

    /// Columns to treat as categorical during schema inference
    #[arg(long, value_delimiter = ',', value_name = "NAMES")]
    pub categorical: Vec<String>,

    /// Variables known to the intruder
    #[arg(long, value_delimiter = ',', value_name = "NAMES")]
    pub known: Vec<String>,

    /// Synthesized variables (visit order for `synthesize`)
    #[arg(long, value_delimiter = ',', value_name = "NAMES")]
    pub synvars: Vec<String>,

    /// One radius for every continuous variable
    #[arg(long, value_name = "R", conflicts_with = "radius", allow_negative_numbers = true)]
    pub r: Option<f64>,

    /// Per-variable radius, repeatable
    #[arg(long, value_name = "NAME=R")]
    pub radius: Vec<String>,

    /// Scale radii by the magnitude of each original value
    #[arg(long, value_name = "BOOL")]
    pub percentage: Option<bool>,

    /// Match synthesized continuous variables inside a normalized ellipse
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    pub euclidean: Option<bool>,

    /// Number of synthetic replicates
    #[arg(long)]
    pub m: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Repetitions per m in `mstudy`
    #[arg(long)]
    pub repetitions: Option<usize>,

    /// Worker threads (default: available cores)
    #[arg(long)]
    pub threads: Option<usize>,

    /// Records to generate
    #[arg(long)]
    pub n: Option<usize>,

    /// Scenarios to run, e.g. S1,S4
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub scenarios: Vec<String>,

    /// Radius grid for sweeps
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub radii: Vec<f64>,

    /// Replicate counts for `mstudy`
    #[arg(long = "m-values", value_delimiter = ',', value_name = "LIST")]
    pub m_values: Vec<usize>,

    /// Radius for known continuous variables in experiments, or `swept`
    #[arg(long = "known-radius", value_name = "R|swept")]
    pub known_radius: Option<String>,

    #[arg(long = "min-bucket")]
    pub min_bucket: Option<usize>,

    #[arg(long = "min-split")]
    pub min_split: Option<usize>,

    #[arg(long = "cp")]
    pub complexity_threshold: Option<f64>,

    /// Also write SVG figures for experiments
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    pub svg: Option<bool>,
}

/// Settings after merging; every field has its final value or is absent.
#[derive(Clone, Debug)]
pub struct Settings {
    pub orig: Option<PathBuf>,
    pub syn: Option<String>,
    pub out: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub categorical: Vec<String>,
    pub known: Vec<String>,
    pub synvars: Vec<String>,
    pub r: Option<RadiusSpec>,
    pub percentage: bool,
    pub euclidean: bool,
    pub m: Option<usize>,
    pub seed: u64,
    pub repetitions: Option<usize>,
    pub threads: Option<usize>,
    pub n: Option<usize>,
    pub scenarios: Vec<String>,
    pub radii: Vec<f64>,
    pub m_values: Vec<usize>,
    /// `None` means known radii follow the swept radius.
    pub known_radius: Option<f64>,
    pub min_bucket: Option<usize>,
    pub min_split: Option<usize>,
    pub complexity_threshold: Option<f64>,
    pub svg: bool,
}

fn or_list<T>(flag: Vec<T>, file: Option<Vec<T>>) -> Vec<T> {
    if flag.is_empty() {
        file.unwrap_or_default()
    } else {
        flag
    }
}

fn parse_radius_pairs(pairs: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for pair in pairs {
        let (name, value) = pair.split_once('=').ok_or_else(|| anyhow!("radius: expected NAME=R, got `{pair}`"))?;
        let r: f64 = value.trim().parse().map_err(|_| anyhow!("radius.{name}: `{value}` is not a number"))?;
        if map.insert(name.trim().to_string(), r).is_some() {
            bail!("radius.{name}: given more than once");
        }
    }
    Ok(map)
}

fn parse_known_radius(text: &str) -> Result<Option<f64>> {
    if text.eq_ignore_ascii_case("swept") {
        return Ok(None);
    }
    text.parse().map(Some).map_err(|_| anyhow!("known_radius: expected a number or `swept`, got `{text}`"))
}

pub fn read_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("config: cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("config: invalid JSON in {}", path.display()))
}

impl Settings {
    pub fn resolve(opts: Opts) -> Result<Settings> {
        let file = match &opts.config {
            Some(p) => read_file_config(p)?,
            None => FileConfig::default(),
        };
        let r = if let Some(r) = opts.r {
            Some(RadiusSpec::Scalar(r))
        } else if !opts.radius.is_empty() {
            Some(RadiusSpec::PerVariable(parse_radius_pairs(&opts.radius)?))
        } else {
            file.r
        };
        let known_radius = match (opts.known_radius.as_deref(), file.known_radius) {
            (Some(text), _) => parse_known_radius(text)?,
            (None, Some(KnownRadius::Fixed(r))) => Some(r),
            (None, Some(KnownRadius::Mode(text))) => parse_known_radius(&text)?,
            (None, None) => Some(0.1),
        };
        Ok(Settings {
            orig: opts.orig.or(file.orig),
            syn: opts.syn.or(file.syn),
            out: opts.out.or(file.out),
            schema: opts.schema.or(file.schema),
            categorical: or_list(opts.categorical, file.categorical),
            known: or_list(opts.known, file.known),
            synvars: or_list(opts.synvars, file.synvars),
            r,
            percentage: opts.percentage.or(file.percentage).unwrap_or(true),
            euclidean: opts.euclidean.or(file.euclidean).unwrap_or(false),
            m: opts.m.or(file.m),
            seed: opts.seed.or(file.seed).unwrap_or(1),
            repetitions: opts.repetitions.or(file.repetitions),
            threads: opts.threads.or(file.threads),
            n: opts.n.or(file.n),
            scenarios: or_list(opts.scenarios, file.scenarios),
            radii: or_list(opts.radii, file.radii),
            m_values: or_list(opts.m_values, file.m_values),
            known_radius,
            min_bucket: opts.min_bucket.or(file.min_bucket),
            min_split: opts.min_split.or(file.min_split),
            complexity_threshold: opts.complexity_threshold.or(file.complexity_threshold),
            svg: opts.svg.or(file.svg).unwrap_or(false),
        })
    }
}

/// Error for a setting that the command needs but nobody supplied.
pub fn missing(field: &str, flag: &str) -> anyhow::Error {
    anyhow!("{field}: required; pass --{flag} or set \"{field}\" in the config file")
}

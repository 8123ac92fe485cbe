//! Radius sweep, scenario comparison and number-of-replicates study.
//!
//! Every study is a pure function of the original data, its configuration
//! and a seed. Replicates are drawn on independent RNG streams, so results
//! do not depend on thread scheduling.

mod generator;
pub mod svg;

use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::{SynthesisPlan, Synthesizer};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::risk::{evaluate_fast, RiskConfig, RiskResult};
use crate::stats::{mean, Box2D, BoxSummary};
use crate::utility::propensity_utility;

pub use generator::{ce_schema, generate_ce_like, EDUC_LEVELS, MARITAL_LEVELS, TENURE_LEVELS, URBAN_LEVELS};

pub const DEFAULT_RADII: [f64; 6] = [0.01, 0.025, 0.05, 0.1, 0.2, 0.3];
pub const DEFAULT_KNOWN: [&str; 3] = ["Age", "Urban", "Marital"];

/// The four synthesized-variable sets, with their visit order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    S1,
    S2,
    S3,
    S4,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4];

    pub fn visit_sequence(self) -> &'static [&'static str] {
        match self {
            Scenario::S1 => &["Income"],
            Scenario::S2 => &["Tenure", "Income"],
            Scenario::S3 => &["Expenditure", "Income"],
            Scenario::S4 => &["Tenure", "Expenditure", "Income"],
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" | "1" => Some(Scenario::S1),
            "S2" | "2" => Some(Scenario::S2),
            "S3" | "3" => Some(Scenario::S3),
            "S4" | "4" => Some(Scenario::S4),
            _ => None,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Intruder model and synthesis knobs shared by all studies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySetup {
    pub known: Vec<String>,
    /// Radius for continuous known variables. `None` uses the radius being
    /// evaluated for the synthesized variables.
    pub known_radius: Option<f64>,
    pub percentage: bool,
    pub euclidean: bool,
    pub min_bucket: usize,
    pub min_split: usize,
    pub complexity_threshold: f64,
}

impl Default for StudySetup {
    fn default() -> Self {
        StudySetup {
            known: DEFAULT_KNOWN.iter().map(|s| s.to_string()).collect(),
            known_radius: None,
            percentage: true,
            euclidean: false,
            min_bucket: 5,
            min_split: 10,
            complexity_threshold: 1e-8,
        }
    }
}

impl StudySetup {
    /// Known continuous variables use the fixed radius `r` instead of
    /// following the swept radius.
    pub fn with_known_radius(mut self, r: f64) -> Self {
        self.known_radius = Some(r);
        self
    }

    pub fn risk_config(&self, orig: &Dataset, synthesized: &[String], r: f64) -> Result<RiskConfig> {
        let mut cfg = RiskConfig::new(self.known.iter().cloned(), synthesized.iter().cloned())
            .percentage(self.percentage)
            .euclidean(self.euclidean);
        for name in &self.known {
            if orig.schema().get(name)?.is_continuous() {
                cfg.radii.insert(name.clone(), self.known_radius.unwrap_or(r));
            }
        }
        for name in synthesized {
            if orig.schema().get(name)?.is_continuous() {
                cfg.radii.insert(name.clone(), r);
            }
        }
        Ok(cfg)
    }

    pub fn plan(&self, visit_sequence: &[String], m: usize, seed: u64) -> SynthesisPlan {
        SynthesisPlan {
            visit_sequence: visit_sequence.to_vec(),
            m,
            min_bucket: self.min_bucket,
            min_split: self.min_split,
            complexity_threshold: self.complexity_threshold,
            seed,
        }
    }
}

/// SplitMix64 finalizer; derives decorrelated child seeds.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z =
        seed.wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn names(seq: &[&str]) -> Vec<String> {
    seq.iter().map(|s| s.to_string()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusPoint {
    pub radius: f64,
    /// File-level risk per replicate.
    pub file_risk: Vec<f64>,
    pub mean_file_risk: f64,
    pub summary: BoxSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusSweep {
    pub synthesized: Vec<String>,
    pub points: Vec<RadiusPoint>,
    /// Grid value with the largest mean file risk; ties go to the smaller
    /// radius.
    pub maximizing_radius: f64,
    #[serde(skip)]
    pub results: Vec<RiskResult>,
}

impl RadiusSweep {
    pub fn at(&self, radius: f64) -> Option<&RadiusPoint> {
        self.points.iter().find(|p| p.radius == radius)
    }

    pub fn maximizing_point(&self) -> &RadiusPoint {
        self.at(self.maximizing_radius).expect("maximizing radius is on the grid")
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::config("radii", "empty radius grid"));
    }
    if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::config("radii", format!("radius must be positive, got {r}")));
    }
    Ok(())
}

/// Evaluates fixed replicates at every radius of the grid.
pub fn radius_sweep_on(
    orig: &Dataset,
    replicates: &[Dataset],
    synthesized: &[String],
    radii: &[f64],
    setup: &StudySetup,
) -> Result<RadiusSweep> {
    check_radii(radii)?;
    let results = radii
        .iter()
        .map(|&r| evaluate_fast(orig, replicates, &setup.risk_config(orig, synthesized, r)?))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<RadiusPoint> = radii
        .iter()
        .zip(&results)
        .map(|(&radius, res)| RadiusPoint {
            radius,
            file_risk: res.file_risk.clone(),
            mean_file_risk: mean(&res.file_risk),
            summary: BoxSummary::from_values(&res.file_risk),
        })
        .collect();
    let best = points
        .iter()
        .reduce(|best, p| {
            let better = p.mean_file_risk > best.mean_file_risk
                || (p.mean_file_risk == best.mean_file_risk && p.radius < best.radius);
            if better {
                p
            } else {
                best
            }
        })
        .expect("non-empty grid");
    Ok(RadiusSweep { synthesized: synthesized.to_vec(), maximizing_radius: best.radius, points, results })
}

/// Synthesizes `m` replicates for `scenario` and sweeps the radius grid.
pub fn radius_sweep(
    orig: &Dataset,
    scenario: Scenario,
    radii: &[f64],
    m: usize,
    seed: u64,
    setup: &StudySetup,
) -> Result<RadiusSweep> {
    check_radii(radii)?;
    let synvars = names(scenario.visit_sequence());
    let replicates = crate::cart::synthesize(orig, &setup.plan(&synvars, m, seed))?;
    radius_sweep_on(orig, &replicates, &synvars, radii, setup)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RadiusPolicy {
    /// Sweep the grid and report at the maximizing radius.
    Maximizing(Vec<f64>),
    Fixed(f64),
}

impl Default for RadiusPolicy {
    fn default() -> Self {
        RadiusPolicy::Maximizing(DEFAULT_RADII.to_vec())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    pub radius: f64,
    pub file_risk: Vec<f64>,
    pub utility: Vec<f64>,
    pub mean_file_risk: f64,
    pub mean_utility: f64,
    pub box2d: Box2D,
    pub sweep: Option<RadiusSweep>,
}

/// Risk at the chosen radius and propensity utility, per replicate and
/// scenario. All scenarios use the same seed.
pub fn scenario_study(
    orig: &Dataset,
    scenarios: &[Scenario],
    m: usize,
    policy: &RadiusPolicy,
    seed: u64,
    setup: &StudySetup,
) -> Result<Vec<ScenarioOutcome>> {
    if scenarios.is_empty() {
        return Err(Error::config("scenarios", "no scenarios given"));
    }
    scenarios
        .iter()
        .map(|&scenario| {
            let synvars = names(scenario.visit_sequence());
            let replicates = crate::cart::synthesize(orig, &setup.plan(&synvars, m, seed))?;
            let (radius, file_risk, sweep) = match policy {
                RadiusPolicy::Maximizing(grid) => {
                    let sweep = radius_sweep_on(orig, &replicates, &synvars, grid, setup)?;
                    let at = sweep.maximizing_point().file_risk.clone();
                    (sweep.maximizing_radius, at, Some(sweep))
                }
                RadiusPolicy::Fixed(r) => {
                    check_radii(&[*r])?;
                    let res = evaluate_fast(orig, &replicates, &setup.risk_config(orig, &synvars, *r)?)?;
                    (*r, res.file_risk, None)
                }
            };
            let utility = propensity_utility(orig, &replicates)?.per_dataset;
            Ok(ScenarioOutcome {
                scenario,
                radius,
                mean_file_risk: mean(&file_risk),
                mean_utility: mean(&utility),
                box2d: Box2D::from_pairs(&file_risk, &utility),
                file_risk,
                utility,
                sweep,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MStudyOutcome {
    pub m: usize,
    /// Mean file risk across the `m` replicates, one entry per repetition.
    pub mean_risk: Vec<f64>,
    /// Mean `U_p` across the `m` replicates, one entry per repetition.
    pub mean_utility: Vec<f64>,
    pub box2d: Box2D,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MStudyConfig {
    pub scenario: Scenario,
    pub m_values: Vec<usize>,
    pub repetitions: usize,
    pub radius: f64,
}

impl Default for MStudyConfig {
    fn default() -> Self {
        MStudyConfig { scenario: Scenario::S1, m_values: vec![1, 10, 20], repetitions: 200, radius: 0.1 }
    }
}

/// Repeats synthesis `repetitions` times for each `m` and summarizes the
/// repetition-level averages of risk and utility.
pub fn m_study(orig: &Dataset, cfg: &MStudyConfig, seed: u64, setup: &StudySetup) -> Result<Vec<MStudyOutcome>> {
    if cfg.repetitions < 2 {
        return Err(Error::config("repetitions", "at least two repetitions are required"));
    }
    if cfg.m_values.is_empty() || cfg.m_values.contains(&0) {
        return Err(Error::config("m_values", "values must be positive"));
    }
    check_radii(&[cfg.radius])?;
    let synvars = names(cfg.scenario.visit_sequence());
    let synth = Synthesizer::fit(orig, &setup.plan(&synvars, 1, seed))?;
    let risk_cfg = setup.risk_config(orig, &synvars, cfg.radius)?;

    cfg.m_values
        .iter()
        .map(|&m| {
            let pairs = (0..cfg.repetitions)
                .into_par_iter()
                .map(|rep| {
                    let replicates = synth.draw_many(derive_seed(seed, m as u64, rep as u64), m);
                    let risk = evaluate_fast(orig, &replicates, &risk_cfg)?;
                    let util = propensity_utility(orig, &replicates)?;
                    Ok((risk.mean_file_risk(), util.mean()))
                })
                .collect::<Result<Vec<(f64, f64)>>>()?;
            let (mean_risk, mean_utility): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            Ok(MStudyOutcome { m, box2d: Box2D::from_pairs(&mean_risk, &mean_utility), mean_risk, mean_utility })
        })
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(csv::Writer::from_path(path)?)
}

/// Pretty JSON, newline-terminated.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Tidy CSV: `scenario,radius,replicate,file_risk`.
pub fn write_sweep_csv(sweeps: &[(Scenario, RadiusSweep)], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["scenario", "radius", "replicate", "file_risk"])?;
    for (scenario, sweep) in sweeps {
        for p in &sweep.points {
            for (k, v) in p.file_risk.iter().enumerate() {
                w.write_record([scenario.to_string(), p.radius.to_string(), (k + 1).to_string(), v.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(())
}

/// Tidy CSV: `scenario,radius,replicate,file_risk,utility`.
pub fn write_scenarios_csv(outcomes: &[ScenarioOutcome], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["scenario", "radius", "replicate", "file_risk", "utility"])?;
    for o in outcomes {
        for (k, (r, u)) in o.file_risk.iter().zip(&o.utility).enumerate() {
            w.write_record([
                o.scenario.to_string(),
                o.radius.to_string(),
                (k + 1).to_string(),
                r.to_string(),
                u.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(())
}

/// Tidy CSV: `scenario,m,repetition,mean_risk,mean_utility`.
pub fn write_mstudy_csv(scenario: Scenario, outcomes: &[MStudyOutcome], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["scenario", "m", "repetition", "mean_risk", "mean_utility"])?;
    for o in outcomes {
        for (k, (r, u)) in o.mean_risk.iter().zip(&o.mean_utility).enumerate() {
            w.write_record([scenario.to_string(), o.m.to_string(), (k + 1).to_string(), r.to_string(), u.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(())
}

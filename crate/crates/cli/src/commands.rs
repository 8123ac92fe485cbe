use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use synrisk::data::load_csv_inferred;
use synrisk::experiments::{
    self, generate_ce_like, m_study, radius_sweep, scenario_study, svg, MStudyConfig, RadiusPolicy, RadiusSweep,
    Scenario, StudySetup, DEFAULT_KNOWN, DEFAULT_RADII,
};
use synrisk::{evaluate_fast, load_csv, propensity_utility, write_csv, Dataset, RiskConfig, Schema};

use crate::config::{missing, RadiusSpec, Settings};

const SUMMARY_ROWS: usize = 15;

fn out_dir(s: &Settings) -> PathBuf {
    s.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn load_orig(s: &Settings) -> Result<Dataset> {
    let path = s.orig.as_ref().ok_or_else(|| missing("orig", "orig"))?;
    let data = match &s.schema {
        Some(schema_path) => {
            let text = std::fs::read_to_string(schema_path)
                .with_context(|| format!("schema: cannot read {}", schema_path.display()))?;
            let schema: Schema = serde_json::from_str(&text).context("schema: invalid schema file")?;
            load_csv(path, Some(&schema))
        }
        None => load_csv_inferred(path, &s.categorical),
    };
    data.with_context(|| format!("orig: cannot load {}", path.display()))
}

fn syn_paths(pattern: &str) -> Result<Vec<PathBuf>> {
    let dir = Path::new(pattern);
    let mut paths: Vec<PathBuf> = if dir.is_dir() {
        std::fs::read_dir(dir)
            .with_context(|| format!("syn: cannot list {pattern}"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
            .collect()
    } else {
        glob::glob(pattern)
            .map_err(|e| anyhow!("syn: bad pattern `{pattern}`: {e}"))?
            .collect::<Result<_, _>>()
            .context("syn: cannot read a matched path")?
    };
    paths.sort();
    if paths.is_empty() {
        bail!("syn: no CSV files match `{pattern}`");
    }
    Ok(paths)
}

fn file_label(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn risk_config(s: &Settings, orig: &Dataset) -> Result<RiskConfig> {
    if s.synvars.is_empty() {
        return Err(missing("synvars", "synvars"));
    }
    let schema = orig.schema();
    for name in s.known.iter().chain(&s.synvars) {
        schema.get(name).map_err(|_| anyhow!("known/synvars: `{name}` is not a column of the original data"))?;
    }
    let mut cfg = RiskConfig::new(s.known.iter().cloned(), s.synvars.iter().cloned())
        .percentage(s.percentage)
        .euclidean(s.euclidean);
    let continuous: BTreeSet<&String> =
        s.known.iter().chain(&s.synvars).filter(|n| schema.get(n).is_ok_and(|v| v.is_continuous())).collect();
    match &s.r {
        Some(RadiusSpec::Scalar(r)) => {
            for name in continuous {
                cfg.radii.insert(name.clone(), *r);
            }
        }
        Some(RadiusSpec::PerVariable(map)) => {
            for (name, r) in map {
                if !continuous.contains(name) {
                    bail!("radius.{name}: not a continuous known or synthesized variable");
                }
                cfg.radii.insert(name.clone(), *r);
            }
        }
        None if continuous.is_empty() => {}
        None => return Err(missing("r", "r")),
    }
    Ok(cfg)
}

fn study_setup(s: &Settings) -> StudySetup {
    let d = StudySetup::default();
    StudySetup {
        known: if s.known.is_empty() { DEFAULT_KNOWN.iter().map(|k| k.to_string()).collect() } else { s.known.clone() },
        known_radius: s.known_radius,
        percentage: s.percentage,
        euclidean: s.euclidean,
        min_bucket: s.min_bucket.unwrap_or(d.min_bucket),
        min_split: s.min_split.unwrap_or(d.min_split),
        complexity_threshold: s.complexity_threshold.unwrap_or(d.complexity_threshold),
    }
}

fn scenario_list(s: &Settings) -> Result<Vec<Scenario>> {
    if s.scenarios.is_empty() {
        return Ok(Scenario::ALL.to_vec());
    }
    s.scenarios
        .iter()
        .map(|t| Scenario::parse(t).ok_or_else(|| anyhow!("scenarios: unknown scenario `{t}` (use S1..S4)")))
        .collect()
}

fn scalar_r(s: &Settings) -> Result<Option<f64>> {
    match &s.r {
        None => Ok(None),
        Some(RadiusSpec::Scalar(r)) => Ok(Some(*r)),
        Some(RadiusSpec::PerVariable(_)) => bail!("r: experiments take a single radius, not a per-variable map"),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("out: cannot create {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("out: cannot write {}", path.display()))
}

fn more_rows(total: usize) {
    if total > SUMMARY_ROWS {
        println!("  ... {} more", total - SUMMARY_ROWS);
    }
}

#[derive(Serialize)]
struct RiskSummary<'a> {
    files: &'a [String],
    n_records: usize,
    known: &'a [String],
    synthesized: &'a [String],
    radii: &'a std::collections::BTreeMap<String, f64>,
    percentage: bool,
    euclidean: bool,
    file_risk: &'a [f64],
    true_match_rate: &'a [f64],
    false_match_rate: &'a [f64],
    mean_file_risk: f64,
}

#[derive(Serialize)]
struct UtilitySummary<'a> {
    files: &'a [String],
    propensity_utility: &'a [f64],
    converged: &'a [bool],
    mean: f64,
}

pub fn evaluate(s: &Settings) -> Result<()> {
    let orig = load_orig(s)?;
    let pattern = s.syn.as_deref().ok_or_else(|| missing("syn", "syn"))?;
    let paths = syn_paths(pattern)?;
    let syns = paths
        .iter()
        .map(|p| load_csv(p, Some(orig.schema())).with_context(|| format!("syn: cannot load {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<String> = paths.iter().map(|p| file_label(p)).collect();
    let cfg = risk_config(s, &orig)?;
    let risk = evaluate_fast(&orig, &syns, &cfg)?;
    let util = propensity_utility(&orig, &syns)?;

    let out = out_dir(s);
    risk.write_csv_matrices(out.join("risk"))?;
    experiments::write_json(
        &RiskSummary {
            files: &labels,
            n_records: orig.n_rows(),
            known: &cfg.known,
            synthesized: &cfg.synthesized,
            radii: &cfg.radii,
            percentage: cfg.percentage,
            euclidean: cfg.euclidean,
            file_risk: &risk.file_risk,
            true_match_rate: &risk.true_match_rate,
            false_match_rate: &risk.false_match_rate,
            mean_file_risk: risk.mean_file_risk(),
        },
        out.join("risk").join("summary.json"),
    )?;
    let mut csv = String::from("file,propensity_utility,converged\n");
    for ((label, u), c) in labels.iter().zip(&util.per_dataset).zip(&util.converged) {
        csv.push_str(&format!("{label},{u},{c}\n"));
    }
    write_text(&out.join("utility").join("utility.csv"), &csv)?;
    experiments::write_json(
        &UtilitySummary {
            files: &labels,
            propensity_utility: &util.per_dataset,
            converged: &util.converged,
            mean: util.mean(),
        },
        out.join("utility").join("summary.json"),
    )?;

    println!("{} records, {} synthetic file(s)", orig.n_rows(), syns.len());
    println!("known: {}   synthesized: {}", cfg.known.join(","), cfg.synthesized.join(","));
    println!("{:<28} {:>12} {:>10} {:>10} {:>10}", "file", "file risk", "true", "false", "U_p");
    for (k, label) in labels.iter().enumerate().take(SUMMARY_ROWS) {
        println!(
            "{:<28} {:>12.4} {:>10.4} {:>10.4} {:>10.6}",
            label, risk.file_risk[k], risk.true_match_rate[k], risk.false_match_rate[k], util.per_dataset[k]
        );
    }
    more_rows(syns.len());
    println!("mean file risk {:.4}, mean U_p {:.6}", risk.mean_file_risk(), util.mean());
    if util.converged.iter().any(|c| !c) {
        println!("warning: the propensity model did not converge for some files");
    }
    println!("results in {}", out.display());
    Ok(())
}

pub fn synthesize(s: &Settings) -> Result<()> {
    let orig = load_orig(s)?;
    let sequence = if !s.synvars.is_empty() {
        s.synvars.clone()
    } else {
        match scenario_list(s)?.as_slice() {
            [one] if !s.scenarios.is_empty() => one.visit_sequence().iter().map(|v| v.to_string()).collect(),
            _ => return Err(missing("synvars", "synvars")),
        }
    };
    let setup = study_setup(s);
    let plan = setup.plan(&sequence, s.m.unwrap_or(1), s.seed);
    let reps = synrisk::synthesize(&orig, &plan)?;
    let dir = out_dir(s).join("synthetic");
    std::fs::create_dir_all(&dir).with_context(|| format!("out: cannot create {}", dir.display()))?;
    for (k, rep) in reps.iter().enumerate() {
        write_csv(rep, dir.join(format!("syn_{:03}.csv", k + 1)))?;
    }
    println!(
        "wrote {} replicate(s) of {} records to {} (visit order {}, seed {})",
        reps.len(),
        orig.n_rows(),
        dir.display(),
        sequence.join(" > "),
        s.seed
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepEntry<'a> {
    scenario: Scenario,
    #[serde(flatten)]
    sweep: &'a RadiusSweep,
}

pub fn sweep(s: &Settings) -> Result<()> {
    let orig = load_orig(s)?;
    let setup = study_setup(s);
    let radii = if s.radii.is_empty() { DEFAULT_RADII.to_vec() } else { s.radii.clone() };
    let m = s.m.unwrap_or(20);
    let sweeps = scenario_list(s)?
        .into_iter()
        .map(|sc| Ok((sc, radius_sweep(&orig, sc, &radii, m, s.seed, &setup)?)))
        .collect::<Result<Vec<_>>>()?;

    let dir = out_dir(s).join("experiments");
    let entries: Vec<SweepEntry> =
        sweeps.iter().map(|(scenario, sweep)| SweepEntry { scenario: *scenario, sweep }).collect();
    experiments::write_json(&entries, dir.join("sweep.json"))?;
    experiments::write_sweep_csv(&sweeps, dir.join("sweep.csv"))?;
    if s.svg {
        write_text(&dir.join("sweep.svg"), &svg::sweep_boxplots(&sweeps))?;
    }

    println!("mean file risk by radius (m = {m}, seed {})", s.seed);
    print!("{:<6}", "");
    radii.iter().for_each(|r| print!(" {r:>9}"));
    println!(" {:>10}", "maximizer");
    for (sc, sw) in &sweeps {
        print!("{:<6}", sc.to_string());
        sw.points.iter().for_each(|p| print!(" {:>9.3}", p.mean_file_risk));
        println!(" {:>10}", sw.maximizing_radius);
    }
    println!("results in {}", dir.display());
    Ok(())
}

pub fn scenarios(s: &Settings) -> Result<()> {
    let orig = load_orig(s)?;
    let setup = study_setup(s);
    let policy = match scalar_r(s)? {
        Some(r) => RadiusPolicy::Fixed(r),
        None if s.radii.is_empty() => RadiusPolicy::default(),
        None => RadiusPolicy::Maximizing(s.radii.clone()),
    };
    let m = s.m.unwrap_or(20);
    let outcomes = scenario_study(&orig, &scenario_list(s)?, m, &policy, s.seed, &setup)?;

    let dir = out_dir(s).join("experiments");
    experiments::write_json(&outcomes, dir.join("scenarios.json"))?;
    experiments::write_scenarios_csv(&outcomes, dir.join("scenarios.csv"))?;
    if s.svg {
        write_text(&dir.join("tradeoff.svg"), &svg::tradeoff_plot(&outcomes))?;
    }

    println!("scenario study (m = {m}, seed {})", s.seed);
    println!("{:<6} {:>8} {:>12} {:>23} {:>10}", "", "radius", "mean risk", "risk IQR", "mean U_p");
    for o in &outcomes {
        let b = &o.box2d.risk;
        println!(
            "{:<6} {:>8} {:>12.4} {:>11.3}-{:<11.3} {:>10.6}",
            o.scenario.to_string(),
            o.radius,
            o.mean_file_risk,
            b.q1,
            b.q3,
            o.mean_utility
        );
    }
    println!("results in {}", dir.display());
    Ok(())
}

pub fn mstudy(s: &Settings) -> Result<()> {
    let orig = load_orig(s)?;
    let setup = study_setup(s);
    let scenario = match scenario_list(s)?.as_slice() {
        [one] if !s.scenarios.is_empty() => *one,
        _ if s.scenarios.is_empty() => Scenario::S1,
        _ => bail!("scenarios: mstudy runs a single scenario"),
    };
    let d = MStudyConfig::default();
    let cfg = MStudyConfig {
        scenario,
        m_values: if s.m_values.is_empty() { d.m_values } else { s.m_values.clone() },
        repetitions: s.repetitions.unwrap_or(d.repetitions),
        radius: scalar_r(s)?.unwrap_or(d.radius),
    };
    let outcomes = m_study(&orig, &cfg, s.seed, &setup)?;

    let dir = out_dir(s).join("experiments");
    experiments::write_json(&outcomes, dir.join("mstudy.json"))?;
    experiments::write_mstudy_csv(scenario, &outcomes, dir.join("mstudy.csv"))?;
    if s.svg {
        write_text(&dir.join("mstudy.svg"), &svg::m_study_plot(&outcomes))?;
    }

    println!("{scenario}, r = {}, {} repetitions, seed {}", cfg.radius, cfg.repetitions, s.seed);
    println!("{:>4} {:>12} {:>10} {:>12} {:>10}", "m", "median risk", "risk IQR", "median U_p", "U_p IQR");
    for o in &outcomes {
        println!(
            "{:>4} {:>12.4} {:>10.4} {:>12.6} {:>10.6}",
            o.m,
            o.box2d.risk.median,
            o.box2d.risk.iqr(),
            o.box2d.utility.median,
            o.box2d.utility.iqr()
        );
    }
    println!("results in {}", dir.display());
    Ok(())
}

pub fn generate(s: &Settings) -> Result<()> {
    let n = s.n.ok_or_else(|| missing("n", "n"))?;
    if n == 0 {
        bail!("n: must be at least 1");
    }
    let data = generate_ce_like(n, s.seed)?;
    let path = s.out.clone().unwrap_or_else(|| PathBuf::from("ce_like.csv"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("out: cannot create {}", dir.display()))?;
    }
    write_csv(&data, &path)?;
    println!("wrote {n} records (seed {}) to {}", s.seed, path.display());
    Ok(())
}

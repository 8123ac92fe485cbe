//! Identification risk of partially synthetic data.
//!
//! For a target record `i` of the original data the intruder knows the
//! values of the *known* (unsynthesized) variables and the true confidential
//! values of the *synthesized* variables. A synthetic record `j` matches the
//! target when
//!
//! * every categorical known and synthesized variable is equal, and
//! * every continuous known variable of `j` lies in the range around the
//!   target's value, and
//! * the synthesized continuous values of `j` lie in their ranges
//!   (rectangle mode) or inside the normalized ellipse spanned by the
//!   ranges (euclidean mode).
//!
//! `c_i` counts the matching synthetic records, `t_i` says whether the
//! target's own synthetic record is one of them and `ir_i = t_i / c_i`.
//!
//! [`evaluate`] is the direct O(n²) count per synthetic dataset.
//! [`evaluate_fast`] groups synthetic rows by their categorical key, sorts
//! each group on one continuous column and binary searches the target's
//! interval before running the full test, so both produce identical output.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Cell, Column, Dataset, Schema, VariableKind};
use crate::error::{Error, Result};

/// Intruder knowledge and matching tolerances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub known: Vec<String>,
    pub synthesized: Vec<String>,
    /// Radius per continuous variable in `known ∪ synthesized`.
    #[serde(default)]
    pub radii: BTreeMap<String, f64>,
    /// Scale each radius by the magnitude of the confidential value.
    #[serde(default = "default_true")]
    pub percentage: bool,
    /// Use a normalized euclidean ball over the synthesized continuous
    /// variables instead of the per-variable rectangle.
    #[serde(default)]
    pub euclidean: bool,
}

fn default_true() -> bool {
    true
}

impl RiskConfig {
    pub fn new<K: Into<String>, S: Into<String>>(
        known: impl IntoIterator<Item = K>,
        synthesized: impl IntoIterator<Item = S>,
    ) -> Self {
        RiskConfig {
            known: known.into_iter().map(Into::into).collect(),
            synthesized: synthesized.into_iter().map(Into::into).collect(),
            radii: BTreeMap::new(),
            percentage: true,
            euclidean: false,
        }
    }

    pub fn with_radius(mut self, name: impl Into<String>, r: f64) -> Self {
        self.radii.insert(name.into(), r);
        self
    }

    /// Sets `r` for every continuous variable among the known and
    /// synthesized ones.
    pub fn with_uniform_radius(mut self, schema: &Schema, r: f64) -> Result<Self> {
        for name in self.known.iter().chain(&self.synthesized) {
            if schema.get(name)?.is_continuous() {
                self.radii.insert(name.clone(), r);
            }
        }
        Ok(self)
    }

    pub fn percentage(mut self, on: bool) -> Self {
        self.percentage = on;
        self
    }

    pub fn euclidean(mut self, on: bool) -> Self {
        self.euclidean = on;
        self
    }
}

/// Closed interval around a confidential value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
    pub half_width: f64,
}

impl Range {
    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// `[x - r|x|, x + r|x|]` in percentage mode, `[x - r, x + r]` otherwise.
pub fn make_range(x: f64, r: f64, percentage: bool) -> Result<Range> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::config("r", format!("radius must be finite and >= 0, got {r}")));
    }
    Ok(range_unchecked(x, r, percentage))
}

#[inline]
fn range_unchecked(x: f64, r: f64, percentage: bool) -> Range {
    let half_width = if percentage { r * x.abs() } else { r };
    Range { center: x, lo: x - half_width, hi: x + half_width, half_width }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRisk {
    pub c: usize,
    pub t: bool,
    pub ir: f64,
}

impl RecordRisk {
    pub fn from_counts(c: usize, t: bool) -> Self {
        debug_assert!(!t || c >= 1);
        let ir = if c == 0 { 0.0 } else { f64::from(u8::from(t)) / c as f64 };
        RecordRisk { c, t, ir }
    }
}

/// Per-record, per-synthetic-dataset risk matrices (records are rows).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskResult {
    pub c_matrix: Vec<Vec<usize>>,
    pub t_matrix: Vec<Vec<u8>>,
    pub ir_matrix: Vec<Vec<f64>>,
    pub file_risk: Vec<f64>,
    pub true_match_rate: Vec<f64>,
    pub false_match_rate: Vec<f64>,
}

impl RiskResult {
    fn from_columns(columns: Vec<Vec<RecordRisk>>, n: usize) -> Self {
        let m = columns.len();
        let mut c_matrix = vec![Vec::with_capacity(m); n];
        let mut t_matrix = vec![Vec::with_capacity(m); n];
        let mut ir_matrix = vec![Vec::with_capacity(m); n];
        let mut file_risk = Vec::with_capacity(m);
        let mut true_match_rate = Vec::with_capacity(m);
        let mut false_match_rate = Vec::with_capacity(m);
        for col in &columns {
            let mut total = 0.0;
            let (mut unique, mut unique_true) = (0usize, 0usize);
            for (i, rr) in col.iter().enumerate() {
                c_matrix[i].push(rr.c);
                t_matrix[i].push(u8::from(rr.t));
                ir_matrix[i].push(rr.ir);
                total += rr.ir;
                if rr.c == 1 {
                    unique += 1;
                    if rr.t {
                        unique_true += 1;
                    }
                }
            }
            file_risk.push(total);
            true_match_rate.push(if n == 0 { 0.0 } else { unique_true as f64 / n as f64 });
            false_match_rate.push((unique - unique_true) as f64 / unique.max(1) as f64);
        }
        RiskResult { c_matrix, t_matrix, ir_matrix, file_risk, true_match_rate, false_match_rate }
    }

    pub fn n_records(&self) -> usize {
        self.c_matrix.len()
    }

    pub fn n_datasets(&self) -> usize {
        self.file_risk.len()
    }

    pub fn record(&self, i: usize, k: usize) -> RecordRisk {
        RecordRisk { c: self.c_matrix[i][k], t: self.t_matrix[i][k] == 1, ir: self.ir_matrix[i][k] }
    }

    pub fn mean_file_risk(&self) -> f64 {
        crate::stats::mean(&self.file_risk)
    }

    /// Writes `c.csv`, `t.csv` and `ir.csv` into `dir`, one row per record
    /// and one column per synthetic dataset.
    pub fn write_csv_matrices(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_matrix(&dir.join("c.csv"), &self.c_matrix, self.n_datasets())?;
        write_matrix(&dir.join("t.csv"), &self.t_matrix, self.n_datasets())?;
        write_matrix(&dir.join("ir.csv"), &self.ir_matrix, self.n_datasets())?;
        Ok(())
    }
}

fn write_matrix<T: ToString>(path: &Path, rows: &[Vec<T>], m: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["record".to_string()];
    header.extend((1..=m).map(|k| format!("syn_{k}")));
    w.write_record(&header)?;
    for (i, row) in rows.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(row.iter().map(ToString::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Categorical column indices and (continuous index, radius) pairs for one role.
type RoleColumns = (Vec<usize>, Vec<(usize, f64)>);

/// Row-wise cell access shared by dataset rows and free-standing records.
trait RowAccess {
    fn num(&self, col: usize) -> f64;
    fn level(&self, col: usize) -> u32;
}

struct DatasetRow<'a> {
    columns: &'a [Column],
    row: usize,
}

impl RowAccess for DatasetRow<'_> {
    #[inline]
    fn num(&self, col: usize) -> f64 {
        match &self.columns[col] {
            Column::Continuous(v) => v[self.row],
            Column::Categorical(_) => unreachable!("kind checked by Matcher::new"),
        }
    }

    #[inline]
    fn level(&self, col: usize) -> u32 {
        match &self.columns[col] {
            Column::Categorical(v) => v[self.row],
            Column::Continuous(_) => unreachable!("kind checked by Matcher::new"),
        }
    }
}

impl RowAccess for [Cell] {
    fn num(&self, col: usize) -> f64 {
        match self[col] {
            Cell::Num(x) => x,
            Cell::Level(_) => unreachable!("kind checked by check_record"),
        }
    }

    fn level(&self, col: usize) -> u32 {
        match self[col] {
            Cell::Level(l) => l,
            Cell::Num(_) => unreachable!("kind checked by check_record"),
        }
    }
}

/// A [`RiskConfig`] resolved against a schema.
#[derive(Clone, Debug)]
pub struct Matcher {
    known_cat: Vec<usize>,
    known_con: Vec<(usize, f64)>,
    syn_cat: Vec<usize>,
    syn_con: Vec<(usize, f64)>,
    percentage: bool,
    euclidean: bool,
}

/// Ranges around one target's confidential continuous values.
struct TargetRanges {
    known: Vec<Range>,
    syn: Vec<Range>,
}

impl Matcher {
    pub fn new(schema: &Schema, cfg: &RiskConfig) -> Result<Self> {
        let known: HashSet<&str> = cfg.known.iter().map(String::as_str).collect();
        if known.len() != cfg.known.len() {
            return Err(Error::config("known", "duplicate variable"));
        }
        let syn: HashSet<&str> = cfg.synthesized.iter().map(String::as_str).collect();
        if syn.len() != cfg.synthesized.len() {
            return Err(Error::config("synthesized", "duplicate variable"));
        }
        if let Some(both) = cfg.known.iter().find(|k| syn.contains(k.as_str())) {
            return Err(Error::config("known", format!("`{both}` is listed as both known and synthesized")));
        }
        for (name, &r) in &cfg.radii {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::config(format!("radii.{name}"), format!("radius must be finite and >= 0, got {r}")));
            }
        }
        let split = |names: &[String], field: &str| -> Result<RoleColumns> {
            let mut cat = Vec::new();
            let mut con = Vec::new();
            for name in names {
                let idx =
                    schema.index_of(name).map_err(|_| Error::config(field, format!("unknown variable `{name}`")))?;
                match schema.spec(idx).kind {
                    VariableKind::Categorical => cat.push(idx),
                    VariableKind::Continuous => {
                        let r = *cfg.radii.get(name).ok_or_else(|| {
                            Error::config(format!("radii.{name}"), "continuous variable has no radius")
                        })?;
                        con.push((idx, r));
                    }
                }
            }
            Ok((cat, con))
        };
        let (known_cat, known_con) = split(&cfg.known, "known")?;
        let (syn_cat, syn_con) = split(&cfg.synthesized, "synthesized")?;
        Ok(Matcher { known_cat, known_con, syn_cat, syn_con, percentage: cfg.percentage, euclidean: cfg.euclidean })
    }

    fn ranges<R: RowAccess + ?Sized>(&self, target: &R) -> TargetRanges {
        let mk = |&(col, r): &(usize, f64)| range_unchecked(target.num(col), r, self.percentage);
        TargetRanges { known: self.known_con.iter().map(mk).collect(), syn: self.syn_con.iter().map(mk).collect() }
    }

    fn known_ok<T, C>(&self, target: &T, ranges: &TargetRanges, cand: &C) -> bool
    where
        T: RowAccess + ?Sized,
        C: RowAccess + ?Sized,
    {
        self.known_cat.iter().all(|&col| target.level(col) == cand.level(col))
            && self.known_con.iter().zip(&ranges.known).all(|(&(col, _), range)| range.contains(cand.num(col)))
    }

    fn syn_ok<T, C>(&self, target: &T, ranges: &TargetRanges, cand: &C) -> bool
    where
        T: RowAccess + ?Sized,
        C: RowAccess + ?Sized,
    {
        if !self.syn_cat.iter().all(|&col| target.level(col) == cand.level(col)) {
            return false;
        }
        // The ellipse is inscribed in the rectangle, so the rectangle test
        // gates both modes. A zero half-width forces equality on that axis.
        let in_box = self.syn_con.iter().zip(&ranges.syn).all(|(&(col, _), range)| range.contains(cand.num(col)));
        if !in_box || !self.euclidean {
            return in_box;
        }
        let mut dist2 = 0.0;
        for (&(col, _), range) in self.syn_con.iter().zip(&ranges.syn) {
            if range.half_width > 0.0 {
                let d = (cand.num(col) - range.center) / range.half_width;
                dist2 += d * d;
            }
        }
        dist2 <= 1.0
    }

    #[inline]
    fn pair_matches<T, C>(&self, target: &T, ranges: &TargetRanges, cand: &C) -> bool
    where
        T: RowAccess + ?Sized,
        C: RowAccess + ?Sized,
    {
        self.known_ok(target, ranges, cand) && self.syn_ok(target, ranges, cand)
    }

    /// `K_i(j)` for two records laid out in `schema` order.
    pub fn known_match(&self, schema: &Schema, target: &[Cell], candidate: &[Cell]) -> Result<bool> {
        check_record(schema, target)?;
        check_record(schema, candidate)?;
        Ok(self.known_ok(target, &self.ranges(target), candidate))
    }

    /// `S_i(j)` for two records laid out in `schema` order.
    pub fn syn_match(&self, schema: &Schema, target: &[Cell], candidate: &[Cell]) -> Result<bool> {
        check_record(schema, target)?;
        check_record(schema, candidate)?;
        Ok(self.syn_ok(target, &self.ranges(target), candidate))
    }

    fn record_risk_brute(&self, orig: &Dataset, syn: &Dataset, i: usize) -> RecordRisk {
        let target = DatasetRow { columns: orig.columns(), row: i };
        let ranges = self.ranges(&target);
        let mut c = 0;
        for j in 0..syn.n_rows() {
            let cand = DatasetRow { columns: syn.columns(), row: j };
            if self.pair_matches(&target, &ranges, &cand) {
                c += 1;
            }
        }
        let own = DatasetRow { columns: syn.columns(), row: i };
        RecordRisk::from_counts(c, self.pair_matches(&target, &ranges, &own))
    }

    fn column_brute(&self, orig: &Dataset, syn: &Dataset) -> Vec<RecordRisk> {
        (0..orig.n_rows()).into_par_iter().map(|i| self.record_risk_brute(orig, syn, i)).collect()
    }

    fn column_fast(&self, orig: &Dataset, syn: &Dataset) -> Vec<RecordRisk> {
        let index = GroupIndex::build(self, syn);
        (0..orig.n_rows())
            .into_par_iter()
            .map(|i| {
                let target = DatasetRow { columns: orig.columns(), row: i };
                let ranges = self.ranges(&target);
                let c = index.count(self, &target, &ranges, syn);
                let own = DatasetRow { columns: syn.columns(), row: i };
                RecordRisk::from_counts(c, self.pair_matches(&target, &ranges, &own))
            })
            .collect()
    }

    /// Continuous column used for the binary search, with its position in
    /// the known or synthesized range list.
    fn sort_dimension(&self) -> Option<(usize, RangeSlot)> {
        if let Some(&(col, _)) = self.syn_con.first() {
            Some((col, RangeSlot::Syn(0)))
        } else {
            self.known_con.first().map(|&(col, _)| (col, RangeSlot::Known(0)))
        }
    }
}

#[derive(Clone, Copy)]
enum RangeSlot {
    Known(usize),
    Syn(usize),
}

/// Synthetic rows bucketed by categorical key, each bucket sorted on the
/// sort dimension.
struct GroupIndex {
    key_cols: Vec<usize>,
    sort: Option<(usize, RangeSlot)>,
    groups: HashMap<Vec<u32>, Group>,
}

struct Group {
    rows: Vec<usize>,
    values: Vec<f64>,
}

impl GroupIndex {
    fn build(matcher: &Matcher, syn: &Dataset) -> Self {
        let key_cols: Vec<usize> = matcher.known_cat.iter().chain(&matcher.syn_cat).copied().collect();
        let sort = matcher.sort_dimension();
        let mut groups: HashMap<Vec<u32>, Group> = HashMap::new();
        for j in 0..syn.n_rows() {
            let row = DatasetRow { columns: syn.columns(), row: j };
            let key: Vec<u32> = key_cols.iter().map(|&c| row.level(c)).collect();
            groups.entry(key).or_insert_with(|| Group { rows: Vec::new(), values: Vec::new() }).rows.push(j);
        }
        if let Some((col, _)) = sort {
            let values = syn.column_at(col).as_continuous().expect("continuous sort column");
            for g in groups.values_mut() {
                g.rows.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
                g.values = g.rows.iter().map(|&j| values[j]).collect();
            }
        }
        GroupIndex { key_cols, sort, groups }
    }

    fn count<T: RowAccess + ?Sized>(
        &self,
        matcher: &Matcher,
        target: &T,
        ranges: &TargetRanges,
        syn: &Dataset,
    ) -> usize {
        let key: Vec<u32> = self.key_cols.iter().map(|&c| target.level(c)).collect();
        let Some(group) = self.groups.get(&key) else {
            return 0;
        };
        let candidates = match self.sort {
            None => &group.rows[..],
            Some((_, slot)) => {
                let range = match slot {
                    RangeSlot::Known(k) => ranges.known[k],
                    RangeSlot::Syn(k) => ranges.syn[k],
                };
                let start = group.values.partition_point(|&v| v < range.lo);
                let end = group.values.partition_point(|&v| v <= range.hi);
                if start >= end {
                    return 0;
                }
                &group.rows[start..end]
            }
        };
        candidates
            .iter()
            .filter(|&&j| {
                let cand = DatasetRow { columns: syn.columns(), row: j };
                matcher.pair_matches(target, ranges, &cand)
            })
            .count()
    }
}

fn check_record(schema: &Schema, row: &[Cell]) -> Result<()> {
    if row.len() != schema.len() {
        return Err(Error::SchemaMismatch(format!(
            "record has {} cells, schema has {} variables",
            row.len(),
            schema.len()
        )));
    }
    for (spec, cell) in schema.variables().iter().zip(row) {
        let ok = match (spec.kind, cell) {
            (VariableKind::Continuous, Cell::Num(_)) => true,
            (VariableKind::Categorical, Cell::Level(l)) => (*l as usize) < spec.levels.len(),
            _ => false,
        };
        if !ok {
            return Err(Error::SchemaMismatch(format!("cell for `{}` does not fit its variable", spec.name)));
        }
    }
    Ok(())
}

/// `K_i(j)`: all known variables of `candidate` match `target`.
pub fn known_match(schema: &Schema, target: &[Cell], candidate: &[Cell], cfg: &RiskConfig) -> Result<bool> {
    Matcher::new(schema, cfg)?.known_match(schema, target, candidate)
}

/// `S_i(j)`: all synthesized variables of `candidate` match the target's
/// confidential values.
pub fn syn_match(schema: &Schema, target: &[Cell], candidate: &[Cell], cfg: &RiskConfig) -> Result<bool> {
    Matcher::new(schema, cfg)?.syn_match(schema, target, candidate)
}

fn prepare(orig: &Dataset, syn: &Dataset) -> Result<Dataset> {
    if syn.n_rows() != orig.n_rows() {
        return Err(Error::RowCountMismatch { original: orig.n_rows(), synthetic: syn.n_rows() });
    }
    syn.align_to(orig.schema())
}

pub fn record_risk(i: usize, orig: &Dataset, syn: &Dataset, cfg: &RiskConfig) -> Result<RecordRisk> {
    let syn = prepare(orig, syn)?;
    if i >= orig.n_rows() {
        return Err(Error::config("record", format!("index {i} out of range for {} records", orig.n_rows())));
    }
    let matcher = Matcher::new(orig.schema(), cfg)?;
    Ok(matcher.record_risk_brute(orig, &syn, i))
}

fn evaluate_with(
    orig: &Dataset,
    syn_list: &[Dataset],
    cfg: &RiskConfig,
    column: impl Fn(&Matcher, &Dataset, &Dataset) -> Vec<RecordRisk> + Sync,
) -> Result<RiskResult> {
    if syn_list.is_empty() {
        return Err(Error::NoSyntheticData);
    }
    let matcher = Matcher::new(orig.schema(), cfg)?;
    let aligned = syn_list.iter().map(|s| prepare(orig, s)).collect::<Result<Vec<_>>>()?;
    let columns: Vec<Vec<RecordRisk>> = aligned.par_iter().map(|s| column(&matcher, orig, s)).collect();
    Ok(RiskResult::from_columns(columns, orig.n_rows()))
}

/// Direct evaluation: every target against every synthetic record.
pub fn evaluate(orig: &Dataset, syn_list: &[Dataset], cfg: &RiskConfig) -> Result<RiskResult> {
    evaluate_with(orig, syn_list, cfg, Matcher::column_brute)
}

/// Same result as [`evaluate`], using grouped binary search.
pub fn evaluate_fast(orig: &Dataset, syn_list: &[Dataset], cfg: &RiskConfig) -> Result<RiskResult> {
    evaluate_with(orig, syn_list, cfg, Matcher::column_fast)
}

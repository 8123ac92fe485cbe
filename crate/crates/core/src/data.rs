//! Typed tables for original and synthetic microdata.
//!
//! A [`Dataset`] is column-major: every variable of its [`Schema`] owns one
//! [`Column`], holding `f64` values for continuous variables and level indices
//! for categorical ones. Level indices only mean something relative to the
//! schema they were decoded with; use [`Dataset::align_to`] before comparing
//! two datasets whose categorical levels were discovered independently.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Continuous,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        VariableSpec { name: name.into(), kind: VariableKind::Continuous, levels: Vec::new() }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        VariableSpec {
            name: name.into(),
            kind: VariableKind::Categorical,
            levels: levels.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_continuous(&self) -> bool {
        self.kind == VariableKind::Continuous
    }

    pub fn level_index(&self, label: &str) -> Option<u32> {
        self.levels.iter().position(|l| l == label).map(|i| i as u32)
    }
}

/// Ordered list of variables. The order is the canonical column order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr", into = "SchemaRepr")]
pub struct Schema {
    variables: Vec<VariableSpec>,
}

#[derive(Serialize, Deserialize)]
struct SchemaRepr {
    variables: Vec<VariableSpec>,
}

impl TryFrom<SchemaRepr> for Schema {
    type Error = Error;

    fn try_from(repr: SchemaRepr) -> Result<Self> {
        Schema::new(repr.variables)
    }
}

impl From<Schema> for SchemaRepr {
    fn from(schema: Schema) -> Self {
        SchemaRepr { variables: schema.variables }
    }
}

impl Schema {
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        let mut seen = HashMap::new();
        for v in &variables {
            if v.name.is_empty() {
                return Err(Error::Schema("empty variable name".into()));
            }
            if seen.insert(v.name.as_str(), ()).is_some() {
                return Err(Error::Schema(format!("duplicate variable `{}`", v.name)));
            }
            match v.kind {
                VariableKind::Continuous if !v.levels.is_empty() => {
                    return Err(Error::Schema(format!("continuous variable `{}` must not declare levels", v.name)));
                }
                VariableKind::Categorical => {
                    if v.levels.is_empty() {
                        return Err(Error::Schema(format!(
                            "categorical variable `{}` needs at least one level",
                            v.name
                        )));
                    }
                    let mut labels = HashMap::new();
                    for l in &v.levels {
                        if labels.insert(l.as_str(), ()).is_some() {
                            return Err(Error::Schema(format!("variable `{}` repeats level `{l}`", v.name)));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(Schema { variables })
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(|v| v.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables.iter().position(|v| v.name == name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Result<&VariableSpec> {
        self.index_of(name).map(|i| &self.variables[i])
    }

    pub fn spec(&self, idx: usize) -> &VariableSpec {
        &self.variables[idx]
    }

    /// Same variable names and kinds, in any order. Level sets may differ.
    pub fn compatible_with(&self, other: &Schema) -> bool {
        self.len() == other.len()
            && self.variables.iter().all(|v| other.variables.iter().any(|o| o.name == v.name && o.kind == v.kind))
    }
}

/// A single cell value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Level(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Continuous(Vec<f64>),
    Categorical(Vec<u32>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Continuous(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self, row: usize) -> Cell {
        match self {
            Column::Continuous(v) => Cell::Num(v[row]),
            Column::Categorical(v) => Cell::Level(v[row]),
        }
    }

    pub fn as_continuous(&self) -> Option<&[f64]> {
        match self {
            Column::Continuous(v) => Some(v),
            Column::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[u32]> {
        match self {
            Column::Categorical(v) => Some(v),
            Column::Continuous(_) => None,
        }
    }
}

/// Immutable rectangular table of `n_rows` records over a [`Schema`].
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Schema,
    columns: Vec<Column>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(schema: Schema, columns: Vec<Column>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::Schema(format!("{} columns supplied for {} variables", columns.len(), schema.len())));
        }
        let n_rows = columns.first().map_or(0, Column::len);
        for (spec, col) in schema.variables().iter().zip(&columns) {
            if col.len() != n_rows {
                return Err(Error::Schema(format!(
                    "column `{}` has {} values, expected {n_rows}",
                    spec.name,
                    col.len()
                )));
            }
            match (spec.kind, col) {
                (VariableKind::Continuous, Column::Continuous(v)) => {
                    if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                        return Err(Error::BadCell {
                            row,
                            column: spec.name.clone(),
                            reason: "non-finite value".into(),
                        });
                    }
                }
                (VariableKind::Categorical, Column::Categorical(v)) => {
                    let n_levels = spec.levels.len() as u32;
                    if let Some(row) = v.iter().position(|&l| l >= n_levels) {
                        return Err(Error::BadCell {
                            row,
                            column: spec.name.clone(),
                            reason: format!("level index {} out of range", v[row]),
                        });
                    }
                }
                _ => return Err(Error::Schema(format!("column `{}` does not match its declared kind", spec.name))),
            }
        }
        Ok(Dataset { schema, columns, n_rows })
    }

    pub fn from_rows(schema: Schema, rows: &[Vec<Cell>]) -> Result<Self> {
        let mut columns: Vec<Column> = schema
            .variables()
            .iter()
            .map(|v| match v.kind {
                VariableKind::Continuous => Column::Continuous(Vec::with_capacity(rows.len())),
                VariableKind::Categorical => Column::Categorical(Vec::with_capacity(rows.len())),
            })
            .collect();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::RaggedRow { row: r, expected: schema.len(), found: row.len() });
            }
            for (c, (col, cell)) in columns.iter_mut().zip(row).enumerate() {
                match (col, cell) {
                    (Column::Continuous(v), Cell::Num(x)) => v.push(*x),
                    (Column::Categorical(v), Cell::Level(l)) => v.push(*l),
                    _ => {
                        return Err(Error::BadCell {
                            row: r,
                            column: schema.spec(c).name.clone(),
                            reason: "cell kind does not match variable kind".into(),
                        })
                    }
                }
            }
        }
        Dataset::new(schema, columns)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_at(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    /// Values of the named variable in row order.
    pub fn column(&self, name: &str) -> Result<Vec<Cell>> {
        let idx = self.schema.index_of(name)?;
        let col = &self.columns[idx];
        Ok((0..self.n_rows).map(|r| col.cell(r)).collect())
    }

    pub fn record(&self, row: usize) -> Vec<Cell> {
        self.columns.iter().map(|c| c.cell(row)).collect()
    }

    /// Label of a categorical cell, or `None` for continuous columns.
    pub fn label(&self, row: usize, col: usize) -> Option<&str> {
        let spec = self.schema.spec(col);
        self.columns[col].as_categorical().map(|v| spec.levels[v[row] as usize].as_str())
    }

    /// Returns a copy with column `idx` replaced.
    pub fn with_column(&self, idx: usize, column: Column) -> Result<Dataset> {
        let mut columns = self.columns.clone();
        columns[idx] = column;
        Dataset::new(self.schema.clone(), columns)
    }

    /// Returns a copy with the named continuous column transformed by `f`.
    pub fn map_continuous(&self, name: &str, f: impl Fn(f64) -> f64) -> Result<Dataset> {
        let idx = self.schema.index_of(name)?;
        let values = self.columns[idx]
            .as_continuous()
            .ok_or_else(|| Error::SchemaMismatch(format!("`{name}` is not continuous")))?;
        self.with_column(idx, Column::Continuous(values.iter().map(|&x| f(x)).collect()))
    }

    /// Re-expresses this dataset under `target`: columns are reordered to the
    /// target order and categorical cells are re-indexed by level label.
    pub fn align_to(&self, target: &Schema) -> Result<Dataset> {
        if self.schema == *target {
            return Ok(self.clone());
        }
        if !self.schema.compatible_with(target) {
            return Err(Error::SchemaMismatch(format!(
                "variables [{}] vs [{}]",
                self.schema.names().collect::<Vec<_>>().join(","),
                target.names().collect::<Vec<_>>().join(",")
            )));
        }
        let mut columns = Vec::with_capacity(target.len());
        for spec in target.variables() {
            let src_idx = self.schema.index_of(&spec.name)?;
            let src_spec = self.schema.spec(src_idx);
            let col = match &self.columns[src_idx] {
                Column::Continuous(v) => Column::Continuous(v.clone()),
                Column::Categorical(v) => {
                    let remap = src_spec
                        .levels
                        .iter()
                        .map(|label| {
                            spec.level_index(label).ok_or_else(|| {
                                Error::SchemaMismatch(format!(
                                    "level `{label}` of `{}` is not a level of the target",
                                    spec.name
                                ))
                            })
                        })
                        .collect::<Result<Vec<u32>>>()?;
                    Column::Categorical(v.iter().map(|&l| remap[l as usize]).collect())
                }
            };
            columns.push(col);
        }
        Dataset::new(target.clone(), columns)
    }
}

/// Reads a CSV file. Without a hint, columns that parse entirely as finite
/// numbers are continuous and everything else is categorical with levels in
/// first-appearance order.
pub fn load_csv(path: impl AsRef<Path>, schema_hint: Option<&Schema>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema_hint)
}

/// Like [`load_csv`] without a hint, but the listed columns are always
/// treated as categorical.
pub fn load_csv_inferred(path: impl AsRef<Path>, force_categorical: &[String]) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (header, body) = read_raw(file)?;
    for name in force_categorical {
        if !header.contains(name) {
            return Err(Error::UnknownVariable(name.clone()));
        }
    }
    let schema = infer_schema(&header, &body, force_categorical)?;
    decode(&header, &body, &schema)
}

pub fn read_csv<R: Read>(reader: R, schema_hint: Option<&Schema>) -> Result<Dataset> {
    let (header, body) = read_raw(reader)?;
    let schema = match schema_hint {
        Some(s) => {
            let mut names: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut hinted: Vec<&str> = s.names().collect();
            names.sort_unstable();
            hinted.sort_unstable();
            if names != hinted {
                return Err(Error::SchemaMismatch(format!(
                    "header [{}] does not match schema [{}]",
                    header.join(","),
                    s.names().collect::<Vec<_>>().join(",")
                )));
            }
            s.clone()
        }
        None => infer_schema(&header, &body, &[])?,
    };
    decode(&header, &body, &schema)
}

fn read_raw<R: Read>(reader: R) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Schema("missing header row".into()));
    }
    let mut body = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::RaggedRow { row, expected: header.len(), found: rec.len() });
        }
        body.push(rec);
    }
    Ok((header, body))
}

fn parse_number(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok()
}

fn infer_schema(header: &[String], body: &[csv::StringRecord], force_categorical: &[String]) -> Result<Schema> {
    let mut vars = Vec::with_capacity(header.len());
    for (c, name) in header.iter().enumerate() {
        let numeric = !force_categorical.contains(name) && body.iter().all(|rec| parse_number(&rec[c]).is_some());
        if numeric {
            vars.push(VariableSpec::continuous(name.clone()));
        } else {
            let mut levels: Vec<String> = Vec::new();
            for (row, rec) in body.iter().enumerate() {
                let cell = &rec[c];
                if cell.is_empty() {
                    return Err(missing(row, name));
                }
                if !levels.iter().any(|l| l == cell) {
                    levels.push(cell.to_string());
                }
            }
            if levels.is_empty() {
                return Err(Error::Schema(format!("categorical column `{name}` has no observed levels")));
            }
            vars.push(VariableSpec::categorical(name.clone(), levels));
        }
    }
    Schema::new(vars)
}

fn missing(row: usize, column: &str) -> Error {
    Error::BadCell { row, column: column.to_string(), reason: "missing value".into() }
}

fn decode(header: &[String], body: &[csv::StringRecord], schema: &Schema) -> Result<Dataset> {
    let mut columns = Vec::with_capacity(schema.len());
    for spec in schema.variables() {
        let c = header.iter().position(|h| *h == spec.name).ok_or_else(|| Error::UnknownVariable(spec.name.clone()))?;
        let col = match spec.kind {
            VariableKind::Continuous => {
                let mut v = Vec::with_capacity(body.len());
                for (row, rec) in body.iter().enumerate() {
                    let raw = &rec[c];
                    if raw.trim().is_empty() {
                        return Err(missing(row, &spec.name));
                    }
                    match parse_number(raw) {
                        Some(x) if x.is_finite() => v.push(x),
                        Some(_) => {
                            return Err(Error::BadCell {
                                row,
                                column: spec.name.clone(),
                                reason: format!("non-finite value `{raw}`"),
                            })
                        }
                        None => {
                            return Err(Error::BadCell {
                                row,
                                column: spec.name.clone(),
                                reason: format!("cannot parse `{raw}` as a number"),
                            })
                        }
                    }
                }
                Column::Continuous(v)
            }
            VariableKind::Categorical => {
                let mut v = Vec::with_capacity(body.len());
                for (row, rec) in body.iter().enumerate() {
                    let raw = &rec[c];
                    if raw.is_empty() {
                        return Err(missing(row, &spec.name));
                    }
                    let idx = spec.level_index(raw).ok_or_else(|| Error::BadCell {
                        row,
                        column: spec.name.clone(),
                        reason: format!("`{raw}` is not a declared level"),
                    })?;
                    v.push(idx);
                }
                Column::Categorical(v)
            }
        };
        columns.push(col);
    }
    Dataset::new(schema.clone(), columns)
}

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(ds, file)
}

pub fn write_csv_to<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ds.schema().names())?;
    let mut fields: Vec<String> = Vec::with_capacity(ds.schema().len());
    for row in 0..ds.n_rows() {
        fields.clear();
        for (c, col) in ds.columns().iter().enumerate() {
            match col {
                // `Display` for f64 prints the shortest string that round-trips.
                Column::Continuous(v) => fields.push(v[row].to_string()),
                Column::Categorical(_) => fields.push(ds.label(row, c).unwrap().to_string()),
            }
        }
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

//! Mixed-type cohort data model.
//!
//! A [`Cohort`] is an `n x d` row-major matrix of `f64`. Numerical cells hold
//! raw values, categorical cells hold the integer index of their level in the
//! feature's level list. The same encoded form is handed to predictors.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindTag {
    Numerical,
    Categorical,
}

/// On-disk form of one feature in a schema file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    #[serde(default)]
    pub immutable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admissible_levels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    Numerical {
        min: f64,
        max: f64,
    },
    Categorical {
        levels: Vec<String>,
        /// Level indices reachable by edits, ascending.
        admissible: Vec<usize>,
        embed_dim: usize,
    },
}

/// A validated feature description.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
    pub immutable: bool,
}

/// Deterministic embedding width for a categorical feature with `cardinality` levels.
pub fn default_embed_dim(cardinality: usize) -> usize {
    let bits = (cardinality.max(1) as f64).log2().ceil() as usize;
    (bits + 1).clamp(2, 8)
}

impl Feature {
    pub fn numerical(name: impl Into<String>, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numerical { min, max },
            immutable: false,
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        let levels: Vec<String> = levels.into_iter().map(Into::into).collect();
        let admissible = (0..levels.len()).collect();
        let embed_dim = default_embed_dim(levels.len());
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical {
                levels,
                admissible,
                embed_dim,
            },
            immutable: false,
        }
    }

    pub fn immutable(mut self) -> Self {
        self.immutable = true;
        self
    }

    /// Restricts the levels reachable by edits. Unknown labels are a schema error.
    pub fn with_admissible<S: AsRef<str>>(mut self, labels: &[S]) -> Result<Self> {
        if let FeatureKind::Categorical { levels, admissible, .. } = &mut self.kind {
            let mut idx = labels
                .iter()
                .map(|l| {
                    levels.iter().position(|v| v == l.as_ref()).ok_or_else(|| {
                        Error::Schema(format!("feature `{}`: admissible level `{}` is not a level", self.name, l.as_ref()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            idx.sort_unstable();
            idx.dedup();
            *admissible = idx;
            Ok(self)
        } else {
            Err(Error::Schema(format!("feature `{}` is numerical; admissible levels apply to categoricals", self.name)))
        }
    }

    pub fn with_embed_dim(mut self, r: usize) -> Self {
        if let FeatureKind::Categorical { embed_dim, .. } = &mut self.kind {
            *embed_dim = r;
        }
        self
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical { .. })
    }

    /// Number of levels for categoricals, `None` for numericals.
    pub fn cardinality(&self) -> Option<usize> {
        match &self.kind {
            FeatureKind::Categorical { levels, .. } => Some(levels.len()),
            FeatureKind::Numerical { .. } => None,
        }
    }

    /// Width of the numerical range (`R_max - R_min`).
    pub fn span(&self) -> Option<f64> {
        match self.kind {
            FeatureKind::Numerical { min, max } => Some(max - min),
            FeatureKind::Categorical { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            FeatureKind::Numerical { min, max } => {
                if !(min.is_finite() && max.is_finite() && min < max) {
                    return Err(Error::Schema(format!(
                        "feature `{}`: numerical range must satisfy min < max, got [{min}, {max}]",
                        self.name
                    )));
                }
            }
            FeatureKind::Categorical {
                levels,
                admissible,
                embed_dim,
            } => {
                if levels.len() < 2 {
                    return Err(Error::Schema(format!("feature `{}`: categorical needs at least 2 levels", self.name)));
                }
                let unique: HashSet<&String> = levels.iter().collect();
                if unique.len() != levels.len() {
                    return Err(Error::Schema(format!("feature `{}`: duplicate level labels", self.name)));
                }
                if admissible.iter().any(|&a| a >= levels.len()) {
                    return Err(Error::Schema(format!("feature `{}`: admissible index out of range", self.name)));
                }
                if *embed_dim == 0 {
                    return Err(Error::Schema(format!("feature `{}`: embed_dim must be >= 1", self.name)));
                }
            }
        }
        Ok(())
    }

    fn from_spec(spec: FeatureSpec) -> Result<Self> {
        let feature = match spec.kind {
            KindTag::Numerical => {
                if spec.levels.is_some() || spec.admissible_levels.is_some() || spec.embed_dim.is_some() {
                    return Err(Error::Schema(format!(
                        "feature `{}`: numerical features take no levels, admissible_levels or embed_dim",
                        spec.name
                    )));
                }
                let [min, max] = spec
                    .range
                    .ok_or_else(|| Error::Schema(format!("feature `{}`: numerical feature needs a range", spec.name)))?;
                Feature {
                    name: spec.name,
                    kind: FeatureKind::Numerical { min, max },
                    immutable: spec.immutable,
                }
            }
            KindTag::Categorical => {
                if spec.range.is_some() {
                    return Err(Error::Schema(format!("feature `{}`: categorical features take no range", spec.name)));
                }
                let levels = spec
                    .levels
                    .ok_or_else(|| Error::Schema(format!("feature `{}`: categorical feature needs levels", spec.name)))?;
                let mut f = Feature::categorical(spec.name, levels);
                f.immutable = spec.immutable;
                if let Some(adm) = spec.admissible_levels {
                    f = f.with_admissible(&adm)?;
                }
                if let Some(r) = spec.embed_dim {
                    f = f.with_embed_dim(r);
                }
                f
            }
        };
        feature.validate()?;
        Ok(feature)
    }

    fn to_spec(&self) -> FeatureSpec {
        match &self.kind {
            FeatureKind::Numerical { min, max } => FeatureSpec {
                name: self.name.clone(),
                kind: KindTag::Numerical,
                range: Some([*min, *max]),
                levels: None,
                immutable: self.immutable,
                admissible_levels: None,
                embed_dim: None,
            },
            FeatureKind::Categorical {
                levels,
                admissible,
                embed_dim,
            } => FeatureSpec {
                name: self.name.clone(),
                kind: KindTag::Categorical,
                range: None,
                levels: Some(levels.clone()),
                immutable: self.immutable,
                admissible_levels: Some(admissible.iter().map(|&i| levels[i].clone()).collect()),
                embed_dim: Some(*embed_dim),
            },
        }
    }
}

/// Ordered, validated list of features.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    features: Vec<Feature>,
}

impl Schema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &features {
            f.validate()?;
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name `{}`", f.name)));
            }
        }
        Ok(Self { features })
    }

    pub fn from_specs(specs: Vec<FeatureSpec>) -> Result<Self> {
        Self::new(specs.into_iter().map(Feature::from_spec).collect::<Result<_>>()?)
    }

    pub fn to_specs(&self) -> Vec<FeatureSpec> {
        self.features.iter().map(Feature::to_spec).collect()
    }

    /// Reads a schema file: a JSON array with one object per feature.
    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let specs: Vec<FeatureSpec> =
            serde_json::from_str(text).map_err(|e| Error::Schema(format!("invalid schema JSON: {e}")))?;
        Self::from_specs(specs)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_specs())?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, p: usize) -> &Feature {
        &self.features[p]
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    /// Indices of features that edits may touch.
    pub fn actionable(&self) -> Vec<usize> {
        (0..self.len()).filter(|&p| !self.features[p].immutable).collect()
    }

    /// Checks one cell against its feature's domain.
    pub fn check_cell(&self, p: usize, value: f64) -> std::result::Result<(), String> {
        match &self.features[p].kind {
            FeatureKind::Numerical { min, max } => {
                if !value.is_finite() {
                    Err(format!("value {value} is not finite"))
                } else if value < *min || value > *max {
                    Err(format!("value {value} outside range [{min}, {max}]"))
                } else {
                    Ok(())
                }
            }
            FeatureKind::Categorical { levels, .. } => {
                if value.fract() != 0.0 || value < 0.0 || value >= levels.len() as f64 {
                    Err(format!("level index {value} not an integer in [0, {})", levels.len()))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Clamps numerical coordinates into their ranges and snaps categorical
/// coordinates to the nearest valid level index.
pub fn project_to_domain(row: &[f64], schema: &Schema) -> Vec<f64> {
    let mut out = row.to_vec();
    project_in_place(&mut out, schema);
    out
}

pub(crate) fn project_in_place(row: &mut [f64], schema: &Schema) {
    debug_assert_eq!(row.len(), schema.len());
    for (x, f) in row.iter_mut().zip(schema.features()) {
        *x = match &f.kind {
            FeatureKind::Numerical { min, max } => x.clamp(*min, *max),
            FeatureKind::Categorical { levels, .. } => x.round().clamp(0.0, (levels.len() - 1) as f64),
        };
    }
}

/// Encoded sample set sharing one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    schema: Arc<Schema>,
    values: Vec<f64>,
    n: usize,
}

impl Cohort {
    /// Builds a cohort from row-major values, validating every cell.
    pub fn new(schema: Arc<Schema>, values: Vec<f64>) -> Result<Self> {
        let d = schema.len();
        if d == 0 {
            return Err(Error::Schema("schema has no features".into()));
        }
        if values.len() % d != 0 {
            return Err(Error::Argument(format!("{} values do not form rows of width {d}", values.len())));
        }
        let n = values.len() / d;
        for (i, row) in values.chunks(d).enumerate() {
            for (p, &v) in row.iter().enumerate() {
                schema.check_cell(p, v).map_err(|message| Error::Validation {
                    row: i + 1,
                    column: schema.feature(p).name.clone(),
                    message,
                })?;
            }
        }
        Ok(Self { schema, values, n })
    }

    pub fn from_rows(schema: Arc<Schema>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = schema.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::Argument(format!("row {} has {} values, schema has {d}", bad + 1, rows[bad].len())));
        }
        Self::new(schema, rows.concat())
    }

    pub fn empty(schema: Arc<Schema>) -> Self {
        Self { schema, values: Vec::new(), n: 0 }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.schema.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.d();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.d())
    }

    pub(crate) fn from_trusted(schema: Arc<Schema>, values: Vec<f64>) -> Self {
        let n = values.len() / schema.len();
        Self { schema, values, n }
    }
}

/// Reads an encoded cohort from a headered CSV file.
pub fn load_csv(path: impl AsRef<Path>, schema: Arc<Schema>) -> Result<Cohort> {
    let file = File::open(path.as_ref())?;
    read_csv(file, schema)
}

/// Reads an encoded cohort from any CSV source. The header must name every
/// schema feature; columns may appear in any order.
pub fn read_csv<R: Read>(reader: R, schema: Arc<Schema>) -> Result<Cohort> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .quoting(false)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if let Some(h) = header.iter().find(|h| h.contains('"')) {
        return Err(Error::Schema(format!("quoted header field `{h}` is not supported")));
    }
    let mut column_of = Vec::with_capacity(schema.len());
    for f in schema.features() {
        let pos = header
            .iter()
            .position(|h| h == f.name)
            .ok_or_else(|| Error::Schema(format!("missing column `{}`", f.name)))?;
        column_of.push(pos);
    }
    if header.len() != schema.len() {
        let extra: Vec<&str> = header.iter().filter(|h| schema.names().all(|n| n != *h)).collect();
        return Err(Error::Schema(format!("unexpected columns: {}", extra.join(", "))));
    }

    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        for (p, f) in schema.features().iter().enumerate() {
            let cell = &record[column_of[p]];
            let parse_err = |message: String| Error::Parse {
                row,
                column: f.name.clone(),
                message,
            };
            if cell.contains('"') {
                return Err(parse_err("quoted fields are not supported".into()));
            }
            if cell.is_empty() {
                return Err(parse_err("missing value".into()));
            }
            let v = match &f.kind {
                FeatureKind::Numerical { .. } => cell
                    .parse::<f64>()
                    .map_err(|e| parse_err(format!("`{cell}` is not a number: {e}")))?,
                FeatureKind::Categorical { levels, .. } => {
                    levels.iter().position(|l| l == cell).ok_or_else(|| Error::Validation {
                        row,
                        column: f.name.clone(),
                        message: format!("unknown level `{cell}`"),
                    })? as f64
                }
            };
            schema.check_cell(p, v).map_err(|message| Error::Validation {
                row,
                column: f.name.clone(),
                message,
            })?;
            values.push(v);
        }
    }
    Ok(Cohort::from_trusted(schema, values))
}

/// Writes a cohort as CSV with labels restored. Numbers use the shortest
/// representation that parses back to the identical `f64`.
pub fn decode_csv(cohort: &Cohort, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    write_csv(cohort, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(cohort: &Cohort, w: &mut W) -> Result<()> {
    let schema = cohort.schema();
    writeln!(w, "{}", schema.names().collect::<Vec<_>>().join(","))?;
    let mut line = String::new();
    for row in cohort.rows() {
        line.clear();
        for (p, (&v, f)) in row.iter().zip(schema.features()).enumerate() {
            if p > 0 {
                line.push(',');
            }
            match &f.kind {
                FeatureKind::Numerical { .. } => line.push_str(&format!("{v}")),
                FeatureKind::Categorical { levels, .. } => line.push_str(&levels[v as usize]),
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads a single-column CSV of reals (with header), e.g. target outputs.
pub fn load_values_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .quoting(false)
        .from_path(path.as_ref())?;
    let column = rdr.headers()?.get(0).unwrap_or("").to_string();
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(0).unwrap_or("");
        let v: f64 = cell.parse().map_err(|e| Error::Parse {
            row: i + 1,
            column: column.clone(),
            message: format!("`{cell}` is not a number: {e}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Validation {
                row: i + 1,
                column: column.clone(),
                message: format!("value {v} is not finite"),
            });
        }
        out.push(v);
    }
    Ok(out)
}

pub fn save_values_csv(values: &[f64], column: &str, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    writeln!(w, "{column}")?;
    for v in values {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

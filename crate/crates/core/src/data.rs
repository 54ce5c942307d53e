//! Typed tabular data: schema, rows, CSV ingestion, the relabel/drop
//! pre-treatment and the coverage-aware train/test splitter.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::rules::FeedbackRuleSet;

/// Name of the optional trailing CSV column that carries row provenance.
pub const PROVENANCE_COLUMN: &str = "__provenance";

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),
    #[error("unexpected column `{0}` in CSV header")]
    UnexpectedColumn(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("relabelling under a probabilistic rule needs a random source")]
    MissingRng,
    #[error("instance does not match the schema: {0}")]
    Mismatch(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum AttributeKind {
    Numeric,
    Categorical { categories: Vec<String> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn numeric(name: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Numeric,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Categorical {
                categories: categories.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, AttributeKind::Numeric)
    }

    /// Declared categories, empty for numeric attributes.
    pub fn categories(&self) -> &[String] {
        match &self.kind {
            AttributeKind::Numeric => &[],
            AttributeKind::Categorical { categories } => categories,
        }
    }

    pub fn category_index(&self, token: &str) -> Option<usize> {
        self.categories().iter().position(|c| c == token)
    }
}

/// Attribute layout plus the class label set.
#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    pub attributes: Vec<Attribute>,
    pub label_name: String,
    pub classes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    attributes: Vec<AttributeFile>,
    label: LabelFile,
}

#[derive(Serialize, Deserialize)]
struct AttributeFile {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct LabelFile {
    name: String,
    classes: Vec<String>,
}

impl Schema {
    pub fn new(
        attributes: Vec<Attribute>,
        label_name: impl Into<String>,
        classes: Vec<String>,
    ) -> Result<Self, DataError> {
        let schema = Schema {
            attributes,
            label_name: label_name.into(),
            classes,
        };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<(), DataError> {
        let err = |m: String| Err(DataError::Schema(m));
        if self.classes.len() < 2 {
            return err("at least two class labels are required".into());
        }
        for (i, c) in self.classes.iter().enumerate() {
            if self.classes[..i].contains(c) {
                return err(format!("duplicate class label `{c}`"));
            }
        }
        for (i, a) in self.attributes.iter().enumerate() {
            if a.name.is_empty() {
                return err(format!("attribute {i} has an empty name"));
            }
            if self.attributes[..i].iter().any(|b| b.name == a.name) || a.name == self.label_name
            {
                return err(format!("duplicate column name `{}`", a.name));
            }
            if let AttributeKind::Categorical { categories } = &a.kind {
                if categories.is_empty() {
                    return err(format!("categorical attribute `{}` lists no categories", a.name));
                }
                for (j, c) in categories.iter().enumerate() {
                    if categories[..j].contains(c) {
                        return err(format!("attribute `{}` repeats category `{c}`", a.name));
                    }
                }
            }
        }
        Ok(())
    }

    /// Parses the JSON schema sidecar.
    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let file: SchemaFile =
            serde_json::from_str(text).map_err(|e| DataError::Schema(e.to_string()))?;
        let mut attributes = Vec::with_capacity(file.attributes.len());
        for a in file.attributes {
            let kind = match a.kind.as_str() {
                "numeric" => {
                    if a.categories.is_some() {
                        return Err(DataError::Schema(format!(
                            "numeric attribute `{}` must not list categories",
                            a.name
                        )));
                    }
                    AttributeKind::Numeric
                }
                "categorical" => AttributeKind::Categorical {
                    categories: a.categories.unwrap_or_default(),
                },
                other => {
                    return Err(DataError::Schema(format!(
                        "attribute `{}` has unknown kind `{other}`",
                        a.name
                    )))
                }
            };
            attributes.push(Attribute { name: a.name, kind });
        }
        Schema::new(attributes, file.label.name, file.label.classes)
    }

    pub fn to_json(&self) -> String {
        let file = SchemaFile {
            attributes: self
                .attributes
                .iter()
                .map(|a| AttributeFile {
                    name: a.name.clone(),
                    kind: if a.is_numeric() { "numeric" } else { "categorical" }.into(),
                    categories: (!a.is_numeric()).then(|| a.categories().to_vec()),
                })
                .collect(),
            label: LabelFile {
                name: self.label_name.clone(),
                classes: self.classes.clone(),
            },
        };
        serde_json::to_string_pretty(&file).expect("schema serializes")
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_owned(),
            source,
        })?;
        Schema::from_json(&text)
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Stable 64-bit digest of the schema layout, used to tie fitted models
    /// to the data they were trained on.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_json().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        h
    }

    /// Checks arity, kinds, category range and finiteness of a value vector.
    pub fn check_values(&self, values: &[Value]) -> Result<(), String> {
        if values.len() != self.attributes.len() {
            return Err(format!(
                "expected {} attributes, got {}",
                self.attributes.len(),
                values.len()
            ));
        }
        for (a, v) in self.attributes.iter().zip(values) {
            match (&a.kind, v) {
                (AttributeKind::Numeric, Value::Num(x)) if x.is_finite() => {}
                (AttributeKind::Numeric, Value::Num(_)) => {
                    return Err(format!("attribute `{}` is not finite", a.name))
                }
                (AttributeKind::Categorical { categories }, Value::Cat(c))
                    if *c < categories.len() => {}
                _ => return Err(format!("attribute `{}` has a value of the wrong kind", a.name)),
            }
        }
        Ok(())
    }
}

/// One attribute value. Categories are stored as indices into the
/// attribute's declared category list.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Num(f64),
    Cat(usize),
}

impl Value {
    pub fn as_num(self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(x),
            Value::Cat(_) => None,
        }
    }

    pub fn as_cat(self) -> Option<usize> {
        match self {
            Value::Cat(c) => Some(c),
            Value::Num(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub values: Vec<Value>,
    /// Index into [`Schema::classes`].
    pub label: usize,
}

/// Where a row came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Original,
    Synthetic {
        rule_id: String,
        base: usize,
        neighbor: usize,
    },
}

impl Provenance {
    pub fn is_synthetic(&self) -> bool {
        matches!(self, Provenance::Synthetic { .. })
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Original => f.write_str("original"),
            Provenance::Synthetic {
                rule_id,
                base,
                neighbor,
            } => write!(f, "synthetic:{rule_id}:{base}:{neighbor}"),
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "original" || s.is_empty() {
            return Ok(Provenance::Original);
        }
        let rest = s
            .strip_prefix("synthetic:")
            .ok_or_else(|| format!("bad provenance tag `{s}`"))?;
        let mut parts = rest.rsplitn(3, ':');
        let neighbor = parts.next().and_then(|p| p.parse().ok());
        let base = parts.next().and_then(|p| p.parse().ok());
        let rule_id = parts.next();
        match (rule_id, base, neighbor) {
            (Some(r), Some(base), Some(neighbor)) => Ok(Provenance::Synthetic {
                rule_id: r.to_string(),
                base,
                neighbor,
            }),
            _ => Err(format!("bad provenance tag `{s}`")),
        }
    }
}

/// Rows conforming to a shared schema, each with a provenance tag.
#[derive(Clone, Debug)]
pub struct Dataset {
    schema: Arc<Schema>,
    rows: Vec<Instance>,
    provenance: Vec<Provenance>,
}

impl Dataset {
    pub fn new(schema: Arc<Schema>) -> Self {
        Dataset {
            schema,
            rows: Vec::new(),
            provenance: Vec::new(),
        }
    }

    /// Builds a dataset of original rows, validating each against the schema.
    pub fn from_rows(schema: Arc<Schema>, rows: Vec<Instance>) -> Result<Self, DataError> {
        let mut d = Dataset::new(schema);
        for row in rows {
            d.push(row, Provenance::Original)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, row: Instance, provenance: Provenance) -> Result<(), DataError> {
        self.schema
            .check_values(&row.values)
            .map_err(DataError::Mismatch)?;
        if row.label >= self.schema.n_classes() {
            return Err(DataError::Mismatch(format!("label index {} out of range", row.label)));
        }
        self.rows.push(row);
        self.provenance.push(provenance);
        Ok(())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn rows(&self) -> &[Instance] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Instance {
        &self.rows[i]
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn synthetic_count(&self) -> usize {
        self.provenance.iter().filter(|p| p.is_synthetic()).count()
    }

    /// Rows at `indices`, in the order given.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            provenance: indices.iter().map(|&i| self.provenance[i].clone()).collect(),
        }
    }

    /// Appends already-validated rows from a dataset with the same schema.
    pub fn extend_from(&mut self, other: &Dataset) {
        debug_assert_eq!(*self.schema, *other.schema);
        self.rows.extend(other.rows.iter().cloned());
        self.provenance.extend(other.provenance.iter().cloned());
    }

    /// Per-numeric-attribute observed (min, max); `None` for categorical
    /// attributes or when the dataset is empty.
    pub fn numeric_ranges(&self) -> Vec<Option<(f64, f64)>> {
        self.schema
            .attributes
            .iter()
            .enumerate()
            .map(|(j, a)| {
                if !a.is_numeric() {
                    return None;
                }
                self.rows.iter().filter_map(|r| r.values[j].as_num()).fold(None, |acc, x| {
                    Some(match acc {
                        None => (x, x),
                        Some((lo, hi)) => (f64::min(lo, x), f64::max(hi, x)),
                    })
                })
            })
            .collect()
    }

    /// Reads a CSV whose header names the schema's attributes and label, in
    /// any order. An optional `__provenance` column restores provenance tags.
    pub fn from_csv_reader<R: Read>(schema: Arc<Schema>, reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let find = |name: &str| header.iter().position(|h| h == name);
        let mut columns = Vec::with_capacity(schema.attributes.len());
        for a in &schema.attributes {
            columns.push(find(&a.name).ok_or_else(|| DataError::MissingColumn(a.name.clone()))?);
        }
        let label_col = find(&schema.label_name)
            .ok_or_else(|| DataError::MissingColumn(schema.label_name.clone()))?;
        let prov_col = find(PROVENANCE_COLUMN);
        for h in header.iter() {
            let known = h == schema.label_name
                || h == PROVENANCE_COLUMN
                || schema.attribute_index(h).is_some();
            if !known {
                return Err(DataError::UnexpectedColumn(h.to_string()));
            }
        }

        let mut d = Dataset::new(Arc::clone(&schema));
        for (i, record) in rdr.records().enumerate() {
            let row = i + 1;
            let record = record?;
            let field = |c: usize| record.get(c).unwrap_or("");
            let mut values = Vec::with_capacity(columns.len());
            for (a, &c) in schema.attributes.iter().zip(&columns) {
                let raw = field(c);
                let v = match &a.kind {
                    AttributeKind::Numeric => {
                        let x: f64 = raw.parse().map_err(|_| DataError::Row {
                            row,
                            message: format!("attribute `{}`: `{raw}` is not a number", a.name),
                        })?;
                        if !x.is_finite() {
                            return Err(DataError::Row {
                                row,
                                message: format!("attribute `{}`: `{raw}` is not finite", a.name),
                            });
                        }
                        Value::Num(x)
                    }
                    AttributeKind::Categorical { .. } => {
                        Value::Cat(a.category_index(raw).ok_or_else(|| DataError::Row {
                            row,
                            message: format!("attribute `{}`: unknown category `{raw}`", a.name),
                        })?)
                    }
                };
                values.push(v);
            }
            let raw_label = field(label_col);
            let label = schema.class_index(raw_label).ok_or_else(|| DataError::Row {
                row,
                message: format!("unknown class label `{raw_label}`"),
            })?;
            let provenance = match prov_col {
                Some(c) => field(c)
                    .parse()
                    .map_err(|message| DataError::Row { row, message })?,
                None => Provenance::Original,
            };
            d.rows.push(Instance { values, label });
            d.provenance.push(provenance);
        }
        Ok(d)
    }

    /// Writes RFC-4180 CSV with a header row; numbers use the shortest
    /// representation that parses back to the same value.
    pub fn write_csv<W: Write>(&self, writer: W, with_provenance: bool) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.schema.attributes.iter().map(|a| a.name.as_str()).collect();
        header.push(&self.schema.label_name);
        if with_provenance {
            header.push(PROVENANCE_COLUMN);
        }
        w.write_record(&header)?;
        for (row, prov) in self.rows.iter().zip(&self.provenance) {
            let mut fields: Vec<String> = row
                .values
                .iter()
                .zip(&self.schema.attributes)
                .map(|(v, a)| match v {
                    Value::Num(x) => x.to_string(),
                    Value::Cat(c) => a.categories()[*c].clone(),
                })
                .collect();
            fields.push(self.schema.classes[row.label].clone());
            if with_provenance {
                fields.push(prov.to_string());
            }
            w.write_record(&fields)?;
        }
        w.flush().map_err(|source| DataError::Io {
            path: PathBuf::from("<csv writer>"),
            source,
        })?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, with_provenance: bool) -> Result<(), DataError> {
        let file = std::fs::File::create(path).map_err(|source| DataError::Io {
            path: path.to_owned(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file), with_provenance)
    }
}

/// Loads a CSV file against a JSON schema sidecar.
pub fn load_dataset(csv_path: &Path, schema_path: &Path) -> Result<Dataset, DataError> {
    let schema = Arc::new(Schema::load(schema_path)?);
    let file = std::fs::File::open(csv_path).map_err(|source| DataError::Io {
        path: csv_path.to_owned(),
        source,
    })?;
    Dataset::from_csv_reader(schema, std::io::BufReader::new(file))
}

/// Pre-treatment of rule-covered training rows before augmentation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModificationStrategy {
    #[default]
    None,
    Relabel,
    Drop,
}

impl std::str::FromStr for ModificationStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "relabel" => Ok(Self::Relabel),
            "drop" => Ok(Self::Drop),
            _ => Err(format!("unknown modification strategy `{s}`")),
        }
    }
}

/// Applies `strategy` to the rows covered by `frs`.
///
/// Under `relabel`, a row covered by a deterministic rule takes that rule's
/// class; under a probabilistic rule it takes a label drawn from the rule's
/// distribution, which requires `rng`. Under `drop`, covered rows whose label
/// the covering rule would not produce (probability zero) are removed.
pub fn apply_modification(
    d: &Dataset,
    frs: &FeedbackRuleSet,
    strategy: ModificationStrategy,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<Dataset, DataError> {
    if strategy == ModificationStrategy::None {
        return Ok(d.clone());
    }
    let mut out = Dataset::new(Arc::clone(&d.schema));
    for (row, prov) in d.rows.iter().zip(&d.provenance) {
        let Some(rule) = frs.rules.iter().find(|r| r.satisfies(&row.values)) else {
            out.rows.push(row.clone());
            out.provenance.push(prov.clone());
            continue;
        };
        let dist = &rule.distribution;
        match strategy {
            ModificationStrategy::Relabel => {
                let label = match dist.deterministic_class() {
                    Some(c) => c,
                    None => {
                        let r = rng.as_deref_mut().ok_or(DataError::MissingRng)?;
                        dist.sample(r)
                    }
                };
                out.rows.push(Instance {
                    values: row.values.clone(),
                    label,
                });
                out.provenance.push(prov.clone());
            }
            ModificationStrategy::Drop => {
                if dist.prob(row.label) > 0.0 {
                    out.rows.push(row.clone());
                    out.provenance.push(prov.clone());
                }
            }
            ModificationStrategy::None => unreachable!(),
        }
    }
    Ok(out)
}

fn round_half_up(x: f64) -> usize {
    // Guard against products such as 0.3 * 10 = 3.0000000000000004.
    let snapped = (x * 1e9).round() / 1e9;
    (snapped + 0.5).floor().max(0.0) as usize
}

/// Splits `d` into train and test so that exactly `round(tcf * |cov|)` of the
/// rule-covered rows land in train and the uncovered rows are split by
/// `outside_train_frac`. Both outputs keep the input's relative row order.
pub fn split_with_tcf(
    d: &Dataset,
    frs: &FeedbackRuleSet,
    tcf: f64,
    outside_train_frac: f64,
    rng: &mut dyn RngCore,
) -> (Dataset, Dataset) {
    assert!((0.0..=1.0).contains(&tcf), "tcf must lie in [0, 1]");
    assert!(
        (0.0..=1.0).contains(&outside_train_frac),
        "outside_train_frac must lie in [0, 1]"
    );
    let covered = frs.coverage(d);
    let mut is_covered = vec![false; d.len()];
    for &i in &covered {
        is_covered[i] = true;
    }
    let outside: Vec<usize> = (0..d.len()).filter(|&i| !is_covered[i]).collect();

    let mut in_train = vec![false; d.len()];
    for (pool, frac) in [(covered, tcf), (outside, outside_train_frac)] {
        let take = round_half_up(frac * pool.len() as f64).min(pool.len());
        let mut shuffled = pool;
        shuffled.shuffle(rng);
        for &i in &shuffled[..take] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..d.len()).partition(|&i| in_train[i]);
    (d.subset(&train), d.subset(&test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::parse_rule_set;
    use crate::seed;

    fn schema() -> Arc<Schema> {
        Arc::new(
            Schema::new(
                vec![
                    Attribute::numeric("age"),
                    Attribute::numeric("income"),
                    Attribute::categorical("color", ["red", "blue", "green"]),
                ],
                "class",
                vec!["A".into(), "B".into()],
            )
            .unwrap(),
        )
    }

    fn numeric_schema() -> Arc<Schema> {
        Arc::new(
            Schema::new(
                vec![Attribute::numeric("x"), Attribute::numeric("y")],
                "class",
                vec!["A".into(), "B".into()],
            )
            .unwrap(),
        )
    }

    #[test]
    fn parses_three_numeric_rows() {
        let csv = "x,y,class\n1,2,A\n3.5,-1,B\n0,0,A\n";
        let d = Dataset::from_csv_reader(numeric_schema(), csv.as_bytes()).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.provenance().iter().all(|p| *p == Provenance::Original));
        assert_eq!(d.row(1).values, vec![Value::Num(3.5), Value::Num(-1.0)]);
        assert_eq!(d.row(1).label, 1);
    }

    #[test]
    fn unknown_category_names_row_and_attribute() {
        let csv = "age,income,color,class\n30,1,red,A\n31,2,blu,B\n";
        let err = Dataset::from_csv_reader(schema(), csv.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "{msg}");
        assert!(msg.contains("color") && msg.contains("blu"), "{msg}");
    }

    #[test]
    fn non_numeric_text_and_missing_column() {
        let csv = "x,y,class\n1,abc,A\n";
        let msg = Dataset::from_csv_reader(numeric_schema(), csv.as_bytes())
            .unwrap_err()
            .to_string();
        assert!(msg.contains("row 1") && msg.contains("`y`"), "{msg}");

        let csv = "x,class\n1,A\n";
        assert!(matches!(
            Dataset::from_csv_reader(numeric_schema(), csv.as_bytes()),
            Err(DataError::MissingColumn(c)) if c == "y"
        ));
    }

    #[test]
    fn empty_body_is_valid() {
        let d = Dataset::from_csv_reader(numeric_schema(), "x,y,class\n".as_bytes()).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn schema_json_round_trip_and_validation() {
        let s = schema();
        let back = Schema::from_json(&s.to_json()).unwrap();
        assert_eq!(*s, back);
        let bad = r#"{"attributes":[{"name":"a","kind":"numeric"}],"label":{"name":"y","classes":["only"]}}"#;
        assert!(Schema::from_json(bad).is_err());
        let dup = r#"{"attributes":[{"name":"a","kind":"numeric"},{"name":"a","kind":"numeric"}],"label":{"name":"y","classes":["p","q"]}}"#;
        assert!(Schema::from_json(dup).is_err());
        let nocats = r#"{"attributes":[{"name":"a","kind":"categorical"}],"label":{"name":"y","classes":["p","q"]}}"#;
        assert!(Schema::from_json(nocats).is_err());
    }

    #[test]
    fn provenance_survives_save_and_load() {
        let mut d = Dataset::new(numeric_schema());
        d.push(
            Instance {
                values: vec![Value::Num(0.1), Value::Num(2.0)],
                label: 0,
            },
            Provenance::Original,
        )
        .unwrap();
        d.push(
            Instance {
                values: vec![Value::Num(1.0 / 3.0), Value::Num(-7.25)],
                label: 1,
            },
            Provenance::Synthetic {
                rule_id: "r1+r2".into(),
                base: 4,
                neighbor: 9,
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf, true).unwrap();
        let back = Dataset::from_csv_reader(numeric_schema(), buf.as_slice()).unwrap();
        assert_eq!(back.rows(), d.rows());
        assert_eq!(back.provenance(), d.provenance());
        assert_eq!(back.synthetic_count(), 1);
    }

    fn ages(values: &[(f64, usize)]) -> Dataset {
        let rows = values
            .iter()
            .map(|&(age, label)| Instance {
                values: vec![Value::Num(age), Value::Num(0.0), Value::Cat(0)],
                label,
            })
            .collect();
        Dataset::from_rows(schema(), rows).unwrap()
    }

    #[test]
    fn modification_strategies() {
        let frs = parse_rule_set("IF age < 30 THEN class = \"A\"", &schema()).unwrap();
        let d = ages(&[(25.0, 1), (26.0, 0), (40.0, 1)]);

        let none = apply_modification(&d, &frs, ModificationStrategy::None, None).unwrap();
        assert_eq!(none.rows(), d.rows());

        let relabel = apply_modification(&d, &frs, ModificationStrategy::Relabel, None).unwrap();
        assert_eq!(relabel.rows()[0].label, 0);
        assert_eq!(relabel.rows()[1], d.rows()[1]);
        assert_eq!(relabel.rows()[2], d.rows()[2]);

        let drop = apply_modification(&d, &frs, ModificationStrategy::Drop, None).unwrap();
        assert_eq!(drop.len(), 2);
        assert_eq!(drop.rows()[0], d.rows()[1]);
        assert_eq!(drop.rows()[1], d.rows()[2]);
    }

    #[test]
    fn probabilistic_relabel_requires_rng() {
        let frs =
            parse_rule_set("IF age < 30 THEN class ~ {A: 0.5, B: 0.5}", &schema()).unwrap();
        let d = ages(&[(25.0, 1), (26.0, 0)]);
        assert!(matches!(
            apply_modification(&d, &frs, ModificationStrategy::Relabel, None),
            Err(DataError::MissingRng)
        ));
        let mut rng = seed::stream(1, "t", 0);
        let out =
            apply_modification(&d, &frs, ModificationStrategy::Relabel, Some(&mut rng)).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn tcf_split_counts() {
        let frs = parse_rule_set("IF age < 10 THEN class = \"A\"", &schema()).unwrap();
        let data: Vec<(f64, usize)> = (0..30).map(|i| (i as f64, i % 2)).collect();
        let d = ages(&data);
        let mut rng = seed::stream(3, "split", 0);
        let (train, test) = split_with_tcf(&d, &frs, 0.2, 0.8, &mut rng);
        let covered_in_train = frs.coverage(&train).len();
        assert_eq!(covered_in_train, 2);
        assert_eq!(train.len(), 2 + 16);
        assert_eq!(train.len() + test.len(), 30);

        let (train, _) = split_with_tcf(&d, &frs, 0.0, 0.8, &mut rng);
        assert!(frs.coverage(&train).is_empty());

        let (train, test) = split_with_tcf(&d, &frs, 1.0, 1.0, &mut rng);
        assert_eq!(train.rows(), d.rows());
        assert!(test.is_empty());
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_half_up(2.5), 3);
        assert_eq!(round_half_up(0.2 * 10.0), 2);
        assert_eq!(round_half_up(0.3 * 10.0), 3);
        assert_eq!(round_half_up(0.0), 0);
    }
}

//! Attribute encoding shared by the built-in learners.

use serde::{Deserialize, Serialize};

use crate::data::{AttributeKind, Schema, Value};

/// What one encoded column holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Column {
    Numeric { attr: usize },
    /// 1.0 when the attribute equals the category, else 0.0.
    OneHot { attr: usize, category: usize },
}

/// Maps attribute vectors to dense feature vectors. Categorical attributes
/// are one-hot encoded in schema declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub columns: Vec<Column>,
}

impl Encoder {
    pub fn new(schema: &Schema) -> Self {
        let mut columns = Vec::new();
        for (attr, a) in schema.attributes.iter().enumerate() {
            match &a.kind {
                AttributeKind::Numeric => columns.push(Column::Numeric { attr }),
                AttributeKind::Categorical { categories } => {
                    columns.extend((0..categories.len()).map(|category| Column::OneHot { attr, category }))
                }
            }
        }
        Encoder { columns }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn encode(&self, values: &[Value]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|c| match *c {
                Column::Numeric { attr } => values[attr].as_num().unwrap_or(0.0),
                Column::OneHot { attr, category } => {
                    f64::from(u8::from(values[attr].as_cat() == Some(category)))
                }
            })
            .collect()
    }
}

/// Per-column affine rescaling to zero mean and unit variance. Only numeric
/// columns are touched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(encoder: &Encoder, rows: &[Vec<f64>]) -> Self {
        let n = rows.len().max(1) as f64;
        let w = encoder.width();
        let mut mean = vec![0.0; w];
        let mut scale = vec![1.0; w];
        for (j, col) in encoder.columns.iter().enumerate() {
            if !matches!(col, Column::Numeric { .. }) {
                continue;
            }
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            scale[j] = if var > 1e-24 { var.sqrt() } else { 1.0 };
        }
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &mut [f64]) {
        for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
            *x = (*x - m) / s;
        }
    }
}

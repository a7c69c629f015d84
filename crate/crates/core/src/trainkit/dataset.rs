use serde::{Deserialize, Serialize};

/// One labeled row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    /// Binary class in {0, 1}, or a real target for regression.
    pub label: f64,
    /// Binary sensitive attribute.
    pub sensitive: Option<u8>,
    /// Name of the corruption that produced this row, if any.
    pub tag: Option<String>,
}

impl Example {
    pub fn new(features: Vec<f64>, label: f64) -> Self {
        Self { features, label, sensitive: None, tag: None }
    }

    pub fn with_sensitive(mut self, z: u8) -> Self {
        self.sensitive = Some(z);
        self
    }

    pub fn class(&self) -> u8 {
        u8::from(self.label >= 0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Example>,
    /// Index of the feature that mirrors the sensitive attribute, when the
    /// model sees it as an input.
    pub sensitive_feature: Option<usize>,
}

impl LabeledDataset {
    pub fn new(rows: Vec<Example>) -> Self {
        let dim = rows.first().map_or(0, |r| r.features.len());
        Self { feature_names: (0..dim).map(|i| format!("x{i}")).collect(), rows, sensitive_feature: None }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(self.feature_names.len(), |r| r.features.len())
    }

    /// Rows at `indices`, in that order, sharing this dataset's schema.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            sensitive_feature: self.sensitive_feature,
        }
    }

    pub fn with_rows(&self, rows: Vec<Example>) -> Self {
        Self { feature_names: self.feature_names.clone(), rows, sensitive_feature: self.sensitive_feature }
    }

    /// Appends `other`'s rows; schemas must agree.
    pub fn concat(&self, other: &Self) -> Self {
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        self.with_rows(rows)
    }

    /// Indices of rows with class `y` and sensitive value `z`.
    pub fn group_indices(&self, y: u8, z: u8) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.class() == y && r.sensitive == Some(z))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn has_uniform_dim(&self) -> bool {
        let d = self.dim();
        self.rows.iter().all(|r| r.features.len() == d)
    }
}

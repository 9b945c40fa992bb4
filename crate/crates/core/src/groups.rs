//! Duplicate-row compression for likelihood evaluation.
//!
//! Binary feature matrices repeat the same row many times. The Poisson and
//! composite objectives depend on a row's response only through `k` (linear
//! terms) so rows with equal features can be merged into one weighted row
//! carrying the response sum. The mixture objective is non-linear in `k`, so
//! there rows merge only when both features and response agree.

use std::collections::HashMap;

use crate::data::Dataset;

pub(crate) struct RowGroups {
    pub n_features: usize,
    /// Row-major unique rows, in order of first appearance.
    pub features: Vec<f64>,
    /// Number of dataset rows merged into each group.
    pub weight: Vec<f64>,
    /// Sum of the merged responses (equal to `weight * k` when grouping by response too).
    pub response_sum: Vec<f64>,
    /// Common response of each group; only meaningful when grouped by response.
    pub response: Vec<f64>,
    pub n_rows: f64,
}

impl RowGroups {
    pub fn by_features(data: &Dataset) -> Self {
        Self::build(data, false)
    }

    pub fn by_features_and_response(data: &Dataset) -> Self {
        Self::build(data, true)
    }

    fn build(data: &Dataset, with_response: bool) -> Self {
        let b = data.n_features();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut groups = RowGroups {
            n_features: b,
            features: Vec::new(),
            weight: Vec::new(),
            response_sum: Vec::new(),
            response: Vec::new(),
            n_rows: data.n_rows() as f64,
        };
        for (x, &k) in data.rows().zip(data.response()) {
            let mut key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
            if with_response {
                key.push(k.to_bits());
            }
            let next = groups.weight.len();
            let g = *index.entry(key).or_insert(next);
            if g == next {
                groups.features.extend_from_slice(x);
                groups.weight.push(0.0);
                groups.response_sum.push(0.0);
                groups.response.push(k);
            }
            groups.weight[g] += 1.0;
            groups.response_sum[g] += k;
        }
        groups
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn row(&self, g: usize) -> &[f64] {
        &self.features[g * self.n_features..(g + 1) * self.n_features]
    }
}

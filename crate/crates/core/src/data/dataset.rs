use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Features in `[0, 1]` with current labels and the labels they had before corruption.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub(crate) name: String,
    pub(crate) features: Array2<f64>,
    pub(crate) labels: Vec<usize>,
    pub(crate) recovered_labels: Vec<usize>,
    pub(crate) corrupted_mask: Vec<bool>,
    pub(crate) class_count: usize,
}

impl LabeledDataset {
    /// An uncorrupted dataset.
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        let n = labels.len();
        Self::from_parts(
            name,
            features,
            labels.clone(),
            labels,
            vec![false; n],
            class_count,
        )
    }

    pub(crate) fn from_parts(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<usize>,
        recovered_labels: Vec<usize>,
        corrupted_mask: Vec<bool>,
        class_count: usize,
    ) -> Result<Self> {
        let n = features.nrows();
        if class_count == 0 {
            return Err(Error::Domain("class_count must be positive".into()));
        }
        if labels.len() != n || recovered_labels.len() != n || corrupted_mask.len() != n {
            return Err(Error::Shape(format!(
                "{n} feature rows but {} labels, {} recovered labels, {} mask entries",
                labels.len(),
                recovered_labels.len(),
                corrupted_mask.len()
            )));
        }
        if let Some(&y) = labels
            .iter()
            .chain(&recovered_labels)
            .find(|&&y| y >= class_count)
        {
            return Err(Error::Domain(format!(
                "label {y} out of range for {class_count} classes"
            )));
        }
        if let Some(i) = (0..n).find(|&i| !corrupted_mask[i] && labels[i] != recovered_labels[i]) {
            return Err(Error::Domain(format!(
                "sample {i} is unmasked but its label differs from the recovered label"
            )));
        }
        if !features
            .iter()
            .all(|v| v.is_finite() && (0.0..=1.0).contains(v))
        {
            return Err(Error::Domain(
                "features must be finite and within [0, 1]".into(),
            ));
        }
        Ok(LabeledDataset {
            name: name.into(),
            features,
            labels,
            recovered_labels,
            corrupted_mask,
            class_count,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn recovered_labels(&self) -> &[usize] {
        &self.recovered_labels
    }

    pub fn corrupted_mask(&self) -> &[bool] {
        &self.corrupted_mask
    }

    pub fn is_corrupted(&self) -> bool {
        self.corrupted_mask.iter().any(|&m| m)
    }

    /// Features paired with the pre-corruption labels.
    pub fn recovered_view(&self) -> (ArrayView2<'_, f64>, &[usize]) {
        (self.features.view(), &self.recovered_labels)
    }

    /// Rows at `indices`, in that order, with all bookkeeping carried along.
    pub fn select(&self, indices: &[usize], name: impl Into<String>) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::Domain(format!(
                "index {i} out of range for {} samples",
                self.len()
            )));
        }
        let pick = |v: &[usize]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Ok(LabeledDataset {
            name: name.into(),
            features: self.features.select(Axis(0), indices),
            labels: pick(&self.labels),
            recovered_labels: pick(&self.recovered_labels),
            corrupted_mask: indices.iter().map(|&i| self.corrupted_mask[i]).collect(),
            class_count: self.class_count,
        })
    }

    /// The first `n` samples (all of them if `n >= len`).
    pub fn head(&self, n: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx, format!("{}[..{}]", self.name, idx.len()))
    }

    /// Per-class sample counts under the current labels.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Errors unless `other` has the same feature width and class count.
    pub fn check_compatible(&self, other: &LabeledDataset) -> Result<()> {
        if self.dim() != other.dim() || self.class_count != other.class_count {
            return Err(Error::Shape(format!(
                "datasets {} (d={}, K={}) and {} (d={}, K={}) are incompatible",
                self.name,
                self.dim(),
                self.class_count,
                other.name,
                other.dim(),
                other.class_count
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_out_of_range_features_and_labels() {
        assert!(LabeledDataset::new("x", array![[1.5]], vec![0], 2).is_err());
        assert!(LabeledDataset::new("x", array![[0.5]], vec![2], 2).is_err());
        assert!(LabeledDataset::new("x", array![[f64::NAN]], vec![0], 2).is_err());
        assert!(LabeledDataset::new("x", array![[0.5], [0.2]], vec![0], 2).is_err());
    }

    #[test]
    fn unmasked_mismatch_is_rejected() {
        let r = LabeledDataset::from_parts("x", array![[0.5]], vec![1], vec![0], vec![false], 2);
        assert!(r.is_err());
        let ok = LabeledDataset::from_parts("x", array![[0.5]], vec![1], vec![0], vec![true], 2);
        assert!(ok.is_ok());
    }

    #[test]
    fn recovered_view_of_clean_data_is_identity() {
        let d = LabeledDataset::new("x", array![[0.1], [0.9]], vec![1, 0], 2).unwrap();
        let (f, y) = d.recovered_view();
        assert_eq!(f, d.features());
        assert_eq!(y, d.labels());
    }

    #[test]
    fn select_keeps_bookkeeping() {
        let d = LabeledDataset::from_parts(
            "x",
            array![[0.1], [0.2], [0.3]],
            vec![1, 0, 1],
            vec![0, 0, 1],
            vec![true, false, true],
            2,
        )
        .unwrap();
        let s = d.select(&[2, 0], "s").unwrap();
        assert_eq!(s.labels(), &[1, 1]);
        assert_eq!(s.recovered_labels(), &[1, 0]);
        assert_eq!(s.corrupted_mask(), &[true, true]);
        assert!(d.select(&[3], "bad").is_err());
    }
}

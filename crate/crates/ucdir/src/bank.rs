//! Per-domain banks of momentum features.
//!
//! The bank holds one unit-norm feature per sample, refreshed wholesale at
//! each epoch start and patched per batch as the momentum encoder moves.
//! Rows are ordered by ascending sample id; a hash map only translates ids
//! to row indices, so no iteration order ever depends on hashing.

use std::collections::HashMap;

use crate::data::{Domain, SampleId};
use crate::diffmath::DenseArray;
use crate::encoder::FeatureVector;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct FeatureBank {
    pub domain: Domain,
    ids: Vec<SampleId>,
    index: HashMap<SampleId, usize>,
    /// `(n, d)` matrix, row `i` is the feature of `ids[i]`.
    feats: DenseArray,
}

impl FeatureBank {
    /// Builds a bank from `(id, feature)` pairs; rows are sorted by id.
    pub fn new(domain: Domain, entries: Vec<(SampleId, FeatureVector)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("feature bank cannot be empty".into()));
        }
        let dim = entries[0].1.len();
        let mut entries = entries;
        entries.sort_by_key(|(id, _)| *id);
        let mut index = HashMap::with_capacity(entries.len());
        let mut ids = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        for (i, (id, f)) in entries.into_iter().enumerate() {
            if f.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "bank feature for sample {} has dimension {}, expected {dim}",
                    id.0,
                    f.len()
                )));
            }
            if index.insert(id, i).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate sample id {} in feature bank",
                    id.0
                )));
            }
            ids.push(id);
            rows.push(f.into_vec());
        }
        Ok(FeatureBank {
            domain,
            ids,
            index,
            feats: DenseArray::from_rows(&rows),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feats.cols()
    }

    /// Sample ids in row order (ascending).
    pub fn ids(&self) -> &[SampleId] {
        &self.ids
    }

    pub fn row_of(&self, id: SampleId) -> Result<usize> {
        self.index
            .get(&id)
            .copied()
            .ok_or(Error::MissingBankEntry(id.0))
    }

    pub fn feature(&self, id: SampleId) -> Result<&[f64]> {
        Ok(self.feats.row(self.row_of(id)?))
    }

    /// The whole bank as an `(n, d)` matrix in row (id) order.
    pub fn matrix(&self) -> &DenseArray {
        &self.feats
    }

    /// The bank transposed to `(d, n)`, ready to multiply features against.
    pub fn matrix_t(&self) -> DenseArray {
        let (n, d) = (self.feats.rows(), self.feats.cols());
        let mut data = vec![0.0; n * d];
        for r in 0..n {
            for (c, &v) in self.feats.row(r).iter().enumerate() {
                data[c * n + r] = v;
            }
        }
        DenseArray::matrix(d, n, data)
    }

    /// Rows as feature vectors, in row order — the clustering input.
    pub fn feature_vectors(&self) -> Vec<FeatureVector> {
        (0..self.len())
            .map(|i| FeatureVector::new(self.feats.row(i).to_vec()))
            .collect()
    }

    /// Overwrites one sample's stored feature.
    pub fn update(&mut self, id: SampleId, feature: &[f64]) -> Result<()> {
        if feature.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "bank update for sample {} has dimension {}, expected {}",
                id.0,
                feature.len(),
                self.dim()
            )));
        }
        let row = self.row_of(id)?;
        let d = self.dim();
        self.feats.data_mut()[row * d..(row + 1) * d].copy_from_slice(feature);
        Ok(())
    }
}

/// The pair of per-domain banks the losses read from.
#[derive(Clone, Debug)]
pub struct Banks {
    pub a: FeatureBank,
    pub b: FeatureBank,
}

impl Banks {
    pub fn get(&self, domain: Domain) -> &FeatureBank {
        match domain {
            Domain::A => &self.a,
            Domain::B => &self.b,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: Vec<f64>) -> FeatureVector {
        FeatureVector::new(v)
    }

    #[test]
    fn rows_are_sorted_by_id_regardless_of_insertion_order() {
        let bank = FeatureBank::new(
            Domain::A,
            vec![
                (SampleId(5), fv(vec![0.0, 1.0])),
                (SampleId(2), fv(vec![1.0, 0.0])),
                (SampleId(9), fv(vec![0.6, 0.8])),
            ],
        )
        .unwrap();
        assert_eq!(bank.ids(), &[SampleId(2), SampleId(5), SampleId(9)]);
        assert_eq!(bank.feature(SampleId(2)).unwrap(), &[1.0, 0.0]);
        assert_eq!(bank.matrix().row(1), &[0.0, 1.0]);
    }

    #[test]
    fn update_and_missing_entry() {
        let mut bank = FeatureBank::new(
            Domain::B,
            vec![(SampleId(0), fv(vec![1.0, 0.0])), (SampleId(1), fv(vec![0.0, 1.0]))],
        )
        .unwrap();
        bank.update(SampleId(1), &[0.6, 0.8]).unwrap();
        assert_eq!(bank.feature(SampleId(1)).unwrap(), &[0.6, 0.8]);
        assert!(matches!(
            bank.feature(SampleId(7)),
            Err(Error::MissingBankEntry(7))
        ));
        assert!(bank.update(SampleId(1), &[1.0]).is_err());
    }

    #[test]
    fn transpose_matches_matrix() {
        let bank = FeatureBank::new(
            Domain::A,
            vec![
                (SampleId(0), fv(vec![1.0, 2.0, 3.0])),
                (SampleId(1), fv(vec![4.0, 5.0, 6.0])),
            ],
        )
        .unwrap();
        let t = bank.matrix_t();
        assert_eq!(t.shape(), crate::diffmath::Shape::Matrix(3, 2));
        assert_eq!(t.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }

    #[test]
    fn duplicates_and_dimension_mismatches_are_rejected() {
        assert!(FeatureBank::new(
            Domain::A,
            vec![(SampleId(0), fv(vec![1.0])), (SampleId(0), fv(vec![2.0]))],
        )
        .is_err());
        assert!(FeatureBank::new(
            Domain::A,
            vec![(SampleId(0), fv(vec![1.0])), (SampleId(1), fv(vec![2.0, 3.0]))],
        )
        .is_err());
        assert!(FeatureBank::new(Domain::A, vec![]).is_err());
    }
}

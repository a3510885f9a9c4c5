//! Model-selection and partition-agreement measures.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// `−2 loglik + m ln n`. Lower is better.
pub fn bic(loglik: f64, params: usize, n: usize) -> f64 {
    -2.0 * loglik + params as f64 * (n as f64).ln()
}

/// Cluster labels compacted to `0..groups`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    groups: usize,
}

impl Partition {
    /// Relabels arbitrary labels to `0..k` in order of first appearance.
    pub fn from_labels<T: Ord + Clone>(raw: &[T]) -> Self {
        let mut map = BTreeMap::new();
        let mut order = 0usize;
        let mut labels = Vec::with_capacity(raw.len());
        for l in raw {
            let id = *map.entry(l.clone()).or_insert_with(|| {
                order += 1;
                order - 1
            });
            labels.push(id);
        }
        Self { labels, groups: order }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Partition {
        let raw: Vec<usize> = idx.iter().map(|&i| self.labels[i]).collect();
        Partition::from_labels(&raw)
    }
}

/// Rows = `truth` groups, columns = `pred` groups.
pub fn classification_table(truth: &Partition, pred: &Partition) -> Result<Vec<Vec<usize>>> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch(truth.len(), pred.len()));
    }
    let mut t = vec![vec![0usize; pred.groups]; truth.groups];
    for (&a, &b) in truth.labels.iter().zip(&pred.labels) {
        t[a][b] += 1;
    }
    Ok(t)
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index. Returns 1 when the index is 0/0, which
/// happens only when both partitions are trivial in the same way.
pub fn ari(a: &Partition, b: &Partition) -> Result<f64> {
    let table = classification_table(a, b)?;
    let n = a.len();
    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let row_sums: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let col_sums: f64 = (0..b.groups).map(|j| choose2(table.iter().map(|r| r[j]).sum())).sum();
    let total = choose2(n);
    let expected = if total > 0.0 { row_sums * col_sums / total } else { 0.0 };
    let max_index = 0.5 * (row_sums + col_sums);
    let num = index - expected;
    let den = max_index - expected;
    if den == 0.0 {
        return Ok(if num == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(l: &[usize]) -> Partition {
        Partition::from_labels(l)
    }

    #[test]
    fn bic_examples() {
        assert_eq!(bic(0.0, 1, 1), 0.0);
        assert!((bic(-100.0, 10, 200) - (200.0 + 10.0 * 200f64.ln())).abs() < 1e-12);
        assert!((bic(-100.0, 10, 200) - 252.983).abs() < 1e-3);
        assert!(bic(-50.0, 3, 100) < bic(-50.0, 4, 100));
    }

    #[test]
    fn ari_examples() {
        let a = p(&[0, 0, 1, 1, 2, 2]);
        assert_eq!(ari(&a, &a).unwrap(), 1.0);
        assert_eq!(ari(&a, &p(&[5, 5, 3, 3, 9, 9])).unwrap(), 1.0);
        assert!((ari(&p(&[0, 0, 1, 1]), &p(&[0, 1, 0, 1])).unwrap() + 0.5).abs() < 1e-12);
        assert!(ari(&a, &p(&[0, 0])).is_err());
    }

    #[test]
    fn ari_trivial_partitions() {
        assert_eq!(ari(&p(&[0, 0, 0]), &p(&[1, 1, 1])).unwrap(), 1.0);
        assert_eq!(ari(&p(&[0, 1, 2]), &p(&[2, 1, 0])).unwrap(), 1.0);
        assert_eq!(ari(&p(&[0]), &p(&[0])).unwrap(), 1.0);
    }

    #[test]
    fn classification_table_examples() {
        let t = classification_table(&p(&[0, 0, 1, 1, 1]), &p(&[0, 0, 1, 1, 1])).unwrap();
        assert_eq!(t, vec![vec![2, 0], vec![0, 3]]);
        let t = classification_table(&p(&[0, 0, 1, 1, 1]), &p(&[7, 7, 7, 7, 7])).unwrap();
        assert_eq!(t, vec![vec![2], vec![3]]);
    }
}

//! Kernel functions, datasets, and streamed kernel columns.
//!
//! Indices are zero-based throughout the library. Output files convert to the
//! one-based `[n]` convention at the serialization boundary.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// A positive definite kernel together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `exp(-|x - y|^2 / (2 bandwidth^2))`
    Gaussian { bandwidth: f64 },
    /// `<x, y>`
    Linear,
    /// `(<x, y> + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return input(format!(
                "gaussian bandwidth must be positive, got {bandwidth}"
            ));
        }
        Ok(KernelSpec::Gaussian { bandwidth })
    }

    pub fn polynomial(degree: u32, offset: f64) -> Result<Self> {
        if degree == 0 {
            return input("polynomial degree must be at least 1");
        }
        if !(offset.is_finite() && offset >= 0.0) {
            return input(format!(
                "polynomial offset must be nonnegative, got {offset}"
            ));
        }
        Ok(KernelSpec::Polynomial { degree, offset })
    }

    /// Evaluates `K(x, y)`.
    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return input(format!(
                "kernel arguments have dimensions {} and {}",
                x.len(),
                y.len()
            ));
        }
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { bandwidth } => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Polynomial { degree, offset } => (dot(x, y) + offset).powi(degree as i32),
        }
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// An ordered collection of equal-dimension input points with optional labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    labels: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, labels: Option<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return input("dataset must contain at least one point");
        };
        let dim = first.len();
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return input(format!(
                "point {i} has dimension {}, expected {dim}",
                p.len()
            ));
        }
        if let Some(y) = &labels {
            if y.len() != points.len() {
                return input(format!(
                    "{} labels supplied for {} points",
                    y.len(),
                    points.len()
                ));
            }
        }
        Ok(Dataset { points, labels })
    }

    pub fn unlabeled(points: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(points, None)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    /// First `t` points (and labels) as a new dataset.
    pub fn prefix(&self, t: usize) -> Result<Dataset> {
        if t == 0 || t > self.len() {
            return input(format!("prefix length {t} outside 1..={}", self.len()));
        }
        Dataset::new(
            self.points[..t].to_vec(),
            self.labels.as_ref().map(|y| y[..t].to_vec()),
        )
    }
}

/// The bordering data for a new point: its kernel values against a set of
/// earlier points, and its self-similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelColumn {
    /// `K(x_new, x_i)` for each requested `i`, ascending index order.
    pub cross: Vec<f64>,
    /// `K(x_new, x_new)`
    pub self_term: f64,
}

/// Streams the kernel column of point `new_index` against `restrict_to`.
///
/// `restrict_to` must be strictly ascending and contain only indices smaller
/// than `new_index`.
pub fn stream_column(
    dataset: &Dataset,
    spec: &KernelSpec,
    new_index: usize,
    restrict_to: &[usize],
) -> Result<KernelColumn> {
    if new_index >= dataset.len() {
        return input(format!(
            "column index {new_index} out of range for {} points",
            dataset.len()
        ));
    }
    check_ascending_below(restrict_to, new_index)?;
    let x = dataset.point(new_index);
    Ok(KernelColumn {
        cross: restrict_to
            .iter()
            .map(|&i| spec.eval_unchecked(x, dataset.point(i)))
            .collect(),
        self_term: spec.eval_unchecked(x, x),
    })
}

pub(crate) fn check_ascending_below(indices: &[usize], bound: usize) -> Result<()> {
    for w in indices.windows(2) {
        if w[0] >= w[1] {
            return input("index set must be strictly ascending");
        }
    }
    if let Some(&last) = indices.last() {
        if last >= bound {
            return input(format!("index {last} is not below {bound}"));
        }
    }
    Ok(())
}

/// Dense Gram matrix of the first `t` points. Desk-scale only.
pub fn gram(dataset: &Dataset, spec: &KernelSpec, t: usize) -> Result<DMatrix<f64>> {
    if t == 0 || t > dataset.len() {
        return input(format!("gram size {t} outside 1..={}", dataset.len()));
    }
    let rows = crate::par::map_indices(t, |i| {
        let xi = dataset.point(i);
        (0..=i)
            .map(|j| spec.eval_unchecked(xi, dataset.point(j)))
            .collect::<Vec<_>>()
    });
    let mut k = DMatrix::zeros(t, t);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Gram matrix between the first `t` points (rows) and `cols` (columns).
pub fn cross_gram(
    dataset: &Dataset,
    spec: &KernelSpec,
    t: usize,
    cols: &[usize],
) -> Result<DMatrix<f64>> {
    if t > dataset.len() {
        return input(format!("row count {t} exceeds {} points", dataset.len()));
    }
    if let Some(&bad) = cols.iter().find(|&&j| j >= dataset.len()) {
        return input(format!("column index {bad} out of range"));
    }
    Ok(DMatrix::from_fn(t, cols.len(), |i, j| {
        spec.eval_unchecked(dataset.point(i), dataset.point(cols[j]))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::EigPair;

    fn line(xs: &[f64]) -> Dataset {
        Dataset::unlabeled(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(g.evaluate(&[0.3, -1.0], &[0.3, -1.0]).unwrap(), 1.0);
        assert_eq!(
            KernelSpec::Linear
                .evaluate(&[1.0, 2.0], &[3.0, 4.0])
                .unwrap(),
            11.0
        );
        let v = g.evaluate(&[0.0], &[2.0]).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.135335).abs() < 1e-6);
        let p = KernelSpec::polynomial(2, 1.0).unwrap();
        assert_eq!(p.evaluate(&[1.0, 1.0], &[2.0, 0.0]).unwrap(), 9.0);
    }

    #[test]
    fn evaluate_rejects_dimension_mismatch() {
        assert!(KernelSpec::Linear.evaluate(&[1.0], &[1.0, 2.0]).is_err());
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::polynomial(0, 1.0).is_err());
    }

    #[test]
    fn stream_column_examples() {
        let ds = line(&[0.0, 1.0, 2.0]);
        let g = KernelSpec::gaussian(1.0).unwrap();
        let empty = stream_column(&ds, &g, 2, &[]).unwrap();
        assert!(empty.cross.is_empty());
        assert_eq!(empty.self_term, 1.0);

        let col = stream_column(&ds, &g, 2, &[0, 1]).unwrap();
        assert!((col.cross[0] - (-2.0f64).exp()).abs() < 1e-15);
        assert!((col.cross[1] - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(col.self_term, 1.0);

        let dup = line(&[1.0, 1.0]);
        let col = stream_column(&dup, &KernelSpec::Linear, 1, &[0]).unwrap();
        assert_eq!(col.cross, vec![1.0]);
        assert_eq!(col.self_term, 1.0);
    }

    #[test]
    fn stream_column_rejects_bad_indices() {
        let ds = line(&[0.0, 1.0, 2.0]);
        let g = KernelSpec::Linear;
        assert!(stream_column(&ds, &g, 3, &[]).is_err());
        assert!(stream_column(&ds, &g, 1, &[1]).is_err());
        assert!(stream_column(&ds, &g, 2, &[1, 0]).is_err());
    }

    #[test]
    fn gram_examples() {
        let ds = line(&[1.0, 1.0, 1.0]);
        let k1 = gram(&ds, &KernelSpec::Linear, 1).unwrap();
        assert_eq!(k1, DMatrix::from_element(1, 1, 1.0));
        let k = gram(&ds, &KernelSpec::Linear, 3).unwrap();
        assert_eq!(k, DMatrix::from_element(3, 3, 1.0));
        assert!(gram(&ds, &KernelSpec::Linear, 4).is_err());
    }

    #[test]
    fn gram_bordering_is_bit_exact() {
        let ds = Dataset::unlabeled(
            (0..12)
                .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()])
                .collect(),
        )
        .unwrap();
        let g = KernelSpec::gaussian(0.8).unwrap();
        for t in 1..ds.len() {
            let big = gram(&ds, &g, t + 1).unwrap();
            let prefix: Vec<usize> = (0..t).collect();
            let col = stream_column(&ds, &g, t, &prefix).unwrap();
            for i in 0..t {
                assert_eq!(big[(i, t)], col.cross[i]);
                assert_eq!(big[(t, i)], col.cross[i]);
            }
            assert_eq!(big[(t, t)], col.self_term);
            assert_eq!(big.view((0, 0), (t, t)), gram(&ds, &g, t).unwrap());
        }
    }

    #[test]
    fn gram_is_psd_and_cauchy_schwarz_holds() {
        let ds = Dataset::unlabeled(
            (0..20)
                .map(|i| vec![(i as f64).sin() * 3.0, (i as f64 * 0.5).cos()])
                .collect(),
        )
        .unwrap();
        for spec in [
            KernelSpec::gaussian(1.5).unwrap(),
            KernelSpec::Linear,
            KernelSpec::polynomial(3, 1.0).unwrap(),
        ] {
            let k = gram(&ds, &spec, ds.len()).unwrap();
            let eig = EigPair::of(&k).unwrap();
            let top = eig.eigenvalues[0];
            let bottom = *eig.eigenvalues.last().unwrap();
            assert!(bottom >= -1e-9 * top.max(1.0), "{spec:?}: {bottom}");
            for i in 0..ds.len() {
                for j in 0..ds.len() {
                    assert!(k[(i, j)].abs() <= (k[(i, i)] * k[(j, j)]).sqrt() * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::unlabeled(vec![]).is_err());
        assert!(Dataset::unlabeled(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Dataset::new(vec![vec![1.0]], Some(vec![1.0, 2.0])).is_err());
        let ds = Dataset::new(vec![vec![1.0], vec![2.0]], Some(vec![3.0, 4.0])).unwrap();
        assert_eq!(ds.prefix(1).unwrap().labels(), Some(&[3.0][..]));
    }
}

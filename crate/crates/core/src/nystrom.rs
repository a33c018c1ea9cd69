//! Regularized Nyström approximation `K̃ = KS(SᵀKS + γI)⁻¹SᵀK` in factored
//! form, and the exact and approximate ridge solvers built on it.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{input, Error, Result};
use crate::numerics::{regularized_solve_vec, symmetrized, EigPair, ShiftedInverse};

/// Largest matrix side that [`NystromFactor::materialize`] will build.
pub const DESK_SCALE_CAP: usize = 5000;

/// A weighted column selection `S`, stored as `(index, weight)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    t: usize,
    entries: Vec<(usize, f64)>,
}

impl Selection {
    /// `entries` may repeat an index only when `allow_repeats` is set
    /// (sampling with replacement).
    pub fn new(entries: Vec<(usize, f64)>, t: usize, allow_repeats: bool) -> Result<Self> {
        for &(i, w) in &entries {
            if i >= t {
                return input(format!("selected index {i} is not below t = {t}"));
            }
            if !(w.is_finite() && w > 0.0) {
                return input(format!("weight {w} for index {i} is not positive"));
            }
        }
        if !allow_repeats {
            let mut seen: Vec<usize> = entries.iter().map(|e| e.0).collect();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return input("selection repeats an index");
            }
        }
        Ok(Selection { t, entries })
    }

    pub fn empty(t: usize) -> Self {
        Selection {
            t,
            entries: Vec::new(),
        }
    }

    /// Multinomial draws weighted by `1/√(m·p_i)`.
    pub fn from_draws(draws: &[usize], probabilities: &[f64]) -> Result<Self> {
        let m = draws.len() as f64;
        let entries = draws
            .iter()
            .map(|&i| {
                let p = *probabilities
                    .get(i)
                    .ok_or_else(|| Error::Input(format!("draw {i} outside distribution")))?;
                Ok((i, 1.0 / (m * p).sqrt()))
            })
            .collect::<Result<Vec<_>>>()?;
        Selection::new(entries, probabilities.len(), true)
    }

    /// Retained indices weighted by `√b_i`.
    pub fn from_weights(weights: &BTreeMap<usize, f64>, t: usize) -> Result<Self> {
        Selection::new(weights.iter().map(|(&i, &w)| (i, w)).collect(), t, false)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct indices (ascending) with weight `√(Σ w²)`.
    ///
    /// `K̃` depends on `S` only through `SSᵀ`, so merging repeated columns
    /// this way leaves the approximation unchanged.
    pub fn aggregated(&self) -> (Vec<usize>, Vec<f64>) {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for &(i, w) in &self.entries {
            *acc.entry(i).or_insert(0.0) += w * w;
        }
        acc.into_iter().map(|(i, s)| (i, s.sqrt())).unzip()
    }

    /// Diagonal of `SSᵀ` over all `t` indices.
    pub fn squared_weights(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.t];
        for &(i, w) in &self.entries {
            d[i] += w * w;
        }
        d
    }
}

/// `K̃` over a set of row indices, held as `cross (sampled + γI)⁻¹ crossᵀ`.
#[derive(Debug, Clone)]
pub struct NystromFactor {
    rows: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<f64>,
    sampled_block: DMatrix<f64>,
    cross_block: DMatrix<f64>,
    gamma: f64,
}

impl NystromFactor {
    /// Builds the factor from unweighted kernel blocks.
    ///
    /// `k_rows` holds `K(rows, indices)` and `k_sel` holds `K(indices, indices)`.
    pub fn from_blocks(
        rows: Vec<usize>,
        indices: Vec<usize>,
        weights: Vec<f64>,
        k_rows: &DMatrix<f64>,
        k_sel: &DMatrix<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return input(format!("gamma must be positive, got {gamma}"));
        }
        let q = indices.len();
        if weights.len() != q || k_rows.shape() != (rows.len(), q) || k_sel.shape() != (q, q) {
            return input("Nyström block shapes do not match the selection");
        }
        let w = DVector::from_vec(weights.clone());
        let mut cross_block = k_rows.clone();
        for (j, &wj) in weights.iter().enumerate() {
            cross_block.column_mut(j).scale_mut(wj);
        }
        let sampled_block =
            symmetrized(&DMatrix::from_fn(q, q, |a, b| w[a] * k_sel[(a, b)] * w[b]))?;
        Ok(NystromFactor {
            rows,
            indices,
            weights,
            sampled_block,
            cross_block,
            gamma,
        })
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Number of selected columns `Q`.
    pub fn rank_bound(&self) -> usize {
        self.indices.len()
    }

    /// Weighted `SᵀKS`.
    pub fn sampled_block(&self) -> &DMatrix<f64> {
        &self.sampled_block
    }

    /// Weighted `KS` restricted to `rows`.
    pub fn cross_block(&self) -> &DMatrix<f64> {
        &self.cross_block
    }

    /// `SᵀKS + γI`
    pub fn inner(&self) -> DMatrix<f64> {
        let q = self.indices.len();
        &self.sampled_block + DMatrix::identity(q, q) * self.gamma
    }

    /// `(K̃ + shift·I)⁻¹` over `rows`, without forming `K̃`.
    pub fn shifted_inverse(&self, shift: f64) -> Result<ShiftedInverse> {
        ShiftedInverse::low_rank(self.cross_block.clone(), &self.inner(), shift)
    }

    /// Dense `K̃` over `rows`.
    pub fn materialize(&self) -> Result<DMatrix<f64>> {
        let r = self.rows.len();
        if r > DESK_SCALE_CAP {
            return input(format!(
                "refusing to materialize {r}x{r} (cap {DESK_SCALE_CAP})"
            ));
        }
        if self.indices.is_empty() {
            return Ok(DMatrix::zeros(r, r));
        }
        let chol = Cholesky::new(self.inner())
            .ok_or_else(|| Error::Numerical("SᵀKS + γI is not positive definite".into()))?;
        let x = chol.solve(&self.cross_block.transpose());
        let k = &self.cross_block * x;
        Ok((&k + k.transpose()) * 0.5)
    }

    /// `C = KS·W^{1/2}` with `W = (SᵀKS + γI)⁻¹`, plus the number of negative
    /// eigenvalues of `SᵀKS` floored to zero.
    pub fn woodbury_factor(&self) -> Result<(DMatrix<f64>, usize)> {
        if self.indices.is_empty() {
            return Ok((DMatrix::zeros(self.rows.len(), 0), 0));
        }
        let eig = EigPair::of(&self.sampled_block)?;
        let clamped = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
        let gamma = self.gamma;
        let w_half = eig.map_spectrum(|l| 1.0 / (l.max(0.0) + gamma).sqrt());
        Ok((&self.cross_block * w_half, clamped))
    }
}

/// Builds the factor for `selection` from a dense kernel matrix (all rows).
pub fn nystrom_approx(
    k: &DMatrix<f64>,
    selection: &Selection,
    gamma: f64,
) -> Result<NystromFactor> {
    let t = k.nrows();
    if !k.is_square() || selection.t() != t {
        return input(format!(
            "kernel is {:?} but selection covers t = {}",
            k.shape(),
            selection.t()
        ));
    }
    let (indices, weights) = selection.aggregated();
    let k_rows = k.select_columns(&indices);
    let k_sel = k_rows.select_rows(&indices);
    NystromFactor::from_blocks((0..t).collect(), indices, weights, &k_rows, &k_sel, gamma)
}

/// `(K + μI)⁻¹ y`
pub fn krr_exact(k: &DMatrix<f64>, mu: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
    regularized_solve_vec(k, mu, y)
}

/// `(K̃ + μI)⁻¹ y` via `(y − C(CᵀC + μI)⁻¹Cᵀy)/μ`; never forms `K̃`.
pub fn krr_approx(factor: &NystromFactor, mu: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
    if !(mu.is_finite() && mu > 0.0) {
        return input(format!("mu must be positive, got {mu}"));
    }
    if y.len() != factor.rows().len() {
        return input(format!(
            "targets have length {}, factor has {} rows",
            y.len(),
            factor.rows().len()
        ));
    }
    let (c, _) = factor.woodbury_factor()?;
    if c.ncols() == 0 {
        return Ok(y / mu);
    }
    let q = c.ncols();
    let gram = c.transpose() * &c + DMatrix::identity(q, q) * mu;
    let chol = Cholesky::new(gram)
        .ok_or_else(|| Error::Numerical("CᵀC + μI is not positive definite".into()))?;
    let inner = chol.solve(&(c.transpose() * y));
    Ok((y - c * inner) / mu)
}

//! Ridge leverage scores and effective dimension.
//!
//! Exact formulas serve as ground truth. The incremental estimators use only
//! a Nyström sketch of the past, the stored columns, and the new column:
//!
//! * RLS estimate: `τ̃_i = (k_ii − k_iᵀ(K̄ + αγI)⁻¹k_i) / (αγ)`, where `K̄`
//!   borders the sketch with the exact new column.
//! * Effective-dimension increment: `Δ̃ = (k − k̄ᵀ(K̃ + αγI)⁻¹k̄ − c·γ·‖(K̃ + γI)⁻¹k̄‖²)
//!   / (k + γ − k̄ᵀ(K̃ + αγI)⁻¹k̄)` with `c = (1 − ε)²/4`, accumulated as
//!   `d̃eff ← d̃eff + α·Δ̃`.
//!
//! Here `α = (2 − ε)/(1 − ε)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::numerics::{regularized_solve_vec, BorderedInverse, EigPair, QuadForm, ShiftedInverse};

/// RLS approximation factor `α = (2 − ε)/(1 − ε)`.
pub fn alpha(epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok((2.0 - epsilon) / (1.0 - epsilon))
}

/// Effective-dimension approximation factor `β = α²(1 + ρ)`, `ρ = λ_max/γ`.
pub fn beta(epsilon: f64, rho: f64) -> Result<f64> {
    if !(rho.is_finite() && rho >= 0.0) {
        return input(format!("rho must be nonnegative, got {rho}"));
    }
    let a = alpha(epsilon)?;
    Ok(a * a * (1.0 + rho))
}

/// Coefficient of the second-order term of the increment estimator, `(1 − ε)²/4`.
pub fn deff_second_order_coefficient(epsilon: f64) -> f64 {
    (1.0 - epsilon).powi(2) / 4.0
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..1.0).contains(&epsilon) {
        return input(format!("epsilon must lie in [0, 1), got {epsilon}"));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return input(format!("gamma must be positive, got {gamma}"));
    }
    Ok(())
}

/// Exact RLS of every column, their sum, and the induced distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeverageProfile {
    pub tau: Vec<f64>,
    pub deff: f64,
    pub probabilities: Vec<f64>,
}

/// `τ_i = [K(K + γI)⁻¹]_ii`, `d_eff = Σ τ_i`, `p_i = τ_i / d_eff`.
pub fn exact_rls(k: &DMatrix<f64>, gamma: f64) -> Result<LeverageProfile> {
    check_gamma(gamma)?;
    let eig = EigPair::of(k)?;
    if eig.min() < -1e-8 * eig.max().abs().max(1.0) {
        return input(format!(
            "kernel matrix is not PSD (λ_min = {:e})",
            eig.min()
        ));
    }
    let n = k.nrows();
    let inv = ShiftedInverse::dense(k, gamma)?;
    let tau: Vec<f64> = (0..n)
        .map(|i| {
            let e_i = DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
            k.column(i).dot(&inv.apply(&e_i))
        })
        .collect();
    Ok(profile_from_tau(tau))
}

pub(crate) fn profile_from_tau(tau: Vec<f64>) -> LeverageProfile {
    let deff: f64 = tau.iter().sum();
    let probabilities = if deff > 0.0 {
        tau.iter().map(|t| t / deff).collect()
    } else {
        // All-zero kernel: no column carries any mass; fall back to uniform.
        vec![1.0 / tau.len() as f64; tau.len()]
    };
    LeverageProfile {
        tau,
        deff,
        probabilities,
    }
}

/// Estimated scores carried by the streaming pipeline between steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimatedProfile {
    pub tau_tilde: BTreeMap<usize, f64>,
    pub deff_tilde: f64,
    pub p_tilde: BTreeMap<usize, f64>,
}

/// An RLS estimate after clamping to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsEstimate {
    pub value: f64,
    /// The raw estimate fell outside `[0, 1]`.
    pub clamped: bool,
}

/// Turns `k_iᵀ(K̄ + αγI)⁻¹k_i` into the RLS estimate.
pub fn rls_from_quad(diag: f64, quad: f64, gamma: f64, epsilon: f64) -> Result<RlsEstimate> {
    check_gamma(gamma)?;
    let a = alpha(epsilon)?;
    let raw = (diag - quad) / (a * gamma);
    let value = raw.clamp(0.0, 1.0);
    Ok(RlsEstimate {
        value,
        clamped: value != raw,
    })
}

/// RLS estimate of column `i` from the bordered sketch `K̄`.
///
/// `column` is the exact column `k_i` of the kernel matrix over the same
/// coordinates as `k_bar_matrix`, and `diag` is `k_ii`.
pub fn estimate_rls(
    k_bar_matrix: &DMatrix<f64>,
    column: &DVector<f64>,
    diag: f64,
    gamma: f64,
    epsilon: f64,
) -> Result<RlsEstimate> {
    check_gamma(gamma)?;
    let a = alpha(epsilon)?;
    if column.len() != k_bar_matrix.nrows() {
        return input(format!(
            "column has length {}, matrix has dimension {}",
            column.len(),
            k_bar_matrix.nrows()
        ));
    }
    let inv = ShiftedInverse::dense(k_bar_matrix, a * gamma)?;
    rls_from_quad(diag, inv.quad(column), gamma, epsilon)
}

/// RLS estimate through a bordered inverse built at shift `αγ`.
pub fn estimate_rls_bordered(
    bordered: &BorderedInverse<'_>,
    column: &DVector<f64>,
    diag: f64,
    gamma: f64,
    epsilon: f64,
) -> Result<RlsEstimate> {
    if column.len() != bordered.dim() {
        return input(format!(
            "column has length {}, bordered matrix has dimension {}",
            column.len(),
            bordered.dim()
        ));
    }
    rls_from_quad(diag, bordered.quad(column), gamma, epsilon)
}

/// Exact effective-dimension increment and the Schur complement of the bordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeffIncrement {
    /// `d_eff(K_{t+1}) − d_eff(K_t)`
    pub delta: f64,
    /// `k + γ − k̄ᵀ(K_t + γI)⁻¹k̄`, always at least `γ`.
    pub xi: f64,
}

pub fn deff_increment_exact(
    k_t: &DMatrix<f64>,
    k_bar: &DVector<f64>,
    k_self: f64,
    gamma: f64,
) -> Result<DeffIncrement> {
    check_gamma(gamma)?;
    if k_bar.len() != k_t.nrows() {
        return input(format!(
            "border has length {}, matrix has dimension {}",
            k_bar.len(),
            k_t.nrows()
        ));
    }
    let v = if k_bar.is_empty() {
        DVector::zeros(0)
    } else {
        regularized_solve_vec(k_t, gamma, k_bar)?
    };
    let first = k_bar.dot(&v);
    let second = v.dot(&v);
    let xi = k_self + gamma - first;
    if xi < gamma - 1e-8 {
        return input(format!("bordering is not PSD: xi = {xi} < gamma = {gamma}"));
    }
    Ok(DeffIncrement {
        delta: (k_self - first - gamma * second) / xi,
        xi,
    })
}

/// Combines the three quadratic quantities of the increment estimator.
///
/// `quad_alpha = k̄ᵀ(K̃ + αγI)⁻¹k̄`, `sq_norm_gamma = ‖(K̃ + γI)⁻¹k̄‖²`.
pub fn deff_increment_from_quads(
    k_self: f64,
    quad_alpha: f64,
    sq_norm_gamma: f64,
    gamma: f64,
    epsilon: f64,
) -> Result<f64> {
    check_gamma(gamma)?;
    check_epsilon(epsilon)?;
    let numerator =
        k_self - quad_alpha - deff_second_order_coefficient(epsilon) * gamma * sq_norm_gamma;
    let denominator = k_self + gamma - quad_alpha;
    if !(denominator > 0.0) {
        return Err(Error::Numerical(format!(
            "increment estimator denominator {denominator} is not positive"
        )));
    }
    Ok(numerator / denominator)
}

/// Increment estimate `Δ̃` from a dense sketch `K̃`.
pub fn estimate_deff_increment(
    k_tilde: &DMatrix<f64>,
    k_bar: &DVector<f64>,
    k_self: f64,
    gamma: f64,
    epsilon: f64,
) -> Result<f64> {
    check_gamma(gamma)?;
    let a = alpha(epsilon)?;
    if k_bar.len() != k_tilde.nrows() {
        return input(format!(
            "border has length {}, sketch has dimension {}",
            k_bar.len(),
            k_tilde.nrows()
        ));
    }
    let inv_alpha = ShiftedInverse::dense(k_tilde, a * gamma)?;
    let inv_gamma = ShiftedInverse::dense(k_tilde, gamma)?;
    estimate_deff_increment_with(&inv_alpha, &inv_gamma, k_bar, k_self, gamma, epsilon)
}

/// Increment estimate through prepared inverses at shifts `αγ` and `γ`.
pub fn estimate_deff_increment_with(
    inv_alpha: &ShiftedInverse,
    inv_gamma: &ShiftedInverse,
    k_bar: &DVector<f64>,
    k_self: f64,
    gamma: f64,
    epsilon: f64,
) -> Result<f64> {
    let quad_alpha = inv_alpha.quad(k_bar);
    let sq_norm_gamma = inv_gamma.apply(k_bar).norm_squared();
    deff_increment_from_quads(k_self, quad_alpha, sq_norm_gamma, gamma, epsilon)
}

/// `d̃eff_{t+1} = d̃eff_t + α·Δ̃_t`.
pub fn update_deff(deff_tilde: f64, delta_tilde: f64, epsilon: f64) -> Result<f64> {
    let a = alpha(epsilon)?;
    if !(deff_tilde > 0.0) {
        return input(format!(
            "effective dimension estimate must be positive, got {deff_tilde}"
        ));
    }
    if delta_tilde < -1e-10 {
        return Err(Error::Invariant(format!(
            "negative effective-dimension increment {delta_tilde}"
        )));
    }
    Ok(deff_tilde + a * delta_tilde)
}

/// Effective dimension of a single column, `k/(k + γ)`, computed exactly.
pub fn initial_deff(k_self: f64, gamma: f64) -> f64 {
    k_self / (k_self + gamma)
}

/// Element-wise minimum over the keys of `new`; keys missing from `old` pass through.
pub fn clamp_probabilities(
    new: &BTreeMap<usize, f64>,
    old: &BTreeMap<usize, f64>,
) -> BTreeMap<usize, f64> {
    new.iter()
        .map(|(&i, &p)| (i, old.get(&i).map_or(p, |&q| p.min(q))))
        .collect()
}

//! Ground-truth checks at desk scale: the reconstruction condition
//! `0 ⪯ K − K̃ ⪯ (γ/(1−ε))·K(K + γI)⁻¹`, the Ψ-gap certificate, closed-form
//! fixed-design risk, synthetic problems, and monotonicity audits.
//!
//! Everything here re-streams the dataset and builds dense `t×t` matrices.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::kernel::{gram, Dataset, KernelSpec};
use crate::leverage::{deff_increment_exact, exact_rls};
use crate::numerics::{lambda_max, psd_order_check, spectral_norm, EigPair};
use crate::nystrom::{nystrom_approx, Selection};
use crate::par::map_items;
use crate::pipeline::RunCheckpoint;
use crate::sampler::RngHandle;

/// Tolerance of the PSD checks in [`check_condition`].
pub const CONDITION_TOL: f64 = 1e-7;

/// A fixed-design regression instance: `y = f* + η`, `η ~ N(0, σ²I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedDesignProblem {
    pub dataset: Dataset,
    pub f_star: Vec<f64>,
    pub noise_std: f64,
    pub mu: f64,
}

impl FixedDesignProblem {
    pub fn new(dataset: Dataset, f_star: Vec<f64>, noise_std: f64, mu: f64) -> Result<Self> {
        if f_star.len() != dataset.len() {
            return input(format!(
                "f* has length {}, dataset has {} points",
                f_star.len(),
                dataset.len()
            ));
        }
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return input(format!("noise std must be nonnegative, got {noise_std}"));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return input(format!("mu must be positive, got {mu}"));
        }
        Ok(FixedDesignProblem {
            dataset,
            f_star,
            noise_std,
            mu,
        })
    }

    /// Risk of the ridge estimator built on `k_eff` over the first `k_eff.nrows()` points.
    pub fn risk(&self, k_eff: &DMatrix<f64>) -> Result<f64> {
        let t = k_eff.nrows();
        if t > self.f_star.len() {
            return input(format!(
                "matrix has {t} rows, problem has {}",
                self.f_star.len()
            ));
        }
        let f = DVector::from_column_slice(&self.f_star[..t]);
        fixed_design_risk(k_eff, &f, self.noise_std, self.mu)
    }
}

/// Outcome of the reconstruction check at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub step: usize,
    /// `0 ⪯ K − K̃`
    pub lower_ok: bool,
    /// `K − K̃ ⪯ (γ/(1−ε))·K(K + γI)⁻¹`
    pub upper_ok: bool,
    /// `‖K − K̃‖₂`
    pub spectral_gap: f64,
    pub psi_gap: Option<f64>,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

pub fn check_condition(
    k: &DMatrix<f64>,
    k_tilde: &DMatrix<f64>,
    gamma: f64,
    epsilon: f64,
) -> Result<ConditionReport> {
    if k.shape() != k_tilde.shape() || !k.is_square() {
        return input(format!(
            "shape mismatch {:?} vs {:?}",
            k.shape(),
            k_tilde.shape()
        ));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return input(format!("gamma must be positive, got {gamma}"));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return input(format!("epsilon must lie in [0, 1), got {epsilon}"));
    }
    let gap = k - k_tilde;
    let scale = gamma / (1.0 - epsilon);
    let bound = EigPair::of(k)?.map_spectrum(|l| scale * l / (l + gamma));
    Ok(ConditionReport {
        step: k.nrows(),
        lower_ok: psd_order_check(k_tilde, k, CONDITION_TOL)?,
        upper_ok: psd_order_check(&gap, &bound, CONDITION_TOL)?,
        spectral_gap: spectral_norm(&gap)?,
        psi_gap: None,
    })
}

/// `λ_max(ΨΨᵀ − ΨSSᵀΨᵀ)` with `Ψ = (Λ/(Λ + γ))^{1/2} Uᵀ` from `K = UΛUᵀ`.
///
/// A value at most `ε` certifies the reconstruction condition.
pub fn psi_gap(k: &DMatrix<f64>, selection: &Selection, gamma: f64) -> Result<f64> {
    if selection.t() != k.nrows() {
        return input(format!(
            "selection covers {} points, matrix has {}",
            selection.t(),
            k.nrows()
        ));
    }
    let eig = EigPair::of(k)?;
    let mut psi = eig.eigenvectors.transpose();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let l = l.max(0.0);
        psi.row_mut(j).scale_mut((l / (l + gamma)).sqrt());
    }
    let d = selection.squared_weights();
    let mut weighted = psi.clone();
    for (c, &w) in d.iter().enumerate() {
        weighted.column_mut(c).scale_mut(1.0 - w);
    }
    lambda_max(&(weighted * psi.transpose()))
}

/// Squared bias and variance of the ridge estimator `K(K + μI)⁻¹y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskDecomposition {
    pub bias_sq: f64,
    pub variance: f64,
}

impl RiskDecomposition {
    pub fn total(&self) -> f64 {
        self.bias_sq + self.variance
    }
}

/// `μ²‖(K + μI)⁻¹f*‖²` and `σ²·tr(K²(K + μI)⁻²)`.
pub fn risk_decomposition(
    k_eff: &DMatrix<f64>,
    f_star: &DVector<f64>,
    noise_std: f64,
    mu: f64,
) -> Result<RiskDecomposition> {
    if f_star.len() != k_eff.nrows() {
        return input(format!(
            "f* has length {}, matrix has dimension {}",
            f_star.len(),
            k_eff.nrows()
        ));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return input(format!("mu must be positive, got {mu}"));
    }
    let eig = EigPair::of(k_eff)?;
    let coeffs = eig.eigenvectors.transpose() * f_star;
    let mut bias_sq = 0.0;
    let mut variance = 0.0;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        bias_sq += (mu * coeffs[j] / (l + mu)).powi(2);
        variance += (l / (l + mu)).powi(2);
    }
    Ok(RiskDecomposition {
        bias_sq,
        variance: noise_std * noise_std * variance,
    })
}

/// Expected squared error `E_η‖f* − K_eff(K_eff + μI)⁻¹(f* + η)‖²`, in closed form.
pub fn fixed_design_risk(
    k_eff: &DMatrix<f64>,
    f_star: &DVector<f64>,
    noise_std: f64,
    mu: f64,
) -> Result<f64> {
    Ok(risk_decomposition(k_eff, f_star, noise_std, mu)?.total())
}

/// `(1 + (γ/μ)/(1 − ε))²`
pub fn risk_ratio_bound(gamma: f64, mu: f64, epsilon: f64) -> f64 {
    (1.0 + (gamma / mu) / (1.0 - epsilon)).powi(2)
}

/// Smooth regression targets for synthetic problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetFn {
    /// `Σ_j sin(x_j)`
    SineSum,
    /// `exp(−‖x‖²/8)`
    Radial,
    /// `Σ_j x_j / √d`
    Linear,
}

impl TargetFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TargetFn::SineSum => x.iter().map(|v| v.sin()).sum(),
            TargetFn::Radial => (-x.iter().map(|v| v * v).sum::<f64>() / 8.0).exp(),
            TargetFn::Linear => x.iter().sum::<f64>() / (x.len().max(1) as f64).sqrt(),
        }
    }
}

/// Clustered gaussian inputs with geometrically shrinking cluster sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub n_clusters: usize,
    pub cluster_std: f64,
    /// Standard deviation of the cluster centers around the origin.
    pub center_spread: f64,
    pub target: TargetFn,
    pub sigma: f64,
    pub mu: f64,
}

impl SyntheticSpec {
    pub fn new(n: usize, d: usize, n_clusters: usize) -> Self {
        SyntheticSpec {
            n,
            d,
            n_clusters,
            cluster_std: 0.5,
            center_spread: 3.0,
            target: TargetFn::SineSum,
            sigma: 0.1,
            mu: 1.0,
        }
    }
}

/// Cluster `c` receives a share proportional to `2^{-c}`; leftovers go to the largest clusters.
fn cluster_sizes(n: usize, k: usize) -> Vec<usize> {
    let total: f64 = (0..k).map(|c| 0.5f64.powi(c as i32)).sum();
    let mut sizes: Vec<usize> = (0..k)
        .map(|c| (n as f64 * 0.5f64.powi(c as i32) / total).floor() as usize)
        .collect();
    let mut left = n - sizes.iter().sum::<usize>();
    let mut c = 0;
    while left > 0 {
        sizes[c % k] += 1;
        left -= 1;
        c += 1;
    }
    sizes
}

pub fn generate_synthetic(spec: &SyntheticSpec, rng: &RngHandle) -> Result<FixedDesignProblem> {
    if spec.n == 0 || spec.d == 0 || spec.n_clusters == 0 {
        return input("synthetic problems need n, d, and n_clusters of at least 1");
    }
    if !(spec.cluster_std >= 0.0 && spec.center_spread >= 0.0 && spec.sigma >= 0.0) {
        return input("spreads and noise level must be nonnegative");
    }
    let normal = |stream: u64| {
        let mut r = rng.substream(stream, 0);
        move || -> f64 { StandardNormal.sample(&mut r) }
    };
    let mut center_draw = normal(1);
    let centers: Vec<Vec<f64>> = (0..spec.n_clusters)
        .map(|_| {
            (0..spec.d)
                .map(|_| spec.center_spread * center_draw())
                .collect()
        })
        .collect();
    let mut point_draw = normal(2);
    let mut points = Vec::with_capacity(spec.n);
    for (c, size) in cluster_sizes(spec.n, spec.n_clusters)
        .into_iter()
        .enumerate()
    {
        for _ in 0..size {
            points.push(
                centers[c]
                    .iter()
                    .map(|m| m + spec.cluster_std * point_draw())
                    .collect::<Vec<f64>>(),
            );
        }
    }
    points.shuffle(&mut rng.substream(4, 0));
    let f_star: Vec<f64> = points.iter().map(|x| spec.target.eval(x)).collect();
    let mut noise_draw = normal(3);
    let labels = f_star
        .iter()
        .map(|f| f + spec.sigma * noise_draw())
        .collect();
    FixedDesignProblem::new(
        Dataset::new(points, Some(labels))?,
        f_star,
        spec.sigma,
        spec.mu,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    RlsIncrease,
    ProbabilityIncrease,
    DeffDecrease,
    SchurBelowGamma,
    IncrementMismatch,
}

/// One failed monotonicity check at the transition from `t` to `t + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: usize,
    pub index: Option<usize>,
    pub kind: ViolationKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub transitions: usize,
    pub violations: Vec<Violation>,
}

impl MonotonicityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every transition `t → t + 1` for `t < t_max` against exact RLS.
pub fn monotonicity_audit(
    dataset: &Dataset,
    spec: &KernelSpec,
    gamma: f64,
    t_max: usize,
) -> Result<MonotonicityReport> {
    if t_max == 0 || t_max > dataset.len() {
        return input(format!("t_max {t_max} outside 1..={}", dataset.len()));
    }
    let k = gram(dataset, spec, t_max)?;
    let block = |t: usize| k.view((0, 0), (t, t)).into_owned();
    let profiles = (1..=t_max)
        .map(|t| exact_rls(&block(t), gamma))
        .collect::<Result<Vec<_>>>()?;
    let mut report = MonotonicityReport::default();
    for t in 1..t_max {
        let (before, after) = (&profiles[t - 1], &profiles[t]);
        let mut flag = |index, kind, magnitude| {
            report.violations.push(Violation {
                t,
                index,
                kind,
                magnitude,
            })
        };
        for i in 0..t {
            let dt = after.tau[i] - before.tau[i];
            if dt > 1e-9 {
                flag(Some(i), ViolationKind::RlsIncrease, dt);
            }
            let dp = after.probabilities[i] - before.probabilities[i];
            if dp > 1e-9 {
                flag(Some(i), ViolationKind::ProbabilityIncrease, dp);
            }
        }
        let dd = after.deff - before.deff;
        if dd < -1e-9 {
            flag(None, ViolationKind::DeffDecrease, -dd);
        }
        let k_bar = DVector::from_fn(t, |i, _| k[(i, t)]);
        match deff_increment_exact(&block(t), &k_bar, k[(t, t)], gamma) {
            Ok(inc) => {
                if inc.xi < gamma - 1e-9 {
                    flag(None, ViolationKind::SchurBelowGamma, gamma - inc.xi);
                }
                if (dd - inc.delta).abs() > 1e-8 {
                    flag(
                        None,
                        ViolationKind::IncrementMismatch,
                        (dd - inc.delta).abs(),
                    );
                }
            }
            Err(_) => flag(None, ViolationKind::SchurBelowGamma, f64::NAN),
        }
        report.transitions += 1;
    }
    Ok(report)
}

/// Risk inputs for checkpoint evaluation; `f_star` covers the whole stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSetting {
    pub f_star: Vec<f64>,
    pub noise_std: f64,
    pub mu: f64,
}

/// One row of the per-checkpoint metrics table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetrics {
    pub t: usize,
    pub q: usize,
    pub deff_exact: f64,
    pub deff_tilde: f64,
    pub spectral_gap: f64,
    pub psi_gap: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub risk_exact: Option<f64>,
    pub risk_approx: Option<f64>,
    pub risk_ratio_bound: Option<f64>,
}

/// Dense `K_t` and `K̃_t` for a checkpoint.
pub fn materialize_checkpoint(
    dataset: &Dataset,
    spec: &KernelSpec,
    gamma: f64,
    checkpoint: &RunCheckpoint,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let k = gram(dataset, spec, checkpoint.t)?;
    let k_tilde = nystrom_approx(&k, &checkpoint.selection()?, gamma)?.materialize()?;
    Ok((k, k_tilde))
}

/// Second pass over the stream: evaluates every checkpoint, in parallel.
pub fn evaluate_checkpoints(
    dataset: &Dataset,
    spec: &KernelSpec,
    gamma: f64,
    epsilon: f64,
    risk: Option<&RiskSetting>,
    checkpoints: &[RunCheckpoint],
) -> Result<Vec<CheckpointMetrics>> {
    if let Some(r) = risk {
        if r.f_star.len() < dataset.len() {
            return input("f* is shorter than the dataset");
        }
    }
    map_items(checkpoints, |cp| {
        evaluate_selection(
            dataset,
            spec,
            gamma,
            epsilon,
            risk,
            &cp.selection()?,
            cp.q,
            cp.deff_tilde,
        )
    })
    .into_iter()
    .collect()
}

/// Evaluates one weighted selection over the first `selection.t()` points.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_selection(
    dataset: &Dataset,
    spec: &KernelSpec,
    gamma: f64,
    epsilon: f64,
    risk: Option<&RiskSetting>,
    selection: &Selection,
    q: usize,
    deff_tilde: f64,
) -> Result<CheckpointMetrics> {
    let t = selection.t();
    if let Some(r) = risk {
        if r.f_star.len() < t {
            return input("f* is shorter than the evaluated prefix");
        }
    }
    let k = gram(dataset, spec, t)?;
    let k_tilde = nystrom_approx(&k, selection, gamma)?.materialize()?;
    let report = check_condition(&k, &k_tilde, gamma, epsilon)?;
    let deff_exact = exact_rls(&k, gamma)?.deff;
    let psi = psi_gap(&k, selection, gamma)?;
    let (risk_exact, risk_approx, bound) = match risk {
        Some(r) => {
            let f = DVector::from_column_slice(&r.f_star[..t]);
            (
                Some(fixed_design_risk(&k, &f, r.noise_std, r.mu)?),
                Some(fixed_design_risk(&k_tilde, &f, r.noise_std, r.mu)?),
                Some(risk_ratio_bound(gamma, r.mu, epsilon)),
            )
        }
        None => (None, None, None),
    };
    Ok(CheckpointMetrics {
        t,
        q,
        deff_exact,
        deff_tilde,
        spectral_gap: report.spectral_gap,
        psi_gap: psi,
        lower_ok: report.lower_ok,
        upper_ok: report.upper_ok,
        risk_exact,
        risk_approx,
        risk_ratio_bound: bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nystrom::krr_exact;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, rank: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
        &g * g.transpose()
    }

    fn full_selection(t: usize) -> Selection {
        Selection::new((0..t).map(|i| (i, 1.0)).collect(), t, false).unwrap()
    }

    #[test]
    fn condition_examples() {
        let k = random_psd(8, 5, 1);
        let r = check_condition(&k, &k, 1.0, 0.5).unwrap();
        assert!(r.holds() && r.spectral_gap.abs() < 1e-12);

        let i = DMatrix::identity(3, 3);
        let r = check_condition(&i, &DMatrix::zeros(3, 3), 1.0, 0.0).unwrap();
        assert!(r.lower_ok && !r.upper_ok);
        assert!(check_condition(&i, &DMatrix::zeros(2, 2), 1.0, 0.0).is_err());
    }

    #[test]
    fn full_selection_gap_closed_form() {
        for seed in 0..5 {
            let k = random_psd(10, 7, seed);
            let gamma = 0.6;
            let kt = nystrom_approx(&k, &full_selection(10), gamma)
                .unwrap()
                .materialize()
                .unwrap();
            let r = check_condition(&k, &kt, gamma, 0.0).unwrap();
            assert!(r.holds());
            let lmax = EigPair::of(&k).unwrap().max();
            assert!((r.spectral_gap - gamma * lmax / (lmax + gamma)).abs() < 1e-9);
        }
    }

    #[test]
    fn psi_gap_examples() {
        let k = random_psd(9, 6, 4);
        assert!(psi_gap(&k, &full_selection(9), 1.0).unwrap().abs() < 1e-10);
        let lmax = EigPair::of(&k).unwrap().max();
        let empty = psi_gap(&k, &Selection::empty(9), 1.0).unwrap();
        assert!((empty - lmax / (lmax + 1.0)).abs() < 1e-10);
    }

    #[test]
    fn psi_gap_certificate_implies_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut certified = 0;
        for trial in 0..100 {
            let k = random_psd(12, 6, 500 + trial);
            let gamma = rng.random_range(0.3..2.0);
            let eps = 0.5;
            let mut entries = Vec::new();
            for i in 0..12 {
                if rng.random_bool(0.8) {
                    entries.push((i, rng.random_range(0.7..1.3)));
                }
            }
            let sel = Selection::new(entries, 12, false).unwrap();
            let gap = psi_gap(&k, &sel, gamma).unwrap();
            if gap <= eps {
                certified += 1;
                let kt = nystrom_approx(&k, &sel, gamma)
                    .unwrap()
                    .materialize()
                    .unwrap();
                assert!(
                    check_condition(&k, &kt, gamma, eps).unwrap().holds(),
                    "trial {trial}"
                );
            }
        }
        assert!(certified > 10);
    }

    #[test]
    fn risk_examples() {
        let f0 = DVector::zeros(5);
        let r = fixed_design_risk(&DMatrix::identity(5, 5), &f0, 2.0, 1.0).unwrap();
        assert!((r - 4.0 * 5.0 / 4.0).abs() < 1e-12);
        let f = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let r = fixed_design_risk(&DMatrix::zeros(3, 3), &f, 0.0, 0.7).unwrap();
        assert!((r - f.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn risk_matches_monte_carlo() {
        let k = random_psd(6, 4, 17);
        let f = DVector::from_fn(6, |i, _| (i as f64).cos());
        let (sigma, mu) = (0.8, 0.5);
        let closed = fixed_design_risk(&k, &f, sigma, mu).unwrap();
        let hat = &k * (&k + DMatrix::identity(6, 6) * mu).try_inverse().unwrap();
        let mut rng = RngHandle::new(5).substream(0, 0);
        let trials = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..trials {
            let eta = DVector::from_fn(6, |_, _| {
                sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
            });
            let err = (&f - &hat * (&f + eta)).norm_squared();
            sum += err;
            sum_sq += err * err;
        }
        let mean = sum / trials as f64;
        let sd = ((sum_sq / trials as f64 - mean * mean) / trials as f64).sqrt();
        assert!(
            (mean - closed).abs() < 3.0 * sd,
            "mean {mean}, closed {closed}, sd {sd}"
        );
        let w = krr_exact(&k, mu, &f).unwrap();
        assert_eq!(w.len(), 6);
    }

    #[test]
    fn variance_is_monotone_in_the_kernel() {
        for seed in 0..10 {
            let k = random_psd(10, 6, 40 + seed);
            let sel = Selection::new(vec![(0, 1.0), (3, 1.0), (7, 1.0)], 10, false).unwrap();
            let kt = nystrom_approx(&k, &sel, 1.0)
                .unwrap()
                .materialize()
                .unwrap();
            let f = DVector::zeros(10);
            let vk = risk_decomposition(&k, &f, 1.0, 0.5).unwrap().variance;
            let vkt = risk_decomposition(&kt, &f, 1.0, 0.5).unwrap().variance;
            assert!(vkt <= vk + 1e-12);
        }
    }

    #[test]
    fn synthetic_examples() {
        let mut spec = SyntheticSpec::new(40, 2, 3);
        spec.sigma = 0.0;
        let p = generate_synthetic(&spec, &RngHandle::new(1)).unwrap();
        assert_eq!(p.dataset.labels().unwrap(), p.f_star.as_slice());
        assert_eq!(p, generate_synthetic(&spec, &RngHandle::new(1)).unwrap());
        assert_ne!(p, generate_synthetic(&spec, &RngHandle::new(2)).unwrap());

        let mut one = SyntheticSpec::new(10, 3, 1);
        one.cluster_std = 0.0;
        let p = generate_synthetic(&one, &RngHandle::new(3)).unwrap();
        let k = gram(&p.dataset, &KernelSpec::Linear, 10).unwrap();
        let eig = EigPair::of(&k).unwrap();
        assert!(eig.eigenvalues[1].abs() < 1e-9 * eig.max().max(1.0));
        assert_eq!(cluster_sizes(10, 3), vec![6, 3, 1]);
        assert_eq!(cluster_sizes(7, 1), vec![7]);
    }

    #[test]
    fn monotonicity_examples() {
        let ortho = Dataset::unlabeled(
            (0..6)
                .map(|i| (0..6).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
        .unwrap();
        let r = monotonicity_audit(&ortho, &KernelSpec::Linear, 1.0, 6).unwrap();
        assert!(r.is_clean() && r.transitions == 5);
        let dup = Dataset::unlabeled(vec![vec![1.0]; 10]).unwrap();
        assert!(monotonicity_audit(&dup, &KernelSpec::Linear, 1.0, 10)
            .unwrap()
            .is_clean());
        assert!(monotonicity_audit(&dup, &KernelSpec::Linear, 1.0, 11).is_err());
    }

    #[test]
    fn checkpoint_metrics_full_dictionary() {
        let p = generate_synthetic(&SyntheticSpec::new(30, 2, 3), &RngHandle::new(8)).unwrap();
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let cp = RunCheckpoint {
            t: 20,
            q: 20,
            deff_tilde: 0.0,
            indices: (0..20).collect(),
            weights: vec![1; 20],
            elapsed_secs: 0.0,
        };
        let risk = RiskSetting {
            f_star: p.f_star.clone(),
            noise_std: 0.1,
            mu: 1.0,
        };
        let rows = evaluate_checkpoints(&p.dataset, &spec, 1.0, 0.5, Some(&risk), &[cp]).unwrap();
        let m = rows[0];
        assert!(m.lower_ok && m.upper_ok && m.psi_gap.abs() < 1e-9);
        assert!(
            m.risk_approx.unwrap() <= m.risk_ratio_bound.unwrap() * m.risk_exact.unwrap() + 1e-8
        );
    }
}

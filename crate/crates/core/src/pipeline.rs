//! The three top-level algorithms: Batch-Exact, INK-Oracle with a pluggable
//! leverage oracle, and INK-Estimate.
//!
//! A streaming run folds [`ink_step`] over the dataset. Each step asks the
//! oracle for RLS estimates on the dictionary plus the new column and for an
//! effective-dimension estimate, clamps the probabilities, runs
//! Shrink-Expand, and updates the stored kernel columns.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::kernel::{gram, Dataset, KernelColumn, KernelSpec};
use crate::leverage::{
    alpha, clamp_probabilities, estimate_deff_increment_with, exact_rls, initial_deff,
    rls_from_quad, update_deff, LeverageProfile,
};
use crate::numerics::BorderedInverse;
use crate::nystrom::{nystrom_approx, NystromFactor, Selection};
use crate::sampler::{direct_sample, shrink, shrink_expand, Dictionary, RngHandle};

/// Which earlier points a streamed kernel column is evaluated against.
///
/// `Dictionary` keeps only retained points, so the sketch lives in fixed
/// space and never touches an evicted point. `Full` keeps every point and
/// evaluates the estimators on full-length columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowScope {
    #[default]
    Dictionary,
    Full,
}

/// Parameters shared by the streaming runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InkConfig {
    pub gamma: f64,
    pub q_bar: u64,
    /// Emit a checkpoint every this many steps; `0` means final only.
    pub checkpoint_every: usize,
    pub scope: RowScope,
    /// Multiplies the `8·q̄` dictionary cap.
    pub safety_factor: f64,
    /// Record every element read and kernel query.
    pub record_access: bool,
}

impl InkConfig {
    pub fn new(gamma: f64, q_bar: u64) -> Self {
        InkConfig {
            gamma,
            q_bar,
            checkpoint_every: 0,
            scope: RowScope::Dictionary,
            safety_factor: 1.0,
            record_access: false,
        }
    }

    pub fn with_checkpoints(mut self, every: usize) -> Self {
        self.checkpoint_every = every;
        self
    }

    pub fn with_scope(mut self, scope: RowScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn with_access_log(mut self) -> Self {
        self.record_access = true;
        self
    }

    /// Largest dictionary size tolerated before a run aborts.
    pub fn cap(&self) -> usize {
        (8.0 * self.q_bar as f64 * self.safety_factor).floor() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return input(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.q_bar == 0 {
            return input("space budget q̄ must be at least 1");
        }
        if !(self.safety_factor.is_finite() && self.safety_factor >= 1.0) {
            return input(format!(
                "safety factor must be at least 1, got {}",
                self.safety_factor
            ));
        }
        Ok(())
    }
}

/// Snapshot of the dictionary after `t` points. Equality ignores `elapsed_secs`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunCheckpoint {
    pub t: usize,
    /// `Q_t`
    pub q: usize,
    pub deff_tilde: f64,
    /// Zero-based, ascending.
    pub indices: Vec<usize>,
    /// Integer weights `b_i`, aligned with `indices`.
    pub weights: Vec<u64>,
    #[serde(skip)]
    pub elapsed_secs: f64,
}

impl PartialEq for RunCheckpoint {
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t
            && self.q == other.q
            && self.deff_tilde.to_bits() == other.deff_tilde.to_bits()
            && self.indices == other.indices
            && self.weights == other.weights
    }
}

impl RunCheckpoint {
    /// The weighted selection `S_t` (weights `√b`) over the first `t` points.
    pub fn selection(&self) -> Result<Selection> {
        let entries = self
            .indices
            .iter()
            .zip(&self.weights)
            .map(|(&i, &b)| (i, (b as f64).sqrt()))
            .collect();
        Selection::new(entries, self.t, false)
    }
}

/// Element reads, kernel queries `(step, earlier index)`, and evictions
/// `(step, index)` observed during a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessLog {
    pub reads: Vec<usize>,
    pub kernel_queries: Vec<(usize, usize)>,
    pub evictions: Vec<(usize, usize)>,
}

impl AccessLog {
    /// Checks that elements `0..n` were each read once, in order, and that no
    /// kernel query touched an index after the step that evicted it.
    pub fn verify_single_pass(&self, n: usize) -> std::result::Result<(), String> {
        if self.reads != (0..n).collect::<Vec<_>>() {
            return Err(format!("read sequence {:?} is not 0..{n}", self.reads));
        }
        let evicted_at: BTreeMap<usize, usize> =
            self.evictions.iter().map(|&(step, i)| (i, step)).collect();
        if evicted_at.len() != self.evictions.len() {
            return Err("an index was evicted twice".into());
        }
        for &(step, i) in &self.kernel_queries {
            if i >= step {
                return Err(format!("step {step} queried a future index {i}"));
            }
            if let Some(&e) = evicted_at.get(&i) {
                if e < step {
                    return Err(format!(
                        "step {step} queried index {i}, evicted at step {e}"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Per-step `Q_t` and `d̃eff_t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub q: Vec<usize>,
    pub deff_tilde: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// RLS estimates that fell outside `[0, 1]` and were clamped.
    pub clamped_rls: usize,
    /// Columns dropped because their probability estimate was zero.
    pub zero_probability_drops: usize,
}

/// Everything a streaming run carries between steps.
#[derive(Debug, Clone)]
pub struct SketchState {
    spec: KernelSpec,
    config: InkConfig,
    rng: RngHandle,
    step: usize,
    dictionary: Dictionary,
    rows: Vec<usize>,
    row_points: Vec<Vec<f64>>,
    columns: BTreeMap<usize, Vec<f64>>,
    diag: BTreeMap<usize, f64>,
    tau_tilde: BTreeMap<usize, f64>,
    p_tilde: BTreeMap<usize, f64>,
    deff_tilde: f64,
    diagnostics: Diagnostics,
    access: Option<AccessLog>,
}

impl SketchState {
    pub fn new(spec: KernelSpec, config: InkConfig, rng: RngHandle) -> Result<Self> {
        config.validate()?;
        Ok(SketchState {
            spec,
            config,
            rng,
            step: 0,
            dictionary: Dictionary::new(config.q_bar)?,
            rows: Vec::new(),
            row_points: Vec::new(),
            columns: BTreeMap::new(),
            diag: BTreeMap::new(),
            tau_tilde: BTreeMap::new(),
            p_tilde: BTreeMap::new(),
            deff_tilde: 0.0,
            diagnostics: Diagnostics::default(),
            access: config.record_access.then(AccessLog::default),
        })
    }

    /// Number of points consumed so far.
    pub fn t(&self) -> usize {
        self.step
    }

    pub fn config(&self) -> &InkConfig {
        &self.config
    }

    pub fn gamma(&self) -> f64 {
        self.config.gamma
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    /// Indices whose points are still held, ascending.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn deff_tilde(&self) -> f64 {
        self.deff_tilde
    }

    pub fn p_tilde(&self) -> &BTreeMap<usize, f64> {
        &self.p_tilde
    }

    pub fn tau_tilde(&self) -> &BTreeMap<usize, f64> {
        &self.tau_tilde
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn access_log(&self) -> Option<&AccessLog> {
        self.access.as_ref()
    }

    /// Stored column `K(rows, i)` of a dictionary member, aligned with [`rows`](Self::rows).
    pub fn stored_column(&self, i: usize) -> Option<&[f64]> {
        self.columns.get(&i).map(Vec::as_slice)
    }

    /// Stored `k_ii` of a dictionary member.
    pub fn stored_diag(&self, i: usize) -> Option<f64> {
        self.diag.get(&i).copied()
    }

    pub fn row_position(&self, i: usize) -> Option<usize> {
        self.rows.binary_search(&i).ok()
    }

    /// Nyström factor of the current dictionary over [`rows`](Self::rows).
    pub fn factor(&self) -> Result<NystromFactor> {
        let indices: Vec<usize> = self.dictionary.indices().collect();
        let weights: Vec<f64> = self
            .dictionary
            .entries()
            .map(|(_, b)| (b as f64).sqrt())
            .collect();
        let r = self.rows.len();
        let q = indices.len();
        let positions: Vec<usize> = indices
            .iter()
            .map(|&i| {
                self.row_position(i).ok_or_else(|| {
                    Error::Invariant(format!("dictionary index {i} has no stored row"))
                })
            })
            .collect::<Result<_>>()?;
        let k_rows = DMatrix::from_fn(r, q, |a, j| self.columns[&indices[j]][a]);
        let k_sel = k_rows.select_rows(&positions);
        NystromFactor::from_blocks(
            self.rows.clone(),
            indices,
            weights,
            &k_rows,
            &k_sel,
            self.config.gamma,
        )
    }

    fn kernel_column(&mut self, point: &[f64]) -> Result<KernelColumn> {
        let self_term = self.spec.evaluate(point, point)?;
        let cross = self
            .row_points
            .iter()
            .map(|x| self.spec.evaluate(point, x))
            .collect::<Result<Vec<_>>>()?;
        if let Some(log) = &mut self.access {
            log.kernel_queries
                .extend(self.rows.iter().map(|&i| (self.step, i)));
        }
        Ok(KernelColumn { cross, self_term })
    }

    /// A checkpoint of the current dictionary.
    pub fn checkpoint(&self, elapsed_secs: f64) -> RunCheckpoint {
        let (indices, weights) = self.dictionary.entries().unzip();
        RunCheckpoint {
            t: self.step,
            q: self.dictionary.len(),
            deff_tilde: self.deff_tilde,
            indices,
            weights,
            elapsed_secs,
        }
    }
}

/// What an oracle sees when queried at one step.
pub struct OracleView<'a> {
    /// Zero-based index of the arriving point.
    pub step: usize,
    /// Dictionary indices followed by `step`.
    pub candidates: &'a [usize],
    pub state: &'a SketchState,
    /// The sketch `K̃_t` before this step, over `state.rows()`.
    pub factor: &'a NystromFactor,
    /// The new column over `state.rows()`.
    pub column: &'a KernelColumn,
}

/// RLS estimates for the candidates and the effective-dimension estimate after the step.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleAnswer {
    pub tau: BTreeMap<usize, f64>,
    pub deff: f64,
    pub clamped: usize,
}

/// A source of `(α, β)`-approximate leverage information.
pub trait LeverageOracle {
    fn alpha(&self) -> f64;
    fn query(&mut self, view: &OracleView<'_>) -> Result<OracleAnswer>;
}

/// Exact RLS and effective dimension over the growing prefix (`α = β = 1`).
///
/// Holds `(K_t + γI)⁻¹` and extends it by bordering, so each step costs
/// `O(t²)`; then `τ_i = 1 − γ[(K_t + γI)⁻¹]_ii` and
/// `d_eff = t − γ·tr((K_t + γI)⁻¹)`.
pub struct ExactOracle<'a> {
    dataset: &'a Dataset,
    spec: KernelSpec,
    gamma: f64,
    inv: DMatrix<f64>,
}

pub fn exact_oracle<'a>(
    dataset: &'a Dataset,
    spec: KernelSpec,
    gamma: f64,
) -> Result<ExactOracle<'a>> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return input(format!("gamma must be positive, got {gamma}"));
    }
    Ok(ExactOracle {
        dataset,
        spec,
        gamma,
        inv: DMatrix::zeros(0, 0),
    })
}

impl ExactOracle<'_> {
    /// Points absorbed so far.
    pub fn t(&self) -> usize {
        self.inv.nrows()
    }

    /// Absorbs the next point of the dataset.
    pub fn advance(&mut self) -> Result<()> {
        let t = self.t();
        if t >= self.dataset.len() {
            return input("exact oracle has consumed the whole dataset");
        }
        let x = self.dataset.point(t);
        let c = DVector::from_fn(t, |i, _| self.spec.eval_unchecked(x, self.dataset.point(i)));
        let k = self.spec.eval_unchecked(x, x);
        let v = &self.inv * &c;
        let s = k + self.gamma - c.dot(&v);
        if !(s > 0.0) {
            return Err(Error::Numerical(format!(
                "bordered Schur complement {s} is not positive"
            )));
        }
        let mut next = DMatrix::zeros(t + 1, t + 1);
        next.view_mut((0, 0), (t, t))
            .copy_from(&(&self.inv + &v * v.transpose() / s));
        for i in 0..t {
            next[(i, t)] = -v[i] / s;
            next[(t, i)] = -v[i] / s;
        }
        next[(t, t)] = 1.0 / s;
        self.inv = next;
        Ok(())
    }

    pub fn rls(&self, i: usize) -> f64 {
        1.0 - self.gamma * self.inv[(i, i)]
    }

    pub fn deff(&self) -> f64 {
        self.t() as f64 - self.gamma * self.inv.trace()
    }

    pub fn profile(&self) -> LeverageProfile {
        crate::leverage::profile_from_tau((0..self.t()).map(|i| self.rls(i)).collect())
    }
}

impl LeverageOracle for ExactOracle<'_> {
    fn alpha(&self) -> f64 {
        1.0
    }

    fn query(&mut self, view: &OracleView<'_>) -> Result<OracleAnswer> {
        if view.step != self.t() {
            return input(format!(
                "exact oracle is at t = {} but was queried for step {}",
                self.t(),
                view.step
            ));
        }
        self.advance()?;
        Ok(OracleAnswer {
            tau: view.candidates.iter().map(|&i| (i, self.rls(i))).collect(),
            deff: self.deff(),
            clamped: 0,
        })
    }
}

/// Estimates from the sketch, the stored columns, and the new column alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOracle {
    epsilon: f64,
    alpha: f64,
}

impl EstimatorOracle {
    pub fn new(epsilon: f64) -> Result<Self> {
        Ok(EstimatorOracle {
            epsilon,
            alpha: alpha(epsilon)?,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl LeverageOracle for EstimatorOracle {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn query(&mut self, view: &OracleView<'_>) -> Result<OracleAnswer> {
        let state = view.state;
        let gamma = state.gamma();
        let eps = self.epsilon;
        let c = DVector::from_column_slice(&view.column.cross);
        let k = view.column.self_term;
        let inv_alpha = view.factor.shifted_inverse(self.alpha * gamma)?;
        let deff = if view.step == 0 {
            initial_deff(k, gamma)
        } else {
            let inv_gamma = view.factor.shifted_inverse(gamma)?;
            let delta = estimate_deff_increment_with(&inv_alpha, &inv_gamma, &c, k, gamma, eps)?;
            update_deff(state.deff_tilde(), delta, eps)?
        };

        let r = c.len();
        let mut vectors = DMatrix::zeros(r + 1, view.candidates.len());
        let mut diags = Vec::with_capacity(view.candidates.len());
        for (j, &i) in view.candidates.iter().enumerate() {
            if i == view.step {
                vectors.view_mut((0, j), (r, 1)).copy_from(&c);
                vectors[(r, j)] = k;
                diags.push(k);
            } else {
                let stored = state
                    .stored_column(i)
                    .ok_or_else(|| Error::Invariant(format!("no stored column for index {i}")))?;
                let pos = state
                    .row_position(i)
                    .ok_or_else(|| Error::Invariant(format!("no stored row for index {i}")))?;
                vectors.view_mut((0, j), (r, 1)).copy_from_slice(stored);
                vectors[(r, j)] = c[pos];
                diags.push(state.stored_diag(i).unwrap_or(0.0));
            }
        }
        let bordered = BorderedInverse::new(&inv_alpha, c, k)?;
        let quads = bordered.quad_many(&vectors)?;
        let mut clamped = 0;
        let mut tau = BTreeMap::new();
        for ((&i, &d), q) in view.candidates.iter().zip(&diags).zip(quads) {
            let est = rls_from_quad(d, q, gamma, eps)?;
            clamped += usize::from(est.clamped);
            tau.insert(i, est.value);
        }
        Ok(OracleAnswer { tau, deff, clamped })
    }
}

/// Outcome of one streaming step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepReport {
    pub admitted: bool,
    pub evicted: Vec<usize>,
}

/// Consumes the next point of the stream.
pub fn ink_step(
    state: &mut SketchState,
    point: &[f64],
    oracle: &mut dyn LeverageOracle,
) -> Result<StepReport> {
    let s = state.step;
    if let Some(log) = &mut state.access {
        log.reads.push(s);
    }
    let column = state.kernel_column(point)?;
    let factor = state.factor()?;
    let candidates: Vec<usize> = state.dictionary.indices().chain([s]).collect();
    let answer = oracle.query(&OracleView {
        step: s,
        candidates: &candidates,
        state,
        factor: &factor,
        column: &column,
    })?;

    if !(answer.deff.is_finite() && answer.deff > 0.0) {
        return Err(Error::Numerical(format!(
            "effective dimension estimate {} is not positive",
            answer.deff
        )));
    }
    if answer.deff < state.deff_tilde * (1.0 - 1e-12) {
        return Err(Error::Invariant(format!(
            "effective dimension estimate decreased from {} to {}",
            state.deff_tilde, answer.deff
        )));
    }
    let mut raw = BTreeMap::new();
    for &i in &candidates {
        let tau = *answer
            .tau
            .get(&i)
            .ok_or_else(|| Error::Invariant(format!("oracle returned no RLS for index {i}")))?;
        raw.insert(i, tau / answer.deff);
    }
    let p = clamp_probabilities(&raw, &state.p_tilde);
    state.diagnostics.clamped_rls += answer.clamped;

    let mut dict = state.dictionary.clone();
    let mut evicted = Vec::new();
    for &i in &candidates[..candidates.len() - 1] {
        if !(p[&i] > 0.0) {
            dict.remove(i);
            evicted.push(i);
            state.diagnostics.zero_probability_drops += 1;
        }
    }
    let outcome = if p[&s] > 0.0 {
        shrink_expand(&dict, &p, s, &state.rng)?
    } else {
        state.diagnostics.zero_probability_drops += 1;
        shrink(&dict, &p, s, &state.rng)?
    };
    evicted.extend(outcome.evicted.iter().copied());
    evicted.sort_unstable();
    let cap = state.config.cap();
    if outcome.dictionary.len() > cap {
        return Err(Error::Invariant(format!(
            "dictionary size {} exceeds the cap {cap} at step {s}",
            outcome.dictionary.len()
        )));
    }

    store_step(state, outcome.dictionary, point, &column, outcome.admitted);
    state.p_tilde = p
        .into_iter()
        .filter(|(i, _)| state.dictionary.contains(*i))
        .collect();
    state.tau_tilde = answer
        .tau
        .into_iter()
        .filter(|(i, _)| state.dictionary.contains(*i))
        .collect();
    state.deff_tilde = answer.deff;
    if let Some(log) = &mut state.access {
        log.evictions.extend(evicted.iter().map(|&i| (s, i)));
    }
    state.step += 1;
    Ok(StepReport {
        admitted: outcome.admitted,
        evicted,
    })
}

fn store_step(
    state: &mut SketchState,
    dictionary: Dictionary,
    point: &[f64],
    column: &KernelColumn,
    admitted: bool,
) {
    let s = state.step;
    let old_rows = std::mem::take(&mut state.rows);
    let old_points = std::mem::take(&mut state.row_points);
    let old_pos = |i: usize| old_rows.binary_search(&i).ok();
    let new_rows: Vec<usize> = match state.config.scope {
        RowScope::Dictionary => dictionary.indices().collect(),
        RowScope::Full => old_rows.iter().copied().chain([s]).collect(),
    };
    let entry = |col_owner: usize, stored: Option<&Vec<f64>>, row: usize| -> f64 {
        match (col_owner == s, row == s) {
            (true, true) => column.self_term,
            (true, false) => column.cross[old_pos(row).expect("row held before step")],
            (false, true) => column.cross[old_pos(col_owner).expect("member row held")],
            (false, false) => {
                stored.expect("member column stored")[old_pos(row).expect("row held")]
            }
        }
    };
    let mut columns = BTreeMap::new();
    let mut diag = BTreeMap::new();
    for i in dictionary.indices() {
        let stored = state.columns.get(&i);
        columns.insert(i, new_rows.iter().map(|&r| entry(i, stored, r)).collect());
        diag.insert(
            i,
            if i == s {
                column.self_term
            } else {
                state.diag[&i]
            },
        );
    }
    let keep_new = admitted || state.config.scope == RowScope::Full;
    state.row_points = new_rows
        .iter()
        .map(|&r| {
            if r == s {
                debug_assert!(keep_new);
                point.to_vec()
            } else {
                old_points[old_pos(r).expect("row held before step")].clone()
            }
        })
        .collect();
    state.rows = new_rows;
    state.columns = columns;
    state.diag = diag;
    state.dictionary = dictionary;
}

/// Result of a streaming run.
#[derive(Debug, Clone)]
pub struct SketchRun {
    /// Final factor over the rows still held by the sketch.
    pub factor: NystromFactor,
    /// Final selection over all `n` points.
    pub selection: Selection,
    pub checkpoints: Vec<RunCheckpoint>,
    pub trace: StepTrace,
    pub diagnostics: Diagnostics,
    pub access: Option<AccessLog>,
}

/// INK-Oracle: streams `dataset` once with leverage information from `oracle`.
pub fn ink_oracle_run(
    dataset: &Dataset,
    spec: KernelSpec,
    config: InkConfig,
    oracle: &mut dyn LeverageOracle,
    rng: RngHandle,
) -> Result<SketchRun> {
    let start = Instant::now();
    let mut state = SketchState::new(spec, config, rng)?;
    let mut checkpoints = Vec::new();
    let mut trace = StepTrace::default();
    let n = dataset.len();
    for s in 0..n {
        ink_step(&mut state, dataset.point(s), oracle)?;
        trace.q.push(state.dictionary.len());
        trace.deff_tilde.push(state.deff_tilde);
        let t = s + 1;
        let due = config.checkpoint_every > 0 && t % config.checkpoint_every == 0;
        if due || t == n {
            checkpoints.push(state.checkpoint(start.elapsed().as_secs_f64()));
        }
    }
    let final_cp = checkpoints.last().expect("dataset is non-empty");
    Ok(SketchRun {
        factor: state.factor()?,
        selection: final_cp.selection()?,
        checkpoints,
        trace,
        diagnostics: state.diagnostics,
        access: state.access,
    })
}

/// INK-Estimate: INK-Oracle with the sketch-based estimators in the oracle slot.
pub fn ink_estimate_run(
    dataset: &Dataset,
    spec: KernelSpec,
    config: InkConfig,
    epsilon: f64,
    rng: RngHandle,
) -> Result<SketchRun> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return input(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    let mut oracle = EstimatorOracle::new(epsilon)?;
    ink_oracle_run(dataset, spec, config, &mut oracle, rng)
}

/// Result of Batch-Exact.
#[derive(Debug, Clone)]
pub struct BatchRun {
    pub factor: NystromFactor,
    pub selection: Selection,
    pub draws: Vec<usize>,
    pub profile: LeverageProfile,
}

/// Batch-Exact: exact RLS over the whole Gram matrix, `m` multinomial draws,
/// weights `1/√(m·p_i)`.
pub fn batch_exact(
    dataset: &Dataset,
    spec: KernelSpec,
    gamma: f64,
    m: usize,
    rng: RngHandle,
) -> Result<BatchRun> {
    if m == 0 {
        return input("batch sample size m must be at least 1");
    }
    let k = gram(dataset, &spec, dataset.len())?;
    let profile = exact_rls(&k, gamma)?;
    let draws = direct_sample(&profile.probabilities, m, &mut rng.substream(0, 0))?;
    let selection = Selection::from_draws(&draws, &profile.probabilities)?;
    let factor = nystrom_approx(&k, &selection, gamma)?;
    Ok(BatchRun {
        factor,
        selection,
        draws,
        profile,
    })
}

/// Streaming budget `q̄ = ⌈28·α·β·deff/ε² · log(4n/δ)⌉`.
///
/// `deff` is the anticipated final effective dimension. With an exact oracle
/// pass `alpha = beta = 1`.
pub fn streaming_budget(
    deff: f64,
    epsilon: f64,
    delta: f64,
    n: usize,
    alpha: f64,
    beta: f64,
) -> Result<u64> {
    check_budget_inputs(deff, epsilon, delta, n)?;
    if !(alpha >= 1.0 && beta >= 1.0 && alpha.is_finite() && beta.is_finite()) {
        return input(format!(
            "alpha and beta must be at least 1, got {alpha} and {beta}"
        ));
    }
    let q = 28.0 * alpha * beta * deff / (epsilon * epsilon) * (4.0 * n as f64 / delta).ln();
    Ok((q.ceil() as u64).max(1))
}

/// Batch sample size `m = ⌈2·deff/ε² · log(n/δ)⌉`.
pub fn batch_budget(deff: f64, epsilon: f64, delta: f64, n: usize) -> Result<usize> {
    check_budget_inputs(deff, epsilon, delta, n)?;
    let m = 2.0 * deff / (epsilon * epsilon) * (n as f64 / delta).ln();
    Ok((m.ceil() as usize).max(1))
}

fn check_budget_inputs(deff: f64, epsilon: f64, delta: f64, n: usize) -> Result<()> {
    if !(deff.is_finite() && deff > 0.0) {
        return input(format!("deff must be positive, got {deff}"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return input(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return input(format!("delta must lie in (0, 1), got {delta}"));
    }
    if n == 0 {
        return input("n must be at least 1");
    }
    Ok(())
}

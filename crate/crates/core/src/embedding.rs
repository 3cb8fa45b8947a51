//! Conditional distribution embeddings fitted from transition samples.
//!
//! Given a sample `(x_i, u_i, y_i)` and an approximate dynamics map `f̃`, the
//! physics-informed estimate of `E[c(y) | x, u]` is
//!
//! ```text
//! cᵀ W K(x,u) - c̃ᵀ W K(x,u) + c(f̃(x,u)),    W = (G + λI)⁻¹
//! ```
//!
//! with `c_i = c(y_i)` and `c̃_i = c(f̃(x_i, u_i))`. The data-driven baseline
//! keeps only the first term. `W` is never formed: `G + λI` is Cholesky
//! factored once at fit time and every evaluation is a solve against it.
//!
//! State prediction applies the estimator to the coordinate maps
//! `c_j(y) = y_j`. Those are not members of the Gaussian RKHS, so predicted
//! states are an approximation in the same sense that kernel ridge
//! regression of a linear function is.

use std::fmt;
use std::sync::Arc;

use faer::prelude::SpSolver;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{PikeError, Result};
use crate::kernel::{self, KernelSpec};
use crate::points::Points;

/// The observed sample `{(x_i, u_i, y_i)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionDataset {
    states: Points,
    actions: Points,
    next_states: Points,
}

impl TransitionDataset {
    pub fn new(states: Points, actions: Points, next_states: Points) -> Result<Self> {
        let m = states.len();
        if m == 0 {
            return Err(PikeError::invalid("transition dataset is empty"));
        }
        if actions.len() != m || next_states.len() != m {
            return Err(PikeError::invalid(format!(
                "dataset blocks disagree on row count: {} states, {} actions, {} next states",
                m,
                actions.len(),
                next_states.len()
            )));
        }
        if next_states.dim() != states.dim() {
            return Err(PikeError::invalid(format!(
                "next states have dimension {}, states have {}",
                next_states.dim(),
                states.dim()
            )));
        }
        if !(states.is_finite() && actions.is_finite() && next_states.is_finite()) {
            return Err(PikeError::invalid("dataset contains non-finite entries"));
        }
        Ok(Self {
            states,
            actions,
            next_states,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states.dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actions.dim()
    }

    pub fn states(&self) -> &Points {
        &self.states
    }

    pub fn actions(&self) -> &Points {
        &self.actions
    }

    pub fn next_states(&self) -> &Points {
        &self.next_states
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            states: self.states.permuted(order),
            actions: self.actions.permuted(order),
            next_states: self.next_states.permuted(order),
        }
    }
}

/// Approximate deterministic dynamics `f̃(x, u)`.
///
/// Implementations must be deterministic and return a state of the same
/// dimension as their input state.
pub trait PriorModel: Send + Sync {
    fn predict(&self, x: &[f64], u: &[f64]) -> Vec<f64>;
}

/// Adapts a closure into a [`PriorModel`].
pub struct FnPrior<F>(pub F);

impl<F> PriorModel for FnPrior<F>
where
    F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync,
{
    fn predict(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (self.0)(x, u)
    }
}

/// A real-valued cost over next states.
pub trait CostFunction {
    fn eval(&self, y: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> CostFunction for F {
    fn eval(&self, y: &[f64]) -> f64 {
        self(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    PhysicsInformed,
    DataDriven,
}

impl EmbeddingMode {
    pub fn short_name(self) -> &'static str {
        match self {
            EmbeddingMode::PhysicsInformed => "pi",
            EmbeddingMode::DataDriven => "dd",
        }
    }
}

impl fmt::Display for EmbeddingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingMode::PhysicsInformed => "physics_informed",
            EmbeddingMode::DataDriven => "data_driven",
        })
    }
}

#[derive(Clone)]
enum Bias {
    None,
    Prior(Arc<dyn PriorModel>),
    /// The zero element of the embedding space: `c̃ = 0` and no shift term.
    Zero,
}

/// Result of [`FittedEmbedding::fit`]; immutable and shareable across threads.
pub struct FittedEmbedding {
    spec_x: KernelSpec,
    spec_u: KernelSpec,
    lambda: f64,
    mode: EmbeddingMode,
    dataset: TransitionDataset,
    prior_targets: Points,
    bias: Bias,
    factor: faer::linalg::solvers::Cholesky<f64>,
    /// `W (Y - Ỹ)`, or `W Y` without a prior. `M × d_x`.
    state_coef: Mat<f64>,
}

impl fmt::Debug for FittedEmbedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FittedEmbedding")
            .field("mode", &self.mode)
            .field("samples", &self.dataset.len())
            .field("spec_x", &self.spec_x)
            .field("spec_u", &self.spec_u)
            .field("lambda", &self.lambda)
            .finish_non_exhaustive()
    }
}

impl FittedEmbedding {
    /// Fits the embedding: one Gram assembly and one `M × M` factorization.
    pub fn fit(
        dataset: TransitionDataset,
        prior: Option<Arc<dyn PriorModel>>,
        spec_x: KernelSpec,
        spec_u: KernelSpec,
        lambda: f64,
        mode: EmbeddingMode,
    ) -> Result<Self> {
        let bias = match (mode, prior) {
            (EmbeddingMode::DataDriven, _) => Bias::None,
            (EmbeddingMode::PhysicsInformed, Some(p)) => Bias::Prior(p),
            (EmbeddingMode::PhysicsInformed, None) => {
                return Err(PikeError::invalid("physics-informed mode requires a prior model"))
            }
        };
        Self::fit_with_bias(dataset, bias, spec_x, spec_u, lambda, mode)
    }

    /// A physics-informed embedding whose bias is the zero element.
    ///
    /// Its evaluations must coincide with the data-driven embedding on the
    /// same sample; this exists to test that reduction.
    pub fn fit_zero_bias(
        dataset: TransitionDataset,
        spec_x: KernelSpec,
        spec_u: KernelSpec,
        lambda: f64,
    ) -> Result<Self> {
        Self::fit_with_bias(
            dataset,
            Bias::Zero,
            spec_x,
            spec_u,
            lambda,
            EmbeddingMode::PhysicsInformed,
        )
    }

    fn fit_with_bias(
        dataset: TransitionDataset,
        bias: Bias,
        spec_x: KernelSpec,
        spec_u: KernelSpec,
        lambda: f64,
        mode: EmbeddingMode,
    ) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(PikeError::InvalidRegularizer(lambda));
        }
        let m = dataset.len();
        let d = dataset.state_dim();

        let prior_targets = match &bias {
            Bias::Prior(prior) => {
                let mut targets = Points::zeros(m, d);
                for i in 0..m {
                    let y = prior.predict(dataset.states.row(i), dataset.actions.row(i));
                    if y.len() != d || !y.iter().all(|v| v.is_finite()) {
                        return Err(PikeError::PriorEvaluation { row: i });
                    }
                    targets.row_mut(i).copy_from_slice(&y);
                }
                targets
            }
            Bias::None | Bias::Zero => Points::zeros(m, d),
        };

        let mut reg = kernel::gram(&spec_x, &spec_u, &dataset.states, &dataset.actions)?.into_mat();
        for i in 0..m {
            reg.write(i, i, reg.read(i, i) + lambda);
        }
        let factor = reg
            .cholesky(Side::Lower)
            .map_err(|e| PikeError::Numerical(format!("G + λI is not positive definite: {e:?}")))?;
        drop(reg);

        let residual_targets =
            Mat::<f64>::from_fn(m, d, |i, j| dataset.next_states.row(i)[j] - prior_targets.row(i)[j]);
        let state_coef = factor.solve(&residual_targets);

        Ok(Self {
            spec_x,
            spec_u,
            lambda,
            mode,
            dataset,
            prior_targets,
            bias,
            factor,
            state_coef,
        })
    }

    pub fn mode(&self) -> EmbeddingMode {
        self.mode
    }

    pub fn spec_x(&self) -> &KernelSpec {
        &self.spec_x
    }

    pub fn spec_u(&self) -> &KernelSpec {
        &self.spec_u
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dataset(&self) -> &TransitionDataset {
        &self.dataset
    }

    /// Rows `f̃(x_i, u_i)`; all zeros when there is no prior.
    pub fn prior_targets(&self) -> &Points {
        &self.prior_targets
    }

    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    /// `(G + λI)⁻¹ v` via the stored factorization.
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.len() {
            return Err(PikeError::invalid(format!(
                "solve vector has length {}, expected {}",
                v.len(),
                self.len()
            )));
        }
        let rhs = faer::col::from_slice::<f64>(v);
        let z = self.factor.solve(rhs);
        Ok((0..z.nrows()).map(|i| z.read(i)).collect())
    }

    /// `‖(G + λI) z - v‖ / ‖v‖` for `z = solve(v)`, recomputing `G` row by row.
    pub fn solve_residual(&self, v: &[f64]) -> Result<f64> {
        let z = self.solve(v)?;
        let states = self.dataset.states();
        let actions = self.dataset.actions();
        let mut num = 0.0;
        for i in 0..self.len() {
            let row = kernel::cross_vector_unchecked(
                &self.spec_x,
                &self.spec_u,
                states,
                actions,
                states.row(i),
                actions.row(i),
            );
            let gz: f64 = row.iter().zip(&z).map(|(g, zi)| g * zi).sum::<f64>() + self.lambda * z[i];
            num += (gz - v[i]).powi(2);
        }
        let den: f64 = v.iter().map(|x| x * x).sum();
        Ok((num / den).sqrt())
    }

    /// `K(x, u)` after checking the query against the training dimensions.
    pub fn cross_vector(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        kernel::check_query(self.dataset.states(), self.dataset.actions(), x, u)?;
        Ok(kernel::cross_vector_unchecked(
            &self.spec_x,
            &self.spec_u,
            self.dataset.states(),
            self.dataset.actions(),
            x,
            u,
        ))
    }

    /// `f̃(x, u)` when the embedding carries a prior model.
    pub fn prior_state(&self, x: &[f64], u: &[f64]) -> Result<Option<Vec<f64>>> {
        match &self.bias {
            Bias::Prior(p) => {
                let y = p.predict(x, u);
                if y.len() != x.len() || !y.iter().all(|v| v.is_finite()) {
                    return Err(PikeError::Numerical(format!(
                        "prior model returned a non-finite or mis-sized state at query {x:?}"
                    )));
                }
                Ok(Some(y))
            }
            Bias::None | Bias::Zero => Ok(None),
        }
    }

    /// `W (c - c̃)`: the cost-dependent coefficient vector shared by every query.
    pub fn cost_weights(&self, c: &dyn CostFunction) -> Result<Vec<f64>> {
        let m = self.len();
        let mut v = Vec::with_capacity(m);
        for i in 0..m {
            let ci = checked_cost(c, self.dataset.next_states.row(i), || format!("training target {i}"))?;
            let ct = match self.bias {
                Bias::Prior(_) => checked_cost(c, self.prior_targets.row(i), || format!("prior target {i}"))?,
                Bias::None | Bias::Zero => 0.0,
            };
            v.push(ci - ct);
        }
        self.solve(&v)
    }

    /// The shift term `c(f̃(x, u))`, zero without a prior.
    pub fn bias_cost(&self, c: &dyn CostFunction, x: &[f64], u: &[f64]) -> Result<f64> {
        match self.prior_state(x, u)? {
            Some(y) => checked_cost(c, &y, || "prior prediction at query".to_owned()),
            None => Ok(0.0),
        }
    }

    /// Estimate of `E[c(y) | x, u]`.
    pub fn expectation(&self, x: &[f64], u: &[f64], c: &dyn CostFunction) -> Result<f64> {
        let k = self.cross_vector(x, u)?;
        let w = self.cost_weights(c)?;
        let data_term: f64 = w.iter().zip(&k).map(|(a, b)| a * b).sum();
        Ok(data_term + self.bias_cost(c, x, u)?)
    }

    /// Estimate of `E[y | x, u]`, all coordinates at once.
    pub fn predict_state(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let k = self.cross_vector(x, u)?;
        let d = self.dataset.state_dim();
        let mut out = vec![0.0; d];
        for (i, ki) in k.iter().enumerate() {
            if *ki == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.state_coef.read(i, j) * ki;
            }
        }
        if let Some(prior) = self.prior_state(x, u)? {
            for (o, p) in out.iter_mut().zip(prior) {
                *o += p;
            }
        }
        Ok(out)
    }

    /// Feeds each prediction back as the next query. Returns `steps + 1` states.
    ///
    /// `controls` must hold at least `steps` rows for controlled systems and
    /// may be omitted when the action dimension is zero.
    pub fn rollout(&self, x0: &[f64], controls: Option<&Points>, steps: usize) -> Result<Vec<Vec<f64>>> {
        let action_dim = self.dataset.action_dim();
        match controls {
            Some(c) if c.len() < steps => {
                return Err(PikeError::invalid(format!(
                    "rollout of {steps} steps given only {} controls",
                    c.len()
                )))
            }
            None if action_dim > 0 && steps > 0 => {
                return Err(PikeError::invalid(
                    "controlled system rollout requires a control sequence",
                ))
            }
            _ => {}
        }
        let mut traj = Vec::with_capacity(steps + 1);
        traj.push(x0.to_vec());
        for t in 0..steps {
            let u = controls.map_or(&[][..], |c| c.row(t));
            let next = self.predict_state(&traj[t], u)?;
            if !next.iter().all(|v| v.is_finite()) {
                return Err(PikeError::Divergence { step: t + 1 });
            }
            traj.push(next);
        }
        Ok(traj)
    }
}

fn checked_cost(c: &dyn CostFunction, y: &[f64], context: impl FnOnce() -> String) -> Result<f64> {
    let v = c.eval(y);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(PikeError::CostEvaluation { context: context() })
    }
}

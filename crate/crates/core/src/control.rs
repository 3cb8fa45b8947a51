//! One-step stochastic policies over a finite action set, and closed-loop
//! target tracking.
//!
//! For a candidate set `A = {ũ_1, …, ũ_P}` the policy weights minimize the
//! linear program `min γᵀv s.t. 1ᵀγ = 1, γ ⪰ 0`, where `v_j` is the estimated
//! expected cost of taking `ũ_j`. The optimum is the vertex of the simplex at
//! the smallest `v_j`, so the program is solved by an argmin.

use rand::Rng;
use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::dynamics::{Region, SystemSpec};
use crate::embedding::{CostFunction, FittedEmbedding};
use crate::error::{PikeError, Result};
use crate::kernel;
use crate::points::Points;

/// Candidate actions `ũ_j`, one per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSet {
    actions: Points,
}

impl ControlSet {
    pub fn new(actions: Points) -> Result<Self> {
        if actions.is_empty() {
            return Err(PikeError::invalid("control set must contain at least one action"));
        }
        if !actions.is_finite() {
            return Err(PikeError::invalid("control set contains non-finite actions"));
        }
        Ok(Self { actions })
    }

    /// Like [`ControlSet::new`], additionally requiring every action inside `bounds`.
    pub fn bounded(actions: Points, bounds: &Region) -> Result<Self> {
        let set = Self::new(actions)?;
        if let Some(j) = set.actions.iter().position(|u| !bounds.contains(u)) {
            return Err(PikeError::invalid(format!(
                "control set action {j} lies outside the admissible bounds"
            )));
        }
        Ok(set)
    }

    /// Axis-aligned grid over `region` with `shape[k]` points along axis `k`
    /// (endpoints included). Rows vary fastest along the last axis.
    pub fn grid(region: &Region, shape: &[usize]) -> Result<Self> {
        region.validate()?;
        if shape.len() != region.dim() || shape.contains(&0) {
            return Err(PikeError::invalid(format!(
                "grid shape {shape:?} does not match a {}-dimensional region",
                region.dim()
            )));
        }
        let axes: Vec<Vec<f64>> = shape
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let (lo, hi) = (region.lower[k], region.upper[k]);
                if n == 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
                }
            })
            .collect();
        let total: usize = shape.iter().product();
        let mut actions = Points::zeros(total, shape.len());
        for flat in 0..total {
            let mut rem = flat;
            let row = actions.row_mut(flat);
            for k in (0..shape.len()).rev() {
                row[k] = axes[k][rem % shape[k]];
                rem /= shape[k];
            }
        }
        Self::new(actions)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &Points {
        &self.actions
    }

    pub fn action(&self, j: usize) -> &[f64] {
        self.actions.row(j)
    }

    /// The set with `extra` appended as a new last action.
    pub fn with_action(&self, extra: &[f64]) -> Result<Self> {
        let mut actions = self.actions.clone();
        actions.push(extra)?;
        Self::new(actions)
    }
}

/// One-hot solution of the simplex program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyWeights {
    pub gamma: Vec<f64>,
    pub chosen_index: usize,
}

/// Target positions `z_0, …, z_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTrack {
    waypoints: Points,
}

impl TargetTrack {
    pub fn new(waypoints: Points) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(PikeError::invalid("target track needs at least two waypoints"));
        }
        if waypoints.dim() == 0 || !waypoints.is_finite() {
            return Err(PikeError::invalid("target waypoints must be finite and non-empty"));
        }
        Ok(Self { waypoints })
    }

    /// Number of control steps, one per waypoint after the first.
    pub fn horizon(&self) -> usize {
        self.waypoints.len() - 1
    }

    pub fn waypoint(&self, t: usize) -> &[f64] {
        self.waypoints.row(t)
    }

    pub fn waypoints(&self) -> &Points {
        &self.waypoints
    }

    /// Stationary target at `z` for `steps` steps.
    pub fn stationary(z: &[f64], steps: usize) -> Result<Self> {
        let rows = vec![z.to_vec(); steps + 1];
        Self::new(Points::from_rows(&rows)?)
    }

    /// The default moving target: a straight leg from `start` along +x₁,
    /// a left-hand arc of the given radius, then a straight exit leg.
    /// Waypoints are spaced `speed * dt` apart along the path.
    pub fn straight_arc(
        start: [f64; 2],
        lead_in: f64,
        radius: f64,
        sweep: f64,
        speed: f64,
        dt: f64,
        steps: usize,
    ) -> Result<Self> {
        if !(lead_in >= 0.0 && radius > 0.0 && speed > 0.0 && dt > 0.0) {
            return Err(PikeError::invalid(
                "target path requires lead_in >= 0 and positive radius, speed, dt",
            ));
        }
        let arc_len = radius * sweep.abs();
        let point = |s: f64| -> [f64; 2] {
            if s <= lead_in {
                return [start[0] + s, start[1]];
            }
            let cx = start[0] + lead_in;
            let cy = start[1] + radius;
            if s <= lead_in + arc_len {
                let phi = (s - lead_in) / radius;
                return [cx + radius * phi.sin(), cy - radius * phi.cos()];
            }
            let end = [cx + radius * sweep.sin(), cy - radius * sweep.cos()];
            let rest = s - lead_in - arc_len;
            [end[0] + rest * sweep.cos(), end[1] + rest * sweep.sin()]
        };
        let rows: Vec<[f64; 2]> = (0..=steps).map(|t| point(speed * dt * t as f64)).collect();
        Self::new(Points::from_rows(&rows)?)
    }
}

/// Estimated expected cost of every candidate action at state `x`.
///
/// The cost-dependent solve `W (c - c̃)` is done once; the state kernel
/// column `k(x_i, x)` is shared by all candidates, so each additional action
/// costs `O(M)`.
pub fn expected_costs(
    embedding: &FittedEmbedding,
    x: &[f64],
    control_set: &ControlSet,
    c: &dyn CostFunction,
) -> Result<Vec<f64>> {
    let data = embedding.dataset();
    if control_set.actions().dim() != data.action_dim() {
        return Err(PikeError::invalid(format!(
            "control set actions have dimension {}, embedding expects {}",
            control_set.actions().dim(),
            data.action_dim()
        )));
    }
    kernel::check_query(data.states(), data.actions(), x, control_set.action(0))?;

    let weights = embedding.cost_weights(c)?;
    let spec_x = embedding.spec_x();
    let spec_u = embedding.spec_u();
    let state_column: Vec<f64> = data.states().iter().map(|xi| spec_x.eval_unchecked(xi, x)).collect();

    let mut out = Vec::with_capacity(control_set.len());
    for u in control_set.actions().iter() {
        let mut acc = 0.0;
        for ((w, kx), ui) in weights.iter().zip(&state_column).zip(data.actions().iter()) {
            acc += w * (kx * spec_u.eval_unchecked(ui, u));
        }
        out.push(acc + embedding.bias_cost(c, x, u)?);
    }
    Ok(out)
}

/// Argmin of `costs` as one-hot simplex weights; ties go to the lowest index.
pub fn solve_policy(costs: &[f64]) -> Result<PolicyWeights> {
    if costs.is_empty() {
        return Err(PikeError::invalid("policy over an empty control set"));
    }
    if let Some(j) = costs.iter().position(|v| v.is_nan()) {
        return Err(PikeError::invalid(format!("expected cost {j} is NaN")));
    }
    let mut best = 0;
    for (j, v) in costs.iter().enumerate().skip(1) {
        if *v < costs[best] {
            best = j;
        }
    }
    let mut gamma = vec![0.0; costs.len()];
    gamma[best] = 1.0;
    Ok(PolicyWeights {
        gamma,
        chosen_index: best,
    })
}

/// Squared distance between the leading coordinates of `y` and `target`.
pub fn squared_distance(y: &[f64], target: &[f64]) -> f64 {
    y.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackStep {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub chosen_index: usize,
    /// Realized `‖x_{t+1} - z_t‖²` over the target coordinates.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackResult {
    pub initial_state: Vec<f64>,
    pub steps: Vec<TrackStep>,
    /// Wall-clock time of the control loop; reporting only.
    pub wall_clock_ms: f64,
}

impl TrackResult {
    pub fn trajectory(&self) -> Vec<Vec<f64>> {
        std::iter::once(self.initial_state.clone())
            .chain(self.steps.iter().map(|s| s.state.clone()))
            .collect()
    }

    pub fn mean_squared_error(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.cost).sum::<f64>() / self.steps.len() as f64
    }
}

/// Closed-loop tracking: at each step pick the action minimizing the
/// estimated `E‖x_{t+1} - z_t‖²`, then advance the true system.
pub fn track<R: Rng + ?Sized>(
    embedding: &FittedEmbedding,
    system: &SystemSpec,
    x0: &[f64],
    targets: &TargetTrack,
    control_set: &ControlSet,
    rng: &mut R,
) -> Result<TrackResult> {
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(PikeError::invalid("initial state is not finite"));
    }
    if targets.waypoints().dim() > x0.len() {
        return Err(PikeError::invalid("targets have more coordinates than the state"));
    }
    let start = Instant::now();
    let mut x = x0.to_vec();
    let mut steps = Vec::with_capacity(targets.horizon());
    for t in 0..targets.horizon() {
        let z = targets.waypoint(t);
        let cost = |y: &[f64]| squared_distance(y, z);
        let costs = expected_costs(embedding, &x, control_set, &cost)?;
        let policy = solve_policy(&costs)?;
        let u = control_set.action(policy.chosen_index);
        let next = system.true_step(&x, u, rng);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(PikeError::Divergence { step: t + 1 });
        }
        steps.push(TrackStep {
            cost: squared_distance(&next, z),
            state: next.clone(),
            action: u.to_vec(),
            chosen_index: policy.chosen_index,
        });
        x = next;
    }
    Ok(TrackResult {
        initial_state: x0.to_vec(),
        steps,
        wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

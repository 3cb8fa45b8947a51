//! Benchmark systems: true-system samplers, approximate prior models and
//! transition-sample generation.
//!
//! Two systems are provided. The spring-mass-damper `m q̈ = -b q̇ - k q`
//! with state `[q, q̇]` is stepped exactly through the closed-form 2×2
//! matrix exponential; its prior is the same oscillator with `b = 0`. The
//! unicycle `ẋ₁ = u₁ sin x₃, ẋ₂ = u₁ cos x₃, ẋ₃ = u₂` is stepped with
//! semi-implicit Euler (forward Euler on request) and an optional additive
//! exponential disturbance; its prior is the noiseless step of the same
//! scheme.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{PriorModel, TransitionDataset};
use crate::error::{PikeError, Result};
use crate::points::Points;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmdParams {
    pub mass: f64,
    pub damping: f64,
    pub stiffness: f64,
}

impl Default for SmdParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            damping: 0.5,
            stiffness: 2.0,
        }
    }
}

impl SmdParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mass", self.mass), ("stiffness", self.stiffness)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(PikeError::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(PikeError::InvalidParameter {
                name: "damping",
                reason: format!("must be finite and >= 0, got {}", self.damping),
            });
        }
        Ok(())
    }

    pub fn undamped(&self) -> Self {
        Self { damping: 0.0, ..*self }
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        0.5 * self.stiffness * x[0] * x[0] + 0.5 * self.mass * x[1] * x[1]
    }

    /// `exp(A dt)` for `A = [[0, 1], [-k/m, -b/m]]`, row-major.
    pub fn transition_matrix(&self, dt: f64) -> [[f64; 2]; 2] {
        let a10 = -self.stiffness / self.mass;
        let a11 = -self.damping / self.mass;
        // exp(At) = e^{st} [(C - s S) I + S A] with s = tr(A)/2 and
        // C, S the cosine/sine-like functions of the eigenvalue split.
        let s = 0.5 * a11;
        let disc = s * s + a10;
        let (c, sh) = if disc > 0.0 {
            let q = disc.sqrt();
            ((q * dt).cosh(), (q * dt).sinh() / q)
        } else if disc < 0.0 {
            let w = (-disc).sqrt();
            ((w * dt).cos(), (w * dt).sin() / w)
        } else {
            (1.0, dt)
        };
        let e = (s * dt).exp();
        let diag = c - s * sh;
        [[e * diag, e * sh], [e * sh * a10, e * (diag + sh * a11)]]
    }
}

/// Exact discrete step of the damped oscillator.
pub fn smd_true_step(params: &SmdParams, dt: f64, x: &[f64]) -> [f64; 2] {
    let t = params.transition_matrix(dt);
    [t[0][0] * x[0] + t[0][1] * x[1], t[1][0] * x[0] + t[1][1] * x[1]]
}

/// Exact discrete step of the undamped oscillator, the SMD prior model.
pub fn smd_prior_step(params: &SmdParams, dt: f64, x: &[f64]) -> [f64; 2] {
    smd_true_step(&params.undamped(), dt, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Exponential,
}

/// Additive disturbance `gain · w` with `w ~ Exp(rate)` on each listed coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub rate: f64,
    pub applied_to: Vec<usize>,
    #[serde(default = "unit_gain")]
    pub gain: f64,
}

fn unit_gain() -> f64 {
    1.0
}

impl NoiseSpec {
    pub fn exponential(rate: f64, applied_to: Vec<usize>) -> Self {
        Self {
            family: NoiseFamily::Exponential,
            rate,
            applied_to,
            gain: 1.0,
        }
    }

    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(PikeError::InvalidParameter {
                name: "noise_rate",
                reason: format!("must be finite and > 0, got {}", self.rate),
            });
        }
        if !(self.gain.is_finite() && self.gain >= 0.0) {
            return Err(PikeError::InvalidParameter {
                name: "noise_gain",
                reason: format!("must be finite and >= 0, got {}", self.gain),
            });
        }
        if let Some(&i) = self.applied_to.iter().find(|&&i| i >= state_dim) {
            return Err(PikeError::InvalidParameter {
                name: "noise_coordinates",
                reason: format!("coordinate {i} out of range for a {state_dim}-dimensional state"),
            });
        }
        Ok(())
    }
}

/// Inverse-CDF draw `-ln(1 - U) / rate` for a given `U ∈ [0, 1)`.
pub fn exponential_from_uniform(rate: f64, uniform: f64) -> f64 {
    // + 0.0 turns the -0.0 produced at U = 0 into +0.0
    -(-uniform).ln_1p() / rate + 0.0
}

pub fn sample_exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    exponential_from_uniform(rate, rng.gen::<f64>())
}

/// Time discretization of the unicycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnicycleScheme {
    /// Position advanced with the heading at the start of the step.
    ForwardEuler,
    /// Heading advanced first, position advanced with the new heading.
    /// Steering then acts on the position within one step.
    #[default]
    SemiImplicitEuler,
}

/// Unicycle step with optional additive disturbance.
///
/// Both schemes move the position by exactly `|u₁| dt` before noise.
pub fn unicycle_step<R: Rng + ?Sized>(
    scheme: UnicycleScheme,
    dt: f64,
    x: &[f64],
    u: &[f64],
    noise: Option<&NoiseSpec>,
    rng: &mut R,
) -> [f64; 3] {
    let heading = x[2] + dt * u[1];
    let steer = match scheme {
        UnicycleScheme::ForwardEuler => x[2],
        UnicycleScheme::SemiImplicitEuler => heading,
    };
    let mut next = [x[0] + dt * u[0] * steer.sin(), x[1] + dt * u[0] * steer.cos(), heading];
    if let Some(noise) = noise {
        for &i in &noise.applied_to {
            next[i] += noise.gain * sample_exponential(noise.rate, rng);
        }
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SystemKind {
    Smd(SmdParams),
    Unicycle {
        #[serde(default)]
        scheme: UnicycleScheme,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub kind: SystemKind,
    pub dt: f64,
    pub noise: Option<NoiseSpec>,
}

impl SystemSpec {
    pub fn smd(params: SmdParams, dt: f64) -> Self {
        Self {
            kind: SystemKind::Smd(params),
            dt,
            noise: None,
        }
    }

    pub fn unicycle(dt: f64, noise: Option<NoiseSpec>) -> Self {
        Self {
            kind: SystemKind::Unicycle {
                scheme: UnicycleScheme::default(),
            },
            dt,
            noise,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SystemKind::Smd(_) => "smd",
            SystemKind::Unicycle { .. } => "unicycle",
        }
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            SystemKind::Smd(_) => 2,
            SystemKind::Unicycle { .. } => 3,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self.kind {
            SystemKind::Smd(_) => 0,
            SystemKind::Unicycle { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(PikeError::InvalidParameter {
                name: "dt",
                reason: format!("must be finite and > 0, got {}", self.dt),
            });
        }
        if let SystemKind::Smd(p) = &self.kind {
            p.validate()?;
        }
        if let Some(noise) = &self.noise {
            noise.validate(self.state_dim())?;
        }
        Ok(())
    }

    /// One step of the true (possibly stochastic) system.
    pub fn true_step<R: Rng + ?Sized>(&self, x: &[f64], u: &[f64], rng: &mut R) -> Vec<f64> {
        match &self.kind {
            SystemKind::Smd(p) => {
                let mut y = smd_true_step(p, self.dt, x).to_vec();
                if let Some(noise) = &self.noise {
                    for &i in &noise.applied_to {
                        y[i] += noise.gain * sample_exponential(noise.rate, rng);
                    }
                }
                y
            }
            SystemKind::Unicycle { scheme } => unicycle_step(*scheme, self.dt, x, u, self.noise.as_ref(), rng).to_vec(),
        }
    }

    /// The approximate model handed to the physics-informed estimator.
    pub fn prior(&self) -> SystemPrior {
        SystemPrior {
            kind: self.kind,
            dt: self.dt,
        }
    }

    pub fn without_noise(&self) -> Self {
        Self {
            noise: None,
            ..self.clone()
        }
    }
}

/// Deterministic approximate dynamics derived from a [`SystemSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemPrior {
    pub kind: SystemKind,
    pub dt: f64,
}

impl PriorModel for SystemPrior {
    fn predict(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        match &self.kind {
            SystemKind::Smd(p) => smd_prior_step(p, self.dt, x).to_vec(),
            SystemKind::Unicycle { scheme } => {
                // the rng is never drawn from without noise
                unicycle_step::<ChaCha8Rng>(*scheme, self.dt, x, u, None, &mut ChaCha8Rng::seed_from_u64(0)).to_vec()
            }
        }
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let r = Self { lower, upper };
        r.validate()?;
        Ok(r)
    }

    pub fn square(lo: f64, hi: f64, dim: usize) -> Self {
        Self {
            lower: vec![lo; dim],
            upper: vec![hi; dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() {
            return Err(PikeError::invalid("region bounds have different dimensions"));
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u))
        {
            return Err(PikeError::invalid(
                "region requires finite lower <= upper on every axis",
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower.iter().zip(&self.upper).all(|(l, u)| l == u)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| l + (u - l) * rng.gen::<f64>())
            .collect()
    }
}

/// Draws `m` i.i.d. transitions: states uniform in `state_region`, actions
/// uniform in `action_region`, next states from one true-system step.
///
/// One `u64` is drawn from `rng`; row `i` then uses its own ChaCha stream
/// `i` under that seed, so rows are independent of evaluation order.
pub fn sample_transitions<R: Rng + ?Sized>(
    system: &SystemSpec,
    state_region: &Region,
    action_region: Option<&Region>,
    m: usize,
    rng: &mut R,
) -> Result<TransitionDataset> {
    system.validate()?;
    state_region.validate()?;
    if m == 0 {
        return Err(PikeError::invalid("sample size must be at least 1"));
    }
    if state_region.dim() != system.state_dim() {
        return Err(PikeError::invalid(format!(
            "state region has dimension {}, system state has {}",
            state_region.dim(),
            system.state_dim()
        )));
    }
    let action_dim = system.action_dim();
    match action_region {
        Some(r) => {
            r.validate()?;
            if r.dim() != action_dim {
                return Err(PikeError::invalid(format!(
                    "action region has dimension {}, system action has {action_dim}",
                    r.dim()
                )));
            }
            if r.is_degenerate() && action_dim > 0 {
                warn!("action region is a single point");
            }
        }
        None if action_dim > 0 => {
            return Err(PikeError::invalid("controlled system requires an action region"));
        }
        None => {}
    }
    if state_region.is_degenerate() {
        warn!("state region is a single point; every sampled state is identical");
    }

    let base: u64 = rng.gen();
    let draw_row = |i: usize| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut row_rng = ChaCha8Rng::seed_from_u64(base);
        row_rng.set_stream(i as u64);
        let x = state_region.sample(&mut row_rng);
        let u = action_region.map_or_else(Vec::new, |r| r.sample(&mut row_rng));
        let y = system.true_step(&x, &u, &mut row_rng);
        (x, u, y)
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<_> = {
        use rayon::prelude::*;
        (0..m).into_par_iter().map(draw_row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<_> = (0..m).map(draw_row).collect();

    let d = system.state_dim();
    let mut states = Vec::with_capacity(m * d);
    let mut actions = Vec::with_capacity(m * action_dim);
    let mut next = Vec::with_capacity(m * d);
    for (x, u, y) in rows {
        states.extend(x);
        actions.extend(u);
        next.extend(y);
    }
    TransitionDataset::new(
        Points::from_flat(m, d, states)?,
        Points::from_flat(m, action_dim, actions)?,
        Points::from_flat(m, d, next)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rk4_reference(p: &SmdParams, dt: f64, x: [f64; 2], substeps: usize) -> [f64; 2] {
        let f = |s: [f64; 2]| [s[1], (-p.damping * s[1] - p.stiffness * s[0]) / p.mass];
        let h = dt / substeps as f64;
        let mut s = x;
        for _ in 0..substeps {
            let k1 = f(s);
            let k2 = f([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
            let k3 = f([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
            let k4 = f([s[0] + h * k3[0], s[1] + h * k3[1]]);
            for j in 0..2 {
                s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        s
    }

    #[test]
    fn smd_step_matches_fine_integration() {
        let p = SmdParams {
            mass: 1.0,
            stiffness: 1.0,
            damping: 0.5,
        };
        let exact = smd_true_step(&p, 0.1, &[0.1, 0.1]);
        let reference = rk4_reference(&p, 0.1, [0.1, 0.1], 1000);
        assert_abs_diff_eq!(exact[0], reference[0], epsilon = 1e-8);
        assert_abs_diff_eq!(exact[1], reference[1], epsilon = 1e-8);

        // overdamped and critically damped branches
        for damping in [3.0, 2.0] {
            let p = SmdParams { damping, ..p };
            let exact = smd_true_step(&p, 0.1, &[0.1, -0.05]);
            let reference = rk4_reference(&p, 0.1, [0.1, -0.05], 1000);
            assert_abs_diff_eq!(exact[0], reference[0], epsilon = 1e-8);
            assert_abs_diff_eq!(exact[1], reference[1], epsilon = 1e-8);
        }
    }

    #[test]
    fn smd_equilibrium_and_energy() {
        let p = SmdParams::default();
        assert_eq!(smd_true_step(&p, 0.1, &[0.0, 0.0]), [0.0, 0.0]);
        assert_eq!(smd_prior_step(&p, 0.1, &[0.0, 0.0]), [0.0, 0.0]);

        let x = [0.1, -0.07];
        let e0 = p.energy(&x);
        assert!(p.energy(&smd_true_step(&p, 0.1, &x)) < e0);
        assert_abs_diff_eq!(p.energy(&smd_prior_step(&p, 0.1, &x)), e0, epsilon = 1e-12);

        let undamped = p.undamped();
        let a = smd_true_step(&undamped, 0.1, &x);
        let b = smd_prior_step(&p, 0.1, &x);
        assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-12);
        assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-12);
    }

    #[test]
    fn unicycle_noiseless_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [0.3, -0.2, 1.1];
        for scheme in [UnicycleScheme::ForwardEuler, UnicycleScheme::SemiImplicitEuler] {
            assert_eq!(unicycle_step(scheme, 0.1, &x, &[0.0, 0.0], None, &mut rng), x);
            let y = unicycle_step(scheme, 0.1, &[0.5, 0.5, 0.0], &[1.0, 0.0], None, &mut rng);
            assert_eq!(y, [0.5, 0.6, 0.0]);
        }
        // steering reaches the position only under the semi-implicit scheme
        let fe = unicycle_step(
            UnicycleScheme::ForwardEuler,
            0.1,
            &[0.0, 0.0, 0.0],
            &[1.0, 5.0],
            None,
            &mut rng,
        );
        let si = unicycle_step(
            UnicycleScheme::SemiImplicitEuler,
            0.1,
            &[0.0, 0.0, 0.0],
            &[1.0, 5.0],
            None,
            &mut rng,
        );
        assert_eq!(fe[0], 0.0);
        assert!(si[0] > 0.04);
        assert_eq!(fe[2], si[2]);
    }

    #[test]
    fn unicycle_disturbance_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = NoiseSpec::exponential(0.1, vec![0]);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| {
                unicycle_step(
                    UnicycleScheme::default(),
                    0.1,
                    &[0.0, 0.0, 0.0],
                    &[0.0, 0.0],
                    Some(&noise),
                    &mut rng,
                )[0]
            })
            .sum::<f64>()
            / n as f64;
        // standard error of the mean is (1/α)/√n
        let se = 10.0 / (n as f64).sqrt();
        assert!((mean - 10.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn exponential_inverse_cdf() {
        assert_eq!(exponential_from_uniform(0.1, 0.0), 0.0);
        assert!(exponential_from_uniform(0.1, 0.0).is_sign_positive());
        let u = 1.0 - (-1.0f64).exp();
        assert_abs_diff_eq!(exponential_from_uniform(1.0, u), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn exponential_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_exponential(0.1, &mut rng)).collect();
        assert!(draws.iter().all(|&v| v >= 0.0));
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 100.0).abs() < 10.0, "variance {var}");
    }

    #[test]
    fn degenerate_region_forces_transition() {
        let sys = SystemSpec::smd(SmdParams::default(), 0.1);
        let region = Region::new(vec![0.05, -0.02], vec![0.05, -0.02]).unwrap();
        let ds = sample_transitions(&sys, &region, None, 1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(ds.states().row(0), &[0.05, -0.02]);
        assert_eq!(
            ds.next_states().row(0),
            &smd_true_step(&SmdParams::default(), 0.1, &[0.05, -0.02])
        );
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let sys = SystemSpec::unicycle(0.1, Some(NoiseSpec::exponential(0.1, vec![0, 1, 2])));
        let sr = Region::new(vec![-1.0, -1.0, 0.0], vec![1.0, 1.0, 3.0]).unwrap();
        let ar = Region::new(vec![0.2, -10.1], vec![1.5, 10.1]).unwrap();
        let a = sample_transitions(&sys, &sr, Some(&ar), 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_transitions(&sys, &sr, Some(&ar), 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.actions().iter().all(|u| ar.contains(u)));
    }

    #[test]
    fn smd_full_region_sample() {
        let sys = SystemSpec::smd(SmdParams::default(), 0.1);
        let region = Region::square(-0.15, 0.15, 2);
        let ds = sample_transitions(&sys, &region, None, 500, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(ds.len(), 500);
        assert_eq!(ds.action_dim(), 0);
        assert!(ds.states().iter().all(|x| region.contains(x)));
        assert!(ds.next_states().is_finite());
    }

    #[test]
    fn rejects_invalid_systems() {
        let bad = SystemSpec::smd(
            SmdParams {
                mass: -1.0,
                ..SmdParams::default()
            },
            0.1,
        );
        assert!(bad.validate().is_err());
        assert!(SystemSpec::smd(SmdParams::default(), 0.0).validate().is_err());
        let sys = SystemSpec::unicycle(0.1, None);
        let sr = Region::square(-1.0, 1.0, 3);
        assert!(sample_transitions(&sys, &sr, None, 5, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}

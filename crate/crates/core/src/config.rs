//! Flat, typed configuration shared by the CLI and the experiments.
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected at parse time.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::control::{ControlSet, TargetTrack};
use crate::dynamics::{NoiseSpec, Region, SmdParams, SystemSpec, UnicycleScheme};
use crate::embedding::EmbeddingMode;
use crate::error::{PikeError, Result};
use crate::kernel::KernelSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemName {
    Smd,
    Unicycle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub trials: usize,
    /// System used by `fit`, `predict` and `control`.
    pub system: SystemName,
    pub mode: EmbeddingMode,
    /// Sample size used by `fit`.
    pub samples: usize,
    /// Rollout length used by `predict`.
    pub steps: usize,
    pub x0: Vec<f64>,

    pub smd_mass: f64,
    pub smd_damping: f64,
    pub smd_stiffness: f64,
    pub smd_dt: f64,
    pub smd_sigma: f64,
    pub smd_lambda: f64,
    pub smd_steps: usize,
    pub smd_x0: Vec<f64>,
    pub smd_phase_sizes: Vec<usize>,
    pub smd_limited_region: [f64; 2],
    pub smd_full_region: [f64; 2],
    pub smd_sweep_sizes: Vec<usize>,
    pub smd_sweep_initial_states: usize,
    pub smd_sweep_initial_region: [f64; 2],

    pub unicycle_dt: f64,
    pub unicycle_scheme: UnicycleScheme,
    pub noise_rate: f64,
    pub noise_gain: f64,
    pub noise_coordinates: Vec<usize>,
    pub tracking_sigma: f64,
    pub tracking_sigma_u: f64,
    pub tracking_lambda: f64,
    pub tracking_samples: usize,
    pub tracking_large_samples: usize,
    pub tracking_steps: usize,
    pub tracking_x0: Vec<f64>,
    pub tracking_state_lower: Vec<f64>,
    pub tracking_state_upper: Vec<f64>,
    pub action_lower: Vec<f64>,
    pub action_upper: Vec<f64>,
    pub control_set_lower: Vec<f64>,
    pub control_set_upper: Vec<f64>,
    pub control_grid: Vec<usize>,
    pub target_lead_in: f64,
    pub target_radius: f64,
    pub target_sweep: f64,
    pub target_speed: f64,
}

impl Default for Config {
    fn default() -> Self {
        let smd = SmdParams::default();
        Self {
            seed: 0,
            trials: 10,
            system: SystemName::Smd,
            mode: EmbeddingMode::PhysicsInformed,
            samples: 500,
            steps: 100,
            x0: vec![0.1, 0.1],

            smd_mass: smd.mass,
            smd_damping: smd.damping,
            smd_stiffness: smd.stiffness,
            smd_dt: 0.1,
            smd_sigma: 0.2,
            smd_lambda: 1e-7,
            smd_steps: 100,
            smd_x0: vec![0.1, 0.1],
            smd_phase_sizes: vec![10, 50, 100, 500],
            smd_limited_region: [0.0, 0.15],
            smd_full_region: [-0.15, 0.15],
            smd_sweep_sizes: vec![
                5, 10, 20, 50, 75, 100, 200, 300, 400, 500, 600, 700, 800, 900, 1000, 1250, 1500, 2000, 2500, 5000,
            ],
            smd_sweep_initial_states: 100,
            smd_sweep_initial_region: [-0.1, 0.1],

            unicycle_dt: 0.1,
            unicycle_scheme: UnicycleScheme::SemiImplicitEuler,
            noise_rate: 0.1,
            noise_gain: 0.001,
            noise_coordinates: vec![0, 1, 2],
            tracking_sigma: 0.75,
            tracking_sigma_u: 0.75,
            tracking_lambda: 1e-3,
            tracking_samples: 500,
            tracking_large_samples: 5000,
            tracking_steps: 60,
            tracking_x0: vec![-1.0, 0.0, FRAC_PI_2],
            tracking_state_lower: vec![-1.3, -0.5, -0.5],
            tracking_state_upper: vec![0.5, 1.0, 2.5],
            action_lower: vec![0.2, -10.1],
            action_upper: vec![1.5, 10.1],
            control_set_lower: vec![0.2, -10.1],
            control_set_upper: vec![1.2, 10.1],
            control_grid: vec![10, 21],
            target_lead_in: 0.6,
            target_radius: 0.7,
            target_sweep: 1.5,
            target_speed: 0.5,
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(PikeError::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {v}"),
        })
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(PikeError::InvalidParameter {
                name: "trials",
                reason: "must be at least 1".into(),
            });
        }
        if self.samples == 0 || self.tracking_samples == 0 || self.tracking_large_samples == 0 {
            return Err(PikeError::InvalidParameter {
                name: "samples",
                reason: "sample sizes must be at least 1".into(),
            });
        }
        for (name, sizes) in [
            ("smd_phase_sizes", &self.smd_phase_sizes),
            ("smd_sweep_sizes", &self.smd_sweep_sizes),
        ] {
            if sizes.is_empty() || sizes.contains(&0) {
                return Err(PikeError::InvalidParameter {
                    name,
                    reason: "must be a nonempty list of positive sizes".into(),
                });
            }
        }
        positive("smd_sigma", self.smd_sigma)?;
        positive("tracking_sigma", self.tracking_sigma)?;
        positive("tracking_sigma_u", self.tracking_sigma_u)?;
        if self.smd_lambda <= 0.0 || !self.smd_lambda.is_finite() {
            return Err(PikeError::InvalidRegularizer(self.smd_lambda));
        }
        if self.tracking_lambda <= 0.0 || !self.tracking_lambda.is_finite() {
            return Err(PikeError::InvalidRegularizer(self.tracking_lambda));
        }
        positive("target_speed", self.target_speed)?;
        positive("target_radius", self.target_radius)?;
        self.smd_system().validate()?;
        self.unicycle_system().validate()?;
        self.tracking_state_region()?;
        self.action_region()?;
        self.control_set()?;
        if self.smd_x0.len() != 2 {
            return Err(PikeError::invalid("smd_x0 must have 2 entries"));
        }
        if self.tracking_x0.len() != 3 {
            return Err(PikeError::invalid("tracking_x0 must have 3 entries"));
        }
        Ok(())
    }

    pub fn smd_params(&self) -> SmdParams {
        SmdParams {
            mass: self.smd_mass,
            damping: self.smd_damping,
            stiffness: self.smd_stiffness,
        }
    }

    pub fn smd_system(&self) -> SystemSpec {
        SystemSpec::smd(self.smd_params(), self.smd_dt)
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            gain: self.noise_gain,
            ..NoiseSpec::exponential(self.noise_rate, self.noise_coordinates.clone())
        }
    }

    pub fn unicycle_system(&self) -> SystemSpec {
        let mut sys = SystemSpec::unicycle(self.unicycle_dt, Some(self.noise()));
        sys.kind = crate::dynamics::SystemKind::Unicycle {
            scheme: self.unicycle_scheme,
        };
        sys
    }

    pub fn system_spec(&self) -> SystemSpec {
        match self.system {
            SystemName::Smd => self.smd_system(),
            SystemName::Unicycle => self.unicycle_system(),
        }
    }

    pub fn smd_region(bounds: [f64; 2]) -> Result<Region> {
        Region::new(vec![bounds[0]; 2], vec![bounds[1]; 2])
    }

    pub fn tracking_state_region(&self) -> Result<Region> {
        Region::new(self.tracking_state_lower.clone(), self.tracking_state_upper.clone())
    }

    pub fn action_region(&self) -> Result<Region> {
        Region::new(self.action_lower.clone(), self.action_upper.clone())
    }

    pub fn control_set(&self) -> Result<ControlSet> {
        let region = Region::new(self.control_set_lower.clone(), self.control_set_upper.clone())?;
        let set = ControlSet::grid(&region, &self.control_grid)?;
        ControlSet::bounded(set.actions().clone(), &self.action_region()?)
    }

    pub fn target_track(&self) -> Result<TargetTrack> {
        TargetTrack::straight_arc(
            [self.tracking_x0[0], self.tracking_x0[1]],
            self.target_lead_in,
            self.target_radius,
            self.target_sweep,
            self.target_speed,
            self.unicycle_dt,
            self.tracking_steps,
        )
    }

    /// State and action kernels for the configured `system`.
    pub fn kernels(&self) -> Result<(KernelSpec, KernelSpec)> {
        match self.system {
            SystemName::Smd => Ok((KernelSpec::gaussian(self.smd_sigma)?, KernelSpec::constant_one())),
            SystemName::Unicycle => Ok((
                KernelSpec::gaussian(self.tracking_sigma)?,
                KernelSpec::gaussian(self.tracking_sigma_u)?,
            )),
        }
    }

    pub fn lambda(&self) -> f64 {
        match self.system {
            SystemName::Smd => self.smd_lambda,
            SystemName::Unicycle => self.tracking_lambda,
        }
    }

    /// Stable 64-bit FNV-1a digest of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

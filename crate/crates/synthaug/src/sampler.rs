//! Unadjusted Langevin dynamics in latent space.
//!
//! Chains target densities of the form exp(c(z)) p0(z) where p0 is isotropic
//! Gaussian and c is a correction term: the conditional class logit F(z)[y],
//! the negative free energy f(z), or an injected closed-form test energy.
//! The update is z ← z + s·∇[c(z) − ‖z‖²/2] + √(2sT)·ε with temperature T;
//! T = 1 is the standard dynamics, T = 0 is deterministic gradient ascent.

use rand::Rng;

use crate::error::{contract, Error, Result};
use crate::model::ModelParams;
use crate::numkernel::normal;

/// Chain length, discretization step and temperature for one MCMC variant.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LangevinConfig {
    pub steps: usize,
    pub step_size: f64,
    pub temperature: f64,
}

impl LangevinConfig {
    pub fn new(steps: usize, step_size: f64, temperature: f64) -> Result<Self> {
        let cfg = Self {
            steps,
            step_size,
            temperature,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(contract("langevin steps must be >= 1"));
        }
        // step_size == 0 is permitted: the chain is then the identity, which
        // doubles as the null-dynamics fixture.
        if !(self.step_size >= 0.0) {
            return Err(contract("langevin step size must be non-negative"));
        }
        if !(self.temperature >= 0.0) {
            return Err(contract("langevin temperature must be non-negative"));
        }
        Ok(())
    }
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self {
            steps: 30,
            step_size: 0.05,
            temperature: 1.0,
        }
    }
}

/// Final chain state plus the per-step target log-density (up to a constant).
#[derive(Debug, Clone)]
pub struct ChainResult {
    pub final_z: Vec<f64>,
    pub energy_trace: Vec<f64>,
}

/// Correction term of the target density: value and z-gradient of c(z).
/// The Gaussian reference −‖z‖²/2 is added by the integrator, not here.
pub trait DriftProvider {
    fn correction_and_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Injectable closed-form test energy c(z) = −a‖z‖²/2. The full target is
/// then N(0, I/(1+a)) per coordinate.
pub struct QuadraticTestEnergy {
    pub a: f64,
}

impl DriftProvider for QuadraticTestEnergy {
    fn correction_and_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        let sq: f64 = z.iter().map(|v| v * v).sum();
        Ok((-self.a * sq / 2.0, z.iter().map(|v| -self.a * v).collect()))
    }
}

struct ConditionalLogit<'a> {
    params: &'a ModelParams,
    label: usize,
}

impl DriftProvider for ConditionalLogit<'_> {
    fn correction_and_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.params.conditional_logit_grad_z(z, self.label)
    }
}

struct FreeEnergy<'a> {
    params: &'a ModelParams,
}

impl DriftProvider for FreeEnergy<'_> {
    fn correction_and_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.params.free_energy_grad_z(z)
    }
}

const DIVERGENCE_NORM: f64 = 1e6;

/// Runs an unadjusted Langevin chain against an arbitrary drift provider.
/// This is the injection seam used to verify the integrator against
/// closed-form stationary distributions.
pub fn langevin_chain(
    drift: &impl DriftProvider,
    z0: &[f64],
    cfg: &LangevinConfig,
    rng: &mut impl Rng,
) -> Result<ChainResult> {
    cfg.validate()?;
    if !z0.iter().all(|v| v.is_finite()) {
        return Err(contract("langevin initial state must be finite"));
    }
    let noise_scale = (2.0 * cfg.step_size * cfg.temperature).sqrt();
    let mut z = z0.to_vec();
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let (c, grad_c) = drift.correction_and_grad(&z)?;
        let sq: f64 = z.iter().map(|v| v * v).sum();
        trace.push(c - sq / 2.0);
        for i in 0..z.len() {
            // drift of log target: ∇c(z) − z
            z[i] += cfg.step_size * (grad_c[i] - z[i]);
            if noise_scale > 0.0 {
                z[i] += noise_scale * normal(rng);
            }
        }
        let norm = crate::numkernel::l2_norm(&z);
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(Error::ChainDiverged { step, norm });
        }
    }
    Ok(ChainResult {
        final_z: z,
        energy_trace: trace,
    })
}

/// Conditional chain targeting exp(F(z)[y]) p0(z).
pub fn langevin_conditional(
    params: &ModelParams,
    y: usize,
    z0: &[f64],
    cfg: &LangevinConfig,
    rng: &mut impl Rng,
) -> Result<ChainResult> {
    if y >= params.num_classes {
        return Err(contract(format!(
            "label {y} out of range for K = {}",
            params.num_classes
        )));
    }
    langevin_chain(&ConditionalLogit { params, label: y }, z0, cfg, rng)
}

/// Unconditional chain targeting p(z) ∝ exp(f(z)) p0(z).
pub fn langevin_prior(
    params: &ModelParams,
    z0: &[f64],
    cfg: &LangevinConfig,
    rng: &mut impl Rng,
) -> Result<ChainResult> {
    langevin_chain(&FreeEnergy { params }, z0, cfg, rng)
}

/// Zero-temperature conditional dynamics: deterministic gradient ascent on
/// F(z)[y] − ‖z‖²/2.
pub fn tempered_descent(
    params: &ModelParams,
    y: usize,
    z0: &[f64],
    cfg: &LangevinConfig,
    rng: &mut impl Rng,
) -> Result<ChainResult> {
    if cfg.temperature != 0.0 {
        return Err(contract("tempered_descent requires temperature == 0"));
    }
    langevin_conditional(params, y, z0, cfg, rng)
}

//! Mass-on-car tracking setups: `y_ref = 0.4 sin(πt/2)`, constant tolerance
//! `ψ = 0.08`, `λ = 0.7`, horizon `[0, 2]`.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::controller::{ControlError, ControlLawConfig, Variant};
use crate::plant::{LinearIOPlant, MassOnCar, PlantError};
use crate::signals::{FunnelSpec, ReferenceSpec};
use crate::sim::{compare_variants, simulate, SimConfig, SimError, Trace, VariantComparison};

pub const TOLERANCE: f64 = 0.08;
pub const LAMBDA: f64 = 0.7;
pub const HORIZON: f64 = 2.0;

/// `(β, τ)` at fine sampling.
pub const FINE: (f64, f64) = (25.2, 1.8e-3);
/// `(β, τ)` with a smaller gain and forty times slower sampling.
pub const COARSE: (f64, f64) = (5.0, 0.07);

/// How the internal state of the plant is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InternalStart {
    /// On the periodic orbit forced by the reference.
    #[default]
    ReferencePeriodic,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchmarkError {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub plant: LinearIOPlant,
    pub reference: ReferenceSpec,
    pub funnel: FunnelSpec,
    pub law: ControlLawConfig,
    pub sim: SimConfig,
}

pub fn reference() -> ReferenceSpec {
    ReferenceSpec::sinusoid(0.4, FRAC_PI_2)
}

impl Benchmark {
    pub fn new(
        car: MassOnCar,
        beta: f64,
        tau: f64,
        start: InternalStart,
    ) -> Result<Self, BenchmarkError> {
        let reference = reference();
        let plant = car.io_plant()?;
        let plant = match start {
            InternalStart::ReferencePeriodic => {
                let eta0 = plant.reference_periodic_internal(&reference)?;
                plant.with_initial_internal(eta0)?
            }
            InternalStart::Zero => plant,
        };
        let law = ControlLawConfig::new(beta, LAMBDA, Variant::DerivativeFree)?;
        Ok(Benchmark {
            plant,
            reference,
            funnel: FunnelSpec::constant(TOLERANCE).expect("positive tolerance"),
            law,
            sim: SimConfig::new(tau, HORIZON),
        })
    }

    pub fn fine() -> Self {
        Self::new(
            MassOnCar::default(),
            FINE.0,
            FINE.1,
            InternalStart::default(),
        )
        .expect("default parameters are valid")
    }

    pub fn coarse() -> Self {
        Self::new(
            MassOnCar::default(),
            COARSE.0,
            COARSE.1,
            InternalStart::default(),
        )
        .expect("default parameters are valid")
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.sim.tau = tau;
        self
    }

    pub fn simulate(&self, variant: Variant) -> Result<Trace, SimError> {
        simulate(
            &self.plant,
            &self.reference,
            &self.funnel,
            &self.law.with_variant(variant),
            &self.sim,
        )
    }

    pub fn compare(&self) -> Result<VariantComparison, SimError> {
        compare_variants(
            &self.plant,
            &self.reference,
            &self.funnel,
            &self.law,
            &self.sim,
        )
    }
}

//! Derivative-free sampled-data output feedback with prescribed tracking
//! performance for relative-degree-two systems.
//!
//! The controller reads the output only at sampling instants `t_k = kτ`,
//! holds its input constant in between, and replaces the output derivative by
//! a backward difference. Given worst-case plant constants, [`design`]
//! produces the gain `β` and a sampling period `τ_max` under which the
//! tracking error provably stays inside the funnel `φ(t)‖e(t)‖ < 1`;
//! [`sim`] runs the closed loop and [`verify`] audits the resulting traces.
//!
//! ```
//! use zoh_funnel::controller::{ControlLawConfig, Variant};
//! use zoh_funnel::plant::MassOnCar;
//! use zoh_funnel::signals::{FunnelSpec, ReferenceSpec};
//! use zoh_funnel::sim::{simulate, SimConfig};
//!
//! let plant = MassOnCar::default().io_plant().unwrap();
//! let reference = ReferenceSpec::sinusoid(0.4, std::f64::consts::FRAC_PI_2);
//! let funnel = FunnelSpec::constant(0.08).unwrap();
//! let law = ControlLawConfig::new(25.2, 0.7, Variant::DerivativeFree).unwrap();
//! let trace = simulate(&plant, &reference, &funnel, &law, &SimConfig::new(1.8e-3, 0.2)).unwrap();
//! assert!(trace.is_feasible());
//! assert!(trace.input_max() <= 25.2 / 0.7);
//! ```

pub mod benchmark;
pub mod controller;
pub mod design;
mod linalg;
pub mod plant;
pub mod signals;
pub mod sim;
pub mod verify;

pub use linalg::{is_hurwitz, min_symmetric_eigenvalue, spectral_norm};

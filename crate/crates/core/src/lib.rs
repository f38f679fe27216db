//! Device-level simulation and keep-out-zone (KOZ) rule engine for metal
//! inter-layer vias (MIVs) placed next to transistors in stacked-tier
//! integration.
//!
//! The crate is organised bottom-up:
//!
//! * [`process`] — process corners, device geometry, placement scenarios,
//!   and layout construction.
//! * [`mesh`] — tensor-product finite-volume meshes with interface
//!   refinement and doping fields.
//! * [`solver`] — coupled Poisson / drift-diffusion solver with
//!   Scharfetter–Gummel fluxes and Gummel iteration.
//! * [`metrics`] — on/leakage metric extraction, baseline comparison, and
//!   parallel parameter sweeps.
//! * [`koz`] — keep-out-zone extraction, rule tables, lookup, and the
//!   floorplan checker.
//! * [`config`] — strict JSON configuration parsing with unit-suffixed
//!   scalars.
//!
//! All numerical kernels are deterministic: identical inputs produce
//! byte-identical outputs regardless of worker count.

pub mod config;
pub mod error;
pub mod koz;
pub mod mesh;
pub mod metrics;
pub mod process;
pub mod solver;
pub mod units;

pub use error::{Error, Result};

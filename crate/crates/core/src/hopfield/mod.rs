//! Layered continuous Hopfield networks and hierarchical associative memories.

pub mod architecture;
pub mod checkpoint;
pub mod deq;
pub mod energy;
pub mod even_odd;
pub mod maps;
pub mod nonlinearity;
pub mod params;
pub mod random;
pub mod sigma;

pub use architecture::{Architecture, StateLayout};
pub use deq::{chn_deq_map, chn_deq_map_with_drive, deq_map_with_drive, ham_deq_map, ham_deq_map_with_drive};
pub use energy::{chn_velocity, energy, energy_chn, energy_ham, ham_velocity, velocity};
pub use even_odd::{build_even_odd, Coupling, EvenOddOperator, FusedStep};
pub use maps::{HopfieldMap, MapKind};
pub use nonlinearity::{lagrangian_sum, rho_prime_vec, rho_vec, Nonlinearity};
pub use params::{InputDrive, ModelParams, ParamGrads, Variant};
pub use sigma::{ham_sigma_map, sigma, SigmaTransform};

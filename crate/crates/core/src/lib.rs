//! Exact verification of the universal norm distribution, its resolutions,
//! the canonical basis of `H^0(G_z, U_z/MU_z)` and the Kolyvagin recursions.

pub mod bundled;
pub mod cohomology;
pub mod complex;
pub mod distribution;
pub mod eulermock;
pub mod exactlin;
pub mod recursion;
pub mod site;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

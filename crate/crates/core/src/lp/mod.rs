//! Linear-programming characterization of throughput regions.

pub mod blockcode;
pub mod region;
pub mod simplex;

pub use blockcode::{blockcode_feasible, blockcode_region, map_witness_to_spn};
pub use region::{rate_adaptation_region, spn_feasible, spn_region, RaScheme, RatePoint, RegionLp};
pub use simplex::{
    solve_feasibility, verify_infeasibility_certificate, LinearSystem, SimplexOutcome, SolverError,
};

//! DC optimal power flow and unit commitment with counterfactual demand explanations.

pub mod case;
pub mod ce;
pub mod dataset;
pub mod dcopf;
pub mod fixtures;
pub mod matpower;
pub mod solver;
pub mod uc;

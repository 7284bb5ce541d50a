pub mod audit;
pub mod bench;
pub mod client;
pub mod curator;
pub mod enforcer;

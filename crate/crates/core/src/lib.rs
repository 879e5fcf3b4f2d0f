//! Simulation and protocol library for CAN segments bridged by NDN gateways.

pub mod attacks;
pub mod can;
pub mod forwarder;
pub mod gateway;
pub mod ndn;
pub mod scenario;
pub mod trust;

/// Identifier of a simulation node (ECU, gateway, or attacker).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

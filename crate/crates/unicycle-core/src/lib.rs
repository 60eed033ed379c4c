//! Maneuver laboratory for a wheel + frame + reaction-mass unicycle:
//! G2 path construction from clothoid triples, the full nonlinear
//! dynamics in path-following coordinates, gain-scheduled output
//! feedback, and a fixed-step closed-loop simulator.

pub mod control;
pub mod dynamics;
pub mod planner;
pub mod sim;

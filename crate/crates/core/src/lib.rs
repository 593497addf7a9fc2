//! Distributed attitude and position estimation from relative bearings in a
//! leader–follower network.

pub mod analysis;
pub mod geom3;
pub mod network;
pub mod observers;
pub mod ode;
pub mod sim;
pub mod world;

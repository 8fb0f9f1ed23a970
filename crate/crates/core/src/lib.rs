//! Robot point-cloud streaming to AR-style viewers: rigid-body math, point
//! clouds and shading, tag-based zero point, a binary wire protocol, a pub/sub
//! bridge, a box-world simulator and benchmarks.

pub mod app;
pub mod bench;
pub mod bridge;
pub mod fiducial;
pub mod geometry;
pub mod pointcloud;
pub mod sim;
pub mod wire;

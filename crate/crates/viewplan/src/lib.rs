//! Nonmyopic view planning for active object detection.
//!
//! A depth sensor moves on a sphere around an unknown object, accumulating
//! noisy semantic observations until it is confident enough to declare the
//! object's class and orientation. This crate simulates the whole loop:
//!
//! - [`geometry`]: viewsphere discretization, movement costs, pose math
//! - [`sensing`]: triangle-mesh models, ray-cast depth rendering, occlusions
//! - [`features`]: local geometry descriptors from point clouds
//! - [`vptree`]: vocabulary-tree semantic observer over descriptor sets

pub mod belief;
pub mod features;
pub mod geometry;
pub mod harness;
pub mod obsmodel;
pub mod policies;
pub mod seed;
pub mod sensing;
pub mod vptree;

//! Three-view relative pose estimation from point and line correspondences.
//!
//! Rotation and translation are estimated separately. The two relative
//! rotations `R10`, `R12` minimize a combined coplanarity cost: epipolar-plane
//! normals of point tracks must be coplanar (orthogonal to the translation),
//! and the three back-projected plane normals of a line track must be coplanar
//! (orthogonal to the 3D line). The translations then follow from a linear
//! system over the three global camera positions.
//!
//! Conventions used throughout the crate:
//!
//! - `R_ab` maps coordinates expressed in frame `b` into frame `a`.
//! - The global frame is frame 0, so `R_0G = I` and the global translation of
//!   camera `k` is its optical center expressed in frame 0.
//! - `^a t_b` is the position of camera `b` expressed in frame `a`.

pub mod eigen;
mod error;
pub mod geometry;
pub mod pipeline;
pub mod rng;
pub mod rotation;
pub mod scene;
pub mod trackfile;
pub mod tracks;
pub mod translation;

pub use error::{Error, Result};
pub use geometry::{
    BearingVector, Cayley, CameraIntrinsics, LineObservation, PixelPoint, PlaneNormal,
};
pub use pipeline::{estimate_three_view_pose, EstimatorConfig, PoseEstimate, SolverVariant};
pub use rotation::RotationPair;
pub use scene::{generate_scene, generate_scene_with_rotations, RangeKind, ScenarioConfig, SceneMode, ThreeViewScene};
pub use tracks::{LineTrack, PointTrack};
pub use translation::TranslationSolution;

//! Synthetic three-view scenes with ground truth.
//!
//! Frame 0 sits at the origin with identity orientation. The two relative
//! rotations come from random Euler angles, the camera centers from random
//! translations, and landmarks are drawn inside the view frustum of camera 0
//! at depths within `depth_range`. Every landmark must lie in front of all
//! three cameras; candidates that do not are redrawn.

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::geometry::{CameraIntrinsics, PixelPoint};
use crate::rng::{stream, Domain};
use crate::rotation::RotationPair;
use crate::tracks::{LineTrack, PointTrack};
use crate::{Error, Result};

/// Planar landmarks may lie up to this multiple of the far range bound along
/// their ray; the plane itself is anchored at the middle of the range.
const PLANE_REACH: f64 = 4.0;
const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneMode {
    General,
    Planar,
    PureRotation,
}

impl SceneMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SceneMode::General => "general",
            SceneMode::Planar => "planar",
            SceneMode::PureRotation => "pure_rotation",
        }
    }
}

impl std::str::FromStr for SceneMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(SceneMode::General),
            "planar" => Ok(SceneMode::Planar),
            "pure_rotation" | "pure-rotation" => Ok(SceneMode::PureRotation),
            other => Err(Error::InvalidConfig(format!("unknown scene mode `{other}`"))),
        }
    }
}

/// How `depth_range` bounds the landmarks of frame 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeKind {
    /// `z` coordinate within the range, ray uniform over the square image
    /// window `[-view_tan, view_tan]²`.
    Depth,
    /// Euclidean distance from the camera within the range, direction uniform
    /// over the cone of half-angle `atan(view_tan)`.
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_points: usize,
    pub n_lines: usize,
    /// Pixel noise standard deviation, applied to points and line endpoints.
    pub noise_std: f64,
    pub outlier_fraction: f64,
    pub mode: SceneMode,
    pub rng_seed: u64,
    /// Bound on each Euler angle of the relative rotations (radians).
    pub max_euler: f64,
    /// Depth or distance range of landmarks in frame 0, see `range_kind`.
    pub depth_range: (f64, f64),
    pub range_kind: RangeKind,
    pub min_translation: f64,
    pub max_translation: f64,
    pub focal: f64,
    /// Half-width of the sampled field of view, as `tan` of the half angle.
    pub view_tan: f64,
    /// Landmarks must be at least this deep in cameras 1 and 2.
    pub min_depth: f64,
    /// Shortest accepted noiseless line segment in any frame (pixels).
    pub min_segment_px: f64,
    /// Bound on the Euler angles tilting the plane of planar scenes away
    /// from fronto-parallel (radians).
    pub plane_max_tilt: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_points: 15,
            n_lines: 15,
            noise_std: 0.0,
            outlier_fraction: 0.0,
            mode: SceneMode::General,
            rng_seed: 0,
            max_euler: 0.5,
            depth_range: (4.0, 8.0),
            range_kind: RangeKind::Distance,
            min_translation: 2.0,
            max_translation: 2.0,
            focal: 800.0,
            view_tan: 3.0,
            min_depth: 0.5,
            min_segment_px: 20.0,
            plane_max_tilt: 0.5,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return bad("outlier_fraction must lie in [0, 1)");
        }
        let (lo, hi) = self.depth_range;
        if !(lo > 0.0 && hi >= lo) {
            return bad("depth_range must satisfy 0 < min <= max");
        }
        if !(self.max_translation >= self.min_translation && self.min_translation >= 0.0) {
            return bad("translation bounds must satisfy 0 <= min <= max");
        }
        if !(self.max_euler >= 0.0 && self.focal > 0.0 && self.view_tan > 0.0) {
            return bad("max_euler, focal and view_tan must be positive");
        }
        Ok(())
    }
}

pub fn make_planar(cfg: ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig {
        mode: SceneMode::Planar,
        ..cfg
    }
}

pub fn make_pure_rotation(cfg: ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig {
        mode: SceneMode::PureRotation,
        ..cfg
    }
}

/// Plane `normal · X = offset` in frame 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn distance(&self, x: &Vector3<f64>) -> f64 {
        self.normal.dot(x) - self.offset
    }
}

#[derive(Debug, Clone)]
pub struct ThreeViewScene {
    pub config: ScenarioConfig,
    pub intrinsics: CameraIntrinsics,
    pub gt_r10: Matrix3<f64>,
    pub gt_r12: Matrix3<f64>,
    /// Camera centers expressed in frame 0; the first is the origin.
    pub gt_global_translations: [Vector3<f64>; 3],
    pub points: Vec<Vector3<f64>>,
    pub line_endpoints: Vec<[Vector3<f64>; 2]>,
    pub clean_point_pixels: Vec<[PixelPoint; 3]>,
    pub clean_line_pixels: Vec<[[PixelPoint; 2]; 3]>,
    pub point_tracks: Vec<PointTrack>,
    pub line_tracks: Vec<LineTrack>,
    pub point_outliers: Vec<bool>,
    pub line_outliers: Vec<bool>,
    pub plane: Option<Plane>,
}

impl ThreeViewScene {
    pub fn gt_rotation_pair(&self) -> RotationPair {
        RotationPair::from_matrices(&self.gt_r10, &self.gt_r12).expect("rotations far from 180 degrees")
    }

    /// `[R_0G, R_1G, R_2G]`.
    pub fn global_rotations(&self) -> [Matrix3<f64>; 3] {
        global_rotations(&self.gt_r10, &self.gt_r12)
    }

    /// `(⁰t₁, ¹t₂)`: camera 1 seen from camera 0 and camera 2 seen from camera 1.
    pub fn gt_relative_translations(&self) -> (Vector3<f64>, Vector3<f64>) {
        let [c0, c1, c2] = self.gt_global_translations;
        (c1 - c0, self.gt_r10 * (c2 - c1))
    }

    /// Directions from camera 1 towards cameras 0 and 2, in frame 1.
    pub fn gt_frame1_directions(&self) -> (Vector3<f64>, Vector3<f64>) {
        let [c0, c1, c2] = self.gt_global_translations;
        (self.gt_r10 * (c0 - c1), self.gt_r10 * (c2 - c1))
    }

    /// Unit direction of every 3D line in frame 1.
    pub fn line_directions_frame1(&self) -> Vec<Vector3<f64>> {
        self.line_endpoints
            .iter()
            .map(|[a, b]| (self.gt_r10 * (b - a)).normalize())
            .collect()
    }

    /// Landmark `x` (frame 0) in camera `k`'s coordinates.
    pub fn to_camera(&self, k: usize, x: &Vector3<f64>) -> Vector3<f64> {
        self.global_rotations()[k] * (x - self.gt_global_translations[k])
    }
}

pub fn global_rotations(r10: &Matrix3<f64>, r12: &Matrix3<f64>) -> [Matrix3<f64>; 3] {
    [Matrix3::identity(), *r10, r12.transpose() * r10]
}

fn random_rotation(rng: &mut ChaCha8Rng, bound: f64) -> Matrix3<f64> {
    let mut angle = || if bound > 0.0 { rng.random_range(-bound..=bound) } else { 0.0 };
    let (roll, pitch, yaw) = (angle(), angle(), angle());
    Rotation3::from_euler_angles(roll, pitch, yaw).into_inner()
}

fn random_translation(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vector3<f64> {
    let dir: [f64; 3] = UnitSphere.sample(rng);
    let mag = if hi > lo { rng.random_range(lo..=hi) } else { hi };
    Vector3::from(dir) * mag
}

struct Generator<'a> {
    cfg: &'a ScenarioConfig,
    k: CameraIntrinsics,
    rotations: [Matrix3<f64>; 3],
    centers: [Vector3<f64>; 3],
    plane: Option<Plane>,
}

impl Generator<'_> {
    fn camera_point(&self, k: usize, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotations[k] * (x - self.centers[k])
    }

    fn visible(&self, x: &Vector3<f64>) -> bool {
        (1..3).all(|k| self.camera_point(k, x).z >= self.cfg.min_depth)
    }

    fn candidate(&self, rng: &mut ChaCha8Rng) -> Option<Vector3<f64>> {
        let (lo, hi) = self.cfg.depth_range;
        let a = self.cfg.view_tan;
        let ray = match self.cfg.range_kind {
            RangeKind::Depth => Vector3::new(rng.random_range(-a..=a), rng.random_range(-a..=a), 1.0),
            RangeKind::Distance => {
                let cos_max = 1.0 / (1.0 + a * a).sqrt();
                let c: f64 = rng.random_range(cos_max..=1.0);
                let phi = rng.random_range(0.0..std::f64::consts::TAU);
                let s = (1.0 - c * c).max(0.0).sqrt();
                Vector3::new(s * phi.cos(), s * phi.sin(), c)
            }
        };
        // scale along the ray: depth for `Depth`, distance for `Distance` (unit ray)
        let scale = match &self.plane {
            None => {
                if hi > lo {
                    rng.random_range(lo..=hi)
                } else {
                    lo
                }
            }
            Some(p) => {
                let denom = p.normal.dot(&ray);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = p.offset / denom;
                if !(t > 0.0 && t <= PLANE_REACH * hi) {
                    return None;
                }
                t
            }
        };
        let x = ray * scale;
        (x.z >= self.cfg.min_depth && self.visible(&x)).then_some(x)
    }

    fn landmark(&self, rng: &mut ChaCha8Rng) -> Result<Vector3<f64>> {
        for _ in 0..MAX_ATTEMPTS {
            if let Some(x) = self.candidate(rng) {
                return Ok(x);
            }
        }
        Err(Error::SamplingExhausted(MAX_ATTEMPTS))
    }

    fn project(&self, k: usize, x: &Vector3<f64>) -> PixelPoint {
        self.k
            .project(&self.camera_point(k, x))
            .expect("landmark in front of camera")
    }

    fn segment(&self, rng: &mut ChaCha8Rng) -> Result<([Vector3<f64>; 2], [[PixelPoint; 2]; 3])> {
        for _ in 0..MAX_ATTEMPTS {
            let (Some(a), Some(b)) = (self.candidate(rng), self.candidate(rng)) else {
                continue;
            };
            let pixels: [[PixelPoint; 2]; 3] = std::array::from_fn(|k| [self.project(k, &a), self.project(k, &b)]);
            let long_enough = pixels.iter().all(|[p, q]| {
                ((p.u - q.u).powi(2) + (p.v - q.v).powi(2)).sqrt() >= self.cfg.min_segment_px
            });
            if long_enough {
                return Ok(([a, b], pixels));
            }
        }
        Err(Error::SamplingExhausted(MAX_ATTEMPTS))
    }
}

fn jitter(p: PixelPoint, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> PixelPoint {
    PixelPoint::new(p.u + noise.sample(rng), p.v + noise.sample(rng))
}

/// Generates a scene. Identical configurations give bit-identical scenes.
pub fn generate_scene(cfg: &ScenarioConfig) -> Result<ThreeViewScene> {
    generate(cfg, None)
}

/// Like [`generate_scene`] but with prescribed relative rotations; the
/// translations and landmarks are still drawn from the seed.
pub fn generate_scene_with_rotations(
    cfg: &ScenarioConfig,
    r10: &Matrix3<f64>,
    r12: &Matrix3<f64>,
) -> Result<ThreeViewScene> {
    generate(cfg, Some((*r10, *r12)))
}

fn generate(cfg: &ScenarioConfig, rotations: Option<(Matrix3<f64>, Matrix3<f64>)>) -> Result<ThreeViewScene> {
    cfg.validate()?;
    let seed = cfg.rng_seed;
    let k = CameraIntrinsics::from_focal(cfg.focal)?;

    let mut pose_rng = stream(seed, Domain::Poses, 0);
    let r01 = random_rotation(&mut pose_rng, cfg.max_euler);
    let r12 = random_rotation(&mut pose_rng, cfg.max_euler);
    let (r01, r12) = match rotations {
        Some((a, b)) => (a.transpose(), b),
        None => (r01, r12),
    };
    let r10 = r01.transpose();
    let t01 = random_translation(&mut pose_rng, cfg.min_translation, cfg.max_translation);
    let t12 = random_translation(&mut pose_rng, cfg.min_translation, cfg.max_translation);
    let centers = match cfg.mode {
        SceneMode::PureRotation => [Vector3::zeros(); 3],
        _ => [Vector3::zeros(), t01, t01 + r01 * t12],
    };

    let plane = (cfg.mode == SceneMode::Planar).then(|| {
        let mut rng = stream(seed, Domain::Plane, 0);
        let (lo, hi) = cfg.depth_range;
        let tilt = random_rotation(&mut rng, cfg.plane_max_tilt);
        let normal = tilt * Vector3::z();
        let anchor = Vector3::new(0.0, 0.0, 0.5 * (lo + hi));
        Plane {
            normal,
            offset: normal.dot(&anchor),
        }
    });

    let gen = Generator {
        cfg,
        k,
        rotations: global_rotations(&r10, &r12),
        centers,
        plane,
    };
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let mut points = Vec::with_capacity(cfg.n_points);
    let mut clean_point_pixels = Vec::with_capacity(cfg.n_points);
    let mut point_tracks = Vec::with_capacity(cfg.n_points);
    for i in 0..cfg.n_points {
        let x = gen.landmark(&mut stream(seed, Domain::PointLandmark, i as u64))?;
        let clean: [PixelPoint; 3] = std::array::from_fn(|f| gen.project(f, &x));
        let mut rng = stream(seed, Domain::PointNoise, i as u64);
        let noisy = clean.map(|p| Some(jitter(p, &noise, &mut rng)));
        point_tracks.push(PointTrack::isotropic(i as u64, &k, noisy, cfg.noise_std)?);
        points.push(x);
        clean_point_pixels.push(clean);
    }

    let mut line_endpoints = Vec::with_capacity(cfg.n_lines);
    let mut clean_line_pixels = Vec::with_capacity(cfg.n_lines);
    let mut line_tracks = Vec::with_capacity(cfg.n_lines);
    for i in 0..cfg.n_lines {
        let (ends, clean) = gen.segment(&mut stream(seed, Domain::LineLandmark, i as u64))?;
        let mut rng = stream(seed, Domain::LineNoise, i as u64);
        let noisy = clean.map(|[a, b]| [jitter(a, &noise, &mut rng), jitter(b, &noise, &mut rng)]);
        line_tracks.push(LineTrack::from_endpoints(i as u64, &k, noisy, cfg.noise_std)?);
        line_endpoints.push(ends);
        clean_line_pixels.push(clean);
    }

    let mut scene = ThreeViewScene {
        config: *cfg,
        intrinsics: k,
        gt_r10: r10,
        gt_r12: r12,
        gt_global_translations: centers,
        points,
        line_endpoints,
        clean_point_pixels,
        clean_line_pixels,
        point_tracks,
        line_tracks,
        point_outliers: vec![false; cfg.n_points],
        line_outliers: vec![false; cfg.n_lines],
        plane,
    };
    inject_outliers(&mut scene, cfg.outlier_fraction, seed)?;
    Ok(scene)
}

fn random_pixel(rng: &mut ChaCha8Rng, cfg: &ScenarioConfig) -> PixelPoint {
    let half = cfg.view_tan * cfg.focal;
    PixelPoint::new(rng.random_range(-half..=half), rng.random_range(-half..=half))
}

/// Replaces `round(fraction * n)` point tracks and, independently, as many line
/// tracks by observations of unrelated random landmarks: each frame sees a
/// different random image point (or segment).
pub fn inject_outliers(scene: &mut ThreeViewScene, fraction: f64, seed: u64) -> Result<()> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidConfig("outlier fraction must lie in [0, 1)".into()));
    }
    if fraction == 0.0 {
        return Ok(());
    }
    let cfg = scene.config;
    let k = scene.intrinsics;

    let n = scene.point_tracks.len();
    let count = (fraction * n as f64).round() as usize;
    let mut select = stream(seed, Domain::OutlierSelection, 0);
    for i in sample(&mut select, n, count) {
        let mut rng = stream(seed, Domain::OutlierPoint, i as u64);
        let pixels = [(); 3].map(|_| Some(random_pixel(&mut rng, &cfg)));
        let id = scene.point_tracks[i].id;
        scene.point_tracks[i] = PointTrack::isotropic(id, &k, pixels, cfg.noise_std)?;
        scene.point_outliers[i] = true;
    }

    let n = scene.line_tracks.len();
    let count = (fraction * n as f64).round() as usize;
    let mut select = stream(seed, Domain::OutlierSelection, 1);
    for i in sample(&mut select, n, count) {
        let mut rng = stream(seed, Domain::OutlierLine, i as u64);
        let mut ends = [[PixelPoint::new(0.0, 0.0); 2]; 3];
        for seg in &mut ends {
            loop {
                let (a, b) = (random_pixel(&mut rng, &cfg), random_pixel(&mut rng, &cfg));
                if ((a.u - b.u).powi(2) + (a.v - b.v).powi(2)).sqrt() >= cfg.min_segment_px {
                    *seg = [a, b];
                    break;
                }
            }
        }
        let id = scene.line_tracks[i].id;
        scene.line_tracks[i] = LineTrack::from_endpoints(id, &k, ends, cfg.noise_std)?;
        scene.line_outliers[i] = true;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{bearing_from_pixel, epipolar_normal};
    use crate::rotation::cost::{line_normals_in_frame1, nbc_mult_residual};
    use approx::assert_relative_eq;

    fn cfg(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            rng_seed: seed,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn noiseless_points_satisfy_epipolar_constraint() {
        for seed in 0..20 {
            let s = generate_scene(&cfg(seed)).unwrap();
            let (t01, _) = s.gt_relative_translations();
            let r01 = s.gt_r10.transpose();
            for px in &s.clean_point_pixels {
                let b0 = *bearing_from_pixel(px[0], &s.intrinsics).as_vector();
                let b1 = *bearing_from_pixel(px[1], &s.intrinsics).as_vector();
                let n = epipolar_normal(&b0, &b1, &r01);
                assert!(n.dot(&t01).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn noiseless_lines_satisfy_coplanarity() {
        for seed in 0..20 {
            let s = generate_scene(&cfg(seed)).unwrap();
            for t in &s.line_tracks {
                let [a, b, c] = line_normals_in_frame1(t, &s.gt_r10, &s.gt_r12);
                assert!(nbc_mult_residual(&a, &b, &c) < 1e-10);
            }
        }
    }

    #[test]
    fn prescribed_rotations_are_used() {
        let r10 = crate::geometry::Cayley(Vector3::new(0.2, 0.2, 0.2)).to_matrix();
        let r12 = Rotation3::from_euler_angles(0.1, -0.2, 0.3).into_inner();
        let s = generate_scene_with_rotations(&ScenarioConfig::default(), &r10, &r12).unwrap();
        assert_eq!(s.gt_r10, r10);
        assert_eq!(s.gt_r12, r12);
        for t in &s.point_tracks {
            let n = epipolar_normal(t.bearing(0).unwrap(), t.bearing(1).unwrap(), &r10.transpose());
            assert!(n.dot(&s.gt_relative_translations().0).abs() < 1e-10);
        }
    }

    #[test]
    fn same_seed_same_scene() {
        let a = generate_scene(&cfg(5)).unwrap();
        let b = generate_scene(&cfg(5)).unwrap();
        assert_eq!(a.point_tracks, b.point_tracks);
        assert_eq!(a.line_tracks, b.line_tracks);
        assert_eq!(a.gt_r10, b.gt_r10);
        let c = generate_scene(&cfg(6)).unwrap();
        assert_ne!(a.gt_r10, c.gt_r10);
    }

    fn landmarks(s: &ThreeViewScene) -> Vec<Vector3<f64>> {
        s.points.iter().chain(s.line_endpoints.iter().flatten()).copied().collect()
    }

    #[test]
    fn distances_and_visibility() {
        for seed in 0..20 {
            let s = generate_scene(&cfg(seed)).unwrap();
            assert_eq!(s.gt_global_translations[0], Vector3::zeros());
            let cos_max = 1.0 / (1.0 + s.config.view_tan.powi(2)).sqrt();
            for x in landmarks(&s) {
                assert!((4.0 - 1e-12..=8.0 + 1e-12).contains(&x.norm()));
                assert!(x.z / x.norm() >= cos_max - 1e-12);
                for k in 0..3 {
                    assert!(s.to_camera(k, &x).z >= s.config.min_depth);
                }
            }
        }
    }

    #[test]
    fn depth_range_bounds_z() {
        for seed in 0..20 {
            let s = generate_scene(&ScenarioConfig {
                range_kind: RangeKind::Depth,
                rng_seed: seed,
                ..ScenarioConfig::default()
            })
            .unwrap();
            let a = s.config.view_tan;
            for x in landmarks(&s) {
                assert!((4.0..=8.0).contains(&x.z));
                assert!(x.x.abs() <= a * x.z + 1e-12 && x.y.abs() <= a * x.z + 1e-12);
            }
        }
    }

    #[test]
    fn translations_have_fixed_magnitude() {
        for seed in 0..20 {
            let (t01, t12) = generate_scene(&cfg(seed)).unwrap().gt_relative_translations();
            assert_relative_eq!(t01.norm(), 2.0, epsilon = 1e-12);
            assert_relative_eq!(t12.norm(), 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn pure_rotation_has_zero_translation() {
        let s = generate_scene(&make_pure_rotation(cfg(3))).unwrap();
        assert!(s.gt_global_translations.iter().all(|t| *t == Vector3::zeros()));
        // pixels related by the infinite homography K R K^-1
        let h = s.intrinsics.matrix() * s.gt_r10 * s.intrinsics.inverse_matrix();
        for px in &s.clean_point_pixels {
            let x = h * px[0].homogeneous();
            assert_relative_eq!(x.x / x.z, px[1].u, epsilon = 1e-8);
            assert_relative_eq!(x.y / x.z, px[1].v, epsilon = 1e-8);
        }
    }

    #[test]
    fn planar_landmarks_lie_on_plane() {
        for seed in 0..10 {
            let s = generate_scene(&make_planar(cfg(seed))).unwrap();
            let plane = s.plane.unwrap();
            for x in s.points.iter().chain(s.line_endpoints.iter().flatten()) {
                assert!(plane.distance(x).abs() < 1e-12 * plane.offset.abs().max(1.0));
            }
        }
    }

    #[test]
    fn injected_noise_has_requested_std() {
        let mut sum = 0.0;
        let mut count = 0usize;
        for seed in 0..1000 {
            let s = generate_scene(&ScenarioConfig {
                noise_std: 0.5,
                rng_seed: seed,
                ..ScenarioConfig::default()
            })
            .unwrap();
            for (t, clean) in s.point_tracks.iter().zip(&s.clean_point_pixels) {
                for (p, c) in t.pixels().iter().zip(clean) {
                    let p = p.unwrap();
                    sum += (p.u - c.u).powi(2) + (p.v - c.v).powi(2);
                    count += 2;
                }
            }
            for (t, clean) in s.line_tracks.iter().zip(&s.clean_line_pixels) {
                for (seg, cseg) in t.endpoints().iter().zip(clean) {
                    for (p, c) in seg.iter().zip(cseg) {
                        sum += (p.u - c.u).powi(2) + (p.v - c.v).powi(2);
                        count += 2;
                    }
                }
            }
        }
        let std = (sum / count as f64).sqrt();
        assert_relative_eq!(std, 0.5, max_relative = 0.05);
    }

    #[test]
    fn outlier_counts_are_exact() {
        let s = generate_scene(&ScenarioConfig {
            n_points: 100,
            n_lines: 100,
            outlier_fraction: 0.2,
            rng_seed: 4,
            ..ScenarioConfig::default()
        })
        .unwrap();
        assert_eq!(s.point_outliers.iter().filter(|&&o| o).count(), 20);
        assert_eq!(s.line_outliers.iter().filter(|&&o| o).count(), 20);

        let clean = generate_scene(&ScenarioConfig {
            n_points: 100,
            n_lines: 100,
            rng_seed: 4,
            ..ScenarioConfig::default()
        })
        .unwrap();
        assert!(clean.point_outliers.iter().all(|&o| !o));
        // inlier tracks are untouched by outlier injection
        for i in 0..100 {
            if !s.point_outliers[i] {
                assert_eq!(s.point_tracks[i], clean.point_tracks[i]);
            }
            if !s.line_outliers[i] {
                assert_eq!(s.line_tracks[i], clean.line_tracks[i]);
            }
        }
    }

    #[test]
    fn outliers_violate_constraints() {
        let mut violated = 0;
        let mut total = 0;
        for seed in 0..20 {
            let s = generate_scene(&ScenarioConfig {
                n_points: 50,
                n_lines: 50,
                outlier_fraction: 0.2,
                rng_seed: seed,
                ..ScenarioConfig::default()
            })
            .unwrap();
            let (t01, _) = s.gt_relative_translations();
            let r01 = s.gt_r10.transpose();
            for (t, &o) in s.point_tracks.iter().zip(&s.point_outliers) {
                if o {
                    let n = epipolar_normal(t.bearing(0).unwrap(), t.bearing(1).unwrap(), &r01);
                    total += 1;
                    violated += (n.dot(&t01.normalize()).abs() > 1e-3) as usize;
                }
            }
            for (t, &o) in s.line_tracks.iter().zip(&s.line_outliers) {
                if o {
                    let [a, b, c] = line_normals_in_frame1(t, &s.gt_r10, &s.gt_r12);
                    total += 1;
                    violated += (nbc_mult_residual(&a, &b, &c) > 1e-3) as usize;
                }
            }
        }
        assert!(violated as f64 > 0.99 * total as f64, "{violated}/{total}");
    }
}

//! Point-cloud data model, file IO, shading modes and render batches.

mod batch;
mod io;
mod shading;

pub use batch::{
    build_batch, build_batch_into, build_batch_with, BatchRecord, BatchStrategy, RenderBatch,
    StagedUpload, UploadTarget, DEFAULT_CHUNK, RECORD_STRIDE,
};
pub use io::{
    load_cloud, parse_pcd, parse_ply, save_cloud, save_shaded_ply, write_pcd, write_ply,
    write_shading_csv, CloudFormat, SHADING_CSV_HEADER,
};
pub use shading::{
    hsv_to_rgb, point_size_px, rainbow_hue, shade, shade_into, shade_points, PointSizing,
    ShadedPoint, ShadingMode,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{TrsMatrix, Vec3};

/// Upper bound on points per cloud unless a caller raises it.
pub const DEFAULT_MAX_POINTS: usize = 2_000_000;
/// Color assigned to points loaded from files without color fields.
pub const DEFAULT_COLOR: [u8; 3] = [200, 200, 200];

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported cloud format: {0}")]
    UnsupportedFormat(String),
    #[error("point {index} has a non-finite position")]
    NonFinite { index: usize },
    #[error("cloud has {count} points, limit is {limit}")]
    TooManyPoints { count: usize, limit: usize },
    #[error("invalid shading mode: {0}")]
    InvalidMode(String),
    #[error("invalid point size parameters: {0}")]
    InvalidSize(String),
    #[error("positions and shaded points differ in length ({positions} vs {shaded})")]
    LengthMismatch { positions: usize, shaded: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CloudError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        CloudError::Parse {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub position: [f32; 3],
    pub color: [u8; 3],
}

impl Point {
    pub fn new(position: [f32; 3], color: [u8; 3]) -> Self {
        Self { position, color }
    }

    pub fn position_f64(&self) -> Vec3 {
        Vec3::new(
            self.position[0] as f64,
            self.position[1] as f64,
            self.position[2] as f64,
        )
    }
}

/// Timestamped, colored point set. Positions are stored at 32-bit precision,
/// the precision of the wire format and of the render buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    frame_id: String,
    timestamp_ns: u64,
    points: Vec<Point>,
}

impl PointCloud {
    pub fn new(
        frame_id: impl Into<String>,
        timestamp_ns: u64,
        points: Vec<Point>,
    ) -> Result<Self, CloudError> {
        Self::with_limit(frame_id, timestamp_ns, points, DEFAULT_MAX_POINTS)
    }

    pub fn with_limit(
        frame_id: impl Into<String>,
        timestamp_ns: u64,
        points: Vec<Point>,
        max_points: usize,
    ) -> Result<Self, CloudError> {
        if points.len() > max_points {
            return Err(CloudError::TooManyPoints {
                count: points.len(),
                limit: max_points,
            });
        }
        if let Some(index) = points
            .iter()
            .position(|p| p.position.iter().any(|c| !c.is_finite()))
        {
            return Err(CloudError::NonFinite { index });
        }
        Ok(Self {
            frame_id: frame_id.into(),
            timestamp_ns,
            points,
        })
    }

    pub fn empty(frame_id: impl Into<String>, timestamp_ns: u64) -> Self {
        Self {
            frame_id: frame_id.into(),
            timestamp_ns,
            points: Vec::new(),
        }
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    pub fn timestamp_ns(&self) -> u64 {
        self.timestamp_ns
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn set_frame_id(&mut self, frame_id: impl Into<String>) {
        self.frame_id = frame_id.into();
    }

    pub fn set_timestamp_ns(&mut self, ts: u64) {
        self.timestamp_ns = ts;
    }

    /// Applies `m` in double precision and returns the 64-bit images.
    pub fn transformed_f64(&self, m: &TrsMatrix) -> Vec<Vec3> {
        self.points
            .iter()
            .map(|p| m.transform_point(p.position_f64()))
            .collect()
    }

    /// Same as [`Self::transformed_f64`] but rounded to the 32-bit buffer
    /// format.
    pub fn transformed_f32(&self, m: &TrsMatrix) -> Vec<[f32; 3]> {
        self.points
            .iter()
            .map(|p| {
                let v = m.transform_point(p.position_f64());
                [v.x as f32, v.y as f32, v.z as f32]
            })
            .collect()
    }
}

/// Uniformly random points and colors inside an axis-aligned cube of side
/// `extent` centered at the origin. Deterministic per seed.
pub fn random_cloud(count: usize, extent: f64, seed: u64) -> PointCloud {
    let half = extent.abs() * 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..count)
        .map(|_| {
            let mut c = || rng.random_range(-half..=half) as f32;
            let position = [c(), c(), c()];
            let color = [rng.random(), rng.random(), rng.random()];
            Point { position, color }
        })
        .collect();
    PointCloud {
        frame_id: "random".to_string(),
        timestamp_ns: 0,
        points,
    }
}

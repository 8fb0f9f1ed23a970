//! Per-point color, visibility and on-screen size for the five view modes.

use serde::{Deserialize, Serialize};

use super::{CloudError, PointCloud};
use crate::geometry::{Pose, Vec3};

/// Visualization mode. Construct through the checked constructors or call
/// [`ShadingMode::validate`] after deserializing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ShadingMode {
    /// Grey ramp: white at `near`, black from `far` on.
    DistanceRamp { near: f64, far: f64 },
    /// RGB from position normalized inside `min..max` per axis.
    AxisColor { min: Vec3, max: Vec3 },
    /// Hue cycles once every `wavelength` meters; points outside
    /// `near..=far` are hidden.
    DepthRainbow {
        near: f64,
        far: f64,
        wavelength: f64,
    },
    /// Stored colors, hidden outside `near_cutoff..=far_cutoff`.
    NaturalColor { near_cutoff: f64, far_cutoff: f64 },
    /// Expanding spherical ping from the viewer.
    Sonar {
        period: f64,
        max_range: f64,
        pulse_width: f64,
    },
}

impl ShadingMode {
    pub fn distance_ramp(near: f64, far: f64) -> Result<Self, CloudError> {
        Self::DistanceRamp { near, far }.validated()
    }

    pub fn axis_color(min: Vec3, max: Vec3) -> Result<Self, CloudError> {
        Self::AxisColor { min, max }.validated()
    }

    pub fn depth_rainbow(near: f64, far: f64, wavelength: f64) -> Result<Self, CloudError> {
        Self::DepthRainbow {
            near,
            far,
            wavelength,
        }
        .validated()
    }

    pub fn natural_color(near_cutoff: f64, far_cutoff: f64) -> Result<Self, CloudError> {
        Self::NaturalColor {
            near_cutoff,
            far_cutoff,
        }
        .validated()
    }

    pub fn sonar(period: f64, max_range: f64, pulse_width: f64) -> Result<Self, CloudError> {
        Self::Sonar {
            period,
            max_range,
            pulse_width,
        }
        .validated()
    }

    pub fn default_distance_ramp() -> Self {
        Self::DistanceRamp {
            near: 0.5,
            far: 5.0,
        }
    }

    pub fn default_axis_color() -> Self {
        Self::AxisColor {
            min: Vec3::new(-5.0, -5.0, 0.0),
            max: Vec3::new(5.0, 5.0, 3.0),
        }
    }

    /// 1.2 m to 2.5 m band, one hue cycle across it.
    pub fn default_depth_rainbow() -> Self {
        Self::DepthRainbow {
            near: 1.2,
            far: 2.5,
            wavelength: 2.5 - 1.2,
        }
    }

    /// Cutoff between 2 m and 4 m.
    pub fn default_natural_color() -> Self {
        Self::NaturalColor {
            near_cutoff: 2.0,
            far_cutoff: 4.0,
        }
    }

    /// One ping per second, 0.15 m Gaussian band.
    pub fn default_sonar() -> Self {
        Self::Sonar {
            period: 1.0,
            max_range: 5.0,
            pulse_width: 0.15,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::DistanceRamp { .. } => "distance_ramp",
            Self::AxisColor { .. } => "axis_color",
            Self::DepthRainbow { .. } => "depth_rainbow",
            Self::NaturalColor { .. } => "natural_color",
            Self::Sonar { .. } => "sonar",
        }
    }

    /// Default parameters for a mode name as returned by [`Self::name`].
    pub fn default_for(name: &str) -> Option<Self> {
        Some(match name {
            "distance_ramp" => Self::default_distance_ramp(),
            "axis_color" => Self::default_axis_color(),
            "depth_rainbow" => Self::default_depth_rainbow(),
            "natural_color" => Self::default_natural_color(),
            "sonar" => Self::default_sonar(),
            _ => return None,
        })
    }

    fn validated(self) -> Result<Self, CloudError> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CloudError> {
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        let err = |m: &str| Err(CloudError::InvalidMode(m.to_string()));
        match *self {
            Self::DistanceRamp { near, far } => {
                if !finite(&[near, far]) || near >= far {
                    return err("distance ramp requires finite near < far");
                }
            }
            Self::AxisColor { min, max } => {
                if !(min.is_finite() && max.is_finite())
                    || min.x >= max.x
                    || min.y >= max.y
                    || min.z >= max.z
                {
                    return err("axis color requires finite min < max on every axis");
                }
            }
            Self::DepthRainbow {
                near,
                far,
                wavelength,
            } => {
                if !finite(&[near, far, wavelength]) || near >= far {
                    return err("depth rainbow requires finite near < far");
                }
                if wavelength <= 0.0 {
                    return err("depth rainbow wavelength must be positive");
                }
            }
            Self::NaturalColor {
                near_cutoff,
                far_cutoff,
            } => {
                if !finite(&[near_cutoff, far_cutoff]) || near_cutoff >= far_cutoff {
                    return err("natural color requires finite near_cutoff < far_cutoff");
                }
            }
            Self::Sonar {
                period,
                max_range,
                pulse_width,
            } => {
                if !finite(&[period, max_range, pulse_width]) {
                    return err("sonar parameters must be finite");
                }
                if period <= 0.0 || pulse_width <= 0.0 || max_range <= 0.0 {
                    return err("sonar period, max_range and pulse_width must be positive");
                }
            }
        }
        Ok(())
    }
}

/// Perspective point sizing: `clamp(base_px · reference_depth / depth)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSizing {
    pub base_px: f64,
    pub reference_depth: f64,
    pub min_px: f64,
    pub max_px: f64,
}

impl Default for PointSizing {
    fn default() -> Self {
        Self {
            base_px: 4.0,
            reference_depth: 2.0,
            min_px: 1.0,
            max_px: 16.0,
        }
    }
}

impl PointSizing {
    pub fn validate(&self) -> Result<(), CloudError> {
        let ok = self.base_px.is_finite()
            && self.reference_depth.is_finite()
            && self.reference_depth > 0.0
            && self.min_px.is_finite()
            && self.max_px.is_finite()
            && self.min_px <= self.max_px;
        if ok {
            Ok(())
        } else {
            Err(CloudError::InvalidSize(format!("{self:?}")))
        }
    }

    fn size_at(&self, depth: f64) -> f32 {
        // a point at the eye gets the largest size rather than an error
        let depth = depth.max(f64::MIN_POSITIVE);
        (self.base_px * self.reference_depth / depth).clamp(self.min_px, self.max_px) as f32
    }
}

pub fn point_size_px(
    depth: f64,
    base_px: f64,
    reference_depth: f64,
    min_px: f64,
    max_px: f64,
) -> Result<f64, CloudError> {
    if !(depth > 0.0) {
        return Err(CloudError::InvalidSize(format!(
            "depth must be positive, got {depth}"
        )));
    }
    if !(reference_depth > 0.0) || !(min_px <= max_px) {
        return Err(CloudError::InvalidSize(format!(
            "reference_depth {reference_depth}, clamp [{min_px}, {max_px}]"
        )));
    }
    Ok((base_px * reference_depth / depth).clamp(min_px, max_px))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadedPoint {
    pub rgba: [u8; 4],
    pub keep: bool,
    pub size_px: f32,
}

impl ShadedPoint {
    const HIDDEN: ShadedPoint = ShadedPoint {
        rgba: [0, 0, 0, 0],
        keep: false,
        size_px: 0.0,
    };
}

fn channel(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// HSV to 8-bit RGB, hue in degrees (wrapped), saturation and value in `[0, 1]`.
pub fn hsv_to_rgb(hue_deg: f64, s: f64, v: f64) -> [u8; 3] {
    let h = hue_deg.rem_euclid(360.0) / 60.0;
    let sector = (h.floor() as i64).rem_euclid(6);
    let f = h - h.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [channel(r), channel(g), channel(b)]
}

/// Hue in `[0, 360)` for the rainbow band. Phases within `1e-9` of a whole
/// cycle snap to zero so band edges land on exact cycle boundaries.
pub fn rainbow_hue(distance: f64, near: f64, wavelength: f64) -> f64 {
    let phase = (distance - near) / wavelength;
    let mut frac = phase - phase.floor();
    if !(1e-9..=1.0 - 1e-9).contains(&frac) {
        frac = 0.0;
    }
    360.0 * frac
}

/// Time in whole nanoseconds modulo the period, so shading at `t` and
/// `t + period` is bit-identical.
fn sonar_phase(time_s: f64, period_s: f64) -> f64 {
    let period_ns = (period_s * 1e9).round().max(1.0) as i128;
    let t_ns = (time_s * 1e9).round() as i128;
    t_ns.rem_euclid(period_ns) as f64 / period_ns as f64
}

struct Prepared {
    mode: ShadingMode,
    sonar_radius: f64,
    sizing: PointSizing,
}

impl Prepared {
    fn new(mode: &ShadingMode, time_s: f64, sizing: &PointSizing) -> Self {
        let sonar_radius = match *mode {
            ShadingMode::Sonar {
                period, max_range, ..
            } => max_range * sonar_phase(time_s, period),
            _ => 0.0,
        };
        Self {
            mode: *mode,
            sonar_radius,
            sizing: *sizing,
        }
    }

    #[inline(always)]
    fn shade(&self, position: Vec3, color: [u8; 3], eye: Vec3) -> ShadedPoint {
        let d = position.distance(eye);
        let rgb = match self.mode {
            ShadingMode::DistanceRamp { near, far } => {
                let i = 1.0 - ((d - near) / (far - near)).clamp(0.0, 1.0);
                let c = channel(i);
                [c, c, c]
            }
            ShadingMode::AxisColor { min, max } => {
                let n = |v: f64, lo: f64, hi: f64| channel(((v - lo) / (hi - lo)).clamp(0.0, 1.0));
                [
                    n(position.x, min.x, max.x),
                    n(position.y, min.y, max.y),
                    n(position.z, min.z, max.z),
                ]
            }
            ShadingMode::DepthRainbow {
                near,
                far,
                wavelength,
            } => {
                if !(near..=far).contains(&d) {
                    return ShadedPoint::HIDDEN;
                }
                hsv_to_rgb(rainbow_hue(d, near, wavelength), 1.0, 1.0)
            }
            ShadingMode::NaturalColor {
                near_cutoff,
                far_cutoff,
            } => {
                if !(near_cutoff..=far_cutoff).contains(&d) {
                    return ShadedPoint::HIDDEN;
                }
                color
            }
            ShadingMode::Sonar { pulse_width, .. } => {
                let x = (d - self.sonar_radius) / pulse_width;
                let b = (-x * x).exp();
                if b < 1.0 / 255.0 {
                    return ShadedPoint::HIDDEN;
                }
                color.map(|c| (c as f64 * b).round().clamp(0.0, 255.0) as u8)
            }
        };
        ShadedPoint {
            rgba: [rgb[0], rgb[1], rgb[2], 255],
            keep: true,
            size_px: self.sizing.size_at(d),
        }
    }
}

/// Shades already-transformed positions. `colors` pairs with `positions`.
pub fn shade_points(
    positions: &[Vec3],
    colors: &[[u8; 3]],
    mode: &ShadingMode,
    viewer: &Pose,
    time_s: f64,
    sizing: &PointSizing,
) -> Vec<ShadedPoint> {
    debug_assert!(mode.validate().is_ok());
    let prep = Prepared::new(mode, time_s, sizing);
    let eye = viewer.translation;
    positions
        .iter()
        .zip(colors)
        .map(|(p, c)| prep.shade(*p, *c, eye))
        .collect()
}

/// Shades every point of `cloud` as seen from `viewer` at `time_s` seconds.
/// Pure: identical inputs always give identical output.
pub fn shade(
    cloud: &PointCloud,
    mode: &ShadingMode,
    viewer: &Pose,
    time_s: f64,
    sizing: &PointSizing,
) -> Vec<ShadedPoint> {
    let mut out = Vec::with_capacity(cloud.len());
    shade_into(cloud, mode, viewer, time_s, sizing, &mut out);
    out
}

/// [`shade`] into a caller-owned buffer, which is cleared first.
pub fn shade_into(
    cloud: &PointCloud,
    mode: &ShadingMode,
    viewer: &Pose,
    time_s: f64,
    sizing: &PointSizing,
    out: &mut Vec<ShadedPoint>,
) {
    debug_assert!(mode.validate().is_ok());
    let prep = Prepared::new(mode, time_s, sizing);
    let eye = viewer.translation;
    out.clear();
    out.extend(
        cloud
            .points()
            .iter()
            .map(|p| prep.shade(p.position_f64(), p.color, eye)),
    );
}

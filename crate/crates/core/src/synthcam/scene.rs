use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::datapipe::{Condition, TimeOfDay, Viewpoint};
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TargetClass {
    Person,
    Vehicle,
}

impl TargetClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetClass::Person => "person",
            TargetClass::Vehicle => "vehicle",
        }
    }

    /// Emission temperature range on the unit scale.
    pub fn temperature_range(self) -> (f64, f64) {
        match self {
            TargetClass::Person => (0.7, 0.9),
            TargetClass::Vehicle => (0.8, 1.0),
        }
    }

    /// Width and height ranges as fractions of the frame at unit viewpoint scale.
    fn size_range(self) -> ((f64, f64), (f64, f64)) {
        match self {
            TargetClass::Person => ((0.05, 0.08), (0.10, 0.16)),
            TargetClass::Vehicle => ((0.12, 0.20), (0.07, 0.11)),
        }
    }
}

impl fmt::Display for TargetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "person" => Ok(TargetClass::Person),
            "vehicle" => Ok(TargetClass::Vehicle),
            _ => Err(Error::Format(format!("unknown target class `{s}`"))),
        }
    }
}

/// Target size multiplier for a camera viewpoint.
pub fn viewpoint_scale(v: Viewpoint) -> f64 {
    match v {
        Viewpoint::Overhead => 1.0,
        Viewpoint::Angled => 0.8,
        Viewpoint::Close => 1.6,
        Viewpoint::Far => 0.5,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub class: TargetClass,
    /// Centre in unit image coordinates.
    pub center: (f64, f64),
    /// Width and height as fractions of the frame.
    pub size: (f64, f64),
    pub heading: f64,
    pub temperature: f64,
}

impl Target {
    /// Unit-coordinate axis-aligned bound of the rotated footprint.
    pub fn unit_bounds(&self) -> (f64, f64, f64, f64) {
        let (hw, hh) = (self.size.0 / 2.0, self.size.1 / 2.0);
        let (c, s) = (self.heading.cos().abs(), self.heading.sin().abs());
        let ex = hw * c + hh * s;
        let ey = hw * s + hh * c;
        (self.center.0 - ex, self.center.1 - ey, self.center.0 + ex, self.center.1 + ey)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub background_class: u32,
    pub time: TimeOfDay,
    pub viewpoint: Viewpoint,
    pub targets: Vec<Target>,
}

pub const MAX_TARGETS: usize = 8;

impl SceneSpec {
    pub fn condition(&self) -> Condition {
        Condition::new(self.time, self.viewpoint, self.background_class)
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() || self.targets.len() > MAX_TARGETS {
            return Err(Error::InvalidArgument(format!(
                "scene has {} targets, expected 1..={MAX_TARGETS}",
                self.targets.len()
            )));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !(0.0..=1.0).contains(&t.temperature) {
                return Err(Error::InvalidArgument(format!("target {i} temperature {}", t.temperature)));
            }
            if !(t.size.0 > 0.0 && t.size.1 > 0.0) {
                return Err(Error::InvalidArgument(format!("target {i} has empty size")));
            }
            let (x0, y0, x1, y1) = t.unit_bounds();
            if x1 < 0.0 || y1 < 0.0 || x0 > 1.0 || y0 > 1.0 {
                return Err(Error::InvalidArgument(format!("target {i} lies outside the frame")));
            }
        }
        Ok(())
    }
}

/// Random scene for a condition: 1 to 4 people or vehicles at uniform
/// positions, with viewpoint-scaled sizes.
pub fn sample_scene(condition: Condition, rng: &mut Rng) -> SceneSpec {
    let count = 1 + rng.below(4);
    let scale = viewpoint_scale(condition.viewpoint);
    let targets = (0..count)
        .map(|_| {
            let class = if rng.uniform() < 0.5 {
                TargetClass::Person
            } else {
                TargetClass::Vehicle
            };
            let ((w0, w1), (h0, h1)) = class.size_range();
            let center = (rng.uniform(), rng.uniform());
            let size = (rng.range(w0, w1) * scale, rng.range(h0, h1) * scale);
            let heading = rng.range(0.0, PI);
            let (t0, t1) = class.temperature_range();
            let temperature = rng.range(t0, t1);
            Target {
                class,
                center,
                size,
                heading,
                temperature,
            }
        })
        .collect();
    SceneSpec {
        background_class: condition.background_class,
        time: condition.time,
        viewpoint: condition.viewpoint,
        targets,
    }
}

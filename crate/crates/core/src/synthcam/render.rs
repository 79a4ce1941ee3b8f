use crate::datapipe::{to_byte, Image, TimeOfDay};
use crate::error::{Error, Result};
use crate::numerics::Rng;

use super::scene::{SceneSpec, Target, TargetClass};

/// Output raster size. Visible renders have 3 channels, IR renders 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { width: 64, height: 64 }
    }
}

impl RenderConfig {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!("render size {width}x{height}")));
        }
        Ok(Self { width, height })
    }
}

/// Appearance parameters of a rendering family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderStyle {
    /// Value-noise octaves in the background texture.
    pub octaves: usize,
    /// Per-pixel Gaussian noise on the 0-255 visible scale (day).
    pub visible_noise: f64,
    /// Per-pixel Gaussian noise on the 0-255 IR scale.
    pub ir_noise: f64,
}

impl RenderStyle {
    /// The base renderer.
    pub const BASE: RenderStyle = RenderStyle {
        octaves: 2,
        visible_noise: 3.0,
        ir_noise: 2.0,
    };

    /// Higher-detail variant standing in for camera imagery.
    pub const DETAILED: RenderStyle = RenderStyle {
        octaves: 4,
        visible_noise: 6.0,
        ir_noise: 3.0,
    };
}

pub const NIGHT_LUMINANCE: f64 = 0.25;
pub const NIGHT_SENSOR_NOISE: f64 = 4.0;

/// Ambient term of the emission model.
pub fn ambient(time: TimeOfDay) -> f64 {
    match time {
        TimeOfDay::Day => 0.4,
        TimeOfDay::Night => 0.1,
    }
}

/// Background temperature on the unit scale.
pub fn background_temperature(time: TimeOfDay) -> f64 {
    match time {
        TimeOfDay::Day => 0.2,
        TimeOfDay::Night => 0.05,
    }
}

/// Noise-free IR intensity of a pixel at temperature `t`.
pub fn emission(time: TimeOfDay, t: f64) -> f64 {
    255.0 * (0.15 * ambient(time) + 0.85 * t)
}

/// Pixels covered by `target`. The pixel containing the (clamped) centre is
/// always included, so every target has a non-empty footprint.
pub fn footprint(target: &Target, cfg: RenderConfig) -> Vec<bool> {
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let (cx, cy) = (target.center.0 * w, target.center.1 * h);
    let (a, b) = (target.size.0 * w / 2.0, target.size.1 * h / 2.0);
    let (cos, sin) = (target.heading.cos(), target.heading.sin());
    let mut mask = vec![false; cfg.width * cfg.height];
    for py in 0..cfg.height {
        for px in 0..cfg.width {
            let dx = px as f64 + 0.5 - cx;
            let dy = py as f64 + 0.5 - cy;
            let u = dx * cos + dy * sin;
            let v = -dx * sin + dy * cos;
            mask[py * cfg.width + px] = match target.class {
                TargetClass::Person => (u / a).powi(2) + (v / b).powi(2) <= 1.0,
                TargetClass::Vehicle => u.abs() <= a && v.abs() <= b,
            };
        }
    }
    let px = (cx.floor().max(0.0) as usize).min(cfg.width - 1);
    let py = (cy.floor().max(0.0) as usize).min(cfg.height - 1);
    mask[py * cfg.width + px] = true;
    mask
}

/// Index of the topmost target covering each pixel (later targets occlude
/// earlier ones).
pub fn label_map(scene: &SceneSpec, cfg: RenderConfig) -> Vec<Option<usize>> {
    let mut labels = vec![None; cfg.width * cfg.height];
    for (i, t) in scene.targets.iter().enumerate() {
        for (l, m) in labels.iter_mut().zip(footprint(t, cfg)) {
            if m {
                *l = Some(i);
            }
        }
    }
    labels
}

fn palette(background_class: u32) -> ([f64; 3], [f64; 3]) {
    let mut rng = Rng::new(background_class as u64, "background-palette");
    let base = [rng.range(50.0, 170.0), rng.range(50.0, 170.0), rng.range(50.0, 170.0)];
    let accent = base.map(|c| (c + rng.range(-45.0, 45.0)).clamp(0.0, 255.0));
    (base, accent)
}

fn target_colour(class: TargetClass, index: usize) -> [f64; 3] {
    const PEOPLE: [[f64; 3]; 4] = [[185.0, 45.0, 40.0], [40.0, 60.0, 165.0], [205.0, 185.0, 70.0], [235.0, 235.0, 225.0]];
    const VEHICLES: [[f64; 3]; 4] = [[225.0, 225.0, 230.0], [25.0, 25.0, 30.0], [150.0, 25.0, 25.0], [30.0, 95.0, 165.0]];
    match class {
        TargetClass::Person => PEOPLE[index % 4],
        TargetClass::Vehicle => VEHICLES[index % 4],
    }
}

/// Smooth noise in `[0, 1]` built from `octaves` bilinear lattices of
/// doubling frequency and halving amplitude.
fn value_noise(cfg: RenderConfig, octaves: usize, rng: &mut Rng) -> Vec<f64> {
    let mut out = vec![0.0; cfg.width * cfg.height];
    let mut total = 0.0;
    for o in 0..octaves {
        let cells = 2usize << o;
        let amp = 0.5f64.powi(o as i32);
        total += amp;
        let lattice: Vec<f64> = (0..(cells + 1) * (cells + 1)).map(|_| rng.uniform()).collect();
        for py in 0..cfg.height {
            let fy = (py as f64 + 0.5) / cfg.height as f64 * cells as f64;
            let iy = fy.floor() as usize;
            let ty = fy - iy as f64;
            for px in 0..cfg.width {
                let fx = (px as f64 + 0.5) / cfg.width as f64 * cells as f64;
                let ix = fx.floor() as usize;
                let tx = fx - ix as f64;
                let at = |x: usize, y: usize| lattice[y * (cells + 1) + x];
                let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
                let bottom = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
                out[py * cfg.width + px] += amp * (top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    out.iter_mut().for_each(|v| *v /= total);
    out
}

/// Visible-light render with the base style.
pub fn render_visible(scene: &SceneSpec, cfg: RenderConfig, rng: &mut Rng) -> Result<Image> {
    render_visible_styled(scene, cfg, RenderStyle::BASE, rng)
}

/// Visible-light render: class-seeded textured terrain, flat-coloured
/// oriented targets, per-pixel noise, and a dimmed noisy sensor at night.
pub fn render_visible_styled(scene: &SceneSpec, cfg: RenderConfig, style: RenderStyle, rng: &mut Rng) -> Result<Image> {
    scene.validate()?;
    let (base, accent) = palette(scene.background_class);
    let texture = value_noise(cfg, style.octaves, &mut rng.fork("texture"));
    let labels = label_map(scene, cfg);
    let mut noise = rng.fork("pixel-noise");
    let night = scene.time == TimeOfDay::Night;
    let mut img = Image::filled(cfg.width, cfg.height, 3, 0)?;
    for py in 0..cfg.height {
        for px in 0..cfg.width {
            let k = py * cfg.width + px;
            let colour = match labels[k] {
                Some(i) => target_colour(scene.targets[i].class, i),
                None => {
                    let t = texture[k];
                    [0, 1, 2].map(|c| base[c] * (1.0 - t) + accent[c] * t)
                }
            };
            for (c, &v) in colour.iter().enumerate() {
                let mut v = v + style.visible_noise * noise.normal();
                if night {
                    v = v * NIGHT_LUMINANCE + NIGHT_SENSOR_NOISE * noise.normal();
                }
                img.set(px, py, c, to_byte(v));
            }
        }
    }
    Ok(img)
}

/// IR render with the base style.
pub fn render_ir(scene: &SceneSpec, cfg: RenderConfig, rng: &mut Rng) -> Result<Image> {
    render_ir_styled(scene, cfg, RenderStyle::BASE, rng)
}

/// Emission render: `255 * (0.15 * ambient + 0.85 * T)` plus sensor noise,
/// where `T` is the covering target's temperature or the background's.
pub fn render_ir_styled(scene: &SceneSpec, cfg: RenderConfig, style: RenderStyle, rng: &mut Rng) -> Result<Image> {
    scene.validate()?;
    let labels = label_map(scene, cfg);
    let mut noise = rng.fork("sensor-noise");
    let bg = background_temperature(scene.time);
    let mut img = Image::filled(cfg.width, cfg.height, 1, 0)?;
    for (k, label) in labels.iter().enumerate() {
        let t = label.map_or(bg, |i| scene.targets[i].temperature);
        let v = emission(scene.time, t) + style.ir_noise * noise.normal();
        img.pixels_mut()[k] = to_byte(v);
    }
    Ok(img)
}

/// Pixel-space box of one target's footprint, inclusive and clipped to the frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Annotation {
    pub class: TargetClass,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Annotation {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }
}

/// One box per target, bounding its full (unoccluded) footprint.
pub fn annotations(scene: &SceneSpec, cfg: RenderConfig) -> Vec<Annotation> {
    scene
        .targets
        .iter()
        .map(|t| {
            let mask = footprint(t, cfg);
            let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
            for (k, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
                let (x, y) = (k % cfg.width, k / cfg.width);
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
            Annotation {
                class: t.class,
                x0,
                y0,
                x1,
                y1,
            }
        })
        .collect()
}

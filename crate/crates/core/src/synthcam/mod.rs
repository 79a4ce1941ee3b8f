//! Procedural visible/IR scene generation, annotations and the selective blur.

mod blur;
mod generate;
mod manifest;
mod render;
mod scene;

pub use blur::{gaussian_weight, selective_gaussian_blur, DEFAULT_MAX_DELTA, DEFAULT_RADIUS};
pub use generate::{generate_dataset, generate_sample, ConditionMix, GenerateOptions};
pub use manifest::{read_dataset, write_dataset, MANIFEST_NAME};
pub use render::{
    ambient, annotations, background_temperature, emission, footprint, label_map, render_ir, render_ir_styled,
    render_visible, render_visible_styled, Annotation, RenderConfig, RenderStyle, NIGHT_LUMINANCE, NIGHT_SENSOR_NOISE,
};
pub use scene::{sample_scene, viewpoint_scale, SceneSpec, Target, TargetClass, MAX_TARGETS};

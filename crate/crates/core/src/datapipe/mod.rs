//! Images, portable pixmap I/O, normalization and dataset assembly.

mod dataset;
mod image;
pub mod pnm;
mod tags;

pub use dataset::{denormalize, family_counts, mix, normalize, split_by_condition, to_byte, Dataset, MixSpec, Sample};
pub use image::Image;
pub use pnm::{read_image, write_image};
pub use tags::{Condition, Family, TagFilter, Tags, TimeOfDay, Viewpoint};

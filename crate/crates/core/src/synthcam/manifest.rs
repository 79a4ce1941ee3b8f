use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::datapipe::{read_image, write_image, Condition, Dataset, Sample, Tags};
use crate::error::{Error, Result};

use super::render::Annotation;

/// File name of the manifest inside a dataset directory.
pub const MANIFEST_NAME: &str = "manifest.txt";

/// Writes every sample's images plus a manifest into `dir`.
///
/// Each sample contributes one tab-separated line
/// `index family time viewpoint background visible ir box_count`
/// followed by `box_count` lines `box: class x0 y0 x1 y1`. Image paths are
/// relative to `dir`; a missing IR image is written as `-`.
pub fn write_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut text = String::new();
    for (i, s) in ds.iter().enumerate() {
        let vis = format!("{i:05}_vis.{}", extension(s.visible.channels()));
        write_image(&s.visible, dir.join(&vis))?;
        let ir = match &s.ir {
            Some(img) => {
                let name = format!("{i:05}_ir.{}", extension(img.channels()));
                write_image(img, dir.join(&name))?;
                name
            }
            None => "-".to_string(),
        };
        let boxes = s.annotations.as_deref().unwrap_or(&[]);
        let c = s.tags.condition;
        let _ = writeln!(
            text,
            "{i}\t{}\t{}\t{}\t{}\t{vis}\t{ir}\t{}",
            s.tags.provenance,
            c.time,
            c.viewpoint,
            c.background_class,
            boxes.len()
        );
        for b in boxes {
            let _ = writeln!(text, "box: {} {} {} {} {}", b.class, b.x0, b.y0, b.x1, b.y1);
        }
    }
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn extension(channels: usize) -> &'static str {
    if channels == 3 {
        "ppm"
    } else {
        "pgm"
    }
}

/// Reads a directory written by [`write_dataset`].
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let mut samples = Vec::new();
    while let Some((ln, line)) = lines.next() {
        let bad = |msg: &str| Error::Format(format!("{}:{}: {msg}", path.display(), ln + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 8 {
            return Err(bad("expected 8 tab-separated fields"));
        }
        if fields[0].parse::<usize>().map_err(|_| bad("bad index"))? != samples.len() {
            return Err(bad("sample indices must be consecutive from 0"));
        }
        let condition = Condition::new(
            fields[2].parse()?,
            fields[3].parse()?,
            fields[4].parse().map_err(|_| bad("bad background class"))?,
        );
        let tags = Tags {
            provenance: fields[1].parse()?,
            condition,
        };
        let visible = read_image(dir.join(fields[5]))?;
        let count: usize = fields[7].parse().map_err(|_| bad("bad box count"))?;
        let mut boxes = Vec::with_capacity(count);
        for _ in 0..count {
            let (bl, bline) = lines.next().ok_or_else(|| bad("missing box lines"))?;
            boxes.push(parse_box(bline).map_err(|m| Error::Format(format!("{}:{}: {m}", path.display(), bl + 1)))?);
        }
        let mut sample = if fields[6] == "-" {
            Sample {
                visible,
                ir: None,
                tags,
                annotations: None,
            }
        } else {
            Sample::paired(visible, read_image(dir.join(fields[6]))?, tags)?
        };
        sample.annotations = Some(boxes);
        samples.push(sample);
    }
    Ok(Dataset::new(samples))
}

fn parse_box(line: &str) -> std::result::Result<Annotation, String> {
    let rest = line.strip_prefix("box:").ok_or("expected a `box:` line")?;
    let parts: Vec<&str> = rest.split_whitespace().collect();
    if parts.len() != 5 {
        return Err("box line needs class x0 y0 x1 y1".into());
    }
    let class = parts[0].parse().map_err(|e: Error| e.to_string())?;
    let n = |s: &str| s.parse::<usize>().map_err(|_| format!("bad coordinate `{s}`"));
    let b = Annotation {
        class,
        x0: n(parts[1])?,
        y0: n(parts[2])?,
        x1: n(parts[3])?,
        y1: n(parts[4])?,
    };
    if b.x0 > b.x1 || b.y0 > b.y1 {
        return Err("box corners out of order".into());
    }
    Ok(b)
}

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Generator architecture family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    Unet,
    Resnet,
}

/// How the noise input reaches the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ZMode {
    /// No noise input.
    None,
    /// Unit-Gaussian channels concatenated onto the image input.
    Channel,
}

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::Config(format!(concat!("unknown ", stringify!($name), " `{}`"), s))),
                }
            }
        }
    };
}

keyword_enum!(GeneratorKind { Unet => "unet", Resnet => "resnet" });
keyword_enum!(ZMode { None => "none", Channel => "channel" });

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub base_width: usize,
    /// Down/up levels of the U-Net.
    pub depth: usize,
    /// Residual blocks of the ResNet generator.
    pub res_blocks: usize,
    pub z_mode: ZMode,
    pub z_channels: usize,
}

impl GeneratorSpec {
    pub fn unet(in_channels: usize, out_channels: usize) -> Self {
        Self {
            kind: GeneratorKind::Unet,
            in_channels,
            out_channels,
            base_width: 16,
            depth: 4,
            res_blocks: 3,
            z_mode: ZMode::None,
            z_channels: 1,
        }
    }

    pub fn resnet(in_channels: usize, out_channels: usize) -> Self {
        Self {
            kind: GeneratorKind::Resnet,
            ..Self::unet(in_channels, out_channels)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.base_width == 0 {
            return Err(Error::InvalidArgument("generator channels and width must be positive".into()));
        }
        if self.kind == GeneratorKind::Unet && self.depth == 0 {
            return Err(Error::InvalidArgument("unet depth must be at least 1".into()));
        }
        if self.z_mode == ZMode::Channel && self.z_channels == 0 {
            return Err(Error::InvalidArgument("z_mode channel needs z_channels >= 1".into()));
        }
        Ok(())
    }

    /// Channels entering the first layer (image plus noise).
    pub fn input_channels(&self) -> usize {
        match self.z_mode {
            ZMode::None => self.in_channels,
            ZMode::Channel => self.in_channels + self.z_channels,
        }
    }

    /// Spatial extents must be multiples of this.
    pub fn size_multiple(&self) -> usize {
        match self.kind {
            GeneratorKind::Unet => 1 << self.depth,
            GeneratorKind::Resnet => 4,
        }
    }

    pub fn check_extent(&self, height: usize, width: usize) -> Result<()> {
        let m = self.size_multiple();
        if height == 0 || width == 0 || height % m != 0 || width % m != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} generator needs extents divisible by {m}, got {height}x{width}",
                self.kind
            )));
        }
        Ok(())
    }

    pub(crate) fn layers(&self) -> Vec<Layer> {
        match self.kind {
            GeneratorKind::Unet => unet_layers(self),
            GeneratorKind::Resnet => resnet_layers(self),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscriminatorSpec {
    pub conditional: bool,
    pub y_channels: usize,
    /// Conditioning channels, used only when `conditional`.
    pub x_channels: usize,
    /// Width of each of the four body layers; the last entry repeats if
    /// fewer than four are given.
    pub widths: Vec<usize>,
}

/// Strides of the four body layers; the head uses stride 1.
pub const DISCRIMINATOR_STRIDES: [usize; 4] = [2, 2, 2, 1];

impl DiscriminatorSpec {
    pub fn conditional(y_channels: usize, x_channels: usize) -> Self {
        Self {
            conditional: true,
            y_channels,
            x_channels,
            widths: vec![32, 64, 128],
        }
    }

    pub fn unconditional(y_channels: usize) -> Self {
        Self {
            conditional: false,
            y_channels,
            x_channels: 0,
            widths: vec![32, 64, 128],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.y_channels == 0 || (self.conditional && self.x_channels == 0) {
            return Err(Error::InvalidArgument("discriminator channels must be positive".into()));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::InvalidArgument("discriminator widths must be non-empty and positive".into()));
        }
        Ok(())
    }

    pub fn input_channels(&self) -> usize {
        if self.conditional {
            self.y_channels + self.x_channels
        } else {
            self.y_channels
        }
    }

    pub fn width(&self, layer: usize) -> usize {
        self.widths[layer.min(self.widths.len() - 1)]
    }

    /// Extent of the patch map for an `height x width` input.
    pub fn output_extent(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        let (mut h, mut w) = (height, width);
        for l in self.layers() {
            let next = |s| crate::numerics::conv_out_extent(s, l.kernel, l.stride, l.pad);
            match (next(h), next(w)) {
                (Some(nh), Some(nw)) if nh > 0 && nw > 0 => (h, w) = (nh, nw),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "discriminator cannot process {height}x{width} inputs"
                    )))
                }
            }
        }
        Ok((h, w))
    }

    pub(crate) fn layers(&self) -> Vec<Layer> {
        let mut out = Vec::new();
        let mut cin = self.input_channels();
        for (i, &stride) in DISCRIMINATOR_STRIDES.iter().enumerate() {
            let cout = self.width(i);
            out.push(Layer::conv(format!("body{i}"), cin, cout, 4, stride, 1, i > 0));
            cin = cout;
        }
        out.push(Layer::conv("head", cin, 1, 4, 1, 1, false));
        out
    }
}

/// One convolutional layer with optional instance norm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Layer {
    pub name: String,
    pub transpose: bool,
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub norm: bool,
}

impl Layer {
    fn conv(name: impl Into<String>, cin: usize, cout: usize, kernel: usize, stride: usize, pad: usize, norm: bool) -> Self {
        Self {
            name: name.into(),
            transpose: false,
            cin,
            cout,
            kernel,
            stride,
            pad,
            norm,
        }
    }

    fn up(name: impl Into<String>, cin: usize, cout: usize, norm: bool) -> Self {
        Self {
            transpose: true,
            ..Self::conv(name, cin, cout, 4, 2, 1, norm)
        }
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        if self.transpose {
            [self.cin, self.cout, self.kernel, self.kernel]
        } else {
            [self.cout, self.cin, self.kernel, self.kernel]
        }
    }
}

/// Encoder `enc{i}` halves the extent and widens to `base * 2^i`; decoder
/// `dec{i}` reads the concatenation of the level above and `enc{i}`.
fn unet_layers(s: &GeneratorSpec) -> Vec<Layer> {
    let d = s.depth;
    let b = s.base_width;
    let mut out = Vec::new();
    let mut cin = s.input_channels();
    for i in 0..d {
        let cout = b << i;
        out.push(Layer::conv(format!("enc{i}"), cin, cout, 4, 2, 1, i > 0 && i + 1 < d));
        cin = cout;
    }
    for i in (1..d).rev() {
        let cin = if i + 1 == d { b << i } else { 2 * (b << i) };
        out.push(Layer::up(format!("dec{i}"), cin, b << (i - 1), true));
    }
    let cin = if d == 1 { b } else { 2 * b };
    out.push(Layer::up("out", cin, s.out_channels, false));
    out
}

fn resnet_layers(s: &GeneratorSpec) -> Vec<Layer> {
    let b = s.base_width;
    let mut out = vec![
        Layer::conv("stem", s.input_channels(), b, 3, 1, 1, true),
        Layer::conv("down0", b, 2 * b, 4, 2, 1, true),
        Layer::conv("down1", 2 * b, 4 * b, 4, 2, 1, true),
    ];
    for i in 0..s.res_blocks {
        out.push(Layer::conv(format!("res{i}.a"), 4 * b, 4 * b, 3, 1, 1, true));
        out.push(Layer::conv(format!("res{i}.b"), 4 * b, 4 * b, 3, 1, 1, true));
    }
    out.push(Layer::up("up0", 4 * b, 2 * b, true));
    out.push(Layer::up("up1", 2 * b, b, true));
    out.push(Layer::conv("head", b, s.out_channels, 3, 1, 1, false));
    out
}

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::{DiscriminatorSpec, GeneratorSpec, ZMode};
use crate::objectives::LossWeights;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Paired conditional training of one U-Net generator.
    Cgan,
    /// Unpaired two-generator training with cycle consistency.
    Cyclegan,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Cgan => "cgan",
            Algorithm::Cyclegan => "cyclegan",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cgan" => Ok(Algorithm::Cgan),
            "cyclegan" => Ok(Algorithm::Cyclegan),
            _ => Err(Error::Config(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Visible images have three channels, IR images one.
pub const VISIBLE_CHANNELS: usize = 3;
pub const IR_CHANNELS: usize = 1;

/// Complete description of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub lr_d: f64,
    pub lr_g: f64,
    pub weights: LossWeights,
    pub batch: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub z_mode: ZMode,
    pub z_channels: usize,
    pub width: usize,
    pub height: usize,
    /// Convergence window W.
    pub window: usize,
    /// Convergence tolerance.
    pub tau: f64,
    pub base_width: usize,
    pub depth: usize,
    pub res_blocks: usize,
    pub d_widths: Vec<usize>,
    /// Record elapsed seconds per epoch; when false the column is 0 so run
    /// records are byte-reproducible.
    pub wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Cgan,
            lr_d: 0.005,
            lr_g: 0.005,
            weights: LossWeights::default(),
            batch: 4,
            max_epochs: 10_000,
            seed: 0,
            z_mode: ZMode::Channel,
            z_channels: 1,
            width: 64,
            height: 64,
            window: 50,
            tau: 1e-3,
            base_width: 16,
            depth: 4,
            res_blocks: 3,
            d_widths: vec![32, 64, 128],
            wall_time: true,
        }
    }
}

/// Keys accepted in config files, in the order they are written.
pub const CONFIG_KEYS: &[&str] = &[
    "algorithm",
    "lr_d",
    "lr_g",
    "lambda_l1",
    "lambda_cyc",
    "g_adv_mode",
    "batch",
    "max_epochs",
    "seed",
    "z_mode",
    "z_channels",
    "width",
    "height",
    "window",
    "tau",
    "base_width",
    "depth",
    "res_blocks",
    "d_widths",
    "wall_time",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

/// Splits `key = value` lines, skipping blanks and `#` comments.
pub(crate) fn key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl TrainConfig {
    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "algorithm" => self.algorithm = value.parse()?,
            "lr_d" => self.lr_d = num(key, value)?,
            "lr_g" => self.lr_g = num(key, value)?,
            "lambda_l1" => self.weights.lambda_l1 = num(key, value)?,
            "lambda_cyc" => self.weights.lambda_cyc = num(key, value)?,
            "g_adv_mode" => self.weights.g_adv_mode = value.parse()?,
            "batch" => self.batch = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "z_mode" => self.z_mode = value.parse()?,
            "z_channels" => self.z_channels = num(key, value)?,
            "width" => self.width = num(key, value)?,
            "height" => self.height = num(key, value)?,
            "window" => self.window = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "base_width" => self.base_width = num(key, value)?,
            "depth" => self.depth = num(key, value)?,
            "res_blocks" => self.res_blocks = num(key, value)?,
            "d_widths" => {
                self.d_widths = value
                    .split(',')
                    .map(|w| num(key, w.trim()))
                    .collect::<Result<Vec<usize>>>()?
            }
            "wall_time" => self.wall_time = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Text form of one field.
    pub fn get(&self, key: &str) -> Result<String> {
        Ok(match key {
            "algorithm" => self.algorithm.to_string(),
            "lr_d" => self.lr_d.to_string(),
            "lr_g" => self.lr_g.to_string(),
            "lambda_l1" => self.weights.lambda_l1.to_string(),
            "lambda_cyc" => self.weights.lambda_cyc.to_string(),
            "g_adv_mode" => self.weights.g_adv_mode.to_string(),
            "batch" => self.batch.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "seed" => self.seed.to_string(),
            "z_mode" => self.z_mode.to_string(),
            "z_channels" => self.z_channels.to_string(),
            "width" => self.width.to_string(),
            "height" => self.height.to_string(),
            "window" => self.window.to_string(),
            "tau" => self.tau.to_string(),
            "base_width" => self.base_width.to_string(),
            "depth" => self.depth.to_string(),
            "res_blocks" => self.res_blocks.to_string(),
            "d_widths" => self.d_widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","),
            "wall_time" => self.wall_time.to_string(),
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        })
    }

    /// Parses `key = value` text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (line, k, v) in key_values(text)? {
            cfg.set(&k, &v)
                .map_err(|e| Error::Config(format!("line {line}: {}", strip_prefix(e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key on its own line; [`TrainConfig::parse`] inverts it exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in CONFIG_KEYS {
            let _ = writeln!(s, "{k} = {}", self.get(k).expect("listed key"));
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr_d > 0.0 && self.lr_d.is_finite() && self.lr_g > 0.0 && self.lr_g.is_finite()) {
            return bad(format!("learning rates must be positive, got {} and {}", self.lr_d, self.lr_g));
        }
        if self.batch == 0 || self.max_epochs == 0 {
            return bad("batch and max_epochs must be at least 1".into());
        }
        if self.window < 2 || !(self.tau >= 0.0) {
            return bad("window must be >= 2 and tau non-negative".into());
        }
        if self.width == 0 || self.height == 0 || self.base_width == 0 || self.depth == 0 {
            return bad("image size, base_width and depth must be positive".into());
        }
        if self.d_widths.is_empty() || self.d_widths.contains(&0) {
            return bad("d_widths must be a non-empty list of positive widths".into());
        }
        if self.z_mode == ZMode::Channel && self.z_channels == 0 {
            return bad("z_channels must be positive when z_mode = channel".into());
        }
        self.weights.validate()?;
        let extent = |r: Result<()>| r.map_err(|e| Error::Config(strip_prefix(e)));
        for role in self.generator_roles() {
            extent(self.generator_spec(role)?.check_extent(self.height, self.width))?;
        }
        for role in self.discriminator_roles() {
            extent(self.discriminator_spec(role)?.output_extent(self.height, self.width).map(|_| ()))?;
        }
        Ok(())
    }

    pub fn generator_roles(&self) -> &'static [&'static str] {
        match self.algorithm {
            Algorithm::Cgan => &["g"],
            Algorithm::Cyclegan => &["g_ab", "g_ba"],
        }
    }

    pub fn discriminator_roles(&self) -> &'static [&'static str] {
        match self.algorithm {
            Algorithm::Cgan => &["d"],
            Algorithm::Cyclegan => &["d_a", "d_b"],
        }
    }

    /// Architecture of the generator with the given role. The conditional
    /// generator is a U-Net with the configured noise input; the cycle
    /// generators are noise-free ResNets.
    pub fn generator_spec(&self, role: &str) -> Result<GeneratorSpec> {
        let (base, cin, cout) = match (self.algorithm, role) {
            (Algorithm::Cgan, "g") => (GeneratorSpec::unet(VISIBLE_CHANNELS, IR_CHANNELS), VISIBLE_CHANNELS, IR_CHANNELS),
            (Algorithm::Cyclegan, "g_ab") => {
                (GeneratorSpec::resnet(VISIBLE_CHANNELS, IR_CHANNELS), VISIBLE_CHANNELS, IR_CHANNELS)
            }
            (Algorithm::Cyclegan, "g_ba") => {
                (GeneratorSpec::resnet(IR_CHANNELS, VISIBLE_CHANNELS), IR_CHANNELS, VISIBLE_CHANNELS)
            }
            _ => return Err(Error::Config(format!("no generator `{role}` in a {} run", self.algorithm))),
        };
        let (z_mode, z_channels) = match self.algorithm {
            Algorithm::Cgan => (self.z_mode, self.z_channels),
            Algorithm::Cyclegan => (ZMode::None, 1),
        };
        Ok(GeneratorSpec {
            in_channels: cin,
            out_channels: cout,
            base_width: self.base_width,
            depth: self.depth,
            res_blocks: self.res_blocks,
            z_mode,
            z_channels,
            ..base
        })
    }

    pub fn discriminator_spec(&self, role: &str) -> Result<DiscriminatorSpec> {
        let spec = match (self.algorithm, role) {
            (Algorithm::Cgan, "d") => DiscriminatorSpec::conditional(IR_CHANNELS, VISIBLE_CHANNELS),
            (Algorithm::Cyclegan, "d_a") => DiscriminatorSpec::unconditional(VISIBLE_CHANNELS),
            (Algorithm::Cyclegan, "d_b") => DiscriminatorSpec::unconditional(IR_CHANNELS),
            _ => return Err(Error::Config(format!("no discriminator `{role}` in a {} run", self.algorithm))),
        };
        Ok(DiscriminatorSpec {
            widths: self.d_widths.clone(),
            ..spec
        })
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

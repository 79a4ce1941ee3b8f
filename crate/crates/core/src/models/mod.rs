//! U-Net and ResNet generators and the patch discriminator.

mod spec;

pub use spec::{DiscriminatorSpec, GeneratorKind, GeneratorSpec, ZMode, DISCRIMINATOR_STRIDES};

use crate::error::{Error, Result};
use crate::numerics::{gaussian_init, Activation, Bound, Graph, ParamStore, Real, Rng, Tensor, Var};

use spec::Layer;

/// Instance-norm epsilon used by every model.
pub const NORM_EPS: f64 = 1e-5;
/// Standard deviation of the initial weight draws.
pub const INIT_STD: f64 = 0.02;
/// Negative slope of the encoder and discriminator activations.
pub const LEAKY_SLOPE: f64 = 0.2;

/// An architecture description together with its parameters.
#[derive(Clone, Debug)]
pub struct Model<S, T = f32> {
    pub spec: S,
    pub params: ParamStore<T>,
}

impl<S: PartialEq, T: Real> PartialEq for Model<S, T> {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.params == other.params
    }
}

pub type Generator<T = f32> = Model<GeneratorSpec, T>;
pub type Discriminator<T = f32> = Model<DiscriminatorSpec, T>;

impl<S: Clone, T: Real> Model<S, T> {
    pub fn param_count(&self) -> usize {
        self.params.numel()
    }

    pub fn cast<U: Real>(&self) -> Model<S, U> {
        Model {
            spec: self.spec.clone(),
            params: self.params.cast(),
        }
    }
}

fn build_params<T: Real>(layers: &[Layer], rng: &Rng) -> Result<ParamStore<T>> {
    let mut store = ParamStore::new();
    for l in layers {
        let mut draw = |suffix: &str, shape: &[usize], mean: f64| -> Result<()> {
            let name = format!("{}.{suffix}", l.name);
            let t = gaussian_init(shape, mean, INIT_STD, &mut rng.fork(&name))?;
            store.insert(name, t).map(|_| ())
        };
        draw("weight", &l.weight_shape(), 0.0)?;
        if l.norm {
            draw("gamma", &[l.cout], 1.0)?;
            draw("beta", &[l.cout], 0.0)?;
        } else {
            draw("bias", &[l.cout], 0.0)?;
        }
    }
    Ok(store)
}

/// Builds a generator with every parameter drawn from a normal distribution
/// of standard deviation 0.02 (mean 1 for norm scales, 0 otherwise). Each
/// parameter uses its own stream `<rng>/<name>`. Layers followed by
/// instance norm carry no bias.
pub fn build_generator<T: Real>(spec: &GeneratorSpec, rng: &Rng) -> Result<Generator<T>> {
    spec.validate()?;
    Ok(Model {
        spec: spec.clone(),
        params: build_params(&spec.layers(), rng)?,
    })
}

pub fn build_discriminator<T: Real>(spec: &DiscriminatorSpec, rng: &Rng) -> Result<Discriminator<T>> {
    spec.validate()?;
    Ok(Model {
        spec: spec.clone(),
        params: build_params(&spec.layers(), rng)?,
    })
}

fn apply_layer<T: Real>(g: &mut Graph<T>, p: &Bound<'_, T>, l: &Layer, x: Var) -> Result<Var> {
    let w = p.get(&format!("{}.weight", l.name))?;
    // A bias ahead of instance norm would be cancelled by the mean subtraction.
    let b = if l.norm {
        g.constant(Tensor::zeros(&[l.cout]))?
    } else {
        p.get(&format!("{}.bias", l.name))?
    };
    let y = if l.transpose {
        g.conv_transpose2d(x, w, b, l.stride, l.pad)?
    } else {
        g.conv2d(x, w, b, l.stride, l.pad)?
    };
    if !l.norm {
        return Ok(y);
    }
    let gamma = p.get(&format!("{}.gamma", l.name))?;
    let beta = p.get(&format!("{}.beta", l.name))?;
    g.instance_norm(y, gamma, beta, NORM_EPS)
}

fn leaky<T: Real>(g: &mut Graph<T>, x: Var) -> Result<Var> {
    g.activation(x, Activation::LeakyRelu(LEAKY_SLOPE))
}

fn expect_channels<T: Real>(g: &Graph<T>, v: Var, channels: usize, what: &str) -> Result<(usize, usize, usize)> {
    let (n, c, h, w) = g.value(v).dims4()?;
    if c != channels {
        return Err(Error::Shape(format!("{what} has {c} channels, expected {channels}")));
    }
    Ok((n, h, w))
}

/// Generator forward pass on a graph whose parameters are bound in `p`.
pub fn generator_graph<T: Real>(
    spec: &GeneratorSpec,
    g: &mut Graph<T>,
    p: &Bound<'_, T>,
    x: Var,
    z: Option<Var>,
) -> Result<Var> {
    let (n, h, w) = expect_channels(g, x, spec.in_channels, "generator input")?;
    spec.check_extent(h, w)?;
    let input = match (spec.z_mode, z) {
        (ZMode::None, None) => x,
        (ZMode::Channel, Some(z)) => {
            let dims = g.value(z).dims4()?;
            if dims != (n, spec.z_channels, h, w) {
                return Err(Error::Shape(format!(
                    "noise shape {:?}, expected [{n}, {}, {h}, {w}]",
                    g.value(z).shape(),
                    spec.z_channels
                )));
            }
            g.concat_channels(x, z)?
        }
        (ZMode::None, Some(_)) => {
            return Err(Error::InvalidArgument("generator has z_mode none but noise was given".into()))
        }
        (ZMode::Channel, None) => {
            return Err(Error::InvalidArgument("generator has z_mode channel but no noise was given".into()))
        }
    };
    let layers = spec.layers();
    match spec.kind {
        GeneratorKind::Unet => unet_forward(spec.depth, &layers, g, p, input),
        GeneratorKind::Resnet => resnet_forward(spec.res_blocks, &layers, g, p, input),
    }
}

fn unet_forward<T: Real>(depth: usize, layers: &[Layer], g: &mut Graph<T>, p: &Bound<'_, T>, input: Var) -> Result<Var> {
    let mut skips = Vec::with_capacity(depth);
    let mut h = input;
    for l in &layers[..depth] {
        let y = apply_layer(g, p, l, h)?;
        h = leaky(g, y)?;
        skips.push(h);
    }
    let mut up: Option<Var> = None;
    for (l, level) in layers[depth..2 * depth - 1].iter().zip((1..depth).rev()) {
        let inp = match up {
            None => skips[level],
            Some(u) => g.concat_channels(u, skips[level])?,
        };
        let y = apply_layer(g, p, l, inp)?;
        up = Some(g.activation(y, Activation::Relu)?);
    }
    let inp = match up {
        None => skips[0],
        Some(u) => g.concat_channels(u, skips[0])?,
    };
    let y = apply_layer(g, p, &layers[2 * depth - 1], inp)?;
    g.activation(y, Activation::Tanh)
}

fn resnet_forward<T: Real>(blocks: usize, layers: &[Layer], g: &mut Graph<T>, p: &Bound<'_, T>, input: Var) -> Result<Var> {
    let mut h = input;
    for l in &layers[..3] {
        let y = apply_layer(g, p, l, h)?;
        h = leaky(g, y)?;
    }
    for i in 0..blocks {
        let a = apply_layer(g, p, &layers[3 + 2 * i], h)?;
        let a = g.activation(a, Activation::Relu)?;
        let b = apply_layer(g, p, &layers[4 + 2 * i], a)?;
        h = g.add(h, b)?;
    }
    let rest = &layers[3 + 2 * blocks..];
    for l in &rest[..2] {
        let y = apply_layer(g, p, l, h)?;
        h = g.activation(y, Activation::Relu)?;
    }
    let y = apply_layer(g, p, &rest[2], h)?;
    g.activation(y, Activation::Tanh)
}

/// Discriminator forward pass; returns the patch probability map.
pub fn discriminator_graph<T: Real>(
    spec: &DiscriminatorSpec,
    g: &mut Graph<T>,
    p: &Bound<'_, T>,
    y: Var,
    x: Option<Var>,
) -> Result<Var> {
    expect_channels(g, y, spec.y_channels, "discriminator target input")?;
    let mut h = match (spec.conditional, x) {
        (false, None) => y,
        (true, Some(x)) => {
            expect_channels(g, x, spec.x_channels, "discriminator condition input")?;
            g.concat_channels(y, x)?
        }
        (true, None) => return Err(Error::InvalidArgument("conditional discriminator needs a condition input".into())),
        (false, Some(_)) => {
            return Err(Error::InvalidArgument("unconditional discriminator takes no condition input".into()))
        }
    };
    let layers = spec.layers();
    let (head, body) = layers.split_last().expect("discriminator has layers");
    for l in body {
        let v = apply_layer(g, p, l, h)?;
        h = leaky(g, v)?;
    }
    let logits = apply_layer(g, p, head, h)?;
    g.activation(logits, Activation::Sigmoid)
}

/// Value-level generator evaluation.
pub fn generator_forward<T: Real>(model: &Generator<T>, x: &Tensor<T>, z: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    let mut g = Graph::new();
    let p = g.bind_frozen(&model.params)?;
    let xv = g.constant(x.clone())?;
    let zv = z.map(|z| g.constant(z.clone())).transpose()?;
    let out = generator_graph(&model.spec, &mut g, &p, xv, zv)?;
    Ok(g.value(out).clone())
}

/// Value-level discriminator evaluation.
pub fn discriminator_forward<T: Real>(model: &Discriminator<T>, y: &Tensor<T>, x: Option<&Tensor<T>>) -> Result<Tensor<T>> {
    let mut g = Graph::new();
    let p = g.bind_frozen(&model.params)?;
    let yv = g.constant(y.clone())?;
    let xv = x.map(|x| g.constant(x.clone())).transpose()?;
    let out = discriminator_graph(&model.spec, &mut g, &p, yv, xv)?;
    Ok(g.value(out).clone())
}

/// Unit-Gaussian noise matching `spec`'s z input for a batch of `n` images
/// of extent `h x w`, or `None` when the generator takes no noise.
pub fn sample_noise<T: Real>(spec: &GeneratorSpec, n: usize, h: usize, w: usize, rng: &mut Rng) -> Result<Option<Tensor<T>>> {
    match spec.z_mode {
        ZMode::None => Ok(None),
        ZMode::Channel => gaussian_init(&[n, spec.z_channels, h, w], 0.0, 1.0, rng).map(Some),
    }
}

#[cfg(test)]
mod tests;

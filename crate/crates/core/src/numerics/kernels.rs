//! Slice-level convolution, normalization and activation kernels shared by
//! the value API and the autodiff tape.

use crate::error::{Error, Result};

use super::real::matmul;
use super::Real;

/// Sliding-window geometry of a cross-correlation from an image of
/// `c x h x w` to an output grid of `oh x ow`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Geometry {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }
}

/// Output extent of a strided correlation, if positive.
pub fn conv_out_extent(size: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    if stride == 0 || size + 2 * pad < kernel {
        return None;
    }
    Some((size + 2 * pad - kernel) / stride + 1)
}

/// Output extent of a transposed correlation, if positive.
pub fn conv_transpose_out_extent(size: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    if stride == 0 || size == 0 {
        return None;
    }
    let full = (size - 1) * stride + kernel;
    (full > 2 * pad).then(|| full - 2 * pad)
}

fn im2col<T: Real>(src: &[T], g: &Geometry, cols: &mut [T]) {
    let p = g.cols();
    for ci in 0..g.c {
        let plane = &src[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let out = &mut cols[row * p..(row + 1) * p];
                for oy in 0..g.oh {
                    let y = (oy * g.stride + ki) as isize - g.pad as isize;
                    let dst = &mut out[oy * g.ow..(oy + 1) * g.ow];
                    if y < 0 || y >= g.h as isize {
                        dst.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let line = &plane[y as usize * g.w..(y as usize + 1) * g.w];
                    for (ox, v) in dst.iter_mut().enumerate() {
                        let x = (ox * g.stride + kj) as isize - g.pad as isize;
                        *v = if x < 0 || x >= g.w as isize {
                            T::zero()
                        } else {
                            line[x as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im<T: Real>(cols: &[T], g: &Geometry, dst: &mut [T]) {
    let p = g.cols();
    for ci in 0..g.c {
        let plane = &mut dst[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..g.oh {
                    let y = (oy * g.stride + ki) as isize - g.pad as isize;
                    if y < 0 || y >= g.h as isize {
                        continue;
                    }
                    let line = &mut plane[y as usize * g.w..(y as usize + 1) * g.w];
                    for ox in 0..g.ow {
                        let x = (ox * g.stride + kj) as isize - g.pad as isize;
                        if x >= 0 && x < g.w as isize {
                            line[x as usize] = line[x as usize] + src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Shapes of a correlation call: input `(n, c, h, w)`, weight `(o, c, kh, kw)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvShape {
    pub n: usize,
    pub o: usize,
    pub geom: Geometry,
}

pub(crate) fn conv2d_shape(
    x: &[usize],
    w: &[usize],
    bias: &[usize],
    stride: usize,
    pad: usize,
) -> Result<ConvShape> {
    let (&[n, c, h, wd], &[o, wc, kh, kw]) = (x, w) else {
        return Err(Error::Shape(format!("conv2d expects NCHW input and OIHW weight, got {x:?} and {w:?}")));
    };
    if wc != c {
        return Err(Error::Shape(format!("weight expects {wc} input channels, input has {c}")));
    }
    if bias != [o] {
        return Err(Error::Shape(format!("bias shape {bias:?}, expected [{o}]")));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let (Some(oh), Some(ow)) = (
        conv_out_extent(h, kh, stride, pad),
        conv_out_extent(wd, kw, stride, pad),
    ) else {
        return Err(Error::Shape(format!(
            "non-positive output extent for {h}x{wd} input, {kh}x{kw} kernel, pad {pad}"
        )));
    };
    Ok(ConvShape {
        n,
        o,
        geom: Geometry { c, h, w: wd, kh, kw, stride, pad, oh, ow },
    })
}

/// Transposed shapes: input `(n, ci, h, w)`, weight `(ci, co, kh, kw)`. The
/// returned geometry describes the forward correlation from the output grid
/// back onto the input grid.
pub(crate) fn conv_transpose2d_shape(
    x: &[usize],
    w: &[usize],
    bias: &[usize],
    stride: usize,
    pad: usize,
) -> Result<ConvShape> {
    let (&[n, ci, h, wd], &[wci, co, kh, kw]) = (x, w) else {
        return Err(Error::Shape(format!(
            "conv_transpose2d expects NCHW input and (Cin, Cout, KH, KW) weight, got {x:?} and {w:?}"
        )));
    };
    if wci != ci {
        return Err(Error::Shape(format!("weight expects {wci} input channels, input has {ci}")));
    }
    if bias != [co] {
        return Err(Error::Shape(format!("bias shape {bias:?}, expected [{co}]")));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let (Some(oh), Some(ow)) = (
        conv_transpose_out_extent(h, kh, stride, pad),
        conv_transpose_out_extent(wd, kw, stride, pad),
    ) else {
        return Err(Error::Shape(format!(
            "non-positive output extent for transposed {h}x{wd} input, {kh}x{kw} kernel, stride {stride}, pad {pad}"
        )));
    };
    Ok(ConvShape {
        n,
        o: co,
        geom: Geometry { c: co, h: oh, w: ow, kh, kw, stride, pad, oh: h, ow: wd },
    })
}

pub(crate) fn conv2d_forward<T: Real>(s: &ConvShape, x: &[T], w: &[T], bias: &[T]) -> Vec<T> {
    let g = &s.geom;
    let (r, p) = (g.rows(), g.cols());
    let in_len = g.c * g.h * g.w;
    let mut cols = vec![T::zero(); r * p];
    let mut out = vec![T::zero(); s.n * s.o * p];
    for i in 0..s.n {
        im2col(&x[i * in_len..(i + 1) * in_len], g, &mut cols);
        let dst = &mut out[i * s.o * p..(i + 1) * s.o * p];
        matmul(s.o, r, p, w, false, &cols, false, dst, false);
        for (oc, b) in bias.iter().enumerate() {
            dst[oc * p..(oc + 1) * p].iter_mut().for_each(|v| *v = *v + *b);
        }
    }
    out
}

pub(crate) struct ConvGrads<T> {
    pub dx: Option<Vec<T>>,
    pub dw: Option<Vec<T>>,
    pub db: Option<Vec<T>>,
}

pub(crate) fn conv2d_backward<T: Real>(
    s: &ConvShape,
    x: &[T],
    w: &[T],
    dout: &[T],
    need: (bool, bool, bool),
) -> ConvGrads<T> {
    let g = &s.geom;
    let (r, p) = (g.rows(), g.cols());
    let in_len = g.c * g.h * g.w;
    let mut cols = vec![T::zero(); r * p];
    let mut dx = need.0.then(|| vec![T::zero(); s.n * in_len]);
    let mut dw = need.1.then(|| vec![T::zero(); s.o * r]);
    let mut db = need.2.then(|| vec![T::zero(); s.o]);
    for i in 0..s.n {
        let dout_i = &dout[i * s.o * p..(i + 1) * s.o * p];
        if let Some(dw) = dw.as_mut() {
            im2col(&x[i * in_len..(i + 1) * in_len], g, &mut cols);
            matmul(s.o, p, r, dout_i, false, &cols, true, dw, true);
        }
        if let Some(dx) = dx.as_mut() {
            matmul(r, s.o, p, w, true, dout_i, false, &mut cols, false);
            col2im(&cols, g, &mut dx[i * in_len..(i + 1) * in_len]);
        }
        if let Some(db) = db.as_mut() {
            for (oc, b) in db.iter_mut().enumerate() {
                *b = *b + dout_i[oc * p..(oc + 1) * p].iter().copied().sum();
            }
        }
    }
    ConvGrads { dx, dw, db }
}

pub(crate) fn conv_transpose2d_forward<T: Real>(s: &ConvShape, x: &[T], w: &[T], bias: &[T]) -> Vec<T> {
    let g = &s.geom;
    let (r, p) = (g.rows(), g.cols());
    let ci = x.len() / (s.n * p);
    let out_len = g.c * g.h * g.w;
    let mut cols = vec![T::zero(); r * p];
    let mut out = vec![T::zero(); s.n * out_len];
    for i in 0..s.n {
        matmul(r, ci, p, w, true, &x[i * ci * p..(i + 1) * ci * p], false, &mut cols, false);
        let dst = &mut out[i * out_len..(i + 1) * out_len];
        col2im(&cols, g, dst);
        let plane = g.h * g.w;
        for (oc, b) in bias.iter().enumerate() {
            dst[oc * plane..(oc + 1) * plane].iter_mut().for_each(|v| *v = *v + *b);
        }
    }
    out
}

pub(crate) fn conv_transpose2d_backward<T: Real>(
    s: &ConvShape,
    x: &[T],
    w: &[T],
    dout: &[T],
    need: (bool, bool, bool),
) -> ConvGrads<T> {
    let g = &s.geom;
    let (r, p) = (g.rows(), g.cols());
    let ci = x.len() / (s.n * p);
    let out_len = g.c * g.h * g.w;
    let plane = g.h * g.w;
    let mut cols = vec![T::zero(); r * p];
    let mut dx = need.0.then(|| vec![T::zero(); s.n * ci * p]);
    let mut dw = need.1.then(|| vec![T::zero(); ci * r]);
    let mut db = need.2.then(|| vec![T::zero(); g.c]);
    for i in 0..s.n {
        let dout_i = &dout[i * out_len..(i + 1) * out_len];
        if dx.is_some() || dw.is_some() {
            im2col(dout_i, g, &mut cols);
        }
        if let Some(dx) = dx.as_mut() {
            matmul(ci, r, p, w, false, &cols, false, &mut dx[i * ci * p..(i + 1) * ci * p], false);
        }
        if let Some(dw) = dw.as_mut() {
            matmul(ci, p, r, &x[i * ci * p..(i + 1) * ci * p], false, &cols, true, dw, true);
        }
        if let Some(db) = db.as_mut() {
            for (oc, b) in db.iter_mut().enumerate() {
                *b = *b + dout_i[oc * plane..(oc + 1) * plane].iter().copied().sum();
            }
        }
    }
    ConvGrads { dx, dw, db }
}

/// Per-(sample, channel) statistics kept for the backward pass.
pub(crate) struct NormCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
}

pub(crate) fn instance_norm_forward<T: Real>(
    dims: (usize, usize, usize, usize),
    x: &[T],
    gamma: &[T],
    beta: &[T],
    eps: T,
) -> (Vec<T>, NormCache<T>) {
    let (n, c, h, w) = dims;
    let plane = h * w;
    let count = T::of(plane as f64);
    let mut out = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut inv_std = vec![T::zero(); n * c];
    for i in 0..n {
        for ch in 0..c {
            let base = (i * c + ch) * plane;
            let src = &x[base..base + plane];
            let mean = src.iter().copied().sum::<T>() / count;
            let var = src.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / count;
            let is = (var + eps).sqrt().recip();
            inv_std[i * c + ch] = is;
            for k in 0..plane {
                let xh = (src[k] - mean) * is;
                xhat[base + k] = xh;
                out[base + k] = gamma[ch] * xh + beta[ch];
            }
        }
    }
    (out, NormCache { xhat, inv_std })
}

/// Returns `(dx, dgamma, dbeta)`.
pub(crate) fn instance_norm_backward<T: Real>(
    dims: (usize, usize, usize, usize),
    cache: &NormCache<T>,
    gamma: &[T],
    dout: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (n, c, h, w) = dims;
    let plane = h * w;
    let count = T::of(plane as f64);
    let mut dx = vec![T::zero(); dout.len()];
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for i in 0..n {
        for ch in 0..c {
            let base = (i * c + ch) * plane;
            let dy = &dout[base..base + plane];
            let xh = &cache.xhat[base..base + plane];
            let mut sum_dy = T::zero();
            let mut sum_dy_xh = T::zero();
            for k in 0..plane {
                sum_dy = sum_dy + dy[k];
                sum_dy_xh = sum_dy_xh + dy[k] * xh[k];
            }
            dgamma[ch] = dgamma[ch] + sum_dy_xh;
            dbeta[ch] = dbeta[ch] + sum_dy;
            // dx = inv_std / N * (N * dxh - sum(dxh) - xhat * sum(dxh * xhat)), dxh = gamma * dy
            let g = gamma[ch];
            let scale = cache.inv_std[i * c + ch] / count;
            for k in 0..plane {
                dx[base + k] = scale * g * (count * dy[k] - sum_dy - xh[k] * sum_dy_xh);
            }
        }
    }
    (dx, dgamma, dbeta)
}

/// Elementwise nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

impl Activation {
    pub(crate) fn validate(self) -> Result<()> {
        match self {
            Activation::LeakyRelu(a) if !(0.0..1.0).contains(&a) => Err(Error::InvalidArgument(format!(
                "leaky_relu slope {a} outside [0, 1)"
            ))),
            _ => Ok(()),
        }
    }

    pub(crate) fn apply<T: Real>(self, v: T) -> T {
        match self {
            Activation::Relu => v.max(T::zero()),
            Activation::LeakyRelu(a) => {
                if v > T::zero() {
                    v
                } else {
                    T::of(a) * v
                }
            }
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => sigmoid(v),
        }
    }

    /// Derivative given the input `x` and output `y` of the map.
    pub(crate) fn derivative<T: Real>(self, x: T, y: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu(a) => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::of(a)
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Sigmoid => y * (T::one() - y),
        }
    }
}

fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        (T::one() + (-v).exp()).recip()
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

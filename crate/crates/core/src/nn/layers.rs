//! Layer algebra: dense, 2D convolution (via batched im2col), max pooling
//! and flatten, each with an exact reverse-mode backward pass.

use ndarray::{Array2, Array4, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{matmul, matmul_tn};
use super::xavier_fill;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activated output.
    fn deriv_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// Data shape flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Vector(usize),
    Image {
        channels: usize,
        height: usize,
        width: usize,
    },
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Vector(d) => d,
            Shape::Image {
                channels,
                height,
                width,
            } => channels * height * width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
        activation: Activation,
    },
    Conv2D {
        in_channels: usize,
        filters: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        activation: Activation,
    },
    MaxPool {
        window: usize,
    },
    Flatten,
}

impl LayerSpec {
    /// (weights, biases) parameter counts.
    fn param_counts(&self) -> (usize, usize) {
        match *self {
            LayerSpec::Dense { input, output, .. } => (input * output, output),
            LayerSpec::Conv2D {
                in_channels,
                filters,
                kernel,
                ..
            } => (in_channels * kernel * kernel * filters, filters),
            _ => (0, 0),
        }
    }

    fn output_shape(&self, input: Shape) -> Result<Shape> {
        match (*self, input) {
            (LayerSpec::Dense { input: d_in, output, .. }, Shape::Vector(d)) => {
                if d != d_in {
                    return Err(CoreError::parameter(format!(
                        "dense layer expects {d_in} inputs, gets {d}"
                    )));
                }
                if output == 0 {
                    return Err(CoreError::parameter("dense output must be positive"));
                }
                Ok(Shape::Vector(output))
            }
            (
                LayerSpec::Conv2D {
                    in_channels,
                    filters,
                    kernel,
                    stride,
                    padding,
                    ..
                },
                Shape::Image {
                    channels,
                    height,
                    width,
                },
            ) => {
                if channels != in_channels {
                    return Err(CoreError::parameter(format!(
                        "conv expects {in_channels} channels, gets {channels}"
                    )));
                }
                if kernel == 0 || stride == 0 || filters == 0 {
                    return Err(CoreError::parameter("conv dims must be positive"));
                }
                let oh = (height + 2 * padding).checked_sub(kernel).map(|v| v / stride + 1);
                let ow = (width + 2 * padding).checked_sub(kernel).map(|v| v / stride + 1);
                match (oh, ow) {
                    (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok(Shape::Image {
                        channels: filters,
                        height: oh,
                        width: ow,
                    }),
                    _ => Err(CoreError::parameter("conv kernel larger than padded input")),
                }
            }
            (LayerSpec::MaxPool { window }, Shape::Image { channels, height, width }) => {
                if window == 0 || height < window || width < window {
                    return Err(CoreError::parameter("pool window larger than input"));
                }
                Ok(Shape::Image {
                    channels,
                    height: height / window,
                    width: width / window,
                })
            }
            (LayerSpec::Flatten, Shape::Image { .. }) => Ok(Shape::Vector(input.len())),
            (spec, shape) => Err(CoreError::parameter(format!(
                "layer {spec:?} cannot consume shape {shape:?}"
            ))),
        }
    }
}

/// A batch of activations: matrix `(n, d)` or image stack `(n, c, h, w)`.
#[derive(Debug, Clone)]
pub enum Batch {
    Mat(Array2<f64>),
    Img(Array4<f64>),
}

impl Batch {
    pub fn batch_len(&self) -> usize {
        match self {
            Batch::Mat(m) => m.nrows(),
            Batch::Img(t) => t.shape()[0],
        }
    }

    pub fn as_mat(&self) -> &Array2<f64> {
        match self {
            Batch::Mat(m) => m,
            Batch::Img(_) => panic!("expected matrix batch"),
        }
    }

    fn all_finite(&self) -> bool {
        match self {
            Batch::Mat(m) => m.iter().all(|v| v.is_finite()),
            Batch::Img(t) => t.iter().all(|v| v.is_finite()),
        }
    }
}

enum LayerCache {
    Dense {
        input: Array2<f64>,
        output: Array2<f64>,
    },
    Conv {
        im2col: Array2<f64>,
        output: Array4<f64>,
        in_shape: [usize; 4],
    },
    Pool {
        argmax: Vec<usize>,
        in_shape: [usize; 4],
        out_shape: [usize; 4],
    },
    Flatten {
        in_shape: [usize; 4],
    },
}

/// Forward-pass record consumed by [`Network::backward`].
pub struct ForwardCache {
    layers: Vec<LayerCache>,
}

/// A feed-forward stack with a fixed parameter layout inside a flat vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    input_shape: Shape,
    layers: Vec<LayerSpec>,
    /// Per layer: (weight offset, bias offset); weights precede biases.
    layout: Vec<(usize, usize)>,
    param_len: usize,
    output_dim: usize,
}

impl Network {
    /// Assemble and shape-check a stack. Shape mismatches fail here, never
    /// at run time.
    pub fn new(input_shape: Shape, layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(CoreError::parameter("network needs at least one layer"));
        }
        let mut shape = input_shape;
        let mut layout = Vec::with_capacity(layers.len());
        let mut offset = 0usize;
        for layer in &layers {
            shape = layer.output_shape(shape)?;
            let (w, b) = layer.param_counts();
            layout.push((offset, offset + w));
            offset += w + b;
        }
        let Shape::Vector(output_dim) = shape else {
            return Err(CoreError::parameter(
                "network must end in a vector output (add a flatten/dense head)",
            ));
        };
        Ok(Network {
            input_shape,
            layers,
            layout,
            param_len: offset,
            output_dim,
        })
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn param_count(&self) -> usize {
        self.param_len
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Xavier-initialize into `params` (weights uniform, biases zero), in
    /// layer order.
    pub fn init_params(&self, params: &mut [f64], rng: &mut impl Rng) {
        assert_eq!(params.len(), self.param_len);
        for (layer, &(w_off, b_off)) in self.layers.iter().zip(&self.layout) {
            match *layer {
                LayerSpec::Dense { input, output, .. } => {
                    xavier_fill(&mut params[w_off..b_off], input, output, rng);
                    params[b_off..b_off + output].fill(0.0);
                }
                LayerSpec::Conv2D {
                    in_channels,
                    filters,
                    kernel,
                    ..
                } => {
                    let fan_in = in_channels * kernel * kernel;
                    let fan_out = filters * kernel * kernel;
                    xavier_fill(&mut params[w_off..b_off], fan_in, fan_out, rng);
                    params[b_off..b_off + filters].fill(0.0);
                }
                _ => {}
            }
        }
    }

    /// Forward pass over a batch. All values are checked finite on exit.
    pub fn forward(&self, params: &[f64], input: Batch) -> Result<(Batch, ForwardCache)> {
        assert_eq!(params.len(), self.param_len);
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut current = input;
        for (layer, &(w_off, b_off)) in self.layers.iter().zip(&self.layout) {
            current = match (*layer, current) {
                (LayerSpec::Dense { input: d_in, output, activation }, Batch::Mat(x)) => {
                    let w = ArrayView2::from_shape((d_in, output), &params[w_off..b_off])
                        .expect("layout");
                    let bias = &params[b_off..b_off + output];
                    let mut z = matmul(x.view(), w);
                    for mut row in z.axis_iter_mut(Axis(0)) {
                        for (v, b) in row.iter_mut().zip(bias) {
                            *v = activation.apply(*v + b);
                        }
                    }
                    caches.push(LayerCache::Dense {
                        input: x,
                        output: z.clone(),
                    });
                    Batch::Mat(z)
                }
                (
                    LayerSpec::Conv2D {
                        in_channels,
                        filters,
                        kernel,
                        stride,
                        padding,
                        activation,
                    },
                    Batch::Img(x),
                ) => {
                    let (n, c, h, w_in) =
                        (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
                    debug_assert_eq!(c, in_channels);
                    let oh = (h + 2 * padding - kernel) / stride + 1;
                    let ow = (w_in + 2 * padding - kernel) / stride + 1;
                    let cols = im2col(&x, kernel, stride, padding, oh, ow);
                    let kmat = ArrayView2::from_shape(
                        (in_channels * kernel * kernel, filters),
                        &params[w_off..b_off],
                    )
                    .expect("layout");
                    let bias = &params[b_off..b_off + filters];
                    let out_mat = matmul(cols.view(), kmat);
                    let mut out = Array4::zeros((n, filters, oh, ow));
                    {
                        // (n*oh*ow, f) -> (n, f, oh*ow) with bias+activation
                        let ohw = oh * ow;
                        let src = out_mat.as_slice().expect("standard layout");
                        let dst = out.as_slice_mut().expect("standard layout");
                        for ni in 0..n {
                            for f in 0..filters {
                                let b = bias[f];
                                let d = &mut dst[(ni * filters + f) * ohw..][..ohw];
                                for (pix, dv) in d.iter_mut().enumerate() {
                                    *dv = activation.apply(src[(ni * ohw + pix) * filters + f] + b);
                                }
                            }
                        }
                    }
                    caches.push(LayerCache::Conv {
                        im2col: cols,
                        output: out.clone(),
                        in_shape: [n, c, h, w_in],
                    });
                    Batch::Img(out)
                }
                (LayerSpec::MaxPool { window }, Batch::Img(x)) => {
                    let (n, c, h, w_in) =
                        (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
                    let oh = h / window;
                    let ow = w_in / window;
                    let mut out = Array4::zeros((n, c, oh, ow));
                    let mut argmax = vec![0usize; n * c * oh * ow];
                    let mut k = 0;
                    for ni in 0..n {
                        for ci in 0..c {
                            for oy in 0..oh {
                                for ox in 0..ow {
                                    let mut best = f64::NEG_INFINITY;
                                    let mut best_idx = 0;
                                    for dy in 0..window {
                                        for dx in 0..window {
                                            let y = oy * window + dy;
                                            let xx = ox * window + dx;
                                            let v = x[(ni, ci, y, xx)];
                                            if v > best {
                                                best = v;
                                                best_idx = ((ni * c + ci) * h + y) * w_in + xx;
                                            }
                                        }
                                    }
                                    out[(ni, ci, oy, ox)] = best;
                                    argmax[k] = best_idx;
                                    k += 1;
                                }
                            }
                        }
                    }
                    caches.push(LayerCache::Pool {
                        argmax,
                        in_shape: [n, c, h, w_in],
                        out_shape: [n, c, oh, ow],
                    });
                    Batch::Img(out)
                }
                (LayerSpec::Flatten, Batch::Img(x)) => {
                    let shape = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
                    let n = shape[0];
                    let d = shape[1] * shape[2] * shape[3];
                    let flat = x
                        .into_shape_with_order((n, d))
                        .expect("standard layout flatten");
                    caches.push(LayerCache::Flatten { in_shape: shape });
                    Batch::Mat(flat)
                }
                (spec, _) => {
                    return Err(CoreError::parameter(format!(
                        "layer {spec:?} received a batch of the wrong kind"
                    )))
                }
            };
        }
        if !current.all_finite() {
            return Err(CoreError::numerical("non-finite activation in forward pass"));
        }
        Ok((current, ForwardCache { layers: caches }))
    }

    /// Backward pass: accumulates parameter gradients into `grads` (adding
    /// to what is there) and returns the gradient w.r.t. the input batch.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &ForwardCache,
        grad_output: Batch,
        grads: &mut [f64],
    ) -> Batch {
        assert_eq!(grads.len(), self.param_len);
        let mut grad = grad_output;
        for ((layer, &(w_off, b_off)), lc) in self
            .layers
            .iter()
            .zip(&self.layout)
            .zip(&cache.layers)
            .rev()
        {
            grad = match (*layer, lc, grad) {
                (
                    LayerSpec::Dense { input: d_in, output, activation },
                    LayerCache::Dense { input, output: act_out },
                    Batch::Mat(mut dy),
                ) => {
                    // dz = dy * act'(a)
                    for (d, &a) in dy.iter_mut().zip(act_out.iter()) {
                        *d *= activation.deriv_from_output(a);
                    }
                    let dw = matmul_tn(input.view(), dy.view());
                    for (g, d) in grads[w_off..b_off].iter_mut().zip(dw.iter()) {
                        *g += d;
                    }
                    let db = dy.sum_axis(Axis(0));
                    for (g, d) in grads[b_off..b_off + output].iter_mut().zip(db.iter()) {
                        *g += d;
                    }
                    let w = ArrayView2::from_shape((d_in, output), &params[w_off..b_off])
                        .expect("layout");
                    Batch::Mat(matmul(dy.view(), w.t()))
                }
                (
                    LayerSpec::Conv2D {
                        in_channels,
                        filters,
                        kernel,
                        stride,
                        padding,
                        activation,
                    },
                    LayerCache::Conv {
                        im2col: cols,
                        output,
                        in_shape,
                    },
                    Batch::Img(mut dy),
                ) => {
                    let (n, _f, oh, ow) =
                        (dy.shape()[0], dy.shape()[1], dy.shape()[2], dy.shape()[3]);
                    for (d, &a) in dy.iter_mut().zip(output.iter()) {
                        *d *= activation.deriv_from_output(a);
                    }
                    // (n, f, oh, ow) -> (n*oh*ow, f)
                    let ohw = oh * ow;
                    let mut dz = Array2::zeros((n * ohw, filters));
                    {
                        let src = dy.as_slice().expect("standard layout");
                        let dst = dz.as_slice_mut().expect("standard layout");
                        for ni in 0..n {
                            for f in 0..filters {
                                let s = &src[(ni * filters + f) * ohw..][..ohw];
                                for (pix, sv) in s.iter().enumerate() {
                                    dst[(ni * ohw + pix) * filters + f] = *sv;
                                }
                            }
                        }
                    }
                    let dk = matmul_tn(cols.view(), dz.view());
                    for (g, d) in grads[w_off..b_off].iter_mut().zip(dk.iter()) {
                        *g += d;
                    }
                    let db = dz.sum_axis(Axis(0));
                    for (g, d) in grads[b_off..b_off + filters].iter_mut().zip(db.iter()) {
                        *g += d;
                    }
                    let kmat = ArrayView2::from_shape(
                        (in_channels * kernel * kernel, filters),
                        &params[w_off..b_off],
                    )
                    .expect("layout");
                    let dcols = matmul(dz.view(), kmat.t());
                    Batch::Img(col2im(&dcols, *in_shape, kernel, stride, padding, oh, ow))
                }
                (
                    LayerSpec::MaxPool { .. },
                    LayerCache::Pool {
                        argmax,
                        in_shape,
                        out_shape,
                    },
                    Batch::Img(dy),
                ) => {
                    let mut dx =
                        Array4::zeros((in_shape[0], in_shape[1], in_shape[2], in_shape[3]));
                    let dx_flat = dx.as_slice_mut().expect("standard layout");
                    debug_assert_eq!(
                        dy.len(),
                        out_shape[0] * out_shape[1] * out_shape[2] * out_shape[3]
                    );
                    for (&src, &d) in argmax.iter().zip(dy.iter()) {
                        dx_flat[src] += d;
                    }
                    Batch::Img(dx)
                }
                (LayerSpec::Flatten, LayerCache::Flatten { in_shape }, Batch::Mat(dy)) => {
                    let dx = dy
                        .into_shape_with_order((in_shape[0], in_shape[1], in_shape[2], in_shape[3]))
                        .expect("standard layout");
                    Batch::Img(dx)
                }
                _ => unreachable!("cache/layer/grad kinds agree by construction"),
            };
        }
        grad
    }
}

fn im2col(
    x: &Array4<f64>,
    kernel: usize,
    stride: usize,
    padding: usize,
    oh: usize,
    ow: usize,
) -> Array2<f64> {
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let ck2 = c * kernel * kernel;
    let mut cols = Array2::zeros((n * oh * ow, ck2));
    let src = x.as_slice().expect("standard layout");
    let dst = cols.as_slice_mut().expect("standard layout");
    for ni in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = (ni * oh + oy) * ow + ox;
                let drow = &mut dst[row * ck2..][..ck2];
                for ci in 0..c {
                    let plane = &src[((ni * c + ci) * h) * w..][..h * w];
                    for ky in 0..kernel {
                        let y = (oy * stride + ky) as isize - padding as isize;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        let line = &plane[y as usize * w..][..w];
                        let base = (ci * kernel + ky) * kernel;
                        for kx in 0..kernel {
                            let xx = (ox * stride + kx) as isize - padding as isize;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            drow[base + kx] = line[xx as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(
    dcols: &Array2<f64>,
    in_shape: [usize; 4],
    kernel: usize,
    stride: usize,
    padding: usize,
    oh: usize,
    ow: usize,
) -> Array4<f64> {
    let [n, c, h, w] = in_shape;
    let ck2 = c * kernel * kernel;
    let mut dx = Array4::zeros((n, c, h, w));
    let src = dcols.as_slice().expect("standard layout");
    let dst = dx.as_slice_mut().expect("standard layout");
    for ni in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = (ni * oh + oy) * ow + ox;
                let srow = &src[row * ck2..][..ck2];
                for ci in 0..c {
                    for ky in 0..kernel {
                        let y = (oy * stride + ky) as isize - padding as isize;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        let base = (ci * kernel + ky) * kernel;
                        let line_off = ((ni * c + ci) * h + y as usize) * w;
                        for kx in 0..kernel {
                            let xx = (ox * stride + kx) as isize - padding as isize;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            dst[line_off + xx as usize] += srow[base + kx];
                        }
                    }
                }
            }
        }
    }
    dx
}

//! Layer kernels: forward and backward passes over flat f64 buffers.

/// One layer of a sequential model. Parameters live inline; activation
/// buffers are owned by the caller so a layer stays immutable during
/// prediction.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Layer {
    Dense {
        w: Vec<f64>, // row-major [out][in]
        b: Vec<f64>,
        in_dim: usize,
        out_dim: usize,
    },
    Relu,
    /// 3x3 convolution, stride 1, zero padding 1. Spatial size is fixed at
    /// construction so the flat buffers can be interpreted without metadata.
    Conv3x3 {
        w: Vec<f64>, // [out_ch][in_ch][3][3]
        b: Vec<f64>,
        in_ch: usize,
        out_ch: usize,
        height: usize,
        width: usize,
    },
    /// 2x2 max pooling, stride 2; odd trailing rows/columns are dropped.
    MaxPool2 {
        channels: usize,
        height: usize,
        width: usize,
    },
}

/// Parameter gradients for one layer; empty buffers for parameterless layers.
#[derive(Debug, Clone)]
pub(crate) struct LayerGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn zero_grad(&self) -> LayerGrad {
        match self {
            Layer::Dense { w, b, .. } | Layer::Conv3x3 { w, b, .. } => LayerGrad {
                w: vec![0.0; w.len()],
                b: vec![0.0; b.len()],
            },
            _ => LayerGrad {
                w: Vec::new(),
                b: Vec::new(),
            },
        }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        match self {
            Layer::Dense {
                w,
                b,
                in_dim,
                out_dim,
            } => {
                debug_assert_eq!(input.len(), *in_dim);
                let mut out = b.clone();
                for (j, out_j) in out.iter_mut().enumerate() {
                    let row = &w[j * in_dim..(j + 1) * in_dim];
                    let mut acc = 0.0;
                    for (wi, xi) in row.iter().zip(input) {
                        acc += wi * xi;
                    }
                    *out_j += acc;
                    let _ = out_dim;
                }
                out
            }
            Layer::Relu => input.iter().map(|&v| v.max(0.0)).collect(),
            Layer::Conv3x3 {
                w,
                b,
                in_ch,
                out_ch,
                height,
                width,
            } => {
                let (h, wd) = (*height, *width);
                debug_assert_eq!(input.len(), in_ch * h * wd);
                let mut out = vec![0.0; out_ch * h * wd];
                for o in 0..*out_ch {
                    let plane = &mut out[o * h * wd..(o + 1) * h * wd];
                    for y in 0..h {
                        for x in 0..wd {
                            let mut acc = b[o];
                            for i in 0..*in_ch {
                                let ip = &input[i * h * wd..(i + 1) * h * wd];
                                let wk = &w[((o * in_ch) + i) * 9..((o * in_ch) + i) * 9 + 9];
                                for dy in 0..3usize {
                                    let sy = y as isize + dy as isize - 1;
                                    if sy < 0 || sy >= h as isize {
                                        continue;
                                    }
                                    for dx in 0..3usize {
                                        let sx = x as isize + dx as isize - 1;
                                        if sx < 0 || sx >= wd as isize {
                                            continue;
                                        }
                                        acc += wk[dy * 3 + dx] * ip[sy as usize * wd + sx as usize];
                                    }
                                }
                            }
                            plane[y * wd + x] = acc;
                        }
                    }
                }
                out
            }
            Layer::MaxPool2 {
                channels,
                height,
                width,
            } => {
                let (h, wd) = (*height, *width);
                let (oh, ow) = (h / 2, wd / 2);
                let mut out = vec![0.0; channels * oh * ow];
                for c in 0..*channels {
                    let ip = &input[c * h * wd..(c + 1) * h * wd];
                    let op = &mut out[c * oh * ow..(c + 1) * oh * ow];
                    for y in 0..oh {
                        for x in 0..ow {
                            let mut best = f64::NEG_INFINITY;
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    let v = ip[(2 * y + dy) * wd + 2 * x + dx];
                                    if v > best {
                                        best = v;
                                    }
                                }
                            }
                            op[y * ow + x] = best;
                        }
                    }
                }
                out
            }
        }
    }

    /// Backward pass: given the layer input and the gradient w.r.t. the
    /// output, accumulate parameter gradients into `grad` and return the
    /// gradient w.r.t. the input.
    pub fn backward(&self, input: &[f64], d_out: &[f64], grad: &mut LayerGrad) -> Vec<f64> {
        match self {
            Layer::Dense { w, in_dim, .. } => {
                let mut d_in = vec![0.0; *in_dim];
                for (j, &g) in d_out.iter().enumerate() {
                    grad.b[j] += g;
                    let row = &w[j * in_dim..(j + 1) * in_dim];
                    let grow = &mut grad.w[j * in_dim..(j + 1) * in_dim];
                    for i in 0..*in_dim {
                        grow[i] += g * input[i];
                        d_in[i] += g * row[i];
                    }
                }
                d_in
            }
            Layer::Relu => input
                .iter()
                .zip(d_out)
                .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                .collect(),
            Layer::Conv3x3 {
                w,
                in_ch,
                out_ch,
                height,
                width,
                ..
            } => {
                let (h, wd) = (*height, *width);
                let mut d_in = vec![0.0; in_ch * h * wd];
                for o in 0..*out_ch {
                    let gp = &d_out[o * h * wd..(o + 1) * h * wd];
                    for y in 0..h {
                        for x in 0..wd {
                            let g = gp[y * wd + x];
                            if g == 0.0 {
                                continue;
                            }
                            grad.b[o] += g;
                            for i in 0..*in_ch {
                                let base = ((o * in_ch) + i) * 9;
                                let ip = &input[i * h * wd..(i + 1) * h * wd];
                                let dp = &mut d_in[i * h * wd..(i + 1) * h * wd];
                                for dy in 0..3usize {
                                    let sy = y as isize + dy as isize - 1;
                                    if sy < 0 || sy >= h as isize {
                                        continue;
                                    }
                                    for dx in 0..3usize {
                                        let sx = x as isize + dx as isize - 1;
                                        if sx < 0 || sx >= wd as isize {
                                            continue;
                                        }
                                        let si = sy as usize * wd + sx as usize;
                                        grad.w[base + dy * 3 + dx] += g * ip[si];
                                        dp[si] += g * w[base + dy * 3 + dx];
                                    }
                                }
                            }
                        }
                    }
                }
                d_in
            }
            Layer::MaxPool2 {
                channels,
                height,
                width,
            } => {
                let (h, wd) = (*height, *width);
                let (oh, ow) = (h / 2, wd / 2);
                let mut d_in = vec![0.0; channels * h * wd];
                for c in 0..*channels {
                    let ip = &input[c * h * wd..(c + 1) * h * wd];
                    let gp = &d_out[c * oh * ow..(c + 1) * oh * ow];
                    let dp = &mut d_in[c * h * wd..(c + 1) * h * wd];
                    for y in 0..oh {
                        for x in 0..ow {
                            // Ties route to the first cell in scan order,
                            // matching the forward pass.
                            let mut best = f64::NEG_INFINITY;
                            let mut best_idx = 0;
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    let si = (2 * y + dy) * wd + 2 * x + dx;
                                    if ip[si] > best {
                                        best = ip[si];
                                        best_idx = si;
                                    }
                                }
                            }
                            dp[best_idx] += gp[y * ow + x];
                        }
                    }
                }
                d_in
            }
        }
    }
}

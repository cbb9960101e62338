use qccnn::nn::{Conv, Tensor};

/// Nested-loop cross-correlation, accumulating bias first, then channel,
/// depth, row, column taps in order.
pub fn naive_conv(conv: &Conv<f64>, x: &Tensor<f64>) -> Tensor<f64> {
    let s = x.shape();
    let (n, c, d, h, w) = if conv.dims == 2 {
        (s[0], s[1], 1, s[2], s[3])
    } else {
        (s[0], s[1], s[2], s[3], s[4])
    };
    let (k, st) = (conv.kernel, conv.stride);
    let (kd, sd) = if conv.dims == 3 { (k, st) } else { (1, 1) };
    let od = (d - kd) / sd + 1;
    let oh = (h - k) / st + 1;
    let ow = (w - k) / st + 1;
    let cg = c / conv.groups;
    let og = conv.out_channels / conv.groups;
    let mut out = Vec::new();
    for i in 0..n {
        for o in 0..conv.out_channels {
            let g = o / og;
            for z in 0..od {
                for y in 0..oh {
                    for xx in 0..ow {
                        let mut acc = conv.bias[o];
                        for ci in 0..cg {
                            for a in 0..kd {
                                for b in 0..k {
                                    for e in 0..k {
                                        let ch = g * cg + ci;
                                        let xi = (((i * c + ch) * d + z * sd + a) * h + y * st + b) * w + xx * st + e;
                                        let wi = (((o * cg + ci) * kd + a) * k + b) * k + e;
                                        acc += conv.weight[wi] * x.data()[xi];
                                    }
                                }
                            }
                        }
                        out.push(acc);
                    }
                }
            }
        }
    }
    let shape = if conv.dims == 2 {
        vec![n, conv.out_channels, oh, ow]
    } else {
        vec![n, conv.out_channels, od, oh, ow]
    };
    Tensor::new(shape, out).unwrap()
}

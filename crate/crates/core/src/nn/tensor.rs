use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major array with an explicit shape, `(N, C, spatial…)` for
/// feature maps and `(N, features)` after flattening.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::usage(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![T::zero(); len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn batch(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Elements per batch item.
    pub fn item_len(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn item(&self, n: usize) -> &[T] {
        let len = self.item_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Spatial extent of a feature map, 2D maps having depth 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Extent {
    pub d: usize,
    pub h: usize,
    pub w: usize,
}

impl Extent {
    pub fn volume(&self) -> usize {
        self.d * self.h * self.w
    }
}

/// Splits `(N, C, H, W)` or `(N, C, D, H, W)` into `(N, C, extent, dims)`.
pub fn feature_map_dims(shape: &[usize]) -> Result<(usize, usize, Extent, usize)> {
    match *shape {
        [n, c, h, w] => Ok((n, c, Extent { d: 1, h, w }, 2)),
        [n, c, d, h, w] => Ok((n, c, Extent { d, h, w }, 3)),
        _ => Err(Error::usage(format!(
            "expected a (N, C, H, W) or (N, C, D, H, W) feature map, got shape {shape:?}"
        ))),
    }
}

pub(crate) fn feature_map_shape(n: usize, c: usize, e: Extent, dims: usize) -> Vec<usize> {
    if dims == 2 {
        vec![n, c, e.h, e.w]
    } else {
        vec![n, c, e.d, e.h, e.w]
    }
}

/// Output extent of a sliding window of side `k` and stride `s`, no padding.
/// `dims == 2` leaves the depth axis untouched.
pub fn window_output(input: Extent, k: usize, s: usize, dims: usize) -> Result<Extent> {
    if k == 0 || s == 0 {
        return Err(Error::config("kernel and stride must be positive"));
    }
    let axis = |len: usize| -> Result<usize> {
        if len < k {
            Err(Error::usage(format!("spatial extent {len} smaller than window {k}")))
        } else {
            Ok((len - k) / s + 1)
        }
    };
    Ok(Extent {
        d: if dims == 3 { axis(input.d)? } else { input.d },
        h: axis(input.h)?,
        w: axis(input.w)?,
    })
}

/// For each output position (row-major over d, h, w), the flattened spatial
/// indices of its window, each window flattened row-major with depth first.
pub fn window_indices(input: Extent, k: usize, s: usize, dims: usize) -> Result<(Extent, Vec<Vec<usize>>)> {
    let out = window_output(input, k, s, dims)?;
    let (kd, sd) = if dims == 3 { (k, s) } else { (1, 1) };
    let mut windows = Vec::with_capacity(out.volume());
    for od in 0..out.d {
        for oh in 0..out.h {
            for ow in 0..out.w {
                let mut idx = Vec::with_capacity(kd * k * k);
                for a in 0..kd {
                    for b in 0..k {
                        for c in 0..k {
                            let (z, y, x) = (od * sd + a, oh * s + b, ow * s + c);
                            idx.push((z * input.h + y) * input.w + x);
                        }
                    }
                }
                windows.push(idx);
            }
        }
    }
    Ok((out, windows))
}

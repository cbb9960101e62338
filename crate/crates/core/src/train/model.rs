use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::{Architecture, PoolPlan};
use crate::error::{Error, Result};
use crate::nn::{
    feature_map_dims, relu, relu_backward, window_output, BatchNorm, BatchNormCache, Conv, Dropout, DropoutMask,
    Linear, MaxPool, PoolIndices, Tensor,
};
use crate::qconv::QuantumConv;
use crate::qfilter::{Ansatz, Encoding};

/// Tolerance on quantum activations leaving [−1, 1] through rounding.
pub const RANGE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Conv(Conv<f64>),
    /// `input_grad` is false when nothing upstream needs the input gradient.
    QConv {
        layer: QuantumConv<f64>,
        input_grad: bool,
    },
    BatchNorm(BatchNorm<f64>),
    Relu,
    MaxPool(MaxPool),
    Dropout(Dropout),
    Flatten,
    Linear(Linear<f64>),
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::QConv { .. } => "qconv",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Relu => "relu",
            Layer::MaxPool(_) => "maxpool",
            Layer::Dropout(_) => "dropout",
            Layer::Flatten => "flatten",
            Layer::Linear(_) => "linear",
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Layer::Conv(c) => {
                let k = if c.dims == 3 {
                    format!("{0}×{0}×{0}", c.kernel)
                } else {
                    format!("{0}×{0}", c.kernel)
                };
                let groups = if c.groups > 1 {
                    format!(", {} groups", c.groups)
                } else {
                    String::new()
                };
                format!(
                    "conv{}d {k}, stride {}, {} filters{groups}",
                    c.dims, c.stride, c.out_channels
                )
            }
            Layer::QConv { layer, .. } => format!(
                "quantum conv{}d {}, stride {}, {} circuits × {} qubits, {}, {}×{}",
                layer.dims,
                layer.kernel,
                layer.stride,
                layer.in_channels,
                layer.n_qubits(),
                layer.filter.encoding,
                layer.filter.ansatz.kind,
                layer.filter.ansatz.layers
            ),
            Layer::BatchNorm(b) => format!("batch norm, {} channels", b.channels()),
            Layer::Relu => "relu".into(),
            Layer::MaxPool(p) => format!("max pool {}", p.size),
            Layer::Dropout(d) => format!("dropout {}", d.rate),
            Layer::Flatten => "flatten".into(),
            Layer::Linear(l) => format!("linear {} → {}", l.in_features, l.out_features),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv(c) => c.param_count(),
            Layer::QConv { layer, .. } => layer.param_count(),
            Layer::BatchNorm(b) => b.param_count(),
            Layer::Linear(l) => l.param_count(),
            _ => 0,
        }
    }

    /// Item shape (no batch axis) produced from `input`.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mut batched = vec![1];
        batched.extend_from_slice(input);
        let spatial = |dims: usize, channels: usize, k: usize, s: usize| -> Result<Vec<usize>> {
            let (_, _, extent, d) = feature_map_dims(&batched)?;
            if d != dims {
                return Err(Error::config(format!("{dims}D layer given a {d}D input {input:?}")));
            }
            let out = window_output(extent, k, s, dims).map_err(|e| Error::config(format!("input {input:?}: {e}")))?;
            Ok(if dims == 2 {
                vec![channels, out.h, out.w]
            } else {
                vec![channels, out.d, out.h, out.w]
            })
        };
        let channels_in = || -> Result<usize> { Ok(feature_map_dims(&batched)?.1) };
        match self {
            Layer::Conv(c) => {
                if channels_in()? != c.in_channels {
                    return Err(Error::config(format!(
                        "expects {} channels, input {input:?}",
                        c.in_channels
                    )));
                }
                spatial(c.dims, c.out_channels, c.kernel, c.stride)
            }
            Layer::QConv { layer, .. } => {
                if channels_in()? != layer.in_channels {
                    return Err(Error::config(format!(
                        "expects {} channels, input {input:?}",
                        layer.in_channels
                    )));
                }
                spatial(layer.dims, layer.out_channels(), layer.kernel, layer.stride)
            }
            Layer::MaxPool(p) => {
                let dims = input.len() - 1;
                spatial(dims, input[0], p.size, p.size)
            }
            Layer::BatchNorm(b) => {
                if input.first() != Some(&b.channels()) {
                    return Err(Error::config(format!(
                        "expects {} channels, input {input:?}",
                        b.channels()
                    )));
                }
                Ok(input.to_vec())
            }
            Layer::Relu | Layer::Dropout(_) => Ok(input.to_vec()),
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::Linear(l) => {
                if input != [l.in_features] {
                    return Err(Error::config(format!(
                        "expects {} features, input {input:?}",
                        l.in_features
                    )));
                }
                Ok(vec![l.out_features])
            }
        }
    }
}

/// State a training-mode forward pass leaves for the backward pass.
#[derive(Clone, Debug)]
pub enum Cache {
    Input(Tensor<f64>),
    BatchNorm(BatchNormCache<f64>),
    Pool(Vec<usize>, PoolIndices),
    Dropout(DropoutMask<f64>),
    Flatten(Vec<usize>),
}

/// One row of a parameter audit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerAudit {
    pub index: usize,
    pub kind: &'static str,
    pub description: String,
    pub output_shape: Vec<usize>,
    pub params: usize,
}

/// Counts of quantum activations seen while range checking is on.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RangeStats {
    pub checked: u64,
    pub out_of_range: u64,
    pub min: f64,
    pub max: f64,
}

impl RangeStats {
    fn observe(&mut self, values: &[f64]) {
        if self.checked == 0 {
            self.min = f64::INFINITY;
            self.max = f64::NEG_INFINITY;
        }
        for &v in values {
            self.checked += 1;
            if !v.is_finite() || v.abs() > 1.0 + RANGE_SLACK {
                self.out_of_range += 1;
            }
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub arch: Architecture,
    pub input_shape: Vec<usize>,
    pub n_classes: usize,
    pub layers: Vec<Layer>,
    /// Record quantum activations in `range` on every forward pass.
    pub range_check: bool,
    pub range: RangeStats,
}

const STAGES_3D: [(usize, usize, usize); 3] = [(5, 2, 2), (2, 1, 4), (2, 1, 8)];

fn conv(dims: usize, c_in: usize, c_out: usize, k: usize, s: usize, g: usize) -> Result<Layer> {
    Ok(Layer::Conv(Conv::new(dims, c_in, c_out, k, s, g)?))
}

fn stack_3d(input: &[usize], pools_after_each: bool, fourth: Layer) -> Result<Vec<Layer>> {
    let mut layers = Vec::new();
    let mut c_in = input[0];
    for (i, &(k, s, f)) in STAGES_3D.iter().enumerate() {
        layers.push(conv(3, c_in, f, k, s, 1)?);
        layers.push(Layer::BatchNorm(BatchNorm::new(f)));
        layers.push(Layer::Relu);
        if pools_after_each || i == STAGES_3D.len() - 1 {
            layers.push(Layer::MaxPool(MaxPool::new(2)));
        }
        layers.push(Layer::Dropout(Dropout::new(0.2)?));
        c_in = f;
    }
    layers.push(fourth);
    layers.push(Layer::BatchNorm(BatchNorm::new(64)));
    layers.push(Layer::Dropout(Dropout::new(0.5)?));
    layers.push(Layer::Flatten);
    Ok(layers)
}

/// Shapes after each layer, or the index and reason of the first failure.
fn propagate(layers: &[Layer], input: &[usize]) -> std::result::Result<Vec<Vec<usize>>, (usize, Error)> {
    let mut shapes = Vec::with_capacity(layers.len());
    let mut shape = input.to_vec();
    for (i, layer) in layers.iter().enumerate() {
        shape = layer.output_shape(&shape).map_err(|e| (i, e))?;
        shapes.push(shape.clone());
    }
    Ok(shapes)
}

impl Model {
    /// Builds `arch` for items of shape `input_shape` (channels first) with
    /// seeded initialization.
    pub fn build(arch: Architecture, input_shape: &[usize], n_classes: usize, seed: u64) -> Result<Self> {
        let mut model = Self::build_uninit(arch, input_shape, n_classes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        model.init(&mut rng);
        Ok(model)
    }

    /// Builds with zero-valued parameters.
    pub fn build_uninit(arch: Architecture, input_shape: &[usize], n_classes: usize) -> Result<Self> {
        let dims = arch.spatial_dims();
        if input_shape.len() != dims + 1 || input_shape.contains(&0) {
            return Err(Error::config(format!(
                "{} needs a (C, {}) input, got {input_shape:?}",
                arch.name(),
                if dims == 2 { "H, W" } else { "D, H, W" }
            )));
        }
        if n_classes < 2 {
            return Err(Error::config(format!("need at least 2 classes, got {n_classes}")));
        }
        let c = input_shape[0];
        let mut layers = match arch {
            Architecture::Classical2d => vec![conv(2, c, 4, 2, 2, 1)?, Layer::Flatten],
            Architecture::Qccnn2d { encoding, ansatz } => vec![
                Layer::QConv {
                    layer: QuantumConv::new(2, 2, 2, c, encoding, ansatz)?,
                    input_grad: false,
                },
                Layer::Flatten,
            ],
            Architecture::Classical3d { stack } | Architecture::Qccnn3d { stack, .. } => {
                let fourth = match arch {
                    Architecture::Qccnn3d { layers, .. } => Layer::QConv {
                        layer: QuantumConv::new(3, 2, stack.fourth_stride, 8, Encoding::Angle, Ansatz::strong(layers))?,
                        input_grad: true,
                    },
                    _ => conv(3, 8, 64, 2, stack.fourth_stride, 8)?,
                };
                let all = stack_3d(input_shape, true, fourth.clone())?;
                match stack.pools {
                    PoolPlan::All => all,
                    PoolPlan::Last => stack_3d(input_shape, false, fourth)?,
                    PoolPlan::Auto => {
                        if propagate(&all, input_shape).is_ok() {
                            all
                        } else {
                            stack_3d(input_shape, false, fourth)?
                        }
                    }
                }
            }
        };
        let shapes = propagate(&layers, input_shape).map_err(|(i, e)| {
            Error::config(format!(
                "{} does not fit input {input_shape:?}: layer {i} ({}) fails: {}",
                arch.name(),
                layers[i].describe(),
                match e {
                    Error::Config(m) | Error::Usage(m) => m,
                    other => other.to_string(),
                }
            ))
        })?;
        let features = shapes.last().expect("non-empty stack")[0];
        layers.push(Layer::Linear(Linear::new(features, n_classes)?));
        Ok(Self {
            arch,
            input_shape: input_shape.to_vec(),
            n_classes,
            layers,
            range_check: false,
            range: RangeStats::default(),
        })
    }

    /// Classical layers uniform on ±sqrt(1/fan_in), quantum angles uniform
    /// on [0, 2π), batch norm scale 1 offset 0; layers in order.
    pub fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => c.init_uniform(rng),
                Layer::QConv { layer, .. } => layer.init_params(rng),
                Layer::Linear(l) => l.init_uniform(rng),
                _ => {}
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn audit(&self) -> Vec<LayerAudit> {
        let mut shape = self.input_shape.clone();
        self.layers
            .iter()
            .enumerate()
            .map(|(index, layer)| {
                shape = layer.output_shape(&shape).expect("validated at build");
                LayerAudit {
                    index,
                    kind: layer.kind(),
                    description: layer.describe(),
                    output_shape: shape.clone(),
                    params: layer.param_count(),
                }
            })
            .collect()
    }

    /// Whether any layer needs batch statistics in training mode.
    pub fn has_batch_norm(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, Layer::BatchNorm(_)))
    }

    fn check_input(&self, x: &Tensor<f64>) -> Result<()> {
        if x.shape().len() != self.input_shape.len() + 1 || x.shape()[1..] != self.input_shape[..] {
            return Err(Error::config(format!(
                "model expects items of shape {:?}, got batch {:?}",
                self.input_shape,
                x.shape()
            )));
        }
        Ok(())
    }

    fn observe_quantum(&mut self, out: &Tensor<f64>) {
        if self.range_check {
            self.range.observe(out.data());
        }
    }

    /// Training-mode pass: batch statistics, dropout masks from `rng`.
    pub fn forward_train<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor<f64>,
        rng: &mut R,
    ) -> Result<(Tensor<f64>, Vec<Cache>)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for i in 0..self.layers.len() {
            let (out, cache) = match &mut self.layers[i] {
                Layer::Conv(c) => (c.forward(&h)?, Cache::Input(h)),
                Layer::QConv { layer, .. } => (layer.forward(&h)?, Cache::Input(h)),
                Layer::BatchNorm(b) => {
                    let (y, c) = b.forward_train(&h)?;
                    (y, Cache::BatchNorm(c))
                }
                Layer::Relu => (relu(&h), Cache::Input(h)),
                Layer::MaxPool(p) => {
                    let (y, idx) = p.forward(&h)?;
                    (y, Cache::Pool(h.shape().to_vec(), idx))
                }
                Layer::Dropout(d) => {
                    let (y, mask) = d.forward_train(&h, rng);
                    (y, Cache::Dropout(mask))
                }
                Layer::Flatten => {
                    let shape = h.shape().to_vec();
                    let n = h.batch();
                    let f = h.item_len();
                    (h.reshape(vec![n, f])?, Cache::Flatten(shape))
                }
                Layer::Linear(l) => (l.forward(&h)?, Cache::Input(h)),
            };
            if matches!(self.layers[i], Layer::QConv { .. }) {
                self.observe_quantum(&out);
            }
            caches.push(cache);
            h = out;
        }
        Ok((h, caches))
    }

    /// Evaluation-mode pass: running statistics, no dropout.
    pub fn forward_eval(&mut self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for i in 0..self.layers.len() {
            h = match &mut self.layers[i] {
                Layer::Conv(c) => c.forward(&h)?,
                Layer::QConv { layer, .. } => layer.forward(&h)?,
                Layer::BatchNorm(b) => b.forward_eval(&h)?,
                Layer::Relu => relu(&h),
                Layer::MaxPool(p) => p.forward(&h)?.0,
                Layer::Dropout(_) => h,
                Layer::Flatten => {
                    let n = h.batch();
                    let f = h.item_len();
                    h.reshape(vec![n, f])?
                }
                Layer::Linear(l) => l.forward(&h)?,
            };
            if matches!(self.layers[i], Layer::QConv { .. }) {
                self.observe_quantum(&h);
            }
        }
        Ok(h)
    }

    /// Gradients of every parameter block, in [`Model::param_names`] order,
    /// given `∂L/∂logits`.
    pub fn backward(&self, caches: &[Cache], grad_logits: &Tensor<f64>) -> Result<Vec<Vec<f64>>> {
        if caches.len() != self.layers.len() {
            return Err(Error::usage("cache list does not match the model"));
        }
        let mut per_layer: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.layers.len()];
        let mut g = grad_logits.clone();
        for i in (0..self.layers.len()).rev() {
            let needs_input = i > 0;
            g = match (&self.layers[i], &caches[i]) {
                (Layer::Conv(c), Cache::Input(x)) => {
                    let gr = c.backward(x, &g)?;
                    per_layer[i] = vec![gr.weight, gr.bias];
                    gr.input
                }
                (Layer::QConv { layer, input_grad }, Cache::Input(x)) => {
                    let gr = layer.backward(x, &g, *input_grad && needs_input)?;
                    per_layer[i] = gr.params;
                    gr.input.unwrap_or_else(|| Tensor::zeros(x.shape().to_vec()))
                }
                (Layer::BatchNorm(b), Cache::BatchNorm(c)) => {
                    let gr = b.backward(c, &g)?;
                    per_layer[i] = vec![gr.scale, gr.offset];
                    gr.input
                }
                (Layer::Relu, Cache::Input(x)) => relu_backward(x, &g)?,
                (Layer::MaxPool(p), Cache::Pool(shape, idx)) => p.backward(shape, idx, &g)?,
                (Layer::Dropout(d), Cache::Dropout(mask)) => d.backward(mask, &g)?,
                (Layer::Flatten, Cache::Flatten(shape)) => g.reshape(shape.clone())?,
                (Layer::Linear(l), Cache::Input(x)) => {
                    let gr = l.backward(x, &g)?;
                    per_layer[i] = vec![gr.weight, gr.bias];
                    gr.input
                }
                _ => return Err(Error::usage(format!("cache {i} does not match layer kind"))),
            };
        }
        Ok(per_layer.into_iter().flatten().collect())
    }

    /// Names of the trainable blocks, e.g. `0.conv.weight`, `13.qconv.c3`.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let k = layer.kind();
            match layer {
                Layer::Conv(_) | Layer::Linear(_) => {
                    names.push(format!("{i}.{k}.weight"));
                    names.push(format!("{i}.{k}.bias"));
                }
                Layer::QConv { layer, .. } => {
                    names.extend((0..layer.in_channels).map(|c| format!("{i}.{k}.c{c}")));
                }
                Layer::BatchNorm(_) => {
                    names.push(format!("{i}.{k}.scale"));
                    names.push(format!("{i}.{k}.offset"));
                }
                _ => {}
            }
        }
        names
    }

    pub fn params(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => out.extend([&c.weight, &c.bias]),
                Layer::Linear(l) => out.extend([&l.weight, &l.bias]),
                Layer::QConv { layer, .. } => out.extend(layer.params.iter()),
                Layer::BatchNorm(b) => out.extend([&b.scale, &b.offset]),
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => out.extend([&mut c.weight, &mut c.bias]),
                Layer::Linear(l) => out.extend([&mut l.weight, &mut l.bias]),
                Layer::QConv { layer, .. } => out.extend(layer.params.iter_mut()),
                Layer::BatchNorm(b) => out.extend([&mut b.scale, &mut b.offset]),
                _ => {}
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::softmax_cross_entropy;
    use crate::qfilter::Ansatz;
    use crate::train::arch::Stack3d;

    fn qccnn2d() -> Architecture {
        Architecture::Qccnn2d {
            encoding: Encoding::HigherOrder,
            ansatz: Ansatz::basic(1),
        }
    }

    fn audit_params(m: &Model) -> Vec<usize> {
        m.audit().iter().map(|a| a.params).collect()
    }

    #[test]
    fn two_d_counts() {
        let m = Model::build(Architecture::Classical2d, &[1, 28, 28], 11, 0).unwrap();
        assert_eq!(audit_params(&m), vec![20, 0, 8635]);
        let m = Model::build(qccnn2d(), &[1, 28, 28], 11, 0).unwrap();
        assert_eq!(audit_params(&m), vec![4, 0, 8635]);
        let strong = Architecture::Qccnn2d {
            encoding: Encoding::Angle,
            ansatz: Ansatz::strong(1),
        };
        assert_eq!(
            Model::build(strong, &[1, 28, 28], 11, 0).unwrap().param_count(),
            12 + 8635
        );
    }

    #[test]
    fn three_d_fourth_layer_counts() {
        let stack = Stack3d::default();
        let c = Model::build(Architecture::Classical3d { stack }, &[1, 16, 16, 16], 2, 0).unwrap();
        let fourth = |m: &Model| {
            m.audit()
                .into_iter()
                .find(|a| a.kind == "qconv" || (a.kind == "conv" && a.output_shape[0] == 64))
                .unwrap()
                .params
        };
        assert_eq!(fourth(&c), 576);
        for (layers, total) in [(1, 192), (2, 384)] {
            let q = Model::build(Architecture::Qccnn3d { layers, stack }, &[1, 16, 16, 16], 2, 0).unwrap();
            assert_eq!(fourth(&q), total);
        }
    }

    #[test]
    fn auto_pool_plan() {
        let stack = Stack3d::default();
        let big = Model::build_uninit(Architecture::Classical3d { stack }, &[1, 64, 64, 64], 2).unwrap();
        assert_eq!(big.layers.iter().filter(|l| matches!(l, Layer::MaxPool(_))).count(), 3);
        let small = Model::build_uninit(Architecture::Classical3d { stack }, &[1, 16, 16, 16], 2).unwrap();
        assert_eq!(
            small.layers.iter().filter(|l| matches!(l, Layer::MaxPool(_))).count(),
            1
        );
        let flat = small.audit()[small.layers.len() - 2].output_shape.clone();
        assert_eq!(flat, vec![64]);
        let all = Architecture::Classical3d {
            stack: Stack3d {
                pools: PoolPlan::All,
                fourth_stride: 1,
            },
        };
        match Model::build_uninit(all, &[1, 16, 16, 16], 2) {
            Err(Error::Config(msg)) => assert!(msg.contains("layer"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reduced_reference_resolution() {
        let arch = Architecture::Qccnn3d {
            layers: 1,
            stack: Stack3d::default(),
        };
        let m = Model::build_uninit(arch, &[1, 16, 32, 32], 2).unwrap();
        let audit = m.audit();
        let q = audit.iter().find(|a| a.kind == "qconv").unwrap();
        assert_eq!(q.output_shape, vec![64, 1, 5, 5]);
    }

    #[test]
    fn wrong_input_shapes() {
        assert!(matches!(
            Model::build(Architecture::Classical2d, &[1, 1, 28, 28], 2, 0),
            Err(Error::Config(_))
        ));
        assert!(Model::build(Architecture::Classical2d, &[1, 1, 1], 2, 0).is_err());
        let m = Model::build(Architecture::Classical2d, &[1, 4, 4], 2, 0).unwrap();
        let mut m2 = m.clone();
        assert!(m2.forward_eval(&Tensor::zeros(vec![2, 1, 6, 6])).is_err());
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = Model::build(qccnn2d(), &[1, 8, 8], 3, 9).unwrap();
        let b = Model::build(qccnn2d(), &[1, 8, 8], 3, 9).unwrap();
        let c = Model::build(qccnn2d(), &[1, 8, 8], 3, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn backward_blocks_align_with_params() {
        let arch = Architecture::Qccnn3d {
            layers: 1,
            stack: Stack3d::default(),
        };
        let mut m = Model::build(arch, &[1, 16, 16, 16], 2, 3).unwrap();
        let x = Tensor::new(
            vec![2, 1, 16, 16, 16],
            (0..2 * 4096).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (logits, caches) = m.forward_train(&x, &mut rng).unwrap();
        let (_, g) = softmax_cross_entropy(&logits, &[0, 1]).unwrap();
        let grads = m.backward(&caches, &g).unwrap();
        let params = m.params();
        assert_eq!(grads.len(), params.len());
        assert_eq!(m.param_names().len(), params.len());
        for (g, p) in grads.iter().zip(params) {
            assert_eq!(g.len(), p.len());
        }
    }
}

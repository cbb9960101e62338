//! Central finite-difference checks of every analytic gradient in the crate.
//!
//! Each check contracts a layer's output with a random upstream tensor `u`
//! and compares `∂(u·y)/∂θ` against `(L(θ+h) − L(θ−h)) / 2h`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{relu, relu_backward, softmax_cross_entropy, BatchNorm, Conv, Dropout, Linear, MaxPool, Tensor};
use crate::qconv::QuantumConv;
use crate::qfilter::{self, Ansatz, AnsatzKind, Encoding, FilterSpec, ShiftRule};
use crate::train::{Architecture, Model};

pub const FD_STEP: f64 = 1e-5;
pub const QUANTUM_TOLERANCE: f64 = 1e-6;
pub const CLASSICAL_TOLERANCE: f64 = 1e-5;
/// Gradients smaller than this are compared on an absolute scale.
pub const SCALE_FLOOR: f64 = 1e-3;

/// `|a − b| / max(|a|, |b|, SCALE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(SCALE_FLOOR);
    let err = (analytic - numeric).abs() / scale;
    if err.is_nan() {
        f64::INFINITY
    } else {
        err
    }
}

/// Central difference of `f` in coordinate `i` of `x`; `x` is restored.
pub fn central_difference(x: &mut [f64], i: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + h;
    let plus = f(x);
    x[i] = orig - h;
    let minus = f(x);
    x[i] = orig;
    (plus - minus) / (2.0 * h)
}

/// Worst relative error of `analytic` against finite differences of `f` over all of `x`.
pub fn compare_all(x: &mut [f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    (0..x.len())
        .map(|i| relative_error(analytic[i], central_difference(x, i, FD_STEP, &mut f)))
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn tensor(rng: &mut impl Rng, shape: Vec<usize>) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, uniform(rng, n, -1.0, 1.0)).expect("sized")
}

/// Worst errors of one quantum filter configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterCheck {
    pub params: f64,
    /// `None` for threshold encoding, whose input gradient is defined as 0.
    pub inputs: Option<f64>,
    /// Threshold encoding: whether every reported input gradient was exactly 0.
    pub threshold_inputs_zero: bool,
}

pub fn check_filter(
    spec: &FilterSpec<f64>,
    params: &[f64],
    inputs: &[f64],
    upstream: &[f64],
    rule: ShiftRule<f64>,
) -> Result<FilterCheck> {
    let g = qfilter::gradients(spec, params, inputs, upstream, true, rule)?;
    let gi = g.inputs.expect("requested");
    let loss = |p: &[f64], x: &[f64]| dot(&qfilter::evaluate(spec, p, x).expect("valid"), upstream);
    let mut p = params.to_vec();
    let worst_params = compare_all(&mut p, &g.params, |p| loss(p, inputs));
    let threshold = matches!(spec.encoding, Encoding::Threshold(_));
    let worst_inputs = if threshold {
        None
    } else {
        let mut x = inputs.to_vec();
        Some(compare_all(&mut x, &gi, |x| loss(params, x)))
    };
    Ok(FilterCheck {
        params: worst_params,
        inputs: worst_inputs,
        threshold_inputs_zero: !threshold || gi.iter().all(|&v| v == 0.0),
    })
}

/// Random filter configuration: 1–4 qubits, 1–2 layers, angles on [0, 2π),
/// inputs in a range suited to the encoding, upstream on [−1, 1].
pub fn random_filter_case(
    rng: &mut impl Rng,
    encoding: Encoding<f64>,
    kind: AnsatzKind,
) -> (FilterSpec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = rng.gen_range(1..=4);
    let layers = rng.gen_range(1..=2);
    let spec = FilterSpec::new(n, encoding, Ansatz::new(kind, layers).expect("layers ≥ 1")).expect("valid");
    let params = spec.random_params(rng);
    let span = match encoding {
        Encoding::HigherOrder => 1.5,
        _ => std::f64::consts::PI,
    };
    let inputs = uniform(rng, n, -span, span);
    let upstream = uniform(rng, n, -1.0, 1.0);
    (spec, params, inputs, upstream)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentReport {
    pub component: String,
    pub checks: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl ComponentReport {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub components: Vec<ComponentReport>,
    pub threshold_inputs_zero: bool,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.threshold_inputs_zero && self.components.iter().all(ComponentReport::passed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckOptions {
    pub seed: u64,
    /// Random filter configurations per encoding/ansatz pair.
    pub filter_cases: usize,
    pub shift: ShiftRule<f64>,
    /// Also check a whole model end to end on a small input.
    pub model: Option<(Architecture, Vec<usize>)>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            filter_cases: 100,
            shift: ShiftRule::default(),
            model: None,
        }
    }
}

pub const ENCODINGS: [Encoding<f64>; 3] = [Encoding::Threshold(0.0), Encoding::Angle, Encoding::HigherOrder];
pub const ANSATZE: [AnsatzKind; 2] = [AnsatzKind::BasicEntangling, AnsatzKind::StronglyEntangling];

/// Filter suite: one parameter and one input component per encoding/ansatz pair.
pub fn filter_suite(opts: &GradcheckOptions) -> Result<(Vec<ComponentReport>, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut reports = Vec::new();
    let mut zero = true;
    for encoding in ENCODINGS {
        for kind in ANSATZE {
            let mut wp: f64 = 0.0;
            let mut wi: f64 = 0.0;
            for _ in 0..opts.filter_cases {
                let (spec, p, x, u) = random_filter_case(&mut rng, encoding, kind);
                let c = check_filter(&spec, &p, &x, &u, opts.shift)?;
                wp = wp.max(c.params);
                wi = wi.max(c.inputs.unwrap_or(0.0));
                zero &= c.threshold_inputs_zero;
            }
            let name = format!("qfilter/{}/{kind}", crate::train::arch::encoding_name(&encoding));
            reports.push(ComponentReport {
                component: format!("{name}/params"),
                checks: opts.filter_cases,
                worst: wp,
                tolerance: QUANTUM_TOLERANCE,
            });
            if !matches!(encoding, Encoding::Threshold(_)) {
                reports.push(ComponentReport {
                    component: format!("{name}/inputs"),
                    checks: opts.filter_cases,
                    worst: wi,
                    tolerance: QUANTUM_TOLERANCE,
                });
            }
        }
    }
    Ok((reports, zero))
}

/// Worst errors for a quantum conv layer's parameters and inputs.
pub fn check_qconv(
    layer: &QuantumConv<f64>,
    input: &Tensor<f64>,
    upstream: &Tensor<f64>,
    rule: ShiftRule<f64>,
) -> Result<(f64, f64)> {
    let g = layer.backward_with_rule(input, upstream, true, rule)?;
    let loss = |l: &QuantumConv<f64>, x: &Tensor<f64>| dot(l.forward(x).expect("valid").data(), upstream.data());
    let mut worst_p: f64 = 0.0;
    for c in 0..layer.in_channels {
        let mut p = layer.params[c].clone();
        let mut probe = layer.clone();
        worst_p = worst_p.max(compare_all(&mut p, &g.params[c], |p| {
            probe.params[c] = p.to_vec();
            loss(&probe, input)
        }));
    }
    let mut x = input.data().to_vec();
    let shape = input.shape().to_vec();
    let worst_x = compare_all(&mut x, g.input.as_ref().expect("requested").data(), |x| {
        loss(layer, &Tensor::new(shape.clone(), x.to_vec()).expect("sized"))
    });
    Ok((worst_p, worst_x))
}

fn qconv_suite(rng: &mut ChaCha8Rng, rule: ShiftRule<f64>) -> Result<Vec<ComponentReport>> {
    let cases: [(usize, Vec<usize>, Encoding<f64>, Ansatz); 2] = [
        (2, vec![2, 2, 4, 5], Encoding::HigherOrder, Ansatz::basic(1)),
        (3, vec![1, 2, 3, 3, 3], Encoding::Angle, Ansatz::strong(1)),
    ];
    let mut out = Vec::new();
    for (dims, shape, encoding, ansatz) in cases {
        let mut layer = QuantumConv::new(dims, 2, 1, shape[1], encoding, ansatz)?;
        layer.init_params(rng);
        let x = tensor(rng, shape);
        let y = layer.forward(&x)?;
        let u = tensor(rng, y.shape().to_vec());
        let (wp, wx) = check_qconv(&layer, &x, &u, rule)?;
        let checks = layer.param_count() + x.len();
        out.push(ComponentReport {
            component: format!("qconv/{dims}d"),
            checks,
            worst: wp.max(wx),
            tolerance: QUANTUM_TOLERANCE,
        });
    }
    Ok(out)
}

/// Worst error over weights, bias and input of a convolution.
pub fn check_conv(conv: &Conv<f64>, x: &Tensor<f64>, u: &Tensor<f64>) -> Result<f64> {
    let g = conv.backward(x, u)?;
    let loss = |c: &Conv<f64>, x: &Tensor<f64>| dot(c.forward(x).expect("valid").data(), u.data());
    let mut probe = conv.clone();
    let mut w = conv.weight.clone();
    let ew = compare_all(&mut w, &g.weight, |w| {
        probe.weight = w.to_vec();
        loss(&probe, x)
    });
    let mut probe = conv.clone();
    let mut b = conv.bias.clone();
    let eb = compare_all(&mut b, &g.bias, |b| {
        probe.bias = b.to_vec();
        loss(&probe, x)
    });
    let mut xv = x.data().to_vec();
    let shape = x.shape().to_vec();
    let ex = compare_all(&mut xv, g.input.data(), |v| {
        loss(conv, &Tensor::new(shape.clone(), v.to_vec()).expect("sized"))
    });
    Ok(ew.max(eb).max(ex))
}

fn resample_away(rng: &mut ChaCha8Rng, shape: Vec<usize>, ok: impl Fn(&Tensor<f64>) -> bool) -> Tensor<f64> {
    loop {
        let t = tensor(rng, shape.clone());
        if ok(&t) {
            return t;
        }
    }
}

fn nn_suite(rng: &mut ChaCha8Rng) -> Result<Vec<ComponentReport>> {
    let mut out = Vec::new();
    let mut push = |component: &str, checks: usize, worst: f64| {
        out.push(ComponentReport {
            component: component.to_string(),
            checks,
            worst,
            tolerance: CLASSICAL_TOLERANCE,
        })
    };

    for (name, dims, shape, c_out, k, s, g) in [
        ("nn/conv2d", 2, vec![2, 2, 5, 5], 3, 2, 1, 1),
        ("nn/conv3d", 3, vec![2, 2, 4, 4, 4], 2, 2, 2, 1),
        ("nn/conv3d-grouped", 3, vec![1, 4, 3, 3, 3], 8, 2, 1, 4),
    ] {
        let mut conv = Conv::new(dims, shape[1], c_out, k, s, g)?;
        conv.init_uniform(rng);
        let x = tensor(rng, shape);
        let u = tensor(rng, conv.forward(&x)?.shape().to_vec());
        push(name, conv.param_count() + x.len(), check_conv(&conv, &x, &u)?);
    }

    let mut lin = Linear::new(5, 3)?;
    lin.init_uniform(rng);
    let x = tensor(rng, vec![2, 5]);
    let u = tensor(rng, vec![2, 3]);
    let g = lin.backward(&x, &u)?;
    let loss = |l: &Linear<f64>, x: &Tensor<f64>| dot(l.forward(x).expect("valid").data(), u.data());
    let mut probe = lin.clone();
    let mut w = lin.weight.clone();
    let mut worst = compare_all(&mut w, &g.weight, |w| {
        probe.weight = w.to_vec();
        loss(&probe, &x)
    });
    let mut b = lin.bias.clone();
    let mut probe = lin.clone();
    worst = worst.max(compare_all(&mut b, &g.bias, |b| {
        probe.bias = b.to_vec();
        loss(&probe, &x)
    }));
    let mut xv = x.data().to_vec();
    worst = worst.max(compare_all(&mut xv, g.input.data(), |v| {
        loss(&lin, &Tensor::new(vec![2, 5], v.to_vec()).expect("sized"))
    }));
    push("nn/linear", lin.param_count() + x.len(), worst);

    let mut bn = BatchNorm::new(3);
    bn.scale = uniform(rng, 3, 0.5, 1.5);
    bn.offset = uniform(rng, 3, -0.5, 0.5);
    let x = tensor(rng, vec![2, 3, 4, 4]);
    let u = tensor(rng, vec![2, 3, 4, 4]);
    let (_, cache) = bn.clone().forward_train(&x)?;
    let g = bn.backward(&cache, &u)?;
    let loss = |b: &BatchNorm<f64>, x: &Tensor<f64>| dot(b.clone().forward_train(x).expect("valid").0.data(), u.data());
    let mut probe = bn.clone();
    let mut s = bn.scale.clone();
    let mut worst = compare_all(&mut s, &g.scale, |s| {
        probe.scale = s.to_vec();
        loss(&probe, &x)
    });
    let mut probe = bn.clone();
    let mut o = bn.offset.clone();
    worst = worst.max(compare_all(&mut o, &g.offset, |o| {
        probe.offset = o.to_vec();
        loss(&probe, &x)
    }));
    let mut xv = x.data().to_vec();
    worst = worst.max(compare_all(&mut xv, g.input.data(), |v| {
        loss(&bn, &Tensor::new(vec![2, 3, 4, 4], v.to_vec()).expect("sized"))
    }));
    push("nn/batchnorm", bn.param_count() + x.len(), worst);

    let x = resample_away(rng, vec![2, 3, 4], |t| t.data().iter().all(|v| v.abs() > 1e-3));
    let u = tensor(rng, vec![2, 3, 4]);
    let g = relu_backward(&x, &u)?;
    let mut xv = x.data().to_vec();
    let worst = compare_all(&mut xv, g.data(), |v| {
        dot(
            relu(&Tensor::new(vec![2, 3, 4], v.to_vec()).expect("sized")).data(),
            u.data(),
        )
    });
    push("nn/relu", x.len(), worst);

    let pool = MaxPool::new(2);
    for (name, shape) in [
        ("nn/maxpool2d", vec![2, 2, 4, 4]),
        ("nn/maxpool3d", vec![1, 2, 4, 4, 4]),
    ] {
        // Keep every pair of values well apart so no perturbation flips an argmax.
        let x = resample_away(rng, shape.clone(), |t| {
            let mut v = t.data().to_vec();
            v.sort_by(f64::total_cmp);
            v.windows(2).all(|w| w[1] - w[0] > 1e-4)
        });
        let (y, idx) = pool.forward(&x)?;
        let u = tensor(rng, y.shape().to_vec());
        let g = pool.backward(x.shape(), &idx, &u)?;
        let mut xv = x.data().to_vec();
        let worst = compare_all(&mut xv, g.data(), |v| {
            let t = Tensor::new(shape.clone(), v.to_vec()).expect("sized");
            dot(pool.forward(&t).expect("valid").0.data(), u.data())
        });
        push(name, x.len(), worst);
    }

    let drop = Dropout::new(0.3)?;
    let x = tensor(rng, vec![3, 7]);
    let u = tensor(rng, vec![3, 7]);
    let mask_seed: u64 = rng.gen();
    let (_, mask) = drop.forward_train(&x, &mut ChaCha8Rng::seed_from_u64(mask_seed));
    let g = drop.backward(&mask, &u)?;
    let mut xv = x.data().to_vec();
    let worst = compare_all(&mut xv, g.data(), |v| {
        let t = Tensor::new(vec![3, 7], v.to_vec()).expect("sized");
        dot(
            drop.forward_train(&t, &mut ChaCha8Rng::seed_from_u64(mask_seed))
                .0
                .data(),
            u.data(),
        )
    });
    push("nn/dropout", x.len(), worst);

    let logits = tensor(rng, vec![4, 3]);
    let labels = [0, 2, 1, 2];
    let (_, g) = softmax_cross_entropy(&logits, &labels)?;
    let mut lv = logits.data().to_vec();
    let worst = compare_all(&mut lv, g.data(), |v| {
        softmax_cross_entropy(&Tensor::new(vec![4, 3], v.to_vec()).expect("sized"), &labels)
            .expect("valid")
            .0
    });
    push("nn/softmax-cross-entropy", logits.len(), worst);
    Ok(out)
}

/// End-to-end check of `samples` randomly chosen parameters of a freshly
/// built model in training mode (dropout masks held fixed).
pub fn check_model(arch: Architecture, input_shape: &[usize], seed: u64, samples: usize) -> Result<ComponentReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::build(arch, input_shape, 2, seed)?;
    let batch = 2;
    let mut shape = vec![batch];
    shape.extend_from_slice(input_shape);
    let x = tensor(&mut rng, shape);
    let labels = [0, 1];
    let mask_seed: u64 = rng.gen();
    let (logits, caches) = model
        .clone()
        .forward_train(&x, &mut ChaCha8Rng::seed_from_u64(mask_seed))?;
    let (_, g) = softmax_cross_entropy(&logits, &labels)?;
    let grads = model.backward(&caches, &g)?;
    let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(Error::config("model has no parameters"));
    }
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut flat = rng.gen_range(0..total);
        let mut block = 0;
        while flat >= sizes[block] {
            flat -= sizes[block];
            block += 1;
        }
        let orig = model.params()[block][flat];
        let eval = |v: f64, model: &mut Model| {
            model.params_mut()[block][flat] = v;
            let mut m = model.clone();
            let (l, _) = m
                .forward_train(&x, &mut ChaCha8Rng::seed_from_u64(mask_seed))
                .expect("valid");
            softmax_cross_entropy(&l, &labels).expect("valid").0
        };
        let plus = eval(orig + FD_STEP, &mut model);
        let minus = eval(orig - FD_STEP, &mut model);
        model.params_mut()[block][flat] = orig;
        worst = worst.max(relative_error(grads[block][flat], (plus - minus) / (2.0 * FD_STEP)));
    }
    Ok(ComponentReport {
        component: format!("model/{}", arch.name()),
        checks: samples,
        worst,
        tolerance: CLASSICAL_TOLERANCE,
    })
}

/// Runs the filter, quantum conv and classical layer suites (plus the model
/// check when requested).
pub fn run(opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let (mut components, threshold_inputs_zero) = filter_suite(opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    components.extend(qconv_suite(&mut rng, opts.shift)?);
    components.extend(nn_suite(&mut rng)?);
    if let Some((arch, shape)) = &opts.model {
        components.push(check_model(*arch, shape, opts.seed, 24)?);
    }
    Ok(GradcheckReport {
        components,
        threshold_inputs_zero,
    })
}

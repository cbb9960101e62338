//! One quantum convolutional filter: an encoding feature map, a variational
//! ansatz and a per-qubit `⟨Z⟩` readout with no activation.
//!
//! Gradients use the two-point parameter-shift rule. Every rotation in the
//! circuit has a generator with eigenvalues ±1/2, so
//! `∂E/∂θ = (E(θ + π/2) − E(θ − π/2)) / 2` is exact.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::qsim::{Gate, StateVector, MAX_QUBITS};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Encoding<T> {
    /// `|1⟩` when `x ≥ t`, `|0⟩` otherwise. The flip is an `RX(π)`.
    Threshold(T),
    /// `RX(x)` on each qubit.
    Angle,
    /// `H`, `RZ(x_i)`, then a `ZZ(x_i·x_j)` block on every pair `i < j`.
    HigherOrder,
}

impl<T: Scalar> Encoding<T> {
    /// Number of gates emitted for `n` inputs (Threshold: upper bound).
    pub fn gate_count(&self, n: usize) -> usize {
        match self {
            Encoding::Threshold(_) | Encoding::Angle => n,
            Encoding::HigherOrder => 2 * n + 3 * n * (n - 1) / 2,
        }
    }
}

impl<T: Scalar> fmt::Display for Encoding<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Encoding::Threshold(t) => write!(f, "threshold(t={t})"),
            Encoding::Angle => f.write_str("angle"),
            Encoding::HigherOrder => f.write_str("higher-order"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnsatzKind {
    /// `RX(θ_i)` per qubit, then a CNOT ring.
    BasicEntangling,
    /// `RX, RY, RZ` per qubit, then a CNOT ring.
    StronglyEntangling,
}

impl AnsatzKind {
    pub fn rotations_per_qubit(self) -> usize {
        match self {
            AnsatzKind::BasicEntangling => 1,
            AnsatzKind::StronglyEntangling => 3,
        }
    }
}

impl fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnsatzKind::BasicEntangling => "basic",
            AnsatzKind::StronglyEntangling => "strong",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ansatz {
    pub kind: AnsatzKind,
    pub layers: usize,
}

impl Ansatz {
    pub fn new(kind: AnsatzKind, layers: usize) -> Result<Self> {
        if layers == 0 {
            return Err(Error::config("ansatz needs at least one layer"));
        }
        Ok(Self { kind, layers })
    }

    pub fn basic(layers: usize) -> Self {
        Self::new(AnsatzKind::BasicEntangling, layers).expect("layers ≥ 1")
    }

    pub fn strong(layers: usize) -> Self {
        Self::new(AnsatzKind::StronglyEntangling, layers).expect("layers ≥ 1")
    }

    pub fn parameter_count(&self, n_qubits: usize) -> usize {
        self.kind.rotations_per_qubit() * n_qubits * self.layers
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSpec<T> {
    pub n_qubits: usize,
    pub encoding: Encoding<T>,
    pub ansatz: Ansatz,
}

impl<T: Scalar> FilterSpec<T> {
    pub fn new(n_qubits: usize, encoding: Encoding<T>, ansatz: Ansatz) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::config(format!(
                "filter qubit count {n_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        if ansatz.layers == 0 {
            return Err(Error::config("ansatz needs at least one layer"));
        }
        if let Encoding::Threshold(t) = encoding {
            if !t.is_finite() {
                return Err(Error::config("threshold must be finite"));
            }
        }
        Ok(Self {
            n_qubits,
            encoding,
            ansatz,
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.ansatz.parameter_count(self.n_qubits)
    }

    /// Independent uniform angles on `[0, 2π)`.
    pub fn random_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let two_pi = T::lit(std::f64::consts::TAU);
        (0..self.parameter_count())
            .map(|_| T::lit(rng.gen::<f64>()) * two_pi)
            .collect()
    }

    fn check(&self, params: &[T], inputs: &[T]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::usage(format!(
                "filter expects {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        if inputs.len() != self.n_qubits {
            return Err(Error::usage(format!(
                "filter expects {} inputs, got {}",
                self.n_qubits,
                inputs.len()
            )));
        }
        Ok(())
    }
}

pub fn parameter_count<T: Scalar>(spec: &FilterSpec<T>) -> usize {
    spec.parameter_count()
}

/// Encoding gates for `inputs`, one qubit per input.
pub fn encode<T: Scalar>(encoding: &Encoding<T>, inputs: &[T]) -> Result<Vec<Gate<T>>> {
    if inputs.is_empty() || inputs.len() > MAX_QUBITS {
        return Err(Error::usage(format!("cannot encode {} inputs", inputs.len())));
    }
    Ok(encode_tracked(encoding, inputs).into_iter().map(|(g, _)| g).collect())
}

/// How an encoding gate's angle depends on the inputs: `∂angle/∂x_i`.
#[derive(Clone, Copy, Debug)]
enum InputDependence {
    None,
    Single(usize),
    /// angle = x_i · x_j
    Product(usize, usize),
}

fn encode_tracked<T: Scalar>(encoding: &Encoding<T>, inputs: &[T]) -> Vec<(Gate<T>, InputDependence)> {
    let n = inputs.len();
    let mut gates = Vec::with_capacity(encoding.gate_count(n));
    match *encoding {
        Encoding::Threshold(t) => {
            for (q, &x) in inputs.iter().enumerate() {
                if x >= t {
                    gates.push((Gate::Rx(q, T::PI()), InputDependence::None));
                }
            }
        }
        Encoding::Angle => {
            for (q, &x) in inputs.iter().enumerate() {
                gates.push((Gate::Rx(q, x), InputDependence::Single(q)));
            }
        }
        Encoding::HigherOrder => {
            for q in 0..n {
                gates.push((Gate::H(q), InputDependence::None));
            }
            for (q, &x) in inputs.iter().enumerate() {
                gates.push((Gate::Rz(q, x), InputDependence::Single(q)));
            }
            for i in 0..n {
                for j in i + 1..n {
                    let phi = inputs[i] * inputs[j];
                    gates.push((Gate::Cnot(i, j), InputDependence::None));
                    gates.push((Gate::Rz(j, phi), InputDependence::Product(i, j)));
                    gates.push((Gate::Cnot(i, j), InputDependence::None));
                }
            }
        }
    }
    gates
}

/// Ansatz gates; parameter `p` lands on the `p`-th rotation emitted.
pub fn ansatz_gates<T: Scalar>(ansatz: &Ansatz, params: &[T], n_qubits: usize) -> Result<Vec<Gate<T>>> {
    if params.len() != ansatz.parameter_count(n_qubits) {
        return Err(Error::usage(format!(
            "ansatz expects {} parameters, got {}",
            ansatz.parameter_count(n_qubits),
            params.len()
        )));
    }
    Ok(ansatz_unchecked(ansatz, params, n_qubits))
}

fn ansatz_unchecked<T: Scalar>(ansatz: &Ansatz, params: &[T], n: usize) -> Vec<Gate<T>> {
    let per_layer = ansatz.kind.rotations_per_qubit() * n;
    let mut gates = Vec::with_capacity(ansatz.layers * (per_layer + n));
    for layer in params.chunks(per_layer) {
        match ansatz.kind {
            AnsatzKind::BasicEntangling => {
                for (q, &theta) in layer.iter().enumerate() {
                    gates.push(Gate::Rx(q, theta));
                }
            }
            AnsatzKind::StronglyEntangling => {
                for (q, xyz) in layer.chunks(3).enumerate() {
                    gates.push(Gate::Rx(q, xyz[0]));
                    gates.push(Gate::Ry(q, xyz[1]));
                    gates.push(Gate::Rz(q, xyz[2]));
                }
            }
        }
        // A single qubit has no ring to close.
        if n > 1 {
            for q in 0..n {
                gates.push(Gate::Cnot(q, (q + 1) % n));
            }
        }
    }
    gates
}

/// `(⟨Z_0⟩, …, ⟨Z_{n−1}⟩)` after encoding `inputs` and applying the ansatz.
pub fn evaluate<T: Scalar>(spec: &FilterSpec<T>, params: &[T], inputs: &[T]) -> Result<Vec<T>> {
    spec.check(params, inputs)?;
    let mut state = StateVector::zero_state(spec.n_qubits)?;
    for (g, _) in encode_tracked(&spec.encoding, inputs) {
        state.apply_unchecked(&g);
    }
    for g in ansatz_unchecked(&spec.ansatz, params, spec.n_qubits) {
        state.apply_unchecked(&g);
    }
    Ok(state.expectations_z())
}

/// Parameter-shift configuration. Only the default shift of π/2 yields exact
/// gradients; other values exist to exercise the gradient checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftRule<T> {
    pub shift: T,
}

impl<T: Scalar> Default for ShiftRule<T> {
    fn default() -> Self {
        Self { shift: T::FRAC_PI_2() }
    }
}

/// Gradients of `Σ_q upstream[q]·⟨Z_q⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterGradients<T> {
    pub params: Vec<T>,
    /// `None` when input gradients were not requested.
    pub inputs: Option<Vec<T>>,
}

/// Gradient of `Σ_q upstream[q]·⟨Z_q⟩` with respect to the ansatz angles.
pub fn grad_params<T: Scalar>(spec: &FilterSpec<T>, params: &[T], inputs: &[T], upstream: &[T]) -> Result<Vec<T>> {
    Ok(gradients(spec, params, inputs, upstream, false, ShiftRule::default())?.params)
}

/// Gradient of `Σ_q upstream[q]·⟨Z_q⟩` with respect to the filter inputs.
/// Identically zero for threshold encoding.
pub fn grad_inputs<T: Scalar>(spec: &FilterSpec<T>, params: &[T], inputs: &[T], upstream: &[T]) -> Result<Vec<T>> {
    let g = gradients(spec, params, inputs, upstream, true, ShiftRule::default())?;
    Ok(g.inputs.expect("requested"))
}

/// Parameter and (optionally) input gradients from a single forward sweep.
///
/// The forward state is advanced gate by gate; at every differentiable
/// rotation the sweep forks two copies with the angle shifted by ±shift and
/// runs the remaining gates on each.
pub fn gradients<T: Scalar>(
    spec: &FilterSpec<T>,
    params: &[T],
    inputs: &[T],
    upstream: &[T],
    with_inputs: bool,
    rule: ShiftRule<T>,
) -> Result<FilterGradients<T>> {
    spec.check(params, inputs)?;
    if upstream.len() != spec.n_qubits {
        return Err(Error::usage(format!(
            "upstream gradient has {} entries, filter has {} outputs",
            upstream.len(),
            spec.n_qubits
        )));
    }
    let n = spec.n_qubits;
    let mut grad_params = vec![T::zero(); params.len()];
    let mut grad_inputs = with_inputs.then(|| vec![T::zero(); n]);
    if upstream.iter().all(|u| *u == T::zero()) {
        return Ok(FilterGradients {
            params: grad_params,
            inputs: grad_inputs,
        });
    }

    // Each gate paired with where its angle derivative goes.
    enum Target {
        Skip,
        Param(usize),
        Input(InputDependence),
    }
    let mut gates: Vec<(Gate<T>, Target)> = encode_tracked(&spec.encoding, inputs)
        .into_iter()
        .map(|(g, dep)| match dep {
            InputDependence::None => (g, Target::Skip),
            d if with_inputs => (g, Target::Input(d)),
            _ => (g, Target::Skip),
        })
        .collect();
    let mut next_param = 0;
    for g in ansatz_unchecked(&spec.ansatz, params, n) {
        if g.angle().is_some() {
            gates.push((g, Target::Param(next_param)));
            next_param += 1;
        } else {
            gates.push((g, Target::Skip));
        }
    }

    let half = T::lit(0.5);
    let mut state = StateVector::zero_state(n)?;
    for (idx, (gate, target)) in gates.iter().enumerate() {
        if !matches!(target, Target::Skip) {
            let angle = gate.angle().expect("differentiable gates are rotations");
            let shifted = |delta: T| {
                let mut s = state.clone();
                s.apply_unchecked(&gate.with_angle(angle + delta));
                for (g, _) in &gates[idx + 1..] {
                    s.apply_unchecked(g);
                }
                s.weighted_z(upstream)
            };
            let d_angle = (shifted(rule.shift) - shifted(-rule.shift)) * half;
            match *target {
                Target::Param(p) => grad_params[p] += d_angle,
                Target::Input(InputDependence::Single(i)) => {
                    if let Some(gi) = grad_inputs.as_mut() {
                        gi[i] += d_angle;
                    }
                }
                Target::Input(InputDependence::Product(i, j)) => {
                    if let Some(gi) = grad_inputs.as_mut() {
                        gi[i] += d_angle * inputs[j];
                        gi[j] += d_angle * inputs[i];
                    }
                }
                Target::Input(InputDependence::None) | Target::Skip => {}
            }
        }
        state.apply_unchecked(gate);
    }

    Ok(FilterGradients {
        params: grad_params,
        inputs: grad_inputs,
    })
}

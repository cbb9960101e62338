//! Dense statevector simulation of few-qubit circuits.
//!
//! Qubit `q` is bit `q` of the basis-state index (qubit 0 is the least
//! significant bit). Rotations follow `R_A(θ) = exp(-iθA/2)` for
//! `A ∈ {X, Y, Z, Z⊗Z}`. Global phase is kept as is.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_QUBITS: usize = 12;

/// Largest register for which [`dense_unitary`] will materialize a matrix.
pub const MAX_DENSE_QUBITS: usize = 8;

pub type Amplitude<T> = Complex<T>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate<T> {
    H(usize),
    Rx(usize, T),
    Ry(usize, T),
    Rz(usize, T),
    /// `Cnot(control, target)`
    Cnot(usize, usize),
    Rzz(usize, usize, T),
}

impl<T: Scalar> Gate<T> {
    pub fn angle(&self) -> Option<T> {
        match *self {
            Gate::Rx(_, a) | Gate::Ry(_, a) | Gate::Rz(_, a) | Gate::Rzz(_, _, a) => Some(a),
            Gate::H(_) | Gate::Cnot(..) => None,
        }
    }

    /// Same gate with its rotation angle replaced. Non-rotations are returned unchanged.
    pub fn with_angle(self, angle: T) -> Self {
        match self {
            Gate::Rx(q, _) => Gate::Rx(q, angle),
            Gate::Ry(q, _) => Gate::Ry(q, angle),
            Gate::Rz(q, _) => Gate::Rz(q, angle),
            Gate::Rzz(a, b, _) => Gate::Rzz(a, b, angle),
            g => g,
        }
    }

    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q) | Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => (q, None),
            Gate::Cnot(a, b) | Gate::Rzz(a, b, _) => (a, Some(b)),
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let (a, b) = self.qubits();
        if a >= n_qubits || b.is_some_and(|b| b >= n_qubits) {
            return Err(Error::usage(format!(
                "{self:?} addresses a qubit outside a {n_qubits}-qubit register"
            )));
        }
        if b == Some(a) {
            return Err(Error::usage(format!("{self:?} repeats qubit {a}")));
        }
        if let Some(angle) = self.angle() {
            if !angle.is_finite() {
                return Err(Error::usage(format!("{self:?} has a non-finite angle")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit<T> {
    n_qubits: usize,
    gates: Vec<Gate<T>>,
}

impl<T: Scalar> Circuit<T> {
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        Ok(Self {
            n_qubits,
            gates: Vec::new(),
        })
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate<T>>) -> Result<Self> {
        let mut circuit = Self::new(n_qubits)?;
        for g in gates {
            circuit.push(g)?;
        }
        Ok(circuit)
    }

    pub fn push(&mut self, gate: Gate<T>) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate<T>] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }
}

fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::config(format!(
            "qubit count {n_qubits} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T> {
    n_qubits: usize,
    amps: Vec<Amplitude<T>>,
}

impl<T: Scalar> StateVector<T> {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << n_qubits];
        amps[0] = Complex::new(T::one(), T::zero());
        Ok(Self { n_qubits, amps })
    }

    /// Wraps caller-provided amplitudes; length must be a power of two and the norm 1.
    pub fn from_amplitudes(amps: Vec<Amplitude<T>>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::usage(format!("amplitude count {len} is not 2^n with n ≥ 1")));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::usage("non-finite amplitude"));
        }
        let state = Self { n_qubits, amps };
        let drift = (state.norm_sqr() - T::one()).abs().as_f64();
        if drift > T::NORM_TOLERANCE {
            return Err(Error::usage(format!("state norm off by {drift:e}")));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Amplitude<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply(&mut self, gate: &Gate<T>) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    /// Applies a gate already validated against this register size.
    pub(crate) fn apply_unchecked(&mut self, gate: &Gate<T>) {
        let half = T::lit(0.5);
        match *gate {
            Gate::H(q) => {
                let s = T::FRAC_1_SQRT_2();
                self.mix_pairs(q, |x, y| ((x + y).scale(s), (x - y).scale(s)));
            }
            Gate::Rx(q, theta) => {
                let (sin, cos) = (theta * half).sin_cos();
                let m = Complex::new(T::zero(), -sin);
                self.mix_pairs(q, |x, y| (x.scale(cos) + y * m, x * m + y.scale(cos)));
            }
            Gate::Ry(q, theta) => {
                let (sin, cos) = (theta * half).sin_cos();
                self.mix_pairs(q, |x, y| (x.scale(cos) - y.scale(sin), x.scale(sin) + y.scale(cos)));
            }
            Gate::Rz(q, theta) => {
                let (sin, cos) = (theta * half).sin_cos();
                let lo = Complex::new(cos, -sin);
                let hi = Complex::new(cos, sin);
                self.mix_pairs(q, |x, y| (x * lo, y * hi));
            }
            Gate::Cnot(control, target) => {
                let cbit = 1usize << control;
                let tbit = 1usize << target;
                for i in 0..self.amps.len() {
                    if i & cbit != 0 && i & tbit == 0 {
                        self.amps.swap(i, i | tbit);
                    }
                }
            }
            Gate::Rzz(a, b, theta) => {
                let (sin, cos) = (theta * half).sin_cos();
                let even = Complex::new(cos, -sin);
                let odd = Complex::new(cos, sin);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    let parity = ((i >> a) ^ (i >> b)) & 1;
                    *amp *= if parity == 0 { even } else { odd };
                }
            }
        }
    }

    /// Applies a 2×2 update to every amplitude pair differing only in bit `q`.
    #[inline]
    fn mix_pairs<F>(&mut self, q: usize, f: F)
    where
        F: Fn(Amplitude<T>, Amplitude<T>) -> (Amplitude<T>, Amplitude<T>),
    {
        let bit = 1usize << q;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for i in base..base + bit {
                let j = i | bit;
                let (x, y) = f(self.amps[i], self.amps[j]);
                self.amps[i] = x;
                self.amps[j] = y;
            }
            base += bit << 1;
        }
    }

    /// Exact `⟨Z_q⟩`.
    pub fn expectation_z(&self, qubit: usize) -> Result<T> {
        if qubit >= self.n_qubits {
            return Err(Error::usage(format!(
                "qubit {qubit} outside a {}-qubit register",
                self.n_qubits
            )));
        }
        Ok(self.expectation_z_unchecked(qubit))
    }

    pub(crate) fn expectation_z_unchecked(&self, qubit: usize) -> T {
        let bit = 1usize << qubit;
        let mut acc = T::zero();
        for (i, a) in self.amps.iter().enumerate() {
            if i & bit == 0 {
                acc += a.norm_sqr();
            } else {
                acc -= a.norm_sqr();
            }
        }
        acc
    }

    /// `⟨Z_0⟩ … ⟨Z_{n-1}⟩` in one sweep over the amplitudes.
    pub fn expectations_z(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_qubits];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, o) in out.iter_mut().enumerate() {
                if (i >> q) & 1 == 0 {
                    *o += p;
                } else {
                    *o -= p;
                }
            }
        }
        out
    }

    /// `Σ_q weights[q]·⟨Z_q⟩`.
    pub(crate) fn weighted_z(&self, weights: &[T]) -> T {
        self.expectations_z()
            .into_iter()
            .zip(weights)
            .map(|(e, &w)| e * w)
            .sum()
    }
}

/// Runs `circuit` from `initial` (or `|0…0⟩`).
pub fn run<T: Scalar>(circuit: &Circuit<T>, initial: Option<StateVector<T>>) -> Result<StateVector<T>> {
    let mut state = match initial {
        Some(s) if s.n_qubits != circuit.n_qubits => {
            return Err(Error::usage(format!(
                "initial state has {} qubits, circuit has {}",
                s.n_qubits, circuit.n_qubits
            )))
        }
        Some(s) => s,
        None => StateVector::zero_state(circuit.n_qubits)?,
    };
    for g in &circuit.gates {
        state.apply_unchecked(g);
    }
    Ok(state)
}

/// Square complex matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    dim: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![Complex::new(T::zero(), T::zero()); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex::new(T::one(), T::zero());
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex<T> {
        self.data[row * self.dim + col]
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let n = self.dim;
        let mut data = vec![Complex::new(T::zero(), T::zero()); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        Self { dim: n, data }
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut data = self.data.clone();
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        Self { dim: n, data }
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                (0..n).fold(Complex::new(T::zero(), T::zero()), |acc, k| {
                    acc + self.data[i * n + k] * v[k]
                })
            })
            .collect()
    }
}

/// Local matrix of a gate on its own qubits; two-qubit matrices are indexed
/// by `bit(first) + 2·bit(second)`.
fn local_matrix<T: Scalar>(gate: &Gate<T>) -> Vec<Vec<Complex<T>>> {
    let z = Complex::new(T::zero(), T::zero());
    let one = Complex::new(T::one(), T::zero());
    let half = T::lit(0.5);
    let r = |x: T| Complex::new(x, T::zero());
    match *gate {
        Gate::H(_) => {
            let s = T::FRAC_1_SQRT_2();
            vec![vec![r(s), r(s)], vec![r(s), r(-s)]]
        }
        Gate::Rx(_, t) => {
            let (s, c) = (t * half).sin_cos();
            let m = Complex::new(T::zero(), -s);
            vec![vec![r(c), m], vec![m, r(c)]]
        }
        Gate::Ry(_, t) => {
            let (s, c) = (t * half).sin_cos();
            vec![vec![r(c), r(-s)], vec![r(s), r(c)]]
        }
        Gate::Rz(_, t) => {
            let e = Complex::new(T::zero(), -t * half).exp();
            vec![vec![e, z], vec![z, e.conj()]]
        }
        Gate::Cnot(..) => {
            // control = first qubit (low index bit), target = second
            let mut m = vec![vec![z; 4]; 4];
            m[0][0] = one;
            m[2][2] = one;
            m[3][1] = one;
            m[1][3] = one;
            m
        }
        Gate::Rzz(_, _, t) => {
            let e = Complex::new(T::zero(), -t * half).exp();
            let mut m = vec![vec![z; 4]; 4];
            m[0][0] = e;
            m[1][1] = e.conj();
            m[2][2] = e.conj();
            m[3][3] = e;
            m
        }
    }
}

/// Embeds a gate into the full `2^n` space by its action on each basis column.
fn embedded_matrix<T: Scalar>(gate: &Gate<T>, n_qubits: usize) -> DenseMatrix<T> {
    let dim = 1usize << n_qubits;
    let local = local_matrix(gate);
    let (a, b) = gate.qubits();
    let qubits: Vec<usize> = std::iter::once(a).chain(b).collect();
    let mask: usize = qubits.iter().map(|q| 1usize << q).sum();
    let local_index = |basis: usize| -> usize {
        qubits
            .iter()
            .enumerate()
            .map(|(pos, q)| ((basis >> q) & 1) << pos)
            .sum()
    };
    let mut data = vec![Complex::new(T::zero(), T::zero()); dim * dim];
    for row in 0..dim {
        for col in 0..dim {
            if row & !mask != col & !mask {
                continue;
            }
            data[row * dim + col] = local[local_index(row)][local_index(col)];
        }
    }
    DenseMatrix { dim, data }
}

/// Full unitary of a circuit as the ordered product of embedded gate matrices.
/// Meant as a reference for checking [`run`].
pub fn dense_unitary<T: Scalar>(circuit: &Circuit<T>) -> Result<DenseMatrix<T>> {
    if circuit.n_qubits > MAX_DENSE_QUBITS {
        return Err(Error::config(format!(
            "dense unitary limited to {MAX_DENSE_QUBITS} qubits, circuit has {}",
            circuit.n_qubits
        )));
    }
    let mut u = DenseMatrix::identity(1 << circuit.n_qubits);
    for g in &circuit.gates {
        u = embedded_matrix(g, circuit.n_qubits).matmul(&u);
    }
    Ok(u)
}

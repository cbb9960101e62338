//! Kronecker-product reference simulator: builds the full 2ⁿ×2ⁿ matrix of
//! every gate from 2×2 blocks and multiplies them out.

use num_complex::Complex64 as C;
use qccnn::qsim::Gate;

type Matrix = Vec<Vec<C>>;

fn identity(dim: usize) -> Matrix {
    (0..dim)
        .map(|r| {
            (0..dim)
                .map(|c| if r == c { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) })
                .collect()
        })
        .collect()
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (n, m) = (a.len(), b.len());
    let mut out = vec![vec![C::new(0.0, 0.0); n * m]; n * m];
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                for l in 0..m {
                    out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = vec![vec![C::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn add(a: &Matrix, b: &Matrix) -> Matrix {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

fn single(g: &Gate<f64>) -> Matrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = C::new(0.0, 0.0);
    let re = |x: f64| C::new(x, 0.0);
    match *g {
        Gate::H(_) => vec![vec![re(h), re(h)], vec![re(h), re(-h)]],
        Gate::Rx(_, t) => {
            let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
            vec![vec![re(c), C::new(0.0, -s)], vec![C::new(0.0, -s), re(c)]]
        }
        Gate::Ry(_, t) => {
            let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
            vec![vec![re(c), re(-s)], vec![re(s), re(c)]]
        }
        Gate::Rz(_, t) => vec![
            vec![C::from_polar(1.0, -t / 2.0), z],
            vec![z, C::from_polar(1.0, t / 2.0)],
        ],
        _ => unreachable!(),
    }
}

/// `⊗` over qubits n−1 … 0 with `op(q)` in each slot (qubit 0 least significant).
fn embed(n: usize, op: impl Fn(usize) -> Matrix) -> Matrix {
    let mut m = vec![vec![C::new(1.0, 0.0)]];
    for q in (0..n).rev() {
        m = kron(&m, &op(q));
    }
    m
}

fn full_matrix(n: usize, g: &Gate<f64>) -> Matrix {
    let re = |x: f64| C::new(x, 0.0);
    let p0 = vec![vec![re(1.0), re(0.0)], vec![re(0.0), re(0.0)]];
    let p1 = vec![vec![re(0.0), re(0.0)], vec![re(0.0), re(1.0)]];
    let x = vec![vec![re(0.0), re(1.0)], vec![re(1.0), re(0.0)]];
    match *g {
        Gate::H(q) | Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => {
            embed(n, |k| if k == q { single(g) } else { identity(2) })
        }
        Gate::Cnot(c, t) => add(
            &embed(n, |k| if k == c { p0.clone() } else { identity(2) }),
            &embed(n, |k| {
                if k == c {
                    p1.clone()
                } else if k == t {
                    x.clone()
                } else {
                    identity(2)
                }
            }),
        ),
        Gate::Rzz(a, b, t) => {
            let dim = 1 << n;
            let mut m = vec![vec![C::new(0.0, 0.0); dim]; dim];
            for (i, row) in m.iter_mut().enumerate() {
                let za = if i >> a & 1 == 0 { 1.0 } else { -1.0 };
                let zb = if i >> b & 1 == 0 { 1.0 } else { -1.0 };
                row[i] = C::from_polar(1.0, -t / 2.0 * za * zb);
            }
            m
        }
    }
}

pub fn oracle_state(n: usize, gates: &[Gate<f64>]) -> Vec<C> {
    let mut u = identity(1 << n);
    for g in gates {
        u = matmul(&full_matrix(n, g), &u);
    }
    u.iter().map(|row| row[0]).collect()
}

//! Independent reference implementations used as oracles. Everything here
//! is written with explicit index loops and shares no code with the library.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type M = DMatrix<Complex64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn z(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn max_diff(a: &M, b: &M) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let mut m: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn max_abs(a: &M) -> f64 {
    let mut m: f64 = 0.0;
    for x in a.iter() {
        m = m.max(x.norm());
    }
    m
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> M {
    let mut m = M::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = z(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    m
}

/// Unitary from Gram-Schmidt on the columns of a random complex matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> M {
    let a = random_matrix(rng, n, n);
    let mut q = M::zeros(n, n);
    for j in 0..n {
        let mut v: Vec<Complex64> = (0..n).map(|i| a[(i, j)]).collect();
        for k in 0..j {
            let mut dot = z(0.0, 0.0);
            for i in 0..n {
                dot += q[(i, k)].conj() * v[i];
            }
            for i in 0..n {
                v[i] -= dot * q[(i, k)];
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            q[(i, j)] = v[i] / norm;
        }
    }
    q
}

pub fn matmul(a: &M, b: &M) -> M {
    assert_eq!(a.ncols(), b.nrows());
    let mut out = M::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = z(0.0, 0.0);
            for k in 0..a.ncols() {
                s += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

pub fn dagger(a: &M) -> M {
    let mut out = M::zeros(a.ncols(), a.nrows());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out[(j, i)] = a[(i, j)].conj();
        }
    }
    out
}

/// `U X U^dag`.
pub fn adjoint(u: &M, x: &M) -> M {
    matmul(&matmul(u, x), &dagger(u))
}

/// `(A (x) B)[(i*p + k), (j*q + l)] = A[i, j] B[k, l]`.
pub fn kron(a: &M, b: &M) -> M {
    let (p, q) = b.shape();
    let mut out = M::zeros(a.nrows() * p, a.ncols() * q);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            for k in 0..p {
                for l in 0..q {
                    out[(i * p + k, j * q + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Trace over the second factor.
pub fn ptrace_env(x: &M, ds: usize, de: usize) -> M {
    let mut out = M::zeros(ds, ds);
    for i in 0..ds {
        for j in 0..ds {
            for k in 0..de {
                out[(i, j)] += x[(i * de + k, j * de + k)];
            }
        }
    }
    out
}

/// Trace over the first factor.
pub fn ptrace_sys(x: &M, ds: usize, de: usize) -> M {
    let mut out = M::zeros(de, de);
    for k in 0..de {
        for l in 0..de {
            for i in 0..ds {
                out[(k, l)] += x[(i * de + k, i * de + l)];
            }
        }
    }
    out
}

pub fn sigma(k: usize) -> M {
    let (a, b, cc, d) = match k {
        0 => (z(1.0, 0.0), z(0.0, 0.0), z(0.0, 0.0), z(1.0, 0.0)),
        1 => (z(0.0, 0.0), z(1.0, 0.0), z(1.0, 0.0), z(0.0, 0.0)),
        2 => (z(0.0, 0.0), z(0.0, -1.0), z(0.0, 1.0), z(0.0, 0.0)),
        3 => (z(1.0, 0.0), z(0.0, 0.0), z(0.0, 0.0), z(-1.0, 0.0)),
        _ => panic!("no such Pauli matrix"),
    };
    M::from_row_slice(2, 2, &[a, b, cc, d])
}

/// `exp(-i (wt/2) Z (x) X)` by a Taylor series after scaling and squaring.
pub fn model_unitary_oracle(wt: f64) -> M {
    let h = kron(&sigma(3), &sigma(1));
    let n = 4;
    let scale = 6u32;
    let factor = z(0.0, -wt / 2.0 / 2f64.powi(scale as i32));
    let a = h.map(|x| x * factor);
    let mut sum = M::identity(n, n);
    let mut term = M::identity(n, n);
    for k in 1..30 {
        term = matmul(&term, &a).map(|x| x / k as f64);
        sum += &term;
    }
    for _ in 0..scale {
        sum = matmul(&sum, &sum);
    }
    sum
}

/// `alpha_k = Tr(sigma_k rho)`.
pub fn bloch(rho: &M) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let p = matmul(&sigma(k + 1), rho);
        *o = (p[(0, 0)] + p[(1, 1)]).re;
    }
    out
}

/// Trace distance between two qubit states from the Bloch vectors:
/// `|alpha - alpha'| / 2`.
pub fn qubit_trace_distance(a: &M, b: &M) -> f64 {
    let (x, y) = (bloch(a), bloch(b));
    ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt() / 2.0
}

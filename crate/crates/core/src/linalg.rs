//! Fixed-size complex matrix helpers and a Hermitian Jacobi eigensolver.
//!
//! Everything the entanglement measures need is a 4×4 Hermitian spectrum, so
//! a cyclic Jacobi sweep is both the simplest and the most accurate tool: it
//! converges quadratically and keeps eigenvectors orthonormal to machine
//! precision.

use num_complex::Complex64;

pub type CMat<const N: usize> = [[Complex64; N]; N];
pub type Mat4 = CMat<4>;

pub fn zeros<const N: usize>() -> CMat<N> {
    [[Complex64::new(0.0, 0.0); N]; N]
}

pub fn identity<const N: usize>() -> CMat<N> {
    let mut m = zeros();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

pub fn matmul<const N: usize>(a: &CMat<N>, b: &CMat<N>) -> CMat<N> {
    let mut out = zeros();
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..N {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn adjoint<const N: usize>(a: &CMat<N>) -> CMat<N> {
    let mut out = zeros();
    for i in 0..N {
        for j in 0..N {
            out[j][i] = a[i][j].conj();
        }
    }
    out
}

pub fn trace<const N: usize>(a: &CMat<N>) -> Complex64 {
    (0..N).map(|i| a[i][i]).sum()
}

/// Largest `|a_ij − conj(a_ji)|`.
pub fn hermiticity_error<const N: usize>(a: &CMat<N>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..N {
        for j in 0..N {
            worst = worst.max((a[i][j] - a[j][i].conj()).norm());
        }
    }
    worst
}

/// Largest elementwise `|a_ij − b_ij|`.
pub fn max_abs_diff<const N: usize>(a: &CMat<N>, b: &CMat<N>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..N {
        for j in 0..N {
            worst = worst.max((a[i][j] - b[i][j]).norm());
        }
    }
    worst
}

/// `|v⟩⟨v|`.
pub fn outer<const N: usize>(v: &[Complex64; N]) -> CMat<N> {
    let mut out = zeros();
    for i in 0..N {
        for j in 0..N {
            out[i][j] = v[i] * v[j].conj();
        }
    }
    out
}

pub fn kron2(a: &CMat<2>, b: &CMat<2>) -> Mat4 {
    let mut out = zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix (only the upper triangle is
/// trusted; the input is symmetrised first).
#[derive(Debug, Clone, Copy)]
pub struct HermitianEigen<const N: usize> {
    /// Ascending.
    pub values: [f64; N],
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: CMat<N>,
}

impl<const N: usize> HermitianEigen<N> {
    pub fn vector(&self, k: usize) -> [Complex64; N] {
        std::array::from_fn(|i| self.vectors[i][k])
    }
}

/// Cyclic complex Jacobi: each rotation zeroes one off-diagonal pair exactly.
pub fn hermitian_eigh<const N: usize>(input: &CMat<N>) -> HermitianEigen<N> {
    let mut a = *input;
    for i in 0..N {
        a[i][i] = Complex64::new(a[i][i].re, 0.0);
        for j in (i + 1)..N {
            let avg = 0.5 * (a[i][j] + a[j][i].conj());
            a[i][j] = avg;
            a[j][i] = avg.conj();
        }
    }
    let mut vecs = identity::<N>();
    let scale: f64 = a.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    for _sweep in 0..100 {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-300 || off <= 1e-16 * scale {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[p][q];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let phase = apq / mag;
                let theta = 0.5 * (2.0 * mag).atan2(a[p][p].re - a[q][q].re);
                let (s, c) = theta.sin_cos();
                // V acts on the (p, q) plane:
                //   [ c        −s      ]
                //   [ s·e^{−iφ}  c·e^{−iφ} ]
                let vpp = Complex64::new(c, 0.0);
                let vpq = Complex64::new(-s, 0.0);
                let vqp = phase.conj() * s;
                let vqq = phase.conj() * c;
                // A ← A·V (columns p, q)
                for row in a.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = x * vpp + y * vqp;
                    row[q] = x * vpq + y * vqq;
                }
                // A ← V†·A (rows p, q)
                for j in 0..N {
                    let (x, y) = (a[p][j], a[q][j]);
                    a[p][j] = vpp.conj() * x + vqp.conj() * y;
                    a[q][j] = vpq.conj() * x + vqq.conj() * y;
                }
                a[p][q] = Complex64::new(0.0, 0.0);
                a[q][p] = Complex64::new(0.0, 0.0);
                a[p][p].im = 0.0;
                a[q][q].im = 0.0;
                for row in vecs.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = x * vpp + y * vqp;
                    row[q] = x * vpq + y * vqq;
                }
            }
        }
    }

    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_by(|&i, &j| a[i][i].re.total_cmp(&a[j][j].re));
    let values = order.map(|k| a[k][k].re);
    let mut vectors = zeros::<N>();
    for (new, &old) in order.iter().enumerate() {
        for i in 0..N {
            vectors[i][new] = vecs[i][old];
        }
    }
    HermitianEigen { values, vectors }
}

/// Principal square root of a positive semidefinite Hermitian matrix, with
/// eigenvalues below zero clamped.
pub fn psd_sqrt<const N: usize>(a: &CMat<N>) -> CMat<N> {
    let eig = hermitian_eigh(a);
    let mut out = zeros();
    for k in 0..N {
        let s = eig.values[k].max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        for i in 0..N {
            for j in 0..N {
                out[i][j] += eig.vectors[i][k] * eig.vectors[j][k].conj() * s;
            }
        }
    }
    out
}

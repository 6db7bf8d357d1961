//! Exact reference dynamics: the full two-cavity Hamiltonian in a truncated
//! localized Fock basis, diagonalised once and evolved spectrally.
//!
//! Basis vectors `|n₀, m₀; n₁, m₁⟩` are ordered row-major with `m = −1 ↦ 0`
//! and `m = +1 ↦ 1`, i.e. index `((2n₀ + m₀)(nmax+1) + n₁)·2 + m₁`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::dynamics::{qubit_index, QubitDensityMatrix};
use crate::linalg;
use crate::model::ModelParams;
use crate::states::InitialNoonState;
use crate::{Error, Result};

/// Largest state vector the truncation accepts.
pub const DEFAULT_ENTRY_CAP: usize = 65536;
/// Largest Hamiltonian the dense eigensolver is allowed to touch.
pub const DENSE_DIMENSION_CAP: usize = 4096;
/// Required headroom between the initial photon number and the cutoff.
pub const DEFAULT_MARGIN: usize = 10;
/// Population on the cutoff level above which a snapshot is unreliable.
pub const LEAKAGE_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockTruncation {
    n_max_local: usize,
}

impl FockTruncation {
    pub fn new(n_max_local: usize) -> Result<Self> {
        Self::with_cap(n_max_local, DEFAULT_ENTRY_CAP)
    }

    pub fn with_cap(n_max_local: usize, cap: usize) -> Result<Self> {
        let t = Self { n_max_local };
        if t.dimension() > cap {
            return Err(Error::OracleCap { dimension: t.dimension(), cap });
        }
        Ok(t)
    }

    pub fn n_max_local(&self) -> usize {
        self.n_max_local
    }

    pub fn dimension(&self) -> usize {
        4 * (self.n_max_local + 1).pow(2)
    }

    pub fn index(&self, n0: usize, m0: i8, n1: usize, m1: i8) -> usize {
        let bit = |m: i8| usize::from(m > 0);
        ((2 * n0 + bit(m0)) * (self.n_max_local + 1) + n1) * 2 + bit(m1)
    }

    /// `(n₀, m₀, n₁, m₁)` of a basis index.
    pub fn labels(&self, index: usize) -> (usize, i8, usize, i8) {
        let spin = |b: usize| if b == 1 { 1 } else { -1 };
        let m1 = spin(index % 2);
        let rest = index / 2;
        let n1 = rest % (self.n_max_local + 1);
        let rest = rest / (self.n_max_local + 1);
        (rest / 2, spin(rest % 2), n1, m1)
    }
}

/// `H = Σ_j (−Δ/2 σ_jˣ + ω n_j + λ σ_jᶻ (a_j + a_j†)) + ν (a₀†a₁ + a₀a₁†)`.
pub fn build_hamiltonian(params: &ModelParams, trunc: FockTruncation) -> DMatrix<f64> {
    let dim = trunc.dimension();
    let nm = trunc.n_max_local;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for idx in 0..dim {
        let (n0, m0, n1, m1) = trunc.labels(idx);
        h[(idx, idx)] += params.omega * (n0 + n1) as f64;
        // qubit tunnelling
        h[(trunc.index(n0, -m0, n1, m1), idx)] += -0.5 * params.delta;
        h[(trunc.index(n0, m0, n1, -m1), idx)] += -0.5 * params.delta;
        // λ σᶻ a† on each cavity (the a part is its transpose)
        if n0 < nm {
            let v = params.lambda * f64::from(m0) * ((n0 + 1) as f64).sqrt();
            let j = trunc.index(n0 + 1, m0, n1, m1);
            h[(j, idx)] += v;
            h[(idx, j)] += v;
        }
        if n1 < nm {
            let v = params.lambda * f64::from(m1) * ((n1 + 1) as f64).sqrt();
            let j = trunc.index(n0, m0, n1 + 1, m1);
            h[(j, idx)] += v;
            h[(idx, j)] += v;
        }
        // ν a₀†a₁ (a₀a₁† is its transpose)
        if n0 < nm && n1 > 0 {
            let v = params.nu * ((n0 + 1) as f64 * n1 as f64).sqrt();
            let j = trunc.index(n0 + 1, m0, n1 - 1, m1);
            h[(j, idx)] += v;
            h[(idx, j)] += v;
        }
    }
    h
}

/// `P = −(−1)^{n₀+n₁} σ₀ˣ σ₁ˣ`, the closed form of
/// `exp(iπ(n₀+n₁) + i(π/2)(σ₀ˣ+σ₁ˣ))`.
pub fn parity_operator(trunc: FockTruncation) -> DMatrix<f64> {
    let dim = trunc.dimension();
    let mut p = DMatrix::<f64>::zeros(dim, dim);
    for idx in 0..dim {
        let (n0, m0, n1, m1) = trunc.labels(idx);
        let sign = if (n0 + n1) % 2 == 0 { -1.0 } else { 1.0 };
        p[(trunc.index(n0, -m0, n1, -m1), idx)] = sign;
    }
    p
}

/// `max |PH − HP|`.
pub fn parity_commutator_norm(params: &ModelParams, trunc: FockTruncation) -> f64 {
    let h = build_hamiltonian(params, trunc);
    let p = parity_operator(trunc);
    (&p * &h - &h * &p).amax()
}

/// A diagonalised Hamiltonian ready for exact evolution.
pub struct ExactEvolution {
    params: ModelParams,
    trunc: FockTruncation,
    hamiltonian: DMatrix<f64>,
    parity: DMatrix<f64>,
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl ExactEvolution {
    pub fn new(params: &ModelParams, trunc: FockTruncation) -> Result<Self> {
        let dim = trunc.dimension();
        if dim > DENSE_DIMENSION_CAP {
            return Err(Error::OracleCap { dimension: dim, cap: DENSE_DIMENSION_CAP });
        }
        let hamiltonian = build_hamiltonian(params, trunc);
        let eig = SymmetricEigen::new(hamiltonian.clone());
        Ok(Self {
            params: *params,
            trunc,
            hamiltonian,
            parity: parity_operator(trunc),
            energies: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn truncation(&self) -> FockTruncation {
        self.trunc
    }

    pub fn hamiltonian(&self) -> &DMatrix<f64> {
        &self.hamiltonian
    }

    /// Ascending spectrum.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.energies.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn ground_energy(&self) -> f64 {
        self.energies.min()
    }

    /// The N00N-type state as a localized Fock vector.
    pub fn initial_vector(&self, state: &InitialNoonState, margin: usize) -> Result<DVector<Complex64>> {
        if state.n + margin > self.trunc.n_max_local {
            return Err(Error::InvalidArgument(format!(
                "n = {} needs n_max_local >= {} for the oracle margin {margin}",
                state.n,
                state.n + margin
            )));
        }
        let mut v = DVector::<Complex64>::zeros(self.trunc.dimension());
        let norm = state.norm_factor();
        v[self.trunc.index(state.n, -1, 0, -1)] += Complex64::new(norm, 0.0);
        v[self.trunc.index(0, -1, state.n, -1)] += state.c * norm;
        Ok(v)
    }

    /// Projects the initial state onto the eigenbasis once; snapshots at any
    /// time then cost one matrix-vector product.
    pub fn trajectory(&self, state: &InitialNoonState) -> Result<ExactTrajectory<'_>> {
        let psi0 = self.initial_vector(state, DEFAULT_MARGIN)?;
        let coeffs = self.vectors.transpose().map(|x| Complex64::new(x, 0.0)) * psi0;
        Ok(ExactTrajectory { evolution: self, coeffs })
    }

    /// Single-instant convenience wrapper around [`ExactEvolution::trajectory`].
    pub fn exact_reduced_density(&self, state: &InitialNoonState, omega_t: f64) -> Result<OracleSnapshot> {
        Ok(self.trajectory(state)?.snapshot(omega_t))
    }
}

pub struct ExactTrajectory<'a> {
    evolution: &'a ExactEvolution,
    coeffs: DVector<Complex64>,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleSnapshot {
    pub rho: QubitDensityMatrix,
    /// Population on states with `n₀` or `n₁` at the cutoff.
    pub leakage: f64,
    pub reliable: bool,
    pub energy: f64,
    pub norm: f64,
    pub parity: f64,
}

impl ExactTrajectory<'_> {
    pub fn state_at(&self, omega_t: f64) -> DVector<Complex64> {
        let ev = self.evolution;
        let t = omega_t / ev.params.omega;
        let phased = DVector::from_iterator(
            self.coeffs.len(),
            self.coeffs.iter().zip(ev.energies.iter()).map(|(c, &e)| c * Complex64::from_polar(1.0, -e * t)),
        );
        let mut out = DVector::<Complex64>::zeros(self.coeffs.len());
        for (k, ck) in phased.iter().enumerate() {
            if ck.norm_sqr() == 0.0 {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(ev.vectors.column(k).iter()) {
                *o += ck * v;
            }
        }
        out
    }

    pub fn snapshot(&self, omega_t: f64) -> OracleSnapshot {
        let ev = self.evolution;
        let trunc = ev.trunc;
        let psi = self.state_at(omega_t);
        let nm = trunc.n_max_local;

        let mut rho = linalg::zeros::<4>();
        let mut leakage = 0.0;
        for n0 in 0..=nm {
            for n1 in 0..=nm {
                let spin = |bit: usize| if bit == 1 { 1 } else { -1 };
                let amps: [Complex64; 4] =
                    std::array::from_fn(|q| psi[trunc.index(n0, spin(q / 2), n1, spin(q % 2))]);
                for i in 0..4 {
                    for j in 0..4 {
                        rho[i][j] += amps[i] * amps[j].conj();
                    }
                }
                if n0 == nm || n1 == nm {
                    leakage += amps.iter().map(|a| a.norm_sqr()).sum::<f64>();
                }
            }
        }
        debug_assert_eq!(qubit_index(1, -1), 2);

        let re = psi.map(|z| z.re);
        let im = psi.map(|z| z.im);
        let expect = |m: &DMatrix<f64>| re.dot(&(m * &re)) + im.dot(&(m * &im));
        OracleSnapshot {
            rho: QubitDensityMatrix::new(rho, omega_t),
            leakage,
            reliable: leakage <= LEAKAGE_THRESHOLD,
            energy: expect(&ev.hamiltonian),
            norm: psi.norm(),
            parity: expect(&ev.parity),
        }
    }
}

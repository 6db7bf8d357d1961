//! Closed-form time evolution and the two-qubit reduced density matrix.
//!
//! The evolved state is a sum over blocks of eigenstates carrying phases
//! `e^{−iℰ_j t}`. Tracing out both oscillators leaves bilinear forms
//!
//! ```text
//! ρ_kl = Σ_{N,N'} a_k(N) a_l(N')* ⟨N'₀,s|N₀,s'⟩ ⟨N'₁,s|N₁,s'⟩
//! ```
//!
//! that factor into two small matrix products per element, so one time point
//! costs `O(Nmax³)` regardless of how long the evolution has run.
//!
//! Qubit density matrices use the basis order `|−1,−1⟩, |−1,1⟩, |1,−1⟩, |1,1⟩`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::entanglement;
use crate::linalg::{self, Mat4};
use crate::model::{BlockIndex, ModelParams, Mode, BASIS_SHIFTS, E0, E_MINUS, E_PLUS};
use crate::specfun::{OverlapTable, Shift};
use crate::states::{choose_truncation_capped, ExpansionTable, InitialNoonState};
use crate::{Error, Result};

/// Qubit labels `(m₀, m₁)` of the density-matrix basis.
pub const QUBIT_BASIS: [(i8, i8); 4] = [(-1, -1), (-1, 1), (1, -1), (1, 1)];

/// Density-matrix index of each displaced basis vector (`++, −−, +−, −+`).
const DISPLACED_TO_QUBIT: [usize; 4] = [3, 0, 2, 1];

pub fn qubit_index(m0: i8, m1: i8) -> usize {
    2 * usize::from(m0 > 0) + usize::from(m1 > 0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitDensityMatrix {
    pub elements: Mat4,
    /// Dimensionless time `ωt`.
    pub omega_t: f64,
}

impl QubitDensityMatrix {
    pub fn new(elements: Mat4, omega_t: f64) -> Self {
        Self { elements, omega_t }
    }

    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        self.elements[i][j]
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.elements).re
    }

    pub fn hermiticity_error(&self) -> f64 {
        linalg::hermiticity_error(&self.elements)
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        linalg::trace(&linalg::matmul(&self.elements, &self.elements)).re
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> [f64; 4] {
        linalg::hermitian_eigh(&self.elements).values
    }
}

impl std::ops::Deref for QubitDensityMatrix {
    type Target = Mat4;

    fn deref(&self) -> &Mat4 {
        &self.elements
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Partial trace of the expanded state using the mixing matrices and
    /// overlap table.
    FirstPrinciples,
    /// The published element-by-element closed forms, transcribed verbatim.
    PaperFormulas,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::FirstPrinciples => "first-principles",
            Method::PaperFormulas => "paper-formulas",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first-principles" => Ok(Method::FirstPrinciples),
            "paper-formulas" => Ok(Method::PaperFormulas),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Truncation {
    Fixed(usize),
    Auto { epsilon: f64, cap: usize },
}

/// `G(N; N') = g(N) g(N')*`, stored through its factor `g`.
#[derive(Debug, Clone)]
pub struct EvolutionKernel {
    nmax: usize,
    g: Vec<Complex64>,
}

impl EvolutionKernel {
    pub fn build(table: &ExpansionTable) -> Self {
        Self { nmax: table.nmax(), g: table.entries().iter().map(|e| e.g).collect() }
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn factor(&self, block: BlockIndex) -> Complex64 {
        self.g[block.n0 * (self.nmax + 1) + block.n1]
    }

    pub fn value(&self, a: BlockIndex, b: BlockIndex) -> Complex64 {
        self.factor(a) * self.factor(b).conj()
    }

    /// `Σ_N G(N; N)`.
    pub fn diagonal_sum(&self) -> f64 {
        self.g.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Per-block quantities used by the transcribed formulas at one instant.
#[derive(Clone, Copy)]
struct BlockData {
    g: Complex64,
    /// `e^{−iℰ_j t}` in spectrum order.
    ph: [Complex64; 4],
    /// `e^{−iΩ₀N₀t}`.
    free0: Complex64,
    p: f64,
    q: f64,
    lc: f64,
    chi: f64,
    gm: f64,
    lambda_n: f64,
}

type Factor = fn(&BlockData) -> Complex64;

/// Everything needed to evaluate `ρ_Q(t)` for one state and parameter set.
#[derive(Debug, Clone)]
pub struct Propagator {
    params: ModelParams,
    state: InitialNoonState,
    table: ExpansionTable,
    overlaps: OverlapTable,
    kernel: EvolutionKernel,
    captured_weight: f64,
}

impl Propagator {
    pub fn new(state: &InitialNoonState, params: &ModelParams, truncation: Truncation) -> Result<Self> {
        let nmax = match truncation {
            Truncation::Fixed(n) => n,
            Truncation::Auto { epsilon, cap } => choose_truncation_capped(state, params, epsilon, cap)?,
        };
        Ok(Self::from_table(ExpansionTable::build(state, params, nmax)))
    }

    pub fn from_table(table: ExpansionTable) -> Self {
        let params = *table.params();
        let overlaps = OverlapTable::build(&params, table.nmax());
        let kernel = EvolutionKernel::build(&table);
        let captured_weight = table.captured_weight();
        Self { params, state: *table.state(), table, overlaps, kernel, captured_weight }
    }

    pub fn nmax(&self) -> usize {
        self.table.nmax()
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn state(&self) -> &InitialNoonState {
        &self.state
    }

    pub fn table(&self) -> &ExpansionTable {
        &self.table
    }

    pub fn kernel(&self) -> &EvolutionKernel {
        &self.kernel
    }

    pub fn captured_weight(&self) -> f64 {
        self.captured_weight
    }

    pub fn reduced_density(&self, omega_t: f64, method: Method) -> QubitDensityMatrix {
        let t = omega_t / self.params.omega;
        let elements = match method {
            Method::FirstPrinciples => self.first_principles(t),
            Method::PaperFormulas => self.paper_formulas(t),
        };
        QubitDensityMatrix::new(elements, omega_t)
    }

    fn dim(&self) -> usize {
        self.nmax() + 1
    }

    fn overlap_matrix(&self, mode: Mode, bra: Shift, ket: Shift) -> Option<&[f64]> {
        self.overlaps.matrix(mode, bra, ket)
    }

    /// `Σ_{N',N} y(N')* O₀[N'₀][N₀] O₁[N'₁][N₁] x(N)`, where a missing matrix
    /// is the identity.
    fn bilinear(&self, o0: Option<&[f64]>, o1: Option<&[f64]>, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        let dim = self.dim();
        let mut tmp;
        let left: &[Complex64] = match o0 {
            None => x,
            Some(o) => {
                tmp = vec![Complex64::new(0.0, 0.0); dim * dim];
                for a in 0..dim {
                    for b in 0..dim {
                        let w = o[a * dim + b];
                        if w == 0.0 {
                            continue;
                        }
                        let (dst, src) = (&mut tmp[a * dim..(a + 1) * dim], &x[b * dim..(b + 1) * dim]);
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += *s * w;
                        }
                    }
                }
                &tmp
            }
        };
        let mut acc = Complex64::new(0.0, 0.0);
        match o1 {
            None => {
                for (l, yv) in left.iter().zip(y) {
                    acc += yv.conj() * l;
                }
            }
            Some(o) => {
                for a in 0..dim {
                    let row = &left[a * dim..(a + 1) * dim];
                    for c in 0..dim {
                        let orow = &o[c * dim..(c + 1) * dim];
                        let mut s = Complex64::new(0.0, 0.0);
                        for (l, w) in row.iter().zip(orow) {
                            s += l * *w;
                        }
                        acc += y[a * dim + c].conj() * s;
                    }
                }
            }
        }
        acc
    }

    fn first_principles(&self, t: f64) -> Mat4 {
        let n_blocks = self.dim() * self.dim();
        // amplitudes[displaced index][block]
        let mut amps = vec![vec![Complex64::new(0.0, 0.0); n_blocks]; 4];
        for (idx, entry) in self.table.entries().iter().enumerate() {
            let coeffs = self.table.coefficients(entry.block);
            for j in 0..4 {
                if coeffs[j] == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let c = coeffs[j] * Complex64::from_polar(1.0, -entry.spectrum.energies[j] * t);
                for (d, amp) in amps.iter_mut().enumerate() {
                    *amp.get_mut(idx).expect("block index") += c * entry.spectrum.mixing[j][d];
                }
            }
        }
        let mut rho = linalg::zeros::<4>();
        for k in 0..4 {
            for l in 0..4 {
                let (qk, ql) = (DISPLACED_TO_QUBIT[k], DISPLACED_TO_QUBIT[l]);
                if qk > ql {
                    continue;
                }
                let (sk, sl) = (BASIS_SHIFTS[k], BASIS_SHIFTS[l]);
                let o0 = self.overlap_matrix(Mode::Zero, sl.0, sk.0);
                let o1 = self.overlap_matrix(Mode::One, sl.1, sk.1);
                let v = self.bilinear(o0, o1, &amps[k], &amps[l]);
                rho[qk][ql] = v;
                rho[ql][qk] = v.conj();
            }
        }
        for (i, row) in rho.iter_mut().enumerate() {
            row[i].im = 0.0;
        }
        rho
    }

    fn block_data(&self, t: f64) -> Vec<BlockData> {
        let om0 = self.params.omega0();
        self.table
            .entries()
            .iter()
            .map(|e| {
                let s = &e.spectrum;
                BlockData {
                    g: e.g,
                    ph: s.energies.map(|en| Complex64::from_polar(1.0, -en * t)),
                    free0: Complex64::from_polar(1.0, -om0 * e.block.n0 as f64 * t),
                    p: s.p(),
                    q: s.q(),
                    lc: s.lambda_over_chi(),
                    chi: s.chi,
                    gm: s.gamma_minus,
                    lambda_n: s.lambda_n,
                }
            })
            .collect()
    }

    /// `prefactor · Σ_terms coef · Σ_{N,N'} g(N) g(N')* O₀ O₁ x(N) y(N')*`.
    fn paper_element(
        &self,
        data: &[BlockData],
        prefactor: f64,
        o0: Option<&[f64]>,
        o1: Option<&[f64]>,
        terms: &[(f64, Factor, Factor)],
    ) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(coef, fx, fy) in terms {
            let x: Vec<Complex64> = data.iter().map(|d| d.g * fx(d)).collect();
            // bilinear conjugates the N' side itself.
            let y: Vec<Complex64> = data.iter().map(|d| d.g * fy(d)).collect();
            acc += coef * self.bilinear(o0, o1, &x, &y);
        }
        acc * prefactor
    }

    fn paper_formulas(&self, t: f64) -> Mat4 {
        let data = self.block_data(t);
        let mut rho = linalg::zeros::<4>();

        // Diagonal elements: single sums over G(N, N).
        let mut d00 = 0.0;
        let mut d11 = 0.0;
        let mut d33 = 0.0;
        for d in &data {
            let gnn = d.g.norm_sqr();
            if gnn == 0.0 {
                continue;
            }
            let cos = |a: usize, b: usize| (d.ph[a] * d.ph[b].conj()).re;
            // χ = 0 only when Λ = Γ₋ = 0, where p = q = 1 and the cosines
            // multiply 1 and 2 respectively.
            let common = if d.chi == 0.0 {
                1.0
            } else {
                (d.gm * d.gm + 4.0 * d.lambda_n * d.lambda_n * cos(E_PLUS, E_MINUS)) / (d.chi * d.chi)
            };
            let osc = if d.chi == 0.0 {
                2.0 * (cos(E0, E_PLUS) + cos(E0, E_MINUS))
            } else {
                (2.0 / d.chi) * ((d.chi - d.gm) * cos(E0, E_PLUS) + (d.chi + d.gm) * cos(E0, E_MINUS))
            };
            d00 += gnn * (common + osc);
            d33 += gnn * (common - osc);
            d11 += gnn * d.lc * d.lc * (1.0 - cos(E_PLUS, E_MINUS));
        }
        rho[0][0] = Complex64::new(3.0 / 8.0 + d00 / 8.0, 0.0);
        rho[3][3] = Complex64::new(3.0 / 8.0 + d33 / 8.0, 0.0);
        rho[1][1] = Complex64::new(0.5 * d11, 0.0);
        rho[2][2] = rho[1][1];

        let m = |mode, bra, ket| self.overlap_matrix(mode, bra, ket);
        use Shift::{Minus2, Plus2, Zero};

        // ρ_{−1,−1;−1,1} and ρ_{−1,−1;1,−1}: weight Λ'/χ' on the primed block.
        let upper_terms: [(f64, Factor, Factor); 6] = [
            (1.0, |d| d.ph[E_PLUS] * d.p, |d| d.ph[E_PLUS] * d.lc),
            (-1.0, |d| d.ph[E_MINUS] * d.q, |d| d.ph[E_MINUS] * d.lc),
            (2.0, |d| d.ph[E0], |d| d.ph[E_PLUS] * d.lc),
            (-2.0, |d| d.ph[E0], |d| d.ph[E_MINUS] * d.lc),
            (-1.0, |d| d.ph[E_PLUS] * d.p, |d| d.ph[E_MINUS] * d.lc),
            (1.0, |d| d.ph[E_MINUS] * d.q, |d| d.ph[E_PLUS] * d.lc),
        ];
        rho[0][1] = self.paper_element(&data, 1.0 / 8.0, m(Mode::Zero, Zero, Minus2), m(Mode::One, Minus2, Zero), &upper_terms);
        rho[0][2] = self.paper_element(&data, 1.0 / 8.0, m(Mode::Zero, Zero, Minus2), m(Mode::One, Plus2, Zero), &upper_terms);

        // ρ_{−1,−1;1,1}: shared N₁ index, so mode 1 is the identity.
        let corner_terms: [(f64, Factor, Factor); 9] = [
            (1.0, |d| d.free0, |d| d.free0),
            (0.5, |d| d.ph[E_MINUS] * d.q, |d| d.ph[E0]),
            (0.5, |d| d.ph[E_PLUS] * d.p, |d| d.ph[E0]),
            (-0.5, |d| d.ph[E0], |d| d.ph[E_MINUS] * d.q),
            (-0.5, |d| d.ph[E0], |d| d.ph[E_PLUS] * d.p),
            (-0.25, |d| d.ph[E_MINUS] * d.q, |d| d.ph[E_MINUS] * d.q),
            (-0.25, |d| d.ph[E_MINUS] * d.q, |d| d.ph[E_PLUS] * d.p),
            (-0.25, |d| d.ph[E_PLUS] * d.p, |d| d.ph[E_MINUS] * d.q),
            (-0.25, |d| d.ph[E_PLUS] * d.p, |d| d.ph[E_PLUS] * d.p),
        ];
        rho[0][3] = self.paper_element(&data, -0.25, m(Mode::Zero, Plus2, Minus2), None, &corner_terms);

        // ρ_{−1,1;1,−1}: shared N₀ index; the phase list is kept exactly as
        // published, including its repeated (ℰ₋, ℰ₊') term.
        let swap_terms: [(f64, Factor, Factor); 4] = [
            (1.0, |d| d.ph[E_PLUS] * d.lc, |d| d.ph[E_PLUS] * d.lc),
            (1.0, |d| d.ph[E_MINUS] * d.lc, |d| d.ph[E_PLUS] * d.lc),
            (-1.0, |d| d.ph[E_PLUS] * d.lc, |d| d.ph[E_MINUS] * d.lc),
            (-1.0, |d| d.ph[E_MINUS] * d.lc, |d| d.ph[E_PLUS] * d.lc),
        ];
        rho[1][2] = self.paper_element(&data, 0.25, None, m(Mode::One, Plus2, Minus2), &swap_terms);

        // ρ_{−1,1;1,1} and ρ_{1,−1;1,1}: weight Λ/χ on the unprimed block.
        let lower_terms: [(f64, Factor, Factor); 6] = [
            (1.0, |d| d.ph[E_PLUS] * d.lc, |d| d.ph[E_PLUS] * d.p),
            (-1.0, |d| d.ph[E_MINUS] * d.lc, |d| d.ph[E_MINUS] * d.q),
            (-2.0, |d| d.ph[E_PLUS] * d.lc, |d| d.ph[E0]),
            (2.0, |d| d.ph[E_MINUS] * d.lc, |d| d.ph[E0]),
            (1.0, |d| d.ph[E_PLUS] * d.lc, |d| d.ph[E_MINUS] * d.q),
            (-1.0, |d| d.ph[E_MINUS] * d.lc, |d| d.ph[E_PLUS] * d.p),
        ];
        rho[1][3] = self.paper_element(&data, 1.0 / 8.0, m(Mode::Zero, Plus2, Zero), m(Mode::One, Zero, Minus2), &lower_terms);
        rho[2][3] = self.paper_element(&data, 1.0 / 8.0, m(Mode::Zero, Plus2, Zero), m(Mode::One, Zero, Plus2), &lower_terms);

        for i in 0..4 {
            for j in (i + 1)..4 {
                rho[j][i] = rho[i][j].conj();
            }
        }
        rho
    }
}

/// `steps` equally spaced instants from 0 to `t_max` inclusive; a single
/// step yields `[0]`.
pub fn time_grid(t_max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::Config("steps must be at least 1".into()));
    }
    if !t_max.is_finite() || t_max < 0.0 {
        return Err(Error::Config(format!("t-max must be finite and non-negative, got {t_max}")));
    }
    if steps == 1 {
        return Ok(vec![0.0]);
    }
    let h = t_max / (steps - 1) as f64;
    Ok((0..steps).map(|i| if i + 1 == steps { t_max } else { i as f64 * h }).collect())
}

#[derive(Debug, Clone, Copy)]
pub struct TracePoint {
    pub omega_t: f64,
    pub concurrence: f64,
    pub rho: QubitDensityMatrix,
}

/// Concurrence along a grid of `ωt` values; points are independent and are
/// evaluated in parallel, returned in grid order.
pub fn concurrence_trace(prop: &Propagator, grid: &[f64], method: Method) -> Result<Vec<TracePoint>> {
    grid.par_iter()
        .map(|&omega_t| {
            let rho = prop.reduced_density(omega_t, method);
            let concurrence = entanglement::concurrence(&rho)?;
            Ok(TracePoint { omega_t, concurrence, rho })
        })
        .collect()
}

/// Largest deviations between the two evaluation methods.
#[derive(Debug, Clone, Serialize)]
pub struct CrosscheckReport {
    pub samples: Vec<f64>,
    /// `[i][j]` = max over samples of `|ρ_fp − ρ_formulas|` for that element.
    pub per_element: [[f64; 4]; 4],
    pub diagonal_max: f64,
    pub max_deviation: f64,
}

pub fn crosscheck_formulas(prop: &Propagator, samples: &[f64]) -> CrosscheckReport {
    let per_sample: Vec<[[f64; 4]; 4]> = samples
        .par_iter()
        .map(|&t| {
            let a = prop.reduced_density(t, Method::FirstPrinciples);
            let b = prop.reduced_density(t, Method::PaperFormulas);
            std::array::from_fn(|i| std::array::from_fn(|j| (a.elements[i][j] - b.elements[i][j]).norm()))
        })
        .collect();
    let mut per_element = [[0.0f64; 4]; 4];
    for dev in &per_sample {
        for i in 0..4 {
            for j in 0..4 {
                per_element[i][j] = per_element[i][j].max(dev[i][j]);
            }
        }
    }
    let diagonal_max = (0..4).map(|i| per_element[i][i]).fold(0.0, f64::max);
    let max_deviation = per_element.iter().flatten().copied().fold(0.0, f64::max);
    CrosscheckReport { samples: samples.to_vec(), per_element, diagonal_max, max_deviation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_params() -> ModelParams {
        ModelParams::new(1.0, 0.15, 0.1, 0.5).unwrap()
    }

    fn prop(n: usize, c: Complex64, params: &ModelParams, nmax: usize) -> Propagator {
        let s = InitialNoonState::new(n, c).unwrap();
        Propagator::new(&s, params, Truncation::Fixed(nmax)).unwrap()
    }

    fn check_valid(rho: &QubitDensityMatrix) {
        assert!((rho.trace() - 1.0).abs() < 1e-8, "trace {}", rho.trace());
        assert!(rho.hermiticity_error() < 1e-10);
        assert!(rho.eigenvalues()[0] >= -1e-8, "{:?}", rho.eigenvalues());
        let pur = rho.purity();
        assert!((0.25 - 1e-10..=1.0 + 1e-10).contains(&pur), "{pur}");
    }

    #[test]
    fn initial_instant_is_the_product_projector() {
        let p = reference_params();
        for (n, c) in [(1, Complex64::new(0.0, 0.0)), (4, Complex64::new(0.0, 1.0)), (3, Complex64::new(0.7, -0.2))] {
            let pr = prop(n, c, &p, 20);
            for method in [Method::FirstPrinciples, Method::PaperFormulas] {
                let rho = pr.reduced_density(0.0, method);
                for i in 0..4 {
                    for j in 0..4 {
                        let want = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                        assert!((rho.elements[i][j] - want).norm() < 1e-8, "{method} {i}{j}: {}", rho.elements[i][j]);
                    }
                }
            }
        }
    }

    #[test]
    fn table_value_at_592() {
        let pr = prop(1, Complex64::new(0.0, 0.0), &reference_params(), 24);
        let rho = pr.reduced_density(592.0, Method::FirstPrinciples);
        check_valid(&rho);
        let c = entanglement::concurrence(&rho).unwrap();
        assert!((c - 0.945267).abs() < 1e-3, "{c}");
        assert!((rho.elements[1][1] - rho.elements[2][2]).norm() < 1e-12);
    }

    #[test]
    fn kernel_properties() {
        let pr = prop(2, Complex64::new(0.4, 0.9), &reference_params(), 18);
        let k = pr.kernel();
        assert!((k.diagonal_sum() - 1.0).abs() < 1e-10);
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..100 {
            let a = BlockIndex::new(rng.random_range(0..=18), rng.random_range(0..=18));
            let b = BlockIndex::new(rng.random_range(0..=18), rng.random_range(0..=18));
            assert_eq!(k.value(b, a), k.value(a, b).conj());
        }
        let real = prop(2, Complex64::new(0.0, 0.0), &reference_params(), 10);
        for e in real.table().entries() {
            assert_eq!(real.kernel().factor(e.block).im, 0.0);
        }
    }

    #[test]
    fn diagonal_formulas_match_first_principles() {
        let pr = prop(2, Complex64::new(0.0, 1.0), &reference_params(), 20);
        let samples: Vec<f64> = (0..12).map(|i| 37.3 * i as f64 + 11.0).collect();
        let report = crosscheck_formulas(&pr, &samples);
        assert!(report.diagonal_max < 1e-8, "{:?}", report.per_element);
        // everything except the published ρ_{−1,1;1,−1} transcription agrees
        for i in 0..4 {
            for j in 0..4 {
                if (i, j) != (1, 2) && (i, j) != (2, 1) {
                    assert!(report.per_element[i][j] < 1e-8, "{i}{j}: {:?}", report.per_element);
                }
            }
        }
        let at_zero = crosscheck_formulas(&pr, &[0.0]);
        assert!(at_zero.max_deviation < 1e-8);
    }

    #[test]
    fn vacuum_state_is_exchange_symmetric() {
        let pr = prop(0, Complex64::new(0.0, 0.0), &reference_params(), 12);
        for i in 0..20 {
            let rho = pr.reduced_density(13.7 * i as f64, Method::FirstPrinciples);
            check_valid(&rho);
            assert!((rho.elements[1][1] - rho.elements[2][2]).norm() < 1e-12);
            assert!((rho.elements[0][1] - rho.elements[0][2]).norm() < 1e-12);
        }
    }

    #[test]
    fn single_block_recurrence() {
        // Δ = 0 leaves one gap 2λ²(1/Ω₁ − 1/Ω₀) in the vacuum block.
        let p = ModelParams::new(1.0, 0.0, 0.2, 0.5).unwrap();
        let s = InitialNoonState::new(0, Complex64::new(0.0, 0.0)).unwrap();
        let pr = Propagator::from_table(ExpansionTable::build(&s, &p, 0));
        let gap = 2.0 * 0.04 * (1.0 / p.omega1() - 1.0 / p.omega0());
        let period = 2.0 * std::f64::consts::PI / gap;
        for &t in &[0.3, 5.0, 41.0] {
            let a = pr.reduced_density(t, Method::FirstPrinciples);
            let b = pr.reduced_density(t + period, Method::FirstPrinciples);
            assert!(linalg::max_abs_diff(&a.elements, &b.elements) < 1e-9);
        }
    }

    #[test]
    fn grid_semantics() {
        assert_eq!(time_grid(0.0, 1).unwrap(), vec![0.0]);
        assert_eq!(time_grid(10.0, 3).unwrap(), vec![0.0, 5.0, 10.0]);
        assert!(time_grid(1.0, 0).is_err());
        assert!(time_grid(-1.0, 4).is_err());
    }

    #[test]
    fn trace_starts_unentangled() {
        let pr = prop(2, Complex64::new(0.0, 1.0), &reference_params(), 16);
        let grid = time_grid(50.0, 11).unwrap();
        let tr = concurrence_trace(&pr, &grid, Method::FirstPrinciples).unwrap();
        assert_eq!(tr.len(), 11);
        assert!(tr[0].concurrence.abs() < 1e-9);
        for (pt, t) in tr.iter().zip(&grid) {
            assert_eq!(pt.omega_t, *t);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::FirstPrinciples, Method::PaperFormulas] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn density_invariants(
            n in 1usize..=4, re in -1.5..1.5f64, im in -1.5..1.5f64,
            lambda in 0.02..0.15f64, delta in 0.02..0.2f64, nu in 0.1..0.6f64,
            t in 0.0..3000.0f64,
        ) {
            let p = ModelParams::new(1.0, delta, lambda, nu).unwrap();
            let pr = prop(n, Complex64::new(re, im), &p, 14);
            let rho = pr.reduced_density(t, Method::FirstPrinciples);
            prop_assert!((rho.trace() - 1.0).abs() < 1e-8);
            prop_assert!(rho.hermiticity_error() < 1e-10);
            prop_assert!(rho.eigenvalues()[0] >= -1e-8);
        }
    }
}

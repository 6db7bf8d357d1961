//! Special functions behind every coefficient of the adiabatic treatment.
//!
//! All finite series here are summed term by term in log space with explicit
//! sign tracking and a compensated accumulator. The coefficients pit
//! `(λ/Ω)^{M+N}` decay against factorial growth, and evaluating the two
//! factors separately overflows long before the products do.

use statrs::function::factorial::ln_factorial;

use crate::model::{Mode, ModelParams};
use crate::{Error, Result};

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

#[inline]
pub(crate) fn ln_fact(n: usize) -> f64 {
    ln_factorial(n as u64)
}

/// `ln C(n, k)`.
#[inline]
pub(crate) fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

#[inline]
pub(crate) fn parity_sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `ln[(−m)_ℓ (−n)_ℓ / ℓ!] = ln[m! n! / ((m−ℓ)! (n−ℓ)! ℓ!)]`; the Pochhammer
/// pair is always positive for `ℓ ≤ min(m, n)`.
#[inline]
pub(crate) fn ln_pochhammer_pair(m: usize, n: usize, l: usize) -> f64 {
    ln_fact(m) + ln_fact(n) - ln_fact(m - l) - ln_fact(n - l) - ln_fact(l)
}

/// Laguerre polynomial `L_n(x)` by the three-term recurrence.
pub fn laguerre(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `(L_n(x), L_{n-1}(x))`, with `L_{-1} ≡ 0`.
fn laguerre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut prev = 1.0;
    let mut cur = 1.0 - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Root of `L_n` inside a bracket with a sign change: Newton steps that stay
/// inside the bracket, bisection otherwise.
fn refine_root(n: usize, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = laguerre(n, lo);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (l, lm1) = laguerre_pair(n, x);
        if l == 0.0 {
            return x;
        }
        if (l > 0.0) == (f_lo > 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        let deriv = n as f64 * (l - lm1) / x;
        let newton = x - l / deriv;
        let next = if deriv != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-15 * x.abs() || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}

/// All `n` zeros of `L_n`, ascending.
///
/// The zeros of `L_k` interlace those of `L_{k-1}`, so each open interval
/// between 0, the previous zeros and an upper bound holds exactly one root.
pub fn laguerre_zeros(n: usize) -> Vec<f64> {
    let mut zeros: Vec<f64> = Vec::new();
    for k in 1..=n {
        // Largest zero of L_k is below 4k + 2.
        let upper = 4.0 * k as f64 + 2.0;
        let mut edges = Vec::with_capacity(k + 1);
        edges.push(0.0);
        edges.extend_from_slice(&zeros);
        edges.push(upper);
        zeros = edges
            .windows(2)
            .map(|w| refine_root(k, w[0], w[1]))
            .collect();
    }
    zeros
}

/// The `k`-th smallest zero (1-based) of `L_n`.
pub fn laguerre_zero(n: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "Laguerre zero index {k} out of range 1..={n}"
        )));
    }
    Ok(laguerre_zeros(n)[k - 1])
}

/// Terminating `₂F₀(−m, −n;; τ) = Σ_{ℓ=0}^{min(m,n)} (−m)_ℓ (−n)_ℓ τ^ℓ / ℓ!`.
pub fn hyp2f0_terminating(m: usize, n: usize, tau: f64) -> f64 {
    if tau == 0.0 {
        return 1.0;
    }
    // The term ratio (m−ℓ)(n−ℓ)τ/(ℓ+1) keeps each term within a few ulps;
    // log-space terms are the fallback once that product overflows.
    let mut acc = CompensatedSum::new();
    let mut term = 1.0f64;
    for l in 0..=m.min(n) {
        if !term.is_finite() {
            return hyp2f0_log_terms(m, n, tau);
        }
        acc.add(term);
        term *= (m - l) as f64 * (n - l) as f64 * tau / (l + 1) as f64;
    }
    acc.value()
}

fn hyp2f0_log_terms(m: usize, n: usize, tau: f64) -> f64 {
    let ln_tau = tau.abs().ln();
    let neg = tau < 0.0;
    (0..=m.min(n))
        .map(|l| {
            let mag = (ln_pochhammer_pair(m, n, l) + l as f64 * ln_tau).exp();
            if neg && l % 2 == 1 {
                -mag
            } else {
                mag
            }
        })
        .collect::<CompensatedSum>()
        .value()
}

/// `β^{m+n} ₂F₀(−m, −n;; −1/β²) / √(m! n!)`, summed with the powers of β
/// combined per term so that `β → 0` is exact (only the `m = n = ℓ` term
/// survives).
pub(crate) fn normalized_displacement_sum(m: usize, n: usize, beta: f64) -> f64 {
    let half_norm = 0.5 * (ln_fact(m) + ln_fact(n));
    let ln_beta = beta.ln();
    (0..=m.min(n))
        .filter_map(|l| {
            let power = m + n - 2 * l;
            let ln_pow = if power == 0 {
                0.0
            } else if beta == 0.0 {
                return None;
            } else {
                power as f64 * ln_beta
            };
            let mag = (ln_pochhammer_pair(m, n, l) - half_norm + ln_pow).exp();
            Some(parity_sign(l) * mag)
        })
        .collect::<CompensatedSum>()
        .value()
}

/// Phase-space displacement label of a delocalized number state: the state
/// `|N_{j,s}⟩` is shifted by `−s·λ/(√2 Ω_j)`, with `s ∈ {−2, 0, +2}`
/// equal to `m₀ ± m₁` of the qubit configuration it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shift {
    Minus2,
    Zero,
    Plus2,
}

impl Shift {
    pub fn value(self) -> i32 {
        match self {
            Shift::Minus2 => -2,
            Shift::Zero => 0,
            Shift::Plus2 => 2,
        }
    }
}

impl TryFrom<i32> for Shift {
    type Error = Error;

    fn try_from(v: i32) -> Result<Self> {
        match v {
            -2 => Ok(Shift::Minus2),
            0 => Ok(Shift::Zero),
            2 => Ok(Shift::Plus2),
            other => Err(Error::InvalidArgument(format!(
                "displacement shift {other} is not one of -2, 0, +2"
            ))),
        }
    }
}

/// Identifies `⟨M_{j,braShift} | N_{j,ketShift}⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OverlapKey {
    pub bra: usize,
    pub ket: usize,
    pub bra_shift: Shift,
    pub ket_shift: Shift,
    pub mode: Mode,
}

/// Overlap of two displaced number states of the same delocalized mode.
///
/// Opposite shifts (±2, ∓2) use displacement `2√2λ/Ω`; one-sided shifts use
/// `√2λ/Ω`. The closed form is
/// `(−1)^M β^{M+N} e^{−β²/2} ₂F₀(−M,−N;;−1/β²) / √(M!N!)`, picking up an
/// extra `(−1)^{M+N}` when the ket is shifted below the bra.
pub fn displaced_overlap(key: OverlapKey, params: &ModelParams) -> f64 {
    let omega = params.mode_frequency(key.mode);
    overlap_with_frequency(key.bra, key.ket, key.bra_shift, key.ket_shift, params.lambda, omega)
}

fn overlap_with_frequency(
    bra: usize,
    ket: usize,
    bra_shift: Shift,
    ket_shift: Shift,
    lambda: f64,
    omega: f64,
) -> f64 {
    let d = ket_shift.value() - bra_shift.value();
    if d == 0 || lambda == 0.0 {
        return if bra == ket { 1.0 } else { 0.0 };
    }
    let beta = d.unsigned_abs() as f64 * lambda / (std::f64::consts::SQRT_2 * omega);
    let mut v = parity_sign(bra) * (-0.5 * beta * beta).exp() * normalized_displacement_sum(bra, ket, beta);
    if d < 0 {
        v *= parity_sign(bra + ket);
    }
    v
}

/// Precomputed overlaps `⟨M_{j,s}|N_{j,s'}⟩` for `M, N ≤ nmax`, both modes and
/// every non-trivial shift difference. Read-only once built.
#[derive(Debug, Clone)]
pub struct OverlapTable {
    nmax: usize,
    // [mode][difference index] -> row-major (nmax+1)^2, difference in {-4,-2,2,4}
    tables: [[Vec<f64>; 4]; 2],
}

const DIFFS: [i32; 4] = [-4, -2, 2, 4];

impl OverlapTable {
    pub fn build(params: &ModelParams, nmax: usize) -> Self {
        let dim = nmax + 1;
        let make = |mode: Mode, d: i32| -> Vec<f64> {
            let (bra_shift, ket_shift) = match d {
                -4 => (Shift::Plus2, Shift::Minus2),
                -2 => (Shift::Zero, Shift::Minus2),
                2 => (Shift::Zero, Shift::Plus2),
                _ => (Shift::Minus2, Shift::Plus2),
            };
            let mut out = vec![0.0; dim * dim];
            for m in 0..dim {
                for n in 0..dim {
                    out[m * dim + n] = displaced_overlap(
                        OverlapKey { bra: m, ket: n, bra_shift, ket_shift, mode },
                        params,
                    );
                }
            }
            out
        };
        let tables = [Mode::Zero, Mode::One].map(|mode| DIFFS.map(|d| make(mode, d)));
        Self { nmax, tables }
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    /// Row-major `(nmax+1)²` matrix `[M][N] = ⟨M_{bra}|N_{ket}⟩`, or `None`
    /// when the shifts coincide and the matrix is the identity.
    pub fn matrix(&self, mode: Mode, bra_shift: Shift, ket_shift: Shift) -> Option<&[f64]> {
        let d = ket_shift.value() - bra_shift.value();
        let idx = DIFFS.iter().position(|&x| x == d)?;
        Some(&self.tables[mode as usize][idx])
    }

    /// Cached overlap; falls back to direct evaluation outside the table.
    pub fn get(&self, key: OverlapKey) -> f64 {
        if key.bra > self.nmax || key.ket > self.nmax {
            panic!("overlap ({}, {}) outside table nmax {}", key.bra, key.ket, self.nmax);
        }
        match self.matrix(key.mode, key.bra_shift, key.ket_shift) {
            None => {
                if key.bra == key.ket {
                    1.0
                } else {
                    0.0
                }
            }
            Some(m) => m[key.bra * (self.nmax + 1) + key.ket],
        }
    }
}

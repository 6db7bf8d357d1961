//! Two-qubit entanglement: Wootters concurrence, sudden-death detection and
//! the best pure approximation in the generalized Bell basis.

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::linalg::{self, Mat4};
use crate::{Error, Result};

/// Default absolute tolerance below which concurrence counts as zero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-6;

/// Signs of `σʸ⊗σʸ`, which is anti-diagonal in the product basis.
const FLIP_SIGNS: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];

/// `(σʸ⊗σʸ) ρ* (σʸ⊗σʸ)` as an index reversal with signs.
pub fn spin_flip(rho: &Mat4) -> Mat4 {
    std::array::from_fn(|i| std::array::from_fn(|j| rho[3 - i][3 - j].conj() * (FLIP_SIGNS[i] * FLIP_SIGNS[j])))
}

fn validate(rho: &Mat4) -> Result<()> {
    if rho.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::MalformedDensity("non-finite entry".into()));
    }
    let herm = linalg::hermiticity_error(rho);
    if herm > 1e-8 {
        return Err(Error::MalformedDensity(format!("not Hermitian (error {herm:e})")));
    }
    let tr = linalg::trace(rho).re;
    if (tr - 1.0).abs() > 1e-6 {
        return Err(Error::MalformedDensity(format!("trace {tr} is not 1")));
    }
    let min = linalg::hermitian_eigh(rho).values[0];
    if min < -1e-8 {
        return Err(Error::MalformedDensity(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

/// Wootters concurrence `max(0, λ₁ − λ₂ − λ₃ − λ₄)`, with `λᵢ` the singular
/// values of `τ = Ψᵀ(σʸ⊗σʸ)Ψ` for any `ρ = ΨΨ†`.
///
/// These are the square roots of the eigenvalues of `ρρ̃`, but reading them off
/// as singular values keeps the error proportional to machine precision.
/// Square-rooting tiny eigenvalues of `√ρ ρ̃ √ρ` would inflate rounding
/// noise of order `ε` to order `√ε`.
pub fn concurrence(rho: &Mat4) -> Result<f64> {
    validate(rho)?;
    let eig = linalg::hermitian_eigh(rho);
    let psi: Mat4 = std::array::from_fn(|i| std::array::from_fn(|k| eig.vectors[i][k] * eig.values[k].max(0.0).sqrt()));
    // (σʸ⊗σʸ)Ψ reverses the rows with signs.
    let flipped: Mat4 = std::array::from_fn(|i| std::array::from_fn(|k| psi[3 - i][k] * FLIP_SIGNS[i]));
    let tau = nalgebra::Matrix4::<Complex64>::from_fn(|a, b| (0..4).map(|i| psi[i][a] * flipped[i][b]).sum());
    let mut s: Vec<f64> = tau.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok((s[0] - s[1] - s[2] - s[3]).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuddenDeathReport {
    /// Disjoint, ascending `(start, end)` pairs.
    pub intervals: Vec<(f64, f64)>,
    pub longest_duration: f64,
}

fn zero_runs(trace: &[(f64, f64)], zero_tol: f64) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &(_, c)) in trace.iter().enumerate() {
        match (c <= zero_tol, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, trace.len() - 1));
    }
    runs.retain(|&(a, b)| b - a + 1 >= 3);
    runs
}

fn report(intervals: Vec<(f64, f64)>) -> SuddenDeathReport {
    let longest_duration = intervals.iter().map(|(a, b)| b - a).fold(0.0, f64::max);
    SuddenDeathReport { intervals, longest_duration }
}

/// Maximal runs of at least three consecutive samples with `C ≤ zero_tol`.
pub fn detect_sudden_death(trace: &[(f64, f64)], zero_tol: f64) -> SuddenDeathReport {
    report(zero_runs(trace, zero_tol).into_iter().map(|(a, b)| (trace[a].0, trace[b].0)).collect())
}

/// As [`detect_sudden_death`], with each interval edge that borders a
/// positive sample moved to the bisected crossing of `concurrence(t) = zero_tol`.
pub fn detect_sudden_death_refined<F>(trace: &[(f64, f64)], zero_tol: f64, concurrence: F) -> SuddenDeathReport
where
    F: Fn(f64) -> f64,
{
    let crossing = |mut inside: f64, mut outside: f64| {
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if concurrence(mid) <= zero_tol {
                inside = mid;
            } else {
                outside = mid;
            }
            if (inside - outside).abs() <= 1e-12 * inside.abs().max(1.0) {
                break;
            }
        }
        inside
    };
    let intervals = zero_runs(trace, zero_tol)
        .into_iter()
        .map(|(a, b)| {
            let start = if a > 0 { crossing(trace[a].0, trace[a - 1].0) } else { trace[a].0 };
            let end = if b + 1 < trace.len() { crossing(trace[b].0, trace[b + 1].0) } else { trace[b].0 };
            (start, end)
        })
        .collect();
    report(intervals)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BellLabel {
    /// `(|1,1⟩ + i|−1,−1⟩)/√2`
    PhiPlus,
    /// `(|1,1⟩ − i|−1,−1⟩)/√2`
    PhiMinus,
    /// `(|1,−1⟩ + i|−1,1⟩)/√2`
    PsiPlus,
    /// `(|1,−1⟩ − i|−1,1⟩)/√2`
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [BellLabel::PhiPlus, BellLabel::PhiMinus, BellLabel::PsiPlus, BellLabel::PsiMinus];
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BellLabel::PhiPlus => "phi+",
            BellLabel::PhiMinus => "phi-",
            BellLabel::PsiPlus => "psi+",
            BellLabel::PsiMinus => "psi-",
        })
    }
}

/// The generalized Bell vectors in the order of [`BellLabel::ALL`], written
/// over the basis `|−1,−1⟩, |−1,1⟩, |1,−1⟩, |1,1⟩`.
pub fn bell_basis() -> [[Complex64; 4]; 4] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let z = Complex64::new(0.0, 0.0);
    let re = Complex64::new(r, 0.0);
    let im = Complex64::new(0.0, r);
    [[im, z, z, re], [-im, z, z, re], [z, im, re, z], [z, -im, re, z]]
}

/// The pure state `Σ_k coeffs[k] |Bell_k⟩` (normalised).
pub fn bell_state(coeffs: &[Complex64; 4]) -> [Complex64; 4] {
    let basis = bell_basis();
    let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    std::array::from_fn(|i| (0..4).map(|k| coeffs[k] * basis[k][i]).sum::<Complex64>() / norm)
}

/// `√Tr(ρ − |Φ⟩⟨Φ|)²` for `|Φ⟩` given by its Bell-basis coefficients.
pub fn hs_distance_to_pure(rho: &Mat4, coeffs: &[Complex64; 4]) -> f64 {
    let phi = linalg::outer(&bell_state(coeffs));
    rho.iter()
        .flatten()
        .zip(phi.iter().flatten())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BellFit {
    /// `(α, β, γ, δ)` on `(φ₊, φ₋, ψ₊, ψ₋)`; the largest is real positive.
    #[serde(skip)]
    pub coefficients: [Complex64; 4],
    pub distance: f64,
    pub dominant: BellLabel,
    /// The top eigenvalue of ρ is degenerate within 1e-10, so the fitted
    /// state is one of several equally good choices.
    pub degenerate: bool,
}

/// Closest pure state to ρ in Hilbert-Schmidt distance. Since
/// `d² = Tr ρ² + 1 − 2⟨Φ|ρ|Φ⟩`, it is the dominant eigenvector of ρ.
pub fn bell_fit(rho: &Mat4) -> Result<BellFit> {
    validate(rho)?;
    let eig = linalg::hermitian_eigh(rho);
    let top = eig.vector(3);
    let basis = bell_basis();
    let mut coefficients: [Complex64; 4] =
        std::array::from_fn(|k| (0..4).map(|i| basis[k][i].conj() * top[i]).sum::<Complex64>());
    let dom = (0..4).max_by(|&a, &b| coefficients[a].norm().total_cmp(&coefficients[b].norm())).expect("four entries");
    let phase = coefficients[dom].conj() / coefficients[dom].norm();
    for c in &mut coefficients {
        *c *= phase;
    }
    coefficients[dom] = Complex64::new(coefficients[dom].norm(), 0.0);
    let purity = linalg::trace(&linalg::matmul(rho, rho)).re;
    let distance = (purity + 1.0 - 2.0 * eig.values[3]).max(0.0).sqrt();
    Ok(BellFit {
        coefficients,
        distance,
        dominant: BellLabel::ALL[dom],
        degenerate: eig.values[3] - eig.values[2] < 1e-10,
    })
}

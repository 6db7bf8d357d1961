//! Physical parameters and the adiabatic block spectrum.
//!
//! In the adiabatic regime the Hamiltonian decouples into 4×4 blocks labelled
//! by the delocalized photon numbers `(N₀, N₁)`. Each block lives on the
//! displaced tensor basis
//!
//! | index | qubits `(m₀, m₁)` | oscillator part            |
//! |-------|-------------------|----------------------------|
//! | 0     | `(+1, +1)`        | `|N₀,₊₂⟩ ⊗ |N₁⟩`           |
//! | 1     | `(−1, −1)`        | `|N₀,₋₂⟩ ⊗ |N₁⟩`           |
//! | 2     | `(+1, −1)`        | `|N₀⟩ ⊗ |N₁,₊₂⟩`           |
//! | 3     | `(−1, +1)`        | `|N₀⟩ ⊗ |N₁,₋₂⟩`           |
//!
//! and is diagonalised in closed form.

use serde::Serialize;

use crate::specfun::{laguerre, laguerre_zeros, Shift};
use crate::{Error, Result};

/// Delocalized oscillator mode: `A₀ = (a₀+a₁)/√2` at `Ω₀ = ω+ν`, or
/// `A₁ = (a₀−a₁)/√2` at `Ω₁ = ω−ν`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Mode {
    Zero = 0,
    One = 1,
}

/// Δ/ω above which the adiabatic treatment is flagged as doubtful.
pub const ADIABATIC_WARNING_RATIO: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub omega: f64,
    pub delta: f64,
    pub lambda: f64,
    pub nu: f64,
}

impl ModelParams {
    /// Validates `ω > 0`, `Δ ≥ 0`, `λ ≥ 0` and `|ν| < ω`.
    pub fn new(omega: f64, delta: f64, lambda: f64, nu: f64) -> Result<Self> {
        for (name, v) in [("omega", omega), ("delta", delta), ("lambda", lambda), ("nu", nu)] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite, got {v}")));
            }
        }
        if omega <= 0.0 {
            return Err(Error::Domain(format!("omega must be positive, got {omega}")));
        }
        if delta < 0.0 {
            return Err(Error::Domain(format!("delta must be non-negative, got {delta}")));
        }
        if lambda < 0.0 {
            return Err(Error::Domain(format!("lambda must be non-negative, got {lambda}")));
        }
        if nu.abs() >= omega {
            return Err(Error::Domain(format!(
                "|nu| must be below omega so both delocalized frequencies stay positive (nu = {nu}, omega = {omega})"
            )));
        }
        Ok(Self { omega, delta, lambda, nu })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.omega, self.delta, lambda, self.nu)
    }

    pub fn omega0(&self) -> f64 {
        self.omega + self.nu
    }

    pub fn omega1(&self) -> f64 {
        self.omega - self.nu
    }

    pub fn mode_frequency(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Zero => self.omega0(),
            Mode::One => self.omega1(),
        }
    }

    /// `Γ₊ = λ²(1/Ω₀ + 1/Ω₁)`.
    pub fn gamma_plus(&self) -> f64 {
        self.lambda.powi(2) * (1.0 / self.omega0() + 1.0 / self.omega1())
    }

    /// `Γ₋ = λ²(1/Ω₀ − 1/Ω₁)`.
    pub fn gamma_minus(&self) -> f64 {
        self.lambda.powi(2) * (1.0 / self.omega0() - 1.0 / self.omega1())
    }

    /// True when Δ/ω exceeds [`ADIABATIC_WARNING_RATIO`].
    pub fn adiabatic_warning(&self) -> bool {
        self.delta / self.omega > ADIABATIC_WARNING_RATIO
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BlockIndex {
    pub n0: usize,
    pub n1: usize,
}

impl BlockIndex {
    pub fn new(n0: usize, n1: usize) -> Self {
        Self { n0, n1 }
    }
}

/// Qubit configuration of each displaced basis vector, in block order.
pub const BASIS_SPINS: [(i8, i8); 4] = [(1, 1), (-1, -1), (1, -1), (-1, 1)];

/// Oscillator shifts `(mode 0, mode 1)` of each displaced basis vector.
pub const BASIS_SHIFTS: [(Shift, Shift); 4] = [
    (Shift::Plus2, Shift::Zero),
    (Shift::Minus2, Shift::Zero),
    (Shift::Zero, Shift::Plus2),
    (Shift::Zero, Shift::Minus2),
];

/// Index of each eigenstate in [`BlockSpectrum::energies`] and the rows of
/// [`BlockSpectrum::mixing`].
pub const E0: usize = 0;
pub const E1: usize = 1;
pub const E_PLUS: usize = 2;
pub const E_MINUS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockSpectrum {
    pub block: BlockIndex,
    /// `𝒩 = Ω₀N₀ + Ω₁N₁`.
    pub cal_n: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub lambda_n: f64,
    /// `χ = √(4Λ² + Γ₋²)`.
    pub chi: f64,
    /// `(ℰ₀, ℰ₁, ℰ₊, ℰ₋)`.
    pub energies: [f64; 4],
    /// Row `j` holds eigenstate `j` over the displaced basis (see module docs).
    pub mixing: [[f64; 4]; 4],
    pub parities: [i8; 4],
    /// Set when `Λ = 0` and the sign `Λ/|Λ|` was fixed to +1 by convention.
    pub degenerate: bool,
}

impl BlockSpectrum {
    /// `(χ − Γ₋)/χ`, the weight of the symmetric `(++, −−)` pair in `ℰ₊`.
    pub fn p(&self) -> f64 {
        if self.chi == 0.0 {
            1.0
        } else {
            (self.chi - self.gamma_minus) / self.chi
        }
    }

    /// `(χ + Γ₋)/χ`.
    pub fn q(&self) -> f64 {
        if self.chi == 0.0 {
            1.0
        } else {
            (self.chi + self.gamma_minus) / self.chi
        }
    }

    /// `Λ/χ`, taken as zero in the fully degenerate `χ = 0` case.
    pub fn lambda_over_chi(&self) -> f64 {
        if self.chi == 0.0 {
            0.0
        } else {
            self.lambda_n / self.chi
        }
    }

    /// The ordering `ℰ₊ ≥ ℰ₀ ≥ ℰ₁ ≥ ℰ₋` (with slack `tol`).
    pub fn hierarchy_holds(&self, tol: f64) -> bool {
        let [e0, e1, ep, em] = self.energies;
        ep + tol >= e0 && e0 + tol >= e1 && e1 + tol >= em
    }

    /// The block Hamiltonian rebuilt from the eigen-decomposition,
    /// `Σ_j ℰ_j |j⟩⟨j|` over the displaced basis.
    pub fn hamiltonian(&self) -> [[f64; 4]; 4] {
        let mut h = [[0.0; 4]; 4];
        for (j, row) in self.mixing.iter().enumerate() {
            for a in 0..4 {
                for b in 0..4 {
                    h[a][b] += self.energies[j] * row[a] * row[b];
                }
            }
        }
        h
    }
}

/// `Λ = −(Δ/2)·exp(−λ²/Ω₀² − λ²/Ω₁²)·L_{N₀}(2λ²/Ω₀²)·L_{N₁}(2λ²/Ω₁²)`.
///
/// This is `−(Δ/2)⟨N₀,₋₂|N₀,₊₂⟩`-type products written through the one-sided
/// overlaps `⟨N_{j,−2}|N_j⟩ = e^{−λ²/Ω_j²} L_N(2λ²/Ω_j²)`.
pub fn lambda_of_block(params: &ModelParams, block: BlockIndex) -> f64 {
    let x0 = (params.lambda / params.omega0()).powi(2);
    let x1 = (params.lambda / params.omega1()).powi(2);
    -0.5 * params.delta * (-x0 - x1).exp() * laguerre(block.n0, 2.0 * x0) * laguerre(block.n1, 2.0 * x1)
}

pub fn block_spectrum(params: &ModelParams, block: BlockIndex) -> BlockSpectrum {
    let (om0, om1) = (params.omega0(), params.omega1());
    let lam2 = params.lambda.powi(2);
    let cal_n = om0 * block.n0 as f64 + om1 * block.n1 as f64;
    let gp = params.gamma_plus();
    let gm = params.gamma_minus();
    let lambda_n = lambda_of_block(params, block);
    let chi = (4.0 * lambda_n * lambda_n + gm * gm).sqrt();

    let energies = [
        cal_n - 2.0 * lam2 / om0,
        cal_n - 2.0 * lam2 / om1,
        cal_n - gp + chi,
        cal_n - gp - chi,
    ];

    let degenerate = lambda_n == 0.0;
    let s = if lambda_n < 0.0 { -1.0 } else { 1.0 };
    let (p, q) = if chi == 0.0 { (1.0, 1.0) } else { ((chi - gm) / chi, (chi + gm) / chi) };
    let (sp, sq) = (0.5 * p.max(0.0).sqrt(), 0.5 * q.max(0.0).sqrt());
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mixing = [
        [r, -r, 0.0, 0.0],
        [0.0, 0.0, r, -r],
        [sp, sp, s * sq, s * sq],
        [sq, sq, -s * sp, -s * sp],
    ];

    let even: i8 = if (block.n0 + block.n1).is_multiple_of(2) { 1 } else { -1 };
    BlockSpectrum {
        block,
        cal_n,
        gamma_plus: gp,
        gamma_minus: gm,
        lambda_n,
        chi,
        energies,
        mixing,
        parities: [even, even, -even, -even],
        degenerate,
    }
}

/// Every `λ ∈ (0, λ_max]` at which `Λ` of the block vanishes:
/// `λ = Ω_j √(x_k/2)` over the zeros `x_k` of `L_{N₀}` (mode 0) and
/// `L_{N₁}` (mode 1). Sorted ascending, duplicates within 1e-12 merged.
pub fn degeneracy_couplings(omega: f64, nu: f64, block: BlockIndex, lambda_max: f64) -> Result<Vec<f64>> {
    if !lambda_max.is_finite() || lambda_max <= 0.0 {
        return Err(Error::InvalidArgument(format!("lambda_max must be positive, got {lambda_max}")));
    }
    // Validates the frequencies.
    let params = ModelParams::new(omega, 0.0, 0.0, nu)?;
    let mut out: Vec<f64> = [(params.omega0(), block.n0), (params.omega1(), block.n1)]
        .into_iter()
        .flat_map(|(om, n)| laguerre_zeros(n).into_iter().map(move |x| om * (0.5 * x).sqrt()))
        .filter(|&l| l > 0.0 && l <= lambda_max)
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub energies: [f64; 4],
    pub parities: [i8; 4],
    pub hierarchy_holds: bool,
}

/// Block energies along a grid of couplings, for plotting level crossings.
/// Violations of the `ℰ₊ ≥ ℰ₀ ≥ ℰ₁ ≥ ℰ₋` ordering are logged, not raised.
pub fn energy_sweep(omega: f64, delta: f64, nu: f64, block: BlockIndex, lambda_grid: &[f64]) -> Result<Vec<SweepRow>> {
    lambda_grid
        .iter()
        .map(|&lambda| {
            let params = ModelParams::new(omega, delta, lambda, nu)?;
            let spec = block_spectrum(&params, block);
            let ok = spec.hierarchy_holds(1e-12);
            if !ok {
                log::warn!(
                    "energy hierarchy E+ >= E0 >= E1 >= E- violated at lambda = {lambda} for block ({}, {})",
                    block.n0,
                    block.n1
                );
            }
            Ok(SweepRow { lambda, energies: spec.energies, parities: spec.parities, hierarchy_holds: ok })
        })
        .collect()
}

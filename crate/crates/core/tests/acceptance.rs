//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so that every line is
//! printed even when earlier criteria fail.

use std::time::Instant;

use cavity_noon::dynamics::{self, Method, Propagator, Truncation};
use cavity_noon::entanglement::{self, BellLabel, DEFAULT_ZERO_TOL};
use cavity_noon::linalg::{self, Mat4};
use cavity_noon::model::{self, BlockIndex, Mode, ModelParams, E1};
use cavity_noon::oracle::{self, ExactEvolution, FockTruncation};
use cavity_noon::states::{self, InitialNoonState};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn reference_params() -> ModelParams {
    ModelParams::new(1.0, 0.15, 0.1, 0.5).unwrap()
}

fn adiabatic(n: usize, c: Complex64, params: &ModelParams, epsilon: f64, cap: usize) -> Propagator {
    let state = InitialNoonState::new(n, c).unwrap();
    Propagator::new(&state, params, Truncation::Auto { epsilon, cap }).unwrap()
}

fn degeneracies() -> Outcome {
    let start = Instant::now();
    let cases = [((5, 6), 0.166901), ((6, 9), 0.137986), ((8, 8), 0.145894)];
    let mut pass = true;
    let mut parts = Vec::new();
    for ((n0, n1), want) in cases {
        let found = model::degeneracy_couplings(1.0, 0.5, BlockIndex::new(n0, n1), 0.2).unwrap();
        let best = found.iter().copied().min_by(|a, b| (a - want).abs().total_cmp(&(b - want).abs()));
        let ok = best.is_some_and(|b| (b - want).abs() <= 1e-5);
        pass &= ok;
        parts.push(format!("({n0},{n1}) -> {:.6}", best.unwrap_or(f64::NAN)));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 1.0;
    Outcome::new(pass, format!("{}; {secs:.3} s", parts.join(", ")))
}

fn reference_instants() -> (Outcome, String) {
    let params = reference_params();
    // (n, ωt, C, C tol, d_HS, dominant, min |coefficient|, published Φ)
    #[allow(clippy::type_complexity)]
    let rows: [(usize, f64, f64, f64, f64, BellLabel, f64, [f64; 4]); 4] = [
        (1, 592.0, 0.945267, 1e-3, 0.089865, BellLabel::PhiPlus, 0.99, [0.997136, -0.0292865, 0.0, 0.0697298]),
        (1, 24152.0, 0.954379, 1e-3, 0.029438, BellLabel::PhiMinus, 0.999, [0.0099995, 0.999950, 0.0, 0.0]),
        (2, 598.0, 0.865998, 2e-3, 0.110694, BellLabel::PhiPlus, 0.0, [0.996483, -0.0560522, 0.0, -0.0622802]),
        (2, 24390.0, 0.917634, 2e-3, 0.0836728, BellLabel::PhiMinus, 0.0, [0.0, 0.999236, -0.0390937, 0.0]),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    let mut published = Vec::new();
    let mut published_ok = true;
    for (n, t, c_want, c_tol, d_want, dom_want, mag_min, phi) in rows {
        let start = Instant::now();
        let prop = adiabatic(n, Complex64::new(0.0, 0.0), &params, 1e-12, 32);
        let rho = prop.reduced_density(t, Method::FirstPrinciples);
        let c = entanglement::concurrence(&rho).unwrap();
        let fit = entanglement::bell_fit(&rho).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let dom = BellLabel::ALL.iter().position(|l| *l == fit.dominant).unwrap();
        let mag = fit.coefficients[dom].norm();
        let ok_c = (c - c_want).abs() <= c_tol;
        let ok_d = (fit.distance - d_want).abs() <= 5e-3;
        let ok_dom = fit.dominant == dom_want && mag >= mag_min;
        pass &= ok_c && ok_d && ok_dom && secs < 30.0 && prop.nmax() <= 32;
        parts.push(format!(
            "n={n} wt={t}: C={c:.6}{} d={:.6}{} {}|{mag:.4}|{} Nmax={}",
            if ok_c { "" } else { "!" },
            fit.distance,
            if ok_d { "" } else { "!" },
            fit.dominant,
            if ok_dom { "" } else { "!" },
            prop.nmax()
        ));
        let coeffs = phi.map(|x| Complex64::new(x, 0.0));
        let d_pub = entanglement::hs_distance_to_pure(&rho, &coeffs);
        published_ok &= (d_pub - d_want).abs() <= 1e-5;
        published.push(format!("{d_pub:.6}"));
    }
    let supplement = format!(
        "d_HS at the published Bell coefficients: {} ({})",
        published.join(", "),
        if published_ok { "matches the published distances to 1e-5" } else { "does not match" }
    );
    (Outcome::new(pass, parts.join("; ")), supplement)
}

fn sudden_death() -> Outcome {
    let params = reference_params();
    let grid = dynamics::time_grid(40000.0, 8000).unwrap();
    let mut longest = Vec::new();
    let mut pass = true;
    for n in [4, 6, 10] {
        let prop = adiabatic(n, Complex64::new(0.0, 1.0), &params, 1e-12, 64);
        let trace = dynamics::concurrence_trace(&prop, &grid, Method::FirstPrinciples).unwrap();
        let pairs: Vec<(f64, f64)> = trace.iter().map(|p| (p.omega_t, p.concurrence)).collect();
        let report = entanglement::detect_sudden_death(&pairs, DEFAULT_ZERO_TOL);
        pass &= !report.intervals.is_empty();
        longest.push((n, report.longest_duration, report.intervals.len()));
    }
    pass &= longest.windows(2).all(|w| w[1].1 > w[0].1);
    let detail = longest
        .iter()
        .map(|(n, d, k)| format!("n={n}: longest {d:.1} over {k} intervals"))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome::new(pass, detail)
}

fn identity() -> Outcome {
    let params = reference_params();
    let mut worst_rel: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    for mode in [Mode::Zero, Mode::One] {
        let om = params.mode_frequency(mode);
        let x = 2.0 * params.lambda * params.lambda / (om * om);
        for n0 in 0..=3 {
            for n1 in 0..=3 {
                for n0p in 0..=3 {
                    for n1p in 0..=3 {
                        let (lhs, rhs) = states::hypergeometric_identity_check(n0, n1, n0p, n1p, x, 60).unwrap();
                        if (n0, n1) == (n0p, n1p) {
                            worst_rel = worst_rel.max((lhs - rhs).abs() / rhs.abs());
                        } else {
                            worst_abs = worst_abs.max(lhs.abs());
                        }
                    }
                }
            }
        }
    }
    Outcome::new(
        worst_rel <= 1e-8 && worst_abs <= 1e-10,
        format!("max relative error (diagonal) {worst_rel:.2e}, max |LHS| (off-diagonal) {worst_abs:.2e}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let params = reference_params();
    let state = InitialNoonState::new(1, Complex64::new(0.0, 0.0)).unwrap();
    let prop = Propagator::new(&state, &params, Truncation::Auto { epsilon: 1e-12, cap: 64 }).unwrap();
    let trunc = FockTruncation::new(20).unwrap();
    let exact = ExactEvolution::new(&params, trunc).unwrap();
    let traj = exact.trajectory(&state).unwrap();
    let first = traj.snapshot(0.0);
    let (mut dev, mut de, mut dn, mut dp, mut leak) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..50 {
        let t = 100.0 * k as f64 / 49.0;
        let a = prop.reduced_density(t, Method::FirstPrinciples);
        let s = traj.snapshot(t);
        dev = dev.max(linalg::max_abs_diff(&a.elements, &s.rho.elements));
        de = de.max((s.energy - first.energy).abs());
        dn = dn.max((s.norm - 1.0).abs());
        dp = dp.max((s.parity - first.parity).abs());
        leak = leak.max(s.leakage);
    }
    let comm = oracle::parity_commutator_norm(&params, trunc);
    let conserved = de < 1e-9 && dn < 1e-10 && dp < 1e-10 && leak <= oracle::LEAKAGE_THRESHOLD;
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        dev <= 0.05 && comm < 1e-12 && conserved && secs < 300.0,
        format!(
            "max deviation {dev:.4}{} (limit 0.05); [P,H] {comm:.1e}; drifts E {de:.1e} norm {dn:.1e} P {dp:.1e}; leakage {leak:.1e}; {secs:.1} s",
            if dev <= 0.05 { "" } else { "!" }
        ),
    )
}

fn random_local_unitary(rng: &mut StdRng) -> Mat4 {
    let mut one = || {
        let (a, b, c, th) = (
            rng.random_range(0.0..6.3),
            rng.random_range(0.0..6.3),
            rng.random_range(0.0..6.3),
            rng.random_range(0.0f64..1.6),
        );
        let e = |x: f64| Complex64::from_polar(1.0, x);
        let (s, co) = th.sin_cos();
        [[e(a + b) * co, e(a + c) * s], [-e(a - c) * s, e(a - b) * co]]
    };
    let (u, v) = (one(), one());
    linalg::kron2(&u, &v)
}

fn structural_invariants() -> Outcome {
    let mut rng = StdRng::seed_from_u64(20240611);
    let epsilon = 1e-10;
    let mut worst = [0.0f64; 8];
    let mut min_eig = f64::INFINITY;
    for _ in 0..100 {
        let params = ModelParams::new(
            1.0,
            rng.random_range(0.05..0.2),
            rng.random_range(0.02..0.2),
            rng.random_range(0.1..0.6),
        )
        .unwrap();
        let n = rng.random_range(1..=6);
        let c = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let prop = adiabatic(n, c, &params, epsilon, 64);
        let t = rng.random_range(0.0..30000.0);
        let rho = prop.reduced_density(t, Method::FirstPrinciples);

        worst[0] = worst[0].max((rho.trace() - 1.0).abs());
        worst[1] = worst[1].max(rho.hermiticity_error());
        min_eig = min_eig.min(rho.eigenvalues()[0]);
        let c0 = entanglement::concurrence(&prop.reduced_density(0.0, Method::FirstPrinciples)).unwrap();
        worst[2] = worst[2].max(c0);
        worst[3] = worst[3].max((1.0 - epsilon) - prop.captured_weight());
        let e1 = prop
            .table()
            .entries()
            .iter()
            .map(|e| prop.table().coefficients(e.block)[E1].norm())
            .fold(0.0, f64::max);
        worst[4] = worst[4].max(e1);
        let fit = entanglement::bell_fit(&rho).unwrap();
        let closed = (rho.purity() + 1.0 - 2.0 * rho.eigenvalues()[3]).max(0.0).sqrt();
        worst[5] = worst[5].max((fit.distance - closed).abs());
        let u = random_local_unitary(&mut rng);
        let moved = linalg::matmul(&linalg::matmul(&u, &rho.elements), &linalg::adjoint(&u));
        let (ca, cb) = (entanglement::concurrence(&rho).unwrap(), entanglement::concurrence(&moved).unwrap());
        worst[6] = worst[6].max((ca - cb).abs());
    }
    let pass = worst[0] <= 1e-8
        && worst[1] <= 1e-10
        && min_eig >= -1e-8
        && worst[2] <= 1e-9
        && worst[3] <= 0.0
        && worst[4] == 0.0
        && worst[5] <= 1e-10
        && worst[6] <= 1e-9;
    Outcome::new(
        pass,
        format!(
            "trace {:.1e}, hermiticity {:.1e}, min eigenvalue {min_eig:.1e}, C(0) {:.1e}, weight shortfall {:.1e}, c1 {:.1e}, bell closed form {:.1e}, local-unitary {:.1e}",
            worst[0], worst[1], worst[2], worst[3].max(0.0), worst[4], worst[5], worst[6]
        ),
    )
}

fn crosscheck_audit() -> Outcome {
    let prop = adiabatic(1, Complex64::new(0.0, 0.0), &reference_params(), 1e-12, 32);
    let samples: Vec<f64> = (0..20).map(|k| 25000.0 * k as f64 / 19.0).collect();
    let report = dynamics::crosscheck_formulas(&prop, &samples);
    let mut off = Vec::new();
    for i in 0..4 {
        for j in (i + 1)..4 {
            off.push(format!("{i}{j}:{:.1e}", report.per_element[i][j]));
        }
    }
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("crosscheck_audit.json");
    let written = std::fs::write(&path, serde_json::to_string_pretty(&report).unwrap()).is_ok();
    Outcome::new(
        report.diagonal_max <= 1e-8 && written,
        format!(
            "diagonal max {:.1e}; off-diagonal (reported only) {}; audit at {}",
            report.diagonal_max,
            off.join(" "),
            path.display()
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut run = |k: usize, name: &str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        println!(
            "criterion {k} [{}] {name}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failures += usize::from(!o.pass);
    };
    run(1, "degeneracy couplings", &degeneracies);
    let supplement = std::cell::RefCell::new(String::new());
    run(2, "reference instants", &|| {
        let (o, note) = reference_instants();
        *supplement.borrow_mut() = note;
        o
    });
    println!("  note: {}", supplement.borrow());
    run(3, "sudden-death monotonicity", &sudden_death);
    run(4, "hypergeometric identity", &identity);
    run(5, "oracle equivalence", &oracle_equivalence);
    run(6, "structural invariants", &structural_invariants);
    run(7, "crosscheck audit", &crosscheck_audit);
    println!("acceptance: {failures} of 7 criteria failed");
    if failures > 0 {
        std::process::exit(1);
    }
}

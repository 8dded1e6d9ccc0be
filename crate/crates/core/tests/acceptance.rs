//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p warpconv --test acceptance`. A criterion passes when every one of
//! its checks passes and it finishes within its runtime budget.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use warpconv::cli::studies::{
    fock_lattice, interior_states, oracle_lattice, refinement_decreases, run_study, theta_set,
};
use warpconv::cli::{Check, ExperimentConfig, Study};
use warpconv::fock::{
    coordinate_operator, default_fock_samples, deformed_coordinate, deformed_coordinate_spectrum,
    dense_oracle_discrepancy, fock_x_bound_fit, make_fock, moyal_weyl_commutator_check, BOUNDARY_LIMIT,
};
use warpconv::grid::{domain_vector, q_generator, GridSpace, GridState, SkewMatrix, C64};
use warpconv::operator::GridOperator;
use warpconv::qm::{
    anticommutator_residual, deformed_hamiltonian, deformed_momentum, generator_commutator_residual,
    radial_commutator_residual, VOrdering,
};
use warpconv::warp::{rieffel_consistency, rieffel_product, warp_oscillatory, warp_spectral, WarpConfig};
use warpconv::Result;

const SEED: u64 = 20240611;
const MASS: f64 = 0.5;
const B_AXIAL: [f64; 3] = [0.0, 0.0, 0.1];
const B_PLANAR: f64 = 0.1;
/// Mass of every domain vector inside [−L/2, L/2]ⁿ must exceed 1 − TAIL.
const TAIL: f64 = 1e-8;

const ORACLE_EQUIVALENCE: f64 = 1e-3;
const CLOSED_FORM: f64 = 1e-5;
const THEOREM_D1: f64 = 1e-6;
const HERMITICITY_V: f64 = 1e-6;
const SPECTRUM_IMAG: f64 = 1e-8;
const COMMUTATOR_IDENTITIES: f64 = 1e-4;
const MOYAL_WEYL: f64 = 1e-4;
const DENSE_ORACLE: f64 = 1e-10;
const SYMBOL_SYNTHETIC: f64 = 1e-8;
const RIEFFEL: f64 = 1e-3;
const QUADRATURE_LIMIT: f64 = 1e-6;

struct Checks(Vec<Check>);

impl Checks {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn below(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        self.0.push(Check::below(name, value, tol));
    }

    fn exact(&mut self, name: impl Into<String>, value: f64) {
        self.0.push(Check::at_most(name, value, 0.0));
    }

    fn flag(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.0.push(Check::flag(name, ok, detail));
    }

    fn tails(&mut self, name: &str, states: &[&GridState]) {
        let t = states.iter().map(|s| s.tail_mass()).fold(0.0, f64::max);
        self.below(format!("{name}/tail_mass"), t, TAIL);
    }

    fn extend_from_study(&mut self, study: Study, cfg: &ExperimentConfig, keep: impl Fn(&str) -> bool) -> Result<()> {
        let mut cfg = cfg.clone();
        cfg.study = study;
        let body = run_study(&cfg)?;
        self.0.extend(body.checks.into_iter().filter(|c| keep(&c.name)));
        Ok(())
    }
}

fn grid(dims: usize, points: usize, l: f64) -> Arc<GridSpace> {
    Arc::new(GridSpace::centered(dims, points, l).expect("valid grid"))
}

fn skew_for(dims: usize) -> SkewMatrix {
    match dims {
        1 => SkewMatrix::zero(1),
        2 => SkewMatrix::planar(B_PLANAR),
        _ => SkewMatrix::from_axial(B_AXIAL),
    }
}

fn p1_h0(g: &Arc<GridSpace>) -> [(&'static str, GridOperator); 2] {
    [("P1", GridOperator::momentum(g, 0)), ("H0", GridOperator::free_hamiltonian(g, MASS))]
}

/// Oscillatory grids: 64 points in 1D, 32² in 2D, both on [−12, 12).
fn oscillatory_grid(dims: usize) -> Arc<GridSpace> {
    grid(dims, if dims == 1 { 64 } else { 32 }, 12.0)
}

fn c1_oracle_equivalence() -> Result<Checks> {
    let mut c = Checks::new();
    let base = WarpConfig::default();
    for d in [1, 2] {
        let g = oscillatory_grid(d);
        let skew = skew_for(d);
        let phi = domain_vector(&g, &vec![0; d])?;
        c.tails(&format!("d{d}"), &[&phi]);
        for n in [0.0, 1.0] {
            let q = q_generator(&g, n)?;
            for (name, a) in p1_h0(&g) {
                let exact = warp_spectral(&a, &q, &skew, &phi)?;
                let mut errs = Vec::new();
                for level in 0..3 {
                    let cfg = base.with_quad_points(base.quad_points << level);
                    let r = warp_oscillatory(&a, &q, &skew, &phi, &cfg)?;
                    errs.push([cfg.quad_points as f64, r.state.relative_distance(&exact)?]);
                }
                let tag = format!("d{d}/n={n}/{name}");
                c.below(format!("{tag}/oracle"), errs[0][1], ORACLE_EQUIVALENCE);
                let (ok, worst) = refinement_decreases(&errs);
                c.flag(format!("{tag}/refinement"), ok, format!("worst ratio {worst:.2e}; errors {errs:?}"));
            }
        }
    }
    Ok(c)
}

fn c2_closed_form() -> Result<Checks> {
    let mut c = Checks::new();
    let skew = SkewMatrix::from_axial(B_AXIAL);
    // The second probe vanishes to high order at the origin; it needs the wider box.
    for (k, l) in [([1, 0, 0], 10.0), ([4, 4, 4], 12.0)] {
        let g = grid(3, 32, l);
        let phi = domain_vector(&g, &k)?;
        let tag = format!("k={k:?}");
        c.tails(&tag, &[&phi]);
        let h0 = GridOperator::free_hamiltonian(&g, MASS);
        for n in [0.0, 0.5, 1.0, 2.0] {
            let h = deformed_hamiltonian(&g, &skew, n, MASS, VOrdering::Symmetric)?;
            let w = warp_spectral(&h0, &q_generator(&g, n)?, &skew, &phi)?;
            c.below(format!("{tag}/n={n}"), h.apply(&phi)?.relative_distance(&w)?, CLOSED_FORM);
        }
    }
    Ok(c)
}

fn qm_config(n: &[f64]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { seed: SEED, ..ExperimentConfig::default() };
    cfg.deformation.b = B_AXIAL;
    cfg.deformation.n = n.to_vec();
    cfg
}

fn c3_theorem_d1() -> Result<Checks> {
    let mut c = Checks::new();
    let g = grid(3, 32, 12.0);
    let probes = [[1, 0, 0], [0, 1, 1], [2, 0, 1]].map(|k| domain_vector(&g, &k).expect("probe"));
    c.tails("probes", &probes.iter().collect::<Vec<_>>());
    for b in [B_AXIAL, [0.1, -0.05, 0.02]] {
        let skew = SkewMatrix::from_axial(b);
        for n in [-1.0, 0.0, 0.5, 1.0, 2.0] {
            let h = deformed_hamiltonian(&g, &skew, n, MASS, VOrdering::Symmetric)?;
            let worst = probes.iter().map(|p| warpconv::qm::theorem_d1_check(&h, p)).collect::<Result<Vec<_>>>()?;
            c.below(format!("B={b:?}/n={n}"), worst.into_iter().fold(0.0, f64::max), THEOREM_D1);
        }
    }
    Ok(c)
}

fn c4_kato_rellich() -> Result<Checks> {
    let mut c = Checks::new();
    c.extend_from_study(Study::BoundFit, &qm_config(&[0.5, 1.0, 2.0]), |_| true)?;
    for check in &mut c.0 {
        if check.name.ends_with("hermiticity_v") {
            check.passed = check.value.is_some_and(|v| v < HERMITICITY_V);
        } else if check.name.ends_with("spectrum_imag") {
            check.passed = check.value.is_some_and(|v| v < SPECTRUM_IMAG);
        }
    }
    let fits = c.0.iter().filter(|x| x.name.ends_with("bound_a")).count();
    c.flag("three_fits", fits == 3, format!("{fits} fitted bounds"));
    Ok(c)
}

fn c5_commutator_identities() -> Result<Checks> {
    let mut c = Checks::new();
    let g = grid(3, 64, 12.0);
    let skew = SkewMatrix::from_axial(B_AXIAL);
    // Vanishes to order 12 at the origin, where the singular multipliers live.
    let phi = domain_vector(&g, &[4, 4, 4])?;
    let low = domain_vector(&g, &[1, 0, 0])?;
    c.tails("probes", &[&phi, &low]);
    for n in [0.5, 1.0, 2.0] {
        let mut hs1: f64 = 0.0;
        let mut hs2: f64 = 0.0;
        for j in 0..3 {
            hs1 = hs1.max(radial_commutator_residual(&g, n, j, &phi)?);
            for k in 0..3 {
                hs2 = hs2.max(generator_commutator_residual(&g, n, j, k, &phi)?);
            }
        }
        c.below(format!("n={n}/hs1"), hs1, COMMUTATOR_IDENTITIES);
        c.below(format!("n={n}/hs2"), hs2, COMMUTATOR_IDENTITIES);
        c.below(format!("n={n}/anticommutator"), anticommutator_residual(&g, &skew, n, &phi)?, COMMUTATOR_IDENTITIES);
    }
    let mut ccr: f64 = 0.0;
    for j in 0..3 {
        for k in 0..3 {
            ccr = ccr.max(generator_commutator_residual(&g, 0.0, j, k, &low)?);
        }
    }
    c.below("n=0/hs2", ccr, COMMUTATOR_IDENTITIES);
    c.below("n=0/anticommutator", anticommutator_residual(&g, &skew, 0.0, &low)?, COMMUTATOR_IDENTITIES);
    Ok(c)
}

fn c6_moyal_weyl() -> Result<Checks> {
    let mut c = Checks::new();
    let cfg = ExperimentConfig { seed: SEED, ..ExperimentConfig::default() };
    let f = &cfg.fock;
    assert_eq!((f.modes_per_axis, f.max_particles, f.theta_samples), (8, 2, 5));
    let fs = make_fock(fock_lattice(f.spatial_dims, f.modes_per_axis, f.span, f.centre), f.max_particles)?;
    let states = interior_states(&fs, f.packet_width, cfg.seed)?;
    let edge = states.iter().map(|(_, s)| fs.boundary_mass(s)).fold(0.0, f64::max);
    c.below("boundary_mass", edge, BOUNDARY_LIMIT);
    let thetas = theta_set(&cfg);
    let small = make_fock(oracle_lattice(f.spatial_dims), 2)?;
    for (tname, theta) in &thetas {
        assert!(theta.frobenius() <= f.theta_norm + 1e-12);
        for (sname, psi) in &states {
            c.below(format!("{tname}/{sname}"), moyal_weyl_commutator_check(&fs, theta, 0, 1, psi, f.c)?, MOYAL_WEYL);
        }
        c.below(format!("{tname}/dense_oracle"), dense_oracle_discrepancy(&small, theta, 0, 1)?, DENSE_ORACLE);
    }
    Ok(c)
}

fn c7_fock_x_bound() -> Result<Checks> {
    let mut c = Checks::new();
    let cfg = ExperimentConfig::default();
    let f = &cfg.fock;
    let fs = make_fock(fock_lattice(f.spatial_dims, f.modes_per_axis, f.span, f.centre), f.max_particles)?;
    let theta = SkewMatrix::random(f.spatial_dims + 1, 0.01, &mut ChaCha8Rng::seed_from_u64(SEED));
    let samples = default_fock_samples(&fs, SEED)?;
    let fit = fock_x_bound_fit(&fs, &theta, &samples, cfg.b_cap)?;
    c.flag("feasible", fit.feasible, format!("a = {:.3e}, b = {:.3e}", fit.a, fit.b));
    c.below("a", fit.a, 1.0);
    for j in 0..f.spatial_dims {
        let s = deformed_coordinate_spectrum(&fs, &theta, j, 2)?;
        c.below(format!("x{j}/spectrum_imag"), s.max_imag, SPECTRUM_IMAG);
    }
    Ok(c)
}

fn c8_symbols() -> Result<Checks> {
    let mut c = Checks::new();
    let keep = |n: &str| {
        [
            "phase_function",
            "synthetic_recovery",
            "wust_h0_b",
            "wust_fock_x_b",
            "wust_h0",
            "wust_fock_x0",
            "wust_fock_x1",
        ]
        .contains(&n)
    };
    c.extend_from_study(Study::SymbolFit, &qm_config(&[1.0]), keep)?;
    for check in &mut c.0 {
        if check.name == "synthetic_recovery" {
            check.passed = check.value.is_some_and(|v| v < SYMBOL_SYNTHETIC);
        }
    }
    for name in ["phase_function", "synthetic_recovery", "wust_h0_b", "wust_fock_x_b"] {
        let present = c.0.iter().any(|x| x.name == name);
        c.flag(format!("{name}/present"), present, "");
    }
    Ok(c)
}

fn c9_rieffel() -> Result<Checks> {
    let mut c = Checks::new();
    let cfg = WarpConfig::default();
    for (d, g) in [(1, grid(1, 64, 12.0)), (2, grid(2, 16, 8.0))] {
        let theta = skew_for(d);
        let phi = domain_vector(&g, &vec![0; d])?;
        c.tails(&format!("d{d}"), &[&phi]);
        for n in [0.0, 1.0] {
            let q = q_generator(&g, n)?;
            for (an, a) in p1_h0(&g) {
                for (bn, b) in p1_h0(&g) {
                    c.below(
                        format!("d{d}/n={n}/{an}x{bn}"),
                        rieffel_consistency(&a, &b, &q, &theta, &phi, &cfg)?,
                        RIEFFEL,
                    );
                }
            }
        }
    }
    Ok(c)
}

fn c10_trivial_limits() -> Result<Checks> {
    let mut c = Checks::new();
    let cfg = WarpConfig::default();
    for d in [1, 2, 3] {
        let g = if d == 3 { grid(3, 32, 12.0) } else { oscillatory_grid(d) };
        let zero = SkewMatrix::zero(d);
        let k: Vec<i32> = (0..d).map(|i| i32::from(i == 0 && d == 3)).collect();
        let phi = domain_vector(&g, &k)?;
        c.tails(&format!("d{d}"), &[&phi]);
        let q = q_generator(&g, 1.0)?;
        for (name, a) in p1_h0(&g) {
            let plain = a.apply(&phi)?;
            c.exact(format!("d{d}/{name}/spectral"), warp_spectral(&a, &q, &zero, &phi)?.relative_distance(&plain)?);
            if d < 3 {
                let r = warp_oscillatory(&a, &q, &zero, &phi, &cfg)?;
                c.below(format!("d{d}/{name}/oscillatory"), r.state.relative_distance(&plain)?, QUADRATURE_LIMIT);
            }
        }
        if d == 1 {
            let (p, h) = (GridOperator::momentum(&g, 0), GridOperator::free_hamiltonian(&g, MASS));
            let prod = rieffel_product(&p, &h, &q, &zero, &phi, &cfg)?;
            c.below("d1/rieffel_product", prod.relative_distance(&p.apply(&h.apply(&phi)?)?)?, QUADRATURE_LIMIT);
        }
        if d == 3 {
            let h = deformed_hamiltonian(&g, &zero, 1.0, MASS, VOrdering::Symmetric)?;
            let h0 = GridOperator::free_hamiltonian(&g, MASS).apply(&phi)?;
            c.exact("d3/deformed_hamiltonian", h.apply(&phi)?.relative_distance(&h0)?);
            for j in 0..3 {
                let pb = deformed_momentum(&g, &zero, 1.0, j)?.apply(&phi)?;
                c.exact(
                    format!("d3/deformed_momentum_{j}"),
                    pb.relative_distance(&GridOperator::momentum(&g, j).apply(&phi)?)?,
                );
            }
        }
    }
    let fs = make_fock(fock_lattice(2, 8, 4.0, 3.0), 2)?;
    let zero = SkewMatrix::zero(3);
    for j in 0..2 {
        let x = coordinate_operator(&fs, j)?.operator.scale(C64::new(-1.0, 0.0));
        let xt = deformed_coordinate(&fs, &zero, j)?;
        c.exact(format!("fock/x{j}"), xt.sub(&x).max_abs());
    }
    Ok(c)
}

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    run: fn() -> Result<Checks>,
}

fn describe(c: &Check) -> String {
    match (c.value, c.tolerance) {
        (Some(v), Some(t)) => format!("{} = {v:.3e} (tol {t:.0e})", c.name),
        _ => format!("{} {}", c.name, c.detail.as_deref().unwrap_or("")).trim_end().to_string(),
    }
}

fn worst(checks: &[Check]) -> Option<&Check> {
    checks.iter().filter(|c| matches!((c.value, c.tolerance), (Some(_), Some(t)) if t > 0.0)).max_by(|a, b| {
        let r = |c: &Check| c.value.unwrap_or(0.0) / c.tolerance.unwrap_or(1.0);
        r(a).total_cmp(&r(b))
    })
}

fn main() {
    let s = Duration::from_secs;
    let criteria = [
        Criterion { id: 1, title: "oscillatory vs spectral deformation", budget: s(300), run: c1_oracle_equivalence },
        Criterion { id: 2, title: "closed-form deformed Hamiltonian", budget: s(120), run: c2_closed_form },
        Criterion { id: 3, title: "H_B = P_B·P_B/2m", budget: s(60), run: c3_theorem_d1 },
        Criterion {
            id: 4,
            title: "Kato-Rellich bound, Hermiticity, real spectrum",
            budget: s(120),
            run: c4_kato_rellich,
        },
        Criterion {
            id: 5,
            title: "commutator and anticommutator identities",
            budget: s(120),
            run: c5_commutator_identities,
        },
        Criterion { id: 6, title: "Fock Moyal-Weyl commutator", budget: s(180), run: c6_moyal_weyl },
        Criterion { id: 7, title: "Fock X-bound and real spectrum", budget: s(60), run: c7_fock_x_bound },
        Criterion { id: 8, title: "phase function, symbol fit, a = 1 bounds", budget: s(60), run: c8_symbols },
        Criterion { id: 9, title: "Rieffel product consistency", budget: s(180), run: c9_rieffel },
        Criterion {
            id: 10,
            title: "zero skew reproduces the undeformed objects",
            budget: s(30),
            run: c10_trivial_limits,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run));
        let elapsed = t0.elapsed();
        let timing = format!("{:.1} s of {} s", elapsed.as_secs_f64(), c.budget.as_secs());
        let (ok, detail) = match outcome {
            Ok(Ok(Checks(checks))) => {
                let bad: Vec<&Check> = checks.iter().filter(|x| !x.passed).collect();
                let in_time = elapsed <= c.budget;
                let mut d = format!("{}/{} checks", checks.len() - bad.len(), checks.len());
                if let Some(w) = worst(&checks) {
                    d += &format!("; worst {}", describe(w));
                }
                if !bad.is_empty() {
                    let shown: Vec<String> = bad.iter().take(4).map(|x| describe(x)).collect();
                    d += &format!("; failing: {}", shown.join(", "));
                    if bad.len() > 4 {
                        d += &format!(" and {} more", bad.len() - 4);
                    }
                }
                if !in_time {
                    d += "; over budget";
                }
                (bad.is_empty() && in_time && !checks.is_empty(), d)
            }
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        if !ok {
            failed += 1;
        }
        println!("{} criterion {:>2} {}: {detail} [{timing}]", if ok { "PASS" } else { "FAIL" }, c.id, c.title);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

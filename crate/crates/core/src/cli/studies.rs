//! The named studies. Each returns checks, tables and plot series; numerical failures become
//! failed checks while engine errors propagate.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, Study};
use super::report::{Check, ReportBody, Series};
use crate::bounds::wust_from_norms;
use crate::error::{Error, Result};
use crate::fock::{
    coordinate_operator, default_fock_samples, deformed_coordinate, deformed_coordinate_spectrum,
    dense_oracle_discrepancy, fock_x_bound_fit, make_fock, moyal_weyl_commutator_check, packet, FockSpace, FockState,
    ModeLattice, BOUNDARY_LIMIT,
};
use crate::grid::{domain_vector, q_generator, unitary_v, GridSpace, GridState, SkewMatrix, C64};
use crate::operator::GridOperator;
use crate::qm::{
    default_sample_set, deformed_hamiltonian, deformed_momentum, fit_relative_bound, hermite_basis,
    restricted_spectrum, sample_norms, DeformedHamiltonian,
};
use crate::verify::{
    consecutive_pairs, fit_symbol_order, fock_apply, fock_sub, grid_sub, hermiticity_residual, log_radii, phase_check,
    sample_decay, symbol_holdout_check, wust_inequality_check, Dossier, GammaSeries,
};
use crate::warp::{rieffel_consistency, warp_oscillatory, warp_spectral, WarpConfig};

/// Tolerances of the study contracts.
pub mod tol {
    pub const THEOREM_D1: f64 = 1e-6;
    pub const HERMITICITY: f64 = 1e-6;
    pub const SPECTRUM_IMAG: f64 = 1e-8;
    pub const TAIL: f64 = 1e-8;
    pub const MOYAL_WEYL: f64 = 1e-4;
    pub const DENSE_ORACLE: f64 = 1e-10;
    pub const FOCK_HERMITICITY: f64 = 1e-10;
    pub const ORACLE_EQUIVALENCE: f64 = 1e-3;
    pub const RIEFFEL: f64 = 1e-3;
    pub const CUTOFF_INDEPENDENCE: f64 = 1e-3;
    pub const QUADRATURE_LIMIT: f64 = 1e-6;
    pub const SYMBOL_RESIDUAL: f64 = 0.1;
    pub const SYMBOL_SYNTHETIC: f64 = 1e-8;
    pub const DECADE_SLOPE: f64 = 2.2;
    pub const DECAY_ORACLE: f64 = 1e-8;
    /// Relative errors below this are rounding noise.
    pub const ROUNDOFF_FLOOR: f64 = 1e-10;
}

#[derive(Debug, Default)]
pub struct StudyOutput {
    pub checks: Vec<Check>,
    pub tables: BTreeMap<String, Value>,
    pub series: Vec<Series>,
    pub dossiers: Vec<Dossier>,
}

impl StudyOutput {
    fn table(&mut self, key: impl Into<String>, v: impl Serialize) {
        self.tables.insert(key.into(), serde_json::to_value(v).expect("table serializes"));
    }

    /// Turns a numerical failure into a failed check; other errors propagate.
    fn guard<T>(&mut self, name: &str, r: Result<T>) -> Result<Option<T>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(e) if is_numerical(&e) => {
                self.checks.push(Check::failed(name, &e));
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }
}

/// Errors that signal a violated numerical contract rather than a broken setup.
pub fn is_numerical(e: &Error) -> bool {
    matches!(
        e,
        Error::NonConvergent { .. }
            | Error::QuadratureRange { .. }
            | Error::TailMass { .. }
            | Error::Infeasible { .. }
            | Error::NotHermitian(_)
            | Error::BoundaryContaminated(_)
            | Error::AllSamplesDegenerate
            | Error::StepUnderflow(_)
    )
}

/// Runs one study into an unfinished report body.
pub fn run_study(cfg: &ExperimentConfig) -> Result<ReportBody> {
    let mut params = cfg.clone();
    params.output = Default::default();
    params.parallel = false;
    let mut body = ReportBody::new(cfg.study.name(), serde_json::to_value(&params)?);
    let out = match cfg.study {
        Study::FullDossier => full_dossier(cfg)?,
        s => single(cfg, s)?,
    };
    body.checks = out.checks;
    body.tables = out.tables;
    body.series = out.series;
    if !out.dossiers.is_empty() {
        body.tables.insert("dossiers".into(), serde_json::to_value(&out.dossiers)?);
    }
    Ok(body)
}

fn single(cfg: &ExperimentConfig, study: Study) -> Result<StudyOutput> {
    match study {
        Study::QmDeform => qm_deform(cfg),
        Study::QftMoyal => qft_moyal(cfg),
        Study::OscVsSpectral => osc_vs_spectral(cfg),
        Study::BoundFit => bound_fit(cfg),
        Study::SymbolFit => symbol_fit(cfg),
        Study::FullDossier => full_dossier(cfg),
    }
}

fn full_dossier(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let parts: Vec<Study> = Study::ALL.into_iter().filter(|s| *s != Study::FullDossier).collect();
    let results: Vec<Result<StudyOutput>> = if cfg.parallel {
        parts.par_iter().map(|&s| single(cfg, s)).collect()
    } else {
        parts.iter().map(|&s| single(cfg, s)).collect()
    };
    let mut out = StudyOutput::default();
    for (s, r) in parts.iter().zip(results) {
        let r = r?;
        let name = s.name();
        out.checks.extend(r.checks.into_iter().map(|c| c.prefixed(name)));
        out.series.extend(r.series.into_iter().map(|mut x| {
            x.name = format!("{name}/{}", x.name);
            x
        }));
        out.table(name, &r.tables);
        out.dossiers.extend(r.dossiers);
    }
    Ok(out)
}

fn qm_space(cfg: &ExperimentConfig) -> Result<Arc<GridSpace>> {
    let g = &cfg.grid;
    Ok(Arc::new(GridSpace::centered(g.dims, g.points_per_axis, g.half_width)?))
}

fn exponent_tag(n: f64) -> String {
    format!("n={n}")
}

/// Probe vectors x^k e^{−|x|²/2} for the identity checks.
const PROBES: [[i32; 3]; 3] = [[1, 0, 0], [0, 1, 1], [2, 0, 1]];

fn probes(g: &Arc<GridSpace>, out: &mut StudyOutput) -> Result<Vec<GridState>> {
    let states = PROBES.iter().map(|k| domain_vector(g, k)).collect::<Result<Vec<_>>>()?;
    let tail = states.iter().map(|s| s.tail_mass()).fold(0.0, f64::max);
    out.checks.push(Check::below("probe_tail_mass", tail, tol::TAIL));
    Ok(states)
}

fn operator_hermiticity(op: &GridOperator, pairs: &[(GridState, GridState)]) -> Result<f64> {
    hermiticity_residual(|s: &GridState| op.apply(s), pairs)
}

fn hamiltonian(cfg: &ExperimentConfig, g: &Arc<GridSpace>, n: f64) -> Result<DeformedHamiltonian> {
    let skew = SkewMatrix::from_axial(cfg.deformation.b);
    deformed_hamiltonian(g, &skew, n, cfg.grid.mass, cfg.deformation.ordering)
}

fn qm_deform(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let mut out = StudyOutput::default();
    let g = qm_space(cfg)?;
    let skew = SkewMatrix::from_axial(cfg.deformation.b);
    let probe = probes(&g, &mut out)?;
    let samples = default_sample_set(&g, cfg.seed)?;
    let pairs = consecutive_pairs(&samples[..11]);
    let basis = hermite_basis(&g, cfg.deformation.spectrum_basis)?;
    for &n in &cfg.deformation.n {
        let tag = exponent_tag(n);
        let h = hamiltonian(cfg, &g, n)?;
        let mut d1: f64 = 0.0;
        for p in &probe {
            d1 = d1.max(crate::qm::theorem_d1_check(&h, p)?);
        }
        out.checks.push(Check::below(format!("{tag}/theorem_d1"), d1, tol::THEOREM_D1));
        let mut pb: f64 = 0.0;
        for j in 0..g.dims {
            pb = pb.max(operator_hermiticity(&deformed_momentum(&g, &skew, n, j)?.operator, &pairs)?);
        }
        out.checks.push(Check::below(format!("{tag}/hermiticity_p_b"), pb, tol::HERMITICITY));
        let hv = operator_hermiticity(&h.v, &pairs)?;
        out.checks.push(Check::below(format!("{tag}/hermiticity_v"), hv, tol::HERMITICITY));
        let hh = operator_hermiticity(&h.operator, &pairs)?;
        out.checks.push(Check::below(format!("{tag}/hermiticity_h_b"), hh, tol::HERMITICITY));
        let fit = out.guard(&format!("{tag}/bound_fit"), fit_relative_bound(&h.v, &h.h0, &samples, cfg.b_cap))?;
        if let Some(f) = &fit {
            out.checks.push(Check::below(format!("{tag}/bound_a"), f.a, 1.0));
            out.checks.push(Check::at_most(format!("{tag}/bound_b"), f.b, cfg.b_cap));
        }
        let spectrum = restricted_spectrum(&h.operator, &basis)?;
        out.checks.push(Check::below(format!("{tag}/spectrum_imag"), spectrum.max_imag, tol::SPECTRUM_IMAG));
        // Quadrature-free comparison with the spectral evaluator; informational only.
        let q = q_generator(&g, n)?;
        let gap = warp_spectral(&h.h0, &q, &skew, &probe[0])?.relative_distance(&h.apply(&probe[0])?)?;
        out.table(
            tag.clone(),
            json!({
                "theorem_d1": d1,
                "construction_residual": h.construction_residual,
                "hermiticity": {"p_b": pb, "v": hv, "h_b": hh},
                "bound_fit": fit,
                "spectrum": spectrum,
                "spectral_evaluator_gap": gap,
            }),
        );
        out.dossiers.push(Dossier {
            operator: format!("H_B ({tag})"),
            hermiticity_residual: hh,
            spectrum: Some(spectrum),
            bound: fit,
            symbol: None,
        });
    }
    Ok(out)
}

fn bound_fit(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let mut out = StudyOutput::default();
    let g = qm_space(cfg)?;
    let samples = default_sample_set(&g, cfg.seed)?;
    let tail = samples.iter().map(|s| s.tail_mass()).fold(0.0, f64::max);
    out.checks.push(Check::below("sample_tail_mass", tail, tol::TAIL));
    let pairs = consecutive_pairs(&samples[..11]);
    let basis = hermite_basis(&g, cfg.deformation.spectrum_basis)?;
    for &n in &cfg.deformation.n {
        let tag = exponent_tag(n);
        let h = hamiltonian(cfg, &g, n)?;
        let hv = operator_hermiticity(&h.v, &pairs)?;
        out.checks.push(Check::below(format!("{tag}/hermiticity_v"), hv, tol::HERMITICITY));
        let norms = sample_norms(&h.v, &h.h0, &samples)?;
        let fit = out.guard(&format!("{tag}/bound_fit"), crate::bounds::fit_from_norms(&norms, cfg.b_cap))?;
        if let Some(f) = &fit {
            out.checks.push(Check::below(format!("{tag}/bound_a"), f.a, 1.0));
            out.checks.push(Check::at_most(format!("{tag}/bound_b"), f.b, cfg.b_cap));
        }
        let wust = out.guard(&format!("{tag}/wust"), wust_from_norms(&norms, cfg.b_cap))?;
        let spectrum = restricted_spectrum(&h.operator, &basis)?;
        out.checks.push(Check::below(format!("{tag}/spectrum_imag"), spectrum.max_imag, tol::SPECTRUM_IMAG));
        out.series.push(Series {
            name: format!("{tag}/envelope"),
            x_label: "h0_ratio".into(),
            y_label: "v_ratio".into(),
            points: norms
                .iter()
                .filter(|s| s.state > 0.0)
                .map(|s| [s.reference / s.state, s.perturbation / s.state])
                .collect(),
        });
        out.table(tag.clone(), json!({"hermiticity_v": hv, "bound_fit": fit, "wust": wust, "spectrum": spectrum}));
        out.dossiers.push(Dossier {
            operator: format!("V ({tag})"),
            hermiticity_residual: hv,
            spectrum: Some(spectrum),
            bound: fit,
            symbol: None,
        });
    }
    Ok(out)
}

/// Lattice with `modes` points per axis covering `span` around `centre`.
pub fn fock_lattice(dims: usize, modes: usize, span: f64, centre: f64) -> ModeLattice {
    let spacing = span / modes as f64;
    let origin = centre - 0.5 * (modes as f64 - 1.0) * spacing;
    ModeLattice { origin: vec![origin; dims], spacing, counts: vec![modes; dims] }
}

/// The spatial θ^{12} = v, embedded in a (d+1) × (d+1) skew matrix.
pub fn spatial_theta(spatial_dims: usize, v: f64) -> SkewMatrix {
    let d = spatial_dims + 1;
    let mut e = vec![0.0; d * d];
    e[d + 2] = v;
    e[2 * d + 1] = -v;
    SkewMatrix { dim: d, entries: e }
}

pub fn theta_set(cfg: &ExperimentConfig) -> Vec<(String, SkewMatrix)> {
    let f = &cfg.fock;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out: Vec<(String, SkewMatrix)> = (0..f.theta_samples)
        .map(|i| (format!("random-{i}"), SkewMatrix::random(f.spatial_dims + 1, f.theta_norm, &mut rng)))
        .collect();
    if let Some(v) = f.theta_spatial {
        out.insert(0, ("spatial".to_string(), spatial_theta(f.spatial_dims, v)));
    }
    out
}

/// One- and two-particle packets centred in the lattice, with seeded offsets.
pub fn interior_states(fs: &FockSpace, width: f64, seed: u64) -> Result<Vec<(String, FockState)>> {
    let d = fs.spatial_dims();
    let w = width / fs.lattice.spacing;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut draw = |s: f64| -> Vec<f64> { (0..d).map(|_| rng.gen_range(-s..s)).collect() };
    let (x1, x2, x3) = (draw(0.5), draw(0.5), draw(0.5));
    let (s2, s3) = (draw(0.3), draw(0.3));
    let one = fs.one_particle(packet(fs, &vec![0.0; d], w, &x1)).normalized();
    let mut out = vec![("one-particle".to_string(), one)];
    if fs.max_particles >= 2 {
        let two = fs.two_particle(packet(fs, &s2, w, &x2), packet(fs, &s3, w, &x3))?.normalized();
        out.push(("two-particle".to_string(), two));
    }
    Ok(out)
}

fn index_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect()
}

/// Lattice for the brute-force oracle: four modes on the first axis, two on the others.
pub fn oracle_lattice(dims: usize) -> ModeLattice {
    let mut counts = vec![2; dims];
    counts[0] = 4;
    ModeLattice {
        origin: vec![-0.75, 0.25].into_iter().chain(std::iter::repeat(0.25)).take(dims).collect(),
        spacing: 0.5,
        counts,
    }
}

fn qft_moyal(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let mut out = StudyOutput::default();
    let f = &cfg.fock;
    let d = f.spatial_dims;
    let fs = make_fock(fock_lattice(d, f.modes_per_axis, f.span, f.centre), f.max_particles)?;
    let thetas = theta_set(cfg);
    let states = interior_states(&fs, f.packet_width, cfg.seed)?;
    let edge = states.iter().map(|(_, s)| fs.boundary_mass(s)).fold(0.0, f64::max);
    out.checks.push(Check::below("boundary_mass", edge, BOUNDARY_LIMIT));
    let mut rows = Vec::new();
    for (tname, theta) in &thetas {
        for (sname, psi) in &states {
            for (i, j) in index_pairs(d) {
                let name = format!("{tname}/{sname}/[{i},{j}]");
                if let Some(r) = out.guard(&name, moyal_weyl_commutator_check(&fs, theta, i, j, psi, f.c))? {
                    out.checks.push(Check::below(name, r, tol::MOYAL_WEYL));
                    rows.push(json!({"theta": theta, "i": i, "j": j, "residual": r, "state": sname}));
                }
            }
        }
        let mut defect: f64 = 0.0;
        for j in 0..d {
            defect = defect.max(deformed_coordinate(&fs, theta, j)?.hermitian_defect());
        }
        out.checks.push(Check::below(format!("{tname}/hermiticity_x_theta"), defect, tol::FOCK_HERMITICITY));
    }
    out.table("moyal_weyl", rows);
    let asym = (0..d).map(|j| coordinate_operator(&fs, j).map(|c| c.asymmetry)).collect::<Result<Vec<_>>>()?;
    out.table("coordinate_asymmetry", asym);

    let small = make_fock(oracle_lattice(d), 2)?;
    let mut oracle: f64 = 0.0;
    for (_, theta) in &thetas {
        for (i, j) in index_pairs(d) {
            oracle = oracle.max(dense_oracle_discrepancy(&small, theta, i, j)?);
        }
    }
    out.checks.push(Check::below("dense_oracle", oracle, tol::DENSE_ORACLE));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let theta_b = SkewMatrix::random(d + 1, f.bound_theta_norm, &mut rng);
    let samples = default_fock_samples(&fs, cfg.seed)?;
    let fit = out.guard("x_bound_fit", fock_x_bound_fit(&fs, &theta_b, &samples, cfg.b_cap))?;
    if let Some(fit) = &fit {
        out.checks.push(Check::below("x_bound_a", fit.a, 1.0));
    }
    let mut imag: f64 = 0.0;
    let mut defect: f64 = 0.0;
    let mut spectrum = None;
    for j in 0..d {
        let s = deformed_coordinate_spectrum(&fs, &theta_b, j, f.max_particles.min(2))?;
        imag = imag.max(s.max_imag);
        defect = defect.max(deformed_coordinate(&fs, &theta_b, j)?.hermitian_defect());
        spectrum.get_or_insert(s);
    }
    out.checks.push(Check::below("x_theta_spectrum_imag", imag, tol::SPECTRUM_IMAG));
    out.table("x_bound", json!({"theta": theta_b, "fit": fit}));
    out.dossiers.push(Dossier {
        operator: "X_theta (Fock)".into(),
        hermiticity_residual: defect,
        spectrum,
        bound: fit,
        symbol: None,
    });

    if let Some((tname, theta)) = thetas.first() {
        let mut points = Vec::new();
        for &m in &f.refinement {
            let fm = make_fock(fock_lattice(d, m, f.span, f.centre), f.max_particles)?;
            let psi = &interior_states(&fm, f.packet_width, cfg.seed)?[0].1;
            if let Ok(r) = moyal_weyl_commutator_check(&fm, theta, 0, d.min(2) - 1, psi, f.c) {
                points.push([m as f64, r]);
            }
        }
        out.series.push(Series {
            name: format!("{tname}/residual_vs_modes"),
            x_label: "modes_per_axis".into(),
            y_label: "residual".into(),
            points,
        });
    }
    Ok(out)
}

/// Each doubling of quad_points lowers the error, unless the error already sits at the
/// roundoff floor.
pub fn refinement_decreases(errs: &[[f64; 2]]) -> (bool, f64) {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for w in errs.windows(2) {
        if w[1][1] > tol::ROUNDOFF_FLOOR {
            worst = worst.max(w[1][1] / w[0][1]);
            ok &= w[1][1] < w[0][1];
        }
    }
    (ok, worst)
}

fn relative_error(a: &GridState, reference: &GridState) -> Result<f64> {
    a.relative_distance(reference)
}

fn osc_vs_spectral(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let mut out = StudyOutput::default();
    let o = &cfg.oscillatory;
    for &d in &o.dims {
        let m = if d == 1 { o.points_1d } else { o.points_2d };
        let g = Arc::new(GridSpace::centered(d, m, o.half_width)?);
        let skew = if d == 1 { SkewMatrix::zero(1) } else { SkewMatrix::planar(o.b) };
        let phi = domain_vector(&g, &vec![0; d])?;
        out.checks.push(Check::below(format!("d{d}/tail_mass"), phi.tail_mass(), tol::TAIL));
        let ops = [("P1", GridOperator::momentum(&g, 0)), ("H0", GridOperator::free_hamiltonian(&g, cfg.grid.mass))];
        for &n in &o.n {
            let q = q_generator(&g, n)?;
            for (aname, a) in &ops {
                let tag = format!("d{d}/n={n}/{aname}");
                let exact = warp_spectral(a, &q, &skew, &phi)?;
                let mut errs = Vec::new();
                let mut record = None;
                for level in 0..=o.refinements {
                    let qc = cfg.warp.with_quad_points(cfg.warp.quad_points << level);
                    let name = format!("{tag}/quad_points={}", qc.quad_points);
                    if let Some(r) = out.guard(&name, warp_oscillatory(a, &q, &skew, &phi, &qc))? {
                        errs.push([qc.quad_points as f64, relative_error(&r.state, &exact)?]);
                        if level == 0 {
                            record = Some(r.record());
                        }
                    }
                }
                if let (Some(first), true) = (errs.first(), errs.len() == o.refinements + 1) {
                    out.checks.push(Check::below(format!("{tag}/oracle"), first[1], tol::ORACLE_EQUIVALENCE));
                    let (ok, worst) = refinement_decreases(&errs);
                    out.checks.push(Check::flag(format!("{tag}/refinement"), ok, "").with_detail(format!(
                        "largest ratio of consecutive errors above the roundoff floor: {worst:.3e}"
                    )));
                }
                if let Some(r) = &record {
                    out.series.push(Series {
                        name: format!("{tag}/residual_vs_epsilon"),
                        x_label: "epsilon".into(),
                        y_label: "residual".into(),
                        points: r
                            .epsilons
                            .iter()
                            .zip(&r.per_epsilon_residuals)
                            .map(|(&e, &v)| [e, v / r.result_norm])
                            .collect(),
                    });
                }
                out.table(format!("{tag}/record"), record);
                out.series.push(Series {
                    name: format!("{tag}/error_vs_quad_points"),
                    x_label: "quad_points".into(),
                    y_label: "relative_error".into(),
                    points: errs,
                });
            }
        }
        trivial_limits(cfg, &g, &phi, &mut out, &format!("d{d}"))?;
        rieffel_cases(cfg, d, &mut out)?;
    }
    if o.cutoff_check {
        let g = Arc::new(GridSpace::centered(1, o.points_1d, o.half_width)?);
        let phi = domain_vector(&g, &[1])?;
        let q = q_generator(&g, 0.0)?;
        let skew = SkewMatrix::zero(1);
        let a = GridOperator::free_hamiltonian(&g, cfg.grid.mass);
        let gauss = out.guard("cutoff/gaussian", warp_oscillatory(&a, &q, &skew, &phi, &cfg.warp))?;
        let bump = out.guard("cutoff/bump", warp_oscillatory(&a, &q, &skew, &phi, &WarpConfig::bump()))?;
        if let (Some(x), Some(y)) = (gauss, bump) {
            let diff = relative_error(&y.state, &x.state)?;
            out.checks.push(Check::below("cutoff_independence", diff, tol::CUTOFF_INDEPENDENCE));
        }
    }
    Ok(out)
}

/// A_θB_θΦ against (A ×_θ B)_θΦ for A, B ∈ {P₁, H₀}.
fn rieffel_cases(cfg: &ExperimentConfig, d: usize, out: &mut StudyOutput) -> Result<()> {
    let o = &cfg.oscillatory;
    let g = Arc::new(if d == 1 {
        GridSpace::centered(1, o.points_1d, o.half_width)?
    } else {
        GridSpace::centered(d, o.rieffel_points_2d, o.rieffel_half_width)?
    });
    let theta = if d == 1 { SkewMatrix::zero(1) } else { SkewMatrix::planar(o.b) };
    let phi = domain_vector(&g, &vec![0; d])?;
    out.checks.push(Check::below(format!("d{d}/rieffel/tail_mass"), phi.tail_mass(), tol::TAIL));
    let ops = [("P1", GridOperator::momentum(&g, 0)), ("H0", GridOperator::free_hamiltonian(&g, cfg.grid.mass))];
    for &n in &o.n {
        let q = q_generator(&g, n)?;
        for (an, a) in &ops {
            for (bn, b) in &ops {
                let name = format!("d{d}/n={n}/rieffel/{an}x{bn}");
                if let Some(r) = out.guard(&name, rieffel_consistency(a, b, &q, &theta, &phi, &cfg.warp))? {
                    out.checks.push(Check::below(name, r, tol::RIEFFEL));
                }
            }
        }
    }
    Ok(())
}

/// B = 0 reproduces A; the identity is never deformed.
fn trivial_limits(
    cfg: &ExperimentConfig,
    g: &Arc<GridSpace>,
    phi: &GridState,
    out: &mut StudyOutput,
    tag: &str,
) -> Result<()> {
    let q = q_generator(g, 1.0)?;
    let zero = SkewMatrix::zero(g.dims);
    let a = GridOperator::free_hamiltonian(g, cfg.grid.mass);
    let plain = a.apply(phi)?;
    let spectral = warp_spectral(&a, &q, &zero, phi)?.relative_distance(&plain)?;
    out.checks.push(Check::at_most(format!("{tag}/trivial/spectral_zero_skew"), spectral, 0.0));
    if let Some(r) =
        out.guard(&format!("{tag}/trivial/oscillatory_zero_skew"), warp_oscillatory(&a, &q, &zero, phi, &cfg.warp))?
    {
        out.checks.push(Check::below(
            format!("{tag}/trivial/oscillatory_zero_skew"),
            r.state.relative_distance(&plain)?,
            tol::QUADRATURE_LIMIT,
        ));
    }
    let id = GridOperator::identity(g);
    let skew = if g.dims == 2 { SkewMatrix::planar(cfg.oscillatory.b) } else { zero.clone() };
    let ident = warp_spectral(&id, &q, &skew, phi)?.relative_distance(phi)?;
    out.checks.push(Check::at_most(format!("{tag}/trivial/spectral_identity"), ident, 0.0));
    if let Some(r) =
        out.guard(&format!("{tag}/trivial/oscillatory_identity"), warp_oscillatory(&id, &q, &skew, phi, &cfg.warp))?
    {
        out.checks.push(Check::below(
            format!("{tag}/trivial/oscillatory_identity"),
            r.state.relative_distance(phi)?,
            tol::QUADRATURE_LIMIT,
        ));
    }
    Ok(())
}

/// Multi-indices with |γ| ≤ max, graded.
fn gammas(dims: usize, max: usize) -> Vec<Vec<usize>> {
    crate::grid::graded_multi_indices(dims, max)
}

/// Largest log-log slope of (r, y) between consecutive decades of r.
pub fn max_decade_slope(samples: &[(f64, f64)]) -> f64 {
    let Some(&(r0, _)) = samples.first() else { return 0.0 };
    let nearest = |r: f64| {
        samples
            .iter()
            .min_by(|a, b| (a.0.ln() - r.ln()).abs().total_cmp(&(b.0.ln() - r.ln()).abs()))
            .copied()
            .expect("nonempty")
    };
    let r_max = samples.last().expect("nonempty").0;
    let mut worst = f64::NEG_INFINITY;
    let mut lo = r0;
    while lo * 10.0 <= r_max * (1.0 + 1e-12) {
        let (a, b) = (nearest(lo), nearest(lo * 10.0));
        if b.0 > a.0 {
            worst = worst.max((b.1 / a.1).ln() / (b.0 / a.0).ln());
        }
        lo *= 10.0;
    }
    worst
}

fn synthetic_recovery() -> Result<f64> {
    let (m, rho) = (1.5, 0.75);
    let radii = log_radii(0.1, 100.0, 16);
    let consts = [("0,0", 2.0), ("1,0", 0.5), ("0,1", 3.0)];
    let series: Vec<GammaSeries> = [vec![0, 0], vec![1, 0], vec![0, 1]]
        .into_iter()
        .zip(consts)
        .map(|(gamma, (_, c))| {
            let e = m - rho * gamma.iter().sum::<usize>() as f64;
            GammaSeries { gamma, samples: radii.iter().map(|&r| (r, c * (1.0 + r).powf(e))).collect() }
        })
        .collect();
    let fit = fit_symbol_order(&series, 2)?;
    let mut err = (fit.m - m).abs().max((fit.rho - rho).abs());
    for (k, c) in consts {
        let got = fit.constants.get(k).copied().unwrap_or(f64::NAN);
        err = err.max(((got - c) / c).abs());
    }
    Ok(if err.is_nan() { f64::INFINITY } else { err })
}

fn symbol_fit(cfg: &ExperimentConfig) -> Result<StudyOutput> {
    let mut out = StudyOutput::default();
    let s = &cfg.symbol;
    let phase = phase_check(3, 10_000, cfg.seed);
    out.checks.push(Check::flag("phase_function", phase.passes(), format!("{phase:?}")));
    out.checks.push(Check::below("synthetic_recovery", synthetic_recovery()?, tol::SYMBOL_SYNTHETIC));

    let g = Arc::new(GridSpace::centered(s.dims, s.points_per_axis, s.half_width)?);
    let q = q_generator(&g, s.n)?;
    let mut theta_e = vec![0.0; s.dims * s.dims];
    theta_e[1] = s.theta;
    theta_e[s.dims] = -s.theta;
    let theta = SkewMatrix::new(s.dims, theta_e)?;
    let phi = domain_vector(&g, &vec![0; s.dims])?;
    let h0 = GridOperator::free_hamiltonian(&g, cfg.grid.mass);
    let norm: f64 = s.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dir: Vec<f64> = s.direction.iter().map(|v| v / norm).collect();
    let radii = log_radii(s.r_min, s.r_max, s.radii);
    let mut series = Vec::new();
    for gamma in gammas(s.dims, s.gamma_max) {
        if let Some(x) = out.guard(
            &format!("decay/{}", crate::verify::gamma_key(&gamma)),
            sample_decay(&h0, &q, &theta, &phi, &gamma, &radii, &dir),
        )? {
            series.push(x);
        }
    }
    let mut symbol = None;
    if !series.is_empty() {
        let fit = fit_symbol_order(&series, s.dims)?;
        out.checks.push(Check::below("symbol_residual", fit.residual, tol::SYMBOL_RESIDUAL));
        let slope = max_decade_slope(&series[0].samples);
        out.checks.push(Check::at_most("decade_slope", slope, tol::DECADE_SLOPE));
        let hold = symbol_holdout_check(&series, s.dims, s.slack)?;
        out.checks.push(Check::at_most("holdout_ratio", hold.worst_ratio, 1.0 + s.slack));
        let oracle = decay_oracle(&h0, &q, &theta, &phi, &series[0], &dir)?;
        out.checks.push(Check::below("decay_matrix_oracle", oracle, tol::DECAY_ORACLE));
        for x in &series {
            out.series.push(Series {
                name: format!("decay/{}", crate::verify::gamma_key(&x.gamma)),
                x_label: "radius".into(),
                y_label: "norm".into(),
                points: x.samples.iter().map(|&(r, y)| [r, y]).collect(),
            });
        }
        out.table("symbol_fit", &fit);
        out.table("holdout", &hold);
        symbol = Some(fit);
    }

    // a = 1 inequalities: H₀ under the axial deformation and the Fock coordinate.
    let g3 = qm_space(cfg)?;
    let skew3 = SkewMatrix::from_axial(cfg.deformation.b);
    let q3 = q_generator(&g3, s.n)?;
    let h3 = GridOperator::free_hamiltonian(&g3, cfg.grid.mass);
    let samples = default_sample_set(&g3, cfg.seed)?;
    let deformed = |x: &GridState| warp_spectral(&h3, &q3, &skew3, x);
    let wust = out.guard(
        "wust_h0",
        wust_inequality_check(|x: &GridState| h3.apply(x), deformed, &samples, cfg.b_cap, grid_sub),
    )?;
    if let Some(w) = &wust {
        out.checks.push(Check::at_most("wust_h0_b", w.b, cfg.b_cap));
    }
    let pairs = consecutive_pairs(&samples[..11]);
    let sym = hermiticity_residual(|x: &GridState| deformed(x)?.sub(&h3.apply(x)?), &pairs)?;
    out.checks.push(Check::below("hermiticity_h0_deformed_minus_h0", sym, tol::HERMITICITY));
    out.dossiers.push(Dossier {
        operator: format!("H0 warped by X/|X|^{} (3D wust, 2D symbol)", s.n),
        hermiticity_residual: sym,
        spectrum: None,
        bound: wust.clone(),
        symbol,
    });

    let f = &cfg.fock;
    let fs = make_fock(fock_lattice(f.spatial_dims, f.modes_per_axis, f.span, f.centre), f.max_particles)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let theta_b = SkewMatrix::random(f.spatial_dims + 1, f.bound_theta_norm, &mut rng);
    let fsamples = default_fock_samples(&fs, cfg.seed)?;
    let mut fock_b: f64 = 0.0;
    let mut feasible = true;
    for j in 0..f.spatial_dims {
        let x = coordinate_operator(&fs, j)?.operator.scale(C64::new(-1.0, 0.0));
        let xt = deformed_coordinate(&fs, &theta_b, j)?;
        match out.guard(
            &format!("wust_fock_x{j}"),
            wust_inequality_check(fock_apply(&x), fock_apply(&xt), &fsamples, cfg.b_cap, fock_sub),
        )? {
            Some(w) => fock_b = fock_b.max(w.b),
            None => feasible = false,
        }
    }
    if feasible {
        out.checks.push(Check::at_most("wust_fock_x_b", fock_b, cfg.b_cap));
    }
    out.table("wust", json!({"h0": wust, "fock_x_b": fock_b}));
    Ok(out)
}

/// Relative gap between sampled γ = 0 norms and an explicit row-by-row evaluation of
/// V(θx) H V(θx)⁻¹ Φ at the first, middle and last radius.
fn decay_oracle(
    a: &GridOperator,
    q: &crate::grid::Generator,
    theta: &SkewMatrix,
    phi: &GridState,
    series: &GammaSeries,
    dir: &[f64],
) -> Result<f64> {
    let rows = a.rows(phi.space.len())?;
    let k = series.samples.len();
    let mut worst: f64 = 0.0;
    for idx in [0, k / 2, k - 1] {
        let (r, y) = series.samples[idx];
        let x: Vec<f64> = dir.iter().map(|v| v * r).collect();
        let mut z = vec![0.0; x.len()];
        theta.apply(&x, &mut z);
        let minus: Vec<f64> = z.iter().map(|v| -v).collect();
        let inner = unitary_v(q, &minus, phi)?;
        let applied: Vec<C64> =
            rows.iter().map(|row| row.iter().map(|&(c, v)| v * inner.amplitudes[c as usize]).sum()).collect();
        let img = unitary_v(q, &z, &GridState { space: phi.space.clone(), amplitudes: applied })?;
        worst = worst.max((img.norm() - y).abs() / y);
    }
    Ok(worst)
}

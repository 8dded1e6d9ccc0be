//! Deformed quantum-mechanical operators for the generator Q(X) = X/|X|ⁿ.
//!
//! With Q as generator the deformation acts as a minimal substitution
//! P_j → P_j + A_j with vector potential A_j(x) = (Bx)_j |x|^{−2n}.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{fit_from_norms, BoundFit, BoundSample};
use crate::error::{Error, Result};
use crate::grid::{
    domain_vector, graded_multi_indices, hermite_state, q_generator, GridSpace, GridState, SkewMatrix, C64,
};
use crate::linalg::{restricted_matrix, spectrum_summary, SpectrumSummary};
use crate::operator::GridOperator;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Placement of the momentum factor in the cross term of V.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VOrdering {
    /// (A·P + P·A)/2m; Hermitian on the grid.
    #[default]
    Symmetric,
    /// 2A·P/2m with P applied first.
    MomentumFirst,
}

fn check_skew(space: &GridSpace, skew: &SkewMatrix) -> Result<()> {
    if skew.dim != space.dims {
        return Err(Error::DimensionMismatch { expected: space.dims, found: skew.dim });
    }
    Ok(())
}

fn check_mass(mass: f64) -> Result<()> {
    if !(mass > 0.0) {
        return Err(Error::InvalidArgument(format!("mass must be positive, got {mass}")));
    }
    Ok(())
}

/// Node values of A_j = (Bx)_j |x|^{−2n}, one vector per axis.
pub fn vector_potential(space: &Arc<GridSpace>, skew: &SkewMatrix, exponent: f64) -> Result<Vec<Vec<f64>>> {
    check_skew(space, skew)?;
    if exponent > 0.0 && space.has_origin_node() {
        return Err(Error::OriginNode { exponent });
    }
    let n = space.dims;
    let mut out = vec![vec![0.0; space.len()]; n];
    let mut x = vec![0.0; n];
    let mut bx = vec![0.0; n];
    for i in 0..space.len() {
        space.coords(i, &mut x);
        skew.apply(&x, &mut bx);
        let r2: f64 = x.iter().map(|c| c * c).sum();
        let s = if exponent == 0.0 { 1.0 } else { r2.powf(-exponent) };
        for j in 0..n {
            out[j][i] = bx[j] * s;
        }
    }
    Ok(out)
}

fn real_multiplier(space: &Arc<GridSpace>, v: &[f64]) -> GridOperator {
    GridOperator::position_values(space, v.iter().map(|&a| C64::new(a, 0.0)).collect())
}

/// V = H_B − H₀ = (1/2m)(A·P + P·A + |A|²) in the symmetric ordering.
pub fn potential_v(
    space: &Arc<GridSpace>,
    skew: &SkewMatrix,
    exponent: f64,
    mass: f64,
    ordering: VOrdering,
) -> Result<GridOperator> {
    check_mass(mass)?;
    let a = vector_potential(space, skew, exponent)?;
    let c = C64::new(1.0 / (2.0 * mass), 0.0);
    let mut parts = Vec::new();
    let mut a2 = vec![0.0; space.len()];
    for (j, aj) in a.iter().enumerate() {
        if aj.iter().all(|&v| v == 0.0) {
            continue;
        }
        let m = real_multiplier(space, aj);
        let p = GridOperator::momentum(space, j);
        match ordering {
            VOrdering::Symmetric => parts.push(m.anticommutator(&p)?),
            VOrdering::MomentumFirst => parts.push(m.compose(&p)?.scale(C64::new(2.0, 0.0))),
        }
        a2.iter_mut().zip(aj).for_each(|(s, v)| *s += v * v);
    }
    if parts.is_empty() {
        return Ok(GridOperator::zero(space));
    }
    parts.push(real_multiplier(space, &a2));
    Ok(GridOperator::sum(space, &parts)?.scale(c))
}

/// H_B = H₀ + V.
#[derive(Debug, Clone)]
pub struct DeformedHamiltonian {
    pub skew: SkewMatrix,
    pub exponent: f64,
    pub mass: f64,
    pub ordering: VOrdering,
    pub h0: GridOperator,
    pub v: GridOperator,
    pub operator: GridOperator,
    /// max over probe vectors of ‖H_BΦ − H₀Φ − VΦ‖/‖Φ‖ at construction.
    pub construction_residual: f64,
}

impl DeformedHamiltonian {
    pub fn apply(&self, phi: &GridState) -> Result<GridState> {
        self.operator.apply(phi)
    }
}

pub fn deformed_hamiltonian(
    space: &Arc<GridSpace>,
    skew: &SkewMatrix,
    exponent: f64,
    mass: f64,
    ordering: VOrdering,
) -> Result<DeformedHamiltonian> {
    let h0 = GridOperator::free_hamiltonian(space, mass);
    let v = potential_v(space, skew, exponent, mass, ordering)?;
    let operator = h0.add(&v)?;
    let mut construction_residual: f64 = 0.0;
    for k in probe_indices(space.dims) {
        let phi = domain_vector(space, &k)?;
        let lhs = operator.apply(&phi)?;
        let rhs = h0.apply(&phi)?.add(&v.apply(&phi)?)?;
        construction_residual = construction_residual.max(lhs.distance(&rhs)? / phi.norm());
    }
    let scale = 1.0 + skew.frobenius();
    if !(construction_residual <= 1e-10 * scale) {
        return Err(Error::InvalidArgument(format!(
            "deformed Hamiltonian failed its construction probe: residual {construction_residual:.3e}"
        )));
    }
    Ok(DeformedHamiltonian { skew: skew.clone(), exponent, mass, ordering, h0, v, operator, construction_residual })
}

fn probe_indices(dims: usize) -> Vec<Vec<i32>> {
    let mut out = vec![vec![0; dims]];
    let mut odd = vec![0; dims];
    odd[0] = 1;
    out.push(odd);
    if dims > 1 {
        let mut mixed = vec![0; dims];
        mixed[1] = 2;
        mixed[0] = 1;
        out.push(mixed);
    }
    out
}

/// P_B^j = P_j + A_j.
#[derive(Debug, Clone)]
pub struct DeformedMomentum {
    pub skew: SkewMatrix,
    pub exponent: f64,
    pub component: usize,
    pub operator: GridOperator,
}

impl DeformedMomentum {
    pub fn apply(&self, phi: &GridState) -> Result<GridState> {
        self.operator.apply(phi)
    }
}

pub fn deformed_momentum(
    space: &Arc<GridSpace>,
    skew: &SkewMatrix,
    exponent: f64,
    j: usize,
) -> Result<DeformedMomentum> {
    if j >= space.dims {
        return Err(Error::InvalidArgument(format!("component {j} out of range")));
    }
    let a = vector_potential(space, skew, exponent)?;
    let operator = GridOperator::momentum(space, j).add(&real_multiplier(space, &a[j]))?;
    Ok(DeformedMomentum { skew: skew.clone(), exponent, component: j, operator })
}

/// Multiplier of [Q_k, P_j] = −i(δ_jk − n x_k x_j/|x|²)|x|^{−n} at x.
pub fn commutator_multiplier(x: &[f64], exponent: f64, k: usize, j: usize) -> C64 {
    let r2: f64 = x.iter().map(|c| c * c).sum();
    let d = if j == k { 1.0 } else { 0.0 };
    let s = if exponent == 0.0 { 1.0 } else { r2.powf(-0.5 * exponent) };
    -I * ((d - exponent * x[k] * x[j] / r2) * s)
}

/// ‖P_B^j Φ − (P_j + i(BQ)^k [Q_k, P_j]) Φ‖/‖Φ‖ with the commutator taken as its exact multiplier.
pub fn unsimplified_momentum_residual(m: &DeformedMomentum, phi: &GridState) -> Result<f64> {
    let space = &phi.space;
    let n = space.dims;
    let j = m.component;
    let q = q_generator(space, m.exponent)?;
    let mut x = vec![0.0; n];
    let mut bq = vec![0.0; n];
    let mut values = Vec::with_capacity(space.len());
    for u in 0..space.len() {
        space.coords(u, &mut x);
        m.skew.apply(q.component(u), &mut bq);
        let s: C64 = (0..n).map(|k| bq[k] * commutator_multiplier(&x, m.exponent, k, j)).sum();
        values.push(I * s);
    }
    let op = GridOperator::momentum(space, j).add(&GridOperator::position_values(space, values))?;
    Ok(m.apply(phi)?.distance(&op.apply(phi)?)? / phi.norm())
}

/// ‖H_BΦ − (1/2m) Σ_j P_B^j P_B^j Φ‖/‖Φ‖.
pub fn theorem_d1_check(h: &DeformedHamiltonian, phi: &GridState) -> Result<f64> {
    let space = &phi.space;
    let mut acc = GridState::zeros(space);
    for j in 0..space.dims {
        let p = deformed_momentum(space, &h.skew, h.exponent, j)?;
        let once = p.apply(phi)?;
        acc.axpy(C64::new(1.0 / (2.0 * h.mass), 0.0), &p.apply(&once)?)?;
    }
    Ok(h.apply(phi)?.distance(&acc)? / phi.norm())
}

fn radial_power(space: &Arc<GridSpace>, p: f64) -> Vec<f64> {
    let mut x = vec![0.0; space.dims];
    (0..space.len())
        .map(|i| {
            space.coords(i, &mut x);
            let r2: f64 = x.iter().map(|c| c * c).sum();
            if p == 0.0 {
                1.0
            } else {
                r2.powf(0.5 * p)
            }
        })
        .collect()
}

fn check_origin(space: &GridSpace, exponent: f64) -> Result<()> {
    if exponent != 0.0 && space.has_origin_node() {
        return Err(Error::OriginNode { exponent });
    }
    Ok(())
}

/// ‖([X_j, P_k] + iδ_jk)Φ‖/‖Φ‖.
pub fn ccr_residual(space: &Arc<GridSpace>, j: usize, k: usize, phi: &GridState) -> Result<f64> {
    let c = GridOperator::coordinate(space, j).commutator(&GridOperator::momentum(space, k))?;
    let mut r = c.apply(phi)?;
    if j == k {
        r.axpy(I, phi)?;
    }
    Ok(r.norm() / phi.norm())
}

/// ‖([P_j, |X|^{−n}] + i n X_j |X|^{−(n+2)})Φ‖/‖Φ‖.
pub fn radial_commutator_residual(space: &Arc<GridSpace>, exponent: f64, j: usize, phi: &GridState) -> Result<f64> {
    check_origin(space, exponent)?;
    let f = real_multiplier(space, &radial_power(space, -exponent));
    let c = GridOperator::momentum(space, j).commutator(&f)?;
    let g = radial_power(space, -exponent - 2.0);
    let mut x = vec![0.0; space.dims];
    let rhs: Vec<C64> = (0..space.len())
        .map(|i| {
            space.coords(i, &mut x);
            -I * (exponent * x[j] * g[i])
        })
        .collect();
    let r = c.apply(phi)?.sub(&GridOperator::position_values(space, rhs).apply(phi)?)?;
    Ok(r.norm() / phi.norm())
}

/// ‖([P_j, X_k/|X|ⁿ] − i(δ_jk − n X_k X_j/|X|²)|X|^{−n})Φ‖/‖Φ‖.
pub fn generator_commutator_residual(
    space: &Arc<GridSpace>,
    exponent: f64,
    j: usize,
    k: usize,
    phi: &GridState,
) -> Result<f64> {
    let q = q_generator(space, exponent)?;
    let c = GridOperator::momentum(space, j).commutator(&q.operator(k))?;
    let mut x = vec![0.0; space.dims];
    let rhs: Vec<C64> = (0..space.len())
        .map(|i| {
            space.coords(i, &mut x);
            -commutator_multiplier(&x, exponent, k, j)
        })
        .collect();
    let r = c.apply(phi)?.sub(&GridOperator::position_values(space, rhs).apply(phi)?)?;
    Ok(r.norm() / phi.norm())
}

/// ‖(Σ_j {(BQ)^k [Q_k, P_j], P_j} + 2i|X|^{−2n}(BX)_j P_j)Φ‖/‖Φ‖ with grid commutators.
pub fn anticommutator_residual(
    space: &Arc<GridSpace>,
    skew: &SkewMatrix,
    exponent: f64,
    phi: &GridState,
) -> Result<f64> {
    check_skew(space, skew)?;
    let q = q_generator(space, exponent)?;
    let n = space.dims;
    let bq: Vec<Vec<f64>> = {
        let mut out = vec![vec![0.0; space.len()]; n];
        let mut z = vec![0.0; n];
        for u in 0..space.len() {
            skew.apply(q.component(u), &mut z);
            for k in 0..n {
                out[k][u] = z[k];
            }
        }
        out
    };
    let a = vector_potential(space, skew, exponent)?;
    let mut total = GridState::zeros(space);
    for j in 0..n {
        let p = GridOperator::momentum(space, j);
        let mut cj = Vec::new();
        for k in 0..n {
            cj.push(real_multiplier(space, &bq[k]).compose(&q.operator(k).commutator(&p)?)?);
        }
        let cj = GridOperator::sum(space, &cj)?;
        total.axpy(C64::new(1.0, 0.0), &cj.anticommutator(&p)?.apply(phi)?)?;
        let rhs = real_multiplier(space, &a[j]).compose(&p)?.scale(2.0 * I);
        total.axpy(C64::new(1.0, 0.0), &rhs.apply(phi)?)?;
    }
    Ok(total.norm() / phi.norm())
}

/// ‖Σ_j [A_j, P_j]Φ‖/‖Φ‖.
pub fn commuting_correction_residual(
    space: &Arc<GridSpace>,
    skew: &SkewMatrix,
    exponent: f64,
    phi: &GridState,
) -> Result<f64> {
    let a = vector_potential(space, skew, exponent)?;
    let mut total = GridState::zeros(space);
    for (j, aj) in a.iter().enumerate() {
        let c = real_multiplier(space, aj).commutator(&GridOperator::momentum(space, j))?;
        total.axpy(C64::new(1.0, 0.0), &c.apply(phi)?)?;
    }
    Ok(total.norm() / phi.norm())
}

/// ‖(BX)^k X_k Φ‖/‖Φ‖.
pub fn skew_kill_residual(space: &Arc<GridSpace>, skew: &SkewMatrix, phi: &GridState) -> Result<f64> {
    check_skew(space, skew)?;
    let n = space.dims;
    let mut x = vec![0.0; n];
    let mut bx = vec![0.0; n];
    let mut s = 0.0;
    for (i, a) in phi.amplitudes.iter().enumerate() {
        space.coords(i, &mut x);
        skew.apply(&x, &mut bx);
        let d: f64 = bx.iter().zip(&x).map(|(p, q)| p * q).sum();
        s += (d * a).norm_sqr();
    }
    Ok((s * space.cell_volume()).sqrt() / phi.norm())
}

/// The first `count` monomial domain vectors in graded order.
pub fn ladder_states(space: &Arc<GridSpace>, count: usize) -> Result<Vec<GridState>> {
    let mut deg = 0;
    while graded_multi_indices(space.dims, deg).len() < count {
        deg += 1;
    }
    graded_multi_indices(space.dims, deg)
        .into_iter()
        .take(count)
        .map(|k| domain_vector(space, &k.iter().map(|&v| v as i32).collect::<Vec<_>>()))
        .collect()
}

/// Random unit-norm superpositions of `basis`.
pub fn random_superpositions(basis: &[GridState], count: usize, seed: u64) -> Result<Vec<GridState>> {
    let first = basis.first().ok_or(Error::EmptySamples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut s = GridState::zeros(&first.space);
            for b in basis {
                s.axpy(C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), b)?;
            }
            Ok(s.normalized())
        })
        .collect()
}

pub const LADDER_SAMPLES: usize = 30;
pub const RANDOM_SAMPLES: usize = 20;

/// Seeded probe set: 30 ladder vectors plus 20 random superpositions of them.
pub fn default_sample_set(space: &Arc<GridSpace>, seed: u64) -> Result<Vec<GridState>> {
    let mut ladder = ladder_states(space, LADDER_SAMPLES)?;
    let random = random_superpositions(&ladder, RANDOM_SAMPLES, seed)?;
    ladder.extend(random);
    Ok(ladder)
}

/// Relative bound of V against H₀ over the samples.
pub fn fit_relative_bound(v: &GridOperator, h0: &GridOperator, samples: &[GridState], b_cap: f64) -> Result<BoundFit> {
    let norms = sample_norms(v, h0, samples)?;
    fit_from_norms(&norms, b_cap)
}

pub fn sample_norms(v: &GridOperator, h0: &GridOperator, samples: &[GridState]) -> Result<Vec<BoundSample>> {
    samples
        .iter()
        .map(|s| Ok(BoundSample { perturbation: v.apply(s)?.norm(), reference: h0.apply(s)?.norm(), state: s.norm() }))
        .collect()
}

/// Orthonormal Hermite functions of lowest total degree.
pub fn hermite_basis(space: &Arc<GridSpace>, count: usize) -> Result<Vec<GridState>> {
    let mut deg = 0;
    while graded_multi_indices(space.dims, deg).len() < count {
        deg += 1;
    }
    graded_multi_indices(space.dims, deg).into_iter().take(count).map(|k| hermite_state(space, &k)).collect()
}

/// Eigenvalue summary of the compression of `op` to span(basis).
pub fn restricted_spectrum(op: &GridOperator, basis: &[GridState]) -> Result<SpectrumSummary> {
    let images = basis.iter().map(|b| op.apply(b)).collect::<Result<Vec<_>>>()?;
    let m = restricted_matrix(basis, &images)?;
    spectrum_summary(&m, basis.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3(m: usize, l: f64) -> Arc<GridSpace> {
        Arc::new(GridSpace::centered(3, m, l).unwrap())
    }

    #[test]
    fn zero_skew_gives_free_operators() {
        let g = grid3(16, 8.0);
        let z = SkewMatrix::zero(3);
        let v = potential_v(&g, &z, 1.0, 0.5, VOrdering::Symmetric).unwrap();
        let phi = domain_vector(&g, &[1, 0, 0]).unwrap();
        assert_eq!(v.apply(&phi).unwrap().norm(), 0.0);
        let h = deformed_hamiltonian(&g, &z, 1.0, 0.5, VOrdering::Symmetric).unwrap();
        let h0 = GridOperator::free_hamiltonian(&g, 0.5).apply(&phi).unwrap();
        assert_eq!(h.apply(&phi).unwrap().distance(&h0).unwrap(), 0.0);
        let p = deformed_momentum(&g, &z, 1.0, 2).unwrap();
        let p0 = GridOperator::momentum(&g, 2).apply(&phi).unwrap();
        assert_eq!(p.apply(&phi).unwrap().distance(&p0).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_term_of_v() {
        // n = 0, B = (0,0,b): (Bx)² = b²(x₁² + x₂²), the A² part of V with m = 1/2.
        let g = grid3(8, 4.0);
        let b = 0.3;
        let skew = SkewMatrix::from_axial([0.0, 0.0, b]);
        let a = vector_potential(&g, &skew, 0.0).unwrap();
        let mut x = [0.0; 3];
        for i in 0..g.len() {
            g.coords(i, &mut x);
            let a2: f64 = (0..3).map(|j| a[j][i] * a[j][i]).sum();
            let brute = {
                let m = [[0.0, b, 0.0], [-b, 0.0, 0.0], [0.0, 0.0, 0.0]];
                let v: Vec<f64> = (0..3).map(|r| (0..3).map(|c| m[r][c] * x[c]).sum()).collect();
                v.iter().map(|c| c * c).sum::<f64>()
            };
            assert!((a2 - brute).abs() < 1e-14);
            assert!((a2 - b * b * (x[0] * x[0] + x[1] * x[1])).abs() < 1e-13);
        }
    }

    #[test]
    fn potential_is_hermitian() {
        let g = grid3(16, 8.0);
        let skew = SkewMatrix::from_axial([0.0, 0.0, 0.1]);
        let v = potential_v(&g, &skew, 1.0, 0.5, VOrdering::Symmetric).unwrap();
        let s = default_sample_set(&g, 3).unwrap();
        for w in s.windows(2).take(20) {
            let l = w[0].inner(&v.apply(&w[1]).unwrap()).unwrap();
            let r = v.apply(&w[0]).unwrap().inner(&w[1]).unwrap();
            assert!((l - r).norm() < 1e-10);
        }
    }

    #[test]
    fn d1_identity_holds() {
        let g = grid3(16, 8.0);
        for (b, n) in [([0.0, 0.0, 0.1], 1.0), ([0.05, 0.05, 0.0], 2.0)] {
            let h = deformed_hamiltonian(&g, &SkewMatrix::from_axial(b), n, 0.5, VOrdering::Symmetric).unwrap();
            let phi = domain_vector(&g, &[1, 0, 0]).unwrap();
            assert!(theorem_d1_check(&h, &phi).unwrap() < 1e-12);
        }
    }

    #[test]
    fn unsimplified_momentum_matches() {
        let g = grid3(16, 8.0);
        let skew = SkewMatrix::from_axial([0.02, -0.03, 0.1]);
        let phi = domain_vector(&g, &[0, 1, 1]).unwrap();
        for n in [-1.0, 0.0, 0.5, 1.0, 2.0] {
            for j in 0..3 {
                let m = deformed_momentum(&g, &skew, n, j).unwrap();
                assert!(unsimplified_momentum_residual(&m, &phi).unwrap() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn skew_kill_and_commuting_correction() {
        let g = grid3(32, 8.0);
        let skew = SkewMatrix::from_axial([0.0, 0.0, 0.1]);
        let phi = domain_vector(&g, &[0, 0, 0]).unwrap();
        assert!(skew_kill_residual(&g, &skew, &phi).unwrap() < 1e-12);
        assert!(commuting_correction_residual(&g, &skew, 0.0, &phi).unwrap() < 1e-10);
    }

    #[test]
    fn ccr_on_gaussian() {
        let g = grid3(32, 8.0);
        let phi = domain_vector(&g, &[0, 0, 0]).unwrap();
        assert!(ccr_residual(&g, 0, 0, &phi).unwrap() < 1e-6);
        assert!(ccr_residual(&g, 0, 1, &phi).unwrap() < 1e-12);
    }

    #[test]
    fn origin_rejected() {
        let g = Arc::new(GridSpace::new(3, 8, 4.0, 0.0).unwrap());
        assert!(matches!(
            potential_v(&g, &SkewMatrix::from_axial([0.0, 0.0, 0.1]), 1.0, 0.5, VOrdering::Symmetric),
            Err(Error::OriginNode { .. })
        ));
        assert!(potential_v(&g, &SkewMatrix::zero(2), 0.0, 0.5, VOrdering::Symmetric).is_err());
    }

    #[test]
    fn sample_set_is_reproducible() {
        let g = grid3(8, 6.0);
        let a = default_sample_set(&g, 11).unwrap();
        let b = default_sample_set(&g, 11).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(a[42].amplitudes, b[42].amplitudes);
    }
}

//! Truncated bosonic Fock space over a finite lattice of momentum modes.
//!
//! Noncovariant operators carry the discrete delta: [a(p), a*(q)] = δ_pq/Δpⁿ, so
//! a(p) = b(p)/√Δpⁿ with b the unit-normalized ladder operator.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{fit_from_norms, wust_from_norms, BoundFit, BoundSample};
use crate::error::{Error, Result};
use crate::grid::{SkewMatrix, C64};
use crate::linalg::{sparse_spectrum, SpectrumSummary};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Uniform rectangular lattice p = origin + k·spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeLattice {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub counts: Vec<usize>,
}

impl ModeLattice {
    /// `count` modes per axis placed symmetrically about zero, so p = 0 is not a mode.
    pub fn centered(spatial_dims: usize, count: usize, spacing: f64) -> Self {
        let o = -0.5 * (count as f64 - 1.0) * spacing;
        Self { origin: vec![o; spatial_dims], spacing, counts: vec![count; spatial_dims] }
    }

    pub fn dims(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn unravel(&self, mut m: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims()];
        for d in (0..self.dims()).rev() {
            idx[d] = m % self.counts[d];
            m /= self.counts[d];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn momentum(&self, m: usize) -> Vec<f64> {
        self.unravel(m).iter().zip(&self.origin).map(|(&k, &o)| o + k as f64 * self.spacing).collect()
    }

    /// Δpⁿ
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dims() as i32)
    }

    pub fn on_boundary(&self, m: usize) -> bool {
        self.unravel(m).iter().zip(&self.counts).any(|(&k, &c)| k == 0 || k + 1 == c)
    }
}

/// Occupation basis of total particle number ≤ K; basis states are sorted mode lists.
#[derive(Debug, Clone)]
pub struct FockSpace {
    pub lattice: ModeLattice,
    pub max_particles: usize,
    pub modes: Vec<Vec<f64>>,
    pub omega: Vec<f64>,
    pub basis: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

pub fn make_fock(lattice: ModeLattice, max_particles: usize) -> Result<FockSpace> {
    if lattice.dims() == 0 || lattice.counts.contains(&0) {
        return Err(Error::InvalidArgument("mode lattice is empty".into()));
    }
    if !(lattice.spacing > 0.0) || lattice.origin.len() != lattice.dims() {
        return Err(Error::InvalidArgument("mode lattice needs positive spacing and one origin per axis".into()));
    }
    if max_particles < 1 {
        return Err(Error::InvalidArgument("truncation K must be at least 1".into()));
    }
    let modes: Vec<Vec<f64>> = (0..lattice.len()).map(|m| lattice.momentum(m)).collect();
    let omega: Vec<f64> = modes.iter().map(|p| p.iter().map(|c| c * c).sum::<f64>().sqrt()).collect();
    if let Some(m) = omega.iter().position(|&w| !(w > 1e-12 * lattice.spacing)) {
        return Err(Error::InvalidArgument(format!("mode {m} sits at zero momentum")));
    }
    let mut basis = vec![Vec::new()];
    let mut layer: Vec<Vec<u32>> = vec![Vec::new()];
    for _ in 0..max_particles {
        let mut next = Vec::new();
        for s in &layer {
            let start = s.last().copied().unwrap_or(0);
            for m in start..lattice.len() as u32 {
                let mut t = s.clone();
                t.push(m);
                next.push(t);
            }
        }
        basis.extend(next.iter().cloned());
        layer = next;
    }
    let index = basis.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    Ok(FockSpace { lattice, max_particles, modes, omega, basis, index })
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

impl FockSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn spatial_dims(&self) -> usize {
        self.lattice.dims()
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Σ_{k≤K} C(#modes + k − 1, k).
    pub fn expected_dim(n_modes: usize, k_max: usize) -> usize {
        (0..=k_max).map(|k| binomial(n_modes + k - 1, k)).sum()
    }

    pub fn index_of(&self, occupied: &[u32]) -> Option<usize> {
        let mut s = occupied.to_vec();
        s.sort_unstable();
        self.index.get(&s).copied()
    }

    pub fn particles(&self, i: usize) -> usize {
        self.basis[i].len()
    }

    pub fn vacuum(&self) -> FockState {
        let mut a = vec![ZERO; self.dim()];
        a[0] = ONE;
        FockState { amplitudes: a }
    }

    /// Basis vector with the listed modes occupied.
    pub fn basis_state(&self, occupied: &[u32]) -> Result<FockState> {
        let i = self
            .index_of(occupied)
            .ok_or_else(|| Error::InvalidArgument(format!("occupation {occupied:?} outside the truncation")))?;
        let mut a = vec![ZERO; self.dim()];
        a[i] = ONE;
        Ok(FockState { amplitudes: a })
    }

    /// One-particle state with wavefunction f over modes.
    pub fn one_particle(&self, f: impl Fn(&[f64]) -> C64) -> FockState {
        let mut a = vec![ZERO; self.dim()];
        for (m, p) in self.modes.iter().enumerate() {
            a[self.index[&vec![m as u32]]] = f(p);
        }
        FockState { amplitudes: a }
    }

    /// Symmetric two-particle state ∝ Σ_{p,q} f(p) g(q) b*(p) b*(q)|0⟩, requires K ≥ 2.
    pub fn two_particle(&self, f: impl Fn(&[f64]) -> C64, g: impl Fn(&[f64]) -> C64) -> Result<FockState> {
        if self.max_particles < 2 {
            return Err(Error::InvalidArgument("two-particle state needs K ≥ 2".into()));
        }
        let mut a = vec![ZERO; self.dim()];
        let fv: Vec<C64> = self.modes.iter().map(|p| f(p)).collect();
        let gv: Vec<C64> = self.modes.iter().map(|p| g(p)).collect();
        for p in 0..self.n_modes() {
            for q in 0..self.n_modes() {
                let i = self.index_of(&[p as u32, q as u32]).expect("K ≥ 2");
                // b*(p)b*(q)|0⟩ = √2 |2_p⟩ when p = q, else |1_p 1_q⟩
                let w = if p == q { 2f64.sqrt() } else { 1.0 };
                a[i] += fv[p] * gv[q] * w;
            }
        }
        Ok(FockState { amplitudes: a })
    }

    /// Squared-norm fraction carried by basis states with a particle on the lattice boundary.
    pub fn boundary_mass(&self, s: &FockState) -> f64 {
        let total = s.norm_sqr();
        if total == 0.0 {
            return 0.0;
        }
        let edge: f64 = self
            .basis
            .iter()
            .zip(&s.amplitudes)
            .filter(|(b, _)| b.iter().any(|&m| self.lattice.on_boundary(m as usize)))
            .map(|(_, a)| a.norm_sqr())
            .sum();
        edge / total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    pub amplitudes: Vec<C64>,
}

impl FockState {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.amplitudes.iter_mut().for_each(|a| *a /= n);
        }
        self
    }

    pub fn inner(&self, other: &FockState) -> C64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn sub(&self, other: &FockState) -> FockState {
        FockState { amplitudes: self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a - b).collect() }
    }

    pub fn axpy(&mut self, c: C64, other: &FockState) {
        self.amplitudes.iter_mut().zip(&other.amplitudes).for_each(|(a, b)| *a += c * b);
    }
}

/// Sparse operator on a Fock space, stored as rows of (column, value).
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    pub dim: usize,
    pub rows: Vec<Vec<(usize, C64)>>,
}

fn merge_row(mut row: Vec<(usize, C64)>) -> Vec<(usize, C64)> {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, C64)> = Vec::with_capacity(row.len());
    for (c, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out.retain(|e| e.1 != ZERO);
    out
}

impl FockOperator {
    pub fn zero(dim: usize) -> Self {
        Self { dim, rows: vec![Vec::new(); dim] }
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let rows = values.iter().enumerate().map(|(i, &v)| if v == ZERO { Vec::new() } else { vec![(i, v)] }).collect();
        Self { dim: values.len(), rows }
    }

    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut rows = vec![Vec::new(); dim];
        for (r, c, v) in triplets {
            rows[r].push((c, v));
        }
        Self { dim, rows: rows.into_iter().map(merge_row).collect() }
    }

    pub fn apply(&self, s: &FockState) -> FockState {
        let amplitudes = self.rows.iter().map(|r| r.iter().map(|&(c, v)| v * s.amplitudes[c]).sum()).collect();
        FockState { amplitudes }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { dim: self.dim, rows: self.rows.iter().map(|r| r.iter().map(|&(j, v)| (j, v * c)).collect()).collect() }
    }

    pub fn add(&self, other: &FockOperator) -> Self {
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| merge_row(a.iter().chain(b.iter()).copied().collect()))
            .collect();
        Self { dim: self.dim, rows }
    }

    pub fn sub(&self, other: &FockOperator) -> Self {
        self.add(&other.scale(-ONE))
    }

    /// self · other.
    pub fn compose(&self, other: &FockOperator) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut acc = Vec::new();
                for &(k, v) in r {
                    for &(j, w) in &other.rows[k] {
                        acc.push((j, v * w));
                    }
                }
                merge_row(acc)
            })
            .collect();
        Self { dim: self.dim, rows }
    }

    pub fn commutator(&self, other: &FockOperator) -> Self {
        self.compose(other).sub(&other.compose(self))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.dim,
            self.rows.iter().enumerate().flat_map(|(i, r)| r.iter().map(move |&(j, v)| (j, i, v.conj()))),
        )
    }

    pub fn dense(&self) -> Vec<C64> {
        let n = self.dim;
        let mut m = vec![ZERO; n * n];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                m[i * n + j] += v;
            }
        }
        m
    }

    /// max |A_ij − A_ji*|.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.sub(&self.adjoint());
        d.rows.iter().flat_map(|r| r.iter().map(|e| e.1.norm())).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.rows.iter().flat_map(|r| r.iter().map(|e| e.1.norm())).fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, r)| r.iter().all(|e| e.0 == i))
    }

    /// Restriction to the listed basis indices.
    pub fn restrict(&self, keep: &[usize]) -> Vec<Vec<(usize, C64)>> {
        let pos: HashMap<usize, usize> = keep.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        keep.iter().map(|i| self.rows[*i].iter().filter_map(|&(j, v)| pos.get(&j).map(|&p| (p, v))).collect()).collect()
    }
}

fn with_removed(s: &[u32], m: u32) -> Option<Vec<u32>> {
    let k = s.iter().position(|&x| x == m)?;
    let mut t = s.to_vec();
    t.remove(k);
    Some(t)
}

fn with_added(s: &[u32], m: u32) -> Vec<u32> {
    let mut t = s.to_vec();
    let k = t.partition_point(|&x| x < m);
    t.insert(k, m);
    t
}

fn count(s: &[u32], m: u32) -> usize {
    s.iter().filter(|&&x| x == m).count()
}

/// a(p) = b(p)/√Δpⁿ.
pub fn annihilation(f: &FockSpace, mode: usize) -> Result<FockOperator> {
    if mode >= f.n_modes() {
        return Err(Error::InvalidArgument(format!("mode {mode} out of range")));
    }
    let c = 1.0 / f.lattice.cell_volume().sqrt();
    let m = mode as u32;
    let trip = f.basis.iter().enumerate().filter_map(|(i, s)| {
        let n = count(s, m);
        (n > 0).then(|| {
            let t = with_removed(s, m).expect("occupied");
            (f.index[&t], i, C64::new(c * (n as f64).sqrt(), 0.0))
        })
    });
    Ok(FockOperator::from_triplets(f.dim(), trip.collect::<Vec<_>>()))
}

/// a*(p), zero on the top sector.
pub fn creation(f: &FockSpace, mode: usize) -> Result<FockOperator> {
    Ok(annihilation(f, mode)?.adjoint())
}

/// dΓ(h) for a one-particle operator given by its mode-space rows h(p, q).
pub fn second_quantize(f: &FockSpace, h: &[Vec<(usize, C64)>]) -> FockOperator {
    let mut trip = Vec::new();
    for (i, s) in f.basis.iter().enumerate() {
        let mut last = None;
        for &q in s {
            if last == Some(q) {
                continue;
            }
            last = Some(q);
            let nq = count(s, q) as f64;
            let removed = with_removed(s, q).expect("occupied");
            for (p, row) in h.iter().enumerate() {
                for &(col, v) in row {
                    if col != q as usize {
                        continue;
                    }
                    let t = with_added(&removed, p as u32);
                    let np = count(&t, p as u32) as f64;
                    trip.push((f.index[&t], i, v * (nq * np).sqrt()));
                }
            }
        }
    }
    FockOperator::from_triplets(f.dim(), trip)
}

/// dΓ of a multiplication operator g(p) in mode space.
pub fn second_quantize_diagonal(f: &FockSpace, g: impl Fn(usize) -> f64) -> FockOperator {
    let w: Vec<f64> = (0..f.n_modes()).map(g).collect();
    let vals: Vec<C64> = f.basis.iter().map(|s| C64::new(s.iter().map(|&m| w[m as usize]).sum(), 0.0)).collect();
    FockOperator::diagonal(&vals)
}

/// N = Σ Δpⁿ a*(p)a(p).
pub fn number_operator(f: &FockSpace) -> FockOperator {
    second_quantize_diagonal(f, |_| 1.0)
}

/// P_μ = Σ Δpⁿ p_μ a*(p)a(p) with p₀ = ω_p; μ = 1..n are the spatial components.
pub fn momentum_operator(f: &FockSpace, mu: usize) -> Result<FockOperator> {
    if mu > f.spatial_dims() {
        return Err(Error::InvalidArgument(format!("momentum index {mu} out of range")));
    }
    Ok(if mu == 0 {
        second_quantize_diagonal(f, |m| f.omega[m])
    } else {
        second_quantize_diagonal(f, |m| f.modes[m][mu - 1])
    })
}

/// V_j = Σ Δpⁿ (p_j/ω_p) a*(p)a(p), j = 0..n−1.
pub fn velocity_operator(f: &FockSpace, j: usize) -> Result<FockOperator> {
    if j >= f.spatial_dims() {
        return Err(Error::InvalidArgument(format!("axis {j} out of range")));
    }
    Ok(second_quantize_diagonal(f, |m| f.modes[m][j] / f.omega[m]))
}

/// Mode-space rows of ∂/∂p_j: central difference inside, second-order one-sided at the ends.
/// A two-mode axis falls back to the forward difference on both modes.
pub fn difference_rows(lattice: &ModeLattice, j: usize) -> Result<Vec<Vec<(usize, C64)>>> {
    if j >= lattice.dims() {
        return Err(Error::InvalidArgument(format!("axis {j} out of range")));
    }
    let c = lattice.counts[j];
    if c < 2 {
        return Err(Error::InvalidArgument(format!("axis {j} needs at least 2 modes for differencing")));
    }
    let h = 1.0 / (2.0 * lattice.spacing);
    let rows = (0..lattice.len())
        .map(|m| {
            let idx = lattice.unravel(m);
            let at = |k: usize| {
                let mut t = idx.clone();
                t[j] = k;
                lattice.ravel(&t)
            };
            let k = idx[j];
            let st: Vec<(usize, f64)> = if c == 2 {
                vec![(at(1), 2.0), (at(0), -2.0)]
            } else if k == 0 {
                vec![(at(0), -3.0), (at(1), 4.0), (at(2), -1.0)]
            } else if k + 1 == c {
                vec![(at(c - 1), 3.0), (at(c - 2), -4.0), (at(c - 3), 1.0)]
            } else {
                vec![(at(k + 1), 1.0), (at(k - 1), -1.0)]
            };
            st.into_iter().map(|(col, w)| (col, C64::new(w * h, 0.0))).collect()
        })
        .collect();
    Ok(rows)
}

/// Lower-index coordinate X_j = −i Σ Δpⁿ a*(p) ∂_j a(p), symmetrized.
#[derive(Debug, Clone)]
pub struct CoordinateOperator {
    pub operator: FockOperator,
    /// max |h − h†| of the one-particle kernel before symmetrization.
    pub asymmetry: f64,
}

pub fn coordinate_operator(f: &FockSpace, j: usize) -> Result<CoordinateOperator> {
    let d = difference_rows(&f.lattice, j)?;
    let h = FockOperator { dim: f.n_modes(), rows: d }.scale(-I);
    let asymmetry = h.hermitian_defect();
    let sym = h.add(&h.adjoint()).scale(C64::new(0.5, 0.0));
    Ok(CoordinateOperator { operator: second_quantize(f, &sym.rows), asymmetry })
}

fn check_theta(f: &FockSpace, theta: &SkewMatrix) -> Result<()> {
    if theta.dim != f.spatial_dims() + 1 {
        return Err(Error::DimensionMismatch { expected: f.spatial_dims() + 1, found: theta.dim });
    }
    Ok(())
}

/// (θP)^μ = θ^{μν}P_ν with P₀ = ω and lowered spatial components P_k = −p^k.
pub fn theta_p(f: &FockSpace, theta: &SkewMatrix, mu: usize) -> Result<FockOperator> {
    check_theta(f, theta)?;
    let n = f.spatial_dims();
    Ok(second_quantize_diagonal(f, |m| {
        let p = &f.modes[m];
        theta.get(mu, 0) * f.omega[m] - (1..=n).map(|k| theta.get(mu, k) * p[k - 1]).sum::<f64>()
    }))
}

/// X_θ^j = X^j + (θP)⁰V^j − (θP)^j N, spatial j = 0..n−1, with X^j = −X_j.
pub fn deformed_coordinate(f: &FockSpace, theta: &SkewMatrix, j: usize) -> Result<FockOperator> {
    check_theta(f, theta)?;
    let x = coordinate_operator(f, j)?.operator.scale(-ONE);
    if theta.is_zero() {
        return Ok(x);
    }
    let v = velocity_operator(f, j)?;
    let n = number_operator(f);
    let t0 = theta_p(f, theta, 0)?;
    let tj = theta_p(f, theta, j + 1)?;
    Ok(x.add(&t0.compose(&v)).sub(&tj.compose(&n)))
}

/// −2i(θ_{0i}V_j − θ_{0j}V_i)N/c − 2iθ_{ij}N².
pub fn moyal_weyl_rhs(f: &FockSpace, theta: &SkewMatrix, i: usize, j: usize, c: f64) -> Result<FockOperator> {
    check_theta(f, theta)?;
    let n = number_operator(f);
    let vi = velocity_operator(f, i)?;
    let vj = velocity_operator(f, j)?;
    let vel = vj.scale(C64::new(theta.get(0, i + 1), 0.0)).sub(&vi.scale(C64::new(theta.get(0, j + 1), 0.0)));
    let first = vel.compose(&n).scale(C64::new(0.0, -2.0 / c));
    let second = n.compose(&n).scale(C64::new(0.0, -2.0 * theta.get(i + 1, j + 1)));
    Ok(first.add(&second))
}

pub const BOUNDARY_LIMIT: f64 = 1e-6;

/// ‖[X_θ^i, X_θ^j]Ψ − rhsΨ‖/‖Ψ‖ for a state supported away from the lattice boundary.
pub fn moyal_weyl_commutator_check(
    f: &FockSpace,
    theta: &SkewMatrix,
    i: usize,
    j: usize,
    psi: &FockState,
    c: f64,
) -> Result<f64> {
    let edge = f.boundary_mass(psi);
    if edge >= BOUNDARY_LIMIT {
        return Err(Error::BoundaryContaminated(edge));
    }
    let xi = deformed_coordinate(f, theta, i)?;
    let xj = deformed_coordinate(f, theta, j)?;
    let lhs = xi.apply(&xj.apply(psi)).sub(&xj.apply(&xi.apply(psi)));
    let rhs = moyal_weyl_rhs(f, theta, i, j, c)?.apply(psi);
    Ok(lhs.sub(&rhs).norm() / psi.norm())
}

/// Dense-matrix construction of X_θ^j straight from the ladder matrices, used as an oracle.
pub fn dense_deformed_coordinate(f: &FockSpace, theta: &SkewMatrix, j: usize) -> Result<Vec<C64>> {
    check_theta(f, theta)?;
    let dim = f.dim();
    let nm = f.n_modes();
    let dv = f.lattice.cell_volume();
    let a: Vec<Vec<C64>> = (0..nm).map(|m| annihilation(f, m).map(|o| o.dense())).collect::<Result<_>>()?;
    let ad: Vec<Vec<C64>> = a.iter().map(|m| dense_adjoint(m, dim)).collect();
    let d = difference_rows(&f.lattice, j)?;
    // one-particle kernel h = (−i D + (−i D)†)/2, then X_j = Σ_{p,q} Δpⁿ h(p,q) a*(p) a(q)
    let mut h = vec![ZERO; nm * nm];
    for (p, r) in d.iter().enumerate() {
        for &(q, v) in r {
            h[p * nm + q] += -I * v * 0.5;
            h[q * nm + p] += (-I * v).conj() * 0.5;
        }
    }
    let mut x = vec![ZERO; dim * dim];
    for p in 0..nm {
        for q in 0..nm {
            let c = h[p * nm + q];
            if c == ZERO {
                continue;
            }
            let prod = dense_mul(&ad[p], &a[q], dim);
            x.iter_mut().zip(&prod).for_each(|(s, v)| *s += c * dv * v);
        }
    }
    let mut number = vec![ZERO; dim * dim];
    let mut p0 = vec![ZERO; dim * dim];
    let mut vel = vec![ZERO; dim * dim];
    let mut pj = vec![ZERO; dim * dim];
    let n = f.spatial_dims();
    for m in 0..nm {
        let nn = dense_mul(&ad[m], &a[m], dim);
        let p = &f.modes[m];
        let t0 = -(1..=n).map(|k| theta.get(0, k) * p[k - 1]).sum::<f64>();
        let tj = theta.get(j + 1, 0) * f.omega[m] - (1..=n).map(|k| theta.get(j + 1, k) * p[k - 1]).sum::<f64>();
        for (idx, v) in nn.iter().enumerate() {
            number[idx] += dv * v;
            p0[idx] += dv * t0 * v;
            vel[idx] += dv * (p[j] / f.omega[m]) * v;
            pj[idx] += dv * tj * v;
        }
    }
    let a1 = dense_mul(&p0, &vel, dim);
    let a2 = dense_mul(&pj, &number, dim);
    Ok((0..dim * dim).map(|k| -x[k] + a1[k] - a2[k]).collect())
}

fn dense_adjoint(m: &[C64], n: usize) -> Vec<C64> {
    let mut t = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = m[i * n + j].conj();
        }
    }
    t
}

pub fn dense_mul(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    let mut c = vec![ZERO; n * n];
    for i in 0..n {
        for k in 0..n {
            let v = a[i * n + k];
            if v == ZERO {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += v * b[k * n + j];
            }
        }
    }
    c
}

/// max |sparse − dense| of the commutator [X_θ^i, X_θ^j].
pub fn dense_oracle_discrepancy(f: &FockSpace, theta: &SkewMatrix, i: usize, j: usize) -> Result<f64> {
    let dim = f.dim();
    let xi = dense_deformed_coordinate(f, theta, i)?;
    let xj = dense_deformed_coordinate(f, theta, j)?;
    let a = dense_mul(&xi, &xj, dim);
    let b = dense_mul(&xj, &xi, dim);
    let si = deformed_coordinate(f, theta, i)?;
    let sj = deformed_coordinate(f, theta, j)?;
    let s = si.commutator(&sj).dense();
    Ok((0..dim * dim).map(|k| (a[k] - b[k] - s[k]).norm()).fold(0.0, f64::max))
}

/// Indices of basis states with total particle number ≤ k.
pub fn sector(f: &FockSpace, k: usize) -> Vec<usize> {
    (0..f.dim()).filter(|&i| f.particles(i) <= k).collect()
}

/// Spectrum of X_θ^j restricted to the sector of at most `k` particles.
pub fn deformed_coordinate_spectrum(f: &FockSpace, theta: &SkewMatrix, j: usize, k: usize) -> Result<SpectrumSummary> {
    let x = deformed_coordinate(f, theta, j)?;
    sparse_spectrum(&x.restrict(&sector(f, k)))
}

/// Gaussian packet in mode space centred on the lattice midpoint shifted by `shift` cells,
/// with width `width` cells and position offset `x0`.
pub fn packet(f: &FockSpace, shift: &[f64], width: f64, x0: &[f64]) -> impl Fn(&[f64]) -> C64 {
    let lat = &f.lattice;
    let centre: Vec<f64> = (0..lat.dims())
        .map(|d| lat.origin[d] + (0.5 * (lat.counts[d] as f64 - 1.0) + shift[d]) * lat.spacing)
        .collect();
    let s = width * lat.spacing;
    let x0 = x0.to_vec();
    move |p: &[f64]| {
        let r2: f64 = p.iter().zip(&centre).map(|(a, b)| (a - b) * (a - b)).sum();
        let ph: f64 = p.iter().zip(&x0).map(|(a, b)| a * b).sum();
        C64::from_polar((-0.5 * r2 / (s * s)).exp(), -ph)
    }
}

/// Seeded probe set: one- and two-particle packets plus random superpositions of them.
pub fn default_fock_samples(f: &FockSpace, seed: u64) -> Result<Vec<FockState>> {
    let n = f.spatial_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..10 {
        let shift: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w = rng.gen_range(0.6..1.2);
        out.push(f.one_particle(packet(f, &shift, w, &x0)).normalized());
    }
    if f.max_particles >= 2 {
        for _ in 0..10 {
            let s1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x1: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x2: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let w = rng.gen_range(0.6..1.2);
            out.push(f.two_particle(packet(f, &s1, w, &x1), packet(f, &s2, w, &x2))?.normalized());
        }
    }
    let base = out.clone();
    for _ in 0..10 {
        let mut s = FockState { amplitudes: vec![ZERO; f.dim()] };
        for b in &base {
            s.axpy(C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)), b);
        }
        out.push(s.normalized());
    }
    Ok(out)
}

fn x_norms(f: &FockSpace, theta: &SkewMatrix, samples: &[FockState]) -> Result<Vec<BoundSample>> {
    let n = f.spatial_dims();
    let xs: Vec<FockOperator> =
        (0..n).map(|j| coordinate_operator(f, j).map(|c| c.operator.scale(-ONE))).collect::<Result<_>>()?;
    let ds: Vec<FockOperator> =
        (0..n).map(|j| deformed_coordinate(f, theta, j).map(|x| x.sub(&xs[j]))).collect::<Result<_>>()?;
    Ok(samples
        .iter()
        .map(|s| {
            let xr: f64 = xs.iter().map(|x| x.apply(s).norm_sqr()).sum::<f64>().sqrt();
            let dr: f64 = ds.iter().map(|d| d.apply(s).norm_sqr()).sum::<f64>().sqrt();
            BoundSample { perturbation: dr, reference: xr, state: s.norm() }
        })
        .collect())
}

/// Relative bound of X_θ − X against X over the samples.
pub fn fock_x_bound_fit(f: &FockSpace, theta: &SkewMatrix, samples: &[FockState], b_cap: f64) -> Result<BoundFit> {
    fit_from_norms(&x_norms(f, theta, samples)?, b_cap)
}

/// ‖(X_θ − X)Φ‖ ≤ ‖XΦ‖ + b‖Φ‖ with minimal b.
pub fn fock_x_wust(f: &FockSpace, theta: &SkewMatrix, samples: &[FockState], b_cap: f64) -> Result<BoundFit> {
    wust_from_norms(&x_norms(f, theta, samples)?, b_cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FockSpace {
        make_fock(ModeLattice::centered(1, 4, 0.5), 2).unwrap()
    }

    #[test]
    fn dimension_formula() {
        let f = make_fock(ModeLattice::centered(2, 4, 1.0), 3).unwrap();
        assert_eq!(f.dim(), FockSpace::expected_dim(16, 3));
        assert_eq!(FockSpace::expected_dim(64, 2), 1 + 64 + 2080);
    }

    #[test]
    fn rejects_zero_mode_and_bad_k() {
        let lat = ModeLattice { origin: vec![-1.0], spacing: 1.0, counts: vec![3] };
        assert!(make_fock(lat, 2).is_err());
        assert!(make_fock(ModeLattice::centered(1, 4, 1.0), 0).is_err());
    }

    #[test]
    fn ladder_normalization() {
        let f = small();
        let dv = f.lattice.cell_volume();
        for m in 0..f.n_modes() {
            let a = annihilation(&f, m).unwrap();
            assert_eq!(a.apply(&f.vacuum()).norm(), 0.0);
            let one = creation(&f, m).unwrap().apply(&f.vacuum());
            let target = f.basis_state(&[m as u32]).unwrap();
            assert!((one.inner(&target) - C64::new(1.0 / dv.sqrt(), 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn ccr_below_top_sector() {
        let f = small();
        let dv = f.lattice.cell_volume();
        let low = sector(&f, f.max_particles - 1);
        for p in 0..f.n_modes() {
            for q in 0..f.n_modes() {
                let a = annihilation(&f, p).unwrap();
                let ad = creation(&f, q).unwrap();
                let c = a.commutator(&ad).restrict(&low);
                for (r, row) in c.iter().enumerate() {
                    for &(col, v) in row {
                        let expect = if p == q && r == col { 1.0 / dv } else { 0.0 };
                        assert!((v - C64::new(expect, 0.0)).norm() < 1e-12);
                    }
                }
                let aq = annihilation(&f, q).unwrap();
                assert_eq!(a.commutator(&aq).max_abs(), 0.0);
            }
        }
    }

    #[test]
    fn diagonal_operators() {
        let f = make_fock(ModeLattice::centered(2, 4, 0.5), 2).unwrap();
        let n = number_operator(&f);
        let two = f.basis_state(&[1, 5]).unwrap();
        assert!((n.apply(&two).inner(&two) - C64::new(2.0, 0.0)).norm() < 1e-14);
        let p0 = momentum_operator(&f, 0).unwrap();
        let one = f.basis_state(&[3]).unwrap();
        assert!((p0.apply(&one).inner(&one).re - f.omega[3]).abs() < 1e-14);
        for mu in 0..=2 {
            assert_eq!(n.commutator(&momentum_operator(&f, mu).unwrap()).max_abs(), 0.0);
        }
        let v = velocity_operator(&f, 0).unwrap();
        assert_eq!(v.apply(&f.vacuum()).norm(), 0.0);
        assert_eq!(v.commutator(&n).max_abs(), 0.0);
    }

    #[test]
    fn velocity_along_axis_is_one() {
        let lat = ModeLattice { origin: vec![0.5, 0.0], spacing: 0.5, counts: vec![4, 1] };
        let f = make_fock(lat, 1).unwrap();
        let v = velocity_operator(&f, 0).unwrap();
        let s = f.basis_state(&[2]).unwrap();
        assert!((v.apply(&s).inner(&s).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coordinate_commutes_with_number() {
        let f = make_fock(ModeLattice::centered(2, 4, 0.5), 2).unwrap();
        let x = coordinate_operator(&f, 0).unwrap();
        assert_eq!(x.operator.commutator(&number_operator(&f)).max_abs(), 0.0);
        assert!(x.operator.hermitian_defect() < 1e-14);
        assert!(x.asymmetry > 0.0);
        let one = f.basis_state(&[5]).unwrap();
        assert!(x.operator.apply(&one).inner(&one).norm() < 1e-15);
    }

    #[test]
    fn second_quantized_sum_matches_ladders() {
        let f = small();
        let d = difference_rows(&f.lattice, 0).unwrap();
        let dg = second_quantize(&f, &d);
        let dv = f.lattice.cell_volume();
        let mut acc = FockOperator::zero(f.dim());
        for (p, row) in d.iter().enumerate() {
            for &(q, v) in row {
                let t = creation(&f, p).unwrap().compose(&annihilation(&f, q).unwrap());
                acc = acc.add(&t.scale(v * dv));
            }
        }
        assert!(acc.sub(&dg).max_abs() < 1e-12);
    }

    #[test]
    fn deformed_coordinate_trivial_limits() {
        let f = make_fock(ModeLattice::centered(2, 4, 0.5), 2).unwrap();
        let x = deformed_coordinate(&f, &SkewMatrix::zero(3), 1).unwrap();
        let x0 = coordinate_operator(&f, 1).unwrap().operator.scale(-ONE);
        assert_eq!(x, x0);
        let theta =
            SkewMatrix::from_rows(&[vec![0.0, 0.03, -0.02], vec![-0.03, 0.0, 0.05], vec![0.02, -0.05, 0.0]]).unwrap();
        let dx = deformed_coordinate(&f, &theta, 1).unwrap().sub(&x0);
        assert!(dx.is_diagonal());
        assert!(dx.hermitian_defect() < 1e-15);
        assert!(deformed_coordinate(&f, &SkewMatrix::zero(2), 0).is_err());
    }

    #[test]
    fn spatial_theta_one_particle() {
        // purely spatial θ on one particle: X_θ^j − X^j = −(θP)^j = Σ_k θ^{jk} p_k
        let f = make_fock(ModeLattice::centered(2, 4, 0.5), 2).unwrap();
        let theta = SkewMatrix::from_rows(&[vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.07], vec![0.0, -0.07, 0.0]]).unwrap();
        let x0 = coordinate_operator(&f, 0).unwrap().operator.scale(-ONE);
        let d = deformed_coordinate(&f, &theta, 0).unwrap().sub(&x0);
        for m in 0..f.n_modes() {
            let s = f.basis_state(&[m as u32]).unwrap();
            let expect = 0.07 * f.modes[m][1];
            assert!((d.apply(&s).inner(&s).re - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn dense_oracle_agrees() {
        let lat = ModeLattice { origin: vec![-0.75, 0.25], spacing: 0.5, counts: vec![4, 2] };
        let f = make_fock(lat, 2).unwrap();
        assert_eq!(f.n_modes(), 8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta = SkewMatrix::random(3, 0.1, &mut rng);
        assert!(dense_oracle_discrepancy(&f, &theta, 0, 1).unwrap() < 1e-10);
    }

    #[test]
    fn boundary_contamination_flagged() {
        let f = make_fock(ModeLattice::centered(2, 4, 0.5), 2).unwrap();
        let edge = f.basis_state(&[0]).unwrap();
        let theta = SkewMatrix::zero(3);
        assert!(matches!(
            moyal_weyl_commutator_check(&f, &theta, 0, 1, &edge, 1.0),
            Err(Error::BoundaryContaminated(_))
        ));
    }

    #[test]
    fn vacuum_only_is_degenerate() {
        let f = make_fock(ModeLattice::centered(2, 4, 0.5), 2).unwrap();
        let theta = SkewMatrix::random(3, 0.01, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(fock_x_bound_fit(&f, &theta, &[f.vacuum()], 10.0), Err(Error::AllSamplesDegenerate)));
    }
}

//! Position-space grids, wavefunctions, skew matrices and the generator Q(X) = X/|X|^n.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Sign convention carried by every snapshot: P = i∂, [X, P] = −i, H₀ = P²/2m.
pub const CONVENTION_TAG: &str = "P=i*d/dx;[X,P]=-i;H0=P^2/2m;euclidean";

/// Uniform periodic grid on [−L, L)ⁿ with `points_per_axis` nodes per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpace {
    pub dims: usize,
    pub points_per_axis: usize,
    pub half_width: f64,
    pub offset: f64,
}

impl GridSpace {
    pub fn new(dims: usize, points_per_axis: usize, half_width: f64, offset: f64) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidGrid("dims must be at least 1".into()));
        }
        if points_per_axis < 4 || !points_per_axis.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points_per_axis must be even and at least 4, got {points_per_axis}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!("half_width must be positive, got {half_width}")));
        }
        if !offset.is_finite() {
            return Err(Error::InvalidGrid("offset must be finite".into()));
        }
        let total = (points_per_axis as u128).pow(dims as u32);
        if total > (1u128 << 31) {
            return Err(Error::InvalidGrid(format!("{total} nodes is too many")));
        }
        Ok(Self { dims, points_per_axis, half_width, offset })
    }

    /// Grid with the half-spacing offset, so no node sits at the origin.
    pub fn centered(dims: usize, points_per_axis: usize, half_width: f64) -> Result<Self> {
        let h = 2.0 * half_width / points_per_axis as f64;
        Self::new(dims, points_per_axis, half_width, 0.5 * h)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element hⁿ.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dims as i32)
    }

    pub fn node(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.spacing() + self.offset
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points_per_axis).map(|k| self.node(k)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let m = self.points_per_axis;
        let dk = 2.0 * PI / (m as f64 * self.spacing());
        (0..m)
            .map(|k| {
                let s = if k < m / 2 { k as f64 } else { k as f64 - m as f64 };
                s * dk
            })
            .collect()
    }

    /// Row-major multi-index of a flat index; the last axis varies fastest.
    pub fn unravel(&self, mut index: usize, out: &mut [usize]) {
        let m = self.points_per_axis;
        for d in (0..self.dims).rev() {
            out[d] = index % m;
            index /= m;
        }
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.points_per_axis.pow((self.dims - 1 - axis) as u32)
    }

    pub fn coords(&self, index: usize, out: &mut [f64]) {
        let m = self.points_per_axis;
        let mut rest = index;
        for d in (0..self.dims).rev() {
            out[d] = self.node(rest % m);
            rest /= m;
        }
    }

    /// All node coordinates, `dims` values per node.
    pub fn coordinate_table(&self) -> Vec<f64> {
        let n = self.dims;
        let mut table = vec![0.0; self.len() * n];
        for (i, chunk) in table.chunks_mut(n).enumerate() {
            self.coords(i, chunk);
        }
        table
    }

    pub fn has_origin_node(&self) -> bool {
        let h = self.spacing();
        self.nodes().iter().any(|&x| x.abs() < 1e-12 * h)
    }
}

/// Complex wavefunction sampled on a grid.
#[derive(Debug, Clone)]
pub struct GridState {
    pub space: Arc<GridSpace>,
    pub amplitudes: Vec<C64>,
}

impl GridState {
    pub fn zeros(space: &Arc<GridSpace>) -> Self {
        Self { space: space.clone(), amplitudes: vec![C64::new(0.0, 0.0); space.len()] }
    }

    pub fn from_amplitudes(space: &Arc<GridSpace>, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != space.len() {
            return Err(Error::DimensionMismatch { expected: space.len(), found: amplitudes.len() });
        }
        Ok(Self { space: space.clone(), amplitudes })
    }

    pub fn from_fn(space: &Arc<GridSpace>, f: impl Fn(&[f64]) -> C64) -> Self {
        let mut x = vec![0.0; space.dims];
        let amplitudes = (0..space.len())
            .map(|i| {
                space.coords(i, &mut x);
                f(&x)
            })
            .collect();
        Self { space: space.clone(), amplitudes }
    }

    pub fn same_space(&self, other: &GridState) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    pub fn inner(&self, other: &GridState) -> Result<C64> {
        self.same_space(other)?;
        let s: C64 = self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.space.cell_volume())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.space.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.scale_mut(C64::new(1.0 / n, 0.0));
        }
        self
    }

    pub fn scale_mut(&mut self, c: C64) {
        self.amplitudes.iter_mut().for_each(|a| *a *= c);
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut s = self.clone();
        s.scale_mut(c);
        s
    }

    /// self += c * other
    pub fn axpy(&mut self, c: C64, other: &GridState) -> Result<()> {
        self.same_space(other)?;
        self.amplitudes.iter_mut().zip(&other.amplitudes).for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    pub fn sub(&self, other: &GridState) -> Result<GridState> {
        let mut d = self.clone();
        d.axpy(C64::new(-1.0, 0.0), other)?;
        Ok(d)
    }

    pub fn add(&self, other: &GridState) -> Result<GridState> {
        let mut d = self.clone();
        d.axpy(C64::new(1.0, 0.0), other)?;
        Ok(d)
    }

    pub fn distance(&self, other: &GridState) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }

    /// ‖self − other‖ / ‖other‖ (absolute when `other` vanishes).
    pub fn relative_distance(&self, other: &GridState) -> Result<f64> {
        let d = self.distance(other)?;
        let n = other.norm();
        Ok(if n > 0.0 { d / n } else { d })
    }

    /// Fraction of the squared norm outside the box [−w, w]ⁿ.
    pub fn tail_mass_outside(&self, w: f64) -> f64 {
        let total = self.norm_sqr();
        if total == 0.0 {
            return 0.0;
        }
        let mut x = vec![0.0; self.space.dims];
        let mut outside = 0.0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            self.space.coords(i, &mut x);
            if x.iter().any(|c| c.abs() > w) {
                outside += a.norm_sqr();
            }
        }
        outside * self.space.cell_volume() / total
    }

    /// Tail mass outside [−L/2, L/2]ⁿ, the wraparound guard used by the tests.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass_outside(0.5 * self.space.half_width)
    }
}

/// Forward and inverse plans for one length.
type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<HashMap<usize, PlanPair>> = RefCell::new(HashMap::new());
}

fn plans(m: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANS.with(|p| {
        p.borrow_mut()
            .entry(m)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(m), planner.plan_fft_inverse(m))
            })
            .clone()
    })
}

/// In-place n-dimensional FFT; the inverse includes the 1/N normalization.
pub fn fft_nd(space: &GridSpace, data: &mut [C64], inverse: bool) {
    let m = space.points_per_axis;
    let (fwd, inv) = plans(m);
    let plan = if inverse { inv } else { fwd };
    let mut scratch = vec![C64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    let n = space.len();
    let mut lines = vec![C64::new(0.0, 0.0); n];
    for axis in 0..space.dims {
        let stride = space.stride(axis);
        if stride == 1 {
            plan.process_with_scratch(data, &mut scratch);
            continue;
        }
        let block = stride * m;
        let mut l = 0;
        for outer in (0..n).step_by(block) {
            for inner in 0..stride {
                for k in 0..m {
                    lines[l] = data[outer + k * stride + inner];
                    l += 1;
                }
            }
        }
        plan.process_with_scratch(&mut lines, &mut scratch);
        let mut l = 0;
        for outer in (0..n).step_by(block) {
            for inner in 0..stride {
                for k in 0..m {
                    data[outer + k * stride + inner] = lines[l];
                    l += 1;
                }
            }
        }
    }
    if inverse {
        let s = 1.0 / n as f64;
        data.iter_mut().for_each(|a| *a *= s);
    }
}

/// Real skew-symmetric matrix (B in quantum mechanics, θ in field theory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewMatrix {
    pub dim: usize,
    pub entries: Vec<f64>,
}

impl SkewMatrix {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        for i in 0..dim {
            if entries[i * dim + i] != 0.0 {
                return Err(Error::NotSkew(format!("diagonal entry ({i},{i}) is nonzero")));
            }
            for j in 0..i {
                if entries[i * dim + j] != -entries[j * dim + i] {
                    return Err(Error::NotSkew(format!("entries ({i},{j}) and ({j},{i})")));
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
            }
            entries.extend_from_slice(r);
        }
        Self::new(dim, entries)
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, entries: vec![0.0; dim * dim] }
    }

    /// B_ij = ε_ijk B^k.
    pub fn from_axial(b: [f64; 3]) -> Self {
        let mut e = vec![0.0; 9];
        e[1] = b[2];
        e[3] = -b[2];
        e[2] = -b[1];
        e[6] = b[1];
        e[5] = b[0];
        e[7] = -b[0];
        Self { dim: 3, entries: e }
    }

    /// [[0, b], [−b, 0]].
    pub fn planar(b: f64) -> Self {
        Self { dim: 2, entries: vec![0.0, b, -b, 0.0] }
    }

    /// Random skew matrix with Frobenius norm `norm`.
    pub fn random(dim: usize, norm: f64, rng: &mut impl rand::Rng) -> Self {
        let mut e = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in (i + 1)..dim {
                let v: f64 = rng.gen_range(-1.0..1.0);
                e[i * dim + j] = v;
                e[j * dim + i] = -v;
            }
        }
        let mut s = Self { dim, entries: e };
        let f = s.frobenius();
        if f > 0.0 {
            s.entries.iter_mut().for_each(|v| *v *= norm / f);
        }
        s
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            out[i] = (0..self.dim).map(|j| self.entries[i * self.dim + j] * x[j]).sum();
        }
    }

    /// Bᵀx = −Bx.
    pub fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            out[i] = (0..self.dim).map(|j| self.entries[j * self.dim + i] * x[j]).sum();
        }
    }
}

/// Position-diagonal vector field Q(x) = x/|x|ⁿ sampled at every node.
#[derive(Debug, Clone)]
pub struct Generator {
    pub space: Arc<GridSpace>,
    pub exponent: f64,
    /// `dims` components per node, node-major.
    pub values: Vec<f64>,
}

impl Generator {
    pub fn component(&self, node: usize) -> &[f64] {
        let n = self.space.dims;
        &self.values[node * n..(node + 1) * n]
    }

    /// Grid operator multiplying by the j-th component.
    pub fn operator(&self, j: usize) -> crate::operator::GridOperator {
        let n = self.space.dims;
        let v = (0..self.space.len()).map(|i| C64::new(self.values[i * n + j], 0.0)).collect();
        crate::operator::GridOperator::position_values(&self.space, v)
    }
}

pub fn q_generator(space: &Arc<GridSpace>, exponent: f64) -> Result<Generator> {
    if exponent > 0.0 && space.has_origin_node() {
        return Err(Error::OriginNode { exponent });
    }
    let n = space.dims;
    let mut values = space.coordinate_table();
    if exponent != 0.0 {
        for chunk in values.chunks_mut(n) {
            let r2: f64 = chunk.iter().map(|c| c * c).sum();
            let s = r2.powf(-0.5 * exponent);
            chunk.iter_mut().for_each(|c| *c *= s);
        }
    }
    Ok(Generator { space: space.clone(), exponent, values })
}

/// Φ(x) ↦ e^{i y·Q(x)} Φ(x).
pub fn unitary_v(q: &Generator, y: &[f64], phi: &GridState) -> Result<GridState> {
    let n = q.space.dims;
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if *phi.space != *q.space {
        return Err(Error::SpaceMismatch);
    }
    let amplitudes = phi
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let qv = q.component(i);
            let phase: f64 = qv.iter().zip(y).map(|(a, b)| a * b).sum();
            a * C64::from_polar(1.0, phase)
        })
        .collect();
    Ok(GridState { space: phi.space.clone(), amplitudes })
}

/// Normalized x^k e^{−|x|²/2} with one exponent per axis.
pub fn domain_vector(space: &Arc<GridSpace>, k: &[i32]) -> Result<GridState> {
    if k.len() != space.dims {
        return Err(Error::DimensionMismatch { expected: space.dims, found: k.len() });
    }
    if let Some(bad) = k.iter().find(|&&v| v < 0) {
        return Err(Error::InvalidArgument(format!("negative exponent {bad}")));
    }
    let s = GridState::from_fn(space, |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        let p: f64 = x.iter().zip(k).map(|(c, &e)| c.powi(e)).product();
        C64::new(p * (-0.5 * r2).exp(), 0.0)
    });
    Ok(s.normalized())
}

/// Exact L² norm of x^k e^{−|x|²/2} over ℝⁿ.
pub fn domain_vector_norm_exact(k: &[i32]) -> f64 {
    // ∫ x^{2k} e^{−x²} dx = Γ(k + 1/2)
    k.iter().map(|&e| gamma_half_integer(e as usize)).product::<f64>().sqrt()
}

fn gamma_half_integer(k: usize) -> f64 {
    // Γ(k + 1/2) = (2k)! √π / (4^k k!)
    let mut g = PI.sqrt();
    for j in 0..k {
        g *= j as f64 + 0.5;
    }
    g
}

/// Product of normalized Hermite functions h_{k_1}(x_1)…h_{k_n}(x_n); spans the same
/// space as the monomial vectors of total degree ≤ |k|.
pub fn hermite_state(space: &Arc<GridSpace>, k: &[usize]) -> Result<GridState> {
    if k.len() != space.dims {
        return Err(Error::DimensionMismatch { expected: space.dims, found: k.len() });
    }
    Ok(GridState::from_fn(space, |x| {
        let v: f64 = x.iter().zip(k).map(|(&c, &e)| hermite_function(e, c)).product();
        C64::new(v, 0.0)
    }))
}

pub fn hermite_function(k: usize, x: f64) -> f64 {
    let mut h0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if k == 0 {
        return h0;
    }
    let mut h1 = 2f64.sqrt() * x * h0;
    for j in 1..k {
        let h2 = (2.0 / (j as f64 + 1.0)).sqrt() * x * h1 - (j as f64 / (j as f64 + 1.0)).sqrt() * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Multi-indices of total degree ≤ `max_degree`, ordered by degree then lexicographically.
pub fn graded_multi_indices(dims: usize, max_degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for deg in 0..=max_degree {
        let mut cur = vec![0usize; dims];
        fill(&mut out, &mut cur, 0, deg);
    }
    out
}

fn fill(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, axis: usize, rest: usize) {
    if axis + 1 == cur.len() {
        cur[axis] = rest;
        out.push(cur.clone());
        return;
    }
    for v in (0..=rest).rev() {
        cur[axis] = v;
        fill(out, cur, axis + 1, rest - v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_nodes() {
        let g = GridSpace::centered(1, 8, 4.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.nodes(), vec![-3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpace::new(3, 3, 1.0, 0.0).is_err());
        assert!(GridSpace::new(1, 2, 1.0, 0.0).is_err());
        assert!(GridSpace::new(1, 8, 0.0, 0.0).is_err());
        assert!(GridSpace::new(1, 8, -1.0, 0.0).is_err());
    }

    #[test]
    fn centered_grid_avoids_origin() {
        let g = GridSpace::centered(3, 32, 8.0).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert!(!g.has_origin_node());
        let g0 = GridSpace::new(1, 8, 4.0, 0.0).unwrap();
        assert!(g0.has_origin_node());
        assert!(q_generator(&Arc::new(g0), 1.0).is_err());
    }

    #[test]
    fn fft_round_trip() {
        let g = Arc::new(GridSpace::centered(2, 8, 3.0).unwrap());
        let s = GridState::from_fn(&g, |x| C64::new(x[0].sin(), x[1]));
        let mut d = s.amplitudes.clone();
        fft_nd(&g, &mut d, false);
        fft_nd(&g, &mut d, true);
        for (a, b) in d.iter().zip(&s.amplitudes) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn axial_skew_contraction() {
        let b = SkewMatrix::from_axial([0.3, -0.2, 0.7]);
        let x = [1.0, 2.0, -0.5];
        let mut out = [0.0; 3];
        b.apply(&x, &mut out);
        // (Bx)_i = ε_ijk x_j B^k = (x × B)_i
        let cross = [x[1] * 0.7 - x[2] * -0.2, x[2] * 0.3 - x[0] * 0.7, x[0] * -0.2 - x[1] * 0.3];
        for i in 0..3 {
            assert!((out[i] - cross[i]).abs() < 1e-15);
        }
        assert!(SkewMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn generator_unit_field() {
        let g = Arc::new(GridSpace::centered(3, 8, 4.0).unwrap());
        let q = q_generator(&g, 1.0).unwrap();
        for i in 0..g.len() {
            let r: f64 = q.component(i).iter().map(|c| c * c).sum();
            assert!((r - 1.0).abs() < 1e-14);
        }
        let q0 = q_generator(&g, 0.0).unwrap();
        assert_eq!(q0.values, g.coordinate_table());
    }

    #[test]
    fn gaussian_norm_matches_moments() {
        let g = Arc::new(GridSpace::centered(3, 64, 10.0).unwrap());
        let k = [2, 1, 0];
        let raw = GridState::from_fn(&g, |x| {
            let r2: f64 = x.iter().map(|c| c * c).sum();
            C64::new(x[0] * x[0] * x[1] * (-0.5 * r2).exp(), 0.0)
        });
        let exact = domain_vector_norm_exact(&k);
        assert!((raw.norm() - exact).abs() / exact < 1e-8);
    }

    #[test]
    fn hermite_functions_orthonormal() {
        let g = Arc::new(GridSpace::centered(1, 64, 10.0).unwrap());
        let a = hermite_state(&g, &[3]).unwrap();
        let b = hermite_state(&g, &[5]).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-10);
        assert!(a.inner(&b).unwrap().norm() < 1e-10);
    }

    #[test]
    fn graded_indices_count() {
        assert_eq!(graded_multi_indices(3, 3).len(), 20);
        assert_eq!(graded_multi_indices(3, 4).len(), 35);
        assert_eq!(graded_multi_indices(2, 1), vec![vec![0, 0], vec![1, 0], vec![0, 1]]);
    }
}

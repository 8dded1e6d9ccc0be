//! Linear operators on grid states: multipliers in position or momentum space and their
//! sums and products.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{fft_nd, GridSpace, GridState, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Fourier multiplier table, optionally split as a sum of one-axis symbols.
#[derive(Debug)]
pub struct MomentumSymbol {
    pub values: Vec<C64>,
    /// (axis, symbol over that axis' wavenumbers); their sum equals `values`.
    pub axis_terms: Option<Vec<(usize, Vec<C64>)>>,
}

#[derive(Debug, Clone)]
pub enum Term {
    Identity,
    Position(Arc<Vec<C64>>),
    Momentum(Arc<MomentumSymbol>),
    Scaled(C64, Box<Term>),
    Sum(Vec<Term>),
    /// Factors in written order: the rightmost acts first.
    Product(Vec<Term>),
}

#[derive(Debug, Clone)]
pub struct GridOperator {
    pub space: Arc<GridSpace>,
    pub term: Term,
}

/// Convolution kernel of a local term.
#[derive(Debug, Clone)]
pub enum Kernel {
    Identity,
    /// Circulant kernel along one axis, indexed by (u_axis − v_axis) mod M.
    Line {
        axis: usize,
        taps: Arc<Vec<C64>>,
    },
    /// Full circulant kernel indexed by the flattened multi-index difference.
    Circulant(Arc<Vec<C64>>),
}

/// c · diag(left) · K · diag(right).
#[derive(Debug, Clone)]
pub struct LocalTerm {
    pub coeff: C64,
    pub left: Option<Arc<Vec<C64>>>,
    pub kernel: Kernel,
    pub right: Option<Arc<Vec<C64>>>,
}

impl GridOperator {
    pub fn identity(space: &Arc<GridSpace>) -> Self {
        Self { space: space.clone(), term: Term::Identity }
    }

    pub fn zero(space: &Arc<GridSpace>) -> Self {
        Self { space: space.clone(), term: Term::Sum(Vec::new()) }
    }

    pub fn position_values(space: &Arc<GridSpace>, values: Vec<C64>) -> Self {
        assert_eq!(values.len(), space.len());
        Self { space: space.clone(), term: Term::Position(Arc::new(values)) }
    }

    pub fn position_fn(space: &Arc<GridSpace>, f: impl Fn(&[f64]) -> C64) -> Self {
        let s = GridState::from_fn(space, f);
        Self::position_values(space, s.amplitudes)
    }

    /// Multiplication by x_j.
    pub fn coordinate(space: &Arc<GridSpace>, j: usize) -> Self {
        Self::position_fn(space, move |x| C64::new(x[j], 0.0))
    }

    /// P_j = i∂_j, Fourier symbol −k_j.
    pub fn momentum(space: &Arc<GridSpace>, j: usize) -> Self {
        let axis: Vec<C64> = space.wavenumbers().iter().map(|&k| C64::new(-k, 0.0)).collect();
        Self::separable_symbol(space, vec![(j, axis)])
    }

    /// H₀ = P²/2m, Fourier symbol |k|²/2m.
    pub fn free_hamiltonian(space: &Arc<GridSpace>, mass: f64) -> Self {
        let axis: Vec<C64> = space.wavenumbers().iter().map(|&k| C64::new(k * k / (2.0 * mass), 0.0)).collect();
        let terms = (0..space.dims).map(|j| (j, axis.clone())).collect();
        Self::separable_symbol(space, terms)
    }

    /// Fourier multiplier given as a sum of one-axis symbols.
    pub fn separable_symbol(space: &Arc<GridSpace>, terms: Vec<(usize, Vec<C64>)>) -> Self {
        let n = space.len();
        let mut values = vec![ZERO; n];
        let mut idx = vec![0usize; space.dims];
        for (i, v) in values.iter_mut().enumerate() {
            space.unravel(i, &mut idx);
            *v = terms.iter().map(|(a, s)| s[idx[*a]]).sum();
        }
        Self {
            space: space.clone(),
            term: Term::Momentum(Arc::new(MomentumSymbol { values, axis_terms: Some(terms) })),
        }
    }

    /// General Fourier multiplier s(k).
    pub fn momentum_symbol(space: &Arc<GridSpace>, f: impl Fn(&[f64]) -> C64) -> Self {
        let ks = space.wavenumbers();
        let mut idx = vec![0usize; space.dims];
        let mut k = vec![0.0; space.dims];
        let values = (0..space.len())
            .map(|i| {
                space.unravel(i, &mut idx);
                for d in 0..space.dims {
                    k[d] = ks[idx[d]];
                }
                f(&k)
            })
            .collect();
        Self { space: space.clone(), term: Term::Momentum(Arc::new(MomentumSymbol { values, axis_terms: None })) }
    }

    fn check(&self, other: &GridOperator) -> Result<()> {
        if *self.space == *other.space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    pub fn add(&self, other: &GridOperator) -> Result<GridOperator> {
        self.check(other)?;
        Ok(Self { space: self.space.clone(), term: Term::Sum(vec![self.term.clone(), other.term.clone()]) })
    }

    pub fn sub(&self, other: &GridOperator) -> Result<GridOperator> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn sum(space: &Arc<GridSpace>, ops: &[GridOperator]) -> Result<GridOperator> {
        for o in ops {
            if *o.space != **space {
                return Err(Error::SpaceMismatch);
            }
        }
        Ok(Self { space: space.clone(), term: Term::Sum(ops.iter().map(|o| o.term.clone()).collect()) })
    }

    /// self · other (other acts first).
    pub fn compose(&self, other: &GridOperator) -> Result<GridOperator> {
        self.check(other)?;
        Ok(Self { space: self.space.clone(), term: Term::Product(vec![self.term.clone(), other.term.clone()]) })
    }

    pub fn scale(&self, c: C64) -> GridOperator {
        Self { space: self.space.clone(), term: Term::Scaled(c, Box::new(self.term.clone())) }
    }

    /// [self, other] = self·other − other·self.
    pub fn commutator(&self, other: &GridOperator) -> Result<GridOperator> {
        self.compose(other)?.sub(&other.compose(self)?)
    }

    pub fn anticommutator(&self, other: &GridOperator) -> Result<GridOperator> {
        self.compose(other)?.add(&other.compose(self)?)
    }

    pub fn adjoint(&self) -> GridOperator {
        Self { space: self.space.clone(), term: adjoint_term(&self.term) }
    }

    pub fn apply(&self, state: &GridState) -> Result<GridState> {
        if *state.space != *self.space {
            return Err(Error::SpaceMismatch);
        }
        let amplitudes = apply_term(&self.space, &self.term, &state.amplitudes);
        Ok(GridState { space: state.space.clone(), amplitudes })
    }

    /// Multiplier values when the operator is a function of X alone.
    pub fn position_diagonal(&self) -> Option<Vec<C64>> {
        diagonal_of(&self.term, self.space.len())
    }

    /// Decomposition into local terms, available when every product contains at most
    /// one momentum factor.
    pub fn local_terms(&self) -> Option<Vec<LocalTerm>> {
        local_of(&self.space, &self.term)
    }

    /// Matrix rows as (column, value) lists, merged and sorted by column.
    pub fn rows(&self, dense_limit: usize) -> Result<Vec<Vec<(u32, C64)>>> {
        let n = self.space.len();
        if let Some(terms) = self.local_terms() {
            if terms.iter().all(|t| !matches!(t.kernel, Kernel::Circulant(_))) || n <= dense_limit {
                return Ok(rows_from_local(&self.space, &terms));
            }
        }
        if n > dense_limit {
            return Err(Error::TooLarge { nodes: n, limit: dense_limit });
        }
        let dense = self.dense_matrix()?;
        Ok((0..n)
            .map(|u| {
                (0..n)
                    .filter_map(|v| {
                        let a = dense[u * n + v];
                        (a != ZERO).then_some((v as u32, a))
                    })
                    .collect()
            })
            .collect())
    }

    /// Dense matrix in row-major order, built column by column from basis vectors.
    pub fn dense_matrix(&self) -> Result<Vec<C64>> {
        let n = self.space.len();
        let mut m = vec![ZERO; n * n];
        let mut e = vec![ZERO; n];
        for v in 0..n {
            e[v] = ONE;
            let col = apply_term(&self.space, &self.term, &e);
            for u in 0..n {
                m[u * n + v] = col[u];
            }
            e[v] = ZERO;
        }
        Ok(m)
    }
}

fn adjoint_term(t: &Term) -> Term {
    match t {
        Term::Identity => Term::Identity,
        Term::Position(v) => Term::Position(Arc::new(v.iter().map(|a| a.conj()).collect())),
        Term::Momentum(s) => Term::Momentum(Arc::new(MomentumSymbol {
            values: s.values.iter().map(|a| a.conj()).collect(),
            axis_terms: s
                .axis_terms
                .as_ref()
                .map(|ts| ts.iter().map(|(a, v)| (*a, v.iter().map(|x| x.conj()).collect())).collect()),
        })),
        Term::Scaled(c, inner) => Term::Scaled(c.conj(), Box::new(adjoint_term(inner))),
        Term::Sum(ts) => Term::Sum(ts.iter().map(adjoint_term).collect()),
        Term::Product(ts) => Term::Product(ts.iter().rev().map(adjoint_term).collect()),
    }
}

fn apply_term(space: &GridSpace, t: &Term, x: &[C64]) -> Vec<C64> {
    match t {
        Term::Identity => x.to_vec(),
        Term::Position(v) => x.iter().zip(v.iter()).map(|(a, b)| a * b).collect(),
        Term::Momentum(s) => {
            let mut d = x.to_vec();
            fft_nd(space, &mut d, false);
            d.iter_mut().zip(&s.values).for_each(|(a, b)| *a *= b);
            fft_nd(space, &mut d, true);
            d
        }
        Term::Scaled(c, inner) => {
            let mut d = apply_term(space, inner, x);
            d.iter_mut().for_each(|a| *a *= c);
            d
        }
        Term::Sum(ts) => {
            let mut acc = vec![ZERO; x.len()];
            for t in ts {
                let d = apply_term(space, t, x);
                acc.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
            }
            acc
        }
        Term::Product(ts) => {
            let mut d = x.to_vec();
            for t in ts.iter().rev() {
                d = apply_term(space, t, &d);
            }
            d
        }
    }
}

fn diagonal_of(t: &Term, n: usize) -> Option<Vec<C64>> {
    match t {
        Term::Identity => Some(vec![ONE; n]),
        Term::Position(v) => Some(v.to_vec()),
        Term::Momentum(_) => None,
        Term::Scaled(c, inner) => diagonal_of(inner, n).map(|v| v.into_iter().map(|a| a * c).collect()),
        Term::Sum(ts) => {
            let mut acc = vec![ZERO; n];
            for t in ts {
                let d = diagonal_of(t, n)?;
                acc.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
            }
            Some(acc)
        }
        Term::Product(ts) => {
            let mut acc = vec![ONE; n];
            for t in ts {
                let d = diagonal_of(t, n)?;
                acc.iter_mut().zip(&d).for_each(|(a, b)| *a *= b);
            }
            Some(acc)
        }
    }
}

fn mul_diag(a: &Option<Arc<Vec<C64>>>, b: &Option<Arc<Vec<C64>>>) -> Option<Arc<Vec<C64>>> {
    match (a, b) {
        (None, None) => None,
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (Some(x), Some(y)) => Some(Arc::new(x.iter().zip(y.iter()).map(|(p, q)| p * q).collect())),
    }
}

fn ifft_1d(symbol: &[C64]) -> Vec<C64> {
    let m = symbol.len();
    let mut planner = rustfft::FftPlanner::new();
    let plan = planner.plan_fft_inverse(m);
    let mut d = symbol.to_vec();
    plan.process(&mut d);
    d.iter_mut().for_each(|a| *a /= m as f64);
    d
}

fn local_of(space: &GridSpace, t: &Term) -> Option<Vec<LocalTerm>> {
    let id = |kernel: Kernel, left: Option<Arc<Vec<C64>>>| LocalTerm { coeff: ONE, left, kernel, right: None };
    match t {
        Term::Identity => Some(vec![id(Kernel::Identity, None)]),
        Term::Position(v) => Some(vec![id(Kernel::Identity, Some(v.clone()))]),
        Term::Momentum(s) => match &s.axis_terms {
            Some(ts) => Some(
                ts.iter()
                    .map(|(axis, sym)| id(Kernel::Line { axis: *axis, taps: Arc::new(ifft_1d(sym)) }, None))
                    .collect(),
            ),
            None => {
                let mut d = s.values.clone();
                fft_nd(space, &mut d, true);
                Some(vec![id(Kernel::Circulant(Arc::new(d)), None)])
            }
        },
        Term::Scaled(c, inner) => {
            let mut v = local_of(space, inner)?;
            v.iter_mut().for_each(|lt| lt.coeff *= c);
            Some(v)
        }
        Term::Sum(ts) => {
            let mut out = Vec::new();
            for t in ts {
                out.extend(local_of(space, t)?);
            }
            Some(out)
        }
        Term::Product(ts) => {
            let mut acc = vec![id(Kernel::Identity, None)];
            for t in ts {
                let f = local_of(space, t)?;
                let mut next = Vec::with_capacity(acc.len() * f.len());
                for a in &acc {
                    for b in &f {
                        next.push(mul_local(a, b)?);
                    }
                }
                acc = next;
            }
            Some(acc)
        }
    }
}

fn mul_local(a: &LocalTerm, b: &LocalTerm) -> Option<LocalTerm> {
    let coeff = a.coeff * b.coeff;
    match (&a.kernel, &b.kernel) {
        (Kernel::Identity, _) => {
            let d = mul_diag(&a.left, &a.right);
            Some(LocalTerm { coeff, left: mul_diag(&d, &b.left), kernel: b.kernel.clone(), right: b.right.clone() })
        }
        (_, Kernel::Identity) => {
            let d = mul_diag(&b.left, &b.right);
            Some(LocalTerm { coeff, left: a.left.clone(), kernel: a.kernel.clone(), right: mul_diag(&a.right, &d) })
        }
        _ => None,
    }
}

/// Visits every nonzero (v, K(u, v)) of a kernel row.
pub(crate) fn for_kernel_row(space: &GridSpace, kernel: &Kernel, u: usize, mut f: impl FnMut(usize, C64)) {
    let m = space.points_per_axis;
    match kernel {
        Kernel::Identity => f(u, ONE),
        Kernel::Line { axis, taps } => {
            let stride = space.stride(*axis);
            let ua = (u / stride) % m;
            let base = u - ua * stride;
            for j in 0..m {
                let d = (ua + m - j) % m;
                f(base + j * stride, taps[d]);
            }
        }
        Kernel::Circulant(taps) => {
            let n = space.len();
            let dims = space.dims;
            let mut iu = vec![0usize; dims];
            let mut iv = vec![0usize; dims];
            space.unravel(u, &mut iu);
            for v in 0..n {
                space.unravel(v, &mut iv);
                let mut flat = 0;
                for d in 0..dims {
                    flat = flat * m + (iu[d] + m - iv[d]) % m;
                }
                f(v, taps[flat]);
            }
        }
    }
}

fn rows_from_local(space: &GridSpace, terms: &[LocalTerm]) -> Vec<Vec<(u32, C64)>> {
    let n = space.len();
    (0..n)
        .map(|u| {
            let mut row: Vec<(u32, C64)> = Vec::new();
            for t in terms {
                let l = t.coeff * t.left.as_ref().map_or(ONE, |v| v[u]);
                for_kernel_row(space, &t.kernel, u, |v, k| {
                    let r = t.right.as_ref().map_or(ONE, |w| w[v]);
                    row.push((v as u32, l * k * r));
                });
            }
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(u32, C64)> = Vec::with_capacity(row.len());
            for (v, a) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == v => last.1 += a,
                    _ => merged.push((v, a)),
                }
            }
            merged
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::domain_vector;

    fn space3() -> Arc<GridSpace> {
        Arc::new(GridSpace::centered(3, 16, 6.0).unwrap())
    }

    #[test]
    fn momentum_of_gaussian_is_analytic_derivative() {
        let g = Arc::new(GridSpace::centered(3, 64, 8.0).unwrap());
        let phi = domain_vector(&g, &[0, 0, 0]).unwrap();
        for j in 0..3 {
            let p = GridOperator::momentum(&g, j).apply(&phi).unwrap();
            // i ∂_j e^{−r²/2} = −i x_j e^{−r²/2}
            let expected = GridOperator::coordinate(&g, j).apply(&phi).unwrap().scaled(C64::new(0.0, -1.0));
            assert!(p.distance(&expected).unwrap() < 1e-8);
        }
    }

    #[test]
    fn canonical_commutator() {
        let g = Arc::new(GridSpace::centered(3, 32, 8.0).unwrap());
        let phi = domain_vector(&g, &[0, 0, 0]).unwrap();
        let c = GridOperator::coordinate(&g, 0).commutator(&GridOperator::momentum(&g, 0)).unwrap();
        let r = c.apply(&phi).unwrap();
        let err = r.distance(&phi.scaled(C64::new(0.0, -1.0))).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn free_hamiltonian_is_minus_laplacian_at_half_mass() {
        let g = space3();
        let phi = domain_vector(&g, &[1, 0, 2]).unwrap();
        let h = GridOperator::free_hamiltonian(&g, 0.5).apply(&phi).unwrap();
        let mut pp = GridState::zeros(&g);
        for j in 0..3 {
            let p = GridOperator::momentum(&g, j);
            pp.axpy(ONE, &p.apply(&p.apply(&phi).unwrap()).unwrap()).unwrap();
        }
        assert!(h.distance(&pp).unwrap() < 1e-12);
        assert!(phi.inner(&h).unwrap().re > 0.0);
    }

    #[test]
    fn rows_match_dense_matrix() {
        let g = Arc::new(GridSpace::centered(2, 8, 3.0).unwrap());
        let x = GridOperator::coordinate(&g, 1);
        let op =
            x.compose(&GridOperator::momentum(&g, 0)).unwrap().add(&GridOperator::free_hamiltonian(&g, 0.7)).unwrap();
        let dense = op.dense_matrix().unwrap();
        let rows = op.rows(0).unwrap();
        let n = g.len();
        let mut rebuilt = vec![ZERO; n * n];
        for (u, r) in rows.iter().enumerate() {
            for &(v, a) in r {
                rebuilt[u * n + v as usize] = a;
            }
        }
        for (a, b) in dense.iter().zip(&rebuilt) {
            assert!((a - b).norm() < 1e-12);
        }
        let general = GridOperator::momentum_symbol(&g, |k| C64::new(k[0] * k[1], 0.0));
        let rows = general.rows(1000).unwrap();
        let dense = general.dense_matrix().unwrap();
        for (u, r) in rows.iter().enumerate() {
            for &(v, a) in r {
                assert!((dense[u * n + v as usize] - a).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_reverses_products() {
        let g = Arc::new(GridSpace::centered(1, 16, 4.0).unwrap());
        let xp = GridOperator::coordinate(&g, 0).compose(&GridOperator::momentum(&g, 0)).unwrap();
        let a = xp.dense_matrix().unwrap();
        let b = xp.adjoint().dense_matrix().unwrap();
        let n = g.len();
        for u in 0..n {
            for v in 0..n {
                assert!((a[u * n + v].conj() - b[v * n + u]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn position_diagonal_detection() {
        let g = space3();
        let x = GridOperator::coordinate(&g, 0);
        assert!(x.compose(&x).unwrap().position_diagonal().is_some());
        assert!(GridOperator::momentum(&g, 0).position_diagonal().is_none());
        let p = GridOperator::momentum(&g, 0);
        assert!(p.compose(&p).unwrap().local_terms().is_none());
    }
}

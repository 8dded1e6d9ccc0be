//! Warped convolutions: oscillatory-integral quadrature with cutoff and ε-extrapolation,
//! the exact fiberwise evaluator for multiplication generators, and the Rieffel product.
//!
//! Both engines work in the position basis, where V(y) = e^{iy·Q} is diagonal. The
//! integrand of the regularized double integral then factorizes over matrix elements
//! A(u, v) and over axes, so the x- and y-quadratures reduce to the scalar integral
//!
//! I_ε(a, q) = (2π)⁻¹ ∬ dx dy e^{−ixy} χ₁(εx) χ₁(εy) e^{ixa} e^{iyq}
//!
//! which tends to e^{iaq} as ε → 0.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Generator, GridSpace, GridState, SkewMatrix, C64};
use crate::operator::{for_kernel_row, GridOperator, Kernel};
use crate::quadrature::{neville_at_zero, ComplexSum, CompositeRule};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// One-dimensional factor of the cutoff, χ(a, b) = Π_i χ₁(a_i) χ₁(b_i).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cutoff {
    /// e^{−t²/2}
    Gaussian,
    /// exp(1 − 1/(1 − t²)) on (−1, 1)
    Bump,
}

impl Cutoff {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Cutoff::Gaussian => (-0.5 * t * t).exp(),
            Cutoff::Bump => {
                if t.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - t * t)).exp()
                }
            }
        }
    }
}

/// Quadrature and extrapolation parameters.
///
/// Lengths scale with ε: the y-integral runs over [−R/ε, R/ε] with R = `quad_half_width`,
/// and the x-integral over a window of half-width `window_half_width`·ε around the peak
/// of the y-kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarpConfig {
    pub quad_half_width: f64,
    pub window_half_width: f64,
    pub quad_points: usize,
    pub panel_order: usize,
    pub epsilon_schedule: Vec<f64>,
    pub cutoff: Cutoff,
    pub extrapolation_order: usize,
    pub extrapolation_tolerance: f64,
    pub kernel_edge_limit: f64,
    pub dense_limit: usize,
}

impl Default for WarpConfig {
    fn default() -> Self {
        Self {
            // χ₁(R) = 1e−12
            quad_half_width: (2.0 * 12.0 * std::f64::consts::LN_10).sqrt(),
            window_half_width: 10.0,
            quad_points: 256,
            panel_order: 8,
            epsilon_schedule: (4..=8).map(|k| 2f64.powi(-k)).collect(),
            cutoff: Cutoff::Gaussian,
            extrapolation_order: 2,
            extrapolation_tolerance: 1e-3,
            kernel_edge_limit: 1e-10,
            dense_limit: 4096,
        }
    }
}

impl WarpConfig {
    /// Compactly supported cutoff; its kernel decays slowly, so the window is wide.
    pub fn bump() -> Self {
        Self {
            quad_half_width: 1.0,
            window_half_width: 400.0,
            quad_points: 2048,
            cutoff: Cutoff::Bump,
            kernel_edge_limit: 1e-6,
            ..Self::default()
        }
    }

    pub fn with_quad_points(&self, quad_points: usize) -> Self {
        Self { quad_points, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.quad_half_width > 0.0) || !(self.window_half_width > 0.0) {
            return bad("quad_half_width and window_half_width must be positive");
        }
        if self.panel_order == 0
            || self.quad_points < self.panel_order
            || !self.quad_points.is_multiple_of(self.panel_order)
        {
            return bad("quad_points must be a positive multiple of panel_order");
        }
        if self.epsilon_schedule.is_empty() || self.epsilon_schedule.iter().any(|&e| !(e > 0.0)) {
            return bad("epsilon_schedule must contain positive values");
        }
        if self.epsilon_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return bad("epsilon_schedule must be strictly decreasing");
        }
        if self.extrapolation_order + 1 > self.epsilon_schedule.len() {
            return bad("extrapolation_order needs order + 1 epsilon values");
        }
        if !(self.extrapolation_tolerance > 0.0) {
            return bad("extrapolation_tolerance must be positive");
        }
        if self.cutoff.eval(0.0) != 1.0 {
            return bad("cutoff must equal one at the origin");
        }
        Ok(())
    }
}

/// Precomputed outer nodes τ_k and y-kernel values k(τ_k) = ∫ e^{−itτ}χ₁(t) dt.
#[derive(Debug, Clone)]
struct AxisRule {
    tau: Vec<f64>,
    weights: Vec<f64>,
    kernel: Vec<f64>,
    cutoff: Cutoff,
    quadrature_error: f64,
}

impl AxisRule {
    fn new(cfg: &WarpConfig) -> Result<Self> {
        cfg.validate()?;
        let panels = cfg.quad_points / cfg.panel_order;
        let inner = CompositeRule::new(-cfg.quad_half_width, cfg.quad_half_width, panels, cfg.panel_order);
        let outer = CompositeRule::new(-cfg.window_half_width, cfg.window_half_width, panels, cfg.panel_order);
        let chi: Vec<f64> = inner.nodes.iter().map(|&t| cfg.cutoff.eval(t)).collect();
        let k = |sigma: f64| -> f64 {
            inner.nodes.iter().zip(&inner.weights).zip(&chi).map(|((t, w), c)| w * c * (t * sigma).cos()).sum()
        };
        let kernel: Vec<f64> = outer.nodes.iter().map(|&s| k(s)).collect();
        let k0 = k(0.0);
        let ratio = k(cfg.window_half_width).abs().max(k(-cfg.window_half_width).abs()) / k0.abs();
        if ratio > cfg.kernel_edge_limit {
            return Err(Error::QuadratureRange { ratio, limit: cfg.kernel_edge_limit });
        }
        let mass: f64 = outer.weights.iter().zip(&kernel).map(|(w, k)| w * k).sum();
        let quadrature_error = ratio + (mass / (2.0 * PI) - 1.0).abs();
        Ok(Self { tau: outer.nodes, weights: outer.weights, kernel, cutoff: cfg.cutoff, quadrature_error })
    }

    /// I_ε(a, q).
    fn integral(&self, eps: f64, a: f64, q: f64) -> C64 {
        let mut s = ComplexSum::default();
        for ((t, w), k) in self.tau.iter().zip(&self.weights).zip(&self.kernel) {
            let x = q + eps * t;
            let c = self.cutoff.eval(eps * x);
            s.add(C64::from_polar(w * k * c, x * a));
        }
        s.sum() / (2.0 * PI)
    }
}

/// Scalar factors keyed per axis by (a, q), deduplicated on exact bit patterns.
struct KeyTable {
    keys: Vec<Vec<(f64, f64)>>,
    index: Vec<HashMap<(u64, u64), u32>>,
}

impl KeyTable {
    fn new(dims: usize) -> Self {
        Self { keys: vec![Vec::new(); dims], index: vec![HashMap::new(); dims] }
    }

    fn insert(&mut self, axis: usize, a: f64, q: f64) -> u32 {
        let keys = &mut self.keys[axis];
        *self.index[axis].entry((a.to_bits(), q.to_bits())).or_insert_with(|| {
            keys.push((a, q));
            (keys.len() - 1) as u32
        })
    }

    fn evaluate(&self, rule: &AxisRule, eps: f64) -> Vec<Vec<C64>> {
        self.keys.iter().map(|ks| ks.par_iter().map(|&(a, q)| rule.integral(eps, a, q)).collect()).collect()
    }
}

/// Output of the oscillatory engine.
#[derive(Debug, Clone)]
pub struct WarpResult {
    pub state: GridState,
    pub epsilons: Vec<f64>,
    pub per_epsilon_states: Vec<GridState>,
    /// ‖result − last per-ε state‖.
    pub extrapolation_residual: f64,
    /// Relative change when the extrapolation order is lowered by one.
    pub extrapolation_estimate: f64,
    pub quadrature_estimate_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WarpRecord {
    pub epsilons: Vec<f64>,
    pub per_epsilon_norms: Vec<f64>,
    pub per_epsilon_residuals: Vec<f64>,
    pub result_norm: f64,
    pub extrapolation_residual: f64,
    pub extrapolation_estimate: f64,
    pub quadrature_estimate_error: f64,
}

impl WarpResult {
    pub fn record(&self) -> WarpRecord {
        WarpRecord {
            epsilons: self.epsilons.clone(),
            per_epsilon_norms: self.per_epsilon_states.iter().map(|s| s.norm()).collect(),
            per_epsilon_residuals: self
                .per_epsilon_states
                .iter()
                .map(|s| s.distance(&self.state).unwrap_or(f64::NAN))
                .collect(),
            result_norm: self.state.norm(),
            extrapolation_residual: self.extrapolation_residual,
            extrapolation_estimate: self.extrapolation_estimate,
            quadrature_estimate_error: self.quadrature_estimate_error,
        }
    }
}

fn check_inputs(space: &GridSpace, q: &Generator, skew: &SkewMatrix, phi: &GridState) -> Result<()> {
    if *q.space != *space || *phi.space != *space {
        return Err(Error::SpaceMismatch);
    }
    if skew.dim != space.dims {
        return Err(Error::DimensionMismatch { expected: space.dims, found: skew.dim });
    }
    Ok(())
}

/// Richardson extrapolation in ε² of per-ε vectors; returns (limit, relative estimate).
fn extrapolate(eps: &[f64], values: &[Vec<C64>], order: usize) -> (Vec<C64>, f64) {
    let k = eps.len();
    let h: Vec<f64> = eps.iter().map(|e| e * e).collect();
    let n = values[0].len();
    let hi = &h[k - order - 1..];
    let lo = &h[k - order..];
    let mut limit = vec![ZERO; n];
    let mut diff2 = 0.0;
    let mut norm2 = 0.0;
    let mut buf = vec![ZERO; order + 1];
    for i in 0..n {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = values[k - order - 1 + j][i];
        }
        let a = neville_at_zero(hi, &buf);
        let b = if order == 0 { buf[order] } else { neville_at_zero(lo, &buf[1..]) };
        limit[i] = a;
        diff2 += (a - b).norm_sqr();
        norm2 += a.norm_sqr();
    }
    let est = if norm2 > 0.0 { (diff2 / norm2).sqrt() } else { diff2.sqrt() };
    (limit, est)
}

fn finish(
    space: &Arc<GridSpace>,
    cfg: &WarpConfig,
    per_eps: Vec<Vec<C64>>,
    quadrature_error: f64,
) -> Result<WarpResult> {
    let (limit, estimate) = extrapolate(&cfg.epsilon_schedule, &per_eps, cfg.extrapolation_order);
    let per_epsilon_states: Vec<GridState> =
        per_eps.into_iter().map(|a| GridState { space: space.clone(), amplitudes: a }).collect();
    let state = GridState { space: space.clone(), amplitudes: limit };
    if !(estimate <= cfg.extrapolation_tolerance) {
        return Err(Error::NonConvergent {
            estimate,
            tolerance: cfg.extrapolation_tolerance,
            per_epsilon_norms: per_epsilon_states.iter().map(|s| s.norm()).collect(),
        });
    }
    let extrapolation_residual = state.distance(per_epsilon_states.last().expect("nonempty schedule"))?;
    Ok(WarpResult {
        state,
        epsilons: cfg.epsilon_schedule.clone(),
        per_epsilon_states,
        extrapolation_residual,
        extrapolation_estimate: estimate,
        quadrature_estimate_error: quadrature_error,
    })
}

/// (2π)⁻ⁿ lim_{ε→0} ∬ dx dy e^{−ixy} χ(εx, εy) V(y) α_{Bx}(A) Φ.
pub fn warp_oscillatory(
    a: &GridOperator,
    q: &Generator,
    skew: &SkewMatrix,
    phi: &GridState,
    cfg: &WarpConfig,
) -> Result<WarpResult> {
    let space = a.space.clone();
    check_inputs(&space, q, skew, phi)?;
    let rule = AxisRule::new(cfg)?;
    let aphi = a.apply(phi)?;
    let tail = aphi.tail_mass();
    if tail > 1e-6 {
        return Err(Error::TailMass { tail, limit: 1e-6 });
    }
    let rows = a.rows(cfg.dense_limit)?;
    let dims = space.dims;

    // α_{Bx}(A)(u, v) = e^{ix·Bᵀ(Q(u) − Q(v))} A(u, v); V(y) contributes e^{iy·Q(u)}.
    let mut table = KeyTable::new(dims);
    let mut pairs: Vec<(u32, C64, Vec<u32>)> = Vec::new();
    let mut d = vec![0.0; dims];
    let mut bd = vec![0.0; dims];
    for (u, row) in rows.iter().enumerate() {
        let qu = q.component(u);
        for &(v, val) in row {
            let qv = q.component(v as usize);
            for i in 0..dims {
                d[i] = qu[i] - qv[i];
            }
            skew.apply_transpose(&d, &mut bd);
            let keys = (0..dims).map(|i| table.insert(i, bd[i], qu[i])).collect();
            pairs.push((v, val * phi.amplitudes[v as usize], keys));
        }
    }
    let row_starts: Vec<usize> = std::iter::once(0)
        .chain(rows.iter().scan(0, |s, r| {
            *s += r.len();
            Some(*s)
        }))
        .collect();

    let mut per_eps = Vec::with_capacity(cfg.epsilon_schedule.len());
    for &eps in &cfg.epsilon_schedule {
        let factors = table.evaluate(&rule, eps);
        let out: Vec<C64> = (0..space.len())
            .into_par_iter()
            .map(|u| {
                let mut s = ComplexSum::default();
                for (_, w, keys) in &pairs[row_starts[u]..row_starts[u + 1]] {
                    let mut f = *w;
                    for (i, k) in keys.iter().enumerate() {
                        f *= factors[i][*k as usize];
                    }
                    s.add(f);
                }
                s.sum()
            })
            .collect();
        per_eps.push(out);
    }
    finish(&space, cfg, per_eps, rule.quadrature_error)
}

/// Fiberwise evaluation (A_B Φ)(x) = (α_{B·Q(x)}(A) Φ)(x).
///
/// Operators with a local decomposition are evaluated row by row; any other operator
/// falls back to grouping nodes by the exact value of Q(x).
pub fn warp_spectral(a: &GridOperator, q: &Generator, skew: &SkewMatrix, phi: &GridState) -> Result<GridState> {
    let space = a.space.clone();
    check_inputs(&space, q, skew, phi)?;
    if skew.is_zero() || a.position_diagonal().is_some() {
        return a.apply(phi);
    }
    match a.local_terms() {
        Some(terms) if terms.iter().all(|t| !matches!(t.kernel, Kernel::Circulant(_))) => {
            Ok(fiberwise_local(a, q, skew, phi, &terms))
        }
        _ => warp_spectral_grouped(a, q, skew, phi),
    }
}

fn fiberwise_local(
    a: &GridOperator,
    q: &Generator,
    skew: &SkewMatrix,
    phi: &GridState,
    terms: &[crate::operator::LocalTerm],
) -> GridState {
    let space = &a.space;
    let dims = space.dims;
    let amplitudes = (0..space.len())
        .into_par_iter()
        .map(|u| {
            let qu = q.component(u);
            let mut z = vec![0.0; dims];
            skew.apply(qu, &mut z);
            let zu: f64 = z.iter().zip(qu).map(|(a, b)| a * b).sum();
            let mut total = ComplexSum::default();
            for t in terms {
                let l = t.coeff * t.left.as_ref().map_or(ONE, |v| v[u]);
                let mut s = ComplexSum::default();
                for_kernel_row(space, &t.kernel, u, |v, k| {
                    if k == ZERO {
                        return;
                    }
                    let qv = q.component(v);
                    let zv: f64 = z.iter().zip(qv).map(|(a, b)| a * b).sum();
                    let r = t.right.as_ref().map_or(ONE, |w| w[v]);
                    s.add(k * C64::from_polar(1.0, zu - zv) * r * phi.amplitudes[v]);
                });
                total.add(l * s.sum());
            }
            total.sum()
        })
        .collect();
    GridState { space: phi.space.clone(), amplitudes }
}

/// Fiberwise evaluation by grouping nodes on the exact value of Q(x).
pub fn warp_spectral_grouped(a: &GridOperator, q: &Generator, skew: &SkewMatrix, phi: &GridState) -> Result<GridState> {
    let space = a.space.clone();
    check_inputs(&space, q, skew, phi)?;
    let dims = space.dims;
    let mut groups: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    let mut order: Vec<Vec<u64>> = Vec::new();
    for u in 0..space.len() {
        let key: Vec<u64> = q.component(u).iter().map(|c| c.to_bits()).collect();
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(u);
    }
    let parts: Vec<Vec<(usize, C64)>> = order
        .par_iter()
        .map(|key| {
            let nodes = &groups[key];
            let qu = q.component(nodes[0]);
            let mut z = vec![0.0; dims];
            skew.apply(qu, &mut z);
            let minus: Vec<f64> = z.iter().map(|c| -c).collect();
            let conj = crate::grid::unitary_v(q, &minus, phi)
                .and_then(|s| a.apply(&s))
                .and_then(|s| crate::grid::unitary_v(q, &z, &s))
                .expect("inputs validated");
            nodes.iter().map(|&u| (u, conj.amplitudes[u])).collect()
        })
        .collect();
    let mut out = GridState::zeros(&space);
    for part in parts {
        for (u, v) in part {
            out.amplitudes[u] = v;
        }
    }
    Ok(out)
}

/// |⟨Ψ, A_B Φ⟩ − ⟨(A*)_B Ψ, Φ⟩|.
pub fn adjoint_consistency(
    a: &GridOperator,
    q: &Generator,
    skew: &SkewMatrix,
    psi: &GridState,
    phi: &GridState,
) -> Result<f64> {
    let left = psi.inner(&warp_spectral(a, q, skew, phi)?)?;
    let right = warp_spectral(&a.adjoint(), q, skew, psi)?.inner(phi)?;
    Ok((left - right).norm())
}

/// Extrapolated matrix of A ×_θ B in the position basis.
#[derive(Debug, Clone)]
pub struct RieffelMatrix {
    pub space: Arc<GridSpace>,
    pub entries: Vec<C64>,
    pub extrapolation_estimate: f64,
    pub quadrature_estimate_error: f64,
}

impl RieffelMatrix {
    pub fn apply(&self, phi: &GridState) -> Result<GridState> {
        if *phi.space != *self.space {
            return Err(Error::SpaceMismatch);
        }
        let n = self.space.len();
        let amplitudes = (0..n)
            .map(|u| {
                let mut s = ComplexSum::default();
                for w in 0..n {
                    s.add(self.entries[u * n + w] * phi.amplitudes[w]);
                }
                s.sum()
            })
            .collect();
        Ok(GridState { space: phi.space.clone(), amplitudes })
    }

    /// (C_θ Φ)(u) = Σ_w e^{iθQ(u)·(Q(u) − Q(w))} C(u, w) Φ(w).
    pub fn warp_apply(&self, q: &Generator, theta: &SkewMatrix, phi: &GridState) -> Result<GridState> {
        check_inputs(&self.space, q, theta, phi)?;
        let n = self.space.len();
        let dims = self.space.dims;
        let amplitudes = (0..n)
            .map(|u| {
                let qu = q.component(u);
                let mut z = vec![0.0; dims];
                theta.apply(qu, &mut z);
                let zu: f64 = z.iter().zip(qu).map(|(a, b)| a * b).sum();
                let mut s = ComplexSum::default();
                for w in 0..n {
                    let c = self.entries[u * n + w];
                    if c == ZERO {
                        continue;
                    }
                    let zw: f64 = z.iter().zip(q.component(w)).map(|(a, b)| a * b).sum();
                    s.add(c * C64::from_polar(1.0, zu - zw) * phi.amplitudes[w]);
                }
                s.sum()
            })
            .collect();
        Ok(GridState { space: phi.space.clone(), amplitudes })
    }
}

/// Matrix of (2π)⁻ⁿ lim ∬ dx dy χ(εx, εy) e^{−ixy} α_{θx}(A) α_y(B).
pub fn rieffel_matrix(
    a: &GridOperator,
    b: &GridOperator,
    q: &Generator,
    theta: &SkewMatrix,
    cfg: &WarpConfig,
) -> Result<RieffelMatrix> {
    let space = a.space.clone();
    if *b.space != *space {
        return Err(Error::SpaceMismatch);
    }
    check_inputs(&space, q, theta, &GridState::zeros(&space))?;
    let n = space.len();
    if n > cfg.dense_limit {
        return Err(Error::TooLarge { nodes: n, limit: cfg.dense_limit });
    }
    let rule = AxisRule::new(cfg)?;
    let rows_a = a.rows(cfg.dense_limit)?;
    let rows_b = b.rows(cfg.dense_limit)?;
    let dims = space.dims;

    // Entry (u, w) collects A(u, v) B(v, w) e^{ix·θᵀ(Q(u) − Q(v))} e^{iy·(Q(v) − Q(w))}.
    let mut table = KeyTable::new(dims);
    let mut triples: Vec<(u32, u32, C64, Vec<u32>)> = Vec::new();
    let mut d1 = vec![0.0; dims];
    let mut td = vec![0.0; dims];
    for (u, row) in rows_a.iter().enumerate() {
        let qu = q.component(u);
        for &(v, av) in row {
            let qv = q.component(v as usize);
            for i in 0..dims {
                d1[i] = qu[i] - qv[i];
            }
            theta.apply_transpose(&d1, &mut td);
            for &(w, bv) in &rows_b[v as usize] {
                let qw = q.component(w as usize);
                let keys = (0..dims).map(|i| table.insert(i, td[i], qv[i] - qw[i])).collect();
                triples.push((u as u32, w, av * bv, keys));
            }
        }
    }
    let mut per_eps: Vec<Vec<C64>> = Vec::new();
    for &eps in &cfg.epsilon_schedule {
        let factors = table.evaluate(&rule, eps);
        let mut acc = vec![ComplexSum::default(); n * n];
        for (u, w, val, keys) in &triples {
            let mut f = *val;
            for (i, k) in keys.iter().enumerate() {
                f *= factors[i][*k as usize];
            }
            acc[*u as usize * n + *w as usize].add(f);
        }
        per_eps.push(acc.iter().map(|s| s.sum()).collect());
    }
    let (entries, estimate) = extrapolate(&cfg.epsilon_schedule, &per_eps, cfg.extrapolation_order);
    if !(estimate <= cfg.extrapolation_tolerance) {
        return Err(Error::NonConvergent {
            estimate,
            tolerance: cfg.extrapolation_tolerance,
            per_epsilon_norms: per_eps.iter().map(|m| m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()).collect(),
        });
    }
    Ok(RieffelMatrix {
        space,
        entries,
        extrapolation_estimate: estimate,
        quadrature_estimate_error: rule.quadrature_error,
    })
}

/// (A ×_θ B) Φ.
pub fn rieffel_product(
    a: &GridOperator,
    b: &GridOperator,
    q: &Generator,
    theta: &SkewMatrix,
    phi: &GridState,
    cfg: &WarpConfig,
) -> Result<GridState> {
    rieffel_matrix(a, b, q, theta, cfg)?.apply(phi)
}

/// ‖A_θ B_θ Φ − (A ×_θ B)_θ Φ‖ / ‖A_θ B_θ Φ‖.
pub fn rieffel_consistency(
    a: &GridOperator,
    b: &GridOperator,
    q: &Generator,
    theta: &SkewMatrix,
    phi: &GridState,
    cfg: &WarpConfig,
) -> Result<f64> {
    let lhs = warp_spectral(a, q, theta, &warp_spectral(b, q, theta, phi)?)?;
    let rhs = rieffel_matrix(a, b, q, theta, cfg)?.warp_apply(q, theta, phi)?;
    rhs.relative_distance(&lhs)
}

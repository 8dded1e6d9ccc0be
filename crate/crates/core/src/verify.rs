//! Symbol-class decay estimates, phase-function checks, symmetry residuals and the
//! bound inequalities with a = 1.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{wust_from_norms, BoundFit, BoundSample};
use crate::error::{Error, Result};
use crate::fock::{FockOperator, FockState};
use crate::grid::{unitary_v, Generator, GridState, SkewMatrix, C64};
use crate::linalg::SpectrumSummary;
use crate::operator::GridOperator;

/// Vectors with an inner product, so the checks below serve grid and Fock states alike.
pub trait Vector: Clone {
    fn inner_product(&self, other: &Self) -> Result<C64>;
    fn length(&self) -> f64;
}

impl Vector for GridState {
    fn inner_product(&self, other: &Self) -> Result<C64> {
        self.inner(other)
    }

    fn length(&self) -> f64 {
        self.norm()
    }
}

impl Vector for FockState {
    fn inner_product(&self, other: &Self) -> Result<C64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(Error::DimensionMismatch { expected: self.amplitudes.len(), found: other.amplitudes.len() });
        }
        Ok(self.inner(other))
    }

    fn length(&self) -> f64 {
        self.norm()
    }
}

/// Conditions on φ(x, y) = −x·y over sampled cone points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCheck {
    /// max |φ(x, ty) − tφ(x, y)| with t a power of two, so the scaling is exact.
    pub homogeneity_residual: f64,
    pub imaginary_part_min: f64,
    /// min |dφ| = min |(−y, −x)|.
    pub differential_min: f64,
    pub samples: usize,
}

impl PhaseCheck {
    pub fn passes(&self) -> bool {
        self.homogeneity_residual == 0.0 && self.imaginary_part_min >= 0.0 && self.differential_min > 0.0
    }
}

fn phase(x: &[f64], y: &[f64]) -> f64 {
    -x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
}

pub fn phase_check(dims: usize, samples: usize, seed: u64) -> PhaseCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hom: f64 = 0.0;
    let mut dmin = f64::INFINITY;
    for _ in 0..samples {
        let x: Vec<f64> = (0..dims).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..dims).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let t = 2f64.powi(rng.gen_range(-20..=20));
        let ty: Vec<f64> = y.iter().map(|v| t * v).collect();
        hom = hom.max((phase(&x, &ty) - t * phase(&x, &y)).abs());
        let d: f64 = x.iter().chain(&y).map(|v| v * v).sum::<f64>().sqrt();
        dmin = dmin.min(d);
    }
    // φ is real-valued, so Im φ vanishes identically.
    PhaseCheck { homogeneity_residual: hom, imaginary_part_min: 0.0, differential_min: dmin, samples }
}

/// Norms of ∂_x^γ α_{θx}(A)Φ along one direction, one series per multi-index γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSeries {
    pub gamma: Vec<usize>,
    /// (|x|, norm)
    pub samples: Vec<(f64, f64)>,
}

impl GammaSeries {
    pub fn order(&self) -> usize {
        self.gamma.iter().sum()
    }
}

/// Log-spaced radii over [r_min, r_max].
pub fn log_radii(r_min: f64, r_max: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![r_min];
    }
    let (a, b) = (r_min.ln(), r_max.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// α_{θx}(A)Φ = V(θx) A V(θx)⁻¹ Φ.
pub fn adjoint_action(
    a: &GridOperator,
    q: &Generator,
    theta: &SkewMatrix,
    x: &[f64],
    phi: &GridState,
) -> Result<GridState> {
    let mut z = vec![0.0; x.len()];
    theta.apply(x, &mut z);
    let minus: Vec<f64> = z.iter().map(|v| -v).collect();
    unitary_v(q, &z, &a.apply(&unitary_v(q, &minus, phi)?)?)
}

fn stencil(order: usize, h: f64) -> Result<Vec<(f64, f64)>> {
    Ok(match order {
        0 => vec![(0.0, 1.0)],
        1 => vec![(-1.0, -0.5 / h), (1.0, 0.5 / h)],
        2 => vec![(-1.0, 1.0 / (h * h)), (0.0, -2.0 / (h * h)), (1.0, 1.0 / (h * h))],
        _ => return Err(Error::InvalidArgument(format!("derivative order {order} per axis is not supported"))),
    })
}

const MIN_STEP: f64 = 1e-6;

/// Samples ‖∂_x^γ α_{θx}(A)Φ‖ at x = r·direction for each radius. Derivatives are central
/// differences with step a quarter of the smallest radius gap, capped at 1e−2(1 + r).
pub fn sample_decay(
    a: &GridOperator,
    q: &Generator,
    theta: &SkewMatrix,
    phi: &GridState,
    gamma: &[usize],
    radii: &[f64],
    direction: &[f64],
) -> Result<GammaSeries> {
    let n = q.space.dims;
    if gamma.len() != n || direction.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: gamma.len().min(direction.len()) });
    }
    let dn: f64 = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(dn > 0.0) {
        return Err(Error::InvalidArgument("direction must be nonzero".into()));
    }
    let dir: Vec<f64> = direction.iter().map(|v| v / dn).collect();
    let gap = radii.windows(2).map(|w| (w[1] - w[0]).abs()).fold(f64::INFINITY, f64::min);
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let h = (0.25 * gap).min(1e-2 * (1.0 + r));
        if gamma.iter().any(|&g| g > 0) && !(h >= MIN_STEP) {
            return Err(Error::StepUnderflow(r));
        }
        let stencils: Vec<Vec<(f64, f64)>> = gamma.iter().map(|&g| stencil(g, h)).collect::<Result<_>>()?;
        let mut acc = GridState::zeros(&q.space);
        let mut idx = vec![0usize; n];
        loop {
            let mut x: Vec<f64> = dir.iter().map(|d| r * d).collect();
            let mut w = 1.0;
            for i in 0..n {
                let (off, c) = stencils[i][idx[i]];
                x[i] += off * h;
                w *= c;
            }
            acc.axpy(C64::new(w, 0.0), &adjoint_action(a, q, theta, &x, phi)?)?;
            let mut i = 0;
            while i < n {
                idx[i] += 1;
                if idx[i] < stencils[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
        }
        out.push((r, acc.norm()));
    }
    Ok(GammaSeries { gamma: gamma.to_vec(), samples: out })
}

/// Empirical symbol estimate ‖∂^γ …‖ ≤ C_γ(1 + |x|)^{m − ρ|γ|}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolFit {
    pub m: f64,
    pub rho: f64,
    /// Keyed by the multi-index written as comma-separated entries.
    pub constants: BTreeMap<String, f64>,
    /// RMS of the per-series log-log regressions.
    pub residual: f64,
    pub gamma_max: usize,
    /// "convergent" when m < −n + 1, otherwise "oscillatory".
    pub class: String,
    /// Some series is not monotone in |x|.
    pub non_monotone: bool,
}

impl SymbolFit {
    pub fn bound(&self, gamma: &[usize], r: f64) -> Option<f64> {
        let c = self.constants.get(&gamma_key(gamma))?;
        let k: usize = gamma.iter().sum();
        Some(c * (1.0 + r).powf(self.m - self.rho * k as f64))
    }
}

pub fn gamma_key(gamma: &[usize]) -> String {
    gamma.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(",")
}

fn regress(samples: &[(f64, f64)]) -> (f64, f64, f64) {
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(r, y)| ((1.0 + r).ln(), y.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let ss: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    (slope, icpt, ss)
}

pub const MIN_RADII: usize = 8;

/// Least-squares fit of log‖·‖ against log(1 + |x|) per series; m from the γ = 0 slope and
/// ρ from the mean slope decrement per derivative order.
pub fn fit_symbol_order(series: &[GammaSeries], dims: usize) -> Result<SymbolFit> {
    let base = series
        .iter()
        .find(|s| s.order() == 0)
        .ok_or_else(|| Error::InsufficientSamples("a γ = 0 series is required".into()))?;
    if !series.iter().any(|s| s.order() == 1) {
        return Err(Error::InsufficientSamples("a |γ| = 1 series is required".into()));
    }
    for s in series {
        if s.samples.len() < MIN_RADII {
            return Err(Error::InsufficientSamples(format!(
                "series γ = ({}) has {} radii, need {MIN_RADII}",
                gamma_key(&s.gamma),
                s.samples.len()
            )));
        }
        if s.samples.iter().any(|&(r, y)| !(y > 0.0) || !(r >= 0.0)) {
            return Err(Error::InsufficientSamples(format!(
                "series γ = ({}) has a nonpositive norm",
                gamma_key(&s.gamma)
            )));
        }
    }
    let fits: Vec<(f64, f64, f64)> = series.iter().map(|s| regress(&s.samples)).collect();
    let m = regress(&base.samples).0;
    let decrements: Vec<f64> =
        series.iter().zip(&fits).filter(|(s, _)| s.order() > 0).map(|(s, f)| (m - f.0) / s.order() as f64).collect();
    let rho = (decrements.iter().sum::<f64>() / decrements.len() as f64).clamp(f64::EPSILON, 1.0);
    let total: usize = series.iter().map(|s| s.samples.len()).sum();
    let residual = (fits.iter().map(|f| f.2).sum::<f64>() / total as f64).sqrt();
    let mut constants = BTreeMap::new();
    for s in series {
        let e = m - rho * s.order() as f64;
        let c = s.samples.iter().map(|&(r, y)| y / (1.0 + r).powf(e)).fold(0.0, f64::max);
        constants.insert(gamma_key(&s.gamma), c);
    }
    let non_monotone = series.iter().any(|s| {
        let inc = s.samples.windows(2).all(|w| w[1].1 >= w[0].1);
        let dec = s.samples.windows(2).all(|w| w[1].1 <= w[0].1);
        !(inc || dec)
    });
    let class = if m < 1.0 - dims as f64 { "convergent" } else { "oscillatory" }.to_string();
    Ok(SymbolFit {
        m,
        rho,
        constants,
        residual,
        gamma_max: series.iter().map(|s| s.order()).max().unwrap_or(0),
        class,
        non_monotone,
    })
}

/// Result of fitting on 80% of the radii and testing the bound on the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutCheck {
    pub fit: SymbolFit,
    /// max over held-out samples of observed/bound.
    pub worst_ratio: f64,
    pub slack: f64,
    pub passed: bool,
}

/// Holds out every fifth radius of each series (20%) and checks the fitted bound there.
pub fn symbol_holdout_check(series: &[GammaSeries], dims: usize, slack: f64) -> Result<HoldoutCheck> {
    let mut train = Vec::new();
    let mut held = Vec::new();
    for s in series {
        let (mut t, mut h) = (Vec::new(), Vec::new());
        for (i, p) in s.samples.iter().enumerate() {
            if i % 5 == 2 {
                h.push(*p);
            } else {
                t.push(*p);
            }
        }
        train.push(GammaSeries { gamma: s.gamma.clone(), samples: t });
        held.push(GammaSeries { gamma: s.gamma.clone(), samples: h });
    }
    let fit = fit_symbol_order(&train, dims)?;
    let mut worst: f64 = 0.0;
    for s in &held {
        for &(r, y) in &s.samples {
            let b = fit.bound(&s.gamma, r).expect("same multi-indices");
            worst = worst.max(y / b);
        }
    }
    Ok(HoldoutCheck { fit, worst_ratio: worst, slack, passed: worst <= 1.0 + slack })
}

/// max over pairs of |⟨Ψ, AΦ⟩ − ⟨AΨ, Φ⟩| / (‖Ψ‖‖Φ‖).
pub fn hermiticity_residual<V: Vector>(apply: impl Fn(&V) -> Result<V>, pairs: &[(V, V)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (psi, phi) in pairs {
        let l = psi.inner_product(&apply(phi)?)?;
        let r = apply(psi)?.inner_product(phi)?;
        let s = psi.length() * phi.length();
        if s > 0.0 {
            worst = worst.max((l - r).norm() / s);
        }
    }
    Ok(worst)
}

/// Consecutive pairs (s_i, s_{i+1}).
pub fn consecutive_pairs<V: Vector>(samples: &[V]) -> Vec<(V, V)> {
    samples.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect()
}

pub const SELF_ADJOINT_TOLERANCE: f64 = 1e-8;

/// Checks ‖(A_θ − A)Φ‖ ≤ ‖AΦ‖ + b‖Φ‖ with minimal b.
pub fn wust_inequality_check<V: Vector>(
    a: impl Fn(&V) -> Result<V>,
    a_theta: impl Fn(&V) -> Result<V>,
    samples: &[V],
    b_cap: f64,
    sub: impl Fn(&V, &V) -> Result<V>,
) -> Result<BoundFit> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let h = hermiticity_residual(&a, &consecutive_pairs(samples))?;
    if h > SELF_ADJOINT_TOLERANCE {
        return Err(Error::NotHermitian(h));
    }
    let norms = samples
        .iter()
        .map(|s| {
            let base = a(s)?;
            let diff = sub(&a_theta(s)?, &base)?;
            Ok(BoundSample { perturbation: diff.length(), reference: base.length(), state: s.length() })
        })
        .collect::<Result<Vec<_>>>()?;
    wust_from_norms(&norms, b_cap)
}

pub fn grid_sub(a: &GridState, b: &GridState) -> Result<GridState> {
    a.sub(b)
}

pub fn fock_sub(a: &FockState, b: &FockState) -> Result<FockState> {
    Ok(a.sub(b))
}

pub fn fock_apply(op: &FockOperator) -> impl Fn(&FockState) -> Result<FockState> + '_ {
    move |s| Ok(op.apply(s))
}

/// Self-adjointness evidence gathered for one operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dossier {
    pub operator: String,
    pub hermiticity_residual: f64,
    pub spectrum: Option<SpectrumSummary>,
    pub bound: Option<BoundFit>,
    pub symbol: Option<SymbolFit>,
}

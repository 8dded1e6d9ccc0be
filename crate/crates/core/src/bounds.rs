//! Relative-bound fitting: ‖VΦ‖ ≤ a‖HΦ‖ + b‖Φ‖ over a finite probe set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms of one probe: ‖VΦ‖, ‖HΦ‖, ‖Φ‖.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSample {
    pub perturbation: f64,
    pub reference: f64,
    pub state: f64,
}

impl BoundSample {
    fn ratios(&self) -> (f64, f64) {
        (self.perturbation / self.state, self.reference / self.state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundFit {
    pub a: f64,
    pub b: f64,
    pub b_cap: f64,
    pub samples: Vec<BoundSample>,
    /// Indices excluded because ‖HΦ‖ vanishes.
    pub degenerate: Vec<usize>,
    /// max_i (r_i − a e_i − b); nonpositive up to rounding.
    pub max_violation: f64,
    pub feasible: bool,
}

const DEGENERATE: f64 = 1e-12;

/// (‖VΦ‖/‖Φ‖, ‖HΦ‖/‖Φ‖) of the usable samples, and the indices of the degenerate ones.
type Usable = (Vec<(f64, f64)>, Vec<usize>);

fn usable(samples: &[BoundSample]) -> Result<Usable> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut pts = Vec::new();
    let mut degenerate = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        if !(s.state > 0.0) || s.reference <= DEGENERATE * s.state {
            degenerate.push(i);
        } else {
            pts.push(s.ratios());
        }
    }
    if pts.is_empty() {
        return Err(Error::AllSamplesDegenerate);
    }
    Ok((pts, degenerate))
}

fn slope_at(pts: &[(f64, f64)], b: f64) -> f64 {
    pts.iter().map(|&(r, e)| (r - b) / e).fold(0.0, f64::max)
}

fn violation(samples: &[BoundSample], a: f64, b: f64) -> f64 {
    samples
        .iter()
        .filter(|s| s.state > 0.0)
        .map(|s| {
            let (r, e) = s.ratios();
            r - a * e - b
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Fits (a, b) minimizing a·e_max + b over 0 ≤ b ≤ b_cap, where a(b) is the least slope
/// covering every non-degenerate sample; ties go to the smaller b.
///
/// The objective is convex and piecewise linear in b, so it is minimized at a breakpoint.
pub fn fit_from_norms(samples: &[BoundSample], b_cap: f64) -> Result<BoundFit> {
    if !(b_cap > 0.0) {
        return Err(Error::InvalidArgument(format!("b_cap must be positive, got {b_cap}")));
    }
    let (pts, degenerate) = usable(samples)?;
    let e_max = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut cands = vec![0.0, b_cap];
    for (i, &(ri, ei)) in pts.iter().enumerate() {
        cands.push(ri);
        for &(rk, ek) in &pts[i + 1..] {
            if ek != ei {
                cands.push((ri * ek - rk * ei) / (ek - ei));
            }
        }
    }
    cands.retain(|b| b.is_finite() && *b >= 0.0 && *b <= b_cap);
    cands.sort_by(|x, y| x.total_cmp(y));
    cands.dedup();
    let mut best: Option<(f64, f64, f64)> = None;
    for &b in &cands {
        let a = slope_at(&pts, b);
        let f = a * e_max + b;
        if best.is_none_or(|(g, _, _)| f < g - 1e-12 * g.abs()) {
            best = Some((f, a, b));
        }
    }
    let (_, a, b) = best.expect("b = 0 is always a candidate");
    Ok(BoundFit {
        a,
        b,
        b_cap,
        samples: samples.to_vec(),
        degenerate,
        max_violation: violation(samples, a, b),
        feasible: a < 1.0,
    })
}

/// Minimal b with a fixed at one: b = max(0, max_i (r_i − e_i)).
pub fn wust_from_norms(samples: &[BoundSample], b_cap: f64) -> Result<BoundFit> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut b: f64 = 0.0;
    let mut worst = 0;
    for (i, s) in samples.iter().enumerate() {
        if !(s.state > 0.0) {
            continue;
        }
        let (r, e) = s.ratios();
        if r - e > b {
            b = r - e;
            worst = i;
        }
    }
    if b > b_cap {
        return Err(Error::Infeasible { index: worst, required: b, b_cap });
    }
    Ok(BoundFit {
        a: 1.0,
        b,
        b_cap,
        samples: samples.to_vec(),
        degenerate: Vec::new(),
        max_violation: violation(samples, 1.0, b),
        feasible: true,
    })
}

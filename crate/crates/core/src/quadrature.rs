//! Gauss-Legendre rules, polynomial extrapolation and compensated summation.

use std::f64::consts::PI;

use crate::grid::C64;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite rule on [a, b]: `panels` equal panels of `order`-point Gauss-Legendre.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * width;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + 0.5 * width * xi);
                weights.push(0.5 * width * wi);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut s = Neumaier::default();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s.add(w * f(*x));
        }
        s.sum()
    }
}

/// Neumaier-compensated real sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct Neumaier {
    s: f64,
    c: f64,
}

impl Neumaier {
    pub fn add(&mut self, v: f64) {
        let t = self.s + v;
        if self.s.abs() >= v.abs() {
            self.c += (self.s - t) + v;
        } else {
            self.c += (v - t) + self.s;
        }
        self.s = t;
    }

    pub fn sum(&self) -> f64 {
        self.s + self.c
    }
}

/// Compensated complex sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct ComplexSum {
    re: Neumaier,
    im: Neumaier,
}

impl ComplexSum {
    pub fn add(&mut self, v: C64) {
        self.re.add(v.re);
        self.im.add(v.im);
    }

    pub fn sum(&self) -> C64 {
        C64::new(self.re.sum(), self.im.sum())
    }
}

/// Value at h = 0 of the polynomial through (h_i, f_i), by Neville's scheme.
pub fn neville_at_zero(h: &[f64], f: &[C64]) -> C64 {
    let mut p = f.to_vec();
    let n = h.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (h[i + k] * p[i] - h[i] * p[i + 1]) / (h[i + k] - h[i]);
        }
    }
    p[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        for n in [1, 2, 5, 8, 16, 33] {
            let (x, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 2;
            let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((m - 2.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn composite_gaussian_integral() {
        let r = CompositeRule::new(-8.0, 8.0, 16, 8);
        let v = r.integrate(|x| (-0.5 * x * x).exp());
        assert!((v - (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn neville_recovers_polynomial_limit() {
        let h = [0.25, 0.0625, 0.015625];
        let f: Vec<C64> = h.iter().map(|&t| C64::new(3.0 + 2.0 * t - 5.0 * t * t, -1.0 + t)).collect();
        let v = neville_at_zero(&h, &f);
        assert!((v - C64::new(3.0, -1.0)).norm() < 1e-13);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = Neumaier::default();
        s.add(1.0);
        s.add(1e100);
        s.add(1.0);
        s.add(-1e100);
        assert_eq!(s.sum(), 2.0);
    }
}

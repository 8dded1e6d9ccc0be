//! Small dense eigenvalue helpers built on nalgebra.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridState, C64};

/// Eigenvalue summary of a finite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub count: usize,
    pub max_imag: f64,
    pub min_real: f64,
    pub max_real: f64,
    /// max |M_ij − conj(M_ji)|.
    pub hermitian_defect: f64,
}

impl SpectrumSummary {
    fn empty() -> Self {
        Self { count: 0, max_imag: 0.0, min_real: f64::INFINITY, max_real: f64::NEG_INFINITY, hermitian_defect: 0.0 }
    }

    fn merge(&mut self, other: &SpectrumSummary) {
        self.count += other.count;
        self.max_imag = self.max_imag.max(other.max_imag);
        self.min_real = self.min_real.min(other.min_real);
        self.max_real = self.max_real.max(other.max_real);
        self.hermitian_defect = self.hermitian_defect.max(other.hermitian_defect);
    }
}

/// Eigenvalues of a general complex matrix (row-major, n × n) via the complex Schur form.
pub fn eigenvalues(m: &[C64], n: usize) -> Result<Vec<C64>> {
    if m.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, found: m.len() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mat = DMatrix::from_row_slice(n, n, m);
    let schur = mat.schur();
    let ev =
        schur.eigenvalues().ok_or_else(|| Error::InvalidArgument("Schur decomposition did not converge".into()))?;
    Ok(ev.iter().copied().collect())
}

pub fn hermitian_defect(m: &[C64], n: usize) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            d = d.max((m[i * n + j] - m[j * n + i].conj()).norm());
        }
    }
    d
}

pub fn spectrum_summary(m: &[C64], n: usize) -> Result<SpectrumSummary> {
    let ev = eigenvalues(m, n)?;
    let mut s = SpectrumSummary::empty();
    s.count = n;
    for e in &ev {
        s.max_imag = s.max_imag.max(e.im.abs());
        s.min_real = s.min_real.min(e.re);
        s.max_real = s.max_real.max(e.re);
    }
    s.hermitian_defect = hermitian_defect(m, n);
    Ok(s)
}

/// Compression ⟨e_i, A e_j⟩ onto an orthonormalized span, given A applied to each basis vector.
///
/// With Gram matrix G = LL*, returns L⁻¹ H L⁻* where H_ij = ⟨b_i, A b_j⟩.
pub fn restricted_matrix(basis: &[GridState], images: &[GridState]) -> Result<Vec<C64>> {
    let n = basis.len();
    if images.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: images.len() });
    }
    let mut g = DMatrix::<C64>::zeros(n, n);
    let mut h = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = basis[i].inner(&basis[j])?;
            h[(i, j)] = basis[i].inner(&images[j])?;
        }
    }
    let chol = g.cholesky().ok_or_else(|| Error::InvalidArgument("basis is linearly dependent".into()))?;
    let l = chol.l();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::InvalidArgument("singular Gram factor".into()))?;
    let m = &linv * h * linv.adjoint();
    Ok((0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect())
}

/// Connected components of the sparsity graph of a square matrix given as rows.
pub fn connected_blocks(rows: &[Vec<(usize, C64)>]) -> Vec<Vec<usize>> {
    let n = rows.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, r) in rows.iter().enumerate() {
        for &(j, _) in r {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut map = std::collections::BTreeMap::<usize, Vec<usize>>::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        map.entry(root).or_default().push(i);
    }
    map.into_values().collect()
}

/// Spectrum summary of a sparse matrix computed block by block.
pub fn sparse_spectrum(rows: &[Vec<(usize, C64)>]) -> Result<SpectrumSummary> {
    let mut total = SpectrumSummary::empty();
    for block in connected_blocks(rows) {
        let k = block.len();
        let mut pos = std::collections::HashMap::with_capacity(k);
        for (p, &i) in block.iter().enumerate() {
            pos.insert(i, p);
        }
        let mut m = vec![C64::new(0.0, 0.0); k * k];
        for (p, &i) in block.iter().enumerate() {
            for &(j, v) in &rows[i] {
                m[p * k + pos[&j]] += v;
            }
        }
        total.merge(&spectrum_summary(&m, k)?);
    }
    Ok(total)
}

//! Complex SVD with deterministic conventions, per-RB eigen feature
//! extraction, and the SVD precoding/de-precoding algebra.
//!
//! The factorization is a one-sided Jacobi (Hestenes) iteration with a fixed
//! sweep order, a fixed convergence threshold, and a sign/phase convention
//! that makes the result unique when singular values are distinct: in each
//! column of U the entry of largest magnitude is rotated to be real and
//! positive, compensating the paired V column.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::ChannelRealization;
use crate::{Error, Result};

/// Off-diagonal threshold (relative) at which Jacobi sweeps stop.
const JACOBI_TOL: f64 = 1e-14;
/// Sweep cap; exceeding it is an error.
const MAX_SWEEPS: usize = 60;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(CMat { rows, cols, data })
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMat {
        let mut out = CMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.at(i, j).conj());
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::Shape(format!(
                "matrix is {}x{}, vector has length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Full SVD `m = u * diag_rect(s) * v^H` with the crate's deterministic
/// conventions. `u` is `rows x rows`, `v` is `cols x cols`, `s` has
/// `min(rows, cols)` descending non-negative entries.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

impl SvdResult {
    /// Reconstructs `u * diag_rect(s) * v^H`.
    pub fn reconstruct(&self) -> CMat {
        let (p, q) = (self.u.rows, self.v.rows);
        let k = self.s.len();
        let mut out = CMat::zeros(p, q);
        for i in 0..p {
            for j in 0..q {
                let mut acc = Complex64::new(0.0, 0.0);
                for (l, &sigma) in self.s.iter().enumerate().take(k) {
                    acc += self.u.at(i, l) * sigma * self.v.at(j, l).conj();
                }
                out.set(i, j, acc);
            }
        }
        out
    }
}

/// Per-RB eigen features: stacked left-singular matrices and singular-value
/// rows, the classifier input.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFeatures {
    /// Flat `n_rb x n_r x n_r` row-major complex tensor.
    pub u_stack: Vec<Complex64>,
    /// Flat `n_rb x n_r` row-major, each row descending non-negative.
    pub s_stack: Vec<f64>,
    pub n_rb: usize,
    pub n_r: usize,
    pub label: u8,
}

impl EigenFeatures {
    pub fn u_slice(&self, rb: usize) -> &[Complex64] {
        let len = self.n_r * self.n_r;
        &self.u_stack[rb * len..(rb + 1) * len]
    }

    pub fn s_slice(&self, rb: usize) -> &[f64] {
        &self.s_stack[rb * self.n_r..(rb + 1) * self.n_r]
    }
}

/// Column store used by the Jacobi iteration.
struct Cols(Vec<Vec<Complex64>>);

impl Cols {
    fn norms_sq(&self, i: usize) -> f64 {
        self.0[i].iter().map(|c| c.norm_sqr()).sum()
    }

    fn inner(&self, i: usize, j: usize) -> Complex64 {
        self.0[i].iter().zip(&self.0[j]).map(|(a, b)| a.conj() * b).sum()
    }

    /// Applies the plane rotation mixing columns i and j.
    fn rotate(&mut self, i: usize, j: usize, cs: f64, sn: f64, phase: Complex64) {
        let (a, b) = if i < j {
            let (lo, hi) = self.0.split_at_mut(j);
            (&mut lo[i], &mut hi[0])
        } else {
            unreachable!()
        };
        let e = phase; // e^{j phi}
        let e_conj = phase.conj();
        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
            let xi = *x;
            let yj = *y;
            *x = xi * cs - yj * e_conj * sn;
            *y = xi * (e * sn) + yj * cs;
        }
    }
}

/// One-sided Jacobi on an m x n column set (m >= n): orthogonalizes the
/// columns of `a`, accumulating the right transformations into `v` (n x n).
fn hestenes(a: &mut Cols, v: &mut Cols) -> Result<()> {
    let n = a.0.len();
    let mut last_off = 0.0;
    for _sweep in 0..MAX_SWEEPS {
        let mut off_max = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let aa = a.norms_sq(i);
                let bb = a.norms_sq(j);
                let denom = (aa * bb).sqrt();
                if denom <= 0.0 {
                    continue;
                }
                let c = a.inner(i, j);
                let abs_c = c.norm();
                let rel = abs_c / denom;
                if rel > off_max {
                    off_max = rel;
                }
                if rel <= JACOBI_TOL {
                    continue;
                }
                let phase = c / abs_c; // e^{j phi}
                let tau = (bb - aa) / (2.0 * abs_c);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                a.rotate(i, j, cs, sn, phase);
                v.rotate(i, j, cs, sn, phase);
            }
        }
        if off_max <= JACOBI_TOL {
            return Ok(());
        }
        last_off = off_max;
    }
    Err(Error::SvdNoConvergence { sweeps: MAX_SWEEPS, off: last_off })
}

/// Greedy deterministic completion of an orthonormal column set to a full
/// basis of dimension `dim`, using re-orthogonalized canonical vectors.
fn complete_basis(cols: &mut Vec<Vec<Complex64>>, dim: usize) {
    while cols.len() < dim {
        let mut best: Option<(usize, Vec<Complex64>, f64)> = None;
        for cand in 0..dim {
            let mut w = vec![Complex64::new(0.0, 0.0); dim];
            w[cand] = Complex64::new(1.0, 0.0);
            for q in cols.iter() {
                let proj: Complex64 = q.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= proj * qi;
                }
            }
            let norm = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if best.as_ref().map(|(_, _, n)| norm > *n).unwrap_or(true) {
                best = Some((cand, w, norm));
            }
        }
        let (_, mut w, norm) = best.expect("dim > 0");
        debug_assert!(norm > 1e-8, "completion candidate degenerate");
        for c in w.iter_mut() {
            *c /= norm;
        }
        // Second orthogonalization pass for 1e-10-grade unitarity.
        for q in cols.iter() {
            let proj: Complex64 = q.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= proj * qi;
            }
        }
        let norm2 = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in w.iter_mut() {
            *c /= norm2;
        }
        cols.push(w);
    }
}

fn cols_to_cmat(cols: &[Vec<Complex64>]) -> CMat {
    let rows = cols[0].len();
    let mut m = CMat::zeros(rows, cols.len());
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            m.set(i, j, v);
        }
    }
    m
}

fn svd_inner(m: &CMat, full_v: bool) -> Result<SvdResult> {
    if m.rows == 0 || m.cols == 0 {
        return Err(Error::Shape("SVD requires a non-empty matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::Domain("SVD input contains non-finite entries".into()));
    }
    let (p, q) = (m.rows, m.cols);
    let k = p.min(q);

    // Work on the side with the fewer columns so the Jacobi set is k wide.
    // For p <= q use A = m^H (q x p): m = V_A Sigma U_A^H.
    let transposed = p <= q;
    let work = if transposed { m.adjoint() } else { m.clone() };
    let (wm, wn) = (work.rows, work.cols);
    debug_assert!(wm >= wn && wn == k);

    let mut a = Cols((0..wn)
        .map(|j| (0..wm).map(|i| work.at(i, j)).collect())
        .collect());
    let mut acc = Cols((0..wn)
        .map(|j| {
            let mut col = vec![Complex64::new(0.0, 0.0); wn];
            col[j] = Complex64::new(1.0, 0.0);
            col
        })
        .collect());
    hestenes(&mut a, &mut acc)?;

    // Sort by singular value, descending; stable on index for ties.
    let mut order: Vec<usize> = (0..wn).collect();
    let norms: Vec<f64> = (0..wn).map(|j| a.norms_sq(j).sqrt()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut left_cols: Vec<Vec<Complex64>> = Vec::with_capacity(wn); // columns of U_A (length wm)
    for &j in &order {
        let sigma = norms[j];
        if sigma > 0.0 {
            left_cols.push(a.0[j].iter().map(|c| c / sigma).collect());
        }
    }
    let right_cols: Vec<Vec<Complex64>> = order.iter().map(|&j| acc.0[j].clone()).collect();

    // Map back to factors of m and complete bases where needed.
    let (mut u_cols, mut v_cols) = if transposed {
        // U_H = V_A (p x p), V_H thin = U_A (q x k).
        (right_cols, left_cols)
    } else {
        (left_cols, right_cols)
    };
    complete_basis(&mut u_cols, p);
    // Zero-norm columns were dropped above; completion pads the factor back
    // to k (thin) or q (full) orthonormal columns.
    complete_basis(&mut v_cols, if full_v { q } else { k });

    // Phase convention: in each U column, the largest-magnitude entry is made
    // real and positive; paired V columns absorb the same rotation.
    for col in 0..p {
        let u_col = &mut u_cols[col];
        let mut best = 0usize;
        for (i, c) in u_col.iter().enumerate() {
            if c.norm_sqr() > u_col[best].norm_sqr() {
                best = i;
            }
        }
        let mag = u_col[best].norm();
        if mag > 0.0 {
            let rot = (u_col[best] / mag).conj();
            for c in u_col.iter_mut() {
                *c *= rot;
            }
            if col < v_cols.len() {
                for c in v_cols[col].iter_mut() {
                    *c *= rot;
                }
            }
        }
    }
    // Unpaired V completion columns get the same per-column convention so the
    // full factorization is deterministic.
    for col in p.min(v_cols.len())..v_cols.len() {
        let v_col = &mut v_cols[col];
        let mut best = 0usize;
        for (i, c) in v_col.iter().enumerate() {
            if c.norm_sqr() > v_col[best].norm_sqr() {
                best = i;
            }
        }
        let mag = v_col[best].norm();
        if mag > 0.0 {
            let rot = (v_col[best] / mag).conj();
            for c in v_col.iter_mut() {
                *c *= rot;
            }
        }
    }

    Ok(SvdResult { u: cols_to_cmat(&u_cols), s, v: cols_to_cmat(&v_cols) })
}

/// Full SVD of a complex matrix; see [`SvdResult`] for the conventions.
pub fn svd(m: &CMat) -> Result<SvdResult> {
    svd_inner(m, true)
}

/// Per-RB SVD of a channel realization, keeping U and S and discarding V.
pub fn extract_emev(h: &ChannelRealization) -> Result<EigenFeatures> {
    let (n_rb, n_r, n_t) = (h.n_rb, h.n_r, h.n_t);
    let per_rb: Vec<(Vec<Complex64>, Vec<f64>)> = (0..n_rb)
        .into_par_iter()
        .map(|rb| {
            let m = CMat {
                rows: n_r,
                cols: n_t,
                data: h.rb_slice(rb).to_vec(),
            };
            let res = svd_inner(&m, false)
                .map_err(|e| Error::Domain(format!("RB {rb}: {e}")))?;
            let mut s_row = res.s.clone();
            s_row.resize(n_r, 0.0);
            Ok((res.u.data, s_row))
        })
        .collect::<Result<_>>()?;

    let mut u_stack = Vec::with_capacity(n_rb * n_r * n_r);
    let mut s_stack = Vec::with_capacity(n_rb * n_r);
    for (u, s) in per_rb {
        u_stack.extend(u);
        s_stack.extend(s);
    }
    Ok(EigenFeatures { u_stack, s_stack, n_rb, n_r, label: h.label })
}

/// Transmit precoding `x_t = V x`.
pub fn precode(v: &CMat, x: &[Complex64]) -> Result<Vec<Complex64>> {
    v.mul_vec(x)
}

/// Channel application `y = H x_t + n`.
pub fn transmit(h: &CMat, x_t: &[Complex64], noise: &[Complex64]) -> Result<Vec<Complex64>> {
    if noise.len() != h.rows {
        return Err(Error::Shape(format!(
            "noise length {} does not match {} receive antennas",
            noise.len(),
            h.rows
        )));
    }
    let mut y = h.mul_vec(x_t)?;
    for (yi, ni) in y.iter_mut().zip(noise) {
        *yi += ni;
    }
    Ok(y)
}

/// Receive de-precoding `U^H y`.
pub fn deprecode(u: &CMat, y: &[Complex64]) -> Result<Vec<Complex64>> {
    u.adjoint().mul_vec(y)
}
